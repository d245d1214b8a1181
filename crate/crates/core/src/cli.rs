//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 when the answer is "not congruent" or "not
//! reconstructible", 1 on any error and 64 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::alignment::{center, kabsch_with, max_residual, rotation_change_of_basis, rotation_svd_route, RigidMotion};
use crate::error::{Error, Result};
use crate::geometry::PointConfig;
use crate::io::{format_config, load_config, load_distances, save_config};
use crate::labeling::{ten_step_label, Matcher, ShapeMode};
use crate::reconstruct3d::reconstruct;
use crate::reconstructibility::{exhaustive_check, randomized_check};
use crate::simulate::{default_n_grid, simulate_error, write_csv, RunConfig, DEFAULT_EPS_GRID, DEFAULT_REPEATS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "prockit", version, about = "Congruence, labeling, alignment and reconstruction of point configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Tri,
    Quad,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Kabsch,
    Basis,
    Svd,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find the labelings between two point files.
    Match {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "tri")]
        mode: Mode,
        /// Match distances up to a ratio of 1 +- E instead of exactly.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Rigid motion taking A onto B, point i onto point i.
    Align {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "kabsch")]
        method: Method,
        /// Kabsch only: permit an improper orthogonal part.
        #[arg(long)]
        allow_reflection: bool,
        /// Reorder B by the first full labeling before aligning.
        #[arg(long)]
        relabel: bool,
    },
    /// Test whether the distance distribution determines the configuration.
    CheckReconstructible {
        a: PathBuf,
        /// Visit every 11-tuple (the default).
        #[arg(long, conflicts_with = "samples")]
        exhaustive: bool,
        /// Check this many random tuples instead.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0, requires = "samples")]
        seed: u64,
    },
    /// Rebuild a 3D configuration from a distance file and its hull volume.
    Reconstruct3d {
        dists: PathBuf,
        #[arg(long)]
        volume: f64,
        #[arg(long)]
        n: usize,
        /// Write the points here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Alignment error over a grid of noise levels and sizes, as CSV.
    Simulate {
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',')]
        eps_grid: Option<Vec<f64>>,
        /// Comma-separated sizes, or `start:end:step`.
        #[arg(long)]
        n_grid: Option<String>,
        #[arg(long, default_value_t = DEFAULT_REPEATS)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_n_grid(s: &str) -> Result<Vec<usize>> {
    let bad = |m: String| Error::InvalidConfig(format!("n grid `{s}`: {m}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| bad(e.to_string()));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, end, step] => {
            let step = num(step)?;
            if step == 0 {
                return Err(bad("step must be positive".into()));
            }
            Ok((num(start)?..=num(end)?).step_by(step).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(bad("expected a list or start:end:step".into())),
    }
}

#[derive(Serialize)]
struct AlignOutput<'a> {
    motion: &'a RigidMotion,
    max_residual: f64,
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(out)?;
    Ok(())
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Match { a, b, mode, eps } => {
            let (p, q) = (load_config(a)?, load_config(b)?);
            let mode = match mode {
                Mode::Tri => ShapeMode::Triangle,
                Mode::Quad => ShapeMode::Quad,
            };
            let matcher = eps.map_or(Matcher::Exact, Matcher::Epsilon);
            let result = ten_step_label(&p, &q, mode, matcher)?;
            print_json(out, &result)?;
            Ok(if result.congruent { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Align { a, b, method, allow_reflection, relabel } => {
            let p = load_config(a)?;
            let mut q = load_config(b)?;
            if relabel {
                q = relabelled(&p, &q)?;
            }
            let motion = match method {
                Method::Kabsch => kabsch_with(&p, &q, allow_reflection)?,
                Method::Basis => rotation_change_of_basis(&center(&p, &q)?)?,
                Method::Svd => rotation_svd_route(&center(&p, &q)?)?,
            };
            let residual = max_residual(&motion, &p, &q)?;
            print_json(out, &AlignOutput { motion: &motion, max_residual: residual })?;
            writeln!(out, "max_residual {residual:.1e}")?;
            Ok(EXIT_OK)
        }
        Command::CheckReconstructible { a, exhaustive: _, samples, seed } => {
            let p = load_config(a)?;
            let reconstructible = match samples {
                Some(x) => {
                    let report = randomized_check(&p, x, seed)?;
                    print_json(out, &report)?;
                    report.verdict.is_reconstructible()
                }
                None => {
                    let verdict = exhaustive_check(&p)?;
                    print_json(out, &verdict)?;
                    verdict.is_reconstructible()
                }
            };
            Ok(if reconstructible { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Reconstruct3d { dists, volume, n, out: path } => {
            let d = load_distances(dists)?;
            let config = reconstruct(&d, volume, n)?;
            match path {
                Some(path) => save_config(path, &config)?,
                None => out.write_all(format_config(&config).as_bytes())?,
            }
            Ok(EXIT_OK)
        }
        Command::Simulate { eps_grid, n_grid, repeats, seed, out: path } => {
            let config = RunConfig {
                eps_grid: eps_grid.unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec()),
                n_grid: n_grid.as_deref().map(parse_n_grid).transpose()?.unwrap_or_else(default_n_grid),
                repeats,
                seed,
            };
            let records = simulate_error(&config)?;
            match path {
                Some(path) => write_csv(&records, std::fs::File::create(path)?)?,
                None => write_csv(&records, &mut *out)?,
            }
            Ok(EXIT_OK)
        }
    }
}

/// `q` reordered so that point `i` corresponds to point `i` of `p`.
fn relabelled(p: &PointConfig, q: &PointConfig) -> Result<PointConfig> {
    let result = ten_step_label(p, q, ShapeMode::Triangle, Matcher::Exact)?;
    let labeling = result
        .best
        .first()
        .filter(|_| result.congruent)
        .ok_or_else(|| Error::ShapeMismatch("no full labeling between the two files".into()))?;
    let rows = (0..p.len()).map(|i| q.point(labeling.get(i).expect("full labeling")).to_vec()).collect();
    PointConfig::new(q.dim(), rows)
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut buf = Vec::new();
    let outcome = crate::thread_pool().install(|| execute(cli.command, &mut buf));
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(&buf).and_then(|_| stdout.flush());
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
