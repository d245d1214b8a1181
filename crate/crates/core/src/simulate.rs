//! Alignment error of noisy planar pairs over a grid of noise levels and
//! sizes.
//!
//! Each repeat draws `P` uniformly from the unit square, moves every point
//! by less than `eps / 2` in a uniform direction, applies a random proper
//! rigid motion to get `Q`, aligns with Kabsch and sums the squared
//! coordinate differences between the aligned `P` and `Q`.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::{kabsch, random_motion};
use crate::error::{Error, Result};
use crate::geometry::PointConfig;

pub const DEFAULT_EPS_GRID: [f64; 6] = [0.01, 0.02, 0.04, 0.06, 0.08, 0.1];
pub const DEFAULT_REPEATS: usize = 30;

pub fn default_n_grid() -> Vec<usize> {
    (10..=150).step_by(2).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub eps_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn defaults(seed: u64) -> Self {
        Self { eps_grid: DEFAULT_EPS_GRID.to_vec(), n_grid: default_n_grid(), repeats: DEFAULT_REPEATS, seed }
    }

    /// `eps` must lie in `[0, 1)`, every `n` must be at least 3 and there
    /// must be at least one repeat.
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.eps_grid.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(Error::InvalidConfig(format!("eps {e} is outside [0, 1)")));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 3) {
            return Err(Error::InvalidConfig(format!("n = {n} is too small to align")));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.eps_grid.is_empty() || self.n_grid.is_empty() {
            return Err(Error::InvalidConfig("empty grid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimRecord {
    pub eps: f64,
    pub n: usize,
    /// Squared differences summed over points, averaged over the two
    /// coordinates and the repeats.
    pub mean_sq_error: f64,
}

/// One repeat for one grid cell, on its own stream.
fn one_run(eps: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let p: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let noisy: Vec<Vec<f64>> = p
        .iter()
        .map(|x| {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let r = rng.random::<f64>() * eps / 2.0;
            vec![x[0] + r * angle.cos(), x[1] + r * angle.sin()]
        })
        .collect();
    let p = PointConfig::new(2, p)?;
    let motion = random_motion(rng, 2, true, 1.0);
    let q = motion.apply(&PointConfig::new(2, noisy)?)?;
    let fit = kabsch(&p, &q)?;
    let aligned = fit.apply(&p)?;
    let ssd: f64 = aligned
        .points()
        .iter()
        .zip(q.points())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum();
    Ok(ssd / 2.0)
}

/// Runs every cell of the grid in parallel. Cell `(e, k)` and repeat `r`
/// draw from stream `(e << 40) | (k << 20) | r` of a generator seeded with
/// `seed`, so results do not depend on scheduling. Records come back in grid
/// order, `eps` outer.
pub fn simulate_error(config: &RunConfig) -> Result<Vec<SimRecord>> {
    config.validate()?;
    let cells: Vec<(usize, usize)> =
        (0..config.eps_grid.len()).flat_map(|e| (0..config.n_grid.len()).map(move |k| (e, k))).collect();
    cells
        .par_iter()
        .map(|&(e, k)| {
            let (eps, n) = (config.eps_grid[e], config.n_grid[k]);
            let mut total = 0.0;
            for r in 0..config.repeats {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(((e as u64) << 40) | ((k as u64) << 20) | r as u64);
                total += one_run(eps, n, &mut rng)?;
            }
            Ok(SimRecord { eps, n, mean_sq_error: total / config.repeats as f64 })
        })
        .collect()
}

/// Writes records as CSV with the header `eps,n,mean_sq_error`.
pub fn write_csv<W: Write>(records: &[SimRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
