//! Deciding whether a configuration is determined by its distance
//! distribution, through the 11-tuple test on `g`.
//!
//! An 11-tuple assigns distinct points to the roles
//! `(i0, i1, i2, j1, j2, k1, k2, l1, l2, m1, m2)`. `g` is evaluated on the
//! squared distances `d(i0,i1), d(i0,i2), d(j1,j2), d(k1,k2), d(l1,l2),
//! d(m1,m2)`. If no tuple makes `g` vanish the configuration is
//! reconstructible from its distances.
//!
//! Roles are counted without the symmetries inside each group: the triple
//! `{i0, i1, i2}` is a set with `i0` its smallest element and `i1 < i2`,
//! and every pair is unordered (stored ascending). The four pairs keep
//! their order. This gives `C(n,3) C(n-3,2) C(n-5,2) C(n-7,2) C(n-9,2)`
//! tuples, which equals `n! / (n - 11)! / 96`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::epsilon::g_interval;
use crate::error::{Error, Result};
use crate::geometry::{g_of, PointConfig, TOLERANCE};

/// Default cap on the number of tuples [`exhaustive_check`] will visit.
pub const DEFAULT_BUDGET: u128 = 100_000_000;

/// Samples per independently seeded chunk in [`randomized_check`].
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ElevenTuple {
    /// `(i0, i1, i2, j1, j2, k1, k2, l1, l2, m1, m2)`.
    pub roles: [usize; 11],
}

impl ElevenTuple {
    /// Normalises the role groups of eleven distinct indices taken in
    /// sequence: the first three form the triple, then four pairs.
    pub fn from_sequence(seq: [usize; 11]) -> Self {
        let mut roles = seq;
        roles[..3].sort_unstable();
        for k in 0..4 {
            let at = 3 + 2 * k;
            if roles[at] > roles[at + 1] {
                roles.swap(at, at + 1);
            }
        }
        Self { roles }
    }

    /// The six distances fed to `g`, in argument order.
    pub fn distances(&self, config: &PointConfig) -> [f64; 6] {
        let r = &self.roles;
        [
            config.distance(r[0], r[1]),
            config.distance(r[0], r[2]),
            config.distance(r[3], r[4]),
            config.distance(r[5], r[6]),
            config.distance(r[7], r[8]),
            config.distance(r[9], r[10]),
        ]
    }

    /// `g` on the squared distances.
    pub fn g_value(&self, config: &PointConfig) -> f64 {
        g_of(self.distances(config).map(|d| d * d))
    }

    /// Whether `g` stays away from zero for every distortion of the squared
    /// distances by a ratio in `[1 - eps, 1 + eps]`.
    pub fn robustly_nonzero(&self, config: &PointConfig, eps: f64) -> bool {
        g_interval(self.distances(config).map(|d| d * d), eps).excludes_zero()
    }
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc.checked_mul(n - t)? / (t + 1);
    }
    Some(acc)
}

/// Number of role-distinct 11-tuples of an `n`-point configuration.
pub fn count_tuples(n: usize) -> Result<u128> {
    if n < 11 {
        return Err(Error::TooSmall(n));
    }
    let m = n as u128;
    let factors = [
        binomial(m, 3),
        binomial(m - 3, 2),
        binomial(m - 5, 2),
        binomial(m - 7, 2),
        binomial(m - 9, 2),
    ];
    factors
        .into_iter()
        .try_fold(1u128, |acc, f| acc.checked_mul(f?))
        .ok_or(Error::CountOverflow(n))
}

/// Lexicographic rank of the sorted `k`-subset `subset` of `0..m`.
fn rank_combination(subset: &[usize], m: usize) -> u128 {
    let k = subset.len();
    let mut rank = 0u128;
    let mut prev = 0usize;
    for (pos, &x) in subset.iter().enumerate() {
        for skipped in prev..x {
            rank += binomial((m - skipped - 1) as u128, (k - pos - 1) as u128).unwrap();
        }
        prev = x + 1;
    }
    rank
}

fn unrank_combination(mut rank: u128, m: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut x = 0usize;
    for pos in 0..k {
        loop {
            let block = binomial((m - x - 1) as u128, (k - pos - 1) as u128).unwrap();
            if rank < block {
                break;
            }
            rank -= block;
            x += 1;
        }
        out.push(x);
        x += 1;
    }
    out
}

const GROUPS: [usize; 5] = [3, 2, 2, 2, 2];

/// Position of `tuple` in the enumeration order used by
/// [`exhaustive_check`], in `0..count_tuples(n)`.
pub fn rank_tuple(tuple: &ElevenTuple, n: usize) -> u128 {
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut rank = 0u128;
    let mut at = 0;
    for &k in &GROUPS {
        let m = remaining.len();
        let group = &tuple.roles[at..at + k];
        let local: Vec<usize> = group.iter().map(|v| remaining.binary_search(v).expect("distinct roles")).collect();
        rank = rank * binomial(m as u128, k as u128).unwrap() + rank_combination(&local, m);
        remaining.retain(|v| !group.contains(v));
        at += k;
    }
    rank
}

/// Inverse of [`rank_tuple`].
pub fn unrank_tuple(rank: u128, n: usize) -> ElevenTuple {
    let mut sizes = Vec::new();
    let mut m = n;
    for &k in &GROUPS {
        sizes.push(binomial(m as u128, k as u128).unwrap());
        m -= k;
    }
    let mut digits = [0u128; 5];
    let mut r = rank;
    for g in (0..5).rev() {
        digits[g] = r % sizes[g];
        r /= sizes[g];
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut roles = [0usize; 11];
    let mut at = 0;
    for (g, &k) in GROUPS.iter().enumerate() {
        let local = unrank_combination(digits[g], remaining.len(), k);
        let picked: Vec<usize> = local.iter().map(|&t| remaining[t]).collect();
        roles[at..at + k].copy_from_slice(&picked);
        remaining.retain(|v| !picked.contains(v));
        at += k;
    }
    ElevenTuple { roles }
}

/// `|g| <= TOLERANCE * scale^6`, with `scale` the diameter; `g` is cubic
/// in squared distances.
fn zero_limit(config: &PointConfig) -> f64 {
    TOLERANCE * config.diameter().powi(6)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Reconstructible,
    NotReconstructible { witness: ElevenTuple, g: f64 },
}

impl Verdict {
    pub fn is_reconstructible(&self) -> bool {
        matches!(self, Verdict::Reconstructible)
    }
}

fn check_size(config: &PointConfig) -> Result<u128> {
    config.check_distinct()?;
    count_tuples(config.len())
}

/// Visits every tuple and reports the first (in rank order) on which `g`
/// vanishes.
pub fn exhaustive_check(config: &PointConfig) -> Result<Verdict> {
    exhaustive_check_with_budget(config, DEFAULT_BUDGET)
}

pub fn exhaustive_check_with_budget(config: &PointConfig, budget: u128) -> Result<Verdict> {
    let count = check_size(config)?;
    if count > budget {
        return Err(Error::UseRandomized { count, budget });
    }
    let n = config.len();
    let limit = zero_limit(config);
    let d2 = squared_matrix(config);
    let triples: Vec<[usize; 3]> = {
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    out.push([a, b, c]);
                }
            }
        }
        out
    };
    let found = triples.par_iter().find_map_first(|&[a, b, c]| {
        let rest: Vec<usize> = (0..n).filter(|&v| v != a && v != b && v != c).collect();
        let (u, v) = (d2[a * n + b], d2[a * n + c]);
        let mut roles = [a, b, c, 0, 0, 0, 0, 0, 0, 0, 0];
        search_pairs(&rest, 0, &mut roles, &mut [u, v, 0.0, 0.0, 0.0, 0.0], &d2, n, limit)
    });
    Ok(match found {
        Some((roles, g)) => Verdict::NotReconstructible { witness: ElevenTuple { roles }, g },
        None => Verdict::Reconstructible,
    })
}

fn squared_matrix(config: &PointConfig) -> Vec<f64> {
    config.distance_matrix().into_iter().map(|d| d * d).collect()
}

/// Fills the four pair slots in lexicographic order, returning the first
/// complete tuple with a vanishing `g`.
fn search_pairs(
    rest: &[usize],
    slot: usize,
    roles: &mut [usize; 11],
    args: &mut [f64; 6],
    d2: &[f64],
    n: usize,
    limit: f64,
) -> Option<([usize; 11], f64)> {
    if slot == 4 {
        let g = g_of(*args);
        return (g.abs() <= limit).then_some((*roles, g));
    }
    for x in 0..rest.len() {
        for y in x + 1..rest.len() {
            let (a, b) = (rest[x], rest[y]);
            roles[3 + 2 * slot] = a;
            roles[4 + 2 * slot] = b;
            args[2 + slot] = d2[a * n + b];
            let next: Vec<usize> = rest.iter().copied().filter(|&v| v != a && v != b).collect();
            if let Some(hit) = search_pairs(&next, slot + 1, roles, args, d2, n, limit) {
                return Some(hit);
            }
        }
    }
    None
}

/// Draws a uniform role-distinct tuple: eleven distinct indices by a
/// partial Fisher-Yates shuffle, grouped in sequence.
pub fn sample_tuple<R: Rng + ?Sized>(rng: &mut R, n: usize, scratch: &mut Vec<usize>) -> ElevenTuple {
    scratch.clear();
    scratch.extend(0..n);
    let mut seq = [0usize; 11];
    for (t, slot) in seq.iter_mut().enumerate() {
        let pick = rng.random_range(t..n);
        scratch.swap(t, pick);
        *slot = scratch[t];
    }
    ElevenTuple::from_sequence(seq)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomizedReport {
    pub verdict: Verdict,
    /// Total number of tuples `N`.
    pub tuples: u128,
    pub samples: usize,
    pub zeros: usize,
    /// `zeros / samples`, an estimate of the share of tuples on which `g`
    /// vanishes.
    pub zero_rate: f64,
    /// Estimated share of tuples on which `g` does not vanish.
    pub nonzero_rate: f64,
    /// Chance that `x` uniform samples all miss the vanishing tuples:
    /// `(|K1| / N)^x` with `K1` the non-vanishing tuples.
    pub error_bound: String,
    /// `nonzero_rate^x`, the same bound with the estimated share plugged in.
    pub error_estimate: f64,
}

/// Samples `x` tuples (deterministic in `seed`) and reports a vanishing
/// tuple if one is drawn. A `Reconstructible` verdict may be wrong with the
/// reported probability; `NotReconstructible` always carries a witness.
///
/// Samples are drawn in chunks of 4096, chunk `c` from the ChaCha stream
/// `c` of `seed`, so the result does not depend on the thread count.
pub fn randomized_check(config: &PointConfig, x: usize, seed: u64) -> Result<RandomizedReport> {
    if x == 0 {
        return Err(Error::PreconditionFailed("at least one sample is required".into()));
    }
    let tuples = check_size(config)?;
    let n = config.len();
    let limit = zero_limit(config);
    let d2 = squared_matrix(config);
    let chunks = x.div_ceil(CHUNK);
    let per_chunk: Vec<(usize, Option<(ElevenTuple, f64)>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let take = CHUNK.min(x - c * CHUNK);
            let mut scratch = Vec::with_capacity(n);
            let mut zeros = 0;
            let mut first = None;
            for _ in 0..take {
                let t = sample_tuple(&mut rng, n, &mut scratch);
                let r = &t.roles;
                let g = g_of([
                    d2[r[0] * n + r[1]],
                    d2[r[0] * n + r[2]],
                    d2[r[3] * n + r[4]],
                    d2[r[5] * n + r[6]],
                    d2[r[7] * n + r[8]],
                    d2[r[9] * n + r[10]],
                ]);
                if g.abs() <= limit {
                    zeros += 1;
                    first.get_or_insert((t, g));
                }
            }
            (zeros, first)
        })
        .collect();
    let zeros: usize = per_chunk.iter().map(|c| c.0).sum();
    let verdict = match per_chunk.into_iter().find_map(|c| c.1) {
        Some((witness, g)) => Verdict::NotReconstructible { witness, g },
        None => Verdict::Reconstructible,
    };
    let zero_rate = zeros as f64 / x as f64;
    let nonzero_rate = 1.0 - zero_rate;
    Ok(RandomizedReport {
        verdict,
        tuples,
        samples: x,
        zeros,
        zero_rate,
        nonzero_rate,
        error_bound: format!("(|K1|/N)^{x}"),
        error_estimate: nonzero_rate.powi(x.min(i32::MAX as usize) as i32),
    })
}

/// Whether all `C(n, 2)` distances differ by more than the tolerance.
pub fn distances_distinct(config: &PointConfig) -> Result<bool> {
    let d = crate::geometry::pairwise_distances(config)?;
    let tol = TOLERANCE * d.max_value();
    Ok(d.records().windows(2).all(|w| w[1].value - w[0].value > tol))
}
