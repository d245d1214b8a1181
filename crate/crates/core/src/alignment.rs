//! Rigid motions between labelled configurations, where point `i` of `P`
//! corresponds to point `i` of `Q`.

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{PointConfig, TOLERANCE};

/// `x -> rotation * x + translation` with an orthogonal `rotation`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub reflection: bool,
}

impl RigidMotion {
    pub fn identity(dim: usize) -> Self {
        Self {
            rotation: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
            reflection: false,
        }
    }

    /// Builds a motion, deriving the reflection flag from the determinant.
    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Self {
        let reflection = rotation.determinant() < 0.0;
        Self { rotation, translation, reflection }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply_point(&self, p: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(p);
        (&self.rotation * x + &self.translation).iter().copied().collect()
    }

    pub fn apply(&self, config: &PointConfig) -> Result<PointConfig> {
        if config.dim() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "motion acts on R^{}, configuration lives in R^{}",
                self.dim(),
                config.dim()
            )));
        }
        PointConfig::new(config.dim(), config.points().iter().map(|p| self.apply_point(p)).collect())
    }

    /// Largest entry of `R^T R - I`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim();
        (self.rotation.transpose() * &self.rotation - DMatrix::<f64>::identity(d, d)).amax()
    }
}

impl Serialize for RigidMotion {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self
            .rotation
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        let t: Vec<f64> = self.translation.iter().copied().collect();
        let mut s = serializer.serialize_struct("RigidMotion", 3)?;
        s.serialize_field("rotation", &rows)?;
        s.serialize_field("translation", &t)?;
        s.serialize_field("reflection", &self.reflection)?;
        s.end()
    }
}

/// Both configurations shifted to their centroids, stored as `n x D`
/// matrices (one point per row).
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub centroid_p: DVector<f64>,
    pub centroid_q: DVector<f64>,
}

impl CenteredPair {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn dim(&self) -> usize {
        self.p.ncols()
    }

    /// Largest row norm over both sides; the length scale for tolerances.
    pub fn scale(&self) -> f64 {
        let norm = |m: &DMatrix<f64>| m.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        norm(&self.p).max(norm(&self.q))
    }

    fn motion_from_rotation(&self, rotation: DMatrix<f64>) -> RigidMotion {
        let translation = &self.centroid_q - &rotation * &self.centroid_p;
        RigidMotion::new(rotation, translation)
    }
}

fn to_matrix(config: &PointConfig) -> DMatrix<f64> {
    let (n, d) = (config.len(), config.dim());
    DMatrix::from_fn(n, d, |i, j| config.point(i)[j])
}

fn check_pair(p: &PointConfig, q: &PointConfig) -> Result<()> {
    if p.len() != q.len() || p.dim() != q.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{} points in R^{} vs {} points in R^{}",
            p.len(),
            p.dim(),
            q.len(),
            q.dim()
        )));
    }
    Ok(())
}

/// Translates both configurations to their centroids.
pub fn center(p: &PointConfig, q: &PointConfig) -> Result<CenteredPair> {
    check_pair(p, q)?;
    let split = |m: DMatrix<f64>| {
        let centroid = m.row_mean().transpose();
        let mut centered = m;
        for mut row in centered.row_iter_mut() {
            row -= centroid.transpose();
        }
        (centered, centroid)
    };
    let (pc, cp) = split(to_matrix(p));
    let (qc, cq) = split(to_matrix(q));
    Ok(CenteredPair { p: pc, q: qc, centroid_p: cp, centroid_q: cq })
}

/// Numerical rank of `m` with singular values measured against `scale`.
fn rank(m: &DMatrix<f64>, scale: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let limit = TOLERANCE * scale;
    m.singular_values().iter().filter(|&&s| s > limit).count()
}

/// Least-squares proper rotation and translation taking `p` onto `q`.
pub fn kabsch(p: &PointConfig, q: &PointConfig) -> Result<RigidMotion> {
    kabsch_with(p, q, false)
}

/// Kabsch with an optional reflection. With `allow_reflection` the sign
/// correction is skipped and the optimum is taken over all of `O(D)`.
pub fn kabsch_with(p: &PointConfig, q: &PointConfig, allow_reflection: bool) -> Result<RigidMotion> {
    let pair = center(p, q)?;
    kabsch_centered(&pair, allow_reflection)
}

pub fn kabsch_centered(pair: &CenteredPair, allow_reflection: bool) -> Result<RigidMotion> {
    let d = pair.dim();
    let h = pair.p.transpose() * &pair.q;
    let scale = pair.scale();
    let required = if allow_reflection { d } else { d.saturating_sub(1) };
    let r = rank(&h, scale * scale * pair.n() as f64);
    if r < required || (d > 0 && r == 0) {
        return Err(Error::DegenerateGeometry { rank: r, required: required.max(1) });
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    let mut correction = DMatrix::<f64>::identity(d, d);
    if !allow_reflection && (&v * u.transpose()).determinant() < 0.0 {
        // The smallest singular value is flipped, whichever slot it sits in.
        let weakest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("nonempty");
        correction[(weakest, weakest)] = -1.0;
    }
    let rotation = v * correction * u.transpose();
    Ok(pair.motion_from_rotation(rotation))
}

/// Largest `|motion(p_i) - q_i|`.
pub fn max_residual(motion: &RigidMotion, p: &PointConfig, q: &PointConfig) -> Result<f64> {
    check_pair(p, q)?;
    let moved = motion.apply(p)?;
    Ok((0..p.len())
        .map(|i| crate::geometry::euclidean(moved.point(i), q.point(i)))
        .fold(0.0, f64::max))
}

/// Root-mean-square of `|motion(p_i) - q_i|`.
pub fn rms_residual(motion: &RigidMotion, p: &PointConfig, q: &PointConfig) -> Result<f64> {
    check_pair(p, q)?;
    let moved = motion.apply(p)?;
    let sum: f64 = (0..p.len())
        .map(|i| crate::geometry::euclidean(moved.point(i), q.point(i)).powi(2))
        .sum();
    Ok((sum / p.len() as f64).sqrt())
}

/// Rotation solving `R P_D = Q_D`, where the columns of `P_D` are the
/// first `D` centered points (in lexicographic index order) that are
/// linearly independent.
///
/// On exactly congruent inputs this is the aligning rotation. On noisy
/// inputs the result is generally not orthogonal.
pub fn rotation_change_of_basis(pair: &CenteredPair) -> Result<RigidMotion> {
    let (n, d) = (pair.n(), pair.dim());
    let scale = pair.scale();
    let r = rank(&pair.p, scale);
    if r < d {
        return Err(Error::DegenerateGeometry { rank: r, required: d });
    }
    let limit = TOLERANCE * scale.powi(d as i32);
    let mut subset: Vec<usize> = (0..d).collect();
    loop {
        let pd = DMatrix::from_fn(d, d, |row, col| pair.p[(subset[col], row)]);
        if pd.determinant().abs() > limit {
            let qd = DMatrix::from_fn(d, d, |row, col| pair.q[(subset[col], row)]);
            let inv = pd.try_inverse().ok_or(Error::DegenerateGeometry { rank: r, required: d })?;
            return Ok(pair.motion_from_rotation(qd * inv));
        }
        if !next_combination(&mut subset, n) {
            return Err(Error::DegenerateGeometry { rank: r, required: d });
        }
    }
}

/// Advances `c` to the next `k`-subset of `0..n` in lexicographic order.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for pos in (0..k).rev() {
        if c[pos] < n - k + pos {
            c[pos] += 1;
            for later in pos + 1..k {
                c[later] = c[later - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Left singular vectors of a `D x n` matrix, with signs fixed so that the
/// largest-magnitude entry of every right singular vector is positive and
/// columns ordered by decreasing singular value.
fn canonical_left_vectors(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let top = sigma[0];
    if top <= 0.0 || sigma[d - 1] <= TOLERANCE * top {
        let r = sigma.iter().filter(|&&s| s > TOLERANCE * top).count();
        return Err(Error::DegenerateGeometry { rank: r, required: d });
    }
    if sigma.windows(2).any(|w| w[0] - w[1] <= 1e-6 * top) {
        return Err(Error::AmbiguousSvd);
    }
    let mut out = DMatrix::zeros(d, d);
    for (slot, &k) in order.iter().enumerate() {
        let row = v_t.row(k);
        let pivot = row.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        out.set_column(slot, &(u.column(k) * sign));
    }
    Ok(out)
}

/// `R = U_Q U_P^T` from canonical singular value decompositions of the
/// centered coordinate matrices.
///
/// Fails with [`Error::AmbiguousSvd`] when two singular values are within a
/// relative gap of `1e-6`, since the singular vectors are then not unique.
pub fn rotation_svd_route(pair: &CenteredPair) -> Result<RigidMotion> {
    let up = canonical_left_vectors(&pair.p.transpose())?;
    let uq = canonical_left_vectors(&pair.q.transpose())?;
    Ok(pair.motion_from_rotation(uq * up.transpose()))
}

/// Whether the Gram matrices of the centered configurations agree to within
/// `tol * scale^2` entrywise, which holds exactly when an orthogonal map
/// takes one onto the other.
pub fn gramian_congruent(pair: &CenteredPair, tol: f64) -> bool {
    let gp = &pair.p * pair.p.transpose();
    let gq = &pair.q * pair.q.transpose();
    let scale = pair.scale();
    (gp - gq).amax() <= tol * scale * scale
}

/// Deviations of a labelled pair, compared against an `eps` budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonReport {
    pub eps: f64,
    pub max_point_deviation: f64,
    pub max_pair_deviation: f64,
    /// Every `|p_i - q_i| < eps / 2`.
    pub pointwise_ok: bool,
    /// Every `| |p_i - p_j| - |q_i - q_j| | <= eps`.
    pub pairwise_ok: bool,
}

impl EpsilonReport {
    /// The pointwise bound implies the pairwise one by the triangle
    /// inequality; this is `false` only if that implication is broken.
    pub fn implication_holds(&self) -> bool {
        !self.pointwise_ok || self.pairwise_ok
    }
}

pub fn epsilon_close_check(p: &PointConfig, q: &PointConfig, eps: f64) -> Result<EpsilonReport> {
    check_pair(p, q)?;
    let n = p.len();
    let max_point_deviation = (0..n)
        .map(|i| crate::geometry::euclidean(p.point(i), q.point(i)))
        .fold(0.0, f64::max);
    let mut max_pair_deviation = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            max_pair_deviation = max_pair_deviation.max((p.distance(i, j) - q.distance(i, j)).abs());
        }
    }
    Ok(EpsilonReport {
        eps,
        max_point_deviation,
        max_pair_deviation,
        pointwise_ok: max_point_deviation < eps / 2.0,
        pairwise_ok: max_pair_deviation <= eps,
    })
}

/// A uniformly random element of `O(D)` (or `SO(D)` when `proper`), from the
/// QR factorisation of a Gaussian matrix.
pub fn random_orthogonal<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize, proper: bool) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        if r[(k, k)] < 0.0 {
            let flipped = -q.column(k);
            q.set_column(k, &flipped);
        }
    }
    if proper && q.determinant() < 0.0 {
        let flipped = -q.column(0);
        q.set_column(0, &flipped);
    }
    q
}

/// A random motion with a Haar rotation and a translation drawn from
/// `[-spread, spread]^D`.
pub fn random_motion<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize, proper: bool, spread: f64) -> RigidMotion {
    let rotation = random_orthogonal(rng, dim, proper);
    let translation = DVector::from_fn(dim, |_, _| rng.random_range(-spread..=spread));
    RigidMotion::new(rotation, translation)
}
