//! Point configurations and the distance-only geometric quantities built on
//! them: pairwise distances, triangle and quadrilateral areas, tetrahedron
//! volumes from the Cayley-Menger determinant, and the quadrilateral
//! polynomial `g`.
//!
//! Every "equals zero" test in this crate uses the absolute tolerance
//! [`TOLERANCE`] applied to a quantity that has been scaled by the matching
//! power of the configuration diameter.

use nalgebra::Matrix5;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance used for every degeneracy and equality test.
pub const TOLERANCE: f64 = 1e-9;

/// An ordered list of `n` points in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointConfig {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointConfig {
    /// Builds a configuration, checking that every row has `dim` finite
    /// coordinates. Distinctness is checked lazily by
    /// [`pairwise_distances`] and [`PointConfig::check_distinct`].
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidConfig("a configuration needs at least one point".into()));
        }
        for (row, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidConfig(format!(
                    "point {row} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig(format!("point {row} has a non-finite coordinate")));
            }
        }
        Ok(Self { dim, points })
    }

    /// Builds a configuration from rows, taking the dimension from the first.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        Self::new(dim, rows.iter().map(|r| r.as_ref().to_vec()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(&self.points[i], &self.points[j])
    }

    /// Largest pairwise distance; `0` for a single point.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    /// Dense `n x n` distance matrix in row-major order.
    pub fn distance_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = self.distance(i, j);
                out[i * n + j] = d;
                out[j * n + i] = d;
            }
        }
        out
    }

    /// Fails with [`Error::DegenerateInput`] naming the first coincident pair.
    pub fn check_distinct(&self) -> Result<()> {
        let limit = TOLERANCE * self.diameter();
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                if self.distance(i, j) <= limit {
                    return Err(Error::DegenerateInput { i, j });
                }
            }
        }
        Ok(())
    }

    /// The configuration restricted to `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.dim, indices.iter().map(|&i| self.points[i].clone()).collect())
    }

    /// The configuration with point `i` removed.
    pub fn without(&self, i: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&k| k != i).collect();
        self.subset(&keep)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A distance between points `i < j` of some configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceRecord {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

impl DistanceRecord {
    pub fn new(i: usize, j: usize, value: f64) -> Self {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        Self { i, j, value }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.i == v || self.j == v
    }
}

/// All `n(n-1)/2` labelled distances of a configuration, sorted by
/// `(value, i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMultiset {
    n: usize,
    records: Vec<DistanceRecord>,
}

impl DistanceMultiset {
    /// Validates that `records` covers every unordered pair of `0..n` exactly
    /// once and sorts it.
    pub fn from_records(n: usize, mut records: Vec<DistanceRecord>) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if records.len() != expected {
            return Err(Error::InvalidConfig(format!(
                "{} distances given, {expected} needed for {n} points",
                records.len()
            )));
        }
        let mut seen = vec![false; expected];
        for r in &records {
            if r.i >= r.j || r.j >= n {
                return Err(Error::InvalidConfig(format!("bad index pair ({}, {})", r.i, r.j)));
            }
            if !(r.value.is_finite() && r.value >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "distance ({}, {}) is not a nonnegative number",
                    r.i, r.j
                )));
            }
            let k = pair_rank(r.i, r.j, n);
            if seen[k] {
                return Err(Error::InvalidConfig(format!("pair ({}, {}) appears twice", r.i, r.j)));
            }
            seen[k] = true;
        }
        sort_records(&mut records);
        Ok(Self { n, records })
    }

    /// Builds a multiset from bare values with synthetic labels. Used where
    /// only the distribution of distances is known.
    pub fn from_values(n: usize, values: &[f64]) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if values.len() != expected {
            return Err(Error::InvalidConfig(format!(
                "{} distances given, {expected} needed for {n} points",
                values.len()
            )));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut records = Vec::with_capacity(expected);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                records.push(DistanceRecord::new(i, j, sorted[k]));
                k += 1;
            }
        }
        Self::from_records(n, records)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DistanceRecord] {
        &self.records
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.records.last().map(|r| r.value).unwrap_or(0.0)
    }

    /// Multiset equality of the values within `TOLERANCE` times the larger
    /// diameter.
    pub fn same_distribution(&self, other: &Self) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let tol = TOLERANCE * self.max_value().max(other.max_value()).max(f64::MIN_POSITIVE);
        self.records
            .iter()
            .zip(&other.records)
            .all(|(a, b)| (a.value - b.value).abs() <= tol)
    }
}

fn sort_records(records: &mut [DistanceRecord]) {
    records.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
}

/// Index of the unordered pair `{i, j}` (with `i < j`) in lexicographic order.
pub fn pair_rank(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All `C(n, 2)` Euclidean distances, sorted ascending with ties broken by
/// index pair.
pub fn pairwise_distances(config: &PointConfig) -> Result<DistanceMultiset> {
    let n = config.len();
    let limit = TOLERANCE * config.diameter();
    let mut records = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let value = config.distance(i, j);
            if value <= limit {
                return Err(Error::DegenerateInput { i, j });
            }
            records.push(DistanceRecord { i, j, value });
        }
    }
    sort_records(&mut records);
    Ok(DistanceMultiset { n, records })
}

/// Heron area of a triangle from its side lengths, evaluated as
/// `sqrt(s (s - 2a)(s - 2b)(s - 2c)) / 4` with `s` the full perimeter.
///
/// Factors in `[-TOLERANCE * s, 0)` are clamped to zero, so collinear
/// triples give `0` instead of an error.
pub fn triangle_area(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0) || !(a + b + c).is_finite() {
        return Err(Error::NotATriangle(a, b, c));
    }
    let s = a + b + c;
    let slack = TOLERANCE * s;
    let mut product = s;
    for f in [s - 2.0 * a, s - 2.0 * b, s - 2.0 * c] {
        if f < -slack {
            return Err(Error::NotATriangle(a, b, c));
        }
        product *= f.max(0.0);
    }
    Ok(0.25 * product.sqrt())
}

/// Area of a quadrilateral from its diagonals `(r, s)` and sides
/// `(a, b, c, d)`, where `a, c` and `b, d` are the pairs of opposite sides:
/// `sqrt(4 r^2 s^2 - (a^2 + c^2 - b^2 - d^2)^2) / 4`.
pub fn quad_area(diagonals: (f64, f64), sides: (f64, f64, f64, f64)) -> Result<f64> {
    let radicand = quad_radicand(diagonals, sides);
    let (r, s) = diagonals;
    let (a, b, c, d) = sides;
    let shift = a * a + c * c - b * b - d * d;
    let scale = 4.0 * r * r * s * s + shift * shift;
    if radicand < -TOLERANCE * scale {
        return Err(Error::NotAQuadrilateral(format!(
            "negative radicand {radicand:e}"
        )));
    }
    Ok(0.25 * radicand.max(0.0).sqrt())
}

fn quad_radicand((r, s): (f64, f64), (a, b, c, d): (f64, f64, f64, f64)) -> f64 {
    let shift = a * a + c * c - b * b - d * d;
    4.0 * r * r * s * s - shift * shift
}

/// A triangle of a configuration: three vertices, the three side records
/// `(v0v1, v0v2, v1v2)` and its Heron area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleShape {
    pub vertices: [usize; 3],
    pub sides: [DistanceRecord; 3],
    pub area: f64,
}

impl TriangleShape {
    pub fn from_config(config: &PointConfig, vertices: [usize; 3]) -> Result<Self> {
        let [i, j, k] = vertices;
        let sides = [
            DistanceRecord::new(i, j, config.distance(i, j)),
            DistanceRecord::new(i, k, config.distance(i, k)),
            DistanceRecord::new(j, k, config.distance(j, k)),
        ];
        let area = triangle_area(sides[0].value, sides[1].value, sides[2].value)?;
        Ok(Self { vertices, sides, area })
    }
}

/// A quadrilateral split into a diagonal pair and a side cycle `(a, b, c, d)`
/// with `a, c` opposite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadShape {
    pub vertices: [usize; 4],
    pub diagonals: (DistanceRecord, DistanceRecord),
    pub sides: [DistanceRecord; 4],
    pub area: f64,
}

impl QuadShape {
    /// Diagonals as a value pair.
    pub fn diagonal_values(&self) -> (f64, f64) {
        (self.diagonals.0.value, self.diagonals.1.value)
    }

    /// Sides as a value tuple `(a, b, c, d)`.
    pub fn side_values(&self) -> (f64, f64, f64, f64) {
        let [a, b, c, d] = self.sides;
        (a.value, b.value, c.value, d.value)
    }

    /// Six distances in vertex-pair order `(01, 02, 03, 12, 13, 23)` of
    /// `self.vertices`.
    pub fn six_values(&self) -> [f64; 6] {
        let mut all = vec![self.diagonals.0, self.diagonals.1];
        all.extend_from_slice(&self.sides);
        six_in_pair_order(&self.vertices, &all).expect("quad records cover all pairs")
    }

    /// The split among the three perfect matchings of `K4` with the largest
    /// quadrilateral radicand, without checking planarity. Never fails for
    /// six records that cover the pairs of four vertices.
    pub fn best_split(six: &[DistanceRecord]) -> Result<Self> {
        let vertices = quad_vertices(six)?;
        let values = six_in_pair_order(&vertices, six)?;
        let record = |a: usize, b: usize| {
            *six.iter()
                .find(|r| {
                    (r.i == vertices[a] && r.j == vertices[b]) || (r.i == vertices[b] && r.j == vertices[a])
                })
                .expect("pair present")
        };
        // Perfect matchings of K4 on local vertex slots.
        const MATCHINGS: [[(usize, usize); 2]; 3] =
            [[(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 3), (1, 2)]];
        let value_of = |(a, b): (usize, usize)| values[local_pair_slot(a, b)];

        let mut best: Option<(f64, QuadShape)> = None;
        for (m, diag) in MATCHINGS.iter().enumerate() {
            let opp1 = MATCHINGS[(m + 1) % 3];
            let opp2 = MATCHINGS[(m + 2) % 3];
            // Cycle a, b, c, d: a = opp1[0], b shares a vertex with a's second endpoint.
            let a = opp1[0];
            let (b, d) = if opp2[0].0 == a.1 || opp2[0].1 == a.1 {
                (opp2[0], opp2[1])
            } else {
                (opp2[1], opp2[0])
            };
            let c = opp1[1];
            let diagonals = (value_of(diag[0]), value_of(diag[1]));
            let sides = (value_of(a), value_of(b), value_of(c), value_of(d));
            let radicand = quad_radicand(diagonals, sides);
            if best.as_ref().is_none_or(|(r, _)| radicand > *r) {
                let shape = QuadShape {
                    vertices,
                    diagonals: (record(diag[0].0, diag[0].1), record(diag[1].0, diag[1].1)),
                    sides: [
                        record(a.0, a.1),
                        record(b.0, b.1),
                        record(c.0, c.1),
                        record(d.0, d.1),
                    ],
                    area: 0.25 * radicand.max(0.0).sqrt(),
                };
                best = Some((radicand, shape));
            }
        }
        Ok(best.expect("three matchings").1)
    }

    pub fn from_config(config: &PointConfig, vertices: [usize; 4]) -> Result<Self> {
        identify_diagonals(&quad_records(config, vertices))
    }
}

/// The six distance records of four vertices of `config`.
pub fn quad_records(config: &PointConfig, vertices: [usize; 4]) -> Vec<DistanceRecord> {
    let mut out = Vec::with_capacity(6);
    for a in 0..4 {
        for b in a + 1..4 {
            let (i, j) = (vertices[a], vertices[b]);
            out.push(DistanceRecord::new(i, j, config.distance(i, j)));
        }
    }
    out
}

/// Slot of local pair `{a, b}` in `(01, 02, 03, 12, 13, 23)` order.
fn local_pair_slot(a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    match (a, b) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        (2, 3) => 5,
        _ => unreachable!("local pair out of range"),
    }
}

fn quad_vertices(six: &[DistanceRecord]) -> Result<[usize; 4]> {
    if six.len() != 6 {
        return Err(Error::NotAQuadrilateral(format!("{} records, expected 6", six.len())));
    }
    let mut verts: Vec<usize> = six.iter().flat_map(|r| [r.i, r.j]).collect();
    verts.sort_unstable();
    verts.dedup();
    if verts.len() != 4 {
        return Err(Error::NotAQuadrilateral(format!(
            "records span {} vertices, expected 4",
            verts.len()
        )));
    }
    Ok([verts[0], verts[1], verts[2], verts[3]])
}

fn six_in_pair_order(vertices: &[usize; 4], six: &[DistanceRecord]) -> Result<[f64; 6]> {
    let mut out = [f64::NAN; 6];
    for r in six {
        let a = vertices.iter().position(|&v| v == r.i);
        let b = vertices.iter().position(|&v| v == r.j);
        match (a, b) {
            (Some(a), Some(b)) if a != b => {
                let slot = local_pair_slot(a, b);
                if !out[slot].is_nan() {
                    return Err(Error::NotAQuadrilateral("a vertex pair appears twice".into()));
                }
                out[slot] = r.value;
            }
            _ => return Err(Error::NotAQuadrilateral("record outside the vertex set".into())),
        }
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::NotAQuadrilateral("a vertex pair is missing".into()));
    }
    Ok(out)
}

/// Splits six distances over four vertices into diagonals and sides.
///
/// The four points must be planar (vanishing Cayley-Menger determinant) and
/// not collinear; among the three perfect matchings of `K4` the one with the
/// largest radicand is taken as the diagonal pair. For points in convex
/// position this is the pair of crossing segments.
pub fn identify_diagonals(six: &[DistanceRecord]) -> Result<QuadShape> {
    let shape = QuadShape::best_split(six)?;
    let values = shape.six_values();
    let scale = values.iter().copied().fold(0.0, f64::max);
    let cm = cayley_menger_determinant(values);
    if cm.abs() > TOLERANCE * scale.powi(6) {
        return Err(Error::NotAQuadrilateral(format!(
            "points are not coplanar (Cayley-Menger determinant {cm:e})"
        )));
    }
    if shape.area <= TOLERANCE * scale * scale {
        return Err(Error::NotAQuadrilateral("all splits have zero area".into()));
    }
    Ok(shape)
}

/// The bordered `5 x 5` Cayley-Menger determinant of four points, from the
/// six distances in vertex-pair order `(01, 02, 03, 12, 13, 23)`. Equals
/// `288 V^2` for the tetrahedron they span.
pub fn cayley_menger_determinant(six: [f64; 6]) -> f64 {
    let sq: Vec<f64> = six.iter().map(|d| d * d).collect();
    let [d01, d02, d03, d12, d13, d23] = [sq[0], sq[1], sq[2], sq[3], sq[4], sq[5]];
    #[rustfmt::skip]
    let m = Matrix5::new(
        0.0, 1.0, 1.0, 1.0, 1.0,
        1.0, 0.0, d01, d02, d03,
        1.0, d01, 0.0, d12, d13,
        1.0, d02, d12, 0.0, d23,
        1.0, d03, d13, d23, 0.0,
    );
    m.determinant()
}

/// Volume of the tetrahedron with the given six edge lengths in vertex-pair
/// order `(01, 02, 03, 12, 13, 23)`, `sqrt(det / 288)`.
pub fn tetra_volume(six: [f64; 6]) -> Result<f64> {
    let scale = six.iter().copied().fold(0.0, f64::max);
    let det = cayley_menger_determinant(six);
    if det < -TOLERANCE * scale.powi(6) {
        return Err(Error::NotEmbeddable(det));
    }
    Ok((det.max(0.0) / 288.0).sqrt())
}

/// The degree-three polynomial `g(U, V, W, X, Y, Z)`.
///
/// Evaluated on the squared distances of four points in vertex-pair order
/// `(01, 02, 03, 12, 13, 23)` it equals minus the Cayley-Menger determinant,
/// so it vanishes exactly when the four points are coplanar.
#[allow(clippy::too_many_arguments)]
pub fn g_poly(u: f64, v: f64, w: f64, x: f64, y: f64, z: f64) -> f64 {
    let (pos, neg) = g_term_groups(u, v, w, x, y, z);
    pos + neg
}

/// The positive-term and negative-term sums of [`g_poly`].
pub fn g_term_groups(u: f64, v: f64, w: f64, x: f64, y: f64, z: f64) -> (f64, f64) {
    let pos = 2.0 * u * u * z
        + 2.0 * u * z * z
        + 2.0 * v * v * y
        + 2.0 * v * y * y
        + 2.0 * x * x * w
        + 2.0 * x * w * w
        + 2.0 * u * v * x
        + 2.0 * u * y * w
        + 2.0 * v * w * z
        + 2.0 * x * y * z;
    let neg = -2.0 * u * v * y
        - 2.0 * u * v * z
        - 2.0 * u * x * w
        - 2.0 * u * x * z
        - 2.0 * u * y * z
        - 2.0 * u * w * z
        - 2.0 * v * x * y
        - 2.0 * v * x * w
        - 2.0 * v * y * w
        - 2.0 * v * y * z
        - 2.0 * x * y * w
        - 2.0 * x * w * z;
    (pos, neg)
}

/// [`g_poly`] applied to a six-tuple.
pub fn g_of(args: [f64; 6]) -> f64 {
    g_poly(args[0], args[1], args[2], args[3], args[4], args[5])
}
