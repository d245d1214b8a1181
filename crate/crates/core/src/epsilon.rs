//! Intervals for triangle areas, quadrilateral areas and the polynomial `g`
//! when every distance may be off by a ratio in `[1 - E, 1 + E]`.
//!
//! Each interval is computed from the reference (undistorted) shape and
//! contains every value the distorted shape can take.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::geometry::{g_term_groups, triangle_area, QuadShape};

/// Per-pair distortion ratios `eps_ij`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DistortionBudget {
    eps: BTreeMap<(usize, usize), f64>,
}

impl DistortionBudget {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, i: usize, j: usize, eps: f64) {
        assert!((0.0..1.0).contains(&eps), "distortion must lie in [0, 1)");
        let key = if i < j { (i, j) } else { (j, i) };
        self.eps.insert(key, eps);
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.eps.get(&key).copied().unwrap_or(0.0)
    }

    /// `E`, the largest `eps_st` over pairs inside `vertices`.
    pub fn max_over(&self, vertices: &[usize]) -> f64 {
        let mut e = 0.0_f64;
        for (a, &i) in vertices.iter().enumerate() {
            for &j in &vertices[a + 1..] {
                e = e.max(self.get(i, j));
            }
        }
        e
    }
}

/// `lo <= A <= hi`, together with the two correction terms subtracted from
/// and added to the (scaled) reference radicand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaInterval {
    pub lo: f64,
    pub hi: f64,
    pub h1: f64,
    pub h2: f64,
}

impl AreaInterval {
    pub fn contains(&self, area: f64) -> bool {
        let slack = 1e-12 * self.hi.max(1.0);
        area >= self.lo - slack && area <= self.hi + slack
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Heron radicand `s (s - 2a)(s - 2b)(s - 2c)` with `s` the perimeter,
/// sixteen times the squared area.
pub fn heron_radicand(a: f64, b: f64, c: f64) -> f64 {
    let s = a + b + c;
    s * (s - 2.0 * a) * (s - 2.0 * b) * (s - 2.0 * c)
}

/// Area interval for a triangle whose sides are the reference sides `b`
/// scaled by ratios in `[1 - e, 1 + e]`.
///
/// With `s'` the reference perimeter, `alpha_m = s' - 2 q_m` and
/// `beta_m = (s' + 2 q_m) e`, the radicand lies in `[S' - H1, S' + H2]` where
///
/// ```text
/// H1 = s' [a3 b2 (a1 - b1) + a1 b3 (a2 - b2) + a2 b1 (a3 - b3) + b1 b2 b3]
/// H2 = s' [a3 b2 (a1 + b1) + a1 b3 (a2 + b2) + a2 b1 (a3 + b3) + b1 b2 b3]
/// ```
///
/// When some `alpha_m < beta_m` the distorted triangle can flatten, and `H1`
/// is replaced by `S'` so the lower end becomes zero.
pub fn triangle_interval(b: (f64, f64, f64), e: f64) -> AreaInterval {
    let q = [b.0, b.1, b.2];
    let sp: f64 = q.iter().sum();
    let alpha = q.map(|x| sp - 2.0 * x);
    let beta = q.map(|x| (sp + 2.0 * x) * e);
    let [a1, a2, a3] = alpha;
    let [b1, b2, b3] = beta;
    let s_ref = sp * a1 * a2 * a3;
    let mut h1 = sp * (a3 * b2 * (a1 - b1) + a1 * b3 * (a2 - b2) + a2 * b1 * (a3 - b3) + b1 * b2 * b3);
    let h2 = sp * (a3 * b2 * (a1 + b1) + a1 * b3 * (a2 + b2) + a2 * b1 * (a3 + b3) + b1 * b2 * b3);
    if alpha.iter().zip(&beta).any(|(a, b)| a < b) {
        h1 = s_ref.max(h1);
    }
    let b_sq = s_ref.max(0.0) / 16.0;
    AreaInterval {
        lo: (b_sq - h1 / 16.0).max(0.0).sqrt(),
        hi: (b_sq + h2 / 16.0).max(0.0).sqrt(),
        h1,
        h2,
    }
}

/// Area interval for a triangle given by its sides, convenience wrapper that
/// also returns the reference area.
pub fn triangle_interval_with_area(b: (f64, f64, f64), e: f64) -> crate::Result<(f64, AreaInterval)> {
    Ok((triangle_area(b.0, b.1, b.2)?, triangle_interval(b, e)))
}

struct QuadTerms {
    rs_sq: f64,
    shift: f64,
    total: f64,
    radicand: f64,
}

fn quad_terms(q: &QuadShape) -> QuadTerms {
    let (r, s) = q.diagonal_values();
    let (a, b, c, d) = q.side_values();
    let shift = a * a + c * c - b * b - d * d;
    let total = a * a + b * b + c * c + d * d;
    let rs_sq = (r * s).powi(2);
    QuadTerms { rs_sq, shift, total, radicand: 4.0 * rs_sq - shift * shift }
}

/// Area interval for a quadrilateral whose six distances are those of `q`
/// scaled by ratios in `[1 - e, 1 + e]`.
///
/// Each squared distance moves inside `x^2 [(1 - e)^2, (1 + e)^2]`, so
/// `(r s)^2` lies in `(r s)^2 [(1 - e)^4, (1 + e)^4]` and the shift
/// `a^2 + c^2 - b^2 - d^2` lies within `2 e (a^2 + b^2 + c^2 + d^2)` of
/// `(1 + e^2)` times its reference value. The interval is bounded with those
/// two ranges directly. `h1` and `h2` are reported as the equivalent
/// corrections around `B^2 (1 + e^2)^2`.
pub fn quad_interval(q: &QuadShape, e: f64) -> AreaInterval {
    let t = quad_terms(q);
    let centre_shift = t.shift.abs() * (1.0 + e * e);
    let spread = 2.0 * e * t.total;
    let lo_radicand = 4.0 * t.rs_sq * (1.0 - e).powi(4) - (centre_shift + spread).powi(2);
    let hi_radicand = 4.0 * t.rs_sq * (1.0 + e).powi(4) - (centre_shift - spread).max(0.0).powi(2);
    let scaled = t.radicand * (1.0 + e * e).powi(2);
    AreaInterval {
        lo: 0.25 * lo_radicand.max(0.0).sqrt(),
        hi: 0.25 * hi_radicand.max(0.0).sqrt(),
        h1: scaled - lo_radicand,
        h2: hi_radicand - scaled,
    }
}

/// The simplified closed form with the constants
///
/// ```text
/// H1 = S~ 2e (2e S~ + S' (1 + e^2))        H^1 = 16 (r s)^2 (e - e^2 + e^3) + H1
/// H2 = S~ 2e (2e S~ - S' (1 + e^2))        H^2 = 16 (r s)^2 (e + e^2 + e^3) - H2
/// ```
///
/// and `B^2 (1 + e^2)^2 -/+ H^/16`. Kept for comparison only: sampled
/// distortions fall outside it, so [`quad_interval`] is the one used for
/// matching.
pub fn quad_interval_closed_form(q: &QuadShape, e: f64) -> AreaInterval {
    let t = quad_terms(q);
    let h1 = t.total * (2.0 * e) * (2.0 * e * t.total + t.shift * (1.0 + e * e));
    let h2 = t.total * (2.0 * e) * (2.0 * e * t.total - t.shift * (1.0 + e * e));
    let hat1 = 16.0 * t.rs_sq * (e - e * e + e.powi(3)) + h1;
    let hat2 = 16.0 * t.rs_sq * (e + e * e + e.powi(3)) - h2;
    let scaled = t.radicand * (1.0 + e * e).powi(2);
    AreaInterval {
        lo: 0.25 * (scaled - hat1).max(0.0).sqrt(),
        hi: 0.25 * (scaled + hat2).max(0.0).sqrt(),
        h1: hat1,
        h2: hat2,
    }
}

/// Range of `g` when each of its six arguments is scaled by a ratio in
/// `[1 - eps, 1 + eps]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GInterval {
    pub lo: f64,
    pub hi: f64,
    /// `g` at the reference arguments times `1 + 3 eps^2`.
    pub centre: f64,
    /// Half-width, `(P + |N|)(3 eps + eps^3)` for the positive and negative
    /// term sums `P` and `N`.
    pub h: f64,
}

impl GInterval {
    pub fn contains(&self, value: f64) -> bool {
        let slack = 1e-12 * self.lo.abs().max(self.hi.abs()).max(1.0);
        value >= self.lo - slack && value <= self.hi + slack
    }

    /// Whether every admissible distortion keeps `g` away from zero.
    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// Every monomial of `g` has degree three, so under the distortion the
/// positive group `P` stays in `P [(1 - eps)^3, (1 + eps)^3]` and the
/// negative group `N` in `N [(1 + eps)^3, (1 - eps)^3]`. Expanding the cubes
/// gives the centred form `g (1 + 3 eps^2) +/- (P - N)(3 eps + eps^3)`, which
/// is the same interval.
pub fn g_interval(six_ref: [f64; 6], eps: f64) -> GInterval {
    let [u, v, w, x, y, z] = six_ref;
    let (pos, neg) = g_term_groups(u, v, w, x, y, z);
    let down = (1.0 - eps).powi(3);
    let up = (1.0 + eps).powi(3);
    let lo = neg * up + pos * down;
    let hi = neg * down + pos * up;
    GInterval {
        lo,
        hi,
        centre: (pos + neg) * (1.0 + 3.0 * eps * eps),
        h: (pos - neg) * (3.0 * eps + eps.powi(3)),
    }
}
