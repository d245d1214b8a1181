#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

use prockit::PointConfig;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_config<R: Rng>(rng: &mut R, n: usize, dim: usize) -> PointConfig {
    let points = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    PointConfig::new(dim, points).unwrap()
}

/// Points on the unit sphere, so every point is a hull vertex.
pub fn random_sphere_config<R: Rng>(rng: &mut R, n: usize) -> PointConfig {
    let points = (0..n)
        .map(|_| {
            let v: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(rng));
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect();
    PointConfig::new(3, points).unwrap()
}

fn sub(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Hull volume by brute force: a triple is a hull facet when every other
/// point lies on one side of its plane; the volume is the sum of cones from
/// the centroid over the facets. Assumes no four points are coplanar.
pub fn hull_volume(config: &PointConfig) -> f64 {
    let n = config.len();
    let pts = config.points();
    let centroid: Vec<f64> = (0..3).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
    let mut volume = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b) = (sub(&pts[j], &pts[i]), sub(&pts[k], &pts[i]));
                let sides: Vec<f64> = (0..n)
                    .filter(|&m| m != i && m != j && m != k)
                    .map(|m| det3(a, b, sub(&pts[m], &pts[i])))
                    .collect();
                if sides.iter().all(|&s| s > 0.0) || sides.iter().all(|&s| s < 0.0) {
                    volume += det3(a, b, sub(&centroid, &pts[i])).abs() / 6.0;
                }
            }
        }
    }
    volume
}

/// Largest `k` such that some `k` points of `p` map injectively onto points
/// of `q` with every pairwise distance preserved within `tol`, by
/// backtracking over partial maps.
pub fn max_common_support(p: &PointConfig, q: &PointConfig, tol: f64) -> usize {
    max_common_support_by(p, q, |a, b| (a - b).abs() <= tol)
}

/// As [`max_common_support`], with `agree(d_p, d_q)` deciding whether two
/// distances match.
pub fn max_common_support_by(p: &PointConfig, q: &PointConfig, agree: impl Fn(f64, f64) -> bool) -> usize {
    struct Ctx<'a, F> {
        p: &'a PointConfig,
        q: &'a PointConfig,
        agree: F,
    }
    fn go<F: Fn(f64, f64) -> bool>(c: &Ctx<F>, next: usize, map: &mut Vec<(usize, usize)>, used: &mut [bool], best: &mut usize) {
        *best = (*best).max(map.len());
        if next == c.p.len() || map.len() + (c.p.len() - next) <= *best {
            return;
        }
        for t in 0..c.q.len() {
            if used[t] || !map.iter().all(|&(a, b)| (c.agree)(c.p.distance(a, next), c.q.distance(b, t))) {
                continue;
            }
            used[t] = true;
            map.push((next, t));
            go(c, next + 1, map, used, best);
            map.pop();
            used[t] = false;
        }
        go(c, next + 1, map, used, best);
    }
    let ctx = Ctx { p, q, agree };
    let mut best = 0;
    go(&ctx, 0, &mut Vec::new(), &mut vec![false; q.len()], &mut best);
    best
}

/// Largest distance between corresponding points.
pub fn max_pointwise(a: &PointConfig, b: &PointConfig) -> f64 {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Cayley-Menger determinant of four points from their squared distances
/// in pair order `(01, 02, 03, 12, 13, 23)`, by LU.
pub fn cayley_menger(sq: [f64; 6]) -> f64 {
    let [d01, d02, d03, d12, d13, d23] = sq;
    #[rustfmt::skip]
    let m = nalgebra::Matrix5::new(
        0.0, 1.0, 1.0, 1.0, 1.0,
        1.0, 0.0, d01, d02, d03,
        1.0, d01, 0.0, d12, d13,
        1.0, d02, d12, 0.0, d23,
        1.0, d03, d13, d23, 0.0,
    );
    m.determinant()
}

/// Triangle area from side lengths by placing it in the plane and taking
/// the cross product. `None` when the sides violate the triangle
/// inequality.
pub fn triangle_area_by_coordinates(a: f64, b: f64, c: f64) -> Option<f64> {
    // Vertices (0,0), (a,0) and (x,y) with |(x,y)| = b and |(x,y)-(a,0)| = c.
    let x = (a * a + b * b - c * c) / (2.0 * a);
    let y2 = b * b - x * x;
    if y2 < -1e-12 * b * b {
        return None;
    }
    Some(0.5 * a * y2.max(0.0).sqrt())
}

/// Visits every role-distinct 11-tuple of `0..n` as
/// `(triple, [pair; 4])`, triple ascending and pairs ascending within.
pub fn for_each_tuple(n: usize, mut f: impl FnMut([usize; 3], [(usize, usize); 4])) {
    type Visit<'a> = &'a mut dyn FnMut(&[(usize, usize)]);
    fn pairs(rest: &[usize], depth: usize, acc: &mut Vec<(usize, usize)>, out: Visit) {
        if depth == 4 {
            out(acc);
            return;
        }
        for (x, &a) in rest.iter().enumerate() {
            for &b in &rest[x + 1..] {
                let left: Vec<usize> = rest.iter().copied().filter(|&v| v != a && v != b).collect();
                acc.push((a, b));
                pairs(&left, depth + 1, acc, out);
                acc.pop();
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let rest: Vec<usize> = (0..n).filter(|&v| v != i && v != j && v != k).collect();
                pairs(&rest, 0, &mut Vec::new(), &mut |ps| f([i, j, k], [ps[0], ps[1], ps[2], ps[3]]));
            }
        }
    }
}

/// Eleven planar points where the pairs `(3,4), (5,6), (7,8), (9,10)` copy
/// the distances `|a e|, |b c|, |b e|, |c e|` of a quadrilateral `a b c e`
/// with `a, b, c` the points `0, 1, 2`. `g` vanishes on that tuple.
pub fn planted_zero_config<R: Rng>(rng: &mut R) -> PointConfig {
    let mut pts: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let e = [rng.random::<f64>(), rng.random::<f64>()];
    let dist = |p: &[f64], q: &[f64]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let targets = [dist(&pts[0], &e), dist(&pts[1], &pts[2]), dist(&pts[1], &e), dist(&pts[2], &e)];
    for t in targets {
        let start = [rng.random::<f64>(), rng.random::<f64>()];
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        pts.push(start.to_vec());
        pts.push(vec![start[0] + t * angle.cos(), start[1] + t * angle.sin()]);
    }
    PointConfig::new(2, pts).unwrap()
}
