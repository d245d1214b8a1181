//! Recovering the point correspondence between two configurations from the
//! areas of their triangles (or quadrilaterals).
//!
//! Shapes of `P` and `Q` with matching areas are grouped into buckets. Each
//! matched pair of shapes proposes small vertex maps (seeds), and the seeds
//! are folded bucket by bucket into a set of partial labelings whose
//! distances agree pairwise. The largest labelings that survive give the
//! correspondence; points outside them are the bad points.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::epsilon::{quad_interval, triangle_interval, AreaInterval};
use crate::error::{Error, Result};
use crate::geometry::{pair_rank, quad_records, DistanceRecord, PointConfig, QuadShape, TriangleShape, TOLERANCE};

/// Upper bound on the number of live partial labelings.
pub const LABELING_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeMode {
    Triangle,
    Quad,
}

impl ShapeMode {
    pub fn arity(self) -> usize {
        match self {
            ShapeMode::Triangle => 3,
            ShapeMode::Quad => 4,
        }
    }
}

/// How distances and areas of `P` are compared with those of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Matcher {
    /// Equality within the global tolerance.
    Exact,
    /// Every distance of `P` within a ratio `[1 - E, 1 + E]` of its partner.
    Epsilon(f64),
}

/// A triangle or a quadrilateral of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Shape {
    Triangle(TriangleShape),
    Quad(QuadShape),
}

impl Shape {
    pub fn vertices(&self) -> &[usize] {
        match self {
            Shape::Triangle(t) => &t.vertices,
            Shape::Quad(q) => &q.vertices,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Triangle(t) => t.area,
            Shape::Quad(q) => q.area,
        }
    }

    /// Area interval for shapes whose distances are within `e` of these.
    fn interval(&self, e: f64) -> AreaInterval {
        match self {
            Shape::Triangle(t) => {
                triangle_interval((t.sides[0].value, t.sides[1].value, t.sides[2].value), e)
            }
            Shape::Quad(q) => quad_interval(q, e),
        }
    }
}

/// Shapes of `P` and `Q` considered to have the same area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeBucket {
    pub area: f64,
    pub members_p: Vec<Shape>,
    pub members_q: Vec<Shape>,
}

impl ShapeBucket {
    pub fn multiplicity(&self) -> usize {
        self.members_p.len() + self.members_q.len()
    }
}

/// The buckets, in processing order, and the points of each side that only
/// appear in unmatched shapes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeSets {
    pub buckets: Vec<ShapeBucket>,
    pub discarded_p: Vec<usize>,
    pub discarded_q: Vec<usize>,
}

/// One matched pair of shapes that contributed to a labeling: vertex
/// `p[t]` of `P` goes to `q[t]` of `Q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ShapeMatch {
    pub p: Vec<usize>,
    pub q: Vec<usize>,
}

/// An injective partial map from indices of `P` to indices of `Q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartialLabeling {
    /// `(p, q)` pairs sorted by `p`.
    pub pairs: Vec<(usize, usize)>,
    pub provenance: Vec<ShapeMatch>,
    #[serde(skip)]
    forward: Vec<Option<usize>>,
    #[serde(skip)]
    backward: Vec<Option<usize>>,
}

impl PartialLabeling {
    fn empty(n: usize) -> Self {
        Self { pairs: Vec::new(), provenance: Vec::new(), forward: vec![None; n], backward: vec![None; n] }
    }

    /// Builds a labeling from pairs, rejecting non-injective input.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut l = Self::empty(n);
        for &(p, q) in pairs {
            if p >= n || q >= n || l.forward[p].is_some() || l.backward[q].is_some() {
                return Err(Error::InvalidConfig(format!("pair ({p}, {q}) breaks injectivity")));
            }
            l.insert(p, q);
        }
        Ok(l)
    }

    fn insert(&mut self, p: usize, q: usize) {
        self.forward[p] = Some(q);
        self.backward[q] = Some(p);
        let at = self.pairs.partition_point(|&(a, _)| a < p);
        self.pairs.insert(at, (p, q));
    }

    pub fn support(&self) -> usize {
        self.pairs.len()
    }

    pub fn get(&self, p: usize) -> Option<usize> {
        self.forward.get(p).copied().flatten()
    }

    pub fn domain(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|&(p, _)| p).collect()
    }

    pub fn image(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|&(_, q)| q).collect()
    }

    fn contains_all(&self, other: &[(usize, usize)]) -> bool {
        other.iter().all(|&(p, q)| self.forward[p] == Some(q))
    }
}

/// Outcome of [`ten_step_label`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelingResult {
    /// All labelings of the largest support, sorted by their pairs.
    pub best: Vec<PartialLabeling>,
    pub max_support: usize,
    pub bad_p: Vec<usize>,
    pub bad_q: Vec<usize>,
    pub congruent: bool,
    /// Set when the live set hit [`LABELING_CAP`] and was trimmed.
    pub truncated: bool,
    pub discarded_p: Vec<usize>,
    pub discarded_q: Vec<usize>,
}

/// Pairwise agreement test between `(a -> b)` and `(c -> d)`.
struct Compat {
    n: usize,
    dp: Vec<f64>,
    dq: Vec<f64>,
    matcher: Matcher,
    tol: f64,
}

impl Compat {
    fn new(p: &PointConfig, q: &PointConfig, matcher: Matcher) -> Self {
        let scale = p.diameter().max(q.diameter());
        Self {
            n: p.len(),
            dp: p.distance_matrix(),
            dq: q.distance_matrix(),
            matcher,
            tol: TOLERANCE * scale,
        }
    }

    fn distances_agree(&self, dp: f64, dq: f64) -> bool {
        match self.matcher {
            Matcher::Exact => (dp - dq).abs() <= self.tol,
            Matcher::Epsilon(e) => {
                let slack = 1e-12;
                dp >= dq * (1.0 - e - slack) && dp <= dq * (1.0 + e + slack)
            }
        }
    }

    fn pair_ok(&self, (a, b): (usize, usize), (c, d): (usize, usize)) -> bool {
        if a == c {
            return b == d;
        }
        if b == d {
            return false;
        }
        self.distances_agree(self.dp[a * self.n + c], self.dq[b * self.n + d])
    }
}

/// Heron area of a triple, with rounding past the triangle inequality
/// treated as a flat triangle.
fn triangle_of(config: &PointConfig, vertices: [usize; 3]) -> TriangleShape {
    TriangleShape::from_config(config, vertices).unwrap_or_else(|_| {
        let [i, j, k] = vertices;
        TriangleShape {
            vertices,
            sides: [
                DistanceRecord::new(i, j, config.distance(i, j)),
                DistanceRecord::new(i, k, config.distance(i, k)),
                DistanceRecord::new(j, k, config.distance(j, k)),
            ],
            area: 0.0,
        }
    })
}

fn enumerate_shapes(config: &PointConfig, mode: ShapeMode) -> Vec<Shape> {
    let n = config.len();
    let k = mode.arity();
    if n < k {
        return Vec::new();
    }
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            for j in i + 1..n {
                for l in j + 1..n {
                    match mode {
                        ShapeMode::Triangle => out.push(Shape::Triangle(triangle_of(config, [i, j, l]))),
                        ShapeMode::Quad => {
                            for m in l + 1..n {
                                let six = quad_records(config, [i, j, l, m]);
                                let shape = QuadShape::best_split(&six).expect("four distinct vertices");
                                out.push(Shape::Quad(shape));
                            }
                        }
                    }
                }
            }
            out
        })
        .collect()
}

/// Groups shapes of `P` and `Q` by area.
///
/// In exact mode, areas equal within tolerance form one bucket; buckets are
/// ordered by multiplicity, then area. In epsilon mode every shape `A` of `P`
/// gets its own bucket holding the shapes `B` of `Q` whose area interval
/// contains `A`, ordered the same way.
pub fn build_shape_sets(p: &PointConfig, q: &PointConfig, mode: ShapeMode, matcher: Matcher) -> Result<ShapeSets> {
    check_inputs(p, q, mode)?;
    let shapes_p = enumerate_shapes(p, mode);
    let shapes_q = enumerate_shapes(q, mode);
    let scale = p.diameter().max(q.diameter());

    let mut buckets = match matcher {
        Matcher::Exact => exact_buckets(shapes_p.clone(), shapes_q.clone(), TOLERANCE * scale * scale),
        Matcher::Epsilon(e) => epsilon_buckets(&shapes_p, &shapes_q, e, scale),
    };
    buckets.sort_by(|a, b| a.multiplicity().cmp(&b.multiplicity()).then(a.area.total_cmp(&b.area)));

    let discards = |shapes: &[Shape], side: fn(&ShapeBucket) -> &Vec<Shape>| {
        let all: BTreeSet<usize> = shapes.iter().flat_map(|s| s.vertices().to_vec()).collect();
        let kept: BTreeSet<usize> = buckets.iter().flat_map(|b| side(b).iter().flat_map(|s| s.vertices().to_vec())).collect();
        all.difference(&kept).copied().collect::<Vec<_>>()
    };
    let discarded_p = discards(&shapes_p, |b| &b.members_p);
    let discarded_q = discards(&shapes_q, |b| &b.members_q);
    Ok(ShapeSets { buckets, discarded_p, discarded_q })
}

fn check_inputs(p: &PointConfig, q: &PointConfig, mode: ShapeMode) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch(format!("{} points vs {}", p.len(), q.len())));
    }
    if mode == ShapeMode::Quad && p.len() < 4 {
        return Err(Error::InvalidConfig("quadrilateral mode needs at least 4 points".into()));
    }
    p.check_distinct()?;
    q.check_distinct()?;
    Ok(())
}

fn exact_buckets(shapes_p: Vec<Shape>, shapes_q: Vec<Shape>, tol: f64) -> Vec<ShapeBucket> {
    let mut tagged: Vec<(bool, Shape)> = shapes_p
        .into_iter()
        .map(|s| (true, s))
        .chain(shapes_q.into_iter().map(|s| (false, s)))
        .collect();
    tagged.sort_by(|a, b| a.1.area().total_cmp(&b.1.area()));
    let mut out = Vec::new();
    let mut start = 0;
    while start < tagged.len() {
        let mut end = start + 1;
        while end < tagged.len() && tagged[end].1.area() - tagged[end - 1].1.area() <= tol {
            end += 1;
        }
        let group = &tagged[start..end];
        let members_p: Vec<Shape> = group.iter().filter(|t| t.0).map(|t| t.1.clone()).collect();
        let members_q: Vec<Shape> = group.iter().filter(|t| !t.0).map(|t| t.1.clone()).collect();
        if !members_p.is_empty() && !members_q.is_empty() {
            let area = group.iter().map(|t| t.1.area()).sum::<f64>() / group.len() as f64;
            out.push(ShapeBucket { area, members_p, members_q });
        }
        start = end;
    }
    out
}

fn epsilon_buckets(shapes_p: &[Shape], shapes_q: &[Shape], e: f64, scale: f64) -> Vec<ShapeBucket> {
    let slack = TOLERANCE * scale * scale;
    let mut intervals: Vec<(AreaInterval, usize)> =
        shapes_q.iter().enumerate().map(|(k, s)| (s.interval(e), k)).collect();
    intervals.sort_by(|a, b| a.0.lo.total_cmp(&b.0.lo));
    let widest = intervals.iter().map(|(iv, _)| iv.width()).fold(0.0, f64::max);
    shapes_p
        .par_iter()
        .filter_map(|a| {
            let area = a.area();
            let end = intervals.partition_point(|(iv, _)| iv.lo <= area + slack);
            let mut members_q: Vec<(usize, Shape)> = Vec::new();
            for (iv, k) in intervals[..end].iter().rev() {
                if iv.lo < area - widest - slack {
                    break;
                }
                if iv.hi + slack >= area {
                    members_q.push((*k, shapes_q[*k].clone()));
                }
            }
            if members_q.is_empty() {
                return None;
            }
            members_q.sort_by_key(|(k, _)| *k);
            Some(ShapeBucket {
                area,
                members_p: vec![a.clone()],
                members_q: members_q.into_iter().map(|(_, s)| s).collect(),
            })
        })
        .collect()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    fn recurse(pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for swap in pos..current.len() {
            current.swap(pos, swap);
            recurse(pos + 1, current, out);
            current.swap(pos, swap);
        }
    }
    recurse(0, &mut current, &mut out);
    out.sort();
    out
}

/// Vertex maps from `a` onto `b` under which every side matches.
fn seeds_for(a: &Shape, b: &Shape, compat: &Compat, perms: &[Vec<usize>]) -> Vec<Vec<(usize, usize)>> {
    let (va, vb) = (a.vertices(), b.vertices());
    let mut out = Vec::new();
    'perm: for perm in perms {
        let map: Vec<(usize, usize)> = va.iter().zip(perm).map(|(&x, &t)| (x, vb[t])).collect();
        for s in 0..map.len() {
            for t in s + 1..map.len() {
                if !compat.pair_ok(map[s], map[t]) {
                    continue 'perm;
                }
            }
        }
        out.push(map);
    }
    out
}

enum Relation {
    Contained,
    Compatible,
    Conflict,
}

fn relation(l: &PartialLabeling, alpha: &[(usize, usize)], compat: &Compat) -> Relation {
    if l.contains_all(alpha) {
        return Relation::Contained;
    }
    for &x in alpha {
        for &y in &l.pairs {
            if !compat.pair_ok(x, y) {
                return Relation::Conflict;
            }
        }
    }
    Relation::Compatible
}

fn extend(l: &mut PartialLabeling, alpha: &[(usize, usize)], event: &ShapeMatch) {
    for &(p, q) in alpha {
        if l.forward[p].is_none() {
            l.insert(p, q);
        }
    }
    l.provenance.push(event.clone());
}

/// The pairs of `l` that agree with every pair of `alpha`, joined with
/// `alpha`.
fn fork(l: &PartialLabeling, alpha: &[(usize, usize)], event: &ShapeMatch, compat: &Compat) -> PartialLabeling {
    let mut out = PartialLabeling::empty(compat.n);
    for &(p, q) in alpha {
        out.insert(p, q);
    }
    for &y in &l.pairs {
        if out.forward[y.0] == Some(y.1) {
            continue;
        }
        if alpha.iter().all(|&x| compat.pair_ok(x, y)) {
            out.insert(y.0, y.1);
        }
    }
    out.provenance = l
        .provenance
        .iter()
        .filter(|ev| ev.p.iter().zip(&ev.q).all(|(&a, &b)| out.forward[a] == Some(b)))
        .cloned()
        .collect();
    out.provenance.push(event.clone());
    out
}

fn is_subset(a: &PartialLabeling, b: &PartialLabeling) -> bool {
    a.support() <= b.support() && b.contains_all(&a.pairs)
}

/// Drops labelings contained in another one and exact duplicates.
fn prune(live: &mut Vec<PartialLabeling>) {
    live.sort_by(|a, b| b.support().cmp(&a.support()).then_with(|| a.pairs.cmp(&b.pairs)));
    let mut kept: Vec<PartialLabeling> = Vec::with_capacity(live.len());
    for l in live.drain(..) {
        if !kept.iter().any(|k| is_subset(&l, k)) {
            kept.push(l);
        }
    }
    *live = kept;
}

/// Keeps the `LABELING_CAP` largest labelings. Returns whether any were lost.
fn enforce_cap(live: &mut Vec<PartialLabeling>) -> bool {
    if live.len() <= LABELING_CAP {
        return false;
    }
    prune(live);
    if live.len() <= LABELING_CAP {
        return false;
    }
    live.truncate(LABELING_CAP);
    true
}

/// Labels `P` against `Q` by matching shape areas.
///
/// Buckets are visited in the order produced by [`build_shape_sets`]. Each
/// seed either lies inside a live labeling, extends it (when all cross
/// distances agree), or forks it: the pairs of the live labeling that agree
/// with the seed are kept together with the seed as a new labeling. A seed
/// that fits nowhere starts a labeling of its own.
///
/// When no shape produces a seed, labelings of size two are built from
/// single matching distances. Support below two carries no information and
/// is reported as an empty result.
pub fn ten_step_label(p: &PointConfig, q: &PointConfig, mode: ShapeMode, matcher: Matcher) -> Result<LabelingResult> {
    let sets = build_shape_sets(p, q, mode, matcher)?;
    let n = p.len();
    let compat = Compat::new(p, q, matcher);
    let perms = permutations(mode.arity());

    let mut live: Vec<PartialLabeling> = Vec::new();
    let mut truncated = false;
    for bucket in &sets.buckets {
        let mut seen: HashSet<Vec<(usize, usize)>> = HashSet::new();
        for a in &bucket.members_p {
            for b in &bucket.members_q {
                for mut alpha in seeds_for(a, b, &compat, &perms) {
                    alpha.sort_unstable();
                    if !seen.insert(alpha.clone()) {
                        continue;
                    }
                    let event = ShapeMatch {
                        p: alpha.iter().map(|x| x.0).collect(),
                        q: alpha.iter().map(|x| x.1).collect(),
                    };
                    fold_seed(&mut live, &alpha, &event, &compat);
                    truncated |= enforce_cap(&mut live);
                }
            }
        }
        prune(&mut live);
    }

    if live.is_empty() {
        live = pair_labelings(&compat);
        truncated |= enforce_cap(&mut live);
    }
    prune(&mut live);
    Ok(finish(live, sets, n, truncated))
}

fn fold_seed(live: &mut Vec<PartialLabeling>, alpha: &[(usize, usize)], event: &ShapeMatch, compat: &Compat) {
    let mut placed = false;
    let mut forks: Vec<PartialLabeling> = Vec::new();
    for l in live.iter_mut() {
        match relation(l, alpha, compat) {
            Relation::Contained => placed = true,
            Relation::Compatible => {
                extend(l, alpha, event);
                placed = true;
            }
            Relation::Conflict => forks.push(fork(l, alpha, event, compat)),
        }
    }
    if !placed && forks.is_empty() {
        let mut fresh = PartialLabeling::empty(compat.n);
        for &(p, q) in alpha {
            fresh.insert(p, q);
        }
        fresh.provenance.push(event.clone());
        live.push(fresh);
        return;
    }
    forks.sort_by(|a, b| b.support().cmp(&a.support()).then_with(|| a.pairs.cmp(&b.pairs)));
    for f in forks {
        if !live.iter().any(|l| is_subset(&f, l)) {
            live.push(f);
        }
    }
}

fn pair_labelings(compat: &Compat) -> Vec<PartialLabeling> {
    let n = compat.n;
    let mut out = Vec::new();
    for a in 0..n {
        for c in a + 1..n {
            for b in 0..n {
                for d in 0..n {
                    if b != d && compat.pair_ok((a, b), (c, d)) {
                        let mut l = PartialLabeling::empty(n);
                        l.insert(a, b);
                        l.insert(c, d);
                        out.push(l);
                    }
                }
            }
        }
    }
    out
}

fn finish(mut live: Vec<PartialLabeling>, sets: ShapeSets, n: usize, truncated: bool) -> LabelingResult {
    live.retain(|l| l.support() >= 2);
    let max_support = live.iter().map(|l| l.support()).max().unwrap_or(0);
    let mut best: Vec<PartialLabeling> = live.into_iter().filter(|l| l.support() == max_support).collect();
    best.sort_by(|a, b| a.pairs.cmp(&b.pairs));
    let (bad_p, bad_q) = match best.first() {
        Some(top) => {
            let dom = top.domain();
            let img = top.image();
            ((0..n).filter(|i| !dom.contains(i)).collect(), (0..n).filter(|i| !img.contains(i)).collect())
        }
        None => ((0..n).collect(), (0..n).collect()),
    };
    LabelingResult {
        congruent: max_support == n && n > 0,
        best,
        max_support,
        bad_p,
        bad_q,
        truncated,
        discarded_p: sets.discarded_p,
        discarded_q: sets.discarded_q,
    }
}

/// A point pair `(i, j)`.
pub type Edge = (usize, usize);

/// A bijection on the unordered pairs of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgePermutation {
    n: usize,
    images: Vec<(usize, usize)>,
}

impl EdgePermutation {
    /// Builds the permutation from `(pair, image)` entries covering every
    /// pair exactly once.
    pub fn new(n: usize, entries: &[(Edge, Edge)]) -> Result<Self> {
        let total = n * n.saturating_sub(1) / 2;
        let norm = |(a, b): (usize, usize)| if a < b { (a, b) } else { (b, a) };
        let mut images = vec![None; total];
        let mut hit = vec![false; total];
        for &(from, to) in entries {
            let (from, to) = (norm(from), norm(to));
            if from.0 == from.1 || to.0 == to.1 || from.1 >= n || to.1 >= n {
                return Err(Error::InvalidConfig(format!("bad pair in {from:?} -> {to:?}")));
            }
            let (k, t) = (pair_rank(from.0, from.1, n), pair_rank(to.0, to.1, n));
            if images[k].is_some() || hit[t] {
                return Err(Error::InvalidConfig("pair map is not a bijection".into()));
            }
            images[k] = Some(to);
            hit[t] = true;
        }
        let images: Option<Vec<_>> = images.into_iter().collect();
        let images = images.ok_or_else(|| Error::InvalidConfig("pair map does not cover every pair".into()))?;
        Ok(Self { n, images })
    }

    pub fn identity(n: usize) -> Self {
        let mut images = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                images.push((i, j));
            }
        }
        Self { n, images }
    }

    /// The pair map induced by sending point `i` to `sigma[i]`.
    pub fn from_point_permutation(sigma: &[usize]) -> Result<Self> {
        let n = sigma.len();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                entries.push(((i, j), (sigma[i], sigma[j])));
            }
        }
        Self::new(n, &entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn image(&self, i: usize, j: usize) -> (usize, usize) {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.images[pair_rank(a, b, self.n)]
    }
}

/// Whether a permutation of pairs comes from a permutation of points: for
/// all distinct `i, j, k` the images of `{i, j}` and `{i, k}` must share a
/// vertex. Not decidable by this test for `n = 4`.
pub fn relabelling_valid(phi: &EdgePermutation) -> Result<bool> {
    let n = phi.n();
    if n == 4 {
        return Err(Error::Unsupported("the pair criterion does not characterise relabellings for n = 4".into()));
    }
    for i in 0..n {
        for j in 0..n {
            for k in j + 1..n {
                if i == j || i == k {
                    continue;
                }
                let (a, b) = phi.image(i, j);
                let (c, d) = phi.image(i, k);
                if a != c && a != d && b != c && b != d {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// A permutation `sigma` with `|p_i - p_j| = |q_sigma(i) - q_sigma(j)|` for
/// all pairs, found by backtracking.
pub fn brute_force_congruence(p: &PointConfig, q: &PointConfig) -> Option<Vec<usize>> {
    let n = p.len();
    if n != q.len() {
        return None;
    }
    let tol = TOLERANCE * p.diameter().max(q.diameter());
    let (dp, dq) = (p.distance_matrix(), q.distance_matrix());
    let mut sigma = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn go(k: usize, n: usize, dp: &[f64], dq: &[f64], tol: f64, sigma: &mut [usize], used: &mut [bool]) -> bool {
        if k == n {
            return true;
        }
        for cand in 0..n {
            if used[cand] {
                continue;
            }
            if (0..k).all(|m| (dp[k * n + m] - dq[cand * n + sigma[m]]).abs() <= tol) {
                sigma[k] = cand;
                used[cand] = true;
                if go(k + 1, n, dp, dq, tol, sigma, used) {
                    return true;
                }
                used[cand] = false;
            }
        }
        false
    }
    go(0, n, &dp, &dq, tol, &mut sigma, &mut used).then_some(sigma)
}

fn congruent(p: &PointConfig, q: &PointConfig) -> Result<bool> {
    if p.len() <= 10 {
        Ok(brute_force_congruence(p, q).is_some())
    } else {
        Ok(ten_step_label(p, q, ShapeMode::Triangle, Matcher::Exact)?.congruent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjectureVerdict {
    /// Removing point `p` of `P` and point `q` of `Q` leaves congruent parts.
    Witness { p: usize, q: usize },
    Refuted,
}

/// For a pair with equal distance distributions that is not congruent,
/// looks for one point on each side whose removal leaves congruent
/// configurations. Pairs are scanned in `(p, q)` lexicographic order.
pub fn conjecture_check(p: &PointConfig, q: &PointConfig) -> Result<ConjectureVerdict> {
    let dp = crate::geometry::pairwise_distances(p)?;
    let dq = crate::geometry::pairwise_distances(q)?;
    if !dp.same_distribution(&dq) {
        return Err(Error::PreconditionFailed("the distance distributions differ".into()));
    }
    if congruent(p, q)? {
        return Err(Error::PreconditionFailed("the configurations are already congruent".into()));
    }
    let n = p.len();
    for i in 0..n {
        let sub_p = p.without(i)?;
        let dist_p = crate::geometry::pairwise_distances(&sub_p)?;
        for j in 0..n {
            let sub_q = q.without(j)?;
            if !dist_p.same_distribution(&crate::geometry::pairwise_distances(&sub_q)?) {
                continue;
            }
            if congruent(&sub_p, &sub_q)? {
                return Ok(ConjectureVerdict::Witness { p: i, q: j });
            }
        }
    }
    Ok(ConjectureVerdict::Refuted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{kabsch_with, max_residual, random_motion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointConfig {
        PointConfig::new(dim, (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect())
            .unwrap()
    }

    fn regular_polygon(k: usize) -> PointConfig {
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|t| {
                let a = std::f64::consts::TAU * t as f64 / k as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        PointConfig::new(2, rows).unwrap()
    }

    pub(crate) fn figure_one() -> (PointConfig, PointConfig) {
        (
            PointConfig::from_rows(&[[0.0, 0.0], [0.0, 1.0], [0.0, 2.0], [2.0, 1.0]]).unwrap(),
            PointConfig::from_rows(&[[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]]).unwrap(),
        )
    }

    fn aligned_residual(p: &PointConfig, q: &PointConfig, l: &PartialLabeling) -> f64 {
        let order: Vec<usize> = (0..p.len()).map(|i| l.get(i).unwrap()).collect();
        let q_sorted = q.subset(&order).unwrap();
        let m = kabsch_with(p, &q_sorted, true).unwrap();
        max_residual(&m, p, &q_sorted).unwrap()
    }

    #[test]
    fn generic_congruent_pair_has_unique_full_labeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_config(&mut rng, 8, 2);
        let mut q = random_motion(&mut rng, 2, false, 3.0).apply(&p).unwrap();
        let shuffle = [3, 0, 7, 1, 6, 2, 5, 4];
        q = q.subset(&shuffle).unwrap();
        let r = ten_step_label(&p, &q, ShapeMode::Triangle, Matcher::Exact).unwrap();
        assert!(r.congruent);
        assert_eq!(r.best.len(), 1);
        assert_eq!(r.max_support, 8);
        assert!(r.bad_p.is_empty() && r.bad_q.is_empty());
        assert!(aligned_residual(&p, &q, &r.best[0]) < 1e-9);
        for (i, &s) in shuffle.iter().enumerate() {
            assert_eq!(r.best[0].get(s), Some(i));
        }
    }

    #[test]
    fn equilateral_triangle_has_six_labelings() {
        let t = regular_polygon(3);
        let r = ten_step_label(&t, &t, ShapeMode::Triangle, Matcher::Exact).unwrap();
        assert_eq!(r.best.len(), 6);
        assert!(r.congruent);
    }

    #[test]
    fn regular_polygons_have_dihedral_many_labelings() {
        for k in [3, 4, 5] {
            let poly = regular_polygon(k);
            let r = ten_step_label(&poly, &poly, ShapeMode::Triangle, Matcher::Exact).unwrap();
            assert_eq!(r.best.len(), 2 * k, "k = {k}");
            assert!(r.best.iter().all(|l| l.support() == k));
        }
    }

    #[test]
    fn square_in_quad_mode_has_eight_labelings() {
        let sq = regular_polygon(4);
        let r = ten_step_label(&sq, &sq, ShapeMode::Quad, Matcher::Exact).unwrap();
        assert_eq!(r.best.len(), 8);
    }

    #[test]
    fn quad_mode_matches_generic_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = random_config(&mut rng, 7, 3);
        let q = random_motion(&mut rng, 3, true, 1.0).apply(&p).unwrap().subset(&[6, 5, 4, 3, 2, 1, 0]).unwrap();
        let r = ten_step_label(&p, &q, ShapeMode::Quad, Matcher::Exact).unwrap();
        assert!(r.congruent);
        assert_eq!(r.best.len(), 1);
        assert!(aligned_residual(&p, &q, &r.best[0]) < 1e-9);
    }

    #[test]
    fn figure_one_pair_is_not_congruent() {
        let (p, q) = figure_one();
        let dp = crate::geometry::pairwise_distances(&p).unwrap();
        let dq = crate::geometry::pairwise_distances(&q).unwrap();
        assert!(dp.same_distribution(&dq));
        let r = ten_step_label(&p, &q, ShapeMode::Triangle, Matcher::Exact).unwrap();
        assert!(!r.congruent);
        assert_eq!(r.max_support, 3);
        assert_eq!(r.bad_p.len(), 1);
        assert_eq!(r.bad_q.len(), 1);
        let sub_p = p.without(r.bad_p[0]).unwrap();
        let sub_q = q.without(r.bad_q[0]).unwrap();
        assert!(brute_force_congruence(&sub_p, &sub_q).is_some());
    }

    #[test]
    fn outlier_point_is_discarded() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let p = random_config(&mut rng, 6, 2);
        let q = random_motion(&mut rng, 2, true, 1.0).apply(&p).unwrap();
        let mut rows = p.points().to_vec();
        rows[2] = vec![-30.0, 55.0];
        let p = PointConfig::new(2, rows).unwrap();
        let sets = build_shape_sets(&p, &q, ShapeMode::Triangle, Matcher::Exact).unwrap();
        // The outlier's partner in Q has nothing left to match either.
        assert_eq!(sets.discarded_p, vec![2]);
        assert_eq!(sets.discarded_q, vec![2]);
    }

    #[test]
    fn congruent_pairs_bucket_every_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = random_config(&mut rng, 7, 2);
        let q = random_motion(&mut rng, 2, true, 1.0).apply(&p).unwrap();
        let sets = build_shape_sets(&p, &q, ShapeMode::Triangle, Matcher::Exact).unwrap();
        let total_p: usize = sets.buckets.iter().map(|b| b.members_p.len()).sum();
        assert_eq!(total_p, 35);
        assert!(sets.discarded_p.is_empty() && sets.discarded_q.is_empty());
    }

    #[test]
    fn labelings_are_invariant_under_motion_of_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let p = random_config(&mut rng, 6, 2);
        let mut rows = p.points().to_vec();
        rows[0][1] += 0.3;
        let q = PointConfig::new(2, rows).unwrap();
        let moved = random_motion(&mut rng, 2, false, 2.0).apply(&q).unwrap();
        let a = ten_step_label(&p, &q, ShapeMode::Triangle, Matcher::Exact).unwrap();
        let b = ten_step_label(&p, &moved, ShapeMode::Triangle, Matcher::Exact).unwrap();
        let pairs = |r: &LabelingResult| r.best.iter().map(|l| l.pairs.clone()).collect::<Vec<_>>();
        assert_eq!(pairs(&a), pairs(&b));
        assert_eq!(a.max_support, 5);
    }

    #[test]
    fn epsilon_mode_tolerates_small_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = random_config(&mut rng, 7, 2);
        let q = random_motion(&mut rng, 2, true, 1.0).apply(&p).unwrap();
        let noisy = PointConfig::new(
            2,
            q.points().iter().map(|r| r.iter().map(|x| x + rng.random_range(-1e-4..1e-4)).collect()).collect(),
        )
        .unwrap();
        assert!(!ten_step_label(&p, &noisy, ShapeMode::Triangle, Matcher::Exact).unwrap().congruent);
        let r = ten_step_label(&p, &noisy, ShapeMode::Triangle, Matcher::Epsilon(0.05)).unwrap();
        assert!(r.congruent);
        let l = &r.best[0];
        for &(a, b) in &l.pairs {
            for &(c, d) in &l.pairs {
                if a < c {
                    let ratio = p.distance(a, c) / noisy.distance(b, d);
                    assert!((0.95..=1.05).contains(&ratio));
                }
            }
        }
    }

    #[test]
    fn relabelling_examples() {
        assert!(relabelling_valid(&EdgePermutation::identity(5)).unwrap());
        assert!(relabelling_valid(&EdgePermutation::from_point_permutation(&[2, 0, 4, 1, 3]).unwrap()).unwrap());
        let mut entries = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                let img = match (i, j) {
                    (1, 2) => (3, 4),
                    (3, 4) => (1, 2),
                    other => other,
                };
                entries.push(((i, j), img));
            }
        }
        let swapped = EdgePermutation::new(5, &entries).unwrap();
        assert!(!relabelling_valid(&swapped).unwrap());
        assert!(matches!(relabelling_valid(&EdgePermutation::identity(4)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn induced_pair_maps_are_always_relabellings() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for n in [3, 5, 6, 7] {
            for _ in 0..20 {
                let mut sigma: Vec<usize> = (0..n).collect();
                for k in (1..n).rev() {
                    sigma.swap(k, rng.random_range(0..=k));
                }
                let phi = EdgePermutation::from_point_permutation(&sigma).unwrap();
                assert!(relabelling_valid(&phi).unwrap());
            }
        }
    }

    #[test]
    fn conjecture_examples() {
        let (p, q) = figure_one();
        assert!(matches!(conjecture_check(&p, &q).unwrap(), ConjectureVerdict::Witness { .. }));
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = random_config(&mut rng, 5, 2);
        let b = random_motion(&mut rng, 2, true, 1.0).apply(&a).unwrap();
        assert!(matches!(conjecture_check(&a, &b), Err(Error::PreconditionFailed(_))));
        let c = random_config(&mut rng, 5, 2);
        assert!(matches!(conjecture_check(&a, &c), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
    }
}
