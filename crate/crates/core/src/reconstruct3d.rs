//! Rebuilding a convex configuration in `R^3` from its unlabelled distances
//! and the volume of its convex hull.
//!
//! 1. Sort the distances.
//! 2. List every triple of distances that can bound a triangle.
//! 3. Glue pairs of triangles along their smallest edge and close them with
//!    a sixth distance to get candidate tetrahedra.
//! 4. Search for a face-to-face assembly of candidates whose volumes add up
//!    to the hull volume and which uses `n` vertices.
//! 5. Place the vertices by trilateration.
//!
//! Points inside the hull are reached only when some triangulation of the
//! hull uses them as vertices, which the search finds as a star of
//! tetrahedra around them; otherwise the result is `NoAssembly`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{cayley_menger_determinant, triangle_area, DistanceMultiset, PointConfig, TOLERANCE};

/// Three distances, by position in the sorted list, that satisfy the
/// triangle inequality. `edges[0]` is the smallest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleCandidate {
    pub edges: [usize; 3],
    pub values: [f64; 3],
}

/// Six distances forming a tetrahedron `ABCD`, listed as
/// `(AB, AC, AD, BC, BD, CD)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TetraCandidate {
    pub edges: [usize; 6],
    pub values: [f64; 6],
    pub volume: f64,
    /// Volume within tolerance of zero.
    pub flat: bool,
}

/// Vertex slots of the six edges in `(AB, AC, AD, BC, BD, CD)` order.
const EDGE_VERTICES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

const SLOT: [[usize; 4]; 4] = [[usize::MAX, 0, 1, 2], [0, usize::MAX, 3, 4], [1, 3, usize::MAX, 5], [2, 4, 5, usize::MAX]];

fn edge_slot(a: usize, b: usize) -> usize {
    SLOT[a][b]
}

impl TetraCandidate {
    /// The four faces `ABC, ABD, ACD, BCD`.
    pub fn faces(&self) -> [TriangleCandidate; 4] {
        [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]].map(|[a, b, c]| {
            let slots = [edge_slot(a, b), edge_slot(a, c), edge_slot(b, c)];
            let mut pairs: Vec<(usize, f64)> = slots.iter().map(|&s| (self.edges[s], self.values[s])).collect();
            pairs.sort_by_key(|p| p.0);
            TriangleCandidate {
                edges: [pairs[0].0, pairs[1].0, pairs[2].0],
                values: [pairs[0].1, pairs[1].1, pairs[2].1],
            }
        })
    }

    /// Value of the edge between vertex slots `a` and `b`.
    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[edge_slot(a, b)]
    }
}

fn scale_of(d: &DistanceMultiset) -> f64 {
    d.max_value().max(f64::MIN_POSITIVE)
}

/// All triples `i < j < k` of positions in the sorted list with
/// `d_k < d_i + d_j` (or `<=` when `degenerate` is set), in lexicographic
/// order.
pub fn enumerate_triangles(d: &DistanceMultiset, degenerate: bool) -> Vec<TriangleCandidate> {
    let values = d.values();
    let e = values.len();
    let slack = TOLERANCE * scale_of(d);
    (0..e)
        .into_par_iter()
        .flat_map_iter(|i| {
            let values = &values;
            let mut out = Vec::new();
            for j in i + 1..e {
                for k in j + 1..e {
                    let gap = values[i] + values[j] - values[k];
                    let ok = if degenerate { gap >= -slack } else { gap > slack };
                    if ok {
                        out.push(TriangleCandidate { edges: [i, j, k], values: [values[i], values[j], values[k]] });
                    }
                }
            }
            out
        })
        .collect()
}

fn is_triangle(a: f64, b: f64, c: f64, slack: f64) -> bool {
    a + b - c > slack && a + c - b > slack && b + c - a > slack
}

/// Candidate tetrahedra from pairs of triangles sharing their smallest
/// edge `AB`.
///
/// For triangles `(h1, h2, h3)` and `(h1, h4, h5)` with disjoint other
/// edges, `C` gets `AC = h2, BC = h3` and `D` gets either `AD = h4, BD = h5`
/// or `AD = h5, BD = h4`. Any unused distance after `h1` that closes both
/// remaining faces as `CD` yields a candidate, kept when its Cayley-Menger
/// determinant is not negative.
pub fn enumerate_tetrahedra(d: &DistanceMultiset, triangles: &[TriangleCandidate]) -> Vec<TetraCandidate> {
    let values = d.values();
    let e = values.len();
    let scale = scale_of(d);
    let slack = TOLERANCE * scale;
    let flat_limit = volume_tolerance(scale);
    let mut by_first: BTreeMap<usize, Vec<&TriangleCandidate>> = BTreeMap::new();
    for t in triangles {
        by_first.entry(t.edges[0]).or_default().push(t);
    }
    let groups: Vec<(usize, Vec<&TriangleCandidate>)> = by_first.into_iter().collect();
    groups
        .par_iter()
        .flat_map_iter(|(h1, group)| {
            let values = &values;
            let mut out = Vec::new();
            for (a, t1) in group.iter().enumerate() {
                for t2 in &group[a + 1..] {
                    let (h2, h3) = (t1.edges[1], t1.edges[2]);
                    let (h4, h5) = (t2.edges[1], t2.edges[2]);
                    if h2 == h4 || h2 == h5 || h3 == h4 || h3 == h5 {
                        continue;
                    }
                    for (ad, bd) in [(h4, h5), (h5, h4)] {
                        for x in h1 + 1..e {
                            if [h2, h3, h4, h5].contains(&x) {
                                continue;
                            }
                            let (vac, vbc, vad, vbd, vx) = (values[h2], values[h3], values[ad], values[bd], values[x]);
                            if !is_triangle(vac, vad, vx, slack) || !is_triangle(vbc, vbd, vx, slack) {
                                continue;
                            }
                            let edges = [*h1, h2, ad, h3, bd, x];
                            let six = edges.map(|k| values[k]);
                            let det = cayley_menger_determinant(six);
                            if det < -TOLERANCE * scale.powi(6) {
                                continue;
                            }
                            let volume = (det.max(0.0) / 288.0).sqrt();
                            out.push(TetraCandidate { edges, values: six, volume, flat: volume <= flat_limit });
                        }
                    }
                }
            }
            out
        })
        .collect()
}

fn volume_tolerance(scale: f64) -> f64 {
    1e-8 * scale.powi(3)
}

/// A tetrahedron of an assembly with the assembly vertices in its slots
/// `A, B, C, D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssemblyMember {
    pub candidate: TetraCandidate,
    pub vertices: [usize; 4],
    /// The face it was glued onto, `None` for the seed.
    pub glued_on: Option<[usize; 3]>,
}

/// Tetrahedra glued face to face, in gluing order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assembly {
    pub members: Vec<AssemblyMember>,
    pub volume: f64,
    pub vertex_count: usize,
    /// Distance between every pair of assembly vertices `(i, j, value)`.
    pub pair_distances: Vec<(usize, usize, f64)>,
    /// Faces on the hull.
    pub boundary: Vec<[usize; 3]>,
}

impl Assembly {
    pub fn distance(&self, i: usize, j: usize) -> Option<f64> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pair_distances.iter().find(|p| p.0 == i && p.1 == j).map(|p| p.2)
    }
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// A candidate face, its slots sorted by the class of the edge across from
/// each, and the slot off the face.
struct FaceEntry {
    candidate: usize,
    slots: [usize; 3],
    apex: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FaceState {
    Open { apex: usize },
    Boundary { apex: usize },
    Internal,
}

#[derive(Clone)]
struct SearchState {
    coords: Vec<Vector3<f64>>,
    /// Position in the sorted list of the distance between two vertices.
    pair_edge: BTreeMap<(usize, usize), usize>,
    used: Vec<bool>,
    faces: BTreeMap<[usize; 3], FaceState>,
    members: Vec<AssemblyMember>,
    volume: f64,
}

fn face_key(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut k = [a, b, c];
    k.sort_unstable();
    k
}

struct Search<'a> {
    values: Vec<f64>,
    candidates: Vec<&'a TetraCandidate>,
    /// Equal distances share a class, the smallest position holding that value.
    class: Vec<usize>,
    /// Candidate faces by the sorted classes of their edges, as
    /// `(candidate, opposite slot)`.
    /// Also keyed by the two smallest classes among the distances from the
    /// face to the apex, so lookups only visit apexes with unused distances.
    faces: HashMap<([usize; 3], usize, usize), Vec<FaceEntry>>,
    target: f64,
    n: usize,
    vol_tol: f64,
    dist_tol: f64,
    plane_tol: f64,
    /// Upper bound on explored nodes, to keep hopeless inputs finite.
    budget: usize,
    visited: usize,
}

/// Orientation of `p` against the plane through `a, b, c`, scaled to a
/// length.
fn side(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    let n = (b - a).cross(&(c - a));
    let norm = n.norm();
    if norm == 0.0 {
        return 0.0;
    }
    n.dot(&(p - a)) / norm
}

/// The two points at distances `ra, rb, rc` from `a, b, c`, or `None` when
/// the spheres miss each other by more than `tol`.
pub fn trilaterate(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
    ra: f64,
    rb: f64,
    rc: f64,
    tol: f64,
) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let ab = b - a;
    let d = ab.norm();
    if d == 0.0 {
        return None;
    }
    let ex = ab / d;
    let ac = c - a;
    let i = ex.dot(&ac);
    let perp = ac - ex * i;
    let j = perp.norm();
    if j <= TOLERANCE * d {
        return None;
    }
    let ey = perp / j;
    let ez = ex.cross(&ey);
    let x = (ra * ra - rb * rb + d * d) / (2.0 * d);
    let y = (ra * ra - rc * rc + i * i + j * j) / (2.0 * j) - (i / j) * x;
    let z2 = ra * ra - x * x - y * y;
    if z2 < -tol * ra.max(d) {
        return None;
    }
    let z = z2.max(0.0).sqrt();
    let base = a + ex * x + ey * y;
    Some((base + ez * z, base - ez * z))
}

impl<'a> Search<'a> {
    fn unused_match(&self, used: &[bool], picked: &[usize], value: f64) -> Option<usize> {
        let start = self.values.partition_point(|&v| v < value - self.dist_tol);
        (start..self.values.len())
            .take_while(|&k| self.values[k] <= value + self.dist_tol)
            .filter(|&k| !used[k] && !picked.contains(&k))
            .min_by(|&a, &b| (self.values[a] - value).abs().total_cmp(&(self.values[b] - value).abs()))
    }

    fn seed(&self, cand: &TetraCandidate) -> Option<SearchState> {
        let o = Vector3::zeros();
        let b = Vector3::new(cand.value(0, 1), 0.0, 0.0);
        let (c, _) = planar_third(cand.value(0, 1), cand.value(0, 2), cand.value(1, 2))?;
        let (d1, d2) = trilaterate(&o, &b, &c, cand.value(0, 3), cand.value(1, 3), cand.value(2, 3), self.dist_tol)?;
        let d = if d1.z >= d2.z { d1 } else { d2 };
        let mut state = SearchState {
            coords: vec![o, b, c, d],
            pair_edge: BTreeMap::new(),
            used: vec![false; self.values.len()],
            faces: BTreeMap::new(),
            members: vec![AssemblyMember { candidate: *cand, vertices: [0, 1, 2, 3], glued_on: None }],
            volume: cand.volume,
        };
        for (s, &(x, y)) in EDGE_VERTICES.iter().enumerate() {
            state.pair_edge.insert((x, y), cand.edges[s]);
            state.used[cand.edges[s]] = true;
        }
        for (f, apex) in [([0, 1, 2], 3), ([0, 1, 3], 2), ([0, 2, 3], 1), ([1, 2, 3], 0)] {
            state.faces.insert(f, FaceState::Open { apex });
        }
        Some(state)
    }

    fn run(&mut self, state: SearchState) -> Option<SearchState> {
        self.visited += 1;
        if self.visited > self.budget || state.volume > self.target + self.vol_tol || state.coords.len() > self.n {
            return None;
        }
        let open = state.faces.iter().find_map(|(k, s)| match s {
            FaceState::Open { apex } => Some((*k, *apex)),
            _ => None,
        });
        let Some((face, apex)) = open else {
            let done = state.coords.len() == self.n && (state.volume - self.target).abs() <= self.vol_tol;
            return done.then_some(state);
        };

        let [u, v, w] = face;
        let (pu, pv, pw) = (state.coords[u], state.coords[v], state.coords[w]);
        let apex_side = side(&pu, &pv, &pw, &state.coords[apex]);
        for x in 0..state.coords.len() {
            if face.contains(&x) || side(&pu, &pv, &pw, &state.coords[x]) * apex_side.signum() >= -self.plane_tol {
                continue;
            }
            let Some(next) = self.close(&state, face, x) else { continue };
            if let Some(found) = self.run(next) {
                return Some(found);
            }
        }
        for (ci, slots) in self.glue_options(&state, face) {
            let Some(next) = self.glue(&state, face, apex_side, slots, self.candidates[ci]) else { continue };
            if let Some(found) = self.run(next) {
                return Some(found);
            }
        }
        if let Some(next) = self.mark_boundary(&state, face, apex) {
            return self.run(next);
        }
        None
    }

    /// Every way to glue a candidate onto `face`, on the side away from
    /// `apex`.
    /// Whether some point at unused distances from all four seed vertices
    /// exists. Any further vertex of the configuration is one, so a seed
    /// failing this cannot start a complete assembly.
    fn extendable(&self, state: &SearchState) -> bool {
        let face = [0, 1, 2];
        let (pa, pb, pc, pd) = (state.coords[0], state.coords[1], state.coords[2], state.coords[3]);
        self.glue_options(state, face).into_iter().any(|(ci, slots)| {
            let cand = self.candidates[ci];
            let r = [0, 1, 2].map(|k| cand.value(slots[k], slots[3]));
            let Some((s1, s2)) = trilaterate(&pa, &pb, &pc, r[0], r[1], r[2], self.dist_tol) else { return false };
            let mut picked = Vec::with_capacity(3);
            for value in r {
                match self.unused_match(&state.used, &picked, value) {
                    Some(e) => picked.push(e),
                    None => return false,
                }
            }
            [s1, s2].iter().any(|x| self.unused_match(&state.used, &picked, (x - pd).norm()).is_some())
        })
    }

    fn glue_options(&self, state: &SearchState, face: [usize; 3]) -> Vec<(usize, [usize; 4])> {
        let class_of = |a: usize, b: usize| self.class[state.pair_edge[&(a.min(b), a.max(b))]];
        let [u, v, w] = face;
        // Face vertices sorted by the class of the edge across from them.
        let mut verts = [(class_of(v, w), u), (class_of(u, w), v), (class_of(u, v), w)];
        verts.sort_unstable();
        let key = verts.map(|p| p.0);
        let perms: Vec<[usize; 3]> = PERMS.into_iter().filter(|p| (0..3).all(|i| key[p[i]] == key[i])).collect();
        let mut free: Vec<usize> = (0..self.values.len()).filter(|&e| !state.used[e]).map(|e| self.class[e]).collect();
        free.dedup();
        let mut is_free = vec![false; self.values.len()];
        for &c in &free {
            is_free[c] = true;
        }
        let mut entries = Vec::new();
        for (i, &a) in free.iter().enumerate() {
            for &b in &free[i..] {
                if let Some(found) = self.faces.get(&(key, a, b)) {
                    entries.extend(found);
                }
            }
        }
        let mut out = Vec::new();
        for entry in entries {
            let cand = self.candidates[entry.candidate];
            let fresh = entry.slots.iter().all(|&s| is_free[self.class[cand.edges[edge_slot(s, entry.apex)]]]);
            if !fresh {
                continue;
            }
            for p in &perms {
                let mut slots = [0usize; 4];
                for (i, &(_, vertex)) in verts.iter().enumerate() {
                    let k = face.iter().position(|&f| f == vertex).expect("face vertex");
                    slots[k] = entry.slots[p[i]];
                }
                slots[3] = entry.apex;
                out.push((entry.candidate, slots));
            }
        }
        out
    }

    fn glue(&self, state: &SearchState, face: [usize; 3], apex_side: f64, slots: [usize; 4], cand: &TetraCandidate) -> Option<SearchState> {
        let [u, v, w] = face;
        let (ru, rv, rw) = (cand.value(slots[0], slots[3]), cand.value(slots[1], slots[3]), cand.value(slots[2], slots[3]));
        let (pu, pv, pw) = (state.coords[u], state.coords[v], state.coords[w]);
        let (s1, s2) = trilaterate(&pu, &pv, &pw, ru, rv, rw, self.dist_tol)?;
        let far = if side(&pu, &pv, &pw, &s1) * apex_side < 0.0 { s1 } else { s2 };
        if side(&pu, &pv, &pw, &far) * apex_side >= 0.0 || side(&pu, &pv, &pw, &far).abs() <= self.plane_tol {
            return None;
        }

        if state.coords.len() >= self.n {
            return None;
        }
        // The new vertex takes an unused distance to every placed vertex.
        let mut picked: Vec<usize> = Vec::with_capacity(state.coords.len());
        for coord in &state.coords {
            picked.push(self.unused_match(&state.used, &picked, (coord - far).norm())?);
        }
        // It must lie inside every hull face found so far.
        for (f, s) in &state.faces {
            if let FaceState::Boundary { apex } = s {
                let (a, b, c) = (state.coords[f[0]], state.coords[f[1]], state.coords[f[2]]);
                let inner = side(&a, &b, &c, &state.coords[*apex]);
                if side(&a, &b, &c, &far) * inner.signum() < -self.plane_tol {
                    return None;
                }
            }
        }
        let x = state.coords.len();
        let mut next = state.clone();
        for (p, e) in picked.into_iter().enumerate() {
            next.used[e] = true;
            next.pair_edge.insert((p, x), e);
        }
        next.coords.push(far);
        let [su, sv, sw, sx] = slots;
        let mut vertices = [0usize; 4];
        vertices[su] = u;
        vertices[sv] = v;
        vertices[sw] = w;
        vertices[sx] = x;
        self.attach(next, face, x, *cand, vertices)
    }

    /// Closes `face` onto the placed vertex `x` beyond it.
    fn close(&self, state: &SearchState, face: [usize; 3], x: usize) -> Option<SearchState> {
        let [u, v, w] = face;
        let edges = [(u, v), (u, w), (u, x), (v, w), (v, x), (w, x)].map(|(a, b)| state.pair_edge[&(a.min(b), a.max(b))]);
        let values = edges.map(|e| self.values[e]);
        let volume = (cayley_menger_determinant(values).max(0.0) / 288.0).sqrt();
        if volume <= self.vol_tol {
            return None;
        }
        let cand = TetraCandidate { edges, values, volume, flat: false };
        self.attach(state.clone(), face, x, cand, [u, v, w, x])
    }

    fn attach(&self, mut next: SearchState, face: [usize; 3], x: usize, cand: TetraCandidate, vertices: [usize; 4]) -> Option<SearchState> {
        let [u, v, w] = face;
        next.faces.insert(face, FaceState::Internal);
        for (a, b, opposite) in [(u, v, w), (u, w, v), (v, w, u)] {
            let key = face_key(a, b, x);
            match next.faces.get(&key) {
                None => {
                    next.faces.insert(key, FaceState::Open { apex: opposite });
                }
                Some(FaceState::Open { apex }) => {
                    // Both sides of the face are now filled; they must be opposite.
                    let (pa, pb, px) = (next.coords[a], next.coords[b], next.coords[x]);
                    let s_old = side(&pa, &pb, &px, &next.coords[*apex]);
                    let s_new = side(&pa, &pb, &px, &next.coords[opposite]);
                    if s_old * s_new >= 0.0 {
                        return None;
                    }
                    next.faces.insert(key, FaceState::Internal);
                }
                Some(_) => return None,
            }
        }
        next.volume += cand.volume;
        next.members.push(AssemblyMember { candidate: cand, vertices, glued_on: Some(face) });
        Some(next)
    }

    fn mark_boundary(&self, state: &SearchState, face: [usize; 3], apex: usize) -> Option<SearchState> {
        let [u, v, w] = face;
        let (pu, pv, pw) = (state.coords[u], state.coords[v], state.coords[w]);
        let inner = side(&pu, &pv, &pw, &state.coords[apex]).signum();
        for (k, c) in state.coords.iter().enumerate() {
            if !face.contains(&k) && side(&pu, &pv, &pw, c) * inner < -self.plane_tol {
                return None;
            }
        }
        let mut next = state.clone();
        next.faces.insert(face, FaceState::Boundary { apex });
        Some(next)
    }
}

/// Third vertex of a triangle with base `(0,0,0)-(ab,0,0)`, in the upper
/// half of the `xy` plane.
fn planar_third(ab: f64, ac: f64, bc: f64) -> Option<(Vector3<f64>, f64)> {
    let x = (ac * ac - bc * bc + ab * ab) / (2.0 * ab);
    let y2 = ac * ac - x * x;
    if y2 <= 0.0 {
        return None;
    }
    Some((Vector3::new(x, y2.sqrt(), 0.0), y2.sqrt()))
}

/// Face-area frequencies across all candidates, used to order seeds.
fn seed_order(candidates: &[TetraCandidate], scale: f64) -> Vec<&TetraCandidate> {
    let area = |t: &TriangleCandidate| triangle_area(t.values[0], t.values[1], t.values[2]).unwrap_or(0.0);
    let mut all: Vec<f64> = candidates.iter().flat_map(|c| c.faces().map(|f| area(&f))).collect();
    all.sort_by(f64::total_cmp);
    let tol = TOLERANCE * scale * scale;
    let freq = |a: f64| all.partition_point(|&x| x <= a + tol) - all.partition_point(|&x| x < a - tol);
    let mut keyed: Vec<(usize, &TetraCandidate)> = candidates
        .iter()
        .filter(|c| !c.flat)
        .map(|c| (c.faces().iter().map(|f| freq(area(f))).min().unwrap_or(0), c))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.volume.total_cmp(&b.1.volume)).then(a.1.edges.cmp(&b.1.edges)));
    keyed.into_iter().map(|(_, c)| c).collect()
}

/// Searches for an assembly of `n` vertices and total volume `volume`.
///
/// Only candidates holding the shortest distance are used as seeds: the
/// shortest pair is an edge of the Delaunay tetrahedralization, so some
/// complete assembly contains such a tetrahedron. Seeds are tried in
/// increasing order of their rarest face area, then by volume. From a seed, the first open face (in index order) is either
/// glued to a candidate whose apex lies on the far side of it, or declared
/// a hull face when no vertex lies beyond it. A branch is abandoned once its
/// volume exceeds the target, a new vertex falls outside a hull face, or a
/// new vertex has a distance that is not among the unused ones.
pub fn assemble(candidates: &[TetraCandidate], d: &DistanceMultiset, volume: f64, n: usize) -> Result<Assembly> {
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::InvalidConfig("volume must be positive".into()));
    }
    if n < 4 || d.n() != n {
        return Err(Error::InvalidConfig(format!("{} distances do not describe {n} points", d.len())));
    }
    let scale = scale_of(d);
    let ordered = seed_order(candidates, scale);
    let values = d.values();
    let dist_tol = 1e-7 * scale;
    let mut class = Vec::with_capacity(values.len());
    for (k, &v) in values.iter().enumerate() {
        let c = if k > 0 && v - values[k - 1] <= dist_tol { class[k - 1] } else { k };
        class.push(c);
    }
    let usable: Vec<&TetraCandidate> = candidates.iter().filter(|c| !c.flat).collect();
    let mut faces: HashMap<([usize; 3], usize, usize), Vec<FaceEntry>> = HashMap::new();
    for (ci, c) in usable.iter().enumerate() {
        for f in 0..4 {
            let [a, b, e] = [0, 1, 2, 3].into_iter().filter(|&s| s != f).collect::<Vec<_>>()[..] else { unreachable!() };
            let across = |x: usize, y: usize| class[c.edges[edge_slot(x, y)]];
            let mut sorted = [(across(b, e), a), (across(a, e), b), (across(a, b), e)];
            sorted.sort_unstable();
            let mut to_apex = [a, b, e].map(|s| class[c.edges[edge_slot(s, f)]]);
            to_apex.sort_unstable();
            faces
                .entry((sorted.map(|p| p.0), to_apex[0], to_apex[1]))
                .or_default()
                .push(FaceEntry { candidate: ci, slots: sorted.map(|p| p.1), apex: f });
        }
    }
    let mut search = Search {
        values,
        candidates: usable,
        class,
        faces,
        target: volume,
        n,
        vol_tol: volume_tolerance(scale).max(1e-9 * volume),
        dist_tol,
        plane_tol: 1e-9 * scale,
        budget: 2_000_000,
        visited: 0,
    };
    for seed in ordered {
        if search.class[seed.edges[0]] != 0 || (seed.volume - volume) > search.vol_tol {
            continue;
        }
        let Some(state) = search.seed(seed) else { continue };
        if n > 4 && !search.extendable(&state) {
            continue;
        }
        if let Some(done) = search.run(state) {
            return Ok(finish(done, &search.values));
        }
        if search.visited > search.budget {
            break;
        }
    }
    Err(Error::NoAssembly)
}

fn finish(state: SearchState, values: &[f64]) -> Assembly {
    let pair_distances = state.pair_edge.iter().map(|(&(i, j), &e)| (i, j, values[e])).collect();
    let boundary = state
        .faces
        .iter()
        .filter(|(_, s)| matches!(s, FaceState::Boundary { .. }))
        .map(|(k, _)| *k)
        .collect();
    Assembly {
        vertex_count: state.coords.len(),
        members: state.members,
        volume: state.volume,
        pair_distances,
        boundary,
    }
}

/// Embeds an assembly: the seed canonically (first vertex at the origin,
/// second on the positive `x` axis, third in the upper `xy` half-plane,
/// fourth above it), then each later vertex by trilateration from the face
/// its tetrahedron was glued on. Of the two mirror positions the one that
/// matches the distances to the other placed vertices is kept.
///
/// Every pair distance and member volume is checked afterwards.
pub fn place_points(assembly: &Assembly) -> Result<PointConfig> {
    let n = assembly.vertex_count;
    let scale = assembly.pair_distances.iter().map(|p| p.2).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-6 * scale;
    let dist = |i: usize, j: usize| {
        assembly.distance(i, j).ok_or_else(|| Error::InconsistentAssembly(format!("no distance for pair ({i}, {j})")))
    };
    let first = assembly.members.first().ok_or_else(|| Error::InconsistentAssembly("empty assembly".into()))?;
    let [a, b, c, d] = first.vertices;
    let mut coords: Vec<Option<Vector3<f64>>> = vec![None; n];
    let o = Vector3::zeros();
    coords[a] = Some(o);
    let pb = Vector3::new(dist(a, b)?, 0.0, 0.0);
    coords[b] = Some(pb);
    let (pc, _) = planar_third(dist(a, b)?, dist(a, c)?, dist(b, c)?)
        .ok_or_else(|| Error::InconsistentAssembly("flat seed face".into()))?;
    coords[c] = Some(pc);
    let (d1, d2) = trilaterate(&o, &pb, &pc, dist(a, d)?, dist(b, d)?, dist(c, d)?, tol)
        .ok_or_else(|| Error::InconsistentAssembly("seed does not close".into()))?;
    coords[d] = Some(if d1.z >= d2.z { d1 } else { d2 });

    for member in &assembly.members[1..] {
        let face = member.glued_on.ok_or_else(|| Error::InconsistentAssembly("member without a face".into()))?;
        let Some(&x) = member.vertices.iter().find(|v| !face.contains(v)) else {
            return Err(Error::InconsistentAssembly("member repeats its face".into()));
        };
        if coords[x].is_some() {
            continue;
        }
        let [u, v, w] = face;
        let get = |k: usize| coords[k].ok_or_else(|| Error::InconsistentAssembly(format!("vertex {k} used before placement")));
        let (pu, pv, pw) = (get(u)?, get(v)?, get(w)?);
        let (s1, s2) = trilaterate(&pu, &pv, &pw, dist(u, x)?, dist(v, x)?, dist(w, x)?, tol)
            .ok_or_else(|| Error::InconsistentAssembly(format!("vertex {x} cannot be trilaterated")))?;
        let misfit = |p: &Vector3<f64>| -> Result<f64> {
            let mut worst = 0.0_f64;
            for (k, ck) in coords.iter().enumerate() {
                if let Some(ck) = ck {
                    worst = worst.max(((ck - p).norm() - dist(k, x)?).abs());
                }
            }
            Ok(worst)
        };
        coords[x] = Some(if misfit(&s1)? <= misfit(&s2)? { s1 } else { s2 });
    }

    let coords: Vec<Vector3<f64>> = coords
        .into_iter()
        .enumerate()
        .map(|(k, c)| c.ok_or_else(|| Error::InconsistentAssembly(format!("vertex {k} never placed"))))
        .collect::<Result<_>>()?;
    for &(i, j, value) in &assembly.pair_distances {
        let got = (coords[i] - coords[j]).norm();
        if (got - value).abs() > tol {
            return Err(Error::InconsistentAssembly(format!("pair ({i}, {j}) is {got}, expected {value}")));
        }
    }
    let mut total = 0.0;
    for member in &assembly.members {
        let [p0, p1, p2, p3] = member.vertices.map(|k| coords[k]);
        let placed = (p1 - p0).cross(&(p2 - p0)).dot(&(p3 - p0)).abs() / 6.0;
        if (placed - member.candidate.volume).abs() > 1e-6 * scale.powi(3) {
            return Err(Error::InconsistentAssembly(format!(
                "tetrahedron {:?} has volume {placed}, expected {}",
                member.vertices, member.candidate.volume
            )));
        }
        total += member.candidate.volume;
    }
    if (total - assembly.volume).abs() > 1e-6 * scale.powi(3) {
        return Err(Error::InconsistentAssembly(format!(
            "member volumes sum to {total}, assembly records {}",
            assembly.volume
        )));
    }
    PointConfig::new(3, coords.iter().map(|c| vec![c.x, c.y, c.z]).collect())
}

/// Distances and hull volume to coordinates, all five steps.
pub fn reconstruct(d: &DistanceMultiset, volume: f64, n: usize) -> Result<PointConfig> {
    let triangles = enumerate_triangles(d, false);
    let tetrahedra = enumerate_tetrahedra(d, &triangles);
    let assembly = assemble(&tetrahedra, d, volume, n)?;
    place_points(&assembly)
}
