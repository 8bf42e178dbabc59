//! Loop representation on the medial graph, the exploration path and the
//! q = 4 parafermionic observable.
//!
//! Medial edge `(v, k)` (id `4v + k`) runs counterclockwise around `v`, so the
//! primal vertex is always on its left. A loop arriving at the midpoint of the
//! edge `v ~ v + dir_{k+1}` turns right onto `(v + dir_{k+1}, k + 3)` when that
//! edge is open and left onto `(v, k + 1)` otherwise (closed edge or stub).

use std::collections::{HashSet, VecDeque};

use num_complex::Complex64;
use serde::Serialize;

use crate::exact::{for_each_configuration, log_weight, EdgeConfig, ModelParams, DEFAULT_CAP};
use crate::lattice::{build_box, diag_unit, medial_of, BoundaryCondition, Domain, Vertex};
use crate::sampler::{self, Estimate, RunSpec};
use crate::{Error, Result};

/// Successor of medial edge `e` and the turn taken (+1 left, -1 right).
#[inline]
pub fn next_medial(d: &Domain, cfg: &EdgeConfig, e: usize) -> (usize, i32) {
    let (v, k) = (e / 4, e % 4);
    let k1 = (k + 1) % 4;
    match d.neighbor_edge(v, k1) {
        Some(edge) if cfg.is_open(edge) => {
            let w = d.neighbor(v, k1).unwrap();
            (4 * w + (k + 3) % 4, -1)
        }
        _ => (4 * v + k1, 1),
    }
}

/// Decomposition of all medial edges into loops.
#[derive(Clone, Debug)]
pub struct LoopConfig {
    pub loops: Vec<Vec<usize>>,
    pub loop_of: Vec<u32>,
}

/// Traces every loop; loops are listed by their smallest medial edge.
pub fn trace_loops(d: &Domain, cfg: &EdgeConfig) -> LoopConfig {
    let ne = 4 * d.n_vertices();
    let mut loop_of = vec![u32::MAX; ne];
    let mut loops = Vec::new();
    for start in 0..ne {
        if loop_of[start] != u32::MAX {
            continue;
        }
        let id = loops.len() as u32;
        let mut l = Vec::new();
        let mut e = start;
        loop {
            loop_of[e] = id;
            l.push(e);
            e = next_medial(d, cfg, e).0;
            if e == start {
                break;
            }
        }
        loops.push(l);
    }
    LoopConfig { loops, loop_of }
}

/// Vertices of the unbounded component of `Z^2` minus the domain, within one step of its bounding box.
pub fn infinite_exterior(d: &Domain) -> HashSet<Vertex> {
    let (lo, hi) = d.bounding_box();
    let (lo, hi) = (Vertex::new(lo.x - 1, lo.y - 1), Vertex::new(hi.x + 1, hi.y + 1));
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([lo]);
    seen.insert(lo);
    while let Some(v) = queue.pop_front() {
        for dir in 0..4 {
            let w = v.step(dir);
            if w.x < lo.x || w.y < lo.y || w.x > hi.x || w.y > hi.y || d.contains(w) || seen.contains(&w) {
                continue;
            }
            seen.insert(w);
            queue.push_back(w);
        }
    }
    seen
}

/// Root medial edge `e_x = (x, j - 1)` where `x + dir_j` is the smallest neighbour of `x`
/// in the unbounded exterior. Returns `(e_x, j)`.
pub fn root_edge(d: &Domain, x: usize) -> Result<(usize, usize)> {
    let ext = infinite_exterior(d);
    let xv = d.vertex(x);
    let j = (0..4)
        .filter(|&j| ext.contains(&xv.step(j)))
        .min_by_key(|&j| xv.step(j))
        .ok_or_else(|| Error::InvalidParameter(format!("{xv:?} has no neighbour in the unbounded exterior")))?;
    Ok((4 * x + (j + 3) % 4, j))
}

/// The loop through `e_x`, with cumulative quarter-turns.
#[derive(Clone, Debug)]
pub struct ExplorationPath {
    /// Medial edges starting at `e_x`.
    pub edges: Vec<usize>,
    /// `cumulative[i]`: quarter-turns taken from `edges[0]` to `edges[i]`.
    pub cumulative: Vec<i32>,
    /// Quarter-turns of the full circuit (±4 for a simple loop).
    pub total: i32,
    position: std::collections::HashMap<usize, usize>,
}

impl ExplorationPath {
    pub fn contains(&self, e: usize) -> bool {
        self.position.contains_key(&e)
    }

    /// Winding from `e` to `e_x` in quarter-turns (`0` at `e_x`).
    pub fn winding_quarter_turns(&self, e: usize) -> Option<i32> {
        self.position.get(&e).map(|&i| if i == 0 { 0 } else { self.total - self.cumulative[i] })
    }

    /// Winding in radians.
    pub fn winding(&self, e: usize) -> Option<f64> {
        self.winding_quarter_turns(e).map(|w| w as f64 * std::f64::consts::FRAC_PI_2)
    }
}

pub fn exploration_path(d: &Domain, cfg: &EdgeConfig, x: usize) -> Result<ExplorationPath> {
    let (ex, _) = root_edge(d, x)?;
    Ok(path_from(d, cfg, ex))
}

fn path_from(d: &Domain, cfg: &EdgeConfig, ex: usize) -> ExplorationPath {
    let mut edges = vec![ex];
    let mut cumulative = vec![0];
    let mut c = 0;
    let mut e = ex;
    loop {
        let (nx, t) = next_medial(d, cfg, e);
        c += t;
        if nx == ex {
            break;
        }
        edges.push(nx);
        cumulative.push(c);
        e = nx;
    }
    let position = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    ExplorationPath { edges, cumulative, total: c, position }
}

/// Exact observable and derived quantities on one domain.
#[derive(Clone, Debug, Serialize)]
pub struct ObservableValue {
    /// `F(e)` for every medial edge id.
    #[serde(skip)]
    pub values: Vec<Complex64>,
    pub x: Vertex,
    pub root_edge: usize,
    pub p: f64,
    /// `|Σ η(e_i) F(e_i)|` per degree-4 medial vertex, keyed by doubled coordinates.
    pub vertex_residuals: Vec<((i32, i32), f64)>,
    /// `Σ_{y ≠ x} (4 - d_y) P[A(x, y)]`.
    pub boundary_sum: f64,
    /// `(π/2) Σ_{y ≠ x} (4 - d_y) P[A(x, y)]`: the winding gained across the boundary.
    pub boundary_winding_sum: f64,
    /// `|Σ_{e ∈ C} η(e) F(e)|`.
    pub contour_sum: f64,
    /// `P[A(x, y)]` per boundary vertex `y ≠ x`.
    pub passage: Vec<(Vertex, f64)>,
    /// `P[x ↔ y]` for the same vertices.
    pub connection: Vec<(Vertex, f64)>,
}

impl ObservableValue {
    pub fn max_vertex_residual(&self) -> f64 {
        self.vertex_residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

fn eta(j: usize) -> Complex64 {
    let (a, b) = diag_unit(j);
    Complex64::new(a, b)
}

/// Rejects boundary vertices with exactly two opposite neighbours.
pub fn check_domain(d: &Domain) -> Result<()> {
    for &v in d.boundary() {
        let has = |k| d.neighbor(v, k).is_some();
        if d.degree(v) == 2 && ((has(0) && has(2)) || (has(1) && has(3))) {
            return Err(Error::InvalidDomain(format!(
                "boundary vertex {:?} has exactly two opposite neighbours",
                d.vertex(v)
            )));
        }
    }
    Ok(())
}

/// `F(e) = E⁰[W e^{iW} 1_{e ∈ γ}]` at `q = 4` and edge weight `p`, by enumeration.
pub fn observable_exact(d: &Domain, x: Vertex, p: f64) -> Result<ObservableValue> {
    check_domain(d)?;
    let xi = d.vertex_index(x).ok_or_else(|| Error::InvalidParameter(format!("{x:?} not in domain")))?;
    let (ex, _) = root_edge(d, xi)?;
    let params = ModelParams::new(p, 4.0, 0.0)?;
    let bc = BoundaryCondition::free(d);
    let med = medial_of(d);
    let n = d.n_vertices();

    let mut lws = Vec::with_capacity(1 << d.n_edges().min(24));
    for_each_configuration(d, &bc, false, DEFAULT_CAP, |_, a, g, k| lws.push(log_weight(&params, a, g, k)))?;
    let lz = crate::exact::log_sum_exp(&lws);
    drop(lws);

    let stubs_of: Vec<Vec<usize>> = (0..n)
        .map(|v| (0..4).filter(|&k| d.neighbor(v, k).is_none()).map(|k| med.midpoint(v, k)).collect())
        .collect();
    let ys: Vec<usize> = d.boundary().iter().copied().filter(|&y| y != xi).collect();

    let mut values = vec![Complex64::new(0.0, 0.0); med.n_edges()];
    let mut passage = vec![0.0; ys.len()];
    let mut connection = vec![0.0; ys.len()];
    let mut visited = vec![false; med.n_vertices()];
    for_each_configuration(d, &bc, false, DEFAULT_CAP, |cfg, a, g, k| {
        let w = (log_weight(&params, a, g, k) - lz).exp();
        let path = path_from(d, cfg, ex);
        for &e in &path.edges {
            let wq = path.winding(e).unwrap();
            values[e] += w * wq * Complex64::new(0.0, wq).exp();
            visited[med.tail(e)] = true;
        }
        let cl = crate::exact::Clusters::of(d, cfg);
        for (i, &y) in ys.iter().enumerate() {
            if stubs_of[y].iter().any(|&s| visited[s]) {
                passage[i] += w;
            }
            if cl.connected(xi, y) {
                connection[i] += w;
            }
        }
        for &e in &path.edges {
            visited[med.tail(e)] = false;
        }
    })?;

    let mut vertex_residuals = Vec::new();
    for mv in 0..med.n_vertices() {
        if let Some(star) = med.star(mv) {
            let s: Complex64 = star.iter().map(|&(e, j)| eta(j) * values[e]).sum();
            vertex_residuals.push((med.position2(mv), s.norm()));
        }
    }
    let contour: Complex64 = med.boundary_edges().iter().map(|&e| eta(med.outward(e).unwrap()) * values[e]).sum();
    let boundary_sum: f64 = ys.iter().zip(&passage).map(|(&y, &pa)| (4 - d.degree(y)) as f64 * pa).sum();
    Ok(ObservableValue {
        values,
        x,
        root_edge: ex,
        p,
        vertex_residuals,
        boundary_sum,
        boundary_winding_sum: boundary_sum * std::f64::consts::FRAC_PI_2,
        contour_sum: contour.norm(),
        passage: ys.iter().map(|&y| d.vertex(y)).zip(passage).collect(),
        connection: ys.iter().map(|&y| d.vertex(y)).zip(connection).collect(),
    })
}

/// Exactly the vertices `y ≠ x` with a neighbour in the unbounded exterior.
pub fn outer_boundary_vertices(d: &Domain, x: Vertex) -> Vec<Vertex> {
    let ext = infinite_exterior(d);
    d.boundary()
        .iter()
        .map(|&v| d.vertex(v))
        .filter(|&v| v != x && (0..4).any(|k| ext.contains(&v.step(k))))
        .collect()
}

/// `Λ_R \ H` for a hole given as a vertex predicate, validated as a topological
/// `R`-annulus: `H` connected with connected complement, `Λ_{R/8} ⊂ H ⊂ Λ_{R/4}`.
pub fn topological_annulus(big_r: u32, hole: impl Fn(Vertex) -> bool) -> Result<Domain> {
    let r = big_r as i32;
    if r < 8 || r % 8 != 0 {
        return Err(Error::InvalidParameter("R must be a positive multiple of 8".into()));
    }
    let all: Vec<Vertex> = (-r..=r).flat_map(|y| (-r..=r).map(move |x| Vertex::new(x, y))).collect();
    let h: Vec<Vertex> = all.iter().copied().filter(|&v| hole(v)).collect();
    if h.iter().any(|v| v.norm_inf() > r / 4) {
        return Err(Error::InvalidDomain("hole leaves Λ_{R/4}".into()));
    }
    if all.iter().any(|&v| v.norm_inf() <= r / 8 && !hole(v)) {
        return Err(Error::InvalidDomain("hole does not contain Λ_{R/8}".into()));
    }
    Domain::induced(h.iter().copied()).map_err(|_| Error::InvalidDomain("hole is not connected".into()))?;
    // The annulus itself being connected means the hole's complement is connected.
    Domain::induced(all.into_iter().filter(|&v| !hole(v)))
}

/// Vertices of the annulus adjacent to the hole.
pub fn inner_boundary(d: &Domain, big_r: u32) -> Vec<usize> {
    let r = big_r as i32;
    (0..d.n_vertices())
        .filter(|&v| {
            let p = d.vertex(v);
            (0..4).any(|k| {
                let w = p.step(k);
                w.norm_inf() <= r && !d.contains(w)
            })
        })
        .collect()
}

/// Monte Carlo estimate of `Σ_{y ∈ ∂_in Ω} φ⁰_{Ω,p}[y ↔ ∂Λ_{R/2}]`.
pub fn n_omega_estimate(omega: &Domain, big_r: u32, params: &ModelParams<f64>, spec: &RunSpec) -> Result<Estimate> {
    let inner = inner_boundary(omega, big_r);
    let half = big_r as i32 / 2;
    let target: Vec<usize> = (0..omega.n_vertices()).filter(|&v| omega.vertex(v).norm_inf() == half).collect();
    let bc = BoundaryCondition::free(omega);
    sampler::estimate(
        |c| {
            let cl = crate::exact::Clusters::of(omega, c.config());
            let hit: HashSet<u32> = target.iter().map(|&v| cl.label(v)).collect();
            inner.iter().filter(|&&y| hit.contains(&cl.label(y))).count() as f64
        },
        params,
        omega,
        &bc,
        spec,
    )
}

/// Default pair of topological annuli: a square hole `Λ_{3R/16}` and a plus-shaped hole.
pub fn default_annuli(big_r: u32) -> Result<(Domain, Domain)> {
    let r = big_r as i32;
    let a = topological_annulus(big_r, |v| v.norm_inf() <= 3 * r / 16)?;
    let (s, l) = (r / 8, r / 4);
    let b = topological_annulus(big_r, |v| v.norm_inf() <= s || (v.x.abs() <= s && v.y.abs() <= l) || (v.y.abs() <= s && v.x.abs() <= l))?;
    Ok((a, b))
}

/// `Λ_n` convenience for tests and the CLI.
pub fn box_domain(n: u32) -> Domain {
    build_box(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_counts_extremes() {
        let d = build_box(1);
        let all = EdgeConfig::open(d.n_edges(), 0);
        assert_eq!(trace_loops(&d, &all).loops.len(), 5);
        let none = EdgeConfig::closed(d.n_edges(), 0);
        assert_eq!(trace_loops(&d, &none).loops.len(), 9);
    }

    #[test]
    fn closed_config_root_loop_winds_once() {
        let d = build_box(1);
        let x = d.vertex_index(Vertex::new(0, -1)).unwrap();
        let cfg = EdgeConfig::closed(d.n_edges(), 0);
        let path = exploration_path(&d, &cfg, x).unwrap();
        assert_eq!(path.edges.len(), 4);
        assert_eq!(path.total, 4);
        assert_eq!(path.winding_quarter_turns(path.edges[0]), Some(0));
    }

    #[test]
    fn rejects_straight_boundary_vertex() {
        let d = Domain::rect(0, 0, 3, 1).unwrap();
        assert!(check_domain(&d).is_err());
    }

    #[test]
    fn vertex_relation_on_box() {
        let d = build_box(1);
        let obs = observable_exact(&d, Vertex::new(0, -1), 2.0 / 3.0).unwrap();
        assert!(obs.max_vertex_residual() < 1e-10, "{}", obs.max_vertex_residual());
        assert!(obs.contour_sum < 1e-10);
        assert!((obs.boundary_winding_sum - 1.5 * std::f64::consts::PI).abs() < 1e-10, "{}", obs.boundary_winding_sum);
    }
}
