//! Estimators for crossing, arm and circuit events, the mixing rate, the
//! characteristic length, cluster statistics, the ghost magnetization and
//! covariance sums.
//!
//! Configurations live on a box-shaped domain centred at the origin; events on
//! sub-boxes and annuli only read the edges they need. Infinite-volume
//! quantities are approximated on a free box at least four times the largest
//! scale (for q = 1 the event's own box suffices, as edges outside it are
//! independent of it).

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::dsu::Dsu;
use crate::exact::{Clusters, EdgeConfig, ModelParams};
use crate::lattice::{build_box, BoundaryCondition, Domain, Quad, Vertex};
use crate::sampler::{self, Algorithm, ChainState, Estimate, RunSpec};
use crate::stats;
use crate::{Error, Result};

/// Arm types in counterclockwise order: `1` primal, `0` dual.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArmSpec {
    pub sigma: Vec<u8>,
    pub r: u32,
    pub big_r: u32,
    pub half_plane: bool,
}

impl ArmSpec {
    pub fn new(sigma: Vec<u8>, r: u32, big_r: u32, half_plane: bool) -> Result<Self> {
        if sigma.is_empty() || sigma.iter().any(|&s| s > 1) {
            return Err(Error::InvalidParameter("sigma must be a non-empty 0/1 sequence".into()));
        }
        if r >= big_r {
            return Err(Error::InvalidParameter(format!("need r < R, got ({r}, {big_r})")));
        }
        let alternating = sigma.windows(2).all(|w| w[0] != w[1]);
        if !alternating || (sigma.len() > 1 && !half_plane && sigma.len() % 2 == 1) {
            return Err(Error::Unsupported(format!("arm pattern {sigma:?}: only alternating patterns are decided")));
        }
        if r == 0 && sigma.contains(&0) {
            return Err(Error::Unsupported("dual arms need r >= 1".into()));
        }
        Ok(ArmSpec { sigma, r, big_r, half_plane })
    }

    /// One primal arm from `∂Λ_r` to `∂Λ_R`.
    pub fn one_arm(r: u32, big_r: u32) -> Result<Self> {
        Self::new(vec![1], r, big_r, false)
    }

    /// Alternating four arms.
    pub fn four_arm(r: u32, big_r: u32) -> Result<Self> {
        Self::new(vec![1, 0, 1, 0], r, big_r, false)
    }
}

/// Open path from (ab) to (cd) inside the quad (no boundary wirings, no ghost).
pub fn crossing_occurs(cfg: &EdgeConfig, quad: &Quad) -> bool {
    let d = quad.domain();
    let mut dsu = Dsu::new(d.n_vertices());
    for e in 0..d.n_edges() {
        if cfg.is_open(e) {
            let (a, b) = d.edge(e);
            dsu.union(a, b);
        }
    }
    let ab: std::collections::HashSet<usize> = quad.arc_vertices(0).into_iter().map(|v| dsu.find(v)).collect();
    quad.arc_vertices(2).into_iter().any(|v| ab.contains(&dsu.find(v)))
}

/// Left-right open crossing of `[x0, x1] x [y0, y1]` using edges of `d` inside the rectangle.
pub fn rect_crossing(d: &Domain, cfg: &EdgeConfig, x0: i32, y0: i32, x1: i32, y1: i32) -> bool {
    let w = (x1 - x0 + 1) as usize;
    let h = (y1 - y0 + 1) as usize;
    let idx = |x: i32, y: i32| (y - y0) as usize * w + (x - x0) as usize;
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    for y in y0..=y1 {
        if d.contains(Vertex::new(x0, y)) {
            seen[idx(x0, y)] = true;
            queue.push_back(Vertex::new(x0, y));
        }
    }
    while let Some(v) = queue.pop_front() {
        if v.x == x1 {
            return true;
        }
        for dir in 0..4 {
            let u = v.step(dir);
            if u.x < x0 || u.x > x1 || u.y < y0 || u.y > y1 || seen[idx(u.x, u.y)] {
                continue;
            }
            if let Some(e) = d.edge_at(v, dir) {
                if cfg.is_open(e) {
                    seen[idx(u.x, u.y)] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    false
}

/// Left-right crossing of `Λ_n` inside `d`.
pub fn box_crossing(d: &Domain, cfg: &EdgeConfig, n: u32) -> bool {
    let n = n as i32;
    rect_crossing(d, cfg, -n, -n, n, n)
}

/// Crossing clusters of an annulus, with the angle at which each first meets the inner boundary.
#[derive(Clone, Debug, Default)]
pub struct AnnulusCrossings {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

fn angle(x: f64, y: f64) -> f64 {
    let a = y.atan2(x);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

/// Open clusters of `Ann(r, R)` joining `∂Λ_r` to `∂Λ_R`, and dual clusters of its faces
/// joining the hole to the outside through closed edges. `d` must contain `Λ_R`.
pub fn annulus_crossings(d: &Domain, cfg: &EdgeConfig, r: u32, big_r: u32, half_plane: bool) -> AnnulusCrossings {
    let (r, rr) = (r as i32, big_r as i32);
    let side = (2 * rr + 1) as usize;
    let vid = |v: Vertex| ((v.y + rr) as usize) * side + (v.x + rr) as usize;
    let in_ann = |v: Vertex| v.norm_inf() >= r && v.norm_inf() <= rr && (!half_plane || v.y >= 0);
    let open = |v: Vertex, dir: usize| d.edge_at(v, dir).is_some_and(|e| cfg.is_open(e));

    let mut dsu = Dsu::new(side * side);
    for y in -rr..=rr {
        for x in -rr..=rr {
            let v = Vertex::new(x, y);
            if !in_ann(v) {
                continue;
            }
            for dir in 0..2 {
                let w = v.step(dir);
                if in_ann(w) && open(v, dir) {
                    dsu.union(vid(v), vid(w));
                }
            }
        }
    }
    let mut inner: HashMap<usize, f64> = HashMap::new();
    let mut outer = std::collections::HashSet::new();
    for y in -rr..=rr {
        for x in -rr..=rr {
            let v = Vertex::new(x, y);
            if !in_ann(v) {
                continue;
            }
            let root = dsu.find(vid(v));
            if v.norm_inf() == r {
                let a = angle(x as f64, y as f64);
                let e = inner.entry(root).or_insert(a);
                *e = e.min(a);
            }
            if v.norm_inf() == rr {
                outer.insert(root);
            }
        }
    }
    let mut primal: Vec<f64> = inner.iter().filter(|(k, _)| outer.contains(k)).map(|(_, &a)| a).collect();
    primal.sort_by(f64::total_cmp);

    // Faces: unit squares with lower-left corner (i, j) inside [-R, R]^2.
    let nf = (2 * rr) as usize;
    let fid = |i: i32, j: i32| ((j + rr) as usize) * nf + (i + rr) as usize;
    let is_hole = |i: i32, j: i32| i >= -r && i < r && j >= -r && j < r;
    let in_box = |i: i32, j: i32| i >= -rr && i < rr && j >= -rr && j < rr;
    let is_ring = |i: i32, j: i32| in_box(i, j) && !is_hole(i, j) && (!half_plane || j >= 0);
    let mut fdsu = Dsu::new(nf * nf);
    let mut touches_hole: HashMap<usize, f64> = HashMap::new();
    let mut touches_out = Vec::new();
    // Side k of square (i, j): (neighbour offset, edge start, edge direction).
    let sides = [((0, -1), (0, 0), 0usize), ((1, 0), (1, 0), 1), ((0, 1), (0, 1), 0), ((-1, 0), (0, 0), 1)];
    for j in -rr..rr {
        for i in -rr..rr {
            if !is_ring(i, j) {
                continue;
            }
            for &((di, dj), (ex, ey), dir) in &sides {
                let start = Vertex::new(i + ex, j + ey);
                if open(start, dir) {
                    continue;
                }
                let (ti, tj) = (i + di, j + dj);
                if is_ring(ti, tj) {
                    fdsu.union(fid(i, j), fid(ti, tj));
                } else if is_hole(ti, tj) {
                    let end = start.step(dir);
                    let a = angle((start.x + end.x) as f64 / 2.0, (start.y + end.y) as f64 / 2.0);
                    let e = touches_hole.entry(fid(i, j)).or_insert(a);
                    *e = e.min(a);
                } else if !in_box(ti, tj) {
                    touches_out.push(fid(i, j));
                }
            }
        }
    }
    let mut dual_in: HashMap<usize, f64> = HashMap::new();
    for (&f, &a) in &touches_hole {
        let root = fdsu.find(f);
        let e = dual_in.entry(root).or_insert(a);
        *e = e.min(a);
    }
    let dual_out: std::collections::HashSet<usize> = touches_out.iter().map(|&f| fdsu.find(f)).collect();
    let mut dual: Vec<f64> = dual_in.iter().filter(|(k, _)| dual_out.contains(k)).map(|(_, &a)| a).collect();
    dual.sort_by(f64::total_cmp);
    AnnulusCrossings { primal, dual }
}

/// Whether disjoint arms of the prescribed alternating types cross the annulus.
pub fn arm_occurs(d: &Domain, cfg: &EdgeConfig, spec: &ArmSpec) -> bool {
    let c = annulus_crossings(d, cfg, spec.r, spec.big_r, spec.half_plane);
    let ones = spec.sigma.iter().filter(|&&s| s == 1).count();
    let zeros = spec.sigma.len() - ones;
    if !spec.half_plane {
        return c.primal.len() >= ones && c.dual.len() >= zeros;
    }
    let mut seq: Vec<(f64, u8)> = c.primal.iter().map(|&a| (a, 1)).chain(c.dual.iter().map(|&a| (a, 0))).collect();
    seq.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut k = 0;
    for &(_, t) in &seq {
        if k < spec.sigma.len() && spec.sigma[k] == t {
            k += 1;
        }
    }
    k == spec.sigma.len()
}

/// Open circuit in `Ann(n, 2n)` surrounding `Λ_n`.
pub fn circuit_occurs(d: &Domain, cfg: &EdgeConfig, n: u32) -> bool {
    annulus_crossings(d, cfg, n, 2 * n, false).dual.is_empty()
}

/// Vertices of the open cluster of `v` (ghost edges ignored).
pub fn cluster_of(d: &Domain, cfg: &EdgeConfig, v: usize) -> Vec<usize> {
    let mut seen = vec![false; d.n_vertices()];
    let mut out = vec![v];
    seen[v] = true;
    let mut i = 0;
    while i < out.len() {
        let x = out[i];
        i += 1;
        for (u, e) in d.incident(x) {
            if cfg.is_open(e) && !seen[u] {
                seen[u] = true;
                out.push(u);
            }
        }
    }
    out
}

fn origin_index(d: &Domain) -> Result<usize> {
    d.vertex_index(Vertex::new(0, 0)).ok_or_else(|| Error::InvalidDomain("domain does not contain the origin".into()))
}

/// The four edges at the origin.
pub fn origin_edges(d: &Domain) -> Result<Vec<usize>> {
    let o = origin_index(d)?;
    Ok(d.incident(o).map(|(_, e)| e).collect())
}

/// Runs two chains with common random numbers and returns per-sweep observations.
pub fn paired_series(
    params: &ModelParams<f64>,
    d: &Domain,
    bc_a: &BoundaryCondition,
    bc_b: &BoundaryCondition,
    spec: &RunSpec,
    mut observe: impl FnMut(&ChainState, &ChainState) -> Vec<f64>,
) -> Result<(Vec<Vec<f64>>, u64)> {
    let burn = match spec.burn_in {
        Some(b) => b,
        None => sampler::auto_burn_in(params, d, bc_a, spec.seed, spec.algo, 2000)?,
    };
    if spec.sweeps <= burn || spec.sweeps - burn < stats::MIN_BATCHES as u64 {
        return Err(Error::BudgetTooSmall(format!("{} sweeps after {burn} burn-in", spec.sweeps)));
    }
    let mut a = ChainState::new(d, bc_a, params.has_ghost(), spec.seed)?;
    let mut b = ChainState::new(d, bc_b, params.has_ghost(), spec.seed)?;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for t in 0..spec.sweeps {
        a.step(spec.algo, params)?;
        b.step(spec.algo, params)?;
        if t >= burn {
            let row = observe(&a, &b);
            if cols.is_empty() {
                cols = vec![Vec::with_capacity((spec.sweeps - burn) as usize); row.len()];
            }
            for (c, x) in cols.iter_mut().zip(row) {
                c.push(x);
            }
        }
    }
    Ok((cols, burn))
}

fn to_estimate(xs: &[f64], params: &ModelParams<f64>, spec: &RunSpec, burn: u64) -> Result<Estimate> {
    let (mean, stderr) = stats::batch_means(xs)?;
    Ok(Estimate { mean, stderr, n_samples: xs.len(), seed: spec.seed, params: *params, algo: spec.algo, burn_in: burn })
}

/// Mixing-rate estimates on `Λ_R`: `Δ(R)` (origin-edge marginal, averaged over the four
/// origin edges), `Δ(r, R)` (crossing of `Λ_r`) and `Δ(R) - Δ(r, R)`. Wired and free chains
/// share their random numbers.
pub fn delta_hat(params: &ModelParams<f64>, r: u32, big_r: u32, spec: &RunSpec) -> Result<(Estimate, Estimate, Estimate)> {
    if r >= big_r {
        return Err(Error::InvalidParameter(format!("need r < R, got ({r}, {big_r})")));
    }
    let d = build_box(big_r);
    let oe = origin_edges(&d)?;
    let (cols, burn) = paired_series(params, &d, &BoundaryCondition::wired(&d), &BoundaryCondition::free(&d), spec, |w, f| {
        let k = oe.len() as f64;
        let dw: f64 = oe.iter().map(|&e| f64::from(u8::from(w.config().is_open(e)))).sum::<f64>() / k;
        let df: f64 = oe.iter().map(|&e| f64::from(u8::from(f.config().is_open(e)))).sum::<f64>() / k;
        let cw = f64::from(u8::from(box_crossing(&d, w.config(), r)));
        let cf = f64::from(u8::from(box_crossing(&d, f.config(), r)));
        vec![dw - df, cw - cf, (dw - df) - (cw - cf)]
    })?;
    Ok((
        to_estimate(&cols[0], params, spec, burn)?,
        to_estimate(&cols[1], params, spec, burn)?,
        to_estimate(&cols[2], params, spec, burn)?,
    ))
}

/// Estimate of an arm probability on a free box of half-width `box_n`.
pub fn arm_probability(params: &ModelParams<f64>, arm: &ArmSpec, box_n: u32, spec: &RunSpec) -> Result<Estimate> {
    if box_n < arm.big_r {
        return Err(Error::InvalidParameter("box smaller than the outer radius".into()));
    }
    let d = build_box(box_n);
    let bc = BoundaryCondition::free(&d);
    sampler::estimate(|c| f64::from(u8::from(arm_occurs(&d, c.config(), arm))), params, &d, &bc, spec)
}

/// `π₁(R) = P[0 ↔ ∂Λ_R]` for several radii from one chain on a free box of half-width `box_n`.
pub fn one_arm_curve(params: &ModelParams<f64>, radii: &[u32], box_n: u32, spec: &RunSpec) -> Result<Vec<Estimate>> {
    let d = build_box(box_n);
    let bc = BoundaryCondition::free(&d);
    let o = origin_index(&d)?;
    let mut cols = vec![Vec::new(); radii.len()];
    let (series, burn) = sampler::sample_series(params, &d, &bc, spec, |c| origin_radius(&d, c.config(), o) as f64)?;
    for rad in series {
        for (col, &r) in cols.iter_mut().zip(radii) {
            col.push(f64::from(u8::from(rad >= r as f64)));
        }
    }
    cols.iter().map(|c| to_estimate(c, params, spec, burn)).collect()
}

fn origin_radius(d: &Domain, cfg: &EdgeConfig, o: usize) -> i32 {
    cluster_of(d, cfg, o).iter().map(|&v| d.vertex(v).norm_inf()).max().unwrap_or(0)
}

/// Outcome of a characteristic-length scan.
#[derive(Clone, Debug, Serialize)]
pub struct LengthScanResult {
    pub p: f64,
    pub q: f64,
    /// `None` means no scale up to the cap left the window.
    pub l_hat: Option<u32>,
    pub exceeds_cap: bool,
    pub delta_threshold: f64,
    pub cap: u32,
    pub curve: Vec<(u32, f64, f64)>,
}

/// Smallest `R` (powers of two, then bisection) whose crossing estimate of `Λ_R`
/// leaves `[δ, 1 - δ]` by more than two standard errors.
pub fn characteristic_length(q: f64, p: f64, delta: f64, r_cap: u32, spec: &RunSpec) -> Result<LengthScanResult> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!("delta = {delta} outside (0, 1/2)")));
    }
    let params = ModelParams::new(p, q, 0.0)?;
    let mut curve: Vec<(u32, f64, f64)> = Vec::new();
    let measure = |r: u32, curve: &mut Vec<(u32, f64, f64)>| -> Result<bool> {
        let box_n = if q == 1.0 { r } else { 4 * r };
        let d = build_box(box_n);
        let bc = BoundaryCondition::free(&d);
        let est = sampler::estimate(|c| f64::from(u8::from(box_crossing(&d, c.config(), r))), &params, &d, &bc, spec)?;
        curve.push((r, est.mean, est.stderr));
        Ok(est.mean < delta - 2.0 * est.stderr || est.mean > 1.0 - delta + 2.0 * est.stderr)
    };
    let mut lo = 0u32;
    let mut found = None;
    let mut r = 1u32;
    while r <= r_cap {
        if measure(r, &mut curve)? {
            found = Some(r);
            break;
        }
        lo = r;
        r *= 2;
    }
    if let Some(mut hi) = found {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if measure(mid, &mut curve)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        found = Some(hi);
    }
    curve.sort_by_key(|c| c.0);
    Ok(LengthScanResult { p, q, l_hat: found, exceeds_cap: found.is_none(), delta_threshold: delta, cap: r_cap, curve })
}

/// Statistics of the cluster of the vertex closest to the centre.
#[derive(Clone, Debug, Serialize)]
pub struct ClusterStats {
    /// Probability that the cluster reaches the domain boundary.
    pub theta_proxy: Estimate,
    pub mean_size: Estimate,
    pub second_moment: Estimate,
    /// `E[|C| 1{C avoids the boundary}]`.
    pub chi_hat: Estimate,
    /// `(k, P[rad(C) >= k])`.
    pub rad_tail: Vec<(u32, f64)>,
}

impl ClusterStats {
    /// `min{r : r² π₁(r) >= n}` using the measured radius tail; `None` if beyond the domain.
    pub fn phi(&self, n: f64) -> Option<u32> {
        self.rad_tail.iter().find(|&&(r, p)| (r as f64).powi(2) * p >= n).map(|&(r, _)| r)
    }
}

pub fn cluster_stats(params: &ModelParams<f64>, d: &Domain, bc: &BoundaryCondition, spec: &RunSpec) -> Result<ClusterStats> {
    let (lo, hi) = d.bounding_box();
    let centre = Vertex::new((lo.x + hi.x).div_euclid(2), (lo.y + hi.y).div_euclid(2));
    let o = (0..d.n_vertices())
        .min_by_key(|&v| {
            let w = d.vertex(v);
            ((w.x - centre.x).abs().max((w.y - centre.y).abs()), w)
        })
        .unwrap();
    let c0 = d.vertex(o);
    let mut rows: Vec<(f64, f64, f64, f64, i32)> = Vec::new();
    let (_, burn) = sampler::sample_series(params, d, bc, spec, |c| {
        let cl = cluster_of(d, c.config(), o);
        let touches = cl.iter().any(|&v| d.is_boundary(v));
        let size = cl.len() as f64;
        let rad = cl.iter().map(|&v| {
            let w = d.vertex(v);
            (w.x - c0.x).abs().max((w.y - c0.y).abs())
        });
        let rad = rad.max().unwrap_or(0);
        rows.push((f64::from(u8::from(touches)), size, size * size, if touches { 0.0 } else { size }, rad));
        0.0
    })?;
    let col = |f: fn(&(f64, f64, f64, f64, i32)) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let max_rad = rows.iter().map(|r| r.4).max().unwrap_or(0).max(0) as u32;
    let n = rows.len() as f64;
    let rad_tail = (0..=max_rad + 1)
        .map(|k| (k, rows.iter().filter(|r| r.4 >= k as i32).count() as f64 / n))
        .collect();
    Ok(ClusterStats {
        theta_proxy: to_estimate(&col(|r| r.0), params, spec, burn)?,
        mean_size: to_estimate(&col(|r| r.1), params, spec, burn)?,
        second_moment: to_estimate(&col(|r| r.2), params, spec, burn)?,
        chi_hat: to_estimate(&col(|r| r.3), params, spec, burn)?,
        rad_tail,
    })
}

/// `φ_{p,h}[0 ↔ ghost]` by heat bath with ghost edges; exactly zero when `h = 0`.
pub fn ghost_magnetization(params: &ModelParams<f64>, d: &Domain, bc: &BoundaryCondition, spec: &RunSpec) -> Result<Estimate> {
    let o = origin_index(d)?;
    if !params.has_ghost() {
        return Ok(Estimate { mean: 0.0, stderr: 0.0, n_samples: 0, seed: spec.seed, params: *params, algo: spec.algo, burn_in: 0 });
    }
    let spec = RunSpec { algo: Algorithm::HeatBath, ..*spec };
    sampler::estimate(
        |c| f64::from(u8::from(Clusters::of(d, c.config()).connected_to_ghost(o))),
        params,
        d,
        bc,
        &spec,
    )
}

/// `Σ_f Cov(ω_e, ω_f)` over edges `f` whose midpoint lies within sup-distance `r_cap`
/// of the midpoint of `e = (0,0)-(1,0)`, on a free box of side `4 r_cap`. The sum is
/// truncated at `r_cap`; the second derivative of the free energy is twice the untruncated sum.
pub fn covariance_sum_f2(params: &ModelParams<f64>, r_cap: u32, spec: &RunSpec) -> Result<Estimate> {
    let d = build_box(2 * r_cap.max(1));
    let bc = BoundaryCondition::free(&d);
    let e0 = d.edge_at(Vertex::new(0, 0), 0).expect("origin edge");
    let near: Vec<usize> = (0..d.n_edges())
        .filter(|&f| {
            let (a, b) = d.edge_vertices(f);
            let (mx, my) = ((a.x + b.x) as f64 / 2.0, (a.y + b.y) as f64 / 2.0);
            (mx - 0.5).abs().max(my.abs()) <= r_cap as f64
        })
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let (_, burn) = sampler::sample_series(params, &d, &bc, spec, |c| {
        let cfg = c.config();
        xs.push(f64::from(u8::from(cfg.is_open(e0))));
        ys.push(near.iter().filter(|&&f| cfg.is_open(f)).count() as f64);
        0.0
    })?;
    let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
    let n = xs.len() as f64;
    let z: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my) * n / (n - 1.0)).collect();
    to_estimate(&z, params, spec, burn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_extremes_and_top_row() {
        let quad = Quad::square(1).unwrap();
        let d = quad.domain();
        assert!(crossing_occurs(&EdgeConfig::open(d.n_edges(), 0), &quad));
        assert!(!crossing_occurs(&EdgeConfig::closed(d.n_edges(), 0), &quad));
        let mut cfg = EdgeConfig::closed(d.n_edges(), 0);
        for x in -1..1 {
            cfg.set(d.edge_at(Vertex::new(x, 1), 0).unwrap(), true);
        }
        assert!(crossing_occurs(&cfg, &quad));
    }

    #[test]
    fn arms_all_open() {
        let d = build_box(6);
        let open = EdgeConfig::open(d.n_edges(), 0);
        assert!(arm_occurs(&d, &open, &ArmSpec::one_arm(1, 5).unwrap()));
        assert!(!arm_occurs(&d, &open, &ArmSpec::four_arm(1, 5).unwrap()));
        assert!(circuit_occurs(&d, &open, 2));
        assert!(!circuit_occurs(&d, &EdgeConfig::closed(d.n_edges(), 0), 2));
    }

    #[test]
    fn unsupported_patterns() {
        assert!(matches!(ArmSpec::new(vec![1, 1], 1, 4, false), Err(Error::Unsupported(_))));
        assert!(ArmSpec::new(vec![], 1, 4, false).is_err());
    }
}
