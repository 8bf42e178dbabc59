//! Exact enumeration of the random-cluster measure on small domains.
//!
//! Configurations are walked in Gray-code order. Opening an edge merges two
//! union-find classes in place; closing one triggers a rebuild. Each walk
//! records integer histograms over `(#open, #open ghost edges, #clusters)`, so a
//! single enumeration evaluates every `(p, q, h > 0)` at once. Weights are always
//! combined in log space.

use serde::Serialize;

use crate::dsu::Dsu;
use crate::lattice::{dual_of, BoundaryCondition, Domain, Quad};
use crate::{Error, Real, Result};

/// Default cap on enumerated bits (primal edges plus ghost edges).
pub const DEFAULT_CAP: usize = 24;

/// Edge weight `p`, cluster weight `q` and field `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelParams<T> {
    pub p: T,
    pub q: T,
    pub h: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(p: T, q: T, h: T) -> Result<Self> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidParameter(format!("p = {p} must lie in (0, 1)")));
        }
        if !(q > T::zero()) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q = {q} must be positive")));
        }
        if !(h >= T::zero()) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("h = {h} must be non-negative")));
        }
        Ok(ModelParams { p, q, h })
    }

    /// Parameters at `p_c(q)` with no field.
    pub fn critical(q: T) -> Result<Self> {
        Self::new(crate::lattice::p_c(q), q, T::zero())
    }

    pub fn p_c(&self) -> T {
        crate::lattice::p_c(self.q)
    }

    /// Whether `q` lies in the range `[1, 4]` where the theory applies.
    pub fn in_theory_range(&self) -> bool {
        self.q >= T::one() && self.q <= T::lit(4.0)
    }

    pub fn has_ghost(&self) -> bool {
        self.h > T::zero()
    }

    /// Probability that a ghost edge is open when its endpoints are already connected.
    pub fn ghost_p(&self) -> T {
        T::one() - (-self.h).exp()
    }

    fn log_weights(&self) -> (T, T, T) {
        let a = (self.p / (T::one() - self.p)).ln();
        let g = if self.has_ghost() { self.h.exp_m1().ln() } else { T::neg_infinity() };
        (a, g, self.q.ln())
    }
}

/// Bit set over primal edges followed by one ghost edge per vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct EdgeConfig {
    words: Vec<u64>,
    n_edges: usize,
    n_ghost: usize,
}

impl EdgeConfig {
    pub fn closed(n_edges: usize, n_ghost: usize) -> Self {
        let bits = n_edges + n_ghost;
        EdgeConfig { words: vec![0; bits.div_ceil(64).max(1)], n_edges, n_ghost }
    }

    pub fn open(n_edges: usize, n_ghost: usize) -> Self {
        let mut c = Self::closed(n_edges, n_ghost);
        for i in 0..n_edges + n_ghost {
            c.set_bit(i, true);
        }
        c
    }

    /// Config whose bit `i` is bit `i` of `mask`.
    pub fn from_mask(n_edges: usize, n_ghost: usize, mask: u64) -> Self {
        let mut c = Self::closed(n_edges, n_ghost);
        for i in 0..(n_edges + n_ghost).min(64) {
            c.set_bit(i, mask >> i & 1 == 1);
        }
        c
    }

    pub fn from_bools(open: &[bool]) -> Self {
        let mut c = Self::closed(open.len(), 0);
        for (i, &b) in open.iter().enumerate() {
            c.set_bit(i, b);
        }
        c
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_ghost(&self) -> usize {
        self.n_ghost
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: usize, v: bool) {
        let m = 1u64 << (i & 63);
        if v {
            self.words[i >> 6] |= m;
        } else {
            self.words[i >> 6] &= !m;
        }
    }

    #[inline]
    pub fn is_open(&self, e: usize) -> bool {
        self.bit(e)
    }

    #[inline]
    pub fn set(&mut self, e: usize, v: bool) {
        self.set_bit(e, v)
    }

    pub fn ghost_open(&self, v: usize) -> bool {
        v < self.n_ghost && self.bit(self.n_edges + v)
    }

    pub fn set_ghost(&mut self, v: usize, open: bool) {
        self.set_bit(self.n_edges + v, open)
    }

    pub fn n_open(&self) -> usize {
        (0..self.n_edges).filter(|&e| self.bit(e)).count()
    }

    pub fn n_ghost_open(&self) -> usize {
        (0..self.n_ghost).filter(|&v| self.ghost_open(v)).count()
    }

    /// Pointwise order over all bits.
    pub fn le(&self, other: &EdgeConfig) -> bool {
        self.n_edges == other.n_edges
            && self.n_ghost == other.n_ghost
            && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Low 64 bits, primal edges first.
    pub fn mask(&self) -> u64 {
        self.words[0]
    }
}

/// Cluster labels of the open edges (ghost edges included), ghost at index `n`.
#[derive(Clone, Debug)]
pub struct Clusters {
    labels: Vec<u32>,
}

impl Clusters {
    pub fn of(d: &Domain, cfg: &EdgeConfig) -> Self {
        let n = d.n_vertices();
        let mut dsu = Dsu::new(n + 1);
        for e in 0..d.n_edges() {
            if cfg.is_open(e) {
                let (a, b) = d.edge(e);
                dsu.union(a, b);
            }
        }
        for v in 0..cfg.n_ghost().min(n) {
            if cfg.ghost_open(v) {
                dsu.union(v, n);
            }
        }
        Self::from_dsu(&mut dsu)
    }

    fn from_dsu(dsu: &mut Dsu) -> Self {
        Clusters { labels: (0..dsu.len()).map(|v| dsu.find(v) as u32).collect() }
    }

    pub fn connected(&self, u: usize, v: usize) -> bool {
        self.labels[u] == self.labels[v]
    }

    pub fn connected_to_ghost(&self, v: usize) -> bool {
        self.labels[v] == self.labels[self.labels.len() - 1]
    }

    /// True when some vertex of `a` shares a cluster with some vertex of `b`.
    pub fn sets_connected(&self, a: &[usize], b: &[usize]) -> bool {
        let la: std::collections::HashSet<u32> = a.iter().map(|&v| self.labels[v]).collect();
        b.iter().any(|&v| la.contains(&self.labels[v]))
    }

    pub fn label(&self, v: usize) -> u32 {
        self.labels[v]
    }
}

/// `k(ω^ξ)`: clusters after wiring the boundary classes. The ghost is counted as a
/// vertex when the configuration carries ghost edges or the condition wires it.
pub fn cluster_count(d: &Domain, cfg: &EdgeConfig, bc: &BoundaryCondition) -> usize {
    let n = d.n_vertices();
    let mut dsu = Dsu::new(n + 1);
    apply_bc(&mut dsu, bc, n);
    for e in 0..d.n_edges() {
        if cfg.is_open(e) {
            let (a, b) = d.edge(e);
            dsu.union(a, b);
        }
    }
    for v in 0..cfg.n_ghost().min(n) {
        if cfg.ghost_open(v) {
            dsu.union(v, n);
        }
    }
    let ghost_counted = cfg.n_ghost() > 0 || bc.ghost_class().is_some();
    dsu.components() - usize::from(!ghost_counted)
}

fn apply_bc(dsu: &mut Dsu, bc: &BoundaryCondition, n: usize) {
    let mut rep: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    for v in 0..n {
        let r = *rep.entry(bc.label(v)).or_insert(v);
        dsu.union(r, v);
    }
    if let Some(g) = bc.ghost_class() {
        if let Some(&r) = rep.get(&g) {
            dsu.union(r, n);
        }
    }
}

/// Integer counts of configurations by `(#open, #open ghost, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    m: usize,
    g: usize,
    kmax: usize,
    counts: Vec<u64>,
}

impl Histogram {
    fn new(m: usize, g: usize, kmax: usize) -> Self {
        Histogram { m, g, kmax, counts: vec![0; (m + 1) * (g + 1) * (kmax + 1)] }
    }

    #[inline]
    fn add(&mut self, a: usize, b: usize, k: usize) {
        self.counts[(a * (self.g + 1) + b) * (self.kmax + 1) + k] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `ln Σ count · weight`, or `-inf` when empty.
    pub fn log_sum<T: Real>(&self, params: &ModelParams<T>) -> T {
        let (la, lg, lq) = params.log_weights();
        let mut terms = Vec::new();
        for a in 0..=self.m {
            for b in 0..=self.g {
                for k in 0..=self.kmax {
                    let c = self.counts[(a * (self.g + 1) + b) * (self.kmax + 1) + k];
                    if c == 0 {
                        continue;
                    }
                    let mut w = T::lit(c as f64).ln() + T::lit(a as f64) * la + T::lit(k as f64) * lq;
                    if b > 0 {
                        w = w + T::lit(b as f64) * lg;
                    }
                    terms.push(w);
                }
            }
        }
        log_sum_exp(&terms)
    }
}

pub(crate) fn log_sum_exp<T: Real>(terms: &[T]) -> T {
    let mx = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if mx == T::neg_infinity() {
        return mx;
    }
    let s = terms.iter().fold(T::zero(), |acc, &t| acc + (t - mx).exp());
    mx + s.ln()
}

/// Event over a configuration and its open clusters.
pub type Event<'a> = dyn Fn(&EdgeConfig, &Clusters) -> bool + Sync + 'a;

struct Walker<'a> {
    d: &'a Domain,
    bc: &'a BoundaryCondition,
    m: usize,
    n: usize,
    bits: usize,
    ghost_counted: bool,
    cfg: EdgeConfig,
    open: Dsu,
    wired: Dsu,
    base: Dsu,
    n_open: usize,
    n_ghost: usize,
}

impl<'a> Walker<'a> {
    fn new(d: &'a Domain, bc: &'a BoundaryCondition, with_ghost: bool, cap: usize) -> Result<Self> {
        let (m, n) = (d.n_edges(), d.n_vertices());
        let bits = m + if with_ghost { n } else { 0 };
        if bits > cap || bits > 40 {
            return Err(Error::CapExceeded { edges: bits, cap: cap.min(40) });
        }
        if bc.n_vertices() != n {
            return Err(Error::InvalidParameter("boundary condition size differs from domain".into()));
        }
        let mut base = Dsu::new(n + 1);
        apply_bc(&mut base, bc, n);
        Ok(Walker {
            d,
            bc,
            m,
            n,
            bits,
            ghost_counted: with_ghost || bc.ghost_class().is_some(),
            cfg: EdgeConfig::closed(m, if with_ghost { n } else { 0 }),
            open: Dsu::new(n + 1),
            wired: base.clone(),
            base,
            n_open: 0,
            n_ghost: 0,
        })
    }

    fn endpoints(&self, bit: usize) -> (usize, usize) {
        if bit < self.m {
            self.d.edge(bit)
        } else {
            (bit - self.m, self.n)
        }
    }

    fn flip(&mut self, bit: usize) {
        let now = !self.cfg.bit(bit);
        self.cfg.set_bit(bit, now);
        let delta = |c: &mut usize| if now { *c += 1 } else { *c -= 1 };
        if bit < self.m {
            delta(&mut self.n_open);
        } else {
            delta(&mut self.n_ghost);
        }
        if now {
            let (a, b) = self.endpoints(bit);
            self.open.union(a, b);
            self.wired.union(a, b);
        } else {
            self.open.reset(self.n + 1);
            self.wired = self.base.clone();
            for i in 0..self.bits {
                if self.cfg.bit(i) {
                    let (a, b) = self.endpoints(i);
                    self.open.union(a, b);
                    self.wired.union(a, b);
                }
            }
        }
    }

    fn k(&self) -> usize {
        self.wired.components() - usize::from(!self.ghost_counted)
    }

    /// Visits every configuration with `(cfg, n_open, n_ghost, k, clusters?)`.
    fn run(mut self, need_clusters: bool, mut visit: impl FnMut(&EdgeConfig, usize, usize, usize, Option<&Clusters>)) {
        let total = 1u64 << self.bits;
        for i in 0..total {
            if i > 0 {
                self.flip(i.trailing_zeros() as usize);
            }
            let k = self.k();
            if need_clusters {
                let cl = Clusters::from_dsu(&mut self.open);
                visit(&self.cfg, self.n_open, self.n_ghost, k, Some(&cl));
            } else {
                visit(&self.cfg, self.n_open, self.n_ghost, k, None);
            }
        }
        let _ = self.bc;
    }
}

/// Histograms for the whole space and for each event.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub all: Histogram,
    pub events: Vec<Histogram>,
    pub with_ghost: bool,
}

impl Enumeration {
    pub fn probability<T: Real>(&self, params: &ModelParams<T>, i: usize) -> T {
        (self.events[i].log_sum(params) - self.all.log_sum(params)).exp()
    }
}

/// Enumerates once and records histograms for every event. `with_ghost` adds one ghost edge per vertex.
pub fn enumerate(
    d: &Domain,
    bc: &BoundaryCondition,
    with_ghost: bool,
    events: &[&Event<'_>],
    cap: usize,
) -> Result<Enumeration> {
    let w = Walker::new(d, bc, with_ghost, cap)?;
    let (m, g, kmax) = (d.n_edges(), if with_ghost { d.n_vertices() } else { 0 }, d.n_vertices() + 1);
    let mut all = Histogram::new(m, g, kmax);
    let mut hs = vec![Histogram::new(m, g, kmax); events.len()];
    w.run(!events.is_empty(), |cfg, a, b, k, cl| {
        all.add(a, b, k);
        if let Some(cl) = cl {
            for (h, ev) in hs.iter_mut().zip(events) {
                if ev(cfg, cl) {
                    h.add(a, b, k);
                }
            }
        }
    });
    Ok(Enumeration { all, events: hs, with_ghost })
}

/// Calls `visit(cfg, #open, #open ghost, k)` for every configuration, in Gray-code order.
pub fn for_each_configuration(
    d: &Domain,
    bc: &BoundaryCondition,
    with_ghost: bool,
    cap: usize,
    mut visit: impl FnMut(&EdgeConfig, usize, usize, usize),
) -> Result<()> {
    let w = Walker::new(d, bc, with_ghost, cap)?;
    w.run(false, |cfg, a, b, k, _| visit(cfg, a, b, k));
    Ok(())
}

/// Log-weight `|ω| ln(p/(1-p)) + Δ ln(e^h - 1) + k ln q` of one configuration.
pub fn log_weight<T: Real>(params: &ModelParams<T>, n_open: usize, n_ghost: usize, k: usize) -> T {
    let (la, lg, lq) = params.log_weights();
    let mut w = T::lit(n_open as f64) * la + T::lit(k as f64) * lq;
    if n_ghost > 0 {
        w = w + T::lit(n_ghost as f64) * lg;
    }
    w
}

/// `ln Z^ξ`.
pub fn log_partition_function<T: Real>(params: &ModelParams<T>, d: &Domain, bc: &BoundaryCondition) -> Result<T> {
    let en = enumerate(d, bc, params.has_ghost(), &[], DEFAULT_CAP)?;
    Ok(en.all.log_sum(params))
}

/// `Z^ξ = Σ_ω (p/(1-p))^{|ω|} (e^h - 1)^{Δ(ω)} q^{k(ω^ξ)}`.
pub fn partition_function<T: Real>(params: &ModelParams<T>, d: &Domain, bc: &BoundaryCondition) -> Result<T> {
    log_partition_function(params, d, bc).map(T::exp)
}

pub fn event_probability<T: Real>(
    params: &ModelParams<T>,
    d: &Domain,
    bc: &BoundaryCondition,
    event: &Event<'_>,
) -> Result<T> {
    let en = enumerate(d, bc, params.has_ghost(), &[event], DEFAULT_CAP)?;
    Ok(en.probability(params, 0))
}

/// `E[1_A 1_B] - E[1_A] E[1_B]`.
pub fn covariance<T: Real>(
    params: &ModelParams<T>,
    d: &Domain,
    bc: &BoundaryCondition,
    a: &Event<'_>,
    b: &Event<'_>,
) -> Result<T> {
    let both = |c: &EdgeConfig, cl: &Clusters| a(c, cl) && b(c, cl);
    let en = enumerate(d, bc, params.has_ghost(), &[a, b, &both], DEFAULT_CAP)?;
    let (pa, pb, pab) = (en.probability(params, 0), en.probability(params, 1), en.probability(params, 2));
    Ok(pab - pa * pb)
}

/// Heat-bath probability that an edge is open given whether its endpoints are
/// connected in the rest of the (wired) configuration.
pub fn conditional_edge_probability<T: Real>(params: &ModelParams<T>, connected_off_e: bool) -> T {
    let p = params.p;
    if connected_off_e {
        p
    } else {
        p / (p + (T::one() - p) * params.q)
    }
}

fn log_weight_table<T: Real>(params: &ModelParams<T>, d: &Domain, bc: &BoundaryCondition, cap: usize) -> Result<Vec<T>> {
    let w = Walker::new(d, bc, params.has_ghost(), cap)?;
    let (la, lg, lq) = params.log_weights();
    let mut table = vec![T::neg_infinity(); 1usize << w.bits];
    w.run(false, |cfg, a, b, k, _| {
        let mut lw = T::lit(a as f64) * la + T::lit(k as f64) * lq;
        if b > 0 {
            lw = lw + T::lit(b as f64) * lg;
        }
        table[cfg.mask() as usize] = lw;
    });
    Ok(table)
}

/// Probability of every configuration, primal and ghost bits together (ghost bits follow the edges).
pub fn joint_distribution_full<T: Real>(params: &ModelParams<T>, d: &Domain, bc: &BoundaryCondition) -> Result<Vec<T>> {
    let lw = log_weight_table(params, d, bc, DEFAULT_CAP)?;
    let lz = log_sum_exp(&lw);
    Ok(lw.into_iter().map(|x| (x - lz).exp()).collect())
}

/// Law of the primal edges: entry `mask` is the probability of that edge set.
pub fn joint_distribution<T: Real>(params: &ModelParams<T>, d: &Domain, bc: &BoundaryCondition) -> Result<Vec<T>> {
    let full = joint_distribution_full(params, d, bc)?;
    let m = d.n_edges();
    let mut out = vec![T::zero(); 1usize << m];
    let lo = (1usize << m) - 1;
    for (mask, pr) in full.into_iter().enumerate() {
        out[mask & lo] = out[mask & lo] + pr;
    }
    Ok(out)
}

/// Open path from (ab) to (cd) inside the quad, ghost edges allowed.
pub fn crossing_event(quad: &Quad) -> impl Fn(&EdgeConfig, &Clusters) -> bool + Sync + '_ {
    let (ab, cd) = (quad.arc_vertices(0), quad.arc_vertices(2));
    move |_, cl| cl.sets_connected(&ab, &cd)
}

/// Path of closed primal edges, seen from the dual, from the (bc) side to the (da) side:
/// faces are linked across closed edges, starting at a face behind a closed (bc) edge and
/// ending at a face behind a closed (da) edge.
pub fn dual_crossing_occurs(quad: &Quad, closed: impl Fn(usize) -> bool) -> bool {
    let d = quad.domain();
    let faces = d.unit_faces();
    let fidx: std::collections::HashMap<_, _> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut faces_of_edge: Vec<Vec<usize>> = vec![Vec::new(); d.n_edges()];
    for (i, &f) in faces.iter().enumerate() {
        for e in d.square_edges(f).expect("face") {
            faces_of_edge[e].push(i);
        }
    }
    let mut target = vec![false; faces.len()];
    for e in quad.arc_edges(3) {
        if closed(e) {
            for &f in &faces_of_edge[e] {
                target[f] = true;
            }
        }
    }
    let mut seen = vec![false; faces.len()];
    let mut stack = Vec::new();
    for e in quad.arc_edges(1) {
        if closed(e) {
            for &f in &faces_of_edge[e] {
                if !seen[f] {
                    seen[f] = true;
                    stack.push(f);
                }
            }
        }
    }
    let _ = fidx;
    while let Some(f) = stack.pop() {
        if target[f] {
            return true;
        }
        for e in d.square_edges(faces[f]).expect("face") {
            if closed(e) {
                for &g in &faces_of_edge[e] {
                    if !seen[g] {
                        seen[g] = true;
                        stack.push(g);
                    }
                }
            }
        }
    }
    false
}

/// `(φ⁰_{G,p}[crossing], 1 - φ¹_{G*,p*}[dual crossing])`, both by enumeration; `h` must be 0.
pub fn duality_check<T: Real>(params: &ModelParams<T>, quad: &Quad) -> Result<(T, T)> {
    if params.has_ghost() {
        return Err(Error::Unsupported("duality with a magnetic field".into()));
    }
    let d = quad.domain();
    let primal = event_probability(params, d, &BoundaryCondition::free(d), &crossing_event(quad))?;
    let dual = dual_of(d)?;
    let dp = ModelParams::new(crate::lattice::dual_p(params.p, params.q), params.q, T::zero())?;
    let map = dual.primal_to_dual.clone();
    let ev = move |cfg: &EdgeConfig, _: &Clusters| dual_crossing_occurs(quad, |e| cfg.is_open(map[e]));
    let pd = event_probability(&dp, &dual.domain, &dual.wired_exterior(), &ev)?;
    Ok((primal, T::one() - pd))
}

/// Crossing probabilities with (ab), (cd) wired separately and with their union wired.
/// Returns `(lhs, rhs)` where `lhs` is the second and `rhs = q φ / (1 + (q - 1) φ)` of the first.
pub fn boost_formula_check<T: Real>(params: &ModelParams<T>, quad: &Quad) -> Result<(T, T)> {
    let d = quad.domain();
    let (ab, cd) = (quad.arc_vertices(0), quad.arc_vertices(2));
    let mix = BoundaryCondition::from_classes(d.n_vertices(), &[ab.clone(), cd.clone()], None)?;
    let mut both: Vec<usize> = ab.iter().chain(&cd).copied().collect();
    both.sort_unstable();
    both.dedup();
    let mix2 = BoundaryCondition::from_classes(d.n_vertices(), &[both], None)?;
    let ev = crossing_event(quad);
    let phi = event_probability(params, d, &mix, &ev)?;
    let lhs = event_probability(params, d, &mix2, &ev)?;
    let rhs = params.q * phi / (T::one() + (params.q - T::one()) * phi);
    Ok((lhs, rhs))
}

/// Boundary condition induced on the endpoints of `inside` by the configuration
/// outside it: wirings of `bc`, open outside edges and open ghost edges.
/// Returns the sub-domain, its condition, and the parent index of each sub-vertex.
pub fn induced_condition(
    d: &Domain,
    bc: &BoundaryCondition,
    inside: &[usize],
    cfg: &EdgeConfig,
) -> Result<(Domain, BoundaryCondition, Vec<usize>)> {
    let n = d.n_vertices();
    let mut is_in = vec![false; d.n_edges()];
    for &e in inside {
        is_in[e] = true;
    }
    let mut dsu = Dsu::new(n + 1);
    apply_bc(&mut dsu, bc, n);
    for (e, &inside) in is_in.iter().enumerate() {
        if !inside && cfg.is_open(e) {
            let (a, b) = d.edge(e);
            dsu.union(a, b);
        }
    }
    for v in 0..cfg.n_ghost().min(n) {
        if cfg.ghost_open(v) {
            dsu.union(v, n);
        }
    }
    let sub = Domain::new(
        inside.iter().flat_map(|&e| {
            let (a, b) = d.edge_vertices(e);
            [a, b]
        }),
        inside.iter().map(|&e| d.edge_vertices(e)),
    )?;
    let parent: Vec<usize> = sub.vertices().iter().map(|&v| d.vertex_index(v).unwrap()).collect();
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for (i, &pv) in parent.iter().enumerate() {
        groups.entry(dsu.find(pv)).or_default().push(i);
    }
    let g = dsu.find(n);
    let keys: Vec<usize> = groups.keys().copied().collect();
    let classes: Vec<Vec<usize>> = groups.into_values().collect();
    let ghost_with = keys.iter().position(|&k| k == g);
    let sub_bc = BoundaryCondition::from_classes(sub.n_vertices(), &classes, ghost_with)?;
    Ok((sub, sub_bc, parent))
}

/// Largest deviation between the conditional law of the `inside` edges given the rest
/// (computed from the full joint table) and the measure on the sub-domain with the
/// induced boundary condition and no field.
pub fn smp_max_error<T: Real>(params: &ModelParams<T>, d: &Domain, bc: &BoundaryCondition, inside: &[usize]) -> Result<T> {
    let full = joint_distribution_full(params, d, bc)?;
    let m = d.n_edges();
    let bits = m + if params.has_ghost() { d.n_vertices() } else { 0 };
    let mut inside: Vec<usize> = inside.to_vec();
    inside.sort_unstable();
    inside.dedup();
    let in_mask: usize = inside.iter().map(|&e| 1usize << e).sum();
    let out_bits: Vec<usize> = (0..bits).filter(|b| in_mask >> b & 1 == 0).collect();
    let sub_params = ModelParams::new(params.p, params.q, T::zero())?;
    let mut worst = T::zero();
    let expand = |local: usize, positions: &[usize]| -> usize {
        positions.iter().enumerate().filter(|(i, _)| local >> i & 1 == 1).map(|(_, &b)| 1usize << b).sum()
    };
    let mut cache: std::collections::HashMap<BoundaryCondition, Vec<T>> = std::collections::HashMap::new();
    for out_local in 0..1usize << out_bits.len() {
        let out_mask = expand(out_local, &out_bits);
        let cond: Vec<T> = (0..1usize << inside.len()).map(|l| full[out_mask | expand(l, &inside)]).collect();
        let total = cond.iter().fold(T::zero(), |a, &b| a + b);
        if total <= T::zero() {
            continue;
        }
        let cfg = EdgeConfig::from_mask(m, bits - m, out_mask as u64);
        let (sub, sub_bc, _) = induced_condition(d, bc, &inside, &cfg)?;
        let law = match cache.get(&sub_bc) {
            Some(l) => l.clone(),
            None => {
                let l = joint_distribution(&sub_params, &sub, &sub_bc)?;
                cache.insert(sub_bc.clone(), l.clone());
                l
            }
        };
        for (l, &c) in cond.iter().enumerate() {
            worst = worst.max((c / total - law[l]).abs());
        }
    }
    Ok(worst)
}

/// One exported oracle value.
#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub domain_id: String,
    pub p: f64,
    pub q: f64,
    pub h: f64,
    pub bc_id: String,
    pub event_id: String,
    pub probability: f64,
}
