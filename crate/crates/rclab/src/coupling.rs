//! Monotone couplings of two random-cluster measures driven by decision trees,
//! the three standard exploration trees, and flower domains explored from the
//! loop representation of an annulus.
//!
//! Every edge carries one uniform `U_e`; when the tree reveals `e`, both
//! configurations set `ω_e = 1(U_e >= P[e closed | revealed])` with their own
//! conditional. Trees only ever see the revealed history, so any predicate on
//! that history is a stopping time.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsu::Dsu;
use crate::exact::{joint_distribution, EdgeConfig, ModelParams, DEFAULT_CAP};
use crate::lattice::{build_annulus, medial_of, BoundaryCondition, Domain, Vertex};
use crate::parafermion::trace_loops;
use crate::sampler::uniform;
use crate::{Error, Result};

/// What a decision tree may look at: revealed edges in order, and their values in both configurations.
#[derive(Clone, Copy, Debug)]
pub struct History<'a> {
    pub edges: &'a [usize],
    pub lower: &'a [bool],
    pub upper: &'a [bool],
}

impl History<'_> {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// An adaptive revelation order.
pub trait DecisionTree {
    /// Forget any state from a previous run.
    fn reset(&mut self);
    /// Next unrevealed edge. Called with `h.len() < n_edges`.
    fn next_edge(&mut self, h: &History) -> usize;
    /// Number of revealed edges when the exploration first stalled, if it has.
    fn stall_time(&self) -> Option<usize> {
        None
    }
    fn name(&self) -> &'static str;
}

/// A fixed order.
#[derive(Clone, Debug)]
pub struct DeterministicTree {
    order: Vec<usize>,
}

pub fn deterministic_tree(d: &Domain, order: Vec<usize>) -> Result<DeterministicTree> {
    let mut seen = vec![false; d.n_edges()];
    if order.len() != d.n_edges() || order.iter().any(|&e| e >= seen.len() || std::mem::replace(&mut seen[e], true)) {
        return Err(Error::InvalidParameter("order is not a permutation of the edges".into()));
    }
    Ok(DeterministicTree { order })
}

impl DecisionTree for DeterministicTree {
    fn reset(&mut self) {}

    fn next_edge(&mut self, h: &History) -> usize {
        self.order[h.len()]
    }

    fn name(&self) -> &'static str {
        "deterministic"
    }
}

/// Shared machinery of Examples 2 and 3: a growing set of sites (vertices or faces),
/// candidate edges touching the set, and a fallback in edge order once it stalls.
#[derive(Clone, Debug)]
struct GrowingExploration {
    /// Sites at the two ends of each edge.
    ends: Vec<[usize; 2]>,
    /// Edges at each site.
    incident: Vec<Vec<usize>>,
    roots: Vec<usize>,
    inside: Vec<bool>,
    revealed: Vec<bool>,
    candidates: BTreeSet<usize>,
    processed: usize,
    stall: Option<usize>,
    fallback: usize,
}

impl GrowingExploration {
    fn new(n_sites: usize, ends: Vec<[usize; 2]>, roots: Vec<usize>) -> Self {
        let mut incident = vec![Vec::new(); n_sites];
        for (e, &[a, b]) in ends.iter().enumerate() {
            incident[a].push(e);
            if b != a {
                incident[b].push(e);
            }
        }
        let mut g = GrowingExploration {
            revealed: vec![false; ends.len()],
            ends,
            incident,
            roots,
            inside: vec![false; n_sites],
            candidates: BTreeSet::new(),
            processed: 0,
            stall: None,
            fallback: 0,
        };
        g.reset();
        g
    }

    fn reset(&mut self) {
        self.inside.iter_mut().for_each(|x| *x = false);
        self.revealed.iter_mut().for_each(|x| *x = false);
        self.candidates.clear();
        self.processed = 0;
        self.stall = None;
        self.fallback = 0;
        for i in 0..self.roots.len() {
            self.add(self.roots[i]);
        }
    }

    fn add(&mut self, s: usize) {
        if std::mem::replace(&mut self.inside[s], true) {
            return;
        }
        for &e in &self.incident[s] {
            if !self.revealed[e] {
                self.candidates.insert(e);
            }
        }
    }

    /// `grow(t)` says whether the edge revealed at step `t` lets the set cross it.
    fn next(&mut self, h: &History, grow: impl Fn(usize) -> bool) -> usize {
        while self.processed < h.len() {
            let t = self.processed;
            let e = h.edges[t];
            self.revealed[e] = true;
            self.candidates.remove(&e);
            if self.stall.is_none() && grow(t) {
                let [a, b] = self.ends[e];
                self.add(a);
                self.add(b);
            }
            self.processed += 1;
        }
        if self.stall.is_none() {
            if let Some(&e) = self.candidates.iter().next() {
                return e;
            }
            self.stall = Some(h.len());
        }
        while self.revealed[self.fallback] {
            self.fallback += 1;
        }
        self.fallback
    }
}

/// Explores the clusters of the boundary in the upper configuration.
///
/// Candidates are all unrevealed edges with an endpoint in `V_t` (including edges
/// with both endpoints there), smallest index first.
#[derive(Clone, Debug)]
pub struct BoundaryClusterTree(GrowingExploration);

pub fn boundary_cluster_tree(d: &Domain) -> BoundaryClusterTree {
    let ends = (0..d.n_edges()).map(|e| {
        let (a, b) = d.edge(e);
        [a, b]
    });
    BoundaryClusterTree(GrowingExploration::new(d.n_vertices(), ends.collect(), d.boundary().to_vec()))
}

impl DecisionTree for BoundaryClusterTree {
    fn reset(&mut self) {
        self.0.reset();
    }

    fn next_edge(&mut self, h: &History) -> usize {
        let upper = h.upper;
        self.0.next(h, |t| upper[t])
    }

    fn stall_time(&self) -> Option<usize> {
        self.0.stall
    }

    fn name(&self) -> &'static str {
        "boundary-cluster"
    }
}

/// Explores the dual clusters of the exterior face in the dual of the lower configuration.
///
/// Sites are the unit faces plus one exterior site; an edge bordering fewer than two
/// unit faces borders the exterior.
#[derive(Clone, Debug)]
pub struct DualClusterTree(GrowingExploration);

pub fn dual_cluster_tree(d: &Domain) -> DualClusterTree {
    let faces = d.unit_faces();
    let ext = faces.len();
    let mut sides: Vec<Vec<usize>> = vec![Vec::new(); d.n_edges()];
    for (i, &ll) in faces.iter().enumerate() {
        for e in d.square_edges(ll).expect("unit face") {
            sides[e].push(i);
        }
    }
    let ends = sides
        .into_iter()
        .map(|s| match s.as_slice() {
            [a, b] => [*a, *b],
            [a] => [*a, ext],
            _ => [ext, ext],
        })
        .collect();
    DualClusterTree(GrowingExploration::new(ext + 1, ends, vec![ext]))
}

impl DecisionTree for DualClusterTree {
    fn reset(&mut self) {
        self.0.reset();
    }

    fn next_edge(&mut self, h: &History) -> usize {
        let lower = h.lower;
        self.0.next(h, |t| !lower[t])
    }

    fn stall_time(&self) -> Option<usize> {
        self.0.stall
    }

    fn name(&self) -> &'static str {
        "dual-cluster"
    }
}

/// How `P[e closed | revealed]` is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConditionalMode {
    /// Marginal of the exact joint law given the revealed values (enumerable domains).
    Exact,
    /// Closed form for `e` given connectivity through revealed open edges and the boundary
    /// wiring only. Exact for the last unrevealed edge, an approximation before that.
    HeatBath,
}

struct ExactConditional {
    probs: Vec<f64>,
    memo: HashMap<(u64, u64, u32), f64>,
}

impl ExactConditional {
    fn closed(&mut self, mask: u64, values: u64, e: usize) -> f64 {
        let probs = &self.probs;
        *self.memo.entry((mask, values, e as u32)).or_insert_with(|| {
            let (mut tot, mut closed) = (0.0, 0.0);
            for (c, &p) in probs.iter().enumerate() {
                if c as u64 & mask == values {
                    tot += p;
                    if c >> e & 1 == 0 {
                        closed += p;
                    }
                }
            }
            if tot > 0.0 {
                closed / tot
            } else {
                0.5
            }
        })
    }
}

/// Revealed part of a coupling.
#[derive(Clone, Debug, Serialize)]
pub struct CouplingState {
    pub revealed: Vec<usize>,
    pub lower: Vec<bool>,
    pub upper: Vec<bool>,
    pub uniforms: Vec<f64>,
}

impl CouplingState {
    /// Wiring induced on the vertices by revealed open edges plus `bc`.
    pub fn induced(&self, d: &Domain, bc: &BoundaryCondition, upper: bool) -> BoundaryCondition {
        let vals = if upper { &self.upper } else { &self.lower };
        let mut dsu = Dsu::new(d.n_vertices());
        for (&e, &v) in self.revealed.iter().zip(vals) {
            if v {
                let (a, b) = d.edge(e);
                dsu.union(a, b);
            }
        }
        let mut by_label: HashMap<u32, usize> = HashMap::new();
        for v in 0..d.n_vertices() {
            if let Some(&w) = by_label.get(&bc.label(v)) {
                dsu.union(v, w);
            } else {
                by_label.insert(bc.label(v), v);
            }
        }
        let mut classes: HashMap<usize, Vec<usize>> = HashMap::new();
        for v in 0..d.n_vertices() {
            classes.entry(dsu.find(v)).or_default().push(v);
        }
        let classes: Vec<Vec<usize>> = classes.into_values().filter(|c| c.len() > 1).collect();
        let ghost_with = bc.ghost_class().and_then(|g| (0..d.n_vertices()).find(|&v| bc.label(v) == g));
        BoundaryCondition::from_classes(d.n_vertices(), &classes, ghost_with).expect("valid partition")
    }
}

/// Result of one coupling run.
#[derive(Clone, Debug, Serialize)]
pub struct CouplingOutcome {
    pub lower: EdgeConfig,
    pub upper: EdgeConfig,
    pub state: CouplingState,
    /// Steps completed when the stopping predicate first fired.
    pub stop_time: Option<usize>,
    pub state_at_stop: Option<CouplingState>,
    /// Stall time of the tree, if it has one.
    pub stall_time: Option<usize>,
    /// Steps after which `lower <= upper` failed on the revealed edges.
    pub monotonicity_violations: usize,
}

/// Couples `φ^{bc_low}_{p_low}` below `φ^{bc_high}_{p_high}` on `d`; reusable across runs.
pub struct Coupler {
    d: Domain,
    bc_low: BoundaryCondition,
    bc_high: BoundaryCondition,
    low: ModelParams<f64>,
    high: ModelParams<f64>,
    mode: ConditionalMode,
    exact: Option<(ExactConditional, ExactConditional)>,
}

impl Coupler {
    pub fn new(
        d: &Domain,
        bc_low: &BoundaryCondition,
        bc_high: &BoundaryCondition,
        low: ModelParams<f64>,
        high: ModelParams<f64>,
        mode: ConditionalMode,
    ) -> Result<Self> {
        if !(low.p <= high.p) || low.q != high.q || low.h != high.h || !bc_low.le(bc_high) {
            return Err(Error::InvalidParameter("coupling needs p_low <= p_high, equal q and h, and bc_low <= bc_high".into()));
        }
        if low.q < 1.0 {
            return Err(Error::InvalidParameter(format!("monotone coupling needs q >= 1, got {}", low.q)));
        }
        let exact = match mode {
            ConditionalMode::Exact => {
                if d.n_edges() + if low.has_ghost() { d.n_vertices() } else { 0 } > DEFAULT_CAP {
                    return Err(Error::CapExceeded { edges: d.n_edges(), cap: DEFAULT_CAP });
                }
                let mk = |params, bc| -> Result<ExactConditional> {
                    Ok(ExactConditional { probs: joint_distribution(params, d, bc)?, memo: HashMap::new() })
                };
                Some((mk(&low, bc_low)?, mk(&high, bc_high)?))
            }
            ConditionalMode::HeatBath => {
                if low.has_ghost() {
                    return Err(Error::Unsupported("heat-bath coupling conditionals ignore the ghost; use h = 0".into()));
                }
                None
            }
        };
        Ok(Coupler { d: d.clone(), bc_low: bc_low.clone(), bc_high: bc_high.clone(), low, high, mode, exact })
    }

    pub fn mode(&self) -> ConditionalMode {
        self.mode
    }

    pub fn domain(&self) -> &Domain {
        &self.d
    }

    /// Uniforms `U_e` in edge order.
    pub fn uniforms(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.d.n_edges()).map(|_| uniform(&mut rng)).collect()
    }

    pub fn run(
        &mut self,
        tree: &mut dyn DecisionTree,
        seed: u64,
        stop: Option<&dyn Fn(&History) -> bool>,
    ) -> Result<CouplingOutcome> {
        let m = self.d.n_edges();
        let n = self.d.n_vertices();
        let u = self.uniforms(seed);
        tree.reset();
        let mut edges = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(m);
        let mut upper = Vec::with_capacity(m);
        let mut seen = vec![false; m];
        let (mut mask, mut vlow, mut vhigh) = (0u64, 0u64, 0u64);
        // Connectivity through revealed open edges plus wiring, for the heat-bath mode.
        let wired = |bc: &BoundaryCondition| {
            let mut dsu = Dsu::new(n);
            let mut first: HashMap<u32, usize> = HashMap::new();
            for v in 0..n {
                match first.get(&bc.label(v)) {
                    Some(&w) => {
                        dsu.union(v, w);
                    }
                    None => {
                        first.insert(bc.label(v), v);
                    }
                }
            }
            dsu
        };
        let (mut dlow, mut dhigh) = (wired(&self.bc_low), wired(&self.bc_high));
        let mut stop_time = None;
        let mut state_at_stop = None;
        let mut violations = 0;
        if let Some(s) = stop {
            if s(&History { edges: &edges, lower: &lower, upper: &upper }) {
                stop_time = Some(0);
                state_at_stop = Some(CouplingState { revealed: vec![], lower: vec![], upper: vec![], uniforms: vec![] });
            }
        }
        for _ in 0..m {
            let e = tree.next_edge(&History { edges: &edges, lower: &lower, upper: &upper });
            if e >= m || std::mem::replace(&mut seen[e], true) {
                return Err(Error::InvalidParameter(format!("decision tree {} returned edge {e} twice", tree.name())));
            }
            let (cl, ch) = match self.exact.as_mut() {
                Some((lo, hi)) => (lo.closed(mask, vlow, e), hi.closed(mask, vhigh, e)),
                None => {
                    let (a, b) = self.d.edge(e);
                    let hb = |p: &ModelParams<f64>, dsu: &mut Dsu| {
                        let open = if dsu.find(a) == dsu.find(b) { p.p } else { p.p / (p.p + p.q * (1.0 - p.p)) };
                        1.0 - open
                    };
                    (hb(&self.low, &mut dlow), hb(&self.high, &mut dhigh))
                }
            };
            let wl = u[e] >= cl;
            let wh = u[e] >= ch;
            if wl && !wh {
                violations += 1;
            }
            edges.push(e);
            lower.push(wl);
            upper.push(wh);
            if self.exact.is_some() {
                mask |= 1 << e;
                if wl {
                    vlow |= 1 << e;
                }
                if wh {
                    vhigh |= 1 << e;
                }
            } else {
                let (a, b) = self.d.edge(e);
                if wl {
                    dlow.union(a, b);
                }
                if wh {
                    dhigh.union(a, b);
                }
            }
            if stop_time.is_none() {
                if let Some(s) = stop {
                    if s(&History { edges: &edges, lower: &lower, upper: &upper }) {
                        stop_time = Some(edges.len());
                        state_at_stop = Some(CouplingState {
                            revealed: edges.clone(),
                            lower: lower.clone(),
                            upper: upper.clone(),
                            uniforms: edges.iter().map(|&e| u[e]).collect(),
                        });
                    }
                }
            }
        }
        let mut lo = EdgeConfig::closed(m, 0);
        let mut hi = EdgeConfig::closed(m, 0);
        for ((&e, &a), &b) in edges.iter().zip(&lower).zip(&upper) {
            lo.set(e, a);
            hi.set(e, b);
        }
        Ok(CouplingOutcome {
            lower: lo,
            upper: hi,
            state: CouplingState { uniforms: edges.iter().map(|&e| u[e]).collect(), revealed: edges, lower, upper },
            stop_time,
            state_at_stop,
            stall_time: tree.stall_time(),
            monotonicity_violations: violations,
        })
    }
}

/// One coupling run; see [`Coupler`] for repeated runs on the same pair of measures.
#[allow(clippy::too_many_arguments)]
pub fn run_coupling(
    tree: &mut dyn DecisionTree,
    d: &Domain,
    bc_low: &BoundaryCondition,
    bc_high: &BoundaryCondition,
    p_low: f64,
    p_high: f64,
    q: f64,
    seed: u64,
    stop: Option<&dyn Fn(&History) -> bool>,
) -> Result<CouplingOutcome> {
    let mode = if d.n_edges() <= DEFAULT_CAP { ConditionalMode::Exact } else { ConditionalMode::HeatBath };
    let mut c = Coupler::new(d, bc_low, bc_high, ModelParams::new(p_low, q, 0.0)?, ModelParams::new(p_high, q, 0.0)?, mode)?;
    c.run(tree, seed, stop)
}

/// Stopping predicate "the induced boundary conditions on the unrevealed edges coincide":
/// both sides wire the endpoints of unrevealed edges in the same way.
pub fn conditions_coincide<'a>(
    d: &'a Domain,
    bc_low: &'a BoundaryCondition,
    bc_high: &'a BoundaryCondition,
) -> impl Fn(&History) -> bool + 'a {
    move |h: &History| {
        let mut revealed = vec![false; d.n_edges()];
        h.edges.iter().for_each(|&e| revealed[e] = true);
        let touched: Vec<usize> = {
            let mut t: Vec<usize> = (0..d.n_edges())
                .filter(|&e| !revealed[e])
                .flat_map(|e| {
                    let (a, b) = d.edge(e);
                    [a, b]
                })
                .collect();
            t.sort_unstable();
            t.dedup();
            t
        };
        let part = |bc: &BoundaryCondition, vals: &[bool]| {
            let st = CouplingState { revealed: h.edges.to_vec(), lower: vals.to_vec(), upper: vals.to_vec(), uniforms: vec![] };
            let ind = st.induced(d, bc, false);
            let mut canon: HashMap<u32, usize> = HashMap::new();
            touched
                .iter()
                .map(|&v| {
                    let k = canon.len();
                    *canon.entry(ind.label(v)).or_insert(k)
                })
                .collect::<Vec<_>>()
        };
        part(bc_low, h.lower) == part(bc_high, h.upper)
    }
}

/// Inner flowers live inside the core box `Λ_r`; outer ones outside `Λ_R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FlowerKind {
    Inner,
    Outer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PetalKind {
    Primal,
    Dual,
}

/// A petal, represented by its trace on the core-box boundary from `a_j` to `a_{j+1}`
/// (counterclockwise, endpoints included).
#[derive(Clone, Debug, Serialize)]
pub struct Petal {
    pub kind: PetalKind,
    pub vertices: Vec<Vertex>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowerDomain {
    pub kind: FlowerKind,
    /// Half-width of the box whose boundary carries the endpoints.
    pub core_scale: u32,
    #[serde(skip)]
    pub region: Domain,
    /// Endpoints `a_1, ..., a_2k` in counterclockwise order.
    pub endpoints: Vec<Vertex>,
    pub petals: Vec<Petal>,
    /// Primal edges adjacent to the explored interfaces.
    pub explored: Vec<(Vertex, Vertex)>,
}

impl FlowerDomain {
    pub fn n_petals(&self) -> usize {
        self.petals.len()
    }

    /// Region indices of the vertices of petal `j`.
    pub fn petal_indices(&self, j: usize) -> Vec<usize> {
        self.petals[j].vertices.iter().filter_map(|&v| self.region.vertex_index(v)).collect()
    }

    /// Coherent boundary condition wiring each primal petal and nothing else.
    pub fn minimal_coherent(&self) -> BoundaryCondition {
        let classes: Vec<Vec<usize>> =
            (0..self.petals.len()).filter(|&j| self.petals[j].kind == PetalKind::Primal).map(|j| self.petal_indices(j)).collect();
        BoundaryCondition::from_classes(self.region.n_vertices(), &classes, None).expect("disjoint petals")
    }

    /// Primal petals wired, dual petal interiors wired to no other petal vertex.
    pub fn is_coherent(&self, bc: &BoundaryCondition) -> bool {
        let all: HashSet<usize> = (0..self.petals.len()).flat_map(|j| self.petal_indices(j)).collect();
        self.petals.iter().enumerate().all(|(j, p)| {
            let idx = self.petal_indices(j);
            match p.kind {
                PetalKind::Primal => idx.windows(2).all(|w| bc.same_class(w[0], w[1])),
                PetalKind::Dual => {
                    let inner = if idx.len() > 2 { &idx[1..idx.len() - 1] } else { &[][..] };
                    inner.iter().all(|&v| all.iter().all(|&w| w == v || !bc.same_class(v, w)) && !bc.ghost_wired(v))
                }
            }
        })
    }
}

fn annulus_restriction(d: &Domain, cfg: &EdgeConfig, r: u32, big_r: u32) -> Result<(Domain, EdgeConfig)> {
    let ann = build_annulus(r, big_r)?;
    let mut c = EdgeConfig::closed(ann.n_edges(), 0);
    for e in 0..ann.n_edges() {
        let (a, b) = ann.edge_vertices(e);
        let (ia, ib) = match (d.vertex_index(a), d.vertex_index(b)) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(Error::InvalidDomain(format!("domain does not contain Ann({r}, {big_r})"))),
        };
        let de = d.edge_between(ia, ib).ok_or_else(|| Error::InvalidDomain("annulus edge missing".into()))?;
        c.set(e, cfg.is_open(de));
    }
    Ok((ann, c))
}

fn angle2(p: (i32, i32)) -> f64 {
    let a = (p.1 as f64).atan2(p.0 as f64);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

/// Counterclockwise vertices of `∂Λ_n`, starting at angle 0.
fn box_boundary_ccw(n: i32) -> Vec<Vertex> {
    let mut v: Vec<Vertex> =
        (-n..=n).flat_map(|y| (-n..=n).map(move |x| Vertex::new(x, y))).filter(|v| v.norm_inf() == n).collect();
    v.sort_by(|a, b| angle2((a.x, a.y)).total_cmp(&angle2((b.x, b.y))));
    v
}

fn explore_flower(d: &Domain, cfg: &EdgeConfig, r: u32, big_r: u32, kind: FlowerKind) -> Result<Option<FlowerDomain>> {
    let (ann, c) = annulus_restriction(d, cfg, r, big_r)?;
    let med = medial_of(&ann);
    let ro = 2 * big_r as i32 + 1;
    let stub_side = |mv: usize| -> Option<bool> {
        if med.degree(mv) != 2 {
            return None;
        }
        let (x, y) = med.position2(mv);
        let n = x.abs().max(y.abs());
        Some(n == ro)
    };
    // Start side for the exploration (`true` = outer boundary).
    let from_outer = kind == FlowerKind::Inner;
    let loops = trace_loops(&ann, &c);
    let mut exp_mv: HashSet<usize> = HashSet::new();
    // (stub position, in-going) for interfaces joining the two boundaries.
    let mut ends: Vec<((i32, i32), bool)> = Vec::new();
    for l in &loops.loops {
        let cuts: Vec<usize> = (0..l.len()).filter(|&i| med.degree(med.tail(l[i])) == 2).collect();
        for (ci, &s) in cuts.iter().enumerate() {
            let t = if ci + 1 < cuts.len() { cuts[ci + 1] } else { cuts[0] + l.len() };
            let arc: Vec<usize> = (s..t).map(|i| l[i % l.len()]).collect();
            let a = stub_side(med.tail(arc[0])).unwrap();
            let b = stub_side(med.head(*arc.last().unwrap())).unwrap();
            if a != from_outer && b != from_outer {
                continue;
            }
            for &e in &arc {
                for mv in [med.tail(e), med.head(e)] {
                    if med.degree(mv) == 4 {
                        exp_mv.insert(mv);
                    }
                }
            }
            if a != b {
                // The endpoint on the far side from where exploration starts.
                if a == from_outer {
                    ends.push((med.position2(med.head(*arc.last().unwrap())), true));
                } else {
                    ends.push((med.position2(med.tail(arc[0])), false));
                }
            }
        }
    }
    if ends.is_empty() {
        return Ok(None);
    }
    let explored: HashSet<(Vertex, Vertex)> = exp_mv
        .iter()
        .map(|&mv| {
            let (x, y) = med.position2(mv);
            let a = Vertex::new(x.div_euclid(2), y.div_euclid(2));
            let b = Vertex::new((x + 1).div_euclid(2), (y + 1).div_euclid(2));
            (a.min(b), a.max(b))
        })
        .collect();
    let (core, rr) = match kind {
        FlowerKind::Inner => (r as i32, big_r as i32),
        FlowerKind::Outer => (big_r as i32, big_r as i32),
    };
    let in_core = |v: Vertex| match kind {
        FlowerKind::Inner => v.norm_inf() <= core,
        FlowerKind::Outer => v.norm_inf() == core,
    };
    let in_space = |v: Vertex| match kind {
        FlowerKind::Inner => v.norm_inf() <= rr,
        FlowerKind::Outer => v.norm_inf() >= r as i32 && v.norm_inf() <= rr,
    };
    let usable = |a: Vertex, b: Vertex| (in_core(a) && in_core(b)) || !explored.contains(&(a.min(b), a.max(b)));
    let start = box_boundary_ccw(core)[0];
    let mut seen: HashSet<Vertex> = HashSet::from([start]);
    let mut queue = vec![start];
    let mut region_edges = Vec::new();
    while let Some(v) = queue.pop() {
        for dir in 0..4 {
            let w = v.step(dir);
            if !in_space(w) || !usable(v, w) {
                continue;
            }
            region_edges.push((v.min(w), v.max(w)));
            if seen.insert(w) {
                queue.push(w);
            }
        }
    }
    region_edges.sort_by_key(|&(a, b)| (a, b));
    region_edges.dedup();
    let region = Domain::new(seen.iter().copied(), region_edges)?;

    // Anchor each endpoint at the core-boundary vertex next to its stub.
    let anchor = |p: (i32, i32)| -> Vertex {
        let (x, y) = p;
        let cand = [Vertex::new(x.div_euclid(2), y.div_euclid(2)), Vertex::new((x + 1).div_euclid(2), (y + 1).div_euclid(2))];
        *cand.iter().find(|v| v.norm_inf() == core).unwrap_or(&cand[0])
    };
    // Inner flowers: dual after an in-going endpoint. Outer flowers: primal.
    let after = |ingoing: bool| match (kind, ingoing) {
        (FlowerKind::Inner, true) | (FlowerKind::Outer, false) => PetalKind::Dual,
        _ => PetalKind::Primal,
    };
    let mut ends: Vec<(f64, bool, Vertex)> = ends.into_iter().map(|(p, ingoing)| (angle2(p), ingoing, anchor(p))).collect();
    // Two endpoints on one stub pinch a single primal vertex: the primal petal goes between them.
    let rank = |ingoing: bool| after(ingoing) != PetalKind::Primal;
    ends.sort_by(|a, b| a.0.total_cmp(&b.0).then(rank(a.1).cmp(&rank(b.1))));
    let alternates = |e: &[(f64, bool, Vertex)]| (0..e.len()).all(|i| e[i].1 != e[(i + 1) % e.len()].1);
    if !alternates(&ends) {
        ends.sort_by(|a, b| a.0.total_cmp(&b.0).then(rank(b.1).cmp(&rank(a.1))));
        if !alternates(&ends) {
            return Err(Error::InvalidDomain("interface endpoints do not alternate".into()));
        }
    }
    let ring = box_boundary_ccw(core);
    let pos: HashMap<Vertex, usize> = ring.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let k = ends.len();
    let n_ring = ring.len();
    // Spans in ring steps; the last petal closes the circle, so coincident endpoints
    // give an empty petal followed by the rest of the ring.
    let mut spans: Vec<usize> = (0..k).map(|j| (pos[&ends[(j + 1) % k].2] + n_ring - pos[&ends[j].2]) % n_ring).collect();
    let head: usize = spans[..k - 1].iter().sum();
    spans[k - 1] = n_ring - head;
    let petals = (0..k)
        .map(|j| {
            let (_, ingoing, a) = ends[j];
            let kind_p = after(ingoing);
            let vertices = (0..=spans[j]).map(|s| ring[(pos[&a] + s) % n_ring]).collect();
            Petal { kind: kind_p, vertices }
        })
        .collect();
    let mut explored: Vec<(Vertex, Vertex)> = explored.into_iter().collect();
    explored.sort();
    Ok(Some(FlowerDomain {
        kind,
        core_scale: core as u32,
        region,
        endpoints: ends.iter().map(|e| e.2).collect(),
        petals,
        explored,
    }))
}

/// Inner flower domain from `Λ_R` to `Λ_r`: interfaces started on `∂Λ_R`, domain the
/// component of `Λ_r` once their adjacent edges are removed. `None` if no interface
/// reaches `∂Λ_r`. `d` must contain `Ann(r, R)`.
pub fn explore_inner_flower(d: &Domain, cfg: &EdgeConfig, r: u32, big_r: u32) -> Result<Option<FlowerDomain>> {
    explore_flower(d, cfg, r, big_r, FlowerKind::Inner)
}

/// Outer flower domain from `Λ_r` to `Λ_R`, the mirror of the inner one.
pub fn explore_outer_flower(d: &Domain, cfg: &EdgeConfig, r: u32, big_r: u32) -> Result<Option<FlowerDomain>> {
    explore_flower(d, cfg, r, big_r, FlowerKind::Outer)
}

/// All pairwise distances between distinct endpoints exceed `eta * core_scale`.
pub fn well_separated(f: &FlowerDomain, eta: f64) -> bool {
    let lim = eta * f.core_scale as f64;
    let pts = &f.endpoints;
    (0..pts.len()).all(|i| {
        (i + 1..pts.len()).all(|j| {
            let (a, b) = (pts[i], pts[j]);
            a == b || (((a.x - b.x).pow(2) + (a.y - b.y).pow(2)) as f64).sqrt() > lim
        })
    })
}

/// `(bc1, bc2)` sandwiches a boosting pair: there are coherent `ξ <= ξ'` with
/// `bc1 <= ξ`, `ξ' <= bc2`, and two primal petals wired in `ξ'` but not in `ξ`.
pub fn is_boosting_pair(f: &FlowerDomain, bc1: &BoundaryCondition, bc2: &BoundaryCondition) -> bool {
    if bc1.n_vertices() != f.region.n_vertices() || bc2.n_vertices() != f.region.n_vertices() || !bc1.le(bc2) {
        return false;
    }
    let xi = bc1.join(&f.minimal_coherent());
    if !f.is_coherent(&xi) {
        return false;
    }
    let primal: Vec<usize> = (0..f.petals.len()).filter(|&j| f.petals[j].kind == PetalKind::Primal).collect();
    for (a, &i) in primal.iter().enumerate() {
        for &j in &primal[a + 1..] {
            let (pi, pj) = (f.petal_indices(i), f.petal_indices(j));
            if pi.is_empty() || pj.is_empty() || xi.same_class(pi[0], pj[0]) {
                continue;
            }
            let xi2 = xi.wire(&[pi[0], pj[0]]);
            if f.is_coherent(&xi2) && xi2.le(bc2) {
                return true;
            }
        }
    }
    false
}

/// Outcome of the double four-petal query between `Λ_r` and `Λ_R`.
#[derive(Clone, Debug, Serialize)]
pub struct DoubleFlower {
    pub rho: u32,
    pub inner: Option<FlowerDomain>,
    pub outer: Option<FlowerDomain>,
    pub holds: bool,
}

/// Explores from `∂Λ_ρ`, `ρ = round(sqrt(rR))`, inwards to `Λ_r` and outwards to `Λ_R`, and
/// checks four petals, 1/2-separation and the four connections between matching petals
/// outside both flowers (primal petals by open paths, dual ones by dual paths).
pub fn double_flower(d: &Domain, cfg: &EdgeConfig, r: u32, big_r: u32) -> Result<DoubleFlower> {
    let rho = ((r as f64) * (big_r as f64)).sqrt().round() as u32;
    if rho <= r || rho >= big_r {
        return Err(Error::InvalidParameter(format!("no room between {r} and {big_r}")));
    }
    let inner = explore_inner_flower(d, cfg, r, rho)?;
    let outer = explore_outer_flower(d, cfg, rho, big_r)?;
    let holds = match (&inner, &outer) {
        (Some(fi), Some(fo)) if fi.n_petals() == 4 && fo.n_petals() == 4 && well_separated(fi, 0.5) && well_separated(fo, 0.5) => {
            let (ann, c) = annulus_restriction(d, cfg, r, big_r)?;
            let taken: HashSet<(Vertex, Vertex)> = [fi, fo]
                .iter()
                .flat_map(|f| (0..f.region.n_edges()).map(|e| f.region.edge_vertices(e)))
                .collect();
            let free_edge = |e: usize| !taken.contains(&ann.edge_vertices(e));
            // Primal connectivity.
            let mut dsu = Dsu::new(ann.n_vertices());
            for e in 0..ann.n_edges() {
                if free_edge(e) && c.is_open(e) {
                    let (a, b) = ann.edge(e);
                    dsu.union(a, b);
                }
            }
            // Dual connectivity on unit faces of the annulus.
            let faces = ann.unit_faces();
            let fidx: HashMap<Vertex, usize> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
            let mut fd = Dsu::new(faces.len());
            let mut sides: HashMap<usize, Vec<usize>> = HashMap::new();
            for (i, &ll) in faces.iter().enumerate() {
                for e in ann.square_edges(ll).unwrap() {
                    sides.entry(e).or_default().push(i);
                }
            }
            for (e, s) in &sides {
                if s.len() == 2 && free_edge(*e) && !c.is_open(*e) {
                    fd.union(s[0], s[1]);
                }
            }
            let primal_hit = |pa: &Petal, pb: &Petal, dsu: &mut Dsu| {
                let ra: HashSet<usize> = pa.vertices.iter().filter_map(|&v| ann.vertex_index(v)).map(|v| dsu.find(v)).collect();
                pb.vertices.iter().filter_map(|&v| ann.vertex_index(v)).any(|v| ra.contains(&dsu.find(v)))
            };
            let near_faces = |p: &Petal| -> Vec<usize> {
                p.vertices[1..p.vertices.len().saturating_sub(1)]
                    .iter()
                    .flat_map(|&v| [(0, 0), (-1, 0), (0, -1), (-1, -1)].map(|(dx, dy)| Vertex::new(v.x + dx, v.y + dy)))
                    .filter_map(|ll| fidx.get(&ll).copied())
                    .collect()
            };
            let dual_hit = |pa: &Petal, pb: &Petal, fd: &mut Dsu| {
                let ra: HashSet<usize> = near_faces(pa).into_iter().map(|f| fd.find(f)).collect();
                near_faces(pb).into_iter().any(|f| ra.contains(&fd.find(f)))
            };
            let first_primal = |f: &FlowerDomain| f.petals.iter().position(|p| p.kind == PetalKind::Primal).unwrap_or(0);
            let (si, so) = (first_primal(fi), first_primal(fo));
            let mut ok = false;
            for shift in [0, 2] {
                let pi = |j: usize| &fi.petals[(si + j) % 4];
                let po = |j: usize| &fo.petals[(so + j + shift) % 4];
                if primal_hit(pi(0), po(0), &mut dsu)
                    && primal_hit(pi(2), po(2), &mut dsu)
                    && dual_hit(pi(1), po(1), &mut fd)
                    && dual_hit(pi(3), po(3), &mut fd)
                {
                    ok = true;
                }
            }
            ok
        }
        _ => false,
    };
    Ok(DoubleFlower { rho, inner, outer, holds })
}
