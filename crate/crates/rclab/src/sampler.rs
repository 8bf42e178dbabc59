//! Markov chains for the random-cluster measure: single-edge heat bath and
//! Chayes–Machta cluster updates.
//!
//! Randomness for sweep `t` of a chain with seed `s` is the ChaCha8 stream `t`
//! keyed by `s`, consumed in a fixed order (edges by index, then ghost edges;
//! for cluster updates, one word per vertex then one per edge). Two chains with
//! the same seed therefore see identical uniforms, which is what the
//! common-random-number estimators rely on.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsu::Dsu;
use crate::exact::{EdgeConfig, ModelParams};
use crate::lattice::{BoundaryCondition, Domain};
use crate::stats;
use crate::{Error, Result};

/// Update rule of a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    #[serde(rename = "heatbath")]
    HeatBath,
    #[serde(rename = "cm")]
    ChayesMachta,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heatbath" | "hb" => Ok(Algorithm::HeatBath),
            "cm" | "chayes-machta" => Ok(Algorithm::ChayesMachta),
            _ => Err(Error::InvalidParameter(format!("unknown algorithm {s:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::HeatBath => "heatbath",
            Algorithm::ChayesMachta => "cm",
        })
    }
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Generator for one sweep of one chain.
pub fn sweep_rng(seed: u64, sweep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sweep);
    rng
}

enum Probe {
    Connected,
    /// The side that ran out first, as a full component.
    Separate(Vec<u32>),
}

/// Chain state. Node ids: vertices `0..n`, the ghost `n`, then one virtual node per
/// non-singleton wired class; members link to their class node.
#[derive(Clone, Debug)]
pub struct ChainState {
    d: Domain,
    bc: BoundaryCondition,
    cfg: EdgeConfig,
    ghost: bool,
    class_node: Vec<u32>,
    class_members: Vec<Vec<u32>>,
    ghost_class_node: u32,
    ghost_list: Vec<u32>,
    ghost_pos: Vec<u32>,
    labels: Vec<u32>,
    labels_valid: bool,
    next_label: u32,
    stamp_a: Vec<u32>,
    stamp_b: Vec<u32>,
    generation: u32,
    scratch: Vec<u32>,
    seed: u64,
    sweep: u64,
}

const NONE: u32 = u32::MAX;

impl ChainState {
    /// All-closed start with ghost edges present iff `with_ghost`.
    pub fn new(d: &Domain, bc: &BoundaryCondition, with_ghost: bool, seed: u64) -> Result<Self> {
        let n = d.n_vertices();
        if bc.n_vertices() != n {
            return Err(Error::InvalidParameter("boundary condition size differs from domain".into()));
        }
        let mut class_node = vec![NONE; n];
        let mut class_members = Vec::new();
        let mut ghost_class_node = NONE;
        for class in bc.classes() {
            let id = (n + 1 + class_members.len()) as u32;
            let mut members: Vec<u32> = class.iter().map(|&v| v as u32).collect();
            for &v in &class {
                class_node[v] = id;
            }
            if bc.ghost_wired(class[0]) {
                ghost_class_node = id;
                members.push(n as u32);
            }
            class_members.push(members);
        }
        let nodes = n + 1 + class_members.len();
        let mut s = ChainState {
            d: d.clone(),
            bc: bc.clone(),
            cfg: EdgeConfig::closed(d.n_edges(), if with_ghost { n } else { 0 }),
            ghost: with_ghost,
            class_node,
            class_members,
            ghost_class_node,
            ghost_list: Vec::new(),
            ghost_pos: vec![NONE; n],
            labels: vec![0; nodes],
            labels_valid: false,
            next_label: 0,
            stamp_a: vec![0; nodes],
            stamp_b: vec![0; nodes],
            generation: 0,
            scratch: Vec::new(),
            seed,
            sweep: 0,
        };
        s.relabel_all();
        Ok(s)
    }

    /// Replaces the configuration (bit layout must match).
    pub fn set_config(&mut self, cfg: EdgeConfig) -> Result<()> {
        if cfg.n_edges() != self.cfg.n_edges() || cfg.n_ghost() != self.cfg.n_ghost() {
            return Err(Error::InvalidParameter("configuration layout mismatch".into()));
        }
        self.cfg = cfg;
        self.ghost_list.clear();
        self.ghost_pos.iter_mut().for_each(|p| *p = NONE);
        for v in 0..self.cfg.n_ghost() {
            if self.cfg.ghost_open(v) {
                self.ghost_insert(v);
            }
        }
        self.relabel_all();
        Ok(())
    }

    pub fn config(&self) -> &EdgeConfig {
        &self.cfg
    }

    pub fn domain(&self) -> &Domain {
        &self.d
    }

    pub fn boundary_condition(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweep
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn n(&self) -> usize {
        self.d.n_vertices()
    }

    fn ghost_insert(&mut self, v: usize) {
        if self.ghost_pos[v] == NONE {
            self.ghost_pos[v] = self.ghost_list.len() as u32;
            self.ghost_list.push(v as u32);
        }
    }

    fn ghost_remove(&mut self, v: usize) {
        let p = self.ghost_pos[v];
        if p != NONE {
            let last = *self.ghost_list.last().unwrap();
            self.ghost_list.swap_remove(p as usize);
            if last as usize != v {
                self.ghost_pos[last as usize] = p;
            }
            self.ghost_pos[v] = NONE;
        }
    }

    fn endpoints(&self, bit: usize) -> (usize, usize) {
        let m = self.d.n_edges();
        if bit < m {
            self.d.edge(bit)
        } else {
            (bit - m, self.n())
        }
    }

    /// Neighbours of `x` in the wired graph, skipping `skip` (an edge or ghost bit).
    fn neighbors(&self, x: usize, skip: usize, out: &mut Vec<u32>) {
        out.clear();
        let n = self.n();
        let m = self.d.n_edges();
        if x < n {
            for dir in 0..4 {
                if let Some(e) = self.d.neighbor_edge(x, dir) {
                    if e != skip && self.cfg.is_open(e) {
                        out.push(self.d.neighbor(x, dir).unwrap() as u32);
                    }
                }
            }
            if self.ghost && m + x != skip && self.cfg.ghost_open(x) {
                out.push(n as u32);
            }
            if self.class_node[x] != NONE {
                out.push(self.class_node[x]);
            }
        } else if x == n {
            for &v in &self.ghost_list {
                if m + v as usize != skip {
                    out.push(v);
                }
            }
            if self.ghost_class_node != NONE {
                out.push(self.ghost_class_node);
            }
        } else {
            out.extend_from_slice(&self.class_members[x - n - 1]);
        }
    }

    /// Interleaved search from `a` and `b`, ignoring bit `skip`.
    fn probe(&mut self, a: usize, b: usize, skip: usize) -> Probe {
        if a == b {
            return Probe::Connected;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp_a.iter_mut().for_each(|s| *s = 0);
            self.stamp_b.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let g = self.generation;
        let mut qa = vec![a as u32];
        let mut qb = vec![b as u32];
        self.stamp_a[a] = g;
        self.stamp_b[b] = g;
        let (mut ha, mut hb) = (0usize, 0usize);
        let mut buf = std::mem::take(&mut self.scratch);
        let result = loop {
            if ha == qa.len() {
                break Probe::Separate(qa);
            }
            let x = qa[ha] as usize;
            ha += 1;
            self.neighbors(x, skip, &mut buf);
            if buf.iter().any(|&w| self.stamp_b[w as usize] == g) {
                break Probe::Connected;
            }
            for &w in &buf {
                if self.stamp_a[w as usize] != g {
                    self.stamp_a[w as usize] = g;
                    qa.push(w);
                }
            }
            if hb == qb.len() {
                break Probe::Separate(qb);
            }
            let y = qb[hb] as usize;
            hb += 1;
            self.neighbors(y, skip, &mut buf);
            if buf.iter().any(|&w| self.stamp_a[w as usize] == g) {
                break Probe::Connected;
            }
            for &w in &buf {
                if self.stamp_b[w as usize] != g {
                    self.stamp_b[w as usize] = g;
                    qb.push(w);
                }
            }
        };
        self.scratch = buf;
        result
    }

    /// Recomputes component labels from scratch.
    fn relabel_all(&mut self) {
        let nodes = self.labels.len();
        let mut dsu = Dsu::new(nodes);
        let n = self.n();
        for e in 0..self.d.n_edges() {
            if self.cfg.is_open(e) {
                let (a, b) = self.d.edge(e);
                dsu.union(a, b);
            }
        }
        for &v in &self.ghost_list {
            dsu.union(v as usize, n);
        }
        for (i, members) in self.class_members.iter().enumerate() {
            for &v in members {
                dsu.union(v as usize, n + 1 + i);
            }
        }
        for x in 0..nodes {
            self.labels[x] = dsu.find(x) as u32;
        }
        self.next_label = nodes as u32;
        self.labels_valid = true;
    }

    /// Whether the endpoints of `bit` are joined in the wired graph without it.
    pub fn connected_off(&mut self, bit: usize) -> bool {
        let (a, b) = self.endpoints(bit);
        matches!(self.probe(a, b, bit), Probe::Connected)
    }

    /// True when cached labels agree with a fresh labelling (diagnostic).
    pub fn labels_consistent(&mut self) -> bool {
        if !self.labels_valid {
            return true;
        }
        let old = self.labels.clone();
        self.relabel_all();
        let mut map = std::collections::HashMap::new();
        let mut inv = std::collections::HashMap::new();
        old.iter().zip(&self.labels).all(|(a, b)| *map.entry(*a).or_insert(*b) == *b && *inv.entry(*b).or_insert(*a) == *a)
    }

    /// One heat-bath sweep: edges in index order, then ghost edges.
    pub fn heat_bath_sweep(&mut self, params: &ModelParams<f64>) {
        if params.q == 1.0 {
            self.independent_sweep(params);
            return;
        }
        if !self.labels_valid || self.next_label > u32::MAX / 2 {
            self.relabel_all();
        }
        let mut rng = sweep_rng(self.seed, self.sweep);
        let m = self.d.n_edges();
        let bits = m + self.cfg.n_ghost();
        let q = params.q;
        let pg = params.ghost_p();
        for bit in 0..bits {
            let u = uniform(&mut rng);
            let pe = if bit < m { params.p } else { pg };
            let pc = pe / (pe + (1.0 - pe) * q);
            let (a, b) = self.endpoints(bit);
            let was = self.cfg.bit(bit);
            if !was {
                let connected = self.labels[a] == self.labels[b];
                let open = u < if connected { pe } else { pc };
                if open {
                    if !connected {
                        // Merge: relabel the smaller side.
                        if let Probe::Separate(side) = self.probe(a, b, usize::MAX) {
                            let other = if side.contains(&(a as u32)) { self.labels[b] } else { self.labels[a] };
                            for &x in &side {
                                self.labels[x as usize] = other;
                            }
                        }
                    }
                    self.set_bit(bit, true);
                }
            } else if u >= pc {
                let probe = self.probe(a, b, bit);
                let connected = matches!(probe, Probe::Connected);
                let open = u < if connected { pe } else { pc };
                if !open {
                    self.set_bit(bit, false);
                    if let Probe::Separate(side) = probe {
                        let fresh = self.next_label;
                        self.next_label += 1;
                        for &x in &side {
                            self.labels[x as usize] = fresh;
                        }
                    }
                }
            }
        }
        self.sweep += 1;
    }

    /// Heat-bath sweep at `q = 1`: both conditionals equal `p`, so no connectivity is needed.
    /// Consumes the same uniforms as the general sweep; labels are rebuilt lazily.
    fn independent_sweep(&mut self, params: &ModelParams<f64>) {
        let mut rng = sweep_rng(self.seed, self.sweep);
        let m = self.d.n_edges();
        let pg = params.ghost_p();
        for bit in 0..m + self.cfg.n_ghost() {
            let u = uniform(&mut rng);
            let open = u < if bit < m { params.p } else { pg };
            if self.cfg.bit(bit) != open {
                self.set_bit(bit, open);
            }
        }
        self.labels_valid = false;
        self.sweep += 1;
    }

    fn set_bit(&mut self, bit: usize, open: bool) {
        self.cfg.set_bit(bit, open);
        let m = self.d.n_edges();
        if bit >= m {
            if open {
                self.ghost_insert(bit - m);
            } else {
                self.ghost_remove(bit - m);
            }
        }
    }

    /// One Chayes–Machta update: each wired cluster is activated with probability `1/q`
    /// (decided by the uniform of its lowest vertex), then every edge with both endpoints
    /// active is resampled as Bernoulli(p).
    pub fn chayes_machta_step(&mut self, params: &ModelParams<f64>) -> Result<()> {
        if params.has_ghost() {
            return Err(Error::Unsupported("cluster updates with a magnetic field".into()));
        }
        if params.q < 1.0 {
            return Err(Error::InvalidParameter("cluster updates need q >= 1".into()));
        }
        let mut rng = sweep_rng(self.seed, self.sweep);
        let n = self.n();
        let m = self.d.n_edges();
        let mut active = vec![true; n];
        if params.q > 1.0 {
            let nodes = self.labels.len();
            let mut dsu = Dsu::new(nodes);
            for e in 0..m {
                if self.cfg.is_open(e) {
                    let (a, b) = self.d.edge(e);
                    dsu.union(a, b);
                }
            }
            for (i, members) in self.class_members.iter().enumerate() {
                for &v in members {
                    dsu.union(v as usize, n + 1 + i);
                }
            }
            let mut decided = vec![0u8; nodes];
            let inv_q = 1.0 / params.q;
            for (v, act) in active.iter_mut().enumerate() {
                let u = uniform(&mut rng);
                let r = dsu.find(v);
                if decided[r] == 0 {
                    decided[r] = if u < inv_q { 2 } else { 1 };
                }
                *act = decided[r] == 2;
            }
        } else {
            for _ in 0..n {
                rng.next_u64();
            }
        }
        for e in 0..m {
            let u = uniform(&mut rng);
            let (a, b) = self.d.edge(e);
            if active[a] && active[b] {
                self.cfg.set(e, u < params.p);
            }
        }
        self.labels_valid = false;
        self.sweep += 1;
        Ok(())
    }

    /// One sweep of the chosen algorithm.
    pub fn step(&mut self, algo: Algorithm, params: &ModelParams<f64>) -> Result<()> {
        match algo {
            Algorithm::HeatBath => {
                if params.has_ghost() != self.ghost {
                    return Err(Error::InvalidParameter("chain ghost layout does not match h".into()));
                }
                self.heat_bath_sweep(params);
                Ok(())
            }
            Algorithm::ChayesMachta => self.chayes_machta_step(params),
        }
    }
}

/// Batch-means estimate of an observable.
#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub params: ModelParams<f64>,
    pub algo: Algorithm,
    pub burn_in: u64,
}

/// Run settings.
#[derive(Clone, Copy, Debug)]
pub struct RunSpec {
    pub sweeps: u64,
    /// `None` selects the automatic burn-in.
    pub burn_in: Option<u64>,
    pub seed: u64,
    pub algo: Algorithm,
}

/// Left-right crossing of the bounding box by open edges (ghost ignored).
pub fn bounding_box_crossing(d: &Domain, cfg: &EdgeConfig) -> bool {
    let (lo, hi) = d.bounding_box();
    let n = d.n_vertices();
    let mut dsu = Dsu::new(n + 2);
    for e in 0..d.n_edges() {
        if cfg.is_open(e) {
            let (a, b) = d.edge(e);
            dsu.union(a, b);
        }
    }
    for v in 0..n {
        let x = d.vertex(v).x;
        if x == lo.x {
            dsu.union(v, n);
        }
        if x == hi.x {
            dsu.union(v, n + 1);
        }
    }
    dsu.find(n) == dsu.find(n + 1)
}

/// `max(1000, ceil(20 τ_int))` with τ_int measured on the box-crossing indicator
/// over a pilot run of `pilot` sweeps.
pub fn auto_burn_in(
    params: &ModelParams<f64>,
    d: &Domain,
    bc: &BoundaryCondition,
    seed: u64,
    algo: Algorithm,
    pilot: u64,
) -> Result<u64> {
    let mut chain = ChainState::new(d, bc, params.has_ghost(), seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let mut xs = Vec::with_capacity(pilot as usize);
    for _ in 0..pilot {
        chain.step(algo, params)?;
        xs.push(f64::from(u8::from(bounding_box_crossing(d, chain.config()))));
    }
    let tau = stats::integrated_autocorrelation_time(&xs);
    Ok(1000u64.max((20.0 * tau).ceil() as u64))
}

/// Runs a chain and returns per-sweep values of `observable` after burn-in.
pub fn sample_series(
    params: &ModelParams<f64>,
    d: &Domain,
    bc: &BoundaryCondition,
    spec: &RunSpec,
    mut observable: impl FnMut(&ChainState) -> f64,
) -> Result<(Vec<f64>, u64)> {
    let burn = match spec.burn_in {
        Some(b) => b,
        None => auto_burn_in(params, d, bc, spec.seed, spec.algo, 2000)?,
    };
    if spec.sweeps <= burn || spec.sweeps - burn < stats::MIN_BATCHES as u64 {
        return Err(Error::BudgetTooSmall(format!(
            "{} sweeps after {} burn-in leave fewer than {} samples",
            spec.sweeps,
            burn,
            stats::MIN_BATCHES
        )));
    }
    let mut chain = ChainState::new(d, bc, params.has_ghost(), spec.seed)?;
    for _ in 0..burn {
        chain.step(spec.algo, params)?;
    }
    let mut xs = Vec::with_capacity((spec.sweeps - burn) as usize);
    for _ in burn..spec.sweeps {
        chain.step(spec.algo, params)?;
        xs.push(observable(&chain));
    }
    Ok((xs, burn))
}

/// Batch-means estimate of `observable` (a predicate is passed as 0/1).
pub fn estimate(
    observable: impl FnMut(&ChainState) -> f64,
    params: &ModelParams<f64>,
    d: &Domain,
    bc: &BoundaryCondition,
    spec: &RunSpec,
) -> Result<Estimate> {
    let (xs, burn) = sample_series(params, d, bc, spec, observable)?;
    let (mean, stderr) = stats::batch_means(&xs)?;
    Ok(Estimate { mean, stderr, n_samples: xs.len(), seed: spec.seed, params: *params, algo: spec.algo, burn_in: burn })
}
