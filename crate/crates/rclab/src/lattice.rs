//! Finite subgraphs of Z^2: domains, boundary conditions, quads, dual and medial graphs.
//!
//! Edges are indexed densely in row-major order of their lower-left endpoint
//! (y first, then x), horizontal before vertical. Every configuration encoding
//! in the crate uses this index.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Unit steps E, N, W, S; direction `k` is counterclockwise from east.
pub const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vertex {
    pub x: i32,
    pub y: i32,
}

impl Vertex {
    pub const fn new(x: i32, y: i32) -> Self {
        Vertex { x, y }
    }

    pub fn step(self, dir: usize) -> Vertex {
        let (dx, dy) = DIRS[dir & 3];
        Vertex::new(self.x + dx, self.y + dy)
    }

    pub fn norm_inf(self) -> i32 {
        self.x.abs().max(self.y.abs())
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Row-major: y, then x.
impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

/// A connected finite subgraph of Z^2 with an explicit (possibly non-induced) edge set.
#[derive(Clone, Debug)]
pub struct Domain {
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, u32>,
    edges: Vec<[u32; 2]>,
    nbr: Vec<[u32; 4]>,
    nbr_edge: Vec<[u32; 4]>,
    boundary: Vec<usize>,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges
    }
}

impl Eq for Domain {}

fn edge_key(a: Vertex, b: Vertex) -> (i32, i32, u8) {
    let ll = a.min(b);
    (ll.y, ll.x, if a.y == b.y { 0 } else { 1 })
}

impl Domain {
    /// Builds a domain from vertices and nearest-neighbour edges.
    pub fn new(vertices: impl IntoIterator<Item = Vertex>, edges: impl IntoIterator<Item = (Vertex, Vertex)>) -> Result<Self> {
        let mut vs: Vec<Vertex> = vertices.into_iter().collect();
        vs.sort();
        vs.dedup();
        if vs.is_empty() {
            return Err(Error::InvalidDomain("no vertices".into()));
        }
        let index: HashMap<Vertex, u32> = vs.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
        let mut es: Vec<(Vertex, Vertex)> = Vec::new();
        for (a, b) in edges {
            if (a.x - b.x).abs() + (a.y - b.y).abs() != 1 {
                return Err(Error::InvalidDomain(format!("edge {a:?}-{b:?} is not nearest-neighbour")));
            }
            if !index.contains_key(&a) || !index.contains_key(&b) {
                return Err(Error::InvalidDomain(format!("edge {a:?}-{b:?} leaves the vertex set")));
            }
            es.push((a.min(b), a.max(b)));
        }
        es.sort_by_key(|&(a, b)| edge_key(a, b));
        let before = es.len();
        es.dedup();
        if es.len() != before {
            return Err(Error::InvalidDomain("duplicate edge".into()));
        }
        let n = vs.len();
        let mut nbr = vec![[NONE; 4]; n];
        let mut nbr_edge = vec![[NONE; 4]; n];
        let mut edges = Vec::with_capacity(es.len());
        for (i, &(a, b)) in es.iter().enumerate() {
            let (ia, ib) = (index[&a], index[&b]);
            let dir = if a.y == b.y { 0 } else { 1 };
            nbr[ia as usize][dir] = ib;
            nbr_edge[ia as usize][dir] = i as u32;
            nbr[ib as usize][dir + 2] = ia;
            nbr_edge[ib as usize][dir + 2] = i as u32;
            edges.push([ia, ib]);
        }
        let boundary = (0..n)
            .filter(|&v| nbr[v].iter().filter(|&&u| u != NONE).count() <= 3)
            .collect();
        let d = Domain { vertices: vs, index, edges, nbr, nbr_edge, boundary };
        if !d.is_connected() {
            return Err(Error::InvalidDomain("domain is not connected".into()));
        }
        Ok(d)
    }

    /// Induced subgraph of Z^2 on the given vertex set.
    pub fn induced(vertices: impl IntoIterator<Item = Vertex>) -> Result<Self> {
        let set: HashSet<Vertex> = vertices.into_iter().collect();
        let mut edges = Vec::new();
        for &v in &set {
            for dir in 0..2 {
                let w = v.step(dir);
                if set.contains(&w) {
                    edges.push((v, w));
                }
            }
        }
        Domain::new(set, edges)
    }

    /// Vertices with `x0 <= x < x0 + w`, `y0 <= y < y0 + h`.
    pub fn rect(x0: i32, y0: i32, w: i32, h: i32) -> Result<Self> {
        if w < 1 || h < 1 {
            return Err(Error::InvalidDomain("empty rectangle".into()));
        }
        Domain::induced((y0..y0 + h).flat_map(|y| (x0..x0 + w).map(move |x| Vertex::new(x, y))))
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.nbr[v] {
                if u != NONE && !seen[u as usize] {
                    seen[u as usize] = true;
                    count += 1;
                    stack.push(u as usize);
                }
            }
        }
        count == self.vertices.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vertex {
        self.vertices[i]
    }

    pub fn vertex_index(&self, v: Vertex) -> Option<usize> {
        self.index.get(&v).map(|&i| i as usize)
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.index.contains_key(&v)
    }

    /// Endpoints `(lower-left, other)` of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        let [a, b] = self.edges[e];
        (a as usize, b as usize)
    }

    pub fn edge_vertices(&self, e: usize) -> (Vertex, Vertex) {
        let (a, b) = self.edge(e);
        (self.vertices[a], self.vertices[b])
    }

    pub fn is_horizontal(&self, e: usize) -> bool {
        let (a, b) = self.edge_vertices(e);
        a.y == b.y
    }

    pub fn neighbor(&self, v: usize, dir: usize) -> Option<usize> {
        let u = self.nbr[v][dir & 3];
        (u != NONE).then_some(u as usize)
    }

    pub fn neighbor_edge(&self, v: usize, dir: usize) -> Option<usize> {
        let e = self.nbr_edge[v][dir & 3];
        (e != NONE).then_some(e as usize)
    }

    /// Edge from the vertex at `v` in direction `dir`, if both are in the domain.
    pub fn edge_at(&self, v: Vertex, dir: usize) -> Option<usize> {
        self.vertex_index(v).and_then(|i| self.neighbor_edge(i, dir))
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        (0..4).find(|&d| self.nbr[u][d] == v as u32).map(|d| self.nbr_edge[u][d] as usize)
    }

    /// Iterator over `(neighbour, edge)` pairs of `v`.
    pub fn incident(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..4).filter_map(move |d| {
            let u = self.nbr[v][d];
            (u != NONE).then(|| (u as usize, self.nbr_edge[v][d] as usize))
        })
    }

    pub fn degree(&self, v: usize) -> usize {
        self.nbr[v].iter().filter(|&&u| u != NONE).count()
    }

    /// Vertices incident to at most three edges, in vertex order.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.degree(v) <= 3
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> (Vertex, Vertex) {
        let xs = self.vertices.iter().map(|v| v.x);
        let ys = self.vertices.iter().map(|v| v.y);
        (
            Vertex::new(xs.clone().min().unwrap(), ys.clone().min().unwrap()),
            Vertex::new(xs.max().unwrap(), ys.max().unwrap()),
        )
    }

    /// Edge indices of the unit square with lower-left corner `ll` (bottom, right, top, left), if all present.
    pub fn square_edges(&self, ll: Vertex) -> Option<[usize; 4]> {
        let bottom = self.edge_at(ll, 0)?;
        let right = self.edge_at(ll.step(0), 1)?;
        let top = self.edge_at(ll.step(1), 0)?;
        let left = self.edge_at(ll, 1)?;
        Some([bottom, right, top, left])
    }

    /// Lower-left corners of unit squares whose four edges are all in the domain.
    pub fn unit_faces(&self) -> Vec<Vertex> {
        self.vertices.iter().copied().filter(|&v| self.square_edges(v).is_some()).collect()
    }

    /// True when every bounded face is a unit square (connected planar Euler count).
    pub fn has_unit_faces_only(&self) -> bool {
        let bounded = self.n_edges() + 1 - self.n_vertices();
        self.unit_faces().len() == bounded
    }

    /// Counterclockwise walk around the outer face, starting at the lowest-leftmost vertex.
    pub fn outer_cycle(&self) -> Vec<usize> {
        let start = 0usize;
        if self.n_edges() == 0 {
            return vec![start];
        }
        let pick = |v: usize, heading: usize| -> usize {
            for turn in [3usize, 0, 1, 2] {
                let d = (heading + turn) & 3;
                if self.nbr[v][d] != NONE {
                    return d;
                }
            }
            unreachable!("vertex with an edge has a neighbour")
        };
        let first_dir = pick(start, 0);
        let mut walk = vec![start];
        let (mut v, mut heading) = (self.nbr[start][first_dir] as usize, first_dir);
        loop {
            let d = pick(v, heading);
            if v == start && d == first_dir {
                break;
            }
            walk.push(v);
            v = self.nbr[v][d] as usize;
            heading = d;
        }
        walk
    }

    /// Plain-text form: `V n E m`, then `x y` per vertex, then `i j` per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "V {} E {}", self.n_vertices(), self.n_edges());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {}", v.x, v.y);
        }
        for [a, b] in &self.edges {
            let _ = writeln!(s, "{a} {b}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "V" || h[2] != "E" {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let nv: usize = h[1].parse().map_err(|_| Error::Parse("vertex count".into()))?;
        let ne: usize = h[3].parse().map_err(|_| Error::Parse("edge count".into()))?;
        let pair = |line: Option<&str>| -> Result<(i64, i64)> {
            let line = line.ok_or_else(|| Error::Parse("truncated input".into()))?;
            let mut it = line.split_whitespace().map(|t| t.parse::<i64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(Error::Parse(format!("bad line {line:?}"))),
            }
        };
        let mut vs = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (x, y) = pair(lines.next())?;
            vs.push(Vertex::new(x as i32, y as i32));
        }
        let mut es = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (a, b) = pair(lines.next())?;
            let get = |i: i64| vs.get(i as usize).copied().ok_or_else(|| Error::Parse(format!("vertex index {i}")));
            es.push((get(a)?, get(b)?));
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data".into()));
        }
        Domain::new(vs, es)
    }
}

/// `Λ_n`, spanned by `{-n..n}^2`.
pub fn build_box(n: u32) -> Domain {
    let n = n as i32;
    Domain::rect(-n, -n, 2 * n + 1, 2 * n + 1).expect("box is valid")
}

/// `Ann(r, R) = Λ_R \ Λ_{r-1}`.
pub fn build_annulus(r: u32, big_r: u32) -> Result<Domain> {
    if r < 1 || r >= big_r {
        return Err(Error::InvalidParameter(format!("annulus needs 1 <= r < R, got ({r}, {big_r})")));
    }
    let (r, rr) = (r as i32, big_r as i32);
    Domain::induced(
        (-rr..=rr)
            .flat_map(|y| (-rr..=rr).map(move |x| Vertex::new(x, y)))
            .filter(|v| v.norm_inf() >= r),
    )
}

/// Partition of the vertex set (plus an optional ghost) into wired classes.
///
/// Labels are canonical: classes are numbered by first appearance in vertex order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryCondition {
    labels: Vec<u32>,
    ghost: Option<u32>,
}

impl BoundaryCondition {
    pub fn free(d: &Domain) -> Self {
        Self::free_n(d.n_vertices())
    }

    pub fn free_n(n: usize) -> Self {
        BoundaryCondition { labels: (0..n as u32).collect(), ghost: None }
    }

    /// All boundary vertices wired into one class.
    pub fn wired(d: &Domain) -> Self {
        Self::from_classes(d.n_vertices(), &[d.boundary().to_vec()], None).expect("valid")
    }

    /// Boundary vertices and the ghost wired into one class.
    pub fn wired_with_ghost(d: &Domain) -> Self {
        Self::from_classes(d.n_vertices(), &[d.boundary().to_vec()], Some(0)).expect("valid")
    }

    /// Builds a partition from the listed classes; unlisted vertices are singletons.
    /// `ghost_with` names the class (by position in `classes`) containing the ghost.
    pub fn from_classes(n: usize, classes: &[Vec<usize>], ghost_with: Option<usize>) -> Result<Self> {
        let mut raw: Vec<u32> = (0..n as u32).collect();
        let mut seen = vec![false; n];
        let mut ghost_raw = None;
        for (ci, class) in classes.iter().enumerate() {
            let Some(&rep) = class.first() else {
                if ghost_with == Some(ci) {
                    return Err(Error::InvalidParameter("ghost wired to an empty class".into()));
                }
                continue;
            };
            for &v in class {
                if v >= n || seen[v] {
                    return Err(Error::InvalidParameter(format!("vertex {v} out of range or repeated")));
                }
                seen[v] = true;
                raw[v] = rep as u32;
            }
            if ghost_with == Some(ci) {
                ghost_raw = Some(rep as u32);
            }
        }
        if let Some(g) = ghost_with {
            if g >= classes.len() {
                return Err(Error::InvalidParameter("ghost class index out of range".into()));
            }
        }
        Ok(Self::canonical(&raw, ghost_raw))
    }

    fn canonical(raw: &[u32], ghost_raw: Option<u32>) -> Self {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let labels: Vec<u32> = raw
            .iter()
            .map(|&r| {
                let next = map.len() as u32;
                *map.entry(r).or_insert(next)
            })
            .collect();
        let ghost = ghost_raw.map(|g| map[&g]);
        BoundaryCondition { labels, ghost }
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, v: usize) -> u32 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Class id that contains the ghost, if the ghost is wired to any vertex.
    pub fn ghost_class(&self) -> Option<u32> {
        self.ghost
    }

    pub fn same_class(&self, u: usize, v: usize) -> bool {
        self.labels[u] == self.labels[v]
    }

    pub fn ghost_wired(&self, v: usize) -> bool {
        self.ghost == Some(self.labels[v])
    }

    /// Non-singleton classes (ghost excluded), each sorted, ordered by smallest member.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut by: HashMap<u32, Vec<usize>> = HashMap::new();
        for (v, &l) in self.labels.iter().enumerate() {
            by.entry(l).or_default().push(v);
        }
        let mut out: Vec<Vec<usize>> = by
            .into_iter()
            .filter(|(l, c)| c.len() > 1 || Some(*l) == self.ghost)
            .map(|(_, c)| c)
            .collect();
        out.sort();
        out
    }

    pub fn is_free(&self) -> bool {
        self.ghost.is_none() && self.labels.iter().enumerate().all(|(i, &l)| l as usize == i)
    }

    /// `self <= other`: every class of `self` lies inside a class of `other`.
    pub fn le(&self, other: &BoundaryCondition) -> bool {
        if self.labels.len() != other.labels.len() {
            return false;
        }
        let mut map: HashMap<u32, u32> = HashMap::new();
        for (a, b) in self.labels.iter().zip(&other.labels) {
            if *map.entry(*a).or_insert(*b) != *b {
                return false;
            }
        }
        match self.ghost {
            None => true,
            Some(g) => other.ghost.is_some() && map.get(&g).copied() == other.ghost,
        }
    }

    /// Finest partition coarser than both.
    pub fn join(&self, other: &BoundaryCondition) -> BoundaryCondition {
        let n = self.labels.len();
        let mut dsu = crate::dsu::Dsu::new(n + 1);
        let mut first_a: HashMap<u32, usize> = HashMap::new();
        let mut first_b: HashMap<u32, usize> = HashMap::new();
        for v in 0..n {
            let ra = *first_a.entry(self.labels[v]).or_insert(v);
            dsu.union(ra, v);
            let rb = *first_b.entry(other.labels[v]).or_insert(v);
            dsu.union(rb, v);
        }
        for bc in [self, other] {
            if let Some(g) = bc.ghost {
                if let Some(v) = bc.labels.iter().position(|&l| l == g) {
                    dsu.union(n, v);
                }
            }
        }
        let raw: Vec<u32> = (0..n).map(|v| dsu.find(v) as u32).collect();
        let g = dsu.find(n) as u32;
        let ghost_raw = raw.contains(&g).then_some(g);
        Self::canonical(&raw, ghost_raw)
    }

    /// Adds the wiring of `vertices` into one class (repeats are ignored).
    /// Panics if a vertex is out of range.
    pub fn wire(&self, vertices: &[usize]) -> BoundaryCondition {
        let mut class = vertices.to_vec();
        class.sort_unstable();
        class.dedup();
        let extra = Self::from_classes(self.labels.len(), &[class], None).expect("vertex in range");
        self.join(&extra)
    }
}

/// Domain with four marked boundary vertices in counterclockwise order.
#[derive(Clone, Debug)]
pub struct Quad {
    domain: Domain,
    cycle: Vec<usize>,
    marks: [usize; 4],
}

impl Quad {
    /// `marks` are a, b, c, d; they must appear counterclockwise on the outer boundary cycle.
    pub fn new(domain: Domain, marks: [Vertex; 4]) -> Result<Self> {
        let cycle = domain.outer_cycle();
        let mut seen = HashSet::new();
        if cycle.len() < 4 || !cycle.iter().all(|v| seen.insert(*v)) {
            return Err(Error::InvalidDomain("boundary is not a simple cycle".into()));
        }
        if !domain.has_unit_faces_only() {
            return Err(Error::InvalidDomain("quad domain must be simply connected with unit faces".into()));
        }
        let mut pos = [0usize; 4];
        for (i, m) in marks.iter().enumerate() {
            let vi = domain.vertex_index(*m).ok_or_else(|| Error::InvalidDomain(format!("mark {m:?} not in domain")))?;
            pos[i] = cycle
                .iter()
                .position(|&c| c == vi)
                .ok_or_else(|| Error::InvalidDomain(format!("mark {m:?} not on the boundary cycle")))?;
        }
        let len = cycle.len();
        let rel: Vec<usize> = pos.iter().map(|&p| (p + len - pos[0]) % len).collect();
        if !(rel[0] < rel[1] && rel[1] < rel[2] && rel[2] < rel[3]) {
            return Err(Error::InvalidDomain("marks are degenerate or not counterclockwise".into()));
        }
        let rotated: Vec<usize> = (0..len).map(|i| cycle[(pos[0] + i) % len]).collect();
        Ok(Quad { domain, cycle: rotated, marks: [0, rel[1], rel[2], rel[3]] })
    }

    /// Rectangle `[x0, x1] x [y0, y1]` with corner marks a = bottom-right, b = top-right,
    /// c = top-left, d = bottom-left, so that (ab) to (cd) is a left-right crossing.
    pub fn rectangle(x0: i32, y0: i32, x1: i32, y1: i32) -> Result<Self> {
        let d = Domain::rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1)?;
        Quad::new(
            d,
            [Vertex::new(x1, y0), Vertex::new(x1, y1), Vertex::new(x0, y1), Vertex::new(x0, y0)],
        )
    }

    /// `Λ_n` with corner marks.
    pub fn square(n: u32) -> Result<Self> {
        let n = n as i32;
        Quad::rectangle(-n, -n, n, n)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Counterclockwise boundary cycle starting at mark a.
    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    pub fn marks(&self) -> [usize; 4] {
        self.marks.map(|p| self.cycle[p])
    }

    /// Closed vertex arc from mark `i` to mark `i + 1` (0 = (ab), 1 = (bc), 2 = (cd), 3 = (da)).
    pub fn arc_vertices(&self, i: usize) -> Vec<usize> {
        let len = self.cycle.len();
        let start = self.marks[i];
        let end = if i == 3 { len } else { self.marks[i + 1] };
        (start..=end).map(|p| self.cycle[p % len]).collect()
    }

    /// Half-open edge arc `[mark i, mark i+1)` along the cycle.
    pub fn arc_edges(&self, i: usize) -> Vec<usize> {
        let v = self.arc_vertices(i);
        v.windows(2)
            .map(|w| self.domain.edge_between(w[0], w[1]).expect("cycle edges exist"))
            .collect()
    }
}

/// Dual graph in integer coordinates: dual vertex `(i, j)` stands for the square
/// `[i, i+1] x [j, j+1]`. Exterior squares bordering the domain are kept as separate
/// dual vertices; wiring them together recovers the single outer dual vertex.
#[derive(Clone, Debug)]
pub struct DualDomain {
    pub domain: Domain,
    pub primal_to_dual: Vec<usize>,
    pub dual_to_primal: Vec<usize>,
    /// Per dual vertex: true unless the square is a bounded unit face of the primal domain.
    pub exterior: Vec<bool>,
}

impl DualDomain {
    /// Wired boundary condition on the exterior dual vertices.
    pub fn wired_exterior(&self) -> BoundaryCondition {
        let ext: Vec<usize> = (0..self.domain.n_vertices()).filter(|&v| self.exterior[v]).collect();
        BoundaryCondition::from_classes(self.domain.n_vertices(), &[ext], None).expect("valid")
    }

    /// Maps a dual configuration (indexed by dual edges) to the primal one: `ω_e = 1 - ω*_{e*}`.
    pub fn primal_bits(&self, dual_open: impl Fn(usize) -> bool) -> Vec<bool> {
        self.primal_to_dual.iter().map(|&de| !dual_open(de)).collect()
    }
}

fn squares_of_edge(a: Vertex, b: Vertex) -> (Vertex, Vertex) {
    if a.y == b.y {
        (Vertex::new(a.x, a.y - 1), Vertex::new(a.x, a.y))
    } else {
        (Vertex::new(a.x - 1, a.y), Vertex::new(a.x, a.y))
    }
}

/// Builds the dual graph with its canonical edge bijection.
pub fn dual_of(d: &Domain) -> Result<DualDomain> {
    if d.n_edges() == 0 {
        return Err(Error::InvalidDomain("dual of an edgeless domain".into()));
    }
    let mut pairs = Vec::with_capacity(d.n_edges());
    let mut verts = HashSet::new();
    for e in 0..d.n_edges() {
        let (a, b) = d.edge_vertices(e);
        let (s, t) = squares_of_edge(a, b);
        verts.insert(s);
        verts.insert(t);
        pairs.push((s, t));
    }
    let dual = Domain::new(verts, pairs.iter().copied())?;
    let mut primal_to_dual = Vec::with_capacity(d.n_edges());
    for &(s, t) in &pairs {
        let (is, it) = (dual.vertex_index(s).unwrap(), dual.vertex_index(t).unwrap());
        primal_to_dual.push(dual.edge_between(is, it).expect("dual edge exists"));
    }
    let mut dual_to_primal = vec![0; dual.n_edges()];
    for (e, &de) in primal_to_dual.iter().enumerate() {
        dual_to_primal[de] = e;
    }
    let exterior = dual.vertices().iter().map(|&s| d.square_edges(s).is_none()).collect();
    Ok(DualDomain { domain: dual, primal_to_dual, dual_to_primal, exterior })
}

/// Solves `p* p / ((1 - p*)(1 - p)) = q` for `p*`.
pub fn dual_p<T: Float>(p: T, q: T) -> T {
    let a = q * (T::one() - p);
    a / (p + a)
}

/// `p_c(q) = sqrt(q) / (1 + sqrt(q))`.
pub fn p_c<T: Float>(q: T) -> T {
    let s = q.sqrt();
    s / (T::one() + s)
}

/// Medial graph: one medial edge `(v, k)` per vertex and direction, running
/// counterclockwise around `v` from the midpoint towards `v + dir_k` to the
/// midpoint towards `v + dir_{k+1}`. Medial edge id is `4 v + k`.
#[derive(Clone, Debug)]
pub struct MedialGraph {
    n_primal: usize,
    /// Medial vertex at the midpoint `(v, k)`: either a primal edge (degree 4) or a stub (degree 2).
    mv_of: Vec<[u32; 4]>,
    degree: Vec<u8>,
    /// Doubled coordinates of each medial vertex.
    pos2: Vec<(i32, i32)>,
    boundary_edges: Vec<usize>,
    /// `(v, k)` pairs whose midpoint is the medial vertex.
    owners: Vec<Vec<(u32, u8)>>,
}

/// Unit vector at angle `45° + 90° j`.
pub fn diag_unit(j: usize) -> (f64, f64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match j & 3 {
        0 => (s, s),
        1 => (-s, s),
        2 => (-s, -s),
        _ => (s, -s),
    }
}

impl MedialGraph {
    pub fn n_edges(&self) -> usize {
        4 * self.n_primal
    }

    pub fn n_vertices(&self) -> usize {
        self.degree.len()
    }

    pub fn degree(&self, mv: usize) -> usize {
        self.degree[mv] as usize
    }

    pub fn tail(&self, e: usize) -> usize {
        self.mv_of[e / 4][e % 4] as usize
    }

    pub fn head(&self, e: usize) -> usize {
        self.mv_of[e / 4][(e % 4 + 1) % 4] as usize
    }

    /// Primal vertex whose face the edge borders (always on the left of the orientation).
    pub fn primal_of(&self, e: usize) -> usize {
        e / 4
    }

    /// Direction index `j` of the orientation, as in [`diag_unit`].
    pub fn direction(&self, e: usize) -> usize {
        (e % 4 + 1) % 4
    }

    /// Doubled coordinates of a medial vertex.
    pub fn position2(&self, mv: usize) -> (i32, i32) {
        self.pos2[mv]
    }

    /// Edges with exactly one endpoint of degree two.
    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    /// Direction index pointing from the degree-4 endpoint to the degree-2 endpoint.
    pub fn outward(&self, e: usize) -> Option<usize> {
        let (t, h) = (self.degree[self.tail(e)], self.degree[self.head(e)]);
        match (t, h) {
            (4, 2) => Some(self.direction(e)),
            (2, 4) => Some((self.direction(e) + 2) % 4),
            _ => None,
        }
    }

    /// Four incident edges of a degree-4 medial vertex, clockwise, with the
    /// direction index pointing away from the vertex along each.
    pub fn star(&self, mv: usize) -> Option<[(usize, usize); 4]> {
        if self.degree[mv] != 4 {
            return None;
        }
        let mut out = Vec::with_capacity(4);
        for &(v, k) in &self.owners[mv] {
            let (v, k) = (v as usize, k as usize);
            let incoming = 4 * v + (k + 3) % 4;
            let outgoing = 4 * v + k;
            out.push((incoming, (self.direction(incoming) + 2) % 4));
            out.push((outgoing, self.direction(outgoing)));
        }
        // Sort clockwise by direction angle.
        out.sort_by_key(|&(_, j)| std::cmp::Reverse(j));
        out.try_into().ok()
    }

    /// Medial vertex at the midpoint `(v, k)`.
    pub fn midpoint(&self, v: usize, k: usize) -> usize {
        self.mv_of[v][k & 3] as usize
    }
}

/// Builds the medial graph of a domain.
#[allow(clippy::needless_range_loop)]
pub fn medial_of(d: &Domain) -> MedialGraph {
    let n = d.n_vertices();
    let mut mv_of = vec![[0u32; 4]; n];
    let mut degree = Vec::new();
    let mut pos2 = Vec::new();
    let mut by_edge: HashMap<usize, u32> = HashMap::new();
    for v in 0..n {
        let p = d.vertex(v);
        for k in 0..4 {
            let (dx, dy) = DIRS[k];
            let here = (2 * p.x + dx, 2 * p.y + dy);
            let id = match d.neighbor_edge(v, k) {
                Some(e) => *by_edge.entry(e).or_insert_with(|| {
                    degree.push(4u8);
                    pos2.push(here);
                    (degree.len() - 1) as u32
                }),
                None => {
                    degree.push(2u8);
                    pos2.push(here);
                    (degree.len() - 1) as u32
                }
            };
            mv_of[v][k] = id;
        }
    }
    let mut owners = vec![Vec::new(); degree.len()];
    for (v, ks) in mv_of.iter().enumerate() {
        for (k, &id) in ks.iter().enumerate() {
            owners[id as usize].push((v as u32, k as u8));
        }
    }
    let mut g = MedialGraph { n_primal: n, mv_of, degree, pos2, boundary_edges: Vec::new(), owners };
    g.boundary_edges = (0..g.n_edges())
        .filter(|&e| (g.degree[g.tail(e)] == 2) != (g.degree[g.head(e)] == 2))
        .collect();
    g
}

/// True iff the quad lies in `Λ_R`, is a union of translates of `Λ_{ηR}` by points
/// of `ηR Z^2` (vertex and edge sets both), and all four marks lie in `ηR Z^2`.
pub fn eta_regular(q: &Quad, eta: f64, big_r: u32) -> bool {
    let m_real = eta * big_r as f64;
    let m = m_real.round();
    if !(eta > 0.0) || (m_real - m).abs() > 1e-9 || m < 1.0 {
        return false;
    }
    let m = m as i32;
    let d = q.domain();
    let rr = big_r as i32;
    if d.vertices().iter().any(|v| v.norm_inf() > rr) {
        return false;
    }
    if q.marks().iter().any(|&i| {
        let v = d.vertex(i);
        v.x.rem_euclid(m) != 0 || v.y.rem_euclid(m) != 0
    }) {
        return false;
    }
    let (lo, hi) = d.bounding_box();
    let mut covered_v = HashSet::new();
    let mut covered_e = HashSet::new();
    let (cx0, cx1) = (lo.x.div_euclid(m) - 1, hi.x.div_euclid(m) + 1);
    let (cy0, cy1) = (lo.y.div_euclid(m) - 1, hi.y.div_euclid(m) + 1);
    for cy in cy0..=cy1 {
        for cx in cx0..=cx1 {
            let c = Vertex::new(cx * m, cy * m);
            let inside = (c.y - m..=c.y + m).all(|y| (c.x - m..=c.x + m).all(|x| d.contains(Vertex::new(x, y))));
            if !inside {
                continue;
            }
            let mut edges = Vec::new();
            for y in c.y - m..=c.y + m {
                for x in c.x - m..=c.x + m {
                    let v = Vertex::new(x, y);
                    covered_v.insert(v);
                    if x < c.x + m {
                        edges.push(d.edge_at(v, 0));
                    }
                    if y < c.y + m {
                        edges.push(d.edge_at(v, 1));
                    }
                }
            }
            if edges.iter().any(|e| e.is_none()) {
                continue;
            }
            covered_e.extend(edges.into_iter().flatten());
        }
    }
    covered_v.len() == d.n_vertices() && covered_e.len() == d.n_edges()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_counts() {
        for (n, nv, ne) in [(0u32, 1usize, 0usize), (1, 9, 12), (2, 25, 40)] {
            let d = build_box(n);
            assert_eq!((d.n_vertices(), d.n_edges()), (nv, ne));
        }
    }

    #[test]
    fn edge_order_is_row_major_horizontal_first() {
        let d = build_box(1);
        let (a, b) = d.edge_vertices(0);
        assert_eq!((a, b), (Vertex::new(-1, -1), Vertex::new(0, -1)));
        let (a, b) = d.edge_vertices(1);
        assert_eq!((a, b), (Vertex::new(-1, -1), Vertex::new(-1, 0)));
        for e in 1..d.n_edges() {
            let (p, q) = (d.edge_vertices(e - 1), d.edge_vertices(e));
            assert!(edge_key(p.0, p.1) < edge_key(q.0, q.1));
        }
    }

    #[test]
    fn outer_cycle_is_counterclockwise() {
        let d = build_box(1);
        let c: Vec<Vertex> = d.outer_cycle().iter().map(|&i| d.vertex(i)).collect();
        assert_eq!(c.len(), 8);
        assert_eq!(c[0], Vertex::new(-1, -1));
        assert_eq!(c[1], Vertex::new(0, -1));
        assert_eq!(c[2], Vertex::new(1, -1));
        assert_eq!(c[3], Vertex::new(1, 0));
    }

    #[test]
    fn boundary_condition_order() {
        let d = build_box(1);
        let free = BoundaryCondition::free(&d);
        let wired = BoundaryCondition::wired(&d);
        let b = d.boundary();
        let partial = free.wire(&[b[0], b[1]]);
        assert!(free.le(&partial) && partial.le(&wired) && free.le(&wired));
        assert!(!wired.le(&free));
        assert!(!partial.le(&free));
        assert_eq!(free.join(&wired), wired);
        let g = BoundaryCondition::wired_with_ghost(&d);
        assert!(wired.le(&g) && !g.le(&wired));
    }

    #[test]
    fn medial_counts_single_edge() {
        let d = Domain::rect(0, 0, 2, 1).unwrap();
        let m = medial_of(&d);
        assert_eq!(m.n_edges(), 8);
        let deg4 = (0..m.n_vertices()).filter(|&v| m.degree(v) == 4).count();
        let deg2 = (0..m.n_vertices()).filter(|&v| m.degree(v) == 2).count();
        assert_eq!((deg4, deg2), (1, 6));
        assert_eq!(m.boundary_edges().len() % 2, 0);
    }

    #[test]
    fn star_is_two_in_two_out() {
        let d = build_box(1);
        let m = medial_of(&d);
        for mv in 0..m.n_vertices() {
            if let Some(star) = m.star(mv) {
                let outs = star.iter().filter(|&&(e, _)| m.tail(e) == mv).count();
                let ins = star.iter().filter(|&&(e, _)| m.head(e) == mv).count();
                assert_eq!((outs, ins), (2, 2));
            }
        }
    }
}
