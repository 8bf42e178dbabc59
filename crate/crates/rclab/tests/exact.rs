use std::collections::VecDeque;

use proptest::prelude::*;
use rclab::exact::*;
use rclab::lattice::*;
use rclab::Params;

fn walk_domain(max_steps: usize) -> impl Strategy<Value = Domain> {
    prop::collection::vec(0usize..4, 1..max_steps).prop_map(|steps| {
        let mut v = Vertex::new(0, 0);
        let mut set = vec![v];
        for s in steps {
            v = v.step(s);
            set.push(v);
        }
        Domain::induced(set).unwrap()
    })
}

fn random_bc(d: &Domain, labels: &[usize], ghost: Option<usize>) -> BoundaryCondition {
    let n = d.n_vertices();
    let classes: Vec<Vec<usize>> = (0..3).map(|c| (0..n).filter(|&v| labels[v % labels.len()] == c).collect()).collect();
    let ghost = ghost.filter(|&g| !classes[g].is_empty());
    BoundaryCondition::from_classes(n, &classes, ghost).unwrap()
}

/// Cluster count by breadth-first search on the graph with the ghost as vertex `n`,
/// boundary wirings added as extra links.
fn bfs_clusters(d: &Domain, bc: &BoundaryCondition, open: &[bool], ghost_open: &[bool], ghost_counted: bool) -> usize {
    let n = d.n_vertices();
    let mut adj = vec![Vec::new(); n + 1];
    let link = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| {
        adj[a].push(b);
        adj[b].push(a);
    };
    for (e, _) in open.iter().enumerate().filter(|x| *x.1) {
        let (a, b) = d.edge(e);
        link(a, b, &mut adj);
    }
    for (v, &g) in ghost_open.iter().enumerate() {
        if g {
            link(v, n, &mut adj);
        }
    }
    for u in 0..n {
        for v in u + 1..n {
            if bc.same_class(u, v) {
                link(u, v, &mut adj);
            }
        }
        if bc.ghost_wired(u) {
            link(u, n, &mut adj);
        }
    }
    let mut seen = vec![false; n + 1];
    let mut count = 0;
    let last = if ghost_counted { n + 1 } else { n };
    for s in 0..last {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] && (u < n || ghost_counted) {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    count
}

/// Partition function summed term by term in plain floating point.
fn brute_z(params: &Params, d: &Domain, bc: &BoundaryCondition) -> f64 {
    let m = d.n_edges();
    let g = if params.has_ghost() { d.n_vertices() } else { 0 };
    let counted = g > 0 || bc.ghost_class().is_some();
    let mut z = 0.0;
    for mask in 0u64..1 << (m + g) {
        let open: Vec<bool> = (0..m).map(|i| mask >> i & 1 == 1).collect();
        let gopen: Vec<bool> = (0..g).map(|i| mask >> (m + i) & 1 == 1).collect();
        let a = open.iter().filter(|&&x| x).count() as i32;
        let b = gopen.iter().filter(|&&x| x).count() as i32;
        let k = bfs_clusters(d, bc, &open, &gopen, counted) as i32;
        z += (params.p / (1.0 - params.p)).powi(a) * params.h.exp_m1().powi(b) * params.q.powi(k);
    }
    z
}

#[test]
fn parameter_validation() {
    assert!(Params::new(0.0, 2.0, 0.0).is_err());
    assert!(Params::new(1.0, 2.0, 0.0).is_err());
    assert!(Params::new(0.5, 0.0, 0.0).is_err());
    assert!(Params::new(0.5, f64::INFINITY, 0.0).is_err());
    assert!(Params::new(0.5, 2.0, -0.1).is_err());
    assert!(Params::new(f64::NAN, 2.0, 0.0).is_err());
    let c = Params::critical(2.0).unwrap();
    assert!((c.p - c.p_c()).abs() < 1e-15);
    assert!(c.in_theory_range() && !c.has_ghost());
}

#[test]
fn single_edge_partition_functions() {
    let d = Domain::rect(0, 0, 2, 1).unwrap();
    let p = Params::new(0.3, 2.5, 0.0).unwrap();
    let r = 0.3 / 0.7;
    let free = partition_function(&p, &d, &BoundaryCondition::free(&d)).unwrap();
    assert!((free - (2.5f64.powi(2) + r * 2.5)).abs() < 1e-12);
    let wired = partition_function(&p, &d, &BoundaryCondition::wired(&d)).unwrap();
    assert!((wired - (1.0 + r) * 2.5).abs() < 1e-12);
}

#[test]
fn cap_is_enforced() {
    let d = build_box(2);
    let p = Params::new(0.5, 2.0, 0.0).unwrap();
    assert!(partition_function(&p, &d, &BoundaryCondition::free(&d)).is_err());
    let small = Domain::rect(0, 0, 3, 3).unwrap();
    let h = Params::new(0.5, 2.0, 0.1).unwrap();
    assert!(partition_function(&h, &small, &BoundaryCondition::free(&small)).is_ok());
    assert!(enumerate(&small, &BoundaryCondition::free(&small), true, &[], 12).is_err());
}

#[test]
fn histogram_counts_every_configuration() {
    let d = Domain::rect(0, 0, 3, 2).unwrap();
    let bc = BoundaryCondition::free(&d);
    let en = enumerate(&d, &bc, false, &[], DEFAULT_CAP).unwrap();
    assert_eq!(en.all.total(), 1 << d.n_edges());
    let eng = enumerate(&d, &bc, true, &[], DEFAULT_CAP).unwrap();
    assert_eq!(eng.all.total(), 1 << (d.n_edges() + d.n_vertices()));
}

#[test]
fn complementary_events_sum_to_one() {
    let d = Domain::rect(0, 0, 3, 3).unwrap();
    let bc = BoundaryCondition::wired(&d);
    let p = Params::new(0.45, 3.0, 0.0).unwrap();
    let a = |c: &EdgeConfig, cl: &Clusters| c.is_open(0) || cl.connected(0, 8);
    let not_a = |c: &EdgeConfig, cl: &Clusters| !a(c, cl);
    let en = enumerate(&d, &bc, false, &[&a, &not_a], DEFAULT_CAP).unwrap();
    assert!((en.probability(&p, 0) + en.probability(&p, 1) - 1.0).abs() < 1e-13);
}

#[test]
fn bernoulli_product_law_at_q_one() {
    let d = Domain::rect(0, 0, 3, 2).unwrap();
    let m = d.n_edges();
    for bc in [BoundaryCondition::free(&d), BoundaryCondition::wired(&d)] {
        let law = joint_distribution(&Params::new(0.3, 1.0, 0.0).unwrap(), &d, &bc).unwrap();
        for (mask, pr) in law.iter().enumerate() {
            let k = mask.count_ones() as i32;
            let want = 0.3f64.powi(k) * 0.7f64.powi(m as i32 - k);
            assert!((pr - want).abs() < 1e-14);
        }
    }
}

#[test]
fn heat_bath_conditional_matches_joint_law() {
    let d = Domain::rect(0, 0, 3, 2).unwrap();
    let m = d.n_edges();
    let bc = BoundaryCondition::free(&d).wire(&[0, 2]);
    let params = Params::new(0.4, 2.7, 0.0).unwrap();
    let law = joint_distribution(&params, &d, &bc).unwrap();
    for e in 0..m {
        for rest in 0usize..1 << m {
            if rest >> e & 1 == 1 {
                continue;
            }
            let with = law[rest | 1 << e];
            let cond = with / (with + law[rest]);
            let open: Vec<bool> = (0..m).map(|i| rest >> i & 1 == 1).collect();
            let mut closed_k = bfs_clusters(&d, &bc, &open, &[], false);
            let mut open2 = open.clone();
            open2[e] = true;
            closed_k -= bfs_clusters(&d, &bc, &open2, &[], false);
            let want = conditional_edge_probability(&params, closed_k == 0);
            assert!((cond - want).abs() < 1e-12);
        }
    }
}

#[test]
fn planar_duality_on_rectangles() {
    let quads = [
        Quad::rectangle(0, 0, 2, 1).unwrap(),
        Quad::rectangle(0, 0, 2, 2).unwrap(),
        Quad::rectangle(0, 0, 3, 1).unwrap(),
        Quad::rectangle(0, 0, 1, 3).unwrap(),
    ];
    for quad in &quads {
        for (p, q) in [(0.3, 1.0), (0.5858, 2.0), (0.7, 3.5), (0.2, 0.5)] {
            let params = Params::new(p, q, 0.0).unwrap();
            let (a, b) = duality_check(&params, quad).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            let (l, r) = boost_formula_check(&params, quad).unwrap();
            assert!((l - r).abs() < 1e-12, "{l} vs {r}");
        }
    }
    let h = Params::new(0.5, 2.0, 0.1).unwrap();
    assert!(duality_check(&h, &quads[0]).is_err());
}

#[test]
fn unit_square_crossing_by_hand() {
    // Right side to left side: one of the two horizontal edges must be open.
    let quad = Quad::rectangle(0, 0, 1, 1).unwrap();
    let (a, b) = duality_check(&Params::new(0.5, 1.0, 0.0).unwrap(), &quad).unwrap();
    assert!((a - 0.75).abs() < 1e-12 && (b - 0.75).abs() < 1e-12);
}

#[test]
fn spatial_markov_on_small_domains() {
    for (d, h) in [(Domain::rect(0, 0, 3, 2).unwrap(), 0.0), (Domain::rect(0, 0, 2, 2).unwrap(), 0.3)] {
        let params = Params::new(0.4, 2.0, h).unwrap();
        for bc in [BoundaryCondition::free(&d), BoundaryCondition::wired(&d)] {
            let inside: Vec<usize> = (0..d.n_edges().div_ceil(2)).collect();
            assert!(smp_max_error(&params, &d, &bc, &inside).unwrap() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_function_matches_brute_force(
        d in walk_domain(7),
        p in 0.05f64..0.95,
        q in 0.2f64..4.5,
        h in prop_oneof![Just(0.0f64), 0.05f64..1.0],
        labels in prop::collection::vec(0usize..3, 1..6),
        ghost in prop::option::of(0usize..3),
    ) {
        prop_assume!(d.n_edges() + if h > 0.0 { d.n_vertices() } else { 0 } <= 16);
        let bc = random_bc(&d, &labels, ghost);
        let params = Params::new(p, q, h).unwrap();
        let want = brute_z(&params, &d, &bc);
        let got = partition_function(&params, &d, &bc).unwrap();
        prop_assert!((got - want).abs() <= 1e-10 * want, "{} vs {}", got, want);
    }

    #[test]
    fn cluster_count_matches_bfs(d in walk_domain(9), mask in any::<u64>(), labels in prop::collection::vec(0usize..3, 1..6)) {
        let bc = random_bc(&d, &labels, None);
        let cfg = EdgeConfig::from_mask(d.n_edges(), 0, mask & ((1u64 << d.n_edges()) - 1));
        let open: Vec<bool> = (0..d.n_edges()).map(|e| cfg.is_open(e)).collect();
        prop_assert_eq!(cluster_count(&d, &cfg, &bc), bfs_clusters(&d, &bc, &open, &[], false));
    }

    #[test]
    fn edge_marginal_is_additive(p in 0.05f64..0.95, q in 0.3f64..4.0, e in 0usize..7) {
        let d = Domain::rect(0, 0, 3, 2).unwrap();
        let bc = BoundaryCondition::free(&d);
        let params = Params::new(p, q, 0.0).unwrap();
        let z = partition_function(&params, &d, &bc).unwrap();
        let open = |c: &EdgeConfig, _: &Clusters| c.is_open(e);
        let en = enumerate(&d, &bc, false, &[&open], DEFAULT_CAP).unwrap();
        let z_open = en.events[0].log_sum(&params).exp();
        let closed = |c: &EdgeConfig, _: &Clusters| !c.is_open(e);
        let en2 = enumerate(&d, &bc, false, &[&closed], DEFAULT_CAP).unwrap();
        let z_closed = en2.events[0].log_sum(&params).exp();
        prop_assert!((z_open + z_closed - z).abs() < 1e-10 * z);
    }
}
