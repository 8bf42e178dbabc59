use std::collections::HashMap;

use proptest::prelude::*;
use rclab::coupling::*;
use rclab::exact::{joint_distribution, EdgeConfig, ModelParams};
use rclab::lattice::{build_box, BoundaryCondition, Domain, Vertex};
use rclab::stats::chi_square;

fn trees(d: &Domain) -> Vec<Box<dyn DecisionTree>> {
    vec![
        Box::new(deterministic_tree(d, (0..d.n_edges()).collect()).unwrap()),
        Box::new(boundary_cluster_tree(d)),
        Box::new(dual_cluster_tree(d)),
    ]
}

fn small_domains() -> Vec<Domain> {
    let v = Vertex::new;
    vec![
        Domain::rect(0, 0, 3, 2).unwrap(),
        Domain::induced([v(0, 0), v(1, 0), v(2, 0), v(0, 1), v(1, 1), v(2, 1), v(0, 2), v(1, 2)]).unwrap(),
    ]
}

#[test]
fn marginals_match_oracle_on_small_domains() {
    let pr = ModelParams::critical(2.0).unwrap();
    for d in small_domains() {
        let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
        let (law_lo, law_hi) = (joint_distribution(&pr, &d, &free).unwrap(), joint_distribution(&pr, &d, &wired).unwrap());
        for mut tree in trees(&d) {
            let mut c = Coupler::new(&d, &free, &wired, pr, pr, ConditionalMode::Exact).unwrap();
            let (mut lo, mut hi) = (vec![0u64; law_lo.len()], vec![0u64; law_hi.len()]);
            let mut violations = 0;
            for seed in 0..30_000u64 {
                let o = c.run(tree.as_mut(), seed, None).unwrap();
                violations += o.monotonicity_violations;
                assert!(o.lower.le(&o.upper));
                lo[o.lower.mask() as usize] += 1;
                hi[o.upper.mask() as usize] += 1;
            }
            assert_eq!(violations, 0);
            let (a, b) = (chi_square(&lo, &law_lo, 1e-3).unwrap(), chi_square(&hi, &law_hi, 1e-3).unwrap());
            assert!(a.passed && b.passed, "{}: {a:?} {b:?}", tree.name());
        }
    }
}

#[test]
fn ordered_edge_parameters_are_coupled_monotonically() {
    let d = build_box(1);
    let bc = BoundaryCondition::free(&d);
    let (lo, hi) = (ModelParams::new(0.4, 2.0, 0.0).unwrap(), ModelParams::new(0.6, 2.0, 0.0).unwrap());
    for mut tree in trees(&d) {
        let mut c = Coupler::new(&d, &bc, &bc, lo, hi, ConditionalMode::Exact).unwrap();
        for seed in 0..2000 {
            let o = c.run(tree.as_mut(), seed, None).unwrap();
            assert_eq!(o.monotonicity_violations, 0);
            assert!(o.lower.le(&o.upper));
        }
    }
}

#[test]
fn heat_bath_mode_runs_beyond_sixty_four_edges() {
    let d = build_box(5);
    assert!(d.n_edges() > 64);
    let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
    for mut tree in trees(&d) {
        for seed in 0..20 {
            let o = run_coupling(tree.as_mut(), &d, &free, &wired, 0.5, 0.6, 2.0, seed, None).unwrap();
            assert_eq!(o.monotonicity_violations, 0);
            assert!(o.lower.le(&o.upper));
            assert_eq!(o.state.revealed.len(), d.n_edges());
        }
    }
}

#[test]
fn unordered_inputs_are_rejected() {
    let d = build_box(1);
    let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
    let pr = ModelParams::critical(2.0).unwrap();
    assert!(Coupler::new(&d, &wired, &free, pr, pr, ConditionalMode::Exact).is_err());
    let hi = ModelParams::new(0.7, 2.0, 0.0).unwrap();
    assert!(Coupler::new(&d, &free, &free, hi, pr, ConditionalMode::Exact).is_err());
    let sub = ModelParams::new(0.5, 0.5, 0.0).unwrap();
    assert!(Coupler::new(&d, &free, &wired, sub, sub, ConditionalMode::Exact).is_err());
}

#[test]
fn bernoulli_coupling_ignores_boundary_conditions() {
    let d = build_box(1);
    let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
    for mut tree in trees(&d) {
        for seed in 0..200 {
            let o = run_coupling(tree.as_mut(), &d, &free, &wired, 0.5, 0.5, 1.0, seed, None).unwrap();
            assert_eq!(o.lower, o.upper);
        }
    }
}

#[test]
fn all_closed_upper_stalls_after_boundary_edges() {
    let d = build_box(2);
    let bc = BoundaryCondition::free(&d);
    // At p = 1e-9 every edge stays closed in both configurations.
    let o = run_coupling(&mut boundary_cluster_tree(&d), &d, &bc, &bc, 1e-9, 1e-9, 2.0, 1, None).unwrap();
    assert_eq!(o.upper.n_open(), 0);
    let touching = (0..d.n_edges())
        .filter(|&e| {
            let (a, b) = d.edge(e);
            d.is_boundary(a) || d.is_boundary(b)
        })
        .count();
    assert_eq!(o.stall_time, Some(touching));
}

/// Faces (lower-left corners, `None` for the exterior) on the two sides of each edge.
fn sides(d: &Domain) -> Vec<[Option<Vertex>; 2]> {
    let mut out = vec![[None, None]; d.n_edges()];
    let mut filled = vec![0usize; d.n_edges()];
    for f in d.unit_faces() {
        for e in d.square_edges(f).unwrap() {
            out[e][filled[e]] = Some(f);
            filled[e] += 1;
        }
    }
    out
}

/// Edges touching the closed dual cluster of the exterior face in `cfg`.
fn dual_connected_to_boundary(d: &Domain, cfg: &EdgeConfig) -> Vec<bool> {
    let s = sides(d);
    let mut reached: HashMap<Option<Vertex>, bool> = HashMap::from([(None, true)]);
    let mut changed = true;
    while changed {
        changed = false;
        for (e, [a, b]) in s.iter().enumerate() {
            if cfg.is_open(e) {
                continue;
            }
            let (ra, rb) = (reached.get(a).copied().unwrap_or(false), reached.get(b).copied().unwrap_or(false));
            if ra != rb {
                reached.insert(*a, true);
                reached.insert(*b, true);
                changed = true;
            }
        }
    }
    s.iter()
        .map(|[a, b]| reached.get(a).copied().unwrap_or(false) || b.is_none() || reached.get(b).copied().unwrap_or(false))
        .collect()
}

/// Edges with an endpoint in the open cluster of the boundary.
fn connected_to_boundary(d: &Domain, cfg: &EdgeConfig) -> Vec<bool> {
    let mut seen = vec![false; d.n_vertices()];
    let mut stack: Vec<usize> = d.boundary().to_vec();
    stack.iter().for_each(|&v| seen[v] = true);
    while let Some(v) = stack.pop() {
        for (u, e) in d.incident(v) {
            if cfg.is_open(e) && !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    (0..d.n_edges())
        .map(|e| {
            let (a, b) = d.edge(e);
            seen[a] || seen[b]
        })
        .collect()
}

fn differences(o: &CouplingOutcome, m: usize) -> Vec<usize> {
    (0..m).filter(|&e| o.lower.is_open(e) != o.upper.is_open(e)).collect()
}

#[test]
fn boundary_exploration_confines_differences() {
    // Heat-bath conditionals on Λ_2; the property is structural, so it holds in that mode too.
    for d in [Domain::rect(0, 0, 4, 3).unwrap(), build_box(2)] {
        let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
        let mut tree = boundary_cluster_tree(&d);
        for seed in 0..3000 {
            let o = run_coupling(&mut tree, &d, &free, &wired, 0.5, 0.5, 2.0, seed, None).unwrap();
            // No stall means the exploration itself revealed every edge.
            let tau = o.stall_time.unwrap_or(d.n_edges());
            assert_eq!(o.state.lower[tau..], o.state.upper[tau..]);
            let near = connected_to_boundary(&d, &o.upper);
            assert!(differences(&o, d.n_edges()).iter().all(|&e| near[e]));
        }
    }
}

#[test]
fn dual_exploration_confines_differences() {
    for d in [Domain::rect(0, 0, 4, 3).unwrap(), build_box(2)] {
        let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
        let mut tree = dual_cluster_tree(&d);
        for seed in 0..3000 {
            let o = run_coupling(&mut tree, &d, &free, &wired, 0.5, 0.5, 2.0, seed, None).unwrap();
            // No stall means the exploration itself revealed every edge.
            let tau = o.stall_time.unwrap_or(d.n_edges());
            assert_eq!(o.state.lower[tau..], o.state.upper[tau..]);
            let near = dual_connected_to_boundary(&d, &o.lower);
            assert!(differences(&o, d.n_edges()).iter().all(|&e| near[e]));
        }
    }
}

#[test]
fn centre_edge_disagreement_is_bounded_by_connection() {
    let d = build_box(2);
    let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
    let e = d.edge_at(Vertex::new(0, 0), 0).unwrap();
    let mut tree = boundary_cluster_tree(&d);
    let n = 5_000;
    let (mut differ, mut conn) = (0.0, 0.0);
    for seed in 0..n {
        let o = run_coupling(&mut tree, &d, &free, &wired, 0.5858, 0.5858, 2.0, seed, None).unwrap();
        differ += f64::from(u8::from(o.lower.is_open(e) != o.upper.is_open(e)));
        conn += f64::from(u8::from(connected_to_boundary(&d, &o.upper)[e]));
    }
    let (a, b) = (differ / n as f64, conn / n as f64);
    let se = (b * (1.0 - b) / n as f64).sqrt();
    assert!(a <= b + 3.0 * se, "{a} vs {b}");
    assert!(a > 0.0);
}

#[test]
fn stopping_state_is_a_prefix() {
    let d = build_box(1);
    let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
    let stop = conditions_coincide(&d, &free, &wired);
    let mut tree = boundary_cluster_tree(&d);
    for seed in 0..200 {
        let o = run_coupling(&mut tree, &d, &free, &wired, 0.5858, 0.5858, 2.0, seed, Some(&stop)).unwrap();
        let t = o.stop_time.unwrap();
        let s = o.state_at_stop.unwrap();
        assert_eq!(s.revealed[..], o.state.revealed[..t]);
        assert_eq!(s.lower[..], o.state.lower[..t]);
    }
}

/// `Λ_6` with open edges given by a predicate on their endpoints.
fn config(d: &Domain, open: impl Fn(Vertex, Vertex) -> bool) -> EdgeConfig {
    let bits: Vec<bool> = (0..d.n_edges()).map(|e| {
        let (a, b) = d.edge_vertices(e);
        open(a, b)
    }).collect();
    EdgeConfig::from_bools(&bits)
}

fn horizontal_arm(a: Vertex, b: Vertex, xs: std::ops::RangeInclusive<i32>) -> bool {
    a.y == 0 && b.y == 0 && xs.contains(&a.x) && xs.contains(&b.x)
}

#[test]
fn single_crossing_gives_two_petals() {
    let d = build_box(6);
    let cfg = config(&d, |a, b| horizontal_arm(a, b, 2..=6));
    let inner = explore_inner_flower(&d, &cfg, 2, 6).unwrap().unwrap();
    assert_eq!(inner.n_petals(), 2);
    let primal: Vec<&Petal> = inner.petals.iter().filter(|p| p.kind == PetalKind::Primal).collect();
    assert_eq!(primal.len(), 1);
    assert_eq!(primal[0].vertices, vec![Vertex::new(2, 0)]);
    assert!(inner.endpoints.iter().all(|v| v.norm_inf() == 2));
    let outer = explore_outer_flower(&d, &cfg, 2, 6).unwrap().unwrap();
    assert_eq!(outer.n_petals(), 2);
    assert!(outer.endpoints.iter().all(|v| v.norm_inf() == 6));
    assert!(outer.petals.iter().any(|p| p.kind == PetalKind::Primal && p.vertices == vec![Vertex::new(6, 0)]));
    assert!(!is_boosting_pair(&inner, &inner.minimal_coherent(), &BoundaryCondition::wired(&inner.region)));
}

#[test]
fn thick_crossing_gives_wide_primal_petal() {
    let d = build_box(6);
    let cfg = config(&d, |a, b| horizontal_arm(a, b, 2..=6) || (a.x == b.x && (a.x == 2 || a.x == 6) && a.y.abs() <= 1 && b.y.abs() <= 1));
    let inner = explore_inner_flower(&d, &cfg, 2, 6).unwrap().unwrap();
    let p = inner.petals.iter().find(|p| p.kind == PetalKind::Primal).unwrap();
    assert_eq!(p.vertices, vec![Vertex::new(2, -1), Vertex::new(2, 0), Vertex::new(2, 1)]);
    // Endpoints (2, ±1) are at distance 2 = r.
    assert!(well_separated(&inner, 0.5));
    assert!(!well_separated(&inner, 1.0));
    assert!(well_separated(&inner, 0.0));
    let outer = explore_outer_flower(&d, &cfg, 2, 6).unwrap().unwrap();
    let p = outer.petals.iter().find(|p| p.kind == PetalKind::Primal).unwrap();
    assert_eq!(p.vertices, vec![Vertex::new(6, -1), Vertex::new(6, 0), Vertex::new(6, 1)]);
}

#[test]
fn two_crossings_give_a_boosting_pair() {
    let d = build_box(6);
    let cfg = config(&d, |a, b| horizontal_arm(a, b, 2..=6) || horizontal_arm(a, b, -6..=-2));
    let f = explore_inner_flower(&d, &cfg, 2, 6).unwrap().unwrap();
    assert_eq!(f.n_petals(), 4);
    let kinds: Vec<PetalKind> = f.petals.iter().map(|p| p.kind).collect();
    assert!(kinds.windows(2).all(|w| w[0] != w[1]));
    let primal: Vec<usize> = (0..4).filter(|&j| f.petals[j].kind == PetalKind::Primal).collect();
    let xi = f.minimal_coherent();
    assert!(f.is_coherent(&xi));
    let (a, b) = (f.petal_indices(primal[0])[0], f.petal_indices(primal[1])[0]);
    let xi2 = xi.wire(&[a, b]);
    assert!(is_boosting_pair(&f, &xi, &xi2));
    assert!(!is_boosting_pair(&f, &xi, &xi));
    assert!(!is_boosting_pair(&f, &xi2, &xi));
    // Endpoints (±2, 0) are 4 apart.
    assert!(well_separated(&f, 1.5));
    assert!(!well_separated(&f, 2.0));
}

#[test]
fn crossing_free_configurations_have_no_flower() {
    let d = build_box(6);
    for cfg in [EdgeConfig::open(d.n_edges(), 0), config(&d, |a, b| horizontal_arm(a, b, 3..=6))] {
        assert!(explore_inner_flower(&d, &cfg, 2, 6).unwrap().is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn petal_counts_are_even_and_alternate(bits in proptest::collection::vec(proptest::bool::weighted(0.5), 2 * 9 * 10)) {
        let d = build_box(4);
        let cfg = EdgeConfig::from_bools(&bits[..d.n_edges()]);
        for f in [explore_inner_flower(&d, &cfg, 1, 4).unwrap(), explore_outer_flower(&d, &cfg, 1, 4).unwrap()].into_iter().flatten() {
            prop_assert!(f.n_petals() % 2 == 0 && f.n_petals() >= 2);
            let k = f.n_petals();
            prop_assert!((0..k).all(|j| f.petals[j].kind != f.petals[(j + 1) % k].kind));
            let s = match f.kind { FlowerKind::Inner => 1, FlowerKind::Outer => 4 };
            prop_assert!(f.endpoints.iter().all(|v| v.norm_inf() == s));
            prop_assert!(f.is_coherent(&f.minimal_coherent()));
        }
    }

    #[test]
    fn coupling_is_monotone_at_every_step(seed in any::<u64>(), q in 1.0f64..4.0, dp in 0.0f64..0.3) {
        let d = build_box(1);
        let (free, wired) = (BoundaryCondition::free(&d), BoundaryCondition::wired(&d));
        for mut tree in trees(&d) {
            let o = run_coupling(tree.as_mut(), &d, &free, &wired, 0.4, 0.4 + dp, q, seed, None).unwrap();
            prop_assert_eq!(o.monotonicity_violations, 0);
            let mut seen = o.state.revealed.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..d.n_edges()).collect::<Vec<_>>());
        }
    }
}
