use std::collections::HashSet;

use proptest::prelude::*;
use rclab::lattice::*;

/// Connected vertex sets grown by a lattice walk from the origin.
fn walk_domain() -> impl Strategy<Value = Domain> {
    prop::collection::vec(0usize..4, 0..20).prop_map(|steps| {
        let mut v = Vertex::new(0, 0);
        let mut set = vec![v];
        for s in steps {
            v = v.step(s);
            set.push(v);
        }
        Domain::induced(set).unwrap()
    })
}

/// Same vertex sets with a random subset of non-bridge-breaking edges removed.
fn sparse_domain() -> impl Strategy<Value = Domain> {
    (walk_domain(), prop::collection::vec(any::<bool>(), 64)).prop_map(|(d, drop)| {
        let mut keep: Vec<usize> = (0..d.n_edges()).collect();
        for (e, &x) in drop.iter().enumerate().take(d.n_edges()) {
            if !x {
                continue;
            }
            let trial: Vec<usize> = keep.iter().copied().filter(|&f| f != e).collect();
            let edges = trial.iter().map(|&f| d.edge_vertices(f));
            if Domain::new(d.vertices().to_vec(), edges).is_ok() {
                keep = trial;
            }
        }
        Domain::new(d.vertices().to_vec(), keep.iter().map(|&f| d.edge_vertices(f))).unwrap()
    })
}

fn partition(n: usize) -> impl Strategy<Value = BoundaryCondition> {
    (prop::collection::vec(0usize..4, n), prop::option::of(0usize..4)).prop_map(move |(labels, ghost)| {
        let classes: Vec<Vec<usize>> = (0..4).map(|c| (0..n).filter(|&v| labels[v] == c).collect()).collect();
        let ghost = ghost.filter(|&g| !classes[g].is_empty());
        BoundaryCondition::from_classes(n, &classes, ghost).unwrap()
    })
}

#[test]
fn annulus_counts() {
    for (r, rr) in [(1u32, 2u32), (2, 4), (3, 5), (4, 8)] {
        let d = build_annulus(r, rr).unwrap();
        let (r, rr) = (r as usize, rr as usize);
        let nv = (2 * rr + 1).pow(2) - (2 * r - 1).pow(2);
        let ne = 4 * rr * (2 * rr + 1) - 2 * (2 * r - 1) * (2 * r - 2) - 4 * (2 * r - 1);
        assert_eq!((d.n_vertices(), d.n_edges()), (nv, ne), "Ann({r}, {rr})");
        assert!(d.vertices().iter().all(|v| v.norm_inf() >= r as i32));
    }
    assert!(build_annulus(0, 3).is_err());
    assert!(build_annulus(3, 3).is_err());
}

#[test]
fn annulus_boundary_has_both_circles() {
    let d = build_annulus(2, 4).unwrap();
    let b: HashSet<i32> = d.boundary().iter().map(|&i| d.vertex(i).norm_inf()).collect();
    assert_eq!(b, HashSet::from([2, 4]));
}

#[test]
fn invalid_domains() {
    assert!(Domain::new(Vec::<Vertex>::new(), Vec::new()).is_err());
    let (a, b, c) = (Vertex::new(0, 0), Vertex::new(1, 0), Vertex::new(3, 0));
    assert!(Domain::new([a, b, c], [(a, b)]).is_err(), "disconnected");
    assert!(Domain::new([a, c], [(a, c)]).is_err(), "not nearest-neighbour");
    assert!(Domain::new([a, b], [(a, b), (b, a)]).is_err(), "duplicate edge");
    assert!(Domain::new([a], [(a, b)]).is_err(), "edge leaves vertex set");
    assert!(Domain::rect(0, 0, 0, 3).is_err());
}

#[test]
fn text_parse_errors() {
    assert!(Domain::from_text("").is_err());
    assert!(Domain::from_text("V 1 E 0").is_err());
    assert!(Domain::from_text("V 1 E 0\n0 0\n1 1\n").is_err());
    assert!(Domain::from_text("V 2 E 1\n0 0\n1 0\n0 2\n").is_err());
    assert!(Domain::from_text("W 1 E 0\n0 0\n").is_err());
    assert!(Domain::from_text("V 2 E 1\n0 0\n1 0\n0 x\n").is_err());
    assert_eq!(Domain::from_text("V 1 E 0\n0 0\n").unwrap().n_vertices(), 1);
}

#[test]
fn critical_points() {
    assert_eq!(p_c(1.0f64), 0.5);
    assert!((p_c(2.0f64) - 2f64.sqrt() / (1.0 + 2f64.sqrt())).abs() < 1e-15);
    assert!((p_c(4.0f64) - 2.0 / 3.0).abs() < 1e-15);
    for q in [0.5f64, 1.0, 2.0, 3.0, 4.0] {
        assert!((dual_p(p_c(q), q) - p_c(q)).abs() < 1e-14);
    }
    assert!((p_c(2.0f32) - 0.585_786_4).abs() < 1e-6);
}

#[test]
fn dual_bijection_round_trips() {
    for d in [build_box(1), build_box(3), build_annulus(1, 3).unwrap(), Domain::rect(0, 0, 5, 2).unwrap()] {
        let dual = dual_of(&d).unwrap();
        assert_eq!(dual.domain.n_edges(), d.n_edges());
        for e in 0..d.n_edges() {
            assert_eq!(dual.dual_to_primal[dual.primal_to_dual[e]], e);
            let (a, b) = d.edge_vertices(e);
            let (s, t) = dual.domain.edge_vertices(dual.primal_to_dual[e]);
            // The dual edge crosses the primal edge at its midpoint.
            let mid = (a.x + b.x, a.y + b.y);
            assert_eq!((s.x + t.x + 1, s.y + t.y + 1), mid);
        }
        // Euler: bounded faces of the primal are the non-exterior dual vertices.
        let bounded = dual.exterior.iter().filter(|&&x| !x).count();
        assert_eq!(bounded, d.unit_faces().len());
    }
}

#[test]
fn dual_faces_are_interior_primal_vertices() {
    let d = build_box(2);
    let dual = dual_of(&d).unwrap();
    // A unit face of the dual with lower-left square (i, j) surrounds the primal vertex (i+1, j+1).
    let faces: HashSet<Vertex> = dual.domain.unit_faces().iter().map(|f| Vertex::new(f.x + 1, f.y + 1)).collect();
    let interior: HashSet<Vertex> = (0..d.n_vertices()).filter(|&v| d.degree(v) == 4).map(|v| d.vertex(v)).collect();
    assert_eq!(faces, interior);
    let dd = dual_of(&dual.domain).unwrap();
    assert_eq!(dd.domain.n_edges(), d.n_edges());
}

#[test]
fn quad_rejections() {
    let d = build_box(2);
    let ok = [Vertex::new(2, -2), Vertex::new(2, 2), Vertex::new(-2, 2), Vertex::new(-2, -2)];
    assert!(Quad::new(d.clone(), ok).is_ok());
    let cw = [ok[0], ok[3], ok[2], ok[1]];
    assert!(Quad::new(d.clone(), cw).is_err(), "clockwise marks");
    let repeated = [ok[0], ok[0], ok[2], ok[3]];
    assert!(Quad::new(d.clone(), repeated).is_err(), "repeated mark");
    let interior = [ok[0], Vertex::new(0, 0), ok[2], ok[3]];
    assert!(Quad::new(d.clone(), interior).is_err(), "interior mark");
    let outside = [ok[0], Vertex::new(9, 9), ok[2], ok[3]];
    assert!(Quad::new(d, outside).is_err(), "mark outside");
    let ann = build_annulus(1, 3).unwrap();
    let marks = [Vertex::new(3, -3), Vertex::new(3, 3), Vertex::new(-3, 3), Vertex::new(-3, -3)];
    assert!(Quad::new(ann, marks).is_err(), "hole");
}

#[test]
fn quad_arcs_partition_the_cycle() {
    let q = Quad::rectangle(0, 0, 4, 2).unwrap();
    let total: usize = (0..4).map(|i| q.arc_edges(i).len()).sum();
    assert_eq!(total, q.cycle().len());
    assert_eq!(q.arc_edges(0).len(), 2);
    assert_eq!(q.arc_edges(1).len(), 4);
    for i in 0..4 {
        let a = q.arc_vertices(i);
        assert_eq!(a[0], q.marks()[i]);
        assert_eq!(*a.last().unwrap(), q.marks()[(i + 1) % 4]);
    }
}

#[test]
fn eta_regularity() {
    let q = Quad::square(4).unwrap();
    assert!(eta_regular(&q, 0.5, 8));
    assert!(eta_regular(&q, 0.25, 8));
    assert!(!eta_regular(&q, 0.3, 8));
    assert!(!eta_regular(&q, 0.5, 3));
    let off = Quad::rectangle(-4, -4, 3, 4).unwrap();
    assert!(!eta_regular(&off, 0.5, 8));
}

#[test]
fn medial_degrees_on_a_box() {
    let d = build_box(2);
    let m = medial_of(&d);
    assert_eq!(m.n_edges(), 4 * d.n_vertices());
    let deg4 = (0..m.n_vertices()).filter(|&v| m.degree(v) == 4).count();
    let deg2 = (0..m.n_vertices()).filter(|&v| m.degree(v) == 2).count();
    assert_eq!(deg4, d.n_edges());
    assert_eq!(deg2, 4 * d.n_vertices() - 2 * d.n_edges());
    for e in 0..m.n_edges() {
        assert_eq!(m.midpoint(m.primal_of(e), e % 4), m.tail(e));
    }
}

proptest! {
    #[test]
    fn text_round_trip(d in sparse_domain()) {
        let back = Domain::from_text(&d.to_text()).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(back.boundary(), d.boundary());
    }

    #[test]
    fn edges_sorted_and_indexed(d in sparse_domain()) {
        for e in 0..d.n_edges() {
            let (a, b) = d.edge_vertices(e);
            let dir = if d.is_horizontal(e) { 0 } else { 1 };
            prop_assert_eq!(a.step(dir), b);
            prop_assert_eq!(d.edge_at(a, dir), Some(e));
            prop_assert_eq!(d.edge_at(b, dir + 2), Some(e));
            if e > 0 {
                let (pa, pb) = d.edge_vertices(e - 1);
                let key = |a: Vertex, b: Vertex| (a.y, a.x, (a.y != b.y) as u8);
                prop_assert!(key(pa, pb) < key(a, b));
            }
        }
        let degsum: usize = (0..d.n_vertices()).map(|v| d.degree(v)).sum();
        prop_assert_eq!(degsum, 2 * d.n_edges());
    }

    #[test]
    fn dual_p_is_an_involution(p in 0.001f64..0.999, q in 0.1f64..10.0) {
        let s = dual_p(p, q);
        prop_assert!(s > 0.0 && s < 1.0);
        prop_assert!((dual_p(s, q) - p).abs() < 1e-12);
        prop_assert!((p * s / ((1.0 - p) * (1.0 - s)) - q).abs() < 1e-9 * q.max(1.0));
    }

    #[test]
    fn join_is_the_least_upper_bound(a in partition(7), b in partition(7), c in partition(7)) {
        let j = a.join(&b);
        prop_assert!(a.le(&j) && b.le(&j));
        prop_assert_eq!(&j, &b.join(&a));
        prop_assert_eq!(a.join(&a), a.clone());
        if a.le(&c) && b.le(&c) {
            prop_assert!(j.le(&c));
        }
        prop_assert!(BoundaryCondition::free_n(7).le(&a));
        prop_assert!(a.le(&a));
        if a.le(&b) && b.le(&a) {
            prop_assert_eq!(&a, &b);
        }
    }

    #[test]
    fn wiring_only_coarsens(a in partition(6), u in 0usize..6, v in 0usize..6) {
        let w = a.wire(&[u, v]);
        prop_assert!(a.le(&w));
        prop_assert!(w.same_class(u, v));
    }
}
