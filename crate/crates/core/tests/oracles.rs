use cheeger_core::cheeger::{boundary_size, cheeger_exact, cheeger_exact_parallel, cheeger_naive};
use cheeger_core::graph::{generate_regular, Graph};
use cheeger_core::spectral::{spectrum, DEFAULT_TOLERANCE};
use cheeger_core::{bounds, Seed};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_graphs(count: usize, master: u64) -> Vec<Graph> {
    let mut out = Vec::with_capacity(count);
    let mut stream = 0;
    while out.len() < count {
        let n = 6 + (stream as usize % 9);
        let k = 2 + (stream as usize / 9) % (n - 2);
        stream += 1;
        if n * k % 2 == 1 {
            continue;
        }
        out.push(generate_regular(n, k, Seed::new(master, stream)).unwrap());
    }
    out
}

#[test]
fn exact_matches_naive_on_random_graphs() {
    for g in random_graphs(200, 41) {
        let fast = cheeger_exact(&g).unwrap();
        let slow = cheeger_naive(&g).unwrap();
        assert!(
            fast.same_ratio(&slow),
            "n={} k={}: {:?} vs {:?}",
            g.n(),
            g.k(),
            fast,
            slow
        );
        assert_eq!(boundary_size(&g, fast.witness), fast.boundary);
        assert_eq!(fast.witness.count_ones() as u64, fast.size);
    }
}

#[test]
fn parallel_split_is_bit_identical() {
    for g in random_graphs(40, 42) {
        let serial = cheeger_exact(&g).unwrap();
        for blocks in [1, 2, 3, 8, 64] {
            assert_eq!(cheeger_exact_parallel(&g, blocks).unwrap(), serial);
        }
    }
}

#[test]
fn closed_form_values() {
    let k4 = Graph::complete(4).unwrap();
    assert_eq!(cheeger_exact(&k4).unwrap().reduced(), (2, 1));
    for n in 3..=10 {
        let h = cheeger_exact(&Graph::complete(n).unwrap()).unwrap();
        assert_eq!(h.reduced(), ((n - n / 2) as u64, 1), "K{n}");
    }
    for n in 3..=12 {
        let h = cheeger_exact(&Graph::cycle(n).unwrap()).unwrap();
        let (p, q) = h.reduced();
        assert_eq!(p * (n / 2) as u64, 2 * q, "C{n}");
    }
    let p = Graph::petersen();
    let exact = cheeger_exact(&p).unwrap();
    assert_eq!(exact.reduced(), (1, 1));
    assert!(exact.same_ratio(&cheeger_naive(&p).unwrap()));
}

fn oracle_eigenvalues(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let m = DMatrix::from_row_slice(n, n, &g.adjacency_matrix());
    let mut v: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[test]
fn spectrum_matches_independent_solver() {
    for g in random_graphs(120, 43).iter().chain([&Graph::petersen()]) {
        let s = spectrum(g, DEFAULT_TOLERANCE).unwrap();
        let want = oracle_eigenvalues(g);
        for (a, b) in s.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "n={} k={}: {a} vs {b}", g.n(), g.k());
        }
        assert!(s.regular_violations(g.k()).is_empty());
    }
}

#[test]
fn spectrum_closed_forms() {
    let check = |g: &Graph, mut want: Vec<f64>| {
        want.sort_by(|a, b| b.total_cmp(a));
        let got = spectrum(g, DEFAULT_TOLERANCE).unwrap();
        for (a, b) in got.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    };
    check(&Graph::complete(4).unwrap(), vec![3.0, -1.0, -1.0, -1.0]);
    check(
        &Graph::cycle(6).unwrap(),
        vec![2.0, 1.0, 1.0, -1.0, -1.0, -2.0],
    );
    let mut petersen = vec![3.0];
    petersen.extend([1.0; 5]);
    petersen.extend([-2.0; 4]);
    check(&Graph::petersen(), petersen);
    for n in 3..=16 {
        let want = (0..n)
            .map(|j| 2.0 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        check(&Graph::cycle(n).unwrap(), want);
    }
}

#[test]
fn bounds_sandwich_exact_values() {
    for g in random_graphs(150, 44) {
        let h = cheeger_exact(&g).unwrap().h();
        let l1 = spectrum(&g, DEFAULT_TOLERANCE).unwrap().lambda1().unwrap();
        let b = bounds(g.k(), g.n(), l1).unwrap();
        assert!(
            b.lower <= h + 1e-9,
            "n={} k={}: lower {} > h {h}",
            g.n(),
            g.k(),
            b.lower
        );
        assert!(
            h <= b.upper + 1e-9,
            "n={} k={}: h {h} > upper {}",
            g.n(),
            g.k(),
            b.upper
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complement_has_the_same_boundary(seed in any::<u64>(), set in any::<u64>()) {
        let g = generate_regular(12, 4, Seed::new(seed, 0)).unwrap();
        let set = set & ((1 << 12) - 1);
        let complement = !set & ((1 << 12) - 1);
        prop_assert_eq!(boundary_size(&g, set), boundary_size(&g, complement));
    }

    #[test]
    fn relabelling_preserves_h_and_spectrum(seed in any::<u64>(), rot in 1usize..10) {
        let g = generate_regular(10, 3, Seed::new(seed, 1)).unwrap();
        let edges: Vec<_> = g.edges().map(|(u, v)| ((u + rot) % 10, (v + rot) % 10)).collect();
        let r = Graph::from_edges(10, &edges).unwrap();
        prop_assert!(cheeger_exact(&g).unwrap().same_ratio(&cheeger_exact(&r).unwrap()));
        let (a, b) = (spectrum(&g, DEFAULT_TOLERANCE).unwrap(), spectrum(&r, DEFAULT_TOLERANCE).unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }
}
