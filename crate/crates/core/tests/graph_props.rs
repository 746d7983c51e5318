mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use syncflow::graph::{
    bridges, build_incidence, build_laplacian, cycle_basis, cycle_norm_bound_check,
    helmholtz_decompose, k_inner, laplacian_pinv_apply, projectors, resistance_distance, BasisKind,
};
use syncflow::Network;

use common::*;

fn network(seed: u64, max_n: usize) -> Network {
    random_network(&mut rng(seed), max_n, 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn laplacian_matches_dense_assembly(seed in any::<u64>()) {
        let net = network(seed, 15);
        prop_assert!((build_laplacian(&net) - dense_laplacian(&net)).amax() < 1e-12);
        let e = build_incidence(&net).to_f64();
        let et = dense_incidence_t(&net);
        prop_assert_eq!(e.transpose(), et);
    }

    #[test]
    fn pinv_matches_eigen_oracle(seed in any::<u64>(), v in prop::collection::vec(-5.0..5.0f64, 15)) {
        let net = network(seed, 15);
        let n = net.node_count();
        let x = laplacian_pinv_apply(&net, &v[..n]).unwrap();
        let expected = dense_pinv(&net) * DVector::from_column_slice(&v[..n]);
        for (a, b) in x.iter().zip(expected.iter()) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn projector_identities(seed in any::<u64>()) {
        let net = network(seed, 12);
        let m = net.edge_count();
        let p = projectors(&net).unwrap();
        let id = DMatrix::<f64>::identity(m, m);
        prop_assert!((&p.directed + &p.cycle - &id).amax() < 1e-12);
        prop_assert!((&p.cycle * &p.cycle - &p.cycle).amax() < 1e-9);
        prop_assert!((&p.directed * &p.cycle).amax() < 1e-9);
        // E Pi_cycle = 0 and Pi_dir = K E^T L^+ E from the oracle
        let et = dense_incidence_t(&net);
        prop_assert!((et.transpose() * &p.cycle).amax() < 1e-9);
        let k = DMatrix::from_diagonal(&DVector::from_vec(net.couplings()));
        let oracle = &k * &et * dense_pinv(&net) * et.transpose();
        prop_assert!((&p.directed - oracle).amax() < 1e-9);
        // self-adjoint under <x, y>_K = x^T K^-1 y
        let kinv = DMatrix::from_diagonal(&DVector::from_vec(net.couplings()).map(|v| 1.0 / v));
        let sym = &kinv * &p.cycle;
        prop_assert!((&sym - sym.transpose()).amax() < 1e-9);
    }

    #[test]
    fn helmholtz_parts_are_orthogonal(seed in any::<u64>(), f in prop::collection::vec(-3.0..3.0f64, 40)) {
        let net = network(seed, 12);
        let f = &f[..net.edge_count()];
        let h = helmholtz_decompose(&net, f).unwrap();
        let scale = 1.0 + f.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(k_inner(&net, &h.directed, &h.cycle).abs() < 1e-9 * scale);
        prop_assert!(net.divergence(&h.cycle).iter().all(|v| v.abs() < 1e-9 * scale));
        let div_f = net.divergence(f);
        let div_d = net.divergence(&h.directed);
        prop_assert!(max_abs_diff(&div_f, &div_d) < 1e-9 * scale);
        // the directed part is a potential flow K (E^T theta)
        let ratio: Vec<f64> = h.directed.iter().zip(net.edges()).map(|(d, e)| d / e.coupling).collect();
        let basis = cycle_basis(&net, BasisKind::Fundamental);
        for s in basis.cycle_sums(&ratio) {
            prop_assert!(s.abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn resistance_distance_range(seed in any::<u64>()) {
        let net = network(seed, 12);
        let pinv = dense_pinv(&net);
        let is_bridge = bridges(&net);
        for (a, e) in net.edges().iter().enumerate() {
            let omega = resistance_distance(&net, a).unwrap();
            let oracle = pinv[(e.tail, e.tail)] + pinv[(e.head, e.head)] - 2.0 * pinv[(e.tail, e.head)];
            prop_assert!((omega - oracle).abs() < 1e-9);
            let ko = e.coupling * omega;
            prop_assert!(ko > 0.0 && ko <= 1.0 + 1e-9);
            prop_assert_eq!(is_bridge[a], (ko - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cycle_bases_span_the_kernel(seed in any::<u64>()) {
        let net = network(seed, 14);
        let e = build_incidence(&net).to_f64();
        let mut total = [0usize; 2];
        for (i, kind) in [BasisKind::Fundamental, BasisKind::Minimal].into_iter().enumerate() {
            let basis = cycle_basis(&net, kind);
            prop_assert_eq!(basis.len(), net.cycle_rank());
            if basis.is_empty() {
                continue;
            }
            let c = basis.matrix_f64();
            prop_assert!((&e * &c).amax() == 0.0);
            prop_assert_eq!(c.clone().svd(false, false).rank(1e-9), basis.len());
            for cycle in basis.cycles() {
                prop_assert!(cycle.len() >= 2);
                total[i] += cycle.len();
            }
        }
        prop_assert!(total[1] <= total[0]);
    }

    #[test]
    fn cycle_flow_norm_bound(seed in any::<u64>(), l in prop::collection::vec(-2.0..2.0f64, 30)) {
        let net = network(seed, 12);
        let basis = cycle_basis(&net, BasisKind::Fundamental);
        let fc = basis.loop_flows(&l[..basis.len()]);
        for a in 0..net.edge_count() {
            let b = cycle_norm_bound_check(&net, &fc, a).unwrap();
            prop_assert!(b.holds, "edge {a}: {b:?}");
        }
    }
}

#[test]
fn tree_has_no_cycles() {
    let net = random_tree(&mut rng(3), 20, 1.0);
    let basis = cycle_basis(&net, BasisKind::Minimal);
    assert!(basis.is_empty());
    assert!(bridges(&net).iter().all(|&b| b));
}
