mod common;

use proptest::prelude::*;

use syncflow::feasibility::{max_flow_feasible, partition_check, FEASIBILITY_TOLERANCE};

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn max_flow_agrees_with_partitions(seed in any::<u64>(), scale in 0.1..4.0f64) {
        let net = random_network(&mut rng(seed), 10, scale);
        let cert = max_flow_feasible(&net);
        let excess = worst_cut_excess(&net);
        let report = partition_check(&net, 20).unwrap();
        prop_assert!((report.margin + excess).abs() < 1e-9);
        if excess > 1e-7 {
            prop_assert!(!cert.feasible);
        }
        if excess < -1e-7 {
            prop_assert!(cert.feasible);
        }
        if cert.feasible {
            let f = cert.flows.as_ref().unwrap();
            prop_assert!(net.kcl_residual(f) < 1e-8);
            for (v, e) in f.iter().zip(net.edges()) {
                prop_assert!(v.abs() <= e.coupling * (1.0 + 1e-12));
            }
        } else {
            let cut = cert.cut.as_ref().unwrap();
            prop_assert!(cut.injection.abs() > cut.capacity);
            let p1: f64 = cut.side.iter().map(|&v| net.injections()[v]).sum();
            prop_assert!((p1 - cut.injection).abs() < 1e-12);
            prop_assert!(cert.max_flow_value < cert.total_source_power * (1.0 - FEASIBILITY_TOLERANCE) + 1e-12);
        }
    }
}
