mod common;

use common::{noisy_circuit, unitary_circuit};
use proptest::prelude::*;
use vibsim_core::calibrate::{pump_to_r, r_to_pump};
use vibsim_core::metrics::{trace_bound, tvd};
use vibsim_core::sampler::sample;
use vibsim_core::vibronic::gaussian_distribution;
use vibsim_core::{fidelity, Element, FCTable, GaussianCircuit, GaussianState};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn distribution() -> impl Strategy<Value = FCTable> {
    prop::collection::vec(0.0f64..1.0, 1..6).prop_map(|w| {
        let total: f64 = w.iter().sum::<f64>() + 0.1;
        FCTable::from_entries(1, w.len(), w.iter().enumerate().map(|(k, &p)| (vec![k], p / total))).unwrap()
    })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn symplectic_eigenvalues_are_physical(seed in any::<u64>()) {
        let s = noisy_circuit(seed).replay().unwrap();
        for nu in s.symplectic_eigenvalues().unwrap() {
            prop_assert!(nu >= 0.5 - 1e-9);
        }
    }

    #[test]
    fn unitary_circuits_stay_pure(seed in any::<u64>()) {
        let s = unitary_circuit(seed, true).replay().unwrap();
        prop_assert!(s.is_pure());
    }

    #[test]
    fn even_circuits_never_emit_odd_totals(seed in any::<u64>()) {
        let s = unitary_circuit(seed, false).replay().unwrap();
        let p = gaussian_distribution(&s, 20).unwrap();
        prop_assert!(p.odd_mass() < 1e-12);
    }

    #[test]
    fn losses_compose(e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0, seed in any::<u64>()) {
        let base = noisy_circuit(seed).replay().unwrap();
        let twice = base
            .apply(&Element::Loss { mode: 0, transmission: e1 }).unwrap()
            .apply(&Element::Loss { mode: 0, transmission: e2 }).unwrap();
        let once = base.apply(&Element::Loss { mode: 0, transmission: e1 * e2 }).unwrap();
        prop_assert!(twice.cov_distance(&once) < 1e-12);
        prop_assert!(twice.mean_distance(&once) < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_self_unity(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = noisy_circuit(s1).replay().unwrap();
        let b = noisy_circuit(s2).replay().unwrap();
        let fab = fidelity(&a, &b).unwrap();
        prop_assert!((fab - fidelity(&b, &a).unwrap()).abs() < 1e-7);
        prop_assert!((0.0..=1.0).contains(&fab));
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        let pure = unitary_circuit(s1, true).replay().unwrap();
        prop_assert!((fidelity(&pure, &pure).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tvd_is_a_metric(p in distribution(), q in distribution(), r in distribution()) {
        let pq = tvd(&p, &q).unwrap();
        prop_assert!((pq - tvd(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        prop_assert!(tvd(&p, &p).unwrap() == 0.0);
        prop_assert!(tvd(&p, &r).unwrap() <= pq + tvd(&q, &r).unwrap() + 1e-12);
    }

    #[test]
    fn trace_bound_decreases(f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0) {
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        prop_assert!(trace_bound(hi).unwrap() <= trace_bound(lo).unwrap());
    }

    #[test]
    fn pump_law_inverts(power in 1e-3f64..500.0, k in 1e-3f64..0.5) {
        let back = r_to_pump(pump_to_r(power, k).unwrap(), k).unwrap();
        prop_assert!((back - power).abs() <= 1e-12 * power);
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), shots in 1u64..5000) {
        let s = GaussianCircuit::from_elements(2, vec![Element::TwoModeSqueeze { i: 0, j: 1, r: 0.4 }])
            .unwrap()
            .replay()
            .unwrap();
        let p = gaussian_distribution(&s, 12).unwrap();
        let a = sample(&p, shots, seed).unwrap();
        prop_assert_eq!(&a, &sample(&p, shots, seed).unwrap());
        prop_assert_eq!(a.total_shots(), shots);
    }
}

#[test]
fn vacuum_is_its_own_closest_state() {
    let v = GaussianState::vacuum(2).unwrap();
    assert_eq!(fidelity(&v, &v).unwrap(), 1.0);
}
