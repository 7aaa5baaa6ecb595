use std::collections::BTreeMap;

use hdbell::bellbasis::{bell_state_minus, full_basis, occupied_pairs, BellIndex, Convention, ModeWindow};
use hdbell::certify::{entanglement_dimensionality, fidelity, mutual_information};
use hdbell::formats::{self, counts_from_csv, counts_to_csv, DensityRecord, LabeledMatrix, StateRecord};
use hdbell::gates::{apply_local, dove_prism, equal_up_to_global_phase, pauli_x, Party};
use hdbell::hilbert::{hermitian_eigendecomposition, max_abs_diff, project_to_state_space, tensor_product};
use hdbell::measurement::{
    born_probability, crosstalk_channel, joint_settings, CountRecord, EdgeMode, MeasurementSetting, ProjectorSpec,
};
use hdbell::spdc::{group_state, spdc_state, PumpSpec, PumpTerm, SchmidtProfile, SpdcModel};
use hdbell::{DensityMatrix, PureState, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

fn state(dim: usize) -> impl Strategy<Value = PureState> {
    prop::collection::vec(complex(), dim)
        .prop_filter("nonzero", |v| v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(|v| PureState::normalized(v).unwrap())
}

fn hermitian(dim: usize) -> impl Strategy<Value = DMatrix<C64>> {
    prop::collection::vec(complex(), dim * dim).prop_map(move |v| {
        let m = DMatrix::from_vec(dim, dim, v);
        (&m + m.adjoint()).scale(0.5)
    })
}

/// Mixture of up to three random pure states.
fn density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    (
        prop::collection::vec(state(dim), 1..4),
        prop::collection::vec(0.05f64..1.0, 3),
    )
        .prop_map(move |(states, w)| {
            let total: f64 = w.iter().take(states.len()).sum();
            let mut m = DMatrix::zeros(dim, dim);
            for (s, wi) in states.iter().zip(&w) {
                m += s.projector().scale(wi / total);
            }
            DensityMatrix::new((&m + m.adjoint()).scale(0.5)).unwrap()
        })
}

fn frob(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_product_is_bilinear(a in state(4), a2 in state(4), b in state(4), alpha in complex()) {
        let lhs = tensor_product(&a.scaled(alpha), &b);
        let rhs = tensor_product(&a, &b).scaled(alpha);
        for (x, y) in lhs.amplitudes().iter().zip(rhs.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
        let sum = PureState::new(a.amplitudes().iter().zip(a2.amplitudes()).map(|(x, y)| x + y).collect()).unwrap();
        let lhs = tensor_product(&sum, &b);
        let t1 = tensor_product(&a, &b);
        let t2 = tensor_product(&a2, &b);
        for ((x, y), z) in lhs.amplitudes().iter().zip(t1.amplitudes()).zip(t2.amplitudes()) {
            prop_assert!((x - (y + z)).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent_and_non_expansive(m in hermitian(16), rho in density(16)) {
        let p = project_to_state_space(&m).unwrap();
        let pp = project_to_state_space(p.matrix()).unwrap();
        prop_assert!(max_abs_diff(p.matrix(), pp.matrix()) < 1e-9);
        prop_assert!((p.trace().re - 1.0).abs() < 1e-9);
        prop_assert!(p.eigenvalues().unwrap().iter().all(|&l| l >= -1e-9));
        prop_assert!(frob(p.matrix(), rho.matrix()) <= frob(&m, rho.matrix()) + 1e-9);
    }

    #[test]
    fn eigendecomposition_round_trip(m in hermitian(16)) {
        let e = hermitian_eigendecomposition(&m).unwrap();
        prop_assert!(max_abs_diff(&e.reconstruct(), &m) <= 1e-9);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn bell_pairs_have_distinct_partners(d in 2usize..7) {
        for conv in [Convention::Plus, Convention::Minus] {
            let basis = full_basis(d, conv).unwrap();
            for (i, s) in basis.iter().enumerate() {
                let pairs = occupied_pairs(s, d, 1e-12);
                prop_assert_eq!(pairs.len(), d);
                let mut a: Vec<_> = pairs.iter().map(|p| p.0).collect();
                let mut b: Vec<_> = pairs.iter().map(|p| p.1).collect();
                a.sort_unstable();
                a.dedup();
                b.sort_unstable();
                b.dedup();
                prop_assert_eq!(a.len(), d);
                prop_assert_eq!(b.len(), d);
                if conv == Convention::Minus {
                    let m = i / d;
                    prop_assert!(pairs.iter().all(|&(ka, kb)| (ka + kb) % d == m));
                }
            }
        }
    }

    #[test]
    fn spdc_conserves_oam(terms in prop::collection::btree_map(-4i64..7, (0.1f64..1.0, -3.0f64..3.0), 1..4)) {
        let pump = PumpSpec::normalized(
            terms.iter().map(|(&l, &(a, phi))| PumpTerm { l, amplitude: C64::from_polar(a, phi) }).collect(),
        ).unwrap();
        let model = SpdcModel::flat_d4();
        let joint = spdc_state(&pump, &model).unwrap();
        for (i, a) in joint.amplitudes().iter().enumerate() {
            if a.norm() > 1e-14 {
                let (ls, li) = model.joint_labels(i);
                prop_assert!(terms.contains_key(&(ls + li)));
            }
        }
    }

    #[test]
    fn group_states_are_maximally_entangled(c in prop::collection::vec(0.05f64..2.0, 11), m in 0usize..4) {
        let values: BTreeMap<i64, f64> = (-5..=5).zip(c).collect();
        let model = SpdcModel::new(ModeWindow::default_d4(), (-5, 5), SchmidtProfile::Custom { values }).unwrap();
        let g = group_state(m, &model).unwrap();
        prop_assert!(g.filter_efficiency > 0.0 && g.filter_efficiency <= 1.0);
        let rho = DensityMatrix::from_pure(&g.state);
        let reduced = rho.partial_trace_b(4, 4).unwrap();
        let id = DMatrix::<C64>::identity(4, 4).scale(0.25);
        prop_assert!(max_abs_diff(reduced.matrix(), &id) < 1e-9);

        let g0 = group_state(0, &model).unwrap();
        let shifted = apply_local(&pauli_x(4).unwrap().pow(m as u32), Party::B, &g0.state).unwrap();
        prop_assert!(equal_up_to_global_phase(&shifted, &g.state, 1e-10).unwrap());
    }

    #[test]
    fn dove_prisms_compose(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let w = ModeWindow::default_d4();
        let ab = dove_prism(a, &w).compose(&dove_prism(b, &w)).unwrap();
        prop_assert!(max_abs_diff(ab.matrix(), dove_prism(a + b, &w).matrix()) < 1e-12);
        prop_assert!(dove_prism(a, &w).is_unitary(1e-12));
    }

    #[test]
    fn pure_settings_are_a_complete_measurement(rho in density(16)) {
        let total: f64 = (0..4)
            .flat_map(|ka| (0..4).map(move |kb| MeasurementSetting { a: ProjectorSpec::Pure { k: ka }, b: ProjectorSpec::Pure { k: kb } }))
            .map(|s| born_probability(&rho, &s, 4).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn crosstalk_keeps_states_valid(rho in density(16), eps in 0.0f64..0.99, leak in any::<bool>()) {
        let edge = if leak { EdgeMode::Leak } else { EdgeMode::Reflect };
        let out = crosstalk_channel(&rho, eps, &ModeWindow::default_d4(), edge).unwrap();
        prop_assert!((out.trace().re - 1.0).abs() < 1e-9);
        prop_assert!(out.eigenvalues().unwrap().iter().all(|&l| l >= -1e-9));
    }

    #[test]
    fn fidelity_is_linear_and_phase_blind(r1 in density(16), r2 in density(16), w in 0.0f64..1.0, phi in -3.0f64..3.0, k in 0usize..16) {
        let t = bell_state_minus(BellIndex::from_flat(4, k).unwrap());
        let mix = r1.mix(&r2, w).unwrap();
        let lin = w * fidelity(&r1, &t).unwrap() + (1.0 - w) * fidelity(&r2, &t).unwrap();
        prop_assert!((fidelity(&mix, &t).unwrap() - lin).abs() < 1e-12);
        let rotated = t.scaled(C64::from_polar(1.0, phi));
        prop_assert!((fidelity(&r1, &rotated).unwrap() - fidelity(&r1, &t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn entanglement_dimensionality_is_monotone(f1 in 0.0f64..1.0, f2 in 0.0f64..1.0, d in 2usize..9) {
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        prop_assert!(entanglement_dimensionality(lo, d) <= entanglement_dimensionality(hi, d));
        let full = entanglement_dimensionality(hi, d) == d;
        prop_assert_eq!(full, hi > (d - 1) as f64 / d as f64);
    }

    #[test]
    fn mutual_information_bounds_and_relabeling(
        v in prop::collection::vec(0.0f64..1.0, 256),
        perm in Just((0..16).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let m = DMatrix::from_row_slice(16, 16, &v);
        prop_assume!(m.row_iter().all(|r| r.sum() > 0.0));
        let mi = mutual_information(&m).unwrap();
        prop_assert!((-1e-12..=4.0 + 1e-12).contains(&mi));
        let p = DMatrix::from_fn(16, 16, |i, j| m[(perm[i], perm[j])]);
        prop_assert!((mutual_information(&p).unwrap() - mi).abs() < 1e-12);
    }

    #[test]
    fn state_json_round_trips(s in state(16)) {
        let text = formats::to_json(&StateRecord::new(&s, &ModeWindow::default_d4()).unwrap()).unwrap();
        let (back, w) = formats::from_json::<StateRecord>(&text, "state").unwrap().into_parts().unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(formats::to_json(&StateRecord::new(&back, &w).unwrap()).unwrap(), text);
    }

    #[test]
    fn density_json_round_trips(rho in density(16)) {
        let text = formats::to_json(&DensityRecord::new(&rho)).unwrap();
        let back = formats::from_json::<DensityRecord>(&text, "rho").unwrap().into_density().unwrap();
        prop_assert_eq!(back.matrix(), rho.matrix());
        prop_assert_eq!(formats::to_json(&DensityRecord::new(&back)).unwrap(), text);
    }

    #[test]
    fn counts_csv_round_trips(counts in prop::collection::vec(0u64..1_000_000, 784), shots in 1u64..10_000_000) {
        let settings = joint_settings(4).unwrap();
        let recs: Vec<CountRecord> = settings
            .iter()
            .zip(&counts)
            .enumerate()
            .map(|(i, (s, &c))| CountRecord { setting_id: i, setting: *s, counts: c, shots })
            .collect();
        let text = counts_to_csv(&recs).unwrap();
        let back = counts_from_csv(&text).unwrap();
        prop_assert_eq!(&back, &recs);
        prop_assert_eq!(counts_to_csv(&back).unwrap(), text);
    }

    #[test]
    fn matrix_csv_round_trips(v in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 12)) {
        let rows = (0..3).map(|i| format!("r{i}")).collect();
        let cols = (0..4).map(|j| format!("c{j}")).collect();
        let m = LabeledMatrix::new(rows, cols, DMatrix::from_row_slice(3, 4, &v)).unwrap();
        let text = m.to_csv().unwrap();
        let back = LabeledMatrix::from_csv(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.to_csv().unwrap(), text);
    }
}
