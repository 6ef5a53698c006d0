mod common;

use common::*;
use mpqhd::configspace::{PotentialKind, Statistics};
use mpqhd::hydro::{mass_density, Scope, DEFAULT_EPS};
use mpqhd::stencil::trapz_all;
use mpqhd::tensors::{
    advection_dyad, momentum_flow, pressure, scalar_quantum_pressure, split_cl_qu, split_parts_1_2, tensor_set,
    Family, Part, Version,
};
use proptest::prelude::*;

const EPS: f64 = DEFAULT_EPS;

fn at(a: &ndarray::ArrayD<f64>, i: usize) -> f64 {
    a[[i].as_slice()]
}

#[test]
fn scalar_quantum_pressure_of_unit_gaussian() {
    // P = −(ħ²/4m) D'' with D the unit normal density: P(0) = 1/(4√(2π)).
    let psi = gaussian_1d(2049, 12.0, 1.0, 2.0, 1.0);
    let p = scalar_quantum_pressure(&psi, 0).unwrap();
    let expected = 0.25 / (2.0 * std::f64::consts::PI).sqrt();
    assert!((at(&p.values, 1024) - expected).abs() < 1e-8);
    assert!((at(&p.values, 1024) - 0.09974).abs() < 1e-5);
    let xs = p.axes[0].coords();
    for (i, &x) in xs.iter().enumerate() {
        let d = (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((at(&p.values, i) - 0.25 * (1.0 - x * x) * d).abs() < 1e-8, "x = {x}");
    }
    assert!(trapz_all(&p.values, &[p.axes[0].h()]).abs() < 1e-10);
}

#[test]
fn momentum_flow_of_moving_gaussian() {
    // Π^W(0) = ρ w² + ρ d² + P = 4D(0) + 0 + D(0)/4.
    let psi = gaussian_1d(2049, 12.0, 1.0, 2.0, 1.0);
    let d0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    for v in [Version::W, Version::K] {
        let pi = momentum_flow(&psi, Scope::Sort(0), v, EPS).unwrap();
        assert!((at(&pi.comps[0], 1024) - 4.25 * d0).abs() < 1e-7);
        assert!((at(&pi.comps[0], 1024) - 1.6955).abs() < 1e-4);
    }
}

#[test]
fn splits_add_up_to_the_full_tensor() {
    for psi in [correlated_2d(65, 9.0, 0.5, [1.0, -0.5]), two_sorts(97, 10.0, PotentialKind::None)] {
        for family in [Family::MomentumFlow, Family::Pressure] {
            for v in [Version::K, Version::W] {
                let set = tensor_set(&psi, Scope::Sort(0), family, EPS).unwrap();
                let full = set.get(v, Part::Full);
                let scale = full.max_abs();
                let (cl, qu) = split_cl_qu(&psi, Scope::Sort(0), family, v, EPS).unwrap();
                let (p1, p2) = split_parts_1_2(&psi, Scope::Sort(0), family, v, EPS).unwrap();
                assert!(cl.plus(&qu, Part::Full).max_abs_diff(&full, None) <= 1e-12 * scale);
                assert!(p1.plus(&p2, Part::Full).max_abs_diff(&full, None) <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn tensors_are_symmetric() {
    let psi = correlated_2d(65, 9.0, 0.5, [1.0, -0.5]);
    for family in [Family::MomentumFlow, Family::Pressure] {
        let set = tensor_set(&psi, Scope::Sort(0), family, EPS).unwrap();
        for v in [Version::K, Version::W] {
            for part in [Part::Full, Part::Classical, Part::Quantum, Part::Part1, Part::Part2] {
                let t = set.get(v, part);
                assert!(t.max_asymmetry() <= 1e-14 * t.max_abs().max(1.0), "{family:?} {v:?} {part:?}");
            }
        }
    }
}

#[test]
fn second_order_parts_differ_off_the_diagonal() {
    let psi = correlated_2d(65, 9.0, 0.5, [1.0, -0.5]);
    let set = tensor_set(&psi, Scope::Sort(0), Family::MomentumFlow, EPS).unwrap();
    let (k, w) = (set.get(Version::K, Part::Part2), set.get(Version::W, Part::Part2));
    assert_eq!(w.at(0, 1).iter().fold(0.0f64, |m, x| m.max(x.abs())), 0.0);
    let off_k = k.at(0, 1).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(off_k > 1e-3 * k.max_abs(), "{off_k}");
    // W is the isotropic P·I with P the trace of K.
    let trace_k = k.at(0, 0) + k.at(1, 1);
    assert!(max_abs_diff(&trace_k, w.at(0, 0)) <= 1e-14 * k.max_abs());
    assert!(max_abs_diff(&trace_k, w.at(1, 1)) <= 1e-14 * k.max_abs());
}

#[test]
fn versions_coincide_in_one_dimension() {
    let psi = gaussian_1d(513, 12.0, 1.0, 2.0, 1.0);
    for family in [Family::MomentumFlow, Family::Pressure] {
        let set = tensor_set(&psi, Scope::Sort(0), family, EPS).unwrap();
        let (k, w) = (set.get(Version::K, Part::Full), set.get(Version::W, Part::Full));
        assert!(k.max_abs_diff(&w, None) <= 1e-14 * k.max_abs());
    }
}

#[test]
fn one_particle_pressure_is_purely_quantum() {
    let psi = correlated_2d(65, 9.0, 0.5, [1.0, -0.5]);
    let (cl, qu) = split_cl_qu(&psi, Scope::Sort(0), Family::Pressure, Version::K, EPS).unwrap();
    assert!(cl.max_abs() <= 1e-9 * qu.max_abs(), "{}", cl.max_abs());
}

#[test]
fn momentum_flow_minus_pressure_is_the_advective_dyad() {
    for (psi, scope) in [
        (two_sorts(97, 10.0, PotentialKind::None), Scope::Sort(1)),
        (pair(97, 10.0, Statistics::Boson, PotentialKind::None), Scope::Sort(0)),
    ] {
        for v in [Version::K, Version::W] {
            let pi = momentum_flow(&psi, scope, v, EPS).unwrap();
            let p = pressure(&psi, scope, v, EPS).unwrap();
            let dyad = advection_dyad(&psi, scope, v, EPS).unwrap();
            let diff = pi.minus(&p, Part::Full);
            assert!(diff.max_abs_diff(&dyad, pi.defined.as_ref()) <= 1e-10 * pi.max_abs());
        }
    }
}

#[test]
fn total_pressure_is_not_the_sum_of_sort_pressures() {
    // Counter-moving sorts: the total frame sees extra classical spread.
    let psi = two_sorts(129, 10.0, PotentialKind::None);
    let total = pressure(&psi, Scope::Total, Version::W, EPS).unwrap();
    let sum = pressure(&psi, Scope::Sort(0), Version::W, EPS)
        .unwrap()
        .plus(&pressure(&psi, Scope::Sort(1), Version::W, EPS).unwrap(), Part::Full);
    assert!(total.max_abs_diff(&sum, total.defined.as_ref()) > 1e-3 * total.max_abs());
    // Π is additive over sorts.
    let pi_total = momentum_flow(&psi, Scope::Total, Version::K, EPS).unwrap();
    let pi_sum = momentum_flow(&psi, Scope::Sort(0), Version::K, EPS)
        .unwrap()
        .plus(&momentum_flow(&psi, Scope::Sort(1), Version::K, EPS).unwrap(), Part::Full);
    assert!(pi_total.max_abs_diff(&pi_sum, None) <= 1e-12 * pi_total.max_abs());
}

#[test]
fn undefined_nodes_are_flagged() {
    let psi = gaussian_1d(513, 12.0, 1.0, 2.0, 1.0);
    let p = pressure(&psi, Scope::Sort(0), Version::K, EPS).unwrap();
    let defined = p.defined.as_ref().unwrap();
    let rho = mass_density(&psi, Scope::Sort(0)).unwrap();
    let peak = rho.values.iter().cloned().fold(0.0, f64::max);
    for (d, r) in defined.iter().zip(rho.values.iter()) {
        assert_eq!(*d, *r > EPS * peak);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn quantum_parts_scale_with_hbar_squared(hbar in 0.3f64..2.0) {
        let mut psi = gaussian_1d(257, 12.0, 1.0, 0.0, 1.0);
        let base = scalar_quantum_pressure(&psi, 0).unwrap().values;
        let qu0 = split_cl_qu(&psi, Scope::Sort(0), Family::MomentumFlow, Version::K, EPS).unwrap().1;
        psi.spec.hbar = hbar;
        let scaled = scalar_quantum_pressure(&psi, 0).unwrap().values;
        let qu1 = split_cl_qu(&psi, Scope::Sort(0), Family::MomentumFlow, Version::K, EPS).unwrap().1;
        prop_assert!(max_abs_diff(&scaled, &(&base * (hbar * hbar))) <= 1e-14);
        let diff = &qu1.comps[0] - &(&qu0.comps[0] * (hbar * hbar));
        prop_assert!(diff.iter().all(|x| x.abs() <= 1e-13));
    }

    #[test]
    fn halving_hbar_quarters_the_pressure(mass in 0.5f64..3.0) {
        let mut psi = gaussian_1d(257, 12.0, 1.0, 0.0, mass);
        let p1 = pressure(&psi, Scope::Sort(0), Version::W, EPS).unwrap();
        psi.spec.hbar = 0.5;
        let p2 = pressure(&psi, Scope::Sort(0), Version::W, EPS).unwrap();
        let ratio = p2.max_abs() / p1.max_abs();
        prop_assert!((ratio - 0.25).abs() < 1e-12);
    }
}
