mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::*;
use mpqhd::configspace::{AxisSpec, WaveField};
use mpqhd::cylindrical::{
    azimuthal_symmetry_check, cyl_comparison, cyl_gradient, cyl_laplacian, cyl_pressure_parts, cyl_tensor_divergence,
    cyl_to_cartesian, rotation_matrix, to_cylindrical_tensor, to_cylindrical_vector, CylGrid, CylindricalTensorField,
    Mat3, HalfPlane, SYMMETRY_LIMIT,
};
use mpqhd::hydro::{FieldKind, Scope, VectorField, DEFAULT_EPS};
use mpqhd::tensors::{Family, Part, TensorField, Version};
use mpqhd::{Error, C64};
use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;

const EPS: f64 = DEFAULT_EPS;

fn off_axis_grid(n_phi: usize) -> CylGrid {
    CylGrid { rho: AxisSpec::new(0.5, 3.0, 201), n_phi, z: Some(AxisSpec::new(-1.0, 1.0, 41)) }
}

/// max |f − g| over nodes at least four spacings from either ρ edge.
fn gap(f: &ArrayD<f64>, g: &ArrayD<f64>) -> f64 {
    f.indexed_iter().filter(|(i, _)| i[0] >= 4 && i[0] + 4 < f.shape()[0]).map(|(i, v)| (v - g[&i]).abs()).fold(0.0, f64::max)
}

fn mat_close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
    (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).abs() <= tol))
}

#[test]
fn rotation_at_zero_and_quarter_turn() {
    let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    assert_eq!(rotation_matrix(0.0).0, id);
    let q = rotation_matrix(FRAC_PI_2).0;
    assert!(mat_close(&q, &[[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], 1e-16));
    // Position on the y axis maps to (ρ, 0, z).
    let r = rotation_matrix(FRAC_PI_2).apply([0.0, 2.0, 1.0]);
    assert!((r[0] - 2.0).abs() < 1e-15 && r[1].abs() < 1e-15 && r[2] == 1.0);
}

#[test]
fn position_field_becomes_radial() {
    let axes = vec![AxisSpec::new(-2.0, 2.0, 9); 3];
    let shape = [9usize, 9, 9];
    let comps = (0..3)
        .map(|c| ArrayD::from_shape_fn(IxDyn(&shape), |i| axes[c].coord(i[c])))
        .collect::<Vec<_>>();
    let v = VectorField { axes: axes.clone(), comps, scope: Scope::Sort(0), kind: FieldKind::Velocity, defined: None };
    let cyl = to_cylindrical_vector(&v).unwrap();
    let defined = cyl.defined.as_ref().unwrap();
    for (i, &ok) in defined.indexed_iter() {
        let (x, y, z) = (axes[0].coord(i[0]), axes[1].coord(i[1]), axes[2].coord(i[2]));
        assert_eq!(ok, x != 0.0 || y != 0.0);
        if ok {
            assert!((cyl.comps[0][&i] - x.hypot(y)).abs() < 1e-14);
            assert!(cyl.comps[1][&i].abs() < 1e-14);
            assert_eq!(cyl.comps[2][&i], z);
        }
    }
}

#[test]
fn isotropic_tensor_is_unchanged() {
    let axes = vec![AxisSpec::new(-1.0, 1.0, 8); 3];
    let p = ArrayD::from_shape_fn(IxDyn(&[8, 8, 8]), |i| 1.0 + (i[0] + 2 * i[1] + 3 * i[2]) as f64);
    let comps = (0..9).map(|k| if k % 4 == 0 { p.clone() } else { ArrayD::zeros(p.raw_dim()) }).collect();
    let t = TensorField {
        axes,
        dim: 3,
        comps,
        scope: Scope::Sort(0),
        version: Version::W,
        family: Family::Pressure,
        part: Part::Full,
        defined: None,
    };
    let c = to_cylindrical_tensor(&t).unwrap();
    assert!(c.max_abs_diff(&t, None) < 1e-13);
}

#[test]
fn gradient_and_laplacian_of_analytic_fields() {
    let g = off_axis_grid(64);
    let rho2 = g.from_fn(|r, _, _| r * r);
    let grad = cyl_gradient(&rho2, &g);
    assert!(gap(&grad[0], &g.from_fn(|r, _, _| 2.0 * r)) < 1e-10);
    assert!(grad[1].iter().chain(grad[2].iter()).all(|x| x.abs() < 1e-10));
    assert!(gap(&cyl_laplacian(&rho2, &g), &g.from_fn(|_, _, _| 4.0)) < 1e-8);

    let s = g.from_fn(|_, p, _| p.sin());
    let gs = cyl_gradient(&s, &g);
    assert!(gap(&gs[1], &g.from_fn(|r, p, _| p.cos() / r)) < 1e-5);

    let ln = g.from_fn(|r, _, _| r.ln());
    assert!(gap(&cyl_laplacian(&ln, &g), &g.zeros()) < 1e-6);
    // x² − y² = ρ² cos 2φ is harmonic.
    let quad = g.from_fn(|r, p, z| r * r * (2.0 * p).cos() + z);
    assert!(gap(&cyl_laplacian(&quad, &g), &g.zeros()) < 1e-4);
}

#[test]
fn tensor_divergence_of_analytic_fields() {
    let g = off_axis_grid(32);
    let c = CylindricalTensorField::from_fn(&g, |_, _, _| [[2.5, 0.0, 0.0], [0.0, 2.5, 0.0], [0.0, 0.0, 2.5]]);
    assert!(c.symmetric);
    for comp in cyl_tensor_divergence(&c) {
        assert!(comp.iter().all(|x| x.abs() < 1e-12));
    }
    // P(ρ, z) I: divergence is ∇P = (P_ρ, 0, P_z).
    let pf = |r: f64, z: f64| (-(r * r) / 2.0 - z * z).exp();
    let iso = CylindricalTensorField::from_fn(&g, |r, _, z| {
        let p = pf(r, z);
        [[p, 0.0, 0.0], [0.0, p, 0.0], [0.0, 0.0, p]]
    });
    let div = cyl_tensor_divergence(&iso);
    assert!(gap(&div[0], &g.from_fn(|r, _, z| -r * pf(r, z))) < 1e-6);
    assert!(gap(&div[1], &g.zeros()) < 1e-12);
    assert!(gap(&div[2], &g.from_fn(|r, _, z| -2.0 * z * pf(r, z))) < 1e-4);
    // Hoop stress: T_ρρ = ρ², T_φφ = 0 gives (∇·T)_ρ = 2ρ + ρ.
    let hoop = CylindricalTensorField::from_fn(&g, |r, _, _| [[r * r, 0.0, 0.0], [0.0; 3], [0.0; 3]]);
    assert!(gap(&cyl_tensor_divergence(&hoop)[0], &g.from_fn(|r, _, _| 3.0 * r)) < 1e-9);
}

#[test]
fn back_to_cartesian_undoes_the_rotation() {
    let g = off_axis_grid(16);
    let v = [g.from_fn(|r, _, _| r), g.zeros(), g.from_fn(|_, _, z| z)];
    let cart = cyl_to_cartesian(&v, &g);
    let x = g.from_fn(|r, p, _| r * p.cos());
    let y = g.from_fn(|r, p, _| r * p.sin());
    assert!(max_abs_diff(&cart[0], &x) < 1e-14 && max_abs_diff(&cart[1], &y) < 1e-14);
    assert_eq!(cart[2], v[2]);
}

fn isotropic_gaussian(n: usize, sigma: f64) -> WaveField {
    let spec = single(3, 1.0);
    let g = grid(&spec, AxisSpec::new(-7.0, 7.0, n));
    WaveField::from_fn(spec, g, |q| {
        C64::new((-(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]) / (4.0 * sigma * sigma)).exp(), 0.0)
    })
    .unwrap()
    .normalized()
    .unwrap()
}

#[test]
fn isotropic_gaussian_hoop_element() {
    // p^{K,2}_φφ = −(ħ²/4m)(1/ρ)∂M/∂ρ = N(ħ²/4mσ²) D.
    let sigma = 1.0;
    let psi = isotropic_gaussian(57, sigma);
    let parts = cyl_pressure_parts(&psi, 0, EPS).unwrap();
    let g = &parts.half.grid;
    let norm = (2.0 * PI * sigma * sigma).powf(-1.5);
    let expected = g.from_fn(|r, _, z| norm * (-(r * r + z * z) / (2.0 * sigma * sigma)).exp() / (4.0 * sigma * sigma));
    let got = parts.part2_k.at(1, 1);
    let worst = got.iter().zip(expected.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = expected.iter().fold(0.0f64, |m, x| m.max(*x));
    assert!(worst < 2e-3 * scale, "{worst} vs {scale}");
    assert!(parts.symmetry.passed);
}

#[test]
fn off_axis_state_is_refused() {
    let spec = single(3, 1.0);
    let g = grid(&spec, AxisSpec::new(-7.0, 7.0, 33));
    let (off, on) = (packet(0.7, 1.0, 0.0), packet(0.0, 1.0, 0.0));
    let psi = WaveField::from_fn(spec, g, |q| off(q[0]) * on(q[1]) * on(q[2]))
        .unwrap()
        .normalized()
        .unwrap();
    let report = azimuthal_symmetry_check(&psi).unwrap();
    assert!(!report.passed && report.worst_ratio() > SYMMETRY_LIMIT);
    assert!(matches!(cyl_pressure_parts(&psi, 0, EPS), Err(Error::SymmetryBroken { .. })));
    assert!(azimuthal_symmetry_check(&isotropic_gaussian(33, 1.0)).unwrap().passed);
}

#[test]
fn half_plane_needs_centered_odd_axes() {
    assert!(HalfPlane::new(&[AxisSpec::new(-7.0, 7.0, 32); 3]).is_err());
    assert!(HalfPlane::new(&[AxisSpec::new(-6.0, 7.0, 33); 3]).is_err());
    let hp = HalfPlane::new(&[AxisSpec::new(-7.0, 7.0, 33); 3]).unwrap();
    assert_eq!(hp.grid.rho.n, 17);
    assert_eq!(hp.grid.rho.min, 0.0);
}

#[test]
fn ring_divergences_agree_across_coordinates() {
    let coarse = cyl_comparison(&ring_3d(33, 7.0), 0, EPS).unwrap();
    let fine = cyl_comparison(&ring_3d(65, 7.0), 0, EPS).unwrap();
    for c in [&coarse, &fine] {
        assert!(c.e_phi_ok(), "e_phi {} {}", c.e_phi_k, c.e_phi_w);
        assert_eq!(c.off_diagonal_phi, 0.0);
        assert!(c.asymmetry <= 1e-12 * c.scale);
    }
    let order = |a: f64, b: f64| (a / b).ln() / (coarse.h / fine.h).ln();
    assert!(order(coarse.cart_gap_k_l2, fine.cart_gap_k_l2) > 2.0);
    assert!(order(coarse.cart_gap_w_l2, fine.cart_gap_w_l2) > 2.0);
    assert!(fine.cart_gap_w_linf < 0.05 * fine.scale);
}

proptest! {
    #[test]
    fn rotations_are_proper_orthogonal(phi in -10.0f64..10.0) {
        let l = rotation_matrix(phi);
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        prop_assert!(mat_close(&l.times(&l.transpose()), &id, 1e-15));
        prop_assert!((l.det() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conjugation_matches_brute_force(phi in -4.0f64..4.0, t in prop::array::uniform9(-5.0f64..5.0)) {
        let m: Mat3 = [[t[0], t[1], t[2]], [t[3], t[4], t[5]], [t[6], t[7], t[8]]];
        let l = rotation_matrix(phi).0;
        let mut brute = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        brute[a][b] += l[a][i] * m[i][j] * l[b][j];
                    }
                }
            }
        }
        prop_assert!(mat_close(&rotation_matrix(phi).conjugate(&m), &brute, 1e-12));
    }
}
