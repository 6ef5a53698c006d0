use ndarray::{ArrayD, Zip};
use num_complex::Complex64 as C64;

use super::grid::Grid;
use super::spec::SystemSpec;
use super::wave::{sample, WaveField};
use crate::error::Result;
use crate::stencil::{d2, Edge};

/// (sort, first axis) for every particle in axis order.
pub(crate) fn particles(spec: &SystemSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (s, sort) in spec.sorts.iter().enumerate() {
        for i in 0..sort.count {
            out.push((s, spec.first_axis(s, i).expect("valid particle")));
        }
    }
    out
}

pub(crate) fn dist_sq(q: &[f64], a: usize, b: usize, d: usize) -> f64 {
    (0..d).map(|c| (q[a + c] - q[b + c]).powi(2)).sum()
}

/// Total potential energy at every configuration node: each unordered pair
/// once (the ½ of the double sum over both orderings) plus the trap.
pub fn potential_energy(spec: &SystemSpec, grid: &Grid) -> ArrayD<f64> {
    let parts = particles(spec);
    let d = spec.spatial_dim;
    let pot = &spec.potential;
    let trap = spec.trap;
    sample(grid, |q| {
        let mut v = 0.0;
        if !pot.is_none() {
            for (i, &(sa, ka)) in parts.iter().enumerate() {
                for &(sb, kb) in &parts[i + 1..] {
                    v += pot.value(sa, sb, dist_sq(q, ka, kb, d));
                }
            }
        }
        if trap != 0.0 {
            v += 0.5 * trap * q.iter().map(|x| x * x).sum::<f64>();
        }
        v
    })
}

/// ĤΨ with a zero-extended fourth-order Laplacian per particle coordinate.
pub fn apply_hamiltonian(psi: &WaveField) -> Result<WaveField> {
    let spec = &psi.spec;
    psi.grid.compatible_with(spec)?;
    let mut out = psi.values.mapv(|_| C64::new(0.0, 0.0));
    for (k, (axis, owner)) in psi.grid.axes.iter().zip(&psi.grid.owners).enumerate() {
        let m = spec.sorts[owner.sort].mass;
        let c = -spec.hbar * spec.hbar / (2.0 * m);
        let lap = d2(&psi.values, k, axis.h(), Edge::ZeroExtended);
        Zip::from(&mut out).and(&lap).for_each(|o, &l| *o += l * c);
    }
    if !spec.potential.is_none() || spec.trap != 0.0 {
        let v = potential_energy(spec, &psi.grid);
        Zip::from(&mut out).and(&v).and(&psi.values).for_each(|o, &v, &p| *o += p * v);
    }
    Ok(psi.with_values(out))
}

/// ∂Ψ/∂t = ĤΨ/(iħ), evaluated at the field's own time.
pub fn time_derivative(psi: &WaveField) -> Result<WaveField> {
    let mut h = apply_hamiltonian(psi)?;
    let f = C64::new(0.0, -1.0 / psi.spec.hbar);
    h.values.mapv_inplace(|z| z * f);
    Ok(h)
}
