use num_complex::Complex64 as C64;

use super::grid::Grid;
use super::spec::{Statistics, SystemSpec};
use super::wave::{sample, WaveField};
use crate::error::{Error, Result};
use crate::stencil::trapz_all;

/// A single-particle wave function of the d physical coordinates.
pub type Orbital<'a> = &'a dyn Fn(&[f64]) -> C64;

/// Norm ratio below which (anti)symmetrization is treated as annihilating
/// the state.
const ZERO_NORM_RATIO: f64 = 1e-24;

/// All permutations of 0..n with their parity signs.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn go(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if rest.is_empty() {
            out.push((prefix.clone(), sign));
            return;
        }
        for k in 0..rest.len() {
            let x = rest.remove(k);
            prefix.push(x);
            // Taking the k-th remaining element costs k transpositions.
            let s = if k % 2 == 0 { sign } else { -sign };
            go(prefix, rest, s, out);
            prefix.pop();
            rest.insert(k, x);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..n).collect(), 1.0, &mut out);
    out
}

/// Product state over sorts, each sort (anti)symmetrized over its own
/// particles according to its statistics, normalized on the grid.
pub fn symmetrize(factors: &[Vec<Orbital>], spec: &SystemSpec, grid: &Grid) -> Result<WaveField> {
    spec.validate()?;
    grid.compatible_with(spec)?;
    if factors.len() != spec.sorts.len() {
        return Err(Error::Config(format!(
            "{} factor lists for {} sorts",
            factors.len(),
            spec.sorts.len()
        )));
    }
    for (s, f) in spec.sorts.iter().zip(factors) {
        if f.len() != s.count {
            return Err(Error::Config(format!(
                "sort `{}` has {} particles but {} factors",
                s.label,
                s.count,
                f.len()
            )));
        }
    }
    let d = spec.spatial_dim;
    let mut perms = Vec::new();
    let mut offsets = Vec::new();
    for (s, sort) in spec.sorts.iter().enumerate() {
        perms.push(match sort.statistics {
            Statistics::Distinguishable => vec![((0..sort.count).collect(), 1.0)],
            Statistics::Boson => permutations(sort.count).into_iter().map(|(p, _)| (p, 1.0)).collect(),
            Statistics::Fermion => permutations(sort.count),
        });
        offsets.push(spec.first_axis(s, 0)?);
    }
    let eval = |q: &[f64], symmetric: bool| -> C64 {
        let mut total = C64::new(1.0, 0.0);
        for (s, f) in factors.iter().enumerate() {
            let base = offsets[s];
            let at = |i: usize| &q[base + i * d..base + (i + 1) * d];
            let sum = if symmetric {
                perms[s]
                    .iter()
                    .map(|(p, sign)| {
                        p.iter().enumerate().fold(C64::new(*sign, 0.0), |acc, (i, &k)| acc * f[k](at(i)))
                    })
                    .sum()
            } else {
                (0..f.len()).fold(C64::new(1.0, 0.0), |acc, i| acc * f[i](at(i)))
            };
            total *= sum;
        }
        total
    };
    let reference = trapz_all(&sample(grid, |q| eval(q, false).norm_sqr()), &grid.spacings());
    let values = sample(grid, |q| eval(q, true));
    let psi = WaveField::new(spec.clone(), grid.clone(), values)?;
    if !(psi.norm_sq() > ZERO_NORM_RATIO * reference) {
        return Err(Error::ZeroNorm);
    }
    psi.normalized()
}
