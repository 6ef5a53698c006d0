//! Kuzmenkov and Wyatt momentum-flow and pressure tensors, their
//! classical/quantum and first/second-order splits, and the scalar quantum
//! pressure.

use ndarray::{ArrayD, Zip};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::configspace::{marginalize, AxisSpec, WaveField};
use crate::error::{Error, Result};
use crate::hydro::{
    grad_psi, mass_current, mass_density, mean_velocity, physical_axes, spread, total_density, FieldKind,
    ScalarField, Scope, VectorField,
};
use crate::mask;
use crate::stencil::{d1, d2, Edge};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Version {
    K,
    W,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    MomentumFlow,
    Pressure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Full,
    Classical,
    Quantum,
    Part1,
    Part2,
}

/// Dense d×d real tensor per physical node, row-major components.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub axes: Vec<AxisSpec>,
    pub dim: usize,
    pub comps: Vec<ArrayD<f64>>,
    pub scope: Scope,
    pub version: Version,
    pub family: Family,
    pub part: Part,
    /// Physical nodes where the scope's density clears the eps threshold.
    pub defined: Option<ArrayD<bool>>,
}

impl TensorField {
    pub fn at(&self, a: usize, b: usize) -> &ArrayD<f64> {
        &self.comps[a * self.dim + b]
    }

    pub fn at_mut(&mut self, a: usize, b: usize) -> &mut ArrayD<f64> {
        &mut self.comps[a * self.dim + b]
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// max |self − other| over all entries, restricted to `on` if given.
    pub fn max_abs_diff(&self, other: &TensorField, on: Option<&ArrayD<bool>>) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            let diff = a - b;
            worst = worst.max(match on {
                Some(m) => mask::max_abs_on(&diff, m),
                None => diff.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            });
        }
        worst
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in a + 1..self.dim {
                let diff = self.at(a, b) - self.at(b, a);
                worst = worst.max(diff.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            }
        }
        worst
    }

    fn relabel(&self, comps: Vec<ArrayD<f64>>, part: Part) -> TensorField {
        TensorField { comps, part, ..self.clone_meta() }
    }

    fn clone_meta(&self) -> TensorField {
        TensorField {
            axes: self.axes.clone(),
            dim: self.dim,
            comps: Vec::new(),
            scope: self.scope,
            version: self.version,
            family: self.family,
            part: self.part,
            defined: self.defined.clone(),
        }
    }

    pub fn plus(&self, other: &TensorField, part: Part) -> TensorField {
        self.relabel(self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(), part)
    }

    pub fn minus(&self, other: &TensorField, part: Part) -> TensorField {
        self.relabel(self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect(), part)
    }
}

/// Marginals shared by every version and part of one family and scope.
#[derive(Clone, Debug)]
pub struct TensorSet {
    pub axes: Vec<AxisSpec>,
    pub dim: usize,
    pub scope: Scope,
    pub family: Family,
    /// N m marg(D a⊗a), a = w (Π) or the relative velocity (p).
    pub classical: Vec<ArrayD<f64>>,
    /// N m marg(D d⊗d).
    pub osmotic: Vec<ArrayD<f64>>,
    /// N m marg(D (a⊗a + d⊗d)), integrated as one integrand.
    pub part1: Vec<ArrayD<f64>>,
    /// −N (ħ²/4m) ∂α∂β marg(D).
    pub second_k: Vec<ArrayD<f64>>,
    /// Σ over scope sorts of the scalar quantum pressure.
    pub pressure: ArrayD<f64>,
    pub defined: ArrayD<bool>,
}

struct SortTerms {
    classical: Vec<ArrayD<f64>>,
    osmotic: Vec<ArrayD<f64>>,
    part1: Vec<ArrayD<f64>>,
    second_k: Vec<ArrayD<f64>>,
    pressure: ArrayD<f64>,
}

fn add_into(acc: &mut [ArrayD<f64>], x: &[ArrayD<f64>]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// −N(A)(ħ²/4m_A) ∂α∂β M for the marginal density M on the physical grid.
///
/// For d ≥ 2 every element, diagonal included, is a composition of
/// first-derivative stencils. Stencils along different axes commute exactly,
/// so the discrete divergences of the K and W second-order parts agree to
/// rounding, as their continuous counterparts do. With d = 1 there is nothing
/// to commute with and the compact second-derivative stencil is more accurate.
pub(crate) fn second_order_k(m_marg: &ArrayD<f64>, axes: &[AxisSpec], coeff: f64) -> Vec<ArrayD<f64>> {
    let d = axes.len();
    if d == 1 {
        return vec![d2(m_marg, 0, axes[0].h(), Edge::OneSided).mapv(|x| -coeff * x)];
    }
    let mut out = vec![ArrayD::<f64>::zeros(m_marg.raw_dim()); d * d];
    for a in 0..d {
        let da = d1(m_marg, a, axes[a].h(), Edge::OneSided);
        for b in a..d {
            let t = d1(&da, b, axes[b].h(), Edge::OneSided).mapv(|x| -coeff * x);
            out[b * d + a] = t.clone();
            out[a * d + b] = t;
        }
    }
    out
}

fn sort_terms(psi: &WaveField, sort: usize, shift: Option<&[ArrayD<f64>]>) -> Result<SortTerms> {
    let spec = &psi.spec;
    let s = &spec.sorts[sort];
    let (m, n, hbar) = (s.mass, s.count as f64, spec.hbar);
    let d = spec.spatial_dim;
    let k = psi.grid.first_axis(sort, 0)?;
    let axes = psi.grid.particle_axes(sort, 0)?;
    let grads = grad_psi(psi, sort, 0)?;
    let values = psi.values.as_standard_layout();
    let p = values.as_slice().expect("standard layout");
    let g: Vec<_> = grads.iter().map(|x| x.as_standard_layout().into_owned()).collect();
    let g: Vec<&[C64]> = g.iter().map(|x| x.as_slice().expect("standard layout")).collect();
    let shifts: Vec<ArrayD<f64>> = match shift {
        Some(v) => v.iter().map(|c| spread(c, &psi.grid, k)).collect(),
        None => Vec::new(),
    };
    let sh: Vec<&[f64]> = shifts.iter().map(|x| x.as_slice().expect("standard layout")).collect();

    let npts = p.len();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect();
    let mut cl = vec![vec![0.0; npts]; pairs.len()];
    let mut os = vec![vec![0.0; npts]; pairs.len()];
    let mut p1 = vec![vec![0.0; npts]; pairs.len()];
    for i in 0..npts {
        let dens = p[i].norm_sqr();
        // At exact zeros every integrand vanishes with D.
        if dens == 0.0 {
            continue;
        }
        let mut a = [0.0; 3];
        let mut o = [0.0; 3];
        for c in 0..d {
            let z = p[i].conj() * g[c][i];
            a[c] = hbar * z.im / (m * dens) - sh.get(c).map_or(0.0, |s| s[i]);
            o[c] = -hbar * z.re / (m * dens);
        }
        let w = n * m * dens;
        for (t, &(x, y)) in pairs.iter().enumerate() {
            cl[t][i] = w * a[x] * a[y];
            os[t][i] = w * o[x] * o[y];
            p1[t][i] = w * (a[x] * a[y] + o[x] * o[y]);
        }
    }
    let shape = psi.values.raw_dim();
    let marg_all = |src: Vec<Vec<f64>>| -> Result<Vec<ArrayD<f64>>> {
        let mut full = vec![ArrayD::<f64>::zeros(ndarray::IxDyn(&[0])); d * d];
        for (t, v) in src.into_iter().enumerate() {
            let arr = ArrayD::from_shape_vec(shape.clone(), v).expect("shape");
            let mg = marginalize(&arr, &psi.grid, sort, 0)?;
            let (x, y) = pairs[t];
            full[y * d + x] = mg.clone();
            full[x * d + y] = mg;
        }
        Ok(full)
    };
    let classical = marg_all(cl)?;
    let osmotic = marg_all(os)?;
    let part1 = marg_all(p1)?;
    let m_marg = marginalize(&total_density(psi), &psi.grid, sort, 0)?;
    let second_k = second_order_k(&m_marg, &axes, n * hbar * hbar / (4.0 * m));
    let mut pressure = ArrayD::<f64>::zeros(m_marg.raw_dim());
    for a in 0..d {
        pressure += &second_k[a * d + a];
    }
    Ok(SortTerms { classical, osmotic, part1, second_k, pressure })
}

/// P_A = −N(A)(ħ²/4m_A) marg(ΔD).
pub fn scalar_quantum_pressure(psi: &WaveField, sort: usize) -> Result<ScalarField> {
    let axes = psi.grid.particle_axes(sort, 0)?;
    let s = &psi.spec.sorts[sort];
    let coeff = s.count as f64 * psi.spec.hbar * psi.spec.hbar / (4.0 * s.mass);
    let m_marg = marginalize(&total_density(psi), &psi.grid, sort, 0)?;
    let d = axes.len();
    let second = second_order_k(&m_marg, &axes, coeff);
    let mut values = ArrayD::<f64>::zeros(m_marg.raw_dim());
    for a in 0..d {
        values += &second[a * d + a];
    }
    Ok(ScalarField {
        axes,
        values,
        scope: Scope::Sort(sort),
        kind: FieldKind::QuantumPressure,
    })
}

/// Mean velocity of a scope with the eps convention.
pub fn scope_velocity(psi: &WaveField, scope: Scope, eps: f64) -> Result<VectorField> {
    mean_velocity(&mass_density(psi, scope)?, &mass_current(psi, scope)?, eps)
}

/// All marginals of one family; pressure-family velocities are taken
/// relative to the scope's mean velocity (per sort, or total for 𝔲).
pub fn tensor_set(psi: &WaveField, scope: Scope, family: Family, eps: f64) -> Result<TensorSet> {
    let axes = physical_axes(psi, scope)?;
    let sorts = scope.sorts(&psi.spec)?;
    let rho = mass_density(psi, scope)?;
    let defined = mask::above(&rho.values, eps);
    let v = match family {
        Family::Pressure => Some(scope_velocity(psi, scope, eps)?),
        Family::MomentumFlow => None,
    };
    let mut acc: Option<SortTerms> = None;
    for s in sorts {
        let t = sort_terms(psi, s, v.as_ref().map(|v| v.comps.as_slice()))?;
        match acc.as_mut() {
            None => acc = Some(t),
            Some(a) => {
                add_into(&mut a.classical, &t.classical);
                add_into(&mut a.osmotic, &t.osmotic);
                add_into(&mut a.part1, &t.part1);
                add_into(&mut a.second_k, &t.second_k);
                a.pressure += &t.pressure;
            }
        }
    }
    let t = acc.ok_or_else(|| Error::Config("empty scope".into()))?;
    Ok(TensorSet {
        dim: axes.len(),
        axes,
        scope,
        family,
        classical: t.classical,
        osmotic: t.osmotic,
        part1: t.part1,
        second_k: t.second_k,
        pressure: t.pressure,
        defined,
    })
}

impl TensorSet {
    fn isotropic(&self) -> Vec<ArrayD<f64>> {
        let d = self.dim;
        (0..d * d)
            .map(|t| if t / d == t % d { self.pressure.clone() } else { ArrayD::zeros(self.pressure.raw_dim()) })
            .collect()
    }

    fn second(&self, version: Version) -> Vec<ArrayD<f64>> {
        match version {
            Version::K => self.second_k.clone(),
            Version::W => self.isotropic(),
        }
    }

    pub fn get(&self, version: Version, part: Part) -> TensorField {
        let sum = |a: &[ArrayD<f64>], b: Vec<ArrayD<f64>>| -> Vec<ArrayD<f64>> {
            a.iter().zip(b).map(|(x, y)| x + &y).collect()
        };
        let comps = match part {
            Part::Full => sum(&self.part1, self.second(version)),
            Part::Classical => self.classical.clone(),
            Part::Quantum => sum(&self.osmotic, self.second(version)),
            Part::Part1 => self.part1.clone(),
            Part::Part2 => self.second(version),
        };
        TensorField {
            axes: self.axes.clone(),
            dim: self.dim,
            comps,
            scope: self.scope,
            version,
            family: self.family,
            part,
            defined: Some(self.defined.clone()),
        }
    }
}

pub fn momentum_flow(psi: &WaveField, scope: Scope, version: Version, eps: f64) -> Result<TensorField> {
    Ok(tensor_set(psi, scope, Family::MomentumFlow, eps)?.get(version, Part::Full))
}

pub fn pressure(psi: &WaveField, scope: Scope, version: Version, eps: f64) -> Result<TensorField> {
    Ok(tensor_set(psi, scope, Family::Pressure, eps)?.get(version, Part::Full))
}

/// (classical, quantum).
pub fn split_cl_qu(
    psi: &WaveField,
    scope: Scope,
    family: Family,
    version: Version,
    eps: f64,
) -> Result<(TensorField, TensorField)> {
    let set = tensor_set(psi, scope, family, eps)?;
    Ok((set.get(version, Part::Classical), set.get(version, Part::Quantum)))
}

/// (part1, part2): first- and second-order derivative content.
pub fn split_parts_1_2(
    psi: &WaveField,
    scope: Scope,
    family: Family,
    version: Version,
    eps: f64,
) -> Result<(TensorField, TensorField)> {
    let set = tensor_set(psi, scope, family, eps)?;
    Ok((set.get(version, Part::Part1), set.get(version, Part::Part2)))
}

/// ρ_m v⊗v of a scope, the advective dyad linking Π and p.
pub fn advection_dyad(psi: &WaveField, scope: Scope, version: Version, eps: f64) -> Result<TensorField> {
    let rho = mass_density(psi, scope)?;
    let v = mean_velocity(&rho, &mass_current(psi, scope)?, eps)?;
    let d = v.comps.len();
    let mut comps = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let mut t = ArrayD::<f64>::zeros(rho.values.raw_dim());
            Zip::from(&mut t).and(&rho.values).and(&v.comps[a]).and(&v.comps[b]).for_each(|t, &r, &x, &y| {
                *t = r * x * y
            });
            comps.push(t);
        }
    }
    Ok(TensorField {
        axes: rho.axes,
        dim: d,
        comps,
        scope,
        version,
        family: Family::MomentumFlow,
        part: Part::Full,
        defined: v.defined,
    })
}
