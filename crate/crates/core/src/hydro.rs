//! One-particle hydrodynamic fields: densities, currents and the mean,
//! per-particle, relative and osmotic velocities.

use ndarray::{ArrayD, Zip};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::configspace::{marginalize, AxisSpec, Grid, SystemSpec, WaveField};
use crate::error::{Error, Result};
use crate::mask;
use crate::stencil::{d1, Edge};

/// Default relative threshold for masked divisions.
pub const DEFAULT_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Sort(usize),
    Total,
}

impl Scope {
    pub fn sorts(&self, spec: &SystemSpec) -> Result<Vec<usize>> {
        match *self {
            Scope::Sort(a) => {
                spec.check_sort(a)?;
                Ok(vec![a])
            }
            Scope::Total => Ok((0..spec.sorts.len()).collect()),
        }
    }

    pub fn label(&self, spec: &SystemSpec) -> String {
        match *self {
            Scope::Sort(a) => spec.sorts.get(a).map_or_else(|| format!("#{a}"), |s| s.label.clone()),
            Scope::Total => "total".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Density,
    Current,
    Velocity,
    Osmotic,
    QuantumPressure,
    Force,
    Divergence,
    Residual,
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub axes: Vec<AxisSpec>,
    pub values: ArrayD<f64>,
    pub scope: Scope,
    pub kind: FieldKind,
}

#[derive(Clone, Debug)]
pub struct VectorField {
    pub axes: Vec<AxisSpec>,
    pub comps: Vec<ArrayD<f64>>,
    pub scope: Scope,
    pub kind: FieldKind,
    /// Where the values are meaningful; `None` means everywhere.
    pub defined: Option<ArrayD<bool>>,
}

impl VectorField {
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn defined_mask(&self) -> ArrayD<bool> {
        self.defined.clone().unwrap_or_else(|| self.comps[0].mapv(|_| true))
    }
}

/// A d-vector per configuration node attached to particle (sort, particle).
#[derive(Clone, Debug)]
pub struct ConfigVectorField {
    pub sort: usize,
    pub particle: usize,
    pub comps: Vec<ArrayD<f64>>,
    pub defined: ArrayD<bool>,
}

/// Physical axes for a scope; the total scope requires every sort to see the
/// same physical grid.
pub fn physical_axes(psi: &WaveField, scope: Scope) -> Result<Vec<AxisSpec>> {
    let sorts = scope.sorts(&psi.spec)?;
    let first = psi.grid.particle_axes(sorts[0], 0)?;
    for &s in &sorts[1..] {
        if psi.grid.particle_axes(s, 0)? != first {
            return Err(Error::Mismatch(
                "total-scope fields need every sort on the same physical grid".into(),
            ));
        }
    }
    Ok(first)
}

/// ∇_i^A Ψ along the d axes of particle (sort, particle).
pub fn grad_psi(psi: &WaveField, sort: usize, particle: usize) -> Result<Vec<ArrayD<C64>>> {
    let k = psi.grid.first_axis(sort, particle)?;
    Ok((0..psi.grid.spatial_dim)
        .map(|c| d1(&psi.values, k + c, psi.grid.axes[k + c].h(), Edge::OneSided))
        .collect())
}

/// A physical-space field copied over the configuration grid by attaching
/// it to the axes starting at `first_axis`.
pub fn spread(phys: &ArrayD<f64>, grid: &Grid, first_axis: usize) -> ArrayD<f64> {
    let shape = grid.shape();
    let mut lifted = vec![1usize; shape.len()];
    lifted[first_axis..first_axis + phys.ndim()].copy_from_slice(phys.shape());
    let v = phys.view().into_shape_with_order(lifted).expect("physical field is contiguous");
    v.broadcast(shape).expect("compatible shapes").to_owned()
}

pub fn total_density(psi: &WaveField) -> ArrayD<f64> {
    psi.values.mapv(|z| z.norm_sqr())
}

/// ρ_m^A = N(A) m_A marg(D) for one sort.
fn sort_density(psi: &WaveField, d: &ArrayD<f64>, sort: usize) -> Result<ArrayD<f64>> {
    let s = &psi.spec.sorts[sort];
    let scale = s.count as f64 * s.mass;
    Ok(marginalize(d, &psi.grid, sort, 0)?.mapv(|x| x * scale))
}

pub fn mass_density(psi: &WaveField, scope: Scope) -> Result<ScalarField> {
    let axes = physical_axes(psi, scope)?;
    let d = total_density(psi);
    let mut values: Option<ArrayD<f64>> = None;
    for s in scope.sorts(&psi.spec)? {
        let r = sort_density(psi, &d, s)?;
        values = Some(match values {
            None => r,
            Some(acc) => acc + &r,
        });
    }
    Ok(ScalarField { axes, values: values.unwrap(), scope, kind: FieldKind::Density })
}

/// ħ N(A) marg(Im[Ψ* ∇_i Ψ], A, i): the sort's current built from particle
/// `particle` as representative.
pub fn mass_current_via(psi: &WaveField, sort: usize, particle: usize) -> Result<Vec<ArrayD<f64>>> {
    let g = grad_psi(psi, sort, particle)?;
    let scale = psi.spec.hbar * psi.spec.sorts[sort].count as f64;
    g.iter()
        .map(|gc| {
            let mut im = ArrayD::<f64>::zeros(psi.values.raw_dim());
            Zip::from(&mut im).and(&psi.values).and(gc).for_each(|o, p, g| *o = (p.conj() * g).im);
            Ok(marginalize(&im, &psi.grid, sort, particle)?.mapv(|x| x * scale))
        })
        .collect()
}

pub fn mass_current(psi: &WaveField, scope: Scope) -> Result<VectorField> {
    let axes = physical_axes(psi, scope)?;
    let mut comps: Option<Vec<ArrayD<f64>>> = None;
    for s in scope.sorts(&psi.spec)? {
        let j = mass_current_via(psi, s, 0)?;
        comps = Some(match comps {
            None => j,
            Some(acc) => acc.into_iter().zip(j).map(|(a, b)| a + &b).collect(),
        });
    }
    Ok(VectorField { axes, comps: comps.unwrap(), scope, kind: FieldKind::Current, defined: None })
}

/// v = j/ρ where ρ > eps·max ρ, zero and undefined elsewhere.
pub fn mean_velocity(rho: &ScalarField, j: &VectorField, eps: f64) -> Result<VectorField> {
    if rho.scope != j.scope || rho.axes != j.axes {
        return Err(Error::Mismatch("density and current differ in scope or grid".into()));
    }
    let defined = mask::above(&rho.values, eps);
    let comps = j
        .comps
        .iter()
        .map(|jc| {
            let mut v = ArrayD::<f64>::zeros(jc.raw_dim());
            Zip::from(&mut v).and(jc).and(&rho.values).and(&defined).for_each(|v, &j, &r, &k| {
                if k {
                    *v = j / r;
                }
            });
            v
        })
        .collect();
    Ok(VectorField {
        axes: rho.axes.clone(),
        comps,
        scope: rho.scope,
        kind: FieldKind::Velocity,
        defined: Some(defined),
    })
}

/// Per-node `f(Ψ*∂Ψ)/D` on the eps-mask of D.
fn ratio_field(
    psi: &WaveField,
    sort: usize,
    particle: usize,
    eps: f64,
    f: impl Fn(C64, f64) -> f64,
) -> Result<ConfigVectorField> {
    let g = grad_psi(psi, sort, particle)?;
    let d = total_density(psi);
    let defined = mask::above(&d, eps);
    let comps = g
        .iter()
        .map(|gc| {
            let mut out = ArrayD::<f64>::zeros(d.raw_dim());
            Zip::from(&mut out).and(&psi.values).and(gc).and(&d).and(&defined).for_each(
                |o, p, g, &dd, &k| {
                    if k {
                        *o = f(p.conj() * g, dd);
                    }
                },
            );
            out
        })
        .collect();
    Ok(ConfigVectorField { sort, particle, comps, defined })
}

/// w_i^A = ħ Im[Ψ*∇_i Ψ]/(m_A D).
pub fn particle_velocity(psi: &WaveField, sort: usize, particle: usize, eps: f64) -> Result<ConfigVectorField> {
    psi.spec.first_axis(sort, particle)?;
    let c = psi.spec.hbar / psi.spec.sorts[sort].mass;
    ratio_field(psi, sort, particle, eps, |z, d| c * z.im / d)
}

/// d_i^A = −(ħ/2m_A) ∇_i D / D = −(ħ/m_A) Re[Ψ*∇_i Ψ]/D.
pub fn osmotic_velocity(psi: &WaveField, sort: usize, particle: usize, eps: f64) -> Result<ConfigVectorField> {
    psi.spec.first_axis(sort, particle)?;
    let c = -psi.spec.hbar / psi.spec.sorts[sort].mass;
    ratio_field(psi, sort, particle, eps, |z, d| c * z.re / d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    /// u: relative to the sort's own mean velocity.
    PerSort,
    /// 𝔲: relative to the mean velocity of all particles.
    Total,
}

/// u_i^A = w_i^A − v(q_i^A), with v looked up at the node the particle sits
/// on.
pub fn relative_velocity(
    psi: &WaveField,
    sort: usize,
    particle: usize,
    reference: Reference,
    eps: f64,
) -> Result<ConfigVectorField> {
    let w = particle_velocity(psi, sort, particle, eps)?;
    let scope = match reference {
        Reference::PerSort => Scope::Sort(sort),
        Reference::Total => Scope::Total,
    };
    let v = mean_velocity(&mass_density(psi, scope)?, &mass_current(psi, scope)?, eps)?;
    let k = psi.grid.first_axis(sort, particle)?;
    let vdef = v.defined.as_ref().expect("mean velocity carries a mask").mapv(|b| b as u8 as f64);
    let vmask = spread(&vdef, &psi.grid, k);
    let mut defined = w.defined.clone();
    Zip::from(&mut defined).and(&vmask).for_each(|d, &m| *d &= m > 0.5);
    let comps = w
        .comps
        .iter()
        .zip(&v.comps)
        .map(|(wc, vc)| {
            let vs = spread(vc, &psi.grid, k);
            let mut out = ArrayD::<f64>::zeros(wc.raw_dim());
            Zip::from(&mut out).and(wc).and(&vs).and(&defined).for_each(|o, &w, &v, &k| {
                if k {
                    *o = w - v;
                }
            });
            out
        })
        .collect();
    Ok(ConfigVectorField { sort, particle, comps, defined })
}

/// Largest curl component of a configuration vector field over the field's
/// mask eroded by the stencil reach; returns 0 for d = 1.
pub fn max_curl(field: &ConfigVectorField, grid: &Grid) -> Result<f64> {
    let k = grid.first_axis(field.sort, field.particle)?;
    let d = field.comps.len();
    let m = mask::and(&mask::erode(&field.defined, 2), &mask::band(&grid.shape(), 2));
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in a + 1..d {
            let db_a = d1(&field.comps[a], k + b, grid.axes[k + b].h(), Edge::OneSided);
            let da_b = d1(&field.comps[b], k + a, grid.axes[k + a].h(), Edge::OneSided);
            worst = worst.max(mask::max_abs_on(&(da_b - db_a), &m));
        }
    }
    Ok(worst)
}

/// ⟨p̂⟩ of particle (sort, particle): ħ ∫ Im[Ψ*∇Ψ] dQ per component.
pub fn momentum_expectation(psi: &WaveField, sort: usize, particle: usize) -> Result<Vec<f64>> {
    let spacings = psi.grid.spacings();
    let k = psi.grid.first_axis(sort, particle)?;
    Ok((k..k + psi.grid.spatial_dim)
        .map(|ax| crate::stencil::d1_wide(&psi.values, ax, spacings[ax]))
        .map(|gc| {
            let mut im = ArrayD::<f64>::zeros(psi.values.raw_dim());
            Zip::from(&mut im).and(&psi.values).and(&gc).for_each(|o, p, g| *o = (p.conj() * g).im);
            psi.spec.hbar * crate::stencil::trapz_all(&im, &spacings)
        })
        .collect())
}
