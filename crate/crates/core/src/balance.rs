//! Force densities, the Cartesian tensor divergence and the residuals of the
//! continuity (MPCE), Ehrenfest (MPEEM) and quantum Cauchy (MPQCE) balance
//! laws, plus the check that the two pressure gauges share one divergence.

use std::collections::BTreeMap;

use ndarray::{ArrayD, Zip};
use serde::Serialize;

use crate::configspace::{dist_sq, marginalize, sample, time_derivative, AxisSpec, WaveField};
use crate::error::Result;
use crate::hydro::{
    grad_psi, mass_current, mass_density, mean_velocity, physical_axes, total_density, FieldKind, ScalarField,
    Scope, VectorField,
};
use crate::mask;
use crate::stencil::{d1, Edge};
use crate::tensors::{tensor_set, Family, Part, TensorField, Version};

/// Nodes excluded next to every face of the physical grid.
pub const BOUNDARY_BAND: usize = 4;
/// Reach of a single first-derivative stencil.
pub const STENCIL_REACH: usize = 2;
/// Pass threshold for L∞ residuals relative to the law's scale.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    Mpce,
    Mpeem,
    Mpqce,
    GaugeDivergence,
    CurlW,
    CurlD,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub law: Law,
    pub scope: String,
    pub version: Option<Version>,
    pub h: f64,
    pub l2: f64,
    pub linf: f64,
    /// Magnitude of the largest term entering the law, on the same mask.
    pub scale: f64,
    pub order: Option<f64>,
    pub tolerance: f64,
    pub min_order: Option<f64>,
    pub verdict: Verdict,
    pub notes: BTreeMap<String, f64>,
}

impl ResidualReport {
    fn new(law: Law, scope: String, version: Option<Version>, h: f64, l2: f64, linf: f64, scale: f64) -> Self {
        let mut r = ResidualReport {
            law,
            scope,
            version,
            h,
            l2,
            linf,
            scale,
            order: None,
            tolerance: DEFAULT_TOLERANCE,
            min_order: None,
            verdict: Verdict::Pass,
            notes: BTreeMap::new(),
        };
        r.judge();
        r
    }

    /// Re-evaluates the verdict: L∞ within tolerance·scale and, when an
    /// order has been measured, the order at least `min_order`.
    pub fn judge(&mut self) {
        let within = self.linf <= self.tolerance * self.scale;
        let fast = match (self.order, self.min_order) {
            (Some(o), Some(m)) => o >= m,
            _ => true,
        };
        self.verdict = Verdict::from_bool(within && fast);
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self.judge();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Observed order between two grids from their L2 norms.
pub fn observed_order(coarse: &ResidualReport, fine: &ResidualReport) -> f64 {
    (coarse.l2 / fine.l2).ln() / (coarse.h / fine.h).ln()
}

/// Fills `order` on every report after the first (reports ordered coarse to
/// fine) and re-judges them against `min_order`.
/// Relative residual treated as exact.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

pub fn attach_orders(reports: &mut [ResidualReport], min_order: f64) {
    for k in 1..reports.len() {
        // Residuals at rounding level carry no order information.
        if reports[k - 1..=k].iter().any(|r| r.linf <= ROUNDOFF_FLOOR * r.scale || r.scale == 0.0) {
            continue;
        }
        let o = observed_order(&reports[k - 1], &reports[k]);
        reports[k].order = Some(o);
        reports[k].min_order = Some(min_order);
        reports[k].judge();
    }
}

/// Residual field together with its report and evaluation mask.
#[derive(Clone, Debug)]
pub struct Residual {
    pub report: ResidualReport,
    pub comps: Vec<ArrayD<f64>>,
    pub mask: ArrayD<bool>,
}

/// f^A = −N(A) Σ_B (N(B) − δ_AB) marg(D ∇V^{AB}(|q − q^B_{N(B)}|), A, 1),
/// plus the confinement force when a trap is set.
pub fn force_density(psi: &WaveField, scope: Scope) -> Result<VectorField> {
    let axes = physical_axes(psi, scope)?;
    let spec = &psi.spec;
    let d = spec.spatial_dim;
    let dens = total_density(psi);
    let mut comps: Vec<ArrayD<f64>> = Vec::new();
    for a in scope.sorts(spec)? {
        let na = spec.sorts[a].count as f64;
        let k = spec.first_axis(a, 0)?;
        let mut partners = Vec::new();
        for (b, sb) in spec.sorts.iter().enumerate() {
            let mult = sb.count as f64 - if a == b { 1.0 } else { 0.0 };
            if mult > 0.0 && !spec.potential.is_none() {
                partners.push((b, spec.first_axis(b, sb.count - 1)?, mult));
            }
        }
        let trap = spec.trap;
        let mut sort_comps = Vec::with_capacity(d);
        for c in 0..d {
            let per_d = sample(&psi.grid, |q| {
                let mut grad = trap * q[k + c];
                for &(b, kb, mult) in &partners {
                    let r2 = dist_sq(q, k, kb, d);
                    grad += mult * spec.potential.gradient_factor(a, b, r2) * (q[k + c] - q[kb + c]);
                }
                -na * grad
            });
            let integrand = per_d * &dens;
            sort_comps.push(marginalize(&integrand, &psi.grid, a, 0)?);
        }
        if comps.is_empty() {
            comps = sort_comps;
        } else {
            for (x, y) in comps.iter_mut().zip(&sort_comps) {
                *x += y;
            }
        }
    }
    Ok(VectorField { axes, comps, scope, kind: FieldKind::Force, defined: None })
}

/// (∇·T)_β = Σ_α ∂T_αβ/∂q_α.
pub fn tensor_divergence_cartesian(t: &TensorField) -> VectorField {
    let d = t.dim;
    let comps = (0..d)
        .map(|b| {
            let mut acc = ArrayD::<f64>::zeros(t.at(0, b).raw_dim());
            for a in 0..d {
                acc += &d1(t.at(a, b), a, t.axes[a].h(), Edge::OneSided);
            }
            acc
        })
        .collect();
    VectorField { axes: t.axes.clone(), comps, scope: t.scope, kind: FieldKind::Divergence, defined: None }
}

pub fn vector_divergence(v: &[ArrayD<f64>], axes: &[AxisSpec]) -> ArrayD<f64> {
    let mut acc = ArrayD::<f64>::zeros(v[0].raw_dim());
    for (a, c) in v.iter().enumerate() {
        acc += &d1(c, a, axes[a].h(), Edge::OneSided);
    }
    acc
}

/// ∂ρ_m/∂t = N m marg(2 Re[Ψ* ∂Ψ/∂t]), summed over the scope.
pub fn density_rate(psi: &WaveField, scope: Scope) -> Result<ScalarField> {
    let axes = physical_axes(psi, scope)?;
    let dt = time_derivative(psi)?;
    let mut two_re = ArrayD::<f64>::zeros(psi.values.raw_dim());
    Zip::from(&mut two_re).and(&psi.values).and(&dt.values).for_each(|o, p, t| *o = 2.0 * (p.conj() * t).re);
    let mut acc: Option<ArrayD<f64>> = None;
    for a in scope.sorts(&psi.spec)? {
        let s = &psi.spec.sorts[a];
        let r = marginalize(&two_re, &psi.grid, a, 0)?.mapv(|x| x * s.count as f64 * s.mass);
        acc = Some(match acc {
            None => r,
            Some(x) => x + &r,
        });
    }
    Ok(ScalarField { axes, values: acc.unwrap(), scope, kind: FieldKind::Density })
}

/// ∂j_m/∂t = ħ N marg(Im[∂Ψ*/∂t ∇Ψ + Ψ* ∇∂Ψ/∂t]), summed over the scope.
pub fn current_rate(psi: &WaveField, scope: Scope) -> Result<VectorField> {
    let axes = physical_axes(psi, scope)?;
    let dt = time_derivative(psi)?;
    let mut acc: Option<Vec<ArrayD<f64>>> = None;
    for a in scope.sorts(&psi.spec)? {
        let s = &psi.spec.sorts[a];
        let scale = psi.spec.hbar * s.count as f64;
        let gp = grad_psi(psi, a, 0)?;
        let gt = grad_psi(&dt, a, 0)?;
        let mut comps = Vec::with_capacity(gp.len());
        for (gpc, gtc) in gp.iter().zip(&gt) {
            let mut im = ArrayD::<f64>::zeros(psi.values.raw_dim());
            Zip::from(&mut im).and(&psi.values).and(&dt.values).and(gpc).and(gtc).for_each(|o, p, t, gp, gt| {
                *o = (t.conj() * gp + p.conj() * gt).im;
            });
            comps.push(marginalize(&im, &psi.grid, a, 0)?.mapv(|x| x * scale));
        }
        acc = Some(match acc {
            None => comps,
            Some(x) => x.into_iter().zip(comps).map(|(a, b)| a + &b).collect(),
        });
    }
    Ok(VectorField { axes, comps: acc.unwrap(), scope, kind: FieldKind::Current, defined: None })
}

/// Residual-norm mask: density above eps, eroded by the stencil reach, and
/// away from the boundary band.
pub fn residual_mask(rho: &ArrayD<f64>, eps: f64) -> ArrayD<bool> {
    let m = mask::erode(&mask::above(rho, eps), STENCIL_REACH);
    mask::and(&m, &mask::band(rho.shape(), BOUNDARY_BAND))
}

fn scale_of(terms: &[&ArrayD<f64>], m: &ArrayD<bool>) -> f64 {
    terms.iter().fold(0.0f64, |s, t| s.max(mask::max_abs_on(t, m)))
}

fn finish(
    law: Law,
    psi: &WaveField,
    scope: Scope,
    version: Option<Version>,
    comps: Vec<ArrayD<f64>>,
    m: ArrayD<bool>,
    scale: f64,
    cell: f64,
    h: f64,
) -> Residual {
    let mut sq = ArrayD::<f64>::zeros(comps[0].raw_dim());
    for c in &comps {
        Zip::from(&mut sq).and(c).for_each(|s, &x| *s += x * x);
    }
    let norm = sq.mapv(f64::sqrt);
    let l2 = mask::l2_on(&norm, &m, cell);
    let linf = mask::max_abs_on(&norm, &m);
    let report = ResidualReport::new(law, scope.label(&psi.spec), version, h, l2, linf, scale);
    Residual { report, comps, mask: m }
}

fn cell_and_h(axes: &[AxisSpec]) -> (f64, f64) {
    let cell = axes.iter().map(|a| a.h()).product();
    let h = axes.iter().map(|a| a.h()).fold(0.0, f64::max);
    (cell, h)
}

/// r = ∂ρ_m/∂t + ∇·j_m.
pub fn mpce_residual(psi: &WaveField, scope: Scope, eps: f64) -> Result<Residual> {
    let rho = mass_density(psi, scope)?;
    let j = mass_current(psi, scope)?;
    let rate = density_rate(psi, scope)?;
    let div = vector_divergence(&j.comps, &j.axes);
    let m = residual_mask(&rho.values, eps);
    let r = &rate.values + &div;
    let scale = scale_of(&[&rate.values, &div], &m);
    let (cell, h) = cell_and_h(&rho.axes);
    Ok(finish(Law::Mpce, psi, scope, None, vec![r], m, scale, cell, h))
}

/// r = ∂j_m/∂t − f + ∇·Π.
pub fn mpeem_residual(psi: &WaveField, scope: Scope, version: Version, eps: f64) -> Result<Residual> {
    let rho = mass_density(psi, scope)?;
    let rate = current_rate(psi, scope)?;
    let f = force_density(psi, scope)?;
    let pi = tensor_set(psi, scope, Family::MomentumFlow, eps)?.get(version, Part::Full);
    let div = tensor_divergence_cartesian(&pi);
    let m = residual_mask(&rho.values, eps);
    let mut comps = Vec::new();
    let mut terms = Vec::new();
    for b in 0..div.comps.len() {
        comps.push(&rate.comps[b] - &f.comps[b] + &div.comps[b]);
        terms.extend([&rate.comps[b], &f.comps[b], &div.comps[b]]);
    }
    let scale = scale_of(&terms, &m);
    let (cell, h) = cell_and_h(&rho.axes);
    Ok(finish(Law::Mpeem, psi, scope, Some(version), comps, m, scale, cell, h))
}

/// r = ρ_m[∂v/∂t + (v·∇)v] − f + ∇·p with ρ_m ∂v/∂t = ∂j/∂t − v ∂ρ/∂t.
pub fn mpqce_residual(psi: &WaveField, scope: Scope, version: Version, eps: f64) -> Result<Residual> {
    let rho = mass_density(psi, scope)?;
    let j = mass_current(psi, scope)?;
    let v = mean_velocity(&rho, &j, eps)?;
    let rho_t = density_rate(psi, scope)?;
    let j_t = current_rate(psi, scope)?;
    let f = force_density(psi, scope)?;
    let p = tensor_set(psi, scope, Family::Pressure, eps)?.get(version, Part::Full);
    let div = tensor_divergence_cartesian(&p);
    let d = v.comps.len();
    let m = residual_mask(&rho.values, eps);
    let mut comps = Vec::new();
    let mut held = Vec::new();
    for b in 0..d {
        let local = &j_t.comps[b] - &(&v.comps[b] * &rho_t.values);
        let mut adv = ArrayD::<f64>::zeros(rho.values.raw_dim());
        for a in 0..d {
            let dv = d1(&v.comps[b], a, v.axes[a].h(), Edge::OneSided);
            Zip::from(&mut adv).and(&rho.values).and(&v.comps[a]).and(&dv).for_each(|o, &r, &va, &g| {
                *o += r * va * g;
            });
        }
        comps.push(&local + &adv - &f.comps[b] + &div.comps[b]);
        held.push((local, adv));
    }
    let mut terms: Vec<&ArrayD<f64>> = Vec::new();
    for b in 0..d {
        terms.extend([&held[b].0, &held[b].1, &f.comps[b], &div.comps[b]]);
    }
    let scale = scale_of(&terms, &m);
    let (cell, h) = cell_and_h(&rho.axes);
    Ok(finish(Law::Mpqce, psi, scope, Some(version), comps, m, scale, cell, h))
}

/// Elementwise gap max|p^W − p^K| together with the divergence difference
/// ∇·p^W − ∇·p^K, whose norms go in the report.
pub fn gauge_divergence_check(psi: &WaveField, scope: Scope, eps: f64) -> Result<Residual> {
    let set = tensor_set(psi, scope, Family::Pressure, eps)?;
    let pk = set.get(Version::K, Part::Full);
    let pw = set.get(Version::W, Part::Full);
    let dk = tensor_divergence_cartesian(&pk);
    let dw = tensor_divergence_cartesian(&pw);
    let rho = mass_density(psi, scope)?;
    let m = residual_mask(&rho.values, eps);
    let comps: Vec<ArrayD<f64>> = dw.comps.iter().zip(&dk.comps).map(|(w, k)| w - k).collect();
    let terms: Vec<&ArrayD<f64>> = dk.comps.iter().chain(&dw.comps).collect();
    let scale = scale_of(&terms, &m);
    let (cell, h) = cell_and_h(&rho.axes);
    let mut res = finish(Law::GaugeDivergence, psi, scope, None, comps, m, scale, cell, h);
    let gap = pw.max_abs_diff(&pk, Some(&res.mask));
    let tensor_scale = pk.max_abs().max(pw.max_abs());
    res.report.notes.insert("elementwise_gap".into(), gap);
    res.report.notes.insert("tensor_scale".into(), tensor_scale);
    Ok(res)
}
