//! Cylindrical coordinates: the rotation Λ(φ), transforms of Cartesian
//! fields, gradient, Laplacian and tensor divergence on (ρ, φ, z) grids, and
//! the pressure-tensor elements of azimuthally symmetric states sampled on
//! the y = 0, x ≥ 0 half-plane.

use std::f64::consts::PI;

use ndarray::{ArrayD, Axis, IxDyn, Zip};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::balance::{residual_mask, tensor_divergence_cartesian};
use crate::configspace::{marginalize, AxisSpec, WaveField};
use crate::error::{Error, Result};
use crate::hydro::{mass_current, mass_density, total_density, Scope, VectorField};
use crate::mask;
use crate::stencil::{d1, d2, Edge, MIN_POINTS};
use crate::tensors::{tensor_set, Family, Part, TensorField};

/// Relative tolerance of the azimuthal-symmetry check.
pub const SYMMETRY_LIMIT: f64 = 1e-8;
/// Nodes with ρ below this many spacings are excluded from cylindrical output.
pub const AXIS_EXCLUSION: usize = 2;

pub type Mat3 = [[f64; 3]; 3];

/// Rows are e_ρ, e_φ, e_z in the Cartesian basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(pub Mat3);

pub fn rotation_matrix(phi: f64) -> RotationMatrix {
    let (s, c) = phi.sin_cos();
    RotationMatrix([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

impl RotationMatrix {
    pub fn transpose(&self) -> RotationMatrix {
        let m = &self.0;
        RotationMatrix(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn times(&self, other: &RotationMatrix) -> Mat3 {
        mat_mul(&self.0, &other.0)
    }

    /// Λb.
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| (0..3).map(|k| self.0[i][k] * v[k]).sum())
    }

    /// ΛTΛᵀ.
    pub fn conjugate(&self, t: &Mat3) -> Mat3 {
        mat_mul(&mat_mul(&self.0, t), &self.transpose().0)
    }
}

fn check_planar_dim(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::Config(format!("cylindrical transforms need d = 2 or 3, got {d}")))
    }
}

/// Azimuth and on-axis flag for every node of a Cartesian grid.
fn azimuths(axes: &[AxisSpec]) -> (ArrayD<f64>, ArrayD<bool>) {
    let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let (xs, ys) = (axes[0].coords(), axes[1].coords());
    let phi = ArrayD::from_shape_fn(IxDyn(&shape), |i| ys[i[1]].atan2(xs[i[0]]));
    let off_axis = ArrayD::from_shape_fn(IxDyn(&shape), |i| xs[i[0]] != 0.0 || ys[i[1]] != 0.0);
    (phi, off_axis)
}

fn merge_mask(own: &Option<ArrayD<bool>>, off_axis: ArrayD<bool>) -> ArrayD<bool> {
    match own {
        Some(m) => mask::and(m, &off_axis),
        None => off_axis,
    }
}

/// Componentwise Λb at each node's own φ; on-axis nodes are flagged
/// undefined. For d = 2 the z row is dropped.
pub fn to_cylindrical_vector(v: &VectorField) -> Result<VectorField> {
    let d = v.comps.len();
    check_planar_dim(d)?;
    let (phi, off_axis) = azimuths(&v.axes);
    let mut comps = vec![ArrayD::<f64>::zeros(phi.raw_dim()); d];
    for (idx, &p) in phi.indexed_iter() {
        let lam = rotation_matrix(p);
        let mut b = [0.0; 3];
        for (c, comp) in v.comps.iter().enumerate() {
            b[c] = comp[&idx];
        }
        let r = lam.apply(b);
        for (c, out) in comps.iter_mut().enumerate() {
            out[&idx] = r[c];
        }
    }
    Ok(VectorField { comps, defined: Some(merge_mask(&v.defined, off_axis)), ..v.clone() })
}

/// Componentwise ΛTΛᵀ at each node's own φ.
pub fn to_cylindrical_tensor(t: &TensorField) -> Result<TensorField> {
    let d = t.dim;
    check_planar_dim(d)?;
    let (phi, off_axis) = azimuths(&t.axes);
    let mut comps = vec![ArrayD::<f64>::zeros(phi.raw_dim()); d * d];
    for (idx, &p) in phi.indexed_iter() {
        let lam = rotation_matrix(p);
        let mut m = [[0.0; 3]; 3];
        for a in 0..d {
            for b in 0..d {
                m[a][b] = t.at(a, b)[&idx];
            }
        }
        let r = lam.conjugate(&m);
        for a in 0..d {
            for b in 0..d {
                comps[a * d + b][&idx] = r[a][b];
            }
        }
    }
    Ok(TensorField { comps, defined: Some(merge_mask(&t.defined, off_axis)), ..t.clone() })
}

/// (ρ, φ, z) product grid. `n_phi` nodes cover a full turn periodically; a
/// single node stands for an azimuthally symmetric field. Without a z axis
/// the grid is the plane.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylGrid {
    pub rho: AxisSpec,
    pub n_phi: usize,
    pub z: Option<AxisSpec>,
}

impl CylGrid {
    pub fn shape(&self) -> [usize; 3] {
        [self.rho.n, self.n_phi, self.z.map_or(1, |z| z.n)]
    }

    pub fn h_phi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        j as f64 * self.h_phi()
    }

    pub fn zeros(&self) -> ArrayD<f64> {
        ArrayD::zeros(IxDyn(&self.shape()))
    }

    pub fn from_fn(&self, f: impl Fn(f64, f64, f64) -> f64) -> ArrayD<f64> {
        let rho = self.rho.coords();
        let z = self.z.map_or(vec![0.0], |a| a.coords());
        ArrayD::from_shape_fn(IxDyn(&self.shape()), |i| f(rho[i[0]], self.phi(i[1]), z[i[2]]))
    }

    /// ρ ≥ 2h_ρ.
    pub fn rho_mask(&self) -> ArrayD<bool> {
        ArrayD::from_shape_fn(IxDyn(&self.shape()), |i| i[0] >= AXIS_EXCLUSION)
    }

    fn inv_rho(&self) -> ArrayD<f64> {
        self.from_fn(|r, _, _| if r > 0.0 { 1.0 / r } else { 0.0 })
    }
}

fn spacing_edge(grid: &CylGrid, axis: usize) -> (f64, Edge) {
    match axis {
        0 => (grid.rho.h(), Edge::OneSided),
        1 => (grid.h_phi(), Edge::Periodic),
        _ => (grid.z.map_or(1.0, |z| z.h()), Edge::OneSided),
    }
}

/// Derivative along one of the (ρ, φ, z) axes; identically zero along an
/// axis of a single node (symmetric or absent coordinate).
fn deriv(f: &ArrayD<f64>, grid: &CylGrid, axis: usize, order: usize) -> ArrayD<f64> {
    let n = f.len_of(Axis(axis));
    if n == 1 {
        return ArrayD::zeros(f.raw_dim());
    }
    assert!(n >= MIN_POINTS, "cylindrical axis {axis} has {n} points");
    let (h, edge) = spacing_edge(grid, axis);
    if order == 1 {
        d1(f, axis, h, edge)
    } else {
        d2(f, axis, h, edge)
    }
}

/// (∂F/∂ρ, (1/ρ)∂F/∂φ, ∂F/∂z); zero at ρ = 0.
pub fn cyl_gradient(f: &ArrayD<f64>, grid: &CylGrid) -> [ArrayD<f64>; 3] {
    let inv = grid.inv_rho();
    [deriv(f, grid, 0, 1), deriv(f, grid, 1, 1) * &inv, deriv(f, grid, 2, 1)]
}

/// ∂²F/∂ρ² + (1/ρ)∂F/∂ρ + (1/ρ²)∂²F/∂φ² + ∂²F/∂z².
pub fn cyl_laplacian(f: &ArrayD<f64>, grid: &CylGrid) -> ArrayD<f64> {
    let inv = grid.inv_rho();
    let mut out = deriv(f, grid, 0, 2);
    out += &(deriv(f, grid, 0, 1) * &inv);
    out += &(deriv(f, grid, 1, 2) * &inv * &inv);
    out += &deriv(f, grid, 2, 2);
    out
}

/// 3×3 tensor over a [`CylGrid`], row-major components indexed by (ρ, φ, z).
#[derive(Clone, Debug)]
pub struct CylindricalTensorField {
    pub grid: CylGrid,
    pub comps: Vec<ArrayD<f64>>,
    pub symmetric: bool,
}

impl CylindricalTensorField {
    pub fn zeros(grid: &CylGrid) -> Self {
        CylindricalTensorField { grid: grid.clone(), comps: vec![grid.zeros(); 9], symmetric: true }
    }

    /// Samples a tensor given in cylindrical components at (ρ, φ, z).
    pub fn from_fn(grid: &CylGrid, f: impl Fn(f64, f64, f64) -> Mat3) -> Self {
        let comps = (0..9).map(|k| grid.from_fn(|r, p, z| f(r, p, z)[k / 3][k % 3])).collect();
        let mut t = CylindricalTensorField { grid: grid.clone(), comps, symmetric: false };
        t.symmetric = t.max_asymmetry() == 0.0;
        t
    }

    pub fn at(&self, a: usize, b: usize) -> &ArrayD<f64> {
        &self.comps[a * 3 + b]
    }

    pub fn set(&mut self, a: usize, b: usize, v: ArrayD<f64>) {
        self.comps[a * 3 + b] = v;
    }

    pub fn set_sym(&mut self, a: usize, b: usize, v: ArrayD<f64>) {
        self.comps[b * 3 + a] = v.clone();
        self.comps[a * 3 + b] = v;
    }

    pub fn plus(&self, other: &Self) -> Self {
        CylindricalTensorField {
            grid: self.grid.clone(),
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
            symmetric: self.symmetric && other.symmetric,
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..3 {
            for b in a + 1..3 {
                let diff = self.at(a, b) - self.at(b, a);
                worst = worst.max(diff.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            }
        }
        worst
    }
}

/// Divergence over the first index in cylindrical components:
/// (∇·T)_ρ = ∂ρT_ρρ + (1/ρ)∂φT_φρ + ∂zT_zρ + (T_ρρ − T_φφ)/ρ,
/// (∇·T)_φ = ∂ρT_ρφ + (1/ρ)∂φT_φφ + ∂zT_zφ + (T_ρφ + T_φρ)/ρ,
/// (∇·T)_z = ∂ρT_ρz + (1/ρ)∂φT_φz + ∂zT_zz + T_ρz/ρ.
/// Values with ρ < 2h_ρ are meaningless; see [`CylGrid::rho_mask`].
pub fn cyl_tensor_divergence(t: &CylindricalTensorField) -> [ArrayD<f64>; 3] {
    let g = &t.grid;
    let inv = g.inv_rho();
    std::array::from_fn(|b| {
        let mut out = deriv(t.at(0, b), g, 0, 1);
        out += &(deriv(t.at(1, b), g, 1, 1) * &inv);
        out += &deriv(t.at(2, b), g, 2, 1);
        let hoop = match b {
            0 => t.at(0, 0) - t.at(1, 1),
            1 => t.at(0, 1) + t.at(1, 0),
            _ => t.at(0, 2).clone(),
        };
        out + &(hoop * &inv)
    })
}

/// Rotates cylindrical vector components back to Cartesian at each node's
/// own φ: Λᵀb.
pub fn cyl_to_cartesian(v: &[ArrayD<f64>; 3], grid: &CylGrid) -> [ArrayD<f64>; 3] {
    let mut out: [ArrayD<f64>; 3] = std::array::from_fn(|_| grid.zeros());
    for (idx, _) in v[0].indexed_iter() {
        let lt = rotation_matrix(grid.phi(idx[1])).transpose();
        let r = lt.apply([v[0][&idx], v[1][&idx], v[2][&idx]]);
        for c in 0..3 {
            out[c][&idx] = r[c];
        }
    }
    out
}

/// Exact-node sampling of 3D Cartesian fields along the y = 0, x ≥ 0 ray.
/// `line` is the whole y = 0 plane read as a signed-ρ grid, on which even
/// fields can be differentiated with central stencils across the axis.
#[derive(Clone, Debug)]
pub struct HalfPlane {
    pub grid: CylGrid,
    pub line: CylGrid,
    x0: usize,
    y0: usize,
}

fn centered_node(a: &AxisSpec, name: &str) -> Result<usize> {
    if a.min != -a.max || a.n % 2 == 0 {
        return Err(Error::Config(format!(
            "axis {name} must be symmetric about 0 with an odd node count for exact half-plane sampling"
        )));
    }
    Ok(a.n / 2)
}

impl HalfPlane {
    pub fn new(axes: &[AxisSpec]) -> Result<Self> {
        if axes.len() != 3 {
            return Err(Error::Config(format!("half-plane sampling needs d = 3, got {}", axes.len())));
        }
        let x0 = centered_node(&axes[0], "x")?;
        let y0 = centered_node(&axes[1], "y")?;
        let grid = CylGrid { rho: AxisSpec::new(0.0, axes[0].max, axes[0].n - x0), n_phi: 1, z: Some(axes[2]) };
        let line = CylGrid { rho: axes[0], n_phi: 1, z: Some(axes[2]) };
        Ok(HalfPlane { grid, line, x0, y0 })
    }

    /// Values on the signed-ρ line grid.
    pub fn sample_line(&self, f: &ArrayD<f64>) -> ArrayD<f64> {
        let shape = self.line.shape();
        ArrayD::from_shape_fn(IxDyn(&shape), |i| f[[i[0], self.y0, i[2]].as_slice()])
    }

    /// The ρ ≥ 0 half of a line-grid field.
    pub fn crop(&self, f: &ArrayD<f64>) -> ArrayD<f64> {
        f.slice_axis(Axis(0), ndarray::Slice::from(self.x0..)).to_owned()
    }

    /// Values on (ρ, 1, z) from a Cartesian (x, y, z) array.
    pub fn sample(&self, f: &ArrayD<f64>) -> ArrayD<f64> {
        self.sample_with(f)
    }

    pub fn sample_mask(&self, m: &ArrayD<bool>) -> ArrayD<bool> {
        self.sample_with(m)
    }

    fn sample_with<T: Clone>(&self, f: &ArrayD<T>) -> ArrayD<T> {
        let shape = self.grid.shape();
        ArrayD::from_shape_fn(IxDyn(&shape), |i| f[[self.x0 + i[0], self.y0, i[2]].as_slice()].clone())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    /// max |D(Rq) − D(q)| under a quarter turn of every particle about z.
    pub density_variation: f64,
    pub density_scale: f64,
    /// max |G(Rq) − R G(q)| with G = Im[Ψ*∇Ψ] per particle.
    pub current_variation: f64,
    pub current_scale: f64,
    /// max |j_φ| of each sort's mass current, against max |j|.
    pub azimuthal_current: f64,
    pub mass_current_scale: f64,
    pub limit: f64,
    pub passed: bool,
}

impl SymmetryReport {
    pub fn worst_ratio(&self) -> f64 {
        let r = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
        r(self.density_variation, self.density_scale)
            .max(r(self.current_variation, self.current_scale))
            .max(r(self.azimuthal_current, self.mass_current_scale))
    }
}

fn max_abs(a: &ArrayD<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Pairs of (x, y) axes per particle after checking that a quarter turn maps
/// nodes onto nodes.
fn rotation_axes(psi: &WaveField) -> Result<Vec<(usize, usize)>> {
    if psi.spec.spatial_dim != 3 {
        return Err(Error::Config("the azimuthal symmetry check needs d = 3".into()));
    }
    let mut pairs = Vec::new();
    for (s, sort) in psi.spec.sorts.iter().enumerate() {
        for p in 0..sort.count {
            let k = psi.grid.first_axis(s, p)?;
            let (ax, ay) = (psi.grid.axes[k], psi.grid.axes[k + 1]);
            if ax != ay || ax.min != -ax.max {
                return Err(Error::Config(
                    "x and y axes must coincide and be symmetric about 0 for the rotation check".into(),
                ));
            }
            pairs.push((k, k + 1));
        }
    }
    Ok(pairs)
}

/// f(Rq) for a quarter turn (x, y) → (−y, x) of every particle.
fn quarter_turn<T: Clone>(f: &ArrayD<T>, pairs: &[(usize, usize)]) -> ArrayD<T> {
    let mut v = f.view();
    for &(kx, ky) in pairs {
        v.invert_axis(Axis(kx));
        v.swap_axes(kx, ky);
    }
    v.to_owned()
}

fn max_diff(a: &ArrayD<f64>, b: &ArrayD<f64>, sign: f64) -> f64 {
    let mut worst = 0.0f64;
    Zip::from(a).and(b).for_each(|&x, &y| worst = worst.max((x - sign * y).abs()));
    worst
}

/// Invariance of D and covariance of Im[Ψ*∇Ψ] under a quarter turn about z,
/// plus vanishing azimuthal mass currents.
pub fn azimuthal_symmetry_check(psi: &WaveField) -> Result<SymmetryReport> {
    let pairs = rotation_axes(psi)?;
    let d = total_density(psi);
    let density_variation = max_diff(&quarter_turn(&d, &pairs), &d, 1.0);
    let mut current_variation = 0.0f64;
    let mut current_scale = 0.0f64;
    for &(kx, _) in &pairs {
        let g: Vec<ArrayD<f64>> = (0..3)
            .map(|c| {
                let dp = d1(&psi.values, kx + c, psi.grid.axes[kx + c].h(), Edge::OneSided);
                let mut im = ArrayD::<f64>::zeros(d.raw_dim());
                Zip::from(&mut im).and(&psi.values).and(&dp).for_each(|o, p: &C64, g| *o = (p.conj() * g).im);
                im
            })
            .collect();
        current_scale = g.iter().fold(current_scale, |m, c| m.max(max_abs(c)));
        // G(Rq) = R G(q): G_x → −G_y, G_y → G_x, G_z → G_z.
        current_variation = current_variation
            .max(max_diff(&quarter_turn(&g[0], &pairs), &g[1], -1.0))
            .max(max_diff(&quarter_turn(&g[1], &pairs), &g[0], 1.0))
            .max(max_diff(&quarter_turn(&g[2], &pairs), &g[2], 1.0));
    }
    let mut azimuthal_current = 0.0f64;
    let mut mass_current_scale = 0.0f64;
    for s in 0..psi.spec.sorts.len() {
        let j = mass_current(psi, Scope::Sort(s))?;
        let cyl = to_cylindrical_vector(&j)?;
        mass_current_scale = mass_current_scale.max(j.max_abs());
        azimuthal_current = azimuthal_current.max(mask::max_abs_on(&cyl.comps[1], &cyl.defined_mask()));
    }
    let mut report = SymmetryReport {
        density_variation,
        density_scale: max_abs(&d),
        current_variation,
        current_scale,
        azimuthal_current,
        mass_current_scale,
        limit: SYMMETRY_LIMIT,
        passed: false,
    };
    report.passed = report.worst_ratio() <= SYMMETRY_LIMIT;
    Ok(report)
}

/// Pressure-tensor elements of one sort over the half-plane.
#[derive(Clone, Debug)]
pub struct CylPressureParts {
    pub sort: usize,
    pub half: HalfPlane,
    pub part1: CylindricalTensorField,
    pub part2_k: CylindricalTensorField,
    pub part2_w: CylindricalTensorField,
    /// Scalar quantum pressure from the cylindrical Laplacian of marg(D).
    pub pressure: ArrayD<f64>,
    /// ρ-mask intersected with the Cartesian residual mask on the ray.
    pub mask: ArrayD<bool>,
    pub symmetry: SymmetryReport,
}

impl CylPressureParts {
    pub fn full_k(&self) -> CylindricalTensorField {
        self.part1.plus(&self.part2_k)
    }

    pub fn full_w(&self) -> CylindricalTensorField {
        self.part1.plus(&self.part2_w)
    }
}

/// First-order part sampled from the Cartesian tensors on the ray (where Λ
/// is the identity), second-order parts from marg(D) with φ-derivatives
/// identically zero:
/// p^{K,2}_ρρ = −c ∂²M/∂ρ², p^{K,2}_ρz = −c ∂²M/∂ρ∂z, p^{K,2}_zz = −c ∂²M/∂z²,
/// p^{K,2}_φφ = −c (1/ρ)∂M/∂ρ, p^{K,2}_ρφ = p^{K,2}_φz = 0, p^{W,2} = P δ,
/// with c = N ħ²/(4m) and M = marg(D).
pub fn cyl_pressure_parts(psi: &WaveField, sort: usize, eps: f64) -> Result<CylPressureParts> {
    let symmetry = azimuthal_symmetry_check(psi)?;
    if !symmetry.passed {
        return Err(Error::SymmetryBroken { variation: symmetry.worst_ratio(), limit: SYMMETRY_LIMIT });
    }
    let scope = Scope::Sort(sort);
    let axes = psi.grid.particle_axes(sort, 0)?;
    let half = HalfPlane::new(&axes)?;
    let g = half.grid.clone();
    let set = tensor_set(psi, scope, Family::Pressure, eps)?;

    let mut part1 = CylindricalTensorField::zeros(&g);
    for a in 0..3 {
        for b in 0..3 {
            part1.set(a, b, half.sample(&set.part1[a * 3 + b]));
        }
    }
    part1.symmetric = true;

    let s = &psi.spec.sorts[sort];
    let c = s.count as f64 * psi.spec.hbar * psi.spec.hbar / (4.0 * s.mass);
    // Derivatives of M are taken on the full line so that nodes next to the
    // axis see central stencils; (1/ρ)∂M/∂ρ takes its limit ∂²M/∂ρ² at ρ = 0.
    let line = &half.line;
    let m = half.sample_line(&marginalize(&total_density(psi), &psi.grid, sort, 0)?);
    let m_r = deriv(&m, line, 0, 1);
    let m_rr = deriv(&m, line, 0, 2);
    let m_zz = half.crop(&deriv(&m, line, 2, 2));
    let m_rz = half.crop(&deriv(&m_r, line, 2, 1));
    let rho = line.rho.coords();
    let mut hoop = m_r.clone();
    for (i, r) in rho.iter().enumerate() {
        let mut lane = hoop.index_axis_mut(Axis(0), i);
        if *r == 0.0 {
            lane.assign(&m_rr.index_axis(Axis(0), i));
        } else {
            lane.mapv_inplace(|x| x / r);
        }
    }
    let (m_rr, hoop) = (half.crop(&m_rr), half.crop(&hoop));
    let neg = |a: &ArrayD<f64>| a.mapv(|x| -c * x);

    let mut part2_k = CylindricalTensorField::zeros(&g);
    part2_k.set(0, 0, neg(&m_rr));
    part2_k.set(1, 1, neg(&hoop));
    part2_k.set(2, 2, neg(&m_zz));
    part2_k.set_sym(0, 2, neg(&m_rz));

    let pressure = neg(&(&m_rr + &hoop + &m_zz));
    let mut part2_w = CylindricalTensorField::zeros(&g);
    for a in 0..3 {
        part2_w.set(a, a, pressure.clone());
    }

    let rho = mass_density(psi, scope)?;
    let mask = mask::and(&g.rho_mask(), &half.sample_mask(&residual_mask(&rho.values, eps)));
    Ok(CylPressureParts { sort, half, part1, part2_k, part2_w, pressure, mask, symmetry })
}

#[derive(Clone, Debug, Serialize)]
pub struct CylComparison {
    pub sort: String,
    pub h: f64,
    /// max |(∇·p)_φ| for the two versions.
    pub e_phi_k: f64,
    pub e_phi_w: f64,
    /// max |∇·p| over ρ and z components.
    pub scale: f64,
    /// Cylindrical divergence against the Cartesian one on the ray.
    pub cart_gap_k_l2: f64,
    pub cart_gap_k_linf: f64,
    pub cart_gap_w_l2: f64,
    pub cart_gap_w_linf: f64,
    /// ‖∇·p^K − ∇·p^W‖ in cylindrical components.
    pub gauge_gap_l2: f64,
    pub gauge_gap_linf: f64,
    /// max |p^{K,2}_ρφ| and |p^{K,2}_φz|.
    pub off_diagonal_phi: f64,
    /// max |p_βα − p_αβ| over both versions.
    pub asymmetry: f64,
    pub symmetry: SymmetryReport,
}

impl CylComparison {
    pub fn e_phi_ok(&self) -> bool {
        self.e_phi_k.max(self.e_phi_w) <= SYMMETRY_LIMIT * self.scale
    }
}

fn vec_norms(v: &[ArrayD<f64>], m: &ArrayD<bool>, cell: f64) -> (f64, f64) {
    let mut sq = ArrayD::<f64>::zeros(v[0].raw_dim());
    for c in v {
        Zip::from(&mut sq).and(c).for_each(|s, &x| *s += x * x);
    }
    let norm = sq.mapv(f64::sqrt);
    (mask::l2_on(&norm, m, cell), mask::max_abs_on(&norm, m))
}

/// Cylindrical divergences of p^K and p^W for one sort, compared with each
/// other, with zero e_φ, and with the Cartesian divergence on the ray.
pub fn cyl_comparison(psi: &WaveField, sort: usize, eps: f64) -> Result<CylComparison> {
    let parts = cyl_pressure_parts(psi, sort, eps)?;
    let (pk, pw) = (parts.full_k(), parts.full_w());
    let dk = cyl_tensor_divergence(&pk);
    let dw = cyl_tensor_divergence(&pw);
    let m = &parts.mask;
    let g = &parts.half.grid;
    let cell = g.rho.h() * g.z.map_or(1.0, |z| z.h());

    let set = tensor_set(psi, Scope::Sort(sort), Family::Pressure, eps)?;
    let cart_k = tensor_divergence_cartesian(&set.get(crate::tensors::Version::K, Part::Full));
    let cart_w = tensor_divergence_cartesian(&set.get(crate::tensors::Version::W, Part::Full));
    let on_ray = |v: &VectorField| -> Vec<ArrayD<f64>> { v.comps.iter().map(|c| parts.half.sample(c)).collect() };
    let (ck, cw) = (on_ray(&cart_k), on_ray(&cart_w));
    let gap = |a: &[ArrayD<f64>; 3], b: &[ArrayD<f64>]| -> Vec<ArrayD<f64>> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    };
    let (cart_gap_k_l2, cart_gap_k_linf) = vec_norms(&gap(&dk, &ck), m, cell);
    let (cart_gap_w_l2, cart_gap_w_linf) = vec_norms(&gap(&dw, &cw), m, cell);
    let (gauge_gap_l2, gauge_gap_linf) = vec_norms(&gap(&dk, &dw), m, cell);
    let scale = [&dk[0], &dk[2], &dw[0], &dw[2]].iter().fold(0.0f64, |s, a| s.max(mask::max_abs_on(a, m)));
    let off_diagonal_phi = max_abs(parts.part2_k.at(0, 1))
        .max(max_abs(parts.part2_k.at(1, 0)))
        .max(max_abs(parts.part2_k.at(1, 2)))
        .max(max_abs(parts.part2_k.at(2, 1)));
    Ok(CylComparison {
        sort: psi.spec.sorts[sort].label.clone(),
        h: g.rho.h(),
        e_phi_k: mask::max_abs_on(&dk[1], m),
        e_phi_w: mask::max_abs_on(&dw[1], m),
        scale,
        cart_gap_k_l2,
        cart_gap_k_linf,
        cart_gap_w_l2,
        cart_gap_w_linf,
        gauge_gap_l2,
        gauge_gap_linf,
        off_diagonal_phi,
        asymmetry: pk.max_asymmetry().max(pw.max_asymmetry()),
        symmetry: parts.symmetry,
    })
}
