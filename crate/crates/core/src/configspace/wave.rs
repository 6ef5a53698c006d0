use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64 as C64;

use super::grid::Grid;
use super::spec::SystemSpec;
use crate::error::{Error, Result};
use crate::stencil::trapz_all;

/// Largest allowed ratio of boundary-layer |Ψ| to the global max.
pub const BOUNDARY_RATIO: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct WaveField {
    pub values: ArrayD<C64>,
    pub time_tag: f64,
    pub spec: SystemSpec,
    pub grid: Grid,
}

/// Evaluates `f` at every node; the closure receives the configuration
/// coordinates in axis order.
pub fn sample<T, F>(grid: &Grid, f: F) -> ArrayD<T>
where
    F: Fn(&[f64]) -> T,
{
    let coords: Vec<Vec<f64>> = grid.axes.iter().map(|a| a.coords()).collect();
    let mut q = vec![0.0; coords.len()];
    ArrayD::from_shape_fn(IxDyn(&grid.shape()), |idx| {
        for (k, c) in coords.iter().enumerate() {
            q[k] = c[idx[k]];
        }
        f(&q)
    })
}

impl WaveField {
    pub fn new(spec: SystemSpec, grid: Grid, values: ArrayD<C64>) -> Result<Self> {
        spec.validate()?;
        grid.compatible_with(&spec)?;
        if values.shape() != grid.shape().as_slice() {
            return Err(Error::Mismatch(format!(
                "values have shape {:?}, grid {:?}",
                values.shape(),
                grid.shape()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        Ok(WaveField { values, time_tag: 0.0, spec, grid })
    }

    pub fn from_fn<F>(spec: SystemSpec, grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> C64,
    {
        let values = sample(&grid, f);
        Self::new(spec, grid, values)
    }

    /// Same grid and spec, new values.
    pub fn with_values(&self, values: ArrayD<C64>) -> Self {
        WaveField { values, time_tag: self.time_tag, spec: self.spec.clone(), grid: self.grid.clone() }
    }

    /// ∫|Ψ|² dQ by the trapezoid rule.
    pub fn norm_sq(&self) -> f64 {
        trapz_all(&self.values.mapv(|z| z.norm_sqr()), &self.grid.spacings())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        self.values.mapv_inplace(|z| z * s);
        Ok(self)
    }

    /// max |Ψ| over the outermost layer of every axis, relative to max |Ψ|.
    pub fn boundary_ratio(&self) -> f64 {
        let global = self.values.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if global == 0.0 {
            return 0.0;
        }
        let mut edge = 0.0f64;
        for ax in 0..self.values.ndim() {
            let n = self.values.len_of(Axis(ax));
            for i in [0, n - 1] {
                edge = self.values.index_axis(Axis(ax), i).iter().fold(edge, |m, z| m.max(z.norm()));
            }
        }
        edge / global
    }

    pub fn ensure_boundary_negligible(&self) -> Result<()> {
        let r = self.boundary_ratio();
        if r > BOUNDARY_RATIO {
            return Err(Error::Config(format!(
                "boundary amplitude ratio {r:e} exceeds {BOUNDARY_RATIO:e}; enlarge the box"
            )));
        }
        Ok(())
    }

    pub fn madelung(&self) -> MadelungView {
        let density = self.values.mapv(|z| z.norm_sqr());
        let amplitude = density.mapv(f64::sqrt);
        MadelungView { density, amplitude, phase: None }
    }
}

/// D = |Ψ|², a = √D and, for analytic states only, the phase S.
#[derive(Clone, Debug)]
pub struct MadelungView {
    pub density: ArrayD<f64>,
    pub amplitude: ArrayD<f64>,
    pub phase: Option<ArrayD<f64>>,
}

impl MadelungView {
    pub fn with_phase(mut self, phase: ArrayD<f64>) -> Self {
        self.phase = Some(phase);
        self
    }
}
