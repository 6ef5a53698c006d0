use serde::{Deserialize, Serialize};

use super::spec::SystemSpec;
use crate::error::{Error, Result};
use crate::stencil::MIN_POINTS;

pub const DEFAULT_POINT_CAP: usize = 1 << 24;
pub const CAP_FLAG: &str = "--cap-override";
pub const MIN_AXIS_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, n: usize) -> Self {
        AxisSpec { min, max, n }
    }

    pub fn h(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    /// Node coordinate; written so that nodes of a box symmetric about zero
    /// are exact negatives of each other.
    pub fn coord(&self, i: usize) -> f64 {
        let m = (self.n - 1) as f64;
        (self.min * (m - i as f64) + self.max * i as f64) / m
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// The axis with its spacing halved over the same interval.
    pub fn refined(&self, levels: u32) -> Self {
        AxisSpec { n: (self.n - 1) * (1 << levels) + 1, ..*self }
    }

    /// Index of the node sitting exactly on `x`, if any.
    pub fn node_of(&self, x: f64) -> Option<usize> {
        (0..self.n).find(|&i| self.coord(i) == x)
    }

    fn validate(&self, k: usize) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.max <= self.min {
            return Err(Error::Config(format!(
                "axis {k}: extent [{}, {}] is not positive",
                self.min, self.max
            )));
        }
        if self.n < MIN_AXIS_POINTS.max(MIN_POINTS) {
            return Err(Error::Config(format!(
                "axis {k}: {} points, at least {MIN_AXIS_POINTS} required",
                self.n
            )));
        }
        Ok(())
    }
}

/// Which particle coordinate an axis carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisOwner {
    pub sort: usize,
    pub particle: usize,
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<AxisSpec>,
    pub owners: Vec<AxisOwner>,
    pub spatial_dim: usize,
}

pub fn build_grid(spec: &SystemSpec, axes: Vec<AxisSpec>, cap: Option<usize>) -> Result<Grid> {
    spec.validate()?;
    if axes.len() != spec.config_dim() {
        return Err(Error::Config(format!(
            "{} axes given, the system needs d·ΣN = {}",
            axes.len(),
            spec.config_dim()
        )));
    }
    for (k, a) in axes.iter().enumerate() {
        a.validate(k)?;
    }
    let cap = cap.unwrap_or(DEFAULT_POINT_CAP);
    let points: u128 = axes.iter().map(|a| a.n as u128).product();
    if points > cap as u128 {
        return Err(Error::CapExceeded { points, cap, flag: CAP_FLAG });
    }
    let mut owners = Vec::with_capacity(axes.len());
    for (sort, s) in spec.sorts.iter().enumerate() {
        for particle in 0..s.count {
            for component in 0..spec.spatial_dim {
                owners.push(AxisOwner { sort, particle, component });
            }
        }
    }
    Ok(Grid { axes, owners, spatial_dim: spec.spatial_dim })
}

impl Grid {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn n_points(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.h()).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacings().iter().product()
    }

    /// Configuration axis carrying component 0 of particle (sort, particle).
    pub fn first_axis(&self, sort: usize, particle: usize) -> Result<usize> {
        self.owners
            .iter()
            .position(|o| o.sort == sort && o.particle == particle)
            .ok_or(Error::InvalidParticle { sort, index: particle })
    }

    /// Physical-space axes seen by particle (sort, particle).
    pub fn particle_axes(&self, sort: usize, particle: usize) -> Result<Vec<AxisSpec>> {
        let k = self.first_axis(sort, particle)?;
        Ok(self.axes[k..k + self.spatial_dim].to_vec())
    }

    /// Same grid with every spacing halved `levels` times.
    pub fn refined(&self, levels: u32) -> Grid {
        Grid { axes: self.axes.iter().map(|a| a.refined(levels)).collect(), ..self.clone() }
    }

    pub fn compatible_with(&self, spec: &SystemSpec) -> Result<()> {
        if self.axes.len() != spec.config_dim() || self.spatial_dim != spec.spatial_dim {
            return Err(Error::Mismatch(format!(
                "grid has {} axes of dimension {}, spec needs {} of dimension {}",
                self.axes.len(),
                self.spatial_dim,
                spec.config_dim(),
                spec.spatial_dim
            )));
        }
        Ok(())
    }
}
