use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest configuration dimension d·ΣN(A) the library accepts.
pub const MAX_CONFIG_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Boson,
    Fermion,
    Distinguishable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SortSpec {
    pub label: String,
    pub mass: f64,
    /// Kept for completeness; nothing field-free uses it.
    pub charge: f64,
    pub count: usize,
    pub statistics: Statistics,
}

impl SortSpec {
    pub fn new(label: &str, mass: f64, count: usize, statistics: Statistics) -> Self {
        SortSpec { label: label.to_string(), mass, charge: 0.0, count, statistics }
    }
}

/// Radial shape of the pair interaction; strengths are further scaled by the
/// per-sort-pair coefficient matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PotentialKind {
    None,
    /// V(r) = strength / sqrt(r² + softening²)
    SoftCoulomb { strength: f64, softening: f64 },
    /// V(r) = −depth · exp(−r² / 2width²)
    GaussianWell { depth: f64, width: f64 },
    /// V(r) = k r² / 2
    HarmonicCoupling { k: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPotentialSpec {
    pub kind: PotentialKind,
    pub coefficients: Vec<Vec<f64>>,
}

impl PairPotentialSpec {
    pub fn none(n_sorts: usize) -> Self {
        Self::uniform(PotentialKind::None, n_sorts)
    }

    /// Same interaction between every pair of sorts.
    pub fn uniform(kind: PotentialKind, n_sorts: usize) -> Self {
        PairPotentialSpec { kind, coefficients: vec![vec![1.0; n_sorts]; n_sorts] }
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, PotentialKind::None)
    }

    /// V^{AB} at squared separation `r2`.
    pub fn value(&self, a: usize, b: usize, r2: f64) -> f64 {
        let c = self.coefficients[a][b];
        c * match self.kind {
            PotentialKind::None => 0.0,
            PotentialKind::SoftCoulomb { strength, softening } => {
                strength / (r2 + softening * softening).sqrt()
            }
            PotentialKind::GaussianWell { depth, width } => {
                -depth * (-r2 / (2.0 * width * width)).exp()
            }
            PotentialKind::HarmonicCoupling { k } => 0.5 * k * r2,
        }
    }

    /// g such that ∇_{q} V^{AB}(|q − q'|) = g · (q − q').
    pub fn gradient_factor(&self, a: usize, b: usize, r2: f64) -> f64 {
        let c = self.coefficients[a][b];
        c * match self.kind {
            PotentialKind::None => 0.0,
            PotentialKind::SoftCoulomb { strength, softening } => {
                -strength / (r2 + softening * softening).powf(1.5)
            }
            PotentialKind::GaussianWell { depth, width } => {
                let w2 = width * width;
                depth / w2 * (-r2 / (2.0 * w2)).exp()
            }
            PotentialKind::HarmonicCoupling { k } => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub sorts: Vec<SortSpec>,
    pub spatial_dim: usize,
    pub potential: PairPotentialSpec,
    pub hbar: f64,
    /// One-body harmonic confinement U(q) = trap·|q|²/2 acting on every
    /// particle. Zero (the default) gives the purely pair-interacting system;
    /// a positive value exists so that normalizable stationary states can be
    /// built for tests.
    #[serde(default)]
    pub trap: f64,
}

impl SystemSpec {
    pub fn new(sorts: Vec<SortSpec>, spatial_dim: usize, potential: PairPotentialSpec) -> Self {
        SystemSpec { sorts, spatial_dim, potential, hbar: 1.0, trap: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sorts.is_empty() {
            return bad("at least one particle sort is required".into());
        }
        if !(1..=3).contains(&self.spatial_dim) {
            return bad(format!("spatial dimension {} not in 1..=3", self.spatial_dim));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad(format!("hbar must be positive, got {}", self.hbar));
        }
        if !(self.trap >= 0.0 && self.trap.is_finite()) {
            return bad(format!("trap strength must be non-negative, got {}", self.trap));
        }
        for (k, s) in self.sorts.iter().enumerate() {
            if !(s.mass > 0.0 && s.mass.is_finite()) {
                return bad(format!("sort `{}` needs a positive mass", s.label));
            }
            if s.count == 0 {
                return bad(format!("sort `{}` needs at least one particle", s.label));
            }
            if self.sorts[..k].iter().any(|o| o.label == s.label) {
                return bad(format!("duplicate sort label `{}`", s.label));
            }
        }
        if self.config_dim() > MAX_CONFIG_DIM {
            return bad(format!(
                "configuration dimension {} exceeds {MAX_CONFIG_DIM}",
                self.config_dim()
            ));
        }
        let n = self.sorts.len();
        let c = &self.potential.coefficients;
        if c.len() != n || c.iter().any(|row| row.len() != n) {
            return bad(format!("pair coefficient matrix must be {n}x{n}"));
        }
        for a in 0..n {
            for b in 0..n {
                if c[a][b] != c[b][a] || !c[a][b].is_finite() {
                    return bad("pair coefficient matrix must be finite and symmetric".into());
                }
            }
        }
        match self.potential.kind {
            PotentialKind::SoftCoulomb { softening, .. } if softening <= 0.0 => {
                bad("soft_coulomb needs a positive softening".into())
            }
            PotentialKind::GaussianWell { width, .. } if width <= 0.0 => {
                bad("gaussian_well needs a positive width".into())
            }
            _ => Ok(()),
        }
    }

    pub fn n_particles(&self) -> usize {
        self.sorts.iter().map(|s| s.count).sum()
    }

    pub fn config_dim(&self) -> usize {
        self.spatial_dim * self.n_particles()
    }

    pub fn sort_index(&self, label: &str) -> Result<usize> {
        self.sorts
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownSort(label.to_string()))
    }

    pub fn check_sort(&self, sort: usize) -> Result<()> {
        if sort < self.sorts.len() {
            Ok(())
        } else {
            Err(Error::UnknownSort(format!("#{sort}")))
        }
    }

    /// First configuration axis of particle `index` (0-based) of `sort`.
    pub fn first_axis(&self, sort: usize, index: usize) -> Result<usize> {
        self.check_sort(sort)?;
        if index >= self.sorts[sort].count {
            return Err(Error::InvalidParticle { sort, index });
        }
        let before: usize = self.sorts[..sort].iter().map(|s| s.count).sum();
        Ok((before + index) * self.spatial_dim)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
