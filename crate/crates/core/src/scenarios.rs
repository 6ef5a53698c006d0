//! Bundled analytic states with their grids, expected values and calibrated
//! tolerances.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::configspace::{
    build_grid, symmetrize, AxisSpec, Grid, Orbital, PairPotentialSpec, PotentialKind, SortSpec, Statistics,
    SystemSpec, WaveField,
};
use crate::error::{Error, Result};

/// Gaussian packet exp(−|q − c|²/(4σ²) + i k·q); |ψ|² has standard
/// deviation σ per axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Packet {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub k: Vec<f64>,
}

impl Packet {
    pub fn new(center: &[f64], sigma: f64, k: &[f64]) -> Self {
        Packet { center: center.to_vec(), sigma, k: k.to_vec() }
    }

    pub fn eval(&self, q: &[f64]) -> C64 {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for c in 0..q.len() {
            let dx = q[c] - self.center[c];
            r2 += dx * dx;
            phase += self.k[c] * q[c];
        }
        C64::from_polar((-r2 / (4.0 * self.sigma * self.sigma)).exp(), phase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateRecipe {
    /// One packet per particle, (anti)symmetrized within each sort.
    Packets { orbitals: Vec<Vec<Packet>> },
    /// One particle in 2D: exp(−qᵀΣ⁻¹q/4 + i k·q), so D has covariance Σ.
    Correlated { cov: [[f64; 2]; 2], k: [f64; 2] },
    /// One particle in 3D: (c + ρ²) exp(−(ρ² + z²)/2 + i kz z), smooth on
    /// the axis and, for 0 < c < 2, peaked on the ring ρ² = 2 − c.
    Ring { c: f64, kz: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative L∞ residual bound.
    pub residual: f64,
    /// Smallest acceptable observed order.
    pub min_order: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Expectation {
    pub quantity: String,
    pub formula: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub spec: SystemSpec,
    /// Physical axes shared by every particle for single-grid operations.
    pub physical: Vec<AxisSpec>,
    /// Coarsest physical axes of the refinement ladder used for convergence.
    pub ladder: Vec<AxisSpec>,
    pub state: StateRecipe,
    /// Eigenstate of H: time derivatives of all observables vanish.
    pub stationary: bool,
    pub tolerances: Tolerances,
}

impl Scenario {
    fn config_axes(&self, physical: &[AxisSpec], level: u32) -> Vec<AxisSpec> {
        let n = self.spec.n_particles();
        (0..n).flat_map(|_| physical.iter().map(|a| a.refined(level))).collect()
    }

    pub fn grid(&self, level: u32, cap: Option<usize>) -> Result<Grid> {
        build_grid(&self.spec, self.config_axes(&self.physical, level), cap)
    }

    pub fn ladder_grid(&self, level: u32, cap: Option<usize>) -> Result<Grid> {
        build_grid(&self.spec, self.config_axes(&self.ladder, level), cap)
    }

    /// Normalized state on the base grid refined `level` times; refuses
    /// boxes that cut the state.
    pub fn wave(&self, level: u32, cap: Option<usize>) -> Result<WaveField> {
        self.wave_on(self.grid(level, cap)?)
    }

    /// As [`Scenario::wave`] on the convergence ladder.
    pub fn ladder_wave(&self, level: u32, cap: Option<usize>) -> Result<WaveField> {
        self.wave_on(self.ladder_grid(level, cap)?)
    }

    pub fn wave_on(&self, grid: Grid) -> Result<WaveField> {
        let psi = match &self.state {
            StateRecipe::Packets { orbitals } => {
                let fns: Vec<Vec<Box<dyn Fn(&[f64]) -> C64 + '_>>> = orbitals
                    .iter()
                    .map(|sort| sort.iter().map(|p| Box::new(move |q: &[f64]| p.eval(q)) as Box<_>).collect())
                    .collect();
                let refs: Vec<Vec<Orbital>> = fns.iter().map(|s| s.iter().map(|f| f.as_ref() as Orbital).collect()).collect();
                symmetrize(&refs, &self.spec, &grid)?
            }
            StateRecipe::Correlated { cov, k } => {
                let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                if !(det > 0.0 && cov[0][0] > 0.0) || cov[0][1] != cov[1][0] {
                    return Err(Error::Config("covariance must be symmetric positive definite".into()));
                }
                let inv = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
                let k = *k;
                WaveField::from_fn(self.spec.clone(), grid, move |q| {
                    let quad = inv[0][0] * q[0] * q[0] + 2.0 * inv[0][1] * q[0] * q[1] + inv[1][1] * q[1] * q[1];
                    C64::from_polar((-quad / 4.0).exp(), k[0] * q[0] + k[1] * q[1])
                })?
                .normalized()?
            }
            StateRecipe::Ring { c, kz } => {
                let (c, kz) = (*c, *kz);
                WaveField::from_fn(self.spec.clone(), grid, move |q| {
                    let r2 = q[0] * q[0] + q[1] * q[1];
                    C64::from_polar((c + r2) * (-(r2 + q[2] * q[2]) / 2.0).exp(), kz * q[2])
                })?
                .normalized()?
            }
        };
        psi.ensure_boundary_negligible()?;
        Ok(psi)
    }

    pub fn is_single_particle(&self) -> bool {
        self.spec.n_particles() == 1
    }

    pub fn expected(&self) -> Vec<Expectation> {
        if self.name == "gaussian1d" {
            gaussian_reference_values()
        } else {
            Vec::new()
        }
    }
}

fn one(label: &str, mass: f64) -> SortSpec {
    SortSpec::new(label, mass, 1, Statistics::Distinguishable)
}

const SCENARIO_NAMES: [&str; 6] = ["corr2d", "gaussian1d", "ring3d", "trap1d", "twoboson_harmonic", "twosort_counter"];

/// Parameters of the free Gaussian packet scenario.
pub const GAUSSIAN_SIGMA: f64 = 1.0;
pub const GAUSSIAN_K0: f64 = 2.0;

pub fn scenario(name: &str) -> Result<Scenario> {
    // Residual bounds sit about ten times above the coarsest ladder grid.
    let tol = |residual| Tolerances { residual, min_order: 3.0 };
    let s = match name {
        "gaussian1d" => Scenario {
            name: name.into(),
            description: "free 1D Gaussian packet, sigma 1, k0 2".into(),
            spec: SystemSpec::new(vec![one("e", 1.0)], 1, PairPotentialSpec::none(1)),
            physical: vec![AxisSpec::new(-12.0, 12.0, 2048)],
            ladder: vec![AxisSpec::new(-12.0, 12.0, 513)],
            state: StateRecipe::Packets {
                orbitals: vec![vec![Packet::new(&[0.0], GAUSSIAN_SIGMA, &[GAUSSIAN_K0])]],
            },
            stationary: false,
            tolerances: tol(1e-3),
        },
        "twosort_counter" => Scenario {
            name: name.into(),
            description: "two sorts in 1D moving towards each other under soft Coulomb repulsion".into(),
            spec: SystemSpec::new(
                vec![one("a", 1.0), one("b", 2.0)],
                1,
                PairPotentialSpec::uniform(PotentialKind::SoftCoulomb { strength: 1.0, softening: 1.0 }, 2),
            ),
            physical: vec![AxisSpec::new(-10.0, 10.0, 257)],
            ladder: vec![AxisSpec::new(-10.0, 10.0, 129)],
            state: StateRecipe::Packets {
                orbitals: vec![vec![Packet::new(&[-1.0], 1.0, &[2.0])], vec![Packet::new(&[1.0], 1.0, &[-2.0])]],
            },
            stationary: false,
            tolerances: tol(5e-2),
        },
        "corr2d" => Scenario {
            name: name.into(),
            description: "one particle in 2D with correlated Gaussian density and a plane-wave phase".into(),
            spec: SystemSpec::new(vec![one("e", 1.0)], 2, PairPotentialSpec::none(1)),
            physical: vec![AxisSpec::new(-9.0, 9.0, 129); 2],
            ladder: vec![AxisSpec::new(-9.0, 9.0, 129); 2],
            state: StateRecipe::Correlated { cov: [[1.0, 0.5], [0.5, 1.0]], k: [1.0, -0.5] },
            stationary: false,
            tolerances: tol(1e-2),
        },
        "ring3d" => Scenario {
            name: name.into(),
            description: "azimuthally symmetric ring in 3D with a phase along z".into(),
            spec: SystemSpec::new(vec![one("e", 1.0)], 3, PairPotentialSpec::none(1)),
            physical: vec![AxisSpec::new(-7.0, 7.0, 41); 3],
            ladder: vec![AxisSpec::new(-7.0, 7.0, 41); 3],
            state: StateRecipe::Ring { c: 1.0, kz: 1.0 },
            stationary: false,
            tolerances: tol(0.5),
        },
        "twoboson_harmonic" => Scenario {
            name: name.into(),
            description: "two bosons in 1D with harmonic pair coupling, symmetrized packets".into(),
            spec: SystemSpec::new(
                vec![SortSpec::new("b", 1.0, 2, Statistics::Boson)],
                1,
                PairPotentialSpec::uniform(PotentialKind::HarmonicCoupling { k: 0.5 }, 1),
            ),
            physical: vec![AxisSpec::new(-10.0, 10.0, 257)],
            ladder: vec![AxisSpec::new(-10.0, 10.0, 129)],
            state: StateRecipe::Packets {
                orbitals: vec![vec![Packet::new(&[-1.0], 1.0, &[1.0]), Packet::new(&[1.5], 0.8, &[-0.5])]],
            },
            stationary: false,
            tolerances: tol(1e-2),
        },
        "trap1d" => Scenario {
            name: name.into(),
            description: "ground state of one particle in a unit harmonic trap".into(),
            spec: SystemSpec { trap: 1.0, ..SystemSpec::new(vec![one("e", 1.0)], 1, PairPotentialSpec::none(1)) },
            physical: vec![AxisSpec::new(-8.0, 8.0, 3073)],
            ladder: vec![AxisSpec::new(-8.0, 8.0, 3073)],
            state: StateRecipe::Packets {
                orbitals: vec![vec![Packet::new(&[0.0], std::f64::consts::FRAC_1_SQRT_2, &[0.0])]],
            },
            stationary: true,
            tolerances: tol(1e-8),
        },
        _ => return Err(Error::UnknownScenario(name.into())),
    };
    Ok(s)
}

/// Bundled scenarios whose name contains `filter`, in name order.
pub fn list_scenarios(filter: &str) -> Vec<(String, String)> {
    SCENARIO_NAMES
        .iter()
        .filter(|n| n.contains(filter))
        .map(|n| {
            let s = scenario(n).expect("bundled scenario");
            (s.name, s.description)
        })
        .collect()
}

/// Closed-form values of the free Gaussian packet at t = 0 with σ = 1,
/// k0 = 2, m = 1, ħ = 1.
pub fn gaussian_reference_values() -> Vec<Expectation> {
    let (hbar, m, s, k0) = (1.0, 1.0, GAUSSIAN_SIGMA, GAUSSIAN_K0);
    let e = |q: &str, f: &str, v: f64| Expectation { quantity: q.into(), formula: f.into(), value: v };
    vec![
        e("w", "hbar k0 / m", hbar * k0 / m),
        e("d(1.0)", "hbar x / (2 m sigma^2)", hbar * 1.0 / (2.0 * m * s * s)),
        e("<p>", "hbar k0", hbar * k0),
    ]
}
