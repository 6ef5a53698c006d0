#![allow(dead_code)]

use mpqhd::configspace::{
    build_grid, symmetrize, AxisSpec, Grid, Orbital, PairPotentialSpec, PotentialKind, SortSpec, Statistics,
    SystemSpec, WaveField,
};
use mpqhd::C64;

pub fn single(d: usize, mass: f64) -> SystemSpec {
    SystemSpec::new(vec![SortSpec::new("e", mass, 1, Statistics::Distinguishable)], d, PairPotentialSpec::none(1))
}

pub fn grid(spec: &SystemSpec, axis: AxisSpec) -> Grid {
    build_grid(spec, vec![axis; spec.config_dim()], None).unwrap()
}

/// exp(−(x − c)²/(4σ²) + i k x), normalized.
pub fn packet(c: f64, sigma: f64, k: f64) -> impl Fn(f64) -> C64 {
    move |x| C64::from_polar((-(x - c) * (x - c) / (4.0 * sigma * sigma)).exp(), k * x)
}

pub fn gaussian_1d(n: usize, half_width: f64, sigma: f64, k: f64, mass: f64) -> WaveField {
    let spec = single(1, mass);
    let g = grid(&spec, AxisSpec::new(-half_width, half_width, n));
    let f = packet(0.0, sigma, k);
    WaveField::from_fn(spec, g, |q| f(q[0])).unwrap().normalized().unwrap()
}

/// One particle in 2D with density covariance [[1, r], [r, 1]] and phase k·q.
pub fn correlated_2d(n: usize, half_width: f64, r: f64, k: [f64; 2]) -> WaveField {
    let spec = single(2, 1.0);
    let g = grid(&spec, AxisSpec::new(-half_width, half_width, n));
    let det = 1.0 - r * r;
    WaveField::from_fn(spec, g, |q| {
        let quad = (q[0] * q[0] - 2.0 * r * q[0] * q[1] + q[1] * q[1]) / det;
        C64::from_polar((-quad / 4.0).exp(), k[0] * q[0] + k[1] * q[1])
    })
    .unwrap()
    .normalized()
    .unwrap()
}

/// Two sorts in 1D, counter-propagating packets, optional pair potential.
pub fn two_sorts(n: usize, half_width: f64, kind: PotentialKind) -> WaveField {
    let spec = SystemSpec::new(
        vec![
            SortSpec::new("a", 1.0, 1, Statistics::Distinguishable),
            SortSpec::new("b", 2.0, 1, Statistics::Distinguishable),
        ],
        1,
        PairPotentialSpec::uniform(kind, 2),
    );
    let g = grid(&spec, AxisSpec::new(-half_width, half_width, n));
    let (fa, fb) = (packet(-1.0, 1.0, 2.0), packet(1.0, 1.0, -2.0));
    WaveField::from_fn(spec, g, |q| fa(q[0]) * fb(q[1])).unwrap().normalized().unwrap()
}

/// Two identical particles of one sort in 1D built from packets φ and χ.
pub fn pair(n: usize, half_width: f64, statistics: Statistics, kind: PotentialKind) -> WaveField {
    let spec = SystemSpec::new(vec![SortSpec::new("b", 1.0, 2, statistics)], 1, PairPotentialSpec::uniform(kind, 1));
    let g = grid(&spec, AxisSpec::new(-half_width, half_width, n));
    let (phi, chi) = (packet(-1.0, 1.0, 1.0), packet(1.5, 0.8, -0.5));
    let (p, c) = (|q: &[f64]| phi(q[0]), |q: &[f64]| chi(q[0]));
    let f: Vec<Vec<Orbital>> = vec![vec![&p, &c]];
    symmetrize(&f, &spec, &g).unwrap()
}

/// One particle in 3D: (c + ρ²) exp(−r²/2 + i kz z), azimuthally symmetric.
pub fn ring_3d(n: usize, half_width: f64) -> WaveField {
    let spec = single(3, 1.0);
    let g = grid(&spec, AxisSpec::new(-half_width, half_width, n));
    WaveField::from_fn(spec, g, |q| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        C64::from_polar((1.0 + r2) * (-(r2 + q[2] * q[2]) / 2.0).exp(), q[2])
    })
    .unwrap()
    .normalized()
    .unwrap()
}

pub fn max_abs(a: &ndarray::ArrayD<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &ndarray::ArrayD<f64>, b: &ndarray::ArrayD<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
