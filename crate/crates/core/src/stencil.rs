//! Fourth-order finite differences and trapezoid quadrature along one axis
//! of an n-dimensional array.

use std::ops::{Add, Mul, Sub};

use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD, Axis, Slice, Zip};
use num_traits::Zero;

/// Anything we differentiate: `f64` and `Complex64`.
pub trait Sample:
    Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
}

impl<T> Sample for T where
    T: Copy + Zero + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> + Send + Sync
{
}

/// How the two outermost layers are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    /// One-sided fourth-order formulas.
    OneSided,
    /// Central formula with the field taken as zero outside the box.
    ZeroExtended,
    /// Wrap around (azimuthal axes spanning a full turn).
    Periodic,
}

// Weights in units of 1/(12h) and 1/(12h^2).
pub const D1_CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
pub const D2_CENTRAL: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
pub const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
pub const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
pub const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
pub const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

/// Smallest axis length the stencils accept.
pub const MIN_POINTS: usize = 6;

fn accumulate<T: Sample>(mut out: ArrayViewMutD<T>, src: ArrayViewD<T>, w: f64) {
    Zip::from(&mut out).and(&src).for_each(|o, &s| *o = *o + s * w);
}

/// Sets layer `i` of `out` to `scale * sum_k w_k * a[idx_k]`.
fn edge_layer<T: Sample>(
    out: &mut ArrayD<T>,
    a: &ArrayViewD<T>,
    axis: usize,
    i: usize,
    terms: &[(usize, f64)],
    scale: f64,
) {
    let mut layer = out.index_axis_mut(Axis(axis), i);
    layer.fill(T::zero());
    for &(k, w) in terms {
        accumulate(layer.view_mut(), a.index_axis(Axis(axis), k), w * scale);
    }
}

fn apply<T: Sample>(a: ArrayViewD<T>, axis: usize, scale: f64, order: usize, edge: Edge) -> ArrayD<T> {
    let n = a.len_of(Axis(axis));
    assert!(n >= MIN_POINTS, "axis {axis} has {n} points, stencils need {MIN_POINTS}");
    let central = if order == 1 { D1_CENTRAL } else { D2_CENTRAL };
    let mut out = ArrayD::<T>::zeros(a.raw_dim());
    {
        let s = |k: usize| a.slice_axis(Axis(axis), Slice::from(k..n - 4 + k));
        let c = central;
        Zip::from(out.slice_axis_mut(Axis(axis), Slice::from(2..n - 2)))
            .and(&s(0))
            .and(&s(1))
            .and(&s(2))
            .and(&s(3))
            .and(&s(4))
            .for_each(|o, &f0, &f1, &f2, &f3, &f4| {
                *o = (f0 * c[0] + f1 * c[1] + f2 * c[2] + f3 * c[3] + f4 * c[4]) * scale;
            });
    }
    // The high end mirrors the low-end weights, negated for odd order.
    let sign = if order == 1 { -1.0 } else { 1.0 };
    for (i, lo) in [(0usize, true), (1, true), (n - 2, false), (n - 1, false)] {
        let from_start = if lo { i } else { n - 1 - i };
        let terms: Vec<(usize, f64)> = match edge {
            Edge::OneSided => {
                let w: &[f64] = match (order, from_start) {
                    (1, 0) => &D1_EDGE0,
                    (1, _) => &D1_EDGE1,
                    (_, 0) => &D2_EDGE0,
                    _ => &D2_EDGE1,
                };
                // Both edge formulas start at the outermost node.
                w.iter()
                    .enumerate()
                    .map(|(k, &wk)| if lo { (k, wk) } else { (n - 1 - k, wk * sign) })
                    .collect()
            }
            Edge::ZeroExtended => (0..5)
                .filter_map(|k| {
                    let j = i as isize + k as isize - 2;
                    (j >= 0 && (j as usize) < n).then(|| (j as usize, central[k]))
                })
                .collect(),
            Edge::Periodic => (0..5)
                .map(|k| (((i + n + k) - 2) % n, central[k]))
                .collect(),
        };
        edge_layer(&mut out, &a, axis, i, &terms, scale);
    }
    out
}

/// First derivative along `axis` with spacing `h`.
pub fn d1<T: Sample>(a: &ArrayD<T>, axis: usize, h: f64, edge: Edge) -> ArrayD<T> {
    apply(a.view(), axis, 1.0 / (12.0 * h), 1, edge)
}

/// Second derivative along `axis` with spacing `h`.
pub fn d2<T: Sample>(a: &ArrayD<T>, axis: usize, h: f64, edge: Edge) -> ArrayD<T> {
    apply(a.view(), axis, 1.0 / (12.0 * h * h), 2, edge)
}

/// Eighth-order central first derivative with the field taken as zero
/// outside the box; for global quadratures of fields that vanish at the edges.
pub fn d1_wide<T: Sample>(a: &ArrayD<T>, axis: usize, h: f64) -> ArrayD<T> {
    const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let n = a.len_of(Axis(axis));
    let mut out = ArrayD::<T>::zeros(a.raw_dim());
    for (k, &w) in W.iter().enumerate() {
        let s = k + 1;
        if s >= n {
            break;
        }
        // out[i] += w (a[i + s] − a[i − s]) / h
        accumulate(out.slice_axis_mut(Axis(axis), Slice::from(..n - s)), a.slice_axis(Axis(axis), Slice::from(s..)), w / h);
        accumulate(out.slice_axis_mut(Axis(axis), Slice::from(s..)), a.slice_axis(Axis(axis), Slice::from(..n - s)), -w / h);
    }
    out
}

/// Composite trapezoid rule over `axis`; the axis is removed.
pub fn trapz_axis<T: Sample>(a: &ArrayD<T>, axis: usize, h: f64) -> ArrayD<T> {
    let n = a.len_of(Axis(axis));
    let mut shape = a.shape().to_vec();
    shape.remove(axis);
    let mut out = ArrayD::<T>::zeros(shape);
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        accumulate(out.view_mut(), a.index_axis(Axis(axis), i), w);
    }
    out
}

/// Trapezoid integral over every axis.
pub fn trapz_all<T: Sample>(a: &ArrayD<T>, spacings: &[f64]) -> T {
    assert_eq!(a.ndim(), spacings.len());
    let mut cur = a.clone();
    for ax in (0..spacings.len()).rev() {
        cur = trapz_axis(&cur, ax, spacings[ax]);
    }
    cur.into_iter().next().unwrap_or_else(T::zero)
}
