//! Boolean masks over grids: erosion by stencil reach and boundary bands.

use ndarray::{ArrayD, Axis, IxDyn, Slice, Zip};

/// Box erosion: a node survives only if every node within `r` steps along
/// every axis (diagonals included) is set. Nodes whose neighbourhood leaves
/// the grid are kept; use [`band`] for the boundary.
pub fn erode(mask: &ArrayD<bool>, r: usize) -> ArrayD<bool> {
    let mut cur = mask.clone();
    for ax in 0..mask.ndim() {
        let n = cur.len_of(Axis(ax));
        let src = cur.clone();
        for s in 1..=r.min(n.saturating_sub(1)) {
            // cur[i] &= src[i + s] and cur[i] &= src[i - s]
            Zip::from(cur.slice_axis_mut(Axis(ax), Slice::from(0..n - s)))
                .and(src.slice_axis(Axis(ax), Slice::from(s..n)))
                .for_each(|c, &o| *c &= o);
            Zip::from(cur.slice_axis_mut(Axis(ax), Slice::from(s..n)))
                .and(src.slice_axis(Axis(ax), Slice::from(0..n - s)))
                .for_each(|c, &o| *c &= o);
        }
    }
    cur
}

/// True everywhere except within `b` nodes of any face.
pub fn band(shape: &[usize], b: usize) -> ArrayD<bool> {
    ArrayD::from_shape_fn(IxDyn(shape), |idx| {
        (0..shape.len()).all(|k| idx[k] >= b && idx[k] + b < shape[k])
    })
}

/// Nodes where `values > eps * max(values)`.
pub fn above(values: &ArrayD<f64>, eps: f64) -> ArrayD<bool> {
    let max = values.iter().fold(0.0f64, |m, &x| m.max(x));
    let floor = eps * max;
    values.mapv(|x| x > floor && max > 0.0)
}

pub fn and(a: &ArrayD<bool>, b: &ArrayD<bool>) -> ArrayD<bool> {
    let mut out = a.clone();
    Zip::from(&mut out).and(b).for_each(|o, &x| *o &= x);
    out
}

/// max |f| over the set nodes, 0 when empty.
pub fn max_abs_on(f: &ArrayD<f64>, mask: &ArrayD<bool>) -> f64 {
    let mut m = 0.0f64;
    Zip::from(f).and(mask).for_each(|&x, &k| {
        if k {
            m = m.max(x.abs());
        }
    });
    m
}

/// sqrt(Σ f² · cell) over the set nodes.
pub fn l2_on(f: &ArrayD<f64>, mask: &ArrayD<bool>, cell: f64) -> f64 {
    let mut s = 0.0;
    Zip::from(f).and(mask).for_each(|&x, &k| {
        if k {
            s += x * x;
        }
    });
    (s * cell).sqrt()
}

pub fn count(mask: &ArrayD<bool>) -> usize {
    mask.iter().filter(|&&b| b).count()
}
