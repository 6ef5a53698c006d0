use ndarray::ArrayD;

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::stencil::{trapz_axis, Sample};

/// ∫dQ δ(q − q_i^A) F(Q): the axes of particle (sort, particle) are held at
/// each physical node and every other axis is integrated by the trapezoid
/// rule. The result lives on the particle's d physical axes.
pub fn marginalize<T: Sample>(
    field: &ArrayD<T>,
    grid: &Grid,
    sort: usize,
    particle: usize,
) -> Result<ArrayD<T>> {
    if field.shape() != grid.shape().as_slice() {
        return Err(Error::Mismatch("field does not live on this grid".into()));
    }
    let k = grid.first_axis(sort, particle)?;
    let keep = k..k + grid.spatial_dim;
    let mut cur: Option<ArrayD<T>> = None;
    for ax in (0..grid.axes.len()).rev() {
        if keep.contains(&ax) {
            continue;
        }
        let src = cur.as_ref().unwrap_or(field);
        cur = Some(trapz_axis(src, ax, grid.axes[ax].h()));
    }
    Ok(cur.unwrap_or_else(|| field.clone()))
}
