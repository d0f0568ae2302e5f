//! Grid norms of vector fields.

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};

/// `L^p` norm of a physical field by the Riemann sum with weight `h^3`.
///
/// For finite `p` the pointwise value is the Euclidean length of the vector;
/// for `p = inf` the result is the largest absolute component value.
pub fn lp_norm(field: &VectorField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let f = field.as_physical()?;
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let w = f.grid().cell_volume();
    let len = f.grid().len();
    let mags = (0..len).map(|i| {
        let s = f.comps[0][i].powi(2) + f.comps[1][i].powi(2) + f.comps[2][i].powi(2);
        s.sqrt()
    });
    if p == 2.0 {
        let sum: f64 = mags.map(|m| m * m).sum();
        return Ok((w * sum).sqrt());
    }
    if p == 1.0 {
        return Ok(w * mags.sum::<f64>());
    }
    // scale by the maximum to avoid overflow for large p
    let peak = mags.clone().fold(0.0_f64, f64::max);
    if peak == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = mags.map(|m| (m / peak).powf(p)).sum();
    Ok(peak * (w * sum).powf(1.0 / p))
}

/// `l^2` norm of the coefficients weighted by `(2 pi / L)^3`; equals the grid
/// `L^2` norm of the physical field.
pub fn spectral_l2(field: &SpectralField) -> f64 {
    seminorm(field, 0)
}

/// `||nabla^alpha u||_2` from the coefficients: weight `|xi|^{2 alpha}`.
pub fn seminorm(field: &SpectralField, alpha: u32) -> f64 {
    let grid = field.grid();
    let dk = grid.dk();
    let mut sum = 0.0;
    for idx in 0..grid.len() {
        let s = field.comps.iter().map(|c| c[idx].norm_sqr()).sum::<f64>();
        if s == 0.0 {
            continue;
        }
        let w = if alpha == 0 {
            1.0
        } else {
            (dk * dk * grid.shell_index(idx) as f64).powi(alpha as i32)
        };
        sum += w * s;
    }
    (dk.powi(3) * sum).sqrt()
}
