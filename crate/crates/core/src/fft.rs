//! Three-dimensional FFT on the periodic lattice with continuum-consistent scaling.
//!
//! Forward: `g_hat(xi) = (2 pi)^{-3/2} h^3 sum_x e^{-i xi.x} g(x)`, i.e. the
//! Riemann sum of the unitary continuum transform. With this scaling the grid
//! `L^2` norm `h^3 sum |g|^2` equals `(2 pi / L)^3 sum |g_hat|^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid3;

type C = Complex64;

/// Planned forward/inverse transforms for one grid size.
#[derive(Clone)]
pub struct Transformer {
    grid: Grid3,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `(2 pi)^{-3/2} h^3`
    forward_scale: f64,
}

impl std::fmt::Debug for Transformer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transformer").field("grid", &self.grid).finish()
    }
}

impl Transformer {
    pub fn new(grid: Grid3) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let forward_scale = grid.cell_volume() / (2.0 * PI).powf(1.5);
        Self {
            grid,
            forward,
            inverse,
            forward_scale,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    /// Spectral coefficients of one real component.
    pub fn forward_real(&self, values: &[f64]) -> Vec<C> {
        let mut buf: Vec<C> = values.iter().map(|&v| C::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    /// Two real components through one complex transform.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<C>, Vec<C>) {
        let mut buf: Vec<C> = a.iter().zip(b).map(|(&x, &y)| C::new(x, y)).collect();
        self.forward_in_place(&mut buf);
        let mut out_a = vec![C::new(0.0, 0.0); buf.len()];
        let mut out_b = vec![C::new(0.0, 0.0); buf.len()];
        for idx in 0..buf.len() {
            let d = buf[idx];
            let dm = buf[self.grid.mirror_index(idx)].conj();
            out_a[idx] = 0.5 * (d + dm);
            // (d - dm) / (2i)
            let diff = d - dm;
            out_b[idx] = C::new(0.5 * diff.im, -0.5 * diff.re);
        }
        (out_a, out_b)
    }

    /// Real part of the inverse transform of one Hermitian spectrum.
    pub fn inverse_real(&self, coeffs: &[C]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Two Hermitian spectra through one complex transform.
    pub fn inverse_real_pair(&self, a: &[C], b: &[C]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<C> = a.iter().zip(b).map(|(&x, &y)| x + C::i() * y).collect();
        self.inverse_in_place(&mut buf);
        (
            buf.iter().map(|c| c.re).collect(),
            buf.iter().map(|c| c.im).collect(),
        )
    }

    pub fn forward_in_place(&self, data: &mut [C]) {
        assert_eq!(data.len(), self.grid.len());
        self.raw(data, &self.forward);
        for (idx, v) in data.iter_mut().enumerate() {
            *v *= self.forward_scale * self.phase(idx);
        }
    }

    pub fn inverse_in_place(&self, data: &mut [C]) {
        assert_eq!(data.len(), self.grid.len());
        let scale = 1.0 / (self.forward_scale * self.grid.len() as f64);
        for (idx, v) in data.iter_mut().enumerate() {
            *v *= scale * self.phase(idx);
        }
        self.raw(data, &self.inverse);
    }

    /// `e^{-i xi . x_0}` for the corner `x_0 = (-L/2, -L/2, -L/2)`, which is
    /// `(-1)^{kx+ky+kz}`.
    fn phase(&self, idx: usize) -> f64 {
        let [i, j, k] = self.grid.unflatten(idx);
        if (i + j + k) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn raw(&self, data: &mut [C], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        let mut scratch = vec![C::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // x lines are contiguous
        fft.process_with_scratch(data, &mut scratch);

        let mut buf = vec![C::new(0.0, 0.0); n * n];
        // y lines: transpose each z slab
        for slab in data.chunks_exact_mut(n * n) {
            for iy in 0..n {
                for ix in 0..n {
                    buf[ix * n + iy] = slab[ix + n * iy];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for iy in 0..n {
                for ix in 0..n {
                    slab[ix + n * iy] = buf[ix * n + iy];
                }
            }
        }
        // z lines: gather one xz plane at a time
        for iy in 0..n {
            for iz in 0..n {
                let base = n * (iy + n * iz);
                for ix in 0..n {
                    buf[ix * n + iz] = data[base + ix];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for iz in 0..n {
                let base = n * (iy + n * iz);
                for ix in 0..n {
                    data[base + ix] = buf[ix * n + iz];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(grid: &Grid3, values: &[f64]) -> Vec<C> {
        let scale = grid.cell_volume() / (2.0 * PI).powf(1.5);
        (0..grid.len())
            .map(|kidx| {
                let xi = grid.wave_vector(kidx);
                let mut acc = C::new(0.0, 0.0);
                for (xidx, &v) in values.iter().enumerate() {
                    let x = grid.position(xidx);
                    let arg = -(xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2]);
                    acc += v * C::new(arg.cos(), arg.sin());
                }
                acc * scale
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        let grid = Grid3::new(8, 3.7).unwrap();
        let values: Vec<f64> = (0..grid.len())
            .map(|i| ((i * 37 % 101) as f64 / 50.0 - 1.0) * (1.0 + (i % 7) as f64))
            .collect();
        let tr = Transformer::new(grid);
        let fast = tr.forward_real(&values);
        let slow = naive_dft(&grid, &values);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn pair_transforms_agree_with_single() {
        let grid = Grid3::new(8, 2.0).unwrap();
        let a: Vec<f64> = (0..grid.len()).map(|i| ((i * 13) % 17) as f64).collect();
        let b: Vec<f64> = (0..grid.len()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let tr = Transformer::new(grid);
        let (pa, pb) = tr.forward_real_pair(&a, &b);
        let sa = tr.forward_real(&a);
        let sb = tr.forward_real(&b);
        for i in 0..grid.len() {
            assert!((pa[i] - sa[i]).norm() < 1e-12);
            assert!((pb[i] - sb[i]).norm() < 1e-12);
        }
        let (ra, rb) = tr.inverse_real_pair(&sa, &sb);
        for i in 0..grid.len() {
            assert!((ra[i] - a[i]).abs() < 1e-11);
            assert!((rb[i] - b[i]).abs() < 1e-11);
        }
    }
}
