//! Periodic lattice in physical space and its dual frequency lattice.
//!
//! Points sit at `x_j = -L/2 + j h` along each axis (the origin is a grid
//! point), wave vectors at `xi = (2 pi / L) k` with `k` in `{-n/2, .., n/2 - 1}`
//! stored in FFT order. Flat indices are x-fastest: `ix + n (iy + n iz)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    n: usize,
    box_length: f64,
}

impl Grid3 {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {n}"
            )));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {box_length}"
            )));
        }
        Ok(Self { n, box_length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Total number of lattice points, `n^3`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }

    /// Spacing of the frequency lattice, `2 pi / L`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.box_length + j as f64 * self.spacing()
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unflatten(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Signed integer wavenumber of FFT slot `j`.
    pub fn wavenumber_index(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        self.dk() * self.wavenumber_index(j) as f64
    }

    /// The slot carrying `k = -n/2`, which has no distinct conjugate partner.
    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    pub fn flatten(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    pub fn integer_wave_vector(&self, idx: usize) -> [i64; 3] {
        let [i, j, k] = self.unflatten(idx);
        [
            self.wavenumber_index(i),
            self.wavenumber_index(j),
            self.wavenumber_index(k),
        ]
    }

    pub fn wave_vector(&self, idx: usize) -> [f64; 3] {
        let dk = self.dk();
        self.integer_wave_vector(idx).map(|k| dk * k as f64)
    }

    /// `|k|^2` in integer lattice units; kernels that depend on `|xi|` only can
    /// be tabulated on this shell index.
    pub fn shell_index(&self, idx: usize) -> usize {
        let k = self.integer_wave_vector(idx);
        (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as usize
    }

    pub fn max_shell_index(&self) -> usize {
        3 * (self.n / 2) * (self.n / 2)
    }

    /// Flat index of `-k` (the Nyquist slot maps to itself).
    pub fn mirror_index(&self, idx: usize) -> usize {
        let n = self.n;
        let [i, j, k] = self.unflatten(idx);
        self.flatten((n - i) % n, (n - j) % n, (n - k) % n)
    }

    /// Axes along which slot `idx` sits on the Nyquist plane.
    pub fn nyquist_axes(&self, idx: usize) -> [bool; 3] {
        self.unflatten(idx).map(|j| self.is_nyquist(j))
    }

    pub fn freq_lattice(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |idx| self.wave_vector(idx))
    }

    /// 2/3-rule retention test: keep `k` when `3 |k_a| < n` on every axis.
    pub fn retained_by_two_thirds(&self, idx: usize) -> bool {
        let n = self.n as i64;
        self.integer_wave_vector(idx)
            .iter()
            .all(|k| 3 * k.abs() < n)
    }
}

/// `exp(-1/x)` for `x > 0`, zero otherwise.
fn bump_tail(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// C-infinity step: 1 for `s <= 0`, 0 for `s >= 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let a = bump_tail(1.0 - s);
        a / (a + bump_tail(s))
    }
}

/// Radii of the low/middle/high frequency partition of unity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub c0: f64,
    pub c1: f64,
}

impl CutoffSpec {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0 < c1 && c1.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "cutoff radii need 0 < c0 < c1, got c0={c0}, c1={c1}"
            )));
        }
        Ok(Self { c0, c1 })
    }

    /// Default radii for wave speeds `betas` and viscosity `nu`:
    /// `c0 = min(beta)/nu` (half the smallest oscillation threshold `2 beta / nu`)
    /// and `c1 = 4 max(beta)/nu`.
    pub fn from_speeds(beta_min: f64, beta_max: f64, nu: f64) -> Result<Self> {
        Self::new(beta_min / nu, 4.0 * beta_max / nu)
    }

    pub fn chi_low(&self, r: f64) -> f64 {
        let half = 0.5 * self.c0;
        smooth_step((r - half) / half)
    }

    pub fn chi_high(&self, r: f64) -> f64 {
        1.0 - smooth_step((r - self.c1) / self.c1)
    }

    pub fn chi_mid(&self, r: f64) -> f64 {
        1.0 - self.chi_low(r) - self.chi_high(r)
    }

    pub fn chi(&self, part: FrequencyPart, r: f64) -> f64 {
        match part {
            FrequencyPart::Low => self.chi_low(r),
            FrequencyPart::Mid => self.chi_mid(r),
            FrequencyPart::High => self.chi_high(r),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrequencyPart {
    Low,
    Mid,
    High,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid3::new(7, 1.0).is_err());
        assert!(Grid3::new(6, 1.0).is_err());
        assert!(Grid3::new(9, 1.0).is_err());
        assert!(Grid3::new(8, 0.0).is_err());
        assert!(Grid3::new(8, -1.0).is_err());
    }

    #[test]
    fn unit_lattice_on_two_pi_box() {
        let g = Grid3::new(8, 2.0 * PI).unwrap();
        let mut ks: Vec<i64> = (0..8).map(|j| g.wavenumber_index(j)).collect();
        ks.sort();
        assert_eq!(ks, (-4..4).collect::<Vec<_>>());
        for j in 0..8 {
            let xi = g.wavenumber(j);
            assert!((xi - xi.round()).abs() < 1e-14);
        }
        let zeros = g
            .freq_lattice()
            .filter(|xi| xi.iter().all(|&c| c == 0.0))
            .count();
        assert_eq!(zeros, 1);
        assert_eq!(g.freq_lattice().count(), 512);
    }

    #[test]
    fn lattice_is_distinct() {
        let g = Grid3::new(8, 3.0).unwrap();
        let mut seen = std::collections::HashSet::new();
        for idx in 0..g.len() {
            assert!(seen.insert(g.integer_wave_vector(idx)));
        }
    }

    #[test]
    fn smallest_frequency_on_unit_box() {
        let g = Grid3::new(16, 1.0).unwrap();
        let smallest = g
            .freq_lattice()
            .map(|xi| (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt())
            .filter(|&r| r > 0.0)
            .fold(f64::INFINITY, f64::min);
        assert!((smallest - 2.0 * PI).abs() < 1e-12);
        assert_eq!(g.spacing() * g.n() as f64, g.box_length());
    }

    #[test]
    fn mirror_is_involution() {
        let g = Grid3::new(8, 1.0).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.mirror_index(g.mirror_index(idx)), idx);
        }
    }

    #[test]
    fn cutoff_support_and_partition() {
        for spec in [
            CutoffSpec::new(1.0, 5.0).unwrap(),
            CutoffSpec::new(0.5, 10.0).unwrap(),
        ] {
            for i in 0..4000 {
                let r = i as f64 * 0.01;
                let (l, m, h) = (spec.chi_low(r), spec.chi_mid(r), spec.chi_high(r));
                for v in [l, m, h] {
                    assert!((0.0..=1.0).contains(&v), "value {v} at r={r}");
                }
                assert!((l + m + h - 1.0).abs() <= 2.0 * f64::EPSILON);
                if r <= spec.c0 / 2.0 {
                    assert_eq!(l, 1.0);
                }
                if r >= spec.c0 {
                    assert_eq!(l, 0.0);
                }
                if r <= spec.c1 {
                    assert_eq!(h, 0.0);
                }
                if r >= 2.0 * spec.c1 {
                    assert_eq!(h, 1.0);
                }
            }
        }
        assert!(CutoffSpec::new(2.0, 1.0).is_err());
    }
}
