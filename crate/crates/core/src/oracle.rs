//! Independent per-mode reference: direct numerical integration of
//! `w'' + nu r^2 w' + beta^2 r^2 w = f(t)` by adaptive Dormand-Prince 5(4).

use crate::error::{Error, Result};
use crate::kernels::DampingParams;

/// Sampled forcing `f(t)`, interpolated by local cubic Lagrange polynomials.
#[derive(Clone, Debug)]
pub struct Forcing {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Forcing {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 4 {
            return Err(Error::InsufficientSamples(format!(
                "forcing needs at least 4 matching samples, got {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("forcing times must increase".into()));
        }
        Ok(Self { times, values })
    }

    /// Samples `f` at `count` equispaced points on `[0, t_end]`.
    pub fn sample(f: impl Fn(f64) -> f64, t_end: f64, count: usize) -> Result<Self> {
        let count = count.max(4);
        let times: Vec<f64> = (0..count)
            .map(|i| t_end * i as f64 / (count - 1) as f64)
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("at least four samples")
    }

    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        let hi = self.times.partition_point(|&x| x < t).clamp(2, n - 2);
        let lo = hi - 2;
        let xs = &self.times[lo..lo + 4];
        let ys = &self.values[lo..lo + 4];
        let mut acc = 0.0;
        for i in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if i != j {
                    w *= (t - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc += w * ys[i];
        }
        acc
    }
}

// Dormand-Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-14;

/// `(w(t), w'(t))` for initial data `(w0, w1)` and optional forcing.
pub fn mode_oracle(
    t: f64,
    r: f64,
    p: &DampingParams,
    w0: f64,
    w1: f64,
    forcing: Option<&Forcing>,
) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParams(format!("time must be nonnegative, got {t}")));
    }
    if let Some(f) = forcing {
        if f.end() < t {
            return Err(Error::Range(format!(
                "forcing covers [0, {}] but t = {t}",
                f.end()
            )));
        }
    }
    let damp = p.nu * r * r;
    let stiff = p.beta * p.beta * r * r;
    let rhs = |s: f64, y: [f64; 2]| -> [f64; 2] {
        let f = forcing.map_or(0.0, |f| f.at(s));
        [y[1], f - damp * y[1] - stiff * y[0]]
    };
    let mut y = [w0, w1];
    if t == 0.0 {
        return Ok((y[0], y[1]));
    }
    let scale = 1.0 + damp + stiff.sqrt();
    let mut h = (1e-3 / scale).min(t);
    let mut s = 0.0;
    let mut k1 = rhs(s, y);
    let h_min = 1e-14 * t.max(1.0);
    while s < t {
        if s + h > t {
            h = t - s;
        }
        let stage = |k: &[[f64; 2]], coeffs: &[f64]| -> [f64; 2] {
            let mut out = y;
            for (kk, c) in k.iter().zip(coeffs) {
                out[0] += h * c * kk[0];
                out[1] += h * c * kk[1];
            }
            out
        };
        let k2 = rhs(s + C2 * h, stage(&[k1], &[A21]));
        let k3 = rhs(s + C3 * h, stage(&[k1, k2], &[A31, A32]));
        let k4 = rhs(s + C4 * h, stage(&[k1, k2, k3], &[A41, A42, A43]));
        let k5 = rhs(s + C5 * h, stage(&[k1, k2, k3, k4], &[A51, A52, A53, A54]));
        let k6 = rhs(s + h, stage(&[k1, k2, k3, k4, k5], &[A61, A62, A63, A64, A65]));
        let y_new = stage(&[k1, k3, k4, k5, k6], &[B1, B3, B4, B5, B6]);
        let k7 = rhs(s + h, y_new);
        let mut err = 0.0_f64;
        for i in 0..2 {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let tol = ATOL + RTOL * y[i].abs().max(y_new[i].abs());
            err = err.max((e / tol).abs());
        }
        if err <= 1.0 {
            s += h;
            y = y_new;
            k1 = k7;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < h_min && s < t {
            return Err(Error::Stiffness(s));
        }
    }
    Ok((y[0], y[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        // nu r^2 small compared to beta r: w = cos-like; compare with exact damped cosine.
        let p = DampingParams::new(1.0, 1e-3).unwrap();
        let (w, _) = mode_oracle(5.0, 1.0, &p, 1.0, 0.0, None).unwrap();
        let a: f64 = 0.5e-3;
        let om = (1.0 - a * a).sqrt();
        let exact = (-a * 5.0f64).exp() * ((om * 5.0).cos() + a / om * (om * 5.0).sin());
        assert!((w - exact).abs() < 1e-9);
    }

    #[test]
    fn degenerate_point() {
        let p = DampingParams::new(1.0, 2.0).unwrap();
        let (w, _) = mode_oracle(3.0, 1.0, &p, 0.0, 1.0, None).unwrap();
        assert!((w - 3.0 * (-3.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn free_particle_under_constant_force() {
        let p = DampingParams::new(1.0, 1.0).unwrap();
        let f = Forcing::sample(|_| 2.0, 4.0, 10).unwrap();
        let (w, v) = mode_oracle(4.0, 0.0, &p, 1.0, 0.5, Some(&f)).unwrap();
        assert!((w - (1.0 + 0.5 * 4.0 + 16.0)).abs() < 1e-9);
        assert!((v - (0.5 + 8.0)).abs() < 1e-9);
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let f = Forcing::sample(|t| 1.0 - 2.0 * t + t * t * t, 3.0, 7).unwrap();
        for t in [0.0, 0.1, 1.234, 2.9, 3.0] {
            assert!((f.at(t) - (1.0 - 2.0 * t + t * t * t)).abs() < 1e-12);
        }
        assert!(Forcing::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
    }
}
