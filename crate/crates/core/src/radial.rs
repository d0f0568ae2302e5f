//! Continuum norms of fields whose Fourier transform is radial up to the
//! longitudinal/transverse split:
//!
//! `u_hat(xi) = (long(r) P + trans(r) (I - P)) e`, `P = xi xi^T / |xi|^2`,
//!
//! for a constant vector `e`. `L^2` norms reduce to one radial integral by
//! Plancherel; sup norms use the spherical-Bessel form of the inverse
//! transform.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `int_{S^2} |P e|^2` for a unit vector `e`.
pub const C_PARALLEL: f64 = 4.0 * PI / 3.0;
/// `int_{S^2} |(I - P) e|^2` for a unit vector `e`.
pub const C_PERP: f64 = 8.0 * PI / 3.0;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss-Kronrod 7/15 estimate and its error on `[a, b]`.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

const MAX_PIECES: usize = 20_000;

/// Globally adaptive Gauss-Kronrod quadrature. The tolerance is relative to
/// the integral of `|f|`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rtol: f64) -> Result<f64> {
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut err = e;
    let mut mass = v.abs();
    while heap.len() < MAX_PIECES {
        let tol = rtol * mass.max(total.abs());
        if err <= tol || err < 1e-300 {
            return Ok(total);
        }
        let piece = heap.pop().expect("nonempty");
        let m = 0.5 * (piece.a + piece.b);
        let (v1, e1) = gk15(&mut f, piece.a, m);
        let (v2, e2) = gk15(&mut f, m, piece.b);
        total += v1 + v2 - piece.value;
        err += e1 + e2 - piece.error;
        mass += v1.abs() + v2.abs() - piece.value.abs();
        heap.push(Piece {
            a: piece.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: m,
            b: piece.b,
            value: v2,
            error: e2,
        });
    }
    // recompute the error sum to remove drift before reporting
    let err: f64 = heap.iter().map(|p| p.error).sum();
    let total: f64 = heap.iter().map(|p| p.value).sum();
    if err <= rtol * total.abs() {
        return Ok(total);
    }
    Err(Error::Accuracy {
        achieved: err / total.abs().max(f64::MIN_POSITIVE),
    })
}

/// `int_0^inf f(r) dr` through `r = s / (1 - s)`.
pub fn integrate_half_line(f: impl Fn(f64) -> f64, rtol: f64) -> Result<f64> {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let one = 1.0 - s;
            let v = f(s / one) / (one * one);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rtol,
    )
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = z;
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (z * p - p0) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `( int_0^inf r^{2 alpha} |m(t, r)|^2 h(r)^2 (w_long C_PARALLEL + w_trans C_PERP) r^2 dr )^{1/2}`.
pub fn radial_l2_norm(
    t: f64,
    multiplier: impl Fn(f64, f64) -> f64,
    h: impl Fn(f64) -> f64,
    alpha: u32,
    weights: (f64, f64),
) -> Result<f64> {
    let angular = weights.0 * C_PARALLEL + weights.1 * C_PERP;
    let v = integrate_half_line(
        |r| {
            let m = multiplier(t, r) * h(r);
            r.powi(2 * alpha as i32 + 2) * m * m
        },
        1e-8,
    )?;
    Ok((angular * v).sqrt())
}

/// `||nabla^alpha u||_2` for `u_hat = (long P + trans (I - P)) e` with `|e| = 1`.
pub fn vector_l2(long: impl Fn(f64) -> f64, trans: impl Fn(f64) -> f64, alpha: u32) -> Result<f64> {
    let v = integrate_half_line(
        |r| {
            let l = long(r);
            let t = trans(r);
            r.powi(2 * alpha as i32 + 2) * (C_PARALLEL * l * l + C_PERP * t * t)
        },
        1e-8,
    )?;
    Ok(v.sqrt())
}

/// Spherical Bessel values `j_0..j_3` and the quotients `j_1/z`, `j_2/z`.
#[derive(Clone, Copy, Debug)]
pub struct SphBessel {
    pub j: [f64; 4],
    pub j1_over_z: f64,
    pub j2_over_z: f64,
}

pub fn sph_bessel(z: f64) -> SphBessel {
    if z < 2.0 {
        // j_n(z) = z^n s_n(z) with an entire series s_n
        let y = -0.5 * z * z;
        let mut s = [0.0; 4];
        let mut double_fact = 1.0;
        for (n, sn) in s.iter_mut().enumerate() {
            double_fact *= (2 * n + 1) as f64;
            let mut term = 1.0 / double_fact;
            let mut acc = term;
            for k in 1..40 {
                term *= y / (k as f64 * (2 * n + 2 * k + 1) as f64);
                acc += term;
                if term.abs() < 1e-18 * acc.abs() {
                    break;
                }
            }
            *sn = acc;
        }
        SphBessel {
            j: [s[0], z * s[1], z * z * s[2], z * z * z * s[3]],
            j1_over_z: s[1],
            j2_over_z: z * s[2],
        }
    } else {
        let (sn, cs) = z.sin_cos();
        let inv = 1.0 / z;
        let inv2 = inv * inv;
        let j0 = sn * inv;
        let j1 = sn * inv2 - cs * inv;
        let j2 = (3.0 * inv2 - 1.0) * sn * inv - 3.0 * cs * inv2;
        let j3 = (15.0 * inv2 * inv - 6.0 * inv) * sn * inv - (15.0 * inv2 - 1.0) * cs * inv;
        SphBessel {
            j: [j0, j1, j2, j3],
            j1_over_z: j1 * inv,
            j2_over_z: j2 * inv,
        }
    }
}

/// Sampling plan for [`vector_linf`].
#[derive(Clone, Copy, Debug)]
pub struct LinfWindow {
    /// Radius beyond which the symbols are negligible.
    pub r_max: f64,
    /// Largest `|x|` searched.
    pub rho_max: f64,
    /// Step of the coarse scan in `|x|`.
    pub rho_step: f64,
    /// Largest oscillation frequency of `r -> m(r) e^{i r |x|}`; sets the panel width.
    pub freq_max: f64,
}

/// `(2 pi)^{-3/2} 4 pi`
fn bessel_prefactor() -> f64 {
    4.0 * PI / (2.0 * PI).powf(1.5)
}

/// `sup_x |nabla^alpha u(x)|` (`alpha` = 0 or 1, Euclidean or Frobenius length)
/// for `u_hat = (long P + trans (I - P)) e` with `|e| = 1`.
///
/// The radial integrals use a composite 16-point Gauss-Legendre rule whose
/// panels resolve the fastest oscillation; the sup over `|x|` is a coarse scan
/// followed by golden-section refinement of the best candidates.
pub fn vector_linf(
    long: impl Fn(f64) -> f64,
    trans: impl Fn(f64) -> f64,
    alpha: u32,
    window: LinfWindow,
) -> Result<f64> {
    if alpha > 1 {
        return Err(Error::UnsupportedNorm(format!(
            "sup norm of derivatives of order {alpha}"
        )));
    }
    let (gx, gw) = gauss_legendre(16);
    let period = 2.0 * PI / window.freq_max.max(1e-300);
    let panels = ((window.r_max / period).ceil() as usize).max(8);
    let width = window.r_max / panels as f64;
    let mut nodes = Vec::with_capacity(panels * 16);
    for p in 0..panels {
        let a = p as f64 * width;
        for (x, w) in gx.iter().zip(&gw) {
            let r = a + 0.5 * width * (x + 1.0);
            let wt = 0.5 * width * w;
            let mt = trans(r);
            let md = long(r) - mt;
            nodes.push((r, wt, mt, md));
        }
    }
    let c = bessel_prefactor();
    let value_at = |rho: f64| -> f64 {
        if alpha == 0 {
            let (mut a, mut b) = (0.0, 0.0);
            for &(r, w, mt, md) in &nodes {
                let sb = sph_bessel(r * rho);
                let r2w = r * r * w;
                a += r2w * (mt * sb.j[0] + md * sb.j1_over_z);
                b -= r2w * md * sb.j[2];
            }
            let (a, b) = (c * a, c * b);
            a.abs().max((a + b).abs())
        } else {
            let (mut p, mut q, mut s) = (0.0, 0.0, 0.0);
            for &(r, w, mt, md) in &nodes {
                let sb = sph_bessel(r * rho);
                let r3w = r * r * r * w;
                p -= r3w * (mt * sb.j[1] + md * sb.j2_over_z);
                q += r3w * md * sb.j[3];
                s -= r3w * md * sb.j2_over_z;
            }
            let (p, q, s) = (c * p, c * q, c * s);
            // |T|_F^2 = P^2 + S^2 + c^2 K, maximised at c^2 = 0 or 1
            let base = p * p + s * s;
            let k = q * q + 5.0 * s * s + 2.0 * p * q + 4.0 * p * s + 4.0 * q * s;
            (base + k.max(0.0)).sqrt()
        }
    };
    Ok(sup_search(value_at, window.rho_max, window.rho_step))
}

/// Maximum of a continuous function on `[0, rho_max]`.
fn sup_search(f: impl Fn(f64) -> f64, rho_max: f64, step: f64) -> f64 {
    let count = ((rho_max / step).ceil() as usize).max(2);
    let h = rho_max / count as f64;
    let samples: Vec<f64> = (0..=count).map(|i| f(i as f64 * h)).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&i, &j| samples[j].total_cmp(&samples[i]));
    let mut best = samples[order[0]];
    for &i in order.iter().take(3) {
        let lo = (i as f64 - 1.0).max(0.0) * h;
        let hi = ((i + 1) as f64 * h).min(rho_max);
        best = best.max(golden_max(&f, lo, hi, 40));
    }
    best
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    f1.max(f2)
}
