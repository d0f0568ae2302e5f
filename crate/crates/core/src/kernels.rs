//! Closed-form Fourier symbols of the damped wave operator
//! `w'' - beta^2 Delta w - nu Delta w' = 0` at a single frequency radius `r`.
//!
//! With `a = nu r^2 / 2` and `D = a^2 - beta^2 r^2` the characteristic roots
//! are `sigma = -a +- sqrt(D)`. Every kernel is written through the entire
//! functions `S(y) = sinh(sqrt y)/sqrt y` and `C(y) = cosh(sqrt y)` evaluated
//! at `y = D t^2`, which removes the apparent singularity at the double root.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingParams {
    pub beta: f64,
    pub nu: f64,
}

impl DampingParams {
    pub fn new(beta: f64, nu: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite() && nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "damping parameters need beta > 0 and nu > 0, got beta={beta}, nu={nu}"
            )));
        }
        Ok(Self { beta, nu })
    }

    /// Radius `2 beta / nu` where the roots turn from complex to real.
    pub fn threshold(&self) -> f64 {
        2.0 * self.beta / self.nu
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    ComplexRoots,
    RealRoots,
    Degenerate,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::ComplexRoots => "complex_roots",
            Branch::RealRoots => "real_roots",
            Branch::Degenerate => "degenerate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    K0,
    K1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiffusionKind {
    G0,
    G1,
    K00,
    Phi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaveKind {
    W0,
    W1,
}

/// `(a, beta^2 r^2, D)` with `D` factored to keep digits near the threshold.
fn coefficients(p: &DampingParams, r: f64) -> (f64, f64, f64) {
    let a = 0.5 * p.nu * r * r;
    let br = p.beta * r;
    (a, br * br, (a - br) * (a + br))
}

/// Roots of `sigma^2 + nu r^2 sigma + beta^2 r^2 = 0`, larger real part first.
pub fn char_roots(p: &DampingParams, r: f64) -> (Complex64, Complex64, Branch) {
    let (a, b2, d) = coefficients(p, r);
    let (sp, sm) = if d >= 0.0 {
        let s = d.sqrt();
        // sigma_+ = -a + s written without cancellation
        let sp = if a + s > 0.0 { -b2 / (a + s) } else { 0.0 };
        (Complex64::new(sp, 0.0), Complex64::new(-a - s, 0.0))
    } else {
        let w = (-d).sqrt();
        (Complex64::new(-a, w), Complex64::new(-a, -w))
    };
    let gap = (sp - sm).norm();
    let branch = if gap < 1e-6 * sp.norm() + 1e-300 {
        Branch::Degenerate
    } else if d < 0.0 {
        Branch::ComplexRoots
    } else {
        Branch::RealRoots
    };
    (sp, sm, branch)
}

/// `C(y)` and `S(y)` for `|y| <= 1` by their Taylor series.
fn entire_series(y: f64) -> (f64, f64) {
    let mut c = 1.0;
    let mut s = 1.0;
    let mut term = 1.0;
    for k in 1..30 {
        let k = k as f64;
        // term = y^k / (2k)!
        term *= y / ((2.0 * k - 1.0) * (2.0 * k));
        c += term;
        let s_term = term / (2.0 * k + 1.0);
        s += s_term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    (c, s)
}

/// Kernel values with up to two time derivatives: index `l` holds `d^l/dt^l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSet {
    pub k0: [f64; 3],
    pub k1: [f64; 3],
}

/// `e^{-a t} C(D t^2)` and `e^{-a t} t S(D t^2)` away from the real-root
/// region `D t^2 > 1`.
fn oscillatory_envelope(a: f64, d: f64, t: f64) -> (f64, f64) {
    let y = d * t * t;
    let e = (-a * t).exp();
    if y.abs() <= 1.0 {
        let (c, s) = entire_series(y);
        (e * c, e * t * s)
    } else {
        let w = (-d).sqrt();
        (e * (w * t).cos(), e * (w * t).sin() / w)
    }
}

/// All kernel values and time derivatives at `(t, r)`.
pub fn kernel_set(t: f64, r: f64, p: &DampingParams) -> KernelSet {
    let (a, b2, d) = coefficients(p, r);
    if d * t * t > 1.0 {
        // Real roots: factor out e^{sigma_+ t} and keep E = e^{-2 s t} <= e^{-2}.
        let s = d.sqrt();
        let sp = -b2 / (a + s);
        let sm = -a - s;
        let lead = (sp * t).exp();
        let e = (-2.0 * s * t).exp();
        let w = lead / (2.0 * s);
        let k1 = lead * (-(-2.0 * s * t).exp_m1()) / (2.0 * s);
        let k1_t = w * (sp - sm * e);
        let k1_tt = w * (sp * sp - sm * sm * e);
        let k0 = w * (sp * e - sm);
        return KernelSet {
            k0: [k0, -b2 * k1, -b2 * k1_t],
            k1: [k1, k1_t, k1_tt],
        };
    }
    let (c, ts) = oscillatory_envelope(a, d, t);
    let k1_t = c - a * ts;
    KernelSet {
        k0: [c + a * ts, -b2 * ts, -b2 * k1_t],
        k1: [ts, k1_t, (a * a + d) * ts - 2.0 * a * c],
    }
}

/// `d^l/dt^l K_which(t, r)`.
pub fn kernel_hat(t: f64, r: f64, p: &DampingParams, which: KernelKind, l: usize) -> Result<f64> {
    if l > 2 {
        return Err(Error::UnsupportedOrder(l));
    }
    let set = kernel_set(t, r, p);
    Ok(match which {
        KernelKind::K0 => set.k0[l],
        KernelKind::K1 => set.k1[l],
    })
}

/// `sin(x t)/x`, equal to `t` at `x = 0`.
fn sin_over(x: f64, t: f64) -> f64 {
    let z = x * t;
    if z.abs() < 1e-4 {
        t * (1.0 - z * z / 6.0 + z.powi(4) / 120.0)
    } else {
        z.sin() / x
    }
}

/// `phi = sqrt(1 - nu^2 r^2 / (4 beta^2))` on `r < 2 beta / nu`.
pub fn phi(r: f64, p: &DampingParams) -> Result<f64> {
    let q = p.nu * r / (2.0 * p.beta);
    if !(r >= 0.0) || q >= 1.0 {
        return Err(Error::OutOfDomain(format!(
            "phi is real only for r < 2 beta / nu = {}, got r = {r}",
            p.threshold()
        )));
    }
    Ok(((1.0 - q) * (1.0 + q)).sqrt())
}

/// Diffusion waves `G0`, `G1`, the low-frequency kernel `K00` and `phi`.
///
/// `K00` is the analytic continuation `e^{-a t} C(D t^2)`, which equals
/// `e^{-a t} cos(beta r phi t)` below the threshold.
pub fn diffusion_hat(t: f64, r: f64, p: &DampingParams, which: DiffusionKind) -> Result<f64> {
    let heat = (-0.5 * p.nu * r * r * t).exp();
    let br = p.beta * r;
    Ok(match which {
        DiffusionKind::G0 => heat * (br * t).cos(),
        DiffusionKind::G1 => heat * sin_over(br, t),
        DiffusionKind::K00 => {
            let (a, b2, d) = coefficients(p, r);
            if d * t * t > 1.0 {
                let s = d.sqrt();
                let lead = (-b2 / (a + s) * t).exp();
                0.5 * lead * (1.0 + (-2.0 * s * t).exp())
            } else {
                oscillatory_envelope(a, d, t).0
            }
        }
        DiffusionKind::Phi => phi(r, p)?,
    })
}

/// Undamped wave kernels `cos(beta r t)` and `sin(beta r t)/(beta r)`.
pub fn wave_hat(t: f64, r: f64, p: &DampingParams, which: WaveKind) -> f64 {
    let br = p.beta * r;
    match which {
        WaveKind::W0 => (br * t).cos(),
        WaveKind::W1 => sin_over(br, t),
    }
}

/// Every scalar symbol at one `(t, r)`; `k00` is the trigonometric form and
/// `phi` is present only below the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelEval {
    pub t: f64,
    pub r: f64,
    pub k0: f64,
    pub k1: f64,
    pub k00: f64,
    pub g0: f64,
    pub g1: f64,
    pub phi: Option<f64>,
    pub branch: Branch,
}

pub fn evaluate(t: f64, r: f64, p: &DampingParams) -> KernelEval {
    let set = kernel_set(t, r, p);
    let (_, _, branch) = char_roots(p, r);
    KernelEval {
        t,
        r,
        k0: set.k0[0],
        k1: set.k1[0],
        k00: diffusion_hat(t, r, p, DiffusionKind::K00).expect("total"),
        g0: diffusion_hat(t, r, p, DiffusionKind::G0).expect("total"),
        g1: diffusion_hat(t, r, p, DiffusionKind::G1).expect("total"),
        phi: phi(r, p).ok(),
        branch,
    }
}

/// Residuals of the trigonometric representation below the threshold:
/// `|K0 - (nu r^2 / 2) K1 - K00|` and `|K1 - e^{-nu r^2 t/2} sin(beta r phi t)/(beta r phi)|`,
/// with `K00 = e^{-nu r^2 t/2} cos(beta r phi t)` evaluated independently of
/// the kernel code path.
pub fn lowfreq_residual(t: f64, r: f64, p: &DampingParams) -> Result<(f64, f64)> {
    let ph = phi(r, p)?;
    let set = kernel_set(t, r, p);
    let heat = (-0.5 * p.nu * r * r * t).exp();
    let omega = p.beta * r * ph;
    let k00 = heat * (omega * t).cos();
    let res_24 = (set.k0[0] - 0.5 * p.nu * r * r * set.k1[0] - k00).abs();
    let res_25 = (set.k1[0] - heat * sin_over(omega, t)).abs();
    Ok((res_24, res_25))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64, nu: f64) -> DampingParams {
        DampingParams::new(beta, nu).unwrap()
    }

    #[test]
    fn roots_at_double_point() {
        let (sp, sm, b) = char_roots(&params(1.0, 2.0), 1.0);
        assert_eq!(b, Branch::Degenerate);
        assert!((sp - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!((sm - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn roots_solve_the_quadratic() {
        let p = params(1.0, 1.0);
        let (sp, sm, b) = char_roots(&p, 1.0);
        assert_eq!(b, Branch::ComplexRoots);
        for s in [sp, sm] {
            assert!((s * s + s + 1.0).norm() < 1e-12);
        }
        assert!(sp.im > 0.0);
        let (sp, _, b) = char_roots(&p, 100.0);
        assert_eq!(b, Branch::RealRoots);
        assert!((sp.re + 1.0).abs() < 1e-3);
    }

    #[test]
    fn initial_values() {
        for r in [0.0, 0.3, 1.0, 2.0, 7.5] {
            let set = kernel_set(0.0, r, &params(1.3, 0.7));
            assert_eq!(set.k0[0], 1.0);
            assert_eq!(set.k1[0], 0.0);
            assert_eq!(set.k1[1], 1.0);
        }
    }

    #[test]
    fn zero_frequency_is_free_motion() {
        for t in [0.0, 0.5, 3.0, 40.0] {
            let set = kernel_set(t, 0.0, &params(2.0, 0.3));
            assert_eq!(set.k1[0], t);
            assert_eq!(set.k0[0], 1.0);
        }
    }

    #[test]
    fn confluent_value() {
        let k1 = kernel_hat(3.0, 1.0, &params(1.0, 2.0), KernelKind::K1, 0).unwrap();
        assert!((k1 - 3.0 * (-3.0f64).exp()).abs() < 1e-15);
        assert!(kernel_hat(1.0, 1.0, &params(1.0, 2.0), KernelKind::K1, 3).is_err());
    }

    #[test]
    fn continuity_across_threshold() {
        let p = params(1.0, 1.0);
        let r0 = p.threshold();
        for t in [0.5, 2.0, 10.0] {
            // the root threshold and the points where the evaluation switches forms
            let mut centers = vec![r0];
            for y in [-1.0, 1.0] {
                // (a - b)(a + b) t^2 = y, solved for r by bisection
                let (mut lo, mut hi) = if y < 0.0 { (1e-6, r0) } else { (r0, 10.0) };
                let f = |r: f64| coefficients(&p, r).2 * t * t - y;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if (f(mid) > 0.0) == (f(hi) > 0.0) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                centers.push(0.5 * (lo + hi));
            }
            for c in centers {
                let mut prev: Option<KernelSet> = None;
                for i in -200..=200 {
                    let r = c * (1.0 + i as f64 * 1e-13);
                    let cur = kernel_set(t, r, &p);
                    if let Some(prev) = prev {
                        for l in 0..3 {
                            assert!((cur.k0[l] - prev.k0[l]).abs() < 1e-9, "t={t} r={r}");
                            assert!((cur.k1[l] - prev.k1[l]).abs() < 1e-9, "t={t} r={r}");
                        }
                    }
                    prev = Some(cur);
                }
            }
        }
    }

    #[test]
    fn diffusion_limits() {
        let p = params(1.5, 0.4);
        for t in [0.0, 1.0, 9.0] {
            assert_eq!(diffusion_hat(t, 0.0, &p, DiffusionKind::G0).unwrap(), 1.0);
            assert_eq!(diffusion_hat(t, 0.0, &p, DiffusionKind::G1).unwrap(), t);
        }
        assert!(diffusion_hat(1.0, p.threshold(), &p, DiffusionKind::Phi).is_err());
    }

    #[test]
    fn wave_identities() {
        let p = params(0.8, 1.0);
        assert_eq!(wave_hat(0.0, 2.0, &p, WaveKind::W0), 1.0);
        assert_eq!(wave_hat(0.0, 2.0, &p, WaveKind::W1), 0.0);
        for (t, r) in [(0.3, 0.5), (4.0, 2.0), (17.0, 0.01)] {
            let w0 = wave_hat(t, r, &p, WaveKind::W0);
            let w1 = wave_hat(t, r, &p, WaveKind::W1);
            let br = p.beta * r;
            assert!((br * br * w1 * w1 + w0 * w0 - 1.0).abs() < 1e-14);
            assert!(w1.abs() <= t);
        }
    }

    #[test]
    fn lowfreq_domain() {
        let p = params(1.0, 1.0);
        let (a, b) = lowfreq_residual(10.0, 0.1, &p).unwrap();
        assert!(a <= 1e-10 * 11.0 && b <= 1e-10 * 11.0, "{a} {b}");
        assert!(lowfreq_residual(1.0, 2.1, &p).is_err());
        let (_, b) = lowfreq_residual(2.0, 0.0, &p).unwrap();
        assert_eq!(b, 0.0);
    }
}
