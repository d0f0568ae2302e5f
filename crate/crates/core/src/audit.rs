//! Numerical checks of interpolation inequalities, multiplier bounds,
//! exponential decay away from the origin and pointwise symbol bounds.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{decay_slope, DecayReport};
use crate::elastic::{matrix_kernel, LameParams};
use crate::error::{Error, Result};
use crate::fft::Transformer;
use crate::field::{PhysicalField, SpectralField};
use crate::grid::{CutoffSpec, FrequencyPart, Grid3};
use crate::kernels::{DampingParams, KernelKind};
use crate::norms::seminorm;
use crate::symbols::derivative_value;

type C = Complex64;

/// Value with first and second derivative in one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Jet2 {
    pub fn var(x: f64) -> Self {
        Self { v: x, d: 1.0, dd: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { v: c, d: 0.0, dd: 0.0 }
    }

    fn chain(self, f: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f,
            d: f1 * self.d,
            dd: f2 * self.d * self.d + f1 * self.dd,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    /// `cos x - 1` without cancellation.
    pub fn cos_m1(self) -> Self {
        let (s, c) = self.v.sin_cos();
        let h = (0.5 * self.v).sin();
        self.chain(-2.0 * h * h, -s, -c)
    }

    /// `sin x - x` without cancellation.
    pub fn sin_m_id(self) -> Self {
        let x = self.v;
        let value = if x.abs() < 0.1 {
            // -x^3/3! + x^5/5! - ...
            let x2 = x * x;
            let mut term = -x * x2 / 6.0;
            let mut acc = term;
            for k in 1..8 {
                term *= -x2 / ((2 * k + 2) as f64 * (2 * k + 3) as f64);
                acc += term;
            }
            acc
        } else {
            x.sin() - x
        };
        let h = (0.5 * x).sin();
        self.chain(value, -2.0 * h * h, -x.sin())
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            v: c * self.v,
            d: c * self.d,
            dd: c * self.dd,
        }
    }

    /// `|grad f|` for the radial function `f(|xi|)` at radius `r`.
    pub fn radial_gradient(&self) -> f64 {
        self.d.abs()
    }

    /// Frobenius norm of the Hessian of the radial function `f(|xi|)`.
    pub fn radial_hessian(&self, r: f64) -> f64 {
        let q = self.d / r;
        (self.dd * self.dd + 2.0 * q * q).sqrt()
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            d: self.d + o.d,
            dd: self.dd + o.dd,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        let inv = 1.0 / o.v;
        let recip = o.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
        self * recip
    }
}

/// Central differences `(f', f'')` with step `h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
    let (fp, f0, fm) = (f(x + h), f(x), f(x - h));
    ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
}

/// Pointwise symbol estimates on the low-frequency region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundId {
    B331,
    B332,
    B333,
    B334,
    B335,
    B336,
    B337,
}

impl BoundId {
    pub const ALL: [BoundId; 7] = [
        BoundId::B331,
        BoundId::B332,
        BoundId::B333,
        BoundId::B334,
        BoundId::B335,
        BoundId::B336,
        BoundId::B337,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown bound `{s}`")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundId::B331 => "B331",
            BoundId::B332 => "B332",
            BoundId::B333 => "B333",
            BoundId::B334 => "B334",
            BoundId::B335 => "B335",
            BoundId::B336 => "B336",
            BoundId::B337 => "B337",
        }
    }
}

/// Jets of the oscillatory pieces at `(t, r)`: `cos A`, `sin A`,
/// `cos A - cos B` and `sin A - sin B - (A - B) cos B`, where
/// `A = t beta r phi`, `B = t beta r`.
struct Pieces {
    cos_a: Jet2,
    sin_a: Jet2,
    cos_diff: Jet2,
    sin_rem: Jet2,
    phi_m1: Jet2,
}

fn pieces(t: f64, r: f64, p: &DampingParams) -> Pieces {
    let x = Jet2::var(r);
    let q = x.scale(p.nu / (2.0 * p.beta));
    let root = (Jet2::constant(1.0) - q * q).sqrt();
    let phi_m1 = -(q * q) / (Jet2::constant(1.0) + root);
    let b = x.scale(t * p.beta);
    let delta = b * phi_m1;
    let a = b + delta;
    let (cb, sb) = (b.cos(), b.sin());
    Pieces {
        cos_a: a.cos(),
        sin_a: a.sin(),
        cos_diff: cb * delta.cos_m1() - sb * delta.sin(),
        sin_rem: sb * delta.cos_m1() + cb * delta.sin_m_id(),
        phi_m1,
    }
}

/// Left side and majorant (without constant) of a bound at `(t, r)`.
pub fn bound_terms(bound: BoundId, t: f64, r: f64, p: &DampingParams) -> Result<(f64, f64)> {
    if !(r > 0.0) || r >= p.threshold() {
        return Err(Error::OutOfDomain(format!(
            "r = {r} is outside (0, 2 beta / nu = {})",
            p.threshold()
        )));
    }
    let pc = pieces(t, r, p);
    Ok(match bound {
        BoundId::B331 => (pc.cos_a.radial_gradient() + pc.sin_a.radial_gradient(), t),
        BoundId::B332 => (
            pc.cos_a.radial_hessian(r) + pc.sin_a.radial_hessian(r),
            t * t + t / r,
        ),
        BoundId::B333 => (pc.cos_diff.radial_gradient(), t * t * r.powi(3) + t * r * r),
        BoundId::B334 => (pc.cos_diff.radial_hessian(r), t * t * r * r + t * r),
        BoundId::B335 => (
            pc.sin_rem.radial_gradient(),
            t.powi(3) * r.powi(6) + t * t * r.powi(5) + t * r * r,
        ),
        BoundId::B336 => (
            pc.sin_rem.radial_hessian(r),
            t.powi(4) * r.powi(6) + t * t * r * r + t * r,
        ),
        BoundId::B337 => {
            // h = e^{-nu r^2 t / 2} (phi - 1) = e^{..} O(r^2), majorant e^{-c(1+t) r^2} r^{2-k}
            let x = Jet2::var(r);
            let h = (x * x).scale(-0.5 * p.nu * t).exp() * pc.phi_m1;
            let env = (-0.25 * p.nu * (1.0 + t) * r * r).exp();
            let k1 = h.radial_gradient() / (env * r);
            let k2 = h.radial_hessian(r) / env;
            (k1.max(k2), 1.0)
        }
    })
}

/// Result of [`symbol_bound_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundScanReport {
    pub bound_id: BoundId,
    pub t_range: (f64, f64),
    pub r_range: (f64, f64),
    pub beta: f64,
    pub nu: f64,
    pub seed: u64,
    pub samples: usize,
    pub max_ratio: f64,
    pub argmax: (f64, f64),
    /// Sup ratio with twice the sample density per axis.
    pub max_ratio_doubled: f64,
    pub stable: bool,
}

fn scan_once(
    bound: BoundId,
    p: &DampingParams,
    t_range: (f64, f64),
    r_range: (f64, f64),
    per_axis: usize,
    seed: u64,
) -> Result<(f64, (f64, f64))> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lt0, lt1) = (t_range.0.ln(), t_range.1.ln());
    let (lr0, lr1) = (r_range.0.ln(), r_range.1.ln());
    let mut best = (0.0, (t_range.0, r_range.0));
    for i in 0..per_axis {
        for j in 0..per_axis {
            // stratified log-uniform sample, endpoints included
            let u = if i == 0 { 0.0 } else if i + 1 == per_axis { 1.0 } else { (i as f64 + rng.random::<f64>()) / per_axis as f64 };
            let v = if j == 0 { 0.0 } else if j + 1 == per_axis { 1.0 } else { (j as f64 + rng.random::<f64>()) / per_axis as f64 };
            let t = (lt0 + u * (lt1 - lt0)).exp();
            let r = (lr0 + v * (lr1 - lr0)).exp().min(r_range.1);
            let (lhs, maj) = bound_terms(bound, t, r, p)?;
            if maj > 0.0 {
                let ratio = lhs / maj;
                if !ratio.is_finite() {
                    return Err(Error::Fit(format!("non-finite ratio at t={t}, r={r}")));
                }
                if ratio > best.0 {
                    best = (ratio, (t, r));
                }
            }
        }
    }
    Ok(best)
}

/// Sup over a sampled `(t, r)` box of `|left side| / majorant`, repeated at
/// double density; `stable` when the two sups differ by less than 2x.
pub fn symbol_bound_scan(
    bound: BoundId,
    params: &DampingParams,
    t_range: (f64, f64),
    r_range: (f64, f64),
    per_axis: usize,
    seed: u64,
) -> Result<BoundScanReport> {
    let c0 = CutoffSpec::from_speeds(params.beta, params.beta, params.nu)?.c0;
    if !(r_range.0 > 0.0 && r_range.1 <= c0 * (1.0 + 1e-12) && r_range.0 < r_range.1) {
        return Err(Error::OutOfDomain(format!(
            "r range {r_range:?} must lie in (0, c0 = {c0}]"
        )));
    }
    if !(t_range.0 > 0.0 && t_range.0 < t_range.1) {
        return Err(Error::Window(format!("bad time range {t_range:?}")));
    }
    if per_axis * per_axis < 1000 {
        return Err(Error::InsufficientSamples(format!(
            "{} samples; at least 1000 needed",
            per_axis * per_axis
        )));
    }
    let (m1, arg) = scan_once(bound, params, t_range, r_range, per_axis, seed)?;
    let (m2, _) = scan_once(bound, params, t_range, r_range, 2 * per_axis, seed.wrapping_add(1))?;
    let stable = m1 > 0.0 && m2 > 0.0 && (m1 / m2).max(m2 / m1) < 2.0;
    Ok(BoundScanReport {
        bound_id: bound,
        t_range,
        r_range,
        beta: params.beta,
        nu: params.nu,
        seed,
        samples: per_axis * per_axis,
        max_ratio: m1,
        argmax: arg,
        max_ratio_doubled: m2,
        stable,
    })
}

/// Inequalities checked by [`inequality_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Inequality {
    /// `|g|_inf <= C |g|_2^{1/4} |grad^2 g|_2^{3/4}`
    GnInf,
    /// `|g|_1 <= C |g|_2^{1/4} | |x|^2 g |_2^{3/4}`
    GnL1,
    /// `|grad g|_{2p} <= C |g|_inf^{1/2} |grad^2 g|_p^{1/2}`
    Grad2p { p: f64 },
    /// `|g|_6 <= C |grad g|_2`
    Sob6,
    /// `|grad g|_2 <= C (|grad g|_1 + |grad^3 g|_2)`
    LowHighSplit,
    /// `|R_a g|_p <= C |g|_p`
    Riesz { axis: usize, p: f64 },
    /// `| d_t^ell grad^alpha R_a R_b F^{-1}[e^{-nu t |xi|^2/2} chi_L] |_1 <= C (1+t)^{-alpha/2-ell}`
    HeatL1 {
        nu: f64,
        t: f64,
        alpha: u32,
        ell: u32,
        a: usize,
        b: usize,
        c0: f64,
    },
}

fn lp_of(mags: &[f64], p: f64, w: f64) -> f64 {
    if p.is_infinite() {
        return mags.iter().cloned().fold(0.0, f64::max);
    }
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let s: f64 = mags.iter().map(|m| (m / peak).powf(p)).sum();
    peak * (w * s).powf(1.0 / p)
}

/// All multi-indices of order `k` with their multiplicity among ordered tuples.
fn multi_indices(k: u32) -> Vec<([u32; 3], f64)> {
    let fact = |n: u32| (1..=n).product::<u32>() as f64;
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=(k - a) {
            let c = k - a - b;
            out.push(([a, b, c], fact(k) / (fact(a) * fact(b) * fact(c))));
        }
    }
    out
}

/// Pointwise Frobenius norm of `grad^k g` for a spectral field.
fn derivative_magnitude(tr: &Transformer, f: &SpectralField, k: u32) -> Vec<f64> {
    let grid = *f.grid();
    let mut acc = vec![0.0; grid.len()];
    let mut pending: Vec<(Vec<C>, f64)> = Vec::new();
    let flush = |pending: &mut Vec<(Vec<C>, f64)>, acc: &mut Vec<f64>| {
        while let Some((a, wa)) = pending.pop() {
            if let Some((b, wb)) = pending.pop() {
                let (pa, pb) = tr.inverse_real_pair(&a, &b);
                for i in 0..acc.len() {
                    acc[i] += wa * pa[i] * pa[i] + wb * pb[i] * pb[i];
                }
            } else {
                let pa = tr.inverse_real(&a);
                for i in 0..acc.len() {
                    acc[i] += wa * pa[i] * pa[i];
                }
            }
        }
    };
    for (alpha, mult) in multi_indices(k) {
        for comp in &f.comps {
            let d: Vec<C> = (0..grid.len())
                .map(|i| derivative_value(&grid, i, grid.wave_vector(i), alpha) * comp[i])
                .collect();
            pending.push((d, mult));
            if pending.len() == 2 {
                flush(&mut pending, &mut acc);
            }
        }
    }
    flush(&mut pending, &mut acc);
    acc.into_iter().map(f64::sqrt).collect()
}

fn magnitudes(f: &PhysicalField) -> Vec<f64> {
    (0..f.grid().len())
        .map(|i| (f.comps[0][i].powi(2) + f.comps[1][i].powi(2) + f.comps[2][i].powi(2)).sqrt())
        .collect()
}

fn ratio(lhs: f64, rhs: f64) -> Result<f64> {
    if !(rhs > 0.0) {
        return Err(Error::DegenerateInput(format!("right side is {rhs}")));
    }
    Ok(lhs / rhs)
}

/// `L^1` norm of the heat-multiplier kernel on `grid`, with the pointwise
/// Frobenius length over all spatial derivatives of order `alpha`.
pub fn heat_multiplier_l1(grid: &Grid3, nu: f64, t: f64, alpha: u32, ell: u32, a: usize, b: usize, c0: f64) -> Result<f64> {
    if a > 2 || b > 2 || alpha + ell == 0 {
        return Err(Error::InvalidParams(format!(
            "heat multiplier needs axes < 3 and alpha + ell >= 1, got a={a}, b={b}, alpha={alpha}, ell={ell}"
        )));
    }
    let cut = CutoffSpec::new(c0, 2.0 * c0)?;
    let mut sym = vec![C::new(0.0, 0.0); grid.len()];
    for (i, s) in sym.iter_mut().enumerate() {
        let xi = grid.wave_vector(i);
        let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if r2 == 0.0 {
            continue;
        }
        let r = r2.sqrt();
        let base = (-0.5 * nu * r2 * t).exp() * cut.chi_low(r) * xi[a] * xi[b] / r2 * (-0.5 * nu * r2).powi(ell as i32);
        *s = C::new(base, 0.0);
    }
    let f = SpectralField::new(*grid, [sym, vec![C::new(0.0, 0.0); grid.len()], vec![C::new(0.0, 0.0); grid.len()]])?;
    let tr = Transformer::new(*grid);
    let mags = if alpha == 0 {
        tr.inverse_real(&f.comps[0]).into_iter().map(f64::abs).collect()
    } else {
        let single = SpectralField::new(*grid, [f.comps[0].clone(), vec![C::new(0.0, 0.0); grid.len()], vec![C::new(0.0, 0.0); grid.len()]])?;
        derivative_magnitude_single(&tr, &single, alpha)
    };
    Ok(grid.cell_volume() * mags.iter().sum::<f64>())
}

fn derivative_magnitude_single(tr: &Transformer, f: &SpectralField, k: u32) -> Vec<f64> {
    // only the first component is populated
    let grid = *f.grid();
    let mut acc = vec![0.0; grid.len()];
    let specs: Vec<(Vec<C>, f64)> = multi_indices(k)
        .into_iter()
        .map(|(alpha, mult)| {
            let d = (0..grid.len())
                .map(|i| derivative_value(&grid, i, grid.wave_vector(i), alpha) * f.comps[0][i])
                .collect();
            (d, mult)
        })
        .collect();
    for pair in specs.chunks(2) {
        if pair.len() == 2 {
            let (pa, pb) = tr.inverse_real_pair(&pair[0].0, &pair[1].0);
            for i in 0..acc.len() {
                acc[i] += pair[0].1 * pa[i] * pa[i] + pair[1].1 * pb[i] * pb[i];
            }
        } else {
            let pa = tr.inverse_real(&pair[0].0);
            for i in 0..acc.len() {
                acc[i] += pair[0].1 * pa[i] * pa[i];
            }
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

/// Left side divided by the right side without its constant.
pub fn inequality_check(ineq: &Inequality, g: &PhysicalField) -> Result<f64> {
    let grid = *g.grid();
    let w = grid.cell_volume();
    let tr = Transformer::new(grid);
    let spec = g.to_spectral_with(&tr)?;
    match *ineq {
        Inequality::GnInf => {
            let lhs = lp_of(&magnitudes(g), f64::INFINITY, w);
            ratio(lhs, seminorm(&spec, 0).powf(0.25) * seminorm(&spec, 2).powf(0.75))
        }
        Inequality::GnL1 => {
            let mags = magnitudes(g);
            let lhs = lp_of(&mags, 1.0, w);
            let weighted: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.position(i);
                    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * mags[i]
                })
                .collect();
            ratio(lhs, seminorm(&spec, 0).powf(0.25) * lp_of(&weighted, 2.0, w).powf(0.75))
        }
        Inequality::Grad2p { p } => {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::InvalidExponent(p));
            }
            let lhs = lp_of(&derivative_magnitude(&tr, &spec, 1), 2.0 * p, w);
            let sup = lp_of(&magnitudes(g), f64::INFINITY, w);
            ratio(lhs, (sup * lp_of(&derivative_magnitude(&tr, &spec, 2), p, w)).sqrt())
        }
        Inequality::Sob6 => ratio(lp_of(&magnitudes(g), 6.0, w), seminorm(&spec, 1)),
        Inequality::LowHighSplit => {
            let l1 = lp_of(&derivative_magnitude(&tr, &spec, 1), 1.0, w);
            ratio(seminorm(&spec, 1), l1 + seminorm(&spec, 3))
        }
        Inequality::Riesz { axis, p } => {
            if axis > 2 {
                return Err(Error::InvalidParams(format!("axis {axis}")));
            }
            if !(p > 1.0) {
                return Err(Error::InvalidExponent(p));
            }
            let mut r = spec.clone();
            for idx in 0..grid.len() {
                let xi = grid.wave_vector(idx);
                let m = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                let s = if m == 0.0 || grid.nyquist_axes(idx)[axis] {
                    C::new(0.0, 0.0)
                } else {
                    C::new(0.0, -xi[axis] / m)
                };
                for c in r.comps.iter_mut() {
                    c[idx] *= s;
                }
            }
            let rp = r.to_physical_with(&tr)?;
            ratio(lp_of(&magnitudes(&rp), p, w), lp_of(&magnitudes(g), p, w))
        }
        Inequality::HeatL1 { nu, t, alpha, ell, a, b, c0 } => {
            let v = heat_multiplier_l1(&grid, nu, t, alpha, ell, a, b, c0)?;
            ratio(v, (1.0 + t).powf(-(alpha as f64) / 2.0 - ell as f64))
        }
    }
}

/// Ratios of `inequality_check` for the dilations `g(lambda x)`.
pub fn dilation_scan(
    ineq: &Inequality,
    grid: &Grid3,
    g: impl Fn([f64; 3]) -> [f64; 3],
    lambdas: &[f64],
) -> Result<Vec<f64>> {
    lambdas
        .iter()
        .map(|&l| {
            let f = PhysicalField::from_fn(*grid, |x| g([l * x[0], l * x[1], l * x[2]]));
            inequality_check(ineq, &f)
        })
        .collect()
}

/// Decay series of the heat-multiplier `L^1` norm at the given times.
pub fn heat_l1_series(grid: &Grid3, nu: f64, alpha: u32, ell: u32, c0: f64, times: &[f64]) -> Result<DecayReport> {
    let values = times
        .iter()
        .map(|&t| heat_multiplier_l1(grid, nu, t, alpha, ell, 0, 1, c0))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = decay_slope(times, &values)?;
    rep.expected = Some(-(alpha as f64) / 2.0 - ell as f64);
    rep.norm_id = format!("heat_l1(alpha={alpha},ell={ell})");
    Ok(rep)
}

/// Exponential fit `log v(t) ~ log A - c t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub c_fit: f64,
    /// 95% half-width of `c_fit`.
    pub c_ci: f64,
    /// Smallest `P` with `v(t) <= P e^{-c_fit t} reference` on the window.
    pub prefactor_fit: f64,
    /// Largest deviation from the fitted line, as a fraction of the log-range.
    pub residual: f64,
}

/// `|| K_part(t) g ||_2` with the matrix kernel of the elastic system.
pub fn part_norm(part: FrequencyPart, which: KernelKind, g: &SpectralField, lame: &LameParams, t: f64) -> Result<f64> {
    part_norm_with(part, which, g, lame, t, &lame.cutoffs())
}

/// [`part_norm`] with explicit cutoffs.
pub fn part_norm_with(
    part: FrequencyPart,
    which: KernelKind,
    g: &SpectralField,
    lame: &LameParams,
    t: f64,
    cut: &CutoffSpec,
) -> Result<f64> {
    let grid = *g.grid();
    let mut out = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let xi = grid.wave_vector(idx);
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        let chi = cut.chi(part, r);
        if chi == 0.0 {
            continue;
        }
        let m = matrix_kernel(t, xi, lame, which, 0)?;
        for a in 0..3 {
            let mut s = C::new(0.0, 0.0);
            for b in 0..3 {
                s += m[a][b] * g.comps[b][idx];
            }
            out.comps[a][idx] = chi * s;
        }
    }
    Ok(seminorm(&out, 0))
}

/// Fits `|| K_part(t) g ||_2` on `times` to an exponential and reports the
/// prefactor relative to `reference` (for example `|| grad g ||_2`).
pub fn decay_fit(
    part: FrequencyPart,
    which: KernelKind,
    g: &SpectralField,
    lame: &LameParams,
    times: &[f64],
    reference: f64,
) -> Result<ExpFit> {
    decay_fit_with(part, which, g, lame, times, reference, &lame.cutoffs())
}

/// [`decay_fit`] with explicit cutoffs.
pub fn decay_fit_with(
    part: FrequencyPart,
    which: KernelKind,
    g: &SpectralField,
    lame: &LameParams,
    times: &[f64],
    reference: f64,
    cut: &CutoffSpec,
) -> Result<ExpFit> {
    if times.len() < 8 || times.iter().any(|t| !(*t >= 0.1 && *t <= 30.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Window("need at least 8 increasing times inside [0.1, 30]".into()));
    }
    if part == FrequencyPart::Low {
        return Err(Error::InvalidParams("exponential decay applies to the middle and high parts".into()));
    }
    let values = times
        .iter()
        .map(|&t| part_norm_with(part, which, g, lame, t, cut))
        .collect::<Result<Vec<_>>>()?;
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("the part vanishes on the window".into()));
    }
    let mut running = values[0];
    for &v in &values[1..] {
        if v > 1.05 * running {
            return Err(Error::Fit("series is not monotone".into()));
        }
        running = running.min(v);
    }
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let stt: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let sty: f64 = times.iter().zip(&y).map(|(t, v)| (t - mt) * (v - my)).sum();
    let slope = sty / stt;
    let icpt = my - slope * mt;
    let ssr: f64 = times.iter().zip(&y).map(|(t, v)| (v - icpt - slope * t).powi(2)).sum();
    let se = (ssr / (n - 2.0) / stt).sqrt();
    let tq = statrs::distribution::ContinuousCDF::inverse_cdf(
        &statrs::distribution::StudentsT::new(0.0, 1.0, n - 2.0).map_err(|e| Error::Fit(e.to_string()))?,
        0.975,
    );
    let range = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
    let dev = times
        .iter()
        .zip(&y)
        .map(|(t, v)| (v - icpt - slope * t).abs())
        .fold(0.0, f64::max);
    let c_fit = -slope;
    if !(reference > 0.0) {
        return Err(Error::DegenerateInput("reference norm must be positive".into()));
    }
    let prefactor = times
        .iter()
        .zip(&values)
        .map(|(t, v)| v * (c_fit * t).exp() / reference)
        .fold(0.0, f64::max);
    Ok(ExpFit {
        times: times.to_vec(),
        values,
        c_fit,
        c_ci: tq * se,
        prefactor_fit: prefactor,
        residual: if range > 0.0 { dev / range } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_matches_closed_form() {
        let x = Jet2::var(0.7);
        let f = (x * x).sin() / (x + Jet2::constant(2.0)).exp();
        let g = |r: f64| (r * r).sin() / (r + 2.0).exp();
        let (d, dd) = central_difference(g, 0.7, 1e-4);
        assert!((f.v - g(0.7)).abs() < 1e-15);
        assert!((f.d - d).abs() < 1e-7);
        assert!((f.dd - dd).abs() < 1e-6);
    }

    #[test]
    fn cancellation_free_pieces() {
        // Taylor series oracle, valid to rounding for |x| < 0.5
        let series = |x: f64, start: u32| {
            let mut acc = 0.0;
            let mut k = start;
            let mut sign = -1.0;
            while k < start + 40 {
                acc += sign * x.powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
                sign = -sign;
                k += 2;
            }
            acc
        };
        for x in [1e-9, 1e-4, 0.05, 0.3] {
            let j = Jet2::var(x);
            let c = series(x, 2);
            let s = series(x, 3);
            assert!((j.cos_m1().v - c).abs() <= 1e-15 * c.abs(), "x={x}");
            assert!((j.sin_m_id().v - s).abs() <= 1e-13 * s.abs(), "x={x}");
        }
    }

    #[test]
    fn out_of_region_is_rejected() {
        let p = DampingParams::new(1.0, 1.0).unwrap();
        assert!(matches!(bound_terms(BoundId::B331, 1.0, 3.0, &p), Err(Error::OutOfDomain(_))));
        assert!(matches!(
            symbol_bound_scan(BoundId::B333, &p, (1.0, 10.0), (1e-3, 1.5), 32, 1),
            Err(Error::OutOfDomain(_))
        ));
    }

    #[test]
    fn multi_index_multiplicities() {
        let total: f64 = multi_indices(3).iter().map(|m| m.1).sum();
        assert_eq!(total, 27.0);
        assert_eq!(multi_indices(2).len(), 6);
    }
}
