//! Moments of the data, diffusion-wave asymptotic profiles, decay-exponent
//! fits and profile-error series.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::elastic::{projection, LameParams};
use crate::error::{Error, Result};
use crate::field::{PhysicalField, SpectralField, VectorField};
use crate::grid::Grid3;
use crate::kernels::{diffusion_hat, kernel_set, DiffusionKind};
use crate::nonlinear::Trajectory;
use crate::norms;
use crate::radial::{vector_l2, vector_linf, LinfWindow};
use crate::symbols::{apply_symbol, Symbol};

type C = Complex64;

fn fourier_norm() -> f64 {
    (2.0 * PI).powf(-1.5)
}

/// Constant vectors of the asymptotic profiles. `m0[k][a] = int d_a f0k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m0: [[f64; 3]; 3],
    pub m1: [f64; 3],
    pub m_nl: [f64; 3],
    pub m_tail_bound: f64,
}

impl Moments {
    pub fn from_m1(m1: [f64; 3]) -> Self {
        Self {
            m1,
            ..Self::default()
        }
    }

    pub fn m0_is_zero(&self) -> bool {
        self.m0.iter().flatten().all(|&v| v == 0.0)
    }

    fn validate(&self) -> Result<()> {
        let all = self.m0.iter().flatten().chain(&self.m1).chain(&self.m_nl);
        if all.clone().any(|v| !v.is_finite()) || !(self.m_tail_bound >= 0.0) {
            return Err(Error::InvalidParams("moments must be finite".into()));
        }
        Ok(())
    }
}

/// [`moments`] output; `support_warning` is raised when the data carry more
/// than `1e-8` of their mass on the boundary cells of the box.
#[derive(Clone, Copy, Debug)]
pub struct MomentReport {
    pub moments: Moments,
    pub support_warning: bool,
}

fn boundary_fraction(f: &PhysicalField) -> f64 {
    let g = f.grid();
    let n = g.n();
    let (mut edge, mut total) = (0.0, 0.0);
    for idx in 0..g.len() {
        let m: f64 = f.comps.iter().map(|c| c[idx].abs()).sum();
        total += m;
        let [i, j, k] = g.unflatten(idx);
        if [i, j, k].iter().any(|&q| q == 0 || q == n - 1) {
            edge += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        edge / total
    }
}

/// `m0 = int grad f0` (from the spectrally differentiated field) and
/// `m1 = int f1`, both by the `h^3`-weighted grid sum.
pub fn moments(f0: &PhysicalField, f1: &PhysicalField) -> Result<MomentReport> {
    crate::field::check_grid(f0.grid(), f1.grid())?;
    let w = f0.grid().cell_volume();
    let spec0: VectorField = f0.to_spectral().into();
    let mut m0 = [[0.0; 3]; 3];
    for a in 0..3 {
        let mut alpha = [0u32; 3];
        alpha[a] = 1;
        let d = apply_symbol(&spec0, &Symbol::Derivative(alpha))?.field.to_physical();
        for k in 0..3 {
            m0[k][a] = w * d.comps[k].iter().sum::<f64>();
        }
    }
    let m1 = std::array::from_fn(|k| w * f1.comps[k].iter().sum::<f64>());
    let warn = boundary_fraction(f0).max(boundary_fraction(f1)) > 1e-8;
    Ok(MomentReport {
        moments: Moments {
            m0,
            m1,
            ..Moments::default()
        },
        support_warning: warn,
    })
}

/// `M = int_0^T int F dy dt` from the node integrals of a trajectory, with
/// the tail bound `C (1 + T)^{-1}`.
pub fn nonlinear_moment(traj: &Trajectory, t_trunc: f64) -> Result<([f64; 3], f64)> {
    let nodes = &traj.node_times;
    if nodes.len() < 3 || !(t_trunc > 0.0) {
        return Err(Error::Range(format!(
            "trajectory with {} quadrature nodes cannot cover t = {t_trunc}",
            nodes.len()
        )));
    }
    let h = nodes[1] - nodes[0];
    let count = (t_trunc / h).round() as usize;
    if (count as f64 * h - t_trunc).abs() > 1e-9 * t_trunc.max(1.0) || count >= nodes.len() || count < 2 {
        return Err(Error::Range(format!(
            "t_trunc = {t_trunc} is not a quadrature node of a trajectory ending at {}",
            nodes.last().copied().unwrap_or(0.0)
        )));
    }
    for w in nodes[..=count].windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::Range("quadrature nodes are not uniform".into()));
        }
    }
    let vals = &traj.node_integrals[..=count];
    // cumulative integrals from 0 to every even node (and to the end)
    let mut cum = vec![[0.0; 3]; count + 1];
    let simpson = |a: usize, out: &mut [f64; 3], base: [f64; 3]| {
        for c in 0..3 {
            out[c] = base[c] + h / 3.0 * (vals[a][c] + 4.0 * vals[a + 1][c] + vals[a + 2][c]);
        }
    };
    let mut i = 0;
    while i + 2 <= count {
        let base = cum[i];
        let mut next = [0.0; 3];
        simpson(i, &mut next, base);
        cum[i + 2] = next;
        // odd nodes from the quadratic interpolant
        for c in 0..3 {
            cum[i + 1][c] =
                base[c] + h / 12.0 * (5.0 * vals[i][c] + 8.0 * vals[i + 1][c] - vals[i + 2][c]);
        }
        i += 2;
    }
    if count % 2 == 1 {
        // Simpson 3/8 on the last three intervals
        let a = count - 3;
        let base = cum[a];
        for c in 0..3 {
            cum[count][c] = base[c]
                + 3.0 * h / 8.0 * (vals[a][c] + 3.0 * vals[a + 1][c] + 3.0 * vals[a + 2][c] + vals[a + 3][c]);
        }
    }
    let total = cum[count];
    let lo = t_trunc / 10.0;
    let mut c_fit: f64 = 0.0;
    for (j, c) in cum.iter().enumerate().take(count) {
        let t = j as f64 * h;
        if t < lo {
            continue;
        }
        let tail = ((total[0] - c[0]).powi(2) + (total[1] - c[1]).powi(2) + (total[2] - c[2]).powi(2)).sqrt();
        c_fit = c_fit.max(tail * (1.0 + t));
    }
    Ok((total, c_fit / (1.0 + t_trunc)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    G,
    H,
    Gtilde,
}

impl ProfileKind {
    fn for_time_derivative(ell: u32) -> Result<Self> {
        match ell {
            0 => Ok(Self::G),
            1 => Ok(Self::H),
            2 => Ok(Self::Gtilde),
            _ => Err(Error::UnsupportedNorm(format!("time derivative of order {ell}"))),
        }
    }
}

/// Longitudinal and transverse scalar symbols of a profile, without the
/// `(2 pi)^{-3/2}` factor: `(m1 + M)` terms when `from_m0` is false, the
/// terms acting on `grad^{-1} m0` otherwise.
pub fn profile_scalars(t: f64, r: f64, lame: &LameParams, which: ProfileKind, from_m0: bool) -> Result<(f64, f64)> {
    let (pl, pt) = (lame.long(), lame.trans());
    let g = |p, k| diffusion_hat(t, r, p, k);
    let (bl2, bt2) = (pl.beta * pl.beta, pt.beta * pt.beta);
    let r2 = r * r;
    Ok(match (which, from_m0) {
        (ProfileKind::G, false) => (g(&pl, DiffusionKind::G1)?, g(&pt, DiffusionKind::G1)?),
        (ProfileKind::G, true) => (g(&pl, DiffusionKind::G0)?, g(&pt, DiffusionKind::G0)?),
        (ProfileKind::H, false) => (g(&pl, DiffusionKind::G0)?, g(&pt, DiffusionKind::G0)?),
        (ProfileKind::H, true) => (
            -r2 * bl2 * g(&pl, DiffusionKind::G1)?,
            -r2 * bt2 * g(&pt, DiffusionKind::G1)?,
        ),
        (ProfileKind::Gtilde, false) => (
            -r2 * bl2 * g(&pl, DiffusionKind::G1)?,
            -r2 * bt2 * g(&pt, DiffusionKind::G1)?,
        ),
        (ProfileKind::Gtilde, true) => (
            -r2 * bl2 * g(&pl, DiffusionKind::G0)?,
            -r2 * bt2 * g(&pt, DiffusionKind::G0)?,
        ),
    })
}

fn apply_split(long: f64, trans: f64, p: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|j| {
        let pv: f64 = (0..3).map(|k| p[j][k] * v[k]).sum();
        (long - trans) * pv + trans * v[j]
    })
}

/// Fourier transform of `d^derivative` applied to the profile.
///
/// The `grad^{-1} m0` terms consume one derivative: the first axis with a
/// nonzero order is paired with the column `m0[.][axis]`.
pub fn profile_hat(
    t: f64,
    xi: [f64; 3],
    lame: &LameParams,
    moments: &Moments,
    which: ProfileKind,
    derivative: [u32; 3],
) -> Result<[C; 3]> {
    lame.validate()?;
    moments.validate()?;
    let order: u32 = derivative.iter().sum();
    let has_m0 = !moments.m0_is_zero();
    if has_m0 && order == 0 {
        return Err(Error::UnsupportedCombination(
            "the inverse-gradient term needs at least one derivative".into(),
        ));
    }
    let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    let (p, _) = projection(xi);
    let ik = |d: [u32; 3]| -> C {
        let mut v = C::new(1.0, 0.0);
        for a in 0..3 {
            v *= C::new(0.0, xi[a]).powu(d[a]);
        }
        v
    };
    let c = fourier_norm();
    let mut out = [C::new(0.0, 0.0); 3];
    let data: [f64; 3] = std::array::from_fn(|k| moments.m1[k] + moments.m_nl[k]);
    let (l1, t1) = profile_scalars(t, r, lame, which, false)?;
    let v1 = apply_split(l1, t1, &p, data);
    let f1 = ik(derivative) * c;
    for j in 0..3 {
        out[j] += f1 * v1[j];
    }
    if has_m0 {
        let axis = (0..3).find(|&a| derivative[a] > 0).expect("order >= 1");
        let mut reduced = derivative;
        reduced[axis] -= 1;
        let column: [f64; 3] = std::array::from_fn(|k| moments.m0[k][axis]);
        let (l0, t0) = profile_scalars(t, r, lame, which, true)?;
        let v0 = apply_split(l0, t0, &p, column);
        let f0 = ik(reduced) * c;
        for j in 0..3 {
            out[j] += f0 * v0[j];
        }
    }
    Ok(out)
}

/// Profile sampled on a grid, in spectral space.
pub fn profile_on_grid(
    grid: &Grid3,
    t: f64,
    lame: &LameParams,
    moments: &Moments,
    which: ProfileKind,
    derivative: [u32; 3],
) -> Result<SpectralField> {
    let mut f = SpectralField::zeros(*grid);
    for idx in 0..grid.len() {
        let v = profile_hat(t, grid.wave_vector(idx), lame, moments, which, derivative)?;
        for a in 0..3 {
            f.comps[a][idx] = v[a];
        }
    }
    // keep the sampled profile real
    for idx in 0..grid.len() {
        if grid.nyquist_axes(idx).iter().any(|&b| b) {
            for a in 0..3 {
                f.comps[a][idx] = C::new(0.0, 0.0);
            }
        }
    }
    Ok(f)
}

/// Least-squares power-law fit of a positive time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub slope_ci: f64,
    pub expected: Option<f64>,
    pub norm_id: String,
    /// Largest difference between slopes fitted on sub-windows.
    pub window_drift: f64,
    pub non_power_law: bool,
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let se = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, icpt, se)
}

const DRIFT_LIMIT: f64 = 0.02;

/// Slope of `log(values)` against `log(times)`; the series must hold at
/// least 8 points spanning 1.5 decades.
pub fn decay_slope(times: &[f64], values: &[f64]) -> Result<DecayReport> {
    if times.len() != values.len() {
        return Err(Error::Shape(format!("{} times but {} values", times.len(), values.len())));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("decay fit needs positive values, got {v}")));
    }
    if times.iter().any(|t| !(*t > 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Window("times must be positive and increasing".into()));
    }
    if times.len() < 8 || (times[times.len() - 1] / times[0]).log10() < 1.5 - 1e-12 {
        return Err(Error::Window(format!(
            "need at least 8 points over 1.5 decades, got {} points",
            times.len()
        )));
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (slope, icpt, se) = ols(&x, &y);
    let dof = (x.len() - 2) as f64;
    let tq = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Fit(e.to_string()))?
        .inverse_cdf(0.975);

    // slopes on consecutive sub-windows: decades, or halves of a short range
    let (lx0, lx1) = (x[0], x[x.len() - 1]);
    let decades = ((lx1 - lx0) / 10f64.ln()).floor().max(1.0) as usize;
    let pieces = if decades >= 2 { decades } else { 2 };
    let width = (lx1 - lx0) / pieces as f64;
    let mut slopes = Vec::new();
    for p in 0..pieces {
        let (a, b) = (lx0 + p as f64 * width, lx0 + (p + 1) as f64 * width);
        let sel: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= a - 1e-12 && x[i] <= b + 1e-12).collect();
        if sel.len() >= 3 {
            let xs: Vec<f64> = sel.iter().map(|&i| x[i]).collect();
            let ys: Vec<f64> = sel.iter().map(|&i| y[i]).collect();
            slopes.push(ols(&xs, &ys).0);
        }
    }
    let drift = if slopes.len() >= 2 {
        slopes.iter().cloned().fold(f64::MIN, f64::max) - slopes.iter().cloned().fold(f64::MAX, f64::min)
    } else {
        0.0
    };
    Ok(DecayReport {
        times: times.to_vec(),
        values: values.to_vec(),
        fitted_slope: slope,
        intercept: icpt,
        slope_ci: tq * se,
        expected: None,
        norm_id: String::new(),
        window_drift: drift,
        non_power_law: drift > DRIFT_LIMIT,
    })
}

/// `count` logarithmically spaced times in `[t0, t1]`.
pub fn log_times(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    let (a, b) = (t0.ln(), t1.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Norm selector: spatial derivative order `alpha`, time derivative order
/// `ell`, Lebesgue exponent `p` (2 or infinity).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormId {
    pub alpha: u32,
    pub ell: u32,
    pub p: f64,
}

impl NormId {
    pub fn new(alpha: u32, ell: u32, p: f64) -> Self {
        Self { alpha, ell, p }
    }

    pub fn label(&self) -> String {
        let p = if self.p.is_infinite() { "inf".to_string() } else { format!("{}", self.p) };
        format!("alpha={},ell={},p={}", self.alpha, self.ell, p)
    }

    /// Solution decay exponent for data with `m1 != 0`.
    pub fn solution_exponent(&self) -> Result<f64> {
        let a = self.alpha as f64;
        match (self.ell, self.p) {
            (0, p) if p == 2.0 => Ok(-(0.25 + a / 2.0)),
            (1, p) if p == 2.0 => Ok(-(0.75 + a / 2.0)),
            (2, p) if p == 2.0 => Ok(-(1.25 + a / 2.0)),
            (0, p) if p.is_infinite() => Ok(-(1.5 + a / 2.0)),
            (1, p) if p.is_infinite() => Ok(-(2.0 + a / 2.0)),
            _ => Err(Error::UnsupportedNorm(self.label())),
        }
    }

    /// Whether the combination appears among the profile estimates.
    pub fn check_profile_supported(&self) -> Result<()> {
        let ok = match (self.ell, self.p) {
            (0, p) if p == 2.0 => (1..=3).contains(&self.alpha),
            (0, p) if p.is_infinite() => self.alpha <= 1,
            (1, p) if p == 2.0 => self.alpha <= 2,
            (1, p) if p.is_infinite() => self.alpha <= 1,
            (2, p) if p == 2.0 => self.alpha == 0,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedNorm(format!("no profile estimate for {}", self.label())))
        }
    }

    /// Every supported combination with `p` in {2, infinity}.
    pub fn profile_catalogue() -> Vec<NormId> {
        let mut v = Vec::new();
        for a in 1..=3 {
            v.push(NormId::new(a, 0, 2.0));
        }
        for a in 0..=1 {
            v.push(NormId::new(a, 0, f64::INFINITY));
        }
        for a in 0..=2 {
            v.push(NormId::new(a, 1, 2.0));
        }
        for a in 0..=1 {
            v.push(NormId::new(a, 1, f64::INFINITY));
        }
        v.push(NormId::new(0, 2, 2.0));
        v
    }
}

/// Linear solution with `f0 = 0`, `f1 = g e` for a unit vector `e` and a
/// radial `g` given by its Fourier transform.
pub struct LinearSource<'a> {
    pub lame: LameParams,
    pub data_hat: &'a dyn Fn(f64) -> f64,
    /// `r` beyond which `data_hat` is negligible.
    pub data_radius: f64,
}

impl LinearSource<'_> {
    /// Unit-mass Gaussian of width `sigma`: `g_hat(r) = (2 pi)^{-3/2} e^{-sigma^2 r^2 / 2}`.
    pub fn gaussian_hat(sigma: f64) -> impl Fn(f64) -> f64 {
        move |r| fourier_norm() * (-0.5 * sigma * sigma * r * r).exp()
    }

    fn mass_hat(&self) -> f64 {
        (self.data_hat)(0.0)
    }

    /// `(long, trans)` symbols of `d_t^ell u`.
    pub fn solution_symbols(&self, t: f64, r: f64, ell: u32) -> (f64, f64) {
        let g = (self.data_hat)(r);
        let kl = kernel_set(t, r, &self.lame.long());
        let kt = kernel_set(t, r, &self.lame.trans());
        (g * kl.k1[ell as usize], g * kt.k1[ell as usize])
    }

    /// `(long, trans)` symbols of the profile for `d_t^ell u`.
    pub fn profile_symbols(&self, t: f64, r: f64, ell: u32) -> Result<(f64, f64)> {
        let which = ProfileKind::for_time_derivative(ell)?;
        let (l, tr) = profile_scalars(t, r, &self.lame, which, false)?;
        let m = self.mass_hat();
        Ok((m * l, m * tr))
    }

    fn window(&self, t: f64) -> LinfWindow {
        let nu = self.lame.nu;
        let heat = (80.0 / (nu * t)).sqrt();
        let r_max = heat.min(self.data_radius);
        let bl = self.lame.beta_long().max(self.lame.beta_trans());
        let rho_max = bl * t + 12.0 * (nu * t).sqrt();
        LinfWindow {
            r_max,
            rho_max,
            rho_step: (nu * t).sqrt() / 4.0,
            freq_max: rho_max + bl * t,
        }
    }

    fn norm_of(&self, t: f64, id: NormId, sym: impl Fn(f64) -> (f64, f64) + Copy) -> Result<f64> {
        if id.p == 2.0 {
            vector_l2(move |r| sym(r).0, move |r| sym(r).1, id.alpha)
        } else if id.p.is_infinite() {
            vector_linf(move |r| sym(r).0, move |r| sym(r).1, id.alpha, self.window(t))
        } else {
            Err(Error::UnsupportedNorm(format!("L^{} norms", id.p)))
        }
    }

    /// `|| nabla^alpha d_t^ell u(t) ||_p`.
    pub fn solution_norm(&self, t: f64, id: NormId) -> Result<f64> {
        self.norm_of(t, id, |r| self.solution_symbols(t, r, id.ell))
    }

    /// `|| nabla^alpha d_t^ell u(t) - nabla^alpha P(t) ||_p` for the profile `P`.
    pub fn error_norm(&self, t: f64, id: NormId) -> Result<f64> {
        id.check_profile_supported()?;
        self.norm_of(t, id, |r| {
            let (sl, st) = self.solution_symbols(t, r, id.ell);
            let (pl, pt) = self.profile_symbols(t, r, id.ell).expect("checked kind");
            (sl - pl, st - pt)
        })
    }

    /// `|| nabla^alpha P(t) ||_p` of the profile itself.
    pub fn profile_norm(&self, t: f64, id: NormId) -> Result<f64> {
        id.check_profile_supported()?;
        self.norm_of(t, id, |r| self.profile_symbols(t, r, id.ell).expect("checked kind"))
    }

    pub fn solution_series(&self, times: &[f64], id: NormId) -> Result<DecayReport> {
        let values = times
            .iter()
            .map(|&t| self.solution_norm(t, id))
            .collect::<Result<Vec<_>>>()?;
        let mut rep = decay_slope(times, &values)?;
        rep.expected = id.solution_exponent().ok();
        rep.norm_id = id.label();
        Ok(rep)
    }
}

/// Where the solution in a profile comparison comes from.
pub enum Source<'a> {
    Linear(&'a LinearSource<'a>),
    /// Grid trajectory; the moments define the profile, and only stored times
    /// with `t <= L / (4 beta_long)` are used.
    Trajectory {
        traj: &'a Trajectory,
        lame: LameParams,
        moments: Moments,
    },
}

/// Solution and profile-error decay reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileErrorReport {
    pub solution: DecayReport,
    pub error: DecayReport,
    /// `solution.fitted_slope - error.fitted_slope`.
    pub gain: f64,
}

fn grid_norm(f: &SpectralField, id: NormId) -> Result<f64> {
    if id.p == 2.0 {
        Ok(norms::seminorm(f, id.alpha))
    } else if id.p.is_infinite() {
        if id.alpha > 1 {
            return Err(Error::UnsupportedNorm(id.label()));
        }
        if id.alpha == 0 {
            let phys = f.to_physical();
            return Ok((0..f.grid().len())
                .map(|i| (0..3).map(|a| phys.comps[a][i].powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max));
        }
        let spec: VectorField = f.clone().into();
        let mut frob = vec![0.0; f.grid().len()];
        for a in 0..3 {
            let mut d = [0u32; 3];
            d[a] = 1;
            let phys = apply_symbol(&spec, &Symbol::Derivative(d))?.field.to_physical();
            for c in 0..3 {
                for (acc, v) in frob.iter_mut().zip(&phys.comps[c]) {
                    *acc += v * v;
                }
            }
        }
        Ok(frob.into_iter().fold(0.0, f64::max).sqrt())
    } else {
        Err(Error::UnsupportedNorm(format!("L^{} norms", id.p)))
    }
}

/// Time series of the solution norm and of the profile-error norm.
pub fn profile_error_series(source: &Source, id: NormId, times: &[f64]) -> Result<ProfileErrorReport> {
    id.check_profile_supported()?;
    let (times, sol, err): (Vec<f64>, Vec<f64>, Vec<f64>) = match source {
        Source::Linear(lin) => {
            let s = times.iter().map(|&t| lin.solution_norm(t, id)).collect::<Result<Vec<_>>>()?;
            let e = times.iter().map(|&t| lin.error_norm(t, id)).collect::<Result<Vec<_>>>()?;
            (times.to_vec(), s, e)
        }
        Source::Trajectory { traj, lame, moments } => {
            let cap = traj.grid.box_length() / (4.0 * lame.beta_long());
            let which = ProfileKind::for_time_derivative(id.ell)?;
            let (mut ts, mut s, mut e) = (Vec::new(), Vec::new(), Vec::new());
            for &t in times {
                if t > cap {
                    continue;
                }
                let k = traj
                    .times
                    .iter()
                    .position(|&x| (x - t).abs() <= 1e-9 * t.max(1.0))
                    .ok_or_else(|| Error::Range(format!("no stored state at t = {t}")))?;
                let state = &traj.states[k];
                let u = match id.ell {
                    0 => state.displacement.clone(),
                    1 => state.velocity.clone(),
                    _ => return Err(Error::UnsupportedNorm(id.label())),
                };
                let prof = profile_on_grid(&traj.grid, t, lame, moments, which, [0, 0, 0])?;
                let mut diff = u.clone();
                diff.axpy(-1.0, &prof)?;
                ts.push(t);
                s.push(grid_norm(&u, id)?);
                e.push(grid_norm(&diff, id)?);
            }
            (ts, s, e)
        }
    };
    let mut solution = decay_slope(&times, &sol)?;
    solution.expected = id.solution_exponent().ok();
    solution.norm_id = id.label();
    let mut error = decay_slope(&times, &err)?;
    error.norm_id = format!("{} error", id.label());
    error.expected = solution.expected.map(|e| e - 0.5);
    let gain = solution.fitted_slope - error.fitted_slope;
    Ok(ProfileErrorReport { solution, error, gain })
}
