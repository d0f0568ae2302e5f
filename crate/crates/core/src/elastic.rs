//! Linear propagator of the damped elastic system
//! `u_tt - mu Delta u - (lambda + mu) grad div u - nu Delta u_t = F`.
//!
//! In Fourier variables every mode splits into a longitudinal part along
//! `xi` (speed `sqrt(lambda + 2 mu)`) and a transverse part (speed `sqrt(mu)`),
//! each carried by the scalar damped-wave kernels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_grid, Snapshot, SnapshotData, SpectralField};
use crate::grid::{CutoffSpec, Grid3};
use crate::kernels::{kernel_set, DampingParams, KernelKind, KernelSet};

type C = Complex64;
pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LameParams {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

impl LameParams {
    pub fn new(lambda: f64, mu: f64, nu: f64) -> Result<Self> {
        let p = Self { lambda, mu, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.lambda.is_finite() && self.mu.is_finite() && self.nu.is_finite();
        if !(finite && self.mu > 0.0 && self.lambda + 2.0 * self.mu > 0.0 && self.nu > 0.0) {
            return Err(Error::InvalidParams(format!(
                "Lame parameters need mu > 0, lambda + 2 mu > 0, nu > 0; got lambda={}, mu={}, nu={}",
                self.lambda, self.mu, self.nu
            )));
        }
        Ok(())
    }

    pub fn beta_long(&self) -> f64 {
        (self.lambda + 2.0 * self.mu).sqrt()
    }

    pub fn beta_trans(&self) -> f64 {
        self.mu.sqrt()
    }

    pub fn long(&self) -> DampingParams {
        DampingParams {
            beta: self.beta_long(),
            nu: self.nu,
        }
    }

    pub fn trans(&self) -> DampingParams {
        DampingParams {
            beta: self.beta_trans(),
            nu: self.nu,
        }
    }

    /// Default frequency cutoffs for these speeds.
    pub fn cutoffs(&self) -> CutoffSpec {
        let (lo, hi) = min_max(self.beta_long(), self.beta_trans());
        CutoffSpec::from_speeds(lo, hi, self.nu).expect("speeds are positive")
    }
}

fn min_max(a: f64, b: f64) -> (f64, f64) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// `xi xi^T / |xi|^2`; the zero matrix together with `true` at `xi = 0`.
pub fn projection(xi: [f64; 3]) -> (Mat3, bool) {
    let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    let mut m = [[0.0; 3]; 3];
    if r2 == 0.0 {
        return (m, true);
    }
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = xi[i] * xi[j] / r2;
        }
    }
    (m, false)
}

/// `d^l/dt^l [K^{long} P + K^{trans} (I - P)]` at wave vector `xi`.
pub fn matrix_kernel(t: f64, xi: [f64; 3], lame: &LameParams, which: KernelKind, l: usize) -> Result<Mat3> {
    if l > 2 {
        return Err(Error::UnsupportedOrder(l));
    }
    let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    let pick = |s: KernelSet| match which {
        KernelKind::K0 => s.k0[l],
        KernelKind::K1 => s.k1[l],
    };
    let kl = pick(kernel_set(t, r, &lame.long()));
    let kt = pick(kernel_set(t, r, &lame.trans()));
    let (p, _) = projection(xi);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = kl * p[i][j] + kt * (id - p[i][j]);
        }
    }
    if r == 0.0 {
        // both branches coincide at the origin
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = kt;
        }
    }
    Ok(m)
}

/// Orthonormal basis whose first column is `xi/|xi|`, completed by
/// Gram-Schmidt on the two standard basis vectors given by `completion`.
pub fn orthogonal_frame(xi: [f64; 3], completion: [usize; 2]) -> Result<Mat3> {
    let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    if r == 0.0 {
        return Err(Error::InvalidParams("the zero wave vector has no direction".into()));
    }
    let mut cols = vec![[xi[0] / r, xi[1] / r, xi[2] / r]];
    for &axis in &completion {
        let mut v = [0.0; 3];
        v[axis] = 1.0;
        for c in &cols {
            let d = dot(&v, c);
            for k in 0..3 {
                v[k] -= d * c[k];
            }
        }
        let n = dot(&v, &v).sqrt();
        if n < 1e-8 {
            return Err(Error::DegenerateInput(format!(
                "completion axis {axis} is parallel to the frame"
            )));
        }
        cols.push(v.map(|x| x / n));
    }
    let mut q = [[0.0; 3]; 3];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..3 {
            q[i][j] = c[i];
        }
    }
    Ok(q)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The two standard axes least aligned with `xi`.
pub fn default_completion(xi: [f64; 3]) -> [usize; 2] {
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&a, &b| xi[a].abs().total_cmp(&xi[b].abs()));
    [axes[0], axes[1]]
}

/// Largest entry of `|Q diag(K^long, K^trans, K^trans) Q^T - matrix_kernel|`
/// over both kernels and `l = 0..2`.
pub fn diagonalize_check(t: f64, xi: [f64; 3], lame: &LameParams, completion: Option<[usize; 2]>) -> Result<f64> {
    let q = orthogonal_frame(xi, completion.unwrap_or_else(|| default_completion(xi)))?;
    let r = dot(&xi, &xi).sqrt();
    let long = kernel_set(t, r, &lame.long());
    let trans = kernel_set(t, r, &lame.trans());
    let mut worst = 0.0_f64;
    for which in [KernelKind::K0, KernelKind::K1] {
        for l in 0..3 {
            let (kl, kt) = match which {
                KernelKind::K0 => (long.k0[l], trans.k0[l]),
                KernelKind::K1 => (long.k1[l], trans.k1[l]),
            };
            let d = [kl, kt, kt];
            let m = matrix_kernel(t, xi, lame, which, l)?;
            for i in 0..3 {
                for j in 0..3 {
                    let v: f64 = (0..3).map(|k| q[i][k] * d[k] * q[j][k]).sum();
                    worst = worst.max((v - m[i][j]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Displacement and velocity coefficients at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticState {
    pub displacement: SpectralField,
    pub velocity: SpectralField,
    pub time: f64,
}

impl ElasticState {
    pub fn new(displacement: SpectralField, velocity: SpectralField, time: f64) -> Result<Self> {
        check_grid(displacement.grid(), velocity.grid())?;
        Ok(Self {
            displacement,
            velocity,
            time,
        })
    }

    pub fn zeros(grid: Grid3, time: f64) -> Self {
        Self {
            displacement: SpectralField::zeros(grid),
            velocity: SpectralField::zeros(grid),
            time,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        self.displacement.grid()
    }

    /// Six-component snapshot: displacement then velocity.
    pub fn to_snapshot(&self) -> Snapshot {
        let mut comps: Vec<Vec<C>> = self.displacement.comps.to_vec();
        comps.extend(self.velocity.comps.iter().cloned());
        Snapshot {
            grid: *self.grid(),
            time: Some(self.time),
            data: SnapshotData::Spectral(comps),
        }
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        let SnapshotData::Spectral(c) = &s.data else {
            return Err(Error::Shape("state snapshots are spectral".into()));
        };
        if c.len() != 6 {
            return Err(Error::Shape(format!("state snapshot needs 6 components, got {}", c.len())));
        }
        Self::new(
            SpectralField::new(s.grid, [c[0].clone(), c[1].clone(), c[2].clone()])?,
            SpectralField::new(s.grid, [c[3].clone(), c[4].clone(), c[5].clone()])?,
            s.time.unwrap_or(0.0),
        )
    }

    /// `||u_t||^2 + mu || |xi| u ||^2 + (lambda + mu) || xi . u ||^2` (Plancherel form).
    pub fn energy(&self, lame: &LameParams) -> f64 {
        let grid = self.grid();
        let dk3 = grid.dk().powi(3);
        let mut e = 0.0;
        for idx in 0..grid.len() {
            let xi = grid.wave_vector(idx);
            let r2 = dot(&xi, &xi);
            let mut kin = 0.0;
            let mut grad = 0.0;
            let mut div = C::new(0.0, 0.0);
            for a in 0..3 {
                kin += self.velocity.comps[a][idx].norm_sqr();
                grad += self.displacement.comps[a][idx].norm_sqr();
                div += xi[a] * self.displacement.comps[a][idx];
            }
            e += kin + lame.mu * r2 * grad + (lame.lambda + lame.mu) * div.norm_sqr();
        }
        dk3 * e
    }
}

/// Unit direction used by the projection at lattice slot `idx`. Components on
/// Nyquist planes are dropped so that the projection takes equal values at
/// `k` and at the slot holding `-k`; `None` when nothing is left.
pub fn lattice_direction(grid: &Grid3, idx: usize) -> Option<[f64; 3]> {
    let k = grid.integer_wave_vector(idx);
    let nyq = grid.nyquist_axes(idx);
    let mut v = [0.0; 3];
    for a in 0..3 {
        if !nyq[a] {
            v[a] = k[a] as f64;
        }
    }
    let n = dot(&v, &v).sqrt();
    if n == 0.0 {
        None
    } else {
        Some(v.map(|x| x / n))
    }
}

/// Kernel values for every lattice shell `|k|^2` at one time.
#[derive(Clone, Debug)]
pub struct ShellKernels {
    pub time: f64,
    pub long: Vec<KernelSet>,
    pub trans: Vec<KernelSet>,
}

impl ShellKernels {
    pub fn new(grid: &Grid3, lame: &LameParams, time: f64) -> Self {
        let dk = grid.dk();
        let (pl, pt) = (lame.long(), lame.trans());
        let shells = grid.max_shell_index() + 1;
        let mut long = Vec::with_capacity(shells);
        let mut trans = Vec::with_capacity(shells);
        for s in 0..shells {
            let r = dk * (s as f64).sqrt();
            long.push(kernel_set(time, r, &pl));
            trans.push(kernel_set(time, r, &pt));
        }
        Self { time, long, trans }
    }
}

/// Precomputed per-slot geometry for repeated propagation on one grid.
#[derive(Clone, Debug)]
pub struct Propagator {
    grid: Grid3,
    lame: LameParams,
    shells: Vec<u32>,
    dirs: Vec<Option<[f64; 3]>>,
}

/// `k_l P v + k_t (I - P) v` for one mode.
#[inline]
fn split_apply(dir: &Option<[f64; 3]>, kl: f64, kt: f64, v: [C; 3]) -> [C; 3] {
    match dir {
        None => v.map(|c| kt * c),
        Some(d) => {
            let along = d[0] * v[0] + d[1] * v[1] + d[2] * v[2];
            let mut out = [C::new(0.0, 0.0); 3];
            for a in 0..3 {
                let p = d[a] * along;
                out[a] = kl * p + kt * (v[a] - p);
            }
            out
        }
    }
}

#[inline]
fn mode(f: &SpectralField, idx: usize) -> [C; 3] {
    [f.comps[0][idx], f.comps[1][idx], f.comps[2][idx]]
}

impl Propagator {
    pub fn new(grid: Grid3, lame: LameParams) -> Self {
        let shells = (0..grid.len()).map(|i| grid.shell_index(i) as u32).collect();
        let dirs = (0..grid.len()).map(|i| lattice_direction(&grid, i)).collect();
        Self {
            grid,
            lame,
            shells,
            dirs,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn lame(&self) -> &LameParams {
        &self.lame
    }

    pub fn tables(&self, time: f64) -> ShellKernels {
        ShellKernels::new(&self.grid, &self.lame, time)
    }

    /// Evolves `(u, u_t)` by `tab.time` with no forcing.
    pub fn propagate_with(&self, state: &ElasticState, tab: &ShellKernels) -> Result<ElasticState> {
        check_grid(&self.grid, state.grid())?;
        let mut u = SpectralField::zeros(self.grid);
        let mut v = SpectralField::zeros(self.grid);
        for idx in 0..self.grid.len() {
            let s = self.shells[idx] as usize;
            let (l, t) = (&tab.long[s], &tab.trans[s]);
            let dir = &self.dirs[idx];
            let f0 = mode(&state.displacement, idx);
            let f1 = mode(&state.velocity, idx);
            let a = split_apply(dir, l.k0[0], t.k0[0], f0);
            let b = split_apply(dir, l.k1[0], t.k1[0], f1);
            let c = split_apply(dir, l.k0[1], t.k0[1], f0);
            let d = split_apply(dir, l.k1[1], t.k1[1], f1);
            for k in 0..3 {
                u.comps[k][idx] = a[k] + b[k];
                v.comps[k][idx] = c[k] + d[k];
            }
        }
        Ok(ElasticState {
            displacement: u,
            velocity: v,
            time: state.time + tab.time,
        })
    }

    pub fn propagate(&self, state: &ElasticState, dt: f64) -> Result<ElasticState> {
        self.propagate_with(state, &self.tables(dt))
    }

    /// Applies `d^l/dt^l` of the `K1` matrix kernel (from `tab`) to `f`.
    pub fn apply_k1(&self, f: &SpectralField, tab: &ShellKernels, l: usize, out: &mut SpectralField, weight: f64) {
        for idx in 0..self.grid.len() {
            let s = self.shells[idx] as usize;
            let r = split_apply(
                &self.dirs[idx],
                weight * tab.long[s].k1[l],
                weight * tab.trans[s].k1[l],
                mode(f, idx),
            );
            for k in 0..3 {
                out.comps[k][idx] += r[k];
            }
        }
    }

    /// Simpson approximation of `int_0^D K1(D - s) F(s) ds` and of its time
    /// derivative from an odd number (at least 3) of equispaced samples
    /// covering `[0, D]`.
    pub fn duhamel(&self, samples: &[&SpectralField], span: f64) -> Result<(SpectralField, SpectralField)> {
        let m = samples.len();
        if m < 3 || m % 2 == 0 {
            return Err(Error::InsufficientSamples(format!(
                "Simpson's rule needs an odd number of at least 3 samples, got {m}"
            )));
        }
        for s in samples {
            check_grid(&self.grid, s.grid())?;
        }
        let h = span / (m - 1) as f64;
        let mut du = SpectralField::zeros(self.grid);
        let mut dv = SpectralField::zeros(self.grid);
        for (j, f) in samples.iter().enumerate() {
            let w = if j == 0 || j == m - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            let lag = span - j as f64 * h;
            if lag == 0.0 {
                // K1(0) = 0 and d/dt K1(0) = I
                dv.axpy(w, f)?;
                continue;
            }
            let tab = self.tables(lag);
            self.apply_k1(f, &tab, 0, &mut du, w);
            self.apply_k1(f, &tab, 1, &mut dv, w);
        }
        Ok((du, dv))
    }
}

/// `u(t) = K0(t) f0 + K1(t) f1` with velocity from the `l = 1` kernels.
pub fn linear_propagate(f0: &SpectralField, f1: &SpectralField, t: f64, lame: &LameParams) -> Result<ElasticState> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParams(format!("time must be nonnegative, got {t}")));
    }
    let state = ElasticState::new(f0.clone(), f1.clone(), 0.0)?;
    Propagator::new(*f0.grid(), *lame).propagate(&state, t)
}

/// Displacement part of the Simpson Duhamel increment over `[t, t + span]`.
pub fn duhamel_increment(samples: &[&SpectralField], span: f64, lame: &LameParams) -> Result<SpectralField> {
    let Some(first) = samples.first() else {
        return Err(Error::InsufficientSamples("no forcing samples".into()));
    };
    let prop = Propagator::new(*first.grid(), *lame);
    Ok(prop.duhamel(samples, span)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lame() -> LameParams {
        LameParams::new(0.5, 1.0, 0.7).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LameParams::new(0.0, 0.0, 1.0).is_err());
        assert!(LameParams::new(-3.0, 1.0, 1.0).is_err());
        assert!(LameParams::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn projection_properties() {
        let (p, flag) = projection([1.0, 0.0, 0.0]);
        assert!(!flag);
        let v = [2.0, -3.0, 5.0];
        let pv: Vec<f64> = (0..3).map(|i| (0..3).map(|j| p[i][j] * v[j]).sum()).collect();
        assert_eq!(pv, vec![2.0, 0.0, 0.0]);
        for xi in [[0.3, -1.2, 2.0], [1e-3, 4.0, 0.0], [-7.0, -7.0, 7.0]] {
            let (p, _) = projection(xi);
            let tr = p[0][0] + p[1][1] + p[2][2];
            assert!((tr - 1.0).abs() < 1e-15);
            for i in 0..3 {
                for j in 0..3 {
                    let p2: f64 = (0..3).map(|k| p[i][k] * p[k][j]).sum();
                    assert!((p2 - p[i][j]).abs() < 1e-15);
                    assert_eq!(p[i][j], p[j][i]);
                }
            }
        }
        let (z, flag) = projection([0.0; 3]);
        assert!(flag);
        assert_eq!(z, [[0.0; 3]; 3]);
    }

    #[test]
    fn axis_aligned_kernel_is_diagonal() {
        let l = lame();
        let r = 0.8;
        let m = matrix_kernel(2.0, [r, 0.0, 0.0], &l, KernelKind::K1, 0).unwrap();
        let kl = kernel_set(2.0, r, &l.long()).k1[0];
        let kt = kernel_set(2.0, r, &l.trans()).k1[0];
        assert_eq!(m[0][0], kl);
        assert_eq!(m[1][1], kt);
        assert_eq!(m[2][2], kt);
        assert_eq!(m[0][1], 0.0);
        let id = matrix_kernel(0.0, [0.3, 0.1, -2.0], &l, KernelKind::K0, 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i][j] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn diagonalization_on_axis() {
        let d = diagonalize_check(1.5, [0.0, 0.0, 1.0], &lame(), None).unwrap();
        assert!(d <= 1e-15);
        assert!(diagonalize_check(1.0, [0.0; 3], &lame(), None).is_err());
    }
}
