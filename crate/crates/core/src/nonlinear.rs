//! Quasi-linear problem `u_tt - mu Delta u - (lambda + mu) grad div u - nu Delta u_t = F(u)`
//! with a quadratic nonlinearity of type `grad u . grad^2 u`, solved on the
//! periodic grid by an exponential integrator built on the exact linear
//! propagator, and by Picard iteration of the Duhamel formula.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elastic::{ElasticState, LameParams, Propagator, ShellKernels};
use crate::error::{Error, Result};
use crate::fft::Transformer;
use crate::field::{check_grid, SpectralField};
use crate::grid::Grid3;
use crate::symbols::derivative_value;

type C = Complex64;

/// One product `weight * (d_a u_b) (d_c d_d u_e)` added to `F_out`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub out: usize,
    pub grad: [usize; 2],
    pub hess: [usize; 3],
    pub weight: f64,
}

/// Index contraction defining `F(u)` as a sum of [`Term`]s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionTensor {
    terms: Vec<Term>,
}

impl ContractionTensor {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            let idx_ok = t.out < 3
                && t.grad.iter().all(|&i| i < 3)
                && t.hess.iter().all(|&i| i < 3);
            if !idx_ok || !t.weight.is_finite() {
                return Err(Error::InvalidParams(format!("bad contraction term {t:?}")));
            }
        }
        Ok(Self { terms })
    }

    /// `F_k = sum_{i,j} (d_i u_j)(d_i d_j u_k)`.
    pub fn standard() -> Self {
        let mut terms = Vec::with_capacity(27);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    terms.push(Term {
                        out: k,
                        grad: [i, j],
                        hess: [i, j, k],
                        weight: 1.0,
                    });
                }
            }
        }
        Self { terms }
    }

    /// `F_k = (div u) Delta u_k`.
    pub fn divergence_laplacian() -> Self {
        let mut terms = Vec::with_capacity(9);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    terms.push(Term {
                        out: k,
                        grad: [i, i],
                        hess: [j, j, k],
                        weight: 1.0,
                    });
                }
            }
        }
        Self { terms }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.weight == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DealiasRule {
    TwoThirds,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: DealiasRule,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Keep every `snapshot_every`-th step in the returned trajectory.
    pub snapshot_every: usize,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.dt < 1e-9 * self.t_end {
            return Err(Error::Config(format!(
                "time step {} underflows the horizon {}",
                self.dt, self.t_end
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!("picard_tol must be positive, got {}", self.picard_tol)));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be at least 1".into()));
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end || steps < 1.0 {
            return Err(Error::Config(format!(
                "t_end {} is not a whole number of steps of {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Pseudospectral evaluator of `F(u)` on one grid.
pub struct Nonlinearity {
    grid: Grid3,
    tr: Transformer,
    tensor: ContractionTensor,
    mask: Option<Vec<bool>>,
    grads: Vec<[usize; 2]>,
    hessians: Vec<[usize; 3]>,
}

fn canonical_hess(h: [usize; 3]) -> [usize; 3] {
    [h[0].min(h[1]), h[0].max(h[1]), h[2]]
}

impl Nonlinearity {
    pub fn new(grid: Grid3, tensor: ContractionTensor, rule: DealiasRule) -> Self {
        let mut grads: Vec<[usize; 2]> = tensor.terms.iter().map(|t| t.grad).collect();
        grads.sort();
        grads.dedup();
        let mut hessians: Vec<[usize; 3]> = tensor.terms.iter().map(|t| canonical_hess(t.hess)).collect();
        hessians.sort();
        hessians.dedup();
        let mask = match rule {
            DealiasRule::TwoThirds => Some((0..grid.len()).map(|i| grid.retained_by_two_thirds(i)).collect()),
            DealiasRule::None => None,
        };
        Self {
            grid,
            tr: Transformer::new(grid),
            tensor,
            mask,
            grads,
            hessians,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    fn masked(&self, mut f: SpectralField) -> SpectralField {
        if let Some(mask) = &self.mask {
            for comp in f.comps.iter_mut() {
                for (c, &keep) in comp.iter_mut().zip(mask) {
                    if !keep {
                        *c = C::new(0.0, 0.0);
                    }
                }
            }
        }
        f
    }

    /// Physical values of `d^alpha u_b` for a list of `(alpha, b)` requests.
    fn physical_derivatives(&self, u: &SpectralField, reqs: &[([u32; 3], usize)]) -> Vec<Vec<f64>> {
        let grid = &self.grid;
        let spectral = |(alpha, b): &([u32; 3], usize)| -> Vec<C> {
            (0..grid.len())
                .map(|idx| derivative_value(grid, idx, grid.wave_vector(idx), *alpha) * u.comps[*b][idx])
                .collect()
        };
        let mut out = Vec::with_capacity(reqs.len());
        for pair in reqs.chunks(2) {
            if pair.len() == 2 {
                let (a, b) = self.tr.inverse_real_pair(&spectral(&pair[0]), &spectral(&pair[1]));
                out.push(a);
                out.push(b);
            } else {
                out.push(self.tr.inverse_real(&spectral(&pair[0])));
            }
        }
        out
    }

    /// `F(u)` in spectral space, with the dealiasing mask applied to `u`
    /// before the products and to `F` afterwards.
    pub fn eval_spectral(&self, u: &SpectralField) -> Result<SpectralField> {
        check_grid(&self.grid, u.grid())?;
        if self.tensor.is_zero() {
            return Ok(SpectralField::zeros(self.grid));
        }
        let u = self.masked(u.clone());
        let mut reqs: Vec<([u32; 3], usize)> = Vec::new();
        for g in &self.grads {
            let mut alpha = [0u32; 3];
            alpha[g[0]] += 1;
            reqs.push((alpha, g[1]));
        }
        for h in &self.hessians {
            let mut alpha = [0u32; 3];
            alpha[h[0]] += 1;
            alpha[h[1]] += 1;
            reqs.push((alpha, h[2]));
        }
        let fields = self.physical_derivatives(&u, &reqs);
        let (grad_fields, hess_fields) = fields.split_at(self.grads.len());
        let mut out = [
            vec![0.0; self.grid.len()],
            vec![0.0; self.grid.len()],
            vec![0.0; self.grid.len()],
        ];
        for term in &self.tensor.terms {
            if term.weight == 0.0 {
                continue;
            }
            let gi = self.grads.binary_search(&term.grad).expect("registered");
            let hi = self.hessians.binary_search(&canonical_hess(term.hess)).expect("registered");
            let (g, h) = (&grad_fields[gi], &hess_fields[hi]);
            for ((o, a), b) in out[term.out].iter_mut().zip(g).zip(h) {
                *o += term.weight * a * b;
            }
        }
        let (f0, f1) = self.tr.forward_real_pair(&out[0], &out[1]);
        let f2 = self.tr.forward_real(&out[2]);
        Ok(self.masked(SpectralField::new(self.grid, [f0, f1, f2])?))
    }
}

/// `F(u)` for a physical field, returned in physical space.
pub fn nonlinearity(
    u: &crate::field::PhysicalField,
    tensor: &ContractionTensor,
    rule: DealiasRule,
) -> Result<crate::field::PhysicalField> {
    let eval = Nonlinearity::new(*u.grid(), tensor.clone(), rule);
    let f = eval.eval_spectral(&u.to_spectral_with(&eval.tr)?)?;
    f.to_physical_with(&eval.tr)
}

/// States (and `F` snapshots) at stored times plus `int F dy` at every
/// quadrature node `k dt / 2`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid3,
    pub times: Vec<f64>,
    pub states: Vec<ElasticState>,
    pub nonlinearity_cache: Vec<SpectralField>,
    pub node_times: Vec<f64>,
    pub node_integrals: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn new(grid: Grid3) -> Self {
        Self {
            grid,
            times: Vec::new(),
            states: Vec::new(),
            nonlinearity_cache: Vec::new(),
            node_times: Vec::new(),
            node_integrals: Vec::new(),
        }
    }

    pub fn push(&mut self, state: ElasticState, f: SpectralField) -> Result<()> {
        check_grid(&self.grid, state.grid())?;
        if let Some(&last) = self.times.last() {
            if !(state.time > last) {
                return Err(Error::InvalidParams(format!(
                    "trajectory times must increase: {} after {last}",
                    state.time
                )));
            }
        }
        self.times.push(state.time);
        self.states.push(state);
        self.nonlinearity_cache.push(f);
        Ok(())
    }

    pub fn push_node(&mut self, t: f64, f: &SpectralField) {
        self.node_times.push(t);
        self.node_integrals.push(spatial_integral(f));
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for s in out.states.iter_mut() {
            s.displacement = s.displacement.scaled(c);
            s.velocity = s.velocity.scaled(c);
        }
        out
    }

    /// Writes one binary state snapshot per stored time and a JSON manifest.
    pub fn export(&self, dir: &Path, meta: serde_json::Value) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            let name = format!("state_{i:05}.bin");
            let file = fs::File::create(dir.join(&name))?;
            s.to_snapshot().write_to(std::io::BufWriter::new(file))?;
            files.push(name);
        }
        let manifest = serde_json::json!({
            "grid": {"n": self.grid.n(), "box_length": self.grid.box_length()},
            "times": self.times,
            "files": files,
            "meta": meta,
        });
        fs::write(dir.join("trajectory.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

/// `int F dy = (2 pi)^{3/2} F_hat(0)` per component.
pub fn spatial_integral(f: &SpectralField) -> [f64; 3] {
    let s = (2.0 * std::f64::consts::PI).powf(1.5);
    f.mean_coefficients().map(|c| s * c.re)
}

/// The four seminorms in the time-weighted solution norm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct X1Terms {
    pub grad3: f64,
    pub grad: f64,
    pub vel: f64,
    pub grad_vel: f64,
}

impl X1Terms {
    pub fn of_state(state: &ElasticState) -> Self {
        let grid = state.grid();
        let dk2 = grid.dk().powi(2);
        let mut acc = [0.0; 4];
        for idx in 0..grid.len() {
            let r2 = dk2 * grid.shell_index(idx) as f64;
            let u: f64 = state.displacement.comps.iter().map(|c| c[idx].norm_sqr()).sum();
            let v: f64 = state.velocity.comps.iter().map(|c| c[idx].norm_sqr()).sum();
            acc[0] += r2 * r2 * r2 * u;
            acc[1] += r2 * u;
            acc[2] += v;
            acc[3] += r2 * v;
        }
        Self::from_sums(acc, grid.dk().powi(3))
    }

    fn from_sums(acc: [f64; 4], w: f64) -> Self {
        Self {
            grad3: (w * acc[0]).sqrt(),
            grad: (w * acc[1]).sqrt(),
            vel: (w * acc[2]).sqrt(),
            grad_vel: (w * acc[3]).sqrt(),
        }
    }

    /// `(1+t)^{7/4} |grad^3 u| + (1+t)^{3/4} (|grad u| + |u_t|) + (1+t)^{5/4} |grad u_t|`.
    pub fn weighted(&self, t: f64) -> f64 {
        let s = 1.0 + t;
        s.powf(1.75) * self.grad3 + s.powf(0.75) * (self.grad + self.vel) + s.powf(1.25) * self.grad_vel
    }
}

/// Supremum of the weighted functional over the stored times.
pub fn x1_norm(traj: &Trajectory) -> f64 {
    traj.states
        .iter()
        .map(|s| X1Terms::of_state(s).weighted(s.time))
        .fold(0.0, f64::max)
}

/// Coefficients restricted to a fixed subset of lattice slots.
#[derive(Clone, Debug)]
pub struct CompactLayout {
    grid: Grid3,
    slots: Vec<u32>,
    shells: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompactField {
    pub comps: [Vec<C>; 3],
}

impl CompactLayout {
    pub fn new(grid: Grid3, rule: DealiasRule) -> Self {
        let slots: Vec<u32> = (0..grid.len())
            .filter(|&i| rule == DealiasRule::None || grid.retained_by_two_thirds(i))
            .map(|i| i as u32)
            .collect();
        let shells = slots.iter().map(|&i| grid.shell_index(i as usize) as u32).collect();
        Self { grid, slots, shells }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn compress(&self, f: &SpectralField) -> CompactField {
        CompactField {
            comps: std::array::from_fn(|a| self.slots.iter().map(|&i| f.comps[a][i as usize]).collect()),
        }
    }

    pub fn expand(&self, c: &CompactField) -> SpectralField {
        let mut f = SpectralField::zeros(self.grid);
        for a in 0..3 {
            for (k, &i) in self.slots.iter().enumerate() {
                f.comps[a][i as usize] = c.comps[a][k];
            }
        }
        f
    }

    pub fn zeros(&self) -> CompactField {
        let z = vec![C::new(0.0, 0.0); self.len()];
        CompactField {
            comps: [z.clone(), z.clone(), z],
        }
    }

    /// Seminorms of the difference of two compact states.
    pub fn x1_difference(&self, a: (&CompactField, &CompactField), b: (&CompactField, &CompactField)) -> X1Terms {
        let dk2 = self.grid.dk().powi(2);
        let mut acc = [0.0; 4];
        for k in 0..self.len() {
            let r2 = dk2 * self.shells[k] as f64;
            let mut u = 0.0;
            let mut v = 0.0;
            for c in 0..3 {
                u += (a.0.comps[c][k] - b.0.comps[c][k]).norm_sqr();
                v += (a.1.comps[c][k] - b.1.comps[c][k]).norm_sqr();
            }
            acc[0] += r2 * r2 * r2 * u;
            acc[1] += r2 * u;
            acc[2] += v;
            acc[3] += r2 * v;
        }
        X1Terms::from_sums(acc, self.grid.dk().powi(3))
    }
}

fn lin_comb(terms: &[(f64, &SpectralField)]) -> SpectralField {
    let mut out = SpectralField::zeros(*terms[0].1.grid());
    for (w, f) in terms {
        out.axpy(*w, f).expect("same grid");
    }
    out
}

/// Kernel tables for one step size.
struct StepTables {
    full: ShellKernels,
    half: ShellKernels,
    quarter: ShellKernels,
}

impl StepTables {
    fn new(prop: &Propagator, dt: f64) -> Self {
        Self {
            full: prop.tables(dt),
            half: prop.tables(0.5 * dt),
            quarter: prop.tables(0.25 * dt),
        }
    }
}

/// Duhamel contribution over `[0, dt]` from samples at `0`, `dt/2`, `dt`:
/// Simpson's rule with `K1(0) = 0`, `d/dt K1(0) = I`.
fn simpson_step(
    prop: &Propagator,
    tabs: &StepTables,
    dt: f64,
    f0: &SpectralField,
    fm: &SpectralField,
    f1: &SpectralField,
) -> (SpectralField, SpectralField) {
    let grid = *f0.grid();
    let mut du = SpectralField::zeros(grid);
    let mut dv = SpectralField::zeros(grid);
    let w = dt / 6.0;
    prop.apply_k1(f0, &tabs.full, 0, &mut du, w);
    prop.apply_k1(fm, &tabs.half, 0, &mut du, 4.0 * w);
    prop.apply_k1(f0, &tabs.full, 1, &mut dv, w);
    prop.apply_k1(fm, &tabs.half, 1, &mut dv, 4.0 * w);
    dv.axpy(w, f1).expect("same grid");
    (du, dv)
}

/// Displacement contribution over `[0, dt/2]` from the samples at `0` and
/// `dt/4`: Simpson's rule on the half step.
fn simpson_half_displacement(
    prop: &Propagator,
    tabs: &StepTables,
    dt: f64,
    f0: &SpectralField,
    fq: &SpectralField,
) -> SpectralField {
    let mut du = SpectralField::zeros(*f0.grid());
    let w = dt / 12.0;
    prop.apply_k1(f0, &tabs.half, 0, &mut du, w);
    prop.apply_k1(fq, &tabs.quarter, 0, &mut du, 4.0 * w);
    du
}

fn state_norm(s: &ElasticState) -> f64 {
    crate::norms::spectral_l2(&s.displacement) + crate::norms::spectral_l2(&s.velocity)
}

const BLOWUP: f64 = 1e6;

/// Time marching with one predictor-corrector pass per step; `observer`
/// sees every full-step state together with `F` at that state.
pub fn evolve_observed(
    f0: &SpectralField,
    f1: &SpectralField,
    lame: &LameParams,
    tensor: &ContractionTensor,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&ElasticState, &SpectralField) -> Result<()>,
) -> Result<Trajectory> {
    let steps = config.validate()?;
    check_grid(f0.grid(), f1.grid())?;
    let grid = *f0.grid();
    let prop = Propagator::new(grid, *lame);
    let eval = Nonlinearity::new(grid, tensor.clone(), config.dealias);
    let dt = config.dt;
    let tabs = StepTables::new(&prop, dt);
    let mut traj = Trajectory::new(grid);

    let mut state = ElasticState::new(f0.clone(), f1.clone(), 0.0)?;
    let initial = state_norm(&state);
    let mut f_now = eval.eval_spectral(&state.displacement)?;
    let mut f_prev: Option<SpectralField> = None;
    observer(&state, &f_now)?;
    traj.push(state.clone(), f_now.clone())?;
    traj.push_node(0.0, &f_now);

    for step in 0..steps {
        let t = step as f64 * dt;
        let lin_full = prop.propagate_with(&state, &tabs.full)?;
        let lin_half = prop.propagate_with(&state, &tabs.half)?;
        // linear extrapolation of F from the previous step, frozen on the first
        let (f_quarter, f_mid_guess) = match &f_prev {
            Some(fp) => (
                lin_comb(&[(1.25, &f_now), (-0.25, fp)]),
                lin_comb(&[(1.5, &f_now), (-0.5, fp)]),
            ),
            None => (f_now.clone(), f_now.clone()),
        };
        let mut mid = lin_half.displacement;
        mid.add_assign(&simpson_half_displacement(&prop, &tabs, dt, &f_now, &f_quarter))?;
        let (pu, _) = simpson_step(&prop, &tabs, dt, &f_now, &f_mid_guess, &f_now);
        let mut end_guess = lin_full.displacement.clone();
        end_guess.add_assign(&pu)?;

        let f_mid = eval.eval_spectral(&mid)?;
        let f_end = eval.eval_spectral(&end_guess)?;
        let (du, dv) = simpson_step(&prop, &tabs, dt, &f_now, &f_mid, &f_end);
        let mut next = lin_full;
        next.displacement.add_assign(&du)?;
        next.velocity.add_assign(&dv)?;
        next.time = (step + 1) as f64 * dt;

        let size = state_norm(&next);
        if !size.is_finite() || (initial > 0.0 && size > BLOWUP * initial) {
            return Err(Error::Divergence(next.time));
        }
        let f_next = eval.eval_spectral(&next.displacement)?;
        traj.push_node(t + 0.5 * dt, &f_mid);
        traj.push_node(next.time, &f_next);
        observer(&next, &f_next)?;
        if (step + 1) % config.snapshot_every == 0 || step + 1 == steps {
            traj.push(next.clone(), f_next.clone())?;
        }
        f_prev = Some(std::mem::replace(&mut f_now, f_next));
        state = next;
    }
    Ok(traj)
}

pub fn evolve(
    f0: &SpectralField,
    f1: &SpectralField,
    lame: &LameParams,
    tensor: &ContractionTensor,
    config: &SolverConfig,
) -> Result<Trajectory> {
    evolve_observed(f0, f1, lame, tensor, config, &mut |_, _| Ok(()))
}

/// Output of [`picard_iterate`].
#[derive(Clone, Debug)]
pub struct PicardResult {
    /// Final iterate at the stored times.
    pub trajectory: Trajectory,
    /// X1 distance between iterates `n` and `n - 1`, starting at `n = 1`.
    pub distances: Vec<f64>,
    /// `distances[n] / distances[n - 1]`, starting at `n = 2`.
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// Nonlinear part `u - u_lin` of the final iterate at every full step,
    /// on the retained modes.
    pub nonlinear_part: Vec<(f64, CompactField, CompactField)>,
    pub layout: CompactLayout,
}

impl PicardResult {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }
}

/// Picard iteration `u <- u_lin + Phi_N[u]` on `[0, t_end]`.
///
/// `Phi_N[u](t) = int_0^t K1(t - s) F(u(s)) ds` is discretised by composite
/// Simpson on the nodes `k dt / 2`; at full steps the composite sum is
/// accumulated through the exact semigroup identity, and at half steps the
/// last partial interval uses the quadratic interpolant of `F`.
pub fn picard_iterate(
    f0: &SpectralField,
    f1: &SpectralField,
    lame: &LameParams,
    tensor: &ContractionTensor,
    config: &SolverConfig,
) -> Result<PicardResult> {
    let steps = config.validate()?;
    check_grid(f0.grid(), f1.grid())?;
    let grid = *f0.grid();
    let prop = Propagator::new(grid, *lame);
    let eval = Nonlinearity::new(grid, tensor.clone(), config.dealias);
    let layout = CompactLayout::new(grid, config.dealias);
    let dt = config.dt;
    let tabs = StepTables::new(&prop, dt);
    let data = ElasticState::new(f0.clone(), f1.clone(), 0.0)?;
    let node_time = |j: usize| j as f64 * 0.5 * dt;
    let u_lin = |j: usize| -> Result<ElasticState> {
        let mut s = prop.propagate(&data, node_time(j))?;
        s.time = node_time(j);
        Ok(s)
    };

    // iteration 0: u = u_lin
    let mut forcing: Vec<CompactField> = Vec::with_capacity(2 * steps + 1);
    let mut traj = Trajectory::new(grid);
    for j in 0..=2 * steps {
        let lin = u_lin(j)?;
        let f = eval.eval_spectral(&lin.displacement)?;
        traj.push_node(node_time(j), &f);
        if j % 2 == 0 && ((j / 2) % config.snapshot_every == 0 || j == 2 * steps) {
            traj.push(lin, f.clone())?;
        }
        forcing.push(layout.compress(&f));
    }
    let mut nonlinear: Vec<(f64, CompactField, CompactField)> = (0..=steps)
        .map(|i| (i as f64 * dt, layout.zeros(), layout.zeros()))
        .collect();
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    let mut streak = 0;

    for _iter in 0..config.picard_max_iter {
        let mut psi = ElasticState::zeros(grid, 0.0);
        let mut new_forcing: Vec<CompactField> = Vec::with_capacity(forcing.len());
        new_forcing.push(forcing[0].clone());
        // the previous sweep's states are not read again
        traj = Trajectory::new(grid);
        let first = u_lin(0)?;
        let f_first = layout.expand(&forcing[0]);
        traj.push_node(0.0, &f_first);
        traj.push(first, f_first)?;
        let mut sup: f64 = 0.0;
        for i in 0..steps {
            let fa = layout.expand(&forcing[2 * i]);
            let fm = layout.expand(&forcing[2 * i + 1]);
            let fb = layout.expand(&forcing[2 * i + 2]);
            let fq = lin_comb(&[(0.375, &fa), (0.75, &fm), (-0.125, &fb)]);
            // half node
            let half = prop.propagate_with(&psi, &tabs.half)?;
            let mut mid_phi = half.displacement;
            mid_phi.add_assign(&simpson_half_displacement(&prop, &tabs, dt, &fa, &fq))?;
            let mut mid_u = u_lin(2 * i + 1)?.displacement;
            mid_u.add_assign(&mid_phi)?;
            let f_mid = eval.eval_spectral(&mid_u)?;
            // full node
            let mut next = prop.propagate_with(&psi, &tabs.full)?;
            let (du, dv) = simpson_step(&prop, &tabs, dt, &fa, &fm, &fb);
            next.displacement.add_assign(&du)?;
            next.velocity.add_assign(&dv)?;
            next.time = (i + 1) as f64 * dt;
            let mut full_u = u_lin(2 * i + 2)?;
            full_u.displacement.add_assign(&next.displacement)?;
            full_u.velocity.add_assign(&next.velocity)?;
            let size = state_norm(&full_u);
            if !size.is_finite() || size > BLOWUP * state_norm(&data).max(f64::MIN_POSITIVE) {
                return Err(Error::Divergence(next.time));
            }
            let f_end = eval.eval_spectral(&full_u.displacement)?;

            let cu = layout.compress(&next.displacement);
            let cv = layout.compress(&next.velocity);
            let slot = &mut nonlinear[i + 1];
            let d = layout.x1_difference((&cu, &cv), (&slot.1, &slot.2)).weighted(next.time);
            sup = sup.max(d);
            slot.1 = cu;
            slot.2 = cv;

            traj.push_node(node_time(2 * i + 1), &f_mid);
            traj.push_node(next.time, &f_end);
            if (i + 1) % config.snapshot_every == 0 || i + 1 == steps {
                traj.push(full_u, f_end.clone())?;
            }
            new_forcing.push(layout.compress(&f_mid));
            new_forcing.push(layout.compress(&f_end));
            psi = next;
        }
        forcing = new_forcing;
        if let Some(&prev) = distances.last() {
            let ratio: f64 = if prev > 0.0 { sup / prev } else { 0.0 };
            ratios.push(ratio);
            streak = if ratio >= 1.0 { streak + 1 } else { 0 };
            if streak >= 3 {
                return Err(Error::NoContraction(format!(
                    "X1 distance ratios {:?}",
                    &ratios[ratios.len() - 3..]
                )));
            }
        }
        distances.push(sup);
        if sup < config.picard_tol {
            converged = true;
            break;
        }
    }
    Ok(PicardResult {
        trajectory: traj,
        distances,
        ratios,
        converged,
        nonlinear_part: nonlinear,
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PhysicalField;

    #[test]
    fn zero_field_gives_zero() {
        let g = Grid3::new(8, 6.0).unwrap();
        let f = nonlinearity(&PhysicalField::zeros(g), &ContractionTensor::standard(), DealiasRule::TwoThirds).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig {
            dt: 0.5,
            t_end: 2.0,
            dealias: DealiasRule::TwoThirds,
            picard_tol: 1e-8,
            picard_max_iter: 5,
            snapshot_every: 1,
        };
        assert_eq!(c.validate().unwrap(), 4);
        c.t_end = 2.2;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.dt = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn tensor_rejects_bad_indices() {
        let bad = Term {
            out: 3,
            grad: [0, 0],
            hess: [0, 0, 0],
            weight: 1.0,
        };
        assert!(ContractionTensor::new(vec![bad]).is_err());
        assert_eq!(ContractionTensor::standard().terms().len(), 27);
        assert!(ContractionTensor::zero().is_zero());
    }
}
