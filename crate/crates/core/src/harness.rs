//! Scenario runner: configuration, suites and report files.
//!
//! A scenario is a TOML file naming a suite and its parameters. Running it
//! computes every series and assertion in memory first, so a bad
//! configuration or a failed computation leaves nothing on disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::asymptotics::{log_times, profile_error_series, LinearSource, NormId, Source};
use crate::audit::{
    decay_fit, dilation_scan, heat_l1_series, inequality_check, symbol_bound_scan, BoundId, Inequality,
};
use crate::elastic::{diagonalize_check, linear_propagate, ElasticState, LameParams, Propagator};
use crate::field::{PhysicalField, SpectralField};
use crate::grid::{FrequencyPart, Grid3};
use crate::kernels::{evaluate, kernel_set, lowfreq_residual, DampingParams, KernelKind};
use crate::nonlinear::{
    evolve, evolve_observed, picard_iterate, ContractionTensor, DealiasRule, SolverConfig, X1Terms,
};
use crate::norms::{seminorm, spectral_l2};
use crate::oracle::mode_oracle;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Kernels,
    LinearDecay,
    Smoothing,
    ProfileError,
    Nonlinear,
    Picard,
    Audit,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Kernels,
        Suite::LinearDecay,
        Suite::Smoothing,
        Suite::ProfileError,
        Suite::Nonlinear,
        Suite::Picard,
        Suite::Audit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::LinearDecay => "linear-decay",
            Suite::Smoothing => "smoothing",
            Suite::ProfileError => "profile-error",
            Suite::Nonlinear => "nonlinear",
            Suite::Picard => "picard",
            Suite::Audit => "audit",
        }
    }

    /// Acceptance criteria whose assertions the suite carries.
    pub fn criteria(&self) -> &'static [&'static str] {
        match self {
            Suite::Kernels => &["C1", "C2", "C11"],
            Suite::LinearDecay => &["C3"],
            Suite::Smoothing => &["C4"],
            Suite::ProfileError => &["C5"],
            Suite::Nonlinear => &["C8"],
            Suite::Picard => &["C7"],
            Suite::Audit => &["C6", "C9", "C10"],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LameSection {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

impl Default for LameSection {
    fn default() -> Self {
        Self { lambda: 0.0, mu: 1.0, nu: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `f0 = 0`, `f1 = g e`
    Gaussian,
    /// `f0 = g e`, `f1 = d_1 g e` (mean-zero `f1`)
    Dgaussian,
    /// independent random fields with spectrum in a shell
    BandRandom,
}

/// Initial data; `g` is `e^{-|x|^2 / (2 sigma^2)}` and `e = (1,1,1)/sqrt 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub family: Family,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Rescale to this value of the X1 functional at `t = 0`.
    #[serde(default)]
    pub x1_norm: Option<f64>,
    /// Shell `[k_lo, k_hi]` for `band_random`.
    #[serde(default = "default_band")]
    pub band: [f64; 2],
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

fn default_band() -> [f64; 2] {
    [1.0, 3.0]
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            family: Family::Gaussian,
            sigma: 1.0,
            amplitude: 1.0,
            x1_norm: None,
            band: default_band(),
            seed: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub spacing: Spacing,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Schedule {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.count >= 2 && self.start < self.end && self.start.is_finite() && self.end.is_finite()) {
            return Err(Error::Config(format!("time schedule must be increasing with at least 2 points: {self:?}")));
        }
        Ok(match self.spacing {
            Spacing::Log => {
                if !(self.start > 0.0) {
                    return Err(Error::Config("log schedule needs a positive start".into()));
                }
                log_times(self.start, self.end, self.count)
            }
            Spacing::Linear => (0..self.count)
                .map(|i| self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64)
                .collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorChoice {
    Standard,
    DivergenceLaplacian,
    Zero,
}

impl TensorChoice {
    pub fn build(&self) -> ContractionTensor {
        match self {
            TensorChoice::Standard => ContractionTensor::standard(),
            TensorChoice::DivergenceLaplacian => ContractionTensor::divergence_laplacian(),
            TensorChoice::Zero => ContractionTensor::zero(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_iter")]
    pub picard_max_iter: usize,
    #[serde(default = "default_dealias")]
    pub dealias: DealiasRule,
    #[serde(default = "default_tensor")]
    pub tensor: TensorChoice,
}

fn default_tol() -> f64 {
    1e-14
}
fn default_iter() -> usize {
    8
}
fn default_dealias() -> DealiasRule {
    DealiasRule::TwoThirds
}
fn default_tensor() -> TensorChoice {
    TensorChoice::Standard
}

impl SolverSection {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            t_end: self.t_end,
            dealias: self.dealias,
            picard_tol: self.picard_tol,
            picard_max_iter: self.picard_max_iter,
            snapshot_every: 1,
        }
    }
}

/// Fixed-size settings of the audit suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    /// Grid `(n, L)` for the exponential fits.
    pub fit_grid: GridSection,
    /// Radial shell carrying the middle-band test field.
    pub mid_band: [f64; 2],
    /// Width of the Gaussian used for the high band.
    pub high_sigma: f64,
    pub fit_times: Schedule,
    pub dilation_grid: GridSection,
    pub dilations: Vec<f64>,
    pub heat_grid: GridSection,
    pub heat_times: Schedule,
    pub riesz_fields: usize,
    pub scan_per_axis: usize,
    pub scan_t: [f64; 2],
    pub scan_r_min: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            fit_grid: GridSection { n: 32, length: 2.0 * std::f64::consts::PI },
            mid_band: [3.2, 5.4],
            high_sigma: 0.3,
            fit_times: Schedule { spacing: Spacing::Linear, start: 0.1, end: 30.0, count: 30 },
            dilation_grid: GridSection { n: 128, length: 28.0 },
            dilations: vec![0.5, 1.0, 2.0],
            heat_grid: GridSection { n: 128, length: 256.0 },
            heat_times: Schedule { spacing: Spacing::Log, start: 10.0, end: 1000.0, count: 8 },
            riesz_fields: 4,
            scan_per_axis: 32,
            scan_t: [1.0, 1e3],
            scan_r_min: 1e-3,
        }
    }
}

/// One experiment; sections left out take the suite defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub suite: Option<Suite>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lame: LameSection,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub times: Option<Schedule>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub audit: Option<AuditSection>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The acceptance setup of `suite`.
    pub fn default_for(suite: Suite) -> Self {
        let mut s = Scenario {
            name: suite.as_str().to_string(),
            suite: Some(suite),
            seed: 0,
            lame: LameSection::default(),
            data: None,
            grid: None,
            times: None,
            solver: None,
            audit: None,
        };
        s.fill_defaults();
        s
    }

    fn fill_defaults(&mut self) {
        let suite = match self.suite {
            Some(s) => s,
            None => return,
        };
        let log = |a: f64, b: f64, n: usize| Schedule { spacing: Spacing::Log, start: a, end: b, count: n };
        match suite {
            Suite::Kernels => {
                self.grid.get_or_insert(GridSection { n: 16, length: 12.0 });
                self.data.get_or_insert(DataSection { family: Family::Dgaussian, ..DataSection::default() });
                self.times.get_or_insert(Schedule { spacing: Spacing::Linear, start: 0.0, end: 20.0, count: 21 });
            }
            Suite::LinearDecay | Suite::Smoothing | Suite::ProfileError => {
                self.data.get_or_insert_with(DataSection::default);
                self.times.get_or_insert(log(1e2, 1e4, 11));
            }
            Suite::Nonlinear => {
                self.grid.get_or_insert(GridSection { n: 32, length: 16.0 });
                self.data.get_or_insert(DataSection {
                    family: Family::Dgaussian,
                    amplitude: 0.1,
                    ..DataSection::default()
                });
                self.solver.get_or_insert(SolverSection {
                    dt: 0.25,
                    t_end: 10.0,
                    picard_tol: default_tol(),
                    picard_max_iter: default_iter(),
                    dealias: default_dealias(),
                    tensor: default_tensor(),
                });
            }
            Suite::Picard => {
                self.grid.get_or_insert(GridSection { n: 64, length: 16.0 });
                self.data.get_or_insert(DataSection {
                    family: Family::Dgaussian,
                    x1_norm: Some(1e-3),
                    ..DataSection::default()
                });
                self.solver.get_or_insert(SolverSection {
                    dt: 0.5,
                    t_end: 25.0,
                    picard_tol: default_tol(),
                    picard_max_iter: default_iter(),
                    dealias: default_dealias(),
                    tensor: default_tensor(),
                });
            }
            Suite::Audit => {
                self.audit.get_or_insert_with(AuditSection::default);
            }
        }
    }

    /// Checks everything that can be checked without running the suite.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("scenario name is empty".into()));
        }
        if self.suite.is_none() {
            return Err(Error::Config("no suite selected".into()));
        }
        self.lame()?;
        if let Some(g) = &self.grid {
            Grid3::new(g.n, g.length).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(t) = &self.times {
            t.values()?;
        }
        if let Some(d) = &self.data {
            if !(d.sigma > 0.0 && d.amplitude.is_finite() && d.amplitude != 0.0) {
                return Err(Error::Config("data needs sigma > 0 and a nonzero amplitude".into()));
            }
            if d.x1_norm.is_some() && d.amplitude != 1.0 {
                return Err(Error::Config("give either amplitude or x1_norm, not both".into()));
            }
            if let Some(x) = d.x1_norm {
                if !(x > 0.0) {
                    return Err(Error::Config(format!("x1_norm must be positive, got {x}")));
                }
            }
            if !(d.band[0] >= 0.0 && d.band[0] < d.band[1]) {
                return Err(Error::Config(format!("bad band {:?}", d.band)));
            }
        }
        if let Some(s) = &self.solver {
            s.config().validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let suite = self.suite.expect("checked");
        if matches!(suite, Suite::LinearDecay | Suite::Smoothing | Suite::ProfileError) {
            let d = self.data.as_ref().expect("filled");
            if d.family != Family::Gaussian || d.x1_norm.is_some() {
                return Err(Error::Config("the radial suites take gaussian data only".into()));
            }
        }
        if let Some(a) = &self.audit {
            for g in [&a.fit_grid, &a.dilation_grid, &a.heat_grid] {
                Grid3::new(g.n, g.length).map_err(|e| Error::Config(e.to_string()))?;
            }
            a.fit_times.values()?;
            a.heat_times.values()?;
            if a.dilations.is_empty() || a.dilations.iter().any(|l| !(*l > 0.0)) {
                return Err(Error::Config("dilations must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn lame(&self) -> Result<LameParams> {
        LameParams::new(self.lame.lambda, self.lame.mu, self.lame.nu).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = to_canonical_json(&serde_json::to_value(self).expect("serializable"));
        hex(&Sha256::digest(canon.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Loads a scenario for `suite`, applying the seed override and defaults.
pub fn resolve(suite: Suite, config: Option<&Path>, seed: Option<u64>) -> Result<Scenario> {
    let mut s = match config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default_for(suite),
    };
    match s.suite {
        Some(x) if x != suite => {
            return Err(Error::Config(format!(
                "config is for suite `{}` but `{}` was requested",
                x.as_str(),
                suite.as_str()
            )))
        }
        _ => s.suite = Some(suite),
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s.fill_defaults();
    s.validate()?;
    Ok(s)
}

/// How an assertion compares its value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Within,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: String,
    pub label: String,
    pub relation: Relation,
    pub value: f64,
    /// Bound for `at_most` / `at_least`, target for `within`.
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Positive by the amount the assertion misses.
    pub diff: f64,
}

impl Check {
    pub fn at_most(criterion: &str, label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::make(criterion, label.into(), Relation::AtMost, value, bound, 0.0, value - bound)
    }

    pub fn at_least(criterion: &str, label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::make(criterion, label.into(), Relation::AtLeast, value, bound, 0.0, bound - value)
    }

    pub fn within(criterion: &str, label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::make(criterion, label.into(), Relation::Within, value, target, tol, (value - target).abs() - tol)
    }

    pub fn holds(criterion: &str, label: impl Into<String>, ok: bool) -> Self {
        Self::at_least(criterion, label, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    fn make(criterion: &str, label: String, relation: Relation, value: f64, target: f64, tolerance: f64, diff: f64) -> Self {
        let passed = value.is_finite() && diff <= 0.0;
        Self {
            criterion: criterion.to_string(),
            label,
            relation,
            value,
            target,
            tolerance,
            passed,
            diff: if diff.is_finite() { diff } else { f64::MAX },
        }
    }
}

/// A table written as `<name>.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything a suite produces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
    /// Suite-specific details for the summary.
    pub details: BTreeMap<String, Value>,
}

impl Results {
    pub fn is_empty(&self) -> bool {
        self.checks.is_empty() && self.series.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn detail(&mut self, key: impl Into<String>, v: impl Serialize) {
        self.details.insert(key.into(), serde_json::to_value(v).expect("serializable"));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_float(n.as_f64().expect("f64")))
            } else {
                out.push_str(&n.to_string())
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_json(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            // serde_json's map is ordered by key
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("string"));
                out.push_str(": ");
                write_json(x, indent + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// JSON with sorted keys and every float printed with 17 significant digits.
pub fn to_canonical_json(v: &Value) -> String {
    let mut s = String::new();
    write_json(v, 0, &mut s);
    s.push('\n');
    s
}

pub fn series_csv(s: &Series) -> String {
    let mut out = s.columns.join(",");
    out.push('\n');
    for row in &s.rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_float(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn summary_value(scenario: &Scenario, results: &Results) -> Value {
    let suite = scenario.suite.expect("resolved");
    let mut per: BTreeMap<&str, bool> = suite.criteria().iter().map(|c| (*c, true)).collect();
    for c in &results.checks {
        if let Some(v) = per.get_mut(c.criterion.as_str()) {
            *v &= c.passed;
        }
    }
    json!({
        "scenario": scenario.name,
        "suite": suite.as_str(),
        "criteria": per,
        "passed": results.passed(),
        "checks": results.checks,
        "failures": results.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>(),
        "details": results.details,
    })
}

/// Writes the CSV series or the JSON summary into `dir`; returns the paths.
pub fn emit_report(scenario: &Scenario, results: &Results, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        Format::Csv => {
            for s in &results.series {
                let p = dir.join(format!("{}.csv", s.name));
                std::fs::write(&p, series_csv(s))?;
                written.push(p);
            }
        }
        Format::Json => {
            let p = dir.join("summary.json");
            std::fs::write(&p, to_canonical_json(&summary_value(scenario, results)))?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Outcome of [`run_scenario`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub results: Results,
}

/// Runs a resolved scenario and writes `manifest.json`, the CSV series and
/// `summary.json` into `out`.
pub fn run_scenario(scenario: &Scenario, out: &Path) -> Result<RunOutcome> {
    scenario.validate()?;
    let results = run_suite(scenario)?;
    let mut files = emit_report(scenario, &results, Format::Csv, out)?;
    files.extend(emit_report(scenario, &results, Format::Json, out)?);
    let mut names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().expect("file").to_string_lossy().into_owned())
        .collect();
    names.sort();
    let manifest = json!({
        "scenario": scenario.name,
        "suite": scenario.suite.expect("resolved").as_str(),
        "config_sha256": scenario.hash(),
        "config": scenario,
        "toolkit": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "files": names,
    });
    let p = out.join("manifest.json");
    std::fs::write(&p, to_canonical_json(&manifest))?;
    files.push(p);
    Ok(RunOutcome { passed: results.passed(), files, results })
}

/// Computes the suite without touching the filesystem.
pub fn run_suite(s: &Scenario) -> Result<Results> {
    match s.suite.ok_or_else(|| Error::Config("no suite selected".into()))? {
        Suite::Kernels => kernels_suite(s),
        Suite::LinearDecay => linear_decay_suite(s),
        Suite::Smoothing => smoothing_suite(s),
        Suite::ProfileError => profile_error_suite(s),
        Suite::Nonlinear => nonlinear_suite(s),
        Suite::Picard => picard_suite(s),
        Suite::Audit => audit_suite(s),
    }
}

fn grid_of(g: Option<&GridSection>) -> Result<Grid3> {
    let g = g.ok_or_else(|| Error::Config("grid section missing".into()))?;
    Grid3::new(g.n, g.length)
}

/// Hermitian random field with spectrum in `k_lo <= |xi| <= k_hi`, unit L^2 norm.
pub fn band_random_field(grid: Grid3, seed: u64, band: [f64; 2]) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let m = grid.mirror_index(idx);
        if m < idx || grid.nyquist_axes(idx).iter().any(|&b| b) {
            continue;
        }
        let xi = grid.wave_vector(idx);
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        if r < band[0] || r > band[1] {
            continue;
        }
        for a in 0..3 {
            let c = if m == idx {
                C::new(rng.random::<f64>() - 0.5, 0.0)
            } else {
                C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            };
            f.comps[a][idx] = c;
            f.comps[a][m] = c.conj();
        }
    }
    let n = spectral_l2(&f);
    if n > 0.0 {
        f.scaled(1.0 / n)
    } else {
        f
    }
}

/// `(f0, f1)` for the data section on `grid`.
pub fn initial_data(grid: Grid3, data: &DataSection, seed: u64) -> Result<(SpectralField, SpectralField)> {
    let e = 1.0 / 3f64.sqrt();
    let s2 = data.sigma * data.sigma;
    let gauss = move |x: [f64; 3]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s2)).exp();
    let (f0, f1) = match data.family {
        Family::Gaussian => (
            SpectralField::zeros(grid),
            PhysicalField::from_fn(grid, |x| [gauss(x) * e; 3]).to_spectral(),
        ),
        Family::Dgaussian => (
            PhysicalField::from_fn(grid, |x| [gauss(x) * e; 3]).to_spectral(),
            PhysicalField::from_fn(grid, |x| [-x[0] / s2 * gauss(x) * e; 3]).to_spectral(),
        ),
        Family::BandRandom => {
            let seed = data.seed.unwrap_or(seed);
            (
                band_random_field(grid, seed, data.band),
                band_random_field(grid, seed.wrapping_add(1), data.band),
            )
        }
    };
    let c = match data.x1_norm {
        Some(target) => {
            let x0 = X1Terms::of_state(&ElasticState::new(f0.clone(), f1.clone(), 0.0)?).weighted(0.0);
            if !(x0 > 0.0) {
                return Err(Error::DegenerateInput("data has zero X1 functional".into()));
            }
            target / x0
        }
        None => data.amplitude,
    };
    Ok((f0.scaled(c), f1.scaled(c)))
}

fn state_diff(a: &ElasticState, b: &ElasticState) -> Result<f64> {
    let mut du = a.displacement.clone();
    du.axpy(-1.0, &b.displacement)?;
    let mut dv = a.velocity.clone();
    dv.axpy(-1.0, &b.velocity)?;
    Ok(du.max_abs().max(dv.max_abs()))
}

fn kernels_suite(s: &Scenario) -> Result<Results> {
    let mut res = Results::default();
    let lame = s.lame()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);

    // C1: closed forms against the per-mode ODE
    let mut worst: f64 = 0.0;
    let mut c1 = Series::new("kernel_oracle", &["beta", "nu", "t", "r", "k0", "k0_oracle", "k1", "k1_oracle"]);
    for _ in 0..200 {
        let beta = rng.random_range(0.1..4.0);
        let nu = rng.random_range(0.1..4.0);
        let r = rng.random_range(0.0..8.0);
        let t = rng.random_range(0.0..20.0);
        let p = DampingParams::new(beta, nu)?;
        let k = kernel_set(t, r, &p);
        let (o0, _) = mode_oracle(t, r, &p, 1.0, 0.0, None)?;
        let (o1, _) = mode_oracle(t, r, &p, 0.0, 1.0, None)?;
        for (a, b) in [(k.k0[0], o0), (k.k1[0], o1)] {
            worst = worst.max((a - b).abs() / (1e-8 * b.abs()).max(1e-10));
        }
        c1.push(vec![beta, nu, t, r, k.k0[0], o0, k.k1[0], o1]);
    }
    res.checks.push(Check::at_most("C1", "max |closed - oracle| / max(1e-8 |oracle|, 1e-10)", worst, 1.0));
    res.series.push(c1);

    // C2: low-frequency representation on a 50 x 50 grid inside supp chi_L
    let c0 = lame.cutoffs().c0;
    for (tag, p) in [("long", lame.long()), ("trans", lame.trans())] {
        let mut w: f64 = 0.0;
        for i in 0..50 {
            let t = 100.0 * i as f64 / 49.0;
            for j in 1..=50 {
                let r = c0 * j as f64 / 50.0;
                let (a, b) = lowfreq_residual(t, r, &p)?;
                w = w.max(a.max(b) / (1e-10 * (1.0 + t)));
            }
        }
        res.checks.push(Check::at_most("C2", format!("{tag}: max residual / (1e-10 (1+t))"), w, 1.0));
    }

    // kernel table for plotting
    let times = s.times.as_ref().expect("filled").values()?;
    let mut table = Series::new("kernel_table", &["t", "r", "k0", "k1", "k00", "g0", "g1"]);
    let p = lame.long();
    for &t in &times {
        for j in 0..=32 {
            let r = 8.0 * j as f64 / 32.0;
            let e = evaluate(t, r, &p);
            table.push(vec![t, r, e.k0, e.k1, e.k00, e.g0, e.g1]);
        }
    }
    res.series.push(table);

    // C11: diagonalization, semigroup, decoupling
    let mut diag: f64 = 0.0;
    for _ in 0..100 {
        let xi = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let t = rng.random_range(0.0..20.0);
        diag = diag.max(diagonalize_check(t, xi, &lame, None)?);
    }
    res.checks.push(Check::at_most("C11", "diagonalization difference", diag, 1e-12));

    let grid = grid_of(s.grid.as_ref())?;
    let (f0, f1) = initial_data(grid, s.data.as_ref().expect("filled"), s.seed)?;
    let prop = Propagator::new(grid, lame);
    let data = ElasticState::new(f0, f1, 0.0)?;
    let scale = data.displacement.max_abs().max(data.velocity.max_abs());
    let mut semi: f64 = 0.0;
    for (a, b) in [(0.3, 1.7), (2.5, 4.0), (7.0, 11.0)] {
        let two = prop.propagate(&prop.propagate(&data, a)?, b)?;
        let one = prop.propagate(&data, a + b)?;
        semi = semi.max(state_diff(&two, &one)? / scale);
    }
    res.checks.push(Check::at_most("C11", "semigroup composition (relative)", semi, 1e-10));

    let dec = LameParams::new(-lame.mu, lame.mu, lame.nu)?;
    let one_comp = {
        let mut f = data.velocity.clone();
        for comp in &mut f.comps[1..] {
            comp.fill(C::new(0.0, 0.0));
        }
        f
    };
    let mut leak: f64 = 0.0;
    for t in [0.5, 3.0, 10.0] {
        let st = linear_propagate(&SpectralField::zeros(grid), &one_comp, t, &dec)?;
        let own = st.displacement.comps[0].iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        let other = st.displacement.comps[1..]
            .iter()
            .flatten()
            .fold(0.0_f64, |m, c| m.max(c.norm()));
        leak = leak.max(other / own);
    }
    res.checks.push(Check::at_most("C11", "lambda + mu = 0 cross-component leak", leak, 1e-14));
    res.detail("kernel_oracle_worst", worst);
    Ok(res)
}

fn radial_source_check(s: &Scenario) -> Result<(LameParams, f64, Vec<f64>)> {
    let d = s.data.as_ref().expect("filled");
    Ok((s.lame()?, d.sigma, s.times.as_ref().expect("filled").values()?))
}

fn slope_series(name: &str, times: &[f64], values: &[f64]) -> Series {
    let mut se = Series::new(name, &["t", "value"]);
    for (t, v) in times.iter().zip(values) {
        se.push(vec![*t, *v]);
    }
    se
}

fn file_label(id: NormId) -> String {
    let p = if id.p.is_infinite() { "inf".to_string() } else { format!("{}", id.p) };
    format!("alpha{}_ell{}_p{}", id.alpha, id.ell, p)
}

fn linear_series_suite(s: &Scenario, criterion: &str, prefix: &str, targets: &[(NormId, f64)]) -> Result<Results> {
    let (lame, sigma, times) = radial_source_check(s)?;
    let g = LinearSource::gaussian_hat(sigma);
    let src = LinearSource { lame, data_hat: &g, data_radius: 12.0 / sigma };
    let mut res = Results::default();
    for &(id, tol) in targets {
        let rep = src.solution_series(&times, id)?;
        let expected = rep.expected.ok_or_else(|| Error::UnsupportedNorm(id.label()))?;
        res.checks.push(Check::within(criterion, format!("slope {}", id.label()), rep.fitted_slope, expected, tol));
        res.series.push(slope_series(&format!("{prefix}_{}", file_label(id)), &times, &rep.values));
        res.detail(id.label(), &rep);
    }
    Ok(res)
}

fn linear_decay_suite(s: &Scenario) -> Result<Results> {
    let mut targets: Vec<(NormId, f64)> = (1..=3).map(|a| (NormId::new(a, 0, 2.0), 0.05)).collect();
    targets.extend((0..=1).map(|a| (NormId::new(a, 1, 2.0), 0.05)));
    linear_series_suite(s, "C3", "linear_decay", &targets)
}

fn smoothing_suite(s: &Scenario) -> Result<Results> {
    let targets = [
        (NormId::new(0, 0, f64::INFINITY), 0.1),
        (NormId::new(1, 0, f64::INFINITY), 0.1),
        (NormId::new(0, 2, 2.0), 0.1),
    ];
    linear_series_suite(s, "C4", "smoothing", &targets)
}

fn profile_error_suite(s: &Scenario) -> Result<Results> {
    let (lame, sigma, times) = radial_source_check(s)?;
    let g = LinearSource::gaussian_hat(sigma);
    let src = LinearSource { lame, data_hat: &g, data_radius: 12.0 / sigma };
    let mut res = Results::default();
    for id in NormId::profile_catalogue() {
        let rep = profile_error_series(&Source::Linear(&src), id, &times)?;
        res.checks.push(Check::at_least("C5", format!("gain {}", id.label()), rep.gain, 0.35));
        let mut se = Series::new(format!("profile_error_{}", file_label(id)), &["t", "solution", "error"]);
        for i in 0..times.len() {
            se.push(vec![times[i], rep.solution.values[i], rep.error.values[i]]);
        }
        res.series.push(se);
        res.detail(id.label(), &rep);
    }
    Ok(res)
}

fn nonlinear_suite(s: &Scenario) -> Result<Results> {
    let lame = s.lame()?;
    let grid = grid_of(s.grid.as_ref())?;
    let solver = s.solver.as_ref().expect("filled");
    let cfg = solver.config();
    let data = s.data.as_ref().expect("filled");
    let (f0, f1) = initial_data(grid, data, s.seed)?;
    let mut res = Results::default();

    let traj = evolve(&f0, &f1, &lame, &ContractionTensor::zero(), &cfg)?;
    let mut worst: f64 = 0.0;
    for st in &traj.states {
        let lin = linear_propagate(&f0, &f1, st.time, &lame)?;
        let scale = lin.displacement.max_abs().max(lin.velocity.max_abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(state_diff(st, &lin)? / scale);
    }
    res.checks.push(Check::at_most("C8", "zero tensor: max |evolve - linear| (relative)", worst, 1e-10));

    let tensor = solver.tensor.build();
    let mut dev = Vec::new();
    let mut table = Series::new("deviation", &["epsilon", "t", "relative_deviation"]);
    for k in 0..2 {
        let eps = 0.5f64.powi(k);
        let (a, b) = (f0.scaled(eps), f1.scaled(eps));
        let tr = evolve(&a, &b, &lame, &tensor, &cfg)?;
        let mut m: f64 = 0.0;
        for st in tr.states.iter().filter(|st| st.time > 0.0) {
            let lin = linear_propagate(&a, &b, st.time, &lame)?;
            let mut d = st.displacement.clone();
            d.axpy(-1.0, &lin.displacement)?;
            let rel = spectral_l2(&d) / spectral_l2(&lin.displacement);
            table.push(vec![eps * data.amplitude, st.time, rel]);
            m = m.max(rel);
        }
        dev.push(m);
    }
    let ratio = dev[1] / dev[0];
    res.checks.push(Check::within("C8", "deviation ratio when epsilon halves", ratio, 0.5, 0.1));
    res.series.push(table);
    res.detail("max_relative_deviation", &dev);
    Ok(res)
}

fn picard_suite(s: &Scenario) -> Result<Results> {
    let lame = s.lame()?;
    let grid = grid_of(s.grid.as_ref())?;
    let solver = s.solver.as_ref().expect("filled");
    // the comparison reads the per-step nonlinear parts; keep only the final state
    let mut cfg = solver.config();
    cfg.snapshot_every = cfg.validate()?;
    let (f0, f1) = initial_data(grid, s.data.as_ref().expect("filled"), s.seed)?;
    let tensor = solver.tensor.build();
    let pic = picard_iterate(&f0, &f1, &lame, &tensor, &cfg)?;
    let mut res = Results::default();
    res.checks.push(Check::holds("C7", "Picard iteration converged", pic.converged));
    for (i, r) in pic.ratios.iter().enumerate() {
        res.checks.push(Check::at_most("C7", format!("contraction ratio at iteration {}", i + 2), *r, 0.5));
    }
    let cross = evolve_vs_fixed_point(&f0, &f1, &lame, &tensor, &cfg, &pic)?;
    res.checks.push(Check::at_most("C7", "X1 distance evolve vs fixed point", cross, 5.0 * cfg.picard_tol));
    let mut hist = Series::new("picard_history", &["iteration", "distance", "ratio"]);
    for (i, d) in pic.distances.iter().enumerate() {
        let r = if i == 0 { f64::NAN } else { pic.ratios[i - 1] };
        hist.push(vec![(i + 1) as f64, *d, r]);
    }
    res.series.push(hist);
    res.detail("distances", &pic.distances);
    res.detail("ratios", &pic.ratios);
    res.detail("evolve_distance", cross);
    Ok(res)
}

/// Sup over full steps of the X1 distance between the nonlinear parts of
/// the time-marched solution and of the Picard fixed point.
pub fn evolve_vs_fixed_point(
    f0: &SpectralField,
    f1: &SpectralField,
    lame: &LameParams,
    tensor: &ContractionTensor,
    cfg: &SolverConfig,
    pic: &crate::nonlinear::PicardResult,
) -> Result<f64> {
    let prop = Propagator::new(*f0.grid(), *lame);
    let data = ElasticState::new(f0.clone(), f1.clone(), 0.0)?;
    let mut sup: f64 = 0.0;
    let mut k = 0;
    evolve_observed(f0, f1, lame, tensor, cfg, &mut |st, _| {
        let lin = prop.propagate(&data, st.time)?;
        let mut du = st.displacement.clone();
        du.axpy(-1.0, &lin.displacement)?;
        let mut dv = st.velocity.clone();
        dv.axpy(-1.0, &lin.velocity)?;
        let slot = pic
            .nonlinear_part
            .get(k)
            .ok_or_else(|| Error::Range(format!("no fixed-point state at t = {}", st.time)))?;
        let (cu, cv) = (pic.layout.compress(&du), pic.layout.compress(&dv));
        sup = sup.max(pic.layout.x1_difference((&cu, &cv), (&slot.1, &slot.2)).weighted(st.time));
        k += 1;
        Ok(())
    })?;
    Ok(sup)
}

/// Field whose spectrum is a smooth bump on the shell `band[0] < |xi| < band[1]`.
pub fn shell_field(grid: Grid3, band: [f64; 2], dir: [f64; 3]) -> SpectralField {
    let mut f = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let xi = grid.wave_vector(idx);
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        let s = (r - band[0]) / (band[1] - band[0]);
        if s > 0.0 && s < 1.0 {
            let b = (-1.0 / (s * (1.0 - s))).exp();
            for a in 0..3 {
                f.comps[a][idx] = C::new(b * dir[a], 0.0);
            }
        }
    }
    f
}

fn audit_suite(s: &Scenario) -> Result<Results> {
    let lame = s.lame()?;
    let a = s.audit.as_ref().expect("filled");
    let mut res = Results::default();

    // C6: exponential decay of the middle and high parts
    let fg = Grid3::new(a.fit_grid.n, a.fit_grid.length)?;
    let times = a.fit_times.values()?;
    let dir = [1.0, -1.0, 0.3];
    let mid_g = shell_field(fg, a.mid_band, dir);
    let s2 = a.high_sigma * a.high_sigma;
    let high_g = PhysicalField::from_fn(fg, |x| {
        let v = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s2)).exp();
        [v * dir[0], v * dir[1], v * dir[2]]
    })
    .to_spectral();
    let mut fits = Series::new("exp_fits", &["part", "which", "t", "value"]);
    for (pi, part, g) in [(1.0, FrequencyPart::Mid, &mid_g), (2.0, FrequencyPart::High, &high_g)] {
        let grad = seminorm(g, 1);
        for (wi, which) in [(0.0, KernelKind::K0), (1.0, KernelKind::K1)] {
            let tag = format!("{part:?} {which:?}");
            let fit = decay_fit(part, which, g, &lame, &times, grad)?;
            res.checks.push(Check::at_least("C6", format!("{tag}: c_fit"), fit.c_fit, f64::MIN_POSITIVE));
            res.checks.push(Check::at_most("C6", format!("{tag}: residual / log-range"), fit.residual, 0.05));
            res.checks.push(Check::at_most("C6", format!("{tag}: relative CI width of c_fit"), fit.c_ci / fit.c_fit, 0.25));
            if part == FrequencyPart::High && which == KernelKind::K1 {
                let worst = fit
                    .times
                    .iter()
                    .zip(&fit.values)
                    .map(|(t, v)| v / (fit.prefactor_fit * (-fit.c_fit * t).exp() * grad))
                    .fold(0.0, f64::max);
                res.checks.push(Check::at_most("C6", "High K1: |K1H g| / (P e^{-ct} |grad g|)", worst, 1.0 + 1e-12));
            }
            for (t, v) in fit.times.iter().zip(&fit.values) {
                fits.push(vec![pi, wi, *t, *v]);
            }
            res.detail(format!("fit {tag}"), &fit);
        }
    }
    res.series.push(fits);

    // C9: dilation invariance, Riesz, heat multiplier
    let dg = Grid3::new(a.dilation_grid.n, a.dilation_grid.length)?;
    let gauss = |x: [f64; 3]| {
        let v = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp();
        [v, 0.5 * v, -0.25 * v]
    };
    let mut dil = Series::new("dilations", &["inequality", "lambda", "ratio"]);
    for (k, ineq) in [
        Inequality::GnInf,
        Inequality::GnL1,
        Inequality::Grad2p { p: 1.0 },
        Inequality::Grad2p { p: 2.0 },
        Inequality::Sob6,
    ]
    .iter()
    .enumerate()
    {
        let r = dilation_scan(ineq, &dg, gauss, &a.dilations)?;
        let mid = r.iter().sum::<f64>() / r.len() as f64;
        let spread = r.iter().map(|x| (x - mid).abs()).fold(0.0, f64::max) / mid;
        res.checks.push(Check::at_most("C9", format!("{ineq:?}: dilation spread"), spread, 1e-6));
        for (l, v) in a.dilations.iter().zip(&r) {
            dil.push(vec![k as f64, *l, *v]);
        }
    }
    res.series.push(dil);

    let rg = Grid3::new(16, 2.0 * std::f64::consts::PI)?;
    let mut riesz: f64 = 0.0;
    for k in 0..a.riesz_fields {
        let g = band_random_field(rg, s.seed.wrapping_add(k as u64), [0.0, 8.0]).to_physical();
        for axis in 0..3 {
            riesz = riesz.max(inequality_check(&Inequality::Riesz { axis, p: 2.0 }, &g)?);
        }
    }
    res.checks.push(Check::at_most("C9", "Riesz l2 ratio", riesz, 1.0));

    let hg = Grid3::new(a.heat_grid.n, a.heat_grid.length)?;
    let ht = a.heat_times.values()?;
    let mut heat = Series::new("heat_l1", &["alpha", "ell", "t", "value"]);
    for (al, el) in [(1u32, 0u32), (2, 0), (0, 1)] {
        let rep = heat_l1_series(&hg, lame.nu, al, el, lame.cutoffs().c0, &ht)?;
        let bound = -(al as f64 / 2.0 + el as f64) + 0.1;
        res.checks.push(Check::at_most("C9", format!("heat L1 slope alpha={al}, ell={el}"), rep.fitted_slope, bound));
        for (t, v) in ht.iter().zip(&rep.values) {
            heat.push(vec![al as f64, el as f64, *t, *v]);
        }
    }
    res.series.push(heat);

    // C10: symbol-bound scans for both wave families
    let mut scans = Series::new("bound_scans", &["family", "bound", "max_ratio", "max_ratio_doubled"]);
    for (fi, p) in [(0.0, lame.long()), (1.0, lame.trans())] {
        let c0 = p.beta / p.nu;
        for (bi, b) in BoundId::ALL.iter().enumerate() {
            let rep = symbol_bound_scan(*b, &p, (a.scan_t[0], a.scan_t[1]), (a.scan_r_min, c0), a.scan_per_axis, s.seed)?;
            let fam = if fi == 0.0 { "long" } else { "trans" };
            let var = (rep.max_ratio / rep.max_ratio_doubled).max(rep.max_ratio_doubled / rep.max_ratio);
            res.checks.push(Check::at_most("C10", format!("{fam} {}: sup ratio variation", b.name()), var, 2.0 - 1e-12));
            scans.push(vec![fi, bi as f64, rep.max_ratio, rep.max_ratio_doubled]);
        }
    }
    res.series.push(scans);
    Ok(res)
}
