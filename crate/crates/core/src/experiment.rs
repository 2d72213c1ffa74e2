//! Instance generation and seeded certification runs.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::{gm_ratio_formula, gs_ratio, solve_form, FormMode, GSolveOptions, GSolveReport};
use crate::error::{Error, Result};
use crate::forms::{hermitian_quadratic, ConjugateForm, FormKey};
use crate::multilinear::{ratio_lm, ratio_ls, solve_lm, solve_ls, BaseCaseStrategy, SolveReport};
use crate::oracle::{brute_force_form_roots, brute_force_multilinear_roots, multistart_reference, ContinuousSet, Objective, OracleResult};
use crate::sampling::{RandomSource, RootOrder};
use crate::tensor::CTensor;

/// Pass tolerance against enumerated optima, relative to `1 + max(|v_max|, |v_min|)`.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Pass tolerance against multi-start references.
pub const REFERENCE_TOLERANCE: f64 = 1e-4;

const INSTANCE_TAG: u64 = 0x1257;
const SOLVER_TAG: u64 = 0x5017;
const ORACLE_TAG: u64 = 0x0a1c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    Lm,
    Linf,
    #[serde(rename = "LS")]
    Ls,
    Gm,
    Ginf,
    #[serde(rename = "GS")]
    Gs,
}

impl Model {
    pub fn is_multilinear(self) -> bool {
        matches!(self, Model::Lm | Model::Linf | Model::Ls)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Tensor,
    FormSquarefree,
    FormConvex,
    FormGeneral,
}

impl FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tensor" => Ok(InstanceKind::Tensor),
            "form_squarefree" | "squarefree" => Ok(InstanceKind::FormSquarefree),
            "form_convex" | "convex" => Ok(InstanceKind::FormConvex),
            "form_general" | "general" => Ok(InstanceKind::FormGeneral),
            other => Err(Error::Parameter(format!("unknown instance kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Instance {
    Tensor(CTensor),
    Form(ConjugateForm),
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn check_density(density: f64) -> Result<()> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Parameter(format!("density {density} must lie in (0, 1]")));
    }
    Ok(())
}

/// Random dense tensor with complex Gaussian entries; each entry kept with probability `density`.
pub fn random_tensor<R: Rng + ?Sized>(dims: &[usize], density: f64, rng: &mut R) -> Result<CTensor> {
    check_density(density)?;
    let len: usize = dims.iter().product();
    let data = (0..len)
        .map(|_| {
            let z = gaussian(rng);
            if density < 1.0 && rng.gen::<f64>() >= density {
                Complex64::new(0.0, 0.0)
            } else {
                z
            }
        })
        .collect();
    CTensor::from_vec(dims, data)
}

/// Sorted multisets of size `k` over `1..=n`.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            cur.push(i);
            rec(i, n, k, cur, out);
            cur.pop();
        }
    }
    rec(1, n, k, &mut cur, &mut out);
    out
}

fn all_keys(n: usize, d: usize) -> Vec<FormKey> {
    let mut keys = Vec::new();
    for k in 0..=d {
        for i in multisets(n, k) {
            for j in multisets(n, d - k) {
                keys.push((i.clone(), j));
            }
        }
    }
    keys
}

fn distinct_variables(key: &FormKey) -> bool {
    let mut all: Vec<usize> = key.0.iter().chain(&key.1).copied().collect();
    all.sort_unstable();
    all.windows(2).all(|w| w[0] != w[1])
}

fn paired_form<R: Rng + ?Sized>(n: usize, d: usize, keys: Vec<FormKey>, density: f64, rng: &mut R) -> Result<ConjugateForm> {
    let mut terms = Vec::new();
    for key in keys {
        let mirror = (key.1.clone(), key.0.clone());
        if key > mirror {
            continue;
        }
        let mut a = gaussian(rng);
        if density < 1.0 && rng.gen::<f64>() >= density {
            continue;
        }
        if key == mirror {
            a = Complex64::new(a.re, 0.0);
            terms.push((key, a));
        } else {
            terms.push((mirror, a.conj()));
            terms.push((key, a));
        }
    }
    ConjugateForm::from_coefficients(n, d, terms)
}

/// Random problem instance; `dims` is used for tensors, `n` and `d` for forms.
pub fn generate_instance<R: Rng + ?Sized>(kind: InstanceKind, dims: &[usize], n: usize, d: usize, density: f64, rng: &mut R) -> Result<Instance> {
    check_density(density)?;
    match kind {
        InstanceKind::Tensor => Ok(Instance::Tensor(random_tensor(dims, density, rng)?)),
        InstanceKind::FormGeneral => Ok(Instance::Form(paired_form(n, d, all_keys(n, d), density, rng)?)),
        InstanceKind::FormSquarefree => {
            if d > n {
                return Err(Error::Parameter(format!("a square-free form of degree {d} needs n ≥ {d}, got n = {n}")));
            }
            let keys = all_keys(n, d).into_iter().filter(distinct_variables).collect();
            Ok(Instance::Form(paired_form(n, d, keys, density, rng)?))
        }
        InstanceKind::FormConvex => {
            if d % 2 == 1 || d == 0 {
                return Err(Error::Parameter(format!("convex instances need an even degree, got d = {d}")));
            }
            let b: Vec<Vec<Complex64>> = (0..n).map(|_| (0..n).map(|_| gaussian(rng)).collect()).collect();
            let q: Vec<Vec<Complex64>> = (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| b[k][i].conj() * b[k][j]).sum()).collect())
                .collect();
            let g = hermitian_quadratic(&q)?.pow(d / 2)?;
            Ok(Instance::Form(g.with_convex_asserted(true)))
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_gamma() -> f64 {
    1.0
}

fn default_density() -> f64 {
    1.0
}

fn default_starts() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: Model,
    /// Slot dimensions for multilinear models.
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Variable count for form models.
    #[serde(default)]
    pub n: usize,
    /// Degree for form models.
    #[serde(default)]
    pub d: usize,
    #[serde(default)]
    pub m: Option<u32>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_delta")]
    pub epsilon: f64,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub strategy: Option<BaseCaseStrategy>,
    #[serde(default)]
    pub kind: Option<InstanceKind>,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_starts")]
    pub oracle_starts: usize,
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn new(model: Model) -> Self {
        ExperimentConfig {
            model,
            dims: Vec::new(),
            n: 0,
            d: 0,
            m: None,
            delta: default_delta(),
            gamma: default_gamma(),
            epsilon: default_delta(),
            trials: None,
            strategy: None,
            kind: None,
            density: default_density(),
            seeds: Vec::new(),
            oracle: false,
            oracle_starts: default_starts(),
            record_timing: false,
            output: None,
        }
    }

    fn order(&self) -> Result<Option<RootOrder>> {
        match self.model {
            Model::Lm | Model::Gm => {
                let m = self.m.ok_or_else(|| Error::Parameter("model needs a finite m".into()))?;
                Ok(Some(RootOrder::Finite(m).validate()?))
            }
            Model::Linf | Model::Ginf => Ok(Some(RootOrder::Infinite)),
            Model::Ls | Model::Gs => Ok(None),
        }
    }

    fn instance_kind(&self) -> InstanceKind {
        match (self.model, self.kind) {
            (m, _) if m.is_multilinear() => InstanceKind::Tensor,
            (_, Some(k)) => k,
            (Model::Gs, None) => InstanceKind::FormGeneral,
            _ => InstanceKind::FormSquarefree,
        }
    }

    fn validate(&self) -> Result<()> {
        self.order()?;
        if self.model.is_multilinear() {
            if self.dims.len() < 2 || self.dims.contains(&0) {
                return Err(Error::Parameter("multilinear models need at least two positive dims".into()));
            }
        } else {
            if self.n == 0 || self.d < 2 {
                return Err(Error::Parameter("form models need n ≥ 1 and d ≥ 2".into()));
            }
            if self.instance_kind() == InstanceKind::Tensor {
                return Err(Error::Parameter("form models need a form instance kind".into()));
            }
        }
        check_density(self.density)
    }

    /// Ratio formula the solver reports for this configuration.
    pub fn ratio_formula_value(&self) -> Result<f64> {
        let order = self.order()?;
        Ok(match self.model {
            Model::Lm | Model::Linf => ratio_lm(&self.dims, order.expect("finite or circle"), self.delta)?.value,
            Model::Ls => ratio_ls(&self.dims, self.gamma)?.value,
            Model::Gm | Model::Ginf => gm_ratio_formula(order.expect("finite or circle"), self.n, self.d, self.delta),
            Model::Gs => gs_ratio(self.n, self.d, self.gamma),
        })
    }

    fn g_options(&self) -> GSolveOptions {
        GSolveOptions {
            delta: self.delta,
            epsilon: self.epsilon,
            gamma: self.gamma,
            trials: self.trials,
            strategy: self.strategy,
            ..GSolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyReport {
    Multilinear(SolveReport),
    Form(GSolveReport),
}

/// One CSV line. Empty `vmax`/`vmin`/`quotient`/`pass` mean no oracle was run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub seed: u64,
    pub value: f64,
    pub vmax: Option<f64>,
    pub vmin: Option<f64>,
    pub ratio: f64,
    pub quotient: Option<f64>,
    pub pass: Option<bool>,
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    #[serde(flatten)]
    pub row: RatioRow,
    pub relative: bool,
    pub oracle_exact: Option<bool>,
    pub report: AnyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: Model,
    pub count: usize,
    pub certified: usize,
    pub passes: usize,
    pub failures: usize,
    pub allowed_failures: usize,
    pub within_budget: bool,
    pub pass_rate: f64,
    pub mean_quotient: f64,
    pub ratio_formula_value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub rows: Vec<RowRecord>,
}

/// Pass rule: `value ≥ ρ·v_max − tol` (absolute) or `value − v_min ≥ ρ·(v_max − v_min) − tol` (relative).
pub fn passes(value: f64, vmax: f64, vmin: f64, ratio: f64, relative: bool, tolerance: f64) -> bool {
    let tol = tolerance * (1.0 + vmax.abs().max(vmin.abs()));
    if relative {
        value - vmin >= ratio * (vmax - vmin) - tol
    } else {
        value >= ratio * vmax - tol
    }
}

fn quotient(value: f64, vmax: f64, vmin: f64, relative: bool) -> Option<f64> {
    let scale = 1.0 + vmax.abs().max(vmin.abs());
    if relative {
        let gap = vmax - vmin;
        Some(if gap <= 1e-12 * scale { 1.0 } else { (value - vmin) / gap })
    } else if vmax > 1e-12 * scale {
        Some(value / vmax)
    } else {
        None
    }
}

fn oracle_for(order: Option<RootOrder>, instance: &Instance, starts: usize, src: &RandomSource) -> Result<OracleResult> {
    match (instance, order) {
        (Instance::Tensor(f), Some(RootOrder::Finite(m))) => brute_force_multilinear_roots(f, m),
        (Instance::Tensor(f), Some(RootOrder::Infinite)) => multistart_reference(Objective::Multilinear(f), ContinuousSet::Circle, starts, src),
        (Instance::Tensor(f), None) => multistart_reference(Objective::Multilinear(f), ContinuousSet::Sphere, starts, src),
        (Instance::Form(g), Some(RootOrder::Finite(m))) => brute_force_form_roots(g, m),
        (Instance::Form(g), order) => {
            let set = if order.is_some() { ContinuousSet::Circle } else { ContinuousSet::Sphere };
            multistart_reference(Objective::Form(g), set, starts, src)
        }
    }
}

/// Instance for `seed` under `config`, identical to the one `run_experiment` solves.
pub fn experiment_instance(config: &ExperimentConfig, seed: u64) -> Result<Instance> {
    let mut rng = RandomSource::new(seed).derive(INSTANCE_TAG).substream(0);
    generate_instance(config.instance_kind(), &config.dims, config.n, config.d, config.density, &mut rng)
}

fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<RowRecord> {
    let start = Instant::now();
    let order = config.order()?;
    let src = RandomSource::new(seed);
    let instance = experiment_instance(config, seed)?;
    let solver_src = src.derive(SOLVER_TAG);
    let (report, value, ratio, relative) = match &instance {
        Instance::Tensor(f) => {
            let rep = match order {
                Some(o) => solve_lm(f, o, config.delta, config.epsilon, config.trials, config.strategy, &solver_src)?,
                None => solve_ls(f, config.gamma, config.epsilon, config.trials, &solver_src)?,
            };
            let (v, r) = (rep.value, rep.ratio_formula_value);
            (AnyReport::Multilinear(rep), v, r, false)
        }
        Instance::Form(g) => {
            let rep = solve_form(g, order, FormMode::Auto, &config.g_options(), &solver_src)?;
            let (v, r, rel) = (rep.value, rep.ratio_formula_value, rep.relative);
            (AnyReport::Form(rep), v, r, rel)
        }
    };
    let (vmax, vmin, oracle_exact) = if config.oracle {
        let o = oracle_for(order, &instance, config.oracle_starts, &src.derive(ORACLE_TAG))?;
        // a feasible solver point can only tighten a multi-start reference
        (Some(o.v_max.max(value)), Some(o.v_min.min(value)), Some(o.exact))
    } else {
        (None, None, None)
    };
    let tolerance = if oracle_exact == Some(true) { EXACT_TOLERANCE } else { REFERENCE_TOLERANCE };
    let (quotient, pass) = match (vmax, vmin) {
        (Some(hi), Some(lo)) => (quotient(value, hi, lo, relative), Some(passes(value, hi, lo, ratio, relative, tolerance))),
        _ => (None, None),
    };
    let elapsed_ms = config.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    Ok(RowRecord {
        row: RatioRow {
            seed,
            value,
            vmax,
            vmin,
            ratio,
            quotient,
            pass,
            elapsed_ms,
        },
        relative,
        oracle_exact,
        report,
    })
}

/// Runs every seed, sorts rows by seed, and writes the configured outputs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut rows: Vec<RowRecord> = config.seeds.par_iter().map(|&s| run_seed(config, s)).collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.row.seed);
    let count = rows.len();
    let certified = rows.iter().filter(|r| r.row.pass.is_some()).count();
    let passes_n = rows.iter().filter(|r| r.row.pass == Some(true)).count();
    let failures = certified - passes_n;
    let allowed_failures = (config.epsilon * count as f64).floor() as usize;
    let quotients: Vec<f64> = rows.iter().filter_map(|r| r.row.quotient).collect();
    let exact_oracle = matches!(config.model, Model::Lm | Model::Gm);
    let summary = Summary {
        model: config.model,
        count,
        certified,
        passes: passes_n,
        failures,
        allowed_failures,
        within_budget: failures <= allowed_failures,
        pass_rate: if certified == 0 { 0.0 } else { passes_n as f64 / certified as f64 },
        mean_quotient: if quotients.is_empty() { 0.0 } else { quotients.iter().sum::<f64>() / quotients.len() as f64 },
        ratio_formula_value: config.ratio_formula_value()?,
        tolerance: if exact_oracle { EXACT_TOLERANCE } else { REFERENCE_TOLERANCE },
    };
    let result = ExperimentResult {
        config: config.clone(),
        summary,
        rows,
    };
    if let Some(out) = &config.output {
        if let Some(path) = &out.csv {
            write_csv(&result, path)?;
        }
        if let Some(path) = &out.json {
            write_json(&result, path)?;
        }
    }
    Ok(result)
}

/// CSV body without the timestamp header.
pub fn csv_body(result: &ExperimentResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &result.rows {
        w.serialize(&r.row)?;
    }
    if result.rows.is_empty() {
        w.write_record(["seed", "value", "vmax", "vmin", "ratio", "quotient", "pass", "elapsed_ms"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut f = File::create(path)?;
    writeln!(f, "# generated_unix={stamp}")?;
    f.write_all(csv_body(result)?.as_bytes())?;
    Ok(())
}

pub fn write_json(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, result)?;
    writeln!(f)?;
    Ok(())
}
