//! Randomized approximation of `max Re F(x¹, …, x^d)` over products of
//! `Ω_m`, `Ω_∞` or complex spheres.
//!
//! Slots `1..d−2` are drawn at random, the tensor is contracted to a matrix,
//! and the remaining bilinear problem goes to a base-case solver. The best
//! trial wins.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::advance;
use crate::sampling::{c1_log, c2, c4, sample_order, sample_sphere, RandomSource, RootOrder, RootTable};
use crate::tensor::{CTensor, CVector};

/// Largest `m^{n}` the exact bilinear enumeration will walk.
pub const EXACT_BILINEAR_GUARD: f64 = 1e6;
/// Trial multiplier of the practical default trial count.
pub const DEFAULT_TRIAL_FACTOR: f64 = 50.0;
const TRIAL_CHUNK: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseCaseStrategy {
    ExactEnumeration,
    AlternatingMaximization { starts: usize, max_iters: usize, tol: f64 },
    #[serde(rename = "power_svd")]
    PowerSVD { tol: f64, max_iters: usize },
}

impl BaseCaseStrategy {
    pub fn alternating() -> Self {
        BaseCaseStrategy::AlternatingMaximization {
            starts: 10,
            max_iters: 100,
            tol: 1e-12,
        }
    }

    pub fn power_svd() -> Self {
        BaseCaseStrategy::PowerSVD {
            tol: 1e-12,
            max_iters: 10_000,
        }
    }

    /// Exact enumeration when `m` is finite and `m^{rows}` fits the guard.
    pub fn auto(order: RootOrder, rows: usize) -> Self {
        match order {
            RootOrder::Finite(m) if (m as f64).powi(rows as i32) <= EXACT_BILINEAR_GUARD => {
                BaseCaseStrategy::ExactEnumeration
            }
            _ => Self::alternating(),
        }
    }

    /// Parses `exact`, `alternating` or `power-svd`.
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "exact" | "exact-enumeration" => Ok(BaseCaseStrategy::ExactEnumeration),
            "alternating" | "alternating-maximization" => Ok(Self::alternating()),
            "power-svd" | "powersvd" | "svd" => Ok(Self::power_svd()),
            _ => Err(Error::Parameter(format!("unknown base-case strategy {name:?}"))),
        }
    }
}

/// Maximizer of `Re(w·z)` over the feasible unit set.
#[derive(Debug, Clone)]
pub(crate) enum UnitSet {
    Roots(RootTable),
    Circle,
}

impl UnitSet {
    pub(crate) fn new(order: RootOrder) -> Result<Self> {
        Ok(match order.validate()? {
            RootOrder::Finite(m) => UnitSet::Roots(RootTable::new(m)),
            RootOrder::Infinite => UnitSet::Circle,
        })
    }

    /// First maximizing root wins ties, so `w = 0` picks root index 0.
    pub(crate) fn best(&self, w: Complex64) -> (Complex64, f64) {
        match self {
            UnitSet::Roots(t) => {
                let mut best = (t.get(0), (w * t.get(0)).re);
                for &r in &t.roots()[1..] {
                    let v = (w * r).re;
                    if v > best.1 {
                        best = (r, v);
                    }
                }
                best
            }
            UnitSet::Circle => {
                let a = w.norm();
                if a == 0.0 {
                    (Complex64::new(1.0, 0.0), 0.0)
                } else {
                    (w.conj() / a, a)
                }
            }
        }
    }

    /// Nearest feasible unit to the phase of `z`.
    pub(crate) fn round(&self, z: Complex64) -> Complex64 {
        self.best(z.conj()).0
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CVector {
        match self {
            UnitSet::Roots(t) => t.sample(n, rng),
            UnitSet::Circle => crate::sampling::sample_circle(n, rng),
        }
    }
}

/// Dense row-major matrix view used by the bilinear solvers.
struct Mat<'a> {
    a: &'a [Complex64],
    rows: usize,
    cols: usize,
}

impl Mat<'_> {
    fn from_tensor(t: &CTensor) -> Result<Mat<'_>> {
        if t.order() != 2 {
            return Err(Error::Shape(format!("expected a matrix, got dims {:?}", t.dims())));
        }
        Ok(Mat {
            a: t.data(),
            rows: t.dims()[0],
            cols: t.dims()[1],
        })
    }

    /// `xᵀA`.
    fn left(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (wj, &aij) in w.iter_mut().zip(&self.a[i * self.cols..(i + 1) * self.cols]) {
                *wj += xi * aij;
            }
        }
        w
    }

    /// `Ay`.
    fn right(&self, y: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| {
                self.a[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(y)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `Aᴴw`.
    fn adjoint(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, &wi) in w.iter().enumerate() {
            for (o, &aij) in out.iter_mut().zip(&self.a[i * self.cols..(i + 1) * self.cols]) {
                *o += aij.conj() * wi;
            }
        }
        out
    }

    fn value(&self, x: &[Complex64], y: &[Complex64]) -> f64 {
        self.right(y).iter().zip(x).map(|(r, xi)| (r * xi).re).sum()
    }
}

fn best_response(set: &UnitSet, w: &[Complex64]) -> (CVector, f64) {
    let mut val = 0.0;
    let v = w
        .iter()
        .map(|&wj| {
            let (z, r) = set.best(wj);
            val += r;
            z
        })
        .collect();
    (v, val)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearSolution {
    pub x: CVector,
    pub y: CVector,
    pub value: f64,
}

fn exact_bilinear(mat: &Mat<'_>, set: &UnitSet) -> Result<BilinearSolution> {
    let table = match set {
        UnitSet::Roots(t) => t,
        UnitSet::Circle => {
            return Err(Error::Parameter("exact enumeration needs a finite root order".into()));
        }
    };
    let m = table.m();
    let transpose = mat.rows > mat.cols;
    let k = mat.rows.min(mat.cols);
    let count = (m as f64).powi(k as i32);
    if count > EXACT_BILINEAR_GUARD {
        return Err(Error::EnumerationTooLarge {
            count,
            guard: EXACT_BILINEAR_GUARD,
        });
    }
    let mut digits = vec![0usize; k];
    let mut best: Option<BilinearSolution> = None;
    for _ in 0..count as usize {
        let e: CVector = digits.iter().map(|&d| table.get(d)).collect();
        let (other, val) = if transpose {
            best_response(set, &mat.right(&e))
        } else {
            best_response(set, &mat.left(&e))
        };
        if best.as_ref().map_or(true, |b| val > b.value) {
            let (x, y) = if transpose { (other, e) } else { (e, other) };
            best = Some(BilinearSolution { x, y, value: val });
        }
        advance(&mut digits, m);
    }
    let mut sol = best.expect("at least one candidate");
    sol.value = mat.value(&sol.x, &sol.y);
    Ok(sol)
}

/// Alternating best responses from `x0`; the objective never decreases.
fn alternate(mat: &Mat<'_>, set: &UnitSet, x0: CVector, max_iters: usize, tol: f64) -> BilinearSolution {
    let mut x = x0;
    let (mut y, _) = best_response(set, &mat.left(&x));
    let mut value = mat.value(&x, &y);
    for _ in 0..max_iters {
        let (nx, _) = best_response(set, &mat.right(&y));
        let (ny, _) = best_response(set, &mat.left(&nx));
        let nv = mat.value(&nx, &ny);
        assert!(
            nv >= value - 1e-12 * (1.0 + value.abs()),
            "alternating sweep decreased the objective: {value} -> {nv}"
        );
        let gain = nv - value;
        if nv > value {
            x = nx;
            y = ny;
            value = nv;
        }
        if gain <= tol * (1.0 + value.abs()) {
            break;
        }
    }
    BilinearSolution { x, y, value }
}

fn alternating_bilinear<R: Rng + ?Sized>(
    mat: &Mat<'_>,
    set: &UnitSet,
    starts: usize,
    max_iters: usize,
    tol: f64,
    rng: &mut R,
) -> BilinearSolution {
    let mut best: Option<BilinearSolution> = None;
    for _ in 0..starts.max(1) {
        let x0 = set.sample(mat.rows, rng);
        let sol = alternate(mat, set, x0, max_iters, tol);
        if best.as_ref().map_or(true, |b| sol.value > b.value) {
            best = Some(sol);
        }
    }
    best.expect("at least one start")
}

fn power_bilinear(mat: &Mat<'_>, set: &UnitSet, tol: f64, max_iters: usize) -> BilinearSolution {
    let zero_len = mat.rows;
    match top_pair(mat, tol, max_iters) {
        Some(pair) => {
            let x0: CVector = pair.u.iter().map(|&z| set.round(z)).collect();
            alternate(mat, set, x0, 100, 1e-12)
        }
        None => {
            let x = CVector(vec![set.best(Complex64::new(0.0, 0.0)).0; zero_len]);
            let y = CVector(vec![set.best(Complex64::new(0.0, 0.0)).0; mat.cols]);
            BilinearSolution { x, y, value: 0.0 }
        }
    }
}

pub(crate) fn solve_bilinear_with<R: Rng + ?Sized>(
    a: &CTensor,
    order: RootOrder,
    strategy: BaseCaseStrategy,
    rng: &mut R,
) -> Result<BilinearSolution> {
    let mat = Mat::from_tensor(a)?;
    let set = UnitSet::new(order)?;
    match strategy {
        BaseCaseStrategy::ExactEnumeration => exact_bilinear(&mat, &set),
        BaseCaseStrategy::AlternatingMaximization { starts, max_iters, tol } => {
            Ok(alternating_bilinear(&mat, &set, starts, max_iters, tol, rng))
        }
        BaseCaseStrategy::PowerSVD { tol, max_iters } => Ok(power_bilinear(&mat, &set, tol, max_iters)),
    }
}

fn base_case_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x0b11_1ea5)
}

/// `max Re(xᵀAy)` over `x ∈ Ω_m^{n₁}`, `y ∈ Ω_m^{n₂}`.
pub fn solve_bilinear_roots(a: &CTensor, m: u32, strategy: BaseCaseStrategy) -> Result<BilinearSolution> {
    solve_bilinear_with(a, RootOrder::Finite(m), strategy, &mut base_case_rng())
}

/// `max Re(xᵀAy)` over the unit circle in every coordinate.
pub fn solve_bilinear_circle(a: &CTensor, strategy: BaseCaseStrategy) -> Result<BilinearSolution> {
    solve_bilinear_with(a, RootOrder::Infinite, strategy, &mut base_case_rng())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPair {
    pub sigma: f64,
    pub u: CVector,
    pub v: CVector,
    pub converged: bool,
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|z| *z /= norm);
    }
    norm
}

fn top_pair(mat: &Mat<'_>, tol: f64, max_iters: usize) -> Option<SingularPair> {
    if mat.a.iter().all(|z| z.norm_sqr() == 0.0) {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let mut v = sample_sphere(mat.cols, &mut rng).0;
    // a start orthogonal to the top space is measure zero but possible for tiny inputs
    if mat.right(&v).iter().all(|z| z.norm_sqr() == 0.0) {
        v = vec![Complex64::new(1.0, 0.0); mat.cols];
        normalize(&mut v);
    }
    let mut converged = false;
    for _ in 0..max_iters.max(1) {
        let av = mat.right(&v);
        let sigma = av.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if sigma == 0.0 {
            v = sample_sphere(mat.cols, &mut rng).0;
            continue;
        }
        let mut w = mat.adjoint(&av);
        // residual of the eigen-equation AᴴA v = σ² v
        let s2 = sigma * sigma;
        let resid = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * s2).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid <= tol * s2 {
            converged = true;
            break;
        }
        if normalize(&mut w) == 0.0 {
            break;
        }
        v = w;
    }
    let av = mat.right(&v);
    let sigma = av.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let u: CVector = av.iter().map(|z| z.conj() / sigma).collect();
    Some(SingularPair {
        sigma,
        u,
        v: CVector(v),
        converged,
    })
}

/// Top singular triple with `uᵀAv = σ`, by power iteration on `AᴴA`.
///
/// `converged` is false when `max_iters` ran out; the last iterate is returned.
pub fn largest_singular_pair(a: &CTensor, tol: f64, max_iters: usize) -> Result<SingularPair> {
    let mat = Mat::from_tensor(a)?;
    top_pair(&mat, tol, max_iters).ok_or(Error::ZeroMatrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    /// True when a slot of size 1 had `ln 1 / 1` replaced by `ln 2 / 1`.
    pub substituted: bool,
}

fn log_factor(dims: &[usize]) -> (f64, bool) {
    let mut substituted = false;
    let prod: f64 = dims
        .iter()
        .map(|&n| {
            if n < 2 {
                substituted = true;
            }
            (n.max(2) as f64).ln() / n as f64
        })
        .product();
    (prod, substituted)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0 / 16.0) {
        return Err(Error::Parameter(format!("delta = {delta} must lie in (0, 1/16)")));
    }
    Ok(())
}

fn gamma_limit(n: usize) -> f64 {
    if n < 2 {
        f64::INFINITY
    } else {
        n as f64 / (n as f64).ln()
    }
}

fn check_gamma(gamma: f64, n_min: usize) -> Result<()> {
    if !(gamma > 0.0 && gamma < gamma_limit(n_min)) {
        return Err(Error::Parameter(format!(
            "gamma = {gamma} must lie in (0, n/ln n) for n = {n_min}"
        )));
    }
    Ok(())
}

fn sorted_dims(dims: &[usize]) -> Result<Vec<usize>> {
    if dims.len() < 2 {
        return Err(Error::Parameter(format!("degree d = {} must be at least 2", dims.len())));
    }
    let mut s = dims.to_vec();
    s.sort_unstable();
    Ok(s)
}

/// `c₄(m)·δ^{(d−2)/2}·√(∏_{k≤d−2} ln n_k / n_k)` over ascending dims.
pub fn ratio_lm(dims: &[usize], order: RootOrder, delta: f64) -> Result<Ratio> {
    check_delta(delta)?;
    order.validate()?;
    let s = sorted_dims(dims)?;
    let d = s.len();
    let (prod, substituted) = log_factor(&s[..d - 2]);
    Ok(Ratio {
        value: c4(order) * delta.powf((d as f64 - 2.0) / 2.0) * prod.sqrt(),
        substituted,
    })
}

/// `γ^{(d−2)/2}·√(∏_{k≤d−2} ln n_k / n_k)` over ascending dims.
pub fn ratio_ls(dims: &[usize], gamma: f64) -> Result<Ratio> {
    let s = sorted_dims(dims)?;
    check_gamma(gamma, s[0])?;
    let d = s.len();
    let (prod, substituted) = log_factor(&s[..d - 2]);
    Ok(Ratio {
        value: gamma.powf((d as f64 - 2.0) / 2.0) * prod.sqrt(),
        substituted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: Vec<CVector>,
    pub value: f64,
    pub ratio_formula_value: f64,
    pub ratio_substituted: bool,
    /// True only when the base case is solved exactly, so the ratio applies.
    pub certified: bool,
    pub trials_run: u64,
    pub seed: u64,
    /// Natural log of the trial count the analysis asks for.
    pub theoretical_trials_log: Option<f64>,
    pub base_case: String,
    #[serde(skip)]
    pub elapsed: Duration,
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("epsilon = {eps} must lie in (0, 1)")));
    }
    Ok(())
}

/// Practical trial count `⌈ln(1/ε)·Π⌉·50`.
fn practical_trials(eps: f64, product: f64) -> u64 {
    ((1.0 / eps).ln() * product).ceil().max(1.0) as u64 * DEFAULT_TRIAL_FACTOR as u64
}

/// Permutation sorting slots by ascending size (stable).
fn slot_order(dims: &[usize]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..dims.len()).collect();
    perm.sort_by_key(|&k| dims[k]);
    perm
}

fn unpermute(perm: &[usize], sol: Vec<CVector>) -> Vec<CVector> {
    let mut out = vec![CVector::default(); sol.len()];
    for (k, v) in sol.into_iter().enumerate() {
        out[perm[k]] = v;
    }
    out
}

/// Runs independent trials in fixed chunks; the first trial attaining the
/// maximum wins regardless of scheduling.
fn best_of_trials<F>(trials: u64, trial: F) -> Result<(Vec<CVector>, f64)>
where
    F: Fn(u64) -> Result<(Vec<CVector>, f64)> + Sync,
{
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let per_chunk: Vec<Result<Option<(Vec<CVector>, f64)>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut best: Option<(Vec<CVector>, f64)> = None;
            for k in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                let cand = trial(k)?;
                if best.as_ref().map_or(true, |b| cand.1 > b.1) {
                    best = Some(cand);
                }
            }
            Ok(best)
        })
        .collect();
    let mut best: Option<(Vec<CVector>, f64)> = None;
    for r in per_chunk {
        if let Some(cand) = r? {
            if best.as_ref().map_or(true, |b| cand.1 > b.1) {
                best = Some(cand);
            }
        }
    }
    best.ok_or_else(|| Error::Parameter("at least one trial is required".into()))
}

fn contract_leading(f: &CTensor, xs: &[CVector]) -> CTensor {
    let mut cur = f.clone();
    for x in xs {
        cur = cur.contract_first_unchecked(x);
    }
    cur
}

fn strategy_name(s: &BaseCaseStrategy) -> String {
    match s {
        BaseCaseStrategy::ExactEnumeration => "exact".into(),
        BaseCaseStrategy::AlternatingMaximization { .. } => "alternating".into(),
        BaseCaseStrategy::PowerSVD { .. } => "power-svd".into(),
    }
}

/// Randomized solver for `max Re F` over `Ω_m^{n₁} × … × Ω_m^{n_d}` (or the circle).
pub fn solve_lm(
    f: &CTensor,
    order: RootOrder,
    delta: f64,
    epsilon: f64,
    trials_override: Option<u64>,
    strategy: Option<BaseCaseStrategy>,
    src: &RandomSource,
) -> Result<SolveReport> {
    let start = Instant::now();
    order.validate()?;
    check_delta(delta)?;
    check_epsilon(epsilon)?;
    let d = f.order();
    if d < 2 {
        return Err(Error::Parameter(format!("degree d = {d} must be at least 2")));
    }
    let perm = slot_order(f.dims());
    let fs = f.permute_slots(&perm)?;
    let dims = fs.dims().to_vec();
    let strategy = strategy.unwrap_or_else(|| BaseCaseStrategy::auto(order, dims[d - 2]));
    if strategy == BaseCaseStrategy::ExactEnumeration && order.is_infinite() {
        return Err(Error::Parameter("exact enumeration needs a finite root order".into()));
    }
    let lead = &dims[..d - 2];
    let product: f64 = lead.iter().map(|&n| (n as f64).powf(5.0 * delta)).product();
    let trials = match trials_override {
        Some(t) => t,
        None if d == 2 && strategy == BaseCaseStrategy::ExactEnumeration => 1,
        None => practical_trials(epsilon, product),
    };
    let set = UnitSet::new(order)?;
    let (solution, _) = best_of_trials(trials, |k| {
        let mut rng = src.substream(k);
        let mut xs: Vec<CVector> = lead.iter().map(|&n| set.sample(n, &mut rng)).collect();
        let a = contract_leading(&fs, &xs);
        let b = solve_bilinear_with(&a, order, strategy, &mut rng)?;
        xs.push(b.x);
        xs.push(b.y);
        let v = fs.eval_multilinear_unchecked(&xs).re;
        Ok((xs, v))
    })?;
    let value = fs.eval_multilinear_unchecked(&solution).re;
    let ratio = ratio_lm(&dims, order, delta)?;
    let theoretical_trials_log = (1.0 / epsilon).ln().ln()
        + (d as f64 - 2.0) * ((c2(order) as f64).ln() - c1_log(delta)?)
        + lead.iter().map(|&n| 5.0 * delta * (n as f64).ln()).sum::<f64>();
    Ok(SolveReport {
        solution: unpermute(&perm, solution),
        value,
        ratio_formula_value: ratio.value,
        ratio_substituted: ratio.substituted,
        certified: strategy == BaseCaseStrategy::ExactEnumeration,
        trials_run: trials,
        seed: src.seed,
        theoretical_trials_log: Some(theoretical_trials_log),
        base_case: strategy_name(&strategy),
        elapsed: start.elapsed(),
    })
}

/// Power-iteration settings used inside the sphere solver.
const SPHERE_SVD_TOL: f64 = 1e-13;
const SPHERE_SVD_ITERS: usize = 5_000;

/// Randomized solver for `max Re F` over a product of complex unit spheres.
pub fn solve_ls(
    f: &CTensor,
    gamma: f64,
    epsilon: f64,
    trials_override: Option<u64>,
    src: &RandomSource,
) -> Result<SolveReport> {
    let start = Instant::now();
    check_epsilon(epsilon)?;
    let d = f.order();
    if d < 2 {
        return Err(Error::Parameter(format!("degree d = {d} must be at least 2")));
    }
    let perm = slot_order(f.dims());
    let fs = f.permute_slots(&perm)?;
    let dims = fs.dims().to_vec();
    check_gamma(gamma, dims[0])?;
    let lead = &dims[..d - 2];
    let product: f64 = lead
        .iter()
        .map(|&n| (n as f64).powf(2.0 * gamma) * (n.max(2) as f64).ln().sqrt())
        .product();
    let trials = match trials_override {
        Some(t) => t,
        None if d == 2 => 1,
        None => practical_trials(epsilon, product),
    };
    let (solution, _) = best_of_trials(trials, |k| {
        let mut rng = src.substream(k);
        let mut xs: Vec<CVector> = lead.iter().map(|&n| sample_sphere(n, &mut rng)).collect();
        let a = contract_leading(&fs, &xs);
        let mat = Mat::from_tensor(&a)?;
        match top_pair(&mat, SPHERE_SVD_TOL, SPHERE_SVD_ITERS) {
            Some(p) => {
                xs.push(p.u);
                xs.push(p.v);
            }
            None => {
                xs.push(CVector::basis(dims[d - 2], 1));
                xs.push(CVector::basis(dims[d - 1], 1));
            }
        }
        let v = fs.eval_multilinear_unchecked(&xs).re;
        Ok((xs, v))
    })?;
    let value = fs.eval_multilinear_unchecked(&solution).re;
    let ratio = ratio_ls(&dims, gamma)?;
    Ok(SolveReport {
        solution: unpermute(&perm, solution),
        value,
        ratio_formula_value: ratio.value,
        ratio_substituted: ratio.substituted,
        certified: d == 2,
        trials_run: trials,
        seed: src.seed,
        theoretical_trials_log: None,
        base_case: "power-svd".into(),
        elapsed: start.elapsed(),
    })
}

/// Draws a random point of `Ω_m^n` or `Ω_∞^n`; exposed for callers that mix orders.
pub fn random_feasible<R: Rng + ?Sized>(order: RootOrder, n: usize, rng: &mut R) -> Result<CVector> {
    sample_order(order, n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mat(rows: &[Vec<Complex64>]) -> CTensor {
        CTensor::from_rows(rows).unwrap()
    }

    #[test]
    fn bilinear_roots_examples() {
        let a = mat(&[vec![c(1., 0.)]]);
        let s = solve_bilinear_roots(&a, 3, BaseCaseStrategy::ExactEnumeration).unwrap();
        assert!((s.value - 1.0).abs() < 1e-15);
        let a = mat(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]]);
        let s = solve_bilinear_roots(&a, 4, BaseCaseStrategy::ExactEnumeration).unwrap();
        assert!((s.value - 2.0).abs() < 1e-15);
        let z = CTensor::zeros(&[2, 3]).unwrap();
        let s = solve_bilinear_roots(&z, 5, BaseCaseStrategy::ExactEnumeration).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(solve_bilinear_roots(&z, 2, BaseCaseStrategy::ExactEnumeration).is_err());
    }

    #[test]
    fn bilinear_circle_examples() {
        let a = mat(&[vec![c(3., -4.)]]);
        let s = solve_bilinear_circle(&a, BaseCaseStrategy::alternating()).unwrap();
        assert!((s.value - 5.0).abs() < 1e-12);
        let a = mat(&[vec![c(1., 0.), c(0., 1.)]]);
        let s = solve_bilinear_circle(&a, BaseCaseStrategy::alternating()).unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
        let s = solve_bilinear_circle(&CTensor::zeros(&[2, 2]).unwrap(), BaseCaseStrategy::alternating()).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(solve_bilinear_circle(&a, BaseCaseStrategy::ExactEnumeration).is_err());
    }

    #[test]
    fn singular_pair_examples() {
        let a = mat(&[vec![c(2., 0.), c(0., 0.)], vec![c(0., 0.), c(1., 0.)]]);
        let p = largest_singular_pair(&a, 1e-14, 10_000).unwrap();
        assert!((p.sigma - 2.0).abs() < 1e-10);
        assert!((p.u[0].norm() - 1.0).abs() < 1e-6 && (p.v[0].norm() - 1.0).abs() < 1e-6);
        let a = mat(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]]);
        let p = largest_singular_pair(&a, 1e-14, 100).unwrap();
        assert!((p.sigma - 1.0).abs() < 1e-12);
        let uav: Complex64 = Mat::from_tensor(&a).unwrap().right(&p.v).iter().zip(p.u.iter()).map(|(x, y)| x * y).sum();
        assert!((uav - c(1., 0.)).norm() < 1e-12);
        assert!(matches!(largest_singular_pair(&CTensor::zeros(&[2, 2]).unwrap(), 1e-12, 10), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn ratio_examples() {
        let r = ratio_lm(&[3, 5], RootOrder::Infinite, 0.05).unwrap();
        assert!((r.value - 0.7118).abs() < 1e-15);
        let r = ratio_lm(&[2, 2], RootOrder::Finite(4), 0.05).unwrap();
        assert!((r.value - 0.3559).abs() < 1e-12);
        let r = ratio_lm(&[3, 3, 3], RootOrder::Finite(3), 0.05).unwrap();
        assert!((r.value - 0.02406).abs() < 5e-5);
        let direct = 0.7118 * 0.25 * (0.05 * 3f64.ln() / 3.0).sqrt();
        assert!((r.value - direct).abs() < 1e-12);
        assert_eq!(ratio_ls(&[4, 4], 1.0).unwrap().value, 1.0);
        assert!((ratio_ls(&[4, 4, 4], 1.0).unwrap().value - 0.5887).abs() < 1e-4);
        assert!((ratio_ls(&[3, 3, 3, 3], 0.5).unwrap().value - 0.1831).abs() < 1e-4);
        let r = ratio_lm(&[1, 1, 1], RootOrder::Finite(4), 0.05).unwrap();
        assert!(r.substituted && r.value > 0.0);
        assert!(ratio_lm(&[2, 2], RootOrder::Finite(4), 0.0625).is_err());
        assert!(ratio_ls(&[3, 3, 3], 3.0).is_err());
    }

    #[test]
    fn lm_unit_tensor() {
        let f = CTensor::from_vec(&[1, 1, 1], vec![c(1., 0.)]).unwrap();
        let r = solve_lm(&f, RootOrder::Finite(4), 0.05, 0.05, None, None, &RandomSource::new(1)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        let z = CTensor::zeros(&[2, 2, 2]).unwrap();
        let r = solve_lm(&z, RootOrder::Finite(3), 0.05, 0.05, Some(5), None, &RandomSource::new(1)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn lm_restores_slot_order() {
        let data: Vec<Complex64> = (0..24).map(|k| c((k as f64).sin(), (k as f64).cos())).collect();
        let f = CTensor::from_vec(&[4, 2, 3], data).unwrap();
        let r = solve_lm(&f, RootOrder::Finite(3), 0.05, 0.1, Some(20), None, &RandomSource::new(3)).unwrap();
        assert_eq!(r.solution.iter().map(|v| v.dim()).collect::<Vec<_>>(), vec![4, 2, 3]);
        let v = f.eval_multilinear(&r.solution).unwrap().re;
        assert!((v - r.value).abs() < 1e-10);
    }

    #[test]
    fn ls_rank_one_and_zero() {
        let a = [c(1., 0.), c(0., 1.)];
        let b = [c(0.5, 0.5), c(1., 0.)];
        let cc = [c(2., 0.), c(0., -1.)];
        let mut data = Vec::new();
        for x in a {
            for y in b {
                for z in cc {
                    data.push(x * y * z);
                }
            }
        }
        let f = CTensor::from_vec(&[2, 2, 2], data).unwrap();
        let opt = CVector(a.to_vec()).norm2() * CVector(b.to_vec()).norm2() * CVector(cc.to_vec()).norm2();
        let r = solve_ls(&f, 1.0, 0.05, Some(100), &RandomSource::new(4)).unwrap();
        assert!(r.value >= 0.5 * opt && r.value <= opt + 1e-9);
        let z = CTensor::zeros(&[2, 2, 2]).unwrap();
        assert_eq!(solve_ls(&z, 1.0, 0.05, Some(3), &RandomSource::new(4)).unwrap().value, 0.0);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(BaseCaseStrategy::parse("exact").unwrap(), BaseCaseStrategy::ExactEnumeration);
        assert!(matches!(BaseCaseStrategy::parse("power-svd").unwrap(), BaseCaseStrategy::PowerSVD { .. }));
        assert!(BaseCaseStrategy::parse("sdp").is_err());
        let s = serde_json::to_string(&BaseCaseStrategy::alternating()).unwrap();
        assert_eq!(serde_json::from_str::<BaseCaseStrategy>(&s).unwrap(), BaseCaseStrategy::alternating());
    }
}
