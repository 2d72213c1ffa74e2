//! Solvers for `max g(x)` with `g` a real-valued conjugate form, over `Ω_m^n`,
//! `Ω_∞^n` or the complex sphere.
//!
//! Every solver relaxes `g` to the multilinear form of its tensor, solves the
//! relaxation, recombines the slot vectors through the polarization vectors
//! `u_ξ`/`v_ξ`, and finally rounds back onto the feasible set.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{factorial, squared_norm_form, ConjugateForm};
use crate::multilinear::{solve_lm, solve_ls, BaseCaseStrategy, UnitSet};
use crate::polarization::{advance, build_v_unchecked, in_conv_order};
use crate::sampling::{c4, sample_sphere, RandomSource, RootOrder, RootTable};
use crate::tensor::{CTensor, CVector};

/// Largest `m^d` for which the ξ-search enumerates every tuple.
pub const XI_ENUMERATION_GUARD: f64 = 1e6;
/// Sampled ξ tuples per unit of degree when enumeration is not possible.
pub const XI_SAMPLES_PER_DEGREE: usize = 1000;
const CIRCLE_GRID: usize = 720;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSolveOptions {
    pub delta: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub trials: Option<u64>,
    pub strategy: Option<BaseCaseStrategy>,
    /// Root order of the ξ-search on the sphere.
    pub xi_order: RootOrder,
    pub xi_guard: f64,
}

impl Default for GSolveOptions {
    fn default() -> Self {
        GSolveOptions {
            delta: 0.05,
            epsilon: 0.05,
            gamma: 1.0,
            trials: None,
            strategy: None,
            xi_order: RootOrder::Finite(4),
            xi_guard: XI_ENUMERATION_GUARD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GMode {
    Convex,
    SquareFreeRelative,
    SquareFreeAbsolute,
    SphereEven,
    SphereOdd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSolveReport {
    pub solution: CVector,
    pub value: f64,
    pub mode: GMode,
    pub ratio_formula_value: f64,
    /// True when the guarantee is `g(z) − v_min ≥ ρ·(v_max − v_min)`.
    pub relative: bool,
    /// True when the solver is exact (sphere with `d = 2`).
    pub exact: bool,
    pub relaxation_value: f64,
    pub trials_run: u64,
    pub seed: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

fn check_point(g: &ConjugateForm, x: &[Complex64]) -> Result<()> {
    if x.len() != g.n() {
        return Err(Error::Dimension {
            slot: 1,
            expected: g.n(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Coordinate sweep moving each `x_i` to a vertex without decreasing (Up)
/// or increasing (Down) a square-free `g`.
pub fn round_to_vertices(g: &ConjugateForm, x: &[Complex64], order: RootOrder, direction: Direction) -> Result<CVector> {
    if !g.is_square_free() {
        return Err(Error::NotSquareFree);
    }
    check_point(g, x)?;
    let set = UnitSet::new(order)?;
    if let Some(i) = x.iter().position(|&z| !in_conv_order(z, order)) {
        return Err(Error::ConvexHullViolation { coordinate: i + 1 });
    }
    Ok(sweep_linear(g, x, &set, direction))
}

fn sweep_linear(g: &ConjugateForm, x: &[Complex64], set: &UnitSet, direction: Direction) -> CVector {
    let mut z = x.to_vec();
    for i in 0..z.len() {
        let (p1, _) = g.linear_coefficient_unchecked(&z, i);
        let w = match direction {
            Direction::Up => p1,
            Direction::Down => -p1,
        };
        z[i] = set.best(w).0;
    }
    CVector(z)
}

/// Per-coordinate vertex maximization by direct evaluation (convex `g`).
fn sweep_convex(g: &ConjugateForm, x: &[Complex64], order: RootOrder) -> CVector {
    let mut z = x.to_vec();
    for i in 0..z.len() {
        z[i] = match order {
            RootOrder::Finite(m) => {
                let table = RootTable::new(m);
                let mut best = (table.get(0), f64::NEG_INFINITY);
                for &r in table.roots() {
                    z[i] = r;
                    let v = g.eval_re(&z);
                    if v > best.1 {
                        best = (r, v);
                    }
                }
                best.0
            }
            RootOrder::Infinite => best_circle_coordinate(g, &mut z, i),
        };
    }
    CVector(z)
}

/// Grid scan of the unit circle in coordinate `i`, then golden-section refinement.
fn best_circle_coordinate(g: &ConjugateForm, z: &mut [Complex64], i: usize) -> Complex64 {
    let eval_at = |theta: f64, z: &mut [Complex64]| {
        z[i] = Complex64::from_polar(1.0, theta);
        g.eval_re(z)
    };
    let step = 2.0 * PI / CIRCLE_GRID as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..CIRCLE_GRID {
        let th = k as f64 * step;
        let v = eval_at(th, z);
        if v > best.1 {
            best = (th, v);
        }
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    for _ in 0..60 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if eval_at(c, z) >= eval_at(d, z) {
            b = d;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    let refined = eval_at(mid, z);
    if refined > best.1 {
        Complex64::from_polar(1.0, mid)
    } else {
        Complex64::from_polar(1.0, best.0)
    }
}

/// Second derivative of `t ↦ g(x + t·y)` at `t = 0`.
pub fn hessian_sample(g: &ConjugateForm, x: &[Complex64], y: &[Complex64]) -> Result<f64> {
    check_point(g, x)?;
    check_point(g, y)?;
    Ok(hessian_sample_tensor(&g.to_tensor(), x, y))
}

pub(crate) fn hessian_sample_tensor(t: &CTensor, x: &[Complex64], y: &[Complex64]) -> f64 {
    let d = t.order();
    if d < 2 {
        return 0.0;
    }
    let sx = CVector(x.to_vec()).stacked_conj();
    let sy = CVector(y.to_vec()).stacked_conj();
    let mut args = vec![sx; d];
    args[0] = sy.clone();
    args[1] = sy;
    (d * (d - 1)) as f64 * t.eval_multilinear_unchecked(&args).re
}

/// Tensor of `h(x) = ‖x‖₂^d` for even `d`.
pub fn build_h_tensor(n: usize, d: usize) -> Result<CTensor> {
    if d % 2 != 0 || d == 0 {
        return Err(Error::OddDegree(d));
    }
    Ok(squared_norm_form(n).pow(d / 2)?.to_tensor())
}

fn split(z: &CVector, n: usize) -> (CVector, CVector) {
    (CVector(z[..n].to_vec()), CVector(z[n..].to_vec()))
}

fn split_all(zs: &[CVector], n: usize) -> (Vec<CVector>, Vec<CVector>) {
    zs.iter().map(|z| split(z, n)).unzip()
}

fn prod_conj(xi: &[Complex64]) -> Complex64 {
    xi.iter().map(|p| p.conj()).product()
}

/// Searches ξ maximizing `score(ξ)`: all of `Ω_m^d` when small enough,
/// otherwise `1000·d` random tuples plus phase-aligned variants of the best.
/// `positive` keeps only tuples with `Re(∏ conj ξ_k) > 0`.
fn xi_search<F>(order: RootOrder, d: usize, guard: f64, positive: bool, src: &RandomSource, score: F) -> Option<(Vec<Complex64>, f64)>
where
    F: Fn(&[Complex64]) -> f64,
{
    let admissible = |xi: &[Complex64]| !positive || prod_conj(xi).re > 1e-12;
    let mut best: Option<(Vec<Complex64>, f64)> = None;
    let consider = |xi: Vec<Complex64>, best: &mut Option<(Vec<Complex64>, f64)>| {
        if !admissible(&xi) {
            return;
        }
        let v = score(&xi);
        if v.is_finite() && best.as_ref().map_or(true, |b| v > b.1) {
            *best = Some((xi, v));
        }
    };
    match order {
        RootOrder::Finite(m) if (m as f64).powi(d as i32) <= guard => {
            let table = RootTable::new(m);
            let mut digits = vec![0usize; d];
            for _ in 0..(m as usize).pow(d as u32) {
                consider(digits.iter().map(|&k| table.get(k)).collect(), &mut best);
                advance(&mut digits, m as usize);
            }
        }
        _ => {
            let set = UnitSet::new(order).ok()?;
            let mut rng = src.derive(0x51).substream(0);
            for _ in 0..XI_SAMPLES_PER_DEGREE * d {
                consider(set.sample(d, &mut rng).0, &mut best);
            }
            if order.is_infinite() {
                if let Some((xi, _)) = best.clone() {
                    // make ∏ conj ξ_k = ±1 by re-choosing ξ₁
                    let rest: Complex64 = xi[1..].iter().map(|p| p.conj()).product();
                    for sign in [1.0, -1.0] {
                        let mut alt = xi.clone();
                        alt[0] = rest * sign;
                        consider(alt, &mut best);
                    }
                }
            }
        }
    }
    best
}

fn gm_ratio(order: RootOrder, n: usize, d: usize, delta: f64) -> f64 {
    let df = d as f64;
    let two_n = 2.0 * n as f64;
    c4(order) * factorial(d) as f64 / (2.0 * df).powi(d as i32) * (delta * two_n.ln() / two_n).powf((df - 2.0) / 2.0)
}

fn gs_tau(n: usize, d: usize, gamma: f64) -> f64 {
    let two_n = 2.0 * n as f64;
    (gamma * two_n.ln() / two_n).powf((d as f64 - 2.0) / 2.0)
}

/// Ratio formula of the sphere solver: `d!/(2d)^d·τ` (even) or `d!/(√2 d)^d·τ` (odd).
pub fn gs_ratio(n: usize, d: usize, gamma: f64) -> f64 {
    let df = d as f64;
    let base = if d % 2 == 0 { 2.0 * df } else { 2f64.sqrt() * df };
    factorial(d) as f64 / base.powi(d as i32) * gs_tau(n, d, gamma)
}

/// Ratio formula of the `Ω_m` solvers: `c₄(m)·d!/(2d)^d·(δ ln 2n / 2n)^{(d−2)/2}`.
pub fn gm_ratio_formula(order: RootOrder, n: usize, d: usize, delta: f64) -> f64 {
    gm_ratio(order, n, d, delta)
}

fn require_degree(g: &ConjugateForm) -> Result<()> {
    if g.degree() < 2 {
        return Err(Error::Parameter(format!(
            "degree d = {} is not supported; d ≥ 2 required",
            g.degree()
        )));
    }
    Ok(())
}

struct Relaxation {
    xs: Vec<CVector>,
    ys: Vec<CVector>,
    value: f64,
    trials: u64,
}

fn relax_roots(g: &ConjugateForm, order: RootOrder, opts: &GSolveOptions, src: &RandomSource) -> Result<Relaxation> {
    let t = g.to_tensor();
    let rep = solve_lm(&t, order, opts.delta, opts.epsilon, opts.trials, opts.strategy, src)?;
    let (xs, ys) = split_all(&rep.solution, g.n());
    Ok(Relaxation {
        xs,
        ys,
        value: rep.value,
        trials: rep.trials_run,
    })
}

fn u_of(n: usize, r: &Relaxation, xi: &[Complex64]) -> CVector {
    let scale = 1.0 / (2.0 * xi.len() as f64);
    build_v_unchecked(n, &r.xs, &r.ys, xi).iter().map(|z| z * scale).collect()
}

fn finish(g: &ConjugateForm, solution: CVector, mode: GMode, ratio: f64, relative: bool, r: &Relaxation, src: &RandomSource, start: Instant) -> Result<GSolveReport> {
    let value = g.eval(&solution)?;
    Ok(GSolveReport {
        solution,
        value,
        mode,
        ratio_formula_value: ratio,
        relative,
        exact: false,
        relaxation_value: r.value,
        trials_run: r.trials,
        seed: src.seed,
        elapsed: start.elapsed(),
    })
}

/// Convex `g` over `Ω_m^n` (or `Ω_∞^n`).
pub fn solve_gm_convex(g: &ConjugateForm, order: RootOrder, opts: &GSolveOptions, src: &RandomSource) -> Result<GSolveReport> {
    let start = Instant::now();
    if !g.flags().convex_asserted {
        return Err(Error::ConvexNotAsserted);
    }
    require_degree(g)?;
    order.validate()?;
    let n = g.n();
    let d = g.degree();
    let r = relax_roots(g, order, opts, src)?;
    let (xi, _) = xi_search(order, d, opts.xi_guard, false, src, |xi| {
        prod_conj(xi).re * g.eval_re(&u_of(n, &r, xi))
    })
    .expect("ξ-search visits at least one tuple");
    let z = sweep_convex(g, &u_of(n, &r, &xi), order);
    finish(g, z, GMode::Convex, gm_ratio(order, n, d, opts.delta), false, &r, src, start)
}

/// Square-free `g` over `Ω_m^n` (or `Ω_∞^n`).
///
/// Odd `d` with even or infinite `m` gives an absolute guarantee via
/// `g(−u) = −g(u)`; every other case is relative.
pub fn solve_gm_squarefree(g: &ConjugateForm, order: RootOrder, opts: &GSolveOptions, src: &RandomSource) -> Result<GSolveReport> {
    let start = Instant::now();
    if !g.is_square_free() {
        return Err(Error::NotSquareFree);
    }
    require_degree(g)?;
    order.validate()?;
    let n = g.n();
    let d = g.degree();
    let set = UnitSet::new(order)?;
    let absolute = d % 2 == 1 && order.finite().map_or(true, |m| m % 2 == 0);
    let ratio = gm_ratio(order, n, d, opts.delta);
    let r = relax_roots(g, order, opts, src)?;
    if absolute {
        let (xi, _) = xi_search(order, d, opts.xi_guard, false, src, |xi| g.eval_re(&u_of(n, &r, xi)).abs())
            .expect("ξ-search visits at least one tuple");
        let u = u_of(n, &r, &xi);
        let u = if g.eval_re(&u) >= 0.0 { u } else { u.scale(Complex64::new(-1.0, 0.0)) };
        let z = sweep_linear(g, &u, &set, Direction::Up);
        return finish(g, z, GMode::SquareFreeAbsolute, ratio, false, &r, src, start);
    }
    let mut candidates = vec![sweep_linear(g, &vec![Complex64::new(0.0, 0.0); n], &set, Direction::Up)];
    if let Some((xi, _)) = xi_search(order, d, opts.xi_guard, true, src, |xi| g.eval_re(&u_of(n, &r, xi))) {
        candidates.push(sweep_linear(g, &u_of(n, &r, &xi), &set, Direction::Up));
    }
    let z = best_candidate(g, candidates);
    finish(g, z, GMode::SquareFreeRelative, ratio, true, &r, src, start)
}

/// First candidate attaining the largest `g`.
fn best_candidate(g: &ConjugateForm, candidates: Vec<CVector>) -> CVector {
    let mut best: Option<(CVector, f64)> = None;
    for c in candidates {
        let v = g.eval_re(&c);
        if best.as_ref().map_or(true, |b| v > b.1) {
            best = Some((c, v));
        }
    }
    best.expect("non-empty candidate list").0
}

fn normalized(v: &CVector) -> Option<CVector> {
    let norm = v.norm2();
    (norm >= 1e-14).then(|| v.iter().map(|z| z / norm).collect())
}

/// Exact maximization of a quadratic form on the sphere through the real
/// symmetric `2n × 2n` matrix of `g` in `(Re x, Im x)`.
fn sphere_quadratic(g: &ConjugateForm) -> CVector {
    let n = g.n();
    let dim = 2 * n;
    let unit = |a: usize| {
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        x[a % n] = if a < n { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
        x
    };
    let diag: Vec<f64> = (0..dim).map(|a| g.eval_re(&unit(a))).collect();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for a in 0..dim {
        m[(a, a)] = diag[a];
        for b in a + 1..dim {
            let mut x = unit(a);
            let xb = unit(b);
            for (p, q) in x.iter_mut().zip(&xb) {
                *p += q;
            }
            let off = (g.eval_re(&x) - diag[a] - diag[b]) / 2.0;
            m[(a, b)] = off;
            m[(b, a)] = off;
        }
    }
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.imax();
    let col = eig.eigenvectors.column(top);
    let x: CVector = (0..n).map(|i| Complex64::new(col[i], col[i + n])).collect();
    normalized(&x).unwrap_or_else(|| CVector::basis(n, 1))
}

/// Real-valued form over the complex unit sphere.
pub fn solve_gs(g: &ConjugateForm, opts: &GSolveOptions, src: &RandomSource) -> Result<GSolveReport> {
    let start = Instant::now();
    require_degree(g)?;
    let n = g.n();
    let d = g.degree();
    let two_n = 2 * n;
    let limit = two_n as f64 / (two_n as f64).ln();
    if !(opts.gamma > 0.0 && opts.gamma < limit) {
        return Err(Error::Parameter(format!(
            "gamma = {} must lie in (0, 2n/ln 2n) = (0, {limit:.4})",
            opts.gamma
        )));
    }
    let ratio = gs_ratio(n, d, opts.gamma);
    let even = d % 2 == 0;
    let mode = if even { GMode::SphereEven } else { GMode::SphereOdd };
    if d == 2 {
        let x = sphere_quadratic(g);
        let value = g.eval(&x)?;
        return Ok(GSolveReport {
            solution: x,
            value,
            mode,
            ratio_formula_value: ratio,
            relative: true,
            exact: true,
            relaxation_value: value,
            trials_run: 1,
            seed: src.seed,
            elapsed: start.elapsed(),
        });
    }
    let t = g.to_tensor();
    let xi_order = opts.xi_order.validate()?;
    let eval_unit = |v: &CVector| normalized(v).map(|u| (g.eval_re(&u), u));
    let mut best: Option<(CVector, f64)> = None;
    let keep = |c: CVector, best: &mut Option<(CVector, f64)>| {
        let v = g.eval_re(&c);
        if best.as_ref().map_or(true, |b| v > b.1) {
            *best = Some((c, v));
        }
    };
    let mut relaxation_value = f64::NEG_INFINITY;
    let mut trials = 0;
    if even {
        let h = build_h_tensor(n, d)?;
        let anchors = [sample_sphere(n, &mut src.derive(0xa1).substream(0)), CVector::basis(n, 1)];
        for y in anchors {
            let shifted = t.add_scaled(&h, Complex64::new(-g.eval_re(&y), 0.0))?;
            let rep = solve_ls(&shifted, opts.gamma, opts.epsilon, opts.trials, src)?;
            relaxation_value = relaxation_value.max(rep.value);
            trials += rep.trials_run;
            let (xs, ys) = split_all(&rep.solution, n);
            let found = xi_search(xi_order, d, opts.xi_guard, true, src, |xi| {
                eval_unit(&build_v_unchecked(n, &xs, &ys, xi)).map_or(f64::NEG_INFINITY, |p| p.0)
            });
            if let Some((u, _)) = found.and_then(|(xi, _)| eval_unit(&build_v_unchecked(n, &xs, &ys, &xi)).map(|p| (p.1, p.0))) {
                keep(u, &mut best);
            }
            keep(y, &mut best);
        }
    } else {
        let rep = solve_ls(&t, opts.gamma, opts.epsilon, opts.trials, src)?;
        relaxation_value = rep.value;
        trials = rep.trials_run;
        let (xs, ys) = split_all(&rep.solution, n);
        let found = xi_search(xi_order, d, opts.xi_guard, false, src, |xi| {
            let v = build_v_unchecked(n, &xs, &ys, xi);
            eval_unit(&v).map_or(f64::NEG_INFINITY, |p| p.0.abs())
        });
        match found.and_then(|(xi, _)| normalized(&build_v_unchecked(n, &xs, &ys, &xi))) {
            Some(u) => {
                keep(u.scale(Complex64::new(-1.0, 0.0)), &mut best);
                keep(u, &mut best);
            }
            None => keep(sample_sphere(n, &mut src.derive(0xa1).substream(0)), &mut best),
        }
    }
    let (solution, _) = best.expect("at least one candidate");
    let value = g.eval(&solution)?;
    Ok(GSolveReport {
        solution,
        value,
        mode,
        ratio_formula_value: ratio,
        relative: even,
        exact: false,
        relaxation_value,
        trials_run: trials,
        seed: src.seed,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormMode {
    Auto,
    Convex,
    Squarefree,
}

impl std::str::FromStr for FormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(FormMode::Auto),
            "convex" => Ok(FormMode::Convex),
            "squarefree" | "square-free" | "square_free" => Ok(FormMode::Squarefree),
            _ => Err(Error::Parameter(format!("unknown mode {s:?}"))),
        }
    }
}

/// Dispatches to the solver matching the constraint and the form's structure.
///
/// `order = None` means the sphere. `Auto` prefers the square-free path and
/// otherwise requires the convexity flag.
pub fn solve_form(g: &ConjugateForm, order: Option<RootOrder>, mode: FormMode, opts: &GSolveOptions, src: &RandomSource) -> Result<GSolveReport> {
    let Some(order) = order else {
        return solve_gs(g, opts, src);
    };
    match mode {
        FormMode::Convex => solve_gm_convex(g, order, opts, src),
        FormMode::Squarefree => solve_gm_squarefree(g, order, opts, src),
        FormMode::Auto if g.is_square_free() => solve_gm_squarefree(g, order, opts, src),
        FormMode::Auto if g.flags().convex_asserted => solve_gm_convex(g, order, opts, src),
        FormMode::Auto => Err(Error::ConvexNotAsserted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::hermitian_quadratic;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_re_x1() -> ConjugateForm {
        ConjugateForm::from_coefficients(1, 1, vec![((vec![1], vec![]), c(1., 0.)), ((vec![], vec![1]), c(1., 0.))]).unwrap()
    }

    fn cross_form() -> ConjugateForm {
        ConjugateForm::from_coefficients(2, 2, vec![((vec![1], vec![2]), c(1., 0.)), ((vec![2], vec![1]), c(1., 0.))]).unwrap()
    }

    #[test]
    fn vertex_rounding_examples() {
        let g = two_re_x1();
        let up = round_to_vertices(&g, &[c(0., 0.)], RootOrder::Finite(4), Direction::Up).unwrap();
        assert_eq!(up.0, vec![c(1., 0.)]);
        assert_eq!(g.eval(&up).unwrap(), 2.0);
        let down = round_to_vertices(&g, &[c(0., 0.)], RootOrder::Finite(4), Direction::Down).unwrap();
        assert_eq!(down.0, vec![c(-1., 0.)]);
        assert_eq!(g.eval(&down).unwrap(), -2.0);

        let g = cross_form();
        let z = round_to_vertices(&g, &[c(0., 0.), c(0., 0.)], RootOrder::Finite(3), Direction::Up).unwrap();
        assert_eq!(z.0, vec![c(1., 0.), c(1., 0.)]);
        assert!((g.eval(&z).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn vertex_rounding_errors() {
        let sq = ConjugateForm::from_coefficients(1, 2, vec![((vec![1], vec![1]), c(1., 0.))]).unwrap();
        assert!(matches!(round_to_vertices(&sq, &[c(0., 0.)], RootOrder::Finite(4), Direction::Up), Err(Error::NotSquareFree)));
        assert!(matches!(
            round_to_vertices(&two_re_x1(), &[c(0., 0.9)], RootOrder::Finite(3), Direction::Up),
            Err(Error::ConvexHullViolation { coordinate: 1 })
        ));
    }

    #[test]
    fn hessian_examples() {
        let g = squared_norm_form(1);
        let x = [c(0.3, -0.1)];
        let y = [c(0.5, 0.7)];
        assert!((hessian_sample(&g, &x, &y).unwrap() - 2.0 * y[0].norm_sqr()).abs() < 1e-14);
        assert!((hessian_sample(&g.neg(), &x, &y).unwrap() + 2.0 * y[0].norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn h_tensor() {
        let h = build_h_tensor(1, 2).unwrap();
        assert_eq!(h.data(), &[c(0., 0.), c(0.5, 0.), c(0.5, 0.), c(0., 0.)]);
        assert!(matches!(build_h_tensor(2, 3), Err(Error::OddDegree(3))));
        let h4 = build_h_tensor(2, 4).unwrap();
        let x = [c(0.6, 0.), c(0., 0.8)];
        assert!((crate::forms::eval_conjugate_tensor(&h4, &x).unwrap() - 1.0).abs() < 1e-12);
        let x2 = [c(1.2, 0.), c(0., 1.6)];
        assert!((crate::forms::eval_conjugate_tensor(&h4, &x2).unwrap() - 16.0).abs() < 1e-10);
    }

    #[test]
    fn convex_examples() {
        let opts = GSolveOptions::default();
        let src = RandomSource::new(3);
        let g = squared_norm_form(3).with_convex_asserted(true);
        let r = solve_gm_convex(&g, RootOrder::Finite(4), &opts, &src).unwrap();
        assert!((r.value - 3.0).abs() < 1e-12);

        // |x₁ + x₂|²
        let ones = vec![vec![c(1., 0.), c(1., 0.)], vec![c(1., 0.), c(1., 0.)]];
        let g = hermitian_quadratic(&ones).unwrap().with_convex_asserted(true);
        let r = solve_gm_convex(&g, RootOrder::Finite(4), &opts, &src).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);

        let z = ConjugateForm::zero(2, 2).with_convex_asserted(true);
        assert_eq!(solve_gm_convex(&z, RootOrder::Finite(3), &opts, &src).unwrap().value, 0.0);
        assert!(matches!(solve_gm_convex(&cross_form(), RootOrder::Finite(3), &opts, &src), Err(Error::ConvexNotAsserted)));
    }

    #[test]
    fn squarefree_degree_one_rejected() {
        let r = solve_gm_squarefree(&two_re_x1(), RootOrder::Finite(4), &GSolveOptions::default(), &RandomSource::new(0));
        assert!(matches!(r, Err(Error::Parameter(_))));
    }

    #[test]
    fn squarefree_cross_form() {
        let r = solve_gm_squarefree(&cross_form(), RootOrder::Finite(4), &GSolveOptions::default(), &RandomSource::new(0)).unwrap();
        assert_eq!(r.mode, GMode::SquareFreeRelative);
        assert!(r.relative);
        assert!(r.value - (-2.0) >= r.ratio_formula_value * 4.0);
    }

    #[test]
    fn sphere_quadratic_eigenpair() {
        let q = vec![vec![c(3., 0.), c(0., 0.)], vec![c(0., 0.), c(1., 0.)]];
        let g = hermitian_quadratic(&q).unwrap();
        let r = solve_gs(&g, &GSolveOptions::default(), &RandomSource::new(0)).unwrap();
        assert!((r.value - 3.0).abs() < 1e-12);
        assert!((r.solution[0].norm() - 1.0).abs() < 1e-12);
        assert!(r.exact);
    }

    #[test]
    fn ratio_formulas() {
        let v = gs_ratio(2, 3, 1.0);
        let direct = 6.0 / (2f64.sqrt() * 3.0).powi(3) * (4f64.ln() / 4.0).sqrt();
        assert!((v - direct).abs() < 1e-15);
        let v = gm_ratio_formula(RootOrder::Finite(4), 2, 2, 0.05);
        assert!((v - 0.3559 * 2.0 / 16.0).abs() < 1e-12);
    }
}
