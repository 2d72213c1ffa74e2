//! Reference optimizers: exhaustive enumeration over `Ω_m` and multi-start
//! local ascent for the circle and the sphere.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::ConjugateForm;
use crate::multilinear::UnitSet;
use crate::polarization::advance;
use crate::sampling::{sample_circle, sample_sphere, RandomSource, RootOrder, RootTable};
use crate::tensor::{CTensor, CVector};

/// Default cap on enumerated points.
pub const ORACLE_ENUMERATION_GUARD: f64 = 1e7;
const MAX_ASCENT_ITERS: usize = 500;
const INITIAL_STEP: f64 = 0.1;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Solution {
    Single(CVector),
    Tuple(Vec<CVector>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub v_max: f64,
    pub v_min: f64,
    pub argmax: Solution,
    pub argmin: Solution,
    /// True for enumeration, false for multi-start estimates.
    pub exact: bool,
}

/// Running max/min where the lowest index wins ties.
#[derive(Debug, Clone)]
struct Extremes<T> {
    max: Option<(f64, T)>,
    min: Option<(f64, T)>,
}

impl<T: Clone> Extremes<T> {
    fn new() -> Self {
        Extremes { max: None, min: None }
    }

    fn push_max(&mut self, v: f64, arg: &T) {
        if self.max.as_ref().map_or(true, |b| v > b.0) {
            self.max = Some((v, arg.clone()));
        }
    }

    fn push_min(&mut self, v: f64, arg: &T) {
        if self.min.as_ref().map_or(true, |b| v < b.0) {
            self.min = Some((v, arg.clone()));
        }
    }

    fn merge(mut self, later: Extremes<T>) -> Self {
        if let Some((v, a)) = later.max {
            self.push_max(v, &a);
        }
        if let Some((v, a)) = later.min {
            self.push_min(v, &a);
        }
        self
    }
}

fn decode(mut index: usize, m: usize, digits: &mut [usize]) {
    for d in digits.iter_mut() {
        *d = index % m;
        index /= m;
    }
}

/// Walks `count` base-`m` odometer states in fixed chunks, merging in index order.
fn enumerate<T, F>(count: usize, m: usize, width: usize, visit: F) -> Extremes<T>
where
    T: Clone + Send,
    F: Fn(&[usize], &mut Extremes<T>) + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Extremes<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut ext = Extremes::new();
            let mut digits = vec![0; width];
            decode(c * CHUNK, m, &mut digits);
            for _ in c * CHUNK..((c + 1) * CHUNK).min(count) {
                visit(&digits, &mut ext);
                advance(&mut digits, m);
            }
            ext
        })
        .collect();
    parts.into_iter().fold(Extremes::new(), Extremes::merge)
}

fn guard_count(m: u32, width: usize, guard: f64) -> Result<usize> {
    let count = (m as f64).powi(width as i32);
    if count > guard {
        return Err(Error::EnumerationTooLarge { count, guard });
    }
    Ok(count as usize)
}

/// Exact extremes of `g` over `Ω_m^n` by full enumeration.
pub fn brute_force_form_roots(g: &ConjugateForm, m: u32) -> Result<OracleResult> {
    brute_force_form_roots_with_guard(g, m, ORACLE_ENUMERATION_GUARD)
}

pub fn brute_force_form_roots_with_guard(g: &ConjugateForm, m: u32, guard: f64) -> Result<OracleResult> {
    RootOrder::Finite(m).validate()?;
    let n = g.n();
    let count = guard_count(m, n, guard)?;
    let table = RootTable::new(m);
    let ext = enumerate::<CVector, _>(count, m as usize, n, |digits, ext| {
        let x: CVector = digits.iter().map(|&k| table.get(k)).collect();
        let v = g.eval_re(&x);
        ext.push_max(v, &x);
        ext.push_min(v, &x);
    });
    let (v_max, argmax) = ext.max.expect("non-empty enumeration");
    let (v_min, argmin) = ext.min.expect("non-empty enumeration");
    Ok(OracleResult {
        v_max,
        v_min,
        argmax: Solution::Single(argmax),
        argmin: Solution::Single(argmin),
        exact: true,
    })
}

/// Exact extremes of `Re F` over `Ω_m^{n₁} × … × Ω_m^{n_d}`.
///
/// The largest slot is solved coordinate-wise for every assignment of the others.
pub fn brute_force_multilinear_roots(f: &CTensor, m: u32) -> Result<OracleResult> {
    brute_force_multilinear_roots_with_guard(f, m, ORACLE_ENUMERATION_GUARD)
}

pub fn brute_force_multilinear_roots_with_guard(f: &CTensor, m: u32, guard: f64) -> Result<OracleResult> {
    let set = UnitSet::new(RootOrder::Finite(m))?;
    let table = RootTable::new(m);
    let dims = f.dims().to_vec();
    let d = dims.len();
    let keep = (0..d).max_by_key(|&k| (dims[k], std::cmp::Reverse(k))).expect("d ≥ 1");
    let others: Vec<usize> = (0..d).filter(|&k| k != keep).collect();
    let width: usize = others.iter().map(|&k| dims[k]).sum();
    let count = guard_count(m, width, guard)?;
    let ext = enumerate::<Vec<CVector>, _>(count, m as usize, width, |digits, ext| {
        let mut xs: Vec<CVector> = vec![CVector::default(); d];
        let mut pos = 0;
        for &k in &others {
            xs[k] = digits[pos..pos + dims[k]].iter().map(|&i| table.get(i)).collect();
            pos += dims[k];
        }
        let w = if d == 1 { f.data().to_vec() } else { f.contract_all_but(keep, &xs) };
        let (hi, vhi): (CVector, f64) = fold_best(&set, &w, 1.0);
        let (lo, vlo): (CVector, f64) = fold_best(&set, &w, -1.0);
        xs[keep] = hi;
        ext.push_max(vhi, &xs);
        xs[keep] = lo;
        ext.push_min(-vlo, &xs);
    });
    let (_, argmax) = ext.max.expect("non-empty enumeration");
    let (_, argmin) = ext.min.expect("non-empty enumeration");
    Ok(OracleResult {
        v_max: f.eval_multilinear(&argmax)?.re,
        v_min: f.eval_multilinear(&argmin)?.re,
        argmax: Solution::Tuple(argmax),
        argmin: Solution::Tuple(argmin),
        exact: true,
    })
}

/// Per-coordinate best response to `sign·w`; returns the vector and `Σ max Re(sign·w_j z_j)`.
fn fold_best(set: &UnitSet, w: &[Complex64], sign: f64) -> (CVector, f64) {
    let mut total = 0.0;
    let v = w
        .iter()
        .map(|&wj| {
            let (z, r) = set.best(wj * sign);
            total += r;
            z
        })
        .collect();
    (v, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousSet {
    Sphere,
    Circle,
}

impl ContinuousSet {
    fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> CVector {
        match self {
            ContinuousSet::Sphere => sample_sphere(n, rng),
            ContinuousSet::Circle => sample_circle(n, rng),
        }
    }

    fn project(self, x: &mut [Complex64], fallback: &[Complex64]) {
        match self {
            ContinuousSet::Sphere => {
                let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm > 0.0 {
                    x.iter_mut().for_each(|z| *z /= norm);
                } else {
                    x.copy_from_slice(fallback);
                }
            }
            ContinuousSet::Circle => {
                for (z, f) in x.iter_mut().zip(fallback) {
                    let a = z.norm();
                    *z = if a > 0.0 { *z / a } else { *f };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    Form(&'a ConjugateForm),
    /// `Re F(x¹, …, x^d)`.
    Multilinear(&'a CTensor),
}

struct Term {
    a: Complex64,
    conj: Vec<usize>,
    plain: Vec<usize>,
}

/// Monomial list of a form, evaluated without building the tensor.
struct Poly {
    n: usize,
    terms: Vec<Term>,
}

impl Poly {
    fn new(g: &ConjugateForm, sign: f64) -> Self {
        let terms = g
            .coeffs()
            .iter()
            .map(|((i, j), &a)| Term {
                a: a * sign,
                conj: i.iter().map(|k| k - 1).collect(),
                plain: j.iter().map(|k| k - 1).collect(),
            })
            .collect();
        Poly { n: g.n(), terms }
    }

    /// Value and ascent direction `2·∂g/∂x̄`, written into `grad`.
    fn value_grad(&self, x: &[Complex64], grad: &mut [Complex64]) -> f64 {
        grad.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let mut pre: Vec<Complex64> = Vec::with_capacity(16);
        let mut value = 0.0;
        for t in &self.terms {
            let p: Complex64 = t.a * t.plain.iter().map(|&k| x[k]).product::<Complex64>();
            // prefix products in `pre`, running suffix in `suf`
            let k = t.conj.len();
            pre.clear();
            pre.push(Complex64::new(1.0, 0.0));
            for &l in &t.conj {
                let last = *pre.last().expect("non-empty");
                pre.push(last * x[l].conj());
            }
            let c = pre[k];
            let mut suf = p * 2.0;
            for q in (0..k).rev() {
                let l = t.conj[q];
                grad[l] += pre[q] * suf;
                suf *= x[l].conj();
            }
            value += (p * c).re;
        }
        value
    }
}

/// Projected gradient ascent with step halving on decrease and doubling on success.
fn ascend_form(poly: &Poly, set: ContinuousSet, mut x: CVector) -> (CVector, f64) {
    let n = poly.n;
    let mut grad = vec![Complex64::new(0.0, 0.0); n];
    let mut cand_grad = grad.clone();
    let mut cand = grad.clone();
    let mut value = poly.value_grad(&x, &mut grad);
    let mut step = INITIAL_STEP;
    for _ in 0..MAX_ASCENT_ITERS {
        let mut accepted = None;
        while step > 1e-12 {
            for ((c, a), g) in cand.iter_mut().zip(x.iter()).zip(&grad) {
                *c = a + g * step;
            }
            set.project(&mut cand, &x);
            let v = poly.value_grad(&cand, &mut cand_grad);
            if v >= value {
                accepted = Some(v);
                break;
            }
            step *= 0.5;
        }
        let Some(v) = accepted else { break };
        let gain = v - value;
        x.copy_from_slice(&cand);
        std::mem::swap(&mut grad, &mut cand_grad);
        value = v;
        if gain <= 1e-10 * (1.0 + value.abs()) {
            break;
        }
        step = (step * 1.2).min(1e6);
    }
    (x, value)
}

/// Block-coordinate ascent on `Re F`: each slot takes its closed-form best response.
fn ascend_multilinear(f: &CTensor, set: ContinuousSet, mut xs: Vec<CVector>) -> (Vec<CVector>, f64) {
    let d = xs.len();
    let mut value = f.eval_multilinear_unchecked(&xs).re;
    for _ in 0..MAX_ASCENT_ITERS {
        let before = value;
        for k in 0..d {
            let w = if d == 1 { f.data().to_vec() } else { f.contract_all_but(k, &xs) };
            let mut cand: Vec<Complex64> = w.iter().map(|z| z.conj()).collect();
            set.project(&mut cand, &xs[k]);
            let v: f64 = w.iter().zip(&cand).map(|(a, b)| (a * b).re).sum();
            if v >= value {
                xs[k] = CVector(cand);
                value = v;
            }
        }
        if value - before <= 1e-13 * (1.0 + value.abs()) {
            break;
        }
    }
    (xs, value)
}

/// Best and worst values over local ascent/descent runs from random starts.
pub fn multistart_reference(objective: Objective<'_>, set: ContinuousSet, starts: usize, src: &RandomSource) -> Result<OracleResult> {
    if starts < 100 {
        return Err(Error::Parameter(format!("at least 100 starts required, got {starts}")));
    }
    match objective {
        Objective::Form(g) => {
            let pos = Poly::new(g, 1.0);
            let neg = Poly::new(g, -1.0);
            let ext = run_starts(starts, src, |_, rng, ext: &mut Extremes<CVector>| {
                let x0 = set.sample(g.n(), rng);
                let (xa, va) = ascend_form(&pos, set, x0.clone());
                ext.push_max(va, &xa);
                let (xb, vb) = ascend_form(&neg, set, x0);
                ext.push_min(-vb, &xb);
            });
            let (_, argmax) = ext.max.expect("starts ≥ 1");
            let (_, argmin) = ext.min.expect("starts ≥ 1");
            Ok(OracleResult {
                v_max: g.eval(&argmax)?,
                v_min: g.eval(&argmin)?,
                argmax: Solution::Single(argmax),
                argmin: Solution::Single(argmin),
                exact: false,
            })
        }
        Objective::Multilinear(f) => {
            let neg = f.scale(Complex64::new(-1.0, 0.0));
            let ext = run_starts(starts, src, |_, rng, ext: &mut Extremes<Vec<CVector>>| {
                let x0: Vec<CVector> = f.dims().iter().map(|&n| set.sample(n, rng)).collect();
                let (xa, va) = ascend_multilinear(f, set, x0.clone());
                ext.push_max(va, &xa);
                let (xb, vb) = ascend_multilinear(&neg, set, x0);
                ext.push_min(-vb, &xb);
            });
            let (_, argmax) = ext.max.expect("starts ≥ 1");
            let (_, argmin) = ext.min.expect("starts ≥ 1");
            Ok(OracleResult {
                v_max: f.eval_multilinear(&argmax)?.re,
                v_min: f.eval_multilinear(&argmin)?.re,
                argmax: Solution::Tuple(argmax),
                argmin: Solution::Tuple(argmin),
                exact: false,
            })
        }
    }
}

fn run_starts<T, F>(starts: usize, src: &RandomSource, body: F) -> Extremes<T>
where
    T: Clone + Send,
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng, &mut Extremes<T>) + Sync,
{
    const STARTS_PER_CHUNK: usize = 64;
    let chunks = starts.div_ceil(STARTS_PER_CHUNK);
    let parts: Vec<Extremes<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut ext = Extremes::new();
            for k in c * STARTS_PER_CHUNK..((c + 1) * STARTS_PER_CHUNK).min(starts) {
                let mut rng = src.substream(k as u64);
                body(k, &mut rng, &mut ext);
            }
            ext
        })
        .collect();
    parts.into_iter().fold(Extremes::new(), Extremes::merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{hermitian_quadratic, squared_norm_form};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn form_enumeration_examples() {
        let g = ConjugateForm::from_coefficients(2, 2, vec![((vec![1], vec![2]), c(1., 0.)), ((vec![2], vec![1]), c(1., 0.))]).unwrap();
        let r = brute_force_form_roots(&g, 4).unwrap();
        assert_eq!((r.v_max, r.v_min), (2.0, -2.0));
        assert!(r.exact);
        let z = ConjugateForm::zero(2, 2);
        let r = brute_force_form_roots(&z, 3).unwrap();
        assert_eq!((r.v_max, r.v_min), (0.0, 0.0));
        for m in [3, 5, 8] {
            let r = brute_force_form_roots(&squared_norm_form(3), m).unwrap();
            assert!((r.v_max - 3.0).abs() < 1e-12 && (r.v_min - 3.0).abs() < 1e-12);
        }
        assert!(matches!(brute_force_form_roots(&squared_norm_form(12), 4), Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn multilinear_enumeration_examples() {
        let a = CTensor::from_vec(&[1, 1], vec![c(1., 0.)]).unwrap();
        let r = brute_force_multilinear_roots(&a, 3).unwrap();
        assert!((r.v_max - 1.0).abs() < 1e-15 && (r.v_min + 0.5).abs() < 1e-15);
        let ones = CTensor::from_vec(&[2, 2, 2], vec![c(1., 0.); 8]).unwrap();
        let r = brute_force_multilinear_roots(&ones, 4).unwrap();
        assert!((r.v_max - 8.0).abs() < 1e-12);
        let z = CTensor::zeros(&[2, 2]).unwrap();
        let r = brute_force_multilinear_roots(&z, 4).unwrap();
        assert_eq!((r.v_max, r.v_min), (0.0, 0.0));
    }

    #[test]
    fn multilinear_enumeration_matches_naive() {
        let data: Vec<Complex64> = (0..12).map(|k| c((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos())).collect();
        let f = CTensor::from_vec(&[2, 3, 2], data).unwrap();
        let r = brute_force_multilinear_roots(&f, 3).unwrap();
        let t = RootTable::new(3);
        let mut best = f64::NEG_INFINITY;
        let mut worst = f64::INFINITY;
        let mut digits = vec![0; 7];
        for _ in 0..3usize.pow(7) {
            let xs = vec![
                CVector(digits[0..2].iter().map(|&k| t.get(k)).collect()),
                CVector(digits[2..5].iter().map(|&k| t.get(k)).collect()),
                CVector(digits[5..7].iter().map(|&k| t.get(k)).collect()),
            ];
            let v = f.eval_multilinear(&xs).unwrap().re;
            best = best.max(v);
            worst = worst.min(v);
            advance(&mut digits, 3);
        }
        assert!((r.v_max - best).abs() < 1e-12);
        assert!((r.v_min - worst).abs() < 1e-12);
    }

    #[test]
    fn multistart_examples() {
        let src = RandomSource::new(8);
        let q = vec![vec![c(3., 0.), c(0., 0.)], vec![c(0., 0.), c(1., 0.)]];
        let t = hermitian_quadratic(&q).unwrap();
        let r = multistart_reference(Objective::Form(&t), ContinuousSet::Sphere, 100, &src).unwrap();
        assert!((r.v_max - 3.0).abs() < 1e-6 && (r.v_min - 1.0).abs() < 1e-6);
        assert!(!r.exact);

        let h = squared_norm_form(2).pow(2).unwrap();
        let r = multistart_reference(Objective::Form(&h), ContinuousSet::Sphere, 100, &src).unwrap();
        assert!((r.v_max - 1.0).abs() < 1e-9 && (r.v_min - 1.0).abs() < 1e-9);

        let a = [c(1., 0.), c(0., 2.)];
        let b = [c(0.5, 0.5), c(1., 0.), c(0., 0.)];
        let cc = [c(2., 0.), c(0., -1.)];
        let mut data = Vec::new();
        for x in a {
            for y in b {
                for z in cc {
                    data.push(x * y * z);
                }
            }
        }
        let f = CTensor::from_vec(&[2, 3, 2], data).unwrap();
        let opt = CVector(a.to_vec()).norm2() * CVector(b.to_vec()).norm2() * CVector(cc.to_vec()).norm2();
        let r = multistart_reference(Objective::Multilinear(&f), ContinuousSet::Sphere, 100, &src).unwrap();
        assert!((r.v_max - opt).abs() < 1e-6 && (r.v_min + opt).abs() < 1e-6);
        assert!(multistart_reference(Objective::Multilinear(&f), ContinuousSet::Sphere, 10, &src).is_err());
    }

    #[test]
    fn circle_reference_below_fine_grid() {
        let g = ConjugateForm::from_coefficients(
            2,
            2,
            vec![
                ((vec![1], vec![2]), c(1., 2.)),
                ((vec![2], vec![1]), c(1., -2.)),
                ((vec![1, 2], vec![]), c(0.5, 0.3)),
                ((vec![], vec![1, 2]), c(0.5, -0.3)),
            ],
        )
        .unwrap();
        let grid = brute_force_form_roots(&g, 720).unwrap();
        let r = multistart_reference(Objective::Form(&g), ContinuousSet::Circle, 100, &RandomSource::new(1)).unwrap();
        assert!(r.v_max <= grid.v_max + 1e-3);
        assert!(r.v_max >= grid.v_max - 1e-3);
        assert!(r.v_min >= grid.v_min - 1e-3);
    }
}
