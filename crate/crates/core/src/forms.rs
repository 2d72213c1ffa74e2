//! Real-valued general conjugate forms and their tensor representation.
//!
//! A form is `g(x) = Σ a_{I,J} · conj(∏_{i∈I} x_i) · ∏_{j∈J} x_j` with sorted
//! index multisets `I` (conjugated) and `J` (plain). It is real for every `x`
//! iff `a_{I,J} = conj(a_{J,I})` for all keys.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CTensor, CVector, MultiIndex};

/// Coefficient key: (conjugated multiset, plain multiset), both sorted, 1-based.
pub type FormKey = (Vec<usize>, Vec<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FormFlags {
    pub square_free: bool,
    pub convex_asserted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateForm {
    n: usize,
    d: usize,
    coeffs: BTreeMap<FormKey, Complex64>,
    flags: FormFlags,
}

const RESIDUE_TOL: f64 = 1e-9;

fn mirror(key: &FormKey) -> FormKey {
    (key.1.clone(), key.0.clone())
}

fn fmt_key(key: &FormKey) -> String {
    format!("(I={:?}, J={:?})", key.0, key.1)
}

impl ConjugateForm {
    pub fn zero(n: usize, d: usize) -> Self {
        ConjugateForm {
            n,
            d,
            coeffs: BTreeMap::new(),
            flags: FormFlags {
                square_free: true,
                convex_asserted: false,
            },
        }
    }

    /// Validates and canonicalizes a coefficient list.
    ///
    /// Keys are sorted; repeated keys are merged by addition; exact zeros are
    /// dropped. Every key's mirror must carry exactly the conjugate value.
    pub fn from_coefficients<I>(n: usize, d: usize, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FormKey, Complex64)>,
    {
        let map = Self::canonical_map(n, d, coeffs)?;
        for (key, &a) in &map {
            let mk = mirror(key);
            let b = map.get(&mk).copied().unwrap_or_default();
            if a != b.conj() {
                return Err(Error::RealValuedness {
                    key: fmt_key(key),
                    mirror: fmt_key(&mk),
                });
            }
        }
        Ok(Self::from_map(n, d, map))
    }

    /// Like [`from_coefficients`](Self::from_coefficients) but replaces each
    /// pair by its Hermitian part `(a_{I,J} + conj(a_{J,I}))/2` instead of
    /// rejecting unpaired input.
    pub fn projected<I>(n: usize, d: usize, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FormKey, Complex64)>,
    {
        let map = Self::canonical_map(n, d, coeffs)?;
        let mut out = BTreeMap::new();
        for (key, &a) in &map {
            let mk = mirror(key);
            if mk < *key && map.contains_key(&mk) {
                continue;
            }
            let b = map.get(&mk).copied().unwrap_or_default();
            if mk == *key {
                if a.re != 0.0 {
                    out.insert(key.clone(), Complex64::new(a.re, 0.0));
                }
                continue;
            }
            let h = (a + b.conj()) * 0.5;
            if h != Complex64::new(0.0, 0.0) {
                out.insert(key.clone(), h);
                out.insert(mk, h.conj());
            }
        }
        Ok(Self::from_map(n, d, out))
    }

    fn canonical_map<I>(n: usize, d: usize, coeffs: I) -> Result<BTreeMap<FormKey, Complex64>>
    where
        I: IntoIterator<Item = (FormKey, Complex64)>,
    {
        if n == 0 {
            return Err(Error::Shape("form dimension n must be positive".into()));
        }
        let mut map: BTreeMap<FormKey, Complex64> = BTreeMap::new();
        for ((mut i, mut j), a) in coeffs {
            if i.len() + j.len() != d {
                return Err(Error::Shape(format!(
                    "term (I={i:?}, J={j:?}) has degree {} but the form has degree {d}",
                    i.len() + j.len()
                )));
            }
            if let Some(&bad) = i.iter().chain(&j).find(|&&k| k == 0 || k > n) {
                return Err(Error::Index { index: bad, bound: n });
            }
            i.sort_unstable();
            j.sort_unstable();
            *map.entry((i, j)).or_default() += a;
        }
        map.retain(|_, a| *a != Complex64::new(0.0, 0.0));
        Ok(map)
    }

    fn from_map(n: usize, d: usize, coeffs: BTreeMap<FormKey, Complex64>) -> Self {
        let square_free = coeffs.keys().all(key_square_free);
        ConjugateForm {
            n,
            d,
            coeffs,
            flags: FormFlags {
                square_free,
                convex_asserted: false,
            },
        }
    }

    /// Marks the form as convex. The flag is trusted, never proved.
    pub fn with_convex_asserted(mut self, convex: bool) -> Self {
        self.flags.convex_asserted = convex;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &BTreeMap<FormKey, Complex64> {
        &self.coeffs
    }

    pub fn flags(&self) -> FormFlags {
        self.flags
    }

    pub fn is_square_free(&self) -> bool {
        self.flags.square_free
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn check_point(&self, x: &[Complex64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                slot: 1,
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Raw complex sum; its imaginary part is rounding noise for valid forms.
    pub fn eval_complex(&self, x: &[Complex64]) -> Result<Complex64> {
        self.check_point(x)?;
        Ok(self.eval_complex_unchecked(x))
    }

    pub(crate) fn eval_complex_unchecked(&self, x: &[Complex64]) -> Complex64 {
        let xc: Vec<Complex64> = x.iter().map(|z| z.conj()).collect();
        self.coeffs
            .iter()
            .map(|((i, j), a)| {
                let mut t = *a;
                for &k in i {
                    t *= xc[k - 1];
                }
                for &k in j {
                    t *= x[k - 1];
                }
                t
            })
            .sum()
    }

    /// `g(x)` as a real number, after checking the imaginary residue.
    pub fn eval(&self, x: &[Complex64]) -> Result<f64> {
        real_part_checked(self.eval_complex(x)?)
    }

    /// Evaluation without the residue check, for inner loops on trusted forms.
    pub(crate) fn eval_re(&self, x: &[Complex64]) -> f64 {
        self.eval_complex_unchecked(x).re
    }

    /// Spreads each coefficient over the distinct permutations of its index word.
    pub fn to_tensor(&self) -> CTensor {
        let dim = 2 * self.n;
        let mut t = CTensor::zeros(&vec![dim; self.d.max(1)]).expect("valid dims");
        if self.d == 0 {
            return t;
        }
        for ((i, j), a) in &self.coeffs {
            let mut word: Vec<usize> = i
                .iter()
                .map(|&k| k - 1)
                .chain(j.iter().map(|&k| k - 1 + self.n))
                .collect();
            word.sort_unstable();
            let share = *a / distinct_permutations(&word) as f64;
            loop {
                let off = t.offset0(&word);
                t.data_mut()[off] += share;
                if !next_permutation(&mut word) {
                    break;
                }
            }
        }
        t
    }

    /// `-g`.
    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.values_mut().for_each(|a| *a *= s);
        out.coeffs.retain(|_, a| *a != Complex64::new(0.0, 0.0));
        out.flags.convex_asserted = self.flags.convex_asserted && s >= 0.0;
        out
    }

    /// Sum of two forms of equal shape.
    pub fn add(&self, other: &ConjugateForm) -> Result<Self> {
        if self.n != other.n || self.d != other.d {
            return Err(Error::Shape(format!(
                "cannot add forms (n={}, d={}) and (n={}, d={})",
                self.n, self.d, other.n, other.d
            )));
        }
        let terms = self
            .coeffs
            .iter()
            .chain(&other.coeffs)
            .map(|(k, a)| (k.clone(), *a));
        Self::projected(self.n, self.d, terms)
    }

    /// Product of two forms over the same variables; degrees add.
    pub fn mul(&self, other: &ConjugateForm) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Shape(format!(
                "cannot multiply forms of dimension {} and {}",
                self.n, other.n
            )));
        }
        let mut terms = Vec::with_capacity(self.coeffs.len() * other.coeffs.len());
        for ((i1, j1), a) in &self.coeffs {
            for ((i2, j2), b) in &other.coeffs {
                let i: Vec<usize> = i1.iter().chain(i2).copied().collect();
                let j: Vec<usize> = j1.iter().chain(j2).copied().collect();
                terms.push(((i, j), a * b));
            }
        }
        Self::projected(self.n, self.d + other.d, terms)
    }

    /// `self^k` for `k ≥ 1`.
    pub fn pow(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("power must be at least 1".into()));
        }
        let mut out = self.clone();
        for _ in 1..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// `(p₁, p₃)` with `g(x | x_i = t) = 2·Re(t·p₁) + p₃` for all complex `t`.
    ///
    /// `i` is 1-based.
    pub fn extract_linear_coefficient(&self, x: &[Complex64], i: usize) -> Result<(Complex64, f64)> {
        self.check_point(x)?;
        if i == 0 || i > self.n {
            return Err(Error::Index { index: i, bound: self.n });
        }
        let hits = |k: &FormKey| k.0.iter().chain(&k.1).filter(|&&v| v == i).count();
        if self.coeffs.keys().any(|k| hits(k) > 1) {
            return Err(Error::NotSquareFreeInVariable(i));
        }
        Ok(self.linear_coefficient_unchecked(x, i - 1))
    }

    /// Three-point evaluation; `i0` is 0-based.
    pub(crate) fn linear_coefficient_unchecked(&self, x: &[Complex64], i0: usize) -> (Complex64, f64) {
        let mut probe = x.to_vec();
        probe[i0] = Complex64::new(0.0, 0.0);
        let p3 = self.eval_re(&probe);
        probe[i0] = Complex64::new(1.0, 0.0);
        let p_one = self.eval_re(&probe);
        probe[i0] = Complex64::new(0.0, 1.0);
        let p_imag = self.eval_re(&probe);
        (Complex64::new((p_one - p3) / 2.0, (p3 - p_imag) / 2.0), p3)
    }

    pub fn to_json(&self) -> FormJson {
        FormJson {
            n: self.n,
            d: self.d,
            terms: self
                .coeffs
                .iter()
                .map(|((i, j), a)| FormTerm {
                    conj: i.clone(),
                    plain: j.clone(),
                    re: a.re,
                    im: a.im,
                })
                .collect(),
            convex: self.flags.convex_asserted.then_some(true),
        }
    }

    pub fn from_json(json: &FormJson) -> Result<Self> {
        let terms = json.terms.iter().map(|t| {
            (
                (t.conj.clone(), t.plain.clone()),
                Complex64::new(t.re, t.im),
            )
        });
        Ok(Self::from_coefficients(json.n, json.d, terms)?
            .with_convex_asserted(json.convex.unwrap_or(false)))
    }
}

fn key_square_free(key: &FormKey) -> bool {
    let mut all: Vec<usize> = key.0.iter().chain(&key.1).copied().collect();
    all.sort_unstable();
    all.windows(2).all(|w| w[0] != w[1])
}

pub(crate) fn real_part_checked(z: Complex64) -> Result<f64> {
    if z.im.abs() > RESIDUE_TOL * (1.0 + z.re.abs()) {
        return Err(Error::ImaginaryResidue {
            residue: z.im.abs(),
            value: z.re,
        });
    }
    Ok(z.re)
}

/// Number of distinct orderings of a multiset word.
pub(crate) fn distinct_permutations(word: &[usize]) -> u64 {
    let mut sorted = word.to_vec();
    sorted.sort_unstable();
    let mut total = factorial(sorted.len());
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total /= factorial(run);
            run = 1;
        }
    }
    total / factorial(run)
}

pub(crate) fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Lexicographic successor; false when `word` was the last permutation.
pub(crate) fn next_permutation(word: &mut [usize]) -> bool {
    if word.len() < 2 {
        return false;
    }
    let mut i = word.len() - 1;
    while i > 0 && word[i - 1] >= word[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = word.len() - 1;
    while word[j] <= word[i - 1] {
        j -= 1;
    }
    word.swap(i - 1, j);
    word[i..].reverse();
    true
}

/// Inverse of [`ConjugateForm::to_tensor`].
pub fn tensor_to_form(g: &CTensor, n: usize) -> Result<ConjugateForm> {
    if !g.is_conjugate_super_symmetric(n, g.default_tol())? {
        return Err(Error::NotConjugateSuperSymmetric);
    }
    let d = g.order();
    let mut map: BTreeMap<FormKey, Complex64> = BTreeMap::new();
    for idx in MultiIndex::new(g.dims()) {
        if idx.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        let v = g.get0(&idx);
        if v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let a = v * distinct_permutations(&idx) as f64;
        let i: Vec<usize> = idx.iter().filter(|&&t| t < n).map(|&t| t + 1).collect();
        let j: Vec<usize> = idx.iter().filter(|&&t| t >= n).map(|&t| t + 1 - n).collect();
        map.insert((i, j), a);
    }
    // pair exactly: the lower key of each pair is authoritative
    let mut out = BTreeMap::new();
    for (key, &a) in &map {
        let mk = mirror(key);
        if mk == *key {
            out.insert(key.clone(), Complex64::new(a.re, 0.0));
        } else if *key < mk {
            out.insert(key.clone(), a);
            out.insert(mk, a.conj());
        } else if !map.contains_key(&mk) {
            out.insert(mk, a.conj());
            out.insert(key.clone(), a);
        }
    }
    out.retain(|_, a| *a != Complex64::new(0.0, 0.0));
    Ok(ConjugateForm::from_map(n, d, out))
}

/// `g(x) = G((x̄; x), …, (x̄; x))` as a real number.
pub fn eval_conjugate_tensor(g: &CTensor, x: &[Complex64]) -> Result<f64> {
    let n = x.len();
    if g.dims().iter().any(|&k| k != 2 * n) {
        return Err(Error::Dimension {
            slot: 1,
            expected: g.dims()[0],
            found: 2 * n,
        });
    }
    real_part_checked(eval_conjugate_tensor_complex(g, x))
}

pub(crate) fn eval_conjugate_tensor_complex(g: &CTensor, x: &[Complex64]) -> Complex64 {
    let s = CVector::from(x.to_vec()).stacked_conj();
    let args = vec![s.0; g.order()];
    g.eval_multilinear_unchecked(&args)
}

/// JSON layout: `{"n":int,"d":int,"terms":[{"conj":[..],"plain":[..],"re":f,"im":f}],"convex":bool?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormJson {
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub terms: Vec<FormTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convex: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormTerm {
    #[serde(default)]
    pub conj: Vec<usize>,
    #[serde(default)]
    pub plain: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Serialize for ConjugateForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConjugateForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let json = FormJson::deserialize(d)?;
        ConjugateForm::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// `Σ conj(x_i)·x_i = ‖x‖₂²`.
pub fn squared_norm_form(n: usize) -> ConjugateForm {
    let terms = (1..=n).map(|i| ((vec![i], vec![i]), Complex64::new(1.0, 0.0)));
    ConjugateForm::from_coefficients(n, 2, terms).expect("paired by construction")
}

/// `xᴴQx` for a Hermitian `Q` given as rows.
pub fn hermitian_quadratic(q: &[Vec<Complex64>]) -> Result<ConjugateForm> {
    let n = q.len();
    let mut terms = Vec::with_capacity(n * n);
    for (i, row) in q.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Shape("Hermitian matrix must be square".into()));
        }
        for (j, &a) in row.iter().enumerate() {
            terms.push(((vec![i + 1], vec![j + 1]), a));
        }
    }
    ConjugateForm::projected(n, 2, terms)
}
