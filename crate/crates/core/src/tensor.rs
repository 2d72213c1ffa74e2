//! Dense complex tensors and their multilinear forms.
//!
//! Entries are stored row-major over the index tuple. Public indexing is
//! 1-based (`i_k ∈ 1..=n_k`); internal offsets are 0-based.

use std::collections::BTreeMap;
use std::ops::{Deref, DerefMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A complex vector, one slot argument of a multilinear form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CVector(pub Vec<Complex64>);

impl CVector {
    pub fn zeros(dim: usize) -> Self {
        CVector(vec![Complex64::new(0.0, 0.0); dim])
    }

    pub fn from_real(values: &[f64]) -> Self {
        values.iter().map(|&r| Complex64::new(r, 0.0)).collect()
    }

    /// The `i`-th standard basis vector (1-based).
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i - 1] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).sum()
    }

    pub fn conj(&self) -> Self {
        self.0.iter().map(|z| z.conj()).collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.0.iter().map(|z| z * s).collect()
    }

    /// Stacks `(conj(x); x)`, the argument convention of conjugate tensors.
    pub fn stacked_conj(&self) -> Self {
        self.0
            .iter()
            .map(|z| z.conj())
            .chain(self.0.iter().copied())
            .collect()
    }

    /// Stacks `(self; other)`.
    pub fn stack(&self, other: &CVector) -> Self {
        self.0.iter().chain(other.0.iter()).copied().collect()
    }

    /// Bilinear dot product `Σ a_i b_i` (no conjugation).
    pub fn dot(&self, other: &CVector) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }
}

impl Deref for CVector {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for CVector {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

impl AsRef<[Complex64]> for CVector {
    fn as_ref(&self) -> &[Complex64] {
        &self.0
    }
}

impl From<Vec<Complex64>> for CVector {
    fn from(v: Vec<Complex64>) -> Self {
        CVector(v)
    }
}

impl FromIterator<Complex64> for CVector {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        CVector(iter.into_iter().collect())
    }
}

/// Dense `d`-th order complex tensor over `n_1 × … × n_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl CTensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let len = dims.iter().product();
        Ok(CTensor {
            dims: dims.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); len],
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<Complex64>) -> Result<Self> {
        validate_dims(dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::Shape(format!(
                "{} entries for dims {:?} (expected {})",
                data.len(),
                dims,
                len
            )));
        }
        Ok(CTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Builds a matrix from rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n1 = rows.len();
        let n2 = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n2) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(&[n1, n2], rows.concat())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Row-major offset of a 0-based index tuple.
    pub(crate) fn offset0(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.order() {
            return Err(Error::Shape(format!(
                "index of length {} for order-{} tensor",
                idx.len(),
                self.order()
            )));
        }
        for (&i, &n) in idx.iter().zip(&self.dims) {
            if i == 0 || i > n {
                return Err(Error::Index { index: i, bound: n });
            }
        }
        Ok(())
    }

    /// Entry at a 1-based index tuple.
    pub fn get(&self, idx: &[usize]) -> Result<Complex64> {
        self.check_index(idx)?;
        let zero_based: Vec<usize> = idx.iter().map(|i| i - 1).collect();
        Ok(self.data[self.offset0(&zero_based)])
    }

    /// Sets the entry at a 1-based index tuple.
    pub fn set(&mut self, idx: &[usize], value: Complex64) -> Result<()> {
        self.check_index(idx)?;
        let zero_based: Vec<usize> = idx.iter().map(|i| i - 1).collect();
        let off = self.offset0(&zero_based);
        self.data[off] = value;
        Ok(())
    }

    pub(crate) fn get0(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset0(idx)]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn scale(&self, s: Complex64) -> CTensor {
        CTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self + s·other`, shapes must agree.
    pub fn add_scaled(&self, other: &CTensor, s: Complex64) -> Result<CTensor> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "cannot add tensors with dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(CTensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b * s)
                .collect(),
        })
    }

    fn check_slot_vector(&self, slot: usize, v: &[Complex64]) -> Result<()> {
        if v.len() != self.dims[slot] {
            return Err(Error::Dimension {
                slot: slot + 1,
                expected: self.dims[slot],
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Contracts the first slot against `v`. Caller guarantees the length.
    pub(crate) fn contract_first_unchecked(&self, v: &[Complex64]) -> CTensor {
        let n = self.dims[0];
        let inner = self.data.len() / n;
        let mut out = vec![Complex64::new(0.0, 0.0); inner];
        for (j, &vj) in v.iter().enumerate() {
            let block = &self.data[j * inner..(j + 1) * inner];
            for (o, &b) in out.iter_mut().zip(block) {
                *o += b * vj;
            }
        }
        let dims = if self.dims.len() == 1 {
            vec![1]
        } else {
            self.dims[1..].to_vec()
        };
        CTensor { dims, data: out }
    }

    /// Contracts the last slot against `v`. Caller guarantees the length.
    pub(crate) fn contract_last_unchecked(&self, v: &[Complex64]) -> CTensor {
        let n = *self.dims.last().expect("order >= 1");
        let outer = self.data.len() / n;
        let out: Vec<Complex64> = (0..outer)
            .map(|o| {
                self.data[o * n..(o + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let dims = if self.dims.len() == 1 {
            vec![1]
        } else {
            self.dims[..self.dims.len() - 1].to_vec()
        };
        CTensor { dims, data: out }
    }

    /// Contracts a single 0-based slot.
    fn contract_slot0(&self, slot: usize, v: &[Complex64]) -> CTensor {
        let outer: usize = self.dims[..slot].iter().product();
        let mid = self.dims[slot];
        let inner: usize = self.dims[slot + 1..].iter().product();
        let mut out = vec![Complex64::new(0.0, 0.0); outer * inner];
        for o in 0..outer {
            for (j, &vj) in v.iter().enumerate() {
                let base = (o * mid + j) * inner;
                let row = &self.data[base..base + inner];
                for (dst, &a) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *dst += a * vj;
                }
            }
        }
        let mut dims: Vec<usize> = self.dims.clone();
        dims.remove(slot);
        if dims.is_empty() {
            dims.push(1);
        }
        CTensor { dims, data: out }
    }

    /// Sums the given (1-based) slots against fixed vectors.
    ///
    /// The result has order `d - |fixed|`; fixing every slot yields a
    /// one-element tensor holding the multilinear value.
    pub fn contract(&self, fixed: &BTreeMap<usize, CVector>) -> Result<CTensor> {
        for (&slot, v) in fixed {
            if slot == 0 || slot > self.order() {
                return Err(Error::Index {
                    index: slot,
                    bound: self.order(),
                });
            }
            self.check_slot_vector(slot - 1, v)?;
        }
        let mut cur = self.clone();
        let mut remaining_order = self.order();
        // descending so earlier slot numbers stay valid
        for (&slot, v) in fixed.iter().rev() {
            if remaining_order == 1 {
                cur = cur.contract_first_unchecked(v);
            } else {
                cur = cur.contract_slot0(slot - 1, v);
            }
            remaining_order -= 1;
        }
        Ok(cur)
    }

    /// `F(x¹, …, x^d) = Σ F_{i₁…i_d} x¹_{i₁} ⋯ x^d_{i_d}`.
    pub fn eval_multilinear(&self, xs: &[CVector]) -> Result<Complex64> {
        if xs.len() != self.order() {
            return Err(Error::Shape(format!(
                "{} arguments for order-{} tensor",
                xs.len(),
                self.order()
            )));
        }
        for (k, x) in xs.iter().enumerate() {
            self.check_slot_vector(k, x)?;
        }
        Ok(self.eval_multilinear_unchecked(xs))
    }

    pub(crate) fn eval_multilinear_unchecked<V: AsRef<[Complex64]>>(&self, xs: &[V]) -> Complex64 {
        let mut cur = self.contract_last_unchecked(xs[xs.len() - 1].as_ref());
        for x in xs[..xs.len() - 1].iter().rev() {
            cur = cur.contract_last_unchecked(x.as_ref());
        }
        cur.data[0]
    }

    /// Contracts every slot except `keep` (0-based), returning a vector.
    pub(crate) fn contract_all_but<V: AsRef<[Complex64]>>(&self, keep: usize, xs: &[V]) -> Vec<Complex64> {
        let d = self.order();
        if d == 1 {
            return self.data.clone();
        }
        let mut cur: Option<CTensor> = None;
        for k in (keep + 1..d).rev() {
            let t = cur.as_ref().unwrap_or(self);
            cur = Some(t.contract_last_unchecked(xs[k].as_ref()));
        }
        for x in xs.iter().take(keep) {
            let t = cur.as_ref().unwrap_or(self);
            cur = Some(t.contract_first_unchecked(x.as_ref()));
        }
        cur.expect("d >= 2").data
    }

    /// Reorders slots: output slot `k` is input slot `perm[k]` (0-based).
    pub fn permute_slots(&self, perm: &[usize]) -> Result<CTensor> {
        let d = self.order();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Shape(format!("invalid slot permutation {perm:?}")));
        }
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut out = CTensor::zeros(&dims)?;
        let mut src = vec![0; d];
        for (off, idx) in MultiIndex::new(&dims).enumerate() {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            out.data[off] = self.get0(&src);
        }
        Ok(out)
    }

    pub fn is_cubical(&self) -> bool {
        self.dims.windows(2).all(|w| w[0] == w[1])
    }

    /// Averages entries over all permutations of their indices.
    pub fn symmetrize(&self) -> Result<CTensor> {
        if !self.is_cubical() {
            return Err(Error::Shape(format!(
                "symmetrize needs equal dims, got {:?}",
                self.dims
            )));
        }
        let d = self.order();
        let perms = permutations(d);
        let scale = 1.0 / perms.len() as f64;
        let mut out = CTensor::zeros(&self.dims)?;
        let mut permuted = vec![0; d];
        for (off, idx) in MultiIndex::new(&self.dims).enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in &perms {
                for (k, &pk) in p.iter().enumerate() {
                    permuted[k] = idx[pk];
                }
                acc += self.get0(&permuted);
            }
            out.data[off] = acc * scale;
        }
        Ok(out)
    }

    /// Default tolerance for symmetry predicates: `1e-9 · max|entry|`.
    pub fn default_tol(&self) -> f64 {
        1e-9 * self.max_abs()
    }

    /// True when every entry equals the entry at its sorted index within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_cubical() {
            return false;
        }
        let mut sorted = vec![0; self.order()];
        MultiIndex::new(&self.dims).enumerate().all(|(off, idx)| {
            sorted.copy_from_slice(&idx);
            sorted.sort_unstable();
            (self.data[off] - self.get0(&sorted)).norm() <= tol
        })
    }

    /// Tests both conditions of conjugate super-symmetry for a `(2n)^d` tensor:
    /// full symmetry, and `G_i = conj(G_j)` whenever every `|i_k − j_k| = n`.
    pub fn is_conjugate_super_symmetric(&self, n: usize, tol: f64) -> Result<bool> {
        if n == 0 || self.dims.iter().any(|&k| k != 2 * n) {
            return Err(Error::Shape(format!(
                "expected every dim equal to 2n = {}, got {:?}",
                2 * n,
                self.dims
            )));
        }
        if !self.is_symmetric(tol) {
            return Ok(false);
        }
        let mut partner = vec![0; self.order()];
        Ok(MultiIndex::new(&self.dims).enumerate().all(|(off, idx)| {
            for (p, &i) in partner.iter_mut().zip(&idx) {
                *p = if i < n { i + n } else { i - n };
            }
            (self.data[off] - self.get0(&partner).conj()).norm() <= tol
        }))
    }

    pub fn to_json(&self) -> TensorJson {
        let entries = MultiIndex::new(&self.dims)
            .zip(&self.data)
            .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
            .map(|(idx, z)| TensorEntry {
                idx: idx.iter().map(|i| i + 1).collect(),
                re: z.re,
                im: z.im,
            })
            .collect();
        TensorJson {
            dims: self.dims.clone(),
            entries,
        }
    }

    pub fn from_json(json: &TensorJson) -> Result<Self> {
        let mut t = CTensor::zeros(&json.dims)?;
        let mut seen = std::collections::HashSet::new();
        for e in &json.entries {
            t.check_index(&e.idx)?;
            if !seen.insert(e.idx.clone()) {
                return Err(Error::DuplicateIndex(e.idx.clone()));
            }
            t.set(&e.idx, Complex64::new(e.re, e.im))?;
        }
        Ok(t)
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::Shape("tensor order must be at least 1".into()));
    }
    if dims.iter().any(|&n| n == 0) {
        return Err(Error::Shape(format!("dims must be positive, got {dims:?}")));
    }
    Ok(())
}

/// Sparse JSON layout: `{"dims":[...], "entries":[{"idx":[...],"re":f,"im":f}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub entries: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub idx: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Serialize for CTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let json = TensorJson::deserialize(d)?;
        CTensor::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// Row-major iterator over 0-based index tuples.
#[derive(Debug, Clone)]
pub struct MultiIndex {
    dims: Vec<usize>,
    cur: Vec<usize>,
    done: bool,
}

impl MultiIndex {
    pub fn new(dims: &[usize]) -> Self {
        MultiIndex {
            dims: dims.to_vec(),
            cur: vec![0; dims.len()],
            done: dims.iter().any(|&n| n == 0),
        }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let mut k = self.dims.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.cur[k] += 1;
            if self.cur[k] < self.dims[k] {
                break;
            }
            self.cur[k] = 0;
        }
        Some(out)
    }
}

/// All permutations of `0..d` (Heap's algorithm).
pub(crate) fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..d).collect();
    let mut out = Vec::new();
    heap(d, &mut a, &mut out);
    out
}
