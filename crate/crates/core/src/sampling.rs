//! Feasible sets, seeded random streams, moment formulas and tail bounds.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::CVector;

/// Order of the root-of-unity set: `Ω_m` for finite `m`, or the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RootOrder {
    Finite(u32),
    Infinite,
}

impl RootOrder {
    pub fn finite(self) -> Option<u32> {
        match self {
            RootOrder::Finite(m) => Some(m),
            RootOrder::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RootOrder::Infinite)
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            RootOrder::Finite(m) if m < 3 => Err(Error::Constraint(format!("root order m = {m} must be at least 3"))),
            _ => Ok(self),
        }
    }
}

impl fmt::Display for RootOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RootOrder::Finite(m) => write!(f, "{m}"),
            RootOrder::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for RootOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(RootOrder::Infinite),
            other => other
                .parse::<u32>()
                .map(RootOrder::Finite)
                .map_err(|_| Error::Parameter(format!("cannot parse root order {s:?}"))),
        }
    }
}

impl Serialize for RootOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RootOrder::Finite(m) => s.serialize_u32(*m),
            RootOrder::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for RootOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(m) => Ok(RootOrder::Finite(m)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    RootsOfUnity(u32),
    UnitCircle,
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub domain: Domain,
    pub n: usize,
}

impl ConstraintSet {
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        if let Domain::RootsOfUnity(m) = domain {
            RootOrder::Finite(m).validate()?;
        }
        Ok(ConstraintSet { domain, n })
    }

    pub fn from_order(order: RootOrder, n: usize) -> Result<Self> {
        match order {
            RootOrder::Finite(m) => Self::new(Domain::RootsOfUnity(m), n),
            RootOrder::Infinite => Self::new(Domain::UnitCircle, n),
        }
    }

    /// Exact feasibility: root-table membership, unit modulus or unit norm.
    pub fn contains(&self, x: &[Complex64], tol: f64) -> bool {
        if x.len() != self.n {
            return false;
        }
        match self.domain {
            Domain::RootsOfUnity(m) => {
                let table = RootTable::new(m);
                x.iter().all(|z| table.nearest(*z).1 <= tol)
            }
            Domain::UnitCircle => x.iter().all(|z| (z.norm() - 1.0).abs() <= tol),
            Domain::Sphere => (x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs() <= tol,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        match self.domain {
            Domain::RootsOfUnity(m) => RootTable::new(m).sample(self.n, rng),
            Domain::UnitCircle => sample_circle(self.n, rng),
            Domain::Sphere => sample_sphere(self.n, rng),
        }
    }
}

/// Precomputed `ω_m^k`, k = 0..m. Entries mirror across the real axis
/// exactly, and coordinates below 1e-15 are snapped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RootTable {
    roots: Vec<Complex64>,
}

impl RootTable {
    pub fn new(m: u32) -> Self {
        let m = m as usize;
        let mut roots = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..=m / 2 {
            let theta = 2.0 * PI * k as f64 / m as f64;
            let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
            roots[k] = Complex64::new(snap(theta.cos()), snap(theta.sin()));
            if 2 * k == m {
                roots[k] = Complex64::new(-1.0, 0.0);
            }
        }
        for k in m / 2 + 1..m {
            roots[k] = roots[m - k].conj();
        }
        RootTable { roots }
    }

    pub fn m(&self) -> usize {
        self.roots.len()
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.roots[k % self.roots.len()]
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CVector {
        let m = self.roots.len();
        (0..n).map(|_| self.roots[rng.gen_range(0..m)]).collect()
    }

    /// Index and distance of the table entry closest to `z`.
    pub fn nearest(&self, z: Complex64) -> (usize, f64) {
        self.roots
            .iter()
            .enumerate()
            .map(|(k, r)| (k, (r - z).norm()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }
}

/// Seeded source of independent, reproducible substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource { seed }
    }

    /// Stream `k` of this seed; the same `(seed, k)` always gives the same draws.
    pub fn substream(&self, k: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        rng
    }

    /// A child source whose streams do not overlap with this one's.
    pub fn derive(&self, tag: u64) -> RandomSource {
        let mut rng = self.substream(u64::MAX - tag);
        RandomSource { seed: rng.gen() }
    }
}

pub fn sample_roots<R: Rng + ?Sized>(m: u32, n: usize, rng: &mut R) -> Result<CVector> {
    RootOrder::Finite(m).validate()?;
    Ok(RootTable::new(m).sample(n, rng))
}

pub fn sample_circle<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    (0..n)
        .map(|_| Complex64::from_polar(1.0, rng.gen::<f64>() * 2.0 * PI))
        .collect()
}

/// Uniform on the complex unit sphere via a normalized complex Gaussian.
pub fn sample_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    loop {
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Draws from `Ω_m^n` (finite order) or `Ω_∞^n`.
pub fn sample_order<R: Rng + ?Sized>(order: RootOrder, n: usize, rng: &mut R) -> Result<CVector> {
    match order {
        RootOrder::Finite(m) => sample_roots(m, n, rng),
        RootOrder::Infinite => Ok(sample_circle(n, rng)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub e1: f64,
    pub e2: f64,
    pub e4: f64,
}

/// Moments of `η = Re(aᵀξ)` with `ξ` uniform on `Ω_m^n`.
pub fn moments_formula(a: &[Complex64], order: RootOrder) -> Moments {
    let sq: Vec<f64> = a.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = sq.iter().sum();
    let fourth: f64 = sq.iter().map(|s| s * s).sum();
    // Σ_{i<j} |a_i|²|a_j|² = ((Σ)² − Σ squares)/2
    let cross = (total * total - fourth) / 2.0;
    let mut e4 = 0.375 * fourth + 1.5 * cross;
    if order == RootOrder::Finite(4) {
        e4 += a.iter().map(|z| z.powu(4).re).sum::<f64>() / 8.0;
    }
    Moments {
        e1: 0.0,
        e2: total / 2.0,
        e4,
    }
}

/// Smallest divisor `k ≥ 2` of `m`; 2 for the circle.
pub fn c2(order: RootOrder) -> u32 {
    match order {
        RootOrder::Infinite => 2,
        RootOrder::Finite(m) => (2..=m).find(|k| m % k == 0).unwrap_or(m),
    }
}

/// Bilinear base-case constant `0.7118·cos²(π/m)`.
pub fn c4(order: RootOrder) -> f64 {
    match order {
        RootOrder::Infinite => 0.7118,
        RootOrder::Finite(m) => 0.7118 * (PI / m as f64).cos().powi(2),
    }
}

/// Normal approximation constant, upper end of its admissible range.
pub const BERRY_ESSEEN_C0: f64 = 0.56;

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0 / 16.0) {
        return Err(Error::Parameter(format!("delta = {delta} must lie in (0, 1/16)")));
    }
    Ok(())
}

/// `ln n₁(δ)`: threshold beyond which `8δ ln n / n^{1/2−8δ} ≤ 1/2` holds for good.
pub fn n1_log(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let rate = 0.5 - 8.0 * delta;
    let f = |l: f64| 8.0 * delta * l * (-rate * l).exp();
    let peak = 1.0 / rate;
    if f(peak) <= 0.5 {
        return Ok(0.0);
    }
    let mut lo = peak;
    let mut hi = 2.0 * peak;
    while f(hi) > 0.5 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.exp().ceil().ln())
}

/// `ln n₂(δ)`: both defining conditions are monotone in `n`, so the threshold
/// is the larger of two closed-form roots.
pub fn n2_log(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    // (√(8δL)+1)²/2 ≤ 5δL  ⇔  2δs² − 2√(8δ)s − 1 ≥ 0 with s = √L
    let s = (2.0 * (8.0 * delta).sqrt() + (40.0 * delta).sqrt()) / (4.0 * delta);
    let la = s * s;
    // 1/√(2π) − 8√2·c₀·n^{−3δ} ≥ 1/3
    let gap = 1.0 / (2.0 * PI).sqrt() - 1.0 / 3.0;
    let lb = (8.0 * 2f64.sqrt() * BERRY_ESSEEN_C0 / gap).ln() / (3.0 * delta);
    let l = la.max(lb);
    Ok(l.exp().ceil().ln())
}

/// `n₀(δ) = max(n₁, n₂)` as a float (it may be astronomically large).
pub fn n0(delta: f64) -> Result<f64> {
    Ok(n1_log(delta)?.max(n2_log(delta)?).exp().round().max(1.0))
}

/// `ln c₁(δ) = −ln 36 − n₀(δ)·ln 5`.
pub fn c1_log(delta: f64) -> Result<f64> {
    Ok(-(36f64.ln()) - n0(delta)? * 5f64.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub empirical_prob: f64,
    pub theoretical_bound_log: f64,
    pub samples: u64,
    pub threshold: f64,
    pub std_err: f64,
    pub violation: bool,
    /// False when the bound is only known up to a multiplicative constant.
    pub bound_constant_known: bool,
}

const MC_CHUNK: u64 = 1 << 14;
const MIN_SAMPLES: u64 = 10_000;

/// Counts draws with `Re(aᵀξ) ≥ threshold`, chunked over substreams.
fn count_hits<F>(samples: u64, src: &RandomSource, draw: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = src.substream(c);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            (0..len).filter(|_| draw(&mut rng) >= 0.0).count() as u64
        })
        .sum()
}

fn binomial_sigma(p: f64, samples: u64) -> f64 {
    (p * (1.0 - p) / samples as f64).sqrt()
}

/// Monte Carlo check of the `Ω_m` tail bound for `Re(aᵀξ)`.
pub fn tail_bound_roots(
    a: &[Complex64],
    order: RootOrder,
    delta: f64,
    samples: u64,
    src: &RandomSource,
) -> Result<TailBoundReport> {
    check_delta(delta)?;
    order.validate()?;
    if samples < MIN_SAMPLES {
        return Err(Error::Parameter(format!("at least {MIN_SAMPLES} samples required")));
    }
    let n = a.len().max(1) as f64;
    let l1: f64 = a.iter().map(|z| z.norm()).sum();
    let threshold = (delta * n.ln() / n).sqrt() * l1;
    let table = order.finite().map(RootTable::new);
    let hits = count_hits(samples, src, |rng| {
        let eta: f64 = match &table {
            Some(t) => a.iter().map(|z| (z * t.get(rng.gen_range(0..t.m()))).re).sum(),
            None => a
                .iter()
                .map(|z| (z * Complex64::from_polar(1.0, rng.gen::<f64>() * 2.0 * PI)).re)
                .sum(),
        };
        eta - threshold
    });
    let p = hits as f64 / samples as f64;
    let sigma = binomial_sigma(p, samples);
    let bound_log = c1_log(delta)? - (c2(order) as f64).ln() - 5.0 * delta * n.ln();
    Ok(TailBoundReport {
        empirical_prob: p,
        theoretical_bound_log: bound_log,
        samples,
        threshold,
        std_err: sigma,
        violation: p + 3.0 * sigma < bound_log.exp(),
        bound_constant_known: true,
    })
}

/// Monte Carlo of the sphere tail event; the bound is reported as its shape
/// `−2γ ln n − ½ ln ln n` because its constant is not explicit.
pub fn tail_bound_sphere(a: &[Complex64], gamma: f64, samples: u64, src: &RandomSource) -> Result<TailBoundReport> {
    let n = a.len().max(1);
    let nf = n as f64;
    if !(gamma > 0.0 && gamma * nf.ln() < nf) {
        return Err(Error::Parameter(format!("gamma = {gamma} must satisfy 0 < γ ln n < n (n = {n})")));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::Parameter(format!("at least {MIN_SAMPLES} samples required")));
    }
    let l2 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let threshold = (gamma * nf.ln() / nf).sqrt() * l2;
    let hits = count_hits(samples, src, |rng| {
        let xi = sample_sphere(n, rng);
        a.iter().zip(xi.iter()).map(|(u, v)| (u * v).re).sum::<f64>() - threshold
    });
    let p = hits as f64 / samples as f64;
    let shape = if n >= 2 {
        -2.0 * gamma * nf.ln() - 0.5 * nf.ln().ln()
    } else {
        f64::NAN
    };
    Ok(TailBoundReport {
        empirical_prob: p,
        theoretical_bound_log: shape,
        samples,
        threshold,
        std_err: binomial_sigma(p, samples),
        violation: false,
        bound_constant_known: false,
    })
}
