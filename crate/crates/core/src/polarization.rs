//! Polarization vectors and exact/sampled checks of the polarization identity
//! `E[conj(∏ξ_k)·g(Σ_k conj(ξ_k x^k) + ξ_k y^k)] = d!·G((x¹;y¹), …, (x^d;y^d))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::forms::{eval_conjugate_tensor_complex, factorial};
use crate::sampling::{sample_order, RootOrder, RootTable};
use crate::tensor::{CTensor, CVector};

/// Enumeration guard on `d·ln m`.
pub const ENUMERATION_LOG_GUARD: f64 = 25.0;

fn check_inputs(xs: &[CVector], ys: &[CVector], xi: &[Complex64]) -> Result<usize> {
    let d = xs.len();
    if ys.len() != d || xi.len() != d {
        return Err(Error::Shape(format!(
            "expected {d} y-vectors and {d} phases, got {} and {}",
            ys.len(),
            xi.len()
        )));
    }
    let n = xs.first().map_or(0, |x| x.dim());
    for (k, v) in xs.iter().chain(ys).enumerate() {
        if v.dim() != n {
            return Err(Error::Dimension {
                slot: k % d.max(1) + 1,
                expected: n,
                found: v.dim(),
            });
        }
    }
    Ok(n)
}

/// `v_ξ = Σ_k conj(ξ_k x^k) + ξ_k y^k`.
pub fn build_v(xs: &[CVector], ys: &[CVector], xi: &[Complex64]) -> Result<CVector> {
    let n = check_inputs(xs, ys, xi)?;
    Ok(build_v_unchecked(n, xs, ys, xi))
}

pub(crate) fn build_v_unchecked<V: AsRef<[Complex64]>>(n: usize, xs: &[V], ys: &[V], xi: &[Complex64]) -> CVector {
    let mut v = CVector::zeros(n);
    for ((x, y), &p) in xs.iter().zip(ys).zip(xi) {
        let pc = p.conj();
        for ((out, a), b) in v.iter_mut().zip(x.as_ref()).zip(y.as_ref()) {
            *out += pc * a.conj() + p * b;
        }
    }
    v
}

/// `u_ξ = v_ξ / (2d)`.
pub fn build_u(xs: &[CVector], ys: &[CVector], xi: &[Complex64]) -> Result<CVector> {
    let v = build_v(xs, ys, xi)?;
    let scale = 1.0 / (2.0 * xs.len() as f64);
    Ok(v.iter().map(|z| z * scale).collect())
}

/// Point-in-polygon test against the regular `m`-gon spanned by `Ω_m`.
pub fn in_conv_roots(z: Complex64, m: u32) -> bool {
    let mf = m as f64;
    let bound = (PI / mf).cos() + 1e-12;
    (0..m).all(|k| {
        let normal = Complex64::from_polar(1.0, -((2 * k + 1) as f64) * PI / mf);
        (z * normal).re <= bound
    })
}

/// `conv(Ω_m)` membership for finite `m`; the closed unit disc for `m = ∞`.
pub fn in_conv_order(z: Complex64, order: RootOrder) -> bool {
    match order {
        RootOrder::Finite(m) => in_conv_roots(z, m),
        RootOrder::Infinite => z.norm() <= 1.0 + 1e-12,
    }
}

fn rhs(g: &CTensor, xs: &[CVector], ys: &[CVector]) -> Complex64 {
    let stacked: Vec<CVector> = xs.iter().zip(ys).map(|(x, y)| x.stack(y)).collect();
    g.eval_multilinear_unchecked(&stacked) * factorial(xs.len()) as f64
}

fn check_tensor(g: &CTensor, n: usize, d: usize) -> Result<()> {
    if g.order() != d || g.dims().iter().any(|&k| k != 2 * n) {
        return Err(Error::Shape(format!(
            "tensor dims {:?} do not match d = {d}, 2n = {}",
            g.dims(),
            2 * n
        )));
    }
    Ok(())
}

/// Exact left side minus right side of the identity, relative to `1 + |RHS|`.
pub fn polarization_residual(g: &CTensor, xs: &[CVector], ys: &[CVector], m: u32) -> Result<f64> {
    RootOrder::Finite(m).validate()?;
    let d = xs.len();
    let n = check_inputs(xs, ys, &vec![Complex64::new(1.0, 0.0); d])?;
    check_tensor(g, n, d)?;
    let log_count = d as f64 * (m as f64).ln();
    if log_count > ENUMERATION_LOG_GUARD {
        return Err(Error::EnumerationTooLarge {
            count: log_count.exp(),
            guard: ENUMERATION_LOG_GUARD.exp(),
        });
    }
    let table = RootTable::new(m);
    let total = (m as usize).pow(d as u32);
    let mut digits = vec![0usize; d];
    let mut xi = vec![Complex64::new(1.0, 0.0); d];
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..total {
        for (p, &k) in xi.iter_mut().zip(&digits) {
            *p = table.get(k);
        }
        let phase: Complex64 = xi.iter().map(|p| p.conj()).product();
        let v = build_v_unchecked(n, xs, ys, &xi);
        acc += phase * eval_conjugate_tensor_complex(g, &v);
        advance(&mut digits, m as usize);
    }
    let lhs = acc / total as f64;
    let r = rhs(g, xs, ys);
    Ok((lhs - r).norm() / (1.0 + r.norm()))
}

/// Odometer increment over base-`m` digits.
pub(crate) fn advance(digits: &mut [usize], m: usize) {
    for dgt in digits.iter_mut() {
        *dgt += 1;
        if *dgt < m {
            return;
        }
        *dgt = 0;
    }
}

/// Monte Carlo version of the identity; returns `|mean − RHS| / stderr`.
pub fn polarization_sample<R: Rng + ?Sized>(
    g: &CTensor,
    xs: &[CVector],
    ys: &[CVector],
    order: RootOrder,
    samples: u64,
    rng: &mut R,
) -> Result<f64> {
    order.validate()?;
    if samples < 10_000 {
        return Err(Error::Parameter("at least 10000 samples required".into()));
    }
    let d = xs.len();
    let n = check_inputs(xs, ys, &vec![Complex64::new(1.0, 0.0); d])?;
    check_tensor(g, n, d)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let xi = sample_order(order, d, rng)?;
        let phase: Complex64 = xi.iter().map(|p| p.conj()).product();
        let z = phase * eval_conjugate_tensor_complex(g, &build_v_unchecked(n, xs, ys, &xi));
        sum += z;
        sum_sq += z.norm_sqr();
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean.norm_sqr()).max(0.0) * nf / (nf - 1.0);
    let stderr = (var / nf).sqrt();
    let r = rhs(g, xs, ys);
    let diff = (mean - r).norm();
    if stderr == 0.0 {
        return Ok(if diff <= 1e-12 * (1.0 + r.norm()) { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / stderr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::ConjugateForm;
    use crate::sampling::RandomSource;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one() -> Complex64 {
        c(1., 0.)
    }

    #[test]
    fn build_u_examples() {
        let x = vec![CVector(vec![one()])];
        assert_eq!(build_u(&x, &x, &[one()]).unwrap().0, vec![one()]);
        let xs = vec![CVector(vec![one(); 3]); 2];
        let u = build_u(&xs, &xs, &[one(), one()]).unwrap();
        assert!(u.iter().all(|z| (z - one()).norm() < 1e-15));
        let zero = vec![CVector::zeros(2); 2];
        assert!(build_u(&zero, &zero, &[one(), c(0., 1.)]).unwrap().iter().all(|z| z.norm() == 0.0));
        assert!(build_u(&xs, &zero, &[one(), one()]).is_err());
    }

    #[test]
    fn v_is_scaled_u() {
        let mut rng = RandomSource::new(1).substream(0);
        let xs: Vec<CVector> = (0..3).map(|_| crate::sampling::sample_sphere(2, &mut rng)).collect();
        let ys: Vec<CVector> = (0..3).map(|_| crate::sampling::sample_sphere(2, &mut rng)).collect();
        let xi = crate::sampling::sample_circle(3, &mut rng);
        let u = build_u(&xs, &ys, &xi).unwrap();
        let v = build_v(&xs, &ys, &xi).unwrap();
        for (a, b) in u.iter().zip(v.iter()) {
            assert!((a * 6.0 - b).norm() < 1e-14);
        }
    }

    #[test]
    fn conv_hull_test() {
        assert!(in_conv_roots(c(0., 0.), 3));
        assert!(in_conv_roots(one(), 3));
        assert!(!in_conv_roots(c(0., 1.), 3));
        assert!(in_conv_roots(c(0., 1.), 4));
        assert!(in_conv_roots(c(0.5, 0.5), 4));
        assert!(!in_conv_roots(c(0.51, 0.5), 4));
        assert!(in_conv_order(c(0.6, 0.8), RootOrder::Infinite));
    }

    #[test]
    fn zero_inputs_give_zero_residual() {
        let g = ConjugateForm::from_coefficients(2, 2, vec![((vec![1], vec![2]), one()), ((vec![2], vec![1]), one())]).unwrap().to_tensor();
        let zero = vec![CVector::zeros(2); 2];
        assert_eq!(polarization_residual(&g, &zero, &zero, 3).unwrap(), 0.0);
    }

    #[test]
    fn degree_one_identity() {
        let cc = c(0.7, -1.3);
        let g = ConjugateForm::from_coefficients(2, 1, vec![((vec![1], vec![]), cc), ((vec![], vec![1]), cc.conj())]).unwrap().to_tensor();
        let xs = vec![CVector(vec![c(0.2, 0.5), c(-1., 0.3)])];
        let ys = vec![CVector(vec![c(1.1, 0.), c(0.4, -0.4)])];
        for m in 3..7 {
            assert!(polarization_residual(&g, &xs, &ys, m).unwrap() <= 1e-12);
        }
        let mut rng = RandomSource::new(2).substream(0);
        let dev = polarization_sample(&g, &xs, &ys, RootOrder::Infinite, 100_000, &mut rng).unwrap();
        assert!(dev < 4.0);
    }

    #[test]
    fn zero_tensor_sample() {
        let g = CTensor::zeros(&[4, 4]).unwrap();
        let xs = vec![CVector(vec![one(), one()]); 2];
        let mut rng = RandomSource::new(2).substream(0);
        assert_eq!(polarization_sample(&g, &xs, &xs, RootOrder::Infinite, 10_000, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn guard_fires() {
        let g = CTensor::zeros(&[2; 5]).unwrap();
        let xs = vec![CVector::zeros(1); 5];
        assert!(matches!(polarization_residual(&g, &xs, &xs, 200), Err(Error::EnumerationTooLarge { .. })));
    }
}
