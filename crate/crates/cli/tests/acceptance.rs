//! Acceptance battery. Prints one line per criterion and exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use conjopt_core::experiment::{experiment_instance, passes, random_tensor, REFERENCE_TOLERANCE};
use conjopt_core::forms::FormKey;
use conjopt_core::oracle::{multistart_reference, ContinuousSet, Objective};
use conjopt_core::polarization::polarization_residual;
use conjopt_core::sampling::{moments_formula, sample_sphere, tail_bound_roots, RootTable};
use conjopt_core::*;
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    RandomSource::new(seed).substream(0)
}

fn gaussian(r: &mut ChaCha8Rng, n: usize) -> CVector {
    let mut v = sample_sphere(n, r);
    let scale = 0.5 + 2.0 * r.gen::<f64>();
    v.iter_mut().for_each(|z| *z *= scale);
    v
}

fn form(kind: InstanceKind, n: usize, d: usize, r: &mut ChaCha8Rng) -> ConjugateForm {
    match generate_instance(kind, &[], n, d, 1.0, r).expect("valid instance parameters") {
        Instance::Form(g) => g,
        Instance::Tensor(_) => unreachable!(),
    }
}

fn polarization_identity() -> Outcome {
    let start = Instant::now();
    let mut checks = 0;
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for d in 1..=4 {
            for m in 3..=6u32 {
                for k in 0..20u64 {
                    let mut r = rng(((n * 10 + d) * 10 + m as usize) as u64 * 100 + k);
                    let g = form(InstanceKind::FormGeneral, n, d, &mut r).to_tensor();
                    let xs: Vec<CVector> = (0..d).map(|_| gaussian(&mut r, n)).collect();
                    let ys: Vec<CVector> = (0..d).map(|_| gaussian(&mut r, n)).collect();
                    worst = worst.max(polarization_residual(&g, &xs, &ys, m).expect("within guard"));
                    checks += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 60.0, format!("{checks} checks, max residual {worst:.2e}, {secs:.1}s"))
}

fn moment_formulas() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for m in [3u32, 4, 5, 6, 8] {
        let table = RootTable::new(m);
        for n in 1..=3usize {
            for k in 0..50u64 {
                let mut r = rng(m as u64 * 1000 + n as u64 * 100 + k);
                let a = gaussian(&mut r, n);
                let count = (m as usize).pow(n as u32);
                let (mut e1, mut e2, mut e4) = (0.0, 0.0, 0.0);
                for idx in 0..count {
                    let mut rest = idx;
                    let mut eta = 0.0;
                    for z in a.iter() {
                        eta += (z * table.get(rest % m as usize)).re;
                        rest /= m as usize;
                    }
                    e1 += eta;
                    e2 += eta * eta;
                    e4 += eta.powi(4);
                }
                let cf = count as f64;
                let f = moments_formula(&a, RootOrder::Finite(m));
                for (got, want) in [(e1 / cf, f.e1), (e2 / cf, f.e2), (e4 / cf, f.e4)] {
                    worst = worst.max((got - want).abs() / (1.0 + want.abs()));
                }
                checks += 1;
            }
        }
    }
    outcome(worst <= 1e-12, format!("{checks} vectors, max relative error {worst:.2e}"))
}

fn tail_bound() -> Outcome {
    let start = Instant::now();
    let orders = [RootOrder::Finite(3), RootOrder::Finite(4), RootOrder::Finite(5), RootOrder::Finite(7), RootOrder::Infinite];
    let mut violations = 0;
    for k in 0..100u64 {
        let mut r = rng(7000 + k);
        let n = 2 + (k as usize % 7);
        let a = gaussian(&mut r, n);
        let rep = tail_bound_roots(&a, orders[k as usize % 5], 0.05, 1_000_000, &RandomSource::new(k)).expect("valid configuration");
        if rep.violation || rep.empirical_prob + 3.0 * rep.std_err < rep.theoretical_bound_log.exp() {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(violations == 0 && secs < 300.0, format!("100 configurations, {violations} violations, {secs:.1}s"))
}

fn example_form() -> (ConjugateForm, CTensor) {
    let c = C::new;
    let z = c(0., 0.);
    let g = ConjugateForm::from_coefficients(
        2,
        2,
        vec![
            ((vec![1, 1], vec![]), c(0., 1.)),
            ((vec![], vec![1, 1]), c(0., -1.)),
            ((vec![1], vec![1]), c(2., 0.)),
            ((vec![1], vec![2]), c(4., 0.)),
            ((vec![2], vec![1]), c(4., 0.)),
        ],
    )
    .expect("paired coefficients");
    let t = CTensor::from_rows(&[
        vec![c(0., 1.), z, c(1., 0.), c(2., 0.)],
        vec![z, z, c(2., 0.), z],
        vec![c(1., 0.), c(2., 0.), c(0., -1.), z],
        vec![c(2., 0.), z, z, z],
    ])
    .expect("square matrix");
    (g, t)
}

fn form_tensor_correspondence() -> Outcome {
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for k in 0..500u64 {
        let mut r = rng(11_000 + k);
        let n = 1 + (k as usize % 4);
        let d = 1 + (k as usize / 4 % 4);
        let g = form(InstanceKind::FormGeneral, n, d, &mut r);
        let back = tensor_to_form(&g.to_tensor(), n).expect("conjugate super-symmetric");
        let keys: Vec<&FormKey> = g.coeffs().keys().collect();
        if back.coeffs().keys().collect::<Vec<_>>() != keys {
            bad += 1;
        }
        for (key, v) in g.coeffs() {
            worst = worst.max(back.coeffs().get(key).map_or(f64::INFINITY, |w| (w - v).norm()));
        }
    }
    let (g, t) = example_form();
    let example = g.to_tensor() == t;
    outcome(
        bad == 0 && worst <= 1e-12 && example,
        format!("500 forms, {bad} key mismatches, max entry error {worst:.2e}, example matrix exact: {example}"),
    )
}

fn real_valuedness() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..1000u64 {
        let mut r = rng(13_000 + k);
        let n = 1 + (k as usize % 4);
        let d = 1 + (k as usize / 4 % 4);
        let g = form(InstanceKind::FormGeneral, n, d, &mut r);
        for _ in 0..100 {
            let x = gaussian(&mut r, n);
            let v = g.eval_complex(&x).expect("matching dimension");
            worst = worst.max(v.im.abs() / (1.0 + v.re.abs()));
        }
    }
    outcome(worst <= 1e-9, format!("100000 pairs, max scaled residue {worst:.2e}"))
}

fn multilinear_roots_ratio() -> Outcome {
    let start = Instant::now();
    let mut passed = 0;
    let mut total = 0;
    for dims in [vec![2, 2, 2], vec![3, 3, 3]] {
        for m in [3u32, 4] {
            let mut cfg = ExperimentConfig::new(Model::Lm);
            cfg.dims = dims.clone();
            cfg.m = Some(m);
            cfg.strategy = Some(BaseCaseStrategy::ExactEnumeration);
            cfg.seeds = (0..25).collect();
            cfg.oracle = true;
            let res = run_experiment(&cfg).expect("valid experiment");
            total += res.summary.certified;
            passed += res.summary.passes;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(passed >= 97 && secs < 120.0, format!("{passed}/{total} runs reach ratio·v_max, {secs:.1}s"))
}

fn top_singular_value(t: &CTensor) -> f64 {
    let (r, c) = (t.dims()[0], t.dims()[1]);
    DMatrix::from_row_slice(r, c, t.data()).singular_values().max()
}

fn sphere_multilinear() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let mut r = rng(17_000 + k);
        let dims = [1 + k as usize % 4, 2 + k as usize / 4 % 3];
        let f = random_tensor(&dims, 1.0, &mut r).expect("positive dims");
        let rep = solve_ls(&f, 1.0, 0.05, None, &RandomSource::new(k)).expect("valid instance");
        let sigma = top_singular_value(&f);
        worst = worst.max((rep.value - sigma).abs() / sigma.max(1.0));
    }
    let mut passed = 0;
    let shapes = [[2, 2, 2], [2, 3, 4], [3, 3, 3], [4, 2, 3]];
    for k in 0..100u64 {
        let mut r = rng(19_000 + k);
        let dims = shapes[k as usize % 4];
        let vs: Vec<CVector> = dims.iter().map(|&n| gaussian(&mut r, n)).collect();
        let mut data = Vec::new();
        for a in vs[0].iter() {
            for b in vs[1].iter() {
                for c in vs[2].iter() {
                    data.push(a * b * c);
                }
            }
        }
        let f = CTensor::from_vec(&dims, data).expect("matching length");
        let opt: f64 = vs.iter().map(|v| v.norm2()).product();
        let rep = solve_ls(&f, 1.0, 0.05, None, &RandomSource::new(k)).expect("valid instance");
        if rep.value >= rep.ratio_formula_value * opt - 1e-12 * opt {
            passed += 1;
        }
    }
    outcome(worst <= 1e-8 && passed >= 97, format!("d=2 max relative gap {worst:.2e}; d=3 rank-1 {passed}/100 reach ratio·optimum"))
}

fn interior_point(order: RootOrder, n: usize, r: &mut ChaCha8Rng) -> Vec<C> {
    (0..n)
        .map(|_| match order {
            RootOrder::Finite(m) => {
                let t = RootTable::new(m);
                let w: Vec<f64> = (0..m).map(|_| r.gen::<f64>()).collect();
                let s: f64 = w.iter().sum();
                w.iter().enumerate().map(|(k, wk)| t.get(k) * (wk / s)).sum()
            }
            RootOrder::Infinite => C::from_polar(r.gen::<f64>(), r.gen::<f64>() * std::f64::consts::TAU),
        })
        .collect()
}

fn vertex_rounding() -> Outcome {
    let orders = [RootOrder::Finite(3), RootOrder::Finite(4), RootOrder::Infinite];
    let mut bad = 0;
    for k in 0..1000u64 {
        let mut r = rng(23_000 + k);
        let n = 2 + k as usize % 3;
        let d = 1 + (k as usize / 3) % n.min(3);
        let g = form(InstanceKind::FormSquarefree, n, d, &mut r);
        let order = orders[k as usize % 3];
        let x = interior_point(order, n, &mut r);
        let v = g.eval(&x).expect("matching dimension");
        let up = round_to_vertices(&g, &x, order, Direction::Up).expect("square-free, inside hull");
        let down = round_to_vertices(&g, &x, order, Direction::Down).expect("square-free, inside hull");
        let tol = 1e-10 * (1.0 + v.abs());
        let (vu, vd) = (g.eval(&up).expect("dim"), g.eval(&down).expect("dim"));
        if vd > v + tol || vu < v - tol {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("1000 instances, {bad} bracketing failures"))
}

fn convex_forms() -> Outcome {
    let mut lowest = f64::INFINITY;
    for k in 0..1000u64 {
        let mut r = rng(29_000 + k);
        let n = 2 + k as usize % 3;
        let d = 2 * (1 + k as usize / 3 % 2);
        let g = form(InstanceKind::FormConvex, n, d, &mut r);
        for _ in 0..100 {
            lowest = lowest.min(g.eval(&gaussian(&mut r, n)).expect("dim"));
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..200u64 {
        let mut r = rng(31_000 + k);
        let n = 2 + k as usize % 2;
        let g = form(InstanceKind::FormConvex, n, 4, &mut r);
        let x = gaussian(&mut r, n);
        let y = gaussian(&mut r, n);
        let h = 1e-4;
        let at = |t: f64| -> f64 {
            let p: Vec<C> = x.iter().zip(y.iter()).map(|(a, b)| a + b * t).collect();
            g.eval(&p).expect("dim")
        };
        let fd = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
        let exact = hessian_sample(&g, &x, &y).expect("dim");
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    outcome(
        lowest >= -1e-10 && worst <= 1e-5,
        format!("min value {lowest:.2e} over 100000 points; Hessian vs finite differences max relative gap {worst:.2e}"),
    )
}

fn squarefree_relative() -> Outcome {
    let mut failures = 0;
    let mut total = 0;
    let combos = [(2, 2, 3), (2, 2, 4), (3, 2, 3), (3, 2, 4), (3, 3, 3), (3, 3, 4)];
    for (i, &(n, d, m)) in combos.iter().enumerate() {
        let mut cfg = ExperimentConfig::new(Model::Gm);
        cfg.n = n;
        cfg.d = d;
        cfg.m = Some(m);
        cfg.kind = Some(InstanceKind::FormSquarefree);
        let count = if i < 4 { 17 } else { 16 };
        cfg.seeds = (0..count).map(|s| 1000 * i as u64 + s).collect();
        cfg.oracle = true;
        let res = run_experiment(&cfg).expect("valid experiment");
        for rec in &res.rows {
            let row = &rec.row;
            let (hi, lo) = (row.vmax.expect("oracle"), row.vmin.expect("oracle"));
            total += 1;
            if !passes(row.value, hi, lo, row.ratio, true, 1e-9) {
                failures += 1;
            }
        }
    }
    outcome(failures == 0 && total == 100, format!("{total} instances, {failures} relative-inequality failures"))
}

fn sphere_forms() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for d in [3usize, 4] {
        let mut cfg = ExperimentConfig::new(Model::Gs);
        cfg.n = 2;
        cfg.d = d;
        cfg.kind = Some(InstanceKind::FormGeneral);
        cfg.seeds = (0..100).collect();
        cfg.oracle = true;
        cfg.oracle_starts = 10_000;
        let res = run_experiment(&cfg).expect("valid experiment");
        let mut real = 0;
        let mut oracle_only = 0;
        for rec in res.rows.iter().filter(|r| r.row.pass == Some(false)) {
            let Instance::Form(g) = experiment_instance(&cfg, rec.row.seed).expect("instance") else { unreachable!() };
            let refined = multistart_reference(Objective::Form(&g), ContinuousSet::Sphere, 100_000, &RandomSource::new(rec.row.seed).derive(0x5eed))
                .expect("valid reference");
            let hi = refined.v_max.max(rec.row.value);
            let lo = refined.v_min.min(rec.row.value);
            if passes(rec.row.value, hi, lo, rec.row.ratio, rec.relative, REFERENCE_TOLERANCE) {
                oracle_only += 1;
            } else {
                real += 1;
            }
        }
        ok &= real == 0;
        let kind = if d % 2 == 1 { "absolute" } else { "relative" };
        lines.push(format!(
            "d={d} {kind}: {}/{} pass, {oracle_only} reference-only failures, {real} confirmed",
            res.summary.passes, res.summary.certified
        ));
    }
    outcome(ok, lines.join("; "))
}

fn run_cli(bin: &str, threads: usize, args: &[&str]) -> Vec<u8> {
    let out = Command::new(bin)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .output()
        .expect("spawn conjopt");
    assert!(out.status.success(), "conjopt {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_conjopt");
    let dir = tempfile::tempdir().expect("temp dir");
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (sf, gf, tf, cfg) = (p("sf.json"), p("g.json"), p("t.json"), p("bench.json"));
    run_cli(bin, 1, &["gen", "--kind", "form_squarefree", "--n", "3", "--d", "2", "--seed", "4", "--out", &sf]);
    run_cli(bin, 1, &["gen", "--kind", "form_general", "--n", "2", "--d", "4", "--seed", "4", "--out", &gf]);
    run_cli(bin, 1, &["gen", "--kind", "tensor", "--dims", "2,3,2", "--seed", "4", "--out", &tf]);
    std::fs::write(
        Path::new(&cfg),
        r#"{"model": "Lm", "dims": [2, 2, 2], "m": 3, "seeds": [1, 2, 3, 4, 5, 6], "oracle": true}"#,
    )
    .expect("write config");
    let commands: Vec<Vec<&str>> = vec![
        vec!["gen", "--kind", "form_convex", "--n", "2", "--d", "4", "--seed", "9"],
        vec!["solve-form", "--constraint", "roots", "--m", "4", "--seed", "3", "--input", &sf],
        vec!["solve-form", "--constraint", "circle", "--seed", "3", "--input", &sf],
        vec!["solve-form", "--constraint", "sphere", "--seed", "3", "--input", &gf],
        vec!["solve-multilinear", "--model", "roots", "--m", "3", "--seed", "5", "--input", &tf],
        vec!["solve-multilinear", "--model", "circle", "--seed", "5", "--input", &tf],
        vec!["solve-multilinear", "--model", "sphere", "--seed", "5", "--input", &tf],
        vec!["oracle", "--constraint", "roots", "--m", "4", "--input", &sf],
        vec!["oracle", "--constraint", "sphere", "--starts", "500", "--seed", "2", "--input", &gf],
        vec!["oracle", "--constraint", "circle", "--starts", "500", "--seed", "2", "--input", &tf],
        vec!["verify-bounds", "--m", "5", "--n", "6", "--samples", "100000", "--seed", "8"],
        vec!["verify-bounds", "--n", "6", "--gamma", "0.5", "--samples", "100000", "--seed", "8"],
        vec!["verify-polarization", "--n", "2", "--d", "3", "--m", "inf", "--instances", "2", "--samples", "20000", "--seed", "1"],
        vec!["bench", "--config", &cfg],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        let a = run_cli(bin, 1, args);
        let b = run_cli(bin, 2, args);
        let c = run_cli(bin, 2, args);
        if a != b || b != c || a.is_empty() {
            differing.push(args[0].to_string());
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} commands at 1 and 2 threads, differing: {differing:?}", commands.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("polarization identity", polarization_identity),
        ("moment formulas", moment_formulas),
        ("tail bound", tail_bound),
        ("form/tensor correspondence", form_tensor_correspondence),
        ("real-valuedness", real_valuedness),
        ("multilinear roots ratio", multilinear_roots_ratio),
        ("multilinear sphere", sphere_multilinear),
        ("vertex rounding", vertex_rounding),
        ("convex forms", convex_forms),
        ("square-free relative ratio", squarefree_relative),
        ("sphere form ratios", sphere_forms),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|k| k != id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed: Duration = start.elapsed();
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {:<4} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
