//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//! Run with `cargo test --test acceptance`.

use ifsdim::dimension::{bowen_root, box_dim_estimate, cover_sums, dyadic_scales, self_similar_points, CoverOptions};
use ifsdim::families::{build_gap_system, make_gauss, validate_gap_system, NORMALIZATION_TOL};
use ifsdim::ifs_core::{BoundKind, IndexValue};
use ifsdim::measures::{
    frostman_build, frostman_build_with, frostman_verify, local_dim_estimate, normalizer_summary, GaussLikeMeasure,
    SupportPolicy,
};
use ifsdim::restrictions::{gamma_bound, ladder, Phi};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::time::{Duration, Instant};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Root of k^(1−2s)/(2s−1) = 1 on (1/2, 2) by bisection.
fn analytic_root(k: f64) -> f64 {
    let g = |s: f64| k.powf(1.0 - 2.0 * s) / (2.0 * s - 1.0) - 1.0;
    let (mut lo, mut hi) = (0.5 + 1e-12, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_1() -> Verdict {
    let g = make_gauss();
    let mut roots = Vec::new();
    let mut detail = Vec::new();
    let mut close = true;
    for k in [10u64, 100, 1000] {
        let s = bowen_root(&g, BoundKind::Xi, k, 1000 * k, 1e-10).expect("root").value;
        let a = analytic_root(k as f64);
        let rel = (s - a).abs() / a;
        close &= rel < 0.05;
        detail.push(format!("s({k})={s:.6} analytic {a:.6} rel {rel:.4}"));
        roots.push(s);
    }
    let ordered = roots[0] > roots[1] && roots[1] > roots[2] && roots[2] > 0.5;
    verdict(ordered && close, detail.join("; "))
}

/// |C_w| for the Gauss map from continuants, independent of the library.
fn gauss_cylinder_length(word: &[u64]) -> f64 {
    let (mut q_prev, mut q) = (0u128, 1u128);
    for &a in word {
        let next = a as u128 * q + q_prev;
        q_prev = q;
        q = next;
    }
    1.0 / (q as f64 * (q + q_prev) as f64)
}

fn criterion_2() -> Verdict {
    let g = make_gauss();
    let phi = Phi::linear(1.0).unwrap();
    let eps = 0.1;
    let measure = frostman_build(&g, &phi, eps, 3).expect("measure");
    let report = frostman_verify(&measure, 3).expect("verify");
    // Independent recheck with the level exponents and exact continuants.
    let levels = measure.levels();
    let mut checked = 0u64;
    let mut passed = 0u64;
    let xi = |i: u64| ((i + 1) as f64).powi(-2);
    for a in levels[0].support.0..=levels[0].support.1 {
        for b in levels[1].support.0..=levels[1].support.1 {
            for c in levels[2].support.0..=levels[2].support.1 {
                let mass = xi(a).powf(levels[0].exponent) * xi(b).powf(levels[1].exponent) * xi(c).powf(levels[2].exponent);
                let len = gauss_cylinder_length(&[a, b, c]);
                checked += 1;
                if mass < len.powf(0.5 - eps) {
                    passed += 1;
                }
            }
        }
    }
    let trimmed = frostman_build_with(&g, &phi, eps, 3, SupportPolicy::TrimExtremes).expect("trimmed");
    println!(
        "       info: trimmed-window variant has s_1 = {:.5} (floor {:.2}), levels below floor {:?}",
        trimmed.levels()[0].exponent,
        0.5 - eps,
        trimmed.levels().iter().filter(|l| l.below_floor).map(|l| l.level).collect::<Vec<_>>()
    );
    verdict(
        report.fraction == 1.0 && !report.sampled && checked == passed && checked == report.checked,
        format!("{}/{} cylinders pass (recheck {passed}/{checked}), worst margin {:.4}", report.passed, report.checked, report.worst_margin),
    )
}

fn criterion_3() -> Verdict {
    let g = make_gauss();
    let mut ok = true;
    let mut detail = Vec::new();
    for (alpha, lo, hi) in [(2.0, 0.28, 0.38), (1.5, 0.35, 0.45)] {
        let m = GaussLikeMeasure::new(2.0, alpha, 2).unwrap();
        let est = local_dim_estimate(&m, &g, 10_000, 30, 0).expect("estimate").estimate;
        ok &= est.value >= lo && est.value <= hi;
        detail.push(format!("alpha={alpha}: slope {:.5} in [{lo}, {hi}] (target {:.5})", est.value, m.s));
    }
    verdict(ok, detail.join("; "))
}

fn criterion_4() -> Verdict {
    let reciprocals: Vec<f64> = (1..=1_000_000u64).map(|i| 1.0 / i as f64).collect();
    let r = box_dim_estimate(&reciprocals, &dyadic_scales(2, 30)).expect("reciprocals").value;
    let cantor = self_similar_points(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)], 16);
    let c = box_dim_estimate(&cantor, &dyadic_scales(2, 20)).expect("cantor").value;
    let target = 2f64.ln() / 3f64.ln();
    verdict(
        (r - 0.5).abs() <= 0.05 && (c - target).abs() <= 0.03,
        format!("reciprocals {r:.5} (0.5 +- 0.05); cantor {c:.5} ({target:.5} +- 0.03)"),
    )
}

fn criterion_5() -> Verdict {
    let g = make_gauss();
    let phi = Phi::linear(1.0).unwrap();
    let opts = CoverOptions::default();
    let series = |s: f64| -> Vec<f64> {
        cover_sums(&g, &phi, 8, s, 1000, &opts).expect("cover sums")[2..].iter().map(|c| c.ln_value).collect()
    };
    let above = series(0.6);
    let below = series(0.45);
    let dec = above.windows(2).all(|w| w[1] < w[0]);
    let inc = below.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{:.3}", x.exp())).collect::<Vec<_>>().join(" ");
    verdict(dec && inc, format!("s=0.6: {} ; s=0.45: {}", fmt(&above), fmt(&below)))
}

fn criterion_6() -> Verdict {
    let phi = Phi::power(2.0).unwrap();
    let sys = build_gap_system(&phi, 2.0, 0.1).expect("gap system");
    let v = validate_gap_system(&sys, 10_000).expect("validation");
    verdict(
        v.all_pass() && v.normalization_error <= NORMALIZATION_TOL,
        format!(
            "disjoint {} contained {} gap_floor {} decaying {} normalization {} (error {:.2e}, residual {:.2e})",
            v.disjoint.pass, v.contained.pass, v.gap_floor.pass, v.decaying.pass, v.normalization.pass,
            v.normalization_error, v.normalizer_residual
        ),
    )
}

/// Direct summation of (i+1)^(−2(1/2−ε)) from the first index after l.
fn oracle_ladder(l1: u64, eps: f64, steps: usize) -> Vec<u64> {
    let mut out = vec![l1];
    while out.len() < steps {
        let mut acc = 0.0;
        let mut i = *out.last().unwrap();
        while acc < 1.0 {
            i += 1;
            acc += ((i + 1) as f64).powf(-2.0 * (0.5 - eps));
        }
        out.push(i);
    }
    out
}

fn criterion_7() -> Verdict {
    let g = make_gauss();
    let lin = Phi::linear(1.0).unwrap();
    let lad = ladder(&g, &lin, 0.1, 2).expect("ladder");
    let oracle = oracle_ladder(9, 0.1, 2);
    let got: Vec<IndexValue> = lad.values.clone();
    let ladder_ok = got == oracle.iter().map(|&v| IndexValue::Exact(v)).collect::<Vec<_>>();
    let mut gammas = Vec::new();
    let mut gamma_ok = true;
    for spec in ["lin:1", "pow:1.5", "pow:2"] {
        let phi: Phi = spec.parse().unwrap();
        let gb = gamma_bound(&ladder(&g, &phi, 0.1, 10).expect("ladder"), &phi).expect("gamma");
        gamma_ok &= gb < 4.0;
        gammas.push(format!("{spec}: {gb:.4}"));
    }
    verdict(
        ladder_ok && gamma_ok,
        format!("ladder {:?} vs oracle {:?}; gamma bounds {}", got.iter().map(|v| v.to_string()).collect::<Vec<_>>(), oracle, gammas.join(", ")),
    )
}

fn criterion_8() -> Verdict {
    let m = GaussLikeMeasure::new(2.0, 2.0, 2).unwrap();
    let mut worst: f64 = 0.0;
    for i in [1u64, 2, 5, 20] {
        let start = i * i;
        let n = 4_000_000u64;
        let mut sum = 0.0;
        let mut comp = 0.0;
        for j in start..=n {
            // Kahan summation
            let y = m.conditional(i, j) - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        let scale = m.conditional(i, start) * (start as f64).powf(m.p);
        let q = m.p - 1.0;
        let tail_lo = scale * ((n + 1) as f64).powf(-q) / q;
        let tail_hi = scale * (n as f64).powf(-q) / q;
        let mid = sum + 0.5 * (tail_lo + tail_hi);
        worst = worst.max((mid - 1.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut identity_err: f64 = 0.0;
    for _ in 0..100 {
        let d: f64 = rng.random_range(1.01..8.0);
        let alpha: f64 = rng.random_range(1.0..8.0);
        let pair = GaussLikeMeasure::new(d, alpha, 1).unwrap();
        identity_err = identity_err.max(((pair.p - 1.0) - (d - 1.0) * pair.s).abs());
    }
    let summary = normalizer_summary(&m, 10_000).expect("normalizers");
    let bounded = summary.min >= 1.0 / summary.c3 && summary.max <= summary.c3;
    verdict(
        worst <= 1e-8 && identity_err <= 8.0 * f64::EPSILON && bounded,
        format!(
            "max |sum - 1| = {worst:.2e}; identity error {identity_err:.2e}; c_i in [{:.5}, {:.5}], C3 = {:.5}, c_10000 = {:.8}",
            summary.min, summary.max, summary.c3, summary.last
        ),
    )
}

fn run_cli(args: &[&str], workers: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_ifsdim"))
        .args(args)
        .env("IFSDIM_WORKERS", workers)
        .output()
        .expect("spawn ifsdim");
    assert!(out.status.success(), "ifsdim {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn criterion_9() -> Verdict {
    let cases: [&[&str]; 3] = [
        &["localdim", "--samples", "500", "--depth", "20", "--seed", "42", "--traces"],
        &["localdim", "--samples", "300", "--depth", "12", "--alpha", "1.5", "--seed", "7", "--format", "csv"],
        &["frostman", "--depth", "3", "--seed", "3"],
    ];
    let mut ok = true;
    for args in cases {
        let a = run_cli(args, "1");
        let b = run_cli(args, "4");
        let c = run_cli(args, "4");
        ok &= a == b && b == c && !a.is_empty();
    }
    verdict(ok, format!("{} stochastic runs byte-identical across repeats and worker counts", cases.len()))
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() {
    let criteria: [Criterion; 9] = [
        ("bowen roots decrease towards 1/2 and match the analytic root", criterion_1, Duration::from_secs(10)),
        ("frostman inequality on every depth-3 cylinder", criterion_2, Duration::from_secs(30)),
        ("local dimension slopes in their windows", criterion_3, Duration::from_secs(120)),
        ("box-counting estimates for s0 ingredients", criterion_4, Duration::from_secs(30)),
        ("cover-sum dichotomy around 1/2", criterion_5, Duration::from_secs(60)),
        ("gap system certification", criterion_6, Duration::from_secs(30)),
        ("ladder soundness and gamma bounds", criterion_7, Duration::from_secs(60)),
        ("conditional normalization and exponent identity", criterion_8, Duration::from_secs(60)),
        ("stochastic reports are deterministic", criterion_9, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = v.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {}. {name}: {} ({:.2}s of {}s){}",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { " over time limit" }
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
