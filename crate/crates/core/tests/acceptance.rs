//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits non-zero if any check fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array1;
use rand::Rng;
use sparse_recover::bounds::{
    chi2_tail_bound, chi2_tail_mc, psi_mc, psi_plus_mc, student_tail_envelope, student_tail_mc,
    sufficient_n, BoundConstants, MonteCarloConfig, SampleRegime,
};
use sparse_recover::model::split_sample;
use sparse_recover::mom::{ContaminationSpec, MomConfig, OutlierKind};
use sparse_recover::rng::stream_rng;
use sparse_recover::selector::Regime;
use sparse_recover::sim::{
    gen_instance, mc_risk, mc_risk_batch, GeneratorSpec, Method, NoiseKind, RiskEstimate,
};
use sparse_recover::slope::{prox_sorted_l1, sqrt_slope_solve, LambdaWeights, PilotConfig};
use sparse_recover::{ProblemInstance, SplitScheme};

const SEED_RECOVERY: u64 = 3_000;
const SEED_ROBUST: u64 = 8_000;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Check {
    Check { pass, detail }
}

fn recovery_instance(n2: usize) -> ProblemInstance {
    ProblemInstance::new(2000 + n2, 1000, 10, 1.0, 1.0, 2000).unwrap()
}

fn known_all_rate(problem: &ProblemInstance, trials: usize, seed: u64) -> RiskEstimate {
    mc_risk(
        problem,
        &GeneratorSpec::gaussian(0),
        &Method::two_step(Regime::KnownAll),
        &PilotConfig::practical(),
        trials,
        seed,
    )
    .unwrap()
}

fn robust_problem() -> (ProblemInstance, GeneratorSpec, usize) {
    let problem = ProblemInstance::new(6000, 500, 5, 2.0, 1.0, 3000).unwrap();
    let k = MomConfig::new(1.0)
        .resolve_k(problem.p, problem.n2)
        .unwrap();
    let gen = GeneratorSpec {
        noise: NoiseKind::StudentT { df: 3.0 },
        contamination: Some(ContaminationSpec {
            outlier_count: k / 8,
            outlier_kind: OutlierKind::AdversarialLargeY,
            magnitude: 1e3,
            rows: Some((problem.n1, problem.n)),
        }),
        ..GeneratorSpec::gaussian(0)
    };
    (problem, gen, k)
}

fn criterion_1() -> Check {
    let mut rng = stream_rng(1, 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let p = rng.random_range(1..=5);
        let v: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut lambda: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..1.5)).collect();
        lambda.sort_by(|a, b| b.total_cmp(a));
        let scale = rng.random_range(0.0..2.0);
        let weights = LambdaWeights::from_weights(lambda.clone()).unwrap();
        let got = prox_sorted_l1(Array1::from(v.clone()).view(), &weights, scale);
        let oracle = common::prox_oracle(&v, &lambda, scale);
        let gap = common::prox_objective(got.as_slice().unwrap(), &v, &lambda, scale)
            - common::prox_objective(&oracle, &v, &lambda, scale);
        worst = worst.max(gap);
    }
    check(
        worst <= 1e-6,
        format!("200 instances, worst objective gap {worst:.3e}"),
    )
}

fn criterion_2() -> Check {
    let problem = ProblemInstance::new(600, 500, 5, 2.0, 1.0, 300).unwrap();
    let pilot = PilotConfig::practical();
    let lambda = pilot.weights(problem.p, problem.n1).unwrap();
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let (data, beta) = gen_instance(&problem, &GeneratorSpec::gaussian(2_000 + t)).unwrap();
        let (first, _) = split_sample(&data, &SplitScheme::leading(problem.n, problem.n1)).unwrap();
        let fit = sqrt_slope_solve(first.x(), first.y(), &lambda, &pilot.solver).unwrap();
        let err = fit.beta.distance(&beta);
        worst = worst.max(err);
        good += usize::from(err <= problem.sigma);
    }
    check(
        good * 100 >= 95 * 50,
        format!("{good}/50 trials within sigma, max error {worst:.3}"),
    )
}

fn criterion_3() -> (Check, f64) {
    let r = known_all_rate(&recovery_instance(2000), 100, SEED_RECOVERY);
    let rate = r.exact_recovery_rate;
    (
        check(
            rate >= 0.95,
            format!("rate {rate} over 100 trials, hamming {}", r.hamming_mean),
        ),
        rate,
    )
}

fn criterion_4(rate3: f64) -> Check {
    let n2 = (2.0 * (1000.0f64 / 10.0 - 1.0).ln()).floor() as usize;
    let r = known_all_rate(&recovery_instance(n2), 100, SEED_RECOVERY);
    let rate = r.exact_recovery_rate;
    check(
        rate <= 0.5 && rate3 - rate >= 0.4,
        format!(
            "n2 = {n2}: rate {rate}, gap to sufficient n {:.2}",
            rate3 - rate
        ),
    )
}

fn criterion_5() -> Check {
    let grid: [(usize, usize, usize, f64, f64); 20] = [
        (1, 20, 2, 1.0, 1.0),
        (2, 50, 5, 0.5, 1.0),
        (5, 100, 10, 1.0, 1.0),
        (10, 100, 5, 0.3, 0.5),
        (10, 1000, 10, 1.0, 1.0),
        (20, 40, 4, 0.7, 1.0),
        (20, 1000, 10, 0.5, 2.0),
        (30, 200, 20, 1.0, 1.0),
        (50, 1000, 10, 0.4, 1.0),
        (50, 500, 3, 1.0, 1.5),
        (80, 300, 30, 0.5, 1.0),
        (100, 1000, 10, 0.3, 1.0),
        (100, 50, 10, 0.2, 1.0),
        (150, 1000, 100, 0.5, 1.0),
        (200, 2000, 20, 0.2, 0.5),
        (300, 1000, 10, 0.2, 1.0),
        (400, 5000, 50, 0.15, 1.0),
        (500, 10000, 10, 0.1, 0.5),
        (800, 1000, 5, 0.1, 1.0),
        (1000, 100000, 100, 0.08, 1.0),
    ];
    let mc = MonteCarloConfig::new(20_000, 5);
    let mut worst_z: f64 = 0.0;
    let mut order_ok = true;
    for &(n, p, s, a, sigma) in &grid {
        let psi = psi_mc(n, p, s, a, sigma, &mc).unwrap();
        let plus = psi_plus_mc(n, p, s, a, sigma, &mc).unwrap();
        for (est, clamp) in [(psi, true), (plus, false)] {
            let exact = common::psi_quadrature(n, p, s, a, sigma, clamp);
            let se = est.se_or_zero().max(1e-13 * exact.abs().max(1e-300));
            worst_z = worst_z.max((est.value - exact).abs() / se);
        }
        let se = (psi.se_or_zero().powi(2) + plus.se_or_zero().powi(2)).sqrt();
        order_ok &= psi.value <= plus.value + 3.0 * se;
    }
    check(
        worst_z <= 3.0 && order_ok,
        format!("20 grid points, worst |MC - quadrature| / se = {worst_z:.2}, psi <= psi_plus: {order_ok}"),
    )
}

fn criterion_6() -> Check {
    // with the practical penalty the pilot is within delta * sigma = 1 of
    // beta already at n1 = 600 for p = 200, s = 5: C0 = 600 / (s log(ep/s)) ~ 25.8
    let (p, s, a, sigma, n1) = (200usize, 5usize, 1.0, 1.0, 600usize);
    let c0 = n1 as f64 / (s as f64 * (1.0 + (p as f64 / s as f64).ln())) * 0.99;
    let mc = MonteCarloConfig::new(20_000, 6);
    let mut details = Vec::new();
    let mut pass = true;
    for n2 in [10usize, 20, 40, 80, 160] {
        let problem = ProblemInstance::new(n1 + n2, p, s, a, sigma, n1).unwrap();
        assert!(n1 as f64 > c0 * s as f64 * (1.0 + (p as f64 / s as f64).ln()));
        let risk = mc_risk(
            &problem,
            &GeneratorSpec::gaussian(0),
            &Method::two_step(Regime::KnownAll),
            &PilotConfig::practical(),
            200,
            6_000,
        )
        .unwrap();
        let psi = psi_mc(n2, p, s, a, sigma * 2f64.sqrt(), &mc).unwrap();
        let bound = 2.0 * psi.value;
        let err =
            (risk.hamming_se.unwrap_or(0.0).powi(2) + (2.0 * psi.se_or_zero()).powi(2)).sqrt();
        let ok = risk.hamming_mean <= bound + 3.0 * err;
        pass &= ok;
        details.push(format!("n2={n2}: {:.3} <= {:.3}", risk.hamming_mean, bound));
    }
    check(pass, format!("C0 = {c0:.1}; {}", details.join(", ")))
}

fn criterion_7() -> Check {
    let size = sufficient_n(
        1000,
        10,
        1.0,
        1.0,
        SampleRegime::KnownSigma,
        &BoundConstants::default(),
    )
    .unwrap();
    let n = ((4.0 * size.n).ceil() as usize).next_multiple_of(2);
    let problem = ProblemInstance::new(n, 1000, 10, 1.0, 1.0, n / 2).unwrap();
    let methods: Vec<Method> = Regime::ALL.iter().map(|r| Method::two_step(*r)).collect();
    let rows = mc_risk_batch(
        &problem,
        &GeneratorSpec::gaussian(0),
        &methods,
        &PilotConfig::practical(),
        100,
        7_000,
    )
    .unwrap();
    let base = rows[0].exact_recovery_rate;
    let pass = rows
        .iter()
        .all(|r| (r.exact_recovery_rate - base).abs() <= 0.05);
    let rates: Vec<String> = rows
        .iter()
        .map(|r| format!("{} {}", r.regime, r.exact_recovery_rate))
        .collect();
    check(
        pass,
        format!("n = {n} (n1 = n2 = {}): {}", n / 2, rates.join(", ")),
    )
}

fn criterion_8() -> Check {
    let (problem, gen, k) = robust_problem();
    let methods = [
        Method::Mom(MomConfig::new(problem.sigma)),
        Method::two_step(Regime::KnownAll),
    ];
    let rows = mc_risk_batch(
        &problem,
        &gen,
        &methods,
        &PilotConfig::practical(),
        50,
        SEED_ROBUST,
    )
    .unwrap();
    let (mom, two) = (rows[0].exact_recovery_rate, rows[1].exact_recovery_rate);
    check(
        mom >= 0.9 && mom - two >= 0.3,
        format!(
            "K = {k}, {} outliers: mom rate {mom}, two-step rate {two}",
            k / 8
        ),
    )
}

fn criterion_9() -> Check {
    let mc = MonteCarloConfig::new(100_000, 9);
    let mut chi_ok = true;
    let mut chi = Vec::new();
    for dof in [10usize, 100] {
        for t in [0.5, 1.0] {
            let bound = chi2_tail_bound(dof, t).unwrap();
            let freq = chi2_tail_mc(dof, t, &mc).unwrap().value;
            chi_ok &= bound >= freq;
            chi.push(format!("N={dof},t={t}: {freq:.4} <= {bound:.4}"));
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let smc = MonteCarloConfig::new(20_000, 9);
    for k in [5usize, 20, 100] {
        let b_min = 1.0 / (k as f64).sqrt();
        let mut bs = vec![b_min];
        bs.extend([0.5, 1.0, 2.0, 3.0].into_iter().filter(|&b| b >= b_min));
        for b in bs {
            let ratio =
                student_tail_mc(k, b, &smc).unwrap().value / student_tail_envelope(k, b).unwrap();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    let env_ok = lo >= 0.05 && hi <= 20.0;
    check(
        chi_ok && env_ok,
        format!(
            "{}; Student tail / envelope in [{lo:.3}, {hi:.3}]",
            chi.join(", ")
        ),
    )
}

fn cli_csv(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_sparse-recover"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn recovery_rates(csv: &[u8]) -> Vec<f64> {
    let text = String::from_utf8_lossy(csv);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "recovery_rate").unwrap();
    lines
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

fn criterion_10(rate3: f64) -> Check {
    let seed3 = SEED_RECOVERY.to_string();
    let c3 = [
        "risk",
        "--n",
        "4000",
        "--p",
        "1000",
        "--s",
        "10",
        "--a",
        "1",
        "--sigma",
        "1",
        "--n1",
        "2000",
        "--regime",
        "known-all",
        "--delta",
        "1",
        "--trials",
        "100",
        "--seed",
        &seed3,
        "--quiet",
    ];
    let (problem, _, k) = robust_problem();
    let outliers = (k / 8).to_string();
    let rows = format!("{}:{}", problem.n1, problem.n);
    let seed8 = SEED_ROBUST.to_string();
    let c8 = [
        "risk",
        "--n",
        "6000",
        "--p",
        "500",
        "--s",
        "5",
        "--a",
        "2",
        "--sigma",
        "1",
        "--n1",
        "3000",
        "--noise",
        "student-t",
        "--df",
        "3",
        "--outliers",
        &outliers,
        "--outlier-kind",
        "adversarial",
        "--magnitude",
        "1000",
        "--outlier-rows",
        &rows,
        "--method",
        "mom,two-step",
        "--regime",
        "known-all",
        "--trials",
        "50",
        "--seed",
        &seed8,
        "--quiet",
    ];
    let (a3, b3) = (cli_csv(&c3), cli_csv(&c3));
    let (a8, b8) = (cli_csv(&c8), cli_csv(&c8));
    let same = a3 == b3 && a8 == b8;
    let consistent = recovery_rates(&a3) == vec![rate3];
    check(
        same && consistent,
        format!(
            "identical bytes: criterion 3 {}, criterion 8 {}; CLI rate matches library: {consistent}",
            a3 == b3,
            a8 == b8
        ),
    )
}

fn report(id: usize, name: &str, started: Instant, c: &Check) {
    let elapsed: Duration = started.elapsed();
    println!(
        "criterion {id:>2} [{name}]: {}  {}  ({:.1}s)",
        if c.pass { "PASS" } else { "FAIL" },
        c.detail,
        elapsed.as_secs_f64()
    );
}

fn main() {
    let mut failures = 0;
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let c = f();
        report(id, name, t, &c);
        failures += usize::from(!c.pass);
    };
    run(1, "prox oracle", &mut criterion_1);
    run(2, "pilot accuracy", &mut criterion_2);
    let mut rate3 = 0.0;
    run(3, "exact recovery at sufficient n", &mut || {
        let (c, r) = criterion_3();
        rate3 = r;
        c
    });
    run(4, "failure below necessary n", &mut || criterion_4(rate3));
    run(5, "psi estimator vs quadrature", &mut criterion_5);
    run(6, "risk below 2 psi", &mut criterion_6);
    run(7, "adaptive parity", &mut criterion_7);
    run(8, "robustness", &mut criterion_8);
    run(9, "tail bounds", &mut criterion_9);
    run(10, "determinism", &mut || criterion_10(rate3));
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
