//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ampdens::inner::{self, InnerSolver, SPHERE_TOL};
use ampdens::oracle::{self, GradientAscent};
use ampdens::synth::{self, TrueDensity};
use ampdens::{
    build_design, fit, DensityModel, DesignMatrix, DomainMap, FitConfig, GramMatrix, SampleSet,
    WindowBasis,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXP_SEED: u64 = 1;
const STEP_SEED: u64 = 7;
/// Stated ceiling for the exponential-example ISE.
const EXP_ISE_MAX: f64 = 0.02;
/// Three times the median ISE over seeds 1..=50 (median 0.02174).
const EXP_ISE_CALIBRATED: f64 = 0.0652;
/// Interval on which the two step-function examples are defined.
const STEP_INTERVAL: (f64, f64) = (0.0, 4.0);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Every model fitted in the suite, for the suite-wide invariants.
#[derive(Default)]
struct Fits {
    models: Vec<(String, DensityModel)>,
}

fn random_sphere_point(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
    let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.iter().map(|x| x * r.sqrt() / norm).collect()
}

fn unit_samples(rng: &mut ChaCha8Rng, m: usize) -> SampleSet {
    let ts: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    SampleSet::new(ts, DomainMap::new(0.0, 1.0).unwrap()).unwrap()
}

/// A random feasible inner instance: Gram matrix for random samples and a
/// random positive `v` on the sphere.
fn inner_instance(rng: &mut ChaCha8Rng, r: f64) -> (DesignMatrix, GramMatrix) {
    let m = rng.gen_range(1..=30);
    let n = rng.gen_range(0..=15);
    let basis = WindowBasis::bernstein(n).unwrap();
    let samples = unit_samples(rng, m);
    let v = random_sphere_point(rng, n + 1, r);
    let design = build_design(&basis, &samples, &v).unwrap();
    let gram = GramMatrix::build(&design, r).unwrap();
    (design, gram)
}

fn criterion_1_2() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let (mut descent_fail, mut converge_fail, mut sphere_worst) = (0, 0, 0.0f64);
    let mut worst_e = 0.0f64;
    for _ in 0..200 {
        let r = 1.0;
        let (design, gram) = inner_instance(&mut rng, r);
        let m = gram.dim();
        let solver = InnerSolver::new(1e-10, 200 * m * m);
        match solver.solve(&gram) {
            Ok(state) => {
                if !state.strictly_decreasing() {
                    descent_fail += 1;
                }
                worst_e = worst_e.max(state.total_error);
                if state.total_error > 1e-10 {
                    converge_fail += 1;
                }
                match inner::recover_u(&design, &state.alpha, r) {
                    Ok(u) => {
                        let norm: f64 = u.iter().map(|x| x * x).sum();
                        sphere_worst = sphere_worst.max((norm - r).abs());
                    }
                    Err(_) => sphere_worst = f64::INFINITY,
                }
            }
            Err(_) => converge_fail += 1,
        }
    }
    let elapsed = start.elapsed();
    // The sphere identity off the unit radius.
    for r in [0.5, 2.5, 10.0] {
        for _ in 0..20 {
            let (design, gram) = inner_instance(&mut rng, r);
            let m = gram.dim();
            let state = InnerSolver::new(1e-10, 200 * m * m).solve(&gram).unwrap();
            let u = inner::recover_u(&design, &state.alpha, r).unwrap();
            let norm: f64 = u.iter().map(|x| x * x).sum();
            sphere_worst = sphere_worst.max((norm - r).abs() / r);
        }
    }
    let c1 = Outcome::new(
        descent_fail == 0 && converge_fail == 0 && elapsed < Duration::from_secs(10),
        format!(
            "200 instances, {descent_fail} non-monotone, {converge_fail} unconverged, worst E {worst_e:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
    let c2 = Outcome::new(
        sphere_worst <= SPHERE_TOL,
        format!("worst | |u|^2 - r | / r = {sphere_worst:.2e} over 260 solves"),
    );
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..50 {
        let (_, gram) = inner_instance(&mut rng, 1.0);
        let m = gram.dim();
        let solver = InnerSolver::new(1e-12, 200 * m * m);
        let base = solver.solve(&gram).unwrap();
        for _ in 0..20 {
            let start: Vec<f64> = base
                .alpha
                .iter()
                .map(|a| a * 10f64.powf(rng.gen_range(-1.0..=1.0)))
                .collect();
            match solver.solve_from(&gram, start) {
                Ok(s) => {
                    let d = s
                        .alpha
                        .iter()
                        .zip(&base.alpha)
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max);
                    worst = worst.max(d);
                }
                Err(_) => failures += 1,
            }
        }
    }
    Outcome::new(
        failures == 0 && worst <= 1e-6,
        format!("1000 perturbed starts, worst component gap {worst:.2e}, {failures} failed"),
    )
}

fn criterion_5(fits: &mut Fits) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let start = Instant::now();
    let (mut ll_worst, mut coef_worst) = (f64::NEG_INFINITY, 0.0f64);
    let mut failures = 0;
    let config = FitConfig {
        epsilon: 1e-12,
        ..FitConfig::default()
    };
    for case in 0..30 {
        let n = rng.gen_range(0..=2);
        let m = rng.gen_range(n + 1..=4);
        let basis = WindowBasis::bernstein(n).unwrap();
        let samples = unit_samples(&mut rng, m);
        let model = match fit(&basis, &samples, &config) {
            Ok(model) => model,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let a = DesignMatrix::windows(&basis, &samples).unwrap();
        let amps: Vec<f64> = model.coefficients().iter().map(|c| c.sqrt()).collect();
        let fit_ll = oracle::amplitude_loglik(&a, &amps);
        let grid = oracle::grid_search(&a, 1.0, 2001).unwrap();
        let pg = oracle::projected_gradient(&a, 1.0, &GradientAscent::default()).unwrap();
        ll_worst = ll_worst.max(grid.best_loglik - fit_ll);
        let gap = pg
            .weights()
            .iter()
            .zip(model.coefficients())
            .map(|(w, c)| (w - c).abs())
            .fold(0.0, f64::max);
        coef_worst = coef_worst.max(gap);
        fits.models.push((format!("oracle instance {case}"), model));
    }
    let elapsed = start.elapsed();
    Outcome::new(
        failures == 0 && ll_worst <= 1e-4 && coef_worst <= 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "30 instances, worst grid-minus-fit log-likelihood {ll_worst:.2e}, worst coefficient gap {coef_worst:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=20);
        let basis = WindowBasis::bernstein(n).unwrap();
        let a = DesignMatrix::windows(&basis, &unit_samples(&mut rng, m)).unwrap();
        let c = random_sphere_point(&mut rng, n + 1, 1.0);
        worst = worst.max(oracle::gradient_check(&a, &c));
    }
    Outcome::new(
        worst <= 1e-6,
        format!("50 sphere points, worst relative error {worst:.2e}"),
    )
}

fn exp_fit() -> (DensityModel, SampleSet, Duration) {
    let start = Instant::now();
    let xs = TrueDensity::Exp.sample(80, EXP_SEED).unwrap();
    let samples = SampleSet::with_enclosing_domain(xs).unwrap();
    let model = fit(
        &WindowBasis::bernstein(10).unwrap(),
        &samples,
        &FitConfig::default(),
    )
    .unwrap();
    (model, samples, start.elapsed())
}

fn step_fit(truth: TrueDensity) -> (DensityModel, Duration) {
    let start = Instant::now();
    let xs = truth.sample(180, STEP_SEED).unwrap();
    let domain = DomainMap::new(STEP_INTERVAL.0, STEP_INTERVAL.1).unwrap();
    let samples = SampleSet::new(xs, domain).unwrap();
    let model = fit(
        &WindowBasis::bernstein(34).unwrap(),
        &samples,
        &FitConfig::default(),
    )
    .unwrap();
    (model, start.elapsed())
}

/// Outer invariants of one fit; returns a description of the first
/// violation.
fn outer_invariants(model: &DensityModel) -> Result<(), String> {
    let trace = model.trace().ok_or("no trace")?;
    let meta = model.metadata();
    if let Some(k) = trace.theta.iter().position(|t| !(*t >= 1.0)) {
        return Err(format!("theta {} < 1 at step {}", trace.theta[k], k + 1));
    }
    if let Some(k) = trace.loglik.windows(2).position(|w| w[1] < w[0] - 1e-12) {
        return Err(format!(
            "log-likelihood fell by {:.2e} at step {}",
            trace.loglik[k] - trace.loglik[k + 1],
            k + 2
        ));
    }
    let last = *trace.inner_product.last().ok_or("empty trace")?;
    if last < meta.r - meta.epsilon {
        return Err(format!("final inner product {last} < r - epsilon"));
    }
    let gap = trace
        .u
        .iter()
        .zip(&trace.v)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    if gap > (2.0 * meta.epsilon).sqrt() {
        return Err(format!("max |u - v| = {gap:.2e} > sqrt(2 epsilon)"));
    }
    Ok(())
}

fn normalization_error(model: &DensityModel) -> f64 {
    match model.integrate(1e-12) {
        Ok(v) => (v - model.r()).abs(),
        Err(_) => f64::INFINITY,
    }
}

fn nonnegative_on_grid(model: &DensityModel) -> bool {
    let dom = model.domain();
    synth::grid(dom.a(), dom.b(), 10_000)
        .iter()
        .all(|&x| model.pdf(x) >= 0.0)
}

fn criterion_8(fits: &mut Fits) -> Outcome {
    let (model, _, elapsed) = exp_fit();
    let ise = synth::integrated_squared_error(&model, TrueDensity::Exp, 1e-10).unwrap();
    let invariants = outer_invariants(&model);
    let norm = normalization_error(&model);
    let threshold = EXP_ISE_MAX.min(EXP_ISE_CALIBRATED);
    let pass = invariants.is_ok()
        && norm <= 1e-8
        && nonnegative_on_grid(&model)
        && ise <= threshold
        && elapsed < Duration::from_secs(5);
    let detail = format!(
        "exp m=80 n=10 seed {EXP_SEED}: {} outer steps, ISE {ise:.4} (limit {threshold}), {}, {:.2}s",
        model.trace().map_or(0, |t| t.iterations()),
        invariants.err().unwrap_or_else(|| "invariants hold".into()),
        elapsed.as_secs_f64()
    );
    fits.models.push(("exp example".into(), model));
    Outcome::new(pass, detail)
}

fn criterion_9(fits: &mut Fits) -> Outcome {
    let mut pass = true;
    let mut detail = String::new();
    for (truth, want) in [(TrueDensity::Bimodal, 2), (TrueDensity::Trimodal, 3)] {
        let (model, elapsed) = step_fit(truth);
        let values: Vec<f64> = synth::grid(STEP_INTERVAL.0, STEP_INTERVAL.1, 512)
            .iter()
            .map(|&x| model.pdf(x))
            .collect();
        let got = synth::count_local_maxima(&values);
        let ok = got == want && elapsed < Duration::from_secs(30);
        pass &= ok;
        let _ = write!(
            detail,
            "{truth}: {got} maxima (want {want}), {} outer steps, {:.2}s; ",
            model.trace().map_or(0, |t| t.iterations()),
            elapsed.as_secs_f64()
        );
        fits.models.push((format!("{truth} example"), model));
    }
    Outcome::new(pass, detail.trim_end_matches("; ").to_string())
}

fn criterion_4(fits: &Fits) -> Outcome {
    let failures: Vec<String> = fits
        .models
        .iter()
        .filter_map(|(name, m)| outer_invariants(m).err().map(|e| format!("{name}: {e}")))
        .collect();
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} fits, all invariants hold", fits.models.len())
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_7(fits: &mut Fits) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for r in [2.0, 0.5] {
        let samples = unit_samples(&mut rng, 25);
        let model = fit(
            &WindowBasis::bernstein(6).unwrap(),
            &samples,
            &FitConfig {
                r,
                ..FitConfig::default()
            },
        )
        .unwrap();
        fits.models.push((format!("r = {r}"), model));
    }
    let worst = fits
        .models
        .iter()
        .map(|(_, m)| normalization_error(m))
        .fold(0.0, f64::max);
    let nonneg = fits.models.iter().all(|(_, m)| nonnegative_on_grid(m));
    Outcome::new(
        worst <= 1e-8 && nonneg,
        format!(
            "{} fits, worst |integral - r| {worst:.2e}, pdf nonnegative on 10^4 points: {nonneg}",
            fits.models.len()
        ),
    )
}

fn trace_csv(model: &DensityModel) -> String {
    let t = model.trace().unwrap();
    let mut s = String::from("k,theta_bar,inner_product,log_likelihood,inner_updates\n");
    for k in 0..t.iterations() {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{}",
            k + 1,
            t.theta[k],
            t.inner_product[k],
            t.loglik[k],
            t.inner_updates[k]
        );
    }
    s
}

fn criterion_10(fits: &Fits) -> Outcome {
    let mut mismatches = Vec::new();
    let mut check = |name: &str, again: DensityModel| {
        let first = fits
            .models
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .unwrap();
        if first.to_document_string() != again.to_document_string() {
            mismatches.push(format!("{name} document"));
        }
        if trace_csv(first) != trace_csv(&again) {
            mismatches.push(format!("{name} trace"));
        }
    };
    check("exp example", exp_fit().0);
    check("bimodal example", step_fit(TrueDensity::Bimodal).0);
    check("trimodal example", step_fit(TrueDensity::Trimodal).0);
    Outcome::new(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "exp, bimodal and trimodal reruns byte-identical".to_string()
        } else {
            format!("differs: {}", mismatches.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let mut fits = Fits::default();
    let (c1, c2) = criterion_1_2();
    let c3 = criterion_3();
    let c5 = criterion_5(&mut fits);
    let c6 = criterion_6();
    let c8 = criterion_8(&mut fits);
    let c9 = criterion_9(&mut fits);
    let c7 = criterion_7(&mut fits);
    let c4 = criterion_4(&fits);
    let c10 = criterion_10(&fits);
    let results = [
        ("inner descent and convergence", c1),
        ("sphere identity", c2),
        ("inner uniqueness", c3),
        ("outer invariants", c4),
        ("oracle equivalence", c5),
        ("gradient check", c6),
        ("normalization", c7),
        ("exponential example", c8),
        ("bimodal and trimodal shape", c9),
        ("determinism", c10),
    ];
    let mut all = true;
    for (i, (name, o)) in results.iter().enumerate() {
        all &= o.pass;
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
