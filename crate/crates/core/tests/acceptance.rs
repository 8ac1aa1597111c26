//! Acceptance suite. Each test prints one `PASS` or `FAIL` line with the
//! measured values, then asserts.
//!
//! Monte Carlo criteria use `ACCEPTANCE_REPLICATES` replicates (default
//! 10,000) and 2,000 resamples per replicate.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use uresample_core::bootstrap::{bootstrap_distribution, BootstrapPlan};
use uresample_core::dist::{kolmogorov_distance, sup_diff, QuantileLevel, Sample, StepDistribution};
use uresample_core::families::{boundary_theta, FamilySpec, OracleMode};
use uresample_core::harness::{
    dkw_check, drift_demo, mc_coverage, mc_fwer, mc_size, CoverageReport, CoverageSpec, DkwSpec, DriftSpec,
    FailureDemoSpec, FwerSpec, Resampling, SizeSpec, TestSpec,
};
use uresample_core::inference::{IntervalMethod, StepdownMethod};
use uresample_core::linalg::SquareMatrix;
use uresample_core::rng::{stream, StreamRng};
use uresample_core::roots::aqlr::{omega_tilde, orthant_projection};
use uresample_core::roots::ustat::{u_statistic, Kernel, UStatConfig};
use uresample_core::roots::RootSpec;
use uresample_core::subsample::SubsamplePlan;

const DRAWS: usize = 2000;

fn replicates() -> usize {
    std::env::var("ACCEPTANCE_REPLICATES").ok().and_then(|v| v.parse().ok()).unwrap_or(10_000)
}

fn resampling() -> Resampling {
    Resampling { draws: DRAWS, ..Resampling::default() }
}

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn rng(tag: u64) -> StreamRng {
    stream(0xacce_97, &[tag])
}

// ---------------------------------------------------------------------------
// Quantile inequalities for nonrandom distribution functions

/// Step CDF on a subset of `{0, …, 9}` with cumulative levels in `(1/64)ℤ`,
/// so every probability and difference below is exact in `f64`.
struct Cdf {
    support: Vec<f64>,
    cum: Vec<f64>,
}

impl Cdf {
    fn random(rng: &mut StreamRng) -> Self {
        let size = rng.random_range(1..=6);
        let mut pts: Vec<u32> = (0..10).collect();
        pts.shuffle(rng);
        let mut support: Vec<f64> = pts[..size].iter().map(|&p| p as f64).collect();
        support.sort_by(f64::total_cmp);
        let mut cuts: Vec<u32> = (1..64).collect();
        cuts.shuffle(rng);
        let mut cum: Vec<f64> = cuts[..size - 1].iter().map(|&c| c as f64 / 64.0).collect();
        cum.sort_by(f64::total_cmp);
        cum.push(1.0);
        Self { support, cum }
    }

    fn at(&self, x: f64) -> f64 {
        self.support.iter().zip(&self.cum).filter(|(s, _)| **s <= x).map(|(_, c)| *c).last().unwrap_or(0.0)
    }

    fn left(&self, x: f64) -> f64 {
        self.support.iter().zip(&self.cum).filter(|(s, _)| **s < x).map(|(_, c)| *c).last().unwrap_or(0.0)
    }

    fn step(&self) -> StepDistribution {
        StepDistribution::new(self.support.clone(), self.cum.clone()).unwrap()
    }
}

/// Generalized inverse on the extended line: `−∞` at or below 0, `+∞` above 1.
fn inverse(f: &StepDistribution, a: f64) -> f64 {
    if a <= 0.0 {
        f64::NEG_INFINITY
    } else if a > 1.0 {
        f64::INFINITY
    } else {
        f.quantile(QuantileLevel::new(a).unwrap())
    }
}

/// `sup_x {G(x) − F(x)}` over the joint support, clipped at 0.
fn upper_gap(g: &Cdf, f: &Cdf) -> f64 {
    g.support.iter().chain(&f.support).map(|&x| g.at(x) - f.at(x)).fold(0.0, f64::max)
}

#[test]
fn quantile_inequalities_hold_exactly() {
    let mut rng = rng(1);
    let pairs = 10_000;
    let mut checks = 0usize;
    let mut violations = Vec::new();
    for pair in 0..pairs {
        let f = Cdf::random(&mut rng);
        let g = Cdf::random(&mut rng);
        let (fs, gs) = (f.step(), g.step());
        let eps_up = upper_gap(&g, &f);
        let eps_down = upper_gap(&f, &g);
        assert_eq!(sup_diff(&gs, &fs).max(0.0), eps_up);
        assert_eq!(sup_diff(&fs, &gs).max(0.0), eps_down);
        let slack = rng.random_range(0..=4) as f64 / 128.0;
        let (e1, e2, e_abs) = (eps_up + slack, eps_down + slack, 2.0 * eps_up.max(eps_down) + slack);
        for _ in 0..8 {
            let a1 = rng.random_range(1..128) as f64 / 128.0;
            let a2 = rng.random_range(1..128) as f64 / 128.0;
            let g_hi = inverse(&gs, 1.0 - a2);
            let g_lo = inverse(&gs, a1);
            // P{X ≤ q} and P{X ≥ q} under F, exact.
            let below = |q: f64| if q == f64::INFINITY { 1.0 } else if q == f64::NEG_INFINITY { 0.0 } else { f.at(q) };
            let above = |q: f64| if q == f64::NEG_INFINITY { 1.0 } else if q == f64::INFINITY { 0.0 } else { 1.0 - f.left(q) };
            let parts = [
                ("(i)", g_hi >= inverse(&fs, 1.0 - (a2 + e1))),
                ("(ii)", g_lo <= inverse(&fs, a1 + e2)),
                ("(iii)", below(g_hi) >= 1.0 - (a2 + e1)),
                ("(iv)", above(g_lo) >= 1.0 - (a1 + e2)),
                ("(v)", (if g_lo <= g_hi { below(g_hi) + above(g_lo) - 1.0 } else { 0.0 }) >= 1.0 - (a1 + a2 + e_abs)),
            ];
            for (name, ok) in parts {
                checks += 1;
                if !ok {
                    violations.push(format!("pair {pair} part {name} a1 {a1} a2 {a2}"));
                }
            }
        }
    }
    let pass = violations.is_empty();
    verdict(
        "quantile inequalities (i)-(v)",
        pass,
        &format!("{pairs} CDF pairs, {checks} checks, {} violations", violations.len()),
    );
    assert!(pass, "{:?}", &violations[..violations.len().min(10)]);
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration against random resampling

#[test]
fn exhaustive_matches_random_resampling() {
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let column = |rng: &mut StreamRng, n: usize| -> Sample {
        Sample::from_column((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
    };
    // Subsampling, n = 12, b = 3: one- and two-column roots.
    let uni = column(&mut rng, 12);
    let rows: Vec<Vec<f64>> =
        (0..12).map(|_| vec![rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)]).collect();
    let multi = Sample::from_rows(&rows).unwrap();
    for (sample, root) in [(&uni, RootSpec::Mean), (&uni, RootSpec::Ks), (&multi, RootSpec::MaxStudentizedMean)] {
        let params = root.plug_in_params(sample, 0.5).unwrap();
        let exact = uresample_core::subsample::subsampling_distribution(
            sample,
            &root,
            &params,
            &SubsamplePlan::exhaustive(12, 3).unwrap(),
        )
        .unwrap();
        for seed in 0..10 {
            let plan = SubsamplePlan::random(12, 3, 50_000, seed).unwrap();
            let random = uresample_core::subsample::subsampling_distribution(sample, &root, &params, &plan).unwrap();
            worst = worst.max(kolmogorov_distance(&exact, &random));
            cases += 1;
        }
    }
    // Bootstrap, n ∈ {4, 6}.
    for n in [4, 6] {
        let sample = column(&mut rng, n);
        for root in [RootSpec::Mean, RootSpec::Ks] {
            let params = root.plug_in_params(&sample, 0.5).unwrap();
            let exact = bootstrap_distribution(&sample, &root, &params, &BootstrapPlan::exhaustive()).unwrap();
            for seed in 0..10 {
                let plan = BootstrapPlan::monte_carlo(50_000, seed);
                let random = bootstrap_distribution(&sample, &root, &params, &plan).unwrap();
                worst = worst.max(kolmogorov_distance(&exact, &random));
                cases += 1;
            }
        }
    }
    let pass = worst <= 0.03;
    verdict("exhaustive vs random resampling", pass, &format!("{cases} cases at B = 50000, max Kolmogorov distance {worst:.5} (<= 0.03)"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// DKW-type bound for the oracle subsampling distribution

#[test]
fn dkw_violation_frequency_within_bound() {
    let r = replicates();
    let spec = DkwSpec {
        family: FamilySpec::Bernoulli { p: 0.5 },
        root: RootSpec::Mean,
        ns: vec![400],
        b: 20,
        epsilons: vec![0.3, 0.6],
        oracle: OracleMode::Exact,
        resampling: resampling(),
        tau_exponent: 0.5,
        replicates: r,
        seed: 3,
    };
    let report = dkw_check(&spec).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for row in &report.rows {
        let (p, se) = (row.violation_rate.unwrap(), row.se.unwrap());
        let ok = p <= row.bound + 3.0 * se;
        pass &= ok;
        detail.push(format!("eps {}: rate {p:.4} vs bound {:.4} + 3*{se:.4}", row.epsilon, row.bound));
    }
    verdict("DKW violation frequency", pass, &format!("R = {r}; {}", detail.join("; ")));
    assert!(pass, "{report:?}");
}

// ---------------------------------------------------------------------------
// Uniform coverage of the max-studentized mean root

fn max_studentized_families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::Normal { mu: vec![0.0], sd: None, rho: 0.0 },
        FamilySpec::ScaledMixture { mu: vec![0.0], p: 0.2, w: 0.5, rho: 0.0 },
        FamilySpec::ScaledMixture { mu: vec![1.0], p: 0.5, w: 0.8, rho: 0.0 },
        FamilySpec::Normal { mu: vec![0.0; 3], sd: None, rho: 0.0 },
        FamilySpec::Normal { mu: vec![0.0, 0.5, -0.5], sd: Some(vec![1.0, 2.0, 0.5]), rho: 0.5 },
        FamilySpec::ScaledMixture { mu: vec![0.0; 3], p: 0.3, w: 0.5, rho: 0.5 },
    ]
}

const COVERAGE_ALPHAS: [(f64, f64); 3] = [(0.0, 0.05), (0.05, 0.0), (0.025, 0.025)];

/// Checks `|min coverage − nominal| ≤ 0.03` for every method and α pair.
fn check_min_coverage(name: &str, report: &CoverageReport, methods: &[IntervalMethod], r: usize) {
    let mut pass = true;
    let mut detail = Vec::new();
    for &m in methods {
        for &(a1, a2) in &COVERAGE_ALPHAS {
            let w = report.worst_for(m, a1, a2).unwrap();
            let min = w.min_coverage.unwrap_or(f64::NAN);
            let ok = (min - w.nominal).abs() <= 0.03 && w.failed_points == 0;
            pass &= ok;
            detail.push(format!("{} ({a1},{a2}): min {min:.4} at grid {:?}", m.name(), w.grid));
        }
    }
    let cov: Vec<String> = report
        .rows
        .iter()
        .map(|row| format!("[{} {} ({},{}) {:.4}]", row.family, row.method, row.alpha1, row.alpha2, row.coverage.unwrap_or(f64::NAN)))
        .collect();
    verdict(name, pass, &format!("R = {r}, nominal +- 0.03; {}", detail.join("; ")));
    assert!(pass, "{}", cov.join(" "));
}

#[test]
fn subsampling_uniform_coverage() {
    let r = replicates();
    let methods = [IntervalMethod::SubsamplingOracle, IntervalMethod::SubsamplingFeasible];
    let spec = CoverageSpec {
        families: max_studentized_families(),
        n: 200,
        root: RootSpec::MaxStudentizedMean,
        methods: methods.to_vec(),
        alphas: COVERAGE_ALPHAS.to_vec(),
        resampling: resampling(),
        tau_exponent: 0.5,
        replicates: r,
        seed: 4,
    };
    let report = mc_coverage(&spec).unwrap();
    assert_eq!(spec.resampling.b_for(200).unwrap(), 14);
    check_min_coverage("subsampling uniform coverage, max-studentized root", &report, &methods, r);
}

#[test]
fn bootstrap_uniform_coverage() {
    let r = replicates();
    let methods = [IntervalMethod::Bootstrap];
    let spec = CoverageSpec {
        families: max_studentized_families(),
        n: 200,
        root: RootSpec::MaxStudentizedMean,
        methods: methods.to_vec(),
        alphas: COVERAGE_ALPHAS.to_vec(),
        resampling: resampling(),
        tau_exponent: 0.5,
        replicates: r,
        seed: 5,
    };
    let report = mc_coverage(&spec).unwrap();
    check_min_coverage("bootstrap uniform coverage, max-studentized root", &report, &methods, r);
}

// ---------------------------------------------------------------------------
// Bernoulli boundary failure of the bootstrap

#[test]
fn bootstrap_fails_at_bernoulli_boundary() {
    let r = replicates();
    let spec = FailureDemoSpec {
        deltas: vec![0.1],
        n: 100,
        alphas: vec![(0.025, 0.025), (0.0, 0.05), (0.05, 0.05)],
        methods: vec![IntervalMethod::Bootstrap],
        resampling: resampling(),
        replicates: r,
        seed: 6,
    };
    let report = spec.run().unwrap();
    let theta = boundary_theta(0.1, 100).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for row in &report.rows {
        assert_eq!(row.theta, theta);
        let (c, se) = (row.coverage.unwrap(), row.se.unwrap());
        let ok = c <= 0.1 + 3.0 * se;
        pass &= ok;
        detail.push(format!("({},{}): coverage {c:.4} (<= 0.1 + 3*{se:.4})", row.alpha1, row.alpha2));
    }
    verdict("bootstrap boundary failure", pass, &format!("R = {r}, theta = {theta:.7}; {}", detail.join("; ")));
    assert!(pass, "{report:?}");
}

// ---------------------------------------------------------------------------
// Constrained mean under drifting laws

#[test]
fn constrained_mean_drift_asymmetry() {
    let r = replicates();
    let methods = vec![IntervalMethod::SubsamplingOracle, IntervalMethod::SubsamplingFeasible];
    let spec = DriftSpec {
        h_grid: vec![0.0, 0.3, 1.0, 3.0],
        n_grid: vec![400],
        alphas: vec![(0.0, 0.05), (0.25, 0.0), (0.75, 0.0)],
        methods: methods.clone(),
        resampling: resampling(),
        replicates: r,
        seed: 7,
    };
    let report = drift_demo(&spec).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for &m in &methods {
        let upper_min =
            report.rows_for(m, 0.0, 0.05).map(|row| row.coverage.unwrap()).fold(f64::INFINITY, f64::min);
        let lower_min =
            report.rows_for(m, 0.25, 0.0).map(|row| row.coverage.unwrap()).fold(f64::INFINITY, f64::min);
        pass &= upper_min >= 0.92 && lower_min < 0.72;
        detail.push(format!("{}: upper min {upper_min:.4} (>= 0.92), lower(0.25) min {lower_min:.4} (< 0.72)", m.name()));
    }
    let dev_max = report
        .rows_for(IntervalMethod::SubsamplingFeasible, 0.75, 0.0)
        .map(|row| row.mean_abs_deviation.unwrap())
        .fold(0.0, f64::max);
    pass &= dev_max <= 0.1;
    detail.push(format!("feasible max over h of mean |L^-1(0.75) - 0.6745| {dev_max:.4} (<= 0.1)"));
    verdict("constrained-mean drift asymmetry", pass, &format!("R = {r}; {}", detail.join("; ")));
    assert!(pass, "{report:?}");
}

// ---------------------------------------------------------------------------
// Moment inequality tests

#[test]
fn moment_inequality_size_and_power() {
    let r = replicates();
    let mut families = Vec::new();
    for rho in [0.0, 0.5] {
        for mu in [[0.0, 0.0], [0.0, -1.0], [-1.0, -1.0]] {
            families.push(FamilySpec::Normal { mu: mu.to_vec(), sd: None, rho });
        }
    }
    families.push(FamilySpec::Normal { mu: vec![0.5, 0.0], sd: None, rho: 0.0 });
    let spec = SizeSpec {
        families,
        n: 200,
        tests: vec![TestSpec::SubsamplingMax {}, TestSpec::BootstrapAqlr { eps: 0.05 }],
        alpha: 0.05,
        resampling: resampling(),
        replicates: r,
        seed: 8,
    };
    let report = mc_size(&spec).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for t in &spec.tests {
        let w = report.worst_for(t.name()).unwrap();
        let max = w.max_size.unwrap();
        let power = report.row(6, t.name()).unwrap();
        assert!(!power.null);
        let pw = power.rejection_rate.unwrap();
        pass &= max <= 0.07 && pw >= 0.5;
        detail.push(format!("{}: max size {max:.4} (<= 0.07) at grid {:?}, power {pw:.4} (>= 0.5)", t.name(), w.grid));
    }
    verdict("moment inequality size", pass, &format!("R = {r}; {}", detail.join("; ")));
    assert!(pass, "{report:?}");
}

// ---------------------------------------------------------------------------
// Stepdown familywise error rate

#[test]
fn stepdown_controls_fwer() {
    let r = replicates();
    let spec = FwerSpec {
        families: vec![
            FamilySpec::Normal { mu: vec![0.0; 4], sd: None, rho: 0.0 },
            FamilySpec::Normal { mu: vec![0.0, 0.0, 1.0, 1.0], sd: None, rho: 0.0 },
            FamilySpec::Normal { mu: vec![-1.0; 4], sd: None, rho: 0.0 },
        ],
        n: 200,
        methods: vec![StepdownMethod::Subsampling, StepdownMethod::Bootstrap],
        alpha: 0.05,
        resampling: resampling(),
        fresh_draws: false,
        replicates: r,
        seed: 9,
    };
    let report = mc_fwer(&spec).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for &m in &spec.methods {
        let w = report.worst_for(m).unwrap();
        let max = w.max_fwer.unwrap();
        pass &= max <= 0.07 && w.trace_violations == 0;
        detail.push(format!("{m:?}: max FWER {max:.4} (<= 0.07) at grid {:?}, trace violations {}", w.grid, w.trace_violations));
    }
    for row in &report.rows {
        assert_eq!(row.trace_violations, 0, "{row:?}");
    }
    verdict("stepdown FWER", pass, &format!("R = {r}; {}", detail.join("; ")));
    assert!(pass, "{report:?}");
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov root

fn two_sided_within(name: &str, report: &CoverageReport, methods: &[IntervalMethod], r: usize) {
    let mut pass = true;
    let mut detail = Vec::new();
    for row in &report.rows {
        let c = row.coverage.unwrap_or(f64::NAN);
        let ok = (c - 0.95).abs() <= 0.03;
        pass &= ok;
        detail.push(format!("{} {}: {c:.4}", row.family, row.method));
    }
    for &m in methods {
        assert!(report.rows.iter().any(|row| row.method == m.name()));
    }
    verdict(name, pass, &format!("R = {r}, 0.95 +- 0.03; {}", detail.join("; ")));
    assert!(pass, "{report:?}");
}

#[test]
fn ks_root_coverage() {
    let r = replicates();
    let methods = [IntervalMethod::SubsamplingFeasible, IntervalMethod::Bootstrap];
    let spec = CoverageSpec {
        families: vec![
            FamilySpec::Uniform { lo: 0.0, hi: 1.0 },
            FamilySpec::Bernoulli { p: 0.3 },
            FamilySpec::Bernoulli { p: 0.5 },
            FamilySpec::Bernoulli { p: 0.7 },
        ],
        n: 400,
        root: RootSpec::Ks,
        methods: methods.to_vec(),
        alphas: vec![(0.025, 0.025)],
        resampling: resampling(),
        tau_exponent: 0.5,
        replicates: r,
        seed: 10,
    };
    let report = mc_coverage(&spec).unwrap();
    two_sided_within("KS root coverage", &report, &methods, r);
}

// ---------------------------------------------------------------------------
// U-statistics

/// Independent lexicographic enumeration for kernels of degree 2 and 3.
fn enumerate_u(xs: &[f64], h: &Kernel) -> f64 {
    let n = xs.len();
    let (mut sum, mut terms) = (0.0, 0usize);
    match h.degree() {
        2 => {
            for i in 0..n {
                for j in i + 1..n {
                    sum += h.eval(&[xs[i], xs[j]]);
                    terms += 1;
                }
            }
        }
        3 => {
            for i in 0..n {
                for j in i + 1..n {
                    for l in j + 1..n {
                        sum += h.eval(&[xs[i], xs[j], xs[l]]);
                        terms += 1;
                    }
                }
            }
        }
        d => panic!("degree {d}"),
    }
    sum / terms as f64
}

#[test]
fn u_statistic_matches_enumeration_exactly() {
    let mut rng = rng(11);
    let kernels = [
        Kernel::variance(),
        Kernel::product(),
        Kernel::new(2, "gini", |a: &[f64]| (a[0] - a[1]).abs()),
        Kernel::new(3, "median3", |a: &[f64]| {
            let mut v = a.to_vec();
            v.sort_by(f64::total_cmp);
            v[1]
        }),
    ];
    let mut checks = 0;
    for n in 3..=10 {
        for _ in 0..25 {
            let xs: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0 + 1.0).collect();
            let sample = Sample::from_column(xs.clone()).unwrap();
            for h in &kernels {
                let u = u_statistic(&sample, h, &UStatConfig::default()).unwrap();
                assert!(u.complete);
                assert_eq!(u.value.to_bits(), enumerate_u(&xs, h).to_bits(), "n = {n}, kernel {}", h.name());
                checks += 1;
            }
        }
    }
    verdict("u_statistic exact enumeration", true, &format!("{checks} samples with n <= 10, bit-identical"));
}

/// Bernoulli(`p`) rescaled to mean 0 and variance 1. `p = 1/2` is excluded:
/// there the variance kernel is degenerate.
fn standardized_bernoulli(p: f64) -> FamilySpec {
    FamilySpec::TwoPoint { a: -(p / (1.0 - p)).sqrt(), b: ((1.0 - p) / p).sqrt(), p }
}

#[test]
fn u_statistic_variance_kernel_coverage() {
    let r = replicates();
    let methods = [IntervalMethod::SubsamplingFeasible, IntervalMethod::Bootstrap];
    let spec = CoverageSpec {
        families: std::iter::once(FamilySpec::Normal { mu: vec![0.0], sd: None, rho: 0.0 })
            .chain([0.1, 0.2, 0.3].map(standardized_bernoulli))
            .collect(),
        n: 200,
        root: RootSpec::UStat { kernel: Kernel::variance(), config: UStatConfig::default() },
        methods: methods.to_vec(),
        alphas: vec![(0.025, 0.025)],
        resampling: resampling(),
        tau_exponent: 0.5,
        replicates: r,
        seed: 12,
    };
    let report = mc_coverage(&spec).unwrap();
    two_sided_within("U-statistic variance-kernel coverage", &report, &methods, r);
}

// ---------------------------------------------------------------------------
// AQLR orthant projection against grid search

/// `(z − t)' Ω⁻¹ (z − t)` with `Ω⁻¹` given explicitly.
fn quad(z: &[f64], t: &[f64], inv: &[Vec<f64>]) -> f64 {
    let d: Vec<f64> = z.iter().zip(t).map(|(a, b)| a - b).collect();
    let mut s = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            s += d[i] * inv[i][j] * d[j];
        }
    }
    s
}

/// Gauss-Jordan inverse, independent of the crate's Cholesky path.
fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        let piv = a[c][c];
        for v in a[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..k {
            if r != c {
                let f = a[r][c];
                let src = a[c].clone();
                for (v, s) in a[r].iter_mut().zip(src) {
                    *v -= f * s;
                }
            }
        }
    }
    a.into_iter().map(|r| r[k..].to_vec()).collect()
}

/// Minimum over `t ≤ 0` by a coarse-to-fine box grid: 41 points per axis
/// on `[−M, 0]^k`, then recentred on the best point and halved each round.
fn grid_oracle(z: &[f64], inv: &[Vec<f64>]) -> f64 {
    let k = z.len();
    let m = 50.0 + 20.0 * z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut center: Vec<f64> = vec![-m / 2.0; k];
    let mut half = m / 2.0;
    let mut best = f64::INFINITY;
    let steps = 41usize;
    while half > 1e-7 {
        let h = 2.0 * half / (steps - 1) as f64;
        let mut best_t = center.clone();
        for idx in 0..steps.pow(k as u32) {
            let mut rem = idx;
            let t: Vec<f64> = (0..k)
                .map(|j| {
                    let i = rem % steps;
                    rem /= steps;
                    (center[j] - half + i as f64 * h).min(0.0)
                })
                .collect();
            let v = quad(z, &t, inv);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        center = best_t;
        half /= 2.0;
    }
    best
}

#[test]
fn aqlr_active_set_matches_grid_search() {
    let mut rng = rng(12);
    let mut worst: f64 = 0.0;
    let mut below = 0;
    for _ in 0..200 {
        let k = rng.random_range(1..=3);
        let a: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let mut s = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                s[i][j] = (0..k).map(|l| a[i][l] * a[j][l]).sum::<f64>() + if i == j { 0.05 } else { 0.0 };
            }
        }
        let corr: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| s[i][j] / (s[i][i] * s[j][j]).sqrt()).collect()).collect();
        let omega = omega_tilde(&SquareMatrix::from_rows(&corr).unwrap(), 0.05).unwrap();
        let z: Vec<f64> = (0..k).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let exact = orthant_projection(&z, &omega).unwrap();
        let inv = invert(&omega.rows());
        let oracle = grid_oracle(&z, &inv);
        worst = worst.max((exact.value - oracle).abs());
        // The grid minimum can never undercut the true minimum.
        if oracle < exact.value - 1e-9 {
            below += 1;
        }
    }
    let pass = worst <= 1e-4 && below == 0;
    verdict("AQLR active set vs grid search", pass, &format!("200 instances, k <= 3, max |difference| {worst:.2e} (<= 1e-4)"));
    assert!(pass, "worst {worst}, grid below exact {below} times");
}
