//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use noma_waterfill::allocator::{
    cluster_rate_at_budget, intra_cluster_allocate, intra_cluster_constants, q_min, RateFraction, SolverOptions,
};
use noma_waterfill::channel::ScenarioConfig;
use noma_waterfill::grouping::SchemeSpec;
use noma_waterfill::harness::{run_sweep, ExperimentConfig, Sweep, SweepRow};
use noma_waterfill::model::{cluster_sum_rate, member_rates, ClusterInstance};
use noma_waterfill::oracle::{self, AgreementReport};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Clusters of 1-8 users, r in [0, 4], CNR log-uniform over six decades.
fn cluster_corpus(seed: u64, count: usize) -> Vec<ClusterInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let size = rng.gen_range(1..=8);
            oracle::random_cluster(&mut rng, 0, 0, size, 1e6, 6.0, 4.0)
        })
        .collect()
}

/// Budgets at or above Q_min: a fifth exactly at Q_min, the rest up to 4x.
fn budget_corpus(seed: u64, clusters: &[ClusterInstance]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    clusters
        .iter()
        .map(|c| {
            let q = q_min(c);
            if rng.gen_bool(0.2) {
                q
            } else {
                q * rng.gen_range(1.0..=4.0) + rng.gen_range(0.0..=1.0) / c.head().cnr
            }
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn c1_consistency() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for c in cluster_corpus(1, 1000) {
        let k = intra_cluster_constants(&c, f64::MAX);
        let head_beta = RateFraction::new(c.rate_fraction(c.head_index())).beta_pm;
        let via_constants = (head_beta / c.head().cnr + k.virtual_user.c) / k.virtual_user.alpha;
        worst = worst.max(rel(q_min(&c), via_constants));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 10.0, format!("max rel err {worst:.2e} (<= 1e-10), {secs:.2}s (< 10s)"))
}

fn c2_tightness() -> Outcome {
    let clusters = cluster_corpus(2, 1000);
    let budgets = budget_corpus(22, &clusters);
    let (mut tight, mut head_short, mut sum_err) = (0.0f64, 0.0f64, 0.0f64);
    for (c, &q) in clusters.iter().zip(&budgets) {
        let p = intra_cluster_allocate(c, q).expect("budget above q_min");
        let rates = member_rates(c, &p).unwrap();
        for (k, user) in c.users().iter().enumerate() {
            if k == c.head_index() {
                head_short = head_short.max((user.min_rate - rates[k]) / user.min_rate.max(1e-300));
            } else {
                tight = tight.max(rel(rates[k], user.min_rate));
            }
        }
        sum_err = sum_err.max(rel(p.iter().sum(), q));
    }
    outcome(
        tight <= 1e-9 && head_short <= 1e-9 && sum_err <= 1e-12,
        format!(
            "non-head rate gap {tight:.2e} (<= 1e-9), head shortfall {:.2e} (<= 1e-9), power sum gap {sum_err:.2e} (<= 1e-12)",
            head_short.max(0.0)
        ),
    )
}

fn c3_closed_form_rate() -> Outcome {
    let clusters = cluster_corpus(2, 1000);
    let budgets = budget_corpus(22, &clusters);
    let mut worst: f64 = 0.0;
    for (c, &q) in clusters.iter().zip(&budgets) {
        let closed = cluster_rate_at_budget(c, q).unwrap();
        let direct = cluster_sum_rate(c, &intra_cluster_allocate(c, q).unwrap()).unwrap();
        worst = worst.max(rel(closed, direct));
    }
    outcome(worst <= 1e-9, format!("max rel gap {worst:.2e} (<= 1e-9)"))
}

fn c4_telescoping() -> Outcome {
    let mut worst: f64 = 0.0;
    for c in cluster_corpus(2, 1000) {
        let alpha = intra_cluster_constants(&c, f64::MAX).virtual_user.alpha;
        let weaker_r: f64 = (0..c.head_index()).map(|k| c.rate_fraction(k)).sum();
        worst = worst.max(rel(alpha, (-weaker_r).exp2()));
    }
    outcome(worst <= 1e-12, format!("max rel err {worst:.2e} (<= 1e-12)"))
}

fn agreement() -> AgreementReport {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    oracle::agreement_suite(&mut rng, 1000, SolverOptions { eps: 1e-10, max_iter: 200 }).expect("feasible corpus")
}

fn c5_oracle_agreement(r: &AgreementReport) -> Outcome {
    let pass = r.budgets.max_rel_gap <= 1e-6 && r.objective.max_rel_gap <= 1e-8 && r.q_min.max_rel_gap <= 1e-9;
    let mut detail = format!(
        "{} instances: budget gap {:.2e} P_max (<= 1e-6), objective gap {:.2e} (<= 1e-8), q_min gap {:.2e} (<= 1e-9)",
        r.instances, r.budgets.max_rel_gap, r.objective.max_rel_gap, r.q_min.max_rel_gap
    );
    if !pass {
        detail += &format!("\n    worst budget case: {}", r.budgets.argmax_case);
    }
    outcome(pass, detail)
}

fn c6_grid_search() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_margin = f64::INFINITY;
    let mut failures = 0;
    for _ in 0..100 {
        let c = oracle::random_cluster(&mut rng, 0, 0, 2, 1.0, 3.0, 2.0);
        let q = q_min(&c) * rng.gen_range(1.05..=5.0) + rng.gen_range(0.0..=2.0) / c.head().cnr;
        let closed = cluster_rate_at_budget(&c, q).unwrap();
        let grid = oracle::grid_search_intra(&c, q, 10_000).unwrap();
        let margin = closed - (grid.sum_rate - grid.resolution);
        worst_margin = worst_margin.min(margin / grid.resolution);
        if margin < 0.0 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("100 two-user clusters, {failures} below grid best - resolution; tightest margin {worst_margin:.3} resolutions"),
    )
}

fn c7_kkt(r: &AgreementReport) -> Outcome {
    outcome(
        r.max_kkt_gap <= 1e-6 && r.box_edge_violations == 0,
        format!("free-user marginal vs nu {:.2e} (<= 1e-6), clamped off-edge {}", r.max_kkt_gap, r.box_edge_violations),
    )
}

fn c8_convergence(r: &AgreementReport) -> Outcome {
    outcome(
        r.max_residual <= 1e-10 && r.max_iterations <= 200 && r.nonconverged == 0,
        format!(
            "max residual {:.2e} (<= 1e-10), max iterations {} (<= 200), nonconverged {}, \
             {} of {} instances with the cellular constraint slack",
            r.max_residual, r.max_iterations, r.nonconverged, r.slack_instances, r.instances
        ),
    )
}

fn sweep_at(seed: u64) -> Vec<SweepRow> {
    let config = ExperimentConfig {
        scenario: ScenarioConfig { seed, ..Default::default() },
        schemes: vec![
            SchemeSpec::FullyScSic,
            SchemeSpec::Noma { u_max: 6 },
            SchemeSpec::Noma { u_max: 4 },
            SchemeSpec::Noma { u_max: 2 },
            SchemeSpec::Fdma,
        ],
        sweep: Sweep::MinRate { values_bps: vec![3e6] },
        fixed_num_users: 30,
        trials: 500,
        ..Default::default()
    };
    run_sweep(&config).expect("sweep runs")
}

/// Checks the orderings on one sweep; returns the failed conditions.
fn ordering_conditions(rows: &[SweepRow]) -> (Vec<String>, String) {
    let o: Vec<f64> = rows.iter().map(|r| r.outage_probability).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.avg_sum_rate_bps).collect();
    let [sc, n6, n4, n2, fd] = [o[0], o[1], o[2], o[3], o[4]];
    let [ssc, s6, s4, s2, sfd] = [s[0], s[1], s[2], s[3], s[4]];
    let mut failed = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failed.push(what.to_string());
        }
    };
    check(sc <= n6, "outage SC-SIC <= 6-NOMA");
    check(n6 <= n4, "outage 6-NOMA <= 4-NOMA");
    check(n4 < n2, "outage 4-NOMA < 2-NOMA");
    check(n2 < fd, "outage 2-NOMA < FDMA");
    check(fd - n2 >= 0.2, "outage FDMA - 2-NOMA >= 0.2");
    check((n6 - n4).abs() <= 0.05, "|outage 6-NOMA - 4-NOMA| <= 0.05");
    check(ssc >= s6, "sum-rate SC-SIC >= 6-NOMA");
    check(s6 >= s4, "sum-rate 6-NOMA >= 4-NOMA");
    check(s4 > s2, "sum-rate 4-NOMA > 2-NOMA");
    check(s2 > sfd, "sum-rate 2-NOMA > FDMA");
    let summary = format!(
        "outage [SC-SIC {sc:.3}, 6-NOMA {n6:.3}, 4-NOMA {n4:.3}, 2-NOMA {n2:.3}, FDMA {fd:.3}]; \
         avg sum-rate Mbps [{:.1}, {:.1}, {:.1}, {:.1}, {:.1}]",
        ssc / 1e6,
        s6 / 1e6,
        s4 / 1e6,
        s2 / 1e6,
        sfd / 1e6
    );
    (failed, summary)
}

fn c9_scheme_ordering() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for seed in [1, 2] {
        let (failed, summary) = ordering_conditions(&sweep_at(seed));
        pass &= failed.is_empty();
        detail += &format!("\n    seed {seed}: {summary}");
        if !failed.is_empty() {
            detail += &format!("\n    seed {seed} violated: {}", failed.join("; "));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 600.0;
    outcome(pass, format!("K=30, R_min=3 Mbps, 500 trials x 2 seeds in {secs:.1}s (<= 600s){detail}"))
}

fn c10_concavity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let size = rng.gen_range(1..=8);
        let c = oracle::random_cluster(&mut rng, 0, 0, size, 1e6, 6.0, 0.0);
        // Powers spanning a few orders around the head's noise-limited scale.
        let scale = 1.0 / c.users()[0].cnr;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..size).map(|_| scale * 10f64.powf(rng.gen_range(-3.0..=1.0)) * rng.gen::<f64>()).collect()
        };
        let p1 = draw(&mut rng);
        let p2 = draw(&mut rng);
        let t: f64 = rng.gen_range(0.0..1.0);
        let mid: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let f1 = cluster_sum_rate(&c, &p1).unwrap();
        let f2 = cluster_sum_rate(&c, &p2).unwrap();
        let fm = cluster_sum_rate(&c, &mid).unwrap();
        let chord = t * f1 + (1.0 - t) * f2;
        let slack = 1e-9 * f1.max(f2);
        if fm < chord - slack {
            violations += 1;
        }
        worst = worst.max((chord - fm) / f1.max(f2).max(f64::MIN_POSITIVE));
    }
    outcome(
        violations == 0,
        format!("10000 chords, {violations} violations, worst excess {:.2e} (<= 1e-9)", worst.max(0.0)),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let report = agreement();
    let criteria: Vec<Criterion> = vec![
        ("C1 Q_min closed-form consistency", Box::new(c1_consistency)),
        ("C2 intra-cluster tightness", Box::new(c2_tightness)),
        ("C3 closed-form cluster rate", Box::new(c3_closed_form_rate)),
        ("C4 alpha telescoping identity", Box::new(c4_telescoping)),
        ("C5 oracle agreement", Box::new(|| c5_oracle_agreement(&report))),
        ("C6 grid-search optimality", Box::new(c6_grid_search)),
        ("C7 KKT water level", Box::new(|| c7_kkt(&report))),
        ("C8 bisection convergence", Box::new(|| c8_convergence(&report))),
        ("C9 scheme ordering at K=30, 3 Mbps", Box::new(c9_scheme_ordering)),
        ("C10 sum-rate concavity", Box::new(c10_concavity)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
