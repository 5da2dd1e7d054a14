//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//! Every scenario runs twice at its defaults; criteria 1 to 7, 9 and 10 read
//! the first run's report, 11 compares the two runs byte for byte and 8 plays
//! its own games.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lambdaflow::game::{play_many, GameMode, OrthogonalToCenter, RandomMaximizer, State};
use lambdaflow::{Domain, PayoffData};
use lambdaflow_cli::config::RawConfig;
use lambdaflow_cli::report::Report;
use lambdaflow_cli::scenarios::{run_scenario, Outcome, SCENARIOS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240601;

struct Run {
    outcome: Outcome,
    elapsed: Duration,
}

fn run(name: &str) -> Run {
    let start = Instant::now();
    let (_, outcome) = run_scenario(name, &RawConfig::default(), SEED, None)
        .unwrap_or_else(|e| panic!("scenario {name} failed to run: {e}"));
    Run { outcome, elapsed: start.elapsed() }
}

/// All named checks pass; returns the summary of measured values.
fn checks(report: &Report, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in names {
        match report.check(n) {
            Some(c) => {
                ok &= c.passed;
                parts.push(format!("{n}={:.4e}", c.measured));
            }
            None => {
                ok = false;
                parts.push(format!("{n}=missing"));
            }
        }
    }
    (ok, parts.join(" "))
}

fn prefixed<'a>(report: &'a Report, prefix: &str) -> Vec<&'a str> {
    report.checks.iter().filter(|c| c.name.starts_with(prefix)).map(|c| c.name.as_str()).collect()
}

/// Orthogonal-subspace minimizer on the unit disk, j = 1, from random starts.
/// Counts trajectories with tau > (R^2 - |x - x0|^2) / eps^2.
fn affine_strategy_bound() -> (bool, String) {
    let eps = 0.1;
    let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
    let p = PayoffData::stationary(d.clone(), |x| 0.5 * x[0] - 0.3 * x[1] + 0.1, |_| 0.0);
    let orth = OrthogonalToCenter { center: vec![0.0, 0.0], j: 1 };
    let max = RandomMaximizer { seed: SEED };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut total, mut violations, mut worst) = (0usize, 0usize, 0.0f64);
    for k in 0..10 {
        let x = loop {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if x[0] * x[0] + x[1] * x[1] < 0.95 {
                break x.to_vec();
            }
        };
        let bound = (1.0 - x[0] * x[0] - x[1] * x[1]) / (eps * eps);
        let start = State { x, t: 0.0 };
        let trs = play_many(&d, &p, &orth, &max, &start, eps, GameMode::elliptic(), 1000, SEED + k).unwrap();
        for t in &trs {
            total += 1;
            if t.tau as f64 > bound {
                violations += 1;
                worst = worst.max(t.tau as f64 - bound);
            }
        }
    }
    (violations == 0, format!("{violations}/{total} trajectories exceed the bound, by at most {worst:.4} turns"))
}

fn main() -> ExitCode {
    let mut first = Vec::new();
    for name in SCENARIOS {
        eprintln!("running {name}");
        first.push((name, run(name)));
    }
    let get = |n: &str| &first.iter().find(|(m, _)| *m == n).unwrap().1;
    let mut lines: Vec<(usize, bool, String)> = Vec::new();

    let heat = get("heat1d");
    let (ok, s) = checks(&heat.outcome.report, &["sup_error_vs_fourier", "decay_rate_rel_error"]);
    let fast = heat.elapsed < Duration::from_secs(30);
    lines.push((1, ok && fast, format!("{s} runtime={:.1}s", heat.elapsed.as_secs_f64())));

    let m = &get("matrix-props").outcome.report;
    lines.push((2, checks(m, &["quadratic_step_error_over_bound"]).0, checks(m, &["quadratic_step_error_over_bound"]).1));
    let (ok, s) = checks(m, &["weyl_inequalities_max_violation"]);
    lines.push((3, ok, s));

    let env = get("disk-envelope");
    let (ok, s) = checks(&env.outcome.report, &["elliptic_j1_vs_convex_envelope", "elliptic_jN_vs_concave_envelope"]);
    let fast = env.elapsed < Duration::from_secs(300);
    lines.push((4, ok && fast, format!("{s} runtime={:.1}s", env.elapsed.as_secs_f64())));

    let e = &get("eigen-decay").outcome.report;
    let mut names = prefixed(e, "fit");
    names.retain(|n| !n.ends_with("gap_nonincreasing"));
    let (ok, s) = checks(e, &names);
    lines.push((5, ok, s));

    let a = &get("affine-coincidence").outcome.report;
    let (ok, s) = checks(a, &["coincidence_j2_time", "below_coincidence_j1_time", "above_coincidence_j3_time"]);
    lines.push((6, ok, s));

    let g = &get("game-vs-dpp").outcome.report;
    let mut names = prefixed(g, "probe");
    let probes = names.len();
    names.extend(["martingale_identity", "exit_tail_slope", "exit_tail_uncensored"]);
    let (ok, s) = checks(g, &names);
    lines.push((7, ok && probes == 5, s));

    let (ok, s) = affine_strategy_bound();
    lines.push((8, ok, s));

    let seg = &get("segment-example").outcome.report;
    let (ok, s) = checks(
        seg,
        &["segment_floor_eps0", "segment_floor_eps1", "segment_floor_refinement_ratio", "off_segment_nodes_never_coinciding"],
    );
    lines.push((9, ok, s));

    let (ok, s) = checks(m, &["radial_barrier_identities"]);
    lines.push((10, ok, s));

    let mut differing = Vec::new();
    for (name, r) in &first {
        eprintln!("repeating {name}");
        let again = run(name);
        if again.outcome.artifacts.files != r.outcome.artifacts.files {
            differing.push(*name);
        }
    }
    let files: usize = first.iter().map(|(_, r)| r.outcome.artifacts.files.len()).sum();
    lines.push((11, differing.is_empty(), format!("{files} artifacts compared, differing scenarios: {differing:?}")));

    for (_, r) in &first {
        let failed: Vec<_> = r.outcome.report.checks.iter().filter(|c| c.gating && !c.passed).map(|c| &c.name).collect();
        println!("scenario {:<20} {}", r.outcome.report.scenario, if failed.is_empty() { "ok".into() } else { format!("failed {failed:?}") });
    }
    let mut all = true;
    for (k, ok, s) in &lines {
        all &= ok;
        println!("criterion {k:>2}: {}  {s}", if *ok { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
