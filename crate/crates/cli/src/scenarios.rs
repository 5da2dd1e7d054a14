//! The shipped experiments. Each one resolves its configuration, runs the
//! solvers, and returns a report with embedded thresholds plus the files to
//! export.

use std::f64::consts::PI;
use std::sync::Arc;

use lambdaflow::asymptotics::{
    decay_curve, estimate_principal_eigenvalue, fit_decay, halfspace_scenario, one_sided_coincidence,
    verify_radial_barrier, barrier_samples, Affine, DecayOptions, Extreme, Side,
};
use lambdaflow::dpp::{solve_parabolic_with, ParabolicSolution};
use lambdaflow::envelope::{boundary_samples, concave_envelope, convex_envelope, directional_envelope_bound};
use lambdaflow::game::{
    exit_tail, martingale_diagnostics, play_many, value_strategy_pair, GameMode, OrthogonalToCenter, RandomMaximizer,
    RandomMinimizer, State, ValueEstimate,
};
use lambdaflow::{
    build_grid, courant_fischer, detect_coincidence, dpp_update, eigenvalues_sym, generate_frames, lambda_j,
    solve_elliptic, solve_parabolic, Domain, DppConfig, InitialGuess, PayoffData, SymMatrix, ValueSlice,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ConfigError, Defaults, RawConfig, Resolved};
use crate::report::{decay_csv, Artifacts, Check, Report};

pub const SCENARIOS: [&str; 8] = [
    "heat1d",
    "affine-coincidence",
    "disk-envelope",
    "eigen-decay",
    "segment-example",
    "halfspace",
    "game-vs-dpp",
    "matrix-props",
];

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("unknown scenario `{0}`; expected one of {SCENARIOS:?}")]
    UnknownScenario(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failed: {0}")]
    Solver(#[from] lambdaflow::Error),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::UnknownScenario(_) | RunError::Config(_) => 2,
            RunError::Solver(lambdaflow::Error::NotConverged { .. }) => 3,
            RunError::Solver(_) | RunError::Io(_) => 1,
        }
    }
}

pub struct Outcome {
    pub report: Report,
    pub artifacts: Artifacts,
}

pub fn defaults(name: &str) -> Option<Defaults> {
    let base = Defaults::default();
    Some(match name {
        "heat1d" => Defaults {
            dims: &[1],
            dim: 1,
            radius: 0.5,
            center: &[0.5],
            epsilon: 0.02,
            horizon: 0.5,
            ..base
        },
        "affine-coincidence" => Defaults {
            dims: &[2, 3, 4],
            dim: 3,
            epsilon: 0.2,
            j: 2,
            horizon: 3.0,
            resolution: 24,
            ..base
        },
        "disk-envelope" => Defaults { resolution: 90, horizon: 2.0, ..base },
        "eigen-decay" => Defaults { horizon: 2.0, ..base },
        "segment-example" => Defaults { horizon: 3.0, ..base },
        "halfspace" => Defaults { horizon: 2.5, ..base },
        "game-vs-dpp" => Defaults { h_ratio: 0.25, horizon: 0.5, resolution: 90, ..base },
        "matrix-props" => Defaults { resolution: 90, ..base },
        _ => return None,
    })
}

/// Runs scenario `name`; nothing is written here.
pub fn run_scenario(name: &str, raw: &RawConfig, seed: u64, levels: Option<usize>) -> Result<(Resolved, Outcome), RunError> {
    let d = defaults(name).ok_or_else(|| RunError::UnknownScenario(name.to_string()))?;
    let mut r = raw.resolve(&d)?;
    if let Some(k) = levels {
        if k == 0 {
            return Err(ConfigError::Invalid { key: "output.levels", reason: "--levels must be at least 1".into() }.into());
        }
        r.levels = k;
    }
    let (checks, mut artifacts) = match name {
        "heat1d" => heat1d(&r, seed)?,
        "affine-coincidence" => affine_coincidence(&r, seed)?,
        "disk-envelope" => disk_envelope(&r, seed)?,
        "eigen-decay" => eigen_decay(&r, seed)?,
        "segment-example" => segment_example(&r, seed)?,
        "halfspace" => halfspace(&r, seed)?,
        "game-vs-dpp" => game_vs_dpp(&r, seed)?,
        "matrix-props" => matrix_props(&r, seed)?,
        _ => unreachable!("checked by defaults()"),
    };
    if !artifacts.files.iter().any(|(n, _)| n == "decay.csv") {
        artifacts.add("decay.csv", decay_csv(&[], &[]));
    }
    let report = Report::new(name, seed, checks);
    let meta = json!({
        "scenario": name,
        "seed": seed,
        "frame_seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "rng": lambdaflow::game::RNG_NAME,
        "config": r,
    });
    artifacts.add("meta.json", serde_json::to_string_pretty(&meta).expect("serializable") + "\n");
    artifacts.add("report.json", serde_json::to_string_pretty(&report).expect("serializable") + "\n");
    Ok((r, Outcome { report, artifacts }))
}

type Run = Result<(Vec<Check>, Artifacts), RunError>;

fn ball(r: &Resolved) -> Result<Domain, RunError> {
    Ok(Domain::ball(r.center.clone(), r.radius)?)
}

fn dpp_config(r: &Resolved, j: usize, seed: u64) -> DppConfig {
    DppConfig {
        epsilon: r.epsilon,
        j,
        horizon: r.horizon,
        resolution: r.resolution,
        seed,
        h: r.h,
        tolerance: r.tolerance,
        max_sweeps: r.max_sweeps,
        keep_every: 1,
    }
}

fn rel(x: &[f64], c: &[f64]) -> Vec<f64> {
    x.iter().zip(c).map(|(a, b)| a - b).collect()
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn fields(art: &mut Artifacts, sol: &ParabolicSolution, count: usize) {
    art.add_fields(&sol.grid, &sol.slices, &sol.levels, count);
}

fn heat1d(r: &Resolved, seed: u64) -> Run {
    let d = ball(r)?;
    let (a, len) = (r.center[0] - r.radius, 2.0 * r.radius);
    let k = PI / len;
    let p = PayoffData::stationary(d.clone(), |_| 0.0, move |x| (k * (x[0] - a)).sin());
    let sol = solve_parabolic(&d, &p, &dpp_config(r, 1, seed))?;
    let last = sol.last();
    let decay = (-k * k * last.t).exp();
    let err = sol
        .grid
        .interior_nodes()
        .iter()
        .map(|&i| (last.values[i] - decay * (k * (sol.grid.point(i)[0] - a)).sin()).abs())
        .fold(0.0, f64::max);
    let z = ValueSlice::from_fn(&sol.grid, 0.0, r.epsilon, |_| 0.0);
    let nodes = sol.grid.interior_nodes();
    let fit = fit_decay(&sol.slices, &z, nodes, &DecayOptions { tolerance: r.tolerance, transient: 0.1 * r.horizon })?;
    let mu_exact = k * k;
    let mu_err = fit.mu.map_or(f64::INFINITY, |m| (m - mu_exact).abs() / mu_exact);
    let checks = vec![
        Check::at_most("sup_error_vs_fourier", err, f64::max(0.05, 5.0 * r.epsilon)).detail(format!("t = {}", last.t)),
        Check::at_most("decay_rate_rel_error", mu_err, 0.15)
            .detail(format!("fitted mu = {:?}, exact = {mu_exact}", fit.mu)),
        Check::at_least("decay_fit_r_squared", fit.r_squared, 0.9),
    ];
    let mut art = Artifacts::default();
    fields(&mut art, &sol, r.levels);
    art.add("decay.csv", decay_csv(&fit.times, &fit.gaps));
    Ok((checks, art))
}

fn affine_coincidence(r: &Resolved, seed: u64) -> Run {
    let d = ball(r)?;
    let n = r.dim;
    let pi = Affine { a: r.affine.clone(), b: r.offset };
    let bound = 2.0 * r.radius * r.radius + 0.5;
    let mut checks = Vec::new();
    let mut art = Artifacts::default();
    let variants = [(r.j, Side::Both, 1.0), (1, Side::Below, 1.0), (n, Side::Above, -1.0)];
    for (k, &(j, side, sign)) in variants.iter().enumerate() {
        let (pg, pu, c, rad) = (pi.clone(), pi.clone(), r.center.clone(), r.radius);
        let p = PayoffData::stationary(d.clone(), move |x| pg.eval(x), move |x| {
            pu.eval(x) + sign * (rad * rad - sq(&rel(x, &c)))
        });
        let sol = solve_parabolic(&d, &p, &dpp_config(r, j, seed))?;
        let z = ValueSlice::from_fn(&sol.grid, f64::INFINITY, r.epsilon, |x| pi.eval(x));
        let nodes = sol.grid.interior_nodes();
        let rep = one_sided_coincidence(&sol.slices, &z, nodes, r.coincidence_tol, side)?;
        let tight = one_sided_coincidence(&sol.slices, &z, nodes, 1e-6, side)?;
        let label = match side {
            Side::Both => format!("coincidence_j{j}"),
            Side::Below => format!("below_coincidence_j{j}"),
            Side::Above => format!("above_coincidence_j{j}"),
        };
        let t_star = rep.global.unwrap_or(f64::INFINITY);
        let mut check = Check::at_most(&format!("{label}_time"), t_star, bound)
            .detail(format!("tol = {}, T* at tol 1e-6 = {:?}, horizon = {}", rep.tolerance, tight.global, rep.horizon));
        if side == Side::Both && !(1 < j && j < n) {
            // two-sided coincidence is only expected for 1 < j < N
            check = check.informational();
        }
        checks.push(check);
        if k == 0 {
            let (times, gaps) = decay_curve(&sol.slices, &z, nodes);
            art.add("decay.csv", decay_csv(&times, &gaps));
            fields(&mut art, &sol, r.levels);
        }
    }
    Ok((checks, art))
}

fn cos2(c: Vec<f64>) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone + 'static {
    move |x: &[f64]| {
        let v = rel(x, &c);
        let s = sq(&v);
        if s == 0.0 {
            0.0
        } else {
            (v[0] * v[0] - v[1] * v[1]) / s
        }
    }
}

fn disk_envelope(r: &Resolved, seed: u64) -> Run {
    let d = ball(r)?;
    let g = cos2(r.center.clone());
    let p = PayoffData::stationary(d.clone(), g.clone(), |_| 0.0);
    let tol = f64::max(0.05, 5.0 * r.epsilon);
    let samples = boundary_samples(&d, g.clone(), r.h)?;
    let mut checks = Vec::new();
    let mut art = Artifacts::default();
    let z1 = solve_elliptic(&d, &p, &dpp_config(r, 1, seed), InitialGuess::Min)?;
    let nodes = z1.grid.interior_nodes().to_vec();
    let convex = convex_envelope(&d, &samples, &z1.grid)?;
    checks.push(
        Check::at_most("elliptic_j1_vs_convex_envelope", z1.slice.sup_distance(&convex, &nodes), tol)
            .detail(format!("sweeps = {}, samples = {}", z1.sweeps, samples.len())),
    );
    let z2 = solve_elliptic(&d, &p, &dpp_config(r, r.dim, seed), InitialGuess::Max)?;
    let concave = concave_envelope(&d, &samples, &z2.grid)?;
    checks.push(
        Check::at_most("elliptic_jN_vs_concave_envelope", z2.slice.sup_distance(&concave, &nodes), tol)
            .detail(format!("sweeps = {}", z2.sweeps)),
    );
    let origin = z1.grid.node_at(&r.center);
    if let Some(o) = origin {
        checks.push(Check::at_most("convex_envelope_at_center", (convex.values[o] + 1.0).abs(), 0.02).informational());
    }
    let sol = solve_parabolic(&d, &p, &dpp_config(r, 1, seed))?;
    let (times, gaps) = decay_curve(&sol.slices, &z1.slice, &nodes);
    let last = *gaps.last().expect("at least one level");
    checks.push(Check::at_most("parabolic_gap_nonincreasing", nonincreasing_violation(&gaps[1..]), 1e-9));
    checks.push(Check::at_most("parabolic_final_gap", last, gaps[0]).informational());
    art.add("decay.csv", decay_csv(&times, &gaps));
    fields(&mut art, &sol, r.levels);
    art.add("field_stationary_j1.csv", crate::report::field_csv(&z1.grid, &z1.slice));
    art.add("field_convex_envelope.csv", crate::report::field_csv(&z1.grid, &convex));
    Ok((checks, art))
}

/// Largest increase between consecutive entries.
fn nonincreasing_violation(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

type Initial = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn eigen_decay(r: &Resolved, seed: u64) -> Run {
    let d = ball(r)?;
    let extreme = if r.j == 1 {
        Extreme::Lambda1Negative
    } else if r.j == r.dim {
        Extreme::LambdaNPositive
    } else {
        return Err(ConfigError::Invalid { key: "solver.j", reason: "eigen-decay needs j = 1 or j = N".into() }.into());
    };
    // the j = 1 problem decays through negative profiles, j = N through positive ones
    let sign = if extreme == Extreme::Lambda1Negative { -1.0 } else { 1.0 };
    let (c, rad) = (r.center.clone(), r.radius);
    let bump = move |x: &[f64]| (1.0 - sq(&rel(x, &c)) / (rad * rad)).max(0.0);
    let c2 = r.center.clone();
    let initial: [Initial; 3] = [
        Box::new({
            let b = bump.clone();
            move |x| sign * b(x)
        }),
        Box::new({
            let b = bump.clone();
            let c = c2.clone();
            move |x| sign * b(x) * (1.0 + 0.5 * (x[0] - c[0]) / rad)
        }),
        Box::new({
            let c = c2.clone();
            move |x| sign * (0.5 * PI * sq(&rel(x, &c)).sqrt() / rad).cos().max(0.0)
        }),
    ];
    let mut mus = Vec::new();
    let mut checks = Vec::new();
    let mut art = Artifacts::default();
    let opts = DecayOptions { tolerance: r.tolerance, transient: 0.15 * r.horizon };
    for (k, u0) in initial.into_iter().enumerate() {
        let p = PayoffData::stationary(d.clone(), |_| 0.0, u0);
        let sol = solve_parabolic(&d, &p, &dpp_config(r, r.j, seed))?;
        let z = ValueSlice::from_fn(&sol.grid, f64::INFINITY, r.epsilon, |_| 0.0);
        let fit = fit_decay(&sol.slices, &z, sol.grid.interior_nodes(), &opts)?;
        checks.push(Check::at_least(&format!("fit{k}_r_squared"), fit.r_squared, 0.9));
        checks.push(Check::at_least(&format!("fit{k}_mu_positive"), fit.mu.unwrap_or(f64::NAN), f64::MIN_POSITIVE));
        checks.push(
            Check::at_most(&format!("fit{k}_gap_nonincreasing"), nonincreasing_violation(&fit.gaps[1..]), 1e-9)
                .informational(),
        );
        mus.push(fit.mu.unwrap_or(f64::NAN));
        if k == 0 {
            art.add("decay.csv", decay_csv(&fit.times, &fit.gaps));
            fields(&mut art, &sol, r.levels);
        }
    }
    let mut spread = 0.0f64;
    for a in 0..mus.len() {
        for b in a + 1..mus.len() {
            spread = spread.max((mus[a] - mus[b]).abs() / mus[a].max(mus[b]));
        }
    }
    checks.push(Check::at_most("fits_pairwise_rel_spread", if spread.is_nan() { f64::INFINITY } else { spread }, 0.2));
    let eig = estimate_principal_eigenvalue(&d, extreme, &DppConfig { tolerance: 1e-10, ..dpp_config(r, r.j, seed) })?;
    let worst = mus.iter().map(|m| (m - eig.mu).abs() / eig.mu).fold(0.0, f64::max);
    checks.push(
        Check::at_most("fits_vs_principal_eigenvalue", if worst.is_nan() { f64::INFINITY } else { worst }, 0.2)
            .detail(format!("mu estimate = {}, fitted = {mus:?}, iterations = {}", eig.mu, eig.iterations)),
    );
    art.add("field_profile.csv", crate::report::field_csv(&eig.grid, &eig.profile));
    Ok((checks, art))
}

fn segment_example(r: &Resolved, seed: u64) -> Run {
    let d = ball(r)?;
    let (c, rad) = (r.center.clone(), r.radius);
    let cg = c.clone();
    let g = move |x: &[f64]| (x[1] - cg[1]).abs();
    let cu = c.clone();
    let p = PayoffData::stationary(d.clone(), g.clone(), move |x| rad * rad - sq(&rel(x, &cu)) + (x[1] - cu[1]).abs());
    let mut checks = Vec::new();
    let mut art = Artifacts::default();
    let mut floors = Vec::new();
    for (k, scale) in [1.0, 0.5].into_iter().enumerate() {
        let cfg = DppConfig { epsilon: r.epsilon * scale, h: r.h * scale, ..dpp_config(r, r.j, seed) };
        let grid = build_grid(&d, cfg.h, cfg.epsilon)?;
        let segment: Vec<usize> = grid
            .interior_nodes()
            .iter()
            .copied()
            .filter(|&i| {
                let x = grid.point(i);
                (x[1] - c[1]).abs() < 1e-9 && (x[0] - c[0]).abs() <= 0.5 * rad + 1e-9
            })
            .collect();
        if segment.is_empty() {
            return Err(ConfigError::Invalid { key: "solver.h", reason: "lattice misses the central segment".into() }.into());
        }
        // only the coarse run keeps its slices
        let mut kept = Vec::new();
        let mut floor = f64::INFINITY;
        let (_, _, log) = solve_parabolic_with(&d, &p, &cfg, |_, s| {
            floor = floor.min(segment.iter().map(|&i| s.values[i]).fold(f64::INFINITY, f64::min));
            if k == 0 {
                kept.push(s.clone());
            }
            true
        })?;
        floors.push(floor);
        checks.push(Check::at_least(&format!("segment_floor_eps{k}"), floor, f64::MIN_POSITIVE).detail(format!(
            "epsilon = {}, {} segment nodes, {} levels",
            cfg.epsilon,
            segment.len(),
            log.levels
        )));
        if k > 0 {
            continue;
        }
        let z = solve_elliptic(&d, &p, &cfg, InitialGuess::Min)?;
        let off: Vec<usize> =
            grid.interior_nodes().iter().copied().filter(|&i| (grid.point(i)[1] - c[1]).abs() >= 0.3 * rad).collect();
        let rep = detect_coincidence(&kept, &z.slice, &off, r.coincidence_tol)?;
        checks.push(
            Check::at_most("off_segment_nodes_never_coinciding", rep.never() as f64, 0.0)
                .detail(format!("{} nodes, T* = {:?}, tol = {}", off.len(), rep.global, r.coincidence_tol)),
        );
        let bound = directional_envelope_bound(&d, g.clone(), &[0], &c, cfg.h)?;
        checks.push(Check::at_most("section_bound_at_center", bound.abs(), 1e-12));
        let z_seg = segment.iter().map(|&i| z.slice.values[i]).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::at_most("stationary_on_segment_minus_bound", z_seg - bound, r.coincidence_tol));
        let (times, gaps) = decay_curve(&kept, &z.slice, grid.interior_nodes());
        art.add("decay.csv", decay_csv(&times, &gaps));
        let levels: Vec<usize> = (0..kept.len()).collect();
        art.add_fields(&grid, &kept, &levels, r.levels);
    }
    checks.push(Check::at_least("segment_floor_refinement_ratio", floors[1] / floors[0], 0.5));
    Ok((checks, art))
}

fn halfspace(r: &Resolved, seed: u64) -> Run {
    let d = ball(r)?;
    let pi = Affine { a: r.affine.clone(), b: r.offset };
    let mut w = r.direction.clone();
    let norm = sq(&w).sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    let cfg = dpp_config(r, r.j, seed);
    let jitter = 0.1;
    let run = |theta: f64| {
        let (po, pu, wo) = (pi.clone(), pi.clone(), w.clone());
        halfspace_scenario(
            &d,
            &pi,
            &w,
            theta,
            move |x| po.eval(x) + (theta - x.iter().zip(&wo).map(|(a, b)| a * b).sum::<f64>()).max(0.0),
            move |x| pu.eval(x) + 1.0,
            &cfg,
            r.coincidence_tol,
            jitter,
        )
    };
    let main = run(r.theta)?;
    let far: Vec<bool> = main
        .report
        .times
        .iter()
        .zip(&main.heights)
        .filter(|(_, &h)| h > 0.5 * r.radius)
        .map(|(t, _)| t.is_some())
        .collect();
    let missing = far.iter().filter(|ok| !**ok).count();
    let mut checks = vec![
        Check::at_most("far_nodes_without_coincidence", missing as f64, 0.0)
            .detail(format!("{} nodes with height > R/2", far.len())),
        Check::at_most("ordering_violations", main.violations as f64, 0.0).detail(format!("jitter = {jitter}")),
        Check::new("far_nodes_present", !far.is_empty(), far.len() as f64, 1.0),
    ];
    let (lo, _) = d.bounding_box();
    let below = lo.iter().zip(&w).map(|(a, b)| a.min(a + 2.0 * r.radius * b.signum()) * b.abs()).sum::<f64>()
        - 2.0 * r.radius;
    let whole = run(below)?;
    checks.push(
        Check::at_most("degenerate_halfspace_time", whole.report.global.unwrap_or(f64::INFINITY), 2.0 * r.radius * r.radius + 0.5)
            .detail(format!("theta = {below}")),
    );
    let sol = &main.solution;
    let z = ValueSlice::from_fn(&sol.grid, f64::INFINITY, r.epsilon, |x| pi.eval(x));
    let gaps: Vec<f64> = sol
        .slices
        .iter()
        .map(|s| main.report.nodes.iter().map(|&i| (s.values[i] - z.values[i]).max(0.0)).fold(0.0, f64::max))
        .collect();
    let times: Vec<f64> = sol.slices.iter().map(|s| s.t).collect();
    let mut art = Artifacts::default();
    art.add("decay.csv", decay_csv(&times, &gaps));
    fields(&mut art, sol, r.levels);
    Ok((checks, art))
}

fn game_vs_dpp(r: &Resolved, seed: u64) -> Run {
    let d = ball(r)?;
    let c = r.center.clone();
    let (cg, cu) = (c.clone(), c.clone());
    let p = PayoffData::stationary(
        d.clone(),
        move |x| {
            let v = rel(x, &cg);
            v[0] * v[0] - 0.5 * v[1]
        },
        move |x| {
            let v = rel(x, &cu);
            v[0] * v[1] + 0.5
        },
    );
    let sol = solve_parabolic(&d, &p, &dpp_config(r, r.j, seed))?;
    let (mn, mx) = value_strategy_pair(&sol, &p)?;
    let last = sol.last();
    let eps = r.epsilon;
    let offsets = [[0.0, 0.0], [0.3, 0.2], [-0.5, 0.1], [0.2, -0.6], [0.7, 0.0]];
    let mut checks = Vec::new();
    let mut first = Vec::new();
    for (k, o) in offsets.iter().enumerate() {
        let x: Vec<f64> = (0..2).map(|i| ((c[i] + r.radius * o[i]) / r.h).round() * r.h).collect();
        let node = sol.grid.node_at(&x).filter(|&i| d.contains(&sol.grid.point(i)));
        let Some(node) = node else { continue };
        let x = sol.grid.point(node);
        let start = State { x, t: last.t };
        let trs = play_many(&d, &p, &mn, &mx, &start, eps, GameMode::Parabolic, r.runs, seed.wrapping_add(k as u64))?;
        let est = ValueEstimate::from_payoffs(&trs.iter().map(|t| t.payoff).collect::<Vec<_>>())?;
        let want = last.values[node];
        checks.push(
            Check::at_most(&format!("probe{k}_value_gap"), (est.mean - want).abs(), f64::max(0.02, 3.0 * est.ci95))
                .detail(format!("x = {:?}, dpp = {want}, game = {}, ci95 = {}", start.x, est.mean, est.ci95)),
        );
        if k == 0 {
            first = trs;
        }
    }
    let m = martingale_diagnostics(&first, eps)?;
    checks.push(
        Check::at_most("martingale_identity", (m.mean_sq_displacement - m.eps2_mean_tau).abs(), 4.0 * m.pooled_stderr)
            .detail(format!("E|x_tau - x_0|^2 = {}, eps^2 E tau = {}", m.mean_sq_displacement, m.eps2_mean_tau)),
    );
    checks.push(Check::at_most("martingale_drift_z", m.max_drift_z, 5.0).informational());

    // exit-time tail of the stationary game under random play
    let frames = Arc::new(generate_frames(2, r.j, r.resolution, seed)?);
    let rmin = RandomMinimizer { frames, seed };
    let rmax = RandomMaximizer { seed: seed ^ 1 };
    let start = State { x: c.clone(), t: 0.0 };
    let mode = GameMode::Elliptic { step_cap: r.step_cap };
    let trs = play_many(&d, &p, &rmin, &rmax, &start, eps, mode, r.tail_runs, seed ^ 2)?;
    let grid: Vec<f64> = (0..60).map(|k| k as f64 * 0.025 * r.radius * r.radius).collect();
    let tail = exit_tail(&trs, eps, &grid)?;
    checks.push(
        Check::at_most("exit_tail_slope", tail.slope.unwrap_or(f64::INFINITY), 0.0)
            .detail(format!("censored = {}", tail.censored)),
    );
    checks.push(Check::new("exit_tail_uncensored", !tail.censored, tail.censored as u8 as f64, 0.0));

    // orthogonal-subspace minimizer with affine data
    let pi = Affine { a: r.affine.clone(), b: r.offset };
    let pa = PayoffData::stationary(d.clone(), move |x| pi.eval(x), |_| 0.0);
    let orth = OrthogonalToCenter { center: c.clone(), j: 1 };
    let mut literal = 0usize;
    let mut exact = 0usize;
    let mut total = 0usize;
    let per = r.tail_runs.div_ceil(offsets.len());
    for (k, o) in offsets.iter().enumerate() {
        let x: Vec<f64> = (0..2).map(|i| c[i] + r.radius * o[i]).collect();
        let start = State { x: x.clone(), t: 0.0 };
        let trs = play_many(&d, &pa, &orth, &rmax, &start, eps, mode, per, seed ^ (16 + k as u64))?;
        // X is an integer for the lattice-aligned probes; guard against it rounding down
        let bound = (r.radius * r.radius - sq(&rel(&x, &c))) / (eps * eps) + 1e-9;
        for t in &trs {
            total += 1;
            if t.tau as f64 > bound {
                literal += 1;
            }
            if t.tau as f64 > bound.floor() + 1.0 {
                exact += 1;
            }
        }
    }
    checks.push(
        Check::at_most("orthogonal_strategy_literal_bound_violations", literal as f64, 0.0)
            .informational()
            .detail(format!("{total} trajectories; bound (R^2 - |x - x0|^2)/eps^2")),
    );
    checks.push(
        Check::at_most("orthogonal_strategy_exit_bound_violations", exact as f64, 0.0)
            .detail(format!("{total} trajectories; bound floor((R^2 - |x - x0|^2)/eps^2) + 1")),
    );
    let mut art = Artifacts::default();
    fields(&mut art, &sol, r.levels);
    let mut tail_csv = String::from("t,tail,count\n");
    for ((t, p), n) in tail.t.iter().zip(&tail.tail).zip(&tail.counts) {
        tail_csv.push_str(&format!("{},{},{n}\n", crate::report::fmt_f64(*t), crate::report::fmt_f64(*p)));
    }
    art.add("exit_tail.csv", tail_csv);
    Ok((checks, art))
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    let e: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-scale..scale)).collect();
    SymMatrix::new(n, &e).expect("square input")
}

fn matrix_props(r: &Resolved, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut weyl = f64::NEG_INFINITY;
    let mut residual = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=5);
        let j = rng.gen_range(1..=n);
        let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
        let a = random_sym(&mut rng, n, scale);
        let b = random_sym(&mut rng, n, 1.0);
        let sum = a.add(&b)?;
        let (la, lb, ls) = (eigenvalues_sym(&a), eigenvalues_sym(&b), eigenvalues_sym(&sum));
        weyl = weyl.max(la[0] + lb[j - 1] - ls[j - 1]).max(ls[j - 1] - la[n - 1] - lb[j - 1]);
        let eig = lambdaflow::eig::eigen_sym(&a);
        for (k, v) in eig.vectors.iter().enumerate() {
            let av = a.apply(v);
            let res = av.iter().zip(v).map(|(x, y)| (x - eig.values[k] * y).powi(2)).sum::<f64>().sqrt();
            residual = residual.max(res / a.norm().max(f64::MIN_POSITIVE));
        }
    }
    checks.push(Check::at_most("weyl_inequalities_max_violation", weyl, 1e-9));
    checks.push(Check::at_most("eigen_residual_relative", residual, 1e-10));

    let frames = generate_frames(3, 2, 200, seed)?;
    let mut cf_err = 0.0f64;
    for _ in 0..1000 {
        let a = random_sym(&mut rng, 3, 1.0);
        cf_err = cf_err.max((courant_fischer(&a, 2, &frames)? - lambda_j(&a, 2)?).abs() / a.norm());
    }
    checks.push(Check::at_most("courant_fischer_rel_error", cf_err, 0.05).detail("N = 3, j = 2, resolution 200"));

    // one DPP step on random quadratics
    let d = Domain::ball(vec![0.0, 0.0], 3.0)?;
    let grid = build_grid(&d, r.h, r.epsilon)?;
    let res = r.resolution.max(90);
    let frames: Vec<_> = (1..=2).map(|j| generate_frames(2, j, res, seed)).collect::<Result<_, _>>()?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let j = rng.gen_range(1..=2);
        let a = random_sym(&mut rng, 2, 2.0);
        let lin = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let q = {
            let a = a.clone();
            move |x: &[f64]| 0.5 * a.quad_form(x) + lin[0] * x[0] + lin[1] * x[1]
        };
        let payoff = PayoffData::stationary(d.clone(), q.clone(), q.clone());
        let prev = ValueSlice::from_fn(&grid, 0.0, r.epsilon, &q);
        let next = dpp_update(&prev, &grid, &payoff, &frames[j - 1], r.epsilon, 0.5 * r.epsilon * r.epsilon)?;
        let lam = lambda_j(&a, j)?;
        let bound = 0.5 * r.epsilon * r.epsilon * 0.02 * a.norm() + (a.get(0, 0).abs() + a.get(1, 1).abs()) * r.h * r.h / 8.0 + 1e-12;
        for &i in grid.interior_nodes() {
            let x = grid.point(i);
            if x[0].hypot(x[1]) > 2.5 {
                continue;
            }
            let err = (next.values[i] - q(&x) - 0.5 * r.epsilon * r.epsilon * lam).abs();
            worst = worst.max(err / bound);
        }
    }
    checks.push(Check::at_most("quadratic_step_error_over_bound", worst, 1.0).detail(format!("resolution {res}")));

    let mut barrier_ok = true;
    let mut barrier_err = 0.0f64;
    for (rad, c) in [(1.0, 2.0), (0.5, 1.0), (2.0, 0.1)] {
        for n in 1..=3 {
            let y = vec![0.0; n];
            let rep = verify_radial_barrier(&y, rad, c, &barrier_samples(&y, rad))?;
            barrier_ok &= rep.passed;
            barrier_err = barrier_err
                .max(rep.inner_error)
                .max(rep.annulus_error)
                .max(rep.value_jump)
                .max(rep.slope_jump)
                .max(rep.boundary_value);
        }
    }
    checks.push(Check::new("radial_barrier_identities", barrier_ok && barrier_err <= 1e-12, barrier_err, 1e-12));
    Ok((checks, Artifacts::default()))
}
