//! Long-time behaviour: exponential decay towards the stationary state,
//! principal eigenpairs, finite-time coincidence and the radial barrier.

use std::collections::BTreeMap;

use crate::domain::{build_grid, check_same_dim, require_positive, Domain, Grid, PayoffData, ValueSlice};
use crate::dpp::{solve_parabolic, step_with, DppConfig, LandingTable, ParabolicSolution};
use crate::eig::{generate_frames, lambda_j, SymMatrix};
use crate::error::{invalid, Error, Result};
use crate::vecops::{dot, norm2};

/// Default coincidence tolerance max(0.02, 3ε).
pub fn default_tolerance(epsilon: f64) -> f64 {
    f64::max(0.02, 3.0 * epsilon)
}

/// Sup-norm gaps ‖u(·, t) - z‖ over `nodes`, one per slice.
pub fn decay_curve(slices: &[ValueSlice], z: &ValueSlice, nodes: &[usize]) -> (Vec<f64>, Vec<f64>) {
    slices.iter().map(|s| (s.t, s.sup_distance(z, nodes))).unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayOptions {
    /// Fixed-point tolerance of the stationary state; gaps below ten times
    /// this value are left out of the fit.
    pub tolerance: f64,
    /// Levels before this time are treated as transient.
    pub transient: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, transient: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Rate in ln d(t) ≈ ln C - μt, only when the fit has R² >= 0.9.
    pub mu: Option<f64>,
    pub amplitude: Option<f64>,
    /// Raw least-squares rate regardless of R².
    pub slope_mu: f64,
    /// Indices into `times` used by the fit, inclusive.
    pub window: (usize, usize),
    pub r_squared: f64,
    /// Every gap is below the tolerance; nothing to fit.
    pub coincident: bool,
}

/// Least squares y ≈ a + b x; returns (a, b, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (a, b, r2)
}

/// Log-linear fit of the sup-norm gap to `z`.
pub fn fit_decay(slices: &[ValueSlice], z: &ValueSlice, nodes: &[usize], options: &DecayOptions) -> Result<DecayFit> {
    for s in slices {
        check_same_dim(z.values.len(), s.values.len())?;
    }
    let (times, gaps) = decay_curve(slices, z, nodes);
    fit_decay_curve(times, gaps, options)
}

/// [`fit_decay`] on a precomputed curve.
pub fn fit_decay_curve(times: Vec<f64>, gaps: Vec<f64>, options: &DecayOptions) -> Result<DecayFit> {
    if times.len() != gaps.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: gaps.len() });
    }
    if gaps.iter().all(|&d| d <= options.tolerance) {
        return Ok(DecayFit {
            times,
            gaps,
            mu: None,
            amplitude: None,
            slope_mu: f64::NAN,
            window: (0, 0),
            r_squared: f64::NAN,
            coincident: true,
        });
    }
    let floor = 10.0 * options.tolerance;
    let first = times.iter().position(|&t| t >= options.transient).unwrap_or(times.len());
    let last = (first..times.len()).take_while(|&i| gaps[i] > floor).last();
    let Some(last) = last else {
        return Err(Error::InsufficientSample { needed: 10, got: 0 });
    };
    let count = last + 1 - first;
    if count < 10 {
        return Err(Error::InsufficientSample { needed: 10, got: count });
    }
    let x = &times[first..=last];
    let y: Vec<f64> = gaps[first..=last].iter().map(|d| d.ln()).collect();
    let (a, b, r2) = linear_fit(x, &y);
    let ok = r2 >= 0.9;
    Ok(DecayFit {
        mu: ok.then_some(-b),
        amplitude: ok.then(|| a.exp()),
        slope_mu: -b,
        window: (first, last),
        r_squared: r2,
        coincident: false,
        times,
        gaps,
    })
}

/// Which extreme eigenvalue problem with zero boundary data to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    /// `-lambda_1(D²φ) = μφ` with φ < 0.
    Lambda1Negative,
    /// `-lambda_N(D²ψ) = μψ` with ψ > 0.
    LambdaNPositive,
}

#[derive(Debug, Clone)]
pub struct PrincipalEigen {
    pub mu: f64,
    /// Per-step decay factor of the normalized evolution.
    pub factor: f64,
    /// Sup-norm 1; NaN outside the lattice's domain and strip.
    pub profile: ValueSlice,
    pub grid: Grid,
    pub iterations: usize,
}

/// Normalized DPP evolution with zero boundary data, j = 1 or j = N
/// according to `extreme`; `config.j` and `config.horizon` are ignored.
/// The reported factor is that of a single DPP step.
/// Stops once the decay factor changes by at most `config.tolerance` over
/// 20 consecutive steps; gives up after `config.max_sweeps` steps.
pub fn estimate_principal_eigenvalue(domain: &Domain, extreme: Extreme, config: &DppConfig) -> Result<PrincipalEigen> {
    let n = domain.dim();
    let j = match extreme {
        Extreme::Lambda1Negative => 1,
        Extreme::LambdaNPositive => n,
    };
    let config = DppConfig { j, ..config.clone() };
    config.validate(n)?;
    let sign = if j == 1 && extreme == Extreme::Lambda1Negative && n > 1 { -1.0 } else { 1.0 };
    // N = 1 has a single operator; the profile is taken positive.
    let grid = build_grid(domain, config.h, config.epsilon)?;
    let frames = generate_frames(n, j, config.resolution, config.seed)?;
    let payoff = PayoffData::stationary(domain.clone(), |_| 0.0, |_| 0.0);
    let table = LandingTable::build(&grid, &payoff, &frames, config.epsilon)?;
    let (c, r) = domain.enclosing_ball();
    let mut slice = ValueSlice::from_fn(&grid, 0.0, config.epsilon, |x| {
        if domain.contains(x) {
            sign * (1.0 - crate::vecops::dist2(x, &c) / (r * r)).max(0.0) + sign * 1e-3
        } else {
            0.0
        }
    });
    normalize_sup(&mut slice, grid.interior_nodes());
    let mut prev_factor = f64::NAN;
    let mut stable = 0;
    let mut factor = f64::NAN;
    for it in 1..=config.max_sweeps {
        let mut next = step_with(table.as_ref(), &slice, &grid, &payoff, &frames, config.epsilon, config.dt())?;
        // lazy step (u + Tu)/2: same eigenvector, and a lattice mode with
        // factor near -1 (parity flip) no longer competes
        for &i in grid.interior_nodes() {
            next.values[i] = 0.5 * (next.values[i] + slice.values[i]);
        }
        factor = 2.0 * normalize_sup(&mut next, grid.interior_nodes()) - 1.0;
        if !(factor > 0.0) {
            return Err(invalid("domain", "evolution collapsed to zero"));
        }
        next.t = 0.0;
        slice = next;
        if (factor - prev_factor).abs() <= config.tolerance {
            stable += 1;
            if stable >= 20 {
                let mu = -factor.ln() / config.dt();
                return Ok(PrincipalEigen { mu, factor, profile: slice, grid, iterations: it });
            }
        } else {
            stable = 0;
        }
        prev_factor = factor;
    }
    Err(Error::NotConverged { sweeps: config.max_sweeps, residual: (factor - prev_factor).abs() })
}

fn normalize_sup(slice: &mut ValueSlice, nodes: &[usize]) -> f64 {
    let s = nodes.iter().map(|&i| slice.values[i].abs()).fold(0.0, f64::max);
    if s > 0.0 {
        for &i in nodes {
            slice.values[i] /= s;
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub c1: f64,
    pub c2: f64,
    /// max |-lambda_N(D²a) - c| over samples with |x - y| < r/2.
    pub inner_error: f64,
    /// max |lambda_N(D²a)| over samples with r/2 < |x - y| < r.
    pub annulus_error: f64,
    /// Largest tangential eigenvalue on the annulus; negative as required.
    pub max_tangential: f64,
    pub value_jump: f64,
    pub slope_jump: f64,
    /// max |a| over samples on |x - y| = r.
    pub boundary_value: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Radial profile a(s) with s = |x - y|: c2 - c s²/2 for s <= r/2 and
/// c1 (r - s) beyond, with c1 = cr/2 and c2 fixed by continuity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBarrier {
    pub r: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
}

impl RadialBarrier {
    pub fn new(r: f64, c: f64) -> Result<Self> {
        require_positive("r", r)?;
        require_positive("c", c)?;
        let c1 = c * r / 2.0;
        let c2 = c1 * r / 2.0 + c / 2.0 * (r / 2.0).powi(2);
        Ok(Self { r, c, c1, c2 })
    }

    pub fn profile(&self, s: f64) -> f64 {
        if s <= self.r / 2.0 {
            self.c2 - self.c / 2.0 * s * s
        } else {
            self.c1 * (self.r - s)
        }
    }

    /// a'(s) from the inner and outer formulas.
    fn slopes(&self, s: f64) -> (f64, f64) {
        (-self.c * s, -self.c1)
    }

    /// Exact Hessian at x for center y; undefined at x = y only in the
    /// outer formula, which is never used there.
    pub fn hessian(&self, y: &[f64], x: &[f64]) -> Result<SymMatrix> {
        let n = x.len();
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let s = norm2(&d).sqrt();
        if s <= self.r / 2.0 {
            return Ok(SymMatrix::identity(n)?.scaled(-self.c));
        }
        // a = c1 (r - s): D²a = -(c1/s)(I - x̂x̂ᵀ)
        let k = self.c1 / s;
        SymMatrix::from_fn(n, |i, l| {
            let id = if i == l { 1.0 } else { 0.0 };
            -k * (id - d[i] * d[l] / (s * s))
        })
    }
}

/// Checks the barrier identities at `samples` (points in R^N around `y`).
pub fn verify_radial_barrier(y: &[f64], r: f64, c: f64, samples: &[Vec<f64>]) -> Result<BarrierReport> {
    let b = RadialBarrier::new(r, c)?;
    let n = y.len();
    let tol = 1e-12;
    let mut inner_error = 0.0f64;
    let mut annulus_error = 0.0f64;
    let mut max_tangential = f64::NEG_INFINITY;
    let mut boundary_value = 0.0f64;
    for x in samples {
        check_same_dim(n, x.len())?;
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let s = norm2(&d).sqrt();
        if (s - r).abs() <= tol * r {
            boundary_value = boundary_value.max(b.profile(s).abs());
            continue;
        }
        if s > r {
            continue;
        }
        let hess = b.hessian(y, x)?;
        let top = lambda_j(&hess, n)?;
        if s < r / 2.0 {
            inner_error = inner_error.max((-top - c).abs());
        } else if s > r / 2.0 {
            annulus_error = annulus_error.max(top.abs());
            if n > 1 {
                max_tangential = max_tangential.max(lambda_j(&hess, 1)?);
            }
        }
    }
    let half = r / 2.0;
    let value_jump = ((b.c2 - c / 2.0 * half * half) - b.c1 * (r - half)).abs();
    let (inner_slope, outer_slope) = b.slopes(half);
    let slope_jump = (inner_slope - outer_slope).abs();
    let passed = inner_error <= tol
        && annulus_error <= tol
        && value_jump <= tol
        && slope_jump <= tol
        && boundary_value <= tol
        && (n == 1 || max_tangential == f64::NEG_INFINITY || max_tangential < 0.0);
    Ok(BarrierReport {
        c1: b.c1,
        c2: b.c2,
        inner_error,
        annulus_error,
        max_tangential,
        value_jump,
        slope_jump,
        boundary_value,
        samples: samples.len(),
        passed,
    })
}

/// Sample points on rays from `y` at radii spread over [0, r], including
/// r/4, 3r/4 and r, in every coordinate direction and along diagonals.
pub fn barrier_samples(y: &[f64], r: f64) -> Vec<Vec<f64>> {
    let n = y.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for sgn in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = sgn;
            dirs.push(e);
        }
    }
    dirs.push(vec![1.0 / (n as f64).sqrt(); n]);
    let mut skew: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -0.5 }).collect();
    let s = norm2(&skew).sqrt();
    skew.iter_mut().for_each(|v| *v /= s);
    dirs.push(skew);
    let radii = [0.0, 0.1, 0.25, 0.4, 0.49, 0.51, 0.6, 0.75, 0.9, 0.99, 1.0];
    let mut out = Vec::new();
    for d in &dirs {
        for &f in &radii {
            out.push(y.iter().zip(d).map(|(a, b)| a + f * r * b).collect());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// |u - z| <= tol
    Both,
    /// u <= z + tol
    Below,
    /// u >= z - tol
    Above,
}

impl Side {
    fn holds(self, u: f64, z: f64, tol: f64) -> bool {
        match self {
            Side::Both => (u - z).abs() <= tol,
            Side::Below => u <= z + tol,
            Side::Above => u >= z - tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceReport {
    pub nodes: Vec<usize>,
    /// First time from which the condition holds at every later computed
    /// level; None if it fails at the last level.
    pub times: Vec<Option<f64>>,
    /// Largest t*, None if some node never coincides.
    pub global: Option<f64>,
    pub tolerance: f64,
    pub horizon: f64,
    pub side: Side,
}

impl CoincidenceReport {
    pub fn censored(&self) -> bool {
        self.global.is_none()
    }

    /// Number of nodes that never coincide within the horizon.
    pub fn never(&self) -> usize {
        self.times.iter().filter(|t| t.is_none()).count()
    }
}

/// Two-sided coincidence times |u - z| <= tol.
pub fn detect_coincidence(slices: &[ValueSlice], z: &ValueSlice, nodes: &[usize], tol: f64) -> Result<CoincidenceReport> {
    one_sided_coincidence(slices, z, nodes, tol, Side::Both)
}

/// Coincidence times for the condition selected by `side`.
pub fn one_sided_coincidence(
    slices: &[ValueSlice],
    z: &ValueSlice,
    nodes: &[usize],
    tol: f64,
    side: Side,
) -> Result<CoincidenceReport> {
    if slices.is_empty() {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    if !(tol >= 0.0) {
        return Err(invalid("tol", "must be nonnegative"));
    }
    for s in slices {
        check_same_dim(z.values.len(), s.values.len())?;
    }
    let times = nodes
        .iter()
        .map(|&i| {
            let mut first = None;
            for s in slices.iter().rev() {
                if side.holds(s.values[i], z.values[i], tol) {
                    first = Some(s.t);
                } else {
                    break;
                }
            }
            first
        })
        .collect::<Vec<_>>();
    let global = times.iter().try_fold(0.0f64, |acc, t| t.map(|t| acc.max(t)));
    Ok(CoincidenceReport {
        nodes: nodes.to_vec(),
        times,
        global,
        tolerance: tol,
        horizon: slices.last().map_or(0.0, |s| s.t),
        side,
    })
}

/// Affine function x -> a·x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Affine {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.b
    }
}

#[derive(Debug, Clone)]
pub struct HalfspaceReport {
    pub report: CoincidenceReport,
    /// x·w - θ at each reported node.
    pub heights: Vec<f64>,
    /// Pairs of nodes on a common line along w where t* increases with
    /// x·w by more than the allowed jitter.
    pub violations: usize,
    pub monotone: bool,
    pub solution: ParabolicSolution,
}

/// Evolves data equal to `pi` on the exterior part of {x·w > θ} and to
/// `other` elsewhere, then reports the below-coincidence times u <= pi + tol
/// on the interior part of that half-space. `jitter` is the slack allowed in
/// the ordering check along lines parallel to w (which must be a
/// coordinate axis for lines to be lattice lines).
#[allow(clippy::too_many_arguments)]
pub fn halfspace_scenario(
    domain: &Domain,
    pi: &Affine,
    w: &[f64],
    theta: f64,
    other: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    u0: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    config: &DppConfig,
    tol: f64,
    jitter: f64,
) -> Result<HalfspaceReport> {
    let n = domain.dim();
    check_same_dim(n, w.len())?;
    check_same_dim(n, pi.a.len())?;
    let mut w = w.to_vec();
    if crate::vecops::normalize(&mut w) == 0.0 {
        return Err(invalid("w", "must be nonzero"));
    }
    let (pi_g, w_g) = (pi.clone(), w.clone());
    let payoff = PayoffData::stationary(
        domain.clone(),
        move |x| if dot(x, &w_g) > theta { pi_g.eval(x) } else { other(x) },
        u0,
    );
    let solution = solve_parabolic(domain, &payoff, config)?;
    let grid = &solution.grid;
    let z = ValueSlice::from_fn(grid, f64::INFINITY, config.epsilon, |x| pi.eval(x));
    let nodes: Vec<usize> =
        grid.interior_nodes().iter().copied().filter(|&i| dot(&grid.point(i), &w) > theta).collect();
    let report = one_sided_coincidence(&solution.slices, &z, &nodes, tol, Side::Below)?;
    let heights: Vec<f64> = nodes.iter().map(|&i| dot(&grid.point(i), &w) - theta).collect();
    // group by the component orthogonal to w, rounded to the lattice
    let mut lines: BTreeMap<Vec<i64>, Vec<(f64, Option<f64>)>> = BTreeMap::new();
    for (k, &i) in nodes.iter().enumerate() {
        let p = grid.point(i);
        let h = dot(&p, &w);
        let key = p.iter().zip(&w).map(|(a, b)| ((a - h * b) / grid.h() * 1e3).round() as i64).collect();
        lines.entry(key).or_default().push((h, report.times[k]));
    }
    let mut violations = 0;
    for line in lines.values_mut() {
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        for a in 0..line.len() {
            for b in a + 1..line.len() {
                let lower = line[a].1.unwrap_or(f64::INFINITY);
                let upper = line[b].1.unwrap_or(f64::INFINITY);
                if upper > lower + jitter {
                    violations += 1;
                }
            }
        }
    }
    Ok(HalfspaceReport { report, heights, violations, monotone: violations == 0, solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::{solve_elliptic, InitialGuess};
    use crate::eig::eigenvalues_sym;
    use std::f64::consts::PI;

    fn disk() -> Domain {
        Domain::ball(vec![0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn barrier_constants() {
        let b = RadialBarrier::new(1.0, 2.0).unwrap();
        assert_eq!(b.c1, 1.0);
        assert_eq!(b.c2, 0.75);
        assert_eq!(b.profile(0.0), 0.75);
        assert_eq!(b.profile(1.0), 0.0);
        let h = b.hessian(&[0.0, 0.0], &[0.75, 0.0]).unwrap();
        assert!(lambda_j(&h, 2).unwrap().abs() < 1e-12, "{h:?} {:?}", eigenvalues_sym(&h));
        for (r, c) in [(1.0, 2.0), (0.5, 1.0), (2.0, 0.1)] {
            for n in 1..=3 {
                let y = vec![0.3; n];
                let rep = verify_radial_barrier(&y, r, c, &barrier_samples(&y, r)).unwrap();
                assert!(rep.passed, "{rep:?}");
            }
        }
        assert!(verify_radial_barrier(&[0.0], -1.0, 1.0, &[]).is_err());
    }

    #[test]
    fn coincidence_bookkeeping() {
        let grid = build_grid(&Domain::interval(0.0, 1.0).unwrap(), 0.25, 0.25).unwrap();
        let nodes = grid.interior_nodes().to_vec();
        let z = ValueSlice::from_fn(&grid, 0.0, 0.25, |_| 0.0);
        let slices: Vec<ValueSlice> = (0..6)
            .map(|k| ValueSlice::from_fn(&grid, k as f64, 0.25, |x| if k < 3 { x[0] + 1.0 } else { 0.5 / k as f64 }))
            .collect();
        let r = detect_coincidence(&slices, &z, &nodes, 0.2).unwrap();
        assert_eq!(r.global, Some(3.0));
        let r = detect_coincidence(&slices, &z, &nodes, 0.1).unwrap();
        assert_eq!(r.global, Some(5.0));
        let r = detect_coincidence(&slices, &z, &nodes, 0.05).unwrap();
        assert!(r.censored());
        assert_eq!(r.never(), nodes.len());
        let same = detect_coincidence(&[z.clone(), z.clone()], &z, &nodes, 0.0).unwrap();
        assert_eq!(same.global, Some(0.0));
        let below = one_sided_coincidence(&slices, &z, &nodes, 0.0, Side::Above).unwrap();
        assert_eq!(below.global, Some(0.0));
    }

    #[test]
    fn coincidence_monotone_in_tolerance() {
        let d = disk();
        let p = PayoffData::stationary(d.clone(), |x| x[0], |x| x[0] + x[1] * x[1]);
        let cfg = DppConfig { horizon: 0.5, resolution: 24, ..DppConfig::new(0.1, 1) };
        let sol = solve_parabolic(&d, &p, &cfg).unwrap();
        let z = ValueSlice::from_fn(&sol.grid, 0.0, 0.1, |x| x[0]);
        let nodes = sol.grid.interior_nodes();
        let mut prev: Option<CoincidenceReport> = None;
        for tol in [0.2, 0.1, 0.05, 0.02, 0.01] {
            let r = detect_coincidence(&sol.slices, &z, nodes, tol).unwrap();
            if let Some(p) = &prev {
                for (a, b) in p.times.iter().zip(&r.times) {
                    assert!(b.unwrap_or(f64::INFINITY) >= a.unwrap_or(f64::INFINITY));
                }
            }
            prev = Some(r);
        }
    }

    #[test]
    fn decay_fit_recovers_heat_rate() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let p = PayoffData::stationary(d.clone(), |_| 0.0, |x| (PI * x[0]).sin());
        let cfg = DppConfig { horizon: 0.5, ..DppConfig::new(0.05, 1) };
        let sol = solve_parabolic(&d, &p, &cfg).unwrap();
        let z = ValueSlice::from_fn(&sol.grid, 0.0, 0.05, |_| 0.0);
        let fit = fit_decay(&sol.slices, &z, sol.grid.interior_nodes(), &DecayOptions { transient: 0.05, ..Default::default() }).unwrap();
        let mu = fit.mu.unwrap();
        assert!((mu - PI * PI).abs() < 0.15 * PI * PI, "{mu}");
        let same = fit_decay(&vec![z.clone(); 12], &z, sol.grid.interior_nodes(), &DecayOptions::default()).unwrap();
        assert!(same.coincident && same.mu.is_none());
        assert!(matches!(
            fit_decay(&sol.slices[..5], &z, sol.grid.interior_nodes(), &DecayOptions::default()),
            Err(Error::InsufficientSample { .. })
        ));
    }

    #[test]
    fn principal_eigenvalue_interval() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        // h = ε keeps the two parity sublattices of the 1D walk identical
        let cfg = DppConfig { tolerance: 1e-12, h: 0.02, ..DppConfig::new(0.02, 1) };
        let e = estimate_principal_eigenvalue(&d, Extreme::LambdaNPositive, &cfg).unwrap();
        assert!((e.mu - PI * PI).abs() < 0.15 * PI * PI, "{}", e.mu);
        let mut err = 0.0f64;
        for &i in e.grid.interior_nodes() {
            err = err.max((e.profile.values[i] - (PI * e.grid.point(i)[0]).sin()).abs());
        }
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn principal_eigenvalue_duality_and_scaling() {
        let cfg = DppConfig { resolution: 24, tolerance: 1e-10, ..DppConfig::new(0.1, 1) };
        let lo = estimate_principal_eigenvalue(&disk(), Extreme::Lambda1Negative, &cfg).unwrap();
        let hi = estimate_principal_eigenvalue(&disk(), Extreme::LambdaNPositive, &cfg).unwrap();
        assert_eq!(lo.mu, hi.mu);
        for &i in lo.grid.interior_nodes() {
            assert_eq!(lo.profile.values[i], -hi.profile.values[i]);
            assert!(hi.profile.values[i] > 0.0);
        }
        let big = Domain::ball(vec![0.0, 0.0], 2.0).unwrap();
        let cfg2 = DppConfig { epsilon: 0.2, h: 0.1, ..cfg.clone() };
        let hi2 = estimate_principal_eigenvalue(&big, Extreme::LambdaNPositive, &cfg2).unwrap();
        let ratio = hi2.mu / hi.mu;
        assert!((ratio - 0.25).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn disk_decay_matches_eigenvalue() {
        let cfg = DppConfig { resolution: 24, horizon: 1.5, ..DppConfig::new(0.1, 1) };
        let p = PayoffData::stationary(disk(), |_| 0.0, |x| -(1.0 - x[0] * x[0] - x[1] * x[1]));
        let sol = solve_parabolic(&disk(), &p, &cfg).unwrap();
        let z = ValueSlice::from_fn(&sol.grid, 0.0, 0.1, |_| 0.0);
        let fit = fit_decay(&sol.slices, &z, sol.grid.interior_nodes(), &DecayOptions { transient: 0.3, ..Default::default() }).unwrap();
        let e = estimate_principal_eigenvalue(&disk(), Extreme::Lambda1Negative, &DppConfig { tolerance: 1e-10, ..cfg }).unwrap();
        let mu = fit.mu.unwrap();
        assert!((mu - e.mu).abs() < 0.15 * e.mu, "{mu} vs {}", e.mu);
        // the gap is nonincreasing after the first level
        assert!(fit.gaps[1..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn sandwich_between_enclosing_profiles() {
        let cfg = DppConfig { resolution: 24, horizon: 1.0, tolerance: 1e-10, ..DppConfig::new(0.1, 1) };
        let big = Domain::ball(vec![0.0, 0.0], 1.2).unwrap();
        let e = estimate_principal_eigenvalue(&big, Extreme::LambdaNPositive, &cfg).unwrap();
        let p = PayoffData::stationary(disk(), |_| 0.0, |x| x[0] * (1.0 - x[0] * x[0] - x[1] * x[1]) - 0.2 * (1.0 - x[1] * x[1] - x[0] * x[0]));
        let sol = solve_parabolic(&disk(), &p, &cfg).unwrap();
        let g = &sol.grid;
        let psi: Vec<f64> = g.interior_nodes().iter().map(|&i| e.profile.values[e.grid.node_at(&g.point(i)).unwrap()]).collect();
        let u0 = &sol.slices[0];
        let c_up = g.interior_nodes().iter().zip(&psi).map(|(&i, s)| u0.values[i] / s).fold(0.0, f64::max);
        let c_lo = g.interior_nodes().iter().zip(&psi).map(|(&i, s)| -u0.values[i] / s).fold(0.0, f64::max);
        let slack = 1e-9;
        for s in &sol.slices {
            let decay = (-e.mu * s.t).exp();
            for (&i, ps) in g.interior_nodes().iter().zip(&psi) {
                let u = s.values[i];
                assert!(u <= c_up * decay * ps + slack, "t={} u={u} bound={}", s.t, c_up * decay * ps);
                assert!(u >= -c_lo * decay * ps - slack);
            }
        }
    }

    #[test]
    fn one_sided_cases() {
        let cfg = DppConfig { resolution: 24, horizon: 0.3, ..DppConfig::new(0.1, 1) };
        let p = PayoffData::stationary(disk(), |_| 0.0, |x| -(1.0 - x[0] * x[0] - x[1] * x[1]));
        let sol = solve_parabolic(&disk(), &p, &cfg).unwrap();
        let z = ValueSlice::from_fn(&sol.grid, 0.0, 0.1, |_| 0.0);
        let r = one_sided_coincidence(&sol.slices, &z, sol.grid.interior_nodes(), 0.02, Side::Below).unwrap();
        assert_eq!(r.global, Some(0.0));
    }

    #[test]
    fn halfspace_ordering() {
        let pi = Affine { a: vec![0.5, -0.25], b: 0.1 };
        let cfg = DppConfig { resolution: 24, horizon: 2.5, keep_every: 1, ..DppConfig::new(0.1, 1) };
        let pi2 = pi.clone();
        let rep = halfspace_scenario(
            &disk(),
            &pi,
            &[1.0, 0.0],
            0.0,
            move |x| pi2.eval(x) + 1.0 - x[0],
            |x| 2.0 + x[0],
            &cfg,
            default_tolerance(0.1),
            0.1,
        )
        .unwrap();
        let far: Vec<Option<f64>> =
            rep.report.times.iter().zip(&rep.heights).filter(|(_, &h)| h > 0.5).map(|(t, _)| *t).collect();
        assert!(!far.is_empty() && far.iter().all(|t| t.is_some()));
        assert!(rep.monotone, "{} violations", rep.violations);

        let pi3 = pi.clone();
        let whole = halfspace_scenario(&disk(), &pi, &[1.0, 0.0], -2.0, move |x| pi3.eval(x), |x| 2.0 + x[0], &cfg, 0.05, 0.1).unwrap();
        assert_eq!(whole.report.nodes.len(), whole.solution.grid.interior_nodes().len());
        assert!(!whole.report.censored());
    }

    #[test]
    fn elliptic_limit_is_the_decay_target() {
        let g = |x: &[f64]| x[0] * x[0];
        let p = PayoffData::stationary(disk(), g, |_| 0.0);
        let cfg = DppConfig { resolution: 24, h: 0.1, horizon: 3.0, tolerance: 1e-9, ..DppConfig::new(0.2, 1) };
        let z = solve_elliptic(&disk(), &p, &cfg, InitialGuess::Min).unwrap();
        let sol = solve_parabolic(&disk(), &p, &cfg).unwrap();
        let fit = fit_decay(&sol.slices, &z.slice, sol.grid.interior_nodes(), &DecayOptions { tolerance: 1e-9, transient: 0.2 }).unwrap();
        assert!(fit.slope_mu > 0.0);
    }
}

#[cfg(test)]
mod segment_tests {
    use super::*;

    #[test]
    fn segment_lower_bound_has_section_rate() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let eps = 0.1;
        let cfg = DppConfig { resolution: 24, horizon: 3.0, keep_every: 10, ..DppConfig::new(eps, 1) };
        let p = PayoffData::stationary(d.clone(), |x| x[1].abs(), |x| 1.0 - x[0] * x[0] - x[1] * x[1] + x[1].abs());
        let sol = solve_parabolic(&d, &p, &cfg).unwrap();
        let section = Domain::interval(-1.0, 1.0).unwrap();
        let e = estimate_principal_eigenvalue(&section, Extreme::LambdaNPositive, &DppConfig { h: eps, tolerance: 1e-12, ..cfg.clone() }).unwrap();
        let o = sol.grid.node_at(&[0.0, 0.0]).unwrap();
        let scaled: Vec<f64> = sol.slices.iter().map(|s| s.values[o] * (e.mu * s.t).exp()).collect();
        // u(0, t) e^{μ t} settles to a positive constant
        let k = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let big = scaled.iter().copied().fold(0.0, f64::max);
        assert!(k > 0.5 && big / k < 1.1, "{k} {big}");
        assert!((e.mu - std::f64::consts::PI.powi(2) / 4.0).abs() < 0.15 * e.mu);
    }
}
