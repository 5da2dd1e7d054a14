//! Monte-Carlo simulation of the two-player game behind the DPP.
//!
//! At each turn the minimizer picks a j-dimensional subspace S, the
//! maximizer picks a unit vector v in S, and a fair coin moves the token to
//! x ± εv while the clock drops by ε²/2. The game stops when the token
//! leaves the domain or the clock reaches zero, and the minimizer pays the
//! payoff at the stopping point.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::domain::{check_same_dim, Domain, Grid, PayoffData, ValueSlice};
use crate::dpp::{node_update, EllipticSolution, ParabolicSolution};
use crate::eig::FrameSet;
use crate::error::{invalid, Error, Result};
use crate::vecops::{dist2, dot, gram_schmidt, normalize};

/// Generator used for every coin flip: ChaCha8 seeded with the base seed,
/// one stream per trajectory.
pub const RNG_NAME: &str = "ChaCha8Rng(seed_from_u64(base), stream = run index)";

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub t: f64,
}

/// Orthonormal basis of a subspace; `frame` is its index when it was taken
/// from a [`FrameSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    pub basis: Vec<Vec<f64>>,
    pub frame: Option<usize>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Distance from `v` to the span.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let mut r = v.to_vec();
        for b in &self.basis {
            let c = dot(&r, b);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= c * bi;
            }
        }
        dot(&r, &r).sqrt()
    }
}

pub trait MinimizerStrategy: Send + Sync {
    /// Subspace for the next turn; the current state is `history.last()`.
    fn choose(&self, history: &[State]) -> Result<Subspace>;
}

pub trait MaximizerStrategy: Send + Sync {
    /// Unit vector inside `subspace` for the next turn.
    fn choose(&self, history: &[State], subspace: &Subspace) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GameMode {
    /// Stops on exit from the domain or when the clock reaches zero.
    Parabolic,
    /// No clock; stops on exit only, censored after `step_cap` turns.
    Elliptic { step_cap: usize },
}

impl GameMode {
    pub fn elliptic() -> Self {
        GameMode::Elliptic { step_cap: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTrajectory {
    /// States x_0, ..., x_tau.
    pub states: Vec<State>,
    pub tau: usize,
    pub exit: State,
    /// Payoff at the exit; NaN for censored games.
    pub payoff: f64,
    /// Coin outcomes, `true` for x + εv.
    pub coins: Vec<bool>,
    pub seed: u64,
    pub run: u64,
    pub censored: bool,
}

pub fn trajectory_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Plays one game from `start`.
#[allow(clippy::too_many_arguments)]
pub fn play(
    domain: &Domain,
    payoff: &PayoffData,
    minimizer: &dyn MinimizerStrategy,
    maximizer: &dyn MaximizerStrategy,
    start: &State,
    epsilon: f64,
    mode: GameMode,
    seed: u64,
    run: u64,
) -> Result<GameTrajectory> {
    let n = domain.dim();
    check_same_dim(n, start.x.len())?;
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    if !domain.contains(&start.x) {
        return Err(invalid("start", "must lie inside the domain"));
    }
    if mode == GameMode::Parabolic && !(start.t > 0.0) {
        return Err(invalid("start", "time must be positive"));
    }
    let dt = 0.5 * epsilon * epsilon;
    let mut rng = trajectory_rng(seed, run);
    let mut states = vec![start.clone()];
    let mut coins = Vec::new();
    let cap = match mode {
        GameMode::Parabolic => usize::MAX,
        GameMode::Elliptic { step_cap } => step_cap,
    };
    let mut censored = false;
    loop {
        let k = states.len() - 1;
        let cur = &states[k];
        let stopped = !domain.contains(&cur.x) || (mode == GameMode::Parabolic && cur.t <= 0.0);
        if k > 0 && stopped {
            break;
        }
        if k >= cap {
            censored = true;
            break;
        }
        let s = minimizer.choose(&states)?;
        let mut v = maximizer.choose(&states, &s)?;
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        normalize(&mut v);
        let heads: bool = rng.gen();
        let sign = if heads { 1.0 } else { -1.0 };
        let x: Vec<f64> = cur.x.iter().zip(&v).map(|(a, b)| a + sign * epsilon * b).collect();
        let t = match mode {
            GameMode::Parabolic => start.t - (k + 1) as f64 * dt,
            GameMode::Elliptic { .. } => start.t,
        };
        coins.push(heads);
        states.push(State { x, t });
    }
    let tau = states.len() - 1;
    let exit = states[tau].clone();
    let value = if censored {
        f64::NAN
    } else {
        match mode {
            GameMode::Parabolic => payoff.eval(&exit.x, exit.t)?,
            GameMode::Elliptic { .. } => payoff.eval(&exit.x, 0.0)?,
        }
    };
    Ok(GameTrajectory { states, tau, exit, payoff: value, coins, seed, run, censored })
}

/// `runs` independent games, run `i` using stream `i` of the base seed.
#[allow(clippy::too_many_arguments)]
pub fn play_many(
    domain: &Domain,
    payoff: &PayoffData,
    minimizer: &dyn MinimizerStrategy,
    maximizer: &dyn MaximizerStrategy,
    start: &State,
    epsilon: f64,
    mode: GameMode,
    runs: usize,
    seed: u64,
) -> Result<Vec<GameTrajectory>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|run| play(domain, payoff, minimizer, maximizer, start, epsilon, mode, seed, run))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
    /// 1.96 standard errors.
    pub ci95: f64,
    pub censored: usize,
}

impl ValueEstimate {
    /// Estimate from per-run payoffs; NaN entries count as censored.
    pub fn from_payoffs(payoffs: &[f64]) -> Result<Self> {
        let ok: Vec<f64> = payoffs.iter().copied().filter(|p| !p.is_nan()).collect();
        if ok.len() < 2 {
            return Err(Error::InsufficientSample { needed: 2, got: ok.len() });
        }
        let m = ok.len() as f64;
        let mean = ok.iter().sum::<f64>() / m;
        let var = ok.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let stderr = (var / m).sqrt();
        Ok(Self { mean, stderr, runs: ok.len(), ci95: 1.96 * stderr, censored: payoffs.len() - ok.len() })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_value(
    domain: &Domain,
    payoff: &PayoffData,
    minimizer: &dyn MinimizerStrategy,
    maximizer: &dyn MaximizerStrategy,
    start: &State,
    epsilon: f64,
    mode: GameMode,
    runs: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    let trajectories = play_many(domain, payoff, minimizer, maximizer, start, epsilon, mode, runs, seed)?;
    let payoffs: Vec<f64> = trajectories.iter().map(|t| t.payoff).collect();
    ValueEstimate::from_payoffs(&payoffs)
}

/// Always the same subspace.
#[derive(Debug, Clone)]
pub struct FixedSubspace(pub Subspace);

impl MinimizerStrategy for FixedSubspace {
    fn choose(&self, _history: &[State]) -> Result<Subspace> {
        Ok(self.0.clone())
    }
}

/// A j-dimensional subspace orthogonal to x_k - center, so that every turn
/// pushes the token away from `center` by exactly ε² in squared distance.
#[derive(Debug, Clone)]
pub struct OrthogonalToCenter {
    pub center: Vec<f64>,
    pub j: usize,
}

impl MinimizerStrategy for OrthogonalToCenter {
    fn choose(&self, history: &[State]) -> Result<Subspace> {
        let x = &history.last().expect("nonempty history").x;
        let n = x.len();
        if self.j == 0 || self.j >= n {
            return Err(Error::IndexOutOfRange { j: self.j, n: n - 1 });
        }
        let mut r: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let mut vs = Vec::with_capacity(n);
        if normalize(&mut r) > 0.0 {
            vs.push(r);
        } else {
            let mut e = vec![0.0; n];
            e[n - 1] = 1.0;
            vs.push(e);
        }
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let mut trial = vs.clone();
            trial.push(e);
            if gram_schmidt(&mut trial) {
                vs = trial;
            }
            if vs.len() == self.j + 1 {
                break;
            }
        }
        Ok(Subspace { basis: vs.split_off(1), frame: None })
    }
}

/// Always the first basis vector of the offered subspace.
#[derive(Debug, Clone, Copy)]
pub struct FirstBasisVector;

impl MaximizerStrategy for FirstBasisVector {
    fn choose(&self, _history: &[State], subspace: &Subspace) -> Result<Vec<f64>> {
        Ok(subspace.basis[0].clone())
    }
}

fn mix(seed: u64, history: &[State]) -> u64 {
    // splitmix64 over the seed, turn number and current position
    let mut h = seed ^ (history.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let step = |z: u64| {
        let z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        let z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    h = step(h);
    for c in &history.last().expect("nonempty history").x {
        h = step(h ^ c.to_bits());
    }
    h
}

/// Uniformly distributed unit vector in the subspace, as a deterministic
/// hash of the seed and the history.
#[derive(Debug, Clone, Copy)]
pub struct RandomMaximizer {
    pub seed: u64,
}

impl MaximizerStrategy for RandomMaximizer {
    fn choose(&self, history: &[State], subspace: &Subspace) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, history));
        let n = subspace.basis[0].len();
        loop {
            let mut v = vec![0.0; n];
            for b in &subspace.basis {
                let c: f64 = rng.sample(StandardNormal);
                for i in 0..n {
                    v[i] += c * b[i];
                }
            }
            if normalize(&mut v) > 1e-9 {
                return Ok(v);
            }
        }
    }
}

/// Frame drawn from a frame set by a deterministic hash of the history.
#[derive(Debug, Clone)]
pub struct RandomMinimizer {
    pub frames: Arc<FrameSet>,
    pub seed: u64,
}

impl MinimizerStrategy for RandomMinimizer {
    fn choose(&self, history: &[State]) -> Result<Subspace> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, history));
        let f = rng.gen_range(0..self.frames.num_frames());
        Ok(Subspace { basis: self.frames.frames()[f].clone(), frame: Some(f) })
    }
}

/// Computed DPP values used to steer both players.
#[derive(Debug, Clone)]
pub enum ValueFunction {
    /// Every level of a parabolic run (keep_every = 1).
    Parabolic { grid: Grid, frames: FrameSet, slices: Vec<ValueSlice>, dt: f64, epsilon: f64, payoff: PayoffData },
    /// Stationary values; the clock is ignored.
    Stationary { grid: Grid, frames: FrameSet, slice: ValueSlice, epsilon: f64, payoff: PayoffData },
}

impl ValueFunction {
    pub fn from_parabolic(sol: &ParabolicSolution, payoff: &PayoffData) -> Result<Self> {
        if sol.levels.iter().enumerate().any(|(i, &l)| i != l) {
            return Err(invalid("slices", "every time level must be kept"));
        }
        Ok(ValueFunction::Parabolic {
            grid: sol.grid.clone(),
            frames: sol.frames.clone(),
            slices: sol.slices.clone(),
            dt: sol.log.dt,
            epsilon: sol.grid.epsilon(),
            payoff: payoff.clone(),
        })
    }

    pub fn from_elliptic(sol: &EllipticSolution, payoff: &PayoffData) -> Self {
        ValueFunction::Stationary {
            grid: sol.grid.clone(),
            frames: sol.frames.clone(),
            slice: sol.slice.clone(),
            epsilon: sol.grid.epsilon(),
            payoff: payoff.clone(),
        }
    }

    pub fn frames(&self) -> &FrameSet {
        match self {
            ValueFunction::Parabolic { frames, .. } | ValueFunction::Stationary { frames, .. } => frames,
        }
    }

    /// Slice one step before `state` and the time it carries.
    fn previous(&self, state: &State) -> Result<(&Grid, &ValueSlice, f64, &PayoffData)> {
        match self {
            ValueFunction::Parabolic { grid, slices, dt, payoff, .. } => {
                let level = (state.t / dt).round();
                let max = (slices.len() - 1) as f64 * dt;
                if level < 1.0 || (state.t - level * dt).abs() > 1e-9 * dt.max(state.t) || level as usize > slices.len() - 1 {
                    return Err(Error::TimeOutOfRange { t: state.t, max });
                }
                let prev = &slices[level as usize - 1];
                Ok((grid, prev, prev.t, payoff))
            }
            ValueFunction::Stationary { grid, slice, payoff, .. } => Ok((grid, slice, 0.0, payoff)),
        }
    }

    fn epsilon(&self) -> f64 {
        match self {
            ValueFunction::Parabolic { epsilon, .. } | ValueFunction::Stationary { epsilon, .. } => *epsilon,
        }
    }

    /// One-step average ½U(x + εv) + ½U(x - εv) at the state.
    fn average(&self, state: &State, v: &[f64]) -> Result<f64> {
        let (grid, prev, t_prev, payoff) = self.previous(state)?;
        let eps = self.epsilon();
        let mut out = 0.0;
        for sign in [1.0, -1.0] {
            let y: Vec<f64> = state.x.iter().zip(v).map(|(a, b)| a + sign * eps * b).collect();
            out += 0.5
                * if grid.domain().contains(&y) {
                    grid.interpolate_values(&prev.values, &y).ok_or(Error::OutsideCoverage(y))?
                } else {
                    payoff.eval(&y, t_prev)?
                };
        }
        Ok(out)
    }
}

/// Minimizer playing the first frame attaining the inf in the DPP update.
#[derive(Debug, Clone)]
pub struct ValueMinimizer(pub Arc<ValueFunction>);

/// Maximizer playing the first half-sample attaining the sup in the offered frame.
#[derive(Debug, Clone)]
pub struct ValueMaximizer(pub Arc<ValueFunction>);

impl MinimizerStrategy for ValueMinimizer {
    fn choose(&self, history: &[State]) -> Result<Subspace> {
        let state = history.last().expect("nonempty history");
        let (grid, prev, t_prev, payoff) = self.0.previous(state)?;
        let frames = self.0.frames();
        let r = node_update(grid, &prev.values, payoff, frames, self.0.epsilon(), t_prev, &state.x)?;
        Ok(Subspace { basis: frames.frames()[r.frame].clone(), frame: Some(r.frame) })
    }
}

impl MaximizerStrategy for ValueMaximizer {
    fn choose(&self, history: &[State], subspace: &Subspace) -> Result<Vec<f64>> {
        let state = history.last().expect("nonempty history");
        let frames = self.0.frames();
        if subspace.dim() != frames.j() {
            return Err(Error::DimensionMismatch { expected: frames.j(), got: subspace.dim() });
        }
        let n = state.x.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (s, coef) in frames.half_samples().iter().enumerate() {
            let d = match subspace.frame {
                Some(f) => frames.direction(f, s).to_vec(),
                None => {
                    let mut d = vec![0.0; n];
                    for (c, b) in coef.iter().zip(&subspace.basis) {
                        for i in 0..n {
                            d[i] += c * b[i];
                        }
                    }
                    normalize(&mut d);
                    d
                }
            };
            let v = self.0.average(state, &d)?;
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, d));
            }
        }
        Ok(best.expect("at least one sample").1)
    }
}

/// Strategies derived from a parabolic DPP run.
pub fn value_strategy_pair(sol: &ParabolicSolution, payoff: &PayoffData) -> Result<(ValueMinimizer, ValueMaximizer)> {
    let vf = Arc::new(ValueFunction::from_parabolic(sol, payoff)?);
    Ok((ValueMinimizer(vf.clone()), ValueMaximizer(vf)))
}

/// Strategies derived from stationary DPP values; usable in both game modes.
pub fn stationary_strategy_pair(sol: &EllipticSolution, payoff: &PayoffData) -> (ValueMinimizer, ValueMaximizer) {
    let vf = Arc::new(ValueFunction::from_elliptic(sol, payoff));
    (ValueMinimizer(vf.clone()), ValueMaximizer(vf))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub runs: usize,
    /// mean |x_tau - x_0|²
    pub mean_sq_displacement: f64,
    /// ε² mean tau
    pub eps2_mean_tau: f64,
    pub pooled_stderr: f64,
    pub identity_holds: bool,
    /// Mean of x_tau - x_0 and its standard error, per coordinate.
    pub mean_displacement: Vec<f64>,
    pub displacement_stderr: Vec<f64>,
    /// Largest |z| score of the per-step mean increment of
    /// |x_k - x_0|² - ε²k among steps with at least 30 live games.
    pub max_drift_z: f64,
    pub drift_ok: bool,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    (mean, (var / m).sqrt())
}

/// Optional-stopping check E|x_tau - x_0|² = ε² E tau and the per-step
/// martingale increments. Censored games are excluded.
pub fn martingale_diagnostics(trajectories: &[GameTrajectory], epsilon: f64) -> Result<MartingaleReport> {
    let done: Vec<&GameTrajectory> = trajectories.iter().filter(|t| !t.censored).collect();
    if done.len() < 1000 {
        return Err(Error::InsufficientSample { needed: 1000, got: done.len() });
    }
    let e2 = epsilon * epsilon;
    let sq: Vec<f64> = done.iter().map(|t| dist2(&t.exit.x, &t.states[0].x)).collect();
    let tau: Vec<f64> = done.iter().map(|t| e2 * t.tau as f64).collect();
    let (msq, se_sq) = mean_se(&sq);
    let (mtau, se_tau) = mean_se(&tau);
    let pooled = (se_sq * se_sq + se_tau * se_tau).sqrt();
    let n = done[0].states[0].x.len();
    let mut mean_disp = Vec::with_capacity(n);
    let mut se_disp = Vec::with_capacity(n);
    for i in 0..n {
        let d: Vec<f64> = done.iter().map(|t| t.exit.x[i] - t.states[0].x[i]).collect();
        let (m, s) = mean_se(&d);
        mean_disp.push(m);
        se_disp.push(s);
    }
    let longest = done.iter().map(|t| t.tau).max().unwrap_or(0);
    let mut max_z = 0.0f64;
    for k in 0..longest {
        let inc: Vec<f64> = done
            .iter()
            .filter(|t| t.tau > k)
            .map(|t| dist2(&t.states[k + 1].x, &t.states[0].x) - dist2(&t.states[k].x, &t.states[0].x) - e2)
            .collect();
        if inc.len() < 30 {
            continue;
        }
        let (m, s) = mean_se(&inc);
        let z = if s > 0.0 { (m / s).abs() } else if m.abs() > 1e-12 { f64::INFINITY } else { 0.0 };
        max_z = max_z.max(z);
    }
    Ok(MartingaleReport {
        runs: done.len(),
        mean_sq_displacement: msq,
        eps2_mean_tau: mtau,
        pooled_stderr: pooled,
        identity_holds: (msq - mtau).abs() <= 4.0 * pooled + 1e-12,
        mean_displacement: mean_disp,
        displacement_stderr: se_disp,
        max_drift_z: max_z,
        drift_ok: max_z <= 5.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitTail {
    pub t: Vec<f64>,
    /// Empirical P[ε²tau/2 >= t].
    pub tail: Vec<f64>,
    pub counts: Vec<usize>,
    /// Least-squares slope of ln(tail) over the points with count >= 30.
    pub slope: Option<f64>,
    pub censored: bool,
}

/// Survival function of the rescaled exit time ε²tau/2 on the given grid.
pub fn exit_tail(trajectories: &[GameTrajectory], epsilon: f64, t_grid: &[f64]) -> Result<ExitTail> {
    if trajectories.is_empty() {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    let times: Vec<f64> = trajectories.iter().map(|t| 0.5 * epsilon * epsilon * t.tau as f64).collect();
    let censored = trajectories.iter().any(|t| t.censored);
    let total = times.len() as f64;
    let counts: Vec<usize> = t_grid.iter().map(|&s| times.iter().filter(|&&x| x >= s).count()).collect();
    let tail: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let pts: Vec<(f64, f64)> =
        t_grid.iter().zip(&counts).filter(|(_, &c)| c >= 30).map(|(&s, &c)| (s, (c as f64 / total).ln())).collect();
    let slope = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    Ok(ExitTail { t: t_grid.to_vec(), tail, counts, slope, censored })
}
