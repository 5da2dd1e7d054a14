//! Dynamic programming principle on a lattice:
//!
//! `u(x, t) = inf_{dim S = j} sup_{v in S, |v| = 1} ½u(x + εv, t - ε²/2) + ½u(x - εv, t - ε²/2)`
//!
//! with `u = h` outside the domain or at nonpositive times, plus the
//! stationary version solved by whole-slice fixed-point sweeps.

use rayon::prelude::*;

use crate::domain::{build_grid, check_same_dim, require_positive, Domain, Grid, PayoffData, ValueSlice, MAX_DIM};
use crate::eig::{generate_frames, FrameSet};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DppConfig {
    pub epsilon: f64,
    pub j: usize,
    pub horizon: f64,
    pub resolution: usize,
    pub seed: u64,
    pub h: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Keep every k-th time level (the last level is always kept).
    pub keep_every: usize,
}

impl DppConfig {
    pub fn new(epsilon: f64, j: usize) -> Self {
        Self {
            epsilon,
            j,
            horizon: 1.0,
            resolution: 90,
            seed: 0,
            h: epsilon / 2.0,
            tolerance: 1e-8,
            max_sweeps: 200_000,
            keep_every: 1,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        require_positive("epsilon", self.epsilon)?;
        require_positive("horizon", self.horizon)?;
        require_positive("tolerance", self.tolerance)?;
        require_positive("h", self.h)?;
        if self.h > self.epsilon {
            return Err(Error::Spacing { h: self.h, epsilon: self.epsilon });
        }
        if self.j == 0 || self.j > dim {
            return Err(Error::IndexOutOfRange { j: self.j, n: dim });
        }
        if self.resolution == 0 {
            return Err(invalid("resolution", "must be at least 1"));
        }
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps", "must be at least 1"));
        }
        if self.keep_every == 0 {
            return Err(invalid("keep_every", "must be at least 1"));
        }
        Ok(())
    }

    /// Time step ε²/2 between consecutive levels.
    pub fn dt(&self) -> f64 {
        0.5 * self.epsilon * self.epsilon
    }

    /// Number of levels needed to reach the horizon.
    pub fn levels(&self) -> usize {
        (self.horizon / self.dt() - 1e-9).ceil().max(1.0) as usize
    }
}

/// Value at a landing point `y`: interpolated inside the domain, the payoff
/// at time `t_prev` outside.
#[inline]
fn landing(grid: &Grid, values: &[f64], payoff: &PayoffData, y: &[f64], t_prev: f64) -> Result<f64> {
    if grid.domain().contains(y) {
        grid.interpolate_values(values, y).ok_or_else(|| Error::OutsideCoverage(y.to_vec()))
    } else {
        payoff.eval(y, t_prev)
    }
}

/// The inf-sup at a single point, returning the scan outcome.
pub(crate) fn node_update(
    grid: &Grid,
    values: &[f64],
    payoff: &PayoffData,
    frames: &FrameSet,
    epsilon: f64,
    t_prev: f64,
    x: &[f64],
) -> Result<crate::eig::InfSup> {
    let n = x.len();
    let mut yp = [0.0; MAX_DIM];
    let mut ym = [0.0; MAX_DIM];
    let mut err = None;
    let out = frames.inf_sup(|d| {
        for i in 0..n {
            yp[i] = x[i] + epsilon * d[i];
            ym[i] = x[i] - epsilon * d[i];
        }
        let a = landing(grid, values, payoff, &yp[..n], t_prev);
        let b = landing(grid, values, payoff, &ym[..n], t_prev);
        match (a, b) {
            (Ok(a), Ok(b)) => 0.5 * (a + b),
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
                f64::NAN
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn sweep(
    prev: &ValueSlice,
    grid: &Grid,
    payoff: &PayoffData,
    frames: &FrameSet,
    epsilon: f64,
    t_prev: f64,
) -> Result<Vec<f64>> {
    grid.interior_nodes()
        .par_iter()
        .map_init(
            || vec![0.0; grid.dim()],
            |x, &idx| {
                grid.write_point(idx, x);
                node_update(grid, &prev.values, payoff, frames, epsilon, t_prev, x).map(|r| r.value)
            },
        )
        .collect()
}

/// Landing stencils for a time-independent datum. The points x ± εd never
/// move between levels, so their interpolation weights (or, outside the
/// domain, their payoff values) are computed once. Arithmetic matches the
/// direct evaluation exactly.
pub(crate) struct LandingTable {
    per_node: usize,
    start: Vec<u32>,
    corner: Vec<u32>,
    weight: Vec<f64>,
    fixed: Vec<f64>,
}

/// Upper bound on stored corner entries (about 12 bytes each).
const TABLE_BUDGET: usize = 8_000_000;

impl LandingTable {
    pub(crate) fn build(grid: &Grid, payoff: &PayoffData, frames: &FrameSet, epsilon: f64) -> Result<Option<Self>> {
        if payoff.is_time_dependent() {
            return Ok(None);
        }
        let n = grid.dim();
        let half = frames.half_samples().len();
        let per_node = frames.num_frames() * half * 2;
        if grid.interior_nodes().len() * per_node * (1 << n) > TABLE_BUDGET {
            return Ok(None);
        }
        type NodeRows = (Vec<u32>, Vec<(u32, f64)>, Vec<f64>);
        let rows: Vec<NodeRows> = grid
            .interior_nodes()
            .par_iter()
            .map(|&idx| -> Result<NodeRows> {
                let x = grid.point(idx);
                let mut lens = Vec::with_capacity(per_node);
                let mut corners = Vec::new();
                let mut fixed = Vec::with_capacity(per_node);
                let mut y = vec![0.0; n];
                for f in 0..frames.num_frames() {
                    for s in 0..half {
                        let d = frames.direction(f, s);
                        for sign in [1.0, -1.0] {
                            for i in 0..n {
                                y[i] = x[i] + sign * epsilon * d[i];
                            }
                            let before = corners.len();
                            if grid.domain().contains(&y) {
                                let ok = grid.visit_corners(&y, |c, w| {
                                    corners.push((c as u32, w));
                                    grid.kind(c) != crate::domain::NodeKind::Exterior
                                });
                                if !ok || corners.len() == before {
                                    return Err(Error::OutsideCoverage(y.clone()));
                                }
                                fixed.push(0.0);
                            } else {
                                fixed.push(payoff.eval(&y, 0.0)?);
                            }
                            lens.push((corners.len() - before) as u32);
                        }
                    }
                }
                Ok((lens, corners, fixed))
            })
            .collect::<Result<_>>()?;
        let total: usize = rows.iter().map(|r| r.1.len()).sum();
        let mut table = Self {
            per_node,
            start: Vec::with_capacity(rows.len() * per_node + 1),
            corner: Vec::with_capacity(total),
            weight: Vec::with_capacity(total),
            fixed: Vec::with_capacity(rows.len() * per_node),
        };
        table.start.push(0);
        for (lens, corners, fixed) in rows {
            let mut at = *table.start.last().unwrap_or(&0);
            for l in lens {
                at += l;
                table.start.push(at);
            }
            for (c, w) in corners {
                table.corner.push(c);
                table.weight.push(w);
            }
            table.fixed.extend(fixed);
        }
        Ok(Some(table))
    }

    #[inline]
    fn landing(&self, values: &[f64], l: usize) -> f64 {
        let (a, b) = (self.start[l] as usize, self.start[l + 1] as usize);
        if a == b {
            return self.fixed[l];
        }
        let mut acc = 0.0;
        for k in a..b {
            acc += self.weight[k] * values[self.corner[k] as usize];
        }
        acc
    }

    /// Inf-sup at the `pos`-th interior node.
    pub(crate) fn node_update(&self, frames: &FrameSet, values: &[f64], pos: usize) -> crate::eig::InfSup {
        let half = frames.half_samples().len();
        let base = pos * self.per_node;
        frames.inf_sup_indexed(|f, s| {
            let l = base + 2 * (f * half + s);
            0.5 * (self.landing(values, l) + self.landing(values, l + 1))
        })
    }

    pub(crate) fn sweep(&self, frames: &FrameSet, prev: &ValueSlice, interior: &[usize]) -> Vec<f64> {
        (0..interior.len()).into_par_iter().map(|pos| self.node_update(frames, &prev.values, pos).value).collect()
    }
}

fn check_compat(prev: &ValueSlice, grid: &Grid, payoff: &PayoffData, frames: &FrameSet) -> Result<()> {
    check_same_dim(grid.dim(), frames.dim())?;
    check_same_dim(grid.dim(), payoff.domain().dim())?;
    check_same_dim(grid.len(), prev.values.len())
}

/// One backward step: the slice at time `t` from the slice at `t - ε²/2`.
pub fn dpp_update(
    prev: &ValueSlice,
    grid: &Grid,
    payoff: &PayoffData,
    frames: &FrameSet,
    epsilon: f64,
    t: f64,
) -> Result<ValueSlice> {
    check_compat(prev, grid, payoff, frames)?;
    let t_prev = t - 0.5 * epsilon * epsilon;
    let inner = sweep(prev, grid, payoff, frames, epsilon, t_prev)?;
    let mut values = vec![f64::NAN; grid.len()];
    for (&idx, v) in grid.interior_nodes().iter().zip(inner) {
        values[idx] = v;
    }
    let mut x = vec![0.0; grid.dim()];
    for &idx in grid.strip_nodes() {
        grid.write_point(idx, &mut x);
        values[idx] = payoff.eval(&x, t)?;
    }
    Ok(ValueSlice { t, epsilon, values })
}

/// `dpp_update` through the landing table when one is available. Strip
/// values are carried over in the cached case, which is only valid for
/// time-independent data.
pub(crate) fn step_with(
    table: Option<&LandingTable>,
    prev: &ValueSlice,
    grid: &Grid,
    payoff: &PayoffData,
    frames: &FrameSet,
    epsilon: f64,
    t: f64,
) -> Result<ValueSlice> {
    match table {
        Some(tab) => {
            let mut next = prev.values.clone();
            for (&idx, v) in grid.interior_nodes().iter().zip(tab.sweep(frames, prev, grid.interior_nodes())) {
                next[idx] = v;
            }
            Ok(ValueSlice { t, epsilon, values: next })
        }
        None => dpp_update(prev, grid, payoff, frames, epsilon, t),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub levels: usize,
    pub dt: f64,
    pub interior_nodes: usize,
    pub strip_nodes: usize,
    pub frames: usize,
    pub sphere_samples: usize,
    pub min_payoff: f64,
    pub max_payoff: f64,
}

#[derive(Debug, Clone)]
pub struct ParabolicSolution {
    pub grid: Grid,
    pub frames: FrameSet,
    /// Kept slices, in increasing time; `levels[i]` is the level of `slices[i]`.
    pub slices: Vec<ValueSlice>,
    pub levels: Vec<usize>,
    pub log: RunLog,
}

impl ParabolicSolution {
    pub fn last(&self) -> &ValueSlice {
        self.slices.last().expect("at least the initial slice is kept")
    }
}

fn min_max(slice: &ValueSlice, nodes: &[usize]) -> (f64, f64) {
    nodes.iter().map(|&i| slice.values[i]).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Runs the backward recursion from the t <= 0 data up to the horizon,
/// handing every level to `observe`. Returning `false` stops early.
pub fn solve_parabolic_with(
    domain: &Domain,
    payoff: &PayoffData,
    config: &DppConfig,
    mut observe: impl FnMut(usize, &ValueSlice) -> bool,
) -> Result<(Grid, FrameSet, RunLog)> {
    config.validate(domain.dim())?;
    check_same_dim(domain.dim(), payoff.domain().dim())?;
    let grid = build_grid(domain, config.h, config.epsilon)?;
    let frames = generate_frames(domain.dim(), config.j, config.resolution, config.seed)?;
    let mut slice = payoff.initial_slice(&grid, config.epsilon);
    let all: Vec<usize> = grid.interior_nodes().iter().chain(grid.strip_nodes()).copied().collect();
    let (mut lo, mut hi) = min_max(&slice, &all);
    let levels = config.levels();
    let dt = config.dt();
    let table = LandingTable::build(&grid, payoff, &frames, config.epsilon)?;
    let mut done = levels;
    if observe(0, &slice) {
        for k in 1..=levels {
            slice = step_with(table.as_ref(), &slice, &grid, payoff, &frames, config.epsilon, k as f64 * dt)?;
            let (a, b) = min_max(&slice, grid.strip_nodes());
            lo = lo.min(a);
            hi = hi.max(b);
            if !observe(k, &slice) {
                done = k;
                break;
            }
        }
    } else {
        done = 0;
    }
    let log = RunLog {
        levels: done,
        dt,
        interior_nodes: grid.interior_nodes().len(),
        strip_nodes: grid.strip_nodes().len(),
        frames: frames.num_frames(),
        sphere_samples: frames.sphere_samples().len(),
        min_payoff: lo,
        max_payoff: hi,
    };
    Ok((grid, frames, log))
}

/// Slices at levels 0, keep_every, 2*keep_every, ... and the final level.
pub fn solve_parabolic(domain: &Domain, payoff: &PayoffData, config: &DppConfig) -> Result<ParabolicSolution> {
    let total = config.levels();
    let mut slices = Vec::new();
    let mut levels = Vec::new();
    let (grid, frames, log) = solve_parabolic_with(domain, payoff, config, |k, s| {
        if k % config.keep_every.max(1) == 0 || k == total {
            slices.push(s.clone());
            levels.push(k);
        }
        true
    })?;
    Ok(ParabolicSolution { grid, frames, slices, levels, log })
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Constant equal to the smallest boundary value on the strip.
    Min,
    /// Constant equal to the largest boundary value on the strip.
    Max,
    Constant(f64),
    Slice(ValueSlice),
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub grid: Grid,
    pub frames: FrameSet,
    pub slice: ValueSlice,
    pub sweeps: usize,
    pub residual: f64,
}

/// Fixed point of the stationary update by plain whole-slice sweeps.
pub fn solve_elliptic(
    domain: &Domain,
    boundary: &PayoffData,
    config: &DppConfig,
    guess: InitialGuess,
) -> Result<EllipticSolution> {
    config.validate(domain.dim())?;
    check_same_dim(domain.dim(), boundary.domain().dim())?;
    if boundary.is_time_dependent() {
        return Err(invalid("boundary", "the stationary problem needs a time-independent datum"));
    }
    let grid = build_grid(domain, config.h, config.epsilon)?;
    let frames = generate_frames(domain.dim(), config.j, config.resolution, config.seed)?;
    let strip = ValueSlice::from_fn(&grid, 0.0, config.epsilon, |x| boundary.g(x, 0.0));
    let (gmin, gmax) = min_max(&strip, grid.strip_nodes());
    let mut slice = match guess {
        InitialGuess::Min => fill_interior(&grid, strip, gmin),
        InitialGuess::Max => fill_interior(&grid, strip, gmax),
        InitialGuess::Constant(c) => fill_interior(&grid, strip, c),
        InitialGuess::Slice(s) => {
            check_same_dim(grid.len(), s.values.len())?;
            let mut s = s;
            for &idx in grid.strip_nodes() {
                s.values[idx] = strip.values[idx];
            }
            s
        }
    };
    let table = LandingTable::build(&grid, boundary, &frames, config.epsilon)?;
    let mut residual = f64::INFINITY;
    for sweep_no in 1..=config.max_sweeps {
        let inner = match &table {
            Some(tab) => tab.sweep(&frames, &slice, grid.interior_nodes()),
            None => sweep(&slice, &grid, boundary, &frames, config.epsilon, 0.0)?,
        };
        residual = 0.0;
        for (&idx, v) in grid.interior_nodes().iter().zip(inner) {
            residual = f64::max(residual, (v - slice.values[idx]).abs());
            slice.values[idx] = v;
        }
        if residual <= config.tolerance {
            return Ok(EllipticSolution { grid, frames, slice, sweeps: sweep_no, residual });
        }
    }
    Err(Error::NotConverged { sweeps: config.max_sweeps, residual })
}

fn fill_interior(grid: &Grid, mut strip: ValueSlice, c: f64) -> ValueSlice {
    for &idx in grid.interior_nodes() {
        strip.values[idx] = c;
    }
    strip
}
