//! Explicit finite differences for `u_t = lambda_j(D^2 u)`, an independent
//! route used to cross-check the DPP solver.

use rayon::prelude::*;

use crate::domain::{build_grid, check_same_dim, require_positive, Domain, Grid, NodeKind, PayoffData, ValueSlice};
use crate::eig::{lambda_j, SymMatrix};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FdConfig {
    pub h: f64,
    pub dt: f64,
    pub j: usize,
    pub horizon: f64,
    pub keep_every: usize,
}

impl FdConfig {
    /// Largest stable step h²/(2N).
    pub fn with_max_step(h: f64, j: usize, horizon: f64, dim: usize) -> Self {
        Self { h, dt: h * h / (2.0 * dim as f64), j, horizon, keep_every: 1 }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        require_positive("h", self.h)?;
        require_positive("dt", self.dt)?;
        require_positive("horizon", self.horizon)?;
        if self.j == 0 || self.j > dim {
            return Err(Error::IndexOutOfRange { j: self.j, n: dim });
        }
        let budget = self.h * self.h / (2.0 * dim as f64);
        if self.dt > budget * (1.0 + 1e-12) {
            return Err(invalid("dt", format!("{} exceeds the stability budget h^2/(2N) = {budget}", self.dt)));
        }
        if self.keep_every == 0 {
            return Err(invalid("keep_every", "must be at least 1"));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

fn stencil(slice: &ValueSlice, grid: &Grid, node: usize, moves: &[(usize, i64)]) -> Result<f64> {
    let mut idx = node;
    for &(axis, off) in moves {
        idx = grid.neighbor(idx, axis, off).ok_or(Error::StencilOutsideStrip(node))?;
    }
    let v = slice.values[idx];
    if v.is_nan() {
        return Err(Error::StencilOutsideStrip(node));
    }
    Ok(v)
}

/// Central-difference Hessian at an interior node.
pub fn discrete_hessian(slice: &ValueSlice, grid: &Grid, node: usize) -> Result<SymMatrix> {
    check_same_dim(grid.len(), slice.values.len())?;
    if node >= grid.len() || grid.kind(node) != NodeKind::Interior {
        return Err(invalid("node", format!("{node} is not an interior node")));
    }
    let n = grid.dim();
    let h2 = grid.h() * grid.h();
    let u = slice.values[node];
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        let p = stencil(slice, grid, node, &[(i, 1)])?;
        let q = stencil(slice, grid, node, &[(i, -1)])?;
        m[i * n + i] = (p - 2.0 * u + q) / h2;
        for k in i + 1..n {
            let pp = stencil(slice, grid, node, &[(i, 1), (k, 1)])?;
            let pm = stencil(slice, grid, node, &[(i, 1), (k, -1)])?;
            let mp = stencil(slice, grid, node, &[(i, -1), (k, 1)])?;
            let mm = stencil(slice, grid, node, &[(i, -1), (k, -1)])?;
            let c = (pp - pm - mp + mm) / (4.0 * h2);
            m[i * n + k] = c;
            m[k * n + i] = c;
        }
    }
    SymMatrix::new(n, &m)
}

#[derive(Debug, Clone)]
pub struct FdSolution {
    pub grid: Grid,
    pub slices: Vec<ValueSlice>,
    pub levels: Vec<usize>,
}

impl FdSolution {
    pub fn last(&self) -> &ValueSlice {
        self.slices.last().expect("the initial slice is always kept")
    }
}

/// Forward Euler with strip nodes pinned to the boundary datum.
pub fn solve_fd(domain: &Domain, payoff: &PayoffData, config: &FdConfig) -> Result<FdSolution> {
    config.validate(domain.dim())?;
    check_same_dim(domain.dim(), payoff.domain().dim())?;
    let grid = build_grid(domain, config.h, config.h)?;
    let mut slice = payoff.initial_slice(&grid, config.h);
    let levels = config.levels();
    let mut slices = vec![slice.clone()];
    let mut kept = vec![0];
    let mut x = vec![0.0; grid.dim()];
    for k in 1..=levels {
        let t = k as f64 * config.dt;
        let inner: Vec<f64> = grid
            .interior_nodes()
            .par_iter()
            .map(|&idx| {
                let hess = discrete_hessian(&slice, &grid, idx)?;
                Ok(slice.values[idx] + config.dt * lambda_j(&hess, config.j)?)
            })
            .collect::<Result<_>>()?;
        let mut next = slice.values.clone();
        for (&idx, v) in grid.interior_nodes().iter().zip(inner) {
            next[idx] = v;
        }
        for &idx in grid.strip_nodes() {
            grid.write_point(idx, &mut x);
            next[idx] = payoff.eval(&x, t)?;
        }
        slice = ValueSlice { t, epsilon: config.h, values: next };
        if k % config.keep_every == 0 || k == levels {
            slices.push(slice.clone());
            kept.push(k);
        }
    }
    Ok(FdSolution { grid, slices, levels: kept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::{solve_elliptic, solve_parabolic, DppConfig, InitialGuess};
    use std::f64::consts::PI;

    #[test]
    fn quadratics_and_affine_are_exact() {
        let d = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let grid = build_grid(&d, 0.1, 0.1).unwrap();
        let a = SymMatrix::new(3, &[1.0, 0.5, -0.2, 0.5, -2.0, 0.3, -0.2, 0.3, 0.7]).unwrap();
        let q = ValueSlice::from_fn(&grid, 0.0, 0.1, |x| 0.5 * a.quad_form(x) + x[0] - 3.0);
        let aff = ValueSlice::from_fn(&grid, 0.0, 0.1, |x| 2.0 * x[0] - x[1] + 0.5 * x[2]);
        for &node in grid.interior_nodes() {
            let hq = discrete_hessian(&q, &grid, node).unwrap();
            let ha = discrete_hessian(&aff, &grid, node).unwrap();
            for (x, y) in hq.entries().iter().zip(a.entries()) {
                assert!((x - y).abs() < 1e-9);
            }
            assert!(ha.entries().iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn quartic_second_difference() {
        let d = Domain::interval(0.0, 2.0).unwrap();
        let h = 0.01;
        let grid = build_grid(&d, h, h).unwrap();
        let s = ValueSlice::from_fn(&grid, 0.0, h, |x| x[0].powi(4));
        let node = grid.node_at(&[1.0]).unwrap();
        let hess = discrete_hessian(&s, &grid, node).unwrap();
        assert!((hess.get(0, 0) - (12.0 + 2.0 * h * h)).abs() < 1e-8);
    }

    #[test]
    fn stability_budget_enforced() {
        let cfg = FdConfig { h: 0.1, dt: 0.003, j: 1, horizon: 1.0, keep_every: 1 };
        assert!(cfg.validate(2).is_err());
        assert!(FdConfig { dt: 0.0025, ..cfg }.validate(2).is_ok());
    }

    #[test]
    fn constants_stay_constant() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = PayoffData::stationary(d.clone(), |_| -1.5, |_| -1.5);
        let sol = solve_fd(&d, &p, &FdConfig::with_max_step(0.1, 2, 0.2, 2)).unwrap();
        for &i in sol.grid.interior_nodes() {
            assert!((sol.last().values[i] + 1.5).abs() < 1e-14);
        }
    }

    fn heat_error(h: f64) -> f64 {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let p = PayoffData::stationary(d.clone(), |_| 0.0, |x| (PI * x[0]).sin());
        let sol = solve_fd(&d, &p, &FdConfig::with_max_step(h, 1, 0.5, 1)).unwrap();
        let t = sol.last().t;
        sol.grid
            .interior_nodes()
            .iter()
            .map(|&i| (sol.last().values[i] - (-PI * PI * t).exp() * (PI * sol.grid.point(i)[0]).sin()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn heat_reduction() {
        let e = heat_error(0.02);
        assert!(e <= f64::max(0.05, 0.02), "{e}");
        assert!(heat_error(0.01) <= e);
    }

    #[test]
    fn comparison_principle() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let g = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let lo = PayoffData::stationary(d.clone(), g, |x| 0.2 * x[0]);
        let hi = PayoffData::stationary(d.clone(), move |x| g(x) + 0.1, |x| 0.2 * x[0] + 0.5 * (1.0 - x[0] * x[0] - x[1] * x[1]) + 0.1);
        for j in 1..=2 {
            let cfg = FdConfig { keep_every: 20, ..FdConfig::with_max_step(0.1, j, 0.5, 2) };
            let a = solve_fd(&d, &lo, &cfg).unwrap();
            let b = solve_fd(&d, &hi, &cfg).unwrap();
            for (x, y) in a.slices.iter().zip(&b.slices) {
                for &i in a.grid.interior_nodes() {
                    assert!(x.values[i] <= y.values[i] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn duality_under_negation() {
        let d = Domain::ball(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        let p = PayoffData::stationary(d.clone(), |x| x[0] * x[1] - x[2], |x| x[0] * x[0] + x[1] * x[2]);
        for j in 1..=3 {
            let c = FdConfig::with_max_step(0.2, j, 0.1, 3);
            let cd = FdConfig { j: 4 - j, ..c.clone() };
            let a = solve_fd(&d, &p, &c).unwrap();
            let b = solve_fd(&d, &p.negated(), &cd).unwrap();
            assert!(a.last().sup_distance(&b.last().negated(), a.grid.interior_nodes()) < 1e-12);
        }
    }

    #[test]
    fn routes_agree_under_refinement() {
        // smooth data where both routes converge: the heat reduction and a disk problem
        let d = Domain::interval(0.0, 1.0).unwrap();
        let p = PayoffData::stationary(d.clone(), |_| 0.0, |x| (PI * x[0]).sin() + 0.3 * (2.0 * PI * x[0]).sin());
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.05, 0.025] {
            let h = eps / 2.0;
            let dpp = solve_parabolic(&d, &p, &DppConfig { horizon: 0.1, ..DppConfig::new(eps, 1) }).unwrap();
            let fd = solve_fd(&d, &p, &FdConfig::with_max_step(h, 1, 0.1, 1)).unwrap();
            assert_eq!(dpp.grid.interior_nodes().len(), fd.grid.interior_nodes().len());
            let gap = dpp.last().sup_distance_across(&dpp.grid, fd.last(), &fd.grid);
            assert!(gap <= prev, "eps={eps} gap={gap} prev={prev}");
            prev = gap;
        }
    }

    #[test]
    fn disk_long_run_matches_elliptic() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let g = |x: &[f64]| (x[0] * x[0] - x[1] * x[1]) / (x[0] * x[0] + x[1] * x[1]);
        let p = PayoffData::stationary(d.clone(), g, |x| x[0] * x[0] - x[1] * x[1]);
        let (eps, h) = (0.1, 0.05);
        let ell = solve_elliptic(&d, &p, &DppConfig { tolerance: 1e-7, ..DppConfig::new(eps, 1) }, InitialGuess::Min).unwrap();
        let fd = solve_fd(&d, &p, &FdConfig { keep_every: usize::MAX, ..FdConfig::with_max_step(h, 1, 3.0, 2) }).unwrap();
        let gap = ell.slice.sup_distance_across(&ell.grid, fd.last(), &fd.grid);
        assert!(gap <= f64::max(0.08, 5.0 * eps + 5.0 * h), "gap={gap}");
    }
}
