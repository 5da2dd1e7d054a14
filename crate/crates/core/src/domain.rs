//! Domains, lattices, payoff data and scalar fields shared by every solver.
//!
//! A [`Grid`] is a uniform Cartesian lattice anchored at the origin (node
//! coordinates are integer multiples of `h`), covering the domain's bounding
//! box plus a boundary strip. Nodes are classified analytically against the
//! [`Domain`], never from the lattice itself.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::vecops::{dist2, norm2};

pub const MAX_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned ellipsoid.
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
    Intersection { balls: Vec<(Vec<f64>, f64)> },
}

/// Bounded open convex set in R^N, 1 <= N <= 6.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    dim: usize,
}

fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::Dimension(n))
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} has non-finite entries")))
    }
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_dim(center.len())?;
        check_finite("center", &center)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { dim: center.len(), shape: Shape::Ball { center, radius } })
    }

    /// Open interval (a, b) as a one-dimensional ball.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Domain(format!("empty interval ({a}, {b})")));
        }
        Self::ball(vec![0.5 * (a + b)], 0.5 * (b - a))
    }

    pub fn ellipsoid(center: Vec<f64>, semi_axes: Vec<f64>) -> Result<Self> {
        check_dim(center.len())?;
        check_finite("center", &center)?;
        if semi_axes.len() != center.len() {
            return Err(Error::DimensionMismatch { expected: center.len(), got: semi_axes.len() });
        }
        if semi_axes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Domain("semi-axes must be positive".into()));
        }
        Ok(Self { dim: center.len(), shape: Shape::Ellipsoid { center, semi_axes } })
    }

    /// Intersection of open balls. The intersection must be nonempty.
    pub fn intersection(balls: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let first = balls.first().ok_or_else(|| Error::Domain("no balls given".into()))?;
        let dim = first.0.len();
        check_dim(dim)?;
        for (c, r) in &balls {
            if c.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
            }
            check_finite("center", c)?;
            if !(*r > 0.0 && r.is_finite()) {
                return Err(Error::Domain(format!("radius must be positive, got {r}")));
            }
        }
        let d = Self { dim, shape: Shape::Intersection { balls } };
        if !d.contains(&d.interior_point()) {
            return Err(Error::Domain("intersection of balls is empty".into()));
        }
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Exact membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Ball { center, radius } => dist2(x, center) < radius * radius,
            Shape::Ellipsoid { center, semi_axes } => {
                let s: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((xi, ci), ai)| ((xi - ci) / ai).powi(2))
                    .sum();
                s < 1.0
            }
            Shape::Intersection { balls } => balls.iter().all(|(c, r)| dist2(x, c) < r * r),
        }
    }

    /// Per-axis (min, max) of a box containing the domain.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Shape::Ellipsoid { center, semi_axes } => (
                center.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                center.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
            ),
            Shape::Intersection { balls } => {
                let mut lo = vec![f64::NEG_INFINITY; self.dim];
                let mut hi = vec![f64::INFINITY; self.dim];
                for (c, r) in balls {
                    for i in 0..self.dim {
                        lo[i] = lo[i].max(c[i] - r);
                        hi[i] = hi[i].min(c[i] + r);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// A ball (center, radius) containing the closure of the domain.
    pub fn enclosing_ball(&self) -> (Vec<f64>, f64) {
        match &self.shape {
            Shape::Ball { center, radius } => (center.clone(), *radius),
            Shape::Ellipsoid { center, semi_axes } => {
                (center.clone(), semi_axes.iter().cloned().fold(0.0, f64::max))
            }
            Shape::Intersection { balls } => {
                let (c, r) = balls
                    .iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("nonempty by construction");
                (c.clone(), *r)
            }
        }
    }

    /// A point strictly inside the domain.
    pub fn interior_point(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Ball { center, .. } => center.clone(),
            Shape::Ellipsoid { center, .. } => center.clone(),
            Shape::Intersection { balls } => {
                let mut m = vec![0.0; self.dim];
                for (c, _) in balls {
                    for i in 0..self.dim {
                        m[i] += c[i] / balls.len() as f64;
                    }
                }
                // push the projection inward by subgradient ascent on the
                // smallest slack r_i - |x - c_i|
                let slack = |x: &[f64]| balls.iter().map(|(c, r)| r - dist2(x, c).sqrt()).fold(f64::INFINITY, f64::min);
                let rmin = balls.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
                let mut x = self.project(&m);
                let mut best = (slack(&x), x.clone());
                for k in 0..2000 {
                    let (c, _) = balls
                        .iter()
                        .min_by(|a, b| (a.1 - dist2(&x, &a.0).sqrt()).total_cmp(&(b.1 - dist2(&x, &b.0).sqrt())))
                        .expect("nonempty");
                    let d = dist2(&x, c).sqrt();
                    if d == 0.0 {
                        break;
                    }
                    let step = (0.5 * rmin / (k as f64 + 1.0).sqrt()).min(d);
                    for i in 0..self.dim {
                        x[i] += step * (c[i] - x[i]) / d;
                    }
                    let s = slack(&x);
                    if s > best.0 {
                        best = (s, x.clone());
                    }
                }
                best.1
            }
        }
    }

    /// Euclidean projection onto the closed domain.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Ball { center, radius } => project_ball(x, center, *radius),
            Shape::Ellipsoid { center, semi_axes } => project_ellipsoid(x, center, semi_axes),
            Shape::Intersection { balls } => {
                // Dykstra's alternating projections.
                let m = balls.len();
                let mut y = x.to_vec();
                let mut incr = vec![vec![0.0; self.dim]; m];
                for _ in 0..10_000 {
                    let prev = y.clone();
                    for (k, (c, r)) in balls.iter().enumerate() {
                        let z: Vec<f64> = y.iter().zip(&incr[k]).map(|(a, b)| a + b).collect();
                        let p = project_ball(&z, c, *r);
                        for i in 0..self.dim {
                            incr[k][i] = z[i] - p[i];
                        }
                        y = p;
                    }
                    if dist2(&y, &prev) < 1e-30 {
                        break;
                    }
                }
                y
            }
        }
    }

    /// Distance from `x` to the closed domain (zero inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            return 0.0;
        }
        match &self.shape {
            Shape::Ball { center, radius } => (dist2(x, center).sqrt() - radius).max(0.0),
            _ => dist2(x, &self.project(x)).sqrt(),
        }
    }
}

fn project_ball(x: &[f64], c: &[f64], r: f64) -> Vec<f64> {
    let d = dist2(x, c).sqrt();
    if d <= r {
        return x.to_vec();
    }
    x.iter().zip(c).map(|(xi, ci)| ci + (xi - ci) * r / d).collect()
}

fn project_ellipsoid(x: &[f64], c: &[f64], a: &[f64]) -> Vec<f64> {
    let y: Vec<f64> = x.iter().zip(c).map(|(xi, ci)| xi - ci).collect();
    let inside: f64 = y.iter().zip(a).map(|(yi, ai)| (yi / ai).powi(2)).sum();
    if inside <= 1.0 {
        return x.to_vec();
    }
    // Lagrange multiplier t >= 0 solves sum (a_i y_i / (a_i^2 + t))^2 = 1.
    let f = |t: f64| -> f64 {
        y.iter().zip(a).map(|(yi, ai)| (ai * yi / (ai * ai + t)).powi(2)).sum::<f64>() - 1.0
    };
    let amax = a.iter().cloned().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, amax * norm2(&y).sqrt() + amax * amax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    y.iter()
        .zip(a)
        .zip(c)
        .map(|((yi, ai), ci)| ci + ai * ai * yi / (ai * ai + t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Strip,
    Exterior,
}

/// Uniform lattice with analytic node classification.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    h: f64,
    epsilon: f64,
    strip_width: f64,
    origin: Vec<i64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
    strip: Vec<usize>,
}

/// Builds the lattice covering `domain` with spacing `h` and a strip of
/// width `epsilon + h*sqrt(N)` outside the domain.
pub fn build_grid(domain: &Domain, h: f64, epsilon: f64) -> Result<Grid> {
    let n = domain.dim();
    check_dim(n)?;
    if !(h > 0.0 && h.is_finite() && epsilon.is_finite() && h <= epsilon) {
        return Err(Error::Spacing { h, epsilon });
    }
    let strip_width = epsilon + h * (n as f64).sqrt();
    let inflate = strip_width + h;
    let (lo, hi) = domain.bounding_box();
    let origin: Vec<i64> = lo.iter().map(|l| ((l - inflate) / h).floor() as i64).collect();
    let top: Vec<i64> = hi.iter().map(|u| ((u + inflate) / h).ceil() as i64).collect();
    let shape: Vec<usize> = origin.iter().zip(&top).map(|(o, t)| (t - o + 1) as usize).collect();
    let mut strides = vec![1usize; n];
    for i in 1..n {
        strides[i] = strides[i - 1] * shape[i - 1];
    }
    let total: usize = shape.iter().product();
    let mut grid = Grid {
        domain: domain.clone(),
        h,
        epsilon,
        strip_width,
        origin,
        shape,
        strides,
        kinds: Vec::with_capacity(total),
        interior: Vec::new(),
        strip: Vec::new(),
    };
    let mut x = vec![0.0; n];
    for idx in 0..total {
        grid.write_point(idx, &mut x);
        let kind = if domain.contains(&x) {
            NodeKind::Interior
        } else if domain.distance(&x) <= strip_width {
            NodeKind::Strip
        } else {
            NodeKind::Exterior
        };
        match kind {
            NodeKind::Interior => grid.interior.push(idx),
            NodeKind::Strip => grid.strip.push(idx),
            NodeKind::Exterior => {}
        }
        grid.kinds.push(kind);
    }
    Ok(grid)
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn strip_width(&self) -> f64 {
        self.strip_width
    }
    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn len(&self) -> usize {
        self.kinds.len()
    }
    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }
    pub fn strip_nodes(&self) -> &[usize] {
        &self.strip
    }

    /// Lattice multi-index (relative to the grid corner) of node `idx`.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for i in 0..self.dim() {
            m[i] = idx % self.shape[i];
            idx /= self.shape[i];
        }
        m
    }

    pub fn write_point(&self, mut idx: usize, out: &mut [f64]) {
        for i in 0..self.dim() {
            let k = idx % self.shape[i];
            idx /= self.shape[i];
            out[i] = (self.origin[i] + k as i64) as f64 * self.h;
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.write_point(idx, &mut x);
        x
    }

    /// Node reached from `idx` by moving `offset` lattice steps along `axis`.
    pub fn neighbor(&self, idx: usize, axis: usize, offset: i64) -> Option<usize> {
        let k = (idx / self.strides[axis]) % self.shape[axis];
        let nk = k as i64 + offset;
        if nk < 0 || nk >= self.shape[axis] as i64 {
            return None;
        }
        Some((idx as i64 + offset * self.strides[axis] as i64) as usize)
    }

    /// Node whose coordinates are exactly `x` (up to rounding), if any.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for i in 0..self.dim() {
            let s = (x[i] / self.h).round() as i64 - self.origin[i];
            if s < 0 || s >= self.shape[i] as i64 {
                return None;
            }
            idx += s as usize * self.strides[i];
        }
        Some(idx)
    }

    /// Calls `f(node, weight)` for every lattice corner with nonzero
    /// multilinear weight around `x`. Returns false (after possibly some
    /// calls) if the stencil leaves the lattice or `f` returns false.
    #[inline]
    pub(crate) fn visit_corners(&self, x: &[f64], mut f: impl FnMut(usize, f64) -> bool) -> bool {
        let n = self.dim();
        let mut base = 0usize;
        let mut frac = [0.0f64; MAX_DIM];
        for i in 0..n {
            let s = x[i] / self.h - self.origin[i] as f64;
            let k = s.floor();
            if !(k >= 0.0 && (k as usize) + 1 < self.shape[i]) {
                // a point sitting exactly on the last lattice plane
                if k as usize + 1 == self.shape[i] && s == k {
                    base += k as usize * self.strides[i];
                    frac[i] = 0.0;
                    continue;
                }
                return false;
            }
            base += k as usize * self.strides[i];
            frac[i] = s - k;
        }
        'corner: for mask in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    if frac[i] == 0.0 {
                        continue 'corner;
                    }
                    w *= frac[i];
                    idx += self.strides[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w == 0.0 {
                continue;
            }
            if !f(idx, w) {
                return false;
            }
        }
        true
    }

    /// Multilinear interpolation of node values; `None` when the stencil
    /// leaves the lattice or touches an exterior node with nonzero weight.
    pub(crate) fn interpolate_values(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        let mut acc = 0.0;
        let ok = self.visit_corners(x, |idx, w| {
            let v = values[idx];
            acc += w * v;
            !v.is_nan()
        });
        ok.then_some(acc)
    }
}

/// Scalar field on the lattice at one time level. Exterior nodes hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSlice {
    pub t: f64,
    pub epsilon: f64,
    pub values: Vec<f64>,
}

impl ValueSlice {
    /// Samples `f` at interior and strip nodes.
    pub fn from_fn(grid: &Grid, t: f64, epsilon: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = vec![f64::NAN; grid.len()];
        let mut x = vec![0.0; grid.dim()];
        for &idx in grid.interior_nodes().iter().chain(grid.strip_nodes()) {
            grid.write_point(idx, &mut x);
            values[idx] = f(&x);
        }
        Self { t, epsilon, values }
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Largest |a - b| over the given nodes.
    pub fn sup_distance(&self, other: &ValueSlice, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| (self.values[i] - other.values[i]).abs()).fold(0.0, f64::max)
    }

    /// Largest |a - b| over the interior nodes of `grid`, where `other`
    /// lives on `other_grid` (same spacing, possibly different extent).
    /// Nodes missing from `other_grid` are skipped.
    pub fn sup_distance_across(&self, grid: &Grid, other: &ValueSlice, other_grid: &Grid) -> f64 {
        let mut x = vec![0.0; grid.dim()];
        let mut worst = 0.0f64;
        for &i in grid.interior_nodes() {
            grid.write_point(i, &mut x);
            if let Some(k) = other_grid.node_at(&x) {
                worst = worst.max((self.values[i] - other.values[k]).abs());
            }
        }
        worst
    }

    pub fn negated(&self) -> Self {
        Self { t: self.t, epsilon: self.epsilon, values: self.values.iter().map(|v| -v).collect() }
    }
}

/// Multilinear interpolation of `slice` at an arbitrary point.
pub fn interpolate(slice: &ValueSlice, grid: &Grid, x: &[f64]) -> Result<f64> {
    if x.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: x.len() });
    }
    if slice.values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: slice.values.len() });
    }
    grid.interpolate_values(&slice.values, x).ok_or_else(|| Error::OutsideCoverage(x.to_vec()))
}

pub type BoundaryFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type InitialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Boundary datum g(x, t) outside the domain and initial datum u0 inside.
///
/// The payoff h(x, t) read when a game stops is g(x, t) for x outside the
/// domain and t > 0, and u0(x) for t <= 0. For points outside the domain at
/// t <= 0 it is g(x, 0), which equals u0 on the boundary by compatibility.
#[derive(Clone)]
pub struct PayoffData {
    domain: Domain,
    boundary: BoundaryFn,
    initial: InitialFn,
    time_dependent: bool,
    interior_queries: Arc<AtomicUsize>,
}

impl std::fmt::Debug for PayoffData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PayoffData")
            .field("domain", &self.domain)
            .field("time_dependent", &self.time_dependent)
            .finish_non_exhaustive()
    }
}

impl PayoffData {
    pub fn new(
        domain: Domain,
        boundary: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        initial: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        time_dependent: bool,
    ) -> Self {
        Self {
            domain,
            boundary: Arc::new(boundary),
            initial: Arc::new(initial),
            time_dependent,
            interior_queries: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Time-independent boundary datum.
    pub fn stationary(
        domain: Domain,
        boundary: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        initial: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(domain, move |x, _t| boundary(x), initial, false)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    /// Raw boundary datum, no membership check.
    pub fn g(&self, x: &[f64], t: f64) -> f64 {
        (self.boundary)(x, t)
    }

    /// Raw initial datum, no membership check.
    pub fn u0(&self, x: &[f64]) -> f64 {
        (self.initial)(x)
    }

    /// The payoff h(x, t). Fails for interior points at positive time.
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        let inside = self.domain.contains(x);
        if t <= 0.0 {
            Ok(if inside { self.u0(x) } else { self.g(x, 0.0) })
        } else if !inside {
            Ok(self.g(x, t))
        } else {
            self.interior_queries.fetch_add(1, Ordering::Relaxed);
            Err(Error::InteriorPayoffQuery { x: x.to_vec(), t })
        }
    }

    /// Number of rejected interior queries at positive time so far.
    pub fn interior_queries(&self) -> usize {
        self.interior_queries.load(Ordering::Relaxed)
    }

    /// Data (-g, -u0), with a fresh query counter.
    pub fn negated(&self) -> Self {
        let g = self.boundary.clone();
        let u0 = self.initial.clone();
        Self::new(self.domain.clone(), move |x, t| -g(x, t), move |x| -u0(x), self.time_dependent)
    }

    /// Same data on another domain.
    pub fn with_domain(&self, domain: Domain) -> Self {
        Self {
            domain,
            boundary: self.boundary.clone(),
            initial: self.initial.clone(),
            time_dependent: self.time_dependent,
            interior_queries: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Slice at t = 0: u0 at interior nodes, g(., 0) on the strip.
    pub fn initial_slice(&self, grid: &Grid, epsilon: f64) -> ValueSlice {
        ValueSlice::from_fn(grid, 0.0, epsilon, |x| {
            if self.domain.contains(x) {
                self.u0(x)
            } else {
                self.g(x, 0.0)
            }
        })
    }
}

pub fn eval_payoff(data: &PayoffData, x: &[f64], t: f64) -> Result<f64> {
    data.eval(x, t)
}

pub(crate) fn check_same_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn require_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}
