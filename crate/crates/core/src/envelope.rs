//! Convex and concave envelopes of boundary data by brute-force
//! Carathéodory enumeration: at a point x, the smallest value of
//! `sum w_i g(p_i)` over simplices of boundary samples p_i containing x.
//! Meant as a slow but transparent oracle for N <= 3.

use rayon::prelude::*;

use crate::domain::{check_same_dim, Domain, Grid, ValueSlice};
use crate::error::{invalid, Error, Result};
use crate::vecops::normalize;

/// Barycentric feasibility slack.
const FEAS_TOL: f64 = 1e-9;

/// A boundary sample (point on the boundary, datum value).
pub type Sample = (Vec<f64>, f64);

/// Boundary point hit by the ray from `from` (inside) along unit `dir`.
fn ray_exit(domain: &Domain, from: &[f64], dir: &[f64], reach: f64) -> Vec<f64> {
    let at = |s: f64| from.iter().zip(dir).map(|(a, d)| a + s * d).collect::<Vec<f64>>();
    let (mut lo, mut hi) = (0.0, reach);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if domain.contains(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    domain.project(&at(0.5 * (lo + hi)))
}

/// Unit directions of R^n, roughly `count` of them, covering the sphere.
fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(4))
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / count.max(4) as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci points on S^2
            let m = count.max(8);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let ph = golden * i as f64;
                    let mut v = vec![r * ph.cos(), r * ph.sin(), z];
                    v.resize(n, 0.0);
                    v
                })
                .collect()
        }
    }
}

/// Samples of `g` on the boundary with spacing at most about `spacing`,
/// obtained by shooting rays from an interior point. Supports N <= 3.
pub fn boundary_samples(domain: &Domain, g: impl Fn(&[f64]) -> f64, spacing: f64) -> Result<Vec<Sample>> {
    let n = domain.dim();
    if n > 3 {
        return Err(invalid("domain", "envelope oracles support N <= 3"));
    }
    if !(spacing > 0.0) {
        return Err(invalid("spacing", "must be positive"));
    }
    let (_, r) = domain.enclosing_ball();
    let count = match n {
        1 => 2,
        // factor 2: rays bunch up on elongated domains; a multiple of 4
        // keeps the axis directions
        2 => (2.0 * 2.0 * std::f64::consts::PI * r / spacing / 4.0).ceil() as usize * 4,
        _ => (2.0 * 4.0 * std::f64::consts::PI * r * r / (spacing * spacing)).ceil() as usize,
    };
    let c = domain.interior_point();
    Ok(sphere_directions(n, count)
        .into_iter()
        .map(|d| {
            let p = ray_exit(domain, &c, &d, 2.0 * r + 1.0);
            let v = g(&p);
            (p, v)
        })
        .collect())
}

/// Affine map from x to barycentric coordinates over one simplex, plus the
/// datum, so that evaluation per point is a small mat-vec.
struct Simplex {
    p0: Vec<f64>,
    inv: Vec<f64>,
    v0: f64,
    dv: Vec<f64>,
}

impl Simplex {
    fn new(points: &[&Sample]) -> Option<Self> {
        let n = points.len() - 1;
        let p0 = &points[0].0;
        // columns p_i - p_0
        let mut m = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                m[i * n + k] = points[k + 1].0[i] - p0[i];
            }
        }
        let scale = m.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let inv = invert(&m, n, 1e-10 * scale.max(1e-300))?;
        Some(Self {
            p0: p0.clone(),
            inv,
            v0: points[0].1,
            dv: points[1..].iter().map(|p| p.1 - points[0].1).collect(),
        })
    }

    #[inline]
    fn value_at(&self, x: &[f64]) -> Option<f64> {
        let n = self.p0.len();
        let mut rest = 1.0;
        let mut v = self.v0;
        for i in 0..n {
            let mut mu = 0.0;
            for k in 0..n {
                mu += self.inv[i * n + k] * (x[k] - self.p0[k]);
            }
            if mu < -FEAS_TOL {
                return None;
            }
            rest -= mu;
            v += mu * self.dv[i];
        }
        (rest >= -FEAS_TOL).then_some(v)
    }
}

/// Gauss-Jordan inverse with partial pivoting; `None` if a pivot is tiny.
fn invert(m: &[f64], n: usize, tiny: f64) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[piv * n + col].abs() <= tiny {
            return None;
        }
        for k in 0..n {
            a.swap(col * n + k, piv * n + k);
            inv.swap(col * n + k, piv * n + k);
        }
        let d = a[col * n + col];
        for k in 0..n {
            a[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        a[r * n + k] -= f * a[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn combinations(len: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > len {
        return;
    }
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + len - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for l in i + 1..k {
            idx[l] = idx[l - 1] + 1;
        }
    }
}

fn simplices(samples: &[Sample], n: usize) -> Vec<Simplex> {
    let mut out = Vec::new();
    combinations(samples.len(), n + 1, |c| {
        let pts: Vec<&Sample> = c.iter().map(|&i| &samples[i]).collect();
        if let Some(s) = Simplex::new(&pts) {
            out.push(s);
        }
    });
    out
}

fn lower_value(simplices: &[Simplex], x: &[f64]) -> Option<f64> {
    simplices.iter().filter_map(|s| s.value_at(x)).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
}

fn check_samples(samples: &[Sample], n: usize) -> Result<()> {
    if samples.len() < n + 1 {
        return Err(Error::InsufficientSample { needed: n + 1, got: samples.len() });
    }
    for (p, _) in samples {
        check_same_dim(n, p.len())?;
    }
    Ok(())
}

/// Convex envelope of the samples at `x`, if `x` lies in their hull.
pub fn convex_envelope_at(samples: &[Sample], x: &[f64]) -> Result<f64> {
    let n = x.len();
    check_samples(samples, n)?;
    lower_value(&simplices(samples, n), x).ok_or_else(|| Error::NotRepresentable(x.to_vec()))
}

/// Convex envelope at every interior node of `grid`; other nodes are NaN.
pub fn convex_envelope(domain: &Domain, samples: &[Sample], grid: &Grid) -> Result<ValueSlice> {
    let n = domain.dim();
    check_same_dim(n, grid.dim())?;
    check_samples(samples, n)?;
    let simp = simplices(samples, n);
    let vals: Vec<f64> = grid
        .interior_nodes()
        .par_iter()
        .map(|&idx| {
            let x = grid.point(idx);
            lower_value(&simp, &x).ok_or(Error::NotRepresentable(x))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![f64::NAN; grid.len()];
    for (&idx, v) in grid.interior_nodes().iter().zip(vals) {
        values[idx] = v;
    }
    Ok(ValueSlice { t: f64::INFINITY, epsilon: grid.epsilon(), values })
}

fn negate(samples: &[Sample]) -> Vec<Sample> {
    samples.iter().map(|(p, v)| (p.clone(), -v)).collect()
}

/// Concave envelope, computed as the negated convex envelope of the negated data.
pub fn concave_envelope(domain: &Domain, samples: &[Sample], grid: &Grid) -> Result<ValueSlice> {
    Ok(convex_envelope(domain, &negate(samples), grid)?.negated())
}

pub fn concave_envelope_at(samples: &[Sample], x: &[f64]) -> Result<f64> {
    Ok(-convex_envelope_at(&negate(samples), x)?)
}

/// Concave envelope at `p` of `g` restricted to the relative boundary of the
/// section of the domain by the affine plane through `p` spanned by the
/// coordinate axes `axes`. This bounds the stationary solution with index
/// `axes.len()` at `p` from above.
pub fn directional_envelope_bound(
    domain: &Domain,
    g: impl Fn(&[f64]) -> f64,
    axes: &[usize],
    p: &[f64],
    spacing: f64,
) -> Result<f64> {
    let n = domain.dim();
    check_same_dim(n, p.len())?;
    let j = axes.len();
    if j == 0 || j > 3 || axes.iter().any(|&a| a >= n) {
        return Err(invalid("axes", "need 1 to 3 distinct coordinate axes of the domain"));
    }
    for (k, a) in axes.iter().enumerate() {
        if axes[..k].contains(a) {
            return Err(invalid("axes", "axes must be distinct"));
        }
    }
    if !domain.contains(p) {
        return Err(Error::EmptySection);
    }
    let (_, r) = domain.enclosing_ball();
    let count = match j {
        1 => 2,
        2 => (4.0 * std::f64::consts::PI * r / spacing).ceil() as usize,
        _ => (8.0 * std::f64::consts::PI * r * r / (spacing * spacing)).ceil() as usize,
    };
    let mut local = Vec::new();
    for mut d in sphere_directions(j, count) {
        normalize(&mut d);
        let mut dir = vec![0.0; n];
        for (k, &a) in axes.iter().enumerate() {
            dir[a] = d[k];
        }
        let q = ray_exit(domain, p, &dir, 2.0 * r + 1.0);
        let coords: Vec<f64> = axes.iter().map(|&a| q[a] - p[a]).collect();
        local.push((coords, g(&q)));
    }
    concave_envelope_at(&local, &vec![0.0; j])
}
