//! Symmetric eigenvalues, sampled Grassmannians and the min-max value
//! `inf_{dim S = j} sup_{v in S, |v| = 1} <Av, v>` over a finite frame set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::MAX_DIM;
use crate::error::{invalid, Error, Result};
use crate::vecops::{dot, gram_schmidt, normalize};

/// Small dense symmetric matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major entries, replacing them by (A + A^T)/2.
    pub fn new(n: usize, entries: &[f64]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::Dimension(n));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                a[i * n + k] = 0.5 * (entries[i * n + k] + entries[k * n + i]);
            }
        }
        Ok(Self { n, a })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let e: Vec<f64> = (0..n * n).map(|i| f(i / n, i % n)).collect();
        Self::new(n, &e)
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        Self::from_fn(d.len(), |i, k| if i == k { d[i] } else { 0.0 })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, |i, k| if i == k { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.a[i * self.n + k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.a
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            s += v[i] * dot(row, v);
        }
        s
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(&self.a[i * self.n..(i + 1) * self.n], v)).collect()
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(Self { n: self.n, a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect() })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, a: self.a.iter().map(|x| c * x).collect() }
    }

    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.a[i * self.n + i] += c;
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Spectral norm max |lambda_i|.
    pub fn norm(&self) -> f64 {
        eigenvalues_sym(self).iter().fold(0.0, |m, l| m.max(l.abs()))
    }
}

/// Eigen decomposition by cyclic Jacobi rotations. Eigenvalues ascend;
/// `vectors[k]` is the unit eigenvector of `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn eigen_sym(m: &SymMatrix) -> SymEigen {
    const MAX_SWEEPS: usize = 64;
    let n = m.n;
    let mut a = m.a.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = m.frobenius();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &k| a[i * n + i].total_cmp(&a[k * n + k]));
    SymEigen {
        values: order.iter().map(|&i| a[i * n + i]).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect(),
    }
}

pub fn eigenvalues_sym(m: &SymMatrix) -> Vec<f64> {
    eigen_sym(m).values
}

/// The j-th smallest eigenvalue, 1-based.
pub fn lambda_j(m: &SymMatrix, j: usize) -> Result<f64> {
    if j == 0 || j > m.n {
        return Err(Error::IndexOutOfRange { j, n: m.n });
    }
    Ok(eigenvalues_sym(m)[j - 1])
}

/// Finite sample of the Grassmannian Gr(j, R^N).
///
/// Each frame is an orthonormal j-tuple in R^N. Sphere samples are unit
/// vectors of R^j, stored as a half set followed by its negation, so the
/// whole list is closed under v -> -v. The symmetric two-point average only
/// needs the half set.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    n: usize,
    j: usize,
    frames: Vec<Vec<Vec<f64>>>,
    sphere_samples: Vec<Vec<f64>>,
    half: usize,
    directions: Vec<f64>,
}

/// Outcome of an inf-sup scan: value, first minimizing frame and the first
/// maximizing half-sample inside that frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSup {
    pub value: f64,
    pub frame: usize,
    pub sample: usize,
}

impl FrameSet {
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn j(&self) -> usize {
        self.j
    }
    pub fn frames(&self) -> &[Vec<Vec<f64>>] {
        &self.frames
    }
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
    pub fn sphere_samples(&self) -> &[Vec<f64>] {
        &self.sphere_samples
    }
    pub fn half_samples(&self) -> &[Vec<f64>] {
        &self.sphere_samples[..self.half]
    }

    /// Unit vector in R^N: half-sample `s` expressed in frame `f`.
    pub fn direction(&self, f: usize, s: usize) -> &[f64] {
        let off = (f * self.half + s) * self.n;
        &self.directions[off..off + self.n]
    }

    /// `inf_frames sup_samples value(d)` with the first minimizer in frame
    /// order. Frames are abandoned as soon as their running sup reaches the
    /// current best, which never changes the result.
    pub fn inf_sup(&self, mut value: impl FnMut(&[f64]) -> f64) -> InfSup {
        self.inf_sup_indexed(|f, s| value(self.direction(f, s)))
    }

    /// As [`FrameSet::inf_sup`], with the objective addressed by
    /// (frame, half-sample) index.
    pub fn inf_sup_indexed(&self, mut value: impl FnMut(usize, usize) -> f64) -> InfSup {
        let mut best = InfSup { value: f64::INFINITY, frame: 0, sample: 0 };
        for f in 0..self.frames.len() {
            let mut sup = f64::NEG_INFINITY;
            let mut arg = 0;
            let mut pruned = false;
            for s in 0..self.half {
                let v = value(f, s);
                if v > sup {
                    sup = v;
                    arg = s;
                    if sup >= best.value {
                        pruned = true;
                        break;
                    }
                }
            }
            if !pruned && sup < best.value {
                best = InfSup { value: sup, frame: f, sample: arg };
            }
        }
        best
    }
}

fn axis(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const PRIMES: [u64; 36] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
];

/// Shifted Halton points mapped to standard Gaussians (Box-Muller).
fn gaussian_qmc(dim: usize, count: usize, seed: u64) -> impl Iterator<Item = Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = dim.div_ceil(2);
    let shift: Vec<f64> = (0..2 * pairs).map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64).map(move |i| {
        let mut g = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let u1 = (halton(i, PRIMES[2 * p]) + shift[2 * p]).fract().max(1e-12);
            let u2 = (halton(i, PRIMES[2 * p + 1]) + shift[2 * p + 1]).fract();
            let r = (-2.0 * u1.ln()).sqrt();
            let th = 2.0 * std::f64::consts::PI * u2;
            g.push(r * th.cos());
            g.push(r * th.sin());
        }
        g.truncate(dim);
        g
    })
}

/// Representatives of `count` lines through the origin of R^n: the n axes
/// first, then a low-discrepancy set. For n = 2 the lines are equally spaced.
fn line_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0]],
        2 => {
            let m = count.max(1);
            let mut out: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    if 2 * i == m {
                        return vec![0.0, 1.0];
                    }
                    let th = i as f64 * std::f64::consts::PI / m as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect();
            if m % 2 == 1 {
                out.push(vec![0.0, 1.0]);
            }
            out
        }
        _ => {
            let mut out: Vec<Vec<f64>> = (0..n).map(|i| axis(n, i)).collect();
            let extra = count.saturating_sub(n);
            if n == 3 {
                // hemisphere Fibonacci spiral
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                let phase = (seed as f64 * 0.618_033_988_749_894_9).fract() * 2.0 * std::f64::consts::PI;
                for i in 0..extra {
                    let z = (i as f64 + 0.5) / extra as f64;
                    let r = (1.0 - z * z).sqrt();
                    let ph = phase + golden * i as f64;
                    out.push(vec![r * ph.cos(), r * ph.sin(), z]);
                }
            } else {
                for mut g in gaussian_qmc(n, 4 * extra + 8, seed) {
                    if out.len() == n + extra {
                        break;
                    }
                    if normalize(&mut g) < 1e-6 {
                        continue;
                    }
                    let lead = g.iter().find(|x| x.abs() > 1e-12).copied().unwrap_or(1.0);
                    if lead < 0.0 {
                        g.iter_mut().for_each(|x| *x = -*x);
                    }
                    out.push(g);
                }
            }
            out
        }
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Deterministic sample of Gr(j, R^N).
///
/// * j = N: one frame (the identity); sphere samples are line directions of R^N.
/// * j = 1: one frame per line direction of R^N, sphere samples {+1, -1}.
/// * 1 < j < N: every coordinate j-frame plus `resolution` generated frames
///   (orthogonal complements of line directions when j = N-1, Gram-Schmidt
///   of Gaussian quasi-random tuples otherwise).
///
/// For N = 2 the lines are at angles i*pi/resolution.
pub fn generate_frames(n: usize, j: usize, resolution: usize, seed: u64) -> Result<FrameSet> {
    if !(1..=MAX_DIM).contains(&n) {
        return Err(Error::Dimension(n));
    }
    if j == 0 || j > n {
        return Err(Error::IndexOutOfRange { j, n });
    }
    if resolution == 0 {
        return Err(invalid("resolution", "must be at least 1"));
    }
    let half_samples: Vec<Vec<f64>> = match j {
        1 => vec![vec![1.0]],
        _ => line_directions(j, resolution, seed),
    };
    let frames: Vec<Vec<Vec<f64>>> = if j == n {
        vec![(0..n).map(|i| axis(n, i)).collect()]
    } else if j == 1 {
        line_directions(n, resolution, seed).into_iter().map(|d| vec![d]).collect()
    } else {
        let mut frames: Vec<Vec<Vec<f64>>> =
            subsets(n, j).into_iter().map(|s| s.into_iter().map(|i| axis(n, i)).collect()).collect();
        let target = frames.len() + resolution;
        if j == n - 1 {
            for normal in line_directions(n, resolution + n, seed).into_iter().skip(n) {
                let mut vs = vec![normal];
                vs.extend((0..n).map(|i| axis(n, i)));
                // keep the first j vectors that survive orthogonalization
                let mut basis: Vec<Vec<f64>> = vec![vs[0].clone()];
                for cand in vs.into_iter().skip(1) {
                    let mut trial = basis.clone();
                    trial.push(cand);
                    if gram_schmidt(&mut trial) {
                        basis = trial;
                    }
                    if basis.len() == n {
                        break;
                    }
                }
                frames.push(basis.split_off(1));
            }
        } else {
            let mut draws = gaussian_qmc(n * j, 16 * resolution + 16, seed);
            while frames.len() < target {
                let Some(g) = draws.next() else { break };
                let mut vs: Vec<Vec<f64>> = g.chunks(n).map(|c| c.to_vec()).collect();
                if gram_schmidt(&mut vs) {
                    frames.push(vs);
                }
            }
        }
        frames
    };
    let mut sphere_samples = half_samples.clone();
    sphere_samples.extend(half_samples.iter().map(|v| v.iter().map(|x| -x).collect::<Vec<f64>>()));
    let half = half_samples.len();
    let mut directions = Vec::with_capacity(frames.len() * half * n);
    for frame in &frames {
        for s in &half_samples {
            let mut d = vec![0.0; n];
            for (coef, b) in s.iter().zip(frame) {
                for i in 0..n {
                    d[i] += coef * b[i];
                }
            }
            normalize(&mut d);
            directions.extend(d);
        }
    }
    Ok(FrameSet { n, j, frames, sphere_samples, half, directions })
}

/// Sampled min-max of the Rayleigh quotient over the frame set.
pub fn courant_fischer(m: &SymMatrix, j: usize, frames: &FrameSet) -> Result<f64> {
    if frames.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: frames.dim() });
    }
    if frames.j() != j {
        return Err(Error::DimensionMismatch { expected: j, got: frames.j() });
    }
    Ok(frames.inf_sup(|d| m.quad_form(d)).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let e: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SymMatrix::new(n, &e).unwrap()
    }

    /// Characteristic polynomial by Faddeev-LeVerrier: coefficients c[0..=n]
    /// of det(xI - A) = sum c[k] x^(n-k).
    fn char_poly(m: &SymMatrix) -> Vec<f64> {
        let n = m.dim();
        let a = |i: usize, k: usize| m.get(i, k);
        let mut c = vec![1.0];
        let mut mk = vec![0.0; n * n];
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{k-1} I
            let mut next = vec![0.0; n * n];
            for i in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for p in 0..n {
                        s += a(i, p) * mk[p * n + l];
                    }
                    next[i * n + l] = s + if i == l { c[k - 1] } else { 0.0 };
                }
            }
            mk = next;
            let mut tr = 0.0;
            for i in 0..n {
                for p in 0..n {
                    tr += a(i, p) * mk[p * n + i];
                }
            }
            c.push(-tr / k as f64);
        }
        c
    }

    fn poly_roots_by_bisection(c: &[f64], bound: f64) -> Vec<f64> {
        let p = |x: f64| c.iter().fold(0.0, |acc, ci| acc * x + ci);
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut x0 = -bound;
        let mut p0 = p(x0);
        for s in 1..=steps {
            let x1 = -bound + 2.0 * bound * s as f64 / steps as f64;
            let p1 = p(x1);
            if p0 == 0.0 {
                roots.push(x0);
            } else if p0 * p1 < 0.0 {
                let (mut lo, mut hi) = (x0, x1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if p(lo) * p(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            p0 = p1;
        }
        roots
    }

    #[test]
    fn trivial_spectra() {
        assert_eq!(eigenvalues_sym(&SymMatrix::diag(&[3.0, 1.0, 2.0]).unwrap()), vec![1.0, 2.0, 3.0]);
        let s = eigenvalues_sym(&SymMatrix::new(2, &[0.0, 1.0, 1.0, 0.0]).unwrap());
        assert!((s[0] + 1.0).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);
        assert_eq!(lambda_j(&SymMatrix::identity(4).unwrap(), 3).unwrap(), 1.0);
        assert_eq!(lambda_j(&SymMatrix::diag(&[-5.0, 0.0, 7.0]).unwrap(), 2).unwrap(), 0.0);
        assert!(lambda_j(&SymMatrix::identity(2).unwrap(), 3).is_err());
        assert!(lambda_j(&SymMatrix::identity(2).unwrap(), 0).is_err());
    }

    #[test]
    fn matches_characteristic_polynomial_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_sym(&mut rng, 4);
            let bound = (0..4).map(|i| (0..4).map(|k| m.get(i, k).abs()).sum::<f64>()).fold(0.0, f64::max) + 1e-3;
            let roots = poly_roots_by_bisection(&char_poly(&m), bound);
            assert_eq!(roots.len(), 4);
            for (r, l) in roots.iter().zip(eigenvalues_sym(&m)) {
                assert!((r - l).abs() < 1e-8, "{r} vs {l}");
            }
        }
    }

    #[test]
    fn residuals_are_tiny() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=6 {
            for _ in 0..50 {
                let m = random_sym(&mut rng, n).scaled(rng.gen_range(0.01..100.0));
                let e = eigen_sym(&m);
                let norm = m.norm();
                for (l, v) in e.values.iter().zip(&e.vectors) {
                    let av = m.apply(v);
                    let r: f64 = av.iter().zip(v).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>().sqrt();
                    assert!(r <= 1e-10 * norm.max(1e-300), "n={n} r={r}");
                }
            }
        }
    }

    #[test]
    fn frame_examples() {
        let f = generate_frames(1, 1, 7, 0).unwrap();
        assert_eq!(f.frames(), &[vec![vec![1.0]]]);
        assert_eq!(f.sphere_samples(), &[vec![1.0], vec![-1.0]]);

        let f = generate_frames(2, 2, 12, 0).unwrap();
        assert_eq!(f.num_frames(), 1);
        assert_eq!(f.half_samples().len(), 12);

        let f = generate_frames(2, 1, 90, 0).unwrap();
        assert_eq!(f.num_frames(), 90);
        let a = SymMatrix::diag(&[-1.0, 3.0]).unwrap();
        assert!((courant_fischer(&a, 1, &f).unwrap() + 1.0).abs() < 0.01);
    }

    #[test]
    fn frames_are_orthonormal_and_antipodal() {
        for n in 1..=6 {
            for j in 1..=n {
                let f = generate_frames(n, j, 9, 3).unwrap();
                assert!(f.num_frames() >= 1);
                for frame in f.frames() {
                    assert_eq!(frame.len(), j);
                    for a in 0..j {
                        for b in 0..j {
                            let expect = if a == b { 1.0 } else { 0.0 };
                            assert!((dot(&frame[a], &frame[b]) - expect).abs() < 1e-12);
                        }
                    }
                }
                let s = f.sphere_samples();
                let h = f.half_samples().len();
                for k in 0..h {
                    for (x, y) in s[k].iter().zip(&s[k + h]) {
                        assert_eq!(*x, -*y);
                    }
                }
                // coordinate frames always present
                let has_axes = subsets(n, j).iter().all(|sub| {
                    f.frames().iter().any(|fr| {
                        sub.iter().zip(fr).all(|(&i, v)| v.iter().enumerate().all(|(k, x)| *x == if k == i { 1.0 } else { 0.0 }))
                    })
                });
                assert!(has_axes, "n={n} j={j}");
                assert_eq!(f, generate_frames(n, j, 9, 3).unwrap());
            }
        }
    }

    #[test]
    fn diagonal_matrices_resolved_exactly_for_extreme_indices() {
        let a = SymMatrix::diag(&[2.0, -1.5, 0.5]).unwrap();
        for res in [1, 5, 40] {
            let f1 = generate_frames(3, 1, res, 0).unwrap();
            assert_eq!(courant_fischer(&a, 1, &f1).unwrap(), -1.5);
            let f3 = generate_frames(3, 3, res, 0).unwrap();
            assert_eq!(courant_fischer(&a, 3, &f3).unwrap(), 2.0);
        }
        let id = SymMatrix::identity(3).unwrap();
        for j in 1..=3 {
            for res in [1, 8, 30] {
                let f = generate_frames(3, j, res, 1).unwrap();
                assert!((courant_fischer(&id, j, &f).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_min_max_close_to_lambda_j() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let frames = generate_frames(3, 2, 200, 0).unwrap();
        for _ in 0..1000 {
            let a = random_sym(&mut rng, 3);
            let cf = courant_fischer(&a, 2, &frames).unwrap();
            let l = lambda_j(&a, 2).unwrap();
            assert!((cf - l).abs() <= 0.05 * a.norm(), "{cf} vs {l}");
        }
    }

    #[test]
    fn min_max_error_shrinks_with_resolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let battery: Vec<SymMatrix> = (0..200).map(|_| random_sym(&mut rng, 3)).collect();
        for j in 1..=3 {
            let mut prev = f64::INFINITY;
            for res in [6, 24, 96] {
                let frames = generate_frames(3, j, res, 0).unwrap();
                let err = battery
                    .iter()
                    .map(|a| (lambda_j(a, j).unwrap() - courant_fischer(a, j, &frames).unwrap()).abs() / a.norm())
                    .fold(0.0, f64::max);
                assert!(err <= prev + 1e-12, "j={j} res={res} err={err} prev={prev}");
                prev = err;
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let f = generate_frames(2, 1, 4, 0).unwrap();
        let a = SymMatrix::identity(3).unwrap();
        assert!(courant_fischer(&a, 1, &f).is_err());
    }

    proptest! {
        #[test]
        fn weyl_type_bounds(seed in any::<u64>(), n in 1usize..=6, jj in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = jj % n + 1;
            let a = random_sym(&mut rng, n);
            let b = random_sym(&mut rng, n);
            let ea = eigenvalues_sym(&a);
            let lab = lambda_j(&a.add(&b).unwrap(), j).unwrap();
            let lb = lambda_j(&b, j).unwrap();
            prop_assert!(ea[0] + lb <= lab + 1e-9);
            prop_assert!(lab <= ea[n - 1] + lb + 1e-9);
        }

        #[test]
        fn negation_and_shift(seed in any::<u64>(), n in 1usize..=6, c in -10.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sym(&mut rng, n);
            let e = eigenvalues_sym(&a);
            let en = eigenvalues_sym(&a.scaled(-1.0));
            let es = eigenvalues_sym(&a.shifted(c));
            for j in 0..n {
                prop_assert!((en[j] + e[n - 1 - j]).abs() < 1e-12);
                prop_assert!((es[j] - e[j] - c).abs() < 1e-12);
            }
        }
    }
}
