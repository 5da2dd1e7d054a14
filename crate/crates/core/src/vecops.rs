//! Small dense vector helpers for points in R^N, N <= 6.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm2(a).sqrt();
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Modified Gram-Schmidt on `vectors` in place. Returns false when a
/// vector is (numerically) dependent on the previous ones.
pub fn gram_schmidt(vectors: &mut [Vec<f64>]) -> bool {
    for k in 0..vectors.len() {
        for _ in 0..2 {
            for i in 0..k {
                let (head, tail) = vectors.split_at_mut(k);
                let c = dot(&head[i], &tail[0]);
                for (t, h) in tail[0].iter_mut().zip(&head[i]) {
                    *t -= c * h;
                }
            }
        }
        if normalize(&mut vectors[k]) < 1e-8 {
            return false;
        }
    }
    true
}
