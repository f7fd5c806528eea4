//! Standalone numeric building blocks: losses, layer normalization and
//! spectral normalization by power iteration.

pub const PROB_CLAMP: f64 = 1e-7;
pub const LAYER_NORM_EPS: f64 = 1e-5;
/// Frobenius norm below which spectral normalization is skipped.
pub const SPECTRAL_MIN_NORM: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-[y ln p + (1-y) ln(1-p)]` with `p` clamped to `[1e-7, 1-1e-7]`.
pub fn binary_cross_entropy(p: f64, y: u8) -> f64 {
    let p = clamp_prob(p);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `-ln q[z]` with `q[z]` clamped like [`binary_cross_entropy`].
pub fn multiclass_cross_entropy(q: &[f64], z: usize) -> f64 {
    -clamp_prob(q[z]).ln()
}

/// Derivative of [`binary_cross_entropy`] of `sigmoid(logit)` w.r.t. the logit.
/// Zero inside the clamped region, where the loss is flat.
pub fn bce_logit_grad(p: f64, y: u8) -> f64 {
    if p < PROB_CLAMP || p > 1.0 - PROB_CLAMP {
        0.0
    } else {
        p - f64::from(y)
    }
}

/// Derivative of [`multiclass_cross_entropy`] of `softmax(logits)` w.r.t. the logits.
pub fn ce_logit_grad(q: &[f64], z: usize) -> Vec<f64> {
    if q[z] < PROB_CLAMP || q[z] > 1.0 - PROB_CLAMP {
        return vec![0.0; q.len()];
    }
    let mut g = q.to_vec();
    g[z] -= 1.0;
    g
}

/// `(x - mean) / sqrt(var + eps) * gamma + beta`, population variance.
pub fn layer_norm_apply(x: &[f64], gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    assert!(!x.is_empty(), "layer norm of an empty vector");
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    x.iter()
        .zip(gamma.iter().zip(beta))
        .map(|(v, (g, b))| (v - mean) * inv * g + b)
        .collect()
}

/// Result of one spectral-normalization round.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    /// `W / sigma`, same layout as the input.
    pub normalized: Vec<f64>,
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// One power-iteration round on a row-major `rows x cols` matrix.
///
/// `u` has length `rows`. Returns `(u', v', sigma)` with `v' = W^T u / |.|`,
/// `u' = W v' / |.|`, `sigma = u'^T W v'`.
pub fn power_iteration(w: &[f64], rows: usize, cols: usize, u: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let mut v = vec![0.0; cols];
    for i in 0..rows {
        let row = &w[i * cols..(i + 1) * cols];
        for (vj, wij) in v.iter_mut().zip(row) {
            *vj += wij * u[i];
        }
    }
    normalize(&mut v);
    let mut u_new: Vec<f64> = (0..rows)
        .map(|i| w[i * cols..(i + 1) * cols].iter().zip(&v).map(|(a, b)| a * b).sum())
        .collect();
    normalize(&mut u_new);
    let sigma = bilinear(w, rows, cols, &u_new, &v);
    (u_new, v, sigma)
}

/// `u^T W v`.
pub fn bilinear(w: &[f64], rows: usize, cols: usize, u: &[f64], v: &[f64]) -> f64 {
    (0..rows)
        .map(|i| u[i] * w[i * cols..(i + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Run `n_iter` power-iteration rounds from `u` and return `W / sigma`.
///
/// A matrix with Frobenius norm below 1e-12 is returned unchanged with
/// `sigma = 1` and a warning.
pub fn spectral_normalize(w: &[f64], rows: usize, cols: usize, u: &[f64], n_iter: usize) -> SpectralEstimate {
    let fro = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if fro < SPECTRAL_MIN_NORM {
        log::warn!("spectral normalization skipped: |W| = {fro:e}");
        return SpectralEstimate {
            normalized: w.to_vec(),
            sigma: 1.0,
            u: u.to_vec(),
            v: vec![0.0; cols],
        };
    }
    let mut u = u.to_vec();
    let mut v = vec![0.0; cols];
    let mut sigma = 0.0;
    for _ in 0..n_iter.max(1) {
        let (nu, nv, s) = power_iteration(w, rows, cols, &u);
        u = nu;
        v = nv;
        sigma = s;
    }
    SpectralEstimate {
        normalized: w.iter().map(|x| x / sigma).collect(),
        sigma,
        u,
        v,
    }
}
