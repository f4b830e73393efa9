//! R-Drop objective over token-level output distributions.
//!
//! Each position is scored by two dropout-perturbed passes `P1`, `P2`:
//!
//! ```text
//! loss = mean over positions of
//!        -log P1[t] - log P2[t] + λ * (KL(P1‖P2) + KL(P2‖P1)) / 2
//! ```
//!
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A validated probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution must have at least one entry"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    /// Softmax of raw scores.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Self::new(exps.into_iter().map(|e| e / z).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RDropConfig {
    pub kl_weight: f64,
    /// Floor applied to the second argument of each KL term before the log.
    pub epsilon: f64,
}

impl Default for RDropConfig {
    fn default() -> Self {
        Self {
            kl_weight: 5.0,
            epsilon: 1e-12,
        }
    }
}

/// `KL(P‖Q) = Σ P_i log(P_i / max(Q_i, ε))`, with `0 · log 0 = 0`.
pub fn kl_divergence(p: &ProbDist, q: &ProbDist, epsilon: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.0
        .iter()
        .zip(&q.0)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.max(epsilon).ln()))
        .sum())
}

/// Mean of the two KL directions.
pub fn bidirectional_kl(p: &ProbDist, q: &ProbDist, epsilon: f64) -> Result<f64> {
    Ok((kl_divergence(p, q, epsilon)? + kl_divergence(q, p, epsilon)?) / 2.0)
}

pub fn rdrop_loss(
    first: &[ProbDist],
    second: &[ProbDist],
    targets: &[usize],
    cfg: &RDropConfig,
) -> Result<f64> {
    if first.len() != second.len() || first.len() != targets.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} / {} distributions, {} targets",
            first.len(),
            second.len(),
            targets.len()
        )));
    }
    if first.is_empty() {
        return Err(Error::invalid("at least one position is required"));
    }
    if cfg.kl_weight < 0.0 {
        return Err(Error::invalid("kl_weight must be non-negative"));
    }
    let mut total = 0.0;
    for (pos, ((p1, p2), &t)) in first.iter().zip(second).zip(targets).enumerate() {
        if t >= p1.len() || t >= p2.len() {
            return Err(Error::invalid(format!("target {t} out of range at position {pos}")));
        }
        let nll = -p1.0[t].max(cfg.epsilon).ln() - p2.0[t].max(cfg.epsilon).ln();
        total += nll + cfg.kl_weight * bidirectional_kl(p1, p2, cfg.epsilon)?;
    }
    Ok(total / first.len() as f64)
}

/// Gradient rows, one per position, over the pre-softmax scores.
pub type LogitGrad = Vec<Vec<f64>>;

/// Loss and its gradient with respect to the pre-softmax scores of both
/// passes. Returns `(loss, d loss / d logits1, d loss / d logits2)`.
///
/// The gradient ignores the ε floor, which is inactive for any finite
/// logits of moderate range.
pub fn rdrop_loss_and_grad(
    logits1: &[Vec<f64>],
    logits2: &[Vec<f64>],
    targets: &[usize],
    cfg: &RDropConfig,
) -> Result<(f64, LogitGrad, LogitGrad)> {
    let p1: Vec<ProbDist> = logits1.iter().map(|z| ProbDist::softmax(z)).collect::<Result<_>>()?;
    let p2: Vec<ProbDist> = logits2.iter().map(|z| ProbDist::softmax(z)).collect::<Result<_>>()?;
    let loss = rdrop_loss(&p1, &p2, targets, cfg)?;

    let scale = 1.0 / targets.len() as f64;
    let half = cfg.kl_weight / 2.0;
    let mut g1 = Vec::with_capacity(targets.len());
    let mut g2 = Vec::with_capacity(targets.len());
    for (pos, &t) in targets.iter().enumerate() {
        let (a, b) = (p1[pos].probs(), p2[pos].probs());
        // KL(a‖b) + KL(b‖a) = Σ (a - b)(log a - log b) = Σ (a - b) d, d = z1 - z2
        let d: Vec<f64> = logits1[pos].iter().zip(&logits2[pos]).map(|(x, y)| x - y).collect();
        let mean_a: f64 = a.iter().zip(&d).map(|(p, x)| p * x).sum();
        let mean_b: f64 = b.iter().zip(&d).map(|(p, x)| p * x).sum();
        let mut row1 = Vec::with_capacity(a.len());
        let mut row2 = Vec::with_capacity(a.len());
        for k in 0..a.len() {
            let onehot = if k == t { 1.0 } else { 0.0 };
            let ds1 = a[k] * (d[k] - mean_a) + (a[k] - b[k]);
            let ds2 = -b[k] * (d[k] - mean_b) - (a[k] - b[k]);
            row1.push(scale * (a[k] - onehot + half * ds1));
            row2.push(scale * (b[k] - onehot + half * ds2));
        }
        g1.push(row1);
        g2.push(row2);
    }
    Ok((loss, g1, g2))
}
