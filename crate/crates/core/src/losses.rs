//! Contrastive objectives on dense `f64` embeddings.
//!
//! Both losses score pairs by cosine similarity divided by a temperature.
//! Inputs are normalized internally, so callers may pass raw projection
//! outputs; [`supcon_grad`] differentiates through that normalization.

use crate::error::{Error, Result};
use crate::veccore::{gemm, MIN_NORM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub temperature: f64,
    /// Divide the supervised contrastive sum by the number of contributing
    /// anchors. When false the plain sum over anchors is returned.
    pub average_anchors: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            temperature: 0.07,
            average_anchors: true,
        }
    }
}

impl LossConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        let cfg = Self {
            temperature,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Labeled embeddings for the supervised contrastive loss.
#[derive(Clone, Debug)]
pub struct SupConBatch {
    embeddings: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl SupConBatch {
    pub fn new(embeddings: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if embeddings.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: embeddings.len(),
                right: labels.len(),
            });
        }
        if embeddings.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let dim = embeddings[0].len();
        for e in &embeddings {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.len(),
                });
            }
            if e.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("supcon embedding".into()));
            }
        }
        Ok(Self { embeddings, labels })
    }

    pub fn from_f32(embeddings: &[Vec<f32>], labels: &[u8]) -> Result<Self> {
        Self::new(
            embeddings
                .iter()
                .map(|e| e.iter().map(|&x| x as f64).collect())
                .collect(),
            labels.to_vec(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn embeddings(&self) -> &[Vec<f64>] {
        &self.embeddings
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// True when at least one anchor has a same-label partner.
    pub fn has_positives(&self) -> bool {
        let mut counts = std::collections::BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        counts.values().any(|&c| c >= 2)
    }
}

fn normalized(v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= MIN_NORM {
        return Err(Error::ZeroNorm { norm: n });
    }
    Ok((v.iter().map(|x| x / n).collect(), n))
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `log Σ exp(xs)` split as `(max, ln_1p(tail))`. Callers subtract their
/// target logit from `max` before adding the tail so tiny tails survive.
fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (argmax, max) = xs
        .clone()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc });
    let tail: f64 = xs
        .enumerate()
        .filter(|&(i, _)| i != argmax)
        .map(|(_, x)| (x - max).exp())
        .sum();
    (max, tail.ln_1p())
}

fn normalize_all<T: AsRef<[f64]>>(vs: &[T]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let dim = vs.first().map_or(0, |v| v.as_ref().len());
    let mut units = Vec::with_capacity(vs.len());
    let mut norms = Vec::with_capacity(vs.len());
    for v in vs {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        let (u, n) = normalized(v)?;
        units.push(u);
        norms.push(n);
    }
    Ok((units, norms))
}

/// One direction of InfoNCE: each query must pick out its own key among all
/// keys in the batch.
pub fn infonce_directional<T: AsRef<[f64]>>(
    queries: &[T],
    keys: &[T],
    cfg: &LossConfig,
) -> Result<f64> {
    cfg.validate()?;
    if queries.is_empty() || keys.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if queries.len() != keys.len() {
        return Err(Error::LengthMismatch {
            left: queries.len(),
            right: keys.len(),
        });
    }
    let (q, _) = normalize_all(queries)?;
    let (k, _) = normalize_all(keys)?;
    if q[0].len() != k[0].len() {
        return Err(Error::DimensionMismatch {
            expected: q[0].len(),
            got: k[0].len(),
        });
    }
    let tau = cfg.temperature;
    let n = q.len();
    let total: f64 = (0..n)
        .map(|i| {
            let logits = k.iter().map(|kj| dot(&q[i], kj) / tau);
            let (max, tail) = log_sum_exp(logits);
            (max - dot(&q[i], &k[i]) / tau) + tail
        })
        .sum();
    Ok(total / n as f64)
}

/// Symmetric InfoNCE: the mean of the audio-to-text and text-to-audio terms.
pub fn infonce_symmetric<T: AsRef<[f64]>>(audio: &[T], text: &[T], cfg: &LossConfig) -> Result<f64> {
    let a2t = infonce_directional(audio, text, cfg)?;
    let t2a = infonce_directional(text, audio, cfg)?;
    Ok(0.5 * (a2t + t2a))
}

struct SupConState {
    /// Unit rows, `n × dim` row-major.
    units: Vec<f64>,
    norms: Vec<f64>,
    dim: usize,
    loss: f64,
    /// `∂loss/∂(sim_ij / τ)`, `n × n` row-major.
    coeffs: Vec<f64>,
}

fn supcon_forward(batch: &SupConBatch, cfg: &LossConfig, want_coeffs: bool) -> Result<SupConState> {
    cfg.validate()?;
    let (rows, norms) = normalize_all(&batch.embeddings)?;
    let n = rows.len();
    let dim = rows[0].len();
    let units: Vec<f64> = rows.concat();
    let tau = cfg.temperature;
    let labels = &batch.labels;

    let mut sims = vec![0.0; n * n];
    gemm(n, dim, n, &units, (dim as isize, 1), &units, (1, dim as isize), &mut sims, 0.0);
    sims.iter_mut().for_each(|s| *s /= tau);

    let anchors: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| j != i && labels[j] == labels[i]))
        .collect();
    if anchors.is_empty() {
        return Err(Error::NoPositives);
    }
    let weight = if cfg.average_anchors {
        1.0 / anchors.len() as f64
    } else {
        1.0
    };

    let mut loss = 0.0;
    let mut coeffs = if want_coeffs { vec![0.0; n * n] } else { Vec::new() };
    for &i in &anchors {
        let row = &sims[i * n..(i + 1) * n];
        let others = (0..n).filter(|&a| a != i);
        let (max, tail) = log_sum_exp(others.clone().map(|a| row[a]));
        let lse = max + tail;
        let positives: Vec<usize> = others.filter(|&p| labels[p] == labels[i]).collect();
        let inv_p = 1.0 / positives.len() as f64;
        let pos_mean = positives.iter().map(|&p| row[p]).sum::<f64>() * inv_p;
        loss += weight * ((max - pos_mean) + tail);

        if want_coeffs {
            let c = &mut coeffs[i * n..(i + 1) * n];
            for a in (0..n).filter(|&a| a != i) {
                c[a] += weight * (row[a] - lse).exp();
            }
            for &p in &positives {
                c[p] -= weight * inv_p;
            }
        }
    }
    Ok(SupConState {
        units,
        norms,
        dim,
        loss,
        coeffs,
    })
}

/// Supervised contrastive loss on L2-normalized embeddings:
/// `Σ_i −1/|P(i)| Σ_{p∈P(i)} log( exp(s_ip/τ) / Σ_{a≠i} exp(s_ia/τ) )` over
/// anchors with at least one positive, divided by their count when
/// `average_anchors` is set.
pub fn supcon_loss(batch: &SupConBatch, cfg: &LossConfig) -> Result<f64> {
    Ok(supcon_forward(batch, cfg, false)?.loss)
}

/// Gradient with respect to the raw (unnormalized) embeddings.
pub fn supcon_grad(batch: &SupConBatch, cfg: &LossConfig) -> Result<Vec<Vec<f64>>> {
    Ok(supcon_loss_and_grad(batch, cfg)?.1)
}

/// Loss and gradient in one pass. With `u = z/‖z‖` and
/// `G_k = (1/τ) Σ_j (c_kj + c_jk) u_j`, the gradient is
/// `(G_k − (G_k·u_k) u_k) / ‖z_k‖`.
pub fn supcon_loss_and_grad(batch: &SupConBatch, cfg: &LossConfig) -> Result<(f64, Vec<Vec<f64>>)> {
    let SupConState {
        units,
        norms,
        dim,
        loss,
        mut coeffs,
    } = supcon_forward(batch, cfg, true)?;
    let n = norms.len();
    let tau = cfg.temperature;

    // symmetrize in place: c_kj + c_jk
    for k in 0..n {
        for j in k..n {
            let sum = coeffs[k * n + j] + coeffs[j * n + k];
            coeffs[k * n + j] = sum;
            coeffs[j * n + k] = sum;
        }
    }
    let mut g = vec![0.0; n * dim];
    gemm(n, n, dim, &coeffs, (n as isize, 1), &units, (dim as isize, 1), &mut g, 0.0);

    let grads = (0..n)
        .map(|k| {
            let gk = &g[k * dim..(k + 1) * dim];
            let uk = &units[k * dim..(k + 1) * dim];
            let radial = dot(gk, uk) / tau;
            let inv_norm = 1.0 / norms[k];
            gk.iter()
                .zip(uk)
                .map(|(gd, u)| (gd / tau - radial * u) * inv_norm)
                .collect()
        })
        .collect();
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(t: f64) -> LossConfig {
        LossConfig {
            temperature: t,
            average_anchors: true,
        }
    }

    #[test]
    fn infonce_single_pair_is_zero() {
        let a = vec![vec![0.3, -0.2, 0.9]];
        let t = vec![vec![-0.5, 0.1, 0.4]];
        assert_eq!(infonce_symmetric(&a, &t, &cfg(0.07)).unwrap(), 0.0);
    }

    #[test]
    fn infonce_aligned_pair_value() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let got = infonce_symmetric(&e, &e, &cfg(1.0)).unwrap();
        // -log(e / (e + 1))
        let want = -(std::f64::consts::E / (std::f64::consts::E + 1.0)).ln();
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 0.3133, epsilon = 1e-4);

        let crossed = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(infonce_symmetric(&e, &crossed, &cfg(1.0)).unwrap() > got);
    }

    #[test]
    fn infonce_errors() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(
            infonce_symmetric(&empty, &empty, &cfg(1.0)),
            Err(Error::EmptyBatch)
        ));
        let a = vec![vec![1.0, 0.0]];
        let t = vec![vec![1.0, 0.0, 0.0]];
        assert!(matches!(
            infonce_symmetric(&a, &t, &cfg(1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn infonce_decreases_with_temperature() {
        let e = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let vals: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|&t| infonce_symmetric(&e, &e, &cfg(t)).unwrap())
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2], "{vals:?}");
        assert!(vals[2] > 0.0);
    }

    #[test]
    fn supcon_two_same_class_is_zero() {
        let b = SupConBatch::new(vec![vec![0.2, 0.9], vec![-0.7, 0.1]], vec![1, 1]).unwrap();
        assert_abs_diff_eq!(supcon_loss(&b, &cfg(0.07)).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn supcon_three_point_example() {
        let tau: f64 = 0.5;
        let b = SupConBatch::new(
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![0, 0, 1],
        )
        .unwrap();
        let per_anchor = -((1.0 / tau).exp() / ((1.0 / tau).exp() + (-1.0 / tau).exp())).ln();
        let summed = LossConfig {
            temperature: tau,
            average_anchors: false,
        };
        assert_abs_diff_eq!(supcon_loss(&b, &summed).unwrap(), 2.0 * per_anchor, epsilon = 1e-12);
        assert_abs_diff_eq!(supcon_loss(&b, &cfg(tau)).unwrap(), per_anchor, epsilon = 1e-12);
    }

    #[test]
    fn supcon_without_positives_errors() {
        let b = SupConBatch::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]).unwrap();
        assert!(matches!(supcon_loss(&b, &cfg(0.1)), Err(Error::NoPositives)));
        assert!(matches!(supcon_grad(&b, &cfg(0.1)), Err(Error::NoPositives)));
    }

    #[test]
    fn supcon_identical_pair_has_zero_gradient() {
        let b = SupConBatch::new(vec![vec![0.6, 0.8], vec![0.6, 0.8]], vec![0, 0]).unwrap();
        for g in supcon_grad(&b, &cfg(0.07)).unwrap() {
            for x in g {
                assert!(x.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn supcon_scale_invariant() {
        let e = vec![vec![0.3, -1.2, 0.5], vec![0.1, 0.4, -0.2], vec![2.0, 0.3, 0.3], vec![-0.4, -0.4, 1.0]];
        let y = vec![0, 1, 0, 1];
        let b1 = SupConBatch::new(e.clone(), y.clone()).unwrap();
        let b2 = SupConBatch::new(e.iter().map(|v| v.iter().map(|x| 2.0 * x).collect()).collect(), y).unwrap();
        let c = cfg(0.1);
        assert_abs_diff_eq!(supcon_loss(&b1, &c).unwrap(), supcon_loss(&b2, &c).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn batch_validation() {
        assert!(matches!(SupConBatch::new(vec![], vec![]), Err(Error::EmptyBatch)));
        assert!(SupConBatch::new(vec![vec![1.0]], vec![0, 1]).is_err());
        assert!(matches!(
            SupConBatch::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_temperature_rejected() {
        assert!(LossConfig::new(0.0).is_err());
        assert!(LossConfig::new(-1.0).is_err());
    }
}
