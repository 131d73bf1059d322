use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::head::{Activation, Layer, ProjectionHead};
use super::optim::{AdamW, AdamWConfig};
use crate::datastore::EmbeddingStore;
use crate::error::{Error, Result};
use crate::losses::{supcon_loss_and_grad, LossConfig, SupConBatch};
use crate::veccore::{gemm, Matrix, Rng};

/// Support sets up to this size train full-batch under [`BatchMode::Auto`].
pub const AUTO_FULL_BATCH_LIMIT: usize = 256;
pub const AUTO_MINIBATCH_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "size")]
pub enum BatchMode {
    /// Full batch up to 256 samples, shuffled minibatches of 64 beyond.
    Auto,
    Full,
    Minibatch(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub seed: u64,
    pub batch_mode: BatchMode,
    pub weight_decay: f64,
    pub average_anchors: bool,
    /// Linear learning-rate warmup length in epochs; 0 keeps it constant.
    pub warmup_epochs: usize,
    pub hidden_dim: Option<usize>,
    pub output_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 1e-4,
            temperature: 0.07,
            seed: 0,
            batch_mode: BatchMode::Auto,
            weight_decay: 0.01,
            average_anchors: true,
            warmup_epochs: 0,
            hidden_dim: None,
            output_dim: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be finite and non-negative".into()));
        }
        if let BatchMode::Minibatch(0) = self.batch_mode {
            return Err(Error::InvalidConfig("minibatch size must be positive".into()));
        }
        self.loss_config().validate()
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            temperature: self.temperature,
            average_anchors: self.average_anchors,
        }
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            self.learning_rate * (epoch + 1) as f64 / self.warmup_epochs as f64
        } else {
            self.learning_rate
        }
    }

    fn batch_size(&self, n: usize) -> usize {
        match self.batch_mode {
            BatchMode::Full => n,
            BatchMode::Minibatch(b) => b.min(n),
            BatchMode::Auto if n <= AUTO_FULL_BATCH_LIMIT => n,
            BatchMode::Auto => AUTO_MINIBATCH_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub loss_per_epoch: Vec<f64>,
    /// Loss over the whole support set after the last update.
    pub final_loss: f64,
    pub wall_time: Duration,
}

/// Head parameters unpacked to `f64` for training.
struct Params {
    layers: Vec<DenseParams>,
}

struct DenseParams {
    rows: usize,
    cols: usize,
    /// row-major weight followed by bias
    values: Vec<f64>,
    activation: Activation,
}

impl Params {
    fn from_head(head: &ProjectionHead) -> Self {
        Self {
            layers: head
                .layers()
                .iter()
                .map(|l| DenseParams {
                    rows: l.weight.rows(),
                    cols: l.weight.cols(),
                    values: l
                        .weight
                        .as_slice()
                        .iter()
                        .chain(&l.bias)
                        .map(|&x| x as f64)
                        .collect(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    fn to_head(&self) -> Result<ProjectionHead> {
        let layers = self
            .layers
            .iter()
            .map(|p| {
                let split = p.rows * p.cols;
                Ok(Layer {
                    weight: Matrix::from_vec(
                        p.rows,
                        p.cols,
                        p.values[..split].iter().map(|&x| x as f32).collect(),
                    )?,
                    bias: p.values[split..].iter().map(|&x| x as f32).collect(),
                    activation: p.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ProjectionHead::new(layers)
    }

    /// Batched forward pass over `n` row-major inputs. Returns each layer's
    /// (pre-activation, input) pair followed by the final output.
    fn forward(&self, x: &[f64], n: usize) -> (Vec<(Vec<f64>, Vec<f64>)>, Vec<f64>) {
        let mut trace = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for p in &self.layers {
            let split = p.rows * p.cols;
            let mut h = Vec::with_capacity(n * p.rows);
            for _ in 0..n {
                h.extend_from_slice(&p.values[split..]);
            }
            gemm(
                n,
                p.cols,
                p.rows,
                &a,
                (p.cols as isize, 1),
                &p.values[..split],
                (1, p.cols as isize),
                &mut h,
                1.0,
            );
            let next = match p.activation {
                Activation::Identity => h.clone(),
                Activation::Relu => h.iter().map(|v| v.max(0.0)).collect(),
            };
            trace.push((h, std::mem::replace(&mut a, next)));
        }
        (trace, a)
    }

    /// Parameter gradients given dL/d(output) for every row of the batch.
    fn backward(&self, trace: &[(Vec<f64>, Vec<f64>)], grad_out: Vec<f64>, n: usize) -> Vec<Vec<f64>> {
        let mut grads: Vec<Vec<f64>> = self.layers.iter().map(|p| vec![0.0; p.values.len()]).collect();
        let mut upstream = grad_out;
        for (l, p) in self.layers.iter().enumerate().rev() {
            let (h, input) = &trace[l];
            let mut dh = upstream;
            if p.activation == Activation::Relu {
                dh.iter_mut().zip(h).for_each(|(g, &v)| {
                    if v <= 0.0 {
                        *g = 0.0
                    }
                });
            }
            let split = p.rows * p.cols;
            let (gw, gb) = grads[l].split_at_mut(split);
            // dW = dhᵀ · input
            gemm(p.rows, n, p.cols, &dh, (1, p.rows as isize), input, (p.cols as isize, 1), gw, 0.0);
            for row in dh.chunks_exact(p.rows) {
                gb.iter_mut().zip(row).for_each(|(b, g)| *b += g);
            }
            upstream = if l > 0 {
                // d(input) = dh · W
                let mut up = vec![0.0; n * p.cols];
                gemm(n, p.rows, p.cols, &dh, (p.rows as isize, 1), &p.values[..split], (p.cols as isize, 1), &mut up, 0.0);
                up
            } else {
                Vec::new()
            };
        }
        grads
    }

    fn outputs(&self, xs: &[Vec<f64>]) -> (Vec<(Vec<f64>, Vec<f64>)>, Vec<Vec<f64>>) {
        let (trace, out) = self.forward(&xs.concat(), xs.len());
        let width = self.layers.last().map_or(0, |p| p.rows);
        (trace, out.chunks_exact(width).map(<[f64]>::to_vec).collect())
    }

    fn batch_loss_and_grads(
        &self,
        xs: &[Vec<f64>],
        ys: &[u8],
        loss_cfg: &LossConfig,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let (trace, outputs) = self.outputs(xs);
        let batch = SupConBatch::new(outputs, ys.to_vec())?;
        let (loss, grad_out) = supcon_loss_and_grad(&batch, loss_cfg)?;
        Ok((loss, self.backward(&trace, grad_out.concat(), xs.len())))
    }

    fn loss(&self, xs: &[Vec<f64>], ys: &[u8], loss_cfg: &LossConfig) -> Result<f64> {
        let (_, outputs) = self.outputs(xs);
        crate::losses::supcon_loss(&SupConBatch::new(outputs, ys.to_vec())?, loss_cfg)
    }
}

/// Trains `head` on the support embeddings with the supervised contrastive
/// objective and AdamW. The input embeddings are only read.
pub fn train_projection(
    head: &ProjectionHead,
    embeddings: &[Vec<f32>],
    labels: &[u8],
    cfg: &TrainConfig,
) -> Result<(ProjectionHead, TrainReport)> {
    cfg.validate()?;
    let start = Instant::now();
    if embeddings.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: embeddings.len(),
            right: labels.len(),
        });
    }
    if embeddings.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for e in embeddings {
        if e.len() != head.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: head.input_dim(),
                got: e.len(),
            });
        }
    }
    let xs: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| e.iter().map(|&x| x as f64).collect())
        .collect();
    let loss_cfg = cfg.loss_config();
    if !SupConBatch::new(xs.clone(), labels.to_vec())?.has_positives() {
        return Err(Error::NoPositives);
    }

    let mut params = Params::from_head(head);
    let mut opts: Vec<AdamW> = params
        .layers
        .iter()
        .map(|p| {
            AdamW::new(
                p.values.len(),
                AdamWConfig {
                    weight_decay: cfg.weight_decay,
                    ..AdamWConfig::default()
                },
            )
        })
        .collect();

    let n = xs.len();
    let batch_size = cfg.batch_size(n);
    let mut rng = Rng::derived(cfg.seed, "projection-batches");
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_per_epoch = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if batch_size < n {
            rng.shuffle(&mut order);
        }
        let lr = cfg.lr_at(epoch);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = match params.batch_loss_and_grads(&bx, &by, &loss_cfg) {
                Ok(v) => v,
                // a shuffled minibatch can lack any positive pair
                Err(Error::NoPositives) => continue,
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            for ((p, g), opt) in params.layers.iter_mut().zip(&grads).zip(&mut opts) {
                opt.step(&mut p.values, g, lr);
            }
            total += loss;
            batches += 1;
        }
        if batches == 0 {
            return Err(Error::NoPositives);
        }
        loss_per_epoch.push(total / batches as f64);
    }

    let final_loss = params.loss(&xs, labels, &loss_cfg)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: cfg.epochs });
    }
    let trained = params.to_head()?;
    Ok((
        trained,
        TrainReport {
            loss_per_epoch,
            final_loss,
            wall_time: start.elapsed(),
        },
    ))
}

/// Projects every record of `store` through `head` into a new store.
pub fn adapt_store(head: &ProjectionHead, store: &EmbeddingStore) -> Result<EmbeddingStore> {
    if store.dim() != head.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: head.input_dim(),
            got: store.dim(),
        });
    }
    store.map_vectors(head.output_dim(), |v| head.project(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::init_head;

    fn gaussian_support(seed: u64, n_per_class: usize, dim: usize, sep: f64) -> (Vec<Vec<f32>>, Vec<u8>) {
        let mut rng = Rng::new(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for class in 0..2u8 {
            let shift = if class == 0 { -sep / 2.0 } else { sep / 2.0 };
            for _ in 0..n_per_class {
                let mut v: Vec<f32> = (0..dim).map(|_| rng.normal() as f32).collect();
                v[0] += shift as f32;
                xs.push(v);
                ys.push(class);
            }
        }
        (xs, ys)
    }

    #[test]
    fn report_has_one_loss_per_epoch() {
        let (xs, ys) = gaussian_support(1, 5, 4, 2.0);
        let head = init_head(4, 4, 3, 1).unwrap();
        let cfg = TrainConfig { epochs: 7, ..TrainConfig::default() };
        let (_, rep) = train_projection(&head, &xs, &ys, &cfg).unwrap();
        assert_eq!(rep.loss_per_epoch.len(), 7);
        assert!(rep.final_loss.is_finite());
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (xs, ys) = gaussian_support(2, 10, 6, 2.0);
        let head = init_head(6, 6, 4, 3).unwrap();
        let cfg = TrainConfig { learning_rate: 1e-2, seed: 11, ..TrainConfig::default() };
        let (a, ra) = train_projection(&head, &xs, &ys, &cfg).unwrap();
        let (b, rb) = train_projection(&head, &xs, &ys, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.loss_per_epoch, rb.loss_per_epoch);
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let (xs, ys) = gaussian_support(3, 4, 5, 2.0);
        let head = init_head(5, 5, 3, 3).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, weight_decay: 0.01, ..TrainConfig::default() };
        let (trained, _) = train_projection(&head, &xs, &ys, &cfg).unwrap();
        assert_eq!(trained, head);
    }

    #[test]
    fn inputs_are_not_mutated() {
        let (xs, ys) = gaussian_support(4, 4, 5, 2.0);
        let before = xs.clone();
        let head = init_head(5, 5, 3, 3).unwrap();
        train_projection(&head, &xs, &ys, &TrainConfig::default()).unwrap();
        assert_eq!(xs, before);
    }

    #[test]
    fn loss_decreases_on_separated_clusters() {
        for seed in 0..5 {
            let (xs, ys) = gaussian_support(100 + seed, 10, 8, 2.0);
            let head = init_head(8, 8, 8, seed).unwrap();
            let (_, rep) = train_projection(&head, &xs, &ys, &TrainConfig { seed, ..TrainConfig::default() }).unwrap();
            assert!(rep.final_loss < rep.loss_per_epoch[0], "seed {seed}: {rep:?}");
        }
    }

    #[test]
    fn singleton_classes_have_no_positives() {
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let head = init_head(2, 2, 2, 0).unwrap();
        assert!(matches!(
            train_projection(&head, &xs, &[0, 1], &TrainConfig::default()),
            Err(Error::NoPositives)
        ));
        assert!(matches!(
            train_projection(&head, &[], &[], &TrainConfig::default()),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn minibatch_mode_runs() {
        let (xs, ys) = gaussian_support(5, 40, 4, 2.0);
        let head = init_head(4, 4, 4, 0).unwrap();
        let cfg = TrainConfig { batch_mode: BatchMode::Minibatch(16), epochs: 3, ..TrainConfig::default() };
        let (_, rep) = train_projection(&head, &xs, &ys, &cfg).unwrap();
        assert_eq!(rep.loss_per_epoch.len(), 3);
    }

    #[test]
    fn warmup_scales_learning_rate() {
        let cfg = TrainConfig { warmup_epochs: 4, learning_rate: 1.0, ..TrainConfig::default() };
        assert_eq!(cfg.lr_at(0), 0.25);
        assert_eq!(cfg.lr_at(3), 1.0);
        assert_eq!(cfg.lr_at(10), 1.0);
    }

    #[test]
    fn auto_batch_threshold() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.batch_size(256), 256);
        assert_eq!(cfg.batch_size(257), 64);
    }

    /// Finite-difference check of the head backward pass through the loss.
    #[test]
    fn head_gradients_match_finite_differences() {
        let (xs, ys) = gaussian_support(9, 3, 3, 1.0);
        let head = init_head(3, 4, 2, 5).unwrap();
        let params = Params::from_head(&head);
        let xs: Vec<Vec<f64>> = xs.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();
        let cfg = LossConfig { temperature: 0.5, average_anchors: true };
        let (_, grads) = params.batch_loss_and_grads(&xs, &ys, &cfg).unwrap();
        let mut p = Params::from_head(&head);
        let h = 1e-6;
        for l in 0..p.layers.len() {
            for i in 0..p.layers[l].values.len() {
                let orig = p.layers[l].values[i];
                p.layers[l].values[i] = orig + h;
                let lp = p.loss(&xs, &ys, &cfg).unwrap();
                p.layers[l].values[i] = orig - h;
                let lm = p.loss(&xs, &ys, &cfg).unwrap();
                p.layers[l].values[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - grads[l][i]).abs() < 1e-6 * (1.0 + fd.abs()), "layer {l} param {i}: {fd} vs {}", grads[l][i]);
            }
        }
    }
}
