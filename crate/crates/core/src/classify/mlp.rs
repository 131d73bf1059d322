//! One-hidden-layer relu network with two output logits, trained by
//! minibatch softmax cross-entropy under AdamW.

use serde::{Deserialize, Serialize};

use crate::adapters::{AdamW, AdamWConfig};
use crate::error::{Error, Result};
use crate::veccore::{gemm, Matrix, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Capped at the number of training samples.
    pub batch_size: usize,
    pub weight_decay: f64,
    /// An epoch counts as stale unless it lowers the best loss by at least this.
    pub tol: f64,
    /// Stale epochs tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            max_epochs: 200,
            learning_rate: 1e-3,
            batch_size: 200,
            weight_decay: 1e-4,
            tol: 1e-4,
            patience: 10,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("mlp: {m}")));
        if self.hidden == 0 {
            return bad("hidden must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.weight_decay >= 0.0 && self.tol >= 0.0) {
            return bad("weight_decay and tol must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    /// hidden x input
    pub w1: Matrix,
    pub b1: Vec<f32>,
    /// 2 x hidden
    pub w2: Matrix,
    pub b2: Vec<f32>,
    pub epochs_run: usize,
    pub final_loss: f64,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, cfg: &MlpConfig) -> Result<Self> {
        if input_dim == 0 || cfg.hidden == 0 {
            return Err(Error::InvalidDimension("mlp dimensions must be positive".into()));
        }
        let mut rng = Rng::derived(cfg.seed, "mlp-init");
        let mut glorot = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound) as f32).collect();
            Matrix::from_vec(rows, cols, data).expect("shape")
        };
        let w1 = glorot(cfg.hidden, input_dim);
        let w2 = glorot(2, cfg.hidden);
        Ok(Self {
            w1,
            b1: vec![0.0; cfg.hidden],
            w2,
            b2: vec![0.0; 2],
            epochs_run: 0,
            final_loss: f64::NAN,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn logits(&self, x: &[f32]) -> [f64; 2] {
        let h: Vec<f64> = (0..self.hidden())
            .map(|r| {
                let s = self.w1.row(r).iter().zip(x).map(|(&w, &v)| w as f64 * v as f64).sum::<f64>()
                    + self.b1[r] as f64;
                s.max(0.0)
            })
            .collect();
        let out = |c: usize| {
            self.w2.row(c).iter().zip(&h).map(|(&w, v)| w as f64 * v).sum::<f64>() + self.b2[c] as f64
        };
        [out(0), out(1)]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-batch scratch buffers, row-major.
#[derive(Default)]
struct Workspace {
    x: Vec<f64>,
    hid: Vec<f64>,
    dl: Vec<f64>,
    dh: Vec<f64>,
}

impl Workspace {
    fn resize(&mut self, b: usize, d: usize, h: usize) {
        self.x.resize(b * d, 0.0);
        self.hid.resize(b * h, 0.0);
        self.dl.resize(b * 2, 0.0);
        self.dh.resize(b * h, 0.0);
        self.x.truncate(b * d);
        self.hid.truncate(b * h);
        self.dl.truncate(b * 2);
        self.dh.truncate(b * h);
    }
}

/// Flat f64 parameter vector: w1, b1, w2, b2.
struct Flat {
    input: usize,
    hidden: usize,
    theta: Vec<f64>,
}

impl Flat {
    fn from_model(m: &MlpModel) -> Self {
        let theta = m
            .w1
            .as_slice()
            .iter()
            .chain(&m.b1)
            .chain(m.w2.as_slice())
            .chain(&m.b2)
            .map(|&v| v as f64)
            .collect();
        Self {
            input: m.input_dim(),
            hidden: m.hidden(),
            theta,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input;
        let w2 = b1 + self.hidden;
        (b1, w2, w2 + 2 * self.hidden)
    }

    /// Mean cross-entropy over `batch` and its gradient.
    fn loss_grad(&self, xs: &[Vec<f64>], ys: &[u8], batch: &[usize], grad: &mut [f64], work: &mut Workspace) -> f64 {
        let (ob1, ow2, ob2) = self.offsets();
        let (d, h, b) = (self.input, self.hidden, batch.len());
        let t = &self.theta;
        work.resize(b, d, h);
        let Workspace { x, hid, dl, dh } = work;
        for (row, &s) in x.chunks_exact_mut(d).zip(batch) {
            row.copy_from_slice(&xs[s]);
        }
        // hid = relu(x · w1ᵀ + b1)
        for row in hid.chunks_exact_mut(h) {
            row.copy_from_slice(&t[ob1..ow2]);
        }
        gemm(b, d, h, x, (d as isize, 1), &t[..ob1], (1, d as isize), hid, 1.0);
        hid.iter_mut().for_each(|v| *v = v.max(0.0));

        let scale = 1.0 / b as f64;
        let mut total = 0.0;
        for (i, &s) in batch.iter().enumerate() {
            let hrow = &hid[i * h..(i + 1) * h];
            let logit = [0, 1].map(|c| t[ob2 + c] + dot(&t[ow2 + c * h..ow2 + (c + 1) * h], hrow));
            let m = logit[0].max(logit[1]);
            let lse = m + ((logit[0] - m).exp() + (logit[1] - m).exp()).ln();
            let y = ys[s] as usize;
            total += lse - logit[y];
            for c in 0..2 {
                dl[i * 2 + c] = ((logit[c] - lse).exp() - f64::from(u8::from(c == y))) * scale;
            }
        }

        grad.iter_mut().for_each(|g| *g = 0.0);
        let (gw1, rest) = grad.split_at_mut(ob1);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(2 * h);
        // dw2 = dlᵀ · hid
        gemm(2, b, h, dl, (1, 2), hid, (h as isize, 1), gw2, 0.0);
        for i in 0..b {
            gb2[0] += dl[i * 2];
            gb2[1] += dl[i * 2 + 1];
        }
        // dh = (dl · w2) masked by the relu
        for i in 0..b {
            for r in 0..h {
                dh[i * h + r] = if hid[i * h + r] > 0.0 {
                    dl[i * 2] * t[ow2 + r] + dl[i * 2 + 1] * t[ow2 + h + r]
                } else {
                    0.0
                };
                gb1[r] += dh[i * h + r];
            }
        }
        // dw1 = dhᵀ · x
        gemm(h, b, d, dh, (1, h as isize), x, (d as isize, 1), gw1, 0.0);
        total * scale
    }

    fn into_model(self, epochs_run: usize, final_loss: f64) -> MlpModel {
        let (ob1, ow2, ob2) = self.offsets();
        let f = |s: &[f64]| s.iter().map(|&v| v as f32).collect::<Vec<f32>>();
        MlpModel {
            w1: Matrix::from_vec(self.hidden, self.input, f(&self.theta[..ob1])).expect("shape"),
            b1: f(&self.theta[ob1..ow2]),
            w2: Matrix::from_vec(2, self.hidden, f(&self.theta[ow2..ob2])).expect("shape"),
            b2: f(&self.theta[ob2..]),
            epochs_run,
            final_loss,
        }
    }
}

pub fn train_mlp(xs: &[Vec<f32>], ys: &[u8], cfg: &MlpConfig) -> Result<MlpModel> {
    cfg.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if !(ys.contains(&0) && ys.contains(&1)) {
        return Err(Error::SingleClass);
    }
    let dim = xs[0].len();
    for x in xs {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mlp input".into()));
        }
    }
    let mut flat = Flat::from_model(&MlpModel::init(dim, cfg)?);
    let mut opt = AdamW::new(
        flat.theta.len(),
        AdamWConfig {
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
    );
    let mut grad = vec![0.0; flat.theta.len()];
    let mut work = Workspace::default();
    let xs: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|&v| v as f64).collect()).collect();
    let mut rng = Rng::derived(cfg.seed, "mlp-batches");
    let batch = cfg.batch_size.min(xs.len());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let (mut best, mut stale) = (f64::INFINITY, 0usize);
    let mut last = f64::NAN;
    let mut epochs_run = 0;

    for epoch in 0..cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        for chunk in order.chunks(batch) {
            let loss = flat.loss_grad(&xs, ys, chunk, &mut grad, &mut work);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            sum += loss * chunk.len() as f64;
            opt.step(&mut flat.theta, &grad, cfg.learning_rate);
        }
        last = sum / xs.len() as f64;
        epochs_run = epoch + 1;
        if last > best - cfg.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(last);
        if stale >= cfg.patience {
            break;
        }
    }
    Ok(flat.into_model(epochs_run, last))
}

/// Argmax of the two logits; ties go to class 0.
pub fn predict_mlp(model: &MlpModel, x: &[f32]) -> Result<u8> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: x.len(),
        });
    }
    let [l0, l1] = model.logits(x);
    Ok(u8::from(l1 > l0))
}
