use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::veccore::{Matrix, Rng, MIN_NORM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            other => Err(Error::Malformed(format!("activation code {other}"))),
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }
}

/// Affine layer `act(W x + b)`; `weight` is `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f32>,
    pub activation: Activation,
}

/// Small feed-forward map whose outputs are L2-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionHead {
    layers: Vec<Layer>,
}

impl ProjectionHead {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidDimension("projection head needs a layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weight.rows() == 0 || l.weight.cols() == 0 {
                return Err(Error::InvalidDimension(format!("layer {i} has an empty weight")));
            }
            if l.bias.len() != l.weight.rows() {
                return Err(Error::DimensionMismatch {
                    expected: l.weight.rows(),
                    got: l.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].weight.rows() != l.weight.cols() {
                return Err(Error::DimensionMismatch {
                    expected: layers[i - 1].weight.rows(),
                    got: l.weight.cols(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Single identity layer with zero bias.
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("dim must be positive".into()));
        }
        Self::new(vec![Layer {
            weight: Matrix::identity(dim),
            bias: vec![0.0; dim],
            activation: Activation::Identity,
        }])
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows()
    }

    /// Output before the final normalization, in `f64`.
    pub fn forward_raw(&self, z: &[f32]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: z.len(),
            });
        }
        let mut a: Vec<f64> = z.iter().map(|&x| x as f64).collect();
        for l in &self.layers {
            a = (0..l.weight.rows())
                .map(|r| {
                    let s: f64 = l
                        .weight
                        .row(r)
                        .iter()
                        .zip(&a)
                        .map(|(&w, x)| w as f64 * x)
                        .sum();
                    l.activation.apply(s + l.bias[r] as f64)
                })
                .collect();
        }
        Ok(a)
    }

    /// `g(z) / |g(z)|`.
    pub fn project(&self, z: &[f32]) -> Result<Vec<f32>> {
        let raw = self.forward_raw(z)?;
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !n.is_finite() {
            return Err(Error::NonFinite("projection output".into()));
        }
        if n <= MIN_NORM {
            return Err(Error::ZeroNorm { norm: n });
        }
        Ok(raw.iter().map(|x| (x / n) as f32).collect())
    }
}

/// Two-layer head `input → hidden (relu) → output (identity)` with weights
/// and biases drawn from `U(-1/√fan_in, 1/√fan_in)`.
pub fn init_head(input_dim: usize, hidden_dim: usize, output_dim: usize, seed: u64) -> Result<ProjectionHead> {
    if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
        return Err(Error::InvalidDimension(format!(
            "head dims must be positive, got {input_dim}/{hidden_dim}/{output_dim}"
        )));
    }
    let mut rng = Rng::derived(seed, "head-init");
    let mut layer = |fan_in: usize, fan_out: usize, activation| -> Result<Layer> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight: Vec<f32> = (0..fan_in * fan_out)
            .map(|_| rng.uniform(-bound, bound) as f32)
            .collect();
        let bias: Vec<f32> = (0..fan_out).map(|_| rng.uniform(-bound, bound) as f32).collect();
        Ok(Layer {
            weight: Matrix::from_vec(fan_out, fan_in, weight)?,
            bias,
            activation,
        })
    };
    let first = layer(input_dim, hidden_dim, Activation::Relu)?;
    let second = layer(hidden_dim, output_dim, Activation::Identity)?;
    ProjectionHead::new(vec![first, second])
}
