//! C-SVC with an RBF kernel, solved by SMO with second-order working-set
//! selection (Fan, Chen & Lin 2005).
//!
//! The dual is `min ½αᵀQα − eᵀα` subject to `0 ≤ α ≤ C`, `yᵀα = 0`, with
//! `Q_ij = y_i y_j K(x_i, x_j)`. Iteration stops when the maximal KKT
//! violation drops below `tol` or the iteration cap is reached.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::veccore::squared_distance;

/// Kernel matrices up to this many rows are precomputed.
const PRECOMPUTE_LIMIT: usize = 4096;
const TAU: f64 = 1e-12;

/// RBF width; written as `"scale"` or a positive number in config files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GammaRepr", into = "GammaRepr")]
pub enum Gamma {
    /// `1 / (d · Var(X))` over all entries of the training matrix.
    Scale,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Name(String),
    Value(f64),
}

impl TryFrom<GammaRepr> for Gamma {
    type Error = String;

    fn try_from(r: GammaRepr) -> std::result::Result<Self, String> {
        match r {
            GammaRepr::Name(s) if s == "scale" => Ok(Gamma::Scale),
            GammaRepr::Name(s) => Err(format!("gamma must be \"scale\" or a number, got {s:?}")),
            GammaRepr::Value(v) => Ok(Gamma::Value(v)),
        }
    }
}

impl From<Gamma> for GammaRepr {
    fn from(g: Gamma) -> Self {
        match g {
            Gamma::Scale => GammaRepr::Name("scale".into()),
            Gamma::Value(v) => GammaRepr::Value(v),
        }
    }
}

impl std::str::FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "scale" {
            return Ok(Gamma::Scale);
        }
        s.parse::<f64>()
            .map(Gamma::Value)
            .map_err(|_| Error::InvalidConfig(format!("gamma must be \"scale\" or a number, got {s:?}")))
    }
}

impl std::fmt::Display for Gamma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gamma::Scale => f.write_str("scale"),
            Gamma::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    pub tol: f64,
    /// The iteration cap is `max_passes × n`.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: Gamma::Scale,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f32>>,
    /// `α_i y_i` per support vector.
    pub coefficients: Vec<f64>,
    /// Position of each support vector in the training input.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub converged: bool,
    pub iterations: u64,
}

pub fn scale_gamma(xs: &[Vec<f32>]) -> f64 {
    let d = xs.first().map_or(0, Vec::len);
    let n = (xs.len() * d) as f64;
    if n == 0.0 {
        return 1.0;
    }
    let mean = xs.iter().flatten().map(|&x| x as f64).sum::<f64>() / n;
    let var = xs.iter().flatten().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0
    }
}

pub fn rbf(gamma: f64, a: &[f32], b: &[f32]) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

struct KernelRows<'a> {
    xs: &'a [Vec<f32>],
    gamma: f64,
    full: Option<Vec<f32>>,
}

impl<'a> KernelRows<'a> {
    fn new(xs: &'a [Vec<f32>], gamma: f64) -> Self {
        let n = xs.len();
        let full = (n <= PRECOMPUTE_LIMIT).then(|| {
            let mut m = vec![0.0f32; n * n];
            for i in 0..n {
                m[i * n + i] = 1.0;
                for j in 0..i {
                    let k = rbf(gamma, &xs[i], &xs[j]) as f32;
                    m[i * n + j] = k;
                    m[j * n + i] = k;
                }
            }
            m
        });
        Self { xs, gamma, full }
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let n = self.xs.len();
        match &self.full {
            Some(m) => m[i * n..(i + 1) * n].iter().map(|&k| k as f64).collect(),
            None => self.xs.iter().map(|x| rbf(self.gamma, &self.xs[i], x) as f32 as f64).collect(),
        }
    }
}

/// Trains an RBF C-SVC. Labels are 0/1; label 1 is the positive class.
/// Hitting the iteration cap returns the model with `converged = false`.
pub fn train_svm(xs: &[Vec<f32>], ys: &[u8], params: &SvmParams) -> Result<SvmModel> {
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
            return Err(Error::NonFinite("svm input".into()));
        }
    }
    if !(params.c > 0.0 && params.tol > 0.0) {
        return Err(Error::InvalidConfig("svm C and tol must be positive".into()));
    }
    let gamma = match params.gamma {
        Gamma::Scale => scale_gamma(xs),
        Gamma::Value(g) if g > 0.0 => g,
        Gamma::Value(g) => return Err(Error::InvalidConfig(format!("gamma must be positive, got {g}"))),
    };

    let n = xs.len();
    let c = params.c;
    let y: Vec<f64> = ys.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let kernel = KernelRows::new(xs, gamma);
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let max_iter = (params.max_passes as u64).saturating_mul(n as u64).max(1);
    let mut iterations = 0u64;
    let mut converged = false;

    while iterations < max_iter {
        // i: maximal violator among I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let k_i = kernel.row(i);

        // j: second-order choice among I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            let diff = gmax + yg;
            if diff > 0.0 {
                // Q_ii + Q_tt − 2 y_i y_t Q_it = K_ii + K_tt − 2 K_it
                let quad = (2.0 - 2.0 * k_i[t]).max(TAU);
                let obj = -(diff * diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < params.tol || j_sel.is_none() {
            converged = true;
            break;
        }
        let j = j_sel.unwrap();
        iterations += 1;
        let k_j = kernel.row(j);

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k_i[j];
        if y[i] != y[j] {
            let quad = (2.0 + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * di + y[j] * k_j[t] * dj);
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };

    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        support_vectors: support_indices.iter().map(|&t| xs[t].clone()).collect(),
        coefficients: support_indices.iter().map(|&t| alpha[t] * y[t]).collect(),
        support_indices,
        bias: -rho,
        gamma,
        c,
        converged,
        iterations,
    })
}

impl SvmModel {
    pub fn decision(&self, x: &[f32]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, a)| a * rbf(self.gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }
}

pub fn predict_svm(model: &SvmModel, x: &[f32]) -> Result<u8> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    Ok(u8::from(model.decision(x) > 0.0))
}
