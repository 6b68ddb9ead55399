use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::log_loss;
use super::{check_classes, ModelError, ModelKind, Trace};
use crate::rng::{stream, Purpose};
use crate::scalar::{sigmoid, Scalar};

/// Sequences per parallel gradient chunk. Fixed so sums are reproducible.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub init_scale: f64,
    pub forget_bias: f64,
    /// Holds out a validation share and stops after this many epochs
    /// without improvement. Off by default.
    pub early_stopping_patience: Option<usize>,
    pub validation_fraction: f64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden: 16,
            learning_rate: 0.05,
            epochs: 300,
            clip_norm: 5.0,
            init_scale: 0.1,
            forget_bias: 1.0,
            early_stopping_patience: None,
            validation_fraction: 0.2,
        }
    }
}

/// One LSTM layer with a logistic readout on the final hidden state.
///
/// Parameters live in one flat vector: input weights `W` (4H x D), recurrent
/// weights `U` (4H x H), gate biases (4H), readout weights (H) and readout
/// bias. Gate blocks are ordered input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm<T> {
    pub input: usize,
    pub hidden: usize,
    pub params: Vec<T>,
}

struct Step<T> {
    i: Vec<T>,
    f: Vec<T>,
    o: Vec<T>,
    g: Vec<T>,
    c: Vec<T>,
    tanh_c: Vec<T>,
    h: Vec<T>,
}

impl<T: Scalar> Lstm<T> {
    pub fn param_count(input: usize, hidden: usize) -> usize {
        4 * hidden * (input + hidden + 1) + hidden + 1
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Lstm {
            input,
            hidden,
            params: vec![T::zero(); Self::param_count(input, hidden)],
        }
    }

    fn off_u(&self) -> usize {
        4 * self.hidden * self.input
    }

    fn off_b(&self) -> usize {
        self.off_u() + 4 * self.hidden * self.hidden
    }

    fn off_v(&self) -> usize {
        self.off_b() + 4 * self.hidden
    }

    fn off_c(&self) -> usize {
        self.off_v() + self.hidden
    }

    /// Readout bias.
    pub fn readout_bias(&self) -> T {
        self.params[self.off_c()]
    }

    fn forward(&self, seq: &[Vec<T>]) -> (Vec<Step<T>>, T) {
        let (d, hd) = (self.input, self.hidden);
        let (ou, ob) = (self.off_u(), self.off_b());
        let p = &self.params;
        let mut h = vec![T::zero(); hd];
        let mut c = vec![T::zero(); hd];
        let mut steps = Vec::with_capacity(seq.len());
        for x in seq {
            let mut a = p[ob..ob + 4 * hd].to_vec();
            for (r, a_r) in a.iter_mut().enumerate() {
                let wr = &p[r * d..(r + 1) * d];
                let ur = &p[ou + r * hd..ou + (r + 1) * hd];
                *a_r += wr.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>();
                *a_r += ur.iter().zip(&h).map(|(&u, &v)| u * v).sum::<T>();
            }
            let i: Vec<T> = a[..hd].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<T> = a[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
            let o: Vec<T> = a[2 * hd..3 * hd].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<T> = a[3 * hd..].iter().map(|&v| v.tanh()).collect();
            c = (0..hd).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<T> = c.iter().map(|&v| v.tanh()).collect();
            h = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(Step {
                i,
                f,
                o,
                g,
                c: c.clone(),
                tanh_c,
                h: h.clone(),
            });
        }
        let ov = self.off_v();
        let z = p[ov..ov + hd].iter().zip(&h).map(|(&v, &x)| v * x).sum::<T>() + p[self.off_c()];
        (steps, z)
    }

    pub fn score(&self, seq: &[Vec<T>]) -> T {
        sigmoid(self.forward(seq).1)
    }

    /// Log-loss of one sequence; accumulates its gradient into `grad`.
    fn backward(&self, seq: &[Vec<T>], y: u8, grad: &mut [T]) -> T {
        let (d, hd) = (self.input, self.hidden);
        let (ou, ob, ov, oc) = (self.off_u(), self.off_b(), self.off_v(), self.off_c());
        let p = &self.params;
        let (steps, z) = self.forward(seq);
        let loss = log_loss(z, y);
        let dz = sigmoid(z) - T::from_u8(y).expect("0 or 1");
        let last = &steps[steps.len() - 1].h;
        for k in 0..hd {
            grad[ov + k] += dz * last[k];
        }
        grad[oc] += dz;
        let mut dh: Vec<T> = p[ov..ov + hd].iter().map(|&v| dz * v).collect();
        let mut dc_next = vec![T::zero(); hd];
        let mut da = vec![T::zero(); 4 * hd];
        let zeros = vec![T::zero(); hd];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let (c_prev, h_prev) = if t == 0 {
                (&zeros, &zeros)
            } else {
                (&steps[t - 1].c, &steps[t - 1].h)
            };
            for k in 0..hd {
                let d_o = dh[k] * s.tanh_c[k];
                let dc = dc_next[k] + dh[k] * s.o[k] * (T::one() - s.tanh_c[k] * s.tanh_c[k]);
                da[k] = dc * s.g[k] * s.i[k] * (T::one() - s.i[k]);
                da[hd + k] = dc * c_prev[k] * s.f[k] * (T::one() - s.f[k]);
                da[2 * hd + k] = d_o * s.o[k] * (T::one() - s.o[k]);
                da[3 * hd + k] = dc * s.i[k] * (T::one() - s.g[k] * s.g[k]);
                dc_next[k] = dc * s.f[k];
            }
            let x = &seq[t];
            let mut dh_prev = vec![T::zero(); hd];
            for (r, &a) in da.iter().enumerate() {
                for (gw, &v) in grad[r * d..(r + 1) * d].iter_mut().zip(x) {
                    *gw += a * v;
                }
                let urow = ou + r * hd;
                for k in 0..hd {
                    grad[urow + k] += a * h_prev[k];
                    dh_prev[k] += a * p[urow + k];
                }
                grad[ob + r] += a;
            }
            dh = dh_prev;
        }
        loss
    }

    /// Mean log-loss over the batch and its gradient.
    pub fn loss_and_gradient(&self, seqs: &[Vec<Vec<T>>], y: &[u8]) -> (T, Vec<T>) {
        let len = self.params.len();
        let partial: Vec<(T, Vec<T>)> = seqs
            .par_chunks(CHUNK)
            .zip(y.par_chunks(CHUNK))
            .map(|(ss, ys)| {
                let mut g = vec![T::zero(); len];
                let loss = ss.iter().zip(ys).map(|(s, &l)| self.backward(s, l, &mut g)).sum::<T>();
                (loss, g)
            })
            .collect();
        let n = T::from_usize_lossy(seqs.len());
        let mut grad = vec![T::zero(); len];
        let mut loss = T::zero();
        for (l, g) in partial {
            loss += l;
            for (a, v) in grad.iter_mut().zip(g) {
                *a += v;
            }
        }
        grad.iter_mut().for_each(|v| *v /= n);
        (loss / n, grad)
    }

    pub fn mean_loss(&self, seqs: &[Vec<Vec<T>>], y: &[u8]) -> T {
        let total = seqs.iter().zip(y).map(|(s, &l)| log_loss(self.forward(s).1, l)).sum::<T>();
        total / T::from_usize_lossy(seqs.len())
    }
}

/// Full-batch gradient descent with backpropagation through time.
pub fn fit_lstm<T: Scalar>(
    seqs: &[Vec<Vec<T>>],
    y: &[u8],
    cfg: &LstmConfig,
    seed: u64,
) -> Result<(Lstm<T>, Trace), ModelError> {
    check_classes(y)?;
    let input = seqs[0].first().map_or(0, Vec::len);
    let mut rng = stream(seed, Purpose::Model, 0);
    let mut model = Lstm::zeros(input, cfg.hidden);
    let scale = cfg.init_scale;
    for v in model.params.iter_mut() {
        *v = T::lit(rng.random_range(-scale..=scale));
    }
    let ob = model.off_b();
    for k in 0..cfg.hidden {
        model.params[ob + cfg.hidden + k] = T::lit(cfg.forget_bias);
    }

    let (train_idx, valid_idx) = match cfg.early_stopping_patience {
        Some(_) => {
            let mut idx: Vec<usize> = (0..seqs.len()).collect();
            idx.shuffle(&mut rng);
            let k = ((seqs.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, seqs.len() - 1);
            let valid = idx.split_off(seqs.len() - k);
            (idx, valid)
        }
        None => ((0..seqs.len()).collect(), Vec::new()),
    };
    let pick = |idx: &[usize]| -> (Vec<Vec<Vec<T>>>, Vec<u8>) {
        (idx.iter().map(|&i| seqs[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
    };
    let (tx, ty) = pick(&train_idx);
    let (vx, vy) = pick(&valid_idx);

    let lr = T::lit(cfg.learning_rate);
    let clip = T::lit(cfg.clip_norm);
    let mut best: Option<(T, Lstm<T>)> = None;
    let mut since_best = 0;
    let mut last = None;
    let mut epochs = 0;
    for epoch in 0..cfg.epochs {
        let (loss, mut grad) = model.loss_and_gradient(&tx, &ty);
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                model: ModelKind::Lstm,
                epoch,
            });
        }
        last = Some(loss.to_f64_lossy());
        epochs = epoch + 1;
        let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
        if norm > clip {
            let factor = clip / norm;
            grad.iter_mut().for_each(|g| *g *= factor);
        }
        for (p, g) in model.params.iter_mut().zip(grad) {
            *p -= lr * g;
        }
        if let Some(patience) = cfg.early_stopping_patience {
            let v = model.mean_loss(&vx, &vy);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break;
                }
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok((model, (Some(epochs), last)))
}
