//! Single-layer post-norm transformer encoder read out at the `[CLS]` position.
//!
//! Only the position-0 hidden state is ever consumed, so the forward pass
//! computes the query, attention row, feed-forward block and layer norms for
//! that position alone. Keys and values are computed for every real token;
//! padding never enters the computation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{add_assign, dot, Parameters, Tensor};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub vocab_size: usize,
    pub d: usize,
    pub max_len: usize,
    /// Attention heads; `d` must be a multiple of this.
    #[serde(default = "one_head")]
    pub heads: usize,
}

fn one_head() -> usize {
    1
}

impl EncoderShape {
    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub shape: EncoderShape,
    pub token_embeddings: Tensor,
    pub position_embeddings: Tensor,
    pub segment_embeddings: Tensor,
    pub w_query: Tensor,
    pub b_query: Tensor,
    pub w_key: Tensor,
    pub b_key: Tensor,
    pub w_value: Tensor,
    pub b_value: Tensor,
    pub w_out: Tensor,
    pub b_out: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub w_ff1: Tensor,
    pub b_ff1: Tensor,
    pub w_ff2: Tensor,
    pub b_ff2: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
}

impl Parameters for EncoderParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("token_embeddings", &self.token_embeddings),
            ("position_embeddings", &self.position_embeddings),
            ("segment_embeddings", &self.segment_embeddings),
            ("w_query", &self.w_query),
            ("b_query", &self.b_query),
            ("w_key", &self.w_key),
            ("b_key", &self.b_key),
            ("w_value", &self.w_value),
            ("b_value", &self.b_value),
            ("w_out", &self.w_out),
            ("b_out", &self.b_out),
            ("ln1_gain", &self.ln1_gain),
            ("ln1_bias", &self.ln1_bias),
            ("w_ff1", &self.w_ff1),
            ("b_ff1", &self.b_ff1),
            ("w_ff2", &self.w_ff2),
            ("b_ff2", &self.b_ff2),
            ("ln2_gain", &self.ln2_gain),
            ("ln2_bias", &self.ln2_bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("token_embeddings", &mut self.token_embeddings),
            ("position_embeddings", &mut self.position_embeddings),
            ("segment_embeddings", &mut self.segment_embeddings),
            ("w_query", &mut self.w_query),
            ("b_query", &mut self.b_query),
            ("w_key", &mut self.w_key),
            ("b_key", &mut self.b_key),
            ("w_value", &mut self.w_value),
            ("b_value", &mut self.b_value),
            ("w_out", &mut self.w_out),
            ("b_out", &mut self.b_out),
            ("ln1_gain", &mut self.ln1_gain),
            ("ln1_bias", &mut self.ln1_bias),
            ("w_ff1", &mut self.w_ff1),
            ("b_ff1", &mut self.b_ff1),
            ("w_ff2", &mut self.w_ff2),
            ("b_ff2", &mut self.b_ff2),
            ("ln2_gain", &mut self.ln2_gain),
            ("ln2_bias", &mut self.ln2_bias),
        ]
    }
}

/// Token ids and segment ids of the non-padding prefix of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderInput<'a> {
    pub ids: &'a [usize],
    pub segments: &'a [u8],
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    ids: Vec<usize>,
    segments: Vec<u8>,
    x: Vec<Vec<f64>>,
    q: Vec<f64>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    attended: Vec<f64>,
    ln1_hat: Vec<f64>,
    ln1_inv_std: f64,
    h: Vec<f64>,
    ff_pre: Vec<f64>,
    ff_act: Vec<f64>,
    ln2_hat: Vec<f64>,
    ln2_inv_std: f64,
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let t = (C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Returns (normalized, 1/std); the caller applies gain and bias.
fn layer_norm(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    (x.iter().map(|v| (v - mean) * inv).collect(), inv)
}

fn layer_norm_backward(dy_hat: &[f64], hat: &[f64], inv_std: f64) -> Vec<f64> {
    let n = hat.len() as f64;
    let mean_d = dy_hat.iter().sum::<f64>() / n;
    let mean_dh = dy_hat.iter().zip(hat).map(|(a, b)| a * b).sum::<f64>() / n;
    dy_hat
        .iter()
        .zip(hat)
        .map(|(d, h)| inv_std * (d - mean_d - h * mean_dh))
        .collect()
}

fn affine(hat: &[f64], gain: &Tensor, bias: &Tensor) -> Vec<f64> {
    hat.iter()
        .zip(&gain.data)
        .zip(&bias.data)
        .map(|((h, g), b)| h * g + b)
        .collect()
}

impl EncoderParams {
    /// Random initialization: embeddings and projections ~ N(0, 1/sqrt(fan_in)),
    /// layer-norm gains 1, biases 0.
    pub fn init(shape: EncoderShape, rng: &mut impl Rng) -> Self {
        let d = shape.d;
        let h = 4 * d;
        let proj = 1.0 / (d as f64).sqrt();
        let emb = 0.5;
        let mut segment_embeddings = Tensor::normal(1, d, emb, rng);
        let opposite: Vec<f64> = segment_embeddings.data.iter().map(|v| -v).collect();
        segment_embeddings.rows = 2;
        segment_embeddings.data.extend(opposite);
        EncoderParams {
            shape,
            token_embeddings: Tensor::normal(shape.vocab_size, d, emb, rng),
            position_embeddings: Tensor::normal(shape.max_len, d, 0.1 * emb, rng),
            segment_embeddings,
            w_query: Tensor::normal(d, d, proj, rng),
            b_query: Tensor::zeros(1, d),
            w_key: Tensor::normal(d, d, proj, rng),
            b_key: Tensor::zeros(1, d),
            w_value: Tensor::normal(d, d, proj, rng),
            b_value: Tensor::zeros(1, d),
            w_out: Tensor::normal(d, d, proj, rng),
            b_out: Tensor::zeros(1, d),
            ln1_gain: Tensor::filled(1, d, 1.0),
            ln1_bias: Tensor::zeros(1, d),
            w_ff1: Tensor::normal(d, h, proj, rng),
            b_ff1: Tensor::zeros(1, h),
            w_ff2: Tensor::normal(h, d, 1.0 / (h as f64).sqrt(), rng),
            b_ff2: Tensor::zeros(1, d),
            ln2_gain: Tensor::filled(1, d, 1.0),
            ln2_bias: Tensor::zeros(1, d),
        }
    }

    pub fn d(&self) -> usize {
        self.shape.d
    }

    /// Checks that every tensor has the dimensions implied by `shape`.
    pub fn validate(&self) -> Result<(), String> {
        let EncoderShape {
            vocab_size,
            d,
            max_len,
            heads,
        } = self.shape;
        if max_len < 8 {
            return Err(format!("max_len {max_len} < 8"));
        }
        if heads == 0 || d % heads != 0 {
            return Err(format!("d = {d} is not a multiple of heads = {heads}"));
        }
        let expect: [(&str, usize, usize); 19] = [
            ("token_embeddings", vocab_size, d),
            ("position_embeddings", max_len, d),
            ("segment_embeddings", 2, d),
            ("w_query", d, d),
            ("b_query", 1, d),
            ("w_key", d, d),
            ("b_key", 1, d),
            ("w_value", d, d),
            ("b_value", 1, d),
            ("w_out", d, d),
            ("b_out", 1, d),
            ("ln1_gain", 1, d),
            ("ln1_bias", 1, d),
            ("w_ff1", d, 4 * d),
            ("b_ff1", 1, 4 * d),
            ("w_ff2", 4 * d, d),
            ("b_ff2", 1, d),
            ("ln2_gain", 1, d),
            ("ln2_bias", 1, d),
        ];
        for ((name, t), (ename, r, c)) in self.tensors().into_iter().zip(expect) {
            debug_assert_eq!(name, ename);
            if t.rows != r || t.cols != c || t.data.len() != r * c {
                return Err(format!("{name}: expected {r}x{c}, found {}x{}", t.rows, t.cols));
            }
            if !t.is_finite() {
                return Err(format!("{name}: non-finite values"));
            }
        }
        Ok(())
    }

    fn embed(&self, id: usize, pos: usize, seg: u8) -> Vec<f64> {
        let mut x = self.token_embeddings.row(id).to_vec();
        add_assign(&mut x, self.position_embeddings.row(pos));
        add_assign(&mut x, self.segment_embeddings.row(seg as usize));
        x
    }

    /// Hidden state at position 0.
    pub fn forward(&self, input: &EncoderInput<'_>) -> Vec<f64> {
        self.forward_cached(input).0
    }

    pub fn forward_cached(&self, input: &EncoderInput<'_>) -> (Vec<f64>, EncoderCache) {
        let n = input.ids.len();
        assert!(n >= 1 && n <= self.shape.max_len, "sequence length {n} outside 1..={}", self.shape.max_len);
        assert_eq!(n, input.segments.len());
        let d = self.shape.d;
        let scale = 1.0 / (self.shape.head_dim() as f64).sqrt();

        let x: Vec<Vec<f64>> = (0..n)
            .map(|t| self.embed(input.ids[t], t, input.segments[t]))
            .collect();
        let mut q = self.w_query.left_mul(&x[0]);
        add_assign(&mut q, &self.b_query.data);
        let mut k = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for xt in &x {
            let mut kt = self.w_key.left_mul(xt);
            add_assign(&mut kt, &self.b_key.data);
            let mut vt = self.w_value.left_mul(xt);
            add_assign(&mut vt, &self.b_value.data);
            k.push(kt);
            v.push(vt);
        }
        let dh = self.shape.head_dim();
        let mut alpha = Vec::with_capacity(self.shape.heads);
        let mut attended = vec![0.0; d];
        for h in 0..self.shape.heads {
            let r = h * dh..(h + 1) * dh;
            let scores: Vec<f64> = k.iter().map(|kt| dot(&q[r.clone()], &kt[r.clone()]) * scale).collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let a: Vec<f64> = exps.iter().map(|e| e / z).collect();
            for (at, vt) in a.iter().zip(&v) {
                for (o, vi) in attended[r.clone()].iter_mut().zip(&vt[r.clone()]) {
                    *o += at * vi;
                }
            }
            alpha.push(a);
        }
        let mut r1 = self.w_out.left_mul(&attended);
        add_assign(&mut r1, &self.b_out.data);
        add_assign(&mut r1, &x[0]);
        let (ln1_hat, ln1_inv_std) = layer_norm(&r1);
        let h = affine(&ln1_hat, &self.ln1_gain, &self.ln1_bias);

        let mut ff_pre = self.w_ff1.left_mul(&h);
        add_assign(&mut ff_pre, &self.b_ff1.data);
        let ff_act: Vec<f64> = ff_pre.iter().map(|&u| gelu(u)).collect();
        let mut r2 = self.w_ff2.left_mul(&ff_act);
        add_assign(&mut r2, &self.b_ff2.data);
        add_assign(&mut r2, &h);
        let (ln2_hat, ln2_inv_std) = layer_norm(&r2);
        let out = affine(&ln2_hat, &self.ln2_gain, &self.ln2_bias);

        let cache = EncoderCache {
            ids: input.ids.to_vec(),
            segments: input.segments.to_vec(),
            x,
            q,
            k,
            v,
            alpha,
            attended,
            ln1_hat,
            ln1_inv_std,
            h,
            ff_pre,
            ff_act,
            ln2_hat,
            ln2_inv_std,
        };
        (out, cache)
    }

    /// Accumulates parameter gradients for upstream gradient `d_out` into `grads`.
    pub fn backward(&self, cache: &EncoderCache, d_out: &[f64], grads: &mut EncoderParams) {
        let d = self.shape.d;
        let dh = self.shape.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        // output layer norm
        let d_hat2: Vec<f64> = d_out.iter().zip(&self.ln2_gain.data).map(|(a, g)| a * g).collect();
        grads.ln2_gain.add_row(0, &mul(d_out, &cache.ln2_hat));
        grads.ln2_bias.add_row(0, d_out);
        let d_r2 = layer_norm_backward(&d_hat2, &cache.ln2_hat, cache.ln2_inv_std);

        // feed-forward with residual
        grads.w_ff2.add_outer(&cache.ff_act, &d_r2);
        grads.b_ff2.add_row(0, &d_r2);
        let d_act = self.w_ff2.right_mul(&d_r2);
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&cache.ff_pre)
            .map(|(g, &u)| g * gelu_grad(u))
            .collect();
        grads.w_ff1.add_outer(&cache.h, &d_pre);
        grads.b_ff1.add_row(0, &d_pre);
        let mut d_h = self.w_ff1.right_mul(&d_pre);
        add_assign(&mut d_h, &d_r2);

        // attention layer norm
        let d_hat1: Vec<f64> = d_h.iter().zip(&self.ln1_gain.data).map(|(a, g)| a * g).collect();
        grads.ln1_gain.add_row(0, &mul(&d_h, &cache.ln1_hat));
        grads.ln1_bias.add_row(0, &d_h);
        let d_r1 = layer_norm_backward(&d_hat1, &cache.ln1_hat, cache.ln1_inv_std);

        let n = cache.x.len();
        let mut dx: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
        add_assign(&mut dx[0], &d_r1);

        // output projection
        grads.w_out.add_outer(&cache.attended, &d_r1);
        grads.b_out.add_row(0, &d_r1);
        let d_att = self.w_out.right_mul(&d_r1);

        // attention rows, one per head
        let mut d_q = vec![0.0; d];
        let mut d_k = vec![vec![0.0; d]; n];
        let mut d_v = vec![vec![0.0; d]; n];
        for (h, alpha) in cache.alpha.iter().enumerate() {
            let r = h * dh..(h + 1) * dh;
            let d_alpha: Vec<f64> = cache.v.iter().map(|vt| dot(&d_att[r.clone()], &vt[r.clone()])).collect();
            let mean = dot(alpha, &d_alpha);
            for t in 0..n {
                let ds = alpha[t] * (d_alpha[t] - mean) * scale;
                for j in r.clone() {
                    d_q[j] += ds * cache.k[t][j];
                    d_k[t][j] = ds * cache.q[j];
                    d_v[t][j] = alpha[t] * d_att[j];
                }
            }
        }
        for t in 0..n {
            grads.w_key.add_outer(&cache.x[t], &d_k[t]);
            grads.b_key.add_row(0, &d_k[t]);
            grads.w_value.add_outer(&cache.x[t], &d_v[t]);
            grads.b_value.add_row(0, &d_v[t]);
            add_assign(&mut dx[t], &self.w_key.right_mul(&d_k[t]));
            add_assign(&mut dx[t], &self.w_value.right_mul(&d_v[t]));
        }
        grads.w_query.add_outer(&cache.x[0], &d_q);
        grads.b_query.add_row(0, &d_q);
        add_assign(&mut dx[0], &self.w_query.right_mul(&d_q));

        // embeddings
        for (t, g) in dx.iter().enumerate() {
            grads.token_embeddings.add_row(cache.ids[t], g);
            grads.position_embeddings.add_row(t, g);
            grads.segment_embeddings.add_row(cache.segments[t] as usize, g);
        }
    }
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}
