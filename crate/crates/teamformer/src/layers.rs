use rand::Rng;

/// Dense layer `y = W x + b`, `W` stored row-major as `out × inp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inp: usize,
    pub out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    /// Uniform in ±1/√fan_in for weights and biases.
    pub fn random(inp: usize, out: usize, rng: &mut impl Rng) -> Self {
        let a = 1.0 / (inp as f64).sqrt();
        Linear {
            inp,
            out,
            weight: (0..inp * out).map(|_| rng.random_range(-a..a)).collect(),
            bias: (0..out).map(|_| rng.random_range(-a..a)).collect(),
        }
    }

    pub fn zeros(inp: usize, out: usize) -> Self {
        Linear { inp, out, weight: vec![0.0; inp * out], bias: vec![0.0; out] }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inp);
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.inp..(o + 1) * self.inp];
            *yo = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.out];
        self.apply(x, &mut y);
        y
    }

    pub fn zero(&mut self) {
        self.weight.fill(0.0);
        self.bias.fill(0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub const LN_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(d: usize) -> Self {
        LayerNorm { gamma: vec![1.0; d], beta: vec![0.0; d] }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        x.iter()
            .zip(self.gamma.iter().zip(&self.beta))
            .map(|(v, (g, b))| (v - mean) * inv * g + b)
            .collect()
    }
}

/// tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // √(2/π)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Multi-head self-attention; `q`, `k`, `v` map `d → heads·head_dim`, `o` maps back.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub heads: usize,
    pub head_dim: usize,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

impl Attention {
    pub fn random(d: usize, heads: usize, head_dim: usize, rng: &mut impl Rng) -> Self {
        let inner = heads * head_dim;
        Attention {
            heads,
            head_dim,
            q: Linear::random(d, inner, rng),
            k: Linear::random(d, inner, rng),
            v: Linear::random(d, inner, rng),
            o: Linear::random(inner, d, rng),
        }
    }

    /// Attention over `tokens` (each of length `d`), returning one output per token.
    pub fn forward(&self, tokens: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let q: Vec<_> = tokens.iter().map(|t| self.q.forward(t)).collect();
        let k: Vec<_> = tokens.iter().map(|t| self.k.forward(t)).collect();
        let v: Vec<_> = tokens.iter().map(|t| self.v.forward(t)).collect();
        let n = tokens.len();
        let hd = self.head_dim;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut mixed = vec![vec![0.0; self.heads * hd]; n];
        let mut w = vec![0.0; n];
        for h in 0..self.heads {
            let r = h * hd..(h + 1) * hd;
            for i in 0..n {
                let qi = &q[i][r.clone()];
                for (j, wj) in w.iter_mut().enumerate() {
                    *wj = scale * qi.iter().zip(&k[j][r.clone()]).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax_in_place(&mut w);
                let out = &mut mixed[i][r.clone()];
                for (j, wj) in w.iter().enumerate() {
                    for (o, vv) in out.iter_mut().zip(&v[j][r.clone()]) {
                        *o += wj * vv;
                    }
                }
            }
        }
        mixed.iter().map(|m| self.o.forward(m)).collect()
    }
}

/// Pre-normalisation transformer encoder layer:
/// `y = x + Attn(LN₁ x)`, `z = y + W₂ GELU(W₁ LN₂ y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
}

impl EncoderLayer {
    pub fn random(d: usize, heads: usize, head_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        EncoderLayer {
            ln1: LayerNorm::new(d),
            attn: Attention::random(d, heads, head_dim, rng),
            ln2: LayerNorm::new(d),
            ff1: Linear::random(d, hidden, rng),
            ff2: Linear::random(hidden, d, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.ln1.gamma.len()
    }

    /// Zeroes every projection so the layer reduces to its residual path.
    pub fn zero_projections(&mut self) {
        for l in [&mut self.attn.q, &mut self.attn.k, &mut self.attn.v, &mut self.attn.o, &mut self.ff1, &mut self.ff2] {
            l.zero();
        }
    }

    pub fn forward(&self, tokens: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let normed: Vec<_> = tokens.iter().map(|t| self.ln1.forward(t)).collect();
        let att = self.attn.forward(&normed);
        let mut hidden = vec![0.0; self.ff1.out];
        let mut delta = vec![0.0; self.ff2.out];
        tokens
            .iter()
            .zip(att)
            .map(|(x, a)| {
                let y: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x + a).collect();
                self.ff1.apply(&self.ln2.forward(&y), &mut hidden);
                hidden.iter_mut().for_each(|h| *h = gelu(*h));
                self.ff2.apply(&hidden, &mut delta);
                y.iter().zip(&delta).map(|(y, d)| y + d).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_191_990_607_356).abs() < 1e-12);
        assert!((gelu(-1.0) + 0.158_808_009_392_644).abs() < 1e-12);
    }

    #[test]
    fn layer_norm_standardises() {
        let y = LayerNorm::new(4).forward(&[1.0, 2.0, 3.0, 4.0]);
        let m: f64 = y.iter().sum::<f64>() / 4.0;
        let v: f64 = y.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12);
        assert!((v - 1.25 / (1.25 + LN_EPS)).abs() < 1e-12);
    }

    #[test]
    fn single_token_attention_is_value_projection() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let a = Attention::random(4, 2, 3, &mut rng);
        let x = vec![0.3, -0.1, 0.7, 0.2];
        let expect = a.o.forward(&a.v.forward(&x));
        let got = a.forward(&[x]);
        for (g, e) in got[0].iter().zip(&expect) {
            assert!((g - e).abs() < 1e-14);
        }
    }
}
