use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{FeatureTensor, TfError};

/// `out × inp × 3 × 3` kernel, padding 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3 {
    pub inp: usize,
    pub out: usize,
    pub stride: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    /// 2×2 max-pool after the ReLU.
    pub pool: bool,
}

impl Conv3 {
    fn random(inp: usize, out: usize, stride: usize, pool: bool, rng: &mut impl Rng) -> Self {
        let a = 1.0 / ((inp * 9) as f64).sqrt();
        Conv3 {
            inp,
            out,
            stride,
            weight: (0..out * inp * 9).map(|_| rng.random_range(-a..a)).collect(),
            bias: (0..out).map(|_| rng.random_range(-a..a)).collect(),
            pool,
        }
    }

    fn out_side(&self, n: usize) -> usize {
        (n + 2 - 3) / self.stride + 1
    }

    /// `x` is `inp × h × w`; returns `(out × h' × w', h', w')`.
    fn forward(&self, x: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
        let (oh, ow) = (self.out_side(h), self.out_side(w));
        let mut y = vec![0.0; self.out * oh * ow];
        for o in 0..self.out {
            let plane = &mut y[o * oh * ow..(o + 1) * oh * ow];
            plane.fill(self.bias[o]);
            for c in 0..self.inp {
                let src = &x[c * h * w..(c + 1) * h * w];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let k = self.weight[((o * self.inp + c) * 3 + ky) * 3 + kx];
                        for oy in 0..oh {
                            let sy = (oy * self.stride + ky) as isize - 1;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let row = &src[sy as usize * w..(sy as usize + 1) * w];
                            let dst = &mut plane[oy * ow..(oy + 1) * ow];
                            for (ox, d) in dst.iter_mut().enumerate() {
                                let sx = (ox * self.stride + kx) as isize - 1;
                                if sx >= 0 && sx < w as isize {
                                    *d += k * row[sx as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        y.iter_mut().for_each(|v| *v = v.max(0.0));
        if !self.pool {
            return (y, oh, ow);
        }
        let (ph, pw) = (oh / 2, ow / 2);
        let mut p = vec![f64::NEG_INFINITY; self.out * ph * pw];
        for o in 0..self.out {
            for py in 0..ph {
                for px in 0..pw {
                    let m = &mut p[(o * ph + py) * pw + px];
                    for dy in 0..2 {
                        for dx in 0..2 {
                            *m = m.max(y[(o * oh + 2 * py + dy) * ow + 2 * px + dx]);
                        }
                    }
                }
            }
        }
        (p, ph, pw)
    }
}

/// Fixed random convolution stack: widths 32, 64, 128, 64, 32, kernel 3,
/// strides 1, 1, 1, 1, 2, ReLU, 2×2 max-pool after all but the last layer.
/// A 240² input comes out as 32 × 8 × 8.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnExtractor {
    pub layers: Vec<Conv3>,
}

const WIDTHS: [usize; 5] = [32, 64, 128, 64, 32];
const STRIDES: [usize; 5] = [1, 1, 1, 1, 2];

impl CnnExtractor {
    pub fn seeded(in_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inp = in_channels;
        let layers = WIDTHS
            .iter()
            .zip(STRIDES)
            .enumerate()
            .map(|(i, (&out, s))| {
                let l = Conv3::random(inp, out, s, i + 1 < WIDTHS.len(), &mut rng);
                inp = out;
                l
            })
            .collect();
        CnnExtractor { layers }
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].inp
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out)
    }

    /// Output side for a square input of side `n`.
    pub fn output_side(&self, n: usize) -> usize {
        self.layers.iter().fold(n, |n, l| {
            let o = l.out_side(n);
            if l.pool { o / 2 } else { o }
        })
    }

    /// `x` is channel-major `C × side × side`; returns `(out × g × g, g)`.
    pub fn extract(&self, x: &[f64], side: usize) -> Result<(Vec<f64>, usize), TfError> {
        let need = self.in_channels() * side * side;
        if x.len() != need || self.output_side(side) == 0 {
            return Err(TfError::ShapeMismatch { expected: vec![self.in_channels(), side, side], got: vec![x.len()] });
        }
        let (mut y, mut h, mut w) = (x.to_vec(), side, side);
        for l in &self.layers {
            (y, h, w) = l.forward(&y, h, w);
        }
        Ok((y, h))
    }

    /// One channel-major input per agent, stacked into `N × G × G × D`.
    pub fn features(&self, inputs: &[Vec<f64>], side: usize) -> Result<FeatureTensor, TfError> {
        let g = self.output_side(side);
        let d = self.out_channels();
        let mut t = FeatureTensor::zeros(inputs.len(), g, d);
        for (a, x) in inputs.iter().enumerate() {
            let (y, _) = self.extract(x, side)?;
            for gy in 0..g {
                for gx in 0..g {
                    let tok = t.token_mut(a, gx, gy);
                    for (c, v) in tok.iter_mut().enumerate() {
                        *v = y[(c * g + gy) * g + gx];
                    }
                }
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_the_stack() {
        let c = CnnExtractor::seeded(6, 0);
        assert_eq!(c.output_side(240), 8);
        assert_eq!(c.output_side(480), 15);
        assert_eq!(c.out_channels(), 32);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = Conv3::random(2, 3, 2, false, &mut rng);
        let (h, w) = (5, 4);
        let x: Vec<f64> = (0..2 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (y, oh, ow) = l.forward(&x, h, w);
        assert_eq!((oh, ow), (3, 2));
        for o in 0..3 {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = l.bias[o];
                    for c in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let (sy, sx) = ((oy * 2 + ky) as i64 - 1, (ox * 2 + kx) as i64 - 1);
                                if (0..h as i64).contains(&sy) && (0..w as i64).contains(&sx) {
                                    s += l.weight[((o * 2 + c) * 3 + ky) * 3 + kx] * x[(c * h + sy as usize) * w + sx as usize];
                                }
                            }
                        }
                    }
                    assert!((y[(o * oh + oy) * ow + ox] - s.max(0.0)).abs() < 1e-12);
                }
            }
        }
    }
}
