//! Flat weight file.
//!
//! ```text
//! b"STFW"  u32 version (=1)
//! u32 × 6  grid, dim, heads, head_dim, hidden, blocks
//! f64 × *  parameters, little-endian, in this order:
//!          for each block: ISE layer, then TRE layer, each as
//!            ln1.gamma ln1.beta  q.W q.b  k.W k.b  v.W v.b  o.W o.b
//!            ln2.gamma ln2.beta  ff1.W ff1.b  ff2.W ff2.b
//!          region_head.W region_head.b  point_head.W point_head.b
//! ```
//! Matrices are row-major `out × in`.

use std::io::{Read, Write};
use std::path::Path;

use crate::layers::{EncoderLayer, LayerNorm, Linear};
use crate::model::{AttentionWeights, BlockWeights, ModelConfig};
use crate::TfError;

const MAGIC: &[u8; 4] = b"STFW";
const VERSION: u32 = 1;

fn layer_params(l: &mut EncoderLayer) -> Vec<&mut Vec<f64>> {
    let a = &mut l.attn;
    vec![
        &mut l.ln1.gamma, &mut l.ln1.beta,
        &mut a.q.weight, &mut a.q.bias, &mut a.k.weight, &mut a.k.bias,
        &mut a.v.weight, &mut a.v.bias, &mut a.o.weight, &mut a.o.bias,
        &mut l.ln2.gamma, &mut l.ln2.beta,
        &mut l.ff1.weight, &mut l.ff1.bias, &mut l.ff2.weight, &mut l.ff2.bias,
    ]
}

impl AttentionWeights {
    /// Every parameter buffer in file order.
    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.extend(layer_params(&mut b.ise));
            out.extend(layer_params(&mut b.tre));
        }
        out.extend([
            &mut self.region_head.weight,
            &mut self.region_head.bias,
            &mut self.point_head.weight,
            &mut self.point_head.bias,
        ]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.clone().params_mut().iter().map(|p| p.len()).sum()
    }

    fn zeros(c: ModelConfig) -> Self {
        let layer = || {
            let attn = crate::layers::Attention {
                heads: c.heads,
                head_dim: c.head_dim,
                q: Linear::zeros(c.dim, c.heads * c.head_dim),
                k: Linear::zeros(c.dim, c.heads * c.head_dim),
                v: Linear::zeros(c.dim, c.heads * c.head_dim),
                o: Linear::zeros(c.heads * c.head_dim, c.dim),
            };
            EncoderLayer {
                ln1: LayerNorm::new(c.dim),
                attn,
                ln2: LayerNorm::new(c.dim),
                ff1: Linear::zeros(c.dim, c.hidden),
                ff2: Linear::zeros(c.hidden, c.dim),
            }
        };
        AttentionWeights {
            config: c,
            blocks: (0..c.blocks).map(|_| BlockWeights { ise: layer(), tre: layer() }).collect(),
            region_head: Linear::zeros(c.dim, 1),
            point_head: Linear::zeros(c.grid * c.grid * c.dim, 2),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = self.config;
        let mut out = MAGIC.to_vec();
        for v in [VERSION as usize, c.grid, c.dim, c.heads, c.head_dim, c.hidden, c.blocks] {
            out.extend((v as u32).to_le_bytes());
        }
        for p in self.clone().params_mut() {
            for v in p.iter() {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TfError> {
        let bad = |m: &str| TfError::BadWeightFile(m.to_string());
        if bytes.len() < 32 || &bytes[..4] != MAGIC {
            return Err(bad("missing header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        if word(0) != VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let config = ModelConfig {
            grid: word(1),
            dim: word(2),
            heads: word(3),
            head_dim: word(4),
            hidden: word(5),
            blocks: word(6),
        };
        if config.grid == 0 || config.dim == 0 || config.heads == 0 || config.head_dim == 0 || config.blocks > 1024 {
            return Err(bad("degenerate configuration"));
        }
        let body = &bytes[32..];
        let mut w = Self::zeros(config);
        let total: usize = w.params_mut().iter().map(|p| p.len()).sum();
        if body.len() != total * 8 {
            return Err(bad(&format!("expected {} parameters, found {} bytes", total, body.len())));
        }
        let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for p in w.params_mut() {
            for v in p.iter_mut() {
                *v = vals.next().unwrap();
            }
        }
        Ok(w)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TfError> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TfError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}
