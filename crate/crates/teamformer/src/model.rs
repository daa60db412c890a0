use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::layers::{sigmoid, softmax_in_place, EncoderLayer, Linear};
use crate::{FeatureTensor, TfError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub grid: usize,
    pub dim: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub hidden: usize,
    pub blocks: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { grid: 8, dim: 32, heads: 4, head_dim: 32, hidden: 128, blocks: 2 }
    }
}

/// One spatial encoder layer followed by one team encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub ise: EncoderLayer,
    pub tre: EncoderLayer,
}

/// Full parameter set. Nothing depends on the agent count.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub config: ModelConfig,
    pub blocks: Vec<BlockWeights>,
    /// `D → 1` logit per grid.
    pub region_head: Linear,
    /// `G²·D → 2` over the agent's flattened slice.
    pub point_head: Linear,
}

impl AttentionWeights {
    pub fn seeded(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ModelConfig { grid, dim, heads, head_dim, hidden, blocks } = config;
        let blocks = (0..blocks)
            .map(|_| BlockWeights {
                ise: EncoderLayer::random(dim, heads, head_dim, hidden, &mut rng),
                tre: EncoderLayer::random(dim, heads, head_dim, hidden, &mut rng),
            })
            .collect();
        AttentionWeights {
            config,
            blocks,
            region_head: Linear::random(dim, 1, &mut rng),
            point_head: Linear::random(grid * grid * dim, 2, &mut rng),
        }
    }

    fn check(&self, x: &FeatureTensor) -> Result<(), TfError> {
        let c = &self.config;
        if x.grid() != c.grid || x.dim() != c.dim || x.agents() == 0 {
            return Err(TfError::ShapeMismatch {
                expected: vec![x.agents().max(1), c.grid, c.grid, c.dim],
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// All blocks in sequence.
    pub fn encode(&self, x: &FeatureTensor) -> Result<FeatureTensor, TfError> {
        let mut y = x.clone();
        for b in &self.blocks {
            y = stf_block(&y, b)?;
        }
        self.check(&y)?;
        Ok(y)
    }

    pub fn forward(&self, x: &FeatureTensor, k: usize) -> Result<ActionOutput, TfError> {
        self.check(x)?;
        action_heads(&self.encode(x)?, k, self)
    }
}

fn check_layer(x: &FeatureTensor, w: &EncoderLayer) -> Result<(), TfError> {
    if x.dim() != w.dim() || x.agents() == 0 || x.grid() == 0 {
        return Err(TfError::ShapeMismatch {
            expected: vec![x.agents().max(1), x.grid().max(1), x.grid().max(1), w.dim()],
            got: x.shape().to_vec(),
        });
    }
    Ok(())
}

/// Each agent attends over its own `G²` grid vectors; agents never mix.
pub fn ise_forward(x: &FeatureTensor, w: &EncoderLayer) -> Result<FeatureTensor, TfError> {
    check_layer(x, w)?;
    let g = x.grid();
    let mut y = x.clone();
    for a in 0..x.agents() {
        let tokens: Vec<Vec<f64>> = (0..g * g).map(|i| x.token(a, i % g, i / g).to_vec()).collect();
        for (i, t) in w.forward(&tokens).into_iter().enumerate() {
            y.token_mut(a, i % g, i / g).copy_from_slice(&t);
        }
    }
    Ok(y)
}

/// At each grid, the `N` agent vectors attend to one another; grids never mix.
pub fn tre_forward(x: &FeatureTensor, w: &EncoderLayer) -> Result<FeatureTensor, TfError> {
    check_layer(x, w)?;
    let g = x.grid();
    let mut y = x.clone();
    for gy in 0..g {
        for gx in 0..g {
            let tokens: Vec<Vec<f64>> = (0..x.agents()).map(|a| x.token(a, gx, gy).to_vec()).collect();
            for (a, t) in w.forward(&tokens).into_iter().enumerate() {
                y.token_mut(a, gx, gy).copy_from_slice(&t);
            }
        }
    }
    Ok(y)
}

pub fn stf_block(x: &FeatureTensor, w: &BlockWeights) -> Result<FeatureTensor, TfError> {
    tre_forward(&ise_forward(x, &w.ise)?, &w.tre)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutput {
    /// Softmax over grids, index `gy·G + gx`.
    pub region: Vec<f64>,
    /// In-region offset, each component in (0, 1).
    pub point: (f64, f64),
}

impl ActionOutput {
    pub fn argmax_region(&self, g: usize) -> (usize, usize) {
        let i = self
            .region
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if *p > self.region[best] { i } else { best });
        (i % g, i / g)
    }
}

/// Heads over agent `k`'s `G×G` slice.
pub fn action_heads(x: &FeatureTensor, k: usize, w: &AttentionWeights) -> Result<ActionOutput, TfError> {
    if k >= x.agents() {
        return Err(TfError::IndexOutOfRange { index: k, len: x.agents() });
    }
    w.check(x)?;
    let g = x.grid();
    let mut flat = Vec::with_capacity(g * g * x.dim());
    let mut region = Vec::with_capacity(g * g);
    for gy in 0..g {
        for gx in 0..g {
            let t = x.token(k, gx, gy);
            region.push(w.region_head.forward(t)[0]);
            flat.extend_from_slice(t);
        }
    }
    softmax_in_place(&mut region);
    let p = w.point_head.forward(&flat);
    Ok(ActionOutput { region, point: (sigmoid(p[0]), sigmoid(p[1])) })
}

/// Attention score pairs per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopEstimate {
    /// Spatial (`N·(G²)²`) plus team (`G²·N²`) pairs.
    pub hierarchical: u64,
    /// One sequence of `N·G²` tokens: `(N·G²)² = N²G⁴` pairs.
    pub unified: u64,
    /// Multiply-adds per pair: one `D`-long dot product for the score and one
    /// `D`-long weighted sum of values, i.e. `2·D`.
    pub macs_per_pair: u64,
}

pub fn flop_estimate(n: u64, g: u64, d: u64) -> FlopEstimate {
    let g2 = g * g;
    FlopEstimate {
        hierarchical: n * n * g2 + n * g2 * g2,
        unified: n * n * g2 * g2,
        macs_per_pair: 2 * d,
    }
}
