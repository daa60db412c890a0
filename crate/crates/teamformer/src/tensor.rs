use crate::TfError;

/// Per-agent spatial features, laid out `[agent][gy][gx][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    n: usize,
    g: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn zeros(n: usize, g: usize, d: usize) -> Self {
        FeatureTensor { n, g, d, data: vec![0.0; n * g * g * d] }
    }

    pub fn from_vec(n: usize, g: usize, d: usize, data: Vec<f64>) -> Result<Self, TfError> {
        if data.len() != n * g * g * d {
            return Err(TfError::ShapeMismatch {
                expected: vec![n, g, g, d],
                got: vec![data.len()],
            });
        }
        Ok(FeatureTensor { n, g, d, data })
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> usize {
        self.g
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.g, self.g, self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, a: usize, gy: usize, gx: usize) -> usize {
        ((a * self.g + gy) * self.g + gx) * self.d
    }

    /// Feature vector of agent `a` at grid `(gx, gy)`.
    pub fn token(&self, a: usize, gx: usize, gy: usize) -> &[f64] {
        let o = self.offset(a, gy, gx);
        &self.data[o..o + self.d]
    }

    pub fn token_mut(&mut self, a: usize, gx: usize, gy: usize) -> &mut [f64] {
        let o = self.offset(a, gy, gx);
        &mut self.data[o..o + self.d]
    }

    /// Agents reordered so that output agent `i` is input agent `perm[i]`.
    pub fn permute_agents(&self, perm: &[usize]) -> Self {
        let block = self.g * self.g * self.d;
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(&self.data[p * block..(p + 1) * block]);
        }
        FeatureTensor { data, ..*self }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
