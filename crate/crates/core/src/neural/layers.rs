use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Same-padded, stride-1 2-D convolution with a square odd kernel.
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize },
    Dense { inputs: usize, outputs: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m_weight: Tensor,
    pub v_weight: Tensor,
    pub m_bias: Tensor,
    pub v_bias: Tensor,
    pub step: u64,
}

/// Trainable layer: weights, bias and their Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub name: String,
    pub kind: LayerKind,
    /// `[out, in, k, k]` for conv, `[out, in]` for dense.
    pub weight: Tensor,
    pub bias: Tensor,
    pub adam: AdamMoments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerKind {
    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            LayerKind::Conv2d { in_ch, out_ch, kernel } => vec![out_ch, in_ch, kernel, kernel],
            LayerKind::Dense { inputs, outputs } => vec![outputs, inputs],
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerKind::Conv2d { out_ch, .. } => out_ch,
            LayerKind::Dense { outputs, .. } => outputs,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Conv2d { in_ch, kernel, .. } => in_ch * kernel * kernel,
            LayerKind::Dense { inputs, .. } => inputs,
        }
    }
}

impl LayerParams {
    /// Gaussian weights with std `1/√fan_in`, zero bias.
    pub fn new<R: Rng + ?Sized>(name: &str, kind: LayerKind, rng: &mut R) -> Result<Self> {
        if let LayerKind::Conv2d { kernel, .. } = kind {
            if kernel % 2 == 0 {
                return Err(Error::Dimension(format!("{name}: same padding needs an odd kernel, got {kernel}")));
            }
        }
        let std = 1.0 / (kind.fan_in() as f64).sqrt();
        let weight = init_gaussian(&kind.weight_shape(), std, rng)?;
        let bias = Tensor::zeros(&[kind.bias_len()]);
        Ok(Self::from_parts(name, kind, weight, bias))
    }

    pub fn from_parts(name: &str, kind: LayerKind, weight: Tensor, bias: Tensor) -> Self {
        let adam = AdamMoments {
            m_weight: Tensor::zeros(weight.shape()),
            v_weight: Tensor::zeros(weight.shape()),
            m_bias: Tensor::zeros(bias.shape()),
            v_bias: Tensor::zeros(bias.shape()),
            step: 0,
        };
        LayerParams { name: name.to_string(), kind, weight, bias, adam }
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// I.i.d. `N(0, std²)` tensor.
pub fn init_gaussian<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    if std == 0.0 {
        return Ok(Tensor::zeros(shape));
    }
    let dist = Normal::new(0.0, std).map_err(|e| Error::Config(format!("init std {std}: {e}")))?;
    Tensor::new(shape, (0..n).map(|_| dist.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedTree;

    #[test]
    fn init_is_reproducible() {
        let a = init_gaussian(&[3, 4], 0.5, &mut SeedTree::new(1).rng()).unwrap();
        let b = init_gaussian(&[3, 4], 0.5, &mut SeedTree::new(1).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_std_matches_target() {
        let t = init_gaussian(&[100_000], 0.3, &mut SeedTree::new(2).rng()).unwrap();
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let std = (t.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 0.3).abs() / 0.3 < 0.03, "{std}");
    }

    #[test]
    fn zero_std_gives_zeros() {
        let t = init_gaussian(&[5], 0.0, &mut SeedTree::new(3).rng()).unwrap();
        assert!(t.data().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn fan_in_scaling() {
        let l = LayerParams::new("c", LayerKind::Conv2d { in_ch: 4, out_ch: 16, kernel: 3 }, &mut SeedTree::new(0).rng()).unwrap();
        assert_eq!(l.weight.shape(), &[16, 4, 3, 3]);
        assert_eq!(l.kind.fan_in(), 36);
        assert!(l.bias.data().iter().all(|x| *x == 0.0));
        assert!(LayerParams::new("c", LayerKind::Conv2d { in_ch: 1, out_ch: 1, kernel: 2 }, &mut SeedTree::new(0).rng()).is_err());
    }
}
