use super::{LayerGrad, LayerParams, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Default::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update of a layer.
pub fn adam_step(layer: &mut LayerParams, grad: &LayerGrad, cfg: &AdamConfig) {
    layer.adam.step += 1;
    let t = layer.adam.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let moments = &mut layer.adam;
    update(&mut layer.weight, &grad.weight, &mut moments.m_weight, &mut moments.v_weight, cfg, c1, c2);
    update(&mut layer.bias, &grad.bias, &mut moments.m_bias, &mut moments.v_bias, cfg, c1, c2);
}

fn update(p: &mut Tensor, g: &Tensor, m: &mut Tensor, v: &mut Tensor, cfg: &AdamConfig, c1: f64, c2: f64) {
    let it = p
        .data_mut()
        .iter_mut()
        .zip(g.data())
        .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
    for ((w, g), (m, v)) in it {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *w -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
    }
}
