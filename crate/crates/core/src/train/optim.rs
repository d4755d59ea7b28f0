use crate::model::{ParamInfo, Weights};
use crate::tensor::Tensor;

const BETA1: f32 = 0.9;
const BETA2: f32 = 0.999;
const EPS: f32 = 1e-8;

/// Adam with decoupled weight decay on weight tensors (biases and
/// batch-norm parameters are exempt).
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f32,
    weight_decay: f32,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(weights: &Weights, lr: f32, weight_decay: f32) -> Self {
        let zeros: Vec<Tensor> = weights.params().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Self {
            lr,
            weight_decay,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update. Parameters for which `frozen` holds are left untouched.
    pub fn step(&mut self, weights: &mut Weights, grads: &[Tensor], frozen: impl Fn(&ParamInfo) -> bool) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let decay = 1.0 - self.lr * self.weight_decay;
        for (k, (info, p)) in weights.params_mut().into_iter().enumerate() {
            if frozen(&info) {
                continue;
            }
            let shrink = if info.decays() { decay } else { 1.0 };
            let (m, v) = (self.m[k].data_mut(), self.v[k].data_mut());
            for (((w, &g), m), v) in p.data_mut().iter_mut().zip(grads[k].data()).zip(m).zip(v) {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let update = (*m / c1) / ((*v / c2).sqrt() + EPS);
                *w = *w * shrink - self.lr * update;
            }
        }
    }
}
