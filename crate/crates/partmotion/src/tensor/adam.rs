//! Adam optimizer with bias correction.

use super::ParamSet;

/// Per-parameter first/second moment buffers plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(lr: f32, params: &ParamSet) -> Self {
        let m = params.iter().map(|(_, t)| vec![0.0f32; t.numel()]).collect();
        let v = params.iter().map(|(_, t)| vec![0.0f32; t.numel()]).collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m,
            v,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update from the gradients currently held by `params`.
    /// Gradients are zeroed afterwards.
    pub fn step(&mut self, params: &mut ParamSet) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (idx, pid) in params.ids().enumerate().collect::<Vec<_>>() {
            let tensor = params.get_mut(pid);
            let Some(grad) = tensor.grad().map(|g| g.to_vec()) else {
                continue;
            };
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let data = tensor.data_mut();
            for i in 0..data.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            tensor.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn zero_grad_zero_moments_leaves_params_unchanged() {
        let mut params = ParamSet::new();
        let pid = params.register("w", Tensor::from_vec(vec![3], vec![1.0, -2.0, 3.0]).unwrap());
        let before = params.get(pid).data().to_vec();
        let mut adam = AdamState::new(1e-2, &params);
        adam.step(&mut params);
        assert_eq!(params.get(pid).data(), &before[..]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn single_scalar_step_matches_hand_formula() {
        let mut params = ParamSet::new();
        let pid = params.register("w", Tensor::from_vec(vec![1], vec![0.5]).unwrap());
        let g = 0.3f64;
        params.get_mut(pid).accumulate_grad(&[g as f32]);
        let (lr, b1, b2, eps) = (1e-2f64, 0.9f64, 0.999f64, 1e-8f64);
        let mut adam = AdamState::new(lr as f32, &params);
        adam.step(&mut params);
        // Closed-form single step: m = (1-b1) g, v = (1-b2) g^2, fully
        // bias-corrected back to m_hat = g, v_hat = g^2.
        let m_hat = (1.0 - b1) * g / (1.0 - b1);
        let v_hat = (1.0 - b2) * g * g / (1.0 - b2);
        let want = 0.5 - lr * m_hat / (v_hat.sqrt() + eps);
        let got = params.get(pid).data()[0] as f64;
        assert!((got - want).abs() < 1e-8, "got {got}, want {want}");
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut params = ParamSet::new();
            let pid = params.register(
                "w",
                Tensor::from_vec(vec![4], vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            );
            let mut adam = AdamState::new(3e-3, &params);
            for step in 0..25 {
                let grads: Vec<f32> = (0..4).map(|i| ((step * 4 + i) as f32).sin()).collect();
                params.get_mut(pid).accumulate_grad(&grads);
                adam.step(&mut params);
            }
            params.get(pid).data().to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
