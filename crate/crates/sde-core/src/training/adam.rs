//! Adaptive-moment optimizer and global-norm gradient clipping.

use crate::model::Model;

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    /// First/second moment per parameter tensor, in visit order.
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    pub fn step(&mut self, model: &mut Model) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (beta1, beta2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let moments = &mut self.moments;
        let mut idx = 0;
        model.for_each_param_mut(&mut |_, values, grads| {
            if moments.len() == idx {
                moments.push((vec![0.0; values.len()], vec![0.0; values.len()]));
            }
            let (m, v) = &mut moments[idx];
            for i in 0..values.len() {
                let g = grads[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
    }
}

/// Scale all gradients so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(model: &mut Model, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    model.for_each_param_mut(&mut |_, _, grads| {
        for g in grads.iter() {
            sq += g * g;
        }
    });
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        model.for_each_param_mut(&mut |_, _, grads| {
            for g in grads.iter_mut() {
                *g *= scale;
            }
        });
    }
    norm
}

/// Validation-plateau learning-rate schedule: after `patience` consecutive
/// epochs without improvement the rate is multiplied by `factor` and the
/// counter resets. Improvement also resets the counter.
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Self {
        PlateauScheduler {
            lr,
            factor,
            patience,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Feed one epoch's validation MSE; returns (lr, improved).
    pub fn observe(&mut self, val_mse: f64) -> (f64, bool) {
        let improved = val_mse < self.best;
        if improved {
            self.best = val_mse;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.factor;
                self.stale = 0;
            }
        }
        (self.lr, improved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_stale_epochs_cut_lr_to_eight_tenths() {
        let mut sched = PlateauScheduler::new(1e-3, 0.8, 5);
        sched.observe(1.0);
        for _ in 0..4 {
            let (lr, improved) = sched.observe(1.5);
            assert_eq!(lr, 1e-3);
            assert!(!improved);
        }
        let (lr, _) = sched.observe(1.5);
        assert!((lr - 8e-4).abs() < 1e-18);
    }

    #[test]
    fn lr_sequence_is_nonincreasing_and_exact_factor() {
        let mut sched = PlateauScheduler::new(1e-3, 0.8, 2);
        let mut prev = sched.lr;
        let mut lrs = vec![prev];
        for i in 0..20 {
            let val = if i % 7 == 0 { 1.0 / (i + 1) as f64 } else { 9.9 };
            let (lr, _) = sched.observe(val);
            assert!(lr <= prev);
            if lr < prev {
                assert!((lr / prev - 0.8).abs() < 1e-12);
            }
            prev = lr;
            lrs.push(lr);
        }
        assert!(lrs.last().unwrap() < &1e-3);
    }

    #[test]
    fn improvement_resets_the_counter() {
        let mut sched = PlateauScheduler::new(1e-3, 0.8, 3);
        sched.observe(1.0);
        sched.observe(2.0);
        sched.observe(2.0);
        sched.observe(0.5); // reset
        sched.observe(2.0);
        sched.observe(2.0);
        let (lr, _) = sched.observe(2.0);
        assert!((lr - 8e-4).abs() < 1e-18);
    }
}
