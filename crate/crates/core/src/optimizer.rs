//! Adam with bias correction, and the per-epoch exponential learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DECAY_RATE: f64 = 0.025;

/// `eta(epoch) = eta0 * exp(-decay_rate * epoch)`, constant within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub eta0: f64,
    pub decay_rate: f64,
}

impl LrSchedule {
    pub fn new(eta0: f64) -> Result<Self> {
        if !(eta0.is_finite() && eta0 > 0.0) {
            return Err(Error::Config(format!("initial learning rate must be positive, got {eta0}")));
        }
        Ok(LrSchedule { eta0, decay_rate: DEFAULT_DECAY_RATE })
    }

    pub fn lr_at(&self, epoch: i64) -> Result<f64> {
        if epoch < 0 {
            return Err(Error::domain(format!("epoch must be nonnegative, got {epoch}")));
        }
        Ok(self.eta0 * (-self.decay_rate * epoch as f64).exp())
    }
}

pub fn lr_at(schedule: &LrSchedule, epoch: i64) -> Result<f64> {
    schedule.lr_at(epoch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            step_count: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One in-place update. Parameters are left untouched when any gradient
    /// entry is non-finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::domain(format!(
                "Adam state holds {} parameters, got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::domain(format!("learning rate must be positive, got {lr}")));
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence { what: "gradient", index });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            params[i] -= lr * (m / c1) / ((v / c2).sqrt() + self.epsilon);
        }
        Ok(())
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    state.step(params, grads, lr)
}
