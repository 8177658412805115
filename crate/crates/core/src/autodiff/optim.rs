use serde::{Deserialize, Serialize};

use super::{ParamSet, Real, Tensor};
use crate::error::{Error, Result};

/// Adam moment estimates for every tensor of a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamState<T> {
    /// Zeroed moments with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(params: &ParamSet<T>) -> Self {
        Self::with_hyperparams(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(params: &ParamSet<T>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || {
            params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect()
        };
        Self {
            first: zeros(),
            second: zeros(),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Real>(
    params: &mut ParamSet<T>,
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if grads.len() != params.len() || state.first.len() != params.len() {
        return Err(Error::shape(
            "adam_step",
            &[params.len()],
            &[grads.len(), state.first.len()],
        ));
    }
    for (p, g) in params.tensors().iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape("adam_step", p.shape(), g.shape()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(state.beta1), T::of(state.beta2));
    let c1 = T::of(1.0 / (1.0 - state.beta1.powi(t)));
    let c2 = T::of(1.0 / (1.0 - state.beta2.powi(t)));
    let lr = T::of(lr);
    let eps = T::of(state.eps);
    let one = T::one();
    for (((p, g), m), v) in params
        .tensors_mut()
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi * c1;
            let v_hat = *vi * c2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Step-decay schedule: constant for `warm_period` epochs, then multiplied by
/// `decay_factor` at the start of every following `period`-epoch block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub decay_factor: f64,
    pub period: usize,
    pub warm_period: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            base_lr: 1e-3,
            decay_factor: 0.2,
            period: 500,
            warm_period: 500,
        }
    }
}

impl LrSchedule {
    pub fn with_period(base_lr: f64, period: usize) -> Self {
        Self {
            base_lr,
            decay_factor: 0.2,
            period,
            warm_period: period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period == 0 || !(self.base_lr >= 0.0) || !(0.0..=1.0).contains(&self.decay_factor) {
            return Err(Error::Validation(format!("invalid schedule {self:?}")));
        }
        Ok(())
    }
}

/// Learning rate for 1-based `epoch`.
pub fn lr_at(epoch: usize, schedule: &LrSchedule) -> Result<f64> {
    if epoch < 1 {
        return Err(Error::Validation("epochs are numbered from 1".into()));
    }
    schedule.validate()?;
    let past = epoch.saturating_sub(schedule.warm_period);
    let decays = past.div_ceil(schedule.period);
    Ok(schedule.base_lr * schedule.decay_factor.powi(decays as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_boundaries() {
        let s = LrSchedule::default();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-15 * b.abs().max(1e-300);
        assert_eq!(lr_at(1, &s).unwrap(), 1e-3);
        assert_eq!(lr_at(500, &s).unwrap(), 1e-3);
        assert!(close(lr_at(501, &s).unwrap(), 2e-4));
        assert!(close(lr_at(1000, &s).unwrap(), 2e-4));
        assert!(close(lr_at(1001, &s).unwrap(), 4e-5));
        assert!(close(lr_at(1501, &s).unwrap(), 8e-6));
        assert!(close(lr_at(2000, &s).unwrap(), 8e-6));
        assert!(lr_at(0, &s).is_err());
    }

    #[test]
    fn schedule_is_non_increasing() {
        let s = LrSchedule::with_period(1e-3, 75);
        let lrs: Vec<f64> = (1..=300).map(|e| lr_at(e, &s).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(lrs[74], 1e-3);
        assert!(lrs[75] < 1e-3);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = ParamSet::<f64>::new();
        p.add("w", Tensor::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap());
        let before = p.clone();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::zeros(&[3])], &mut st, 1e-2).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        for g in [3.0, -0.25, 1e-3] {
            let mut p = ParamSet::<f64>::new();
            p.add("w", Tensor::scalar(1.0));
            let mut st = AdamState::new(&p);
            adam_step(&mut p, &[Tensor::scalar(g)], &mut st, 1e-3).unwrap();
            let delta = p.tensors()[0].data()[0] - 1.0;
            let expect = -1e-3 * g / (g.abs() + 1e-8);
            assert!((delta - expect).abs() < 1e-15, "g = {g}");
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = ParamSet::<f32>::new();
        p.add("w", Tensor::zeros(&[2]));
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &[Tensor::zeros(&[3])], &mut st, 1e-3).is_err());
    }
}
