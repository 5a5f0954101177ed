use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::tensor::Parameter;
use crate::error::{Error, Result};

/// Plain SGD update: `value -= lr * grad` on trainable parameters, then every
/// gradient is zeroed.
pub fn sgd_step<'a>(params: impl IntoIterator<Item = &'a mut Parameter>, lr: f64) -> Result<()> {
    check_lr(lr)?;
    for p in params {
        if p.trainable() {
            let grad = p.grad().data().to_vec();
            for (v, g) in p.values_mut().iter_mut().zip(grad) {
                *v -= lr * g;
            }
        }
        p.zero_grad();
    }
    Ok(())
}

fn check_lr(lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLearningRate(lr))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub momentum: f64,
    pub weight_decay: f64,
}

/// SGD with optional momentum and L2 weight decay; both default to off.
#[derive(Clone, Debug, Default)]
pub struct Sgd {
    config: SgdConfig,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(config: SgdConfig) -> Self {
        Self {
            config,
            velocity: Vec::new(),
        }
    }

    /// Parameters must be passed in the same order on every call.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter>, lr: f64) -> Result<()> {
        if self.config.momentum == 0.0 && self.config.weight_decay == 0.0 {
            return sgd_step(params, lr);
        }
        check_lr(lr)?;
        for (slot, p) in params.into_iter().enumerate() {
            if self.velocity.len() <= slot {
                self.velocity.push(vec![0.0; p.value().len()]);
            }
            if p.trainable() {
                let grad = p.grad().data().to_vec();
                let vel = &mut self.velocity[slot];
                let SgdConfig {
                    momentum,
                    weight_decay,
                } = self.config;
                for ((v, g), m) in p.values_mut().iter_mut().zip(grad).zip(vel.iter_mut()) {
                    let g = g + weight_decay * *v;
                    *m = momentum * *m + g;
                    *v -= lr * *m;
                }
            }
            p.zero_grad();
        }
        Ok(())
    }
}

/// Cosine annealing from `initial_lr` down to `min_lr` over `total_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    initial_lr: f64,
    min_lr: f64,
    total_steps: usize,
}

impl LrSchedule {
    pub fn new(initial_lr: f64, min_lr: f64, total_steps: usize) -> Result<Self> {
        if !(initial_lr > 0.0 && initial_lr.is_finite()) {
            return Err(Error::InvalidSchedule(format!("initial_lr {initial_lr} must be positive")));
        }
        if !(0.0..=initial_lr).contains(&min_lr) {
            return Err(Error::InvalidSchedule(format!(
                "min_lr {min_lr} must lie in [0, {initial_lr}]"
            )));
        }
        if total_steps == 0 {
            return Err(Error::InvalidSchedule("total_steps must be positive".into()));
        }
        Ok(Self {
            initial_lr,
            min_lr,
            total_steps,
        })
    }

    pub fn initial_lr(&self) -> f64 {
        self.initial_lr
    }

    pub fn min_lr(&self) -> f64 {
        self.min_lr
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn cosine_lr(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        let progress = step as f64 / self.total_steps as f64;
        Ok(self.min_lr + 0.5 * (self.initial_lr - self.min_lr) * (1.0 + (PI * progress).cos()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::Tensor;

    #[test]
    fn sgd_single_step() {
        let mut p = Parameter::new(Tensor::scalar(1.0), true);
        p.accumulate(&Tensor::scalar(1.0)).unwrap();
        sgd_step([&mut p], 0.1).unwrap();
        assert_eq!(p.value().item(), 0.9);
        assert_eq!(p.grad().item(), 0.0);
    }

    #[test]
    fn zero_gradient_leaves_value() {
        let mut p = Parameter::new(Tensor::scalar(3.25), true);
        sgd_step([&mut p], 0.5).unwrap();
        assert_eq!(p.value().item(), 3.25);
    }

    #[test]
    fn rejects_non_positive_lr() {
        let mut p = Parameter::new(Tensor::scalar(1.0), true);
        assert!(matches!(sgd_step([&mut p], 0.0), Err(Error::InvalidLearningRate(_))));
        assert!(matches!(sgd_step([&mut p], -1.0), Err(Error::InvalidLearningRate(_))));
    }

    #[test]
    fn frozen_parameter_never_moves() {
        let mut p = Parameter::new(Tensor::scalar(2.0), false);
        for _ in 0..10 {
            p.accumulate(&Tensor::scalar(5.0)).unwrap();
            sgd_step([&mut p], 0.3).unwrap();
        }
        assert_eq!(p.value().item(), 2.0);
    }

    #[test]
    fn momentum_free_sgd_matches_plain_step() {
        let mut a = Parameter::new(Tensor::scalar(1.0), true);
        let mut b = a.clone();
        let mut opt = Sgd::new(SgdConfig {
            momentum: 0.0,
            weight_decay: 0.0,
        });
        for _ in 0..3 {
            a.accumulate(&Tensor::scalar(0.7)).unwrap();
            b.accumulate(&Tensor::scalar(0.7)).unwrap();
            sgd_step([&mut a], 0.1).unwrap();
            opt.step([&mut b], 0.1).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn cosine_endpoints() {
        let s = LrSchedule::new(0.01, 0.0, 100).unwrap();
        assert_eq!(s.cosine_lr(0).unwrap(), 0.01);
        assert!(s.cosine_lr(100).unwrap().abs() < 1e-18);
        assert!((s.cosine_lr(50).unwrap() - 0.005).abs() < 1e-15);
        assert!(matches!(s.cosine_lr(101), Err(Error::StepOutOfRange { .. })));
    }

    #[test]
    fn schedule_validation() {
        assert!(LrSchedule::new(0.01, 0.02, 10).is_err());
        assert!(LrSchedule::new(0.0, 0.0, 10).is_err());
        assert!(LrSchedule::new(0.01, 0.0, 0).is_err());
    }
}
