//! Adam with decoupled weight decay.

use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;
use crate::numeric::mlp::{Param, ParamGroup};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr_visual: f64,
    pub lr_other: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr_visual: 1e-3,
            lr_other: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// First/second moment accumulators for one parameter.
#[derive(Debug, Clone)]
pub struct Moments {
    pub m: Matrix,
    pub v: Matrix,
}

/// AdamW optimizer state. Moments are kept in the same order as the
/// parameter list handed to [`AdamW::step`], which must be stable.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub cfg: AdamConfig,
    pub step_count: u64,
    pub moments: Vec<Moments>,
}

impl AdamW {
    pub fn new(cfg: AdamConfig) -> Self {
        AdamW { cfg, step_count: 0, moments: Vec::new() }
    }

    /// One update over all parameters. A non-finite gradient aborts the step
    /// before any parameter is touched, naming the offender; gradients are
    /// zeroed after a successful update.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        for p in params.iter() {
            if !p.grad.all_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter '{}'", p.name)));
            }
        }
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| Moments {
                    m: Matrix::zeros(p.value.rows(), p.value.cols()),
                    v: Matrix::zeros(p.value.rows(), p.value.cols()),
                })
                .collect();
        } else if self.moments.len() != params.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} parameters, got {}",
                self.moments.len(),
                params.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for (p, mom) in params.iter_mut().zip(self.moments.iter_mut()) {
            let lr = match p.group {
                ParamGroup::Visual => self.cfg.lr_visual,
                ParamGroup::Other => self.cfg.lr_other,
            };
            let n = p.value.data().len();
            for i in 0..n {
                let g = p.grad.data()[i];
                let m = self.cfg.beta1 * mom.m.data()[i] + (1.0 - self.cfg.beta1) * g;
                let v = self.cfg.beta2 * mom.v.data()[i] + (1.0 - self.cfg.beta2) * g * g;
                mom.m.data_mut()[i] = m;
                mom.v.data_mut()[i] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                let w = p.value.data()[i];
                p.value.data_mut()[i] =
                    w - lr * (m_hat / (v_hat.sqrt() + self.cfg.eps) + self.cfg.weight_decay * w);
            }
            p.zero_grad();
        }
        Ok(())
    }
}
