//! Adam optimizer over a flat parameter vector, plus global-norm clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "adam epsilon must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Adam with bias-corrected first and second moments. Moments are kept in
/// f64 regardless of the parameter precision policy.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, num_params: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                context: "adam parameter/gradient vector",
                expected: self.m.len(),
                found: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        self.t += 1;
        let b1t = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.cfg.beta1 * self.m[i] + (1.0 - self.cfg.beta1) * g;
            self.v[i] = self.cfg.beta2 * self.v[i] + (1.0 - self.cfg.beta2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
        }
        Ok(())
    }
}

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_in_sign_direction() {
        // With bias correction, step 1 gives m_hat = g, v_hat = g^2, so the
        // update is lr * g / (|g| + eps) ~= lr * sign(g).
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, 2);
        let mut params = vec![1.0, -2.0];
        adam.step(&mut params, &[0.5, -3.0]).unwrap();
        assert!((params[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((params[1] - (-2.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn converges_on_quadratic() {
        // Minimize (x - 3)^2 + (y + 1)^2.
        let mut adam = Adam::new(
            AdamConfig {
                lr: 0.05,
                ..AdamConfig::default()
            },
            2,
        );
        let mut p = vec![0.0, 0.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 3.0), 2.0 * (p[1] + 1.0)];
            adam.step(&mut p, &g).unwrap();
        }
        assert!((p[0] - 3.0).abs() < 1e-3, "x = {}", p[0]);
        assert!((p[1] + 1.0).abs() < 1e-3, "y = {}", p[1]);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut adam = Adam::new(AdamConfig::default(), 3);
        let mut p = vec![1.0, 2.0, 3.0];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut p = vec![0.0; 3];
        assert!(matches!(
            adam.step(&mut p, &[0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut g = vec![3.0, 4.0]; // norm 5
        let before = clip_global_norm(&mut g, 10.0);
        assert_eq!(before, 5.0);
        assert_eq!(g, vec![3.0, 4.0]);
        let before = clip_global_norm(&mut g, 2.5);
        assert_eq!(before, 5.0);
        assert!((g[0] - 1.5).abs() < 1e-12);
        assert!((g[1] - 2.0).abs() < 1e-12);
        let norm_after = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((norm_after - 2.5).abs() < 1e-12);
    }

    #[test]
    fn clip_handles_zero_vector() {
        let mut g = vec![0.0, 0.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        assert!(AdamConfig {
            lr: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AdamConfig {
            beta1: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
