//! AdamW, global gradient-norm clipping and the linear warmup/decay schedule.

use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Apply decay to biases and layer-norm parameters as well.
    pub decay_all: bool,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            decay_all: false,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.eps.is_nan() || self.eps <= 0.0 || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::config("eps must be positive and weight decay non-negative"));
        }
        Ok(())
    }
}

/// One scalar AdamW update. `t` is the 1-based step count.
/// Decay is decoupled: `θ ← θ − lr·(m̂/(√v̂+ε) + λθ)`.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update(
    theta: &mut f64,
    m: &mut f64,
    v: &mut f64,
    g: f64,
    t: u64,
    lr: f64,
    cfg: &AdamWConfig,
    decay: bool,
) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / (1.0 - cfg.beta1.powi(t as i32));
    let v_hat = *v / (1.0 - cfg.beta2.powi(t as i32));
    let mut step = m_hat / (v_hat.sqrt() + cfg.eps);
    if decay && cfg.weight_decay != 0.0 {
        step += cfg.weight_decay * *theta;
    }
    *theta -= lr * step;
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, store: &ParamStore) -> Result<Self> {
        config.validate()?;
        let zeros = || store.ids().map(|id| vec![0.0; store.value(id).numel()]).collect();
        Ok(Self {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one update to every trainable parameter using its accumulated grad.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        self.t += 1;
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            if !store.is_trainable(id) {
                continue;
            }
            let decay = self.config.decay_all || store.decays(id);
            let grad = store.grad(id).to_vec();
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let theta = store.value_mut(id).data_mut();
            for j in 0..theta.len() {
                adamw_update(
                    &mut theta[j],
                    &mut m[j],
                    &mut v[j],
                    grad[j],
                    self.t,
                    lr,
                    &self.config,
                    decay,
                );
            }
        }
    }
}

/// L2 norm over every trainable gradient.
pub fn global_grad_norm(store: &ParamStore) -> f64 {
    store
        .ids()
        .filter(|&id| store.is_trainable(id))
        .flat_map(|id| store.grad(id).iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Rescales all trainable grads so their joint L2 norm is at most `max_norm`.
/// Returns the factor applied (1 when no clipping happened).
pub fn clip_global_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = global_grad_norm(store);
    if norm <= max_norm || norm == 0.0 {
        return 1.0;
    }
    let s = max_norm / norm;
    let ids: Vec<ParamId> = store.ids().filter(|&id| store.is_trainable(id)).collect();
    for id in ids {
        store.grad_mut(id).iter_mut().for_each(|g| *g *= s);
    }
    s
}

/// Linear warmup from 0 to the peak rate over `warmup_steps`, then linear decay to 0 at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearWarmup {
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl LinearWarmup {
    /// `warmup_steps = floor(ratio × total)`.
    pub fn new(peak_lr: f64, warmup_ratio: f64, total_steps: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&warmup_ratio) {
            return Err(Error::config("warmup ratio must lie in [0, 1]"));
        }
        Ok(Self {
            peak_lr,
            warmup_steps: (warmup_ratio * total_steps as f64).floor() as u64,
            total_steps,
        })
    }

    /// Multiplier for 0-based update index `s`.
    pub fn multiplier(&self, s: u64) -> f64 {
        if s >= self.total_steps {
            if self.total_steps > 0 && s > self.total_steps {
                log::warn!("schedule queried at step {s} past its end ({})", self.total_steps);
            }
            return 0.0;
        }
        if s < self.warmup_steps {
            s as f64 / self.warmup_steps as f64
        } else {
            (self.total_steps - s) as f64 / (self.total_steps - self.warmup_steps) as f64
        }
    }

    pub fn lr(&self, s: u64) -> f64 {
        self.peak_lr * self.multiplier(s)
    }
}
