use super::tensor::ParamSlot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            momentum: 0.9,
            weight_decay: 0.001,
        }
    }
}

/// One SGD step with momentum and L2 weight decay, then clears gradients:
/// `v <- mu*v + (g + wd*w)`, `w <- w - lr*v`.
pub fn sgd_step<'a>(params: impl IntoIterator<Item = &'a mut ParamSlot>, lr: f64, cfg: SgdConfig) {
    for p in params {
        let ParamSlot {
            value,
            grad,
            momentum,
            ..
        } = p;
        for ((w, g), v) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data_mut().iter_mut())
            .zip(momentum.data_mut().iter_mut())
        {
            *v = cfg.momentum * *v + (*g + cfg.weight_decay * *w);
            *w -= lr * *v;
            *g = 0.0;
        }
    }
}

/// Linear warm-up, constant hold, then polynomial decay to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub total_epochs: usize,
    pub warmup_frac: f64,
    pub hold_frac: f64,
    pub decay_power: f64,
}

impl LrSchedule {
    pub fn new(peak_lr: f64, total_epochs: usize) -> Self {
        LrSchedule {
            peak_lr,
            total_epochs,
            warmup_frac: 0.05,
            hold_frac: 0.45,
            decay_power: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_lr > 0.0) || self.total_epochs == 0 {
            return Err(Error::InvalidConfig(format!(
                "schedule needs peak_lr > 0 and total_epochs >= 1 (got {}, {})",
                self.peak_lr, self.total_epochs
            )));
        }
        if self.warmup_frac < 0.0 || self.hold_frac < 0.0 || self.warmup_frac + self.hold_frac > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "warmup_frac + hold_frac must lie in [0, 1] (got {} + {})",
                self.warmup_frac, self.hold_frac
            )));
        }
        Ok(())
    }

    /// Learning rate at a (fractional) epoch in `[0, total_epochs]`.
    pub fn lr_at(&self, epoch: f64) -> Result<f64> {
        let total = self.total_epochs as f64;
        if !(0.0..=total).contains(&epoch) {
            return Err(Error::InvalidArgument(format!(
                "epoch {epoch} outside [0, {total}]"
            )));
        }
        let warm_end = self.warmup_frac * total;
        let decay_start = (self.warmup_frac + self.hold_frac) * total;
        let lr = if epoch <= warm_end && warm_end > 0.0 {
            self.peak_lr * epoch / warm_end
        } else if epoch <= decay_start {
            self.peak_lr
        } else {
            let frac = (epoch - decay_start) / (total - decay_start);
            self.peak_lr * (1.0 - frac).max(0.0).powf(self.decay_power)
        };
        Ok(lr)
    }

    /// Rate used throughout epoch `index` (0-based): the schedule sampled at
    /// the middle of the epoch.
    pub fn lr_for_epoch(&self, index: usize) -> Result<f64> {
        self.lr_at(index as f64 + 0.5)
    }
}
