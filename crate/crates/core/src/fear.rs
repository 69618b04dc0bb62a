//! Supervised fear model: the probability that a state lies within the fear
//! radius of a catastrophe.

use rand::Rng;

use crate::numerics::{bce_with_logit, AdamConfig, AdamState, Gradients, Head, MlpParams, NumericsError, Shape};

#[derive(Debug, Clone)]
pub struct FearModel {
    pub params: MlpParams,
    pub opt: AdamState,
}

impl FearModel {
    /// Same hidden layer as the Q-network, single logistic output.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, adam: AdamConfig, rng: &mut R) -> Self {
        let shape = Shape::new(input, hidden, 1);
        Self {
            params: MlpParams::init(shape, Head::Logistic, rng),
            opt: AdamState::new(shape, adam),
        }
    }

    pub fn zeroed(input: usize, hidden: usize, adam: AdamConfig) -> Self {
        let shape = Shape::new(input, hidden, 1);
        Self {
            params: MlpParams::zeros(shape, Head::Logistic),
            opt: AdamState::new(shape, adam),
        }
    }

    pub fn score(&self, s: &[f64]) -> Result<f64, NumericsError> {
        Ok(self.params.forward(s)?[0])
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn batch_loss_and_grad(&self, batch: &[(&[f64], f64)]) -> Result<(f64, Gradients), NumericsError> {
        let mut grads = Gradients::zeros(self.params.shape());
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for (s, y) in batch {
            let cache = self.params.forward_cached(s)?;
            let (l, dz) = bce_with_logit(cache.logits[0], *y)?;
            loss += l * scale;
            self.params.accumulate_from_logits(s, &cache, &[dz], scale, &mut grads)?;
        }
        Ok((loss, grads))
    }

    /// One Adam step on the batch's mean cross-entropy; returns the loss
    /// measured before the step.
    pub fn train_step(&mut self, batch: &[(&[f64], f64)]) -> Result<f64, NumericsError> {
        let (loss, grads) = self.batch_loss_and_grad(batch)?;
        if !batch.is_empty() {
            self.opt.step(&mut self.params, &grads)?;
        }
        Ok(loss)
    }
}
