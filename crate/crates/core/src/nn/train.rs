use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_grads, mean_loss, Adam, Dropout, EpochRecord, ModelParams, NnError};
use crate::dataset::TrainingExample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: Dropout,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub hidden_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 64,
            dropout: Dropout::default(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 200,
            patience: 20,
            seed: 0,
            hidden_size: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be finite and non-negative", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.hidden_size == 0 {
            return bad("hidden size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} {b} outside [0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        self.dropout.validate()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn labelled(examples: &[TrainingExample]) -> impl Iterator<Item = (&[f32], usize)> {
    examples.iter().map(|e| (e.x.as_slice(), e.class()))
}

/// Mini-batch Adam training with early stopping on validation loss.
///
/// Epoch 0 in the history is the untrained network. Everything random
/// (initial weights, batch order, dropout masks) derives from `cfg.seed`.
pub fn train(train: &[TrainingExample], val: &[TrainingExample], cfg: &TrainConfig) -> Result<TrainOutcome, NnError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(NnError::EmptyPartition("training"));
    }
    if val.is_empty() {
        return Err(NnError::EmptyPartition("validation"));
    }
    let input_size = train[0].x.len();
    if let Some(e) = train.iter().chain(val).find(|e| e.x.len() != input_size) {
        return Err(NnError::Shape(format!("example {} has {} inputs, expected {input_size}", e.origin_vote_id, e.x.len())));
    }

    let mut params = ModelParams::init(input_size, cfg.hidden_size, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt = Adam::new(&params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    let initial_train = mean_loss(&params, labelled(train))?;
    let initial_val = mean_loss(&params, labelled(val))?;
    let mut history = vec![EpochRecord { epoch: 0, train_loss: initial_train, val_loss: initial_val }];
    let mut best = (initial_val, 0usize, params.clone());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f32], usize)> = chunk.iter().map(|&i| (train[i].x.as_slice(), train[i].class())).collect();
            let (loss, grads) = loss_and_grads(&params, &batch, Some(&cfg.dropout), &mut rng).map_err(|e| match e {
                NnError::NonFinite(_) => NnError::Diverged { epoch, loss: f64::NAN },
                e => e,
            })?;
            if !loss.is_finite() {
                return Err(NnError::Diverged { epoch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            opt.step(&mut params, &grads);
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = match mean_loss(&params, labelled(val)) {
            Ok(l) if l.is_finite() => l,
            Ok(l) => return Err(NnError::Diverged { epoch, loss: l }),
            Err(NnError::NonFinite(_)) => return Err(NnError::Diverged { epoch, loss: f64::NAN }),
            Err(e) => return Err(e),
        };
        history.push(EpochRecord { epoch, train_loss, val_loss });
        debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");

        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        } else if epoch - best.1 >= cfg.patience {
            info!("early stop at epoch {epoch}; best epoch {} (val {:.6})", best.1, best.0);
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome { params: best.2, history, best_epoch: best.1, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::VoteCode;

    // Tiny separable problem: class follows the sign of x[0] - x[1].
    fn toy(n: usize, offset: usize) -> Vec<TrainingExample> {
        (0..n)
            .map(|k| {
                let i = k + offset;
                let a = ((i * 7919) % 97) as f32 / 97.0 - 0.5;
                let b = ((i * 104_729) % 89) as f32 / 89.0 - 0.5;
                let label = if a > b { VoteCode::Left } else { VoteCode::Right };
                TrainingExample { x: vec![a, b, a * b, 1.0], label, origin_vote_id: format!("v{i}"), swapped: false }
            })
            .collect()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { learning_rate: 0.05, batch_size: 8, hidden_size: 16, max_epochs: 40, patience: 40, dropout: Dropout::NONE, seed: 3, ..TrainConfig::default() }
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let out = train(&toy(200, 0), &toy(50, 1000), &small_cfg()).unwrap();
        let (_, acc) = super::super::evaluate(&out.params, &toy(100, 5000)).unwrap();
        assert!(acc > 0.9, "accuracy {acc}");
        assert!(out.history.last().unwrap().train_loss < out.history[0].train_loss);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = TrainConfig { max_epochs: 5, dropout: Dropout::default(), ..small_cfg() };
        let a = train(&toy(64, 0), &toy(16, 500), &cfg).unwrap();
        let b = train(&toy(64, 0), &toy(16, 500), &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
        let c = train(&toy(64, 0), &toy(16, 500), &TrainConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn zero_learning_rate_returns_initial_params() {
        let cfg = TrainConfig { learning_rate: 0.0, max_epochs: 3, ..small_cfg() };
        let out = train(&toy(32, 0), &toy(8, 100), &cfg).unwrap();
        assert_eq!(out.params, ModelParams::init(4, 16, cfg.seed));
        assert!(out.history.windows(2).all(|w| w[0].val_loss == w[1].val_loss));
    }

    #[test]
    fn early_stopping_keeps_best_epoch() {
        let cfg = TrainConfig { learning_rate: 0.0, max_epochs: 50, patience: 3, ..small_cfg() };
        let out = train(&toy(16, 0), &toy(8, 100), &cfg).unwrap();
        assert!(out.stopped_early);
        assert_eq!(out.best_epoch, 0);
        assert_eq!(out.history.len(), 4);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainConfig { learning_rate: 1e300, max_epochs: 20, ..small_cfg() };
        match train(&toy(16, 0), &toy(8, 100), &cfg) {
            Err(NnError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn preconditions() {
        let cfg = small_cfg();
        assert!(matches!(train(&[], &toy(4, 0), &cfg), Err(NnError::EmptyPartition(_))));
        assert!(matches!(train(&toy(4, 0), &[], &cfg), Err(NnError::EmptyPartition(_))));
        for bad in [
            TrainConfig { batch_size: 0, ..cfg.clone() },
            TrainConfig { learning_rate: f64::NAN, ..cfg.clone() },
            TrainConfig { adam_beta2: 1.0, ..cfg.clone() },
            TrainConfig { dropout: Dropout { input: 1.0, ..Dropout::NONE }, ..cfg.clone() },
        ] {
            assert!(matches!(train(&toy(4, 0), &toy(4, 9), &bad), Err(NnError::Config(_))));
        }
    }
}
