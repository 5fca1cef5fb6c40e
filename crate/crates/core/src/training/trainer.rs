//! The training loop.
//!
//! Per epoch: a seeded shuffle of the training frames, batches of
//! `batch_size` (final partial batch included), one Adam step per batch;
//! then a full validation pass in inference mode. The checkpoint with
//! the lowest validation loss is retained; training stops after
//! `patience` consecutive epochs without strict improvement, or at
//! `max_epochs`.

use super::adam::AdamOptimizer;
use super::data::{assemble_batch, FrameSet};
use super::early_stopping::{EarlyStopping, StopDecision};
use super::log::{EpochStats, TrainingLog};
use super::loss::{batch_accuracy, compute_loss};
use super::{Result, TrainConfig, TrainError};
use crate::model::{save_network_bytes, CheckpointMeta, Network};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::time::Instant;

pub struct TrainOutcome {
    /// Checkpoint with the lowest validation loss.
    pub best_checkpoint: Vec<u8>,
    pub best_epoch: u32,
    pub best_val_loss: f64,
    /// State after the final epoch, for resumption.
    pub last_checkpoint: Vec<u8>,
    pub log: TrainingLog,
    pub stopped_early: bool,
}

/// Observer invoked after every epoch; the CLI uses it for progress
/// output and incremental log writes.
pub type EpochObserver<'a> = dyn FnMut(&EpochStats) + 'a;

pub fn train(
    network: &mut Network<f32>,
    train_set: &FrameSet,
    val_set: &FrameSet,
    config: &TrainConfig,
    mut observer: Option<&mut EpochObserver<'_>>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySplit("val"));
    }

    let mut optimizer = AdamOptimizer::new(config);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut log = TrainingLog::default();
    let mut best: Option<(u32, f64, Vec<u8>)> = None;
    let mut stopped_early = false;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.max_epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0f64;
        let mut acc_sum = 0.0f64;
        let mut seen = 0usize;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let frames: Vec<_> = chunk.iter().map(|&i| &train_set.frames[i]).collect();
            let (batch, labels) = assemble_batch(&frames, &network.config)?;
            let (logits, cache) = network.forward_train(batch)?;
            let (loss, grad) = compute_loss(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    step: step as u32,
                    diagnostic_checkpoint: save_network_bytes(
                        network,
                        &CheckpointMeta::new(network.config, epoch, f64::MAX),
                    ),
                });
            }
            network.zero_grads();
            network.backward(&cache, &grad);
            optimizer.step(network)?;
            loss_sum += loss as f64 * labels.len() as f64;
            acc_sum += batch_accuracy(&logits, &labels) * labels.len() as f64;
            seen += labels.len();
        }
        let train_loss = loss_sum / seen as f64;
        let train_acc = acc_sum / seen as f64;

        let (val_loss, val_acc) = validation_pass(network, val_set, config)?;
        let stats = EpochStats {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            wall_seconds: epoch_start.elapsed().as_secs_f64(),
        };
        if let Some(observer) = observer.as_deref_mut() {
            observer(&stats);
        }
        log.push(stats);

        let decision = stopper.observe(epoch, val_loss);
        if decision == StopDecision::Improved {
            let meta = CheckpointMeta::new(network.config, epoch, val_loss);
            best = Some((epoch, val_loss, save_network_bytes(network, &meta)));
        }
        if decision == StopDecision::Stop {
            stopped_early = true;
            break;
        }
    }

    let (best_epoch, best_val_loss, best_checkpoint) =
        best.expect("at least one epoch ran; the first always improves");
    let last_meta = CheckpointMeta::new(network.config, log.entries.len() as u32, best_val_loss);
    let last_checkpoint = save_network_bytes(network, &last_meta);
    Ok(TrainOutcome {
        best_checkpoint,
        best_epoch,
        best_val_loss,
        last_checkpoint,
        log,
        stopped_early,
    })
}

/// Mean loss and accuracy over the whole validation set, inference mode.
pub(crate) fn validation_pass(
    network: &Network<f32>,
    val_set: &FrameSet,
    config: &TrainConfig,
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0f64;
    let mut acc_sum = 0.0f64;
    let mut seen = 0usize;
    for chunk in val_set.frames.chunks(config.batch_size) {
        let frames: Vec<_> = chunk.iter().collect();
        let (batch, labels) = assemble_batch(&frames, &network.config)?;
        let logits = network.forward(&batch)?;
        let (loss, _) = compute_loss(&logits, &labels)?;
        loss_sum += loss as f64 * labels.len() as f64;
        acc_sum += batch_accuracy(&logits, &labels) * labels.len() as f64;
        seen += labels.len();
    }
    Ok((loss_sum / seen as f64, acc_sum / seen as f64))
}
