use super::loss::rmse_loss;
use super::tensor::Tensor4;
use super::{CaeArch, CaeModel};
use crate::numerics::SeededRng;
use crate::{Error, Result};

// Sub-stream tags so init and batch order draw from unrelated sequences.
const INIT_STREAM: u64 = 0x4341_4520_494E_4954;
const SHUFFLE_STREAM: u64 = 0x4341_4520_5348_5546;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 },
        }
    }
}

// First/second moment accumulators, one pair per parameter buffer.
struct AdamState {
    mw: Vec<Vec<f64>>,
    vw: Vec<Vec<f64>>,
    mb: Vec<Vec<f64>>,
    vb: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    fn new(model: &CaeModel) -> AdamState {
        AdamState {
            mw: model.layers().iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            vw: model.layers().iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            mb: model.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            vb: model.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            step: 0,
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
) {
    let bc1 = 1.0 - beta1.powi(step as i32);
    let bc2 = 1.0 - beta2.powi(step as i32);
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        params[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
}

fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

/// Trains a fresh model on frames already scaled to [0, 1].
///
/// Initialization, shuffling, and batching all derive from `cfg.seed`, so a
/// repeated run is bit-identical. Returns the model and the per-epoch mean
/// loss (weighted by batch size).
pub fn train(arch: &CaeArch, data: &Tensor4, cfg: &TrainConfig) -> Result<(CaeModel, Vec<f64>)> {
    let (n, c, h, w) = data.shape();
    if n == 0 {
        return Err(Error::InvalidInput("training needs at least one frame".to_string()));
    }
    if (c, h, w) != (1, arch.height, arch.width) {
        return Err(Error::InvalidInput(format!(
            "training frames are ({c}, {h}, {w}), architecture wants (1, {}, {})",
            arch.height, arch.width
        )));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidInput(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".to_string()));
    }
    if let Some(v) = data.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Range(format!(
            "training value {v} outside [0, 1]; rescale frames before training"
        )));
    }

    let mut init_rng = SeededRng::derived(cfg.seed, INIT_STREAM);
    let mut model = CaeModel::new(arch, &mut init_rng)?;
    let mut order_rng = SeededRng::derived(cfg.seed, SHUFFLE_STREAM);
    let mut adam = AdamState::new(&model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch = data.select(batch_idx);
            let acts = model.forward_trace(&batch)?;
            let (loss, dloss) = rmse_loss(acts.last().expect("non-empty trace"), &batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += loss * batch_idx.len() as f64;

            let mut grad = dloss;
            let mut updates = Vec::with_capacity(model.layers().len());
            for (i, layer) in model.layers().iter().enumerate().rev() {
                let (dx, dw, db) = layer.backward(&acts[i], &acts[i + 1], &grad);
                updates.push((i, dw, db));
                grad = dx;
            }
            adam.step += 1;
            for (i, dw, db) in updates {
                let layer = &mut model.layers[i];
                match cfg.optimizer {
                    Optimizer::Sgd => {
                        sgd_update(&mut layer.weights, &dw, cfg.learning_rate);
                        sgd_update(&mut layer.bias, &db, cfg.learning_rate);
                    }
                    Optimizer::Adam { beta1, beta2, epsilon } => {
                        adam_update(
                            &mut layer.weights,
                            &dw,
                            &mut adam.mw[i],
                            &mut adam.vw[i],
                            cfg.learning_rate,
                            beta1,
                            beta2,
                            epsilon,
                            adam.step,
                        );
                        adam_update(
                            &mut layer.bias,
                            &db,
                            &mut adam.mb[i],
                            &mut adam.vb[i],
                            cfg.learning_rate,
                            beta1,
                            beta2,
                            epsilon,
                            adam.step,
                        );
                    }
                }
            }
        }
        let epoch_loss = loss_sum / n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(epoch_loss);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy_frame(res: usize, phase: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(res * res);
        for y in 0..res {
            for x in 0..res {
                let fy = y as f64 / res as f64;
                let fx = x as f64 / res as f64;
                v.push(0.5 + 0.4 * ((6.0 * fx + phase).sin() * (4.0 * fy).cos()));
            }
        }
        v
    }

    fn one_frame_tensor(res: usize) -> Tensor4 {
        super::super::frames_to_tensor(&[wavy_frame(res, 0.3)], res, res).unwrap()
    }

    #[test]
    fn single_frame_overfits_below_five_percent() {
        let arch = CaeArch::new(16, 12).unwrap();
        let data = one_frame_tensor(16);
        let cfg = TrainConfig {
            learning_rate: 5e-3,
            epochs: 400,
            batch_size: 1,
            seed: 4,
            ..TrainConfig::default()
        };
        let (model, history) = train(&arch, &data, &cfg).unwrap();
        let (final_loss, _) = rmse_loss(&model.reconstruct(&data).unwrap(), &data).unwrap();
        assert!(
            final_loss < 0.05,
            "overfit run should reach RMSE < 0.05, got {final_loss} (history tail {:?})",
            &history[history.len().saturating_sub(3)..]
        );
        assert!(final_loss < history[0]);
    }

    #[test]
    fn loss_history_has_one_entry_per_epoch() {
        let arch = CaeArch::new(16, 4).unwrap();
        let data = one_frame_tensor(16);
        let cfg = TrainConfig { epochs: 7, batch_size: 2, seed: 1, ..TrainConfig::default() };
        let (_, history) = train(&arch, &data, &cfg).unwrap();
        assert_eq!(history.len(), 7);
    }

    #[test]
    fn same_seed_gives_identical_history() {
        let arch = CaeArch::new(16, 6).unwrap();
        let frames: Vec<Vec<f64>> = (0..5).map(|i| wavy_frame(16, 0.2 * i as f64)).collect();
        let data = super::super::frames_to_tensor(&frames, 16, 16).unwrap();
        let cfg = TrainConfig { epochs: 4, batch_size: 2, seed: 99, ..TrainConfig::default() };
        let (ma, ha) = train(&arch, &data, &cfg).unwrap();
        let (mb, hb) = train(&arch, &data, &cfg).unwrap();
        assert_eq!(ha, hb);
        let za = ma.encode(&data).unwrap();
        let zb = mb.encode(&data).unwrap();
        assert_eq!(za.values(), zb.values());
    }

    #[test]
    fn sgd_on_one_sample_is_non_increasing_early() {
        let arch = CaeArch::new(16, 8).unwrap();
        let data = one_frame_tensor(16);
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 1,
            seed: 3,
            optimizer: Optimizer::Sgd,
        };
        let (_, history) = train(&arch, &data, &cfg).unwrap();
        for pair in history.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "loss increased under small-step SGD: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let arch = CaeArch::new(16, 4).unwrap();
        let cfg = TrainConfig::default();
        let empty = Tensor4::zeros(0, 1, 16, 16);
        assert!(train(&arch, &empty, &cfg).is_err());

        let mut out_of_range = one_frame_tensor(16);
        out_of_range.values_mut()[3] = 1.5;
        assert!(matches!(train(&arch, &out_of_range, &cfg), Err(Error::Range(_))));

        let bad_lr = TrainConfig { learning_rate: 0.0, ..cfg };
        assert!(train(&arch, &one_frame_tensor(16), &bad_lr).is_err());
    }

    #[test]
    fn training_reduces_reconstruction_error() {
        let arch = CaeArch::new(16, 10).unwrap();
        let frames: Vec<Vec<f64>> = (0..6).map(|i| wavy_frame(16, 0.5 * i as f64)).collect();
        let data = super::super::frames_to_tensor(&frames, 16, 16).unwrap();
        let mut rng = SeededRng::derived(42, INIT_STREAM);
        let fresh = CaeModel::new(&arch, &mut rng).unwrap();
        let (before, _) = rmse_loss(&fresh.reconstruct(&data).unwrap(), &data).unwrap();
        let cfg = TrainConfig { epochs: 60, batch_size: 3, seed: 42, ..TrainConfig::default() };
        let (trained, _) = train(&arch, &data, &cfg).unwrap();
        let (after, _) = rmse_loss(&trained.reconstruct(&data).unwrap(), &data).unwrap();
        assert!(after < before, "training should improve RMSE: {before} -> {after}");
    }
}
