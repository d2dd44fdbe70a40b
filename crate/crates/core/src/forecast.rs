//! Walk-forward LSTM forecasting of next-week price increments.
//!
//! Training is full-batch Adam on mean squared error with early stopping on
//! validation MSE; everything runs in f64 and is deterministic for a fixed
//! (seed, data, config) triple. Walk-forward evaluation refits on a stride,
//! each refit seeing only rows whose labels were realized before the
//! prediction week, with refit seeds keyed by week so that truncating future
//! data cannot change past predictions.

use std::io::{Read, Write};
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{Adam, LstmNetwork, LstmSpec};
use crate::market::{FeatureId, FeatureRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub layers: usize,
    /// Input window length in weeks.
    pub window: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            layers: 2,
            window: 8,
            learning_rate: 0.01,
            epochs: 80,
            batch_size: 16,
            patience: 12,
            clip_norm: 1.0,
            seed: 7,
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden == 0
            || self.layers == 0
            || self.window == 0
            || self.epochs == 0
            || self.batch_size == 0
            || self.learning_rate <= 0.0
            || self.clip_norm <= 0.0
        {
            return Err(Error::InvalidArgument(
                "model config fields must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Contiguous chronological row ranges: train, then validation, then test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl SplitPlan {
    /// Fractional split over `n` rows (defaults 60/20/20).
    pub fn fractional(n: usize, train_frac: f64, validation_frac: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&train_frac)
            || !(0.0..1.0).contains(&validation_frac)
            || train_frac + validation_frac >= 1.0
        {
            return Err(Error::InvalidArgument(
                "split fractions must be positive and sum below 1".into(),
            ));
        }
        let n_train = (train_frac * n as f64).floor() as usize;
        let n_val = (validation_frac * n as f64).floor() as usize;
        Ok(Self {
            train: 0..n_train,
            validation: n_train..n_train + n_val,
            test: n_train + n_val..n,
        })
    }
}

/// Z-score transform fitted on the training split; zero-variance features are
/// dropped and recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub kept: Vec<bool>,
}

impl Normalization {
    pub fn fit(rows: &[&FeatureRow], features: &[FeatureId]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot fit normalization on an empty split".into(),
            ));
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; features.len()];
        let mut stds = vec![0.0; features.len()];
        for (j, &f) in features.iter().enumerate() {
            let mean = rows.iter().map(|r| r.value(f)).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|r| {
                    let d = r.value(f) - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            means[j] = mean;
            stds[j] = var.sqrt();
        }
        let kept: Vec<bool> = stds.iter().map(|&s| s > 1e-12).collect();
        if kept.iter().all(|&k| !k) {
            return Err(Error::ZeroVariance(
                "every feature is constant on the training split".into(),
            ));
        }
        Ok(Self { means, stds, kept })
    }

    pub fn input_width(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    /// Normalizes one raw feature vector, dropping masked columns.
    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .filter(|(j, _)| self.kept[*j])
            .map(|(j, &v)| (v - self.means[j]) / self.stds[j])
            .collect()
    }
}

/// A trained forecaster: network weights plus the exact preprocessing needed
/// to reproduce its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub features: Vec<FeatureId>,
    pub normalization: Normalization,
    pub network: LstmNetwork,
    pub best_validation_mse: f64,
}

impl TrainedModel {
    /// Features dropped for zero training variance.
    pub fn dropped_features(&self) -> Vec<FeatureId> {
        self.features
            .iter()
            .zip(&self.normalization.kept)
            .filter(|(_, &kept)| !kept)
            .map(|(&f, _)| f)
            .collect()
    }

    /// Predicts from a raw window of exactly `config.window` rows, each with
    /// one value per model feature.
    pub fn predict_window(&self, raw_window: &[Vec<f64>]) -> Result<f64> {
        if raw_window.len() != self.config.window {
            return Err(Error::InvalidArgument(format!(
                "expected a window of {} rows, got {}",
                self.config.window,
                raw_window.len()
            )));
        }
        for row in raw_window {
            if row.len() != self.features.len() {
                return Err(Error::InvalidArgument(format!(
                    "expected {} features per row, got {}",
                    self.features.len(),
                    row.len()
                )));
            }
        }
        let normalized: Vec<Vec<f64>> = raw_window
            .iter()
            .map(|row| self.normalization.apply(row))
            .collect();
        self.network.predict(&normalized)
    }

    /// Predicts the target of `rows[label_row]` from the window ending there.
    pub fn predict_at(&self, rows: &[FeatureRow], label_row: usize) -> Result<f64> {
        let window = raw_window(rows, &self.features, self.config.window, label_row)?;
        self.predict_window(&window)
    }
}

fn raw_window(
    rows: &[FeatureRow],
    features: &[FeatureId],
    window: usize,
    label_row: usize,
) -> Result<Vec<Vec<f64>>> {
    if label_row + 1 < window || label_row >= rows.len() {
        return Err(Error::InsufficientHistory {
            needed: window,
            available: label_row + 1,
        });
    }
    Ok(rows[label_row + 1 - window..=label_row]
        .iter()
        .map(|r| r.values(features))
        .collect())
}

/// (label row index, raw window, target) for every row with a defined target
/// and enough context.
fn labeled_windows(
    rows: &[FeatureRow],
    features: &[FeatureId],
    window: usize,
    label_rows: Range<usize>,
) -> Vec<(usize, Vec<Vec<f64>>, f64)> {
    label_rows
        .filter(|&r| r + 1 >= window && r < rows.len())
        .filter_map(|r| {
            rows[r].target.map(|y| {
                (
                    r,
                    raw_window(rows, features, window, r).expect("bounds checked"),
                    y,
                )
            })
        })
        .collect()
}

/// Trains on the split's training windows with early stopping on validation
/// MSE, returning the best-validation parameters.
pub fn train(
    rows: &[FeatureRow],
    split: &SplitPlan,
    config: &ModelConfig,
    features: &[FeatureId],
) -> Result<TrainedModel> {
    config.validate()?;
    let train_rows: Vec<&FeatureRow> = rows[split.train.clone().clamp_to(rows.len())]
        .iter()
        .collect();
    if train_rows.len() < config.window + 1 {
        return Err(Error::InsufficientHistory {
            needed: config.window + 1,
            available: train_rows.len(),
        });
    }
    let normalization = Normalization::fit(&train_rows, features)?;
    let train_windows = labeled_windows(rows, features, config.window, split.train.clone());
    let validation_windows =
        labeled_windows(rows, features, config.window, split.validation.clone());
    fit(
        &normalization,
        &train_windows,
        &validation_windows,
        config,
        features,
    )
}

trait ClampRange {
    fn clamp_to(self, len: usize) -> Range<usize>;
}

impl ClampRange for Range<usize> {
    fn clamp_to(self, len: usize) -> Range<usize> {
        self.start.min(len)..self.end.min(len)
    }
}

fn fit(
    normalization: &Normalization,
    train_windows: &[(usize, Vec<Vec<f64>>, f64)],
    validation_windows: &[(usize, Vec<Vec<f64>>, f64)],
    config: &ModelConfig,
    features: &[FeatureId],
) -> Result<TrainedModel> {
    if train_windows.is_empty() {
        return Err(Error::InsufficientHistory {
            needed: config.window + 1,
            available: 0,
        });
    }
    let normalize = |set: &[(usize, Vec<Vec<f64>>, f64)]| -> Vec<(Vec<Vec<f64>>, f64)> {
        set.iter()
            .map(|(_, window, y)| {
                (
                    window.iter().map(|row| normalization.apply(row)).collect(),
                    *y,
                )
            })
            .collect()
    };
    let train_batch = normalize(train_windows);
    let validation_batch = normalize(validation_windows);

    let spec = LstmSpec::new(normalization.input_width(), config.hidden, config.layers);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut network = LstmNetwork::random_init(spec, &mut rng);
    let mut optimizer = Adam::new(config.learning_rate, config.clip_norm, spec.param_count());

    let score = |net: &LstmNetwork| -> Result<f64> {
        if validation_batch.is_empty() {
            net.batch_loss(&train_batch)
        } else {
            net.batch_loss(&validation_batch)
        }
    };

    let mut best_params = network.params.clone();
    let mut best_score = score(&network)?;
    let mut stall = 0;
    let mut order: Vec<usize> = (0..train_batch.len()).collect();
    let mut minibatch: Vec<(Vec<Vec<f64>>, f64)> = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        shuffle(&mut order, &mut rng);
        for chunk in order.chunks(config.batch_size) {
            minibatch.clear();
            minibatch.extend(chunk.iter().map(|&i| train_batch[i].clone()));
            let (loss, mut grads) = network.batch_loss_and_grads(&minibatch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    lr: config.learning_rate,
                });
            }
            optimizer.update(&mut network.params, &mut grads);
        }
        let current = score(&network)?;
        if current < best_score {
            best_score = current;
            best_params.clone_from(&network.params);
            stall = 0;
        } else {
            stall += 1;
            if stall > config.patience {
                break;
            }
        }
    }
    network.params = best_params;

    Ok(TrainedModel {
        config: *config,
        features: features.to_vec(),
        normalization: normalization.clone(),
        network,
        best_validation_mse: best_score,
    })
}

/// One walk-forward prediction: the week whose price increment is predicted,
/// the actual increment when realized, and the model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub week: usize,
    pub label_row: usize,
    pub actual: Option<f64>,
    pub predicted: f64,
}

/// Fisher-Yates with the training RNG; keeps epoch order deterministic.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

/// SplitMix64-style stream derivation for refit and retrain seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Walk-forward evaluation over the test range: the model predicting row r's
/// target saw only labels realized at rows < r, refitting every `stride`
/// rows (`usize::MAX` for a single static fit). Rows without enough window
/// context are skipped.
pub fn walk_forward_predict(
    rows: &[FeatureRow],
    split: &SplitPlan,
    config: &ModelConfig,
    features: &[FeatureId],
    stride: usize,
) -> Result<Vec<Prediction>> {
    config.validate()?;
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    let test = split.test.clone().clamp_to(rows.len());
    let mut predictions = Vec::new();
    let mut model: Option<TrainedModel> = None;

    for r in test.clone() {
        let due = (r - test.start) % stride == 0;
        if due || model.is_none() {
            model = Some(fit_before(rows, r, config, features)?);
        }
        if r + 1 < config.window {
            // Not enough context to form a window; noted and skipped.
            continue;
        }
        let model_ref = model.as_ref().expect("fitted above");
        let predicted = model_ref.predict_at(rows, r)?;
        predictions.push(Prediction {
            week: rows[r].week + 1,
            label_row: r,
            actual: rows[r].target,
            predicted,
        });
    }
    Ok(predictions)
}

/// Fits a model using only rows whose labels are realized before predicting
/// row r's target: windows labeled at rows 0..r. The trailing fifth of those
/// windows serves as the early-stopping validation set. The refit seed is
/// derived from (config seed, week of row r), so it is invariant under
/// truncation of later data.
fn fit_before(
    rows: &[FeatureRow],
    r: usize,
    config: &ModelConfig,
    features: &[FeatureId],
) -> Result<TrainedModel> {
    let available = labeled_windows(rows, features, config.window, 0..r);
    if available.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: available.len(),
        });
    }
    let val_len = (available.len() / 5).max(1);
    let (train_part, val_part) = available.split_at(available.len() - val_len);

    let last_train_row = train_part.last().expect("non-empty").0;
    let stat_rows: Vec<&FeatureRow> = rows[..=last_train_row].iter().collect();
    let normalization = Normalization::fit(&stat_rows, features)?;

    let mut refit_config = *config;
    refit_config.seed = derive_seed(config.seed, rows[r].week as u64);
    fit(&normalization, train_part, val_part, &refit_config, features)
}

/// Seeds a random small network and batch, then runs the finite-difference
/// gradient check at the given perturbation step.
pub fn gradient_check_config(
    input: usize,
    hidden: usize,
    layers: usize,
    window: usize,
    batch_size: usize,
    step: f64,
    seed: u64,
) -> Result<crate::lstm::GradientCheckReport> {
    use rand::Rng;
    let spec = LstmSpec::new(input, hidden, layers);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let network = LstmNetwork::random_init(spec, &mut rng);
    let batch: Vec<(Vec<Vec<f64>>, f64)> = (0..batch_size.max(1))
        .map(|_| {
            let window_rows = (0..window)
                .map(|_| (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            (window_rows, rng.gen_range(-1.0..1.0))
        })
        .collect();
    crate::lstm::gradient_check(&network, &batch, step)
}

const MODEL_MAGIC: &[u8; 4] = b"LTFM";
const MODEL_VERSION: u32 = 1;

/// Writes the versioned binary model file.
pub fn save_model<W: Write>(model: &TrainedModel, mut writer: W) -> Result<()> {
    writer.write_all(MODEL_MAGIC)?;
    writer.write_all(&MODEL_VERSION.to_le_bytes())?;
    let payload =
        bincode::serialize(model).map_err(|e| Error::ModelFile(format!("encode: {e}")))?;
    writer.write_all(&payload)?;
    Ok(())
}

pub fn load_model<R: Read>(mut reader: R) -> Result<TrainedModel> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::ModelFile("bad magic".into()));
    }
    let mut version = [0u8; 4];
    reader.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != MODEL_VERSION {
        return Err(Error::ModelFile(format!(
            "unsupported version {version} (expected {MODEL_VERSION})"
        )));
    }
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    bincode::deserialize(&payload).map_err(|e| Error::ModelFile(format!("decode: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::ALL_FEATURES;
    use rand::Rng;

    fn planted_rows(weeks: usize, coupling: f64, noise: f64, seed: u64) -> Vec<FeatureRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut price = 100.0;
        let mut signals = Vec::new();
        for _ in 0..weeks {
            signals.push(rng.gen_range(-3i64..=3) as f64);
        }
        for t in 0..weeks {
            let y_next = if t + 1 < weeks {
                Some(coupling * signals[t] + noise * rng.gen_range(-1.0..1.0))
            } else {
                None
            };
            let price_inc = if t == 0 {
                0.0
            } else {
                coupling * signals[t - 1] + noise * 0.1
            };
            let row = FeatureRow {
                week: t,
                price,
                price_inc,
                trade_volume: 50.0 + rng.gen_range(-5.0..5.0),
                trade_volume_top: rng.gen_range(0.0..10.0),
                puell_mult: 1.0 + rng.gen_range(-0.1..0.1),
                puell_mult_inc: rng.gen_range(-0.05..0.05),
                sent_inc: rng.gen_range(-2.0..2.0),
                motif_2_inc: rng.gen_range(-2i64..=2) as f64,
                delta_beta0: signals[t],
                target: y_next,
            };
            if let Some(y) = y_next {
                price += y;
            }
            rows.push(row);
        }
        rows
    }

    fn small_config(seed: u64) -> ModelConfig {
        ModelConfig {
            hidden: 8,
            layers: 2,
            window: 4,
            learning_rate: 0.02,
            epochs: 60,
            batch_size: 16,
            patience: 10,
            clip_norm: 1.0,
            seed,
        }
    }

    #[test]
    fn split_is_contiguous_and_proportional() {
        let split = SplitPlan::fractional(100, 0.6, 0.2).unwrap();
        assert_eq!(split.train, 0..60);
        assert_eq!(split.validation, 60..80);
        assert_eq!(split.test, 80..100);
        assert!(SplitPlan::fractional(10, 0.8, 0.3).is_err());
    }

    #[test]
    fn zero_target_series_trains_to_near_zero() {
        let mut rows = planted_rows(60, 0.0, 0.0, 3);
        for row in rows.iter_mut() {
            if row.target.is_some() {
                row.target = Some(0.0);
            }
        }
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let mut config = small_config(1);
        config.epochs = 400;
        config.patience = 400;
        let model = train(&rows, &split, &config, &ALL_FEATURES).unwrap();
        for r in split.train.clone() {
            if rows[r].target.is_some() && r + 1 >= config.window {
                let y_hat = model.predict_at(&rows, r).unwrap();
                assert!(y_hat.abs() < 1e-3, "|{y_hat}| too large at row {r}");
            }
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let rows = planted_rows(60, 0.9, 0.1, 5);
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let config = small_config(9);
        let a = train(&rows, &split, &config, &ALL_FEATURES).unwrap();
        let b = train(&rows, &split, &config, &ALL_FEATURES).unwrap();
        assert_eq!(a.network.params, b.network.params);
        let pa = a.predict_at(&rows, split.test.start + 3).unwrap();
        let pb = b.predict_at(&rows, split.test.start + 3).unwrap();
        assert_eq!(pa.to_bits(), pb.to_bits());
    }

    #[test]
    fn planted_signal_beats_the_variance_bound() {
        let rows = planted_rows(120, 0.9, 0.1, 11);
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let config = small_config(2);
        let predictions =
            walk_forward_predict(&rows, &split, &config, &ALL_FEATURES, 10).unwrap();
        let actual: Vec<f64> = predictions.iter().filter_map(|p| p.actual).collect();
        let predicted: Vec<f64> = predictions
            .iter()
            .filter(|p| p.actual.is_some())
            .map(|p| p.predicted)
            .collect();
        let mean = actual.iter().sum::<f64>() / actual.len() as f64;
        let variance =
            actual.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / actual.len() as f64;
        let mse = predicted
            .iter()
            .zip(&actual)
            .map(|(p, a)| (p - a) * (p - a))
            .sum::<f64>()
            / actual.len() as f64;
        assert!(
            mse < variance / 4.0,
            "test MSE {mse} not below variance bound {}",
            variance / 4.0
        );
    }

    #[test]
    fn window_length_must_match() {
        let rows = planted_rows(40, 0.5, 0.1, 2);
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let model = train(&rows, &split, &small_config(3), &ALL_FEATURES).unwrap();
        let short: Vec<Vec<f64>> = (0..3).map(|_| vec![0.0; 9]).collect();
        assert!(model.predict_window(&short).is_err());
        let narrow: Vec<Vec<f64>> = (0..4).map(|_| vec![0.0; 5]).collect();
        assert!(model.predict_window(&narrow).is_err());
    }

    #[test]
    fn normalization_maps_training_stats_to_standard() {
        let rows = planted_rows(50, 0.7, 0.2, 8);
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let model = train(&rows, &split, &small_config(4), &ALL_FEATURES).unwrap();
        let train_rows = &rows[split.train.clone()];
        let width = model.normalization.input_width();
        let transformed: Vec<Vec<f64>> = train_rows
            .iter()
            .map(|r| model.normalization.apply(&r.values(&ALL_FEATURES)))
            .collect();
        let n = transformed.len() as f64;
        for j in 0..width {
            let mean = transformed.iter().map(|v| v[j]).sum::<f64>() / n;
            let var = transformed.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "feature {j} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "feature {j} std {}", var.sqrt());
        }
    }

    #[test]
    fn constant_features_are_dropped_and_ignored() {
        let mut rows = planted_rows(50, 0.7, 0.2, 8);
        for row in rows.iter_mut() {
            row.puell_mult = 1.0;
        }
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let model = train(&rows, &split, &small_config(4), &ALL_FEATURES).unwrap();
        assert_eq!(model.dropped_features(), vec![FeatureId::PuellMult]);
        assert_eq!(model.normalization.input_width(), 8);
    }

    #[test]
    fn static_stride_is_a_single_fit() {
        let rows = planted_rows(80, 0.9, 0.1, 6);
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let config = small_config(5);
        let predictions =
            walk_forward_predict(&rows, &split, &config, &ALL_FEATURES, usize::MAX).unwrap();
        // Every evaluable test row yields one prediction.
        let evaluable = split
            .test
            .clone()
            .filter(|&r| r + 1 >= config.window && r < rows.len())
            .count();
        assert_eq!(predictions.len(), evaluable);

        // The static model must match a direct fit-once-and-apply pass.
        let first = split.test.start;
        let refit = fit_before(&rows, first, &config, &ALL_FEATURES).unwrap();
        for p in &predictions {
            let direct = refit.predict_at(&rows, p.label_row).unwrap();
            assert_eq!(direct.to_bits(), p.predicted.to_bits());
        }
    }

    #[test]
    fn truncating_future_data_leaves_predictions_unchanged() {
        let rows = planted_rows(90, 0.9, 0.1, 13);
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let config = small_config(21);
        let full = walk_forward_predict(&rows, &split, &config, &ALL_FEATURES, 3).unwrap();

        for cut_row in [split.test.start + 2, split.test.start + 7] {
            let truncated: Vec<FeatureRow> = rows[..=cut_row]
                .iter()
                .cloned()
                .map(|mut r| {
                    if r.week == rows[cut_row].week {
                        r.target = None;
                    }
                    r
                })
                .collect();
            let partial =
                walk_forward_predict(&truncated, &split, &config, &ALL_FEATURES, 3).unwrap();
            for p in &partial {
                let reference = full.iter().find(|f| f.week == p.week).unwrap();
                assert_eq!(reference.predicted.to_bits(), p.predicted.to_bits());
            }
        }
    }

    #[test]
    fn model_file_round_trips() {
        let rows = planted_rows(40, 0.5, 0.1, 2);
        let split = SplitPlan::fractional(rows.len(), 0.6, 0.2).unwrap();
        let model = train(&rows, &split, &small_config(3), &ALL_FEATURES).unwrap();
        let mut buffer = Vec::new();
        save_model(&model, &mut buffer).unwrap();
        let loaded = load_model(buffer.as_slice()).unwrap();
        assert_eq!(model, loaded);

        let mut corrupted = buffer.clone();
        corrupted[0] = b'X';
        assert!(load_model(corrupted.as_slice()).is_err());
    }
}
