//! Exact Shapley attributions for the trained forecaster, SHAP-rank
//! aggregation over week sets, and anomalous-week selection.
//!
//! With nine features the 512 coalitions are enumerated outright; the value of
//! a coalition is the marginal expectation over a background set, coalition
//! features taken from the instance across the whole input window and the
//! rest from the background sample.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::TrainedModel;
use crate::quantile::top_fraction_threshold;

/// Per-feature attributions for one prediction instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub week: usize,
    /// Expected model output over the background set.
    pub base_value: f64,
    /// One attribution per model feature, in model feature order.
    pub attributions: Vec<f64>,
    pub model_output: f64,
}

impl ShapleyReport {
    /// Efficiency residual: sum of attributions plus base minus the output.
    pub fn efficiency_residual(&self) -> f64 {
        (self.attributions.iter().sum::<f64>() + self.base_value - self.model_output).abs()
    }
}

/// Exact Shapley values by full coalition enumeration.
pub fn shapley_exact(
    model: &TrainedModel,
    week: usize,
    instance: &[Vec<f64>],
    background: &[Vec<Vec<f64>>],
) -> Result<ShapleyReport> {
    let n = model.features.len();
    if n > 16 {
        return Err(Error::InvalidArgument(format!(
            "{n} features: exact enumeration limited to 16"
        )));
    }
    if background.is_empty() {
        return Err(Error::InvalidArgument("empty background set".into()));
    }

    let masks = 1usize << n;
    let mut values = vec![0.0f64; masks];
    let mut composed = vec![vec![0.0; n]; instance.len()];
    for (mask, value) in values.iter_mut().enumerate() {
        let mut sum = 0.0;
        for sample in background {
            for (r, row) in composed.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell = if mask & (1 << j) != 0 {
                        instance[r][j]
                    } else {
                        sample[r][j]
                    };
                }
            }
            sum += model.predict_window(&composed)?;
        }
        *value = sum / background.len() as f64;
    }

    // Coalition weights |S|! (n-|S|-1)! / n!.
    let mut factorial = vec![1.0f64; n + 1];
    for i in 1..=n {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..n)
        .map(|s| factorial[s] * factorial[n - s - 1] / factorial[n])
        .collect();

    let mut attributions = vec![0.0f64; n];
    for (mask, &v_without) in values.iter().enumerate() {
        let size = (mask as u32).count_ones() as usize;
        for (j, phi) in attributions.iter_mut().enumerate() {
            if mask & (1 << j) == 0 {
                *phi += weight[size] * (values[mask | (1 << j)] - v_without);
            }
        }
    }

    Ok(ShapleyReport {
        week,
        base_value: values[0],
        attributions,
        model_output: values[masks - 1],
    })
}

/// Ranking statistic over a week set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankStatistic {
    /// Mean absolute attribution (importance reading).
    #[default]
    MeanAbsolute,
    /// Signed mean attribution.
    SignedMean,
}

/// Average SHAP ranks over retrains; rank 1 marks the most important feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub average_rank: Vec<f64>,
    pub retrains: usize,
    pub weeks: usize,
}

/// Aggregates per-retrain rankings: within one retrain, features are ranked by
/// the chosen statistic over the week set (ties share averaged ranks), then
/// ranks are averaged across retrains. Every retrain must report the same
/// weeks.
pub fn rank_features(
    per_retrain_reports: &[Vec<ShapleyReport>],
    statistic: RankStatistic,
) -> Result<RankTable> {
    if per_retrain_reports.is_empty() || per_retrain_reports[0].is_empty() {
        return Err(Error::InvalidArgument(
            "rank aggregation needs at least one retrain with one report".into(),
        ));
    }
    let weeks: BTreeSet<usize> = per_retrain_reports[0].iter().map(|r| r.week).collect();
    let n_features = per_retrain_reports[0][0].attributions.len();
    for (retrain, reports) in per_retrain_reports.iter().enumerate() {
        let these: BTreeSet<usize> = reports.iter().map(|r| r.week).collect();
        if these != weeks {
            let missing: Vec<usize> = weeks.difference(&these).copied().collect();
            return Err(Error::InvalidArgument(format!(
                "retrain {retrain} missing weeks {missing:?}"
            )));
        }
    }

    let mut rank_sum = vec![0.0f64; n_features];
    for reports in per_retrain_reports {
        let stats: Vec<f64> = (0..n_features)
            .map(|j| {
                let total: f64 = reports
                    .iter()
                    .map(|r| match statistic {
                        RankStatistic::MeanAbsolute => r.attributions[j].abs(),
                        RankStatistic::SignedMean => r.attributions[j],
                    })
                    .sum();
                total / reports.len() as f64
            })
            .collect();
        // Rank 1 = largest statistic; ties averaged.
        let descending: Vec<f64> = stats.iter().map(|&s| -s).collect();
        let ranks = crate::eval::average_ranks(&descending);
        for (acc, r) in rank_sum.iter_mut().zip(&ranks) {
            *acc += r;
        }
    }
    let retrains = per_retrain_reports.len();
    Ok(RankTable {
        average_rank: rank_sum.iter().map(|s| s / retrains as f64).collect(),
        retrains,
        weeks: weeks.len(),
    })
}

/// Selected anomalous weeks plus an advisory note for degenerate inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalousWeeks {
    pub weeks: BTreeSet<usize>,
    pub warning: Option<String>,
}

/// Weeks whose absolute increment reaches the top `q` fraction of the set,
/// ties at the threshold included. A constant series selects nothing.
pub fn detect_anomalous_weeks(increments: &[(usize, f64)], q: f64) -> Result<AnomalousWeeks> {
    if !(0.0..=1.0).contains(&q) || q == 0.0 {
        return Err(Error::InvalidArgument("quantile must be in (0, 1]".into()));
    }
    if increments.is_empty() {
        return Err(Error::InvalidArgument("empty week set".into()));
    }
    let first = increments[0].1;
    if increments.iter().all(|&(_, y)| y == first) {
        return Ok(AnomalousWeeks {
            weeks: BTreeSet::new(),
            warning: Some("constant increments: anomaly threshold undefined".into()),
        });
    }
    let magnitudes: Vec<f64> = increments.iter().map(|&(_, y)| y.abs()).collect();
    let threshold = top_fraction_threshold(&magnitudes, q);
    let weeks: BTreeSet<usize> = increments
        .iter()
        .filter(|&&(_, y)| y.abs() >= threshold)
        .map(|&(w, _)| w)
        .collect();
    let warning = (q < 1.0 && weeks.len() == increments.len())
        .then(|| "all weeks tie at the anomaly threshold".to_string());
    Ok(AnomalousWeeks { weeks, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{ModelConfig, Normalization, TrainedModel};
    use crate::lstm::{LstmNetwork, LstmSpec};
    use crate::market::ALL_FEATURES;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_model(seed: u64) -> TrainedModel {
        let features = ALL_FEATURES.to_vec();
        let spec = LstmSpec::new(features.len(), 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let network = LstmNetwork::random_init(spec, &mut rng);
        TrainedModel {
            config: ModelConfig {
                hidden: 5,
                layers: 1,
                window: 3,
                ..ModelConfig::default()
            },
            features: features.clone(),
            normalization: Normalization {
                means: vec![0.0; features.len()],
                stds: vec![1.0; features.len()],
                kept: vec![true; features.len()],
            },
            network,
            best_validation_mse: 0.0,
        }
    }

    fn random_window(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn efficiency_holds_on_a_random_model() {
        let model = test_model(3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let instance = random_window(&mut rng, 3, 9);
        let background: Vec<_> = (0..4).map(|_| random_window(&mut rng, 3, 9)).collect();
        let report = shapley_exact(&model, 0, &instance, &background).unwrap();
        assert!(
            report.efficiency_residual() < 1e-6,
            "residual {}",
            report.efficiency_residual()
        );
        let direct = model.predict_window(&instance).unwrap();
        assert!((report.model_output - direct).abs() < 1e-12);
    }

    #[test]
    fn exchangeable_features_share_attribution() {
        let mut model = test_model(5);
        // Tie the first two feature columns of the input weight matrix.
        let (.., range) = model
            .network
            .spec
            .tensors()
            .into_iter()
            .find(|(n, _)| n == "layer0.w")
            .map(|(n, r)| (n, r))
            .unwrap();
        let d = 9;
        let rows = range.len() / d;
        for r in 0..rows {
            let base = range.start + r * d;
            model.network.params[base + 1] = model.network.params[base];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut instance = random_window(&mut rng, 3, 9);
        let mut background: Vec<_> = (0..5).map(|_| random_window(&mut rng, 3, 9)).collect();
        for row in instance.iter_mut() {
            row[1] = row[0];
        }
        for sample in background.iter_mut() {
            for row in sample.iter_mut() {
                row[1] = row[0];
            }
        }
        let report = shapley_exact(&model, 0, &instance, &background).unwrap();
        assert!(
            (report.attributions[0] - report.attributions[1]).abs() < 1e-9,
            "{} vs {}",
            report.attributions[0],
            report.attributions[1]
        );
    }

    #[test]
    fn ignored_feature_gets_exactly_zero() {
        let mut model = test_model(7);
        // Zero every input weight feeding feature 4.
        let range = model
            .network
            .spec
            .tensors()
            .into_iter()
            .find(|(n, _)| n == "layer0.w")
            .unwrap()
            .1;
        let d = 9;
        let rows = range.len() / d;
        for r in 0..rows {
            model.network.params[range.start + r * d + 4] = 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let instance = random_window(&mut rng, 3, 9);
        let background: Vec<_> = (0..3).map(|_| random_window(&mut rng, 3, 9)).collect();
        let report = shapley_exact(&model, 0, &instance, &background).unwrap();
        assert_eq!(report.attributions[4], 0.0);
    }

    #[test]
    fn dropped_feature_is_a_null_player() {
        let mut model = test_model(9);
        model.normalization.kept[2] = false;
        model.network = LstmNetwork::random_init(
            LstmSpec::new(8, 5, 1),
            &mut ChaCha8Rng::seed_from_u64(31),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let instance = random_window(&mut rng, 3, 9);
        let background: Vec<_> = (0..3).map(|_| random_window(&mut rng, 3, 9)).collect();
        let report = shapley_exact(&model, 0, &instance, &background).unwrap();
        assert_eq!(report.attributions[2], 0.0);
    }

    #[test]
    fn instance_equal_to_background_zeroes_everything() {
        let model = test_model(11);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let instance = random_window(&mut rng, 3, 9);
        let background = vec![instance.clone()];
        let report = shapley_exact(&model, 0, &instance, &background).unwrap();
        for phi in &report.attributions {
            assert_eq!(*phi, 0.0);
        }
    }

    #[test]
    fn empty_background_is_rejected() {
        let model = test_model(13);
        let instance = vec![vec![0.0; 9]; 3];
        assert!(shapley_exact(&model, 0, &instance, &[]).is_err());
    }

    fn report(week: usize, attributions: Vec<f64>) -> ShapleyReport {
        ShapleyReport {
            week,
            base_value: 0.0,
            model_output: attributions.iter().sum(),
            attributions,
        }
    }

    #[test]
    fn single_retrain_ranks_follow_sort_order() {
        let reports = vec![vec![report(0, vec![0.5, -2.0, 1.0])]];
        let table = rank_features(&reports, RankStatistic::MeanAbsolute).unwrap();
        assert_eq!(table.average_rank, vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn tied_magnitudes_share_the_average_rank() {
        let reports = vec![vec![report(0, vec![1.0, -1.0, 0.2])]];
        let table = rank_features(&reports, RankStatistic::MeanAbsolute).unwrap();
        assert_eq!(table.average_rank, vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn unanimous_retrains_average_to_one() {
        let reports: Vec<Vec<ShapleyReport>> = (0..20)
            .map(|i| vec![report(0, vec![5.0 + i as f64, 1.0, 0.5])])
            .collect();
        let table = rank_features(&reports, RankStatistic::MeanAbsolute).unwrap();
        assert_eq!(table.average_rank[0], 1.0);
        assert_eq!(table.retrains, 20);
    }

    #[test]
    fn rank_is_invariant_under_positive_rescaling() {
        let base = vec![vec![
            report(0, vec![0.5, -2.0, 1.0]),
            report(1, vec![0.1, 0.4, -0.6]),
        ]];
        let scaled = vec![vec![
            report(0, vec![5.0, -20.0, 10.0]),
            report(1, vec![1.0, 4.0, -6.0]),
        ]];
        let a = rank_features(&base, RankStatistic::MeanAbsolute).unwrap();
        let b = rank_features(&scaled, RankStatistic::MeanAbsolute).unwrap();
        assert_eq!(a.average_rank, b.average_rank);
    }

    #[test]
    fn missing_weeks_in_a_retrain_error() {
        let reports = vec![
            vec![report(0, vec![1.0]), report(1, vec![1.0])],
            vec![report(0, vec![1.0])],
        ];
        assert!(rank_features(&reports, RankStatistic::MeanAbsolute).is_err());
    }

    #[test]
    fn anomaly_detection_picks_the_spike() {
        let weeks = vec![(0, 0.0), (1, 0.0), (2, 0.0), (3, 10.0)];
        let result = detect_anomalous_weeks(&weeks, 0.25).unwrap();
        assert_eq!(result.weeks, BTreeSet::from([3]));
        assert!(result.warning.is_none());
    }

    #[test]
    fn equal_magnitudes_select_everything_with_warning() {
        let weeks = vec![(0, 3.0), (1, -3.0), (2, 3.0), (3, -3.0)];
        let result = detect_anomalous_weeks(&weeks, 0.25).unwrap();
        assert_eq!(result.weeks.len(), 4);
        assert!(result.warning.is_some());
    }

    #[test]
    fn constant_series_selects_nothing_with_warning() {
        let weeks = vec![(0, 2.0), (1, 2.0), (2, 2.0)];
        let result = detect_anomalous_weeks(&weeks, 0.25).unwrap();
        assert!(result.weeks.is_empty());
        assert!(result.warning.is_some());
    }

    #[test]
    fn q_of_one_selects_all_weeks() {
        let weeks = vec![(0, 1.0), (1, -2.0), (2, 0.5)];
        let result = detect_anomalous_weeks(&weeks, 1.0).unwrap();
        assert_eq!(result.weeks.len(), 3);
        assert!(result.warning.is_none());
    }
}
