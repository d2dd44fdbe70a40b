//! Correlation statistics, RMSE, and the feature-set ablation harness.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::attribution::detect_anomalous_weeks;
use crate::error::{Error, Result};
use crate::forecast::{derive_seed, walk_forward_predict, ModelConfig, SplitPlan};
use crate::market::{FeatureId, FeatureRow};

/// Sample Pearson correlation. Errors when either argument has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "pearson needs equal lengths >= 3, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance(
            "pearson undefined for a constant series".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation: Pearson on average ranks, ties averaged.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Average (fractional) ranks, 1-based; tied values share the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share the average of ranks i+1..=j.
        let shared = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = shared;
        }
        i = j;
    }
    ranks
}

/// Two-sided t-test on a correlation coefficient at level alpha.
pub fn significance(coefficient: f64, n: usize, alpha: f64) -> bool {
    assert!(n >= 4, "significance test needs n >= 4");
    let r = coefficient.clamp(-1.0, 1.0);
    if r.abs() >= 1.0 {
        return true;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    p < alpha
}

/// Root mean squared error over aligned series. Errors when empty.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::InvalidArgument(format!(
            "rmse needs aligned series, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("rmse of an empty filter".into()));
    }
    let sum_sq: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(&p, &a)| (p - a) * (p - a))
        .sum();
    Ok((sum_sq / predicted.len() as f64).sqrt())
}

/// Per-feature correlation against the target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub feature: String,
    pub pearson_r: f64,
    pub pearson_significant: bool,
    pub spearman_rho: f64,
    pub spearman_significant: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub alpha: f64,
    pub samples: usize,
    pub entries: Vec<CorrelationEntry>,
}

/// Correlation table for a set of named series against a common target.
pub fn correlation_report(
    features: &[(String, Vec<f64>)],
    target: &[f64],
    alpha: f64,
) -> Result<CorrelationReport> {
    let n = target.len();
    let entries = features
        .iter()
        .map(|(name, series)| {
            let r = pearson(series, target)?;
            let rho = spearman(series, target)?;
            Ok(CorrelationEntry {
                feature: name.clone(),
                pearson_r: r,
                pearson_significant: significance(r, n, alpha),
                spearman_rho: rho,
                spearman_significant: significance(rho, n, alpha),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport {
        alpha,
        samples: n,
        entries,
    })
}

/// A named feature subset for ablation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSet {
    pub name: String,
    pub features: Vec<FeatureId>,
}

/// Per-set ablation outcome. Gains compare mean RMSE against the basic set:
/// (basic - set) / basic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationEntry {
    pub name: String,
    pub per_seed_rmse_all: Vec<f64>,
    pub per_seed_rmse_anomalous: Vec<f64>,
    pub mean_rmse_all: f64,
    pub mean_rmse_anomalous: f64,
    pub gain_all: f64,
    pub gain_anomalous: f64,
    pub retrains_used: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub entries: Vec<AblationEntry>,
    pub anomalous_weeks: BTreeSet<usize>,
    pub retrains: usize,
    pub stride: usize,
}

impl AblationReport {
    pub fn entry(&self, name: &str) -> Option<&AblationEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Walk-forward RMSE for every feature set over `retrains` seeded runs, on
/// all realized test weeks and on the anomalous subset. Seeds are shared
/// across sets (paired comparisons); a failed retrain is excluded and counted.
#[allow(clippy::too_many_arguments)]
pub fn ablation(
    rows: &[FeatureRow],
    split: &SplitPlan,
    model_config: &ModelConfig,
    sets: &[AblationSet],
    retrains: usize,
    master_seed: u64,
    anomaly_fraction: f64,
    stride: usize,
) -> Result<AblationReport> {
    if !sets.iter().any(|s| s.name == "basic") {
        return Err(Error::InvalidArgument(
            "ablation sets must include `basic`".into(),
        ));
    }
    if retrains == 0 {
        return Err(Error::InvalidArgument("retrains must be positive".into()));
    }
    let actuals = crate::pipeline::test_actuals(rows, split);
    if actuals.is_empty() {
        return Err(Error::InvalidArgument("no realized test weeks".into()));
    }
    let anomalous = detect_anomalous_weeks(&actuals, anomaly_fraction)?;

    let mut entries = Vec::new();
    for set in sets {
        let outcomes: Vec<Result<(f64, f64)>> = (0..retrains)
            .into_par_iter()
            .map(|retrain| -> Result<(f64, f64)> {
                let mut config = *model_config;
                config.seed = derive_seed(master_seed, retrain as u64);
                let predictions =
                    walk_forward_predict(rows, split, &config, &set.features, stride)?;
                let realized: Vec<&crate::forecast::Prediction> =
                    predictions.iter().filter(|p| p.actual.is_some()).collect();
                let predicted: Vec<f64> = realized.iter().map(|p| p.predicted).collect();
                let actual: Vec<f64> = realized.iter().map(|p| p.actual.unwrap()).collect();
                let all = rmse(&predicted, &actual)?;
                let (an_pred, an_act): (Vec<f64>, Vec<f64>) = realized
                    .iter()
                    .filter(|p| anomalous.weeks.contains(&p.week))
                    .map(|p| (p.predicted, p.actual.unwrap()))
                    .unzip();
                let anomalous_rmse = rmse(&an_pred, &an_act)?;
                Ok((all, anomalous_rmse))
            })
            .collect();

        let mut per_seed_rmse_all = Vec::new();
        let mut per_seed_rmse_anomalous = Vec::new();
        let mut failures = 0;
        for outcome in outcomes {
            match outcome {
                Ok((all, anom)) => {
                    per_seed_rmse_all.push(all);
                    per_seed_rmse_anomalous.push(anom);
                }
                Err(_) => failures += 1,
            }
        }
        if per_seed_rmse_all.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "every retrain failed for set {:?}",
                set.name
            )));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        entries.push(AblationEntry {
            name: set.name.clone(),
            mean_rmse_all: mean(&per_seed_rmse_all),
            mean_rmse_anomalous: mean(&per_seed_rmse_anomalous),
            retrains_used: per_seed_rmse_all.len(),
            per_seed_rmse_all,
            per_seed_rmse_anomalous,
            gain_all: 0.0,
            gain_anomalous: 0.0,
            failures,
        });
    }

    let basic_all = entries
        .iter()
        .find(|e| e.name == "basic")
        .map(|e| (e.mean_rmse_all, e.mean_rmse_anomalous))
        .expect("basic checked above");
    for entry in entries.iter_mut() {
        entry.gain_all = (basic_all.0 - entry.mean_rmse_all) / basic_all.0;
        entry.gain_anomalous = (basic_all.1 - entry.mean_rmse_anomalous) / basic_all.1;
    }

    Ok(AblationReport {
        entries,
        anomalous_weeks: anomalous.weeks,
        retrains,
        stride,
    })
}

/// The paper-style set list: basic, basic plus each topological feature, and
/// basic plus both.
pub fn standard_ablation_sets() -> Vec<AblationSet> {
    use crate::market::BASIC_FEATURES;
    let basic = BASIC_FEATURES.to_vec();
    let mut with_beta = basic.clone();
    with_beta.push(FeatureId::DeltaBeta0);
    let mut with_motif = basic.clone();
    with_motif.push(FeatureId::Motif2Inc);
    let mut with_both = with_beta.clone();
    with_both.push(FeatureId::Motif2Inc);
    vec![
        AblationSet {
            name: "basic".into(),
            features: basic,
        },
        AblationSet {
            name: "basic+delta_beta0".into(),
            features: with_beta,
        },
        AblationSet {
            name: "basic+motif_2_inc".into(),
            features: with_motif,
        },
        AblationSet {
            name: "basic+delta_beta0+motif_2_inc".into(),
            features: with_both,
        },
    ]
}

/// `feature_set,rmse_all,rmse_anomalous,gain_all,gain_anomalous,retrains,failures`.
pub fn write_ablation_csv(report: &AblationReport) -> String {
    let mut out =
        String::from("feature_set,rmse_all,rmse_anomalous,gain_all,gain_anomalous,retrains,failures\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.name,
            e.mean_rmse_all,
            e.mean_rmse_anomalous,
            e.gain_all,
            e.gain_anomalous,
            e.retrains_used,
            e.failures
        ));
    }
    out
}
