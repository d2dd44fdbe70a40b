//! End-to-end orchestration: raw input files to weekly topology, the feature
//! matrix, forecasts, and the attribution/ablation reports, plus every CSV
//! surface the CLI exposes.
//!
//! Per-week kernels run in parallel but results are collected in week order
//! and reduced sequentially, so a fixed master seed reproduces every artifact
//! byte for byte.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{
    detect_anomalous_weeks, rank_features, shapley_exact, AnomalousWeeks, RankStatistic,
    RankTable, ShapleyReport,
};
use crate::error::{Error, Result};
use crate::eval::{correlation_report, CorrelationReport};
use crate::forecast::{derive_seed, train, ModelConfig, Prediction, SplitPlan, TrainedModel};
use crate::graph::{build_digraph, filter_top_edges, filter_top_edges_raw, to_undirected};
use crate::homology::{
    betti_sequence, compute_thresholds, BettiSequence, DecileMode, FiltrationScale, DECILE_LEVELS,
};
use crate::ingest::{
    default_anchor, parse_transactions, parse_trends, parse_value_series, partition_weeks,
    week_end_date, week_of_date, ParseMode, SeriesKind, SkipReport, TimeSeries,
    TransactionRecord, WeekWindow,
};
use crate::market::{
    assemble_features, rank_top_traders, top_trader_volume, trade_volume, FeatureComponents,
    FeatureRow, RankingParams, WalletVolumes, ALL_FEATURES,
};
use crate::motifs::{census_triads_for_week, motif_increment, MatchMode, MotifCensus};
use crate::synth::SyntheticData;
use crate::topo::{left_increment, select_betti_feature};

/// Feature-stage configuration (graph, filtration, and ranking knobs).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Week-0 start; defaults to the first Monday 00:00 UTC at or before the
    /// earliest record.
    pub anchor: Option<DateTime<Utc>>,
    pub parse_mode: ParseMode,
    /// Fraction of arcs kept for the motif census.
    pub top_fraction: f64,
    /// Threshold the arc filter on raw per-transaction amounts instead of
    /// aggregated arc weights.
    pub top_filter_raw: bool,
    pub decile_mode: DecileMode,
    pub match_mode: MatchMode,
    /// Decile index and dimension of the Betti feature.
    pub betti_k: u32,
    pub betti_p: u8,
    pub ranking: RankingParams,
    /// The two search-frequency terms; defaults to the only two terms present.
    pub terms: Option<(String, String)>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            anchor: None,
            parse_mode: ParseMode::Lenient,
            top_fraction: 0.01,
            top_filter_raw: false,
            decile_mode: DecileMode::Undirected,
            match_mode: MatchMode::Induced,
            betti_k: 40,
            betti_p: 0,
            ranking: RankingParams::default(),
            terms: None,
        }
    }
}

/// Parsed input series.
#[derive(Debug, Clone)]
pub struct RawInputs {
    pub records: Vec<TransactionRecord>,
    pub skip_report: SkipReport,
    pub price: TimeSeries,
    pub issuance: TimeSeries,
    pub trends: Vec<(String, TimeSeries)>,
}

impl RawInputs {
    pub fn from_readers<A: Read, B: Read, C: Read, D: Read>(
        transactions: A,
        price: B,
        issuance: C,
        trends: D,
        mode: ParseMode,
    ) -> Result<Self> {
        let (records, skip_report) = parse_transactions(transactions, mode)?;
        Ok(Self {
            records,
            skip_report,
            price: parse_value_series(price, SeriesKind::Price)?,
            issuance: parse_value_series(issuance, SeriesKind::Issuance)?,
            trends: parse_trends(trends)?,
        })
    }

    pub fn from_synthetic(data: &SyntheticData, mode: ParseMode) -> Result<Self> {
        Self::from_readers(
            data.transactions_csv.as_bytes(),
            data.price_csv.as_bytes(),
            data.issuance_csv.as_bytes(),
            data.trends_csv.as_bytes(),
            mode,
        )
    }

    pub fn from_files(
        transactions: &Path,
        price: &Path,
        issuance: &Path,
        trends: &Path,
        mode: ParseMode,
    ) -> Result<Self> {
        Self::from_readers(
            std::fs::File::open(transactions)?,
            std::fs::File::open(price)?,
            std::fs::File::open(issuance)?,
            std::fs::File::open(trends)?,
            mode,
        )
    }
}

/// Per-week topological summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeekTopology {
    pub week: usize,
    pub scales: Vec<FiltrationScale>,
    pub betti0: BettiSequence,
    pub betti1: BettiSequence,
    pub census: MotifCensus,
}

/// Everything the feature stage produces.
#[derive(Debug, Clone)]
pub struct FeatureBundle {
    pub anchor: DateTime<Utc>,
    pub weeks: usize,
    pub topology: Vec<WeekTopology>,
    pub rows: Vec<FeatureRow>,
}

/// Maps a dated series onto week indices; errors on two points in one week.
fn series_by_week(
    series: &TimeSeries,
    anchor: DateTime<Utc>,
    len: usize,
    kind: &str,
) -> Result<Vec<Option<f64>>> {
    let mut out = vec![None; len];
    for &(date, value) in &series.points {
        if let Some(week) = week_of_date(anchor, date) {
            if week < len {
                if out[week].is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "{kind} series has two entries in week {week}"
                    )));
                }
                out[week] = Some(value);
            }
        }
    }
    Ok(out)
}

/// Runs the full feature stage: weekly graphs, filtration homology, motif
/// census, market indicators, and row assembly.
pub fn compute_features(inputs: &RawInputs, config: &PipelineConfig) -> Result<FeatureBundle> {
    let anchor = match config.anchor {
        Some(a) => a,
        None => default_anchor(&inputs.records).ok_or_else(|| {
            Error::InvalidArgument("no transactions: cannot infer an anchor".into())
        })?,
    };
    let windows = partition_weeks(inputs.records.clone(), anchor)?;
    let weeks = windows.len();
    if weeks < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two weekly windows, got {weeks}"
        )));
    }

    let topology: Vec<WeekTopology> = windows
        .par_iter()
        .map(|window| week_topology(window, config))
        .collect::<Result<Vec<_>>>()?;

    // Price covers one extra slot so the final row can still find its target
    // when the price series extends past the transaction span.
    let price = series_by_week(&inputs.price, anchor, weeks + 1, "price")?;

    let puell_mult: Vec<Option<f64>> = (0..weeks)
        .map(|t| crate::market::puell_multiple(&inputs.issuance, week_end_date(anchor, t)).ok())
        .collect();

    let (term_a, term_b) = resolve_terms(&inputs.trends, config)?;
    let term_a_week = series_by_week(term_a, anchor, weeks, "search-frequency")?;
    let term_b_week = series_by_week(term_b, anchor, weeks, "search-frequency")?;
    let sentiment_sum: Vec<Option<f64>> = term_a_week
        .iter()
        .zip(&term_b_week)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        })
        .collect();

    let volumes = WalletVolumes::from_windows(&windows);
    let next_increment: Vec<Option<f64>> = (0..weeks)
        .map(|s| match (price[s], price.get(s + 1).copied().flatten()) {
            (Some(now), Some(next)) => Some(next - now),
            _ => None,
        })
        .collect();
    let start_week = 1.max(config.ranking.min_history + 1);
    let mut trade_volume_top = vec![None; weeks];
    for t in start_week..weeks {
        let ranking = rank_top_traders(&volumes, &next_increment, t, &config.ranking)?;
        trade_volume_top[t] = Some(top_trader_volume(&windows[t], &ranking));
    }

    let mut delta_beta0 = vec![None; weeks];
    let mut motif_2_inc = vec![None; weeks];
    for t in 1..weeks {
        let (current, previous) = if config.betti_p == 0 {
            (&topology[t].betti0, &topology[t - 1].betti0)
        } else {
            (&topology[t].betti1, &topology[t - 1].betti1)
        };
        let increment = left_increment(current, previous)?;
        delta_beta0[t] =
            Some(select_betti_feature(&increment, config.betti_k, config.betti_p)? as f64);
        let motifs = motif_increment(&topology[t].census, &topology[t - 1].census)?;
        motif_2_inc[t] = Some(motifs.deltas[1] as f64);
    }

    let components = FeatureComponents {
        weeks,
        price,
        trade_volume: windows.iter().map(trade_volume).collect(),
        trade_volume_top,
        puell_mult,
        sentiment_sum,
        motif_2_inc,
        delta_beta0,
        start_week,
    };
    let rows = assemble_features(&components)?;

    Ok(FeatureBundle {
        anchor,
        weeks,
        topology,
        rows,
    })
}

/// Topological summaries for one window (used standalone by the CLI's
/// transaction-only subcommands).
pub fn week_topology(window: &WeekWindow, config: &PipelineConfig) -> Result<WeekTopology> {
    let digraph = build_digraph(window);
    let undirected = to_undirected(&digraph);
    let multiset: Vec<f64> = match config.decile_mode {
        DecileMode::Undirected => undirected.weight_multiset(),
        DecileMode::Raw => window.records.iter().map(|r| r.amount).collect(),
    };
    let scales = compute_thresholds(&multiset, window.index)?;
    let betti0 = betti_sequence(&undirected, &scales, 0, window.index)?;
    let betti1 = betti_sequence(&undirected, &scales, 1, window.index)?;
    let filtered = if config.top_filter_raw {
        filter_top_edges_raw(&digraph, window, config.top_fraction)
    } else {
        filter_top_edges(&digraph, config.top_fraction)
    };
    let census = census_triads_for_week(&filtered, config.match_mode, window.index);
    Ok(WeekTopology {
        week: window.index,
        scales,
        betti0,
        betti1,
        census,
    })
}

fn resolve_terms<'a>(
    trends: &'a [(String, TimeSeries)],
    config: &PipelineConfig,
) -> Result<(&'a TimeSeries, &'a TimeSeries)> {
    let find = |name: &str| -> Result<&'a TimeSeries> {
        trends
            .iter()
            .find(|(term, _)| term == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::InvalidArgument(format!("trends file has no term {name:?}")))
    };
    match &config.terms {
        Some((a, b)) => Ok((find(a)?, find(b)?)),
        None => {
            if trends.len() == 2 {
                Ok((&trends[0].1, &trends[1].1))
            } else {
                Err(Error::InvalidArgument(format!(
                    "trends file has {} terms; configure which two to use",
                    trends.len()
                )))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// CSV surfaces
// ---------------------------------------------------------------------------

fn fmt(value: f64) -> String {
    format!("{value}")
}

/// Feature matrix with the model's column names plus `target` (blank when
/// undefined).
pub fn write_feature_csv(rows: &[FeatureRow]) -> String {
    let mut out = String::from("week");
    for f in ALL_FEATURES {
        out.push(',');
        out.push_str(f.column_name());
    }
    out.push_str(",target\n");
    for row in rows {
        out.push_str(&row.week.to_string());
        for f in ALL_FEATURES {
            out.push(',');
            out.push_str(&fmt(row.value(f)));
        }
        out.push(',');
        if let Some(y) = row.target {
            out.push_str(&fmt(y));
        }
        out.push('\n');
    }
    out
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<Vec<FeatureRow>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let expected: Vec<String> = std::iter::once("week".to_string())
        .chain(ALL_FEATURES.iter().map(|f| f.column_name().to_string()))
        .chain(std::iter::once("target".to_string()))
        .collect();
    let actual: Vec<String> = headers.iter().map(str::to_string).collect();
    if actual != expected {
        return Err(Error::InvalidArgument(format!(
            "unexpected feature-matrix header {actual:?}"
        )));
    }
    let mut rows = Vec::new();
    for (idx, record) in csv_reader.records().enumerate() {
        let record = record?;
        let line = idx + 2;
        let parse = |pos: usize| -> Result<f64> {
            record[pos].parse().map_err(|e| Error::Record {
                line,
                message: format!("bad number in column {pos}: {e}"),
            })
        };
        let week: usize = record[0].parse().map_err(|e| Error::Record {
            line,
            message: format!("bad week: {e}"),
        })?;
        let target = if record[10].is_empty() {
            None
        } else {
            Some(parse(10)?)
        };
        rows.push(FeatureRow {
            week,
            price: parse(1)?,
            price_inc: parse(2)?,
            trade_volume: parse(3)?,
            trade_volume_top: parse(4)?,
            puell_mult: parse(5)?,
            puell_mult_inc: parse(6)?,
            sent_inc: parse(7)?,
            motif_2_inc: parse(8)?,
            delta_beta0: parse(9)?,
            target,
        });
    }
    Ok(rows)
}

/// Per-week Betti values: `week,p,beta_e10,...,beta_e100`.
pub fn write_topology_csv(topology: &[WeekTopology]) -> String {
    let mut out = String::from("week,p");
    for k in DECILE_LEVELS {
        out.push_str(&format!(",beta_e{k}"));
    }
    out.push('\n');
    for entry in topology {
        for seq in [&entry.betti0, &entry.betti1] {
            out.push_str(&format!("{},{}", entry.week, seq.p));
            for v in &seq.values {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Motif counts and increments (increments blank for week 0).
pub fn write_motif_csv(topology: &[WeekTopology]) -> String {
    let mut out =
        String::from("week,motif_1,motif_2,motif_3,motif_1_inc,motif_2_inc,motif_3_inc\n");
    for (i, entry) in topology.iter().enumerate() {
        let c = &entry.census.counts;
        out.push_str(&format!("{},{},{},{}", entry.week, c[0], c[1], c[2]));
        if i == 0 {
            out.push_str(",,,\n");
        } else {
            let p = &topology[i - 1].census.counts;
            for j in 0..3 {
                out.push_str(&format!(",{}", c[j] as i64 - p[j] as i64));
            }
            out.push('\n');
        }
    }
    out
}

/// `week,actual,predicted`; actual blank until realized.
pub fn write_predictions_csv(predictions: &[Prediction]) -> String {
    let mut out = String::from("week,actual,predicted\n");
    for p in predictions {
        out.push_str(&p.week.to_string());
        out.push(',');
        if let Some(actual) = p.actual {
            out.push_str(&fmt(actual));
        }
        out.push(',');
        out.push_str(&fmt(p.predicted));
        out.push('\n');
    }
    out
}

pub fn write_correlation_csv(report: &CorrelationReport) -> String {
    let mut out = String::from("feature,pearson_r,pearson_sign,spearman_rho,spearman_sign\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.feature,
            fmt(e.pearson_r),
            if e.pearson_significant { "yes" } else { "no" },
            fmt(e.spearman_rho),
            if e.spearman_significant { "yes" } else { "no" },
        ));
    }
    out
}

/// Correlations of every feature column against the target, over rows with a
/// realized target.
pub fn feature_correlations(rows: &[FeatureRow], alpha: f64) -> Result<CorrelationReport> {
    let labeled: Vec<&FeatureRow> = rows.iter().filter(|r| r.target.is_some()).collect();
    let target: Vec<f64> = labeled.iter().map(|r| r.target.unwrap()).collect();
    let features: Vec<(String, Vec<f64>)> = ALL_FEATURES
        .iter()
        .map(|&f| {
            (
                f.column_name().to_string(),
                labeled.iter().map(|r| r.value(f)).collect(),
            )
        })
        .collect();
    correlation_report(&features, &target, alpha)
}

// ---------------------------------------------------------------------------
// Attribution experiment
// ---------------------------------------------------------------------------

/// Retrain-ensemble attribution configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapConfig {
    pub model: ModelConfig,
    pub train_frac: f64,
    pub validation_frac: f64,
    pub retrains: usize,
    pub master_seed: u64,
    /// Top fraction of |increment| marking a test week anomalous.
    pub anomaly_fraction: f64,
    /// Cap on background windows (evenly thinned from the training windows);
    /// 0 keeps them all.
    pub background_cap: usize,
    pub statistic: RankStatistic,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train_frac: 0.6,
            validation_frac: 0.2,
            retrains: 20,
            master_seed: 7,
            anomaly_fraction: 0.2,
            background_cap: 0,
            statistic: RankStatistic::MeanAbsolute,
        }
    }
}

/// Attribution outputs: per-retrain reports over the test weeks and the two
/// aggregated rank tables.
#[derive(Debug, Clone)]
pub struct ShapRun {
    pub split: SplitPlan,
    pub anomalous: AnomalousWeeks,
    /// reports[retrain][test week index]
    pub reports: Vec<Vec<ShapleyReport>>,
    pub rank_anomalous: RankTable,
    pub rank_all: RankTable,
}

/// Test-range (target week, actual) pairs.
pub fn test_actuals(rows: &[FeatureRow], split: &SplitPlan) -> Vec<(usize, f64)> {
    split
        .test
        .clone()
        .filter(|&r| r < rows.len())
        .filter_map(|r| rows[r].target.map(|y| (rows[r].week + 1, y)))
        .collect()
}

/// Retrains the model `retrains` times, computes exact Shapley reports for
/// every realized test week, and aggregates SHAP ranks over the anomalous and
/// full test-week sets.
pub fn shap_run(rows: &[FeatureRow], config: &ShapConfig) -> Result<ShapRun> {
    let split = SplitPlan::fractional(rows.len(), config.train_frac, config.validation_frac)?;
    let actuals = test_actuals(rows, &split);
    if actuals.is_empty() {
        return Err(Error::InvalidArgument("no realized test weeks".into()));
    }
    let anomalous = detect_anomalous_weeks(&actuals, config.anomaly_fraction)?;

    let eval_rows: Vec<usize> = split
        .test
        .clone()
        .filter(|&r| r < rows.len() && rows[r].target.is_some() && r + 1 >= config.model.window)
        .collect();

    let reports: Vec<Vec<ShapleyReport>> = (0..config.retrains)
        .into_par_iter()
        .map(|retrain| -> Result<Vec<ShapleyReport>> {
            let mut model_config = config.model;
            model_config.seed = derive_seed(config.master_seed, retrain as u64);
            let model = train(rows, &split, &model_config, &ALL_FEATURES)?;
            let background = background_windows(rows, &split, &model, config.background_cap);
            if background.is_empty() {
                return Err(Error::InvalidArgument("empty background set".into()));
            }
            eval_rows
                .iter()
                .map(|&r| {
                    let instance: Vec<Vec<f64>> = rows[r + 1 - model_config.window..=r]
                        .iter()
                        .map(|row| row.values(&ALL_FEATURES))
                        .collect();
                    shapley_exact(&model, rows[r].week + 1, &instance, &background)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let anomalous_reports: Vec<Vec<ShapleyReport>> = reports
        .iter()
        .map(|per_week| {
            per_week
                .iter()
                .filter(|r| anomalous.weeks.contains(&r.week))
                .cloned()
                .collect()
        })
        .collect();
    let rank_anomalous = rank_features(&anomalous_reports, config.statistic)?;
    let rank_all = rank_features(&reports, config.statistic)?;

    Ok(ShapRun {
        split,
        anomalous,
        reports,
        rank_anomalous,
        rank_all,
    })
}

fn background_windows(
    rows: &[FeatureRow],
    split: &SplitPlan,
    model: &TrainedModel,
    cap: usize,
) -> Vec<Vec<Vec<f64>>> {
    let window = model.config.window;
    let all: Vec<Vec<Vec<f64>>> = split
        .train
        .clone()
        .filter(|&r| r + 1 >= window && r < rows.len())
        .map(|r| {
            rows[r + 1 - window..=r]
                .iter()
                .map(|row| row.values(&model.features))
                .collect()
        })
        .collect();
    if cap == 0 || all.len() <= cap {
        return all;
    }
    // Evenly thinned, first window always kept.
    (0..cap)
        .map(|i| all[i * all.len() / cap].clone())
        .collect()
}

/// Rank tables in the two-column layout: feature, anomalous-weeks rank,
/// all-weeks rank.
pub fn write_rank_csv(run: &ShapRun) -> String {
    let mut out = String::from("feature,anomalous_weeks_rank,all_weeks_rank\n");
    let mut order: Vec<usize> = (0..ALL_FEATURES.len()).collect();
    order.sort_by(|&a, &b| {
        run.rank_anomalous.average_rank[a]
            .partial_cmp(&run.rank_anomalous.average_rank[b])
            .unwrap()
    });
    for j in order {
        out.push_str(&format!(
            "{},{},{}\n",
            ALL_FEATURES[j].column_name(),
            fmt(run.rank_anomalous.average_rank[j]),
            fmt(run.rank_all.average_rank[j]),
        ));
    }
    out
}

/// Per-week attribution table: week, base, one column per feature, output.
pub fn write_shapley_csv(reports: &[ShapleyReport]) -> String {
    let mut out = String::from("week,base_value");
    for f in ALL_FEATURES {
        out.push_str(&format!(",phi_{}", f.column_name()));
    }
    out.push_str(",model_output\n");
    for report in reports {
        out.push_str(&format!("{},{}", report.week, fmt(report.base_value)));
        for phi in &report.attributions {
            out.push_str(&format!(",{}", fmt(*phi)));
        }
        out.push_str(&format!(",{}\n", fmt(report.model_output)));
    }
    out
}

/// Human-readable summary of whichever reports were produced.
pub fn render_summary(
    correlations: Option<&CorrelationReport>,
    shap: Option<&ShapRun>,
    ablation: Option<&crate::eval::AblationReport>,
) -> String {
    let mut out = String::new();
    if let Some(report) = correlations {
        out.push_str(&format!(
            "Pairwise correlations with the target (n = {}, alpha = {})\n",
            report.samples, report.alpha
        ));
        out.push_str(&format!(
            "{:<18} {:>9} {:>5} {:>9} {:>5}\n",
            "feature", "pearson", "sign", "spearman", "sign"
        ));
        for e in &report.entries {
            out.push_str(&format!(
                "{:<18} {:>9.3} {:>5} {:>9.3} {:>5}\n",
                e.feature,
                e.pearson_r,
                if e.pearson_significant { "yes" } else { "no" },
                e.spearman_rho,
                if e.spearman_significant { "yes" } else { "no" },
            ));
        }
        out.push('\n');
    }
    if let Some(run) = shap {
        out.push_str(&format!(
            "Average SHAP ranks ({} retrains; {} anomalous of {} test weeks)\n",
            run.rank_all.retrains,
            run.anomalous.weeks.len(),
            run.rank_all.weeks
        ));
        out.push_str(&format!(
            "{:<18} {:>15} {:>10}\n",
            "feature", "anomalous weeks", "all weeks"
        ));
        let mut order: Vec<usize> = (0..ALL_FEATURES.len()).collect();
        order.sort_by(|&a, &b| {
            run.rank_anomalous.average_rank[a]
                .partial_cmp(&run.rank_anomalous.average_rank[b])
                .unwrap()
        });
        for j in order {
            out.push_str(&format!(
                "{:<18} {:>15.2} {:>10.2}\n",
                ALL_FEATURES[j].column_name(),
                run.rank_anomalous.average_rank[j],
                run.rank_all.average_rank[j],
            ));
        }
        if let Some(warning) = &run.anomalous.warning {
            out.push_str(&format!("note: {warning}\n"));
        }
        out.push('\n');
    }
    if let Some(report) = ablation {
        out.push_str(&format!(
            "RMSE ablation ({} retrains, refit stride {})\n",
            report.retrains, report.stride
        ));
        out.push_str(&format!(
            "{:<32} {:>16} {:>12}\n",
            "features", "anomalous % gain", "all % gain"
        ));
        for e in &report.entries {
            out.push_str(&format!(
                "{:<32} {:>15.1}% {:>11.1}%\n",
                e.name,
                100.0 * e.gain_anomalous,
                100.0 * e.gain_all,
            ));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Windows on disk (ingest subcommand)
// ---------------------------------------------------------------------------

/// Manifest entry for one window file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowManifestEntry {
    pub week: usize,
    pub start: String,
    pub end: String,
    pub records: usize,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowManifest {
    pub anchor: String,
    pub weeks: usize,
    pub skipped_records: usize,
    pub self_transfers: usize,
    pub windows: Vec<WindowManifestEntry>,
}

/// Writes one transactions CSV per week plus `manifest.json`.
pub fn write_windows(
    dir: &Path,
    windows: &[WeekWindow],
    anchor: DateTime<Utc>,
    skip_report: &SkipReport,
) -> Result<WindowManifest> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for window in windows {
        let file = format!("week_{:04}.csv", window.index);
        let mut buffer = Vec::new();
        crate::ingest::write_transactions(&window.records, &mut buffer)?;
        std::fs::write(dir.join(&file), buffer)?;
        entries.push(WindowManifestEntry {
            week: window.index,
            start: window.start.to_rfc3339(),
            end: window.end.to_rfc3339(),
            records: window.records.len(),
            file,
        });
    }
    let manifest = WindowManifest {
        anchor: anchor.to_rfc3339(),
        weeks: windows.len(),
        skipped_records: skip_report.skipped.len(),
        self_transfers: skip_report.self_transfers,
        windows: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidArgument(format!("manifest encode: {e}")))?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SyntheticScenario};

    fn small_inputs(weeks: usize, seed: u64, coupling: f64) -> RawInputs {
        let scenario = SyntheticScenario {
            weeks,
            seed,
            coupling,
            ..SyntheticScenario::default()
        };
        RawInputs::from_synthetic(&generate(&scenario), ParseMode::Strict).unwrap()
    }

    #[test]
    fn features_recover_the_planted_betti_and_motif_series() {
        let scenario = SyntheticScenario {
            weeks: 30,
            seed: 5,
            ..SyntheticScenario::default()
        };
        let data = generate(&scenario);
        let inputs = RawInputs::from_synthetic(&data, ParseMode::Strict).unwrap();
        let bundle = compute_features(&inputs, &PipelineConfig::default()).unwrap();
        assert_eq!(bundle.weeks, 30);
        // The 40%-scale component count is the planted schedule, and the
        // filtered-graph motif-2 count is the gadget schedule.
        for (t, topo) in bundle.topology.iter().enumerate() {
            assert_eq!(
                topo.betti0.values[3], data.truth.components[t],
                "week {t} betti0 at k=40"
            );
            assert_eq!(
                topo.census.counts[1], data.truth.gadgets[t] as u64,
                "week {t} motif 2"
            );
        }
        for row in &bundle.rows {
            let t = row.week;
            let expected_dc =
                data.truth.components[t] as f64 - data.truth.components[t - 1] as f64;
            assert_eq!(row.delta_beta0, expected_dc, "week {t} delta_beta0");
            let expected_dg = data.truth.gadgets[t] as f64 - data.truth.gadgets[t - 1] as f64;
            assert_eq!(row.motif_2_inc, expected_dg, "week {t} motif_2_inc");
            if let Some(target) = row.target {
                assert!((target - data.truth.targets[t]).abs() < 1e-9, "week {t} target");
            }
        }
        // Rows start after the ranking warmup and cover every later week.
        assert_eq!(bundle.rows.first().unwrap().week, 9);
        assert_eq!(bundle.rows.len(), 30 - 9);
    }

    #[test]
    fn feature_csv_round_trips() {
        let inputs = small_inputs(25, 3, 0.9);
        let bundle = compute_features(&inputs, &PipelineConfig::default()).unwrap();
        let csv = write_feature_csv(&bundle.rows);
        let rows = read_feature_csv(csv.as_bytes()).unwrap();
        assert_eq!(rows, bundle.rows);
    }

    #[test]
    fn feature_stage_is_deterministic() {
        let inputs = small_inputs(25, 9, 0.9);
        let a = compute_features(&inputs, &PipelineConfig::default()).unwrap();
        let b = compute_features(&inputs, &PipelineConfig::default()).unwrap();
        assert_eq!(write_feature_csv(&a.rows), write_feature_csv(&b.rows));
        assert_eq!(write_topology_csv(&a.topology), write_topology_csv(&b.topology));
    }

    #[test]
    fn truncation_replay_leaves_features_identical() {
        let scenario = SyntheticScenario {
            weeks: 40,
            seed: 13,
            ..SyntheticScenario::default()
        };
        let data = generate(&scenario);
        let inputs = RawInputs::from_synthetic(&data, ParseMode::Strict).unwrap();
        let full = compute_features(&inputs, &PipelineConfig::default()).unwrap();

        let cut_week = 25usize;
        let anchor = crate::synth::synthetic_anchor();
        let cutoff = anchor + chrono::Duration::seconds((cut_week as i64 + 1) * 7 * 86400);
        let truncated = RawInputs {
            records: inputs
                .records
                .iter()
                .filter(|r| r.timestamp < cutoff)
                .cloned()
                .collect(),
            skip_report: SkipReport::default(),
            price: TimeSeries::new(
                SeriesKind::Price,
                inputs
                    .price
                    .points
                    .iter()
                    .copied()
                    .filter(|p| week_of_date(anchor, p.0).is_some_and(|w| w <= cut_week))
                    .collect(),
            )
            .unwrap(),
            issuance: inputs.issuance.clone(),
            trends: inputs
                .trends
                .iter()
                .map(|(term, series)| {
                    (
                        term.clone(),
                        TimeSeries::new(
                            SeriesKind::SearchFrequency,
                            series
                                .points
                                .iter()
                                .copied()
                                .filter(|p| {
                                    week_of_date(anchor, p.0).is_some_and(|w| w <= cut_week)
                                })
                                .collect(),
                        )
                        .unwrap(),
                    )
                })
                .collect(),
        };
        let partial = compute_features(&truncated, &PipelineConfig::default()).unwrap();
        for row in &partial.rows {
            if row.week <= cut_week {
                let reference = full.rows.iter().find(|r| r.week == row.week).unwrap();
                let mut expected = reference.clone();
                if row.week == cut_week {
                    expected.target = None;
                }
                assert_eq!(row, &expected, "week {}", row.week);
            }
        }
    }

    #[test]
    fn weekly_volume_equals_digraph_arc_mass() {
        let scenario = SyntheticScenario {
            weeks: 8,
            seed: 17,
            ..SyntheticScenario::default()
        };
        let data = generate(&scenario);
        let inputs = RawInputs::from_synthetic(&data, ParseMode::Strict).unwrap();
        let windows =
            partition_weeks(inputs.records.clone(), crate::synth::synthetic_anchor()).unwrap();
        for window in &windows {
            let volume = trade_volume(window);
            let graph = build_digraph(window);
            assert!(
                (volume - graph.total_weight()).abs() < 1e-9 * volume.max(1.0),
                "week {}",
                window.index
            );
        }
    }

    #[test]
    fn correlation_report_sees_the_planted_coupling() {
        let inputs = small_inputs(120, 21, 0.9);
        let bundle = compute_features(&inputs, &PipelineConfig::default()).unwrap();
        let report = feature_correlations(&bundle.rows, 0.05).unwrap();
        let delta = report
            .entries
            .iter()
            .find(|e| e.feature == "delta_beta0")
            .unwrap();
        assert!(delta.pearson_r > 0.5, "r = {}", delta.pearson_r);
        assert!(delta.pearson_significant);
    }
}
