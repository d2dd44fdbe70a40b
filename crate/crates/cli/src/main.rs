//! Umbrella CLI: ingest, weekly feature extraction, forecaster training,
//! walk-forward prediction, Shapley attribution, ablation, synthetic data,
//! and report rendering.

mod config;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use config::AppConfig;
use ledgertopo::eval::{ablation, standard_ablation_sets, write_ablation_csv};
use ledgertopo::forecast::{
    load_model, save_model, train, walk_forward_predict, Prediction, SplitPlan,
};
use ledgertopo::ingest::{parse_transactions, partition_weeks};
use ledgertopo::market::ALL_FEATURES;
use ledgertopo::pipeline::{
    compute_features, feature_correlations, read_feature_csv, render_summary, shap_run,
    week_topology, write_correlation_csv, write_feature_csv, write_motif_csv,
    write_predictions_csv, write_rank_csv, write_shapley_csv, write_topology_csv, write_windows,
    RawInputs, WeekTopology,
};
use ledgertopo::synth::{generate, SyntheticScenario};

#[derive(Parser)]
#[command(
    name = "ledgertopo",
    version,
    about = "Weekly transaction-graph topology features and price-increment forecasting"
)]
struct Cli {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputFiles {
    /// Transactions CSV (timestamp,sender,receiver,amount).
    #[arg(long)]
    tx: PathBuf,
    /// Weekly price CSV (date,price).
    #[arg(long)]
    price: Option<PathBuf>,
    /// Daily issuance CSV (date,issuance_usd).
    #[arg(long)]
    issuance: Option<PathBuf>,
    /// Weekly search-frequency CSV (date,term,frequency).
    #[arg(long)]
    trends: Option<PathBuf>,
    /// Week-0 start as RFC 3339; defaults to the Monday 00:00 UTC at or
    /// before the earliest record.
    #[arg(long)]
    anchor: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a transaction stream into weekly window files.
    Ingest {
        #[arg(long)]
        tx: PathBuf,
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also dump per-week digraph edge lists (`u v w`, interned ids) and
        /// id maps for oracle cross-checks.
        #[arg(long, default_value_t = false)]
        dump_graphs: bool,
    },
    /// Emit weekly feature tables.
    Features {
        #[command(subcommand)]
        what: FeatureKind,
    },
    /// Train the forecaster on the chronological split and save the model.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict test-range increments with a saved model or by walk-forward
    /// retraining.
    Predict {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        walk_forward: bool,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact Shapley attributions over retrains plus aggregated rank tables.
    Shap {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        retrains: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        background_cap: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Feature-set RMSE ablation against the basic set.
    Ablate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        retrains: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the synthetic input files for one scenario.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        weeks: Option<usize>,
        #[arg(long)]
        coupling: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlation tables and a text summary, optionally with SHAP ranks and
    /// the ablation.
    Report {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = false)]
        shap: bool,
        #[arg(long, default_value_t = false)]
        ablate: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum FeatureKind {
    /// Betti sequences per week and dimension.
    Topo {
        #[command(flatten)]
        inputs: InputFiles,
        #[arg(long)]
        out: PathBuf,
    },
    /// Motif counts and increments on the filtered digraph.
    Motifs {
        #[command(flatten)]
        inputs: InputFiles,
        #[arg(long)]
        out: PathBuf,
    },
    /// Market indicator columns only.
    Market {
        #[command(flatten)]
        inputs: InputFiles,
        #[arg(long)]
        out: PathBuf,
    },
    /// The full feature matrix with targets.
    All {
        #[command(flatten)]
        inputs: InputFiles,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_anchor(text: &Option<String>) -> Result<Option<DateTime<Utc>>> {
    Ok(match text {
        Some(t) => Some(
            DateTime::parse_from_rfc3339(t)
                .context("anchor must be RFC 3339")?
                .with_timezone(&Utc),
        ),
        None => None,
    })
}

fn load_inputs(files: &InputFiles, config: &mut AppConfig) -> Result<RawInputs> {
    if let Some(anchor) = parse_anchor(&files.anchor)? {
        config.pipeline.anchor = Some(anchor);
    }
    let need = |path: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
        path.clone()
            .with_context(|| format!("--{what} is required for this subcommand"))
    };
    Ok(RawInputs::from_files(
        &files.tx,
        &need(&files.price, "price")?,
        &need(&files.issuance, "issuance")?,
        &need(&files.trends, "trends")?,
        config.pipeline.parse_mode,
    )?)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = AppConfig::load(cli.config.as_deref())?;

    match cli.command {
        Command::Ingest {
            tx,
            anchor,
            out,
            dump_graphs,
        } => {
            let (records, report) = parse_transactions(
                std::fs::File::open(&tx).with_context(|| format!("opening {}", tx.display()))?,
                config.pipeline.parse_mode,
            )?;
            let anchor = match parse_anchor(&anchor)? {
                Some(a) => a,
                None => ledgertopo::ingest::default_anchor(&records)
                    .context("empty transaction stream")?,
            };
            let windows = partition_weeks(records, anchor)?;
            let manifest = write_windows(&out, &windows, anchor, &report)?;
            if dump_graphs {
                for window in &windows {
                    let graph = ledgertopo::graph::build_digraph(window);
                    let mut edges = Vec::new();
                    ledgertopo::graph::write_edge_list(&graph, &mut edges)?;
                    std::fs::write(out.join(format!("week_{:04}.edges", window.index)), edges)?;
                    let mut ids = Vec::new();
                    ledgertopo::graph::write_id_map(&graph, &mut ids)?;
                    std::fs::write(out.join(format!("week_{:04}.ids", window.index)), ids)?;
                }
            }
            println!(
                "wrote {} window files to {} ({} records skipped)",
                manifest.weeks,
                out.display(),
                manifest.skipped_records
            );
        }
        Command::Features { what } => run_features(what, &mut config)?,
        Command::Train { features, out, seed } => {
            if let Some(seed) = seed {
                config.model.seed = seed;
            }
            let rows = read_feature_csv(std::fs::File::open(&features)?)?;
            let split =
                SplitPlan::fractional(rows.len(), config.train_frac, config.validation_frac)?;
            let model = train(&rows, &split, &config.model, &ALL_FEATURES)?;
            let mut buffer = Vec::new();
            save_model(&model, &mut buffer)?;
            std::fs::write(&out, buffer)?;
            println!(
                "trained on rows {:?} (validation MSE {:.6}); model written to {}",
                split.train,
                model.best_validation_mse,
                out.display()
            );
        }
        Command::Predict {
            features,
            model,
            walk_forward,
            stride,
            out,
        } => {
            let rows = read_feature_csv(std::fs::File::open(&features)?)?;
            let split =
                SplitPlan::fractional(rows.len(), config.train_frac, config.validation_frac)?;
            let predictions: Vec<Prediction> = if walk_forward {
                let stride = stride.unwrap_or(config.stride);
                walk_forward_predict(&rows, &split, &config.model, &ALL_FEATURES, stride)?
            } else {
                let model_path = model.context("--model required unless --walk-forward")?;
                let trained = load_model(std::fs::File::open(&model_path)?)?;
                split
                    .test
                    .clone()
                    .filter(|&r| r < rows.len() && r + 1 >= trained.config.window)
                    .map(|r| {
                        Ok(Prediction {
                            week: rows[r].week + 1,
                            label_row: r,
                            actual: rows[r].target,
                            predicted: trained.predict_at(&rows, r)?,
                        })
                    })
                    .collect::<Result<Vec<_>, ledgertopo::Error>>()?
            };
            write(&out, &write_predictions_csv(&predictions))?;
            println!("wrote {} predictions to {}", predictions.len(), out.display());
        }
        Command::Shap {
            features,
            retrains,
            master_seed,
            background_cap,
            out_dir,
        } => {
            if let Some(r) = retrains {
                config.retrains = r;
            }
            if let Some(s) = master_seed {
                config.master_seed = s;
            }
            config.sync();
            if let Some(cap) = background_cap {
                config.shap.background_cap = cap;
            }
            let rows = read_feature_csv(std::fs::File::open(&features)?)?;
            let run = shap_run(&rows, &config.shap)?;
            std::fs::create_dir_all(&out_dir)?;
            write(&out_dir.join("rank_table.csv"), &write_rank_csv(&run))?;
            let averaged = average_reports(&run.reports);
            write(&out_dir.join("shapley_weeks.csv"), &write_shapley_csv(&averaged))?;
            write(
                &out_dir.join("summary.txt"),
                &render_summary(None, Some(&run), None),
            )?;
            println!(
                "wrote SHAP tables for {} retrains to {}",
                run.rank_all.retrains,
                out_dir.display()
            );
        }
        Command::Ablate {
            features,
            retrains,
            master_seed,
            stride,
            out,
        } => {
            if let Some(r) = retrains {
                config.retrains = r;
            }
            if let Some(s) = master_seed {
                config.master_seed = s;
            }
            let stride = stride.unwrap_or(config.stride);
            let rows = read_feature_csv(std::fs::File::open(&features)?)?;
            let split =
                SplitPlan::fractional(rows.len(), config.train_frac, config.validation_frac)?;
            let report = ablation(
                &rows,
                &split,
                &config.model,
                &standard_ablation_sets(),
                config.retrains,
                config.master_seed,
                config.anomaly_fraction,
                stride,
            )?;
            write(&out, &write_ablation_csv(&report))?;
            println!(
                "wrote ablation over {} retrains to {}",
                config.retrains,
                out.display()
            );
        }
        Command::Synth {
            seed,
            weeks,
            coupling,
            noise,
            out,
        } => {
            let mut scenario = SyntheticScenario::default();
            if let Some(v) = seed {
                scenario.seed = v;
            }
            if let Some(v) = weeks {
                scenario.weeks = v;
            }
            if let Some(v) = coupling {
                scenario.coupling = v;
            }
            if let Some(v) = noise {
                scenario.noise = v;
            }
            let data = generate(&scenario);
            std::fs::create_dir_all(&out)?;
            write(&out.join("transactions.csv"), &data.transactions_csv)?;
            write(&out.join("price.csv"), &data.price_csv)?;
            write(&out.join("issuance.csv"), &data.issuance_csv)?;
            write(&out.join("trends.csv"), &data.trends_csv)?;
            println!(
                "wrote {} synthetic weeks (seed {}) to {}",
                scenario.weeks,
                scenario.seed,
                out.display()
            );
        }
        Command::Report {
            features,
            shap,
            ablate,
            out_dir,
        } => {
            let rows = read_feature_csv(std::fs::File::open(&features)?)?;
            let correlations = feature_correlations(&rows, config.alpha)?;
            std::fs::create_dir_all(&out_dir)?;
            write(
                &out_dir.join("correlations.csv"),
                &write_correlation_csv(&correlations),
            )?;
            let shap_result = if shap {
                config.sync();
                let run = shap_run(&rows, &config.shap)?;
                write(&out_dir.join("rank_table.csv"), &write_rank_csv(&run))?;
                Some(run)
            } else {
                None
            };
            let ablation_result = if ablate {
                let split =
                    SplitPlan::fractional(rows.len(), config.train_frac, config.validation_frac)?;
                let report = ablation(
                    &rows,
                    &split,
                    &config.model,
                    &standard_ablation_sets(),
                    config.retrains,
                    config.master_seed,
                    config.anomaly_fraction,
                    config.stride,
                )?;
                write(&out_dir.join("ablation.csv"), &write_ablation_csv(&report))?;
                Some(report)
            } else {
                None
            };
            write(
                &out_dir.join("summary.txt"),
                &render_summary(
                    Some(&correlations),
                    shap_result.as_ref(),
                    ablation_result.as_ref(),
                ),
            )?;
            println!("wrote report to {}", out_dir.display());
        }
    }
    Ok(())
}

fn average_reports(
    per_retrain: &[Vec<ledgertopo::attribution::ShapleyReport>],
) -> Vec<ledgertopo::attribution::ShapleyReport> {
    if per_retrain.is_empty() {
        return Vec::new();
    }
    let weeks = per_retrain[0].len();
    let retrains = per_retrain.len() as f64;
    (0..weeks)
        .map(|w| {
            let n_features = per_retrain[0][w].attributions.len();
            let mut attributions = vec![0.0; n_features];
            let mut base = 0.0;
            let mut output = 0.0;
            for reports in per_retrain {
                base += reports[w].base_value / retrains;
                output += reports[w].model_output / retrains;
                for (acc, phi) in attributions.iter_mut().zip(&reports[w].attributions) {
                    *acc += phi / retrains;
                }
            }
            ledgertopo::attribution::ShapleyReport {
                week: per_retrain[0][w].week,
                base_value: base,
                attributions,
                model_output: output,
            }
        })
        .collect()
}

fn run_features(what: FeatureKind, config: &mut AppConfig) -> Result<()> {
    match what {
        FeatureKind::Topo { inputs, out } => {
            let bundle = topo_only(&inputs, config)?;
            write(&out, &write_topology_csv(&bundle))?;
            println!(
                "wrote Betti sequences for {} weeks to {}",
                bundle.len(),
                out.display()
            );
        }
        FeatureKind::Motifs { inputs, out } => {
            let bundle = topo_only(&inputs, config)?;
            write(&out, &write_motif_csv(&bundle))?;
            println!(
                "wrote motif censuses for {} weeks to {}",
                bundle.len(),
                out.display()
            );
        }
        FeatureKind::Market { inputs, out } => {
            let raw = load_inputs(&inputs, config)?;
            let bundle = compute_features(&raw, &config.pipeline)?;
            let mut csv = String::from(
                "week,price,price_inc,trade_volume,trade_volume_top,puell_mult,puell_mult_inc,sent_inc\n",
            );
            for row in &bundle.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    row.week,
                    row.price,
                    row.price_inc,
                    row.trade_volume,
                    row.trade_volume_top,
                    row.puell_mult,
                    row.puell_mult_inc,
                    row.sent_inc
                ));
            }
            write(&out, &csv)?;
            println!(
                "wrote market features for {} rows to {}",
                bundle.rows.len(),
                out.display()
            );
        }
        FeatureKind::All { inputs, out } => {
            let raw = load_inputs(&inputs, config)?;
            let bundle = compute_features(&raw, &config.pipeline)?;
            write(&out, &write_feature_csv(&bundle.rows))?;
            println!(
                "wrote {} feature rows over {} weeks to {}",
                bundle.rows.len(),
                bundle.weeks,
                out.display()
            );
        }
    }
    Ok(())
}

/// Topology tables need only the transaction stream.
fn topo_only(inputs: &InputFiles, config: &mut AppConfig) -> Result<Vec<WeekTopology>> {
    if let Some(anchor) = parse_anchor(&inputs.anchor)? {
        config.pipeline.anchor = Some(anchor);
    }
    let (records, _) = parse_transactions(
        std::fs::File::open(&inputs.tx)
            .with_context(|| format!("opening {}", inputs.tx.display()))?,
        config.pipeline.parse_mode,
    )?;
    let anchor = match config.pipeline.anchor {
        Some(a) => a,
        None => {
            ledgertopo::ingest::default_anchor(&records).context("empty transaction stream")?
        }
    };
    let windows = partition_weeks(records, anchor)?;
    windows
        .iter()
        .map(|w| Ok(week_topology(w, &config.pipeline)?))
        .collect()
}
