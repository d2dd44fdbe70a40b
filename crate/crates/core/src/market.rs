//! Non-topological weekly predictors and assembly of the full feature row.
//!
//! Trader ranking is strictly causal: scores for week t use wallet volumes and
//! price increments realized through week t-1 only.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{TimeSeries, WeekWindow};

/// The nine model features, in feature-matrix column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureId {
    Price,
    PriceInc,
    TradeVolume,
    TradeVolumeTop,
    PuellMult,
    PuellMultInc,
    SentInc,
    Motif2Inc,
    DeltaBeta0,
}

pub const ALL_FEATURES: [FeatureId; 9] = [
    FeatureId::Price,
    FeatureId::PriceInc,
    FeatureId::TradeVolume,
    FeatureId::TradeVolumeTop,
    FeatureId::PuellMult,
    FeatureId::PuellMultInc,
    FeatureId::SentInc,
    FeatureId::Motif2Inc,
    FeatureId::DeltaBeta0,
];

/// The paper-style reduced set: everything except the two topological features.
pub const BASIC_FEATURES: [FeatureId; 7] = [
    FeatureId::Price,
    FeatureId::PriceInc,
    FeatureId::TradeVolume,
    FeatureId::TradeVolumeTop,
    FeatureId::PuellMult,
    FeatureId::PuellMultInc,
    FeatureId::SentInc,
];

impl FeatureId {
    pub fn column_name(self) -> &'static str {
        match self {
            FeatureId::Price => "price",
            FeatureId::PriceInc => "price_inc",
            FeatureId::TradeVolume => "trade_volume",
            FeatureId::TradeVolumeTop => "trade_volume_top",
            FeatureId::PuellMult => "puell_mult",
            FeatureId::PuellMultInc => "puell_mult_inc",
            FeatureId::SentInc => "sent_inc",
            FeatureId::Motif2Inc => "motif_2_inc",
            FeatureId::DeltaBeta0 => "delta_beta0",
        }
    }

    pub fn from_column_name(name: &str) -> Option<Self> {
        ALL_FEATURES.iter().copied().find(|f| f.column_name() == name)
    }
}

/// One week's predictors plus the next-week price-increment target
/// (absent for the final week).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub week: usize,
    pub price: f64,
    pub price_inc: f64,
    pub trade_volume: f64,
    pub trade_volume_top: f64,
    pub puell_mult: f64,
    pub puell_mult_inc: f64,
    pub sent_inc: f64,
    pub motif_2_inc: f64,
    pub delta_beta0: f64,
    pub target: Option<f64>,
}

impl FeatureRow {
    pub fn value(&self, id: FeatureId) -> f64 {
        match id {
            FeatureId::Price => self.price,
            FeatureId::PriceInc => self.price_inc,
            FeatureId::TradeVolume => self.trade_volume,
            FeatureId::TradeVolumeTop => self.trade_volume_top,
            FeatureId::PuellMult => self.puell_mult,
            FeatureId::PuellMultInc => self.puell_mult_inc,
            FeatureId::SentInc => self.sent_inc,
            FeatureId::Motif2Inc => self.motif_2_inc,
            FeatureId::DeltaBeta0 => self.delta_beta0,
        }
    }

    pub fn values(&self, ids: &[FeatureId]) -> Vec<f64> {
        ids.iter().map(|&id| self.value(id)).collect()
    }
}

/// price and price_inc for week t.
pub fn price_features(prices: &[Option<f64>], t: usize) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(Error::MissingSeries {
            kind: "price (no previous week)".into(),
            week: t,
        });
    }
    let current = prices.get(t).copied().flatten().ok_or(Error::MissingSeries {
        kind: "price".into(),
        week: t,
    })?;
    let previous = prices
        .get(t - 1)
        .copied()
        .flatten()
        .ok_or(Error::MissingSeries {
            kind: "price".into(),
            week: t - 1,
        })?;
    Ok((current, current - previous))
}

/// Sum of raw transaction amounts in the window.
pub fn trade_volume(window: &WeekWindow) -> f64 {
    window.records.iter().map(|r| r.amount).sum()
}

/// Per-wallet participation volume (sender or receiver side) per week.
#[derive(Debug, Clone, Default)]
pub struct WalletVolumes {
    pub per_week: Vec<BTreeMap<String, f64>>,
}

impl WalletVolumes {
    pub fn from_windows(windows: &[WeekWindow]) -> Self {
        let per_week = windows
            .iter()
            .map(|window| {
                let mut volumes: BTreeMap<String, f64> = BTreeMap::new();
                for r in &window.records {
                    *volumes.entry(r.sender.clone()).or_insert(0.0) += r.amount;
                    *volumes.entry(r.receiver.clone()).or_insert(0.0) += r.amount;
                }
                volumes
            })
            .collect();
        Self { per_week }
    }
}

/// Causal wallet ranking for one week.
#[derive(Debug, Clone)]
pub struct TraderRanking {
    pub week: usize,
    /// Eligible wallets with their correlation scores, best first.
    pub scores: Vec<(String, f64)>,
    pub selected: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RankingParams {
    pub fraction: f64,
    pub min_history: usize,
    pub min_active_weeks: usize,
}

impl Default for RankingParams {
    fn default() -> Self {
        Self {
            fraction: 0.01,
            min_history: 8,
            min_active_weeks: 3,
        }
    }
}

/// Ranks wallets by the correlation between their weekly volumes and the
/// following week's price increment, over weeks strictly before t.
///
/// `next_increment[s]` must hold `price_{s+1} - price_s`; only entries with
/// `s <= t-2` are consulted, so nothing later than week t-1 is touched.
pub fn rank_top_traders(
    volumes: &WalletVolumes,
    next_increment: &[Option<f64>],
    t: usize,
    params: &RankingParams,
) -> Result<TraderRanking> {
    if params.fraction <= 0.0 || params.fraction > 1.0 {
        return Err(Error::InvalidArgument("fraction must be in (0, 1]".into()));
    }
    let history: Vec<usize> = (0..t.saturating_sub(1))
        .filter(|&s| next_increment.get(s).copied().flatten().is_some())
        .collect();
    if history.len() < params.min_history {
        return Err(Error::InsufficientHistory {
            needed: params.min_history,
            available: history.len(),
        });
    }

    let n = history.len() as f64;
    let y: Vec<f64> = history
        .iter()
        .map(|&s| next_increment[s].unwrap())
        .collect();
    let sum_y: f64 = y.iter().sum();
    let sum_y2: f64 = y.iter().map(|v| v * v).sum();
    let y_var_term = n * sum_y2 - sum_y * sum_y;

    // Sparse per-wallet sums over the history window.
    #[derive(Default)]
    struct Accum {
        active: usize,
        sum_v: f64,
        sum_v2: f64,
        sum_vy: f64,
    }
    let mut accum: BTreeMap<&str, Accum> = BTreeMap::new();
    for (pos, &s) in history.iter().enumerate() {
        if let Some(week_volumes) = volumes.per_week.get(s) {
            for (wallet, &v) in week_volumes {
                let a = accum.entry(wallet.as_str()).or_default();
                a.active += 1;
                a.sum_v += v;
                a.sum_v2 += v * v;
                a.sum_vy += v * y[pos];
            }
        }
    }

    let mut scores: Vec<(String, f64)> = Vec::new();
    if y_var_term > 0.0 {
        for (wallet, a) in &accum {
            if a.active < params.min_active_weeks {
                continue;
            }
            let v_var_term = n * a.sum_v2 - a.sum_v * a.sum_v;
            if v_var_term <= 0.0 {
                continue;
            }
            let r = (n * a.sum_vy - a.sum_v * sum_y) / (v_var_term * y_var_term).sqrt();
            scores.push(((*wallet).to_string(), r));
        }
    }
    scores.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });

    let take = if scores.is_empty() {
        0
    } else {
        crate::quantile::nearest_rank_index(scores.len(), params.fraction)
    };
    let selected = scores.iter().take(take).map(|(w, _)| w.clone()).collect();
    Ok(TraderRanking {
        week: t,
        scores,
        selected,
    })
}

/// Week-t volume restricted to transactions touching a selected wallet.
/// Each qualifying transaction is counted once.
pub fn top_trader_volume(window: &WeekWindow, ranking: &TraderRanking) -> f64 {
    window
        .records
        .iter()
        .filter(|r| ranking.selected.contains(&r.sender) || ranking.selected.contains(&r.receiver))
        .map(|r| r.amount)
        .sum()
}

/// Issuance on the given day divided by its 365-day moving average (the day
/// itself included). The series must be daily and contiguous over the window.
pub fn puell_multiple(issuance: &TimeSeries, day: NaiveDate) -> Result<f64> {
    let idx = issuance
        .points
        .binary_search_by_key(&day, |p| p.0)
        .map_err(|_| Error::InvalidArgument(format!("issuance series has no entry for {day}")))?;
    if idx + 1 < 365 {
        return Err(Error::InsufficientHistory {
            needed: 365,
            available: idx + 1,
        });
    }
    let window = &issuance.points[idx + 1 - 365..=idx];
    let expected_start = day - chrono::Duration::days(364);
    if window[0].0 != expected_start {
        return Err(Error::InvalidArgument(format!(
            "issuance series not daily-contiguous over [{expected_start}, {day}]"
        )));
    }
    let mean: f64 = window.iter().map(|p| p.1).sum::<f64>() / 365.0;
    if mean == 0.0 {
        return Err(Error::ZeroVariance("issuance moving average is zero".into()));
    }
    Ok(issuance.points[idx].1 / mean)
}

/// Increment of the summed search frequency of the two terms.
pub fn sentiment_increment(
    term_a: &[Option<f64>],
    term_b: &[Option<f64>],
    t: usize,
) -> Result<f64> {
    if t == 0 {
        return Err(Error::MissingSeries {
            kind: "sentiment (no previous week)".into(),
            week: 0,
        });
    }
    let sum_at = |week: usize| -> Result<f64> {
        let a = term_a.get(week).copied().flatten().ok_or(Error::MissingSeries {
            kind: "search-frequency term A".into(),
            week,
        })?;
        let b = term_b.get(week).copied().flatten().ok_or(Error::MissingSeries {
            kind: "search-frequency term B".into(),
            week,
        })?;
        Ok(a + b)
    };
    Ok(sum_at(t)? - sum_at(t - 1)?)
}

/// Per-week component values feeding row assembly. `None` marks a week where
/// that component is not defined.
#[derive(Debug, Clone, Default)]
pub struct FeatureComponents {
    pub weeks: usize,
    pub price: Vec<Option<f64>>,
    pub trade_volume: Vec<f64>,
    pub trade_volume_top: Vec<Option<f64>>,
    pub puell_mult: Vec<Option<f64>>,
    pub sentiment_sum: Vec<Option<f64>>,
    pub motif_2_inc: Vec<Option<f64>>,
    pub delta_beta0: Vec<Option<f64>>,
    /// First week with a full row: increments need one week of warmup,
    /// trader ranking needs its history.
    pub start_week: usize,
}

/// Builds chronological feature rows, or reports every (week, feature) gap.
pub fn assemble_features(components: &FeatureComponents) -> Result<Vec<FeatureRow>> {
    let mut missing: Vec<(usize, String)> = Vec::new();
    let mut rows = Vec::new();

    let get = |v: &Vec<Option<f64>>, t: usize| v.get(t).copied().flatten();

    for t in components.start_week..components.weeks {
        let mut require = |value: Option<f64>, name: &str| -> f64 {
            match value {
                Some(v) if v.is_finite() => v,
                _ => {
                    missing.push((t, name.to_string()));
                    f64::NAN
                }
            }
        };

        let price = require(get(&components.price, t), "price");
        let price_prev = require(
            if t == 0 { None } else { get(&components.price, t - 1) },
            "price_prev",
        );
        let trade_volume = require(components.trade_volume.get(t).copied(), "trade_volume");
        let trade_volume_top = require(get(&components.trade_volume_top, t), "trade_volume_top");
        let puell = require(get(&components.puell_mult, t), "puell_mult");
        let puell_prev = require(
            if t == 0 { None } else { get(&components.puell_mult, t - 1) },
            "puell_mult_prev",
        );
        let sent = require(get(&components.sentiment_sum, t), "sent");
        let sent_prev = require(
            if t == 0 { None } else { get(&components.sentiment_sum, t - 1) },
            "sent_prev",
        );
        let motif_2_inc = require(get(&components.motif_2_inc, t), "motif_2_inc");
        let delta_beta0 = require(get(&components.delta_beta0, t), "delta_beta0");

        let target = get(&components.price, t + 1).map(|next| next - price);

        rows.push(FeatureRow {
            week: t,
            price,
            price_inc: price - price_prev,
            trade_volume,
            trade_volume_top,
            puell_mult: puell,
            puell_mult_inc: puell - puell_prev,
            sent_inc: sent - sent_prev,
            motif_2_inc,
            delta_beta0,
            target,
        });
    }

    if !missing.is_empty() {
        return Err(Error::Alignment { missing });
    }
    // Interior weeks must have targets; only the final row may omit one.
    for row in rows.iter().take(rows.len().saturating_sub(1)) {
        if row.target.is_none() {
            return Err(Error::Alignment {
                missing: vec![(row.week, "target".to_string())],
            });
        }
    }
    Ok(rows)
}
