//! Transaction and auxiliary-series parsing, plus weekly windowing.
//!
//! Transactions arrive as UTF-8 CSV with header `timestamp,sender,receiver,amount`
//! (RFC 3339 timestamps). Auxiliary series use `date,price`, `date,issuance_usd`
//! and `date,term,frequency`. Weeks are half-open `[start, start + 7d)` intervals
//! anchored at a configurable UTC instant.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEEK_SECONDS: i64 = 7 * 24 * 3600;

/// One ledger transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub timestamp: DateTime<Utc>,
    pub sender: String,
    pub receiver: String,
    pub amount: f64,
}

/// A half-open weekly interval `[start, end)` with its transactions.
#[derive(Debug, Clone)]
pub struct WeekWindow {
    pub index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub records: Vec<TransactionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Price,
    Issuance,
    SearchFrequency,
}

/// Ordered (date, value) pairs; dates strictly increasing.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub kind: SeriesKind,
    pub points: Vec<(NaiveDate, f64)>,
}

impl TimeSeries {
    pub fn new(kind: SeriesKind, points: Vec<(NaiveDate, f64)>) -> Result<Self> {
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidArgument(format!(
                    "series dates not strictly increasing at {}",
                    pair[1].0
                )));
            }
        }
        Ok(Self { kind, points })
    }

    pub fn value_at(&self, date: NaiveDate) -> Option<f64> {
        self.points
            .binary_search_by_key(&date, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }
}

/// How record-level problems are handled during parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Bad records are skipped and reported.
    #[default]
    Lenient,
    /// Any record error fails the whole parse.
    Strict,
}

/// Skipped-record report from a lenient parse.
#[derive(Debug, Clone, Default)]
pub struct SkipReport {
    /// (line number, reason) for every rejected record.
    pub skipped: Vec<(usize, String)>,
    pub self_transfers: usize,
}

fn parse_record_error(line: usize, message: impl Into<String>) -> Error {
    Error::Record {
        line,
        message: message.into(),
    }
}

/// Parses a transaction CSV stream. Records are returned in timestamp order;
/// malformed lines are reported with their line numbers.
pub fn parse_transactions<R: Read>(
    reader: R,
    mode: ParseMode,
) -> Result<(Vec<TransactionRecord>, SkipReport)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    let mut report = SkipReport::default();

    for (row_idx, row) in csv_reader.records().enumerate() {
        // +2: 1-based, plus the header line.
        let line = row_idx + 2;
        let row = row?;
        match parse_row(&row, line) {
            Ok(record) => records.push(record),
            Err(err) => {
                let message = err.to_string();
                if message.contains("self-transfer") {
                    report.self_transfers += 1;
                }
                report.skipped.push((line, message));
            }
        }
    }

    if mode == ParseMode::Strict {
        if let Some((first_line, first_message)) = report.skipped.first().cloned() {
            return Err(Error::StrictParse {
                count: report.skipped.len(),
                first_line,
                first_message,
            });
        }
    }

    records.sort_by(|a, b| a.timestamp.cmp(&b.timestamp));
    Ok((records, report))
}

fn parse_row(row: &csv::StringRecord, line: usize) -> Result<TransactionRecord> {
    if row.len() != 4 {
        return Err(parse_record_error(
            line,
            format!("expected 4 fields, found {}", row.len()),
        ));
    }
    let timestamp = DateTime::parse_from_rfc3339(&row[0])
        .map_err(|e| parse_record_error(line, format!("unparseable timestamp: {e}")))?
        .with_timezone(&Utc);
    let sender = row[1].to_string();
    let receiver = row[2].to_string();
    if sender.is_empty() || receiver.is_empty() {
        return Err(parse_record_error(line, "empty wallet identifier"));
    }
    if sender == receiver {
        return Err(parse_record_error(line, "self-transfer (sender == receiver)"));
    }
    let amount: f64 = row[3]
        .parse()
        .map_err(|e| parse_record_error(line, format!("unparseable amount: {e}")))?;
    if !amount.is_finite() || amount <= 0.0 {
        return Err(parse_record_error(line, "non-positive amount"));
    }
    Ok(TransactionRecord {
        timestamp,
        sender,
        receiver,
        amount,
    })
}

/// Serializes records back to the interchange CSV format.
pub fn write_transactions<W: std::io::Write>(
    records: &[TransactionRecord],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "sender", "receiver", "amount"])?;
    for r in records {
        w.write_record([
            r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            r.sender.clone(),
            r.receiver.clone(),
            format!("{}", r.amount),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The first Monday 00:00 UTC at or before the earliest record.
pub fn default_anchor(records: &[TransactionRecord]) -> Option<DateTime<Utc>> {
    let earliest = records.iter().map(|r| r.timestamp).min()?;
    let date = earliest.date_naive();
    let days_back = date.weekday().num_days_from_monday() as i64;
    let monday = date - Duration::days(days_back);
    Some(Utc.from_utc_datetime(&monday.and_hms_opt(0, 0, 0).unwrap()))
}

/// Week ordinal of an instant relative to the anchor; `None` before the anchor.
pub fn week_of(anchor: DateTime<Utc>, at: DateTime<Utc>) -> Option<usize> {
    let delta = at.timestamp() - anchor.timestamp();
    if delta < 0 {
        return None;
    }
    Some((delta / WEEK_SECONDS) as usize)
}

/// Week ordinal of a calendar date (UTC midnight) relative to the anchor.
pub fn week_of_date(anchor: DateTime<Utc>, date: NaiveDate) -> Option<usize> {
    week_of(anchor, Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).unwrap()))
}

/// The last calendar day belonging to week `t` (used to align daily series).
pub fn week_end_date(anchor: DateTime<Utc>, week: usize) -> NaiveDate {
    (anchor + Duration::seconds((week as i64 + 1) * WEEK_SECONDS - 1)).date_naive()
}

/// Partitions timestamp-sorted records into consecutive 7-day windows.
/// Boundary instants belong to the later window. Empty interior windows are kept.
pub fn partition_weeks(
    records: Vec<TransactionRecord>,
    anchor: DateTime<Utc>,
) -> Result<Vec<WeekWindow>> {
    let mut buckets: BTreeMap<usize, Vec<TransactionRecord>> = BTreeMap::new();
    let mut max_week = None;
    for record in records {
        let week = week_of(anchor, record.timestamp).ok_or_else(|| Error::BeforeAnchor {
            timestamp: record.timestamp.to_rfc3339(),
            anchor: anchor.to_rfc3339(),
        })?;
        max_week = Some(max_week.map_or(week, |m: usize| m.max(week)));
        buckets.entry(week).or_default().push(record);
    }

    let Some(max_week) = max_week else {
        return Ok(Vec::new());
    };

    let windows = (0..=max_week)
        .map(|index| {
            let start = anchor + Duration::seconds(index as i64 * WEEK_SECONDS);
            WeekWindow {
                index,
                start,
                end: start + Duration::seconds(WEEK_SECONDS),
                records: buckets.remove(&index).unwrap_or_default(),
            }
        })
        .collect();
    Ok(windows)
}

/// Reads a two-column `date,<value>` CSV into a series.
pub fn parse_value_series<R: Read>(reader: R, kind: SeriesKind) -> Result<TimeSeries> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points = Vec::new();
    for (row_idx, row) in csv_reader.records().enumerate() {
        let line = row_idx + 2;
        let row = row?;
        if row.len() != 2 {
            return Err(parse_record_error(line, "expected 2 fields"));
        }
        let date: NaiveDate = row[0]
            .parse()
            .map_err(|e| parse_record_error(line, format!("bad date: {e}")))?;
        let value: f64 = row[1]
            .parse()
            .map_err(|e| parse_record_error(line, format!("bad value: {e}")))?;
        points.push((date, value));
    }
    TimeSeries::new(kind, points)
}

/// Reads a `date,term,frequency` CSV into one series per term, sorted by term name.
pub fn parse_trends<R: Read>(reader: R) -> Result<Vec<(String, TimeSeries)>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut per_term: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (row_idx, row) in csv_reader.records().enumerate() {
        let line = row_idx + 2;
        let row = row?;
        if row.len() != 3 {
            return Err(parse_record_error(line, "expected 3 fields"));
        }
        let date: NaiveDate = row[0]
            .parse()
            .map_err(|e| parse_record_error(line, format!("bad date: {e}")))?;
        let value: f64 = row[2]
            .parse()
            .map_err(|e| parse_record_error(line, format!("bad frequency: {e}")))?;
        per_term.entry(row[1].to_string()).or_default().push((date, value));
    }
    per_term
        .into_iter()
        .map(|(term, mut points)| {
            points.sort_by_key(|p| p.0);
            Ok((term, TimeSeries::new(SeriesKind::SearchFrequency, points)?))
        })
        .collect()
}

/// Anchors used when none is given: see [`default_anchor`].
pub fn anchor_is_monday_midnight(anchor: DateTime<Utc>) -> bool {
    anchor.weekday() == Weekday::Mon
        && anchor.time() == chrono::NaiveTime::from_hms_opt(0, 0, 0).unwrap()
}
