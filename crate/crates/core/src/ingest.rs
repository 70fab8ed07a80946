//! Transaction and firm-metadata ingestion, windowed network construction and
//! temporal activity summaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PaymentGraph;
use crate::rating::FirmMeta;

/// One dated payment row. `amount` is the row total; `count` is the number of
/// same-day transactions it aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub payer: String,
    pub payee: String,
    pub date: NaiveDate,
    pub amount: f64,
    pub count: u32,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the input, header included.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedTransactions {
    pub records: Vec<TransactionRecord>,
    pub rejected: Vec<RowError>,
    pub rows_read: u64,
}

const TX_COLUMNS: [&str; 6] = ["payer", "payee", "date", "amount", "count", "kind"];

/// Parses a non-negative decimal with at most two fractional digits.
pub fn parse_amount(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::invalid(format!("malformed amount `{s}`"));
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 2 {
        return Err(bad());
    }
    let whole: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let mut cents: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    if frac.len() == 1 {
        cents *= 10;
    }
    let total = whole.checked_mul(100).and_then(|w| w.checked_add(cents)).ok_or_else(bad)?;
    Ok(total as f64 / 100.0)
}

/// Reads `payer,payee,date,amount,count,kind` rows. Bad rows are collected in
/// `rejected`; a missing column aborts.
pub fn parse_transactions<R: Read>(input: R) -> Result<ParsedTransactions> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(TX_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut out = ParsedTransactions::default();
    for row in reader.records() {
        out.rows_read += 1;
        let line = out.rows_read + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.rejected.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        match parse_row(&row, &cols) {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.rejected.push(RowError { line, message: e.to_string() }),
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, cols: &[usize; 6]) -> Result<TransactionRecord> {
    let field = |i: usize| row.get(cols[i]).map(str::trim).ok_or_else(|| Error::invalid("short row"));
    let payer = field(0)?;
    let payee = field(1)?;
    if payer.is_empty() || payee.is_empty() {
        return Err(Error::invalid("empty firm id"));
    }
    let date = NaiveDate::parse_from_str(field(2)?, "%Y-%m-%d")
        .map_err(|_| Error::invalid(format!("malformed date `{}`", field(2).unwrap_or_default())))?;
    let amount = parse_amount(field(3)?)?;
    let count: u32 = field(4)?
        .parse()
        .map_err(|_| Error::invalid(format!("malformed count `{}`", field(4).unwrap_or_default())))?;
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    Ok(TransactionRecord {
        payer: payer.to_string(),
        payee: payee.to_string(),
        date,
        amount,
        count,
        kind: field(5)?.to_string(),
    })
}

/// Reads `id,status,rating,sector` rows; duplicate ids are fatal.
pub fn parse_firms<R: Read>(input: R) -> Result<Vec<FirmMeta>> {
    let firms = crate::graph::io::read_nodes(input)?;
    let mut seen = BTreeSet::new();
    for f in &firms {
        if !seen.insert(f.id.as_str()) {
            return Err(Error::DuplicateFirm(f.id.clone()));
        }
    }
    Ok(firms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Daily,
    Weekly,
    Monthly,
}

impl FromStr for Granularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "daily" => Ok(Granularity::Daily),
            "weekly" => Ok(Granularity::Weekly),
            "monthly" => Ok(Granularity::Monthly),
            other => Err(Error::invalid(format!("unknown window granularity `{other}`"))),
        }
    }
}

/// A calendar window. Weeks are ISO weeks (Monday start); months are calendar
/// months. `index` is an absolute ordinal, so consecutive windows differ by 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeWindow {
    pub granularity: Granularity,
    pub index: i64,
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 5).expect("valid date") // a Monday
}

impl TimeWindow {
    pub fn containing(date: NaiveDate, granularity: Granularity) -> Self {
        let days = (date - epoch()).num_days();
        let index = match granularity {
            Granularity::Daily => days,
            Granularity::Weekly => days.div_euclid(7),
            Granularity::Monthly => date.year() as i64 * 12 + date.month0() as i64,
        };
        TimeWindow { granularity, index }
    }

    pub fn start(&self) -> NaiveDate {
        match self.granularity {
            Granularity::Daily => epoch() + Duration::days(self.index),
            Granularity::Weekly => epoch() + Duration::days(self.index * 7),
            Granularity::Monthly => {
                let year = self.index.div_euclid(12) as i32;
                let month = self.index.rem_euclid(12) as u32 + 1;
                NaiveDate::from_ymd_opt(year, month, 1).expect("valid month start")
            }
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        TimeWindow::containing(date, self.granularity) == *self
    }

    pub fn next(&self) -> Self {
        TimeWindow { index: self.index + 1, ..*self }
    }

    /// Every window from the first to the last record date, inclusive.
    pub fn spanning(records: &[TransactionRecord], granularity: Granularity) -> Vec<TimeWindow> {
        let (Some(lo), Some(hi)) = (records.iter().map(|r| r.date).min(), records.iter().map(|r| r.date).max()) else {
            return Vec::new();
        };
        let (first, last) = (TimeWindow::containing(lo, granularity), TimeWindow::containing(hi, granularity));
        (first.index..=last.index).map(|index| TimeWindow { granularity, index }).collect()
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.start();
        match self.granularity {
            Granularity::Daily => write!(f, "{}", s.format("%Y-%m-%d")),
            Granularity::Weekly => {
                let w = s.iso_week();
                write!(f, "{}-W{:02}", w.year(), w.week())
            }
            Granularity::Monthly => write!(f, "{}", s.format("%Y-%m")),
        }
    }
}

/// Counters produced while building one window's graph.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    pub window: String,
    pub records_in_window: u64,
    pub self_loops_dropped: u64,
    pub self_loop_amount: f64,
    pub zero_weight_pairs_dropped: u64,
    pub firms_without_metadata: u64,
}

/// Aggregates in-window records by ordered firm pair into a graph. Node order
/// is lexicographic by firm id.
pub fn build_network(
    records: &[TransactionRecord],
    firms: &[FirmMeta],
    window: TimeWindow,
) -> Result<(PaymentGraph, BuildDiagnostics)> {
    let mut meta: HashMap<&str, &FirmMeta> = HashMap::with_capacity(firms.len());
    for f in firms {
        if meta.insert(f.id.as_str(), f).is_some() {
            return Err(Error::DuplicateFirm(f.id.clone()));
        }
    }

    let mut diag = BuildDiagnostics { window: window.to_string(), ..Default::default() };
    let mut pairs: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in records.iter().filter(|r| window.contains(r.date)) {
        diag.records_in_window += 1;
        if r.payer == r.payee {
            diag.self_loops_dropped += 1;
            diag.self_loop_amount += r.amount;
            continue;
        }
        *pairs.entry((r.payer.as_str(), r.payee.as_str())).or_insert(0.0) += r.amount;
    }
    let before = pairs.len();
    pairs.retain(|_, w| *w > 0.0);
    diag.zero_weight_pairs_dropped = (before - pairs.len()) as u64;

    let ids: BTreeSet<&str> = pairs.keys().flat_map(|&(a, b)| [a, b]).collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let nodes: Vec<FirmMeta> = ids
        .iter()
        .map(|&id| match meta.get(id) {
            Some(f) => (*f).clone(),
            None => {
                diag.firms_without_metadata += 1;
                FirmMeta::unknown(id)
            }
        })
        .collect();
    let edges = pairs.into_iter().map(|((a, b), w)| (index[a], index[b], w)).collect();
    Ok((PaymentGraph::new(nodes, edges)?, diag))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowActivity {
    pub window: String,
    pub nodes: usize,
    pub edges: usize,
    pub volume: f64,
}

/// Per-window sizes plus persistence histograms: entry `k -> c` means `c`
/// nodes (or edges) were active in exactly `k` windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySeries {
    pub granularity: Granularity,
    pub windows: Vec<WindowActivity>,
    pub node_persistence: BTreeMap<usize, usize>,
    pub edge_persistence: BTreeMap<usize, usize>,
}

pub fn activity_summary(records: &[TransactionRecord], granularity: Granularity) -> ActivitySeries {
    let windows = TimeWindow::spanning(records, granularity);
    let first = windows.first().map_or(0, |w| w.index);
    let mut nodes: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); windows.len()];
    let mut edges: Vec<BTreeSet<(&str, &str)>> = vec![BTreeSet::new(); windows.len()];
    let mut volume = vec![0.0; windows.len()];
    for r in records.iter().filter(|r| r.payer != r.payee) {
        let k = (TimeWindow::containing(r.date, granularity).index - first) as usize;
        nodes[k].insert(&r.payer);
        nodes[k].insert(&r.payee);
        edges[k].insert((&r.payer, &r.payee));
        volume[k] += r.amount;
    }

    fn histogram<'a, T: Ord + Copy + 'a>(sets: impl Iterator<Item = &'a BTreeSet<T>>) -> BTreeMap<usize, usize> {
        let mut per_item: BTreeMap<T, usize> = BTreeMap::new();
        for set in sets {
            for &x in set {
                *per_item.entry(x).or_insert(0) += 1;
            }
        }
        let mut hist = BTreeMap::new();
        for (_, k) in per_item {
            *hist.entry(k).or_insert(0) += 1;
        }
        hist
    }

    ActivitySeries {
        granularity,
        windows: windows
            .iter()
            .enumerate()
            .map(|(k, w)| WindowActivity {
                window: w.to_string(),
                nodes: nodes[k].len(),
                edges: edges[k].len(),
                volume: volume[k],
            })
            .collect(),
        node_persistence: histogram(nodes.iter()),
        edge_persistence: histogram(edges.iter()),
    }
}
