//! Grouped quantiles of `sin_error`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::CliError;
use crate::results::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Algorithm,
    N,
    D,
    Epsilon,
    Delta,
    SigmaNoiseSq,
}

impl GroupKey {
    fn name(self) -> &'static str {
        match self {
            GroupKey::Algorithm => "algorithm",
            GroupKey::N => "n",
            GroupKey::D => "d",
            GroupKey::Epsilon => "epsilon",
            GroupKey::Delta => "delta",
            GroupKey::SigmaNoiseSq => "sigma_noise_sq",
        }
    }

    fn value(self, row: &ResultRow) -> KeyValue {
        match self {
            GroupKey::Algorithm => KeyValue::Text(row.algorithm.name().to_string()),
            GroupKey::N => KeyValue::Int(row.n as u64),
            GroupKey::D => KeyValue::Int(row.d as u64),
            GroupKey::Epsilon => KeyValue::Real(row.epsilon),
            GroupKey::Delta => KeyValue::Real(row.delta),
            GroupKey::SigmaNoiseSq => row.sigma_noise_sq.map_or(KeyValue::Missing, KeyValue::Real),
        }
    }
}

impl FromStr for GroupKey {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        use GroupKey::*;
        [Algorithm, N, D, Epsilon, Delta, SigmaNoiseSq]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::config("by", format!("cannot group by {s:?}")))
    }
}

/// Parses `n,algorithm`.
pub fn parse_keys(spec: &str) -> Result<Vec<GroupKey>, CliError> {
    let keys = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<_>, _>>()?;
    if keys.is_empty() {
        return Err(CliError::config("by", "no grouping keys"));
    }
    Ok(keys)
}

/// A grouping value; numbers order numerically.
#[derive(Debug, Clone)]
pub enum KeyValue {
    Missing,
    Int(u64),
    Real(f64),
    Text(String),
}

impl KeyValue {
    fn rank(&self) -> u8 {
        match self {
            KeyValue::Missing => 0,
            KeyValue::Int(_) => 1,
            KeyValue::Real(_) => 2,
            KeyValue::Text(_) => 3,
        }
    }
}

impl Ord for KeyValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KeyValue::Int(a), KeyValue::Int(b)) => a.cmp(b),
            (KeyValue::Real(a), KeyValue::Real(b)) => a.total_cmp(b),
            (KeyValue::Text(a), KeyValue::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for KeyValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for KeyValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for KeyValue {}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Missing => Ok(()),
            KeyValue::Int(v) => write!(f, "{v}"),
            KeyValue::Real(v) => write!(f, "{v}"),
            KeyValue::Text(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub key: Vec<KeyValue>,
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl GroupSummary {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (`h = (n - 1) p`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles of `sin_error` per group, groups in key order.
pub fn summarize(rows: &[ResultRow], keys: &[GroupKey]) -> Result<Vec<GroupSummary>, CliError> {
    if rows.is_empty() {
        return Err(CliError::Runtime("no rows to summarize".into()));
    }
    let mut groups: BTreeMap<Vec<KeyValue>, Vec<f64>> = BTreeMap::new();
    for row in rows {
        let key = keys.iter().map(|k| k.value(row)).collect();
        groups.entry(key).or_default().push(row.sin_error);
    }
    Ok(groups
        .into_iter()
        .map(|(key, mut errs)| {
            errs.sort_by(f64::total_cmp);
            GroupSummary {
                key,
                count: errs.len(),
                median: quantile(&errs, 0.5),
                q25: quantile(&errs, 0.25),
                q75: quantile(&errs, 0.75),
            }
        })
        .collect())
}

/// CSV table: the key columns, then `count,median,q25,q75,iqr`.
pub fn write_summary<W: Write>(keys: &[GroupKey], groups: &[GroupSummary], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = keys.iter().map(|k| k.name()).collect();
    header.extend(["count", "median", "q25", "q75", "iqr"]);
    w.write_record(&header)?;
    for g in groups {
        let mut record: Vec<String> = g.key.iter().map(ToString::to_string).collect();
        record.push(g.count.to_string());
        for v in [g.median, g.q25, g.q75, g.iqr()] {
            record.push(format!("{v:.6}"));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
