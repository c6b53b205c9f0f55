//! Snapshot records and the canonical snapshot CSV codec.
//!
//! Cells are rendered with Rust's shortest round-trip float formatting and
//! RFC 3339 UTC timestamps, so `parse_snapshot_csv(render_snapshot_csv(s))`
//! reproduces `s` bit for bit.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::error::IngestError;
use super::schema::{snapshot_header, Metric, ID_COLUMNS, TARGET_COLUMNS};

/// A `label=value` distribution cell. Entry order is kept as read.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Distribution(pub Vec<(String, f64)>);

impl Distribution {
    pub fn new(entries: Vec<(String, f64)>) -> Self {
        Distribution(entries)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parse(cell: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for pair in cell.split(';') {
            let (label, value) = pair
                .split_once('=')
                .ok_or_else(|| format!("distribution entry `{pair}` lacks `=`"))?;
            if label.is_empty() {
                return Err(format!("distribution entry `{pair}` has an empty label"));
            }
            entries.push((label.to_owned(), parse_number(value)?));
        }
        Ok(Distribution(entries))
    }

    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|(label, value)| format!("{label}={value}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// One project-commit measurement: the 28 metrics plus the three
/// remediation-effort targets. `None` is the missing-value sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub project_id: String,
    pub commit_sha: String,
    pub timestamp: DateTime<Utc>,
    /// Scalar metrics; every non-distribution metric has an entry.
    pub metrics: BTreeMap<Metric, Option<f64>>,
    /// The three distribution-valued metrics.
    pub distributions: BTreeMap<Metric, Option<Distribution>>,
    /// Minutes to fix all code smells.
    pub sqale_index: Option<f64>,
    /// Minutes to fix all bug issues.
    pub reliability_remediation_effort: Option<f64>,
    /// Stored for completeness, never used as a regression target.
    pub security_remediation_effort: Option<f64>,
}

impl MetricSnapshot {
    /// A snapshot with every metric and target missing.
    pub fn empty(project_id: &str, commit_sha: &str, timestamp: DateTime<Utc>) -> Self {
        MetricSnapshot {
            project_id: project_id.to_owned(),
            commit_sha: commit_sha.to_owned(),
            timestamp,
            metrics: Metric::scalars().map(|m| (m, None)).collect(),
            distributions: Metric::distributions().map(|m| (m, None)).collect(),
            sqale_index: None,
            reliability_remediation_effort: None,
            security_remediation_effort: None,
        }
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        self.metrics.get(&metric).copied().flatten()
    }

    pub fn distribution(&self, metric: Metric) -> Option<&Distribution> {
        self.distributions.get(&metric).and_then(|d| d.as_ref())
    }

    pub fn set_metric(&mut self, metric: Metric, value: Option<f64>) {
        debug_assert!(!metric.is_distribution());
        self.metrics.insert(metric, value);
    }

    pub fn set_distribution(&mut self, metric: Metric, value: Option<Distribution>) {
        debug_assert!(metric.is_distribution());
        self.distributions.insert(metric, value);
    }

    /// Checks every record invariant; the message names the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.project_id.is_empty() {
            return Err("empty project id".into());
        }
        if self.commit_sha.len() != 40 || !self.commit_sha.bytes().all(|b| b.is_ascii_hexdigit())
        {
            return Err(format!("commit_sha `{}` is not 40 hex characters", self.commit_sha));
        }
        for metric in Metric::scalars() {
            if !self.metrics.contains_key(&metric) {
                return Err(format!("metric `{metric}` absent"));
            }
            if let Some(v) = self.metric(metric) {
                check_value(metric.key(), v)?;
                if metric.is_percent() && v > 100.0 {
                    return Err(format!("{metric} = {v} outside [0, 100]"));
                }
            }
        }
        for metric in Metric::distributions() {
            if !self.distributions.contains_key(&metric) {
                return Err(format!("metric `{metric}` absent"));
            }
            if let Some(d) = self.distribution(metric) {
                for (label, v) in d.entries() {
                    if label.is_empty() || label.contains(['=', ';']) {
                        return Err(format!("{metric}: invalid label `{label}`"));
                    }
                    check_value(metric.key(), *v)?;
                }
            }
        }
        if self.metrics.len() != 25 || self.distributions.len() != 3 {
            return Err("metric map holds keys outside the schema".into());
        }
        for (name, v) in TARGET_COLUMNS.iter().zip(self.targets()) {
            if let Some(v) = v {
                check_value(name, v)?;
            }
        }
        Ok(())
    }

    fn targets(&self) -> [Option<f64>; 3] {
        [
            self.sqale_index,
            self.reliability_remediation_effort,
            self.security_remediation_effort,
        ]
    }
}

fn check_value(name: &str, v: f64) -> Result<(), String> {
    if !v.is_finite() {
        Err(format!("{name} = {v} is not finite"))
    } else if v < 0.0 {
        Err(format!("{name} = {v} is negative"))
    } else {
        Ok(())
    }
}

fn parse_number(cell: &str) -> Result<f64, String> {
    let v: f64 = cell
        .parse()
        .map_err(|_| format!("`{cell}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{cell}` is not finite"))
    }
}

fn parse_optional(cell: &str) -> Result<Option<f64>, String> {
    if cell.is_empty() {
        Ok(None)
    } else {
        parse_number(cell).map(Some)
    }
}

/// Accepts RFC 3339 plus the `+0000` offset form the analysis server emits.
pub fn parse_timestamp(cell: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(cell) {
        return Ok(t.with_timezone(&Utc));
    }
    if let Ok(t) = DateTime::parse_from_str(cell, "%Y-%m-%dT%H:%M:%S%z") {
        return Ok(t.with_timezone(&Utc));
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(cell, "%Y-%m-%dT%H:%M:%S") {
        return Ok(t.and_utc());
    }
    if let Ok(d) = NaiveDate::parse_from_str(cell, "%Y-%m-%d") {
        return Ok(d.and_time(NaiveTime::MIN).and_utc());
    }
    Err(format!("`{cell}` is not an ISO-8601 timestamp"))
}

pub fn render_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn render_optional(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Parses snapshot CSV with the exact header layout.
pub fn parse_snapshot_csv(content: &[u8]) -> Result<Vec<MetricSnapshot>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(content);

    let expected = snapshot_header();
    let header = reader.headers()?.clone();
    for (index, want) in expected.iter().enumerate() {
        match header.get(index) {
            Some(found) if found.trim() == *want => {}
            Some(found) => {
                return Err(IngestError::Schema {
                    index,
                    found: found.to_owned(),
                    expected: (*want).to_owned(),
                })
            }
            None => {
                return Err(IngestError::Schema {
                    index,
                    found: String::new(),
                    expected: (*want).to_owned(),
                })
            }
        }
    }
    if header.len() > expected.len() {
        return Err(IngestError::Schema {
            index: expected.len(),
            found: header[expected.len()].to_owned(),
            expected: "end of header".into(),
        });
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != expected.len() {
            return Err(IngestError::Row {
                line,
                column: String::new(),
                message: format!("expected {} cells, found {}", expected.len(), record.len()),
            });
        }
        let row_err = |column: &str, message: String| IngestError::Row {
            line,
            column: column.to_owned(),
            message,
        };

        let timestamp = parse_timestamp(&record[2]).map_err(|m| row_err(ID_COLUMNS[2], m))?;
        let mut snap = MetricSnapshot::empty(&record[0], &record[1], timestamp);

        for (offset, metric) in Metric::ALL.into_iter().enumerate() {
            let cell = &record[ID_COLUMNS.len() + offset];
            if metric.is_distribution() {
                let value = if cell.is_empty() {
                    None
                } else {
                    Some(Distribution::parse(cell).map_err(|m| row_err(metric.key(), m))?)
                };
                snap.set_distribution(metric, value);
            } else {
                let value = parse_optional(cell).map_err(|m| row_err(metric.key(), m))?;
                snap.set_metric(metric, value);
            }
        }

        let base = ID_COLUMNS.len() + Metric::ALL.len();
        let mut targets = [None; 3];
        for (i, name) in TARGET_COLUMNS.iter().enumerate() {
            targets[i] = parse_optional(&record[base + i]).map_err(|m| row_err(name, m))?;
        }
        [
            snap.sqale_index,
            snap.reliability_remediation_effort,
            snap.security_remediation_effort,
        ] = targets;

        snap.validate()
            .map_err(|message| IngestError::Validation { line, message })?;
        out.push(snap);
    }
    Ok(out)
}

/// Renders snapshots in the canonical CSV layout (header included).
pub fn render_snapshot_csv(snapshots: &[MetricSnapshot]) -> Result<Vec<u8>, IngestError> {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(snapshot_header())?;
    for snap in snapshots {
        let mut row: Vec<String> = vec![
            snap.project_id.clone(),
            snap.commit_sha.clone(),
            render_timestamp(&snap.timestamp),
        ];
        for metric in Metric::ALL {
            row.push(if metric.is_distribution() {
                snap.distribution(metric)
                    .map(Distribution::render)
                    .unwrap_or_default()
            } else {
                render_optional(snap.metric(metric))
            });
        }
        row.push(render_optional(snap.sqale_index));
        row.push(render_optional(snap.reliability_remediation_effort));
        row.push(render_optional(snap.security_remediation_effort));
        writer.write_record(&row)?;
    }
    writer
        .into_inner()
        .map_err(|e| IngestError::Precondition(format!("csv flush failed: {e}")))
}
