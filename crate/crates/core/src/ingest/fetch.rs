//! Client for a metrics server exposing a paged measures-history endpoint.
//!
//! The default URL template targets the SonarQube `search_history` API. The
//! response is expected to look like
//!
//! ```json
//! {"paging": {"pageIndex": 1, "pageSize": 500, "total": 1000},
//!  "measures": [{"metric": "ncloc",
//!                "history": [{"date": "2017-03-01T10:00:00+0000", "value": "1200",
//!                             "revision": "<40 hex sha, optional>"}]}]}
//! ```
//!
//! Every distinct history date becomes one snapshot. Pages are requested
//! starting at 1 until a page carries no history entries at all.

use std::collections::BTreeMap;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::error::IngestError;
use super::schema::{Metric, TARGET_COLUMNS};
use super::snapshot::{parse_timestamp, Distribution, MetricSnapshot};

pub const DEFAULT_URL_TEMPLATE: &str =
    "{server}/api/measures/search_history?component={project}&metrics={metrics}&p={page}&ps={page_size}";

/// Placeholder sha for analyses whose revision the server does not report.
pub const UNKNOWN_REVISION: &str = "0000000000000000000000000000000000000000";

const MAX_PAGES: u32 = 100_000;

#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// Placeholders: `{server}`, `{project}`, `{metrics}`, `{page}`, `{page_size}`.
    pub url_template: String,
    pub page_size: u32,
    pub max_retries: u32,
    pub timeout: Duration,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            url_template: DEFAULT_URL_TEMPLATE.to_owned(),
            page_size: 500,
            max_retries: 3,
            timeout: Duration::from_secs(30),
        }
    }
}

/// Every schema metric plus the three effort targets.
pub fn default_metric_keys() -> Vec<String> {
    Metric::ALL
        .iter()
        .map(|m| m.key().to_owned())
        .chain(TARGET_COLUMNS.iter().map(|s| (*s).to_owned()))
        .collect()
}

#[derive(Debug, Deserialize)]
struct Page {
    #[serde(default)]
    measures: Vec<Measure>,
}

#[derive(Debug, Deserialize)]
struct Measure {
    metric: String,
    #[serde(default)]
    history: Vec<HistoryPoint>,
}

#[derive(Debug, Deserialize)]
struct HistoryPoint {
    date: String,
    value: Option<String>,
    revision: Option<String>,
}

enum Field {
    Metric(Metric),
    Target(usize),
}

fn field_for(key: &str) -> Option<Field> {
    if let Ok(m) = key.parse::<Metric>() {
        return Some(Field::Metric(m));
    }
    TARGET_COLUMNS.iter().position(|t| *t == key).map(Field::Target)
}

fn encode(s: &str) -> String {
    url::form_urlencoded::byte_serialize(s.as_bytes()).collect()
}

fn build_url(config: &FetchConfig, server: &str, project: &str, metrics: &str, page: u32) -> String {
    config
        .url_template
        .replace("{server}", server.trim_end_matches('/'))
        .replace("{project}", &encode(project))
        .replace("{metrics}", &encode(metrics))
        .replace("{page_size}", &config.page_size.to_string())
        .replace("{page}", &page.to_string())
}

fn get_page(
    agent: &ureq::Agent,
    config: &FetchConfig,
    url: &str,
    project_key: &str,
    auth_token: Option<&str>,
) -> Result<String, IngestError> {
    let mut attempt = 0;
    loop {
        let mut request = agent.get(url);
        if let Some(token) = auth_token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let outcome = request.call();
        let retryable = match outcome {
            Ok(mut response) => {
                let status = response.status().as_u16();
                match status {
                    200..=299 => {
                        return response
                            .body_mut()
                            .read_to_string()
                            .map_err(|e| IngestError::Decode(e.to_string()))
                    }
                    401 | 403 => return Err(IngestError::Auth { status }),
                    404 => return Err(IngestError::NotFound(project_key.to_owned())),
                    500..=599 => Err(IngestError::Http { status }),
                    _ => return Err(IngestError::Http { status }),
                }
            }
            Err(e) => Err(IngestError::Transport {
                retries: attempt,
                message: e.to_string(),
            }),
        };
        if attempt >= config.max_retries {
            return retryable;
        }
        attempt += 1;
        if let Err(e) = &retryable {
            log::warn!("fetch attempt {attempt} failed: {e}; retrying");
        }
        std::thread::sleep(Duration::from_millis(100 * u64::from(attempt)));
    }
}

/// Downloads the full measure history of `project_key`, one snapshot per analysis.
///
/// An error aborts the whole download; no partial list is returned.
pub fn fetch_snapshots(
    server_url: &str,
    project_key: &str,
    metric_keys: &[String],
    auth_token: Option<&str>,
    config: &FetchConfig,
) -> Result<Vec<MetricSnapshot>, IngestError> {
    for key in metric_keys {
        if field_for(key).is_none() {
            return Err(IngestError::Precondition(format!("unknown metric key `{key}`")));
        }
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(config.timeout))
        .build()
        .into();

    let metrics = metric_keys.join(",");
    let mut by_date: BTreeMap<DateTime<Utc>, MetricSnapshot> = BTreeMap::new();

    for page in 1..=MAX_PAGES {
        let url = build_url(config, server_url, project_key, &metrics, page);
        let body = get_page(&agent, config, &url, project_key, auth_token)?;
        let parsed: Page =
            serde_json::from_str(&body).map_err(|e| IngestError::Decode(e.to_string()))?;
        if parsed.measures.iter().all(|m| m.history.is_empty()) {
            break;
        }
        for measure in parsed.measures {
            let Some(field) = field_for(&measure.metric) else {
                return Err(IngestError::Decode(format!(
                    "server returned unrequested metric `{}`",
                    measure.metric
                )));
            };
            for point in measure.history {
                let at = parse_timestamp(&point.date).map_err(IngestError::Decode)?;
                let snap = by_date
                    .entry(at)
                    .or_insert_with(|| MetricSnapshot::empty(project_key, UNKNOWN_REVISION, at));
                if let Some(rev) = point.revision {
                    snap.commit_sha = rev;
                }
                apply(snap, &field, point.value.as_deref())?;
            }
        }
    }

    let snapshots: Vec<MetricSnapshot> = by_date.into_values().collect();
    for s in &snapshots {
        s.validate()
            .map_err(|m| IngestError::Decode(format!("analysis at {}: {m}", s.timestamp)))?;
    }
    Ok(snapshots)
}

fn apply(snap: &mut MetricSnapshot, field: &Field, value: Option<&str>) -> Result<(), IngestError> {
    let value = value.filter(|v| !v.is_empty());
    let number = |v: &str| -> Result<f64, IngestError> {
        v.parse::<f64>()
            .map_err(|_| IngestError::Decode(format!("`{v}` is not a number")))
    };
    match field {
        Field::Metric(m) if m.is_distribution() => {
            let d = value
                .map(|v| Distribution::parse(v).map_err(IngestError::Decode))
                .transpose()?;
            snap.set_distribution(*m, d);
        }
        Field::Metric(m) => snap.set_metric(*m, value.map(number).transpose()?),
        Field::Target(i) => {
            let v = value.map(number).transpose()?;
            match i {
                0 => snap.sqale_index = v,
                1 => snap.reliability_remediation_effort = v,
                _ => snap.security_remediation_effort = v,
            }
        }
    }
    Ok(())
}
