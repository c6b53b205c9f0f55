//! Snapshot ingestion: the canonical CSV codec, the metrics-server client,
//! project eligibility filtering and interval down-sampling.

mod error;
pub mod fetch;
pub mod schema;
mod select;
mod snapshot;

pub use error::IngestError;
pub use fetch::{default_metric_keys, fetch_snapshots, FetchConfig};
pub use schema::{snapshot_header, Metric};
pub use select::{filter_projects, sample_interval, ProjectDescriptor};
pub use snapshot::{
    parse_snapshot_csv, parse_timestamp, render_snapshot_csv, render_timestamp, Distribution,
    MetricSnapshot,
};
