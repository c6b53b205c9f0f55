//! Technical-debt item lifecycles: event timelines, the open-debt series over
//! time, impact-per-cost ranking and a seeded event simulator.
//!
//! An episode is open on the half-open interval `[opened_at, closed_at)`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{parse_timestamp, render_timestamp};
use crate::rng::{derive_seed, rng_from_seed};

pub const EVENTS_HEADER: [&str; 6] = [
    "item_id",
    "kind",
    "at",
    "remediation_minutes",
    "bug_count",
    "change_count",
];
pub const SERIES_HEADER: [&str; 3] = ["at", "open_debt_minutes", "open_items"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LifecycleError {
    #[error("item `{item}` at {at}: {message}")]
    Validation { item: String, at: String, message: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("plot: {0}")]
    Plot(String),
}

fn invalid(item: &str, at: &DateTime<Utc>, message: impl Into<String>) -> LifecycleError {
    LifecycleError::Validation {
        item: item.to_owned(),
        at: render_timestamp(at),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Introduced,
    Removed,
    Reintroduced,
}

impl EventKind {
    pub fn opens(self) -> bool {
        self != EventKind::Removed
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Introduced => "Introduced",
            EventKind::Removed => "Removed",
            EventKind::Reintroduced => "Reintroduced",
        })
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "introduced" => Ok(EventKind::Introduced),
            "removed" => Ok(EventKind::Removed),
            "reintroduced" => Ok(EventKind::Reintroduced),
            _ => Err(format!("unknown event kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Impact {
    pub bug_count: u64,
    pub change_count: u64,
}

impl std::ops::Add for Impact {
    type Output = Impact;

    fn add(self, o: Impact) -> Impact {
        Impact {
            bug_count: self.bug_count + o.bug_count,
            change_count: self.change_count + o.change_count,
        }
    }
}

/// Impact is the bugs and changes observed while the item was open; an
/// episode's impact is the sum over its opening and closing events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TDItemEvent {
    pub item_id: String,
    pub kind: EventKind,
    pub at: DateTime<Utc>,
    /// Present iff the event opens an episode.
    pub remediation_minutes: Option<f64>,
    pub impact: Impact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub opened_at: DateTime<Utc>,
    pub closed_at: Option<DateTime<Utc>>,
    pub remediation_minutes: f64,
    pub impact: Impact,
}

impl Episode {
    pub fn is_open_at(&self, t: DateTime<Utc>) -> bool {
        self.opened_at <= t && self.closed_at.is_none_or(|c| t < c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTimeline {
    pub item_id: String,
    /// Chronological and non-overlapping; only the last may be open.
    pub episodes: Vec<Episode>,
}

/// Pairs opening events with removals, per item. Events of one item are
/// ordered by instant, ties keeping input order. Output is sorted by item id.
pub fn build_timelines(events: &[TDItemEvent]) -> Result<Vec<ItemTimeline>, LifecycleError> {
    let mut by_item: BTreeMap<&str, Vec<&TDItemEvent>> = BTreeMap::new();
    for e in events {
        by_item.entry(e.item_id.as_str()).or_default().push(e);
    }
    by_item
        .into_iter()
        .map(|(item, mut evs)| {
            evs.sort_by_key(|e| e.at);
            let mut episodes: Vec<Episode> = Vec::new();
            for e in evs {
                let open = episodes.last().is_some_and(|ep| ep.closed_at.is_none());
                match (e.kind, e.remediation_minutes) {
                    (EventKind::Removed, Some(_)) => {
                        return Err(invalid(item, &e.at, "Removed event carries remediation minutes"))
                    }
                    (k, None) if k.opens() => {
                        return Err(invalid(item, &e.at, format!("{k} event lacks remediation minutes")))
                    }
                    (_, Some(m)) if !(m.is_finite() && m >= 0.0) => {
                        return Err(invalid(item, &e.at, format!("remediation minutes {m} must be >= 0")))
                    }
                    _ => {}
                }
                match e.kind {
                    EventKind::Introduced | EventKind::Reintroduced if open => {
                        return Err(invalid(item, &e.at, format!("{} while already open", e.kind)))
                    }
                    EventKind::Introduced if !episodes.is_empty() => {
                        return Err(invalid(item, &e.at, "Introduced after an earlier episode; expected Reintroduced"))
                    }
                    EventKind::Reintroduced if episodes.is_empty() => {
                        return Err(invalid(item, &e.at, "Reintroduced before any Introduced"))
                    }
                    EventKind::Removed if !open => {
                        return Err(invalid(item, &e.at, "Removed with no open episode"))
                    }
                    EventKind::Removed => {
                        let ep = episodes.last_mut().expect("open episode exists");
                        ep.closed_at = Some(e.at);
                        ep.impact = ep.impact + e.impact;
                    }
                    EventKind::Introduced | EventKind::Reintroduced => episodes.push(Episode {
                        opened_at: e.at,
                        closed_at: None,
                        remediation_minutes: e.remediation_minutes.expect("checked above"),
                        impact: e.impact,
                    }),
                }
            }
            Ok(ItemTimeline {
                item_id: item.to_owned(),
                episodes,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebtSeries {
    pub instants: Vec<DateTime<Utc>>,
    /// Σ remediation minutes of episodes open at each instant.
    pub open_debt: Vec<f64>,
    pub open_items: Vec<usize>,
}

/// Samples `start, start + step, …` up to and including `end`.
pub fn debt_series(
    timelines: &[ItemTimeline],
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    step: Duration,
) -> Result<DebtSeries, LifecycleError> {
    if start >= end {
        return Err(LifecycleError::Precondition("series start must precede end".into()));
    }
    if step <= Duration::zero() {
        return Err(LifecycleError::Precondition("series step must be positive".into()));
    }
    let mut series = DebtSeries {
        instants: Vec::new(),
        open_debt: Vec::new(),
        open_items: Vec::new(),
    };
    let mut t = start;
    while t <= end {
        let mut debt = 0.0;
        let mut items = 0;
        for tl in timelines {
            let mut item_open = false;
            for ep in tl.episodes.iter().filter(|ep| ep.is_open_at(t)) {
                debt += ep.remediation_minutes;
                item_open = true;
            }
            items += usize::from(item_open);
        }
        series.instants.push(t);
        series.open_debt.push(debt);
        series.open_items.push(items);
        t += step;
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    pub bug_weight: f64,
    pub change_weight: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        RankWeights {
            bug_weight: 1.0,
            change_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub item_id: String,
    pub impact_score: f64,
    pub cost_minutes: f64,
    pub priority: f64,
}

/// Orders items by impact per minute of remediation, highest first, ties by
/// item id. `invert_cost` ranks by impact × cost instead, so that among equal
/// impacts the costlier item comes first.
pub fn rank_items(
    timelines: &[ItemTimeline],
    weights: RankWeights,
    invert_cost: bool,
) -> Result<Vec<RankedItem>, LifecycleError> {
    for w in [weights.bug_weight, weights.change_weight] {
        if !(w.is_finite() && w >= 0.0) {
            return Err(LifecycleError::Precondition(format!("weight {w} must be finite and >= 0")));
        }
    }
    let mut ranked = timelines
        .iter()
        .filter_map(|tl| tl.episodes.last().map(|last| (tl, last)))
        .map(|(tl, last)| {
            let cost = last.remediation_minutes;
            if cost <= 0.0 {
                return Err(invalid(&tl.item_id, &last.opened_at, "latest remediation cost is 0"));
            }
            let total = tl.episodes.iter().fold(Impact::default(), |acc, ep| acc + ep.impact);
            let impact_score =
                weights.bug_weight * total.bug_count as f64 + weights.change_weight * total.change_count as f64;
            let priority = if invert_cost { impact_score * cost } else { impact_score / cost };
            Ok(RankedItem {
                item_id: tl.item_id.clone(),
                impact_score,
                cost_minutes: cost,
                priority,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(|a, b| b.priority.total_cmp(&a.priority).then_with(|| a.item_id.cmp(&b.item_id)));
    Ok(ranked)
}

/// Daily transition probabilities of the simulator. Costs are whole minutes
/// drawn uniformly from `cost_range` (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationParams {
    /// Chance per day that a not-yet-introduced item appears.
    pub intro_rate: f64,
    /// Chance per day that an open item is removed.
    pub removal_prob: f64,
    /// Chance per day that a removed item comes back.
    pub reintro_prob: f64,
    pub cost_range: (u32, u32),
    /// Chance per open day of one more bug touching the item.
    pub bug_rate: f64,
    /// Chance per open day of one more change touching the item.
    pub change_rate: f64,
    pub origin: DateTime<Utc>,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            intro_rate: 0.02,
            removal_prob: 0.01,
            reintro_prob: 0.005,
            cost_range: (5, 480),
            bug_rate: 0.01,
            change_rate: 0.05,
            origin: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
        }
    }
}

/// Seeded per-item day-stepped simulation. Event lists are sorted by instant
/// then item id and always pass [`build_timelines`]. Item `i` draws from its
/// own stream, so changing `n_items` does not perturb earlier items.
pub fn simulate_events(
    n_items: usize,
    horizon_days: u32,
    seed: u64,
    params: &SimulationParams,
) -> Result<Vec<TDItemEvent>, LifecycleError> {
    if n_items == 0 || horizon_days == 0 {
        return Err(LifecycleError::Precondition("need at least one item and one day".into()));
    }
    let probs = [
        ("intro_rate", params.intro_rate),
        ("removal_prob", params.removal_prob),
        ("reintro_prob", params.reintro_prob),
        ("bug_rate", params.bug_rate),
        ("change_rate", params.change_rate),
    ];
    if let Some((name, v)) = probs.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
        return Err(LifecycleError::Precondition(format!("{name} = {v} is not a probability")));
    }
    let (lo, hi) = params.cost_range;
    if lo == 0 || lo > hi {
        return Err(LifecycleError::Precondition(format!("cost range {lo}..={hi} must satisfy 1 <= lo <= hi")));
    }

    let width = (n_items - 1).to_string().len().max(4);
    let mut events = Vec::new();
    for i in 0..n_items {
        let item_id = format!("item-{i:0width$}");
        let mut rng = rng_from_seed(derive_seed(seed, i as u64));
        let mut open: Option<usize> = None;
        let mut ever = false;
        let mut seen = Impact::default();
        for day in 0..horizon_days {
            let at = params.origin + Duration::days(i64::from(day)) + Duration::seconds(rng.gen_range(0..86_400));
            match open {
                Some(_) => {
                    seen.bug_count += u64::from(rng.gen_bool(params.bug_rate));
                    seen.change_count += u64::from(rng.gen_bool(params.change_rate));
                    if rng.gen_bool(params.removal_prob) {
                        events.push(TDItemEvent {
                            item_id: item_id.clone(),
                            kind: EventKind::Removed,
                            at,
                            remediation_minutes: None,
                            impact: std::mem::take(&mut seen),
                        });
                        open = None;
                    }
                }
                None => {
                    let p = if ever { params.reintro_prob } else { params.intro_rate };
                    if rng.gen_bool(p) {
                        events.push(TDItemEvent {
                            item_id: item_id.clone(),
                            kind: if ever { EventKind::Reintroduced } else { EventKind::Introduced },
                            at,
                            remediation_minutes: Some(f64::from(rng.gen_range(lo..=hi))),
                            impact: Impact::default(),
                        });
                        open = Some(events.len() - 1);
                        ever = true;
                    }
                }
            }
        }
        if let Some(idx) = open {
            events[idx].impact = seen;
        }
    }
    events.sort_by(|a, b| a.at.cmp(&b.at).then_with(|| a.item_id.cmp(&b.item_id)));
    Ok(events)
}

pub fn render_events_csv(events: &[TDItemEvent]) -> String {
    let mut out = EVENTS_HEADER.join(",");
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.item_id,
            e.kind,
            render_timestamp(&e.at),
            e.remediation_minutes.map(|m| m.to_string()).unwrap_or_default(),
            e.impact.bug_count,
            e.impact.change_count
        );
    }
    out
}

pub fn parse_events_csv(content: &[u8]) -> Result<Vec<TDItemEvent>, LifecycleError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(content);
    let header = reader
        .headers()
        .map_err(|e| LifecycleError::Parse { line: 1, message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != EVENTS_HEADER {
        return Err(LifecycleError::Parse {
            line: 1,
            message: format!("expected header `{}`", EVENTS_HEADER.join(",")),
        });
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| LifecycleError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| LifecycleError::Parse { line, message };
        let count = |i: usize| {
            record[i]
                .parse::<u64>()
                .map_err(|_| bad(format!("{} `{}` is not a non-negative integer", EVENTS_HEADER[i], &record[i])))
        };
        let remediation_minutes = match &record[3] {
            "" => None,
            cell => Some(cell.parse::<f64>().map_err(|_| bad(format!("remediation_minutes `{cell}` is not a number")))?),
        };
        events.push(TDItemEvent {
            item_id: record[0].to_owned(),
            kind: record[1].parse().map_err(bad)?,
            at: parse_timestamp(&record[2]).map_err(bad)?,
            remediation_minutes,
            impact: Impact {
                bug_count: count(4)?,
                change_count: count(5)?,
            },
        });
    }
    Ok(events)
}

pub fn render_series_csv(series: &DebtSeries) -> String {
    let mut out = SERIES_HEADER.join(",");
    out.push('\n');
    for ((t, d), n) in series.instants.iter().zip(&series.open_debt).zip(&series.open_items) {
        let _ = writeln!(out, "{},{},{}", render_timestamp(t), d, n);
    }
    out
}

pub fn render_ranking_csv(ranked: &[RankedItem]) -> String {
    let mut out = String::from("rank,item_id,impact_score,cost_minutes,priority\n");
    for (i, r) in ranked.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{},{}", i + 1, r.item_id, r.impact_score, r.cost_minutes, r.priority);
    }
    out
}

/// Writes an SVG line chart of open debt (minutes) against sample index.
pub fn plot_series_svg(series: &DebtSeries, path: &Path) -> Result<(), LifecycleError> {
    use plotters::prelude::*;

    let err = |e: &dyn fmt::Display| LifecycleError::Plot(e.to_string());
    let n = series.open_debt.len();
    let y_max = series.open_debt.iter().copied().fold(0.0, f64::max).max(1.0) * 1.05;
    let root = SVGBackend::new(path, (960, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .caption("Open technical debt", ("sans-serif", 20))
        .build_cartesian_2d(0f64..(n.max(2) - 1) as f64, 0f64..y_max)
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc("sample")
        .y_desc("open debt (minutes)")
        .draw()
        .map_err(|e| err(&e))?;
    chart
        .draw_series(LineSeries::new(
            series.open_debt.iter().enumerate().map(|(i, d)| (i as f64, *d)),
            &BLUE,
        ))
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(d: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap() + Duration::days(d)
    }

    fn ev(item: &str, kind: EventKind, d: i64, minutes: Option<f64>) -> TDItemEvent {
        TDItemEvent {
            item_id: item.into(),
            kind,
            at: day(d),
            remediation_minutes: minutes,
            impact: Impact::default(),
        }
    }

    fn episode(open: i64, close: Option<i64>, minutes: f64, bugs: u64, changes: u64) -> Episode {
        Episode {
            opened_at: day(open),
            closed_at: close.map(day),
            remediation_minutes: minutes,
            impact: Impact { bug_count: bugs, change_count: changes },
        }
    }

    #[test]
    fn introduced_removed_reintroduced() {
        let tl = build_timelines(&[
            ev("x", EventKind::Introduced, 0, Some(30.0)),
            ev("x", EventKind::Removed, 5, None),
            ev("x", EventKind::Reintroduced, 9, Some(12.0)),
        ])
        .unwrap();
        assert_eq!(tl.len(), 1);
        assert_eq!(tl[0].episodes.len(), 2);
        assert_eq!(tl[0].episodes[0].closed_at, Some(day(5)));
        assert!(tl[0].episodes[1].closed_at.is_none());

        let single = build_timelines(&[ev("y", EventKind::Introduced, 0, Some(1.0))]).unwrap();
        assert!(single[0].episodes[0].closed_at.is_none());
    }

    #[test]
    fn inconsistent_sequences_rejected() {
        let cases = [
            vec![ev("a", EventKind::Removed, 0, None)],
            vec![ev("a", EventKind::Introduced, 0, Some(1.0)), ev("a", EventKind::Introduced, 1, Some(1.0))],
            vec![ev("a", EventKind::Reintroduced, 0, Some(1.0))],
            vec![ev("a", EventKind::Introduced, 0, None)],
            vec![ev("a", EventKind::Introduced, 0, Some(1.0)), ev("a", EventKind::Removed, 1, Some(1.0))],
        ];
        for evs in cases {
            let err = build_timelines(&evs).unwrap_err();
            assert!(err.to_string().contains("item `a` at 2021-01-0"), "{err}");
        }
    }

    #[test]
    fn series_examples() {
        let one = vec![ItemTimeline { item_id: "a".into(), episodes: vec![episode(0, None, 10.0, 0, 0)] }];
        let s = debt_series(&one, day(0), day(9), Duration::days(1)).unwrap();
        assert_eq!(s.open_debt, vec![10.0; 10]);
        let empty = debt_series(&[], day(0), day(9), Duration::days(3)).unwrap();
        assert_eq!(empty.open_debt, vec![0.0; 4]);
        assert_eq!(empty.instants.last(), Some(&day(9)));

        let two = vec![
            ItemTimeline { item_id: "a".into(), episodes: vec![episode(0, Some(6), 10.0, 0, 0)] },
            ItemTimeline { item_id: "b".into(), episodes: vec![episode(3, Some(9), 5.0, 0, 0)] },
        ];
        let s = debt_series(&two, day(0), day(8), Duration::days(1)).unwrap();
        assert_eq!(s.open_debt, vec![10.0, 10.0, 10.0, 15.0, 15.0, 15.0, 5.0, 5.0, 5.0]);
        assert_eq!(s.open_items, vec![1, 1, 1, 2, 2, 2, 1, 1, 1]);
        assert!(debt_series(&two, day(1), day(1), Duration::days(1)).is_err());
        assert!(debt_series(&two, day(0), day(1), Duration::zero()).is_err());
    }

    #[test]
    fn ranking_examples() {
        let tl = |id: &str, bugs: u64, changes: u64, cost: f64| ItemTimeline {
            item_id: id.into(),
            episodes: vec![episode(0, None, cost, bugs, changes)],
        };
        let w = RankWeights { bug_weight: 1.0, change_weight: 0.0 };
        let r = rank_items(&[tl("B", 10, 0, 10.0), tl("A", 10, 0, 5.0)], w, false).unwrap();
        assert_eq!(r[0].item_id, "A");
        assert_eq!(r[0].priority, 2.0);
        assert_eq!(r[1].priority, 1.0);
        let inv = rank_items(&[tl("B", 10, 0, 10.0), tl("A", 10, 0, 5.0)], w, true).unwrap();
        assert_eq!(inv[0].item_id, "B");

        let zero = RankWeights { bug_weight: 0.0, change_weight: 0.0 };
        let r = rank_items(&[tl("c", 1, 1, 1.0), tl("a", 5, 5, 1.0), tl("b", 9, 9, 1.0)], zero, false).unwrap();
        assert_eq!(r.iter().map(|x| x.item_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);

        let r = rank_items(&[tl("x", 3, 1, 7.0)], RankWeights { bug_weight: 2.0, change_weight: 1.0 }, false).unwrap();
        assert_eq!(r[0].priority, 1.0);

        assert!(rank_items(&[tl("z", 1, 1, 0.0)], w, false).is_err());
    }

    #[test]
    fn simulator_switches() {
        let p = SimulationParams { intro_rate: 0.2, ..SimulationParams::default() };
        let a = simulate_events(30, 365, 4, &p).unwrap();
        assert_eq!(a, simulate_events(30, 365, 4, &p).unwrap());
        assert_ne!(a, simulate_events(30, 365, 5, &p).unwrap());

        let no_removal = SimulationParams { removal_prob: 0.0, ..p.clone() };
        let evs = simulate_events(30, 365, 4, &no_removal).unwrap();
        assert!(!evs.is_empty());
        assert!(evs.iter().all(|e| e.kind != EventKind::Removed));

        let no_reintro = SimulationParams { reintro_prob: 0.0, removal_prob: 0.1, ..p };
        let evs = simulate_events(30, 365, 4, &no_reintro).unwrap();
        assert!(evs.iter().any(|e| e.kind == EventKind::Removed));
        assert!(evs.iter().all(|e| e.kind != EventKind::Reintroduced));
        assert!(simulate_events(0, 5, 0, &SimulationParams::default()).is_err());
    }

    #[test]
    fn events_csv_round_trip() {
        let p = SimulationParams { intro_rate: 0.3, removal_prob: 0.1, reintro_prob: 0.1, ..SimulationParams::default() };
        let evs = simulate_events(12, 120, 8, &p).unwrap();
        let csv = render_events_csv(&evs);
        assert!(csv.starts_with("item_id,kind,at,remediation_minutes,bug_count,change_count\n"));
        assert!(csv.lines().any(|l| l.contains(",Removed,") && l.contains("Z,,")));
        assert_eq!(parse_events_csv(csv.as_bytes()).unwrap(), evs);
        assert!(parse_events_csv(b"item,kind\n").is_err());
        let bad = "item_id,kind,at,remediation_minutes,bug_count,change_count\na,Introduced,2021-01-01T00:00:00Z,5,x,0\n";
        assert!(matches!(parse_events_csv(bad.as_bytes()), Err(LifecycleError::Parse { line: 2, .. })));
    }

    #[test]
    fn svg_plot_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("debt.svg");
        let tl = vec![ItemTimeline { item_id: "a".into(), episodes: vec![episode(2, Some(5), 10.0, 0, 0)] }];
        let s = debt_series(&tl, day(0), day(9), Duration::days(1)).unwrap();
        plot_series_svg(&s, &path).unwrap();
        let svg = std::fs::read_to_string(path).unwrap();
        assert!(svg.contains("<svg") && svg.contains("polyline"));
    }

    fn brute_force(timelines: &[ItemTimeline], t: DateTime<Utc>) -> f64 {
        let mut all: Vec<&Episode> = timelines.iter().flat_map(|tl| &tl.episodes).collect();
        all.reverse();
        all.iter()
            .filter(|ep| ep.opened_at <= t && ep.closed_at.is_none_or(|c| c > t))
            .map(|ep| ep.remediation_minutes)
            .sum()
    }

    proptest! {
        #[test]
        fn simulated_series_conserve_debt(seed in any::<u64>(), items in 1usize..40, days in 1u32..400) {
            let p = SimulationParams { intro_rate: 0.05, removal_prob: 0.03, reintro_prob: 0.02, ..SimulationParams::default() };
            let evs = simulate_events(items, days, seed, &p).unwrap();
            let tls = build_timelines(&evs).unwrap();
            let end = p.origin + Duration::days(i64::from(days));
            let s = debt_series(&tls, p.origin, end, Duration::hours(37)).unwrap();
            for (t, d) in s.instants.iter().zip(&s.open_debt) {
                prop_assert_eq!(*d, brute_force(&tls, *t));
            }
        }

        #[test]
        fn removal_never_raises_later_debt(seed in any::<u64>(), cut in 1i64..300) {
            let p = SimulationParams { intro_rate: 0.1, removal_prob: 0.0, ..SimulationParams::default() };
            let mut evs = simulate_events(10, 300, seed, &p).unwrap();
            let before = build_timelines(&evs).unwrap();
            let Some(victim) = before.iter().find(|tl| tl.episodes[0].opened_at < p.origin + Duration::days(cut)) else {
                return Ok(());
            };
            let at = p.origin + Duration::days(cut);
            evs.push(TDItemEvent {
                item_id: victim.item_id.clone(),
                kind: EventKind::Removed,
                at,
                remediation_minutes: None,
                impact: Impact::default(),
            });
            let after = build_timelines(&evs).unwrap();
            let end = p.origin + Duration::days(300);
            let s0 = debt_series(&before, at, end, Duration::days(1)).unwrap();
            let s1 = debt_series(&after, at, end, Duration::days(1)).unwrap();
            for (a, b) in s0.open_debt.iter().zip(&s1.open_debt) {
                prop_assert!(b <= a);
            }
        }

        #[test]
        fn ranking_order_is_weight_scale_invariant(seed in any::<u64>(), bw in 0.0f64..10.0, cw in 0.0f64..10.0, c in 0.01f64..100.0) {
            let p = SimulationParams { intro_rate: 0.2, bug_rate: 0.1, change_rate: 0.3, ..SimulationParams::default() };
            let tls = build_timelines(&simulate_events(25, 200, seed, &p).unwrap()).unwrap();
            let a = rank_items(&tls, RankWeights { bug_weight: bw, change_weight: cw }, false).unwrap();
            let b = rank_items(&tls, RankWeights { bug_weight: bw * c, change_weight: cw * c }, false).unwrap();
            let original: BTreeMap<&str, f64> = a.iter().map(|x| (x.item_id.as_str(), x.priority)).collect();
            for w in b.windows(2) {
                let (p0, p1) = (original[w[0].item_id.as_str()], original[w[1].item_id.as_str()]);
                prop_assert!(p0 >= p1 - 1e-12 * p0.abs().max(1.0), "order changed: {:?}", w);
                prop_assert!((w[0].priority - c * p0).abs() <= 1e-9 * w[0].priority.abs().max(1.0));
            }
        }
    }
}
