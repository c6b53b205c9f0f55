//! Project eligibility rules and snapshot down-sampling.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::error::IngestError;
use super::snapshot::MetricSnapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectDescriptor {
    pub name: String,
    pub language: String,
    pub first_commit: DateTime<Utc>,
    pub last_commit: DateTime<Utc>,
    pub commit_count: u64,
    pub class_count: u64,
    pub issue_count: u64,
}

/// Minimum project age, counted as 3 × 365 days.
pub const MIN_AGE_DAYS: i64 = 3 * 365;
pub const MIN_COMMITS_EXCLUSIVE: u64 = 500;
pub const MIN_CLASSES_EXCLUSIVE: u64 = 100;
pub const MIN_ISSUES_INCLUSIVE: u64 = 100;

impl ProjectDescriptor {
    pub fn is_eligible(&self, now: DateTime<Utc>) -> bool {
        self.language.eq_ignore_ascii_case("java")
            && now - self.first_commit > Duration::days(MIN_AGE_DAYS)
            && self.commit_count > MIN_COMMITS_EXCLUSIVE
            && self.class_count > MIN_CLASSES_EXCLUSIVE
            && self.issue_count >= MIN_ISSUES_INCLUSIVE
    }
}

/// Keeps the descriptors meeting all five selection criteria, in input order.
pub fn filter_projects(descriptors: &[ProjectDescriptor], now: DateTime<Utc>) -> Vec<ProjectDescriptor> {
    descriptors
        .iter()
        .filter(|d| d.is_eligible(now))
        .cloned()
        .collect()
}

/// Greedy down-sampling: keep the earliest snapshot, then repeatedly the
/// earliest one at least `interval_days` after the last kept.
pub fn sample_interval(
    snapshots: &[MetricSnapshot],
    interval_days: u32,
) -> Result<Vec<MetricSnapshot>, IngestError> {
    if interval_days == 0 {
        return Err(IngestError::Precondition("interval_days must be >= 1".into()));
    }
    if let Some(first) = snapshots.first() {
        if let Some(other) = snapshots.iter().find(|s| s.project_id != first.project_id) {
            return Err(IngestError::Precondition(format!(
                "snapshots mix projects `{}` and `{}`",
                first.project_id, other.project_id
            )));
        }
    }

    let mut sorted: Vec<&MetricSnapshot> = snapshots.iter().collect();
    sorted.sort_by_key(|s| s.timestamp);

    let gap = Duration::days(i64::from(interval_days));
    let mut out: Vec<MetricSnapshot> = Vec::new();
    for snap in sorted {
        match out.last() {
            None => out.push(snap.clone()),
            Some(last) if snap.timestamp - last.timestamp >= gap => out.push(snap.clone()),
            Some(_) => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap()
    }

    fn desc(lang: &str, age_days: i64, commits: u64, classes: u64, issues: u64) -> ProjectDescriptor {
        ProjectDescriptor {
            name: "p".into(),
            language: lang.into(),
            first_commit: t0() - Duration::days(age_days),
            last_commit: t0(),
            commit_count: commits,
            class_count: classes,
            issue_count: issues,
        }
    }

    fn snap_at(project: &str, day: i64) -> MetricSnapshot {
        MetricSnapshot::empty(project, &"a".repeat(40), t0() + Duration::days(day))
    }

    fn days(snaps: &[MetricSnapshot]) -> Vec<i64> {
        snaps.iter().map(|s| (s.timestamp - t0()).num_days()).collect()
    }

    #[test]
    fn commit_boundary_is_strict() {
        assert!(filter_projects(&[desc("Java", 1500, 500, 200, 150)], t0()).is_empty());
        assert_eq!(filter_projects(&[desc("Java", 1500, 501, 200, 150)], t0()).len(), 1);
    }

    #[test]
    fn issue_boundary_is_inclusive() {
        assert_eq!(filter_projects(&[desc("Java", 1500, 1000, 200, 100)], t0()).len(), 1);
        assert!(filter_projects(&[desc("Java", 1500, 1000, 200, 99)], t0()).is_empty());
    }

    #[test]
    fn all_criteria_met() {
        assert_eq!(filter_projects(&[desc("Java", 4 * 365, 1000, 200, 150)], t0()).len(), 1);
    }

    #[test]
    fn other_criteria_exclude() {
        assert!(filter_projects(&[desc("Python", 4 * 365, 1000, 200, 150)], t0()).is_empty());
        assert!(filter_projects(&[desc("Java", 3 * 365, 1000, 200, 150)], t0()).is_empty());
        assert!(filter_projects(&[desc("Java", 4 * 365, 1000, 100, 150)], t0()).is_empty());
    }

    #[test]
    fn greedy_sampling_trace() {
        let snaps: Vec<_> = [0, 90, 200, 400].iter().map(|&d| snap_at("p", d)).collect();
        assert_eq!(days(&sample_interval(&snaps, 180).unwrap()), vec![0, 200, 400]);
    }

    #[test]
    fn sampling_boundary_is_inclusive() {
        let snaps = vec![snap_at("p", 0), snap_at("p", 180)];
        assert_eq!(days(&sample_interval(&snaps, 180).unwrap()), vec![0, 180]);
    }

    #[test]
    fn single_and_unsorted() {
        assert_eq!(days(&sample_interval(&[snap_at("p", 5)], 180).unwrap()), vec![5]);
        let snaps = vec![snap_at("p", 400), snap_at("p", 0), snap_at("p", 200)];
        assert_eq!(days(&sample_interval(&snaps, 180).unwrap()), vec![0, 200, 400]);
    }

    #[test]
    fn mixed_projects_rejected() {
        let snaps = vec![snap_at("p", 0), snap_at("q", 10)];
        assert!(matches!(sample_interval(&snaps, 180), Err(IngestError::Precondition(_))));
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(raw in proptest::collection::vec(
            (prop_oneof![Just("Java"), Just("java"), Just("Kotlin")], 0i64..3000, 400u64..700, 50u64..200, 50u64..200),
            0..20,
        )) {
            let ds: Vec<_> = raw.iter().map(|&(l, a, c, k, i)| desc(l, a, c, k, i)).collect();
            let once = filter_projects(&ds, t0());
            prop_assert_eq!(filter_projects(&once, t0()), once);
        }

        #[test]
        fn sampled_gaps_respect_interval(day_list in proptest::collection::vec(0i64..2000, 1..40), interval in 1u32..400) {
            let snaps: Vec<_> = day_list.iter().map(|&d| snap_at("p", d)).collect();
            let out = sample_interval(&snaps, interval).unwrap();
            let ds = days(&out);
            prop_assert_eq!(ds[0], *day_list.iter().min().unwrap());
            for w in ds.windows(2) {
                prop_assert!(w[1] > w[0]);
                prop_assert!(w[1] - w[0] >= i64::from(interval));
            }
        }
    }
}
