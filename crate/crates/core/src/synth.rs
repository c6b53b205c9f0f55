//! Seeded synthetic snapshot histories with realistic metric couplings, for
//! offline fixtures and demos.
//!
//! Each project grows geometrically; size, complexity, documentation,
//! coverage and duplication metrics derive from its code size with per-project
//! ratios. Remediation targets are nonlinear in those metrics plus
//! multiplicative noise, so tree ensembles beat linear fits.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{Distribution, Metric, MetricSnapshot};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_projects: usize,
    pub snapshots_per_project: usize,
    pub interval_days: u32,
    /// Chance that any one scalar metric cell is left empty.
    pub missing_rate: f64,
    /// Standard deviation of the log-normal target noise.
    pub noise: f64,
    pub origin: DateTime<Utc>,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_projects: 8,
            snapshots_per_project: 25,
            interval_days: 180,
            missing_rate: 0.01,
            noise: 0.05,
            origin: Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap(),
        }
    }
}

struct Profile {
    base_ncloc: f64,
    growth: f64,
    fn_size: f64,
    class_size: f64,
    cc_per_fn: f64,
    comment_ratio: f64,
    coverage: f64,
    dup_ratio: f64,
    smell_rate: f64,
    bug_rate: f64,
}

fn profile(rng: &mut ChaCha8Rng) -> Profile {
    Profile {
        base_ncloc: rng.gen_range(8_000.0..60_000.0),
        growth: rng.gen_range(1.01..1.08),
        fn_size: rng.gen_range(8.0..18.0),
        class_size: rng.gen_range(90.0..220.0),
        cc_per_fn: rng.gen_range(1.4..3.6),
        comment_ratio: rng.gen_range(0.04..0.3),
        coverage: rng.gen_range(0.1..0.85),
        dup_ratio: rng.gen_range(0.01..0.12),
        smell_rate: rng.gen_range(0.5..3.0),
        bug_rate: rng.gen_range(0.02..0.3),
    }
}

fn sha(rng: &mut ChaCha8Rng) -> String {
    format!("{:016x}{:016x}{:08x}", rng.gen::<u64>(), rng.gen::<u64>(), rng.gen::<u32>())
}

fn jitter(rng: &mut ChaCha8Rng, v: f64, spread: f64) -> f64 {
    v * rng.gen_range(1.0 - spread..1.0 + spread)
}

fn split(rng: &mut ChaCha8Rng, total: f64, labels: &[&str], decay: f64) -> Distribution {
    let weights: Vec<f64> = (0..labels.len())
        .map(|i| decay.powi(i as i32) * rng.gen_range(0.6..1.4))
        .collect();
    let sum: f64 = weights.iter().sum();
    Distribution::new(
        labels
            .iter()
            .zip(&weights)
            .map(|(l, w)| ((*l).to_owned(), (total * w / sum).round()))
            .collect(),
    )
}

fn snapshot(
    rng: &mut ChaCha8Rng,
    prof: &Profile,
    project: &str,
    step: usize,
    at: DateTime<Utc>,
    params: &SynthParams,
) -> MetricSnapshot {
    let ncloc = jitter(rng, prof.base_ncloc * prof.growth.powi(step as i32), 0.02).round();
    let functions = (ncloc / jitter(rng, prof.fn_size, 0.05)).round().max(1.0);
    let classes = (ncloc / jitter(rng, prof.class_size, 0.05)).round().max(1.0);
    let files = (classes * jitter(rng, 0.92, 0.03)).round().max(1.0);
    let directories = (files / jitter(rng, 9.0, 0.2)).round().max(1.0);
    let complexity = (functions * jitter(rng, prof.cc_per_fn, 0.04)).round();
    let comment_lines = (ncloc * jitter(rng, prof.comment_ratio, 0.05)).round();
    let statements = (ncloc * jitter(rng, 0.45, 0.05)).round();
    let lines_to_cover = (statements * jitter(rng, 1.1, 0.05)).round();
    let coverage = (jitter(rng, prof.coverage, 0.03) * 100.0).clamp(0.0, 100.0);
    let uncovered = (lines_to_cover * (1.0 - coverage / 100.0)).round();
    let dup_lines = (ncloc * jitter(rng, prof.dup_ratio, 0.1)).round();
    let cycles = (complexity / 4_000.0 * rng.gen_range(0.0..2.0)).round();

    let mut s = MetricSnapshot::empty(project, &sha(rng), at);
    let values = [
        (Metric::Classes, classes),
        (Metric::Files, files),
        (Metric::Lines, (ncloc + comment_lines) * 1.18),
        (Metric::Ncloc, ncloc),
        (Metric::ClassesAndInterfaces, (classes * 1.12).round()),
        (Metric::MissingPackageInfo, (directories * rng.gen_range(0.0..0.3)).round()),
        (Metric::Packages, (directories * 0.9).round().max(1.0)),
        (Metric::Statements, statements),
        (Metric::Directories, directories),
        (Metric::Functions, functions),
        (Metric::CommentLines, comment_lines),
        (Metric::CommentLinesDensity, 100.0 * comment_lines / (ncloc + comment_lines)),
        (Metric::Complexity, complexity),
        (Metric::ClassComplexity, complexity / classes),
        (Metric::FunctionComplexity, complexity / functions),
        (Metric::CognitiveComplexity, (complexity * jitter(rng, 0.75, 0.1)).round()),
        (Metric::PackageDependencyCycles, cycles),
        (Metric::Coverage, coverage),
        (Metric::LinesToCover, lines_to_cover),
        (Metric::LineCoverage, (coverage * 1.02).min(100.0)),
        (Metric::UncoveredLines, uncovered),
        (Metric::DuplicatedLines, dup_lines),
        (Metric::DuplicatedBlocks, (dup_lines / 14.0).round()),
        (Metric::DuplicatedFiles, (files * prof.dup_ratio * 1.5).round()),
        (Metric::DuplicatedLinesDensity, 100.0 * dup_lines / ((ncloc + comment_lines) * 1.18)),
    ];
    for (metric, v) in values {
        let v = (v * 1e3).round() / 1e3;
        let missing = rng.gen_bool(params.missing_rate);
        s.set_metric(metric, (!missing).then_some(v));
    }
    s.set_distribution(
        Metric::NclocLanguageDistribution,
        Some(Distribution::new(vec![
            ("java".into(), (ncloc * 0.93).round()),
            ("xml".into(), (ncloc * 0.07).round()),
        ])),
    );
    s.set_distribution(
        Metric::FunctionComplexityDistribution,
        Some(split(rng, functions, &["1", "2", "4", "6", "8", "10", "12"], 1.0 / prof.cc_per_fn)),
    );
    s.set_distribution(
        Metric::FileComplexityDistribution,
        Some(split(rng, files, &["0", "5", "10", "20", "30", "60", "90"], 0.6)),
    );

    let hot = complexity * (complexity / functions).powf(1.5);
    let sqale = prof.smell_rate * (0.8 * hot + 2.5 * dup_lines + 0.02 * uncovered + 30.0 * cycles);
    let reliability = prof.bug_rate * (hot * (1.2 - coverage / 100.0) + 5.0 * cycles);
    let noisy = |rng: &mut ChaCha8Rng, v: f64| {
        let z: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
        (v * (params.noise * z).exp()).round()
    };
    s.sqale_index = Some(noisy(rng, sqale));
    s.reliability_remediation_effort = Some(noisy(rng, reliability));
    s.security_remediation_effort = Some((reliability * 0.1).round());
    s
}

/// `n_projects × snapshots_per_project` snapshots, grouped by project and
/// chronological within each. Project `p` draws from its own seed stream.
pub fn synth_snapshots(params: &SynthParams, seed: u64) -> Vec<MetricSnapshot> {
    let width = params.n_projects.saturating_sub(1).to_string().len().max(2);
    let mut out = Vec::with_capacity(params.n_projects * params.snapshots_per_project);
    for p in 0..params.n_projects {
        let mut rng = rng_from_seed(derive_seed(seed, p as u64));
        let prof = profile(&mut rng);
        let project = format!("org.example:project-{p:0width$}");
        let start = params.origin + Duration::days(rng.gen_range(0..365));
        for step in 0..params.snapshots_per_project {
            let at = start
                + Duration::days(i64::from(params.interval_days) * step as i64)
                + Duration::seconds(rng.gen_range(0..86_400));
            out.push(snapshot(&mut rng, &prof, &project, step, at, params));
        }
    }
    out
}
