//! The fixed 28-metric schema and the CSV column layout built on it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the 28 project-level metrics reported by the static analyser.
///
/// Declaration order is the CSV column order and the feature order of every
/// design matrix built from snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Classes,
    Files,
    Lines,
    Ncloc,
    NclocLanguageDistribution,
    ClassesAndInterfaces,
    MissingPackageInfo,
    Packages,
    Statements,
    Directories,
    Functions,
    CommentLines,
    CommentLinesDensity,
    Complexity,
    ClassComplexity,
    FunctionComplexity,
    FunctionComplexityDistribution,
    FileComplexityDistribution,
    CognitiveComplexity,
    PackageDependencyCycles,
    Coverage,
    LinesToCover,
    LineCoverage,
    UncoveredLines,
    DuplicatedLines,
    DuplicatedBlocks,
    DuplicatedFiles,
    DuplicatedLinesDensity,
}

impl Metric {
    pub const ALL: [Metric; 28] = [
        Metric::Classes,
        Metric::Files,
        Metric::Lines,
        Metric::Ncloc,
        Metric::NclocLanguageDistribution,
        Metric::ClassesAndInterfaces,
        Metric::MissingPackageInfo,
        Metric::Packages,
        Metric::Statements,
        Metric::Directories,
        Metric::Functions,
        Metric::CommentLines,
        Metric::CommentLinesDensity,
        Metric::Complexity,
        Metric::ClassComplexity,
        Metric::FunctionComplexity,
        Metric::FunctionComplexityDistribution,
        Metric::FileComplexityDistribution,
        Metric::CognitiveComplexity,
        Metric::PackageDependencyCycles,
        Metric::Coverage,
        Metric::LinesToCover,
        Metric::LineCoverage,
        Metric::UncoveredLines,
        Metric::DuplicatedLines,
        Metric::DuplicatedBlocks,
        Metric::DuplicatedFiles,
        Metric::DuplicatedLinesDensity,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Classes => "classes",
            Metric::Files => "files",
            Metric::Lines => "lines",
            Metric::Ncloc => "ncloc",
            Metric::NclocLanguageDistribution => "ncloc_language_distribution",
            Metric::ClassesAndInterfaces => "classes_and_interfaces",
            Metric::MissingPackageInfo => "missing_package_info",
            Metric::Packages => "packages",
            Metric::Statements => "statements",
            Metric::Directories => "directories",
            Metric::Functions => "functions",
            Metric::CommentLines => "comment_lines",
            Metric::CommentLinesDensity => "comment_lines_density",
            Metric::Complexity => "complexity",
            Metric::ClassComplexity => "class_complexity",
            Metric::FunctionComplexity => "function_complexity",
            Metric::FunctionComplexityDistribution => "function_complexity_distribution",
            Metric::FileComplexityDistribution => "file_complexity_distribution",
            Metric::CognitiveComplexity => "cognitive_complexity",
            Metric::PackageDependencyCycles => "package_dependency_cycles",
            Metric::Coverage => "coverage",
            Metric::LinesToCover => "lines_to_cover",
            Metric::LineCoverage => "line_coverage",
            Metric::UncoveredLines => "uncovered_lines",
            Metric::DuplicatedLines => "duplicated_lines",
            Metric::DuplicatedBlocks => "duplicated_blocks",
            Metric::DuplicatedFiles => "duplicated_files",
            Metric::DuplicatedLinesDensity => "duplicated_lines_density",
        }
    }

    /// Distribution-valued metrics carry `label=value` maps instead of a scalar.
    pub fn is_distribution(self) -> bool {
        matches!(
            self,
            Metric::NclocLanguageDistribution
                | Metric::FunctionComplexityDistribution
                | Metric::FileComplexityDistribution
        )
    }

    /// Percent-valued metrics, bounded to `[0, 100]`.
    pub fn is_percent(self) -> bool {
        matches!(
            self,
            Metric::CommentLinesDensity
                | Metric::DuplicatedLinesDensity
                | Metric::Coverage
                | Metric::LineCoverage
        )
    }

    pub fn scalars() -> impl Iterator<Item = Metric> {
        Metric::ALL.into_iter().filter(|m| !m.is_distribution())
    }

    pub fn distributions() -> impl Iterator<Item = Metric> {
        Metric::ALL.into_iter().filter(|m| m.is_distribution())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric key `{0}`")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| UnknownMetric(s.to_owned()))
    }
}

/// The three remediation-effort columns, in CSV order.
pub const TARGET_COLUMNS: [&str; 3] = [
    "sqale_index",
    "reliability_remediation_effort",
    "security_remediation_effort",
];

/// Identity columns preceding the metrics.
pub const ID_COLUMNS: [&str; 3] = ["project", "commit_sha", "commit_date"];

/// Full snapshot CSV header, in order.
pub fn snapshot_header() -> Vec<&'static str> {
    ID_COLUMNS
        .iter()
        .copied()
        .chain(Metric::ALL.iter().map(|m| m.key()))
        .chain(TARGET_COLUMNS.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_has_28_metrics_and_three_distributions() {
        assert_eq!(Metric::ALL.len(), 28);
        assert_eq!(Metric::distributions().count(), 3);
        assert_eq!(Metric::scalars().count(), 25);
        assert_eq!(snapshot_header().len(), 34);
    }

    #[test]
    fn keys_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.key().parse::<Metric>().unwrap(), m);
        }
        assert!("squale".parse::<Metric>().is_err());
    }

    #[test]
    fn declaration_order_matches_ordering() {
        let mut sorted = Metric::ALL;
        sorted.sort();
        assert_eq!(sorted, Metric::ALL);
    }
}
