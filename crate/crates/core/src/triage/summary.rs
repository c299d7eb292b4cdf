use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::RootCause;
use crate::benchmark::{CurationMethod, ProblemInstance};
use crate::numeric::{mean, median, sample_std};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: RootCause,
    pub count: u64,
    /// Share of the enclosing group, in percent.
    pub percent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation.
    pub std: f64,
}

impl MetricSummary {
    pub fn of(xs: &[f64]) -> Option<Self> {
        Some(MetricSummary {
            mean: mean(xs)?,
            median: median(xs)?,
            std: sample_std(xs)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: CurationMethod,
    pub count: u64,
    pub categories: Vec<CategoryCount>,
    pub files_changed: MetricSummary,
    pub lines_changed: MetricSummary,
}

/// Counts by curation method and root cause, plus change-size statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub total: u64,
    pub categories: Vec<CategoryCount>,
    pub methods: Vec<MethodSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files_changed: Option<MetricSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines_changed: Option<MetricSummary>,
}

fn category_counts(items: &[&ProblemInstance]) -> Vec<CategoryCount> {
    if items.is_empty() {
        return Vec::new();
    }
    let mut counts: BTreeMap<RootCause, u64> = RootCause::ALL.into_iter().map(|c| (c, 0)).collect();
    for inst in items {
        *counts
            .get_mut(&inst.category.unwrap_or(RootCause::Unclassified))
            .expect("all categories seeded") += 1;
    }
    let total = items.len() as f64;
    RootCause::ALL
        .into_iter()
        .map(|c| CategoryCount {
            category: c,
            count: counts[&c],
            percent: counts[&c] as f64 * 100.0 / total,
        })
        .collect()
}

fn metric(items: &[&ProblemInstance], f: impl Fn(&ProblemInstance) -> u64) -> Option<MetricSummary> {
    let xs: Vec<f64> = items.iter().map(|i| f(i) as f64).collect();
    MetricSummary::of(&xs)
}

/// An empty dataset yields an empty report.
pub fn summarize_dataset(instances: &[ProblemInstance]) -> DistributionReport {
    let all: Vec<&ProblemInstance> = instances.iter().collect();
    let mut methods = Vec::new();
    for method in CurationMethod::ALL {
        let group: Vec<&ProblemInstance> = all.iter().copied().filter(|i| i.method == method).collect();
        if group.is_empty() {
            continue;
        }
        methods.push(MethodSummary {
            method,
            count: group.len() as u64,
            categories: category_counts(&group),
            files_changed: metric(&group, |i| i.change_stats.files_changed).expect("non-empty"),
            lines_changed: metric(&group, |i| i.change_stats.lines_changed).expect("non-empty"),
        });
    }
    DistributionReport {
        total: instances.len() as u64,
        categories: category_counts(&all),
        methods,
        files_changed: metric(&all, |i| i.change_stats.files_changed),
        lines_changed: metric(&all, |i| i.change_stats.lines_changed),
    }
}

impl DistributionReport {
    /// Plain-text tables: category by method, then change statistics.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<24}", "category");
        for m in &self.methods {
            let _ = write!(out, " {:>22}", m.method.as_str());
        }
        let _ = writeln!(out, " {:>14}", "total");
        for (i, c) in self.categories.iter().enumerate() {
            let _ = write!(out, "{:<24}", c.category.as_str());
            for m in &self.methods {
                let _ = write!(out, " {:>22}", m.categories[i].count);
            }
            let _ = writeln!(out, " {:>6} ({:>5.1}%)", c.count, c.percent);
        }
        let _ = writeln!(out, "{:<24} {:>6}", "instances", self.total);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "method", "files.mean", "files.med", "files.std", "lines.mean", "lines.med", "lines.std"
        );
        for m in &self.methods {
            let (f, l) = (m.files_changed, m.lines_changed);
            let _ = writeln!(
                out,
                "{:<24} {:>10.1} {:>10.1} {:>10.1} {:>10.1} {:>10.1} {:>10.1}",
                m.method.as_str(),
                f.mean,
                f.median,
                f.std,
                l.mean,
                l.median,
                l.std
            );
        }
        out
    }
}
