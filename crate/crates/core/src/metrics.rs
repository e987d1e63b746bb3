use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::FixOutcome;
use crate::patch::parse_patch;
use crate::udiff::{changed_lines, parse_unified_diff, DiffParseError, FileDiff};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    /// Patch applied, compiled, and the original finding is gone.
    pub success: bool,
    pub blocks_generated: usize,
    pub errors_present: usize,
}

impl EvalRecord {
    /// Record for one orchestrator outcome. Blocks are counted on the final
    /// patch, or on the last attempt when nothing validated.
    pub fn from_outcome(sample_id: impl Into<String>, outcome: &FixOutcome, errors_present: usize) -> Self {
        let blocks = match (&outcome.final_patch, outcome.attempts.last()) {
            (Some(p), _) => p.blocks.len(),
            (None, Some(a)) => parse_patch(&a.raw).blocks.len(),
            (None, None) => 0,
        };
        Self {
            sample_id: sample_id.into(),
            success: outcome.is_fixed(),
            blocks_generated: blocks,
            errors_present,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no records")]
    EmptyInput,
    #[error("record {0} has errors_present = 0")]
    NoErrors(String),
}

fn check(records: &[EvalRecord]) -> Result<(), MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    match records.iter().find(|r| r.errors_present == 0) {
        Some(r) => Err(MetricsError::NoErrors(r.sample_id.clone())),
        None => Ok(()),
    }
}

/// Share of records whose fix succeeded.
pub fn fix_accuracy(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    check(records)?;
    let ok = records.iter().filter(|r| r.success).count();
    Ok(ok as f64 / records.len() as f64)
}

/// Share of records with more generated blocks than errors present.
pub fn fix_redundancy(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    check(records)?;
    let over = records
        .iter()
        .filter(|r| r.blocks_generated > r.errors_present)
        .count();
    Ok(over as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Adopted,
    NotAdopted,
}

/// Decides whether a committed change carries a suggested one.
pub trait AdoptionComparator {
    fn compare(&self, suggested: &[FileDiff], committed: &[FileDiff]) -> Verdict;
}

/// Every suggested changed line (per file, with polarity and multiplicity,
/// whitespace-normalized) must appear among the committed changed lines.
#[derive(Debug, Clone, Copy, Default)]
pub struct Containment;

impl AdoptionComparator for Containment {
    fn compare(&self, suggested: &[FileDiff], committed: &[FileDiff]) -> Verdict {
        let s = changed_lines(suggested);
        let c = changed_lines(committed);
        let contained = s.iter().all(|(file, lines)| {
            lines.iter().all(|(line, n)| {
                c.get(file)
                    .and_then(|m| m.get(line))
                    .is_some_and(|have| have >= n)
            })
        });
        if contained {
            Verdict::Adopted
        } else {
            Verdict::NotAdopted
        }
    }
}

pub fn match_adoption_with(
    suggested: &str,
    committed: &str,
    comparator: &dyn AdoptionComparator,
) -> Result<Verdict, DiffParseError> {
    let s = parse_unified_diff(suggested)?;
    let c = parse_unified_diff(committed)?;
    Ok(comparator.compare(&s, &c))
}

pub fn match_adoption(suggested: &str, committed: &str) -> Result<Verdict, DiffParseError> {
    match_adoption_with(suggested, committed, &Containment)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdoptionRecord {
    pub suggestion_id: String,
    pub suggested_diff: String,
    pub committed_diff: String,
    pub verdict: Verdict,
    pub adopter: String,
    pub timestamp: DateTime<Utc>,
}

impl AdoptionRecord {
    pub fn evaluate(
        suggestion_id: impl Into<String>,
        suggested_diff: impl Into<String>,
        committed_diff: impl Into<String>,
        adopter: impl Into<String>,
        timestamp: DateTime<Utc>,
    ) -> Result<Self, DiffParseError> {
        let suggested_diff = suggested_diff.into();
        let committed_diff = committed_diff.into();
        let verdict = match_adoption(&suggested_diff, &committed_diff)?;
        Ok(Self {
            suggestion_id: suggestion_id.into(),
            suggested_diff,
            committed_diff,
            verdict,
            adopter: adopter.into(),
            timestamp,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WeeklyAdoption {
    /// Distinct adopters with at least one adopted record.
    pub adopters: usize,
    pub adoptions: usize,
}

/// ISO week label such as `2025-W07`.
pub fn iso_week(ts: &DateTime<Utc>) -> String {
    let w = ts.iso_week();
    format!("{}-W{:02}", w.year(), w.week())
}

/// Weekly active adopters and adoption counts. Weeks without an adopted
/// record are absent.
pub fn aggregate_adoption(records: &[AdoptionRecord]) -> BTreeMap<String, WeeklyAdoption> {
    let mut weeks: BTreeMap<String, (BTreeSet<&str>, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.verdict == Verdict::Adopted) {
        let slot = weeks.entry(iso_week(&r.timestamp)).or_default();
        slot.0.insert(&r.adopter);
        slot.1 += 1;
    }
    weeks
        .into_iter()
        .map(|(w, (who, n))| {
            (
                w,
                WeeklyAdoption {
                    adopters: who.len(),
                    adoptions: n,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n: usize,
    pub accuracy: Option<f64>,
    pub redundancy: Option<f64>,
    pub adopted_count: usize,
    pub weekly: BTreeMap<String, WeeklyAdoption>,
}

pub fn summarize(evals: &[EvalRecord], adoptions: &[AdoptionRecord]) -> Result<MetricsSummary, MetricsError> {
    let (accuracy, redundancy) = if evals.is_empty() {
        (None, None)
    } else {
        (Some(fix_accuracy(evals)?), Some(fix_redundancy(evals)?))
    };
    Ok(MetricsSummary {
        n: evals.len(),
        accuracy,
        redundancy,
        adopted_count: adoptions.iter().filter(|a| a.verdict == Verdict::Adopted).count(),
        weekly: aggregate_adoption(adoptions),
    })
}

/// Tab-separated `week adopters adoptions` rows with a header.
pub fn weekly_table(weekly: &BTreeMap<String, WeeklyAdoption>) -> String {
    let mut out = String::from("week\tadopters\tadoptions\n");
    for (w, a) in weekly {
        out.push_str(&format!("{w}\t{}\t{}\n", a.adopters, a.adoptions));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn rec(success: bool, p: usize, e: usize) -> EvalRecord {
        EvalRecord {
            sample_id: format!("{success}{p}{e}"),
            success,
            blocks_generated: p,
            errors_present: e,
        }
    }

    #[test]
    fn accuracy_and_redundancy_examples() {
        let r = [rec(true, 1, 1), rec(true, 1, 1), rec(true, 1, 1), rec(false, 1, 1)];
        assert_eq!(fix_accuracy(&r).unwrap(), 0.75);
        let r = [rec(true, 1, 1), rec(true, 3, 1), rec(true, 2, 2)];
        assert!((fix_redundancy(&r).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(fix_accuracy(&[]), Err(MetricsError::EmptyInput));
        assert_eq!(fix_redundancy(&[]), Err(MetricsError::EmptyInput));
        assert!(matches!(fix_accuracy(&[rec(true, 1, 0)]), Err(MetricsError::NoErrors(_))));
    }

    const SUGGESTED: &str = "--- a/x.go\n+++ b/x.go\n@@ -1,2 +1,3 @@\n ctx\n-old\n+new\n+more\n";

    #[test]
    fn containment_examples() {
        assert_eq!(match_adoption(SUGGESTED, SUGGESTED).unwrap(), Verdict::Adopted);
        let superset = format!("{SUGGESTED}--- a/y.go\n+++ b/y.go\n@@ -1 +1 @@\n-a\n+b\n");
        assert_eq!(match_adoption(SUGGESTED, &superset).unwrap(), Verdict::Adopted);
        let partial = "--- a/x.go\n+++ b/x.go\n@@ -1,2 +1,2 @@\n ctx\n-old\n+new\n";
        assert_eq!(match_adoption(SUGGESTED, partial).unwrap(), Verdict::NotAdopted);
        let moved = "--- a/y.go\n+++ b/y.go\n@@ -1,2 +1,3 @@\n ctx\n-old\n+new\n+more\n";
        assert_eq!(match_adoption(SUGGESTED, moved).unwrap(), Verdict::NotAdopted);
        let reindented = "--- a/x.go\n+++ b/x.go\n@@ -10,1 +10,2 @@\n-   old\n+  new  \n+more\n";
        assert_eq!(match_adoption(SUGGESTED, reindented).unwrap(), Verdict::Adopted);
        assert!(match_adoption("--- a/x\n+++ b/x\n@@ junk", SUGGESTED).is_err());
    }

    #[test]
    fn weekly_examples() {
        let t = |d: u32, h: u32| Utc.with_ymd_and_hms(2025, 3, d, h, 0, 0).unwrap();
        let mk = |who: &str, ts, verdict| AdoptionRecord {
            suggestion_id: "s".into(),
            suggested_diff: String::new(),
            committed_diff: String::new(),
            verdict,
            adopter: who.into(),
            timestamp: ts,
        };
        let recs = [
            mk("ann", t(3, 9), Verdict::Adopted),
            mk("ann", t(5, 9), Verdict::Adopted),
            mk("bo", t(9, 23), Verdict::Adopted),
            mk("cy", t(6, 1), Verdict::NotAdopted),
            mk("cy", t(20, 1), Verdict::NotAdopted),
        ];
        let w = aggregate_adoption(&recs);
        assert_eq!(w.len(), 1, "{w:?}");
        assert_eq!(w["2025-W10"], WeeklyAdoption { adopters: 2, adoptions: 3 });
        assert_eq!(weekly_table(&w), "week\tadopters\tadoptions\n2025-W10\t2\t3\n");
    }

    proptest! {
        #[test]
        fn metrics_match_recount(rows in proptest::collection::vec((any::<bool>(), 0usize..5, 1usize..4), 1..100)) {
            let recs: Vec<_> = rows.iter().map(|&(s, p, e)| rec(s, p, e)).collect();
            let mut ok = 0;
            let mut over = 0;
            for (s, p, e) in &rows {
                if *s { ok += 1; }
                if p > e { over += 1; }
            }
            prop_assert_eq!(fix_accuracy(&recs).unwrap(), ok as f64 / rows.len() as f64);
            prop_assert_eq!(fix_redundancy(&recs).unwrap(), over as f64 / rows.len() as f64);
            let acc_n = fix_accuracy(&recs).unwrap() * rows.len() as f64;
            prop_assert!((acc_n - acc_n.round()).abs() < 1e-9);
        }

        #[test]
        fn containment_is_monotone(extra in proptest::collection::vec("[a-z ]{0,6}", 0..5)) {
            let mut bigger = String::from("--- a/x.go\n+++ b/x.go\n@@ -1,2 +1,3 @@\n ctx\n-old\n+new\n+more\n");
            bigger.push_str("--- a/z.go\n+++ b/z.go\n");
            bigger.push_str(&format!("@@ -0,0 +1,{} @@\n", extra.len()));
            for l in &extra { bigger.push_str(&format!("+{l}\n")); }
            let bigger = if extra.is_empty() { SUGGESTED.to_string() } else { bigger };
            prop_assert_eq!(match_adoption(SUGGESTED, &bigger).unwrap(), Verdict::Adopted);
        }
    }
}
