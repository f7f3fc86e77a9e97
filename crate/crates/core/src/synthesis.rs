//! Patient-level synthesis over the per-nerve results.
//!
//! A summary of the exam is reduced to a handful of categorical predicates
//! which the level-3 rule set consumes:
//!
//! | variable                      | values                 |
//! |-------------------------------|------------------------|
//! | `total_affected_class`        | zero, one, several     |
//! | `affected_nerve_count_class`  | zero, one, several     |
//! | `diffuse_nerve_count_class`   | zero, one, several     |
//! | `has_diffuse_pair`            | yes, no                |
//!
//! Counts are of affected segments across all chains, of nerves whose
//! diagnosis is not normal and of nerves diagnosed diffuse. A diffuse pair
//! is two homologous nerves that are both diffuse.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Run, SegmentStateChain};
use crate::domain::{homologous, NerveDx, NerveId, PatientDx};
use crate::rules::{fire, FactSet, RuleSet, Vocabulary};

pub const TARGET: &str = "patient";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerveResult {
    pub nerve: NerveId,
    pub chain: SegmentStateChain,
    pub run: Run,
    pub dx: NerveDx,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamSummary {
    /// Sorted by nerve.
    pub results: Vec<NerveResult>,
    pub total_affected: usize,
    pub affected_nerves: Vec<NerveId>,
    pub diffuse_nerves: Vec<NerveId>,
    pub diffuse_pairs: Vec<(NerveId, NerveId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("no nerve results to summarize")]
    Empty,
}

pub fn summarize(mut results: Vec<NerveResult>) -> Result<ExamSummary, SynthesisError> {
    if results.is_empty() {
        return Err(SynthesisError::Empty);
    }
    results.sort_by(|a, b| a.nerve.cmp(&b.nerve));

    let total_affected = results.iter().map(|r| r.chain.affected()).sum();
    let affected_nerves: Vec<NerveId> = results
        .iter()
        .filter(|r| r.dx != NerveDx::Normal)
        .map(|r| r.nerve.clone())
        .collect();
    let diffuse_nerves: Vec<NerveId> = results
        .iter()
        .filter(|r| r.dx == NerveDx::Diffuse)
        .map(|r| r.nerve.clone())
        .collect();

    let mut diffuse_pairs = Vec::new();
    for (i, a) in diffuse_nerves.iter().enumerate() {
        for b in &diffuse_nerves[i + 1..] {
            if homologous(a, b) {
                diffuse_pairs.push((a.clone(), b.clone()));
            }
        }
    }

    Ok(ExamSummary {
        results,
        total_affected,
        affected_nerves,
        diffuse_nerves,
        diffuse_pairs,
    })
}

fn count_class(n: usize) -> &'static str {
    match n {
        0 => "zero",
        1 => "one",
        _ => "several",
    }
}

impl ExamSummary {
    /// The predicate facts the level-3 rule set is evaluated against.
    pub fn predicates(&self) -> FactSet {
        let mut facts = FactSet::new();
        facts.insert("total_affected_class", count_class(self.total_affected));
        facts.insert(
            "affected_nerve_count_class",
            count_class(self.affected_nerves.len()),
        );
        facts.insert(
            "diffuse_nerve_count_class",
            count_class(self.diffuse_nerves.len()),
        );
        facts.insert(
            "has_diffuse_pair",
            if self.diffuse_pairs.is_empty() {
                "no"
            } else {
                "yes"
            },
        );
        facts
    }
}

/// Variables and target domain a level-3 rule set is checked against.
pub fn vocabulary() -> Vocabulary {
    let counts = ["zero", "one", "several"];
    Vocabulary::new(TARGET, PatientDx::ALL.iter().map(|d| d.as_str()))
        .with_variable("total_affected_class", counts)
        .with_variable("affected_nerve_count_class", counts)
        .with_variable("diffuse_nerve_count_class", counts)
        .with_variable("has_diffuse_pair", ["yes", "no"])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientVerdict {
    pub dx: PatientDx,
    /// Name and 1-based position of the rule that fired; `None` when no rule
    /// matched and the uncertain fallback applied.
    pub rule: Option<String>,
    pub rule_index: Option<usize>,
}

/// Applies the level-3 rule set. Total: when nothing fires the result is
/// `uncertain_diagnosis`.
pub fn patient_dx(summary: &ExamSummary, rules: &RuleSet) -> PatientVerdict {
    let facts = summary.predicates();
    match fire(rules, &facts) {
        Some(f) => PatientVerdict {
            // conclusions are checked against the PatientDx domain at load
            dx: f.value().parse().unwrap_or(PatientDx::UncertainDiagnosis),
            rule: Some(f.rule.name.clone()),
            rule_index: Some(f.index),
        },
        None => PatientVerdict {
            dx: PatientDx::UncertainDiagnosis,
            rule: None,
            rule_index: None,
        },
    }
}

/// The level-3 precedence written out directly, independent of any rule
/// file. Returns the diagnosis and the 1-based precedence position.
pub fn precedence_dx(summary: &ExamSummary) -> (PatientDx, usize) {
    let diffuse = summary.diffuse_nerves.len();
    if summary.total_affected == 0 {
        (PatientDx::NormalExamination, 1)
    } else if summary.total_affected == 1 {
        (PatientDx::FocalMonoNeuropathy, 2)
    } else if !summary.diffuse_pairs.is_empty() {
        (PatientDx::SymmetricalPolyNeuropathy, 3)
    } else if diffuse >= 2 {
        (PatientDx::AsymmetricalPolyNeuropathy, 4)
    } else if diffuse == 1 && summary.affected_nerves.len() == 1 {
        (PatientDx::DiffuseMonoNeuropathy, 5)
    } else if diffuse == 0 {
        (PatientDx::MultipleFocalNeuropathy, 6)
    } else {
        (PatientDx::UncertainDiagnosis, 7)
    }
}
