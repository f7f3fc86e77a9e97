//! The supervising engine: loads the knowledge base and runs the four
//! phases of an exam over a write-once working memory.
//!
//! 1. interpretation of every segment's measurements into facts,
//! 2. level-1 rules per segment,
//! 3. the nerve automaton per nerve,
//! 4. the level-3 rules over the exam summary.
//!
//! Each phase reads only the store of the phase before it. Nerves are
//! processed in canonical order (name, then side left before right, then
//! fibre sensory before motor), so reports do not depend on the order of the
//! nerves in the exam file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::automaton::{
    state_to_dx, to_chain, AutomatonDef, AutomatonError, AutomatonState, ChainError,
    SegmentStateChain, Symbol, Transition,
};
use crate::domain::{
    validate_exam, Exam, ExamErrors, NerveCatalogue, NerveDx, NerveId, PatientDx, SegmentDx,
    SegmentType, ValidatedExam,
};
use crate::interpret::{interpret_segment, InterpretError, ThresholdTable};
use crate::rules::{fire, parse_ruleset, FactSet, RuleSet, Vocabulary};
use crate::synthesis::{self, patient_dx, summarize, ExamSummary, NerveResult, PatientVerdict};
use crate::text::LineError;

/// Files making up a KB directory, in fingerprint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KbFile {
    Catalogue,
    Thresholds,
    Level1(SegmentType),
    Automaton,
    Level3,
}

impl KbFile {
    pub const ALL: [KbFile; 7] = [
        KbFile::Catalogue,
        KbFile::Thresholds,
        KbFile::Level1(SegmentType::SensoryAny),
        KbFile::Level1(SegmentType::MotorFirst),
        KbFile::Level1(SegmentType::MotorSubsequent),
        KbFile::Automaton,
        KbFile::Level3,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            KbFile::Catalogue => "nerves.cat",
            KbFile::Thresholds => "thresholds.tbl",
            KbFile::Level1(SegmentType::SensoryAny) => "level1_sensory.rules",
            KbFile::Level1(SegmentType::MotorFirst) => "level1_motor_first.rules",
            KbFile::Level1(SegmentType::MotorSubsequent) => "level1_motor_subsequent.rules",
            KbFile::Automaton => "automaton.tr",
            KbFile::Level3 => "level3.rules",
        }
    }
}

/// The default KB compiled into the library.
pub fn builtin_source(file: KbFile) -> &'static str {
    match file {
        KbFile::Catalogue => include_str!("../kb/nerves.cat"),
        KbFile::Thresholds => include_str!("../kb/thresholds.tbl"),
        KbFile::Level1(SegmentType::SensoryAny) => include_str!("../kb/level1_sensory.rules"),
        KbFile::Level1(SegmentType::MotorFirst) => include_str!("../kb/level1_motor_first.rules"),
        KbFile::Level1(SegmentType::MotorSubsequent) => {
            include_str!("../kb/level1_motor_subsequent.rules")
        }
        KbFile::Automaton => include_str!("../kb/automaton.tr"),
        KbFile::Level3 => include_str!("../kb/level3.rules"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FileStatus {
    Pass,
    Missing,
    Unreadable {
        reason: String,
    },
    Invalid {
        errors: Vec<String>,
    },
    /// Not checked because a file it depends on failed.
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileCheck {
    pub file: &'static str,
    #[serde(flatten)]
    pub status: FileStatus,
}

/// Per-file outcome of loading a KB.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KbCheck {
    pub files: Vec<FileCheck>,
}

impl KbCheck {
    pub fn passed(&self) -> bool {
        self.files.iter().all(|f| f.status == FileStatus::Pass)
    }

    /// True when every failure is a missing or unreadable file.
    pub fn only_io_failures(&self) -> bool {
        self.files.iter().all(|f| {
            matches!(
                f.status,
                FileStatus::Pass
                    | FileStatus::Missing
                    | FileStatus::Unreadable { .. }
                    | FileStatus::Skipped { .. }
            )
        })
    }
}

impl fmt::Display for KbCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.files {
            match &check.status {
                FileStatus::Pass => writeln!(f, "PASS  {}", check.file)?,
                FileStatus::Missing => writeln!(f, "FAIL  {}: missing file", check.file)?,
                FileStatus::Unreadable { reason } => writeln!(f, "FAIL  {}: {reason}", check.file)?,
                FileStatus::Invalid { errors } => {
                    writeln!(f, "FAIL  {}", check.file)?;
                    for e in errors {
                        writeln!(f, "      {e}")?;
                    }
                }
                FileStatus::Skipped { reason } => writeln!(f, "SKIP  {}: {reason}", check.file)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("knowledge base failed to load:\n{check}")]
pub struct KbError {
    pub check: KbCheck,
}

/// Everything the four phases need. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub catalogue: NerveCatalogue,
    pub thresholds: ThresholdTable,
    pub level1: BTreeMap<SegmentType, RuleSet>,
    pub automaton: AutomatonDef,
    pub level3: RuleSet,
    /// SHA-256 over the file names and contents, hex encoded.
    pub fingerprint: String,
}

/// Variables and conclusion domain for one segment type's rule set.
pub fn level1_vocabulary(thresholds: &ThresholdTable, segment_type: SegmentType) -> Vocabulary {
    Vocabulary {
        variables: thresholds.domains(segment_type),
        ..Vocabulary::new(
            "lesion",
            SegmentDx::ALL
                .iter()
                .filter(|d| **d != SegmentDx::Unclassified)
                .map(|d| d.as_str()),
        )
    }
}

fn line_errors(errors: Vec<LineError>) -> FileStatus {
    FileStatus::Invalid {
        errors: errors.iter().map(ToString::to_string).collect(),
    }
}

fn fingerprint(sources: &[(KbFile, String)]) -> String {
    let mut hasher = Sha256::new();
    for (file, text) in sources {
        hasher.update(file.file_name().as_bytes());
        hasher.update([0]);
        hasher.update((text.len() as u64).to_le_bytes());
        hasher.update(text.as_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl KnowledgeBase {
    /// The KB shipped with the library.
    pub fn builtin() -> Self {
        Self::from_sources(|f| Ok(Some(builtin_source(f).to_owned())))
            .expect("shipped knowledge base is valid")
    }

    /// Loads every file through `read`, which returns `Ok(None)` for a
    /// missing file. Fails with the per-file check if anything is wrong.
    pub fn from_sources(
        read: impl Fn(KbFile) -> std::io::Result<Option<String>>,
    ) -> Result<Self, KbError> {
        let (check, kb) = Self::check_sources(read);
        kb.ok_or(KbError { check })
    }

    /// Loads and checks every file, returning the per-file report and the KB
    /// when all files pass.
    pub fn check_sources(
        read: impl Fn(KbFile) -> std::io::Result<Option<String>>,
    ) -> (KbCheck, Option<Self>) {
        let mut sources = Vec::new();
        let mut status: BTreeMap<KbFile, FileStatus> = BTreeMap::new();
        for file in KbFile::ALL {
            match read(file) {
                Ok(Some(text)) => sources.push((file, text)),
                Ok(None) => {
                    status.insert(file, FileStatus::Missing);
                }
                Err(e) => {
                    status.insert(
                        file,
                        FileStatus::Unreadable {
                            reason: e.to_string(),
                        },
                    );
                }
            }
        }
        let text_of = |file: KbFile| {
            sources
                .iter()
                .find(|(f, _)| *f == file)
                .map(|(_, t)| t.as_str())
        };

        let catalogue = text_of(KbFile::Catalogue).and_then(|t| match NerveCatalogue::parse(t) {
            Ok(c) => Some(c),
            Err(e) => {
                status.insert(KbFile::Catalogue, line_errors(e));
                None
            }
        });

        let thresholds = text_of(KbFile::Thresholds).and_then(|t| match ThresholdTable::parse(t) {
            Ok(c) => Some(c),
            Err(e) => {
                status.insert(KbFile::Thresholds, line_errors(e));
                None
            }
        });

        let mut level1 = BTreeMap::new();
        for &segment_type in SegmentType::ALL {
            let file = KbFile::Level1(segment_type);
            let Some(text) = text_of(file) else { continue };
            let Some(thresholds) = &thresholds else {
                status.insert(
                    file,
                    FileStatus::Skipped {
                        reason: format!("depends on {}", KbFile::Thresholds.file_name()),
                    },
                );
                continue;
            };
            let vocab = level1_vocabulary(thresholds, segment_type);
            match parse_ruleset(text, &vocab) {
                Ok(rs) if rs.name != segment_type.as_str() => {
                    status.insert(
                        file,
                        FileStatus::Invalid {
                            errors: vec![format!(
                                "ruleset name `{}` does not match segment type `{segment_type}`",
                                rs.name
                            )],
                        },
                    );
                }
                Ok(rs) => {
                    level1.insert(segment_type, rs);
                }
                Err(e) => {
                    status.insert(file, line_errors(e));
                }
            }
        }

        let automaton = text_of(KbFile::Automaton).and_then(|t| match AutomatonDef::parse(t) {
            Ok(a) => Some(a),
            Err(e) => {
                status.insert(KbFile::Automaton, line_errors(e));
                None
            }
        });

        let level3 = text_of(KbFile::Level3).and_then(|t| {
            match parse_ruleset(t, &synthesis::vocabulary()) {
                Ok(rs) => Some(rs),
                Err(e) => {
                    status.insert(KbFile::Level3, line_errors(e));
                    None
                }
            }
        });

        let check = KbCheck {
            files: KbFile::ALL
                .iter()
                .map(|&f| FileCheck {
                    file: f.file_name(),
                    status: status.remove(&f).unwrap_or(FileStatus::Pass),
                })
                .collect(),
        };

        let kb = match (catalogue, thresholds, automaton, level3) {
            (Some(catalogue), Some(thresholds), Some(automaton), Some(level3))
                if check.passed() =>
            {
                Some(KnowledgeBase {
                    catalogue,
                    thresholds,
                    level1,
                    automaton,
                    level3,
                    fingerprint: fingerprint(&sources),
                })
            }
            _ => None,
        };
        (check, kb)
    }

    pub fn ruleset(&self, segment_type: SegmentType) -> &RuleSet {
        // every segment type is present once loading succeeded
        &self.level1[&segment_type]
    }
}

fn read_dir_file(dir: &Path, file: KbFile) -> std::io::Result<Option<String>> {
    match std::fs::read_to_string(dir.join(file.file_name())) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

/// Loads the KB directory with its fixed file names.
pub fn load_kb(dir: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    let dir = dir.as_ref();
    KnowledgeBase::from_sources(|f| read_dir_file(dir, f))
}

/// Per-file check of a KB directory.
pub fn check_kb(dir: impl AsRef<Path>) -> (KbCheck, Option<KnowledgeBase>) {
    let dir = dir.as_ref();
    KnowledgeBase::check_sources(|f| read_dir_file(dir, f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Interpretation = 1,
    SegmentDiagnosis = 2,
    NerveDiagnosis = 3,
    PatientDiagnosis = 4,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "phase {}", *self as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("{phase}, nerve {nerve}: `{}` is not in the nerve catalogue", nerve.name)]
    UnknownNerve { phase: Phase, nerve: NerveId },
    #[error("{phase}, nerve {nerve}, segment {segment}: {source}")]
    Interpret {
        phase: Phase,
        nerve: NerveId,
        segment: u8,
        source: InterpretError,
    },
    #[error("{phase}, nerve {nerve}: {source}")]
    Chain {
        phase: Phase,
        nerve: NerveId,
        source: ChainError,
    },
    #[error("{phase}, nerve {nerve}: {source}")]
    Automaton {
        phase: Phase,
        nerve: NerveId,
        source: AutomatonError,
    },
    #[error("{phase}: {0}", phase = Phase::PatientDiagnosis)]
    Synthesis(#[from] synthesis::SynthesisError),
    #[error("{0} store already written")]
    StoreWritten(Phase),
    #[error("{0} store is empty")]
    StoreMissing(Phase),
}

/// Exam-level failure: invalid input or a phase error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnoseError {
    #[error("invalid exam: {0}")]
    Invalid(#[from] ExamErrors),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentFacts {
    pub index: u8,
    pub segment_type: SegmentType,
    pub facts: FactSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerveFacts {
    pub nerve: NerveId,
    pub segments: Vec<SegmentFacts>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentDiagnosis {
    pub index: u8,
    pub segment_type: SegmentType,
    pub dx: SegmentDx,
    /// Rule that produced `dx`, `None` for unclassified segments.
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerveSegments {
    pub nerve: NerveId,
    pub segments: Vec<SegmentDiagnosis>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    SegmentInterpreted {
        nerve: NerveId,
        segment: u8,
        segment_type: SegmentType,
        facts: FactSet,
    },
    RuleFired {
        nerve: NerveId,
        segment: u8,
        ruleset: String,
        rule: String,
        rule_index: usize,
        dx: SegmentDx,
    },
    NoRuleMatched {
        nerve: NerveId,
        segment: u8,
        ruleset: String,
        dx: SegmentDx,
    },
    TransitionTaken {
        nerve: NerveId,
        from: AutomatonState,
        symbol: Symbol,
        to: AutomatonState,
    },
    NerveDiagnosed {
        nerve: NerveId,
        chain: SegmentStateChain,
        final_state: AutomatonState,
        dx: NerveDx,
    },
    PatientRuleSelected {
        predicates: FactSet,
        rule: Option<String>,
        rule_index: Option<usize>,
        dx: PatientDx,
    },
}

/// Phase 1 for one nerve.
pub fn interpret_nerve(
    nerve: &NerveId,
    segments: &[crate::domain::SegmentMeasurements],
    kb: &KnowledgeBase,
) -> Result<NerveFacts, PipelineError> {
    if !kb.catalogue.contains(&nerve.name) {
        return Err(PipelineError::UnknownNerve {
            phase: Phase::Interpretation,
            nerve: nerve.clone(),
        });
    }
    let segments = segments
        .iter()
        .map(|m| {
            let segment_type = SegmentType::of(nerve.fibre, m.index);
            interpret_segment(m, segment_type, &kb.thresholds)
                .map(|facts| SegmentFacts {
                    index: m.index,
                    segment_type,
                    facts,
                })
                .map_err(|source| PipelineError::Interpret {
                    phase: Phase::Interpretation,
                    nerve: nerve.clone(),
                    segment: m.index,
                    source,
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(NerveFacts {
        nerve: nerve.clone(),
        segments,
    })
}

/// Phase 2 for one segment: first matching level-1 rule, or unclassified.
pub fn diagnose_segment(segment: &SegmentFacts, kb: &KnowledgeBase) -> SegmentDiagnosis {
    let rs = kb.ruleset(segment.segment_type);
    let (dx, rule) = match fire(rs, &segment.facts) {
        // conclusions are checked against the SegmentDx domain at load
        Some(f) => (
            f.value().parse().unwrap_or(SegmentDx::Unclassified),
            Some(f.rule.name.clone()),
        ),
        None => (SegmentDx::Unclassified, None),
    };
    SegmentDiagnosis {
        index: segment.index,
        segment_type: segment.segment_type,
        dx,
        rule,
    }
}

/// Phase 3 for one nerve.
pub fn diagnose_nerve(
    nerve: &NerveSegments,
    kb: &KnowledgeBase,
) -> Result<NerveResult, PipelineError> {
    let dxs: Vec<SegmentDx> = nerve.segments.iter().map(|s| s.dx).collect();
    let chain = to_chain(&dxs).map_err(|source| PipelineError::Chain {
        phase: Phase::NerveDiagnosis,
        nerve: nerve.nerve.clone(),
        source,
    })?;
    let run = kb.automaton.run(&chain);
    let dx = state_to_dx(run.final_state).map_err(|source| PipelineError::Automaton {
        phase: Phase::NerveDiagnosis,
        nerve: nerve.nerve.clone(),
        source,
    })?;
    Ok(NerveResult {
        nerve: nerve.nerve.clone(),
        chain,
        run,
        dx,
    })
}

/// The blackboard for one exam. Each store is written once by its phase.
#[derive(Debug, Clone)]
pub struct WorkingMemory {
    exam: ValidatedExam,
    facts: Option<Vec<NerveFacts>>,
    segments: Option<Vec<NerveSegments>>,
    nerves: Option<Vec<NerveResult>>,
    patient: Option<(ExamSummary, PatientVerdict)>,
    trace: Vec<TraceEvent>,
}

fn write_once<T>(slot: &mut Option<T>, phase: Phase, value: T) -> Result<(), PipelineError> {
    if slot.is_some() {
        return Err(PipelineError::StoreWritten(phase));
    }
    *slot = Some(value);
    Ok(())
}

impl WorkingMemory {
    /// Takes the exam and puts its nerves in canonical order.
    pub fn new(exam: ValidatedExam) -> Self {
        let mut inner = exam.into_inner();
        inner.nerves.sort_by(|a, b| a.nerve.cmp(&b.nerve));
        let exam = validate_exam(inner).expect("reordering keeps a valid exam valid");
        Self {
            exam,
            facts: None,
            segments: None,
            nerves: None,
            patient: None,
            trace: Vec::new(),
        }
    }

    pub fn facts(&self) -> Option<&[NerveFacts]> {
        self.facts.as_deref()
    }

    pub fn segments(&self) -> Option<&[NerveSegments]> {
        self.segments.as_deref()
    }

    pub fn nerves(&self) -> Option<&[NerveResult]> {
        self.nerves.as_deref()
    }

    pub fn patient(&self) -> Option<&PatientVerdict> {
        self.patient.as_ref().map(|(_, v)| v)
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Drops a completed store. Later phases never read it again.
    pub fn clear(&mut self, phase: Phase) {
        match phase {
            Phase::Interpretation => self.facts = None,
            Phase::SegmentDiagnosis => self.segments = None,
            Phase::NerveDiagnosis => self.nerves = None,
            Phase::PatientDiagnosis => self.patient = None,
        }
    }

    pub fn interpret(&mut self, kb: &KnowledgeBase) -> Result<(), PipelineError> {
        if self.facts.is_some() {
            return Err(PipelineError::StoreWritten(Phase::Interpretation));
        }
        let facts = self
            .exam
            .nerves
            .iter()
            .map(|n| interpret_nerve(&n.nerve, &n.segments, kb))
            .collect::<Result<Vec<_>, _>>()?;
        for n in &facts {
            for s in &n.segments {
                self.trace.push(TraceEvent::SegmentInterpreted {
                    nerve: n.nerve.clone(),
                    segment: s.index,
                    segment_type: s.segment_type,
                    facts: s.facts.clone(),
                });
            }
        }
        write_once(&mut self.facts, Phase::Interpretation, facts)
    }

    pub fn diagnose_segments(&mut self, kb: &KnowledgeBase) -> Result<(), PipelineError> {
        let facts = self
            .facts
            .as_ref()
            .ok_or(PipelineError::StoreMissing(Phase::Interpretation))?;
        let mut out = Vec::with_capacity(facts.len());
        for n in facts {
            let mut segments = Vec::with_capacity(n.segments.len());
            for s in &n.segments {
                let d = diagnose_segment(s, kb);
                let ruleset = kb.ruleset(s.segment_type).name.clone();
                self.trace.push(match &d.rule {
                    Some(rule) => TraceEvent::RuleFired {
                        nerve: n.nerve.clone(),
                        segment: s.index,
                        ruleset,
                        rule: rule.clone(),
                        rule_index: kb
                            .ruleset(s.segment_type)
                            .rules
                            .iter()
                            .position(|r| &r.name == rule)
                            .map_or(0, |i| i + 1),
                        dx: d.dx,
                    },
                    None => TraceEvent::NoRuleMatched {
                        nerve: n.nerve.clone(),
                        segment: s.index,
                        ruleset,
                        dx: d.dx,
                    },
                });
                segments.push(d);
            }
            out.push(NerveSegments {
                nerve: n.nerve.clone(),
                segments,
            });
        }
        write_once(&mut self.segments, Phase::SegmentDiagnosis, out)
    }

    pub fn diagnose_nerves(&mut self, kb: &KnowledgeBase) -> Result<(), PipelineError> {
        let segments = self
            .segments
            .as_ref()
            .ok_or(PipelineError::StoreMissing(Phase::SegmentDiagnosis))?;
        let results = segments
            .iter()
            .map(|n| diagnose_nerve(n, kb))
            .collect::<Result<Vec<_>, _>>()?;
        for r in &results {
            for t in &r.run.path {
                self.trace.push(TraceEvent::TransitionTaken {
                    nerve: r.nerve.clone(),
                    from: t.from,
                    symbol: t.symbol,
                    to: t.to,
                });
            }
            self.trace.push(TraceEvent::NerveDiagnosed {
                nerve: r.nerve.clone(),
                chain: r.chain.clone(),
                final_state: r.run.final_state,
                dx: r.dx,
            });
        }
        write_once(&mut self.nerves, Phase::NerveDiagnosis, results)
    }

    pub fn diagnose_patient(&mut self, kb: &KnowledgeBase) -> Result<(), PipelineError> {
        let nerves = self
            .nerves
            .as_ref()
            .ok_or(PipelineError::StoreMissing(Phase::NerveDiagnosis))?;
        let summary = summarize(nerves.clone())?;
        let verdict = patient_dx(&summary, &kb.level3);
        self.trace.push(TraceEvent::PatientRuleSelected {
            predicates: summary.predicates(),
            rule: verdict.rule.clone(),
            rule_index: verdict.rule_index,
            dx: verdict.dx,
        });
        write_once(
            &mut self.patient,
            Phase::PatientDiagnosis,
            (summary, verdict),
        )
    }

    /// Runs any phases not yet run, in order.
    pub fn run_all(&mut self, kb: &KnowledgeBase) -> Result<(), PipelineError> {
        if self.facts.is_none() && self.segments.is_none() {
            self.interpret(kb)?;
        }
        if self.segments.is_none() && self.nerves.is_none() {
            self.diagnose_segments(kb)?;
        }
        if self.nerves.is_none() && self.patient.is_none() {
            self.diagnose_nerves(kb)?;
        }
        if self.patient.is_none() {
            self.diagnose_patient(kb)?;
        }
        Ok(())
    }

    /// Assembles the report. Needs all four stores.
    pub fn report(&self, kb: &KnowledgeBase) -> Result<DiagnosisReport, PipelineError> {
        let facts = self
            .facts
            .as_ref()
            .ok_or(PipelineError::StoreMissing(Phase::Interpretation))?;
        let segments = self
            .segments
            .as_ref()
            .ok_or(PipelineError::StoreMissing(Phase::SegmentDiagnosis))?;
        let nerves = self
            .nerves
            .as_ref()
            .ok_or(PipelineError::StoreMissing(Phase::NerveDiagnosis))?;
        let (summary, verdict) = self
            .patient
            .as_ref()
            .ok_or(PipelineError::StoreMissing(Phase::PatientDiagnosis))?;

        let mut warnings = Vec::new();
        let nerve_reports = facts
            .iter()
            .zip(segments)
            .zip(nerves)
            .map(|((f, s), r)| {
                let segments = f
                    .segments
                    .iter()
                    .zip(&s.segments)
                    .map(|(sf, sd)| {
                        if sd.dx == SegmentDx::Unclassified {
                            warnings.push(format!(
                                "{} segment {}: no {} rule matched {}; counted as pathological",
                                f.nerve, sf.index, sf.segment_type, sf.facts
                            ));
                        }
                        SegmentReport {
                            index: sf.index,
                            segment_type: sf.segment_type,
                            facts: sf.facts.clone(),
                            dx: sd.dx,
                            rule: sd.rule.clone(),
                        }
                    })
                    .collect();
                NerveReport {
                    nerve: f.nerve.clone(),
                    segments,
                    chain: r.chain.clone(),
                    transitions: r.run.path.clone(),
                    final_state: r.run.final_state,
                    dx: r.dx,
                }
            })
            .collect();

        Ok(DiagnosisReport {
            patient_id: self.exam.patient_id.clone(),
            kb_fingerprint: kb.fingerprint.clone(),
            nerves: nerve_reports,
            summary: SummaryReport {
                total_affected: summary.total_affected,
                affected_nerves: summary.affected_nerves.clone(),
                diffuse_pairs: summary.diffuse_pairs.clone(),
                predicates: summary.predicates(),
            },
            patient: verdict.clone(),
            warnings,
            trace: self.trace.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub index: u8,
    pub segment_type: SegmentType,
    pub facts: FactSet,
    pub dx: SegmentDx,
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerveReport {
    pub nerve: NerveId,
    pub segments: Vec<SegmentReport>,
    pub chain: SegmentStateChain,
    pub transitions: Vec<Transition>,
    pub final_state: AutomatonState,
    pub dx: NerveDx,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub total_affected: usize,
    pub affected_nerves: Vec<NerveId>,
    pub diffuse_pairs: Vec<(NerveId, NerveId)>,
    pub predicates: FactSet,
}

/// Everything derived for one exam, nerves in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub patient_id: String,
    pub kb_fingerprint: String,
    pub nerves: Vec<NerveReport>,
    pub summary: SummaryReport,
    pub patient: PatientVerdict,
    /// Segments no rule classified.
    pub warnings: Vec<String>,
    pub trace: Vec<TraceEvent>,
}

impl DiagnosisReport {
    pub fn nerve(&self, id: &NerveId) -> Option<&NerveReport> {
        self.nerves.iter().find(|n| &n.nerve == id)
    }
}

/// Runs all four phases on a validated exam.
pub fn run_exam(
    exam: &ValidatedExam,
    kb: &KnowledgeBase,
) -> Result<DiagnosisReport, PipelineError> {
    let mut wm = WorkingMemory::new(exam.clone());
    wm.run_all(kb)?;
    wm.report(kb)
}

/// Validates then runs the exam.
pub fn diagnose(exam: Exam, kb: &KnowledgeBase) -> Result<DiagnosisReport, DiagnoseError> {
    let exam = validate_exam(exam)?;
    Ok(run_exam(&exam, kb)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FibreType, NerveStudy, SegmentMeasurements, Side};

    fn motor(index: u8, amp: f64, ratio: f64, vel: f64) -> SegmentMeasurements {
        SegmentMeasurements {
            index,
            amplitude: Some(amp),
            amplitude_ratio: Some(ratio),
            velocity: Some(vel),
            ..Default::default()
        }
    }

    fn first(amp: f64, dl: f64) -> SegmentMeasurements {
        SegmentMeasurements {
            index: 1,
            amplitude: Some(amp),
            distal_latency: Some(dl),
            ..Default::default()
        }
    }

    #[test]
    fn builtin_kb_loads() {
        let kb = KnowledgeBase::builtin();
        assert_eq!(kb.automaton.transitions().count(), 14);
        assert_eq!(kb.automaton, AutomatonDef::standard());
        assert_eq!(kb.level1.len(), 3);
        assert_eq!(kb.fingerprint.len(), 64);
        assert_eq!(
            kb.ruleset(SegmentType::MotorSubsequent).rules[0]
                .provenance
                .as_deref(),
            Some("published")
        );
    }

    #[test]
    fn shipped_level1_rules_cover_every_fact_combination() {
        let kb = KnowledgeBase::builtin();
        for &t in SegmentType::ALL {
            let indices: &[u8] = match t {
                SegmentType::SensoryAny => &[1, 2],
                SegmentType::MotorFirst => &[1],
                SegmentType::MotorSubsequent => &[2],
            };
            for &index in indices {
                let vars = t.required_variables(index);
                let domains: Vec<_> = vars
                    .iter()
                    .map(|v| kb.thresholds.get(t, *v).unwrap().direction.categories())
                    .collect();
                let total = 3usize.pow(vars.len() as u32);
                for code in 0..total {
                    let mut facts = FactSet::new();
                    let mut c = code;
                    for (v, d) in vars.iter().zip(&domains) {
                        facts.insert(v.as_str(), d[c % 3].as_str());
                        c /= 3;
                    }
                    let seg = SegmentFacts {
                        index,
                        segment_type: t,
                        facts,
                    };
                    let d = diagnose_segment(&seg, &kb);
                    assert_ne!(d.dx, SegmentDx::Unclassified, "{t} {}", seg.facts);
                }
            }
        }
    }

    #[test]
    fn phase_order_and_write_once() {
        let kb = KnowledgeBase::builtin();
        let exam = validate_exam(Exam {
            patient_id: "p".into(),
            nerves: vec![NerveStudy {
                nerve: NerveId::new("median", Side::Left, FibreType::Motor),
                segments: vec![first(7.0, 3.5), motor(2, 7.0, 0.95, 55.0)],
            }],
        })
        .unwrap();
        let mut wm = WorkingMemory::new(exam);
        assert_eq!(
            wm.diagnose_segments(&kb),
            Err(PipelineError::StoreMissing(Phase::Interpretation))
        );
        wm.interpret(&kb).unwrap();
        assert_eq!(
            wm.interpret(&kb),
            Err(PipelineError::StoreWritten(Phase::Interpretation))
        );
        wm.diagnose_segments(&kb).unwrap();
        wm.diagnose_nerves(&kb).unwrap();
        wm.diagnose_patient(&kb).unwrap();
        assert_eq!(wm.patient().unwrap().dx, PatientDx::NormalExamination);
    }

    #[test]
    fn unknown_nerve_is_reported_with_phase() {
        let kb = KnowledgeBase::builtin();
        let exam = Exam {
            patient_id: "p".into(),
            nerves: vec![NerveStudy {
                nerve: NerveId::new("vagus", Side::Left, FibreType::Motor),
                segments: vec![first(7.0, 3.5)],
            }],
        };
        let err = diagnose(exam, &kb).unwrap_err();
        assert!(
            err.to_string()
                .starts_with("phase 1, nerve vagus:left:motor"),
            "{err}"
        );
    }

    #[test]
    fn interpretation_errors_carry_coordinates() {
        let kb = KnowledgeBase::builtin();
        let mut seg = motor(2, 7.0, 0.95, 55.0);
        seg.velocity = None;
        let exam = Exam {
            patient_id: "p".into(),
            nerves: vec![NerveStudy {
                nerve: NerveId::new("ulnar", Side::Right, FibreType::Motor),
                segments: vec![first(7.0, 3.5), seg],
            }],
        };
        let err = diagnose(exam, &kb).unwrap_err().to_string();
        assert!(
            err.contains("phase 1, nerve ulnar:right:motor, segment 2"),
            "{err}"
        );
        assert!(err.contains("required variable missing"), "{err}");
    }
}
