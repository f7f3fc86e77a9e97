//! Vocabulary shared by every phase: nerves, segments, semantic categories
//! and the three diagnosis taxonomies, plus structural exam validation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{self, LineError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownSymbol {
    pub kind: &'static str,
    pub value: String,
}

/// Declares a closed enumeration whose variants have a fixed lowercase symbol
/// used both in KB files and in serialized reports.
macro_rules! symbols {
    (
        $(#[$meta:meta])*
        pub enum $name:ident : $kind:literal {
            $( $(#[$vmeta:meta])* $variant:ident => $sym:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ::serde::Serialize, ::serde::Deserialize)]
        pub enum $name {
            $( $(#[$vmeta])* #[serde(rename = $sym)] $variant, )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $( $name::$variant => $sym, )+
                }
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = $crate::domain::UnknownSymbol;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $( $sym => Ok($name::$variant), )+
                    _ => Err($crate::domain::UnknownSymbol { kind: $kind, value: s.to_owned() }),
                }
            }
        }
    };
}

pub(crate) use symbols;

symbols! {
    pub enum FibreType: "fibre type" {
        Sensory => "sensory",
        Motor => "motor",
    }
}

symbols! {
    pub enum Side: "side" {
        Left => "left",
        Right => "right",
    }
}

symbols! {
    /// Segment classes with distinct parameter lists and rule sets.
    pub enum SegmentType: "segment type" {
        SensoryAny => "sensory_any",
        MotorFirst => "motor_first",
        MotorSubsequent => "motor_subsequent",
    }
}

symbols! {
    /// Electrophysiological variables measured on a segment.
    pub enum Variable: "variable" {
        Amplitude => "amplitude",
        Velocity => "velocity",
        DistalLatency => "distal_latency",
        AmplitudeRatio => "amplitude_ratio",
    }
}

symbols! {
    pub enum SemanticCategory: "semantic category" {
        Normal => "normal",
        Decreased => "decreased",
        VeryDecreased => "very_decreased",
        Increased => "increased",
        VeryIncreased => "very_increased",
    }
}

symbols! {
    /// Level-1 outcome for one segment. `Unclassified` is produced when no
    /// rule of the segment's rule set matches.
    pub enum SegmentDx: "segment diagnosis" {
        Normal => "normal",
        MildAxonal => "mild_axonal",
        SevereAxonal => "severe_axonal",
        MildDemyelinating => "mild_demyelinating",
        SevereDemyelinating => "severe_demyelinating",
        MildMixed => "mild_mixed",
        SevereMixed => "severe_mixed",
        Unclassified => "unclassified",
    }
}

symbols! {
    pub enum Severity: "severity" {
        Mild => "mild",
        Severe => "severe",
    }
}

symbols! {
    pub enum LesionKind: "lesion kind" {
        Axonal => "axonal",
        Demyelinating => "demyelinating",
        Mixed => "mixed",
    }
}

symbols! {
    pub enum NerveDx: "nerve diagnosis" {
        Normal => "normal",
        Focal => "focal",
        MultipleFocal => "multiple_focal",
        Diffuse => "diffuse",
    }
}

symbols! {
    pub enum PatientDx: "patient diagnosis" {
        FocalMonoNeuropathy => "focal_mono_neuropathy",
        MultipleFocalNeuropathy => "multiple_focal_neuropathy",
        DiffuseMonoNeuropathy => "diffuse_mono_neuropathy",
        SymmetricalPolyNeuropathy => "symmetrical_poly_neuropathy",
        AsymmetricalPolyNeuropathy => "asymmetrical_poly_neuropathy",
        UncertainDiagnosis => "uncertain_diagnosis",
        NormalExamination => "normal_examination",
    }
}

impl SegmentType {
    /// Type of the segment at `index` (1-based) of a nerve studied on `fibre`.
    pub fn of(fibre: FibreType, index: u8) -> Self {
        match (fibre, index) {
            (FibreType::Sensory, _) => SegmentType::SensoryAny,
            (FibreType::Motor, 1) => SegmentType::MotorFirst,
            (FibreType::Motor, _) => SegmentType::MotorSubsequent,
        }
    }

    /// The exact variables measured on a segment of this type at `index`.
    ///
    /// Sensory segments carry the amplitude ratio only on the second segment.
    pub fn required_variables(self, index: u8) -> &'static [Variable] {
        use Variable::*;
        match self {
            SegmentType::SensoryAny if index >= 2 => &[Amplitude, Velocity, AmplitudeRatio],
            SegmentType::SensoryAny => &[Amplitude, Velocity],
            SegmentType::MotorFirst => &[Amplitude, DistalLatency],
            SegmentType::MotorSubsequent => &[Amplitude, AmplitudeRatio, Velocity],
        }
    }

    /// Every variable that may appear for this type at some index.
    pub fn all_variables(self) -> &'static [Variable] {
        self.required_variables(5)
    }
}

impl SegmentDx {
    pub fn is_pathological(self) -> bool {
        self != SegmentDx::Normal
    }

    pub fn severity(self) -> Option<Severity> {
        use SegmentDx::*;
        match self {
            MildAxonal | MildDemyelinating | MildMixed => Some(Severity::Mild),
            SevereAxonal | SevereDemyelinating | SevereMixed => Some(Severity::Severe),
            Normal | Unclassified => None,
        }
    }

    pub fn lesion_kind(self) -> Option<LesionKind> {
        use SegmentDx::*;
        match self {
            MildAxonal | SevereAxonal => Some(LesionKind::Axonal),
            MildDemyelinating | SevereDemyelinating => Some(LesionKind::Demyelinating),
            MildMixed | SevereMixed => Some(LesionKind::Mixed),
            Normal | Unclassified => None,
        }
    }

    pub fn lesion(severity: Severity, kind: LesionKind) -> Self {
        use SegmentDx::*;
        match (severity, kind) {
            (Severity::Mild, LesionKind::Axonal) => MildAxonal,
            (Severity::Severe, LesionKind::Axonal) => SevereAxonal,
            (Severity::Mild, LesionKind::Demyelinating) => MildDemyelinating,
            (Severity::Severe, LesionKind::Demyelinating) => SevereDemyelinating,
            (Severity::Mild, LesionKind::Mixed) => MildMixed,
            (Severity::Severe, LesionKind::Mixed) => SevereMixed,
        }
    }
}

/// A studied nerve: anatomical name, body side and fibre type.
///
/// Sensory and motor studies of the same anatomical nerve are distinct ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NerveId {
    pub name: String,
    pub side: Side,
    pub fibre: FibreType,
}

impl NerveId {
    pub fn new(name: impl Into<String>, side: Side, fibre: FibreType) -> Self {
        Self {
            name: name.into(),
            side,
            fibre,
        }
    }

    pub fn max_segments(&self) -> usize {
        match self.fibre {
            FibreType::Sensory => 2,
            FibreType::Motor => 5,
        }
    }
}

impl fmt::Display for NerveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.name, self.side, self.fibre)
    }
}

impl FromStr for NerveId {
    type Err = UnknownSymbol;

    /// Parses the `name:side:fibre` selector form.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UnknownSymbol {
            kind: "nerve selector",
            value: s.to_owned(),
        };
        let mut parts = s.split(':');
        let (Some(name), Some(side), Some(fibre), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        if name.is_empty() {
            return Err(bad());
        }
        Ok(NerveId::new(name, side.parse()?, fibre.parse()?))
    }
}

/// Same nerve and fibre on opposite sides.
pub fn homologous(a: &NerveId, b: &NerveId) -> bool {
    a.name == b.name && a.fibre == b.fibre && a.side != b.side
}

/// Raw values measured on one segment. Units are fixed per variable:
/// amplitude in mV (motor) or µV (sensory), velocity in m/s, distal latency
/// in ms, amplitude ratio dimensionless.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentMeasurements {
    pub index: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distal_latency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_ratio: Option<f64>,
}

impl SegmentMeasurements {
    pub fn get(&self, variable: Variable) -> Option<f64> {
        match variable {
            Variable::Amplitude => self.amplitude,
            Variable::Velocity => self.velocity,
            Variable::DistalLatency => self.distal_latency,
            Variable::AmplitudeRatio => self.amplitude_ratio,
        }
    }

    pub fn set(&mut self, variable: Variable, value: Option<f64>) {
        let slot = match variable {
            Variable::Amplitude => &mut self.amplitude,
            Variable::Velocity => &mut self.velocity,
            Variable::DistalLatency => &mut self.distal_latency,
            Variable::AmplitudeRatio => &mut self.amplitude_ratio,
        };
        *slot = value;
    }

    pub fn present(&self) -> impl Iterator<Item = (Variable, f64)> + '_ {
        Variable::ALL
            .iter()
            .filter_map(|&v| self.get(v).map(|x| (v, x)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerveStudy {
    pub nerve: NerveId,
    pub segments: Vec<SegmentMeasurements>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exam {
    pub patient_id: String,
    pub nerves: Vec<NerveStudy>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExamViolation {
    #[error("nerves[{position}]: nerve name is empty")]
    EmptyNerveName { position: usize },
    #[error("nerves[{position}] ({nerve}): duplicate nerve")]
    DuplicateNerve { position: usize, nerve: NerveId },
    #[error(
        "nerves[{position}] ({nerve}): segment count out of range ({count}, expected 1..={max})"
    )]
    SegmentCountOutOfRange {
        position: usize,
        nerve: NerveId,
        count: usize,
        max: usize,
    },
    #[error("nerves[{position}] ({nerve}): non-contiguous segment indices {indices:?}, expected 1..={count}")]
    NonContiguousIndices {
        position: usize,
        nerve: NerveId,
        indices: Vec<u8>,
        count: usize,
    },
    #[error("nerves[{position}] ({nerve}) segment {index}: {variable} must be finite and > 0, got {value}")]
    InvalidMeasurement {
        position: usize,
        nerve: NerveId,
        index: u8,
        variable: Variable,
        value: f64,
    },
}

/// Every structural violation found in an exam.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ExamErrors(pub Vec<ExamViolation>);

impl fmt::Display for ExamErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// An exam known to satisfy every structural invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedExam(Exam);

impl ValidatedExam {
    pub fn into_inner(self) -> Exam {
        self.0
    }
}

impl std::ops::Deref for ValidatedExam {
    type Target = Exam;

    fn deref(&self) -> &Exam {
        &self.0
    }
}

pub fn validate_exam(exam: Exam) -> Result<ValidatedExam, ExamErrors> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();

    for (position, study) in exam.nerves.iter().enumerate() {
        let nerve = &study.nerve;
        if nerve.name.is_empty() {
            violations.push(ExamViolation::EmptyNerveName { position });
        }
        if !seen.insert(nerve) {
            violations.push(ExamViolation::DuplicateNerve {
                position,
                nerve: nerve.clone(),
            });
        }

        let count = study.segments.len();
        let max = nerve.max_segments();
        if count == 0 || count > max {
            violations.push(ExamViolation::SegmentCountOutOfRange {
                position,
                nerve: nerve.clone(),
                count,
                max,
            });
        }

        let indices: Vec<u8> = study.segments.iter().map(|s| s.index).collect();
        let contiguous = indices
            .iter()
            .enumerate()
            .all(|(i, &idx)| usize::from(idx) == i + 1);
        if !contiguous {
            violations.push(ExamViolation::NonContiguousIndices {
                position,
                nerve: nerve.clone(),
                indices,
                count,
            });
        }

        for segment in &study.segments {
            for (variable, value) in segment.present() {
                if !(value.is_finite() && value > 0.0) {
                    violations.push(ExamViolation::InvalidMeasurement {
                        position,
                        nerve: nerve.clone(),
                        index: segment.index,
                        variable,
                        value,
                    });
                }
            }
        }
    }

    if violations.is_empty() {
        Ok(ValidatedExam(exam))
    } else {
        Err(ExamErrors(violations))
    }
}

/// The legal nerve names, loaded from the KB catalogue file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NerveCatalogue {
    names: BTreeSet<String>,
}

impl NerveCatalogue {
    /// One nerve name per line; `#` starts a comment.
    pub fn parse(source: &str) -> Result<Self, Vec<LineError>> {
        let mut names = BTreeSet::new();
        let mut errors = Vec::new();
        for line in text::lines(source) {
            let first = line.tokens[0];
            if line.tokens.len() > 1 {
                errors.push(LineError::at(
                    &line.tokens[1],
                    "expected a single nerve name per line",
                ));
            } else if !text::is_identifier(first.text) {
                errors.push(LineError::at(
                    &first,
                    format!("`{}` is not a valid nerve name", first.text),
                ));
            } else if !names.insert(first.text.to_owned()) {
                errors.push(LineError::at(
                    &first,
                    format!("nerve `{}` declared twice", first.text),
                ));
            }
        }
        if errors.is_empty() && names.is_empty() {
            errors.push(LineError::new(1, 1, "catalogue declares no nerves"));
        }
        if errors.is_empty() {
            Ok(Self { names })
        } else {
            Err(errors)
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}
