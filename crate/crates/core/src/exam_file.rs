//! JSON exam files.
//!
//! ```json
//! {
//!   "patient_id": "P-001",
//!   "nerves": [
//!     {
//!       "name": "median", "side": "left", "fibre": "motor",
//!       "segments": [
//!         { "index": 1, "amplitude": 7.2, "distal_latency": 3.6 },
//!         { "index": 2, "amplitude": 6.9, "amplitude_ratio": 0.96, "velocity": 55.0 }
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! Unknown fields are rejected. Errors name the JSON path of the offending
//! value.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_exam, Exam, ExamErrors, FibreType, NerveId, NerveStudy, SegmentMeasurements, Side,
    ValidatedExam,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExamDto {
    patient_id: String,
    nerves: Vec<NerveDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NerveDto {
    name: String,
    side: Side,
    fibre: FibreType,
    segments: Vec<SegmentDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDto {
    index: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    velocity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distal_latency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude_ratio: Option<f64>,
}

#[derive(Debug, Error)]
pub enum ExamFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: at `{path}`: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid exam: {0}")]
    Invalid(#[from] ExamErrors),
}

impl From<ExamDto> for Exam {
    fn from(dto: ExamDto) -> Self {
        Exam {
            patient_id: dto.patient_id,
            nerves: dto
                .nerves
                .into_iter()
                .map(|n| NerveStudy {
                    nerve: NerveId::new(n.name, n.side, n.fibre),
                    segments: n
                        .segments
                        .into_iter()
                        .map(|s| SegmentMeasurements {
                            index: s.index,
                            amplitude: s.amplitude,
                            velocity: s.velocity,
                            distal_latency: s.distal_latency,
                            amplitude_ratio: s.amplitude_ratio,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl From<&Exam> for ExamDto {
    fn from(exam: &Exam) -> Self {
        ExamDto {
            patient_id: exam.patient_id.clone(),
            nerves: exam
                .nerves
                .iter()
                .map(|n| NerveDto {
                    name: n.nerve.name.clone(),
                    side: n.nerve.side,
                    fibre: n.nerve.fibre,
                    segments: n
                        .segments
                        .iter()
                        .map(|s| SegmentDto {
                            index: s.index,
                            amplitude: s.amplitude,
                            velocity: s.velocity,
                            distal_latency: s.distal_latency,
                            amplitude_ratio: s.amplitude_ratio,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Parses an exam without validating it.
pub fn parse_exam(text: &str) -> Result<Exam, ExamFileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let dto: ExamDto = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ExamFileError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    Ok(dto.into())
}

/// Parses and validates an exam.
pub fn parse_validated(text: &str) -> Result<ValidatedExam, ExamFileError> {
    Ok(validate_exam(parse_exam(text)?)?)
}

pub fn read_exam(path: impl AsRef<Path>) -> Result<ValidatedExam, ExamFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ExamFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_validated(&text)
}

pub fn to_json(exam: &Exam) -> String {
    serde_json::to_string_pretty(&ExamDto::from(exam)).expect("exam serializes")
}
