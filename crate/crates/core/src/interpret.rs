//! Phase 1: turns continuous measurements into semantic facts by comparing
//! each value against a per-segment-type threshold table.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::domain::{symbols, SegmentMeasurements, SegmentType, SemanticCategory, Variable};
use crate::rules::FactSet;
use crate::text::{self, LineError};

symbols! {
    pub enum Direction: "direction" {
        LowIsAbnormal => "low_is_abnormal",
        HighIsAbnormal => "high_is_abnormal",
    }
}

impl Direction {
    /// The three categories a variable with this direction can take, from
    /// least to most abnormal.
    pub fn categories(self) -> [SemanticCategory; 3] {
        use SemanticCategory::*;
        match self {
            Direction::LowIsAbnormal => [Normal, Decreased, VeryDecreased],
            Direction::HighIsAbnormal => [Normal, Increased, VeryIncreased],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableSpec {
    pub variable: Variable,
    pub direction: Direction,
    pub mild_cutoff: f64,
    pub severe_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpretError {
    #[error("{variable} value {value} must be finite and > 0")]
    InvalidValue { variable: Variable, value: f64 },
    #[error("required variable missing: {segment_type} segment {index} has no {variable}")]
    MissingVariable {
        segment_type: SegmentType,
        index: u8,
        variable: Variable,
    },
    #[error("variable {variable} is not declared for {segment_type} segment {index}")]
    UndeclaredVariable {
        segment_type: SegmentType,
        index: u8,
        variable: Variable,
    },
    #[error("no threshold for {segment_type} {variable}")]
    MissingThreshold {
        segment_type: SegmentType,
        variable: Variable,
    },
}

impl VariableSpec {
    /// Checks the cutoff ordering implied by the direction.
    pub fn check(&self) -> Result<(), String> {
        let ok_values = [self.mild_cutoff, self.severe_cutoff]
            .iter()
            .all(|c| c.is_finite() && *c > 0.0);
        if !ok_values {
            return Err("cutoffs must be finite and > 0".into());
        }
        match self.direction {
            Direction::LowIsAbnormal if self.severe_cutoff >= self.mild_cutoff => Err(format!(
                "low_is_abnormal requires severe_cutoff < mild_cutoff (got {} >= {})",
                self.severe_cutoff, self.mild_cutoff
            )),
            Direction::HighIsAbnormal if self.severe_cutoff <= self.mild_cutoff => Err(format!(
                "high_is_abnormal requires severe_cutoff > mild_cutoff (got {} <= {})",
                self.severe_cutoff, self.mild_cutoff
            )),
            _ => Ok(()),
        }
    }
}

/// Maps a value onto its semantic category. A value equal to a cutoff falls
/// into the less abnormal category.
pub fn classify(value: f64, spec: &VariableSpec) -> Result<SemanticCategory, InterpretError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(InterpretError::InvalidValue {
            variable: spec.variable,
            value,
        });
    }
    let [normal, mild, severe] = spec.direction.categories();
    let category = match spec.direction {
        Direction::LowIsAbnormal => {
            if value >= spec.mild_cutoff {
                normal
            } else if value >= spec.severe_cutoff {
                mild
            } else {
                severe
            }
        }
        Direction::HighIsAbnormal => {
            if value <= spec.mild_cutoff {
                normal
            } else if value <= spec.severe_cutoff {
                mild
            } else {
                severe
            }
        }
    };
    Ok(category)
}

/// Cutoffs keyed by segment type and variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThresholdTable {
    entries: BTreeMap<(SegmentType, Variable), VariableSpec>,
}

impl ThresholdTable {
    /// Builds a table from specs, checking completeness and cutoff ordering.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (SegmentType, VariableSpec)>,
    ) -> Result<Self, String> {
        let mut table = ThresholdTable::default();
        for (segment_type, spec) in entries {
            spec.check()?;
            if table
                .entries
                .insert((segment_type, spec.variable), spec)
                .is_some()
            {
                return Err(format!(
                    "duplicate entry for {segment_type} {}",
                    spec.variable
                ));
            }
        }
        if let Some((t, v)) = table.missing().next() {
            return Err(format!("missing threshold for {t} {v}"));
        }
        Ok(table)
    }

    /// Parses the threshold file: one record per line,
    /// `<segment_type> <variable> <direction> <mild_cutoff> <severe_cutoff>`.
    pub fn parse(source: &str) -> Result<Self, Vec<LineError>> {
        let mut table = ThresholdTable::default();
        let mut errors = Vec::new();
        let mut last_line = 1;

        for line in text::lines(source) {
            last_line = line.number;
            match parse_record(&line) {
                Ok((segment_type, spec)) => {
                    match table.entries.entry((segment_type, spec.variable)) {
                        Entry::Occupied(_) => errors.push(LineError::at(
                            &line.tokens[0],
                            format!("duplicate threshold for {segment_type} {}", spec.variable),
                        )),
                        Entry::Vacant(slot) => {
                            slot.insert(spec);
                        }
                    }
                }
                Err(e) => errors.push(e),
            }
        }

        if errors.is_empty() {
            for (t, v) in table.missing() {
                errors.push(LineError::new(
                    last_line,
                    1,
                    format!("missing threshold for {t} {v}"),
                ));
            }
        }

        if errors.is_empty() {
            Ok(table)
        } else {
            Err(errors)
        }
    }

    fn missing(&self) -> impl Iterator<Item = (SegmentType, Variable)> + '_ {
        SegmentType::ALL.iter().flat_map(move |&t| {
            t.all_variables()
                .iter()
                .filter(move |&&v| !self.entries.contains_key(&(t, v)))
                .map(move |&v| (t, v))
        })
    }

    pub fn get(&self, segment_type: SegmentType, variable: Variable) -> Option<&VariableSpec> {
        self.entries.get(&(segment_type, variable))
    }

    /// Variable → allowed category symbols for one segment type, the
    /// vocabulary its level-1 rule set may reference.
    pub fn domains(&self, segment_type: SegmentType) -> BTreeMap<String, BTreeSet<String>> {
        self.entries
            .iter()
            .filter(|((t, _), _)| *t == segment_type)
            .map(|((_, v), spec)| {
                let domain = spec
                    .direction
                    .categories()
                    .iter()
                    .map(|c| c.as_str().to_owned())
                    .collect();
                (v.as_str().to_owned(), domain)
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SegmentType, &VariableSpec)> {
        self.entries.iter().map(|((t, _), spec)| (*t, spec))
    }
}

fn parse_record(line: &text::Line<'_>) -> Result<(SegmentType, VariableSpec), LineError> {
    let toks = &line.tokens;
    if toks.len() < 5 {
        return Err(line.eol_error(
            "expected `<segment_type> <variable> <direction> <mild_cutoff> <severe_cutoff>`",
        ));
    }
    if toks.len() > 5 {
        return Err(LineError::at(&toks[5], "unexpected trailing token"));
    }
    let segment_type: SegmentType = toks[0]
        .text
        .parse()
        .map_err(|e| LineError::at(&toks[0], format!("{e}")))?;
    let variable: Variable = toks[1]
        .text
        .parse()
        .map_err(|e| LineError::at(&toks[1], format!("{e}")))?;
    if !segment_type.all_variables().contains(&variable) {
        return Err(LineError::at(
            &toks[1],
            format!("{variable} is not measured on {segment_type} segments"),
        ));
    }
    let direction: Direction = toks[2]
        .text
        .parse()
        .map_err(|e| LineError::at(&toks[2], format!("{e}")))?;
    let number = |i: usize| -> Result<f64, LineError> {
        toks[i]
            .text
            .parse::<f64>()
            .map_err(|_| LineError::at(&toks[i], format!("`{}` is not a number", toks[i].text)))
    };
    let spec = VariableSpec {
        variable,
        direction,
        mild_cutoff: number(3)?,
        severe_cutoff: number(4)?,
    };
    spec.check().map_err(|msg| LineError::at(&toks[3], msg))?;
    Ok((segment_type, spec))
}

/// Produces exactly one fact per variable required for this segment.
pub fn interpret_segment(
    m: &SegmentMeasurements,
    segment_type: SegmentType,
    table: &ThresholdTable,
) -> Result<FactSet, InterpretError> {
    let required = segment_type.required_variables(m.index);

    if let Some((variable, _)) = m.present().find(|(v, _)| !required.contains(v)) {
        return Err(InterpretError::UndeclaredVariable {
            segment_type,
            index: m.index,
            variable,
        });
    }

    let mut facts = FactSet::new();
    for &variable in required {
        let value = m.get(variable).ok_or(InterpretError::MissingVariable {
            segment_type,
            index: m.index,
            variable,
        })?;
        let spec = table
            .get(segment_type, variable)
            .ok_or(InterpretError::MissingThreshold {
                segment_type,
                variable,
            })?;
        let category = classify(value, spec)?;
        facts.insert(variable.as_str(), category.as_str());
    }
    Ok(facts)
}
