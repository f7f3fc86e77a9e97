//! Neuropathy diagnosis from nerve conduction studies.
//!
//! Knowledge is split into three levels, each with its own representation:
//!
//! * segment level: threshold interpretation followed by production rules
//!   ([`interpret`], [`rules`]),
//! * nerve level: a finite automaton over the chain of segment states
//!   ([`automaton`]),
//! * patient level: production rules over summary predicates ([`synthesis`]).
//!
//! [`pipeline`] runs the four phases over a working memory and produces a
//! traced [`pipeline::DiagnosisReport`]. All knowledge is read from a KB
//! directory of plain-text files.

pub mod automaton;
pub mod cli;
pub mod domain;
pub mod exam_file;
pub mod interpret;
pub mod pipeline;
pub mod report;
pub mod rules;
pub mod synthesis;
pub mod text;
