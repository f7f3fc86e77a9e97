//! The `neurop` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::automaton::enumerate_all;
use crate::domain::NerveId;
use crate::exam_file::{read_exam, ExamFileError};
use crate::pipeline::{check_kb, run_exam, KnowledgeBase, PipelineError};
use crate::report::{render_enumeration, render_text, render_trace, trace_events};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;
pub const EXIT_UNKNOWN_NERVE: i32 = 6;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  validate-kb or enumerate found a failure
  2  usage error
  3  file not found or unreadable
  4  exam or KB file could not be parsed
  5  exam failed validation or interpretation
  6  nerve not in the catalogue or not in the exam";

#[derive(Debug, Parser)]
#[command(name = "neurop", version, about = "Neuropathy diagnosis from nerve conduction studies", after_help = EXIT_CODES)]
pub struct Cli {
    /// KB directory. The built-in KB is used when absent.
    #[arg(long, global = true, env = "NEUROP_KB", value_name = "DIR")]
    pub kb: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diagnose an exam file.
    Diagnose { exam: PathBuf },
    /// Check every KB file and report per file.
    ValidateKb,
    /// Run the automaton and the oracle over every chain of length 1 to 5.
    Enumerate,
    /// Show the reasoning steps for one nerve.
    Trace {
        exam: PathBuf,
        /// Nerve as name:side:fibre, e.g. median:left:motor.
        #[arg(long)]
        nerve: NerveId,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<ExamFileError> for Failure {
    fn from(e: ExamFileError) -> Self {
        let code = match e {
            ExamFileError::Io { .. } => EXIT_IO,
            ExamFileError::Parse { .. } => EXIT_PARSE,
            ExamFileError::Invalid(_) => EXIT_VALIDATION,
        };
        Failure::new(code, e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::UnknownNerve { .. } => EXIT_UNKNOWN_NERVE,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e)
    }
}

fn load(kb: &Option<PathBuf>) -> Result<KnowledgeBase, Failure> {
    let Some(dir) = kb else {
        return Ok(KnowledgeBase::builtin());
    };
    if !dir.is_dir() {
        return Err(Failure::new(
            EXIT_IO,
            format!("{}: KB directory not found", dir.display()),
        ));
    }
    let (check, kb) = check_kb(dir);
    kb.ok_or_else(|| {
        let code = if check.only_io_failures() {
            EXIT_IO
        } else {
            EXIT_PARSE
        };
        Failure::new(
            code,
            format!("knowledge base {} failed to load:\n{check}", dir.display()),
        )
    })
}

fn json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let write = |out: &mut dyn Write, s: &str| {
        out.write_all(s.as_bytes())
            .map_err(|e| Failure::new(EXIT_IO, e))
    };
    match &cli.command {
        Command::Diagnose { exam } => {
            let kb = load(&cli.kb)?;
            let exam = read_exam(exam)?;
            let report = run_exam(&exam, &kb)?;
            match cli.format {
                Format::Text => write(out, &render_text(&report))?,
                Format::Json => write(out, &json(&report))?,
            }
            Ok(EXIT_OK)
        }
        Command::ValidateKb => {
            let (check, dir) = match &cli.kb {
                Some(dir) if !dir.is_dir() => {
                    return Err(Failure::new(
                        EXIT_IO,
                        format!("{}: KB directory not found", dir.display()),
                    ))
                }
                Some(dir) => (check_kb(dir).0, dir.display().to_string()),
                None => (
                    KnowledgeBase::check_sources(|f| {
                        Ok(Some(crate::pipeline::builtin_source(f).to_owned()))
                    })
                    .0,
                    "built-in".to_owned(),
                ),
            };
            match cli.format {
                Format::Text => write(out, &format!("knowledge base: {dir}\n{check}"))?,
                Format::Json => write(out, &json(&check))?,
            }
            Ok(if check.passed() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            })
        }
        Command::Enumerate => {
            let kb = load(&cli.kb)?;
            let rows = enumerate_all(&kb.automaton);
            match cli.format {
                Format::Text => write(out, &render_enumeration(&rows))?,
                Format::Json => write(out, &json(&rows))?,
            }
            Ok(if rows.iter().all(|r| r.agree) {
                EXIT_OK
            } else {
                EXIT_FAILURE
            })
        }
        Command::Trace { exam, nerve } => {
            let kb = load(&cli.kb)?;
            let exam = read_exam(exam)?;
            let report = run_exam(&exam, &kb)?;
            if report.nerve(nerve).is_none() {
                let available: Vec<String> =
                    report.nerves.iter().map(|n| n.nerve.to_string()).collect();
                return Err(Failure::new(
                    EXIT_UNKNOWN_NERVE,
                    format!(
                        "nerve {nerve} is not in the exam; available: {}",
                        available.join(", ")
                    ),
                ));
            }
            match cli.format {
                Format::Text => write(out, &render_trace(&report, Some(nerve)))?,
                Format::Json => {
                    let events: Vec<_> = trace_events(&report, Some(nerve)).collect();
                    write(out, &json(&events))?
                }
            }
            Ok(EXIT_OK)
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_USAGE
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
