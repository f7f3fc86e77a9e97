//! C ABI over the `neurop` engine.
//!
//! Every function returns a [`NeuropStatus`]. On failure a message is
//! available from [`neurop_last_error_message`] on the same thread. Strings
//! handed out by the library are owned by the caller and released with
//! [`neurop_string_free`]. Knowledge bases are opaque handles released with
//! [`neurop_kb_free`]; a loaded KB is immutable and may be shared across
//! threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use neurop::automaton::{enumerate_all, state_to_dx, SegmentStateChain};
use neurop::domain::NerveDx;
use neurop::exam_file::{parse_validated, ExamFileError};
use neurop::pipeline::{check_kb, run_exam, KnowledgeBase, PipelineError};

/// Opaque knowledge base handle.
pub struct NeuropKb(KnowledgeBase);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuropStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// File or directory missing or unreadable.
    Io = 3,
    /// Exam JSON or a KB file could not be parsed.
    Parse = 4,
    /// Exam failed validation or interpretation.
    Validation = 5,
    UnknownNerve = 6,
    InvalidChain = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuropNerveDx {
    Normal = 0,
    Focal = 1,
    MultipleFocal = 2,
    Diffuse = 3,
}

impl From<NerveDx> for NeuropNerveDx {
    fn from(dx: NerveDx) -> Self {
        match dx {
            NerveDx::Normal => NeuropNerveDx::Normal,
            NerveDx::Focal => NeuropNerveDx::Focal,
            NerveDx::MultipleFocal => NeuropNerveDx::MultipleFocal,
            NerveDx::Diffuse => NeuropNerveDx::Diffuse,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

struct Failure(NeuropStatus, String);

impl From<ExamFileError> for Failure {
    fn from(e: ExamFileError) -> Self {
        let status = match e {
            ExamFileError::Io { .. } => NeuropStatus::Io,
            ExamFileError::Parse { .. } => NeuropStatus::Parse,
            ExamFileError::Invalid(_) => NeuropStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::UnknownNerve { .. } => NeuropStatus::UnknownNerve,
            _ => NeuropStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NeuropStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NeuropStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            NeuropStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(NeuropStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(NeuropStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

unsafe fn kb_arg<'a>(kb: *const NeuropKb) -> Result<&'a KnowledgeBase, Failure> {
    kb.as_ref().map(|k| &k.0).ok_or_else(|| null("kb"))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s)
        .map_err(|_| Failure(NeuropStatus::Panic, "output contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Loads the knowledge base compiled into the library.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn neurop_kb_load_builtin(out: *mut *mut NeuropKb) -> NeuropStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(NeuropKb(KnowledgeBase::builtin())));
        Ok(())
    })
}

/// Loads a KB directory. On failure `*out` is left untouched and the last
/// error lists every failing file.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn neurop_kb_load(
    dir: *const c_char,
    out: *mut *mut NeuropKb,
) -> NeuropStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !std::path::Path::new(dir).is_dir() {
            return Err(Failure(
                NeuropStatus::Io,
                format!("{dir}: KB directory not found"),
            ));
        }
        let (check, kb) = check_kb(dir);
        match kb {
            Some(kb) => {
                *out = Box::into_raw(Box::new(NeuropKb(kb)));
                Ok(())
            }
            None => {
                let status = if check.only_io_failures() {
                    NeuropStatus::Io
                } else {
                    NeuropStatus::Parse
                };
                Err(Failure(status, check.to_string()))
            }
        }
    })
}

/// Releases a KB handle. Null is ignored.
///
/// # Safety
/// `kb` must come from a load function and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn neurop_kb_free(kb: *mut NeuropKb) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Hex content hash of the loaded KB files.
///
/// # Safety
/// `kb` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn neurop_kb_fingerprint(
    kb: *const NeuropKb,
    out: *mut *mut c_char,
) -> NeuropStatus {
    guard(|| {
        let kb = kb_arg(kb)?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_string(out, kb.fingerprint.clone())
    })
}

/// Diagnoses an exam given as JSON text and writes the JSON report.
///
/// # Safety
/// `kb` must be a live handle, `exam_json` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn neurop_diagnose_json(
    kb: *const NeuropKb,
    exam_json: *const c_char,
    out: *mut *mut c_char,
) -> NeuropStatus {
    guard(|| {
        let kb = kb_arg(kb)?;
        let text = str_arg(exam_json, "exam_json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let exam = parse_validated(text)?;
        let report = run_exam(&exam, kb)?;
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Failure(NeuropStatus::Panic, e.to_string()))?;
        put_string(out, json)
    })
}

/// The 62-row chain enumeration with oracle agreement, as JSON.
///
/// # Safety
/// `kb` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn neurop_enumerate_json(
    kb: *const NeuropKb,
    out: *mut *mut c_char,
) -> NeuropStatus {
    guard(|| {
        let kb = kb_arg(kb)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string_pretty(&enumerate_all(&kb.automaton))
            .map_err(|e| Failure(NeuropStatus::Panic, e.to_string()))?;
        put_string(out, json)
    })
}

/// Runs the nerve automaton over `len` symbols, each 0 or 1.
///
/// # Safety
/// `kb` must be a live handle, `bits` must point to `len` readable bytes and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn neurop_chain_diagnose(
    kb: *const NeuropKb,
    bits: *const u8,
    len: usize,
    out: *mut NeuropNerveDx,
) -> NeuropStatus {
    guard(|| {
        let kb = kb_arg(kb)?;
        if bits.is_null() {
            return Err(null("bits"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let bits = std::slice::from_raw_parts(bits, len);
        let chain = SegmentStateChain::from_bits(bits)
            .map_err(|e| Failure(NeuropStatus::InvalidChain, e.to_string()))?;
        let dx = state_to_dx(kb.automaton.run(&chain).final_state)
            .map_err(|e| Failure(NeuropStatus::InvalidChain, e.to_string()))?;
        *out = dx.into();
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn neurop_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn neurop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
