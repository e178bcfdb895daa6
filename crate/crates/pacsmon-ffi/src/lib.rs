//! C ABI over the streaming detection pipeline.
//!
//! The binding surface is a single opaque session handle. Callers push
//! trace events as JSONL strings and poll score/verdict records back as
//! heap-allocated JSON strings (freed with [`pacsmon_string_free`]). All
//! functions return [`PacsmonStatus`] codes or NULL-able pointers; nothing
//! panics across the boundary.
//!
//! ```c
//! pacsmon_session *s = pacsmon_session_new(NULL, NULL);
//! pacsmon_session_push_event(s, "{\"tx_id\":\"T1\",...}");
//! pacsmon_session_finish(s);
//! char *verdict;
//! while ((verdict = pacsmon_session_next_verdict(s)) != NULL) {
//!     handle(verdict);
//!     pacsmon_string_free(verdict);
//! }
//! pacsmon_session_free(s);
//! ```

use libc::c_char;
use pacsmon::pipeline::{PipelineConfig, PipelineError, StreamPipeline};
use pacsmon::simulator::{builtin_scenario, generate};
use pacsmon::TraceEvent;
use std::collections::VecDeque;
use std::ffi::{CStr, CString};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every fallible call.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacsmonStatus {
    Ok = 0,
    NullArgument = -1,
    InvalidUtf8 = -2,
    ParseError = -3,
    InvalidConfig = -4,
    /// The event failed leg-signature or timestamp validation; it was
    /// counted and skipped, the session stays usable.
    InvalidEvent = -5,
    /// The session was already finished.
    Finished = -6,
    IoError = -7,
    Internal = -8,
}

/// Opaque streaming session: correlate, aggregate, detect, explain.
#[allow(non_camel_case_types)]
pub struct pacsmon_session {
    pipeline: StreamPipeline,
    scores: VecDeque<CString>,
    verdicts: VecDeque<CString>,
    payments: VecDeque<CString>,
    finished: bool,
    last_error: Option<CString>,
}

impl pacsmon_session {
    fn absorb(&mut self) {
        let output = self.pipeline.drain();
        for p in &output.payments {
            if let Ok(line) = serde_json::to_string(p).map(into_cstring) {
                self.payments.push_back(line);
            }
        }
        for bin in &output.bins {
            if let Ok(line) = serde_json::to_string(&bin.scores).map(into_cstring) {
                self.scores.push_back(line);
            }
            if let Some(v) = &bin.verdict {
                if let Ok(line) = serde_json::to_string(v).map(into_cstring) {
                    self.verdicts.push_back(line);
                }
            }
        }
    }

    fn set_error(&mut self, message: String) {
        self.last_error = Some(into_cstring(message));
    }
}

fn into_cstring(s: String) -> CString {
    // JSON output never contains NUL, but never trust that at the boundary.
    CString::new(s).unwrap_or_else(|_| CString::new("<invalid>").expect("static"))
}

/// Releases a string returned by any `pacsmon_*` function.
///
/// # Safety
/// `s` must be a pointer previously returned by this library and not yet
/// freed; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn pacsmon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// JSON array of built-in scenario names; free with `pacsmon_string_free`.
#[no_mangle]
pub extern "C" fn pacsmon_scenario_names() -> *mut c_char {
    let names: Vec<String> = pacsmon::builtin_scenarios_seeded(42)
        .iter()
        .map(|s| s.name.clone())
        .collect();
    let json = serde_json::to_string(&names).unwrap_or_else(|_| "[]".to_string());
    into_cstring(json).into_raw()
}

unsafe fn parse_utf8<'a>(ptr: *const c_char) -> Result<&'a str, PacsmonStatus> {
    if ptr.is_null() {
        return Err(PacsmonStatus::NullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| PacsmonStatus::InvalidUtf8)
}

/// Creates a session. `config_json` is an optional pipeline configuration
/// document (pass NULL for defaults). On failure returns NULL and, when
/// `status_out` is non-NULL, writes the failure code there.
///
/// # Safety
/// `config_json`, when non-NULL, must point to a NUL-terminated string;
/// `status_out`, when non-NULL, must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_new(
    config_json: *const c_char,
    status_out: *mut i32,
) -> *mut pacsmon_session {
    let report = |code: PacsmonStatus| {
        if !status_out.is_null() {
            *status_out = code as i32;
        }
    };
    let config = if config_json.is_null() {
        PipelineConfig::default()
    } else {
        let text = match parse_utf8(config_json) {
            Ok(text) => text,
            Err(code) => {
                report(code);
                return ptr::null_mut();
            }
        };
        match serde_json::from_str(text) {
            Ok(config) => config,
            Err(_) => {
                report(PacsmonStatus::ParseError);
                return ptr::null_mut();
            }
        }
    };
    match StreamPipeline::new(config) {
        Ok(pipeline) => {
            report(PacsmonStatus::Ok);
            Box::into_raw(Box::new(pacsmon_session {
                pipeline,
                scores: VecDeque::new(),
                verdicts: VecDeque::new(),
                payments: VecDeque::new(),
                finished: false,
                last_error: None,
            }))
        }
        Err(_) => {
            report(PacsmonStatus::InvalidConfig);
            ptr::null_mut()
        }
    }
}

/// Feeds one trace event (a JSONL line). Invalid events return
/// `InvalidEvent` but leave the session usable; anything emitted becomes
/// available through the `next_*` functions.
///
/// # Safety
/// `session` must come from `pacsmon_session_new` and not be freed;
/// `event_json` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_push_event(
    session: *mut pacsmon_session,
    event_json: *const c_char,
) -> i32 {
    let Some(s) = session.as_mut() else {
        return PacsmonStatus::NullArgument as i32;
    };
    if s.finished {
        s.set_error("push after finish".into());
        return PacsmonStatus::Finished as i32;
    }
    let text = match parse_utf8(event_json) {
        Ok(text) => text,
        Err(code) => return code as i32,
    };
    let event: TraceEvent = match serde_json::from_str(text) {
        Ok(event) => event,
        Err(err) => {
            s.set_error(format!("event parse error: {err}"));
            return PacsmonStatus::ParseError as i32;
        }
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| s.pipeline.push_event(&event)));
    let code = match outcome {
        Ok(Ok(())) => PacsmonStatus::Ok,
        Ok(Err(PipelineError::Event(violation))) => {
            s.set_error(violation.to_string());
            PacsmonStatus::InvalidEvent
        }
        Ok(Err(other)) => {
            s.set_error(other.to_string());
            PacsmonStatus::Internal
        }
        Err(_) => {
            s.set_error("internal panic".into());
            PacsmonStatus::Internal
        }
    };
    s.absorb();
    code as i32
}

/// Flushes the session: evicts pending transactions and closes every
/// remaining bin. Idempotent.
///
/// # Safety
/// `session` must come from `pacsmon_session_new` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_finish(session: *mut pacsmon_session) -> i32 {
    let Some(s) = session.as_mut() else {
        return PacsmonStatus::NullArgument as i32;
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| s.pipeline.finish()));
    let code = match outcome {
        Ok(Ok(())) => {
            s.finished = true;
            PacsmonStatus::Ok
        }
        Ok(Err(err)) => {
            s.set_error(err.to_string());
            PacsmonStatus::Internal
        }
        Err(_) => {
            s.set_error("internal panic".into());
            PacsmonStatus::Internal
        }
    };
    s.absorb();
    code as i32
}

unsafe fn pop_queue(
    session: *mut pacsmon_session,
    pick: impl Fn(&mut pacsmon_session) -> &mut VecDeque<CString>,
) -> *mut c_char {
    let Some(s) = session.as_mut() else {
        return ptr::null_mut();
    };
    match pick(s).pop_front() {
        Some(line) => line.into_raw(),
        None => ptr::null_mut(),
    }
}

/// Next score record as a JSON string, or NULL when drained.
/// Free with `pacsmon_string_free`.
///
/// # Safety
/// `session` must come from `pacsmon_session_new` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_next_score(
    session: *mut pacsmon_session,
) -> *mut c_char {
    pop_queue(session, |s| &mut s.scores)
}

/// Next verdict as a JSON string, or NULL when drained.
/// Free with `pacsmon_string_free`.
///
/// # Safety
/// `session` must come from `pacsmon_session_new` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_next_verdict(
    session: *mut pacsmon_session,
) -> *mut c_char {
    pop_queue(session, |s| &mut s.verdicts)
}

/// Next settled payment as a JSON string, or NULL when drained.
/// Free with `pacsmon_string_free`.
///
/// # Safety
/// `session` must come from `pacsmon_session_new` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_next_payment(
    session: *mut pacsmon_session,
) -> *mut c_char {
    pop_queue(session, |s| &mut s.payments)
}

/// Run summary as a JSON string (complete after finish).
/// Free with `pacsmon_string_free`.
///
/// # Safety
/// `session` must come from `pacsmon_session_new` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_summary(session: *mut pacsmon_session) -> *mut c_char {
    let Some(s) = session.as_mut() else {
        return ptr::null_mut();
    };
    match serde_json::to_string(s.pipeline.summary()) {
        Ok(json) => into_cstring(json).into_raw(),
        Err(_) => ptr::null_mut(),
    }
}

/// Message for the most recent error on this session, or NULL. The pointer
/// is borrowed: valid until the next call on the same session; do not free.
///
/// # Safety
/// `session` must come from `pacsmon_session_new` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_last_error(
    session: *mut pacsmon_session,
) -> *const c_char {
    let Some(s) = session.as_mut() else {
        return ptr::null();
    };
    match &s.last_error {
        Some(message) => message.as_ptr(),
        None => ptr::null(),
    }
}

/// Destroys a session.
///
/// # Safety
/// `session` must come from `pacsmon_session_new` and not be freed twice;
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_session_free(session: *mut pacsmon_session) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Generates a built-in scenario to `trace_path` (JSONL) and, when
/// `gt_path` is non-NULL, its ground-truth sidecar. Convenience for
/// bindings that want test traffic without shelling out to the CLI.
///
/// # Safety
/// `name` and `trace_path` must be NUL-terminated; `gt_path` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pacsmon_simulate_scenario(
    name: *const c_char,
    seed: u64,
    trace_path: *const c_char,
    gt_path: *const c_char,
) -> i32 {
    let name = match parse_utf8(name) {
        Ok(name) => name,
        Err(code) => return code as i32,
    };
    let trace_path = match parse_utf8(trace_path) {
        Ok(path) => path,
        Err(code) => return code as i32,
    };
    let Some(spec) = builtin_scenario(name, seed) else {
        return PacsmonStatus::InvalidConfig as i32;
    };
    let Ok(trace) = generate(&spec) else {
        return PacsmonStatus::InvalidConfig as i32;
    };
    let write_trace = || -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(trace_path)?);
        for e in &trace.events {
            serde_json::to_writer(&mut w, e).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    if write_trace().is_err() {
        return PacsmonStatus::IoError as i32;
    }
    if !gt_path.is_null() {
        let Ok(path) = parse_utf8(gt_path) else {
            return PacsmonStatus::InvalidUtf8 as i32;
        };
        let Ok(json) = serde_json::to_string_pretty(&trace.ground_truth) else {
            return PacsmonStatus::Internal as i32;
        };
        if std::fs::write(path, json).is_err() {
            return PacsmonStatus::IoError as i32;
        }
    }
    PacsmonStatus::Ok as i32
}
