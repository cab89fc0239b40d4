//! C ABI over the sitcon engine.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a
//! [`SitconStatus`]; on failure [`sitcon_last_error`] describes the cause.
//! Strings returned through out-parameters are UTF-8, NUL-terminated and
//! must be released with [`sitcon_string_free`]. Structured results are
//! JSON documents.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::{Arc, Mutex};

use sitcon::inference::{infer, PremiseSpec, PremiseVector};
use sitcon::kb::{load_knowledge_base, parse_document, validate_knowledge_base, KbError, KnowledgeBase};
use sitcon::service::{ServiceError, Session, SessionConfig};
use sitcon::sim::{run_closed_loop, trajectory_csv, EnvironmentState, LoopConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SitconStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    KbSchema = 4,
    KbIntegrity = 5,
    KbInvalid = 6,
    UnsupportedLanguage = 7,
    InvalidOption = 8,
    Inference = 9,
    Simulation = 10,
    Internal = 99,
}

/// Loaded, validated knowledge base. Immutable and shareable between threads.
pub struct SitconKb {
    kb: Arc<KnowledgeBase>,
}

/// Dialog session with its own plant. Calls on one session are serialized.
pub struct SitconSession {
    session: Mutex<Session>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SitconStatus, String);

impl From<KbError> for Failure {
    fn from(e: KbError) -> Self {
        let status = match e {
            KbError::Schema(_) | KbError::Domain(_) => SitconStatus::KbSchema,
            KbError::Integrity(_) => SitconStatus::KbIntegrity,
            KbError::Invalid(_) => SitconStatus::KbInvalid,
        };
        Failure(status, e.to_string())
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::UnsupportedLanguage(_) => SitconStatus::UnsupportedLanguage,
            ServiceError::InvalidOption(_) => SitconStatus::InvalidOption,
            ServiceError::Kb(_) => SitconStatus::KbInvalid,
            ServiceError::Sim(_) => SitconStatus::Simulation,
            _ => SitconStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, converting failures and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SitconStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            SitconStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SitconStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SitconStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(SitconStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(SitconStatus::NullArgument, format!("`{name}` is null")))
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(SitconStatus::NullArgument, "output pointer is null".into()));
    }
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    let c = CString::new(text).map_err(|_| Failure(SitconStatus::Internal, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn to_json(value: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string(value).map_err(|e| Failure(SitconStatus::Internal, e.to_string()))
}

fn invalid_json(e: serde_json::Error) -> Failure {
    Failure(SitconStatus::InvalidJson, e.to_string())
}

/// Library version, a static string that must not be freed.
#[no_mangle]
pub extern "C" fn sitcon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call on the same thread; must not be freed.
#[no_mangle]
pub extern "C" fn sitcon_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn sitcon_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and validates a KB document.
///
/// # Safety
/// `document` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sitcon_kb_load(document: *const c_char, out: *mut *mut SitconKb) -> SitconStatus {
    guard(|| {
        check_out(out)?;
        let kb = load_knowledge_base(str_arg(document, "document")?)?;
        *out = Box::into_raw(Box::new(SitconKb { kb: Arc::new(kb) }));
        Ok(())
    })
}

/// # Safety
/// `kb` must come from [`sitcon_kb_load`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sitcon_kb_free(kb: *mut SitconKb) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Validation report of a document as JSON
/// `{"valid": bool, "violations": [...], "warnings": [...]}`. Returns `Ok`
/// whenever a report could be produced, including for invalid documents.
///
/// # Safety
/// `document` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sitcon_kb_validate(document: *const c_char, out_json: *mut *mut c_char) -> SitconStatus {
    guard(|| {
        check_out(out_json)?;
        let kb = parse_document(str_arg(document, "document")?)?;
        let report = validate_knowledge_base(&kb);
        let json = serde_json::json!({
            "valid": report.is_empty(),
            "violations": report.violations,
            "warnings": report.warnings,
        });
        write_string(out_json, to_json(&json)?)
    })
}

/// Rule inference over all representation levels. `premises_json` maps
/// variable names to a term label, a crisp number or a membership function.
///
/// # Safety
/// `kb` must be a live handle; `premises_json` a NUL-terminated string; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sitcon_infer(
    kb: *const SitconKb,
    premises_json: *const c_char,
    out_json: *mut *mut c_char,
) -> SitconStatus {
    guard(|| {
        check_out(out_json)?;
        let kb = &ref_arg(kb, "kb")?.kb;
        let specs: BTreeMap<String, PremiseSpec> =
            serde_json::from_str(str_arg(premises_json, "premises_json")?).map_err(invalid_json)?;
        let inference = |e: sitcon::inference::InferenceError| Failure(SitconStatus::Inference, e.to_string());
        let premises = PremiseVector::resolve(&specs, kb).map_err(inference)?;
        let result = infer(&premises, kb, None).map_err(inference)?;
        write_string(out_json, to_json(&result)?)
    })
}

/// Opens a dialog session. `config_json` may be null for defaults, or an
/// object with any of `language`, `policy`, `theta`, `disturbance`.
///
/// # Safety
/// `kb` must be a live handle; `config_json` null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sitcon_session_new(
    kb: *const SitconKb,
    config_json: *const c_char,
    out: *mut *mut SitconSession,
) -> SitconStatus {
    guard(|| {
        check_out(out)?;
        let kb = ref_arg(kb, "kb")?.kb.clone();
        let config: SessionConfig = if config_json.is_null() {
            SessionConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(invalid_json)?
        };
        let session = Session::new("ffi", "ffi", kb, config)?;
        *out = Box::into_raw(Box::new(SitconSession { session: Mutex::new(session) }));
        Ok(())
    })
}

/// # Safety
/// `session` must come from [`sitcon_session_new`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sitcon_session_free(session: *mut SitconSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

fn with_session<R>(session: &SitconSession, f: impl FnOnce(&mut Session) -> R) -> R {
    let mut guard = session.session.lock().unwrap_or_else(|p| p.into_inner());
    f(&mut guard)
}

/// One dialog turn; writes the turn response as JSON
/// `{"kind", "payload", "text", "mu_D"}`. Unparseable input yields a
/// clarification response, not an error status.
///
/// # Safety
/// `session` must be a live handle; `utterance` NUL-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sitcon_session_turn(
    session: *const SitconSession,
    utterance: *const c_char,
    out_json: *mut *mut c_char,
) -> SitconStatus {
    guard(|| {
        check_out(out_json)?;
        let session = ref_arg(session, "session")?;
        if utterance.is_null() {
            return Err(Failure(SitconStatus::NullArgument, "`utterance` is null".into()));
        }
        // invalid UTF-8 is replaced so any byte string gets a clarification
        let utterance = CStr::from_ptr(utterance).to_string_lossy();
        let response = with_session(session, |s| s.dialog_turn(&utterance));
        write_string(out_json, to_json(&response)?)
    })
}

/// Session snapshot as JSON.
///
/// # Safety
/// `session` must be a live handle; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sitcon_session_state(session: *const SitconSession, out_json: *mut *mut c_char) -> SitconStatus {
    guard(|| {
        check_out(out_json)?;
        let session = ref_arg(session, "session")?;
        let snapshot = with_session(session, |s| s.snapshot())?;
        write_string(out_json, to_json(&snapshot)?)
    })
}

/// Runs `steps` control cycles; writes a JSON array of tick records
/// followed by a summary record.
///
/// # Safety
/// `session` must be a live handle; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sitcon_session_step(
    session: *const SitconSession,
    steps: u32,
    out_json: *mut *mut c_char,
) -> SitconStatus {
    guard(|| {
        check_out(out_json)?;
        let session = ref_arg(session, "session")?;
        let events = with_session(session, |s| s.stream_ticks(steps as usize))?;
        write_string(out_json, to_json(&events)?)
    })
}

/// Closed-loop run from the KB's initial plant state, as trajectory CSV.
/// `config_json` may be null, or an object with `policy`, `theta`, `disturbance`.
///
/// # Safety
/// `kb` must be a live handle; `config_json` null or NUL-terminated; `out_csv` writable.
#[no_mangle]
pub unsafe extern "C" fn sitcon_simulate_csv(
    kb: *const SitconKb,
    steps: u32,
    config_json: *const c_char,
    out_csv: *mut *mut c_char,
) -> SitconStatus {
    guard(|| {
        check_out(out_csv)?;
        let kb = ref_arg(kb, "kb")?.kb.clone();
        let config: LoopConfig = if config_json.is_null() {
            LoopConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(invalid_json)?
        };
        let simulation = |e: sitcon::sim::SimError| Failure(SitconStatus::Simulation, e.to_string());
        let initial = EnvironmentState::initial(&kb.plant);
        let trajectory = run_closed_loop(kb.clone(), initial, steps as usize, &config).map_err(simulation)?;
        write_string(out_csv, trajectory_csv(&kb.plant, &trajectory).map_err(simulation)?)
    })
}
