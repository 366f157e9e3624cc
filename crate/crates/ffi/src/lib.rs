//! C ABI for slotgen.
//!
//! Every fallible function returns a [`SlotgenStatus`] and writes its result
//! through an out-pointer. On failure [`slotgen_last_error`] describes the
//! problem. Strings handed out by the library are freed with
//! [`slotgen_string_free`]; handles with their own `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde_json::{json, Value};
use slotgen::augment::{nifs_split, NifsConfig};
use slotgen::corpus::{load_corpus, parse_bracket, Corpus, CorpusFormat};
use slotgen::filters::valid_filter;
use slotgen::metrics::{eval_report, PredictionPair};
use slotgen::prompt::{parse_prompt, Prompt};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotgenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Io = 5,
    Panic = 6,
}

/// Parsed prompt handle.
pub struct SlotgenPrompt(Prompt);

/// Loaded corpus handle.
pub struct SlotgenCorpus(Corpus);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(SlotgenStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SlotgenStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlotgenStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SlotgenStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SlotgenStatus::NullPointer, format!("{what} is null"))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(SlotgenStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|e| Fail(SlotgenStatus::InvalidArgument, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn slotgen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn slotgen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a single-line prompt.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slotgen_prompt_parse(text: *const c_char, out: *mut *mut SlotgenPrompt) -> SlotgenStatus {
    guard(|| {
        let t = cstr(text, "text")?;
        let p = parse_prompt(t).map_err(|e| Fail(SlotgenStatus::Parse, e.to_string()))?;
        put(out, SlotgenPrompt(p))
    })
}

/// Renders a prompt to its canonical single-line form.
///
/// # Safety
/// `prompt` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slotgen_prompt_render(prompt: *const SlotgenPrompt, out: *mut *mut c_char) -> SlotgenStatus {
    guard(|| {
        let p = prompt.as_ref().ok_or_else(|| null("prompt"))?;
        put_string(out, p.0.render())
    })
}

/// # Safety
/// `prompt` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn slotgen_prompt_free(prompt: *mut SlotgenPrompt) {
    if !prompt.is_null() {
        drop(Box::from_raw(prompt));
    }
}

/// Checks a generated output against its prompt. `*passed` is set, and
/// `*reason` receives the reason code on failure or null on success.
///
/// # Safety
/// `prompt` must be a live handle, `output` nul-terminated, and both out
/// pointers writable.
#[no_mangle]
pub unsafe extern "C" fn slotgen_valid_filter(
    prompt: *const SlotgenPrompt,
    output: *const c_char,
    passed: *mut bool,
    reason: *mut *mut c_char,
) -> SlotgenStatus {
    guard(|| {
        let p = prompt.as_ref().ok_or_else(|| null("prompt"))?;
        let o = cstr(output, "output")?;
        if passed.is_null() || reason.is_null() {
            return Err(null("out"));
        }
        let v = valid_filter(o, &p.0);
        *passed = v.passed;
        match v.reason {
            Some(r) => put_string(reason, r.code().to_owned()),
            None => {
                *reason = ptr::null_mut();
                Ok(())
            }
        }
    })
}

/// Parses bracket text into `{"tokens": [...], "spans": [{"number", "start",
/// "end"}]}`.
///
/// # Safety
/// `text` must be nul-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slotgen_bracket_parse(text: *const c_char, out_json: *mut *mut c_char) -> SlotgenStatus {
    guard(|| {
        let t = cstr(text, "text")?;
        let parsed = parse_bracket(t).map_err(|e| Fail(SlotgenStatus::Parse, e.to_string()))?;
        let spans: Vec<Value> = parsed
            .spans
            .iter()
            .map(|s| json!({"number": s.number, "start": s.start, "end": s.end}))
            .collect();
        put_string(out_json, json!({"tokens": parsed.tokens, "spans": spans}).to_string())
    })
}

/// Loads a JSONL corpus.
///
/// # Safety
/// `path` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slotgen_corpus_load(path: *const c_char, out: *mut *mut SlotgenCorpus) -> SlotgenStatus {
    guard(|| {
        let p = cstr(path, "path")?;
        let c = load_corpus(p, CorpusFormat::Jsonl).map_err(|e| {
            let status = if matches!(e, slotgen::corpus::LoadError::Io { .. }) {
                SlotgenStatus::Io
            } else {
                SlotgenStatus::Parse
            };
            Fail(status, e.to_string())
        })?;
        put(out, SlotgenCorpus(c))
    })
}

/// Row count, or 0 for null.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn slotgen_corpus_len(corpus: *const SlotgenCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `corpus` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn slotgen_corpus_free(corpus: *mut SlotgenCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Few-shot split of `intent` with `k` starters, as JSON with `starters`,
/// `remainder`, `others` and `uncovered`.
///
/// # Safety
/// `corpus` must be a live handle, `intent` nul-terminated and `out_json`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn slotgen_nifs_split(
    corpus: *const SlotgenCorpus,
    intent: *const c_char,
    k: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> SlotgenStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let mut cfg = NifsConfig::new(cstr(intent, "intent")?, seed);
        cfg.k_starters = k;
        let split = nifs_split(&c.0, &cfg).map_err(|e| Fail(SlotgenStatus::InvalidArgument, e.to_string()))?;
        put_string(out_json, serde_json::to_string(&split).expect("split serializes"))
    })
}

/// Evaluates a JSON array of `{reference, hypothesis}` pairs. `target_intent`
/// may be null.
///
/// # Safety
/// `pairs_json` must be nul-terminated, `target_intent` null or
/// nul-terminated, and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn slotgen_evaluate(
    pairs_json: *const c_char,
    target_intent: *const c_char,
    out_json: *mut *mut c_char,
) -> SlotgenStatus {
    guard(|| {
        let pairs: Vec<PredictionPair> = serde_json::from_str(cstr(pairs_json, "pairs_json")?)
            .map_err(|e| Fail(SlotgenStatus::Parse, e.to_string()))?;
        let target = if target_intent.is_null() {
            None
        } else {
            Some(cstr(target_intent, "target_intent")?)
        };
        let report = eval_report(&pairs, target).map_err(|e| Fail(SlotgenStatus::InvalidArgument, e.to_string()))?;
        put_string(out_json, serde_json::to_string(&report).expect("report serializes"))
    })
}
