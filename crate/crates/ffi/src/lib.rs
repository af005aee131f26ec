//! C ABI over `sae_core`.
//!
//! Objects cross the boundary as opaque pointers, each released by the
//! matching `sae_*_free`. Every
//! fallible call returns an `SaeStatus`; on failure `sae_last_error()` holds
//! a message for the calling thread. Strings returned as `char *` are owned
//! by the caller and released with `sae_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sae_core::explorer::{explore, Bounds, Exploration, Property, Setup};
use sae_core::mode::ModeFlags;
use sae_core::scenarios::{by_name, run_and_check, Report, Scenario};
use sae_core::verdict::Verdict;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    UnknownScenario = 3,
    InvalidScenario = 4,
    InvalidArgument = 5,
    SimulationFailed = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Explorer verdict as a C enum.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaeVerdict {
    Pass = 0,
    Fail = 1,
    BoundReached = 2,
}

impl From<Verdict> for SaeVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => SaeVerdict::Pass,
            Verdict::Fail => SaeVerdict::Fail,
            Verdict::BoundReached => SaeVerdict::BoundReached,
        }
    }
}

/// A scenario: devices, SME script, adversary script, expectations.
pub struct SaeScenario(Scenario);

/// A finished run with its trace and expectation outcomes.
pub struct SaeReport(Report);

/// Explorer verdicts for a list of properties.
pub struct SaeExploration(Exploration);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

struct Fail(SaeStatus, String);

type Res<T> = Result<T, Fail>;

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Res<()>) -> SaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SaeStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            SaeStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(Fail(SaeStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SaeStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| Fail(SaeStatus::NullArgument, format!("{what} is null")))
}

unsafe fn obj_mut<'a, T>(p: *mut T, what: &str) -> Res<&'a mut T> {
    p.as_mut().ok_or_else(|| Fail(SaeStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Res<()> {
    if out.is_null() {
        return Err(Fail(SaeStatus::NullArgument, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sae_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sae_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sae_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Looks up a built-in scenario by name.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_scenario_builtin(name: *const c_char, out: *mut *mut SaeScenario) -> SaeStatus {
    guard(|| {
        let name = text(name, "name")?;
        let s = by_name(name).ok_or_else(|| Fail(SaeStatus::UnknownScenario, format!("unknown scenario `{name}`")))?;
        put(out, SaeScenario(s))
    })
}

/// Parses a scenario from TOML.
///
/// # Safety
/// `toml` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_scenario_from_toml(toml: *const c_char, out: *mut *mut SaeScenario) -> SaeStatus {
    guard(|| {
        let s = Scenario::from_toml(text(toml, "toml")?).map_err(|e| Fail(SaeStatus::InvalidScenario, e.to_string()))?;
        put(out, SaeScenario(s))
    })
}

/// Serialises a scenario to TOML.
///
/// # Safety
/// `s` must be a live scenario; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_scenario_to_toml(s: *const SaeScenario, out: *mut *mut c_char) -> SaeStatus {
    guard(|| {
        let s = obj(s, "scenario")?;
        if out.is_null() {
            return Err(Fail(SaeStatus::NullArgument, "output pointer is null".into()));
        }
        *out = owned(s.0.to_toml());
        Ok(())
    })
}

/// Selects a preset, `spec2020` or `patched`, dropping flag overrides.
///
/// # Safety
/// `s` must be a live scenario; `preset` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sae_scenario_set_mode(s: *mut SaeScenario, preset: *const c_char) -> SaeStatus {
    guard(|| {
        let s = obj_mut(s, "scenario")?;
        let p = text(preset, "preset")?;
        let m = ModeFlags::preset(p).ok_or_else(|| Fail(SaeStatus::InvalidArgument, format!("unknown mode `{p}`")))?;
        s.0.set_mode(m);
        Ok(())
    })
}

/// Sets one mode flag on top of the current mode.
///
/// # Safety
/// `s` must be a live scenario; `flag` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sae_scenario_set_flag(s: *mut SaeScenario, flag: *const c_char, value: bool) -> SaeStatus {
    guard(|| {
        let s = obj_mut(s, "scenario")?;
        let mut m = s.0.mode_flags().map_err(|e| Fail(SaeStatus::InvalidScenario, e.to_string()))?;
        m.set(text(flag, "flag")?, value).map_err(|e| Fail(SaeStatus::InvalidArgument, e))?;
        s.0.set_mode(m);
        Ok(())
    })
}

/// # Safety
/// `s` must be a live scenario.
#[no_mangle]
pub unsafe extern "C" fn sae_scenario_set_seed(s: *mut SaeScenario, seed: u64) -> SaeStatus {
    guard(|| {
        obj_mut(s, "scenario")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sae_scenario_free(s: *mut SaeScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs a scenario through the simulator and checks its expectations.
///
/// # Safety
/// `s` must be a live scenario; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_run(s: *const SaeScenario, out: *mut *mut SaeReport) -> SaeStatus {
    guard(|| {
        let s = obj(s, "scenario")?;
        let r = run_and_check(&s.0).map_err(|e| Fail(SaeStatus::SimulationFailed, e.to_string()))?;
        put(out, SaeReport(r))
    })
}

/// Whether every expectation for the run's mode held.
///
/// # Safety
/// `r` must be a live report; `holds` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_report_holds(r: *const SaeReport, holds: *mut bool) -> SaeStatus {
    guard(|| {
        let r = obj(r, "report")?;
        *obj_mut(holds, "holds")? = r.0.holds();
        Ok(())
    })
}

/// The run's trace as JSON lines.
///
/// # Safety
/// `r` must be a live report; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_report_trace_jsonl(r: *const SaeReport, out: *mut *mut c_char) -> SaeStatus {
    guard(|| {
        let r = obj(r, "report")?;
        *obj_mut(out, "output pointer")? = owned(r.0.trace.to_jsonl());
        Ok(())
    })
}

/// # Safety
/// `r` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sae_report_free(r: *mut SaeReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Explores the scenario's setup. `props` is a comma-separated property
/// list (`all` allowed); `max_states` 0 means the library default.
///
/// # Safety
/// `s` must be a live scenario; `props` a nul-terminated string; `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_explore(
    s: *const SaeScenario,
    props: *const c_char,
    adversary_bound: u32,
    step_bound: u32,
    max_states: usize,
    out: *mut *mut SaeExploration,
) -> SaeStatus {
    guard(|| {
        let s = obj(s, "scenario")?;
        let props = Property::parse_list(text(props, "props")?).map_err(|e| Fail(SaeStatus::InvalidArgument, e))?;
        let mut bounds = Bounds { adversary: adversary_bound, steps: step_bound, ..Bounds::default() };
        if max_states > 0 {
            bounds.max_states = max_states;
        }
        let setup = Setup::new(&s.0).map_err(|e| Fail(SaeStatus::InvalidScenario, e.to_string()))?;
        let e = explore(&setup, &bounds, &props).map_err(|e| Fail(SaeStatus::SimulationFailed, e.to_string()))?;
        put(out, SaeExploration(e))
    })
}

/// Number of property results.
///
/// # Safety
/// `e` must be a live exploration; `n` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_exploration_len(e: *const SaeExploration, n: *mut usize) -> SaeStatus {
    guard(|| {
        let e = obj(e, "exploration")?;
        *obj_mut(n, "n")? = e.0.results.len();
        Ok(())
    })
}

/// Verdict of result `i`.
///
/// # Safety
/// `e` must be a live exploration; `v` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_exploration_verdict(e: *const SaeExploration, i: usize, v: *mut SaeVerdict) -> SaeStatus {
    guard(|| {
        let e = obj(e, "exploration")?;
        let r = e.0.results.get(i).ok_or_else(|| Fail(SaeStatus::OutOfRange, format!("no result {i}")))?;
        *obj_mut(v, "verdict")? = r.result.verdict.into();
        Ok(())
    })
}

/// All results as JSON lines, one object per property.
///
/// # Safety
/// `e` must be a live exploration; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sae_exploration_jsonl(e: *const SaeExploration, out: *mut *mut c_char) -> SaeStatus {
    guard(|| {
        let e = obj(e, "exploration")?;
        let mut s = String::new();
        for r in &e.0.results {
            s.push_str(&r.to_json(None).to_string());
            s.push('\n');
        }
        *obj_mut(out, "output pointer")? = owned(s);
        Ok(())
    })
}

/// # Safety
/// `e` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sae_exploration_free(e: *mut SaeExploration) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(sae_last_error()) }.to_str().unwrap().to_string()
    }

    unsafe fn take(s: *mut c_char) -> String {
        let out = CStr::from_ptr(s).to_str().unwrap().to_string();
        sae_string_free(s);
        out
    }

    #[test]
    fn run_builtin_reflection() {
        unsafe {
            let mut s = ptr::null_mut();
            assert_eq!(sae_scenario_builtin(c("reflection").as_ptr(), &mut s), SaeStatus::Ok);
            assert_eq!(sae_scenario_set_mode(s, c("patched").as_ptr()), SaeStatus::Ok);
            let mut r = ptr::null_mut();
            assert_eq!(sae_run(s, &mut r), SaeStatus::Ok);
            let mut holds = false;
            assert_eq!(sae_report_holds(r, &mut holds), SaeStatus::Ok);
            assert!(holds);
            let mut t = ptr::null_mut();
            assert_eq!(sae_report_trace_jsonl(r, &mut t), SaeStatus::Ok);
            assert!(take(t).contains("Reflected"));
            sae_report_free(r);
            sae_scenario_free(s);
        }
    }

    #[test]
    fn errors_set_status_and_message() {
        unsafe {
            let mut s = ptr::null_mut();
            assert_eq!(sae_scenario_builtin(c("nope").as_ptr(), &mut s), SaeStatus::UnknownScenario);
            assert!(s.is_null());
            assert!(last_error().contains("nope"));
            assert_eq!(sae_scenario_builtin(ptr::null(), &mut s), SaeStatus::NullArgument);
            assert_eq!(sae_scenario_from_toml(c("name = 3").as_ptr(), &mut s), SaeStatus::InvalidScenario);
            assert_eq!(sae_scenario_builtin(c("honest").as_ptr(), &mut s), SaeStatus::Ok);
            assert_eq!(last_error(), "");
            assert_eq!(sae_scenario_set_flag(s, c("nope").as_ptr(), true), SaeStatus::InvalidArgument);
            assert_eq!(sae_scenario_set_mode(s, c("2019").as_ptr()), SaeStatus::InvalidArgument);
            let bad = [0xffu8, 0];
            assert_eq!(sae_scenario_set_mode(s, bad.as_ptr().cast()), SaeStatus::InvalidUtf8);
            assert_eq!(sae_run(ptr::null(), &mut ptr::null_mut()), SaeStatus::NullArgument);
            sae_scenario_free(s);
            sae_scenario_free(ptr::null_mut());
        }
    }

    #[test]
    fn toml_round_trip_and_flags() {
        unsafe {
            let mut s = ptr::null_mut();
            sae_scenario_builtin(c("deadlock").as_ptr(), &mut s);
            assert_eq!(sae_scenario_set_flag(s, c("deadlock_patch").as_ptr(), true), SaeStatus::Ok);
            assert_eq!(sae_scenario_set_seed(s, 5), SaeStatus::Ok);
            let mut t = ptr::null_mut();
            assert_eq!(sae_scenario_to_toml(s, &mut t), SaeStatus::Ok);
            let toml = take(t);
            assert!(toml.contains("deadlock_patch = true"));
            let mut back = ptr::null_mut();
            assert_eq!(sae_scenario_from_toml(c(&toml).as_ptr(), &mut back), SaeStatus::Ok);
            assert_eq!((*back).0.seed, 5);
            sae_scenario_free(back);
            sae_scenario_free(s);
        }
    }

    #[test]
    fn explore_small_bounds() {
        unsafe {
            let mut s = ptr::null_mut();
            sae_scenario_builtin(c("honest").as_ptr(), &mut s);
            let mut e = ptr::null_mut();
            assert_eq!(sae_explore(s, c("single_pi,progress").as_ptr(), 1, 10, 0, &mut e), SaeStatus::Ok);
            let mut n = 0;
            sae_exploration_len(e, &mut n);
            assert_eq!(n, 2);
            let mut v = SaeVerdict::Pass;
            assert_eq!(sae_exploration_verdict(e, 0, &mut v), SaeStatus::Ok);
            assert_eq!(v, SaeVerdict::Pass);
            assert_eq!(sae_exploration_verdict(e, 1, &mut v), SaeStatus::Ok);
            assert_eq!(v, SaeVerdict::Fail);
            assert_eq!(sae_exploration_verdict(e, 2, &mut v), SaeStatus::OutOfRange);
            let mut j = ptr::null_mut();
            sae_exploration_jsonl(e, &mut j);
            assert_eq!(take(j).lines().count(), 2);
            let mut none = ptr::null_mut();
            assert_eq!(sae_explore(s, c("").as_ptr(), 1, 10, 0, &mut none), SaeStatus::InvalidArgument);
            assert!(none.is_null());
            sae_exploration_free(e);
            sae_scenario_free(s);
        }
    }

    #[test]
    fn version_is_static() {
        let v = unsafe { CStr::from_ptr(sae_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
