//! Test suite execution.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::mem::take;

use super::{ErrorKind, ExpansionEvent, GuardEvent, Hooks, Interpreter, RuntimeConfig, Session};
use crate::host::ModuleHost;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Assertion {
    pub ok: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct TestResult {
    pub path: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    /// Runtime error that ended the test module, if any.
    pub error: Option<String>,
    /// Lines written by `print`.
    pub output: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct TestReport {
    pub tests: Vec<TestResult>,
    /// Markers appended by `exec`, `execSync` and `spawn`, in call order.
    pub side_effect_log: Vec<String>,
    pub expansion_events: Vec<ExpansionEvent>,
    pub guard_events: Vec<GuardEvent>,
    /// Builtin whose guard check stopped the run under exit mode.
    pub guard_exit: Option<String>,
    /// Filled in by callers that own a clock.
    pub wall_time_ms: f64,
}

impl TestReport {
    pub fn pass_fail(&self) -> Vec<bool> {
        self.tests.iter().map(|t| t.passed).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.guard_exit.is_none() && self.tests.iter().all(|t| t.passed)
    }

    pub fn failed(&self) -> usize {
        self.tests.iter().filter(|t| !t.passed).count()
    }

    /// Bytes fetched on first fetches, the quantity added to the stubbed
    /// size to get the expanded size.
    pub fn first_fetch_bytes(&self) -> u64 {
        self.expansion_events.iter().filter(|e| !e.cache_hit).map(|e| e.bytes_loaded).sum()
    }
}

/// Runs each test module in a fresh interpreter. Assertion failures and
/// runtime errors are recorded per test; a guard exit stops the suite.
pub fn run_tests(host: &dyn ModuleHost, tests: &[String], config: &RuntimeConfig, hooks: &mut dyn Hooks) -> TestReport {
    let mut report = TestReport::default();
    let mut session = Session::default();
    for t in tests {
        session.test = t.clone();
        let mut interp = Interpreter::new(host, &mut *hooks, config.clone());
        interp.session = take(&mut session);
        let r = interp.run_module(t).map(|_| ());
        let assertions = take(&mut interp.assertions);
        let output = take(&mut interp.output);
        session = take(&mut interp.session);
        drop(interp);
        let mut guard_exit = None;
        let error = match r {
            Ok(()) => None,
            Err(e) => {
                if let ErrorKind::GuardExit(name) = &e.kind {
                    guard_exit = Some(name.clone());
                }
                Some(e.to_string())
            }
        };
        let passed = error.is_none() && assertions.iter().all(|a| a.ok);
        report.tests.push(TestResult { path: t.clone(), passed, assertions, error, output });
        if guard_exit.is_some() {
            report.guard_exit = guard_exit;
            break;
        }
    }
    report.side_effect_log = session.side_effects;
    report.expansion_events = session.expansions;
    report.guard_events = session.guard_events;
    report
}
