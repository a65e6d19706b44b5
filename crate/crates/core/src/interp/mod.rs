//! Tree-walking evaluator with module loading, builtins, stub runtime
//! support and instrumentation hooks.

mod builtins;
mod eval;
mod modules;
mod runner;
pub mod value;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::host::{HostError, ModuleHost};
use crate::lang::ast::Stmt;
use crate::lang::{LangError, ParseError};
use crate::stubbify::CodeStore;

pub use modules::{ModuleExports, ModuleInstance};
pub use runner::{run_tests, Assertion, TestReport, TestResult};
use value::{Env, Native, NativeData, NativeKind, Scope};
pub use value::{Function, Object, Value};

/// Builtins that guarded code must not reach.
pub const DANGEROUS_BUILTINS: [&str; 4] = ["eval", "exec", "execSync", "spawn"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GuardMode {
    #[default]
    Off,
    Warn,
    Exit,
}

impl GuardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GuardMode::Off => "off",
            GuardMode::Warn => "warn",
            GuardMode::Exit => "exit",
        }
    }

    pub fn parse(s: &str) -> Option<GuardMode> {
        Some(match s {
            "off" => GuardMode::Off,
            "warn" => GuardMode::Warn,
            "exit" => GuardMode::Exit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardPolicy {
    pub mode: GuardMode,
    pub dangerous_names: BTreeSet<String>,
}

impl GuardPolicy {
    pub fn new(mode: GuardMode) -> GuardPolicy {
        GuardPolicy { mode, dangerous_names: DANGEROUS_BUILTINS.iter().map(|s| s.to_string()).collect() }
    }
}

impl Default for GuardPolicy {
    fn default() -> Self {
        GuardPolicy::new(GuardMode::Off)
    }
}

/// Everything the interpreter needs to expand stubs of one stubbified
/// package.
#[derive(Debug, Clone)]
pub struct StubRuntime {
    /// Root of the stubbified package; distinguishes runtimes.
    pub id: String,
    pub prelude: Rc<Vec<Stmt>>,
    pub store: CodeStore,
    pub guard_mode: GuardMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ExpansionKind {
    File,
    Function,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct ExpansionEvent {
    pub seq: u64,
    /// Test file during whose execution the fetch happened.
    pub test: String,
    pub kind: ExpansionKind,
    pub id: String,
    pub bytes_loaded: u64,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct GuardEvent {
    pub test: String,
    /// Builtin the checked value is identical to.
    pub name: String,
    pub mode: GuardMode,
}

/// Observation points. Implementations must not influence evaluation.
pub trait Hooks {
    fn on_function_enter(&mut self, _uid: &str) {}
    fn on_module_instantiate(&mut self, _path: &str) {}
    fn on_stub_expansion(&mut self, _event: &ExpansionEvent) {}
    fn on_guard_event(&mut self, _event: &GuardEvent) {}
}

pub struct NoHooks;

impl Hooks for NoHooks {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeConfig {
    pub max_call_depth: usize,
    /// Statement and call budget per test module.
    pub max_steps: u64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig { max_call_depth: 400, max_steps: 20_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErrorKind {
    Runtime,
    NotCallable,
    Parse(ParseError),
    /// `import`/`export` inside evaluated code.
    EvalImport,
    Cycle(Vec<String>),
    Host(HostError),
    /// A guard check failed under exit mode.
    GuardExit(String),
    Limit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub message: String,
    /// Innermost call first.
    pub trace: Vec<String>,
}

impl RuntimeError {
    pub fn is_guard_exit(&self) -> bool {
        matches!(self.kind, ErrorKind::GuardExit(_))
    }
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        for t in &self.trace {
            write!(f, "\n    at {}", t)?;
        }
        Ok(())
    }
}

pub type Result<T> = core::result::Result<T, RuntimeError>;

/// Counters and logs that outlive one interpreter: a test suite runs each
/// test file in a fresh interpreter but reports them together.
#[derive(Debug, Default, Clone)]
pub struct Session {
    pub test: String,
    pub seq: u64,
    /// Store keys fetched so far in this suite (runtime id + key).
    pub fetched: BTreeSet<(String, String)>,
    pub expansions: Vec<ExpansionEvent>,
    pub guard_events: Vec<GuardEvent>,
    pub side_effects: Vec<String>,
}

enum ModuleState {
    Loading,
    Ready(Rc<ModuleInstance>),
}

struct Frame {
    label: String,
}

pub struct Interpreter<'a> {
    host: &'a dyn ModuleHost,
    hooks: &'a mut dyn Hooks,
    config: RuntimeConfig,
    guard: GuardPolicy,
    global: Env,
    /// Identity table of the dangerous builtin values.
    dangerous: Vec<(String, Rc<Native>)>,
    guard_check: Value,
    guard_call: Value,
    modules: BTreeMap<String, ModuleState>,
    loading: Vec<String>,
    eval_cache: BTreeMap<String, Rc<Vec<Stmt>>>,
    preludes: BTreeMap<String, Value>,
    stack: Vec<Frame>,
    steps: u64,
    module_envs: Vec<Env>,
    /// Function-store fetches per key in this interpreter.
    fetch_counts: BTreeMap<String, u32>,
    pub session: Session,
    pub output: Vec<String>,
    pub assertions: Vec<Assertion>,
}

impl<'a> Interpreter<'a> {
    pub fn new(host: &'a dyn ModuleHost, hooks: &'a mut dyn Hooks, config: RuntimeConfig) -> Interpreter<'a> {
        let mut guard = GuardPolicy::new(host.guard_mode());
        if guard.mode == GuardMode::Off {
            guard.dangerous_names.clear();
        }
        Interpreter::with_guard(host, hooks, config, guard)
    }

    pub fn with_guard(
        host: &'a dyn ModuleHost,
        hooks: &'a mut dyn Hooks,
        config: RuntimeConfig,
        guard: GuardPolicy,
    ) -> Interpreter<'a> {
        let global = Scope::root();
        let mut dangerous = Vec::new();
        for kind in [
            NativeKind::Print,
            NativeKind::Assert,
            NativeKind::Len,
            NativeKind::Str,
            NativeKind::Push,
            NativeKind::Keys,
            NativeKind::Eval,
            NativeKind::Exec,
            NativeKind::ExecSync,
            NativeKind::Spawn,
        ] {
            let n = Native::new(kind, NativeData::None);
            if DANGEROUS_BUILTINS.contains(&kind.name()) {
                dangerous.push((kind.name().to_string(), n.clone()));
            }
            global.declare(kind.name(), Some(Value::Native(n)));
        }
        Interpreter {
            host,
            hooks,
            config,
            guard,
            global,
            dangerous,
            guard_check: Value::Native(Native::new(NativeKind::GuardCheck, NativeData::None)),
            guard_call: Value::Native(Native::new(NativeKind::GuardCall, NativeData::None)),
            modules: BTreeMap::new(),
            loading: Vec::new(),
            eval_cache: BTreeMap::new(),
            preludes: BTreeMap::new(),
            stack: Vec::new(),
            steps: 0,
            module_envs: Vec::new(),
            fetch_counts: BTreeMap::new(),
            session: Session::default(),
            output: Vec::new(),
            assertions: Vec::new(),
        }
    }

    pub fn guard_policy(&self) -> &GuardPolicy {
        &self.guard
    }

    /// Number of `__stubFetch` calls per function-store key so far.
    pub fn fetch_counts(&self) -> &BTreeMap<String, u32> {
        &self.fetch_counts
    }

    /// Evaluates `code` as a statement list in a fresh child of the global
    /// scope, like `eval` at top level.
    pub fn eval_source(&mut self, code: &str) -> Result<Value> {
        let env = Scope::function(&self.global, Value::Null);
        self.eval_in_scope(code, &env)
    }

    pub(crate) fn error(&self, kind: ErrorKind, message: impl Into<String>) -> RuntimeError {
        RuntimeError {
            kind,
            message: message.into(),
            trace: self.stack.iter().rev().map(|f| f.label.clone()).collect(),
        }
    }

    pub(crate) fn rt_error(&self, message: impl Into<String>) -> RuntimeError {
        self.error(ErrorKind::Runtime, message)
    }

    fn step(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > self.config.max_steps {
            return Err(self.error(ErrorKind::Limit, "step limit exceeded"));
        }
        Ok(())
    }
}

impl Drop for Interpreter<'_> {
    fn drop(&mut self) {
        for env in self.module_envs.drain(..) {
            env.clear();
        }
        self.global.clear();
    }
}

impl From<LangError> for ErrorKind {
    fn from(e: LangError) -> Self {
        match e {
            LangError::Parse { error, .. } => ErrorKind::Parse(error),
            other => ErrorKind::Host(HostError::Lang(other)),
        }
    }
}
