//! Stub planning and generation: classifies the files and functions of a
//! package against a reachability set, replaces unreachable ones with
//! self-expanding stubs and records their original code in a store.

mod emit;
mod guard;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use emit::{emit_file_stub, emit_function_stub, function_stub_body, prelude_text, stored_function_text, FileStub};
pub use guard::apply_guards;

use crate::callgraph::ReachabilitySet;
use crate::host::{path, HostError, MemHost, ModuleHost};
use crate::interp::{GuardMode, StubRuntime};
use crate::lang::ast::*;
use crate::lang::printer::print_function_at;
use crate::lang::visit::{self, VisitorMut};
use crate::lang::{self, Module};

pub const PRELUDE_FILE: &str = "stubs.prelude.mm";
pub const STORE_FILE: &str = "stubs.store.json";
/// Binding through which stubs reach the runtime.
pub const STUBS_BINDING: &str = "stubs";

/// Original source text of stubbed functions (keyed by uid) and files
/// (keyed by path).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CodeStore {
    pub guarded: bool,
    pub entries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubError {
    /// The reachability set names a function the package does not have.
    RevisionMismatch { uid: String },
    Unstubbable { uid: String },
    /// An analysed file lies outside the package root.
    OutsideRoot { path: String },
    /// User code binds the name reserved for the stub runtime.
    ReservedName { path: String, name: String },
    Host(HostError),
}

impl fmt::Display for StubError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StubError::RevisionMismatch { uid } => {
                write!(f, "reachability set does not match the package: unknown function {}", uid)
            }
            StubError::Unstubbable { uid } => write!(f, "constructor {} cannot be stubbed", uid),
            StubError::OutsideRoot { path } => write!(f, "{} lies outside the package root", path),
            StubError::ReservedName { path, name } => write!(f, "{} uses the reserved name {}", path, name),
            StubError::Host(e) => write!(f, "{}", e),
        }
    }
}

impl From<HostError> for StubError {
    fn from(e: HostError) -> Self {
        StubError::Host(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StubOptions {
    pub guard: GuardMode,
    /// Stub every stubbable candidate regardless of size.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct StubPlan {
    pub file_stubs: Vec<String>,
    pub function_stubs: Vec<String>,
    /// Uids and paths whose stub would not be smaller than the original.
    pub skipped_too_small: Vec<String>,
    pub skipped_annotated: Vec<String>,
    pub skipped_unstubbable: Vec<String>,
    pub guard_mode: GuardMode,
}

/// Package-relative path of a host path.
fn rel<'a>(p: &'a str, root: &str) -> &'a str {
    path::strip_root(p, root)
}

struct Planner<'a> {
    reachable: &'a BTreeSet<String>,
    force: bool,
    plan: &'a mut StubPlan,
}

impl Planner<'_> {
    fn stmts(&mut self, stmts: &[Stmt], indent: usize) {
        for s in stmts {
            self.stmt(s, indent);
        }
    }

    fn stmt(&mut self, s: &Stmt, indent: usize) {
        match &s.kind {
            StmtKind::Let { init, .. } => self.expr(init, indent),
            StmtKind::Assign { target, value } => {
                self.expr(target, indent);
                self.expr(value, indent);
            }
            StmtKind::Expr(e) | StmtKind::ExportDefault(e) => self.expr(e, indent),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e, indent);
                }
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.expr(cond, indent);
                self.stmts(&then_block.stmts, indent + 1);
                if let Some(b) = else_block {
                    self.stmts(&b.stmts, indent + 1);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond, indent);
                self.stmts(&body.stmts, indent + 1);
            }
            StmtKind::Function(f) | StmtKind::ExportFunction(f) => self.function(f, indent, false),
            StmtKind::Class(c) => {
                for m in &c.members {
                    self.function(m, indent + 1, true);
                }
            }
            StmtKind::Import { .. } | StmtKind::ExportNamed(_) => {}
        }
    }

    fn expr(&mut self, e: &Expr, indent: usize) {
        struct Finder<'p, 'a> {
            p: &'p mut Planner<'a>,
            indent: usize,
        }
        impl visit::Visitor for Finder<'_, '_> {
            fn visit_function(&mut self, f: &Rc<FunctionDef>) {
                self.p.function(f, self.indent, false);
            }
        }
        visit::Visitor::visit_expr(&mut Finder { p: self, indent }, e);
    }

    /// Outermost unreachable functions that pass the filters become stubs;
    /// filtered or reachable ones are searched for nested candidates.
    fn function(&mut self, f: &Rc<FunctionDef>, indent: usize, in_class: bool) {
        let descend = |p: &mut Self| p.stmts(&f.body, indent + 1);
        if self.reachable.contains(&f.uid) {
            return descend(self);
        }
        if f.kind == FunctionKind::Constructor {
            self.plan.skipped_unstubbable.push(f.uid.clone());
            return descend(self);
        }
        if f.annotations.stub_ignore {
            self.plan.skipped_annotated.push(f.uid.clone());
            return descend(self);
        }
        if !self.force {
            let stub = emit_function_stub(f).expect("not a constructor");
            let stub_len = print_function_at(&stub, indent, in_class).len();
            let orig_len = print_function_at(f, indent, in_class).len();
            if stub_len >= orig_len {
                self.plan.skipped_too_small.push(f.uid.clone());
                return descend(self);
            }
        }
        self.plan.function_stubs.push(f.uid.clone());
    }
}

/// Closure files as (host path, parsed module), checking that every one
/// lies under `root`.
fn closure_modules(host: &MemHost, root: &str) -> Result<Vec<(String, Rc<Module>)>, StubError> {
    let mut out = Vec::new();
    for p in host.analyzed_closure(root)? {
        if !path::is_under(&p, root) {
            return Err(StubError::OutsideRoot { path: p });
        }
        let m = host.load(&p)?;
        out.push((p, m));
    }
    Ok(out)
}

/// Classifies every analysed file and function. Uids and paths in the plan
/// are host paths, which equal package-relative paths when the package is
/// the host root.
pub fn plan_stubs(host: &MemHost, root: &str, rs: &ReachabilitySet, opts: &StubOptions) -> Result<StubPlan, StubError> {
    let modules = closure_modules(host, root)?;
    plan_modules(&modules, rs, opts)
}

pub(crate) fn plan_modules(
    modules: &[(String, Rc<Module>)],
    rs: &ReachabilitySet,
    opts: &StubOptions,
) -> Result<StubPlan, StubError> {
    let mut known = BTreeSet::new();
    for (_, m) in modules {
        for f in lang::functions_of(m) {
            known.insert(f.uid.clone());
        }
    }
    if let Some(uid) = rs.reachable_functions.iter().find(|u| !known.contains(*u)) {
        return Err(StubError::RevisionMismatch { uid: uid.clone() });
    }
    let mut plan = StubPlan { guard_mode: opts.guard, ..StubPlan::default() };
    for (p, m) in modules {
        let fs = lang::functions_of(m);
        let file_unreached = !fs.iter().any(|f| rs.reachable_functions.contains(&f.uid))
            && !rs.reachable_files.contains(p)
            && !fs.iter().any(|f| f.annotations.stub_ignore);
        if file_unreached {
            let stub = emit_file_stub(m, p);
            if opts.force || stub.stub_text.len() < lang::print_module(m).len() {
                plan.file_stubs.push(p.clone());
            } else {
                plan.skipped_too_small.push(p.clone());
            }
            continue;
        }
        let mut planner = Planner { reachable: &rs.reachable_functions, force: opts.force, plan: &mut plan };
        planner.stmts(&m.items, 0);
    }
    Ok(plan)
}

struct Replacer<'a> {
    stubs: &'a BTreeSet<String>,
    /// Stored text per replaced uid.
    stored: BTreeMap<String, String>,
}

impl VisitorMut for Replacer<'_> {
    fn visit_function_mut(&mut self, f: &mut Rc<FunctionDef>) {
        if self.stubs.contains(&f.uid) {
            self.stored.insert(f.uid.clone(), stored_function_text(f));
            let stub = emit_function_stub(f).expect("planned stubs are stubbable");
            *f = Rc::new(stub);
        } else {
            visit::walk_function_mut(self, f);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FileTreatment {
    Kept,
    FunctionStubs,
    FileStub,
    Prelude,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct FileSize {
    pub path: String,
    pub original_bytes: u64,
    pub stubbed_bytes: u64,
    pub treatment: FileTreatment,
}

/// Sizes in canonical-printed bytes.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct SizeReport {
    pub original_bytes: u64,
    pub stubbed_bytes: u64,
    pub reduction_pct: f64,
    pub per_file: Vec<FileSize>,
    /// Expanded size over a set of client runs, `[min, max]`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub expanded_bytes_range: Option<[u64; 2]>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub reduction_after_expansion_range: Option<[f64; 2]>,
}

pub fn reduction_pct(original: u64, stubbed: u64) -> f64 {
    if original == 0 {
        0.0
    } else {
        100.0 * (1.0 - stubbed as f64 / original as f64)
    }
}

impl SizeReport {
    pub fn from_files(per_file: Vec<FileSize>) -> SizeReport {
        let original_bytes = per_file.iter().map(|f| f.original_bytes).sum();
        let stubbed_bytes = per_file.iter().map(|f| f.stubbed_bytes).sum();
        SizeReport {
            original_bytes,
            stubbed_bytes,
            reduction_pct: reduction_pct(original_bytes, stubbed_bytes),
            per_file,
            expanded_bytes_range: None,
            reduction_after_expansion_range: None,
        }
    }

    /// Expanded size of one run: stubbed size plus first-fetch bytes.
    pub fn expanded_bytes(&self, first_fetch_bytes: u64) -> u64 {
        self.stubbed_bytes + first_fetch_bytes
    }

    /// Records the expanded-size range over client runs given each run's
    /// first-fetch byte total.
    pub fn set_expansions(&mut self, first_fetch_bytes: &[u64]) {
        let expanded: Vec<u64> = first_fetch_bytes.iter().map(|b| self.expanded_bytes(*b)).collect();
        if let (Some(&lo), Some(&hi)) = (expanded.iter().min(), expanded.iter().max()) {
            self.expanded_bytes_range = Some([lo, hi]);
            // Larger expansion means smaller reduction.
            self.reduction_after_expansion_range =
                Some([reduction_pct(self.original_bytes, hi), reduction_pct(self.original_bytes, lo)]);
        }
    }
}

/// Result of stubbifying a package, still in memory.
#[derive(Debug, Clone)]
pub struct StubbedPackage {
    pub root: String,
    /// Transformed closure sources by host path.
    pub sources: BTreeMap<String, String>,
    pub prelude: String,
    pub store: CodeStore,
    pub plan: StubPlan,
    pub sizes: SizeReport,
}

impl StubbedPackage {
    /// Host path of the prelude file.
    pub fn prelude_path(&self) -> String {
        path::join(&self.root, PRELUDE_FILE)
    }

    /// The same package as seen from a host where its root is `root`.
    /// Stub keys are unchanged, so the store stays valid.
    pub fn relocate(&self, root: &str) -> StubbedPackage {
        let root = path::normalize(root);
        let sources = self
            .sources
            .iter()
            .map(|(p, text)| (path::join(&root, path::strip_root(p, &self.root)), text.clone()))
            .collect();
        StubbedPackage { root, sources, ..self.clone() }
    }

    /// A host in which the package is replaced by its stubbified form:
    /// every other file and package is shared with `original`.
    pub fn install(&self, original: &MemHost) -> MemHost {
        let mut h = MemHost::new();
        for (p, text) in original.files() {
            h.add_file(p, self.sources.get(p).map(|s| s.as_str()).unwrap_or(text));
        }
        for (p, text) in &self.sources {
            if original.file(p).is_none() {
                h.add_file(p, text);
            }
        }
        h.add_file(&self.prelude_path(), &self.prelude);
        for e in original.packages() {
            let mut m = e.manifest.clone();
            if e.root == self.root {
                m.stubbed = true;
                m.guard_mode = Some(self.plan.guard_mode);
            }
            h.add_package(&e.root, m);
        }
        h.set_stub_runtime(&self.root, self.runtime().expect("prelude parses"));
        h
    }

    pub fn runtime(&self) -> Result<StubRuntime, lang::LangError> {
        runtime_for(&self.root, &self.prelude, self.store.clone(), self.plan.guard_mode)
    }
}

pub fn runtime_for(root: &str, prelude: &str, store: CodeStore, guard_mode: GuardMode) -> Result<StubRuntime, lang::LangError> {
    let prelude_path = path::join(root, PRELUDE_FILE);
    let stmts = lang::parse(prelude, &prelude_path)?.items;
    Ok(StubRuntime { id: root.to_string(), prelude: Rc::new(stmts), store, guard_mode })
}

/// The prelude and its size row; a plan without stubs needs neither.
pub(crate) fn prelude_for(plan: &StubPlan) -> (String, Option<FileSize>) {
    if plan.file_stubs.is_empty() && plan.function_stubs.is_empty() {
        return (String::new(), None);
    }
    let prelude = prelude_text();
    let row = FileSize {
        path: PRELUDE_FILE.into(),
        original_bytes: 0,
        stubbed_bytes: prelude.len() as u64,
        treatment: FileTreatment::Prelude,
    };
    (prelude, Some(row))
}

/// Parses, plans and transforms the package at `root`.
pub fn stubbify_package(
    host: &MemHost,
    root: &str,
    rs: &ReachabilitySet,
    opts: &StubOptions,
) -> Result<StubbedPackage, StubError> {
    let root = path::normalize(root);
    let modules = closure_modules(host, &root)?;
    for (p, m) in &modules {
        if lang::scope::all_names(&m.items).contains(STUBS_BINDING) {
            return Err(StubError::ReservedName { path: p.clone(), name: STUBS_BINDING.into() });
        }
    }
    let plan = plan_modules(&modules, rs, opts)?;
    let (sources, store, per_file) = transform_modules(&modules, &plan, opts)?;
    let (prelude, row) = prelude_for(&plan);
    let mut per_file = per_file;
    per_file.extend(row);
    for f in per_file.iter_mut() {
        if f.treatment != FileTreatment::Prelude {
            f.path = rel(&f.path, &root).to_string();
        }
    }
    Ok(StubbedPackage { root, sources, prelude, store, plan, sizes: SizeReport::from_files(per_file) })
}

type Transformed = (BTreeMap<String, String>, CodeStore, Vec<FileSize>);

pub(crate) fn transform_modules(
    modules: &[(String, Rc<Module>)],
    plan: &StubPlan,
    opts: &StubOptions,
) -> Result<Transformed, StubError> {
    let file_stubs: BTreeSet<String> = plan.file_stubs.iter().cloned().collect();
    let fn_stubs: BTreeSet<String> = plan.function_stubs.iter().cloned().collect();
    let guarded = opts.guard != GuardMode::Off;
    let mut store = CodeStore { guarded, entries: BTreeMap::new() };
    let mut sources = BTreeMap::new();
    let mut per_file = Vec::new();
    let put = |store: &mut CodeStore, key: String, text: String| -> Result<(), StubError> {
        let text = if guarded {
            apply_guards(&text).map_err(|error| {
                StubError::Host(HostError::Lang(lang::LangError::Parse { path: key.clone(), error }))
            })?
        } else {
            text
        };
        store.entries.insert(key, text);
        Ok(())
    };
    for (p, m) in modules {
        let original = lang::print_module(m);
        let (text, treatment) = if file_stubs.contains(p) {
            let fs = emit_file_stub(m, p);
            put(&mut store, p.clone(), fs.stored_text)?;
            (fs.stub_text, FileTreatment::FileStub)
        } else {
            let mut items = m.items.clone();
            let mut r = Replacer { stubs: &fn_stubs, stored: BTreeMap::new() };
            visit::walk_stmts_mut(&mut r, &mut items);
            if r.stored.is_empty() {
                (original.clone(), FileTreatment::Kept)
            } else {
                for (uid, text) in r.stored {
                    put(&mut store, uid, text)?;
                }
                (lang::print_stmts(&items), FileTreatment::FunctionStubs)
            }
        };
        per_file.push(FileSize {
            path: p.clone(),
            original_bytes: original.len() as u64,
            stubbed_bytes: text.len() as u64,
            treatment,
        });
        sources.insert(p.clone(), text);
    }
    Ok((sources, store, per_file))
}

#[cfg(test)]
mod tests;
