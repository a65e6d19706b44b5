//! Reachability from a package's tests: dynamic (observed function entry)
//! and static (a worklist fixpoint over references, imports and
//! name-keyed member accesses).

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::host::{HostError, MemHost, ModuleHost};
use crate::interp::{run_tests, Hooks, RuntimeConfig, TestReport};
use crate::lang::ast::*;
use crate::lang::scope::{walk_scoped, Decl, Resolved, ScopeHandler, Scopes};
use crate::lang::Module;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CgMode {
    Static,
    Dynamic,
}

impl CgMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CgMode::Static => "static",
            CgMode::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct ReachabilitySet {
    pub mode: CgMode,
    pub entry_points: Vec<String>,
    pub reachable_files: BTreeSet<String>,
    pub reachable_functions: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WarningKind {
    Eval,
    ComputedMember,
    DynamicRequire,
    UnresolvedSpecifier,
}

/// A construct the static analysis deliberately does not resolve.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Warning {
    pub path: String,
    pub line: u32,
    pub col: u32,
    pub kind: WarningKind,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path, self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CgError {
    Host(HostError),
}

impl fmt::Display for CgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CgError::Host(e) => write!(f, "{}", e),
        }
    }
}

impl From<HostError> for CgError {
    fn from(e: HostError) -> Self {
        CgError::Host(e)
    }
}

/// File part of a uid (`path:line:col`).
pub fn uid_file(uid: &str) -> &str {
    let mut it = uid.rsplitn(3, ':');
    it.next();
    it.next();
    it.next().unwrap_or("")
}

#[derive(Default)]
struct Coverage {
    functions: BTreeSet<String>,
    files: BTreeSet<String>,
}

impl Hooks for Coverage {
    fn on_function_enter(&mut self, uid: &str) {
        if !self.functions.contains(uid) {
            self.functions.insert(uid.to_string());
        }
    }
    fn on_module_instantiate(&mut self, path: &str) {
        self.files.insert(path.to_string());
    }
}

/// Runs the package's tests with coverage hooks. The report is returned so
/// callers can warn about failing tests.
pub fn dynamic_reachability(
    host: &MemHost,
    root: &str,
    config: &RuntimeConfig,
) -> Result<(ReachabilitySet, TestReport), CgError> {
    let closure = host.analyzed_closure(root)?;
    let tests = host.test_paths(root);
    let mut cov = Coverage::default();
    let report = run_tests(host, &tests, config, &mut cov);
    let rs = ReachabilitySet {
        mode: CgMode::Dynamic,
        entry_points: tests,
        reachable_files: cov.files.into_iter().filter(|f| closure.contains(f)).collect(),
        reachable_functions: cov.functions.into_iter().filter(|u| closure.contains(uid_file(u))).collect(),
    };
    Ok((rs, report))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Fact {
    Function(String),
    /// Constructor of a class (R2, R5); `None` when it has none.
    Class(Option<String>),
    Import { from: String, source: String, imported: String },
    Module { from: String, source: String },
    Member(String),
    /// Everything a required ES module exports.
    AllExports { from: String, source: String },
}

#[derive(Default)]
struct Facts {
    facts: BTreeSet<Fact>,
    warnings: Vec<Warning>,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Region {
    TopLevel(String),
    Function(String),
}

struct FileInfo {
    module: Rc<Module>,
    /// Methods, getters and setters by name.
    members: BTreeMap<String, Vec<String>>,
}

struct Extractor<'a> {
    path: &'a str,
    /// Innermost region first is last.
    stack: Vec<String>,
    top: Facts,
    functions: BTreeMap<String, Facts>,
    members: BTreeMap<String, Vec<String>>,
}

impl Extractor<'_> {
    fn current(&mut self) -> &mut Facts {
        match self.stack.last() {
            Some(uid) => self.functions.entry(uid.clone()).or_default(),
            None => &mut self.top,
        }
    }

    fn warn(&mut self, span: Span, kind: WarningKind, message: String) {
        let w = Warning { path: self.path.to_string(), line: span.start_line, col: span.start_col, kind, message };
        self.current().warnings.push(w);
    }
}

impl ScopeHandler for Extractor<'_> {
    fn expr(&mut self, e: &Expr, scopes: &Scopes) {
        match &e.kind {
            ExprKind::Member { property, .. } => {
                self.current().facts.insert(Fact::Member(property.clone()));
            }
            ExprKind::Index { index, .. } => match &index.kind {
                ExprKind::Str(k) => {
                    self.current().facts.insert(Fact::Member(k.clone()));
                }
                _ => {}
            },
            ExprKind::Call { callee, args } => match callee.as_ident() {
                None if matches!(&callee.kind, ExprKind::Index { index, .. }
                    if !matches!(index.kind, ExprKind::Str(_) | ExprKind::Num(_))) =>
                {
                    self.warn(e.span, WarningKind::ComputedMember, "computed method call is not resolved".into())
                }
                Some("eval") if scopes.resolve("eval").is_none() => {
                    self.warn(e.span, WarningKind::Eval, "eval is not analysed".into())
                }
                Some("require") if scopes.resolve("require").is_none() => match args.first().map(|a| &a.kind) {
                    Some(ExprKind::Str(spec)) => {
                        let from = self.path.to_string();
                        let f = &mut self.current().facts;
                        f.insert(Fact::Module { from: from.clone(), source: spec.clone() });
                        f.insert(Fact::AllExports { from, source: spec.clone() });
                    }
                    _ => self.warn(e.span, WarningKind::DynamicRequire, "non-literal require is not resolved".into()),
                },
                _ => {}
            },
            _ => {}
        }
    }

    fn ident(&mut self, _e: &Expr, _name: &str, resolved: Option<Resolved<'_>>) {
        let Some(r) = resolved else { return };
        let fact = match r.decl {
            Decl::Function(f) => Fact::Function(f.uid.clone()),
            Decl::Class(c) => Fact::Class(c.constructor().map(|f| f.uid.clone())),
            Decl::Import { source, imported } => {
                Fact::Import { from: self.path.to_string(), source: source.clone(), imported: imported.clone() }
            }
            Decl::Local => return,
        };
        self.current().facts.insert(fact);
    }

    fn enter_function(&mut self, f: &Rc<FunctionDef>) {
        match f.kind {
            FunctionKind::Anonymous => {
                self.current().facts.insert(Fact::Function(f.uid.clone()));
            }
            FunctionKind::Method | FunctionKind::Getter | FunctionKind::Setter => {
                self.members.entry(f.name.clone().unwrap_or_default()).or_default().push(f.uid.clone());
            }
            _ => {}
        }
        self.functions.entry(f.uid.clone()).or_default();
        self.stack.push(f.uid.clone());
    }

    fn exit_function(&mut self, _f: &Rc<FunctionDef>) {
        self.stack.pop();
    }
}

struct Analysis<'h> {
    host: &'h MemHost,
    files: BTreeMap<String, FileInfo>,
    regions: BTreeMap<Region, Facts>,
    warnings: BTreeSet<Warning>,
}

impl<'h> Analysis<'h> {
    fn file(&mut self, path: &str) -> Result<&FileInfo, CgError> {
        if !self.files.contains_key(path) {
            let module = self.host.load(path)?;
            let mut ex = Extractor {
                path,
                stack: Vec::new(),
                top: Facts::default(),
                functions: BTreeMap::new(),
                members: BTreeMap::new(),
            };
            for s in &module.items {
                if let StmtKind::Import { source, .. } = &s.kind {
                    ex.top.facts.insert(Fact::Module { from: path.to_string(), source: source.clone() });
                }
            }
            walk_scoped(&module.items, &mut ex);
            self.regions.insert(Region::TopLevel(path.to_string()), ex.top);
            for (uid, facts) in ex.functions {
                self.regions.insert(Region::Function(uid), facts);
            }
            self.files.insert(path.to_string(), FileInfo { module, members: ex.members });
        }
        Ok(&self.files[path])
    }

    fn resolve(&mut self, from: &str, source: &str) -> Option<String> {
        match self.host.resolve(from, source) {
            Ok(p) => Some(p),
            Err(e) => {
                self.warnings.insert(Warning {
                    path: from.to_string(),
                    line: 0,
                    col: 0,
                    kind: WarningKind::UnresolvedSpecifier,
                    message: format!("{}", e),
                });
                None
            }
        }
    }

    /// Declarations an export name stands for, following re-exports.
    fn export_targets(&mut self, path: &str, name: &str, seen: &mut BTreeSet<(String, String)>) -> Result<Vec<Fact>, CgError> {
        if !seen.insert((path.to_string(), name.to_string())) {
            return Ok(Vec::new());
        }
        let module = self.file(path)?.module.clone();
        let mut out = Vec::new();
        let top = crate::lang::scope::block_decls(&module.items);
        let local_decl = |local: &str| top.iter().rev().find(|(n, _)| n == local).map(|(_, d)| d.clone());
        let mut locals = Vec::new();
        for s in &module.items {
            match &s.kind {
                StmtKind::ExportFunction(f) if f.name.as_deref() == Some(name) => {
                    out.push(Fact::Function(f.uid.clone()))
                }
                StmtKind::ExportNamed(specs) => {
                    for sp in specs.iter().filter(|sp| sp.exported == name) {
                        locals.push(sp.local.clone());
                    }
                }
                _ => {}
            }
        }
        for local in locals {
            match local_decl(&local) {
                Some(Decl::Function(f)) => out.push(Fact::Function(f.uid.clone())),
                Some(Decl::Class(c)) => out.push(Fact::Class(c.constructor().map(|f| f.uid.clone()))),
                Some(Decl::Import { source, imported }) => {
                    if let Some(target) = self.resolve(path, &source) {
                        out.extend(self.export_targets(&target, &imported, seen)?);
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }

    fn all_export_names(&mut self, path: &str) -> Result<Vec<String>, CgError> {
        let module = self.file(path)?.module.clone();
        let mut names = Vec::new();
        for s in &module.items {
            match &s.kind {
                StmtKind::ExportFunction(f) => names.push(f.name.clone().unwrap_or_default()),
                StmtKind::ExportNamed(specs) => names.extend(specs.iter().map(|s| s.exported.clone())),
                _ => {}
            }
        }
        Ok(names)
    }
}

/// Static reachability with the package's tests as entry points.
pub fn static_reachability(host: &MemHost, root: &str) -> Result<(ReachabilitySet, Vec<Warning>), CgError> {
    let tests = host.test_paths(root);
    static_reachability_from(host, root, &tests)
}

/// Static reachability from the given entry modules.
pub fn static_reachability_from(
    host: &MemHost,
    root: &str,
    entries: &[String],
) -> Result<(ReachabilitySet, Vec<Warning>), CgError> {
    let closure = host.analyzed_closure(root)?;
    let mut a = Analysis { host, files: BTreeMap::new(), regions: BTreeMap::new(), warnings: BTreeSet::new() };
    let mut files: BTreeSet<String> = BTreeSet::new();
    let mut functions: BTreeSet<String> = BTreeSet::new();
    let mut members: BTreeSet<String> = BTreeSet::new();
    let mut work: VecDeque<Region> = VecDeque::new();

    for t in entries {
        a.file(t)?;
        if files.insert(t.clone()) {
            work.push_back(Region::TopLevel(t.clone()));
        }
    }

    while let Some(region) = work.pop_front() {
        let facts: Vec<Fact> = a.regions.get(&region).map(|f| f.facts.iter().cloned().collect()).unwrap_or_default();
        if let Some(f) = a.regions.get(&region) {
            a.warnings.extend(f.warnings.iter().cloned());
        }
        let mut new_functions = Vec::new();
        let mut new_files = Vec::new();
        let mut new_members = Vec::new();
        for fact in facts {
            match fact {
                Fact::Function(uid) => new_functions.push(uid),
                Fact::Class(ctor) => new_functions.extend(ctor),
                Fact::Member(k) => new_members.push(k),
                Fact::Module { from, source } => {
                    if let Some(p) = a.resolve(&from, &source) {
                        new_files.push(p);
                    }
                }
                Fact::Import { from, source, imported } => {
                    if let Some(p) = a.resolve(&from, &source) {
                        new_files.push(p.clone());
                        if a.file(&p)?.module.style == ModuleStyle::Esm {
                            let mut seen = BTreeSet::new();
                            for t in a.export_targets(&p, &imported, &mut seen)? {
                                match t {
                                    Fact::Function(uid) => new_functions.push(uid),
                                    Fact::Class(ctor) => new_functions.extend(ctor),
                                    _ => {}
                                }
                            }
                        }
                    }
                }
                Fact::AllExports { from, source } => {
                    if let Some(p) = a.resolve(&from, &source) {
                        if a.file(&p)?.module.style == ModuleStyle::Esm {
                            for name in a.all_export_names(&p)? {
                                let mut seen = BTreeSet::new();
                                for t in a.export_targets(&p, &name, &mut seen)? {
                                    match t {
                                        Fact::Function(uid) => new_functions.push(uid),
                                        Fact::Class(ctor) => new_functions.extend(ctor),
                                        _ => {}
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        for p in new_files {
            if files.insert(p.clone()) {
                let info = a.file(&p)?;
                for k in members.iter() {
                    if let Some(uids) = info.members.get(k) {
                        new_functions.extend(uids.iter().cloned());
                    }
                }
                work.push_back(Region::TopLevel(p));
            }
        }
        for k in new_members {
            if members.insert(k.clone()) {
                for f in &files {
                    if let Some(uids) = a.files.get(f).and_then(|i| i.members.get(&k)) {
                        new_functions.extend(uids.iter().cloned());
                    }
                }
            }
        }
        for uid in new_functions {
            if functions.insert(uid.clone()) {
                work.push_back(Region::Function(uid));
            }
        }
    }

    let rs = ReachabilitySet {
        mode: CgMode::Static,
        entry_points: entries.to_vec(),
        reachable_files: files.into_iter().filter(|f| closure.contains(f)).collect(),
        reachable_functions: functions.into_iter().filter(|u| closure.contains(uid_file(u))).collect(),
    };
    Ok((rs, a.warnings.into_iter().collect()))
}
