//! Single-file bundling with top-level tree-shaking, and stubbification of
//! bundles through the map from original uids to bundle positions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::callgraph::ReachabilitySet;
use crate::host::{path, HostError, Manifest, MemHost, ModuleHost};
use crate::lang::ast::*;
use crate::lang::scope::{all_names, block_decls, walk_scoped, walk_scoped_in, Decl, Resolved, ScopeHandler, Scopes};
use crate::lang::visit::{self, VisitorMut};
use crate::lang::{self, Module};
use crate::stubbify::{self, SizeReport, StubError, StubOptions, StubbedPackage};

pub const BUNDLE_FILE: &str = "bundle.mm";
pub const MAP_FILE: &str = "bundle.map.json";
pub const SHAKE_FILE: &str = "shake.report.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BundleError {
    Cycle(Vec<String>),
    /// `require` with something other than a string literal.
    DynamicRequire { path: String, line: u32, col: u32 },
    MissingExport { path: String, name: String },
    /// A kept function has no position in the bundle.
    MapGap { uid: String },
    Host(HostError),
    Stub(StubError),
}

impl fmt::Display for BundleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BundleError::Cycle(chain) => write!(f, "import cycle: {}", chain.join(" -> ")),
            BundleError::DynamicRequire { path, line, col } => {
                write!(f, "{}:{}:{}: require needs a string literal specifier", path, line, col)
            }
            BundleError::MissingExport { path, name } => write!(f, "{} does not export {}", path, name),
            BundleError::MapGap { uid } => write!(f, "kept function {} has no bundle position", uid),
            BundleError::Host(e) => write!(f, "{}", e),
            BundleError::Stub(e) => write!(f, "{}", e),
        }
    }
}

impl From<HostError> for BundleError {
    fn from(e: HostError) -> Self {
        BundleError::Host(e)
    }
}

impl From<StubError> for BundleError {
    fn from(e: StubError) -> Self {
        BundleError::Stub(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct MapSpan {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShakeReport {
    pub removed: Vec<String>,
    pub kept: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub text: String,
    /// Host path of the original entry module.
    pub entry: String,
    /// Host path the bundle is meant to live at.
    pub path: String,
    pub position_map: BTreeMap<String, MapSpan>,
    pub shake_report: ShakeReport,
}

struct Unit {
    path: String,
    module: Rc<Module>,
    /// Resolved dependency per specifier.
    deps: BTreeMap<String, usize>,
}

impl Unit {
    fn esm(&self) -> bool {
        self.module.style == ModuleStyle::Esm
    }
}

/// Literal `require` specifiers of a module, in source order.
fn required_specs(m: &Module) -> Result<Vec<String>, BundleError> {
    struct Req<'a> {
        path: &'a str,
        out: Vec<String>,
        err: Option<BundleError>,
    }
    impl ScopeHandler for Req<'_> {
        fn expr(&mut self, e: &Expr, scopes: &Scopes) {
            if let ExprKind::Call { callee, args } = &e.kind {
                if callee.as_ident() == Some("require") && scopes.resolve("require").is_none() {
                    match args.first().map(|a| &a.kind) {
                        Some(ExprKind::Str(s)) => self.out.push(s.clone()),
                        _ => {
                            self.err.get_or_insert(BundleError::DynamicRequire {
                                path: self.path.to_string(),
                                line: e.span.start_line,
                                col: e.span.start_col,
                            });
                        }
                    }
                }
            }
        }
    }
    let mut r = Req { path: &m.path, out: Vec::new(), err: None };
    walk_scoped(&m.items, &mut r);
    match r.err {
        Some(e) => Err(e),
        None => Ok(r.out),
    }
}

struct Collector<'h> {
    host: &'h MemHost,
    units: Vec<Unit>,
    index: BTreeMap<String, usize>,
    stack: Vec<String>,
}

impl Collector<'_> {
    /// Depth-first in dependency order; units end up in post-order, which
    /// is the order ES modules execute in.
    fn visit(&mut self, p: &str) -> Result<usize, BundleError> {
        if let Some(&i) = self.index.get(p) {
            return Ok(i);
        }
        if let Some(pos) = self.stack.iter().position(|s| s == p) {
            let mut chain = self.stack[pos..].to_vec();
            chain.push(p.to_string());
            return Err(BundleError::Cycle(chain));
        }
        self.stack.push(p.to_string());
        let module = self.host.load(p)?;
        let mut specs: Vec<String> = module
            .items
            .iter()
            .filter_map(|s| match &s.kind {
                StmtKind::Import { source, .. } => Some(source.clone()),
                _ => None,
            })
            .collect();
        specs.extend(required_specs(&module)?);
        let mut deps = BTreeMap::new();
        for spec in specs {
            if deps.contains_key(&spec) {
                continue;
            }
            let target = self.host.resolve(p, &spec)?;
            let i = self.visit(&target)?;
            deps.insert(spec, i);
        }
        self.stack.pop();
        let i = self.units.len();
        self.units.push(Unit { path: p.to_string(), module, deps });
        self.index.insert(p.to_string(), i);
        Ok(i)
    }
}

struct Names {
    taken: BTreeSet<String>,
}

impl Names {
    fn synth(&mut self, base: &str, i: usize) -> String {
        let mut n = format!("{}${}", base, i);
        while self.taken.contains(&n) {
            n.push('$');
        }
        self.taken.insert(n.clone());
        n
    }
}

/// Bundle-level names of one unit.
#[derive(Default)]
struct UnitNames {
    /// Renamed top-level declarations (ES modules only).
    top: BTreeMap<String, String>,
    default: Option<String>,
    module: String,
    exports: String,
    require: String,
    /// Value of a CommonJS unit as seen by importing ES modules.
    value: String,
    /// Export object of an ES unit loaded with `require`.
    namespace: String,
}

struct Renamer<'a> {
    /// Replacement for each free top-level name.
    top: &'a BTreeMap<String, Expr>,
    /// CommonJS: (module name, exports name, replacement per specifier).
    cjs: Option<(&'a str, &'a str, &'a BTreeMap<String, Expr>)>,
    frames: Vec<BTreeSet<String>>,
    /// Frames at the unit's own top level.
    base: usize,
}

fn frame_of(stmts: &[Stmt]) -> BTreeSet<String> {
    block_decls(stmts).into_iter().map(|(n, _)| n).collect()
}

impl Renamer<'_> {
    fn bound(&self, name: &str) -> bool {
        self.frames.iter().any(|f| f.contains(name))
    }

    fn at_top(&self) -> bool {
        self.frames.len() == self.base
    }

    fn renamed(&self, name: &str) -> Option<String> {
        match self.top.get(name).map(|e| &e.kind) {
            Some(ExprKind::Ident(n)) if self.at_top() => Some(n.clone()),
            _ => None,
        }
    }
}

impl VisitorMut for Renamer<'_> {
    fn visit_stmt_mut(&mut self, s: &mut Stmt) {
        match &mut s.kind {
            StmtKind::If { cond, then_block, else_block } => {
                self.visit_expr_mut(cond);
                self.frames.push(frame_of(&then_block.stmts));
                visit::walk_stmts_mut(self, &mut then_block.stmts);
                self.frames.pop();
                if let Some(b) = else_block {
                    self.frames.push(frame_of(&b.stmts));
                    visit::walk_stmts_mut(self, &mut b.stmts);
                    self.frames.pop();
                }
            }
            StmtKind::While { cond, body } => {
                self.visit_expr_mut(cond);
                self.frames.push(frame_of(&body.stmts));
                visit::walk_stmts_mut(self, &mut body.stmts);
                self.frames.pop();
            }
            StmtKind::Let { name, init } => {
                if let Some(n) = self.renamed(name) {
                    *name = n;
                }
                self.visit_expr_mut(init);
            }
            StmtKind::Function(f) => {
                if let Some(n) = f.name.as_deref().and_then(|n| self.renamed(n)) {
                    Rc::make_mut(f).name = Some(n);
                }
                self.visit_function_mut(f);
            }
            StmtKind::Class(c) => {
                if let Some(n) = self.renamed(&c.name) {
                    Rc::make_mut(c).name = n;
                }
                visit::walk_class_mut(self, c);
            }
            _ => visit::walk_stmt_mut(self, s),
        }
    }

    fn visit_function_mut(&mut self, f: &mut Rc<FunctionDef>) {
        let mut frame = frame_of(&f.body);
        frame.extend(f.params.iter().cloned());
        frame.insert("arguments".into());
        self.frames.push(frame);
        visit::walk_function_mut(self, f);
        self.frames.pop();
    }

    fn visit_expr_mut(&mut self, e: &mut Expr) {
        let span = e.span;
        match &e.kind {
            ExprKind::Ident(n) if !self.bound(n) => {
                if let Some(r) = self.top.get(n) {
                    *e = Expr { kind: r.kind.clone(), span };
                } else if let Some((module, exports, _)) = self.cjs {
                    if n == "module" {
                        *e = Expr { kind: ExprKind::Ident(module.into()), span };
                    } else if n == "exports" {
                        *e = Expr { kind: ExprKind::Ident(exports.into()), span };
                    }
                }
                return;
            }
            ExprKind::Call { callee, args } if callee.as_ident() == Some("require") && !self.bound("require") => {
                if let (Some((_, _, requires)), Some(ExprKind::Str(spec))) = (self.cjs, args.first().map(|a| &a.kind)) {
                    if let Some(r) = requires.get(spec) {
                        *e = Expr { kind: r.kind.clone(), span };
                        return;
                    }
                }
            }
            _ => {}
        }
        visit::walk_expr_mut(self, e);
    }
}

fn s(kind: StmtKind) -> Stmt {
    Stmt::new(kind)
}

fn let_stmt(name: &str, init: Expr) -> Stmt {
    s(StmtKind::Let { name: name.into(), init })
}

fn synthetic_function(name: &str, body: Vec<Stmt>) -> Stmt {
    s(StmtKind::Function(Rc::new(FunctionDef {
        kind: FunctionKind::Named,
        name: Some(name.into()),
        params: Vec::new(),
        body,
        span: Span::default(),
        annotations: Annotations::default(),
        uid: String::new(),
    })))
}

struct Builder<'u> {
    units: &'u [Unit],
    names: Vec<UnitNames>,
}

impl Builder<'_> {
    /// Expression for export `name` of unit `k`.
    fn export_expr(&self, k: usize, name: &str, depth: usize) -> Result<Expr, BundleError> {
        let u = &self.units[k];
        let n = &self.names[k];
        let missing = || BundleError::MissingExport { path: u.path.clone(), name: name.into() };
        if !u.esm() {
            let v = Expr::ident(&n.value);
            return Ok(if name == "default" { v } else { Expr::member(v, name) });
        }
        if depth > self.units.len() {
            return Err(missing());
        }
        for st in &u.module.items {
            match &st.kind {
                StmtKind::ExportFunction(f) if f.name.as_deref() == Some(name) => {
                    return Ok(Expr::ident(&n.top[name]));
                }
                StmtKind::ExportDefault(_) if name == "default" => {
                    return Ok(Expr::ident(n.default.as_deref().unwrap_or_default()));
                }
                StmtKind::ExportNamed(specs) => {
                    if let Some(sp) = specs.iter().find(|sp| sp.exported == name) {
                        return self.local_expr(k, &sp.local, depth);
                    }
                }
                _ => {}
            }
        }
        Err(missing())
    }

    /// Expression for a top-level name of ES unit `k`.
    fn local_expr(&self, k: usize, local: &str, depth: usize) -> Result<Expr, BundleError> {
        let u = &self.units[k];
        for (n, d) in block_decls(&u.module.items).into_iter().rev() {
            if n != local {
                continue;
            }
            return match d {
                Decl::Import { source, imported } => self.export_expr(u.deps[&source], &imported, depth + 1),
                _ => Ok(Expr::ident(&self.names[k].top[local])),
            };
        }
        Err(BundleError::MissingExport { path: u.path.clone(), name: local.into() })
    }

    fn export_names(&self, k: usize) -> Vec<String> {
        let mut out = Vec::new();
        for st in &self.units[k].module.items {
            match &st.kind {
                StmtKind::ExportFunction(f) => out.push(f.name.clone().unwrap_or_default()),
                StmtKind::ExportNamed(specs) => out.extend(specs.iter().map(|sp| sp.exported.clone())),
                StmtKind::ExportDefault(_) => out.push("default".into()),
                _ => {}
            }
        }
        out
    }

    fn top_map(&self, k: usize) -> Result<BTreeMap<String, Expr>, BundleError> {
        let u = &self.units[k];
        let mut map = BTreeMap::new();
        for (n, d) in block_decls(&u.module.items) {
            let e = match d {
                Decl::Import { source, imported } => self.export_expr(u.deps[&source], &imported, 0)?,
                _ => Expr::ident(&self.names[k].top[&n]),
            };
            map.insert(n, e);
        }
        Ok(map)
    }

    fn requires_map(&self, k: usize) -> BTreeMap<String, Expr> {
        self.units[k]
            .deps
            .iter()
            .map(|(spec, &j)| {
                let e = if self.units[j].esm() {
                    Expr::ident(&self.names[j].namespace)
                } else {
                    Expr::call(Expr::ident(&self.names[j].require), Vec::new())
                };
                (spec.clone(), e)
            })
            .collect()
    }
}

/// Statements plus, per statement, whether tree-shaking may drop it.
struct Emitted {
    stmts: Vec<Stmt>,
    shakeable: Vec<bool>,
}

impl Emitted {
    fn push(&mut self, st: Stmt, shakeable: bool) {
        self.stmts.push(st);
        self.shakeable.push(shakeable);
    }
}

#[derive(Default)]
struct Refs {
    names: BTreeSet<String>,
    members: BTreeSet<String>,
}

impl ScopeHandler for Refs {
    fn expr(&mut self, e: &Expr, _scopes: &Scopes) {
        match &e.kind {
            ExprKind::Member { property, .. } => {
                self.members.insert(property.clone());
            }
            ExprKind::Index { index, .. } => {
                if let ExprKind::Str(k) = &index.kind {
                    self.members.insert(k.clone());
                }
            }
            _ => {}
        }
    }

    fn ident(&mut self, _e: &Expr, name: &str, resolved: Option<Resolved<'_>>) {
        if let Some(r) = resolved {
            if r.top_level && matches!(r.decl, Decl::Function(_) | Decl::Class(_)) {
                self.names.insert(name.into());
            }
        }
    }
}

fn decl_name(st: &Stmt) -> Option<&str> {
    match &st.kind {
        StmtKind::Function(f) => f.name.as_deref(),
        StmtKind::Class(c) => Some(&c.name),
        _ => None,
    }
}

/// Indices of statements to keep: every non-shakeable statement plus the
/// declarations transitively referenced from kept code by name or by a
/// member access naming one of their methods.
fn shake(e: &Emitted) -> Vec<bool> {
    let refs: Vec<Refs> = e
        .stmts
        .iter()
        .map(|st| {
            let mut r = Refs::default();
            walk_scoped_in(&e.stmts, core::slice::from_ref(st), &mut r);
            if let StmtKind::ExportNamed(specs) = &st.kind {
                r.names.extend(specs.iter().map(|sp| sp.local.clone()));
            }
            r
        })
        .collect();
    let methods: Vec<BTreeSet<String>> = e
        .stmts
        .iter()
        .map(|st| {
            lang::functions_in(core::slice::from_ref(st))
                .iter()
                .filter(|f| matches!(f.kind, FunctionKind::Method | FunctionKind::Getter | FunctionKind::Setter))
                .filter_map(|f| f.name.clone())
                .collect()
        })
        .collect();
    let mut keep: Vec<bool> = e.shakeable.iter().map(|s| !s).collect();
    let mut names = BTreeSet::new();
    let mut members = BTreeSet::new();
    let mut changed = true;
    while changed {
        changed = false;
        for (i, r) in refs.iter().enumerate() {
            if keep[i] {
                names.extend(r.names.iter().cloned());
                members.extend(r.members.iter().cloned());
            }
        }
        for i in 0..e.stmts.len() {
            if keep[i] {
                continue;
            }
            let by_name = decl_name(&e.stmts[i]).is_some_and(|n| names.contains(n));
            let by_member = methods[i].iter().any(|m| members.contains(m));
            if by_name || by_member {
                keep[i] = true;
                changed = true;
            }
        }
    }
    keep
}

/// Bundles the module graph rooted at `entry` into one module to be
/// placed at `<root>/bundle.mm`.
pub fn bundle(host: &MemHost, root: &str, entry: &str) -> Result<Bundle, BundleError> {
    let entry = path::normalize(entry);
    let mut c = Collector { host, units: Vec::new(), index: BTreeMap::new(), stack: Vec::new() };
    let entry_index = c.visit(&entry)?;
    let units = c.units;

    let mut names = Names { taken: BTreeSet::new() };
    for u in &units {
        names.taken.extend(all_names(&u.module.items));
    }
    let mut imported_by_esm = vec![false; units.len()];
    let mut required = vec![false; units.len()];
    for u in &units {
        let imports: BTreeSet<&String> = u
            .module
            .items
            .iter()
            .filter_map(|s| match &s.kind {
                StmtKind::Import { source, .. } => Some(source),
                _ => None,
            })
            .collect();
        for (spec, &j) in &u.deps {
            if imports.contains(spec) {
                imported_by_esm[j] = true;
            } else {
                required[j] = true;
            }
        }
    }
    let mut unit_names = Vec::new();
    for (i, u) in units.iter().enumerate() {
        let mut n = UnitNames::default();
        if u.esm() {
            for (name, d) in block_decls(&u.module.items) {
                if !matches!(d, Decl::Import { .. }) {
                    n.top.insert(name.clone(), names.synth(&name, i));
                }
            }
            if u.module.items.iter().any(|s| matches!(s.kind, StmtKind::ExportDefault(_))) {
                n.default = Some(names.synth("default", i));
            }
            if required[i] {
                n.namespace = names.synth("ns", i);
            }
        } else {
            n.module = names.synth("module", i);
            n.exports = names.synth("exports", i);
            n.require = names.synth("require", i);
            if imported_by_esm[i] {
                n.value = names.synth("value", i);
            }
        }
        unit_names.push(n);
    }
    let b = Builder { units: &units, names: unit_names };

    let mut out = Emitted { stmts: Vec::new(), shakeable: Vec::new() };
    // Lazily evaluated CommonJS units.
    for (i, u) in units.iter().enumerate().filter(|(_, u)| !u.esm()) {
        let n = &b.names[i];
        let requires = b.requires_map(i);
        let empty = BTreeMap::new();
        let mut body = u.module.items.clone();
        let mut r = Renamer { top: &empty, cjs: Some((&n.module, &n.exports, &requires)), frames: Vec::new(), base: 1 };
        r.frames.push(frame_of(&body));
        visit::walk_stmts_mut(&mut r, &mut body);
        let module_ref = || Expr::ident(&n.module);
        let mut init = vec![
            s(StmtKind::Assign {
                target: module_ref(),
                value: Expr::new(ExprKind::Object(vec![Prop::Value {
                    key: "exports".into(),
                    value: Expr::new(ExprKind::Object(Vec::new())),
                }])),
            }),
            s(StmtKind::Assign { target: Expr::ident(&n.exports), value: Expr::member(module_ref(), "exports") }),
        ];
        init.extend(body);
        let wrapper = vec![
            s(StmtKind::If {
                cond: Expr::new(ExprKind::Binary {
                    op: BinOp::Eq,
                    left: alloc::boxed::Box::new(module_ref()),
                    right: alloc::boxed::Box::new(Expr::new(ExprKind::Null)),
                }),
                then_block: Block::new(init),
                else_block: None,
            }),
            s(StmtKind::Return(Some(Expr::member(module_ref(), "exports")))),
        ];
        out.push(let_stmt(&n.module, Expr::new(ExprKind::Null)), false);
        out.push(let_stmt(&n.exports, Expr::new(ExprKind::Null)), false);
        out.push(synthetic_function(&n.require, wrapper), false);
    }
    for (i, u) in units.iter().enumerate() {
        let n = &b.names[i];
        if !u.esm() {
            if imported_by_esm[i] {
                out.push(let_stmt(&n.value, Expr::call(Expr::ident(&n.require), Vec::new())), false);
            }
            continue;
        }
        let top = b.top_map(i)?;
        let mut r = Renamer { top: &top, cjs: None, frames: Vec::new(), base: 0 };
        for st in &u.module.items {
            let mut st = match &st.kind {
                StmtKind::Import { .. } | StmtKind::ExportNamed(_) => continue,
                StmtKind::ExportFunction(f) => Stmt { kind: StmtKind::Function(f.clone()), span: st.span },
                StmtKind::ExportDefault(e) => let_stmt(n.default.as_deref().unwrap_or_default(), e.clone()),
                _ => st.clone(),
            };
            r.visit_stmt_mut(&mut st);
            let shakeable = matches!(st.kind, StmtKind::Function(_) | StmtKind::Class(_));
            out.push(st, shakeable);
        }
        if required[i] {
            let mut props = Vec::new();
            for name in b.export_names(i) {
                props.push(Prop::Value { key: name.clone(), value: b.export_expr(i, &name, 0)? });
            }
            out.push(let_stmt(&n.namespace, Expr::new(ExprKind::Object(props))), false);
        }
    }
    let eu = &units[entry_index];
    if eu.esm() {
        let mut specs = Vec::new();
        for name in b.export_names(entry_index) {
            let e = b.export_expr(entry_index, &name, 0)?;
            let local = match e.as_ident() {
                Some(id) => id.to_string(),
                None => {
                    let id = names.synth(&name, entry_index);
                    out.push(let_stmt(&id, e), false);
                    id
                }
            };
            if name == "default" {
                out.push(s(StmtKind::ExportDefault(Expr::ident(&local))), false);
            } else {
                specs.push(ExportSpec { local, exported: name });
            }
        }
        if !specs.is_empty() {
            out.push(s(StmtKind::ExportNamed(specs)), false);
        }
    } else {
        let call = Expr::call(Expr::ident(&b.names[entry_index].require), Vec::new());
        if eu.module.style == ModuleStyle::Cjs {
            out.push(s(StmtKind::Assign { target: Expr::member(Expr::ident("module"), "exports"), value: call }), false);
        } else {
            out.push(s(StmtKind::Expr(call)), false);
        }
    }

    let keep = shake(&out);
    let mut removed = Vec::new();
    let mut kept_stmts = Vec::new();
    for (st, k) in out.stmts.into_iter().zip(keep) {
        if k {
            kept_stmts.push(st);
        } else {
            removed.extend(lang::functions_in(core::slice::from_ref(&st)).iter().map(|f| f.uid.clone()));
        }
    }
    let text = lang::print_stmts(&kept_stmts);
    let bundle_path = path::join(root, BUNDLE_FILE);
    let reparsed = lang::parse(&text, &bundle_path).map_err(HostError::Lang)?;
    let built = lang::functions_in(&kept_stmts);
    let printed = lang::functions_of(&reparsed);
    debug_assert_eq!(built.len(), printed.len());
    let mut position_map = BTreeMap::new();
    let mut kept = Vec::new();
    for (orig, new) in built.iter().zip(printed.iter()) {
        if orig.uid.is_empty() {
            continue;
        }
        kept.push(orig.uid.clone());
        let sp = new.span;
        position_map.insert(
            orig.uid.clone(),
            MapSpan { start_line: sp.start_line, start_col: sp.start_col, end_line: sp.end_line, end_col: sp.end_col },
        );
    }
    kept.sort();
    removed.sort();
    Ok(Bundle { text, entry, path: bundle_path, position_map, shake_report: ShakeReport { removed, kept } })
}

/// A host in which `root`'s test modules load the bundle wherever they
/// loaded the entry module.
pub fn repoint_tests(host: &MemHost, root: &str, b: &Bundle) -> Result<MemHost, BundleError> {
    let tests: BTreeSet<String> = host.test_paths(root).into_iter().collect();
    let mut h = MemHost::new();
    for (p, text) in host.files() {
        if !tests.contains(p) {
            h.add_file(p, text);
            continue;
        }
        let m = host.load(p)?;
        let mut items = m.items.clone();
        let target = path::specifier(path::dirname(p), &b.path);
        for st in items.iter_mut() {
            if let StmtKind::Import { source, .. } = &mut st.kind {
                if host.resolve(p, source).ok().as_deref() == Some(&b.entry) {
                    *source = target.clone();
                }
            }
        }
        struct Requires<'a> {
            host: &'a MemHost,
            from: &'a str,
            entry: &'a str,
            target: &'a str,
        }
        impl VisitorMut for Requires<'_> {
            fn visit_expr_mut(&mut self, e: &mut Expr) {
                if let ExprKind::Call { callee, args } = &mut e.kind {
                    if callee.as_ident() == Some("require") {
                        if let Some(ExprKind::Str(spec)) = args.first_mut().map(|a| &mut a.kind) {
                            if self.host.resolve(self.from, spec).ok().as_deref() == Some(self.entry) {
                                *spec = self.target.into();
                            }
                        }
                    }
                }
                visit::walk_expr_mut(self, e);
            }
        }
        visit::walk_stmts_mut(&mut Requires { host, from: p, entry: &b.entry, target: &target }, &mut items);
        h.add_file(p, &lang::print_stmts(&items));
    }
    h.add_file(&b.path, &b.text);
    for e in host.packages() {
        h.add_package(&e.root, e.manifest.clone());
        if let Some(rt) = &e.stub {
            h.set_stub_runtime(&e.root, (**rt).clone());
        }
    }
    Ok(h)
}

/// Stubbifies a bundle with a reachability set computed on the original
/// package. Only functions that came from the original sources can become
/// stubs, and the bundle is never stubbed as a whole.
pub fn stubbify_bundle(
    b: &Bundle,
    root: &str,
    rs: &ReachabilitySet,
    opts: &StubOptions,
) -> Result<StubbedPackage, BundleError> {
    for uid in &b.shake_report.kept {
        if !b.position_map.contains_key(uid) {
            return Err(BundleError::MapGap { uid: uid.clone() });
        }
    }
    let module = Rc::new(lang::parse(&b.text, &b.path).map_err(HostError::Lang)?);
    if all_names(&module.items).contains(stubbify::STUBS_BINDING) {
        return Err(StubError::ReservedName { path: b.path.clone(), name: stubbify::STUBS_BINDING.into() }.into());
    }
    let bundle_uid = |sp: &MapSpan| format!("{}:{}:{}", b.path, sp.start_line, sp.start_col);
    let unreachable: BTreeSet<String> = b
        .shake_report
        .kept
        .iter()
        .filter(|u| !rs.reachable_functions.contains(*u))
        .map(|u| bundle_uid(&b.position_map[u]))
        .collect();
    let mut bundle_rs = ReachabilitySet {
        mode: rs.mode,
        entry_points: rs.entry_points.clone(),
        reachable_files: BTreeSet::new(),
        reachable_functions: BTreeSet::new(),
    };
    bundle_rs.reachable_files.insert(b.path.clone());
    for f in lang::functions_of(&module) {
        if !unreachable.contains(&f.uid) {
            bundle_rs.reachable_functions.insert(f.uid.clone());
        }
    }
    let modules = [(b.path.clone(), module)];
    let plan = stubbify::plan_modules(&modules, &bundle_rs, opts)?;
    let (sources, store, mut per_file) = stubbify::transform_modules(&modules, &plan, opts)?;
    let (prelude, row) = stubbify::prelude_for(&plan);
    for f in per_file.iter_mut() {
        f.path = BUNDLE_FILE.into();
    }
    per_file.extend(row);
    Ok(StubbedPackage {
        root: path::normalize(root),
        sources,
        prelude,
        store,
        plan,
        sizes: SizeReport::from_files(per_file),
    })
}

/// Manifest for a bundle distributed as its own package.
pub fn bundle_manifest(original: &Manifest) -> Manifest {
    Manifest { main: BUNDLE_FILE.into(), dependencies: BTreeMap::new(), ..original.clone() }
}
