//! Stub code generation.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::StubError;
use crate::lang::ast::*;
use crate::lang::printer::{is_identifier_name, print_stmts};
use crate::lang::scope::{all_names, fresh_name};
use crate::lang::{self, Module};

fn s(kind: StmtKind) -> Stmt {
    Stmt::new(kind)
}

fn expr_stmt(e: Expr) -> Stmt {
    s(StmtKind::Expr(e))
}

fn let_stmt(name: &str, init: Expr) -> Stmt {
    s(StmtKind::Let { name: name.into(), init })
}

fn assign(target: Expr, value: Expr) -> Stmt {
    s(StmtKind::Assign { target, value })
}

fn stubs_call(method: &str, args: Vec<Expr>) -> Expr {
    Expr::call(Expr::member(Expr::ident("stubs"), method), args)
}

fn this() -> Expr {
    Expr::new(ExprKind::This)
}

/// `this.k`, or `this["k"]` when `k` is not an identifier name.
fn this_prop(key: &str) -> Expr {
    if is_identifier_name(key) {
        Expr::member(this(), key)
    } else {
        Expr::index(this(), Expr::string(key))
    }
}

/// Original function as stored: an anonymous function expression statement.
pub fn stored_function_text(def: &FunctionDef) -> String {
    let mut f = def.clone();
    f.kind = FunctionKind::Anonymous;
    f.name = None;
    f.annotations = Annotations::default();
    print_stmts(&[expr_stmt(Expr::new(ExprKind::Function(Rc::new(f))))])
}

/// Replacement body for a function stub.
pub fn function_stub_body(def: &FunctionDef) -> Result<Vec<Stmt>, StubError> {
    let mut taken: BTreeSet<String> = all_names(&def.body);
    taken.extend(def.params.iter().cloned());
    taken.extend(def.name.iter().cloned());
    let to_exec = fresh_name("toExec", &taken);
    taken.insert(to_exec.clone());
    let uid = Expr::string(&def.uid);
    let fetch = |uid: Expr| stubs_call("getCode", vec![uid]);
    let eval = |arg: Expr| Expr::call(Expr::ident("eval"), vec![arg]);
    let apply = s(StmtKind::Return(Some(Expr::call(
        Expr::member(Expr::ident(&to_exec), "apply"),
        vec![this(), Expr::ident("arguments")],
    ))));
    let key = def.name.clone().unwrap_or_default();
    let cp = |from: Expr| expr_stmt(stubs_call("cpFunProps", vec![from, Expr::ident(&to_exec)]));
    let body = match def.kind {
        FunctionKind::Constructor => return Err(StubError::Unstubbable { uid: def.uid.clone() }),
        FunctionKind::Named => vec![
            let_stmt(&to_exec, eval(fetch(uid))),
            cp(Expr::ident(&key)),
            assign(Expr::ident(&key), Expr::ident(&to_exec)),
            apply,
        ],
        FunctionKind::Method => vec![
            let_stmt(&to_exec, eval(fetch(uid))),
            cp(this_prop(&key)),
            assign(this_prop(&key), Expr::ident(&to_exec)),
            apply,
        ],
        FunctionKind::Getter | FunctionKind::Setter => {
            let (lookup, define) = if def.kind == FunctionKind::Getter {
                ("__lookupGetter__", "__defineGetter__")
            } else {
                ("__lookupSetter__", "__defineSetter__")
            };
            vec![
                let_stmt(&to_exec, eval(fetch(uid))),
                cp(Expr::call(Expr::member(this(), lookup), vec![Expr::string(&key)])),
                expr_stmt(Expr::call(Expr::member(this(), define), vec![Expr::string(&key), Expr::ident(&to_exec)])),
                apply,
            ]
        }
        FunctionKind::Anonymous => {
            let code = fresh_name("toExecString", &taken);
            vec![
                let_stmt(&code, stubs_call("getStub", vec![uid.clone()])),
                s(StmtKind::If {
                    cond: Expr::new(ExprKind::Binary {
                        op: BinOp::Eq,
                        left: Box::new(Expr::ident(&code)),
                        right: Box::new(Expr::new(ExprKind::Null)),
                    }),
                    then_block: Block::new(vec![
                        assign(Expr::ident(&code), fetch(uid.clone())),
                        expr_stmt(stubs_call("setStub", vec![uid, Expr::ident(&code)])),
                    ]),
                    else_block: None,
                }),
                let_stmt(&to_exec, eval(Expr::ident(&code))),
                cp(this()),
                apply,
            ]
        }
    };
    Ok(body)
}

/// The function with its body replaced by a stub; span and uid are kept.
pub fn emit_function_stub(def: &FunctionDef) -> Result<FunctionDef, StubError> {
    let mut f = def.clone();
    f.body = function_stub_body(def)?;
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileStub {
    pub stub_text: String,
    pub stored_text: String,
}

/// Stub module and stored body for a whole file. `key` is the store key
/// (the file's package-relative path).
pub fn emit_file_stub(m: &Module, key: &str) -> FileStub {
    let fetch = Expr::call(
        Expr::ident("eval"),
        vec![stubs_call("getCodeForFile", vec![Expr::string(key)])],
    );
    if m.style != ModuleStyle::Esm {
        return FileStub {
            stub_text: print_stmts(&[expr_stmt(fetch)]),
            stored_text: print_stmts(&m.items),
        };
    }

    let mut taken = all_names(&m.items);
    let mut imports = Vec::new();
    let mut body = Vec::new();
    // (exported name, local expression in the stored body)
    let mut exports: Vec<(String, String)> = Vec::new();
    let mut has_default = false;
    let default_local = fresh_name("__default", &taken);
    taken.insert(default_local.clone());
    for st in &m.items {
        match &st.kind {
            StmtKind::Import { .. } => imports.push(st.clone()),
            StmtKind::ExportFunction(f) => {
                let name = f.name.clone().unwrap_or_default();
                exports.push((name.clone(), name));
                body.push(Stmt { kind: StmtKind::Function(f.clone()), span: st.span });
            }
            StmtKind::ExportNamed(specs) => {
                for sp in specs {
                    exports.push((sp.exported.clone(), sp.local.clone()));
                }
            }
            StmtKind::ExportDefault(e) => {
                has_default = true;
                body.push(let_stmt(&default_local, e.clone()));
            }
            _ => body.push(st.clone()),
        }
    }
    let mut props: Vec<Prop> = exports
        .iter()
        .filter(|(exported, _)| exported != "default")
        .map(|(exported, local)| Prop::Value { key: exported.clone(), value: Expr::ident(local) })
        .collect();
    if let Some((_, local)) = exports.iter().find(|(exported, _)| exported == "default") {
        props.push(Prop::Value { key: "default".into(), value: Expr::ident(local) });
    } else if has_default {
        props.push(Prop::Value { key: "default".into(), value: Expr::ident(&default_local) });
    }
    body.push(expr_stmt(Expr::new(ExprKind::Object(props))));

    let mut stub_bound: BTreeSet<String> = crate::lang::scope::block_decls(&imports).into_iter().map(|(n, _)| n).collect();
    let mut stub = imports;
    let export_obj = fresh_name("exportObj", &taken);
    taken.insert(export_obj.clone());
    stub_bound.insert(export_obj.clone());
    stub.push(let_stmt(&export_obj, fetch));
    let mut default_exported = false;
    for (exported, _) in &exports {
        let value = Expr::index(Expr::ident(&export_obj), Expr::string(exported));
        if exported == "default" {
            default_exported = true;
            stub.push(s(StmtKind::ExportDefault(value)));
            continue;
        }
        // The stub module's only other bindings are its imports and the
        // export object, so the export name itself is usually free.
        let local = if stub_bound.contains(exported) { fresh_name(exported, &taken) } else { exported.clone() };
        taken.insert(local.clone());
        stub_bound.insert(local.clone());
        stub.push(let_stmt(&local, value));
        stub.push(s(StmtKind::ExportNamed(vec![ExportSpec { local, exported: exported.clone() }])));
    }
    if has_default && !default_exported {
        stub.push(s(StmtKind::ExportDefault(Expr::index(Expr::ident(&export_obj), Expr::string("default")))));
    }
    FileStub { stub_text: print_stmts(&stub), stored_text: print_stmts(&body) }
}

/// Source of the per-package stub runtime. Its final expression statement
/// is the `stubs` object.
pub fn prelude_text() -> String {
    let src = "let codeCache = {};
{ getCode: function(id) { return __stubFetch(id); },
  getCodeForFile: function(path) { return __stubFetchFile(path); },
  getStub: function(id) { return codeCache[id]; },
  setStub: function(id, code) { codeCache[id] = code; },
  cpFunProps: function(from, to) { return __cpFunProps(from, to); } };";
    let m = lang::parse(src, super::PRELUDE_FILE).expect("prelude parses");
    lang::print_module(&m)
}
