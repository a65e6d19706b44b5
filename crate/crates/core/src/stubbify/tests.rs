use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::*;
use crate::callgraph::{dynamic_reachability, static_reachability, CgMode};
use crate::host::Manifest;
use crate::interp::{run_tests, ExpansionKind, NoHooks, RuntimeConfig, TestReport};
use crate::lang::printer::print_function;

fn pkg(files: &[(&str, &str)], tests: &[&str]) -> MemHost {
    let mut h = MemHost::new();
    h.add_package(
        "",
        Manifest {
            name: "p".into(),
            version: "1.0.0".into(),
            main: "src/index.mm".into(),
            tests: tests.iter().map(|t| t.to_string()).collect(),
            ..Manifest::default()
        },
    );
    for (p, t) in files {
        h.add_file(p, t);
    }
    h
}

/// Replaces each `PAD;` with statements long enough that a stub of the
/// enclosing function is smaller than the original.
fn padded(src: &str) -> String {
    src.replace("PAD;", "let pad = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33, 34, 35, 36, 37, 38, 39, 40, 41, 42, 43, 44, 45, 46, 47, 48, 49, 50]; let padding = [pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad, pad];")
}

fn first_fn(src: &str) -> Rc<FunctionDef> {
    let m = lang::parse(src, "a.mm").unwrap();
    lang::functions_of(&m)[0].clone()
}

fn uid_of(h: &MemHost, path: &str, name: &str) -> String {
    let m = h.load(path).unwrap();
    lang::functions_of(&m).iter().find(|f| f.name.as_deref() == Some(name)).unwrap().uid.clone()
}

fn empty_rs() -> ReachabilitySet {
    ReachabilitySet {
        mode: CgMode::Dynamic,
        entry_points: Vec::new(),
        reachable_files: BTreeSet::new(),
        reachable_functions: BTreeSet::new(),
    }
}

fn run(h: &MemHost) -> TestReport {
    let tests = h.test_paths("");
    run_tests(h, &tests, &RuntimeConfig::default(), &mut NoHooks)
}

/// Stubbifies against the static call graph, which cannot see into `eval`.
fn stubbed_run(h: &MemHost, opts: &StubOptions) -> (StubbedPackage, TestReport) {
    let (rs, _) = static_reachability(h, "").unwrap();
    let sp = stubbify_package(h, "", &rs, opts).unwrap();
    let report = run(&sp.install(h));
    (sp, report)
}

fn printed_stmts(body: &[Stmt]) -> Vec<String> {
    body.iter().map(|s| lang::print_stmts(core::slice::from_ref(s))).collect()
}

#[test]
fn one_line_function_is_too_small() {
    let h = pkg(
        &[
            ("src/index.mm", "export function id(a){return a;}\nexport function used() { return 1; }"),
            ("test/t.mm", "import { used } from \"../src/index\";\nassert(used() == 1, \"used\");"),
        ],
        &["test/t.mm"],
    );
    let f = first_fn("function id(a){return a;}");
    let stub = emit_function_stub(&f).unwrap();
    assert!(print_function(&stub).len() > print_function(&f).len());
    let (rs, _) = dynamic_reachability(&h, "", &RuntimeConfig::default()).unwrap();
    let plan = plan_stubs(&h, "", &rs, &StubOptions::default()).unwrap();
    assert_eq!(plan.skipped_too_small, [uid_of(&h, "src/index.mm", "id")]);
    assert!(plan.function_stubs.is_empty());
    let forced = plan_stubs(&h, "", &rs, &StubOptions { force: true, ..StubOptions::default() }).unwrap();
    assert_eq!(forced.function_stubs, [uid_of(&h, "src/index.mm", "id")]);
}

#[test]
fn reachable_and_unreachable_in_one_file() {
    let big = "export function g(x) {\n  PAD;\n  let a = x + 1;\n  let b = a * 2;\n  let c = b - 3;\n  let d = c + a + b;\n  print(\"g called with \" + str(x));\n  return d * d + a * b + c;\n}\n";
    let src = padded(&(String::from("export function f() { return 1; }\n") + big));
    let h = pkg(
        &[("src/index.mm", &src), ("test/t.mm", "import { f } from \"../src/index\";\nassert(f() == 1, \"f\");")],
        &["test/t.mm"],
    );
    let (rs, _) = dynamic_reachability(&h, "", &RuntimeConfig::default()).unwrap();
    let plan = plan_stubs(&h, "", &rs, &StubOptions::default()).unwrap();
    assert_eq!(plan.function_stubs, [uid_of(&h, "src/index.mm", "g")]);
    assert!(plan.file_stubs.is_empty());
}

#[test]
fn named_stub_shape() {
    let f = first_fn("function getValidHeaders(h) { return h; }");
    let body = printed_stmts(&function_stub_body(&f).unwrap());
    assert_eq!(body.len(), 4);
    assert_eq!(body[0], "let toExec = eval(stubs.getCode(\"a.mm:1:0\"));\n");
    assert_eq!(body[1], "stubs.cpFunProps(getValidHeaders, toExec);\n");
    assert_eq!(body[2], "getValidHeaders = toExec;\n");
    assert_eq!(body[3], "return toExec.apply(this, arguments);\n");
}

#[test]
fn stub_locals_avoid_captured_names() {
    let f = first_fn("function f(toExec) { let toExecString = 1; return function() { return toExec; }; }");
    let body = printed_stmts(&function_stub_body(&f).unwrap());
    assert_eq!(body[0], "let toExec1 = eval(stubs.getCode(\"a.mm:1:0\"));\n");
}

#[test]
fn anonymous_stub_consults_cache_first() {
    let m = lang::parse("let cb = function(x) { return x + 1; };", "a.mm").unwrap();
    let f = lang::functions_of(&m)[0].clone();
    let body = printed_stmts(&function_stub_body(&f).unwrap());
    assert!(body[0].contains("stubs.getStub(\"a.mm:1:9\")"));
    assert!(body[1].starts_with("if (toExecString == null)"));
    assert!(body[1].contains("stubs.getCode(\"a.mm:1:9\")"));
    assert!(body[1].contains("stubs.setStub(\"a.mm:1:9\", toExecString)"));
    assert_eq!(body[2], "let toExec = eval(toExecString);\n");
    assert_eq!(body.last().unwrap(), "return toExec.apply(this, arguments);\n");
}

#[test]
fn method_stub_reassigns_through_this() {
    let m = lang::parse("class C { m(a) { return a; } get p() { return 1; } }\nlet o = { \"odd key\": function(b) { return b; } };", "a.mm").unwrap();
    let fs = lang::functions_of(&m);
    let body = printed_stmts(&function_stub_body(&fs[0]).unwrap());
    assert_eq!(body[1], "stubs.cpFunProps(this.m, toExec);\n");
    assert_eq!(body[2], "this.m = toExec;\n");
    let body = printed_stmts(&function_stub_body(&fs[2]).unwrap());
    assert_eq!(body[2], "this[\"odd key\"] = toExec;\n");
    let body = printed_stmts(&function_stub_body(&fs[1]).unwrap());
    assert_eq!(body[1], "stubs.cpFunProps(this.__lookupGetter__(\"p\"), toExec);\n");
    assert_eq!(body[2], "this.__defineGetter__(\"p\", toExec);\n");
}

#[test]
fn constructors_are_unstubbable() {
    let m = lang::parse("class C { constructor(a) { this.a = a; } }", "a.mm").unwrap();
    let f = lang::functions_of(&m)[0].clone();
    assert!(matches!(emit_function_stub(&f), Err(StubError::Unstubbable { .. })));
}

#[test]
fn esm_file_stub_hoists_imports_and_reexports() {
    let src = "export function foo() {}\nimport { A } from \"./a\";\nfunction bar() {}\nexport default bar;\n";
    let m = lang::parse(src, "file.mm").unwrap();
    let fs = emit_file_stub(&m, "file.mm");
    assert_eq!(
        fs.stub_text,
        "import { A } from \"./a\";\nlet exportObj = eval(stubs.getCodeForFile(\"file.mm\"));\nlet foo = exportObj[\"foo\"];\nexport { foo };\nexport default exportObj[\"default\"];\n"
    );
    let stored = lang::parse_statements(&fs.stored_text, "<stored>").unwrap();
    let last = lang::print_stmts(core::slice::from_ref(stored.last().unwrap()));
    assert_eq!(last, "{ foo: foo, default: __default };\n");
    assert!(!fs.stored_text.contains("import"));
    assert!(!fs.stored_text.contains("export"));
}

#[test]
fn cjs_file_stub_is_one_eval() {
    let h = pkg(
        &[
            ("src/index.mm", "let dep = require(\"./dep\");\nmodule.exports = { a: dep.a };"),
            ("src/dep.mm", "exports.a = 1;"),
            ("test/t.mm", "let idx = require(\"../src/index\");\nassert(idx.a == 1, \"a\");"),
        ],
        &["test/t.mm"],
    );
    let m = h.load("src/dep.mm").unwrap();
    let fs = emit_file_stub(&m, "src/dep.mm");
    assert_eq!(fs.stub_text, "eval(stubs.getCodeForFile(\"src/dep.mm\"));\n");
    assert_eq!(fs.stored_text, "exports.a = 1;\n");
    // Stub the dep even though it is loaded, to check expansion.
    let rs = empty_rs();
    let opts = StubOptions { force: true, ..StubOptions::default() };
    let sp = stubbify_package(&h, "", &rs, &opts).unwrap();
    assert!(sp.plan.file_stubs.contains(&"src/dep.mm".to_string()));
    let report = run(&sp.install(&h));
    assert!(report.all_passed(), "{:?}", report);
    assert!(report.expansion_events.iter().any(|e| e.kind == ExpansionKind::File && e.id == "src/dep.mm"));
}

#[test]
fn importers_see_identical_exports_after_file_stubbing() {
    let lib = padded("import { helper } from \"./helper\";\nexport function foo() { return helper(1); }\nlet counter = 41;\nexport { counter as count };\nfunction bar() { return \"bar\"; }\nexport default bar;\n");
    let h = pkg(
        &[
            ("src/lib.mm", &lib),
            ("src/helper.mm", "export function helper(x) { return x + 1; }"),
            (
                "test/t.mm",
                "import bar from \"../src/lib\";\nimport { foo, count } from \"../src/lib\";\nprint(foo());\nprint(count);\nprint(bar());\nassert(foo() == 2 && count == 41 && bar() == \"bar\", \"exports\");",
            ),
        ],
        &["test/t.mm"],
    );
    let before = run(&h);
    assert!(before.all_passed(), "{:?}", before);
    let opts = StubOptions { force: true, ..StubOptions::default() };
    let sp = stubbify_package(&h, "", &empty_rs(), &opts).unwrap();
    assert!(sp.plan.file_stubs.contains(&"src/lib.mm".to_string()));
    let after = run(&sp.install(&h));
    assert_eq!(before.pass_fail(), after.pass_fail());
    assert_eq!(before.tests[0].output, after.tests[0].output);
}

#[test]
fn guards_rewrite_calls() {
    assert_eq!(apply_guards("f(1);").unwrap(), "__guardCheck(f)(1);\n");
    assert_eq!(apply_guards("o.k(1, 2);").unwrap(), "__guardCall(o, \"k\", [1, 2]);\n");
    assert_eq!(apply_guards("o[i]();").unwrap(), "__guardCall(o, i, []);\n");
    assert_eq!(apply_guards("f(g(x));").unwrap(), "__guardCheck(f)(__guardCheck(g)(x));\n");
}

fn guarded_run(body: &str, mode: GuardMode) -> TestReport {
    let text = apply_guards(body).unwrap();
    let test = String::from("let code = ") + &lang::printer::quote_string(&text) + ";\nprint(\"start\");\neval(code);\nprint(\"end\");";
    let h = pkg(&[("src/index.mm", ""), ("test/t.mm", &test)], &["test/t.mm"]);
    let mut hooks = NoHooks;
    let policy = crate::interp::GuardPolicy::new(mode);
    let mut i = crate::interp::Interpreter::with_guard(&h, &mut hooks, RuntimeConfig::default(), policy);
    let res = i.run_module("test/t.mm");
    let mut r = TestReport::default();
    r.guard_events = i.session.guard_events.clone();
    r.side_effect_log = i.session.side_effects.clone();
    if let Err(e) = res {
        if let crate::interp::ErrorKind::GuardExit(n) = e.kind {
            r.guard_exit = Some(n);
        }
    }
    r
}

#[test]
fn guard_fires_on_direct_and_aliased_calls() {
    let r = guarded_run("exec(\"rm\");", GuardMode::Warn);
    assert_eq!(r.guard_events.len(), 1);
    assert_eq!(r.side_effect_log.len(), 1);
    let r = guarded_run("let e = exec; let f = e; f(\"x\");", GuardMode::Warn);
    assert_eq!(r.guard_events.len(), 1);
    assert_eq!(r.guard_events[0].name, "exec");
    let r = guarded_run("let o = { run: spawn }; o.run(\"x\");", GuardMode::Warn);
    assert_eq!(r.guard_events.len(), 1);
    let r = guarded_run("print(\"hi\");", GuardMode::Warn);
    assert!(r.guard_events.is_empty());
    let r = guarded_run("exec(\"rm\");", GuardMode::Exit);
    assert_eq!(r.guard_exit.as_deref(), Some("exec"));
    assert!(r.side_effect_log.is_empty());
    let r = guarded_run("exec(\"rm\");", GuardMode::Off);
    assert!(r.guard_events.is_empty());
    assert_eq!(r.side_effect_log.len(), 1);
}

#[test]
fn expanded_closures_see_current_arguments() {
    let lib = padded("export function make(k) {\n  PAD;\n  return function(x) {\n    PAD;\n    let scaled = x * k;\n    let shifted = scaled + k;\n    print(\"scaled \" + str(scaled) + \" shifted \" + str(shifted));\n    return shifted;\n  };\n}\nexport function touch() { return 0; }\n");
    let test = "import { make, touch } from \"../src/index\";\nlet a = make(2);\nlet b = make(10);\nassert(a(3) == 8, \"a\");\nassert(b(3) == 40, \"b\");\nassert(a(1) == 4, \"a again\");";
    let h = pkg(&[("src/index.mm", &lib), ("test/t.mm", test)], &["test/t.mm"]);
    let before = run(&h);
    assert!(before.all_passed());
    let make_uid = uid_of(&h, "src/index.mm", "make");
    let mut rs = empty_rs();
    rs.reachable_files.insert("src/index.mm".into());
    rs.reachable_functions.insert(make_uid);
    let sp = stubbify_package(&h, "", &rs, &StubOptions::default()).unwrap();
    assert_eq!(sp.plan.function_stubs.len(), 1);
    let after = run(&sp.install(&h));
    assert!(after.all_passed(), "{:?}", after);
    assert_eq!(before.tests[0].output, after.tests[0].output);
    let anon: Vec<_> = after.expansion_events.iter().collect();
    assert_eq!(anon.iter().filter(|e| !e.cache_hit).count(), 1);
}

#[test]
fn named_stub_fetches_once() {
    let lib = padded("export function used() { return 1; }\nexport function lazy(a, b) {\n  PAD;\n  let s = a + b;\n  print(\"lazy \" + str(s));\n  return s * 2 + a * b;\n}\n");
    let test = "import { used, lazy } from \"../src/index\";\nassert(used() == 1, \"used\");\nassert(eval(\"lazy(1, 2);\") == 8, \"first\");\nassert(eval(\"lazy(2, 3);\") == 16, \"second\");";
    let h = pkg(&[("src/index.mm", &lib), ("test/t.mm", test)], &["test/t.mm"]);
    let (rs, _) = static_reachability(&h, "").unwrap();
    let sp = stubbify_package(&h, "", &rs, &StubOptions::default()).unwrap();
    assert_eq!(sp.plan.function_stubs, [uid_of(&h, "src/index.mm", "lazy")]);
    let report = run(&sp.install(&h));
    assert!(report.all_passed(), "{:?}", report);
    assert_eq!(report.expansion_events.len(), 1);
    assert!(!report.expansion_events[0].cache_hit);
    assert_eq!(report.expansion_events[0].bytes_loaded, sp.store.entries[&report.expansion_events[0].id].len() as u64);
}

#[test]
fn function_properties_survive_expansion() {
    let lib = padded("export function used() { return 1; }\nexport function tagged(a) {\n  PAD;\n  let s = a + 1;\n  print(\"tagged \" + str(s));\n  return s * 2;\n}\ntagged.label = \"T\";\ntagged.level = 3;\n");
    let test = "import { used, tagged } from \"../src/index\";\nused();\nassert(tagged(1) == 4, \"call\");\nassert(tagged.label == \"T\" && tagged.level == 3, \"props\");";
    let h = pkg(&[("src/index.mm", &lib), ("test/t.mm", test)], &["test/t.mm"]);
    let used = uid_of(&h, "src/index.mm", "used");
    let mut rs = empty_rs();
    rs.reachable_files.insert("src/index.mm".into());
    rs.reachable_functions.insert(used);
    let sp = stubbify_package(&h, "", &rs, &StubOptions::default()).unwrap();
    assert_eq!(sp.plan.function_stubs.len(), 1);
    let report = run(&sp.install(&h));
    assert!(report.all_passed(), "{:?}", report);
}

#[test]
fn only_outermost_unreachable_function_is_stubbed() {
    let lib = padded("export function used() { return 1; }\nexport function outer(a) {\n  PAD;\n  function inner(b) {\n    let c = b * 2;\n    print(\"inner \" + str(c));\n    return c + 1;\n  }\n  return inner(a) + inner(a + 1);\n}\n");
    let h = pkg(&[("src/index.mm", &lib), ("test/t.mm", "import { used } from \"../src/index\";\nused();")], &["test/t.mm"]);
    let (rs, _) = dynamic_reachability(&h, "", &RuntimeConfig::default()).unwrap();
    let plan = plan_stubs(&h, "", &rs, &StubOptions::default()).unwrap();
    assert_eq!(plan.function_stubs, [uid_of(&h, "src/index.mm", "outer")]);
}

#[test]
fn annotated_functions_are_kept_and_searched() {
    let lib = padded("export function used() { return 1; }\n// @stub:ignore\nexport function keep(a) {\n  let f = function(b) {\n    PAD;\n    let c = b * 2;\n    print(\"inner \" + str(c));\n    return c + 1;\n  };\n  return f;\n}\n");
    let h = pkg(&[("src/index.mm", &lib), ("test/t.mm", "import { used } from \"../src/index\";\nused();")], &["test/t.mm"]);
    let (rs, _) = dynamic_reachability(&h, "", &RuntimeConfig::default()).unwrap();
    let plan = plan_stubs(&h, "", &rs, &StubOptions::default()).unwrap();
    assert_eq!(plan.skipped_annotated, [uid_of(&h, "src/index.mm", "keep")]);
    assert_eq!(plan.function_stubs.len(), 1);
    assert!(plan.function_stubs[0].starts_with("src/index.mm:4:"));
}

#[test]
fn unreached_file_with_annotation_is_not_file_stubbed() {
    let h = pkg(
        &[
            ("src/index.mm", "export function used() { return 1; }"),
            ("src/other.mm", &padded("// @stub:ignore\nexport function keep(a) {\n  return a;\n}\nexport function big(a) {\n  PAD;\n  let s = a + 1;\n  print(\"big \" + str(s));\n  return s * s + a;\n}\n")),
            ("test/t.mm", "import { used } from \"../src/index\";\nused();"),
        ],
        &["test/t.mm"],
    );
    let sp = stubbify_package(&h, "", &empty_rs(), &StubOptions::default()).unwrap();
    assert!(!sp.plan.file_stubs.contains(&"src/other.mm".to_string()));
    assert_eq!(sp.plan.function_stubs, [uid_of(&h, "src/other.mm", "big")]);
}

#[test]
fn plan_rejects_foreign_uids() {
    let h = pkg(&[("src/index.mm", "export function f() { return 1; }")], &[]);
    let mut rs = empty_rs();
    rs.reachable_functions.insert("src/index.mm:9:0".into());
    assert!(matches!(
        plan_stubs(&h, "", &rs, &StubOptions::default()),
        Err(StubError::RevisionMismatch { .. })
    ));
}

#[test]
fn reserved_stubs_name_is_rejected() {
    let h = pkg(&[("src/index.mm", "let stubs = 1;")], &[]);
    assert!(matches!(
        stubbify_package(&h, "", &empty_rs(), &StubOptions::default()),
        Err(StubError::ReservedName { .. })
    ));
}

#[test]
fn applied_stubs_are_strictly_smaller() {
    let lib = padded("export function used() { return 1; }\nexport function a(x) { return x; }\nexport function b(x) {\n  PAD;\n  let y = x + 1;\n  print(\"b \" + str(y));\n  return y * y;\n}\n");
    let h = pkg(&[("src/index.mm", &lib), ("test/t.mm", "import { used } from \"../src/index\";\nused();")], &["test/t.mm"]);
    let (sp, report) = stubbed_run(&h, &StubOptions::default());
    assert!(report.all_passed());
    let f = sp.sizes.per_file.iter().find(|f| f.path == "src/index.mm").unwrap();
    assert_eq!(f.treatment, FileTreatment::FunctionStubs);
    assert!(f.stubbed_bytes < f.original_bytes);
    let prelude = sp.sizes.per_file.iter().find(|f| f.treatment == FileTreatment::Prelude).unwrap();
    assert_eq!(prelude.stubbed_bytes, sp.prelude.len() as u64);
    assert_eq!(sp.sizes.stubbed_bytes, sp.sizes.per_file.iter().map(|f| f.stubbed_bytes).sum::<u64>());
}

#[test]
fn guarded_store_warns_inside_expanded_code() {
    let lib = padded("export function used() { return 1; }\nexport function danger(cmd) {\n  PAD;\n  let full = \"run \" + cmd;\n  print(full);\n  exec(full);\n  return full;\n}\n");
    let test = "import { used, danger } from \"../src/index\";\nused();\neval(\"danger(\\\"x\\\");\");";
    let h = pkg(&[("src/index.mm", &lib), ("test/t.mm", test)], &["test/t.mm"]);
    let (_, warn) = stubbed_run(&h, &StubOptions { guard: GuardMode::Warn, force: false });
    assert!(!warn.guard_events.is_empty());
    assert_eq!(warn.side_effect_log.len(), 1);
    let (_, off) = stubbed_run(&h, &StubOptions::default());
    assert!(off.guard_events.is_empty());
    assert_eq!(off.side_effect_log, warn.side_effect_log);
    let (sp, exit) = stubbed_run(&h, &StubOptions { guard: GuardMode::Exit, force: false });
    assert!(sp.store.guarded);
    assert_eq!(exit.guard_exit.as_deref(), Some("exec"));
    assert!(exit.side_effect_log.is_empty());
}
