use stubshrink_core::bundler::{bundle, repoint_tests};
use stubshrink_core::callgraph::{dynamic_reachability, static_reachability};
use stubshrink_core::host::{Manifest, MemHost};
use stubshrink_core::interp::{run_tests, NoHooks, RuntimeConfig, TestReport};
use stubshrink_core::stubbify::{stubbify_package, StubOptions};

const UTIL: &str = r#"export function clamp(x, lo, hi) {
  if (x < lo) {
    return lo;
  }
  if (x > hi) {
    return hi;
  }
  return x;
}

export function table(rows) {
  let out = "";
  let i = 0;
  while (i < len(rows)) {
    let row = rows[i];
    let j = 0;
    while (j < len(row)) {
      out = out + str(row[j]) + " | ";
      j = j + 1;
    }
    out = out + "\n";
    i = i + 1;
  }
  return out;
}
"#;

const LIB: &str = r#"import { clamp, table } from "./util";

export function score(x) {
  return clamp(x * 10, 0, 100);
}

function label(x) {
  if (x > 5) {
    return "high";
  }
  return "low";
}

export function report(xs) {
  let rows = [];
  let i = 0;
  while (i < len(xs)) {
    push(rows, ["item " + str(i), score(xs[i]), label(xs[i])]);
    i = i + 1;
  }
  return table(rows);
}
"#;

const TEST: &str = "import { score } from \"../lib\";\nassert(score(3) == 30, \"score\");\nassert(score(20) == 100, \"clamped\");\nprint(score(0));\n";

fn host() -> MemHost {
    let mut h = MemHost::new();
    h.add_package(
        "pkg",
        Manifest {
            name: "scores".into(),
            version: "1.0.0".into(),
            main: "lib.mm".into(),
            tests: vec!["test/t.mm".into()],
            ..Manifest::default()
        },
    );
    h.add_file("pkg/lib.mm", LIB);
    h.add_file("pkg/util.mm", UTIL);
    h.add_file("pkg/test/t.mm", TEST);
    h
}

fn run(h: &MemHost) -> TestReport {
    run_tests(h, &h.test_paths("pkg"), &RuntimeConfig::default(), &mut NoHooks)
}

#[test]
fn static_and_dynamic_sets_agree_on_a_simple_package() {
    let h = host();
    let (st, _) = static_reachability(&h, "pkg").unwrap();
    let (dy, report) = dynamic_reachability(&h, "pkg", &RuntimeConfig::default()).unwrap();
    assert!(report.all_passed());
    assert!(dy.reachable_functions.is_subset(&st.reachable_functions));
    // score and clamp run; report, label and table never do.
    assert_eq!(dy.reachable_functions.len(), 2, "{:?}", dy.reachable_functions);
    assert!(dy.reachable_functions.iter().any(|u| u.contains("util.mm")));
}

#[test]
fn stubbed_package_behaves_the_same_and_is_smaller() {
    let h = host();
    let want = run(&h);
    let (rs, _) = static_reachability(&h, "pkg").unwrap();
    let sp = stubbify_package(&h, "pkg", &rs, &StubOptions::default()).unwrap();
    assert!(!sp.plan.function_stubs.is_empty());
    // On a package this small the prelude outweighs the savings, but every
    // transformed file shrinks.
    for f in sp.sizes.per_file.iter().filter(|f| f.original_bytes > 0 && f.path.ends_with(".mm") && !f.path.starts_with("test/")) {
        assert!(f.stubbed_bytes < f.original_bytes, "{:?}", f);
    }
    let got = run(&sp.install(&h));
    assert_eq!(got.pass_fail(), want.pass_fail());
    assert_eq!(got.tests[0].output, want.tests[0].output);
    // The tests never reach report or table, so nothing expands.
    assert!(got.expansion_events.is_empty(), "{:?} {:?}", got.expansion_events, sp.plan);
}

#[test]
fn stubs_expand_when_a_caller_reaches_them() {
    let mut h = host();
    let (rs, _) = static_reachability(&h, "pkg").unwrap();
    let sp = stubbify_package(&h, "pkg", &rs, &StubOptions::default()).unwrap();
    h.add_file("pkg/test/t.mm", "import { report } from \"../lib\";\nprint(report([1, 9]));\n");
    let want = run(&h);
    let got = run(&sp.install(&h));
    assert!(want.all_passed());
    assert_eq!(got.tests[0].output, want.tests[0].output);
    assert!(!got.expansion_events.is_empty());
}

#[test]
fn bundle_is_self_contained_and_runs_the_tests() {
    let h = host();
    let b = bundle(&h, "pkg", "pkg/lib.mm").unwrap();
    assert!(!b.text.contains("import "));
    let repointed = repoint_tests(&h, "pkg", &b).unwrap();
    let got = run(&repointed);
    assert!(got.all_passed(), "{:?}", got.tests[0].error);
    assert_eq!(got.tests[0].output, run(&h).tests[0].output);
}
