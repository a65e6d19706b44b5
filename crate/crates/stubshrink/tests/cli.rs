mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn stubshrink(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stubshrink")).current_dir(cwd).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FIVE: &[(&str, &str)] = &[
    (
        "minipkg.json",
        r#"{ "name": "five", "version": "1.0.0", "main": "index.mm", "tests": ["test/t.mm"] }"#,
    ),
    (
        "index.mm",
        "function helper(x) {\n  return x + 1;\n}\n\nexport function one(x) {\n  return helper(x);\n}\n\nexport function two(x) {\n  return x * 2;\n}\n\nexport function three(x) {\n  return x * 3;\n}\n\nexport function four(x) {\n  return x * 4;\n}\n",
    ),
    ("test/t.mm", "import { one, two } from \"../index\";\nassert(one(1) == 2, \"one\");\nassert(two(2) == 4, \"two\");\n"),
];

#[test]
fn cg_prints_counts_and_writes_the_set() {
    let tmp = tempfile::tempdir().unwrap();
    let pkg = tmp.path().join("five");
    common::write_package(&pkg, FIVE);
    for mode in ["static", "dynamic"] {
        let o = stubshrink(tmp.path(), &["cg", path(&pkg), "--mode", mode]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("3/5 functions reachable"), "{}", stdout(&o));
        let rs = json(&tmp.path().join(format!("cg.{}.json", mode)));
        assert_eq!(rs["mode"], mode);
        assert_eq!(rs["reachableFunctions"].as_array().unwrap().len(), 3);
        assert_eq!(rs["entryPoints"], serde_json::json!(["test/t.mm"]));
    }
    let text = fs::read_to_string(tmp.path().join("cg.static.json")).unwrap();
    let keys: Vec<usize> = ["entryPoints", "mode", "reachableFiles", "reachableFunctions"]
        .iter()
        .map(|k| text.find(&format!("\"{}\"", k)).unwrap())
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]), "keys not sorted:\n{}", text);
}

#[test]
fn cg_on_missing_directory_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = stubshrink(tmp.path(), &["cg", "no/such/dir", "--mode", "static"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not a package"), "{}", stderr(&o));
}

#[test]
fn dynamic_cg_survives_failing_tests() {
    let tmp = tempfile::tempdir().unwrap();
    let pkg = tmp.path().join("five");
    common::write_package(&pkg, FIVE);
    fs::write(pkg.join("test/t.mm"), "import { one } from \"../index\";\nassert(one(1) == 3, \"wrong on purpose\");\n").unwrap();
    let o = stubshrink(tmp.path(), &["cg", path(&pkg), "--mode", "dynamic"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: 1 of 1 tests failed"), "{}", stderr(&o));
    let rs = json(&tmp.path().join("cg.dynamic.json"));
    assert_eq!(rs["reachableFunctions"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(stubshrink(tmp.path(), &["frobnicate"]).status.code(), Some(3));
    assert_eq!(stubshrink(tmp.path(), &["cg", ".", "--mode", "sideways"]).status.code(), Some(3));
    assert_eq!(stubshrink(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn stubbify_writes_a_runnable_package_and_respects_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let web = common::corpus().join("webshapes");
    let o = stubshrink(tmp.path(), &["stubbify", path(&web), "--cg", "static", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("reduction 41.6%"), "{}", stdout(&o));
    for f in ["minipkg.json", "stubs.prelude.mm", "stubs.store.json", "size.report.json", "stub.plan.json", "test/index.test.mm"] {
        assert!(out.join(f).is_file(), "missing {}", f);
    }
    let m = json(&out.join("minipkg.json"));
    assert_eq!(m["stubbed"], true);
    assert_eq!(m["guardMode"], "off");
    let sizes = json(&out.join("size.report.json"));
    let per_file: u64 = sizes["perFile"].as_array().unwrap().iter().map(|f| f["stubbedBytes"].as_u64().unwrap()).sum();
    assert_eq!(per_file, sizes["stubbedBytes"].as_u64().unwrap());
    // Tests are copied untouched.
    assert_eq!(fs::read(out.join("test/index.test.mm")).unwrap(), fs::read(web.join("test/index.test.mm")).unwrap());

    let run = stubshrink(tmp.path(), &["run", path(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", stdout(&run));

    let again = stubshrink(tmp.path(), &["stubbify", path(&web), "--out", path(&out)]);
    assert_eq!(again.status.code(), Some(3));
    assert!(stderr(&again).contains("already exists"));
    let forced = stubshrink(tmp.path(), &["stubbify", path(&web), "--out", path(&out), "--force"]);
    assert_eq!(forced.status.code(), Some(0));
}

#[test]
fn stubbify_accepts_a_reachability_file() {
    let tmp = tempfile::tempdir().unwrap();
    let web = common::corpus().join("webshapes");
    assert_eq!(stubshrink(tmp.path(), &["cg", path(&web), "--mode", "dynamic"]).status.code(), Some(0));
    let out = tmp.path().join("out");
    let o = stubshrink(tmp.path(), &["stubbify", path(&web), "--cg", "cg.dynamic.json", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let direct = tmp.path().join("direct");
    stubshrink(tmp.path(), &["stubbify", path(&web), "--cg", "dynamic", "--out", path(&direct)]);
    assert_eq!(fs::read(out.join("stub.plan.json")).unwrap(), fs::read(direct.join("stub.plan.json")).unwrap());
}

#[test]
fn run_reports_expansions_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let web = common::corpus().join("webshapes");
    let report = tmp.path().join("orig.json");
    let o = stubshrink(tmp.path(), &["run", path(&web.join("clients/inspector")), "--report", path(&report)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&report)["expansionEvents"], serde_json::json!([]));

    let subject = tmp.path().join("subject");
    stubshrink(tmp.path(), &["stubbify", path(&web), "--cg", "static", "--out", path(&subject)]);
    let client = common::stage_client(tmp.path(), &web.join("clients/inspector"), &web);
    let report = tmp.path().join("stubbed.json");
    let o = stubshrink(tmp.path(), &["run", path(&client), "--report", path(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("expanded deps/shapekit/index.mm:"), "{}", stdout(&o));
    let events = json(&report)["expansionEvents"].as_array().unwrap().clone();
    assert!(!events.is_empty());
    assert!(events.iter().all(|e| e["bytesLoaded"].as_u64().unwrap() > 0 || e["cacheHit"] == true));

    let pkg = tmp.path().join("five");
    common::write_package(&pkg, FIVE);
    fs::write(pkg.join("test/t.mm"), "assert(false, \"no\");\n").unwrap();
    assert_eq!(stubshrink(tmp.path(), &["run", path(&pkg)]).status.code(), Some(1));
}

#[test]
fn guard_modes_on_a_client_of_the_eval_package() {
    let dep = common::corpus().join("deprecator");
    for (mode, code) in [("warn", 0), ("exit", 2), ("off", 0)] {
        let tmp = tempfile::tempdir().unwrap();
        let subject = tmp.path().join("subject");
        let o = stubshrink(tmp.path(), &["stubbify", path(&dep), "--cg", "dynamic", "--guard", mode, "--out", path(&subject)]);
        assert_eq!(o.status.code(), Some(0));
        let client = common::stage_client(tmp.path(), &dep.join("clients/legacy"), &dep);
        let report = tmp.path().join("r.json");
        let o = stubshrink(tmp.path(), &["run", path(&client), "--report", path(&report)]);
        assert_eq!(o.status.code(), Some(code), "{} mode: {}", mode, stdout(&o));
        let guards = json(&report)["guardEvents"].as_array().unwrap().clone();
        if mode == "off" {
            assert!(guards.is_empty());
        } else {
            assert_eq!(guards[0]["name"], "eval");
            assert!(stderr(&o).contains("guard: eval called"), "{}", stderr(&o));
        }
    }
}

fn tree_bytes(dir: &Path, skip: &[&str]) -> u64 {
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let name = e.file_name().to_string_lossy().into_owned();
        if skip.contains(&name.as_str()) {
            continue;
        }
        if e.path().is_dir() {
            n += tree_bytes(&e.path(), skip);
        } else if name.ends_with(".mm") {
            n += e.metadata().unwrap().len();
        }
    }
    n
}

#[test]
fn bundle_shrinks_webshapes_and_stubbified_bundle_is_smaller_still() {
    let tmp = tempfile::tempdir().unwrap();
    let web = common::corpus().join("webshapes");
    let plain = tmp.path().join("plain");
    let o = stubshrink(tmp.path(), &["bundle", path(&web), "--out", path(&plain), "--tests-entry"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let plain_bytes = fs::metadata(plain.join("bundle.mm")).unwrap().len();
    assert!(plain_bytes < tree_bytes(&web, &["test", "clients"]));
    assert!(json(&plain.join("shake.report.json"))["removed"].as_array().unwrap().len() > 0);
    assert!(json(&plain.join("bundle.map.json")).as_object().unwrap().len() > 0);
    assert_eq!(stubshrink(tmp.path(), &["run", path(&plain)]).status.code(), Some(0));

    let stubbed = tmp.path().join("stubbed");
    let o = stubshrink(tmp.path(), &["bundle", path(&web), "--stubbify", "--cg", "static", "--out", path(&stubbed), "--tests-entry"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stubbed_bytes = tree_bytes(&stubbed, &["test"]);
    assert!(stubbed_bytes < plain_bytes, "{} vs {}", stubbed_bytes, plain_bytes);
    let r = stubshrink(tmp.path(), &["run", path(&stubbed)]);
    assert_eq!(r.status.code(), Some(0), "{}", stdout(&r));
}

#[test]
fn bundle_without_tests_entry_drops_tests() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = stubshrink(tmp.path(), &["bundle", path(&common::corpus().join("tinyglob")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out.join("test").exists());
    assert_eq!(json(&out.join("minipkg.json"))["tests"], serde_json::json!([]));
}

#[test]
fn bundling_a_cycle_fails_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = stubshrink(tmp.path(), &["bundle", path(&common::fixtures().join("cyclic")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("import cycle: src/a.mm -> src/b.mm -> src/a.mm"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bench_prints_the_table_and_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    common::copy_dir(&common::corpus().join("tinyglob"), &corpus.join("tinyglob"));
    let report = tmp.path().join("bench.json");
    let o = stubshrink(tmp.path(), &["bench", path(&corpus), "--runs", "2", "--warmup", "1", "--report", path(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    for col in ["Proj", "Client", "Orig ms", "Stub ms", "Slowdown %", "Files", "Fcts", "Exp KB"] {
        assert!(header.contains(col), "{}", header);
    }
    assert_eq!(text.lines().count(), 5);
    let r = json(&report);
    assert_eq!(r["runs"], 2);
    assert_eq!(r["rows"].as_array().unwrap().len(), 4);
    let sizes = &r["sizes"][0]["sizes"];
    let range = sizes["expandedBytesRange"].as_array().unwrap();
    assert!(range[0].as_u64() <= range[1].as_u64());
    assert!(sizes["reductionAfterExpansionRange"][0].as_f64().unwrap() < 0.0);
}
