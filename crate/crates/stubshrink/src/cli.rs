//! Command-line surface. Every command returns its exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use stubshrink_core::callgraph::CgMode;
use stubshrink_core::interp::{GuardMode, TestReport};
use stubshrink_core::stubbify::{SizeReport, StubOptions};

use crate::bench::{self, BenchOptions};
use crate::json::to_json;
use crate::load::load_package;
use crate::ops::{self, CgSource, Error};
use crate::output::{write_file, write_tree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_GUARD: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "stubshrink", version, about = "Shrink MiniMod packages with self-expanding stubs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Static,
    Dynamic,
}

impl From<ModeArg> for CgMode {
    fn from(m: ModeArg) -> CgMode {
        match m {
            ModeArg::Static => CgMode::Static,
            ModeArg::Dynamic => CgMode::Dynamic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GuardArg {
    Off,
    Warn,
    Exit,
}

impl From<GuardArg> for GuardMode {
    fn from(g: GuardArg) -> GuardMode {
        match g {
            GuardArg::Off => GuardMode::Off,
            GuardArg::Warn => GuardMode::Warn,
            GuardArg::Exit => GuardMode::Exit,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a reachability set and write cg.<mode>.json to the current directory.
    Cg {
        pkgdir: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
    },
    /// Replace unreachable code with stubs.
    Stubbify {
        pkgdir: PathBuf,
        /// `static`, `dynamic` or a reachability JSON file.
        #[arg(long, default_value = "static")]
        cg: String,
        #[arg(long, value_enum, default_value = "off")]
        guard: GuardArg,
        #[arg(long)]
        out: PathBuf,
        /// Replace an existing output directory.
        #[arg(long)]
        force: bool,
    },
    /// Run a package's tests.
    Run {
        pkgdir: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Bundle the package's main module into one file.
    Bundle {
        pkgdir: PathBuf,
        /// Stubbify the bundle using a call graph of the unbundled package.
        #[arg(long)]
        stubbify: bool,
        #[arg(long, default_value = "static")]
        cg: String,
        #[arg(long, value_enum, default_value = "off")]
        guard: GuardArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        /// Copy the tests, re-pointing their imports of the entry at the bundle.
        #[arg(long)]
        tests_entry: bool,
    },
    /// Benchmark every corpus client against original and stubbified subjects.
    Bench {
        corpusdir: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        /// Also write the table as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Runs a parsed command, printing to `out` and `err`.
pub fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cmd, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e);
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    match cmd {
        Command::Cg { pkgdir, mode } => cmd_cg(&pkgdir, mode.into(), out, err),
        Command::Stubbify { pkgdir, cg, guard, out: dir, force } => {
            let loaded = load_package(&pkgdir)?;
            let opts = StubOptions { guard: guard.into(), ..StubOptions::default() };
            let sp = ops::stubbify(&loaded, &CgSource::parse(&cg), &opts)?;
            write_tree(&dir, &ops::stubbed_tree(&loaded, &sp), force)?;
            print_sizes(out, &sp.sizes);
            let _ = writeln!(
                out,
                "{} file stubs, {} function stubs written to {}",
                sp.plan.file_stubs.len(),
                sp.plan.function_stubs.len(),
                dir.display()
            );
            Ok(EXIT_OK)
        }
        Command::Run { pkgdir, report } => {
            let loaded = load_package(&pkgdir)?;
            let r = ops::run_suite(&loaded.host, "");
            print_report(out, err, &r);
            if let Some(p) = report {
                write_file(&p, &to_json(&r))?;
            }
            Ok(run_exit_code(&r))
        }
        Command::Bundle { pkgdir, stubbify, cg, guard, out: dir, force, tests_entry } => {
            let loaded = load_package(&pkgdir)?;
            let source = CgSource::parse(&cg);
            let opts = StubOptions { guard: guard.into(), ..StubOptions::default() };
            let b = ops::bundle(&loaded, None, stubbify.then_some((&source, &opts)))?;
            write_tree(&dir, &ops::bundle_tree(&loaded, &b, tests_entry), force)?;
            let shake = &b.bundle.shake_report;
            let _ = writeln!(
                out,
                "bundle: {} bytes, {} functions kept, {} removed by tree-shaking",
                b.bundle.text.len(),
                shake.kept.len(),
                shake.removed.len()
            );
            if let Some(sp) = &b.stubbed {
                print_sizes(out, &sp.sizes);
            }
            Ok(EXIT_OK)
        }
        Command::Bench { corpusdir, runs, warmup, report } => {
            let r = bench::bench(&corpusdir, &BenchOptions { runs, warmup })?;
            let _ = write!(out, "{}", r.table());
            if let Some(p) = report {
                write_file(&p, &to_json(&r))?;
            }
            let mut code = EXIT_OK;
            for row in r.divergent() {
                let _ = writeln!(err, "divergence: {} / {} ({})", row.package, row.client, row.mode.as_str());
                code = EXIT_FAILURE;
            }
            for row in r.rows.iter().filter(|r| !r.deterministic) {
                let _ = writeln!(err, "warning: expansion counts vary across runs for {} / {}", row.package, row.client);
            }
            Ok(code)
        }
    }
}

fn cmd_cg(pkgdir: &Path, mode: CgMode, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let loaded = load_package(pkgdir)?;
    let cg = ops::call_graph(&loaded.host, "", mode)?;
    let total = ops::function_count(&loaded.host, "")?;
    let files = loaded.host.analyzed_closure("")?.len();
    for w in &cg.warnings {
        let _ = writeln!(err, "warning: {}", w);
    }
    if let Some(r) = &cg.report {
        if !r.all_passed() {
            let _ = writeln!(err, "warning: {} of {} tests failed while tracing", r.failed(), r.tests.len());
        }
    }
    let name = format!("cg.{}.json", mode.as_str());
    write_file(Path::new(&name), &to_json(&cg.rs))?;
    let _ = writeln!(out, "{}/{} functions reachable", cg.rs.reachable_functions.len(), total);
    let _ = writeln!(out, "{}/{} files reachable", cg.rs.reachable_files.len(), files);
    let _ = writeln!(out, "wrote {}", name);
    Ok(EXIT_OK)
}

pub fn run_exit_code(r: &TestReport) -> i32 {
    if r.guard_exit.is_some() {
        EXIT_GUARD
    } else if !r.all_passed() {
        EXIT_FAILURE
    } else {
        EXIT_OK
    }
}

fn print_report(out: &mut dyn Write, err: &mut dyn Write, r: &TestReport) {
    for t in &r.tests {
        let _ = writeln!(out, "{} {}", if t.passed { "PASS" } else { "FAIL" }, t.path);
        for a in t.assertions.iter().filter(|a| !a.ok) {
            let _ = writeln!(out, "  assertion failed: {}", a.message);
        }
        if let Some(e) = &t.error {
            let _ = writeln!(out, "  error: {}", e);
        }
    }
    for e in r.expansion_events.iter().filter(|e| !e.cache_hit) {
        let _ = writeln!(out, "expanded {} ({} bytes)", e.id, e.bytes_loaded);
    }
    for g in &r.guard_events {
        let _ = writeln!(err, "guard: {} called in {} ({})", g.name, g.test, g.mode.as_str());
    }
    let _ = writeln!(
        out,
        "{} passed, {} failed, {:.2} ms",
        r.tests.len() - r.failed(),
        r.failed(),
        r.wall_time_ms
    );
}

fn print_sizes(out: &mut dyn Write, s: &SizeReport) {
    let _ = writeln!(
        out,
        "original {} bytes, stubbed {} bytes, reduction {:.1}%",
        s.original_bytes, s.stubbed_bytes, s.reduction_pct
    );
}
