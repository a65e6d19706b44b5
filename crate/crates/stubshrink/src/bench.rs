//! Client benchmark over a corpus: each subject package is stubbified with
//! its own tests' call graph, then every client's tests run against the
//! original and the stubbified subject.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use stubshrink_core::callgraph::CgMode;
use stubshrink_core::interp::{ExpansionKind, TestReport};
use stubshrink_core::stubbify::{reduction_pct, SizeReport, StubOptions, StubbedPackage};

use crate::load::{load_package, LoadError, Loaded};
use crate::ops::{self, root_of, run_suite, CgSource, Error};

pub const CLIENTS_DIR: &str = "clients";

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub runs: usize,
    pub warmup: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { runs: 10, warmup: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct Subject {
    pub name: String,
    pub dir: PathBuf,
    pub clients: Vec<(String, PathBuf)>,
}

fn sorted_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>, LoadError> {
    let io = |source| LoadError::Io { path: dir.to_path_buf(), source };
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(io)? {
        let e = e.map_err(io)?;
        let name = e.file_name().to_string_lossy().into_owned();
        if !name.starts_with('.') && e.path().join(stubshrink_core::host::MANIFEST_FILE).is_file() {
            out.push((name, e.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// Subjects are the package directories of `corpus`; their clients live in
/// `<subject>/clients/<name>`.
pub fn discover(corpus: &Path) -> Result<Vec<Subject>, LoadError> {
    let mut subjects = Vec::new();
    for (name, dir) in sorted_dirs(corpus)? {
        let cdir = dir.join(CLIENTS_DIR);
        let clients = if cdir.is_dir() { sorted_dirs(&cdir)? } else { Vec::new() };
        subjects.push(Subject { name, dir, clients });
    }
    Ok(subjects)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub package: String,
    pub client: String,
    pub mode: CgMode,
    pub original_ms: f64,
    pub stubbed_ms: f64,
    pub slowdown_pct: f64,
    pub file_expansions: usize,
    pub function_expansions: usize,
    pub expanded_kb: f64,
    pub original_bytes: u64,
    pub stubbed_bytes: u64,
    pub expanded_bytes: u64,
    pub reduction_pct: f64,
    pub reduction_after_expansion_pct: f64,
    /// Pass/fail vectors and side-effect logs equal.
    pub same_behavior: bool,
    /// Expansion counts equal across the timed runs.
    pub deterministic: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub runs: usize,
    pub warmup: usize,
    pub rows: Vec<BenchRow>,
    /// Size report of each stubbified subject with its client expansion range.
    pub sizes: Vec<SubjectSizes>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubjectSizes {
    pub package: String,
    pub mode: CgMode,
    pub sizes: SizeReport,
}

impl BenchReport {
    /// Cells whose stubbified run behaved differently.
    pub fn divergent(&self) -> Vec<&BenchRow> {
        self.rows.iter().filter(|r| !r.same_behavior).collect()
    }

    pub fn table(&self) -> String {
        let head = ["Proj", "Client", "CG", "Orig ms", "Stub ms", "Slowdown %", "Files", "Fcts", "Exp KB"];
        let mut cells: Vec<[String; 9]> = vec![head.map(String::from)];
        for r in &self.rows {
            cells.push([
                r.package.clone(),
                r.client.clone(),
                r.mode.as_str().to_string(),
                format!("{:.2}", r.original_ms),
                format!("{:.2}", r.stubbed_ms),
                format!("{:.0}", r.slowdown_pct),
                r.file_expansions.to_string(),
                r.function_expansions.to_string(),
                format!("{:.2}", r.expanded_kb),
            ]);
        }
        let mut widths = [0usize; 9];
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut s = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i < 3 { format!("{:<w$}", c) } else { format!("{:>w$}", c) })
                .collect();
            let _ = writeln!(s, "{}", line.join("  ").trim_end());
        }
        s
    }
}

/// (stubbed / original − 1) · 100, rounded to whole percent.
pub fn slowdown_pct(original_ms: f64, stubbed_ms: f64) -> f64 {
    if original_ms <= 0.0 {
        return 0.0;
    }
    // Adding zero turns a rounded -0 into 0.
    ((stubbed_ms / original_ms - 1.0) * 100.0).round() + 0.0
}

fn expansion_counts(r: &TestReport) -> (usize, usize) {
    let first = r.expansion_events.iter().filter(|e| !e.cache_hit);
    let (mut files, mut fns) = (0, 0);
    for e in first {
        match e.kind {
            ExpansionKind::File => files += 1,
            ExpansionKind::Function => fns += 1,
        }
    }
    (files, fns)
}

/// Runs the suite `warmup + runs` times; returns the first timed report
/// and the mean time of the timed runs.
fn timed(host: &stubshrink_core::host::MemHost, opts: &BenchOptions, counts: &mut Vec<(usize, usize)>) -> (TestReport, f64) {
    for _ in 0..opts.warmup {
        run_suite(host, "");
    }
    let mut first = None;
    let mut total = 0.0;
    for _ in 0..opts.runs.max(1) {
        let r = run_suite(host, "");
        total += r.wall_time_ms;
        counts.push(expansion_counts(&r));
        first.get_or_insert(r);
    }
    (first.expect("at least one run"), total / opts.runs.max(1) as f64)
}

pub fn same_behavior(a: &TestReport, b: &TestReport) -> bool {
    a.pass_fail() == b.pass_fail() && a.side_effect_log == b.side_effect_log
}

/// Stubbifies `subject` (loaded at its own directory) with its tests'
/// call graph in `mode`.
pub fn stubbify_subject(subject: &Loaded, mode: CgMode) -> Result<StubbedPackage, Error> {
    ops::stubbify(subject, &CgSource::Mode(mode), &StubOptions::default())
}

/// Client host whose copy of the subject is replaced by `sp`.
pub fn substitute(client: &Loaded, subject_dir: &Path, sp: &StubbedPackage) -> Result<stubshrink_core::host::MemHost, Error> {
    let root = root_of(client, subject_dir)
        .ok_or_else(|| Error::Usage(format!("{} does not depend on {}", client.dir.display(), subject_dir.display())))?;
    Ok(sp.relocate(&root).install(&client.host))
}

pub fn bench_cell(
    subject: &Subject,
    client_name: &str,
    client: &Loaded,
    mode: CgMode,
    sp: &StubbedPackage,
    opts: &BenchOptions,
) -> Result<BenchRow, Error> {
    let stubbed_host = substitute(client, &subject.dir, sp)?;
    let (orig, orig_ms) = timed(&client.host, opts, &mut Vec::new());
    let mut counts = Vec::new();
    let (stub, stub_ms) = timed(&stubbed_host, opts, &mut counts);
    let (file_expansions, function_expansions) = counts[0];
    let expanded = sp.sizes.expanded_bytes(stub.first_fetch_bytes());
    Ok(BenchRow {
        package: subject.name.clone(),
        client: client_name.to_string(),
        mode,
        original_ms: orig_ms,
        stubbed_ms: stub_ms,
        slowdown_pct: slowdown_pct(orig_ms, stub_ms),
        file_expansions,
        function_expansions,
        expanded_kb: stub.first_fetch_bytes() as f64 / 1024.0,
        original_bytes: sp.sizes.original_bytes,
        stubbed_bytes: sp.sizes.stubbed_bytes,
        expanded_bytes: expanded,
        reduction_pct: sp.sizes.reduction_pct,
        reduction_after_expansion_pct: reduction_pct(sp.sizes.original_bytes, expanded),
        same_behavior: same_behavior(&orig, &stub),
        deterministic: counts.iter().all(|c| *c == counts[0]),
    })
}

pub fn bench(corpus: &Path, opts: &BenchOptions) -> Result<BenchReport, Error> {
    let mut report = BenchReport { runs: opts.runs, warmup: opts.warmup, ..BenchReport::default() };
    for subject in discover(corpus)? {
        let loaded = load_package(&subject.dir)?;
        let clients = subject
            .clients
            .iter()
            .map(|(n, d)| Ok((n.clone(), load_package(d)?)))
            .collect::<Result<Vec<_>, Error>>()?;
        for mode in [CgMode::Static, CgMode::Dynamic] {
            let sp = stubbify_subject(&loaded, mode)?;
            let mut fetched = Vec::new();
            for (name, client) in &clients {
                let row = bench_cell(&subject, name, client, mode, &sp, opts)?;
                fetched.push(row.expanded_bytes - row.stubbed_bytes);
                report.rows.push(row);
            }
            let mut sizes = sp.sizes.clone();
            sizes.set_expansions(&fetched);
            report.sizes.push(SubjectSizes { package: subject.name.clone(), mode, sizes });
        }
    }
    Ok(report)
}
