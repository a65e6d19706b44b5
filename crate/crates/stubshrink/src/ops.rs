//! Pipeline steps shared by the command line, the benchmark and tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use stubshrink_core::bundler::{self, Bundle, BundleError};
use stubshrink_core::callgraph::{dynamic_reachability, static_reachability, CgError, CgMode, ReachabilitySet, Warning};
use stubshrink_core::host::{path as hpath, HostError, Manifest, MemHost, ModuleHost, MANIFEST_FILE};
use stubshrink_core::interp::{run_tests, NoHooks, RuntimeConfig, TestReport};
use stubshrink_core::lang;
use stubshrink_core::stubbify::{self, StubError, StubOptions, StubbedPackage, PRELUDE_FILE, STORE_FILE};

use crate::json::to_json;
use crate::load::{read_json, LoadError, Loaded};
use crate::output::OutputError;

pub const SIZE_REPORT_FILE: &str = "size.report.json";
pub const PLAN_FILE: &str = "stub.plan.json";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}")]
    Host(HostError),
    #[error("{0}")]
    Cg(CgError),
    #[error("{0}")]
    Stub(StubError),
    #[error("{0}")]
    Bundle(BundleError),
    #[error("{0}")]
    Usage(String),
}

impl From<HostError> for Error {
    fn from(e: HostError) -> Self {
        Error::Host(e)
    }
}

impl From<CgError> for Error {
    fn from(e: CgError) -> Self {
        Error::Cg(e)
    }
}

impl From<StubError> for Error {
    fn from(e: StubError) -> Self {
        Error::Stub(e)
    }
}

impl From<BundleError> for Error {
    fn from(e: BundleError) -> Self {
        Error::Bundle(e)
    }
}

/// Where a reachability set comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CgSource {
    Mode(CgMode),
    File(PathBuf),
}

impl CgSource {
    pub fn parse(s: &str) -> CgSource {
        match s {
            "static" => CgSource::Mode(CgMode::Static),
            "dynamic" => CgSource::Mode(CgMode::Dynamic),
            other => CgSource::File(PathBuf::from(other)),
        }
    }
}

pub struct CgOutcome {
    pub rs: ReachabilitySet,
    pub warnings: Vec<Warning>,
    /// Test run behind a dynamic call graph.
    pub report: Option<TestReport>,
}

pub fn call_graph(host: &MemHost, root: &str, mode: CgMode) -> Result<CgOutcome, Error> {
    Ok(match mode {
        CgMode::Static => {
            let (rs, warnings) = static_reachability(host, root)?;
            CgOutcome { rs, warnings, report: None }
        }
        CgMode::Dynamic => {
            let (rs, report) = dynamic_reachability(host, root, &RuntimeConfig::default())?;
            CgOutcome { rs, warnings: Vec::new(), report: Some(report) }
        }
    })
}

pub fn reachability(host: &MemHost, root: &str, source: &CgSource) -> Result<ReachabilitySet, Error> {
    match source {
        CgSource::Mode(m) => Ok(call_graph(host, root, *m)?.rs),
        CgSource::File(p) => Ok(read_json(p)?),
    }
}

/// Number of functions in the analysed closure.
pub fn function_count(host: &MemHost, root: &str) -> Result<usize, Error> {
    let mut n = 0;
    for p in host.analyzed_closure(root)? {
        n += lang::functions_of(&*host.load(&p)?).len();
    }
    Ok(n)
}

/// Runs the package's tests, timing only the run itself.
pub fn run_suite(host: &MemHost, root: &str) -> TestReport {
    let tests = host.test_paths(root);
    let start = Instant::now();
    let mut report = run_tests(host, &tests, &RuntimeConfig::default(), &mut NoHooks);
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    report
}

fn manifests_under(host: &MemHost, root: &str) -> Vec<(String, Manifest)> {
    host.packages()
        .filter(|e| e.root == root || hpath::is_under(&e.root, root))
        .map(|e| (e.root.clone(), e.manifest.clone()))
        .collect()
}

/// Output tree of a stubbified package: transformed sources, untouched
/// tests and other files, manifests, prelude, store and reports.
pub fn stubbed_tree(loaded: &Loaded, sp: &StubbedPackage) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for (p, text) in loaded.host.files() {
        if hpath::is_under(p, &sp.root) || sp.root.is_empty() && !p.starts_with("..") {
            let text = sp.sources.get(p).map(|s| s.as_str()).unwrap_or(text);
            files.insert(hpath::strip_root(p, &sp.root).to_string(), text.to_string());
        }
    }
    for (root, mut m) in manifests_under(&loaded.host, &sp.root) {
        if root == sp.root {
            m.stubbed = true;
            m.guard_mode = Some(sp.plan.guard_mode);
        }
        files.insert(hpath::join(hpath::strip_root(&root, &sp.root), MANIFEST_FILE), to_json(&m));
    }
    files.insert(PRELUDE_FILE.into(), sp.prelude.clone());
    files.insert(STORE_FILE.into(), to_json(&sp.store));
    files.insert(SIZE_REPORT_FILE.into(), to_json(&sp.sizes));
    files.insert(PLAN_FILE.into(), to_json(&sp.plan));
    files
}

pub fn stubbify(loaded: &Loaded, source: &CgSource, opts: &StubOptions) -> Result<StubbedPackage, Error> {
    let rs = reachability(&loaded.host, "", source)?;
    Ok(stubbify::stubbify_package(&loaded.host, "", &rs, opts)?)
}

pub struct BundleOutcome {
    pub bundle: Bundle,
    /// Host with the bundle at `bundle.mm` and tests pointing at it.
    pub repointed: MemHost,
    pub stubbed: Option<StubbedPackage>,
}

/// Bundles the package entry (`entry`, default the manifest's main) and
/// optionally stubbifies the bundle using a call graph of the original.
pub fn bundle(
    loaded: &Loaded,
    entry: Option<&str>,
    stub: Option<(&CgSource, &StubOptions)>,
) -> Result<BundleOutcome, Error> {
    let host = &loaded.host;
    let entry = match entry {
        Some(e) => hpath::normalize(e),
        None => host.main_path("").ok_or_else(|| Error::Usage("package has no main".into()))?,
    };
    if host.file(&entry).is_none() {
        return Err(Error::Usage(format!("entry {} does not exist", entry)));
    }
    let b = bundler::bundle(host, "", &entry)?;
    let repointed = bundler::repoint_tests(host, "", &b)?;
    let stubbed = match stub {
        Some((source, opts)) => {
            let rs = reachability(host, "", source)?;
            Some(bundler::stubbify_bundle(&b, "", &rs, opts)?)
        }
        None => None,
    };
    Ok(BundleOutcome { bundle: b, repointed, stubbed })
}

/// Output tree of a bundle: the bundle (stubbified when requested), the
/// position map and shake report. With `with_tests` the package's tests
/// are copied, re-pointed at the bundle; otherwise the manifest lists none.
pub fn bundle_tree(loaded: &Loaded, out: &BundleOutcome, with_tests: bool) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let mut m = bundler::bundle_manifest(loaded.manifest());
    if with_tests {
        for t in loaded.host.test_paths("") {
            if let Some(text) = out.repointed.file(&t) {
                files.insert(t.clone(), text.to_string());
            }
        }
    } else {
        m.tests.clear();
        m.dev_dependencies.clear();
    }
    let b = &out.bundle;
    files.insert(bundler::BUNDLE_FILE.into(), b.text.clone());
    files.insert(bundler::MAP_FILE.into(), to_json(&b.position_map));
    files.insert(bundler::SHAKE_FILE.into(), to_json(&b.shake_report));
    if let Some(sp) = &out.stubbed {
        files.insert(bundler::BUNDLE_FILE.into(), sp.sources[&b.path].clone());
        files.insert(PRELUDE_FILE.into(), sp.prelude.clone());
        files.insert(STORE_FILE.into(), to_json(&sp.store));
        files.insert(SIZE_REPORT_FILE.into(), to_json(&sp.sizes));
        files.insert(PLAN_FILE.into(), to_json(&sp.plan));
        m.stubbed = true;
        m.guard_mode = Some(sp.plan.guard_mode);
    }
    files.insert(MANIFEST_FILE.into(), to_json(&m));
    files
}

/// Host root under which `loaded` sees the package in directory `dir`.
pub fn root_of(loaded: &Loaded, dir: &Path) -> Option<String> {
    let want = dir.canonicalize().ok()?;
    loaded
        .dirs
        .iter()
        .find(|(_, d)| d.canonicalize().ok().as_deref() == Some(want.as_path()))
        .map(|(r, _)| r.clone())
}

/// Runs `f` on a thread with a stack deep enough for the interpreter's
/// recursion limit.
pub fn with_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .stack_size(1 << 29)
        .spawn(f)
        .expect("spawn worker thread")
        .join()
        .unwrap_or_else(|e| std::panic::resume_unwind(e))
}
