//! Reading packages from disk into an in-memory host.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use stubshrink_core::host::{path as hpath, Manifest, MemHost, MANIFEST_FILE, SOURCE_EXT};
use stubshrink_core::interp::GuardMode;
use stubshrink_core::stubbify::{runtime_for, CodeStore, PRELUDE_FILE, STORE_FILE};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{0}: not a package directory (no {MANIFEST_FILE})")]
    NotAPackage(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LoadError + '_ {
    move |source| LoadError::Io { path: path.to_path_buf(), source }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, LoadError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| LoadError::Json { path: path.to_path_buf(), source })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, LoadError> {
    let p = dir.join(MANIFEST_FILE);
    if !p.is_file() {
        return Err(LoadError::NotAPackage(dir.to_path_buf()));
    }
    read_json(&p)
}

/// A package loaded with its directory as the host root `""`.
pub struct Loaded {
    pub host: MemHost,
    pub dir: PathBuf,
    /// Filesystem directory of every loaded package root.
    pub dirs: BTreeMap<String, PathBuf>,
}

impl Loaded {
    pub fn manifest(&self) -> &Manifest {
        &self.host.package("").expect("root package").manifest
    }
}

/// Adds every source file under `dir` as `<root>/<relative path>`.
/// Hidden entries and nested packages are skipped; nested packages are
/// only loaded when something depends on them.
fn add_sources(host: &mut MemHost, root: &str, dir: &Path, rel: &str) -> Result<(), LoadError> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let name = e.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        let p = e.path();
        let child = if rel.is_empty() { name.clone() } else { format!("{}/{}", rel, name) };
        if p.is_dir() {
            if p.join(MANIFEST_FILE).is_file() {
                continue;
            }
            add_sources(host, root, &p, &child)?;
        } else if name.ends_with(SOURCE_EXT) {
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            host.add_file(&hpath::join(root, &child), &text);
        }
    }
    Ok(())
}

/// Loads the package in `dir` and, transitively, the packages it depends
/// on (development dependencies of the root package included).
/// Dependencies outside `dir` get host roots starting with `..`.
pub fn load_package(dir: &Path) -> Result<Loaded, LoadError> {
    let mut host = MemHost::new();
    let mut dirs = BTreeMap::new();
    let mut work = VecDeque::from([(String::new(), dir.to_path_buf(), true)]);
    while let Some((root, fsdir, with_dev)) = work.pop_front() {
        if dirs.contains_key(&root) {
            continue;
        }
        let manifest = read_manifest(&fsdir)?;
        add_sources(&mut host, &root, &fsdir, "")?;
        let mut deps: Vec<&String> = manifest.dependencies.values().collect();
        if with_dev {
            deps.extend(manifest.dev_dependencies.values());
        }
        for rel in deps {
            work.push_back((hpath::join(&root, rel), fsdir.join(rel), false));
        }
        let stubbed = manifest.stubbed;
        let guard = manifest.guard_mode.unwrap_or(GuardMode::Off);
        host.add_package(&root, manifest);
        if stubbed {
            let prelude_path = fsdir.join(PRELUDE_FILE);
            let prelude = fs::read_to_string(&prelude_path).map_err(io_err(&prelude_path))?;
            let store: CodeStore = read_json(&fsdir.join(STORE_FILE))?;
            let rt = runtime_for(&root, &prelude, store, guard)
                .map_err(|e| LoadError::Invalid { path: prelude_path.clone(), message: e.to_string() })?;
            host.set_stub_runtime(&root, rt);
        }
        dirs.insert(root, fsdir);
    }
    Ok(Loaded { host, dir: dir.to_path_buf(), dirs })
}
