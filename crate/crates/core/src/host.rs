//! Packages, manifests, module resolution and the in-memory module host.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use crate::interp::{GuardMode, StubRuntime};
use crate::lang::{self, LangError, Module};

pub const MANIFEST_FILE: &str = "minipkg.json";
pub const SOURCE_EXT: &str = ".mm";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", deny_unknown_fields))]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub main: String,
    pub tests: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub dependencies: BTreeMap<String, String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub dev_dependencies: BTreeMap<String, String>,
    /// Present on stubbified output only.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "core::ops::Not::not"))]
    pub stubbed: bool,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub guard_mode: Option<GuardMode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HostError {
    /// A bare specifier that names no dependency of the requiring package.
    MissingDependency { spec: String, from: String },
    /// A dependency entry whose directory holds no registered package.
    MissingPackage { dir: String },
    ModuleNotFound { path: String },
    Lang(LangError),
}

impl fmt::Display for HostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HostError::MissingDependency { spec, from } => {
                write!(f, "cannot resolve \"{}\" from {}: no such dependency", spec, from)
            }
            HostError::MissingPackage { dir } => write!(f, "no package manifest in {}", dir),
            HostError::ModuleNotFound { path } => write!(f, "module not found: {}", path),
            HostError::Lang(e) => write!(f, "{}", e),
        }
    }
}

impl From<LangError> for HostError {
    fn from(e: LangError) -> Self {
        HostError::Lang(e)
    }
}

/// What the interpreter needs from its surroundings.
pub trait ModuleHost {
    /// Resolves `spec` as written in module `from` to a module path.
    fn resolve(&self, from: &str, spec: &str) -> Result<String, HostError>;
    fn load(&self, path: &str) -> Result<Rc<Module>, HostError>;
    /// Stub runtime of the nearest stubbified package containing `path`.
    fn stub_runtime(&self, path: &str) -> Option<Rc<StubRuntime>>;
    /// Strictest guard mode among the stubbified packages.
    fn guard_mode(&self) -> GuardMode;
}

/// Slash-separated relative paths. Leading `..` components are kept so
/// that packages outside the host root can still be addressed.
pub mod path {
    use alloc::string::String;
    use alloc::vec::Vec;

    pub fn normalize(p: &str) -> String {
        let mut parts: Vec<&str> = Vec::new();
        for c in p.split('/') {
            match c {
                "" | "." => {}
                ".." => {
                    if matches!(parts.last(), Some(&last) if last != "..") {
                        parts.pop();
                    } else {
                        parts.push("..");
                    }
                }
                c => parts.push(c),
            }
        }
        parts.join("/")
    }

    pub fn join(dir: &str, rel: &str) -> String {
        if dir.is_empty() {
            normalize(rel)
        } else {
            normalize(&alloc::format!("{}/{}", dir, rel))
        }
    }

    pub fn dirname(p: &str) -> &str {
        match p.rfind('/') {
            Some(i) => &p[..i],
            None => "",
        }
    }

    /// Whether `p` lies inside directory `root` (`""` is the host root).
    pub fn is_under(p: &str, root: &str) -> bool {
        if root.is_empty() {
            !p.starts_with("../") && p != ".."
        } else {
            p.len() > root.len() && p.starts_with(root) && p.as_bytes()[root.len()] == b'/'
        }
    }

    /// Import specifier that leads from a module in `from_dir` to the file
    /// `to`, without the source extension.
    pub fn specifier(from_dir: &str, to: &str) -> String {
        let from = normalize(from_dir);
        let to = normalize(to);
        let a: Vec<&str> = from.split('/').filter(|c| !c.is_empty()).collect();
        let b: Vec<&str> = to.split('/').filter(|c| !c.is_empty()).collect();
        let common = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
        let mut parts: Vec<&str> = Vec::new();
        for _ in common..a.len() {
            parts.push("..");
        }
        parts.extend(&b[common..]);
        let mut out = parts.join("/");
        if let Some(stripped) = out.strip_suffix(super::SOURCE_EXT) {
            out = String::from(stripped);
        }
        if out.starts_with("../") {
            out
        } else {
            alloc::format!("./{}", out)
        }
    }

    /// `p` relative to `root`; `p` must lie inside it.
    pub fn strip_root<'a>(p: &'a str, root: &str) -> &'a str {
        if root.is_empty() {
            p
        } else {
            &p[root.len() + 1..]
        }
    }
}

#[derive(Debug, Clone)]
pub struct PackageEntry {
    pub root: String,
    pub manifest: Manifest,
    pub stub: Option<Rc<StubRuntime>>,
}

/// Module host over an in-memory file table. Paths are relative to the host
/// root, which is normally the directory of the package under study.
#[derive(Default)]
pub struct MemHost {
    files: BTreeMap<String, Rc<str>>,
    packages: BTreeMap<String, PackageEntry>,
    parsed: RefCell<BTreeMap<String, Rc<Module>>>,
}

impl MemHost {
    pub fn new() -> MemHost {
        MemHost::default()
    }

    pub fn add_file(&mut self, path: &str, text: &str) {
        let p = path::normalize(path);
        self.parsed.get_mut().remove(&p);
        self.files.insert(p, text.into());
    }

    pub fn add_package(&mut self, root: &str, manifest: Manifest) {
        let root = path::normalize(root);
        self.packages.insert(root.clone(), PackageEntry { root, manifest, stub: None });
    }

    /// Attaches a stub runtime to an already registered package.
    pub fn set_stub_runtime(&mut self, root: &str, rt: StubRuntime) {
        let root = path::normalize(root);
        if let Some(p) = self.packages.get_mut(&root) {
            p.stub = Some(Rc::new(rt));
        }
    }

    pub fn files(&self) -> &BTreeMap<String, Rc<str>> {
        &self.files
    }

    pub fn file(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(|s| &**s)
    }

    pub fn package(&self, root: &str) -> Option<&PackageEntry> {
        self.packages.get(root)
    }

    pub fn packages(&self) -> impl Iterator<Item = &PackageEntry> {
        self.packages.values()
    }

    /// Innermost package whose root contains `p`.
    pub fn owner(&self, p: &str) -> Option<&PackageEntry> {
        self.packages
            .values()
            .filter(|e| path::is_under(p, &e.root))
            .max_by_key(|e| e.root.len())
    }

    /// Root directory of the dependency `name` declared by package `root`,
    /// looking at production and development dependencies.
    pub fn dependency_root(&self, root: &str, name: &str) -> Option<String> {
        let pkg = self.packages.get(root)?;
        let rel = pkg.manifest.dependencies.get(name).or_else(|| pkg.manifest.dev_dependencies.get(name))?;
        Some(path::join(root, rel))
    }

    /// Module paths of the package's test files.
    pub fn test_paths(&self, root: &str) -> Vec<String> {
        match self.packages.get(root) {
            Some(p) => p.manifest.tests.iter().map(|t| path::join(root, t)).collect(),
            None => Vec::new(),
        }
    }

    pub fn main_path(&self, root: &str) -> Option<String> {
        self.packages.get(root).map(|p| path::join(root, &p.manifest.main))
    }

    /// Roots of the package and its production dependencies, transitively.
    pub fn production_roots(&self, root: &str) -> Result<BTreeSet<String>, HostError> {
        let mut seen = BTreeSet::new();
        let mut work = alloc::vec![path::normalize(root)];
        while let Some(r) = work.pop() {
            let pkg = self.packages.get(&r).ok_or_else(|| HostError::MissingPackage { dir: r.clone() })?;
            if !seen.insert(r.clone()) {
                continue;
            }
            for rel in pkg.manifest.dependencies.values() {
                work.push(path::join(&r, rel));
            }
        }
        Ok(seen)
    }

    /// Source files whose size and reachability are analysed for the
    /// package at `root`: every `.mm` file under the root or under a
    /// production dependency, minus test files, minus development
    /// dependencies and their files, minus stub preludes.
    pub fn analyzed_closure(&self, root: &str) -> Result<BTreeSet<String>, HostError> {
        let roots = self.production_roots(root)?;
        let mut tests = BTreeSet::new();
        let mut excluded_roots = BTreeSet::new();
        for e in self.packages.values() {
            if roots.contains(&e.root) || roots.iter().any(|r| path::is_under(&e.root, r)) {
                tests.extend(self.test_paths(&e.root));
                for rel in e.manifest.dev_dependencies.values() {
                    let d = path::join(&e.root, rel);
                    if !roots.contains(&d) {
                        excluded_roots.insert(d);
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        for p in self.files.keys() {
            if !p.ends_with(SOURCE_EXT) || tests.contains(p) {
                continue;
            }
            if p.rsplit('/').next() == Some(crate::stubbify::PRELUDE_FILE) {
                continue;
            }
            let owned_by_root = self.owner(p).map_or(false, |o| roots.contains(&o.root));
            if !owned_by_root {
                if !roots.iter().any(|r| path::is_under(p, r)) {
                    continue;
                }
                if excluded_roots.iter().any(|d| path::is_under(p, d)) {
                    continue;
                }
            }
            out.insert(p.clone());
        }
        Ok(out)
    }
}

impl ModuleHost for MemHost {
    fn resolve(&self, from: &str, spec: &str) -> Result<String, HostError> {
        if spec.starts_with("./") || spec.starts_with("../") {
            let mut p = path::join(path::dirname(from), spec);
            if !p.ends_with(SOURCE_EXT) {
                p.push_str(SOURCE_EXT);
            }
            return if self.files.contains_key(&p) { Ok(p) } else { Err(HostError::ModuleNotFound { path: p }) };
        }
        let owner = self.owner(from).ok_or_else(|| HostError::MissingDependency {
            spec: spec.to_string(),
            from: from.to_string(),
        })?;
        let dep_root = self.dependency_root(&owner.root, spec).ok_or_else(|| HostError::MissingDependency {
            spec: spec.to_string(),
            from: from.to_string(),
        })?;
        let main = self.main_path(&dep_root).ok_or(HostError::MissingPackage { dir: dep_root })?;
        if self.files.contains_key(&main) {
            Ok(main)
        } else {
            Err(HostError::ModuleNotFound { path: main })
        }
    }

    fn load(&self, path: &str) -> Result<Rc<Module>, HostError> {
        if let Some(m) = self.parsed.borrow().get(path) {
            return Ok(m.clone());
        }
        let text = self.files.get(path).ok_or_else(|| HostError::ModuleNotFound { path: path.to_string() })?;
        let m = Rc::new(lang::parse(text, path)?);
        self.parsed.borrow_mut().insert(path.to_string(), m.clone());
        Ok(m)
    }

    fn stub_runtime(&self, p: &str) -> Option<Rc<StubRuntime>> {
        self.packages
            .values()
            .filter(|e| e.stub.is_some() && path::is_under(p, &e.root))
            .max_by_key(|e| e.root.len())
            .and_then(|e| e.stub.clone())
    }

    fn guard_mode(&self) -> GuardMode {
        self.packages
            .values()
            .filter_map(|e| e.stub.as_ref().map(|s| s.guard_mode))
            .max()
            .unwrap_or(GuardMode::Off)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_paths() {
        assert_eq!(path::normalize("./a/./b/../c.mm"), "a/c.mm");
        assert_eq!(path::normalize("../../subject/src/x.mm"), "../../subject/src/x.mm");
        assert_eq!(path::join("test", "../src/a.mm"), "src/a.mm");
        assert_eq!(path::join("", "./x"), "x");
        assert!(path::is_under("deps/a/b.mm", "deps/a"));
        assert!(!path::is_under("deps/ab/b.mm", "deps/a"));
        assert!(path::is_under("src/a.mm", ""));
        assert!(!path::is_under("../x.mm", ""));
    }

    fn manifest(main: &str, deps: &[(&str, &str)]) -> Manifest {
        Manifest {
            name: "p".into(),
            version: "1.0.0".into(),
            main: main.into(),
            tests: alloc::vec!["test/t.mm".into()],
            dependencies: deps.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            ..Manifest::default()
        }
    }

    #[test]
    fn resolves_dependencies_and_relative_specifiers() {
        let mut h = MemHost::new();
        h.add_package("", manifest("src/index.mm", &[("semverish", "deps/semverish")]));
        h.add_package("deps/semverish", manifest("lib/main.mm", &[]));
        h.add_file("src/index.mm", "let a = 1;");
        h.add_file("src/util.mm", "let b = 1;");
        h.add_file("deps/semverish/lib/main.mm", "let c = 1;");
        assert_eq!(h.resolve("src/index.mm", "semverish").unwrap(), "deps/semverish/lib/main.mm");
        assert_eq!(h.resolve("src/index.mm", "./util").unwrap(), "src/util.mm");
        assert_eq!(h.resolve("test/t.mm", "../src/util").unwrap(), "src/util.mm");
        assert!(matches!(h.resolve("src/index.mm", "nope"), Err(HostError::MissingDependency { .. })));
        // Dependencies are per package: the dependency cannot see its parent's deps.
        assert!(h.resolve("deps/semverish/lib/main.mm", "semverish").is_err());
    }

    #[test]
    fn closure_skips_tests_and_dev_dependencies() {
        let mut h = MemHost::new();
        let mut m = manifest("src/index.mm", &[("a", "deps/a")]);
        m.dev_dependencies.insert("tool".into(), "deps/tool".into());
        h.add_package("", m);
        h.add_package("deps/a", manifest("a.mm", &[]));
        h.add_package("deps/tool", manifest("tool.mm", &[]));
        for p in ["src/index.mm", "test/t.mm", "deps/a/a.mm", "deps/a/test/t.mm", "deps/tool/tool.mm", "notes.txt"] {
            h.add_file(p, "");
        }
        let c: Vec<String> = h.analyzed_closure("").unwrap().into_iter().collect();
        assert_eq!(c, ["deps/a/a.mm", "src/index.mm"]);
    }
}
