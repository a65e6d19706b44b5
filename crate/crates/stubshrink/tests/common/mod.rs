#![allow(dead_code)]

pub mod gen;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn corpus() -> PathBuf {
    workspace().join("corpus")
}

pub fn fixtures() -> PathBuf {
    workspace().join("fixtures")
}

pub fn copy_dir(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for e in fs::read_dir(src).unwrap() {
        let e = e.unwrap();
        let to = dst.join(e.file_name());
        if e.path().is_dir() {
            copy_dir(&e.path(), &to);
        } else {
            fs::copy(e.path(), &to).unwrap();
        }
    }
}

/// Copies `client` to `<tmp>/client` with its dependency on `subject`
/// rewritten to `../subject`, the directory the caller fills with a
/// (possibly stubbified) subject.
pub fn stage_client(tmp: &Path, client: &Path, subject: &Path) -> PathBuf {
    let dst = tmp.join("client");
    copy_dir(client, &dst);
    let mpath = dst.join("minipkg.json");
    let mut m: Value = serde_json::from_str(&fs::read_to_string(&mpath).unwrap()).unwrap();
    let want = subject.canonicalize().unwrap();
    let deps = m["dependencies"].as_object_mut().expect("client has dependencies");
    for (_, rel) in deps.iter_mut() {
        let dir = client.join(rel.as_str().unwrap()).canonicalize().unwrap();
        if dir == want {
            *rel = Value::String("../subject".into());
        }
    }
    fs::write(&mpath, serde_json::to_string_pretty(&m).unwrap()).unwrap();
    dst
}

/// Writes a package from `(path, text)` pairs.
pub fn write_package(dir: &Path, files: &[(&str, &str)]) {
    for (p, text) in files {
        let path = dir.join(p);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
}
