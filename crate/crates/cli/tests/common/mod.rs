#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const VALID_REAR_END: &str = "\
# map: straight
param gap = Range(28.0, 32.0)
ego = new Car on lane slow at 20.0 with speed 15.0 with behavior FollowLane(15.0)
lead = new Car ahead of ego by gap with speed 10.0 with behavior Brake(6.0) when time > 1.0

require collision of rear-end
terminate when time > 20.0
";

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/scenarios").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// The binary with LLM settings from the caller's environment removed.
pub fn scenforge(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_scenforge"));
    for var in ["SCENFORGE_LLM_BASE_URL", "SCENFORGE_LLM_MODEL", "SCENFORGE_LLM_API_KEY", "SCENFORGE_LLM_TIMEOUT_S"] {
        cmd.env_remove(var);
    }
    cmd.args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn fenced(script: &str) -> String {
    format!("Here you go:\n```scenic\n{script}```\n")
}

/// Every file under `dir`, relative path to contents, in sorted order.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
