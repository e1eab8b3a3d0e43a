#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn john() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_john"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    john().args(args).output().expect("john runs")
}

pub fn constraints_json(total: u64, tracks: usize, min_block: u64, max_block: u64) -> serde_json::Value {
    serde_json::json!({
        "total_duration": total,
        "min_players": 1,
        "max_players": tracks,
        "min_block": min_block,
        "max_block": max_block,
        "karmas": ["calm", "storm", "drift", "pulse", "grain", "void"],
        "nuance_lo": "ppp",
        "nuance_hi": "fff",
        "track_names": (1..=tracks).map(|i| format!("musician{i}")).collect::<Vec<_>>(),
        "seed": 1
    })
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
