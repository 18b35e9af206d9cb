#![allow(dead_code)]

use std::path::{Path, PathBuf};

use embedlab::synth::{write_synthetic, SynthSpec};

pub fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> PathBuf {
    let path = dir.join(name);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, contents).unwrap();
    path
}

/// Synthetic corpus under `root/ml-100k` and `root/ml-20m`.
pub fn corpus(root: &Path, spec: &SynthSpec) -> (PathBuf, PathBuf) {
    let (a, b) = (root.join("ml-100k"), root.join("ml-20m"));
    write_synthetic(spec, &a, &b).unwrap();
    (a, b)
}

/// Synthetic corpus prepared into `root/prepared`.
pub fn prepared(root: &Path, spec: &SynthSpec) -> PathBuf {
    let (a, b) = corpus(root, spec);
    let out = root.join("prepared");
    embedlab::harness::cmd_prepare(&a, &b, &out).unwrap();
    out
}
