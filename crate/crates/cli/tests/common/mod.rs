#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub const TINY_CONFIG: &str = r#"
[model]
heads = [1, 2, 1, 1]
global_heads = 1
codebook_sizes = [4, 8, 8, 8, 4]
d_code = 4
hidden_width = 16
hidden_layers = 1

[train]
batch_size = 16
steps = 60
eval_every = 20

[eval]
reference_size = 200
interp_pairs = 4
interp_steps = 5
sample_count = 8
localmod_trials = 10
ablation_heads = [1]
"#;

pub fn qposer(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qposer"))
        .args(args)
        .current_dir(cwd)
        .env("QPOSER_LOG", "error")
        .output()
        .expect("spawn qposer")
}

pub fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = qposer(args, cwd);
    assert!(
        out.status.success(),
        "qposer {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Small dataset plus a briefly trained tiny model in `dir`.
pub fn tiny_run(dir: &Path) {
    std::fs::write(dir.join("tiny.toml"), TINY_CONFIG).unwrap();
    ok(&["gen-data", "--count", "400", "--seed", "1", "--out", "d.qpse"], dir);
    ok(
        &["train", "--data", "d.qpse", "--config", "tiny.toml", "--out-checkpoint", "m.qpck"],
        dir,
    );
}
