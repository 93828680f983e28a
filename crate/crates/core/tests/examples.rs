//! Runs every example binary built alongside the tests.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 8] = [
    "hat_frames",
    "symbol_calculus",
    "orthonormal_frame",
    "conv_generators",
    "compression_roundtrip",
    "dyadic_limit",
    "continuity",
    "field_profile",
];

fn example_dir() -> PathBuf {
    // target/<profile>/deps/examples-<hash> -> target/<profile>/examples
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("examples")
}

#[test]
fn examples_run_cleanly() {
    let dir = example_dir();
    for name in EXAMPLES {
        let path = dir.join(name);
        assert!(path.exists(), "{} not built", path.display());
        let out = Command::new(&path).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
