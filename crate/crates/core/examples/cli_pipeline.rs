//! Drives the command-line interface in-process: gen-data, train, probe on
//! `examples/configs/mri_quick.json`, then merges the report with itself.
//! Equivalent to running the `acav` binary with the same arguments.

use acav::cli::main_with_args;

fn run(args: &[&str]) {
    println!("$ acav {}", args.join(" "));
    let code = main_with_args(std::iter::once("acav").chain(args.iter().copied()));
    assert_eq!(code, 0, "acav {} failed", args[0]);
}

fn main() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/mri_quick.json");
    let out = std::env::temp_dir().join("acav_cli_example");
    let out = out.to_str().expect("utf-8 temp path");
    for cmd in ["gen-data", "train", "probe"] {
        run(&[cmd, "--config", config, "--out", out]);
    }
    let report = format!("{out}/report");
    let merged = format!("{out}/merged");
    run(&["report", &report, "--out", &merged]);
}
