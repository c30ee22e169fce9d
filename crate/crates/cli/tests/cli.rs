// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ffrnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffrnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr_lines(o: &Output) -> usize {
    String::from_utf8_lossy(&o.stderr).lines().count()
}

const SMALL: &[&str] = &["--set", "embed.epochs=1", "--set", "embed.d_emb=8", "--set", "train.epochs=5"];

#[test]
fn full_flow_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&ffrnet(d, &["gen", "--ffs", "12", "--gates", "60", "--seed", "2", "-o", "c.bench"])), 0);
    let mut args = vec!["pipeline", "--netlist", "c.bench", "--cycles", "32", "--out-dir", "out", "--jobs", "2"];
    args.extend_from_slice(SMALL);
    let o = ffrnet(d, &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("test fold: mae"), "{stdout}");
    for f in ["graph.gml", "campaign.csv", "embeddings.csv", "model.json", "predictions.csv", "timing.csv"] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn stages_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ffrnet(d, &["gen", "--ffs", "10", "--gates", "50", "-o", "c.bench"]);
    fs::write(
        d.join("run.toml"),
        "netlist = \"c.bench\"\ncycles = 24\nout_dir = \"staged\"\n[embed]\nepochs = 1\nd_emb = 8\n[train]\nepochs = 3\n",
    )
    .unwrap();
    assert_eq!(code(&ffrnet(d, &["parse", "c.bench", "--config", "run.toml"])), 0);
    for sub in ["campaign", "embed", "train", "predict"] {
        let o = ffrnet(d, &[sub, "--config", "run.toml"]);
        assert_eq!(code(&o), 0, "{sub}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let model = fs::read_to_string(d.join("staged/model.json")).unwrap();
    assert!(model.contains("\"epochs\": 3"));

    // A JSON configuration with a flag override on top.
    fs::write(d.join("run.json"), r#"{"netlist": "c.bench", "cycles": 24, "out_dir": "json"}"#).unwrap();
    let o = ffrnet(d, &["campaign", "--config", "run.json", "--cycles", "8"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("8 cycles"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        vec!["frobnicate"],
        vec!["gen", "--ffs", "x", "--gates", "4", "-o", "a.bench"],
        vec!["campaign"],
        vec!["campaign", "--netlist", "a.bench", "--set", "train.bogus=1"],
        vec!["campaign", "--netlist", "a.bench", "--set", "noequals"],
        vec!["campaign", "--netlist", "a.bench", "--jobs", "0"],
        vec!["gen", "--ffs", "0", "--gates", "4", "-o", "a.bench"],
        vec!["train", "--config", "missing.toml"],
    ] {
        let o = ffrnet(d, &args);
        let expected = if args.contains(&"missing.toml") { 2 } else { 1 };
        assert_eq!(code(&o), expected, "{args:?}");
        assert_eq!(stderr_lines(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&ffrnet(d, &["--help"])), 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.bench"), "INPUT(a)\nOUTPUT(z)\nz = AND(a, nowhere)\n").unwrap();
    fs::write(d.join("cfg.toml"), "cycles = [1\n").unwrap();
    for args in [
        vec!["parse", "bad.bench"],
        vec!["parse", "absent.bench"],
        vec!["campaign", "--netlist", "bad.bench"],
        vec!["train", "--out-dir", "nothing-here"],
        vec!["predict", "--out-dir", "nothing-here"],
    ] {
        let o = ffrnet(d, &args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert_eq!(stderr_lines(&o), 1, "{args:?}");
    }
    let o = ffrnet(d, &["parse", "bad.bench"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));
    let o = ffrnet(d, &["campaign", "--config", "cfg.toml"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_lines(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ffrnet(d, &["gen", "--ffs", "10", "--gates", "50", "-o", "c.bench"]);
    let mut args = vec!["campaign", "--netlist", "c.bench", "--cycles", "16"];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&ffrnet(d, &args)), 0);
    args[0] = "embed";
    assert_eq!(code(&ffrnet(d, &args)), 0);
    let o = ffrnet(
        d,
        &["train", "--set", "train.learning_rate=1e200", "--set", "train.momentum=0.0"],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_lines(&o), 1);
}
