//! End-to-end runs of the `screenbook` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn screenbook(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_screenbook"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SCREENBOOK_OUT")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

#[test]
fn validate_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let run = screenbook(dir.path(), &["validate", &config("mussa_rosen.toml")]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("mussa_rosen_validation.json")).unwrap()).unwrap();
    assert!(report.is_object());
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest_validate.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "validate");
    assert_eq!(manifest["deterministic"], true);
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"bad\"\n[types]\nlo = -1.0\nhi = \n").unwrap();
    let run = screenbook(dir.path(), &["validate", bad.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 4"));

    fs::write(&bad, "name = \"bad\"\n[types]\nlo = 1.0\nhi = -1.0\n").unwrap();
    let run = screenbook(dir.path(), &["validate", bad.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(screenbook(dir.path(), &["solve-cn"]).status.code(), Some(2));
    assert_eq!(screenbook(dir.path(), &["no-such-command"]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(screenbook(dir.path(), &["solve-cn", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // Matching large trades loses money, so exclusion runs to the end of the
    // type space on one side: a binding pattern outside the supported set.
    let args =
        ["darkpool", "--alpha", "1", "--beta", "2", "--eps", "0", "--p", "0.4", "--kappa", "0.05", "--pi0", "0.1"];
    let run = screenbook(dir.path(), &args);
    assert_eq!(run.status.code(), Some(3), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn golden_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("golden.csv");
    let text = fs::read_to_string(configs().join("golden/reproduce.csv")).unwrap();
    fs::write(&golden, text.replacen("true", "false", 1)).unwrap();
    let run = screenbook(dir.path(), &["reproduce-paper", "--golden", golden.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(4));
}

#[test]
fn reproduce_paper_passes() {
    let dir = tempfile::tempdir().unwrap();
    let run = screenbook(dir.path(), &["reproduce-paper", "--configs", configs().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(run.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("63 of 63 checks passed"), "{stdout}");
    for f in ["reproduce.txt", "reproduce.csv", "tent_power_option_iterates.csv", "dark_pool_book.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn environment_overrides_out() {
    let flag = tempfile::tempdir().unwrap();
    let env = tempfile::tempdir().unwrap();
    let run = Command::new(env!("CARGO_BIN_EXE_screenbook"))
        .arg("--out")
        .arg(flag.path())
        .args(["solve-benchmark", &config("tent_density.toml")])
        .env("SCREENBOOK_OUT", env.path())
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(env.path().join("tent_density_benchmark.csv").is_file());
    assert!(!flag.path().join("tent_density_benchmark.csv").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["solve-cn", &config("tent_power_option.toml"), "--pi-minus", "0", "--pi-plus", "0.25"];
    for d in [&a, &b] {
        let run = screenbook(d.path(), &args);
        assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    }
    for f in ["tent_power_option_cn.csv", "tent_power_option_cn.json"] {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert!(!x.is_empty());
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn subcommands_emit_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &[&str]); 4] = [
        (
            &["equilibrium", &config("tent_power_option.toml")],
            &["tent_power_option_equilibrium.csv", "tent_power_option_equilibrium.json"],
        ),
        (
            &["darkpool", &config("dark_pool.toml"), "--equilibrium"],
            &["dark_pool_darkpool.json", "dark_pool_darkpool_equilibrium.json"],
        ),
        (
            &["oracle", &config("mussa_rosen.toml"), "--n", "401"],
            &["mussa_rosen_oracle.csv", "mussa_rosen_oracle.json"],
        ),
        (&["compare", &config("tent_density.toml"), "--n", "1001"], &["tent_density_compare.json"]),
    ];
    for (args, files) in cases {
        let run = screenbook(dir.path(), args);
        assert_eq!(run.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&run.stderr));
        for f in files {
            assert!(dir.path().join(f).is_file(), "{args:?}: {f} missing");
        }
    }
}
