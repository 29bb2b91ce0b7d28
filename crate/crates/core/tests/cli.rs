use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stosign(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stosign"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn every_shipped_config_passes() {
    let mut paths: Vec<_> = std::fs::read_dir(configs())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    assert!(paths.len() >= 8);
    for path in paths {
        let dir = tempfile::tempdir().unwrap();
        let o = stosign(&["run", path.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}:\n{}{}", path.display(), stdout(&o), String::from_utf8_lossy(&o.stderr));
        let out = stdout(&o);
        assert!(out.contains("PASS") && !out.contains("FAIL"), "{}:\n{out}", path.display());
        assert!(dir.path().join("out").is_dir(), "relative out path resolves against cwd");
    }
}

#[test]
fn subcommand_with_overrides_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("regret");
    let o = stosign(
        &[
            "online-regret",
            "--config",
            configs().join("online-regret.toml").to_str().unwrap(),
            "--seeds",
            "1..3",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for f in ["seed_1.csv", "seed_2.csv", "seed_3.csv", "aggregate.csv", "summary.csv", "plotdata.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(!out.join("seed_4.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_owned()
    };

    let unknown = write("unknown.toml", "[experiment]\nkind = \"verify-sign\"\n[verify-sign]\nbogus = 1\n");
    assert_eq!(stosign(&["run", &unknown], dir.path()).status.code(), Some(2));

    let huge = write(
        "huge.toml",
        "[experiment]\nkind = \"online-regret\"\n[online-regret]\nhorizons = [20000000]\n",
    );
    let o = stosign(&["run", &huge], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let mismatch = configs().join("ablate.toml");
    assert_eq!(stosign(&["verify-sign", "--config", mismatch.to_str().unwrap()], dir.path()).status.code(), Some(2));

    assert_eq!(stosign(&["convex-demo", "--seeds", "5..1"], dir.path()).status.code(), Some(2));
    assert_eq!(stosign(&["nonconvex", "--variant", "cubic"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // A tolerance far below Monte-Carlo error must fail honestly.
    let p = dir.path().join("strict.toml");
    std::fs::write(
        &p,
        "[experiment]\nkind = \"verify-sign\"\n[verify-sign]\ninstances = 2\ndraws = 1000\nexp_draws = 1000\nlaw_tol = 1e-9\n",
    )
    .unwrap();
    let o = stosign(&["run", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL sign law"));
}
