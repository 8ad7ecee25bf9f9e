use std::path::Path;
use std::process::{Command, Output};

fn cascadevae(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascadevae"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_data(dir: &Path) {
    let o = cascadevae(&["gen-data", "--out", "d.cvds", "--width", "8", "--scales", "2", "--positions", "3"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

const SMALL_TRAIN: &[&str] = &[
    "--data", "d.cvds", "--iters", "40", "--t-d", "10", "--r", "5", "--m", "3", "--batch", "8", "--lr", "0.001",
];

#[test]
fn gen_data_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = cascadevae(&["gen-data", "--out", "data.cvds"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("count=576"));
    let bytes = std::fs::read(dir.path().join("data.cvds")).unwrap();
    assert!(bytes.starts_with(b"CVDS1\ncount=576\n"));
}

#[test]
fn assign_solve_example() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("inst.txt"), "2 2 0.6\n0 1.0\n0.2 1.0\n").unwrap();
    let o = cascadevae(&["assign-solve", "inst.txt"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1 0\nobjective=1.2\n");
}

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = cascadevae(&["check", "--trials", "50", "--networks", "5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let value = |key: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("{key} missing"))
            .parse()
            .unwrap()
    };
    assert!(value("max_identity_residual") < 1e-9);
    assert!(value("gradient_max_relative_error") < 1e-4);
}

#[test]
fn train_eval_traverse_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_data(d);

    let mut args = vec!["train", "--out", "a.cvck"];
    args.extend(SMALL_TRAIN);
    let o = cascadevae(&args, d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("t_d=10\n"), "banner echoes the config");
    let trace = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(trace.lines().count(), 41);

    let before = std::fs::read(d.join("a.cvck")).unwrap();
    let o = cascadevae(
        &["eval", "--checkpoint", "a.cvck", "--data", "d.cvds", "--out", "r.txt", "--samples", "10", "--votes", "40", "--mi-batch", "8"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(d.join("r.txt")).unwrap();
    for key in ["disentanglement_score=", "cluster_accuracy=", "tc_gaussian=", "mi_dim_0=", "mi_discrete=", "surviving_dims="] {
        assert!(report.lines().any(|l| l.starts_with(key)), "{key}");
    }
    assert!(std::fs::read_to_string(d.join("r.votes.csv")).unwrap().starts_with("dim,shape,scale,pos_x,pos_y\n"));
    assert_eq!(std::fs::read(d.join("a.cvck")).unwrap(), before, "eval leaves inputs untouched");

    let o = cascadevae(&["traverse", "--checkpoint", "a.cvck", "--out", "grids", "--range", "-2,2"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 0..3 {
        let pgm = std::fs::read(d.join(format!("grids/traverse_d{k}.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n80 24\n255\n"));
    }
    assert!(std::fs::read(d.join("grids/traverse_discrete.pgm")).unwrap().starts_with(b"P5\n24 8\n255\n"));
}

#[test]
fn resume_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_data(d);
    let mut full = vec!["train", "--out", "full.cvck"];
    full.extend(SMALL_TRAIN);
    assert!(cascadevae(&full, d).status.success());

    let mut half: Vec<&str> = vec!["train", "--out", "half.cvck"];
    half.extend(SMALL_TRAIN);
    let pos = half.iter().position(|a| *a == "40").unwrap();
    half[pos] = "20";
    assert!(cascadevae(&half, d).status.success());
    let o = cascadevae(
        &["train", "--data", "d.cvds", "--resume", "half.cvck", "--out", "rest.cvck", "--trace", "half.csv", "--iters", "40"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(d.join("full.csv")).unwrap(),
        std::fs::read_to_string(d.join("half.csv")).unwrap()
    );
    assert_eq!(std::fs::read(d.join("full.cvck")).unwrap(), std::fs::read(d.join("rest.cvck")).unwrap());
}

#[test]
fn errors_are_one_line_and_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_data(d);

    let o = cascadevae(&["eval", "--checkpoint", "missing.cvck", "--data", "d.cvds"], d);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("missing.cvck"));

    std::fs::write(d.join("bad.cfg"), "beta_h=10\nbogus_key=3\n").unwrap();
    let o = cascadevae(&["train", "--data", "d.cvds", "--config", "bad.cfg", "--out", "x.cvck"], d);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("bad.cfg") && err.contains("bogus_key"), "{err}");

    std::fs::write(d.join("junk.cvds"), "NOPE\n").unwrap();
    let o = cascadevae(&["train", "--data", "junk.cvds", "--out", "x.cvck"], d);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("junk.cvds"));

    let o = cascadevae(&["check", "--trials", "0"], d);
    assert!(!o.status.success());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_data(d);
    std::fs::write(d.join("c.cfg"), "# small\nbeta_h=4\nhidden=12\nm=2\n").unwrap();
    let mut args = vec!["train", "--config", "c.cfg", "--beta-h", "6", "--out", "c.cvck"];
    args.extend(SMALL_TRAIN);
    let o = cascadevae(&args, d);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("beta_h=6\n") && out.contains("hidden=12\n") && out.contains("m=3\n"), "{out}");
}
