use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scale-probe"))
}

fn run_cfg(dir: &Path, text: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.txt");
    std::fs::write(&cfg, text).unwrap();
    bin().arg("run").arg(&cfg).args(extra).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_prints_every_experiment_and_schema() {
    let o = bin().arg("list").output().unwrap();
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["convergence", "inverse", "superapprox", "technique", "identity", "local-estimate", "naive-sweep"] {
        assert!(s.lines().any(|l| l == name), "{name} missing from\n{s}");
    }
    assert!(s.contains("records.csv: experiment,preset,h,d,r,p,seed,lhs"));
    assert!(s.contains("plotdata.csv: log10_x,log10_y,series"));
}

#[test]
fn identity_run_writes_all_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_cfg(tmp.path(), "experiment=identity\nr=1\nn=8\n", &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    for f in ["records.csv", "fits.csv", "plotdata.csv", "run.cfg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let fits = std::fs::read_to_string(out.join("fits.csv")).unwrap();
    assert!(fits.lines().next().unwrap().contains("defect"));
    let echo = std::fs::read_to_string(out.join("run.cfg")).unwrap();
    assert!(echo.contains("experiment=identity") && echo.contains("seeds=20"));
}

#[test]
fn config_echo_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = run_cfg(tmp.path(), "experiment=inverse\nn=4,8\nseeds=3\nseed=7\n", &["--out", a.to_str().unwrap()]);
    assert!(o.status.code().is_some());
    let o = bin().arg("run").arg(a.join("run.cfg")).args(["--out", b.to_str().unwrap()]).output().unwrap();
    assert!(o.status.code().is_some());
    for f in ["records.csv", "fits.csv", "plotdata.csv", "run.cfg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn parse_errors_exit_nonzero_with_details() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_cfg(tmp.path(), "experiment=bogus\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
    let o = run_cfg(tmp.path(), "experiment=inverse\nwidth=3\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = run_cfg(tmp.path(), "experiment=local-estimate\nn=16\nd=0.3\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("d = 0.3 with n = 16"), "{}", stderr(&o));
}

#[test]
fn empty_output_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_cfg(tmp.path(), "experiment=identity\nlevels=3\n", &["--out", ""]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty output directory"));
}

#[test]
fn violations_are_printed_and_set_the_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run_cfg(tmp.path(), "experiment=local-estimate\nn=4\nd=0.5\np=2\nseeds=1\n", &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("VIOLATION experiment=local-estimate check=infeasible_point")));
}

#[test]
fn compare_reports_flags_and_schema_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    std::fs::write(p("a.csv"), "experiment,h,lhs\ninverse,1.0e-1,2.0e0\ninverse,5.0e-2,3.0e0\n").unwrap();
    std::fs::write(p("b.csv"), "experiment,h,lhs\ninverse,1.0e-1,2.0e0\ninverse,5.0e-2,3.1e0\n").unwrap();
    std::fs::write(p("c.csv"), "experiment,h,lhs\ntechnique,1.0e-1,2.0e0\ninverse,5.0e-2,3.0e0\n").unwrap();
    let cmp = |a: &str, b: &str| bin().args(["compare", p(a).to_str().unwrap(), p(b).to_str().unwrap()]).output().unwrap();
    let o = cmp("a.csv", "a.csv");
    assert!(o.status.success());
    assert!(stdout(&o).contains("lhs,0e0,0e0"));
    let o = cmp("a.csv", "b.csv");
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FLAG row=2 column=lhs"));
    let o = cmp("a.csv", "c.csv");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema"));
}
