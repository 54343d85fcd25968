//! End-to-end runs of the `hdglab` binary.

use std::path::Path;
use std::process::Command;

use hdglab::output::Table;

fn hdglab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hdglab"));
    c.env("HDGLAB_THREADS", "1");
    c
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("study.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn small_study_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "problem = example1_square\nk = 1, 2\nlevels = 2, 4, 8\nsvg = true\n");
    let status = hdglab().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
    assert!(status.success());
    for k in [1, 2] {
        let text = std::fs::read_to_string(out.join(format!("example1_square_k{k}.csv"))).unwrap();
        let table = Table::parse(&text).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(&table.header[..4], ["n", "h_over_sqrt2", "q_Linf_error", "q_Linf_rate"]);
        assert_eq!(table.column("n").unwrap(), ["2", "4", "8"]);
        assert_eq!(table.column("h_over_sqrt2").unwrap(), ["5.0000E-01", "2.5000E-01", "1.2500E-01"]);
        assert_eq!(table.to_csv_string().unwrap(), text);
        let svg = std::fs::read_to_string(out.join(format!("example1_square_k{k}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = example1_lshape\nk = 1\nlevels = 2, 4, 8\n");
    let run = |name: &str| {
        let out = dir.path().join(name);
        assert!(hdglab().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap().status.success());
        std::fs::read(out.join("example1_lshape_k1.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn overrides_replace_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = example1_square\nk = 2\nlevels = 2, 4\n");
    let out = dir.path().join("out");
    let status = hdglab()
        .arg("run")
        .arg(&cfg)
        .args(["--problem", "example2_control", "--k", "1", "--levels", "4,8", "--tau", "2", "--diagonal", "left"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let table = Table::parse(&std::fs::read_to_string(out.join("example2_control_k1.csv")).unwrap()).unwrap();
    assert_eq!(table.column("n").unwrap(), ["4", "8"]);
    assert!(table.column("g_L2_boundary_error").is_some());
}

#[test]
fn empty_levels_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = example1_square\nk = 1\nlevels =\n");
    let output = hdglab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("levels"));
}

#[test]
fn malformed_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    for body in ["levels = 2, 3\n", "colour = blue\nlevels = 2\n", "k = 7\nlevels = 2\n", "levels 2\n"] {
        let cfg = write_config(dir.path(), body);
        assert_eq!(hdglab().arg("run").arg(&cfg).output().unwrap().status.code(), Some(2), "{body:?}");
    }
    assert_eq!(hdglab().args(["run", "/nonexistent/study.cfg"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn mesh_dump_round_trips() {
    let output = hdglab().args(["mesh-dump", "--domain", "lshape", "--n", "4", "--diagonal", "left"]).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let mesh = hdglab::meshio::parse(&text).unwrap();
    assert_eq!(mesh.num_elements(), 24);
    assert_eq!(hdglab::meshio::dump(&mesh), text);
}

#[test]
fn selftest_passes() {
    let output = hdglab().arg("selftest").output().unwrap();
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(output.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 11);
}
