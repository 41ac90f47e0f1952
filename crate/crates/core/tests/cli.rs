//! End-to-end runs of the `sls` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use ndarray::{Array1, Array2};
use sls::io::{read_dataset, write_dataset};
use sls::report::{parse_vector, Report};
use sls::Dataset;
use tempfile::TempDir;

fn sls(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_sls")).args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn generate_then_estimate_identity() {
    let dir = TempDir::new().unwrap();
    let gen = write(
        dir.path(),
        "gen.toml",
        "[generate]\nn = 100000\np = 20\nlinks = [\"identity\"]\nseed = 11\noutput = \"data.bin\"\nnoise_std = 0.0\n",
    );
    assert_eq!(sls(&["generate", "--config", &gen]), 0);
    assert!(dir.path().join("data.bin.txt").exists());

    let est = write(
        dir.path(),
        "est.toml",
        "[estimate]\ndata = \"data.bin\"\nlinks = [\"identity\"]\nreport = \"est.txt\"\n",
    );
    assert_eq!(sls(&["estimate", "--config", &est, "--threads", "2"]), 0);
    let report = Report::read(&dir.path().join("est.txt")).unwrap();
    let err: f64 = report.get("err_l2_rel").unwrap().parse().unwrap();
    assert!(err <= 0.03, "{err}");
    assert_eq!(report.get("failed_directions"), Some("[]"));
    assert_eq!(parse_vector(report.get("c_hat").unwrap()).unwrap().len(), 1);
    assert!(report.get("manifest").unwrap().contains("master_seed=0"));
}

#[test]
fn generate_is_reproducible_across_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "gen.toml",
        "[generate]\nn = 3000\np = 4\nlinks = [\"sigmoid\", \"identity\"]\nseed = 5\noutput = \"a.bin\"\n",
    );
    let b = dir.path().join("b.bin");
    assert_eq!(sls(&["generate", "--config", &cfg, "--threads", "1"]), 0);
    assert_eq!(sls(&["generate", "--config", &cfg, "--threads", "3", "--out", b.to_str().unwrap()]), 0);
    assert_eq!(fs::read(dir.path().join("a.bin")).unwrap(), fs::read(&b).unwrap());

    let c = dir.path().join("c.bin");
    assert_eq!(sls(&["generate", "--config", &cfg, "--seed", "6", "--out", c.to_str().unwrap()]), 0);
    assert_ne!(fs::read(&b).unwrap(), fs::read(&c).unwrap());
    let (data, beta) = read_dataset(&c).unwrap();
    assert_eq!((data.n(), data.p(), data.k()), (3000, 4, 2));
    assert_eq!(beta.unwrap().dim(), (2, 4));
}

#[test]
fn zero_coefficient_column_fails_that_direction() {
    let dir = TempDir::new().unwrap();
    let (n, p) = (500, 3);
    let x = Array2::from_shape_fn((n, p), |(i, j)| (((i * 31 + j * 17) % 23) as f64 - 11.0) / 7.0);
    let mut z = Array2::zeros((n, 2));
    z.column_mut(0).fill(1.0);
    let y = Array1::from_shape_fn(n, |i| x[[i, 0]] - 0.5 * x[[i, 2]]);
    write_dataset(&dir.path().join("d.bin"), &Dataset::new(x, z, y).unwrap(), None).unwrap();

    let cfg = write(
        dir.path(),
        "est.toml",
        "[estimate]\ndata = \"d.bin\"\nlinks = [\"identity\", \"identity\"]\nreport = \"r.txt\"\n",
    );
    assert_eq!(sls(&["estimate", "--config", &cfg]), 1);
    let report = Report::read(&dir.path().join("r.txt")).unwrap();
    assert_eq!(report.get("failed_directions"), Some("[1]"));
    assert_eq!(report.get("direction[0].status"), Some("ok"));
    assert!(report.get("direction[1].status").unwrap().starts_with("failed"));
}

#[test]
fn verify_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "v.toml", "[verify]\nreport = \"v.txt\"\nseed = 3\n");
    assert_eq!(sls(&["verify", "--config", &cfg]), 0);
    let report = Report::read(&dir.path().join("v.txt")).unwrap();
    assert_eq!(report.get("passed"), Some("true"));
    assert_eq!(report.get("theorem7.passed"), Some("true"));
    let gap: f64 = report.get("stein.sigmoid.gap").unwrap().parse().unwrap();
    assert!(gap <= 0.01);
}

#[test]
fn small_experiment_writes_csv_plot_and_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "x.toml",
        "[experiment]\nsweep = \"sample_size\"\nvalues = [2000, 4000, 8000]\np = 5\nlinks = [\"identity\"]\nrepeats = 3\nseed = 1\ncsv = \"x.csv\"\nplot = \"x.svg\"\n",
    );
    assert_eq!(sls(&["experiment", "--config", &cfg, "--threads", "2"]), 0);
    let rows = sls::bench::read_csv(&dir.path().join("x.csv")).unwrap();
    assert_eq!(rows.len(), 9);
    assert!(fs::read_to_string(dir.path().join("x.svg")).unwrap().starts_with("<svg"));
    let report = Report::read(&dir.path().join("x.csv.txt")).unwrap();
    assert_eq!(report.get("failed_records"), Some("0"));
    assert!(report.get("slope").unwrap().parse::<f64>().is_ok());
}

#[test]
fn bad_configs_exit_with_config_code() {
    let dir = TempDir::new().unwrap();
    let even = write(
        dir.path(),
        "even.toml",
        "[experiment]\nsweep = \"sample_size\"\nlinks = [\"monomial:2\"]\ncsv = \"x.csv\"\n",
    );
    assert_eq!(sls(&["experiment", "--config", &even]), 2);
    let zero = write(
        dir.path(),
        "zero.toml",
        "[experiment]\nsweep = \"sample_size\"\nlinks = [\"identity\"]\nrepeats = 0\ncsv = \"x.csv\"\n",
    );
    assert_eq!(sls(&["experiment", "--config", &zero]), 2);
    // section does not match the subcommand
    let verify = write(dir.path(), "v.toml", "[verify]\nreport = \"v.txt\"\n");
    assert_eq!(sls(&["estimate", "--config", &verify]), 2);
    assert_eq!(sls(&["verify", "--config", &verify, "--threads", "0"]), 2);
    let missing = dir.path().join("missing.toml");
    assert_eq!(sls(&["verify", "--config", missing.to_str().unwrap()]), 3);
    assert!(!dir.path().join("x.csv").exists());
}
