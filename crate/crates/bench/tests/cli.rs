use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use saddle_bench::runner::{read_csv, CSV_HEADER};
use saddle_bench::RunReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_saddle-bench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen(dir: &Path, name: &str, kind_args: &[&str], seed: u64) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["gen"];
    args.extend_from_slice(kind_args);
    let seed = seed.to_string();
    args.extend_from_slice(&["--seed", &seed, "--out", out.to_str().unwrap()]);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    PathBuf::from(stdout(&o).trim())
}

fn spp(dir: &Path, name: &str, lr: f64) -> PathBuf {
    let lr = lr.to_string();
    gen(
        dir,
        name,
        &[
            "quadratic-spp",
            "--dx",
            "5",
            "--dy",
            "4",
            "--lp",
            "4",
            "--lq",
            "4",
            "--lr",
            &lr,
        ],
        3,
    )
}

fn csv_without_wall(path: &Path) -> Vec<Vec<String>> {
    let wall = CSV_HEADER.split(',').position(|c| c == "wall_ms").unwrap();
    read_csv(path)
        .unwrap()
        .into_iter()
        .map(|mut row| {
            row.remove(wall);
            row
        })
        .collect()
}

#[test]
fn gen_writes_manifest_and_binary_files() {
    let tmp = tempfile::tempdir().unwrap();
    let m = gen(tmp.path(), "a", &["bilinear", "--dx", "3", "--dy", "4"], 1);
    assert_eq!(m.file_name().unwrap(), "manifest.json");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(json["schema_version"], "1");
    assert_eq!(json["kind"], "bilinear");
    let b = fs::read(tmp.path().join("a").join(json["files"]["B"].as_str().unwrap())).unwrap();
    // header (rows, cols) then row-major f64
    assert_eq!(u64::from_le_bytes(b[0..8].try_into().unwrap()), 3);
    assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 4);
    assert_eq!(b.len(), 16 + 8 * 12);
}

#[test]
fn every_generator_is_reachable() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, kind) in [
        vec!["quadratic-spp"],
        vec!["bilinear"],
        vec!["affine-constrained"],
        vec!["linear-bilinear", "--dim", "4"],
        vec!["consensus", "--nodes", "4", "--topology", "star"],
    ]
    .iter()
    .enumerate()
    {
        let m = gen(tmp.path(), &i.to_string(), kind, 0);
        assert!(m.exists());
    }
}

#[test]
fn solve_prints_a_report_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let m = spp(tmp.path(), "i", 10.0);
    let out = tmp.path().join("solve");
    let o = run(&[
        "solve",
        "--manifest",
        m.to_str().unwrap(),
        "--solver",
        "sliding",
        "--eps",
        "1e-8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: RunReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report.solver, "sliding");
    assert_eq!(report.termination, "budget-certified");
    assert!(report.dist_weighted <= 1e-8);
    assert_eq!(report.counters.grad_p, report.counters.outer_iterations);
    assert!(out.join("report.json").exists());

    for solver in ["eg", "agd-joint"] {
        let o = run(&[
            "solve",
            "--manifest",
            m.to_str().unwrap(),
            "--solver",
            solver,
            "--eps",
            "1e-8",
        ]);
        assert_eq!(o.status.code(), Some(0));
        let r: RunReport = serde_json::from_str(&stdout(&o)).unwrap();
        assert!(r.dist_unweighted <= 1e-8, "{solver}: {}", r.dist_unweighted);
    }
}

#[test]
fn exit_codes_distinguish_budget_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let m = spp(tmp.path(), "i", 10.0);
    let o = run(&["solve", "--manifest", m.to_str().unwrap(), "--max-outer", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let r: RunReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.termination, "budget-uncertified");

    let o = run(&[
        "solve",
        "--manifest",
        m.to_str().unwrap(),
        "--solver",
        "eg",
        "--max-outer",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"schema_version\": \"7\"}").unwrap();
    assert_eq!(
        run(&["solve", "--manifest", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
    let missing = tmp.path().join("nope.json");
    assert_eq!(
        run(&["solve", "--manifest", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn empty_grid_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("res");
    let o = run(&["bench", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(out.join("results.csv")).unwrap(),
        format!("{CSV_HEADER}\n")
    );
}

#[test]
fn one_instance_two_solvers_two_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let m = spp(tmp.path(), "i", 10.0);
    let out = tmp.path().join("res");
    let o = run(&[
        "bench",
        "--manifest",
        m.to_str().unwrap(),
        "--solver",
        "sliding",
        "--solver",
        "eg",
        "--eps",
        "1e-6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], "sliding");
    assert_eq!(rows[1][1], "extragradient-baseline");
    assert_eq!(fs::read_dir(out.join("runs")).unwrap().count(), 2);

    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("sliding") && text.contains("extragradient-baseline"),
        "{text}"
    );
}

#[test]
fn config_file_grid_is_deterministic_across_parallelism() {
    let tmp = tempfile::tempdir().unwrap();
    spp(tmp.path(), "a", 10.0);
    gen(tmp.path(), "b", &["bilinear", "--dx", "4", "--dy", "6"], 2);
    let cfg = tmp.path().join("grid.json");
    fs::write(
        &cfg,
        r#"{"instances": ["a/manifest.json", "b/manifest.json"],
            "solvers": ["sliding", "extragradient-baseline"],
            "eps": [1e-4, 1e-8]}"#,
    )
    .unwrap();
    let (one, four) = (tmp.path().join("one"), tmp.path().join("four"));
    let o = run(&["bench", cfg.to_str().unwrap(), "--out", one.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&[
        "bench",
        cfg.to_str().unwrap(),
        "--out",
        four.to_str().unwrap(),
        "--parallel",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let a = csv_without_wall(&one.join("results.csv"));
    assert_eq!(a.len(), 8);
    assert_eq!(a, csv_without_wall(&four.join("results.csv")));
}

#[test]
fn bench_with_exhausted_run_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let m = spp(tmp.path(), "i", 10.0);
    let out = tmp.path().join("res");
    let o = run(&[
        "bench",
        "--manifest",
        m.to_str().unwrap(),
        "--solver",
        "sliding",
        "--eps",
        "1e-8",
        "--max-outer",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(read_csv(&out.join("results.csv")).unwrap().len(), 1);
}

#[test]
fn l_r_sweep_separates_oracle_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for (i, lr) in [2.0, 20.0, 200.0].iter().enumerate() {
        let m = spp(tmp.path(), &i.to_string(), *lr);
        let out = tmp.path().join(format!("res{i}"));
        let o = run(&[
            "bench",
            "--manifest",
            m.to_str().unwrap(),
            "--solver",
            "sliding",
            "--eps",
            "1e-8",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        rows.push(read_csv(&out.join("results.csv")).unwrap().remove(0));
    }
    let col = |name: &str| CSV_HEADER.split(',').position(|c| c == name).unwrap();
    let grad_p: Vec<u64> = rows.iter().map(|r| r[col("calls_grad_p")].parse().unwrap()).collect();
    let grad_r: Vec<u64> = rows.iter().map(|r| r[col("calls_grad_R")].parse().unwrap()).collect();
    // P, Q and the saddle are shared by the sweep; the outer work only moves
    // with log(psi_0)
    let (lo, hi) = (
        *grad_p.iter().min().unwrap() as f64,
        *grad_p.iter().max().unwrap() as f64,
    );
    assert!(hi <= 1.25 * lo, "grad_p {grad_p:?}");
    assert!(grad_r.windows(2).all(|w| w[1] > w[0]), "grad_R {grad_r:?}");
}
