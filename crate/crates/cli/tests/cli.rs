use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn elastic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastic"))
        .args(args)
        .env("DEEPSPARK_LOG", "error")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn every_subcommand_documents_its_flags() {
    let commands: &[&[&str]] = &[
        &["exchanger"],
        &["worker"],
        &["data", "gen"],
        &["data", "partition"],
        &["data", "spill"],
        &["simulate"],
        &["analyze", "speedup"],
        &["analyze", "sweep"],
        &["stats"],
        &["launch-local"],
    ];
    for cmd in commands {
        let mut args = cmd.to_vec();
        args.push("--help");
        let out = elastic(&args);
        assert_eq!(code(&out), 0, "{cmd:?}");
        let text = stdout(&out);
        assert!(text.contains("--out"), "{cmd:?} lacks --out");
        assert!(
            text.contains("[default") || *cmd == ["stats"],
            "{cmd:?} shows no defaults"
        );
    }
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        vec!["frobnicate"],
        vec!["analyze", "speedup", "--bogus"],
        vec![
            "worker",
            "--connect",
            "x",
            "--shard",
            "y",
            "--tau",
            "5",
            "--adaptive",
        ],
        vec![
            "worker",
            "--connect",
            "x",
            "--shard",
            "y",
            "--loss-cut",
            "3",
        ],
        vec!["exchanger", "--model", "softmax:0:2"],
        vec!["analyze", "sweep", "--vary", "nope", "--values", "1"],
        vec!["analyze", "speedup", "--d", "0.5"],
    ] {
        let out = elastic(&args);
        assert_eq!(
            code(&out),
            1,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = elastic(&[
        "data",
        "partition",
        "--input",
        "/nonexistent.dshd",
        "--n",
        "2",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    let out = elastic(&["stats", "--connect", "127.0.0.1:1", "--out", p(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn analyze_speedup_prints_model_values_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = elastic(&[
        "analyze",
        "speedup",
        "--n",
        "16",
        "--tau",
        "500",
        "--d",
        "9.64",
        "--s-over-c",
        "10",
        "--n-a",
        "1000",
        "--c",
        "1",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let value = |name: &str| -> f64 {
        text.lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .and_then(|l| l.split_whitespace().nth(1))
            .unwrap()
            .parse()
            .unwrap()
    };
    let expected = 16.0 * 500.0 / (500.0 * 9.64 + 9.64 * 10.0 * 256.0);
    assert!((value("speedup") - expected).abs() / expected < 1e-5);
    assert!((value("T_comp") - 602.5).abs() < 1e-9);
    assert!((value("speedup_large_tau") - 1.6598).abs() < 1e-3);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "analyze speedup");
    assert_eq!(manifest["config"]["inputs"]["tau"], 500);
    assert!(dir.path().join("speedup.csv").exists());
}

#[test]
fn analyze_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = elastic(&[
        "analyze",
        "sweep",
        "--vary",
        "tau",
        "--range",
        "10:30:10",
        "--n",
        "4",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "vary,value,t_comp,t_comm,speedup");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("tau,10,"));
    assert_eq!(stdout(&out), csv);
}

#[test]
fn data_gen_partition_spill() {
    let dir = tempfile::tempdir().unwrap();
    let gen_dir = dir.path().join("gen");
    let out = elastic(&[
        "data",
        "gen",
        "--samples",
        "100",
        "--features",
        "3",
        "--seed",
        "4",
        "--out",
        p(&gen_dir),
    ]);
    assert_eq!(code(&out), 0);
    let dataset = gen_dir.join("dataset.dshd");
    assert_eq!(
        fs::metadata(&dataset).unwrap().len(),
        28 + 100 * (3 * 4 + 4)
    );

    let part = dir.path().join("part");
    assert_eq!(
        code(&elastic(&[
            "data",
            "partition",
            "--input",
            p(&dataset),
            "--n",
            "3",
            "--out",
            p(&part)
        ])),
        0
    );
    let sizes: Vec<u64> = (0..3)
        .map(|i| {
            fs::metadata(part.join(format!("shard_{i}.dshd")))
                .unwrap()
                .len()
        })
        .collect();
    assert_eq!(sizes, vec![28 + 34 * 16, 28 + 33 * 16, 28 + 33 * 16]);

    let spill = dir.path().join("spill");
    let out = elastic(&[
        "data",
        "spill",
        "--input",
        p(&dataset),
        "--n",
        "3",
        "--index",
        "1",
        "--out",
        p(&spill),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read(spill.join("shard_1.dshd")).unwrap(),
        fs::read(part.join("shard_1.dshd")).unwrap()
    );
    assert_eq!(
        code(&elastic(&[
            "data",
            "spill",
            "--input",
            p(&dataset),
            "--n",
            "3",
            "--index",
            "3",
            "--out",
            p(&spill)
        ])),
        1
    );

    let csv_dir = dir.path().join("csv");
    assert_eq!(
        code(&elastic(&[
            "data",
            "gen",
            "--samples",
            "10",
            "--format",
            "csv",
            "--out",
            p(&csv_dir)
        ])),
        0
    );
    assert_eq!(
        fs::read_to_string(csv_dir.join("dataset.csv"))
            .unwrap()
            .lines()
            .count(),
        10
    );
}

fn wait_for(path: &Path) -> String {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        if let Ok(s) = fs::read_to_string(path) {
            if !s.is_empty() {
                return s;
            }
        }
        assert!(
            Instant::now() < deadline,
            "{} never appeared",
            path.display()
        );
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[test]
fn exchanger_worker_and_stats_over_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let gen_dir = dir.path().join("gen");
    assert_eq!(
        code(&elastic(&[
            "data",
            "gen",
            "--seed",
            "1",
            "--out",
            p(&gen_dir)
        ])),
        0
    );
    let part = dir.path().join("part");
    assert_eq!(
        code(&elastic(&[
            "data",
            "partition",
            "--input",
            p(&gen_dir.join("dataset.dshd")),
            "--n",
            "1",
            "--out",
            p(&part)
        ])),
        0
    );

    let addr_file = dir.path().join("addr");
    let ex_dir = dir.path().join("exchanger");
    let mut exchanger = Command::new(env!("CARGO_BIN_EXE_elastic"))
        .args([
            "exchanger",
            "--bind",
            "127.0.0.1:0",
            "--pool-size",
            "8",
            "--alpha",
            "0.1",
            "--mode",
            "locked",
        ])
        .args([
            "--model",
            "softmax:20:2",
            "--seed",
            "42",
            "--stop-after",
            "5",
        ])
        .args(["--addr-file", p(&addr_file), "--out", p(&ex_dir)])
        .env("DEEPSPARK_LOG", "error")
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let addr = wait_for(&addr_file);

    let stats = elastic(&[
        "stats",
        "--connect",
        &addr,
        "--out",
        p(&dir.path().join("stats")),
    ]);
    assert_eq!(code(&stats), 0);
    assert!(stdout(&stats).contains("exchange_count=0"));

    let w_dir = dir.path().join("worker");
    let out = elastic(&[
        "worker",
        "--connect",
        &addr,
        "--shard",
        p(&part.join("shard_0.dshd")),
        "--tau",
        "200",
        "--eta",
        "0.05",
        "--alpha",
        "0.1",
        "--iters",
        "1000",
        "--batch",
        "32",
        "--out",
        p(&w_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(w_dir.join("worker_0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    assert_eq!(
        csv.lines()
            .filter(|l| l.split(',').nth(4) == Some("1"))
            .count(),
        5
    );
    assert!(w_dir.join("manifest.json").exists());

    let status = exchanger.wait().unwrap();
    assert!(status.success());
    assert_eq!(
        fs::metadata(ex_dir.join("master.params")).unwrap().len(),
        4 + 42 * 4
    );
}

#[test]
fn simulate_with_target_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = elastic(&[
        "simulate",
        "--workers",
        "2",
        "--tau",
        "20",
        "--eta",
        "0.1",
        "--iters",
        "300",
        "--samples",
        "500",
        "--target",
        "0.9",
        "--comm-cost",
        "2",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("sim_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("n,tau,alpha,S,C,N_a,d_estimate,seed"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..5], &["2", "20", "0.1", "2", "1"]);
    assert!(!row[5].is_empty() && !row[6].is_empty());
    for f in [
        "worker_0.csv",
        "worker_1.csv",
        "eval_curve.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn launch_local_reports_held_out_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let out = elastic(&[
        "launch-local",
        "--workers",
        "2",
        "--tau",
        "50",
        "--eta",
        "0.1",
        "--iters",
        "300",
        "--samples",
        "400",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("held_out_accuracy="));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["exchange_count"], 12);
    assert!(dir.path().join("worker_1").join("worker_1.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seeds"]["worker_1"], 101);
}
