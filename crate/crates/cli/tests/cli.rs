use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exact-fpt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SAMPLE: &[&str] = &[
    "sample",
    "--model",
    "constant:mu=1",
    "--level",
    "2",
    "--n",
    "10000",
    "--seed",
    "7",
];

#[test]
fn sample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), &[SAMPLE, &["--out", "a.csv"]].concat());
    let b = run(
        dir.path(),
        &[SAMPLE, &["--out", "b.csv", "--workers", "3"]].concat(),
    );
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,value,iterations,total_points"));
    assert_eq!(lines.count(), 10_000);
}

#[test]
fn sample_writes_a_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "sample",
            "--model",
            "constant:mu=1",
            "--level",
            "2",
            "--n",
            "500",
            "--bins",
            "12",
        ],
    );
    assert!(o.status.success());
    assert!(dir.path().join("samples.csv").exists());
    let h = fs::read_to_string(dir.path().join("samples_hist.csv")).unwrap();
    assert!(h.starts_with("bin_left,bin_right,density\n"));
    assert_eq!(h.lines().count(), 13);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        // shift needs a lower bound on gamma
        &[
            "sample",
            "--model",
            "sine",
            "--level",
            "2",
            "--variant",
            "a1-shift",
        ],
        // no default bound for an untruncated OU drift
        &["sample", "--model", "ou:alpha=0.3,beta=1", "--level", "1"],
        // kappa below the supremum of gamma on [x, L]
        &["sample", "--model", "sine", "--level", "2", "--kappa", "4"],
        &["sample", "--model", "nonsense", "--level", "2"],
        &["sample", "--model", "sine", "--x", "2", "--level", "1"],
        &["compare", "--model", "sine", "--level", "2", "--k", "4"],
    ];
    for args in cases {
        let o = run(dir.path(), args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn budget_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "sample",
            "--model",
            "sine",
            "--level",
            "2",
            "--n",
            "50",
            "--max-iterations",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_passes_on_a_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "validate",
            "--model",
            "constant:mu=1",
            "--level",
            "2",
            "--n",
            "4000",
        ],
    );
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("PASS closed-form KS"));
    assert!(text.contains("PASS iteration identity"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn split_scan_writes_costs_below_the_unsplit_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "split-scan",
            "--model",
            "sine",
            "--level",
            "2",
            "--k",
            "1..25",
            "--n",
            "400",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scan = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let mut lines = scan.lines();
    assert_eq!(lines.next(), Some("k,mean_total_points,stderr"));
    let rows: Vec<(u32, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 25);
    let best = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!(best.0 > 1, "{rows:?}");
    assert!(rows[0].1 > 5.0 * best.1);
}

#[test]
fn compare_writes_delta_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "compare",
            "--model",
            "sine",
            "--level",
            "2",
            "--n",
            "2000",
            "--out",
            "delta.csv",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("delta.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,mean_delta,std_delta,t_stat,ratio"));
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert_eq!(row.len(), 5);
    assert_eq!(row[0], 2000.0);
    assert!(row[1] < 0.0);
}

#[test]
fn bench_reports_cost() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "bench", "--model", "sine", "--level", "2", "--k", "20", "--n", "1000",
        ],
    );
    let text = stdout(&o);
    assert!(o.status.success());
    assert!(text.contains("cost (variates)"), "{text}");
    assert!(text.contains("optimal k"));
}
