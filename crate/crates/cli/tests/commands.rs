use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sda2e_core::data::{generate_synthetic, load_csv, SyntheticSpec};
use sda2e_core::eval::RunReport;
use sda2e_core::sda2e::load_checkpoint;

fn sda2e(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sda2e")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Writes a small synthetic dataset under `dir` and returns (data, labels).
fn small_synth(dir: &Path, n: usize, d: usize, fraction: f64, seed: u64) -> (PathBuf, PathBuf) {
    let out = sda2e(&[
        "synth",
        "--out",
        p(dir),
        "--n",
        &n.to_string(),
        "--d",
        &d.to_string(),
        "--anomaly-fraction",
        &fraction.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (dir.join("data.csv"), dir.join("labels.csv"))
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .map(|it| it.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&sda2e(&[])), 2);
    assert_eq!(code(&sda2e(&["frobnicate"])), 2);
    assert_eq!(code(&sda2e(&["synth"])), 2);
    let tmp = tempfile::tempdir().unwrap();
    let out = sda2e(&["synth", "--out", p(tmp.path()), "--set", "no_such_key=1"]);
    assert_eq!(code(&out), 2);
    let out = sda2e(&["synth", "--out", p(tmp.path()), "--set", "missing-equals"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&sda2e(&["--help"])), 0);
}

#[test]
fn synth_default_writes_two_files_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sda2e(&["synth", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 0);
    assert_eq!(listing(tmp.path()), ["data.csv", "labels.csv"]);
    let text = stdout(&out);
    assert!(text.starts_with("# config {"), "{text}");
    assert!(text.contains("2000"), "{text}");
    assert!(text.contains("1.00%"), "{text}");
}

#[test]
fn synth_invalid_fraction_leaves_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("out");
    for bad in ["0", "0.5", "1.5", "-0.1"] {
        let out = sda2e(&["synth", "--out", p(&target), "--anomaly-fraction", bad]);
        assert_ne!(code(&out), 0, "fraction {bad}");
        assert!(!target.exists(), "fraction {bad} created {:?}", listing(&target));
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    }
}

#[test]
fn synth_matches_golden_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sda2e(&[
        "synth",
        "--out",
        p(tmp.path()),
        "--n",
        "12",
        "--d",
        "6",
        "--anomaly-fraction",
        "0.1",
        "--seed",
        "7",
    ]);
    assert_eq!(code(&out), 0);
    let core_fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    assert_eq!(
        std::fs::read_to_string(tmp.path().join("data.csv")).unwrap(),
        std::fs::read_to_string(core_fixtures.join("small_synthetic.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(tmp.path().join("labels.csv")).unwrap(),
        std::fs::read_to_string(core_fixtures.join("small_synthetic_labels.csv")).unwrap()
    );
}

#[test]
fn synth_canonical_checksum_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sda2e(&["synth", "--out", p(tmp.path()), "--seed", "42"]);
    assert_eq!(code(&out), 0);
    let (ds, _) = generate_synthetic(&SyntheticSpec::canonical()).unwrap();
    assert!(stdout(&out).contains(&ds.checksum()));
    assert_eq!(load_csv(tmp.path().join("data.csv")).unwrap().checksum(), ds.checksum());
}

#[test]
fn config_file_then_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("synth.conf");
    std::fs::write(&cfg, "# small\nn = 30\nd = 5\nseed = 3\n").unwrap();
    let a = tmp.path().join("a");
    let out = sda2e(&["synth", "--out", p(&a), "--config", p(&cfg), "--d", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ds = load_csv(a.join("data.csv")).unwrap();
    assert_eq!((ds.len(), ds.d()), (30, 7));
    let header = stdout(&out).lines().next().unwrap().to_string();
    assert!(header.contains("\"n\":30") && header.contains("\"d\":7") && header.contains("\"seed\":3"), "{header}");

    std::fs::write(&cfg, "n 30\n").unwrap();
    assert_eq!(code(&sda2e(&["synth", "--out", p(&a), "--config", p(&cfg)])), 2);
}

#[test]
fn train_one_epoch_then_rescore() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, labels) = small_synth(&tmp.path().join("d"), 60, 8, 0.05, 1);
    let run = tmp.path().join("run");
    let out = sda2e(&[
        "train",
        "--dataset",
        p(&data),
        "--labels",
        p(&labels),
        "--out",
        p(&run),
        "--epochs",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(run.join("losses.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("# config {"));
    assert_eq!(lines[1], "epoch,train_mse,holdout_mse");
    assert_eq!(lines.len(), 3, "{table}");
    let cells: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(cells[0], "1");
    assert!(cells[1].parse::<f64>().unwrap().is_finite());
    assert!(cells[2].parse::<f64>().unwrap().is_finite());

    let model = load_checkpoint(run.join("model.ckpt")).unwrap();
    let ds = load_csv(&data).unwrap();
    let direct = model.score_all(&ds).unwrap();

    let first = sda2e(&["score", "--dataset", p(&data), "--model", p(&run.join("model.ckpt"))]);
    assert_eq!(code(&first), 0);
    let second = sda2e(&["score", "--dataset", p(&data), "--model", p(&run.join("model.ckpt"))]);
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), ds.len());
    for (i, line) in rows.iter().enumerate() {
        let (id, score) = line.split_once(',').unwrap();
        assert_eq!(id, ds.id(i));
        assert_eq!(score.parse::<f64>().unwrap(), direct[i]);
    }
}

#[test]
fn train_is_rerunnable_and_inputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = small_synth(&tmp.path().join("d"), 40, 6, 0.05, 2);
    let before = std::fs::read(&data).unwrap();
    let mut tables = Vec::new();
    for name in ["a", "b"] {
        let out = sda2e(&["train", "--dataset", p(&data), "--out", p(&tmp.path().join(name)), "--epochs", "3"]);
        assert_eq!(code(&out), 0);
        tables.push((
            std::fs::read(tmp.path().join(name).join("losses.csv")).unwrap(),
            std::fs::read(tmp.path().join(name).join("model.ckpt")).unwrap(),
        ));
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(std::fs::read(&data).unwrap(), before);
}

#[test]
fn train_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.csv");
    let out = sda2e(&["train", "--dataset", p(&missing), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 3);

    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "id,a,b\nr0,0,1\nr1,2,0\n").unwrap();
    let out = sda2e(&["train", "--dataset", p(&bad), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 3);

    let (data, _) = small_synth(&tmp.path().join("d"), 40, 6, 0.05, 2);
    let out = sda2e(&["train", "--dataset", p(&data), "--out", p(&tmp.path().join("o")), "--holdout", "1.5"]);
    assert_eq!(code(&out), 2);
    let out = sda2e(&["train", "--dataset", p(&data), "--out", p(&tmp.path().join("o")), "--set", "k=0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn active_passive_single_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, labels) = small_synth(&tmp.path().join("d"), 120, 12, 0.05, 4);
    let run = tmp.path().join("run");
    let out = sda2e(&[
        "active",
        "--dataset",
        p(&data),
        "--labels",
        p(&labels),
        "--out",
        p(&run),
        "--strategy",
        "passive",
        "--iterations",
        "1",
        "--budget",
        "4",
        "--epochs",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        listing(&run),
        ["journal-passive.jsonl", "report-passive.csv", "report-passive.json", "summary.txt"]
    );
    let report = RunReport::load(run.join("report-passive.json")).unwrap();
    assert_eq!(report.dataset.name, "data");
    assert_eq!(report.runs.len(), 1);
    let iters = &report.runs[0].iterations;
    assert_eq!(iters.len(), 2, "baseline plus one iteration");
    assert_eq!(iters[1].iteration, 1);
    assert!(iters[1].queried_count <= 4);
    assert!(iters.iter().all(|r| r.ndcg.is_some()));
    assert_eq!(report.session_config["iterations"], 1);
    assert_eq!(report.model_config["epochs"], 2);
}

#[test]
fn active_all_strategies_structure() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, labels) = small_synth(&tmp.path().join("d"), 120, 12, 0.05, 4);
    let run = tmp.path().join("run");
    let out = sda2e(&[
        "active",
        "--dataset",
        p(&data),
        "--labels",
        p(&labels),
        "--out",
        p(&run),
        "--all-strategies",
        "--iterations",
        "2",
        "--epochs",
        "2",
        "--metric",
        "jaccard",
        "--percentile",
        "70",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for s in ["s1", "s2", "hybrid"] {
        assert!(run.join(format!("report-{s}.json")).exists());
        assert!(run.join(format!("journal-{s}.jsonl")).exists());
        assert!(text.lines().any(|l| l.starts_with(&format!("{s}: "))), "{text}");
    }
    let summary = std::fs::read_to_string(run.join("summary.txt")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert!(lines[0].starts_with("# session {") && lines[0].contains("\"metric\":\"jaccard\""), "{summary}");
    assert!(lines[0].contains("\"error_percentile\":70.0") && lines[0].contains("\"sim_percentile\":70.0"));
    assert!(lines[1].starts_with("# model {"));
    assert_eq!(lines[2], "strategy,max,mean,median");
    let rows: Vec<&str> = lines[3..6].to_vec();
    assert_eq!(rows.iter().map(|l| l.split(',').next().unwrap()).collect::<Vec<_>>(), ["s1", "s2", "hybrid"]);
    let last = lines[6];
    assert!(last.starts_with("Max_Max=") && last.contains(" Max_Mean=") && last.contains(" Max_Median="), "{last}");
    assert_eq!(lines.len(), 7);

    let mut expected = [f64::NEG_INFINITY; 3];
    for row in &rows {
        let v: Vec<f64> = row.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        for k in 0..3 {
            expected[k] = expected[k].max(v[k]);
        }
    }
    let got: Vec<f64> = last.split(' ').map(|kv| kv.split_once('=').unwrap().1.parse().unwrap()).collect();
    assert_eq!(got, expected);
}

#[test]
fn active_refuses_zero_anomalies() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, labels) = small_synth(&tmp.path().join("d"), 50, 6, 0.05, 4);
    let text = std::fs::read_to_string(&labels).unwrap().replace("anomaly", "normal");
    std::fs::write(&labels, text).unwrap();
    let run = tmp.path().join("run");
    let out = sda2e(&["active", "--dataset", p(&data), "--labels", p(&labels), "--out", p(&run)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nDCG"));
    assert!(!run.exists());
}

#[test]
fn active_rejects_bad_session_values() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, labels) = small_synth(&tmp.path().join("d"), 50, 6, 0.05, 4);
    let run = tmp.path().join("run");
    let base = ["active", "--dataset", p(&data), "--labels", p(&labels), "--out", p(&run)];
    for extra in [&["--budget", "0"][..], &["--percentile", "100"], &["--iterations", "0"], &["--strategy", "s3"]] {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        assert_eq!(code(&sda2e(&args)), 2, "{extra:?}");
    }
    assert!(!run.exists());
}

/// Canonical dataset, Hybrid, seed 42, five epochs per (re)train. The golden
/// file holds the nDCG series printed with full precision.
#[test]
fn active_hybrid_matches_golden_series() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, labels) = small_synth(&tmp.path().join("d"), 2000, 64, 0.01, 42);
    let run = tmp.path().join("run");
    let out = sda2e(&[
        "active",
        "--dataset",
        p(&data),
        "--labels",
        p(&labels),
        "--out",
        p(&run),
        "--strategy",
        "hybrid",
        "--seed",
        "42",
        "--epochs",
        "5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = RunReport::load(run.join("report-hybrid.json")).unwrap();
    let series: String = report.runs[0]
        .iterations
        .iter()
        .map(|r| format!("{},{:?}\n", r.iteration, r.ndcg.unwrap()))
        .collect();
    let golden = std::fs::read_to_string(fixture("hybrid_seed42_ndcg.csv")).unwrap();
    assert_eq!(series, golden);
}

fn report_with(name: &str, checksum: &str, runs: &[(&str, &[f64])]) -> RunReport {
    let text = serde_json::json!({
        "dataset": {"name": name, "checksum": checksum, "rows": 10, "features": 4, "anomalies": 1},
        "session_config": {},
        "model_config": {},
        "ndcg_cutoff": null,
        "runs": runs.iter().map(|(s, v)| serde_json::json!({
            "strategy": s,
            "iterations": v.iter().enumerate().map(|(i, x)| serde_json::json!({
                "iteration": i, "ndcg": x, "tau": null, "queried_count": 0
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "summary": null,
    });
    RunReport::from_text(&text.to_string()).unwrap()
}

fn save(dir: &Path, file: &str, report: &RunReport) -> PathBuf {
    let path = dir.join(file);
    report.save(&path).unwrap();
    path
}

#[test]
fn eval_single_report() {
    let tmp = tempfile::tempdir().unwrap();
    let a = save(tmp.path(), "a.json", &report_with("ds", "c", &[("hybrid", &[0.5, 0.7, 0.9])]));
    let out = sda2e(&["eval", p(&a)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "method,ds,avg_rank\nhybrid,0.700000*,1.0000\nwinner,hybrid,\n");
}

#[test]
fn eval_dominating_method_wins_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let a = save(
        tmp.path(),
        "a.json",
        &report_with("x", "cx", &[("s1", &[0.2, 0.3, 0.4]), ("hybrid", &[0.6, 0.9, 1.0])]),
    );
    let b = save(
        tmp.path(),
        "b.json",
        &report_with("y", "cy", &[("s1", &[0.1, 0.1]), ("hybrid", &[0.3, 0.2])]),
    );
    let table = tmp.path().join("table.csv");
    let out = sda2e(&["eval", p(&a), p(&b), "--out", p(&table)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(std::fs::read_to_string(&table).unwrap(), text);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,x,y,avg_rank");
    assert_eq!(lines[1], "s1,0.300000,0.100000,2.0000");
    assert_eq!(lines[2], "hybrid,0.900000*,0.200000*,1.0000");
    assert_eq!(lines[3], "winner,hybrid,hybrid,");
}

#[test]
fn eval_rejects_inconsistent_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let a = save(tmp.path(), "a.json", &report_with("x", "c1", &[("s1", &[0.5])]));
    let b = save(tmp.path(), "b.json", &report_with("x", "c2", &[("s2", &[0.5])]));
    assert_eq!(code(&sda2e(&["eval", p(&a), p(&b)])), 3);
    let c = save(tmp.path(), "c.json", &report_with("y", "c3", &[("s2", &[0.5])]));
    assert_eq!(code(&sda2e(&["eval", p(&a), p(&c)])), 3, "s1 has no run on y");
    assert_eq!(code(&sda2e(&["eval", p(&tmp.path().join("none.json"))])), 3);
    assert_eq!(code(&sda2e(&["eval"])), 2);
}

fn brute_ranks(table: &[Vec<f64>]) -> Vec<f64> {
    let methods = table.len();
    let datasets = table[0].len();
    let mut totals = vec![0.0; methods];
    for j in 0..datasets {
        let mut order: Vec<usize> = (0..methods).collect();
        order.sort_by(|&a, &b| table[b][j].total_cmp(&table[a][j]));
        let mut pos = 0;
        while pos < methods {
            let mut end = pos;
            while end + 1 < methods && table[order[end + 1]][j] == table[order[pos]][j] {
                end += 1;
            }
            let shared = (pos + 1 + end + 1) as f64 / 2.0;
            for &m in &order[pos..=end] {
                totals[m] += shared;
            }
            pos = end + 1;
        }
    }
    totals.into_iter().map(|t| t / datasets as f64).collect()
}

fn lower_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[(s.len() - 1) / 2]
}

#[test]
fn eval_seeded_trio_average_ranks() {
    let tmp = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (i, seed) in [11u64, 12, 13].into_iter().enumerate() {
        let (data, labels) = small_synth(&tmp.path().join(format!("ds{i}")), 100, 10, 0.05, seed);
        let named = tmp.path().join(format!("set{i}.csv"));
        std::fs::copy(&data, &named).unwrap();
        let run = tmp.path().join(format!("run{i}"));
        let out = sda2e(&[
            "active",
            "--dataset",
            p(&named),
            "--labels",
            p(&labels),
            "--out",
            p(&run),
            "--all-strategies",
            "--iterations",
            "2",
            "--epochs",
            "2",
            "--seed",
            &seed.to_string(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        for s in ["s1", "s2", "hybrid"] {
            paths.push(run.join(format!("report-{s}.json")));
        }
    }
    let mut args = vec!["eval"];
    args.extend(paths.iter().map(|x| p(x)));
    let out = sda2e(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let reports: Vec<RunReport> = paths.iter().map(|x| RunReport::load(x).unwrap()).collect();
    let methods = ["s1", "s2", "hybrid"];
    let table: Vec<Vec<f64>> = methods
        .iter()
        .map(|m| {
            (0..3)
                .map(|i| {
                    let r = reports.iter().find(|r| r.dataset.name == format!("set{i}") && r.runs[0].strategy == *m).unwrap();
                    lower_median(&r.runs[0].iterations.iter().map(|x| x.ndcg.unwrap()).collect::<Vec<_>>())
                })
                .collect()
        })
        .collect();
    let expected = brute_ranks(&table);
    assert_eq!(sda2e_core::eval::average_ranks(&table).unwrap(), expected);

    let comparison = sda2e_cli::compare_reports(&reports).unwrap();
    assert_eq!(comparison.methods, methods);
    assert_eq!(comparison.datasets, ["set0", "set1", "set2"]);
    assert_eq!(comparison.cells, table);
    assert_eq!(comparison.average_ranks, expected);
    let text = stdout(&out);
    for (m, line) in text.lines().skip(1).take(3).enumerate() {
        assert!(line.ends_with(&format!(",{:.4}", expected[m])), "{line}");
    }
}
