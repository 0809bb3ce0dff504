use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use omicsfuse::preprocess::OmicsKind;
use omicsfuse_cli::io;
use tempfile::TempDir;

fn omicsfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omicsfuse"))
        .args(args)
        .env_remove(omicsfuse_cli::OUT_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", p(dir)];
    args.extend_from_slice(extra);
    let out = omicsfuse(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: &[&str] = &[
    "--n", "60", "--ge-features", "40", "--mirna-features", "30", "--methylation-features", "30",
];

fn pipeline_args<'a>(data: &'a Path, out: &'a Path) -> Vec<String> {
    [
        ("--gene-expression", data.join("gene_expression.csv")),
        ("--mirna", data.join("mirna.csv")),
        ("--methylation", data.join("methylation.csv")),
        ("--survival", data.join("survival.csv")),
        ("--truth", data.join("truth_labels.csv")),
        ("--out", out.to_path_buf()),
    ]
    .into_iter()
    .flat_map(|(flag, path)| [flag.to_string(), p(&path).to_string()])
    .collect()
}

fn run_pipeline(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["pipeline".to_string()];
    args.extend(pipeline_args(data, out));
    args.extend(extra.iter().map(|s| s.to_string()));
    omicsfuse(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_under(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

#[test]
fn pipeline_happy_path_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let (data, out) = (tmp.path().join("data"), tmp.path().join("out"));
    synth(&data, &[]);
    let res = run_pipeline(&data, &out, &[]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    for rel in [
        "config.resolved.txt",
        "preprocess_report.json",
        "fusion_report.json",
        "fused/candidates.csv",
        "labels.csv",
        "metrics/sweep.csv",
        "metrics/final.csv",
        "metrics/final.json",
        "survival/report.json",
        "survival/report.csv",
        "report.json",
    ] {
        assert!(out.join(rel).is_file(), "missing {rel}");
    }
    let affinities = fs::read_dir(out.join("affinity")).unwrap().count();
    assert_eq!(affinities, 9);
    for kind in ["gene_expression", "mirna", "methylation"] {
        for stage in ["raw", "standardized", "transformed", "selected"] {
            assert!(out.join(format!("histograms/{kind}_{stage}.csv")).is_file());
        }
    }

    let candidates = fs::read_to_string(out.join("fused/candidates.csv")).unwrap();
    let n_candidates = candidates.lines().count() - 1;
    assert_eq!(n_candidates, 99);
    let fused = fs::read_dir(out.join("fused")).unwrap().count() - 1;
    let failed = candidates.lines().skip(1).filter(|l| !l.ends_with(',')).count();
    assert_eq!(fused + failed, n_candidates);

    let resolved = fs::read_to_string(out.join("config.resolved.txt")).unwrap();
    for line in [
        "zero_fraction_threshold = 0.2",
        "cumulative_target = 0.95",
        "transform = yeo_johnson",
        "stage1_k2_range = 2:100",
        "stage2_k2_range = auto",
        "cluster_counts = 3,4,5",
        "eval_clusters = 2",
    ] {
        assert!(resolved.contains(line), "{line}");
    }
    let labels = io::read_labels_csv(&out.join("labels.csv")).unwrap();
    let names: Vec<&str> = labels.columns.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["k3_3", "k3_4", "k3_5", "eval_2"]);
    assert_eq!(labels.sample_ids.len(), 150);

    let report = io::read_json(&out.join("survival/report.json")).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 4);
    assert_eq!(report[0]["report"]["threshold"], 1.3);
}

#[test]
fn sweep_has_one_row_per_candidate() {
    let tmp = TempDir::new().unwrap();
    let (data, out) = (tmp.path().join("data"), tmp.path().join("out"));
    synth(&data, SMALL);
    let res = run_pipeline(&data, &out, &["--eval-clusters", "3", "--stage3-k2-range", "5:30"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let sweep = fs::read_to_string(out.join("metrics/sweep.csv")).unwrap();
    let k2s: Vec<usize> = sweep
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(k2s, (5..=30).collect::<Vec<_>>());
    assert!(sweep.starts_with("k2,ari,nmi,error\n"));
}

#[test]
fn survival_file_missing_a_sample_exits_2() {
    let tmp = TempDir::new().unwrap();
    let (data, out) = (tmp.path().join("data"), tmp.path().join("out"));
    synth(&data, SMALL);
    let surv = data.join("survival.csv");
    let text = fs::read_to_string(&surv).unwrap();
    let dropped: Vec<&str> = text.lines().enumerate().filter(|&(i, _)| i != 5).map(|(_, l)| l).collect();
    fs::write(&surv, dropped.join("\n") + "\n").unwrap();
    let res = run_pipeline(&data, &out, &[]);
    assert_eq!(code(&res), 2);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("S0005 (missing from"), "{stderr}");
}

#[test]
fn shuffled_matrix_rows_are_realigned() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, SMALL);
    let path = data.join("mirna.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1..].reverse();
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let a = tmp.path().join("a");
    let res = run_pipeline(&data, &a, &["--stage3-k2-range", "5:8"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let labels = io::read_labels_csv(&a.join("labels.csv")).unwrap();
    assert_eq!(labels.sample_ids[0], "S0001");
}

#[test]
fn pipeline_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let extra = ["--seed", "11", "--stage3-k2-range", "2:25"];
    assert_eq!(code(&run_pipeline(&data, &a, &extra)), 0);
    assert_eq!(code(&run_pipeline(&data, &b, &extra)), 0);
    let (fa, fb) = (files_under(&a), files_under(&b));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.strip_prefix(&a).unwrap(), y.strip_prefix(&b).unwrap());
        if x.ends_with("config.resolved.txt") {
            continue;
        }
        assert!(fs::read(x).unwrap() == fs::read(y).unwrap(), "{} differs", x.display());
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, SMALL);
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "gene_expression = {}\nmirna = {}\nmethylation = {}\ncluster_counts = 2,3\nstage3_k2_range = 4:9\nseed = 5\n",
            p(&data.join("gene_expression.csv")),
            p(&data.join("mirna.csv")),
            p(&data.join("methylation.csv")),
        ),
    )
    .unwrap();
    let res = omicsfuse(&["pipeline", "--config", p(&cfg), "--seed", "6", "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let resolved = fs::read_to_string(out.join("config.resolved.txt")).unwrap();
    assert!(resolved.contains("seed = 6\n"));
    assert!(resolved.contains("cluster_counts = 2,3\n"));
    assert!(!out.join("survival").exists());
    assert!(!out.join("metrics").exists());

    fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(code(&omicsfuse(&["pipeline", "--config", p(&cfg)])), 1);
}

#[test]
fn synth_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, &["--n", "150", "--k", "3", "--seed", "7"]);
    synth(&b, &["--n", "150", "--k", "3", "--seed", "7"]);
    let names = [
        "gene_expression.csv",
        "mirna.csv",
        "methylation.csv",
        "survival.csv",
        "truth_labels.csv",
        "synth_spec.json",
    ];
    for name in names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(files_under(&a).len(), names.len());
}

#[test]
fn invalid_flag_value_exits_1_with_usage() {
    let res = omicsfuse(&["synth", "--n", "many"]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("Usage"));

    let res = omicsfuse(&["synth", "--k", "0"]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("Usage"));

    let res = omicsfuse(&["pipeline", "--gene-expression", "a", "--mirna", "b", "--methylation", "c", "--k1", "x"]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("Usage"));

    assert_eq!(code(&omicsfuse(&["frobnicate"])), 1);
    assert_eq!(code(&omicsfuse(&["--help"])), 0);
}

#[test]
fn missing_input_file_exits_4() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.csv");
    let res = omicsfuse(&[
        "pipeline",
        "--gene-expression",
        p(&missing),
        "--mirna",
        p(&missing),
        "--methylation",
        p(&missing),
    ]);
    assert_eq!(code(&res), 4);
}

#[test]
fn degenerate_input_exits_3_naming_the_stage() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, SMALL);
    let path = data.join("mirna.csv");
    let text = fs::read_to_string(&path).unwrap();
    let constant: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                l.to_string()
            } else {
                let cells: Vec<&str> = l.split(',').collect();
                let mut row = vec![cells[0].to_string()];
                row.extend((1..cells.len()).map(|_| "1".to_string()));
                row.join(",")
            }
        })
        .collect();
    fs::write(&path, constant.join("\n") + "\n").unwrap();
    let res = run_pipeline(&data, &tmp.path().join("out"), &[]);
    assert_eq!(code(&res), 3);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("mirna") || stderr.contains("stage"), "{stderr}");
}

fn survival_report(labels: &Path, surv: &Path, out: &Path) -> serde_json::Value {
    let res = omicsfuse(&["survival", "--labels", p(labels), "--survival", p(surv), "--out", p(out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    io::read_json(&out.join("survival_report.json")).unwrap()
}

#[test]
fn survival_significance_true_vs_shuffled_labels() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(
        &data,
        &["--n", "200", "--k", "2", "--hazard-ratio", "3", "--seed", "21", "--ge-features", "5", "--mirna-features", "5", "--methylation-features", "5"],
    );
    let truth = io::read_labels_csv(&data.join("truth_labels.csv")).unwrap();
    let n = truth.sample_ids.len();
    let labels: Vec<usize> = truth.columns[0].1.iter().map(|s| s.parse().unwrap()).collect();
    let shuffled: Vec<usize> = (0..n).map(|i| labels[(i * 7 + 3) % n]).collect();
    let file = tmp.path().join("labels.csv");
    io::write_labels_csv(
        &file,
        &truth.sample_ids,
        &[("truth".to_string(), labels), ("shuffled".to_string(), shuffled)],
    )
    .unwrap();

    let report = survival_report(&file, &data.join("survival.csv"), &tmp.path().join("out"));
    let (t, s) = (&report[0]["report"], &report[1]["report"]);
    assert_eq!(report[0]["labeling"], "truth");
    assert_eq!(t["significant"], true, "{t}");
    assert_eq!(s["significant"], false, "{s}");
    assert_eq!(t["threshold"], 1.3);
    assert!(t["neg_log10_p"].as_f64().unwrap() >= 1.30);
    let csv = fs::read_to_string(tmp.path().join("out/survival_report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn survival_alignment_failure_exits_2() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, SMALL);
    let labels = tmp.path().join("labels.csv");
    let ids: Vec<String> = (1..=59).map(|i| format!("S{i:04}")).collect();
    io::write_labels_csv(&labels, &ids, &[("x".into(), (0..59).map(|i| i % 2).collect())]).unwrap();
    let res = omicsfuse(&["survival", "--labels", p(&labels), "--survival", p(&data.join("survival.csv"))]);
    assert_eq!(code(&res), 2);
}

#[test]
fn metrics_command_scores_labelings() {
    let tmp = TempDir::new().unwrap();
    let ids: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
    let truth = tmp.path().join("truth.csv");
    let labels = tmp.path().join("labels.csv");
    io::write_labels_csv(&truth, &ids, &[("t".into(), vec![0, 0, 0, 1, 1, 1])]).unwrap();
    io::write_labels_csv(
        &labels,
        &ids,
        &[("same".into(), vec![5, 5, 5, 2, 2, 2]), ("half".into(), vec![0, 1, 0, 1, 0, 1])],
    )
    .unwrap();
    let out = tmp.path().join("out");
    let res = omicsfuse(&["metrics", "--labels", p(&labels), "--truth", p(&truth), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("same,2,1,1"), "{csv}");
}

#[test]
fn env_var_sets_default_output_dir() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("from_env");
    let res = Command::new(env!("CARGO_BIN_EXE_omicsfuse"))
        .args(["synth", "--n", "10", "--k", "2"])
        .env(omicsfuse_cli::OUT_DIR_ENV, &dir)
        .output()
        .unwrap();
    assert_eq!(code(&res), 0);
    assert!(dir.join("survival.csv").is_file());
}

#[test]
fn written_files_round_trip_through_readers() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data, SMALL);
    for (name, kind) in [
        ("gene_expression.csv", OmicsKind::GeneExpression),
        ("mirna.csv", OmicsKind::Mirna),
        ("methylation.csv", OmicsKind::Methylation),
    ] {
        let m = io::read_omics_csv(&data.join(name), kind).unwrap();
        assert!(m.has_missing());
        let copy = tmp.path().join(name);
        io::write_omics_csv(&copy, &m).unwrap();
        assert_eq!(fs::read(&copy).unwrap(), fs::read(data.join(name)).unwrap());
        let back = io::read_omics_csv(&copy, kind).unwrap();
        assert_eq!(back.sample_ids(), m.sample_ids());
        assert_eq!(back.feature_ids(), m.feature_ids());
        let bits = |x: &omicsfuse::preprocess::OmicsMatrix| -> Vec<u64> {
            x.values().as_slice().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&back), bits(&m));
    }

    let (ids, recs) = io::read_survival_csv(&data.join("survival.csv")).unwrap();
    let copy = tmp.path().join("surv.csv");
    io::write_survival_csv(&copy, &ids, &recs).unwrap();
    assert_eq!(io::read_survival_csv(&copy).unwrap(), (ids.clone(), recs));

    let out = tmp.path().join("out");
    assert_eq!(code(&run_pipeline(&data, &out, &["--stage3-k2-range", "5:7"])), 0);
    let (mids, m) = io::read_sample_matrix_csv(&out.join("affinity/intra_mirna.csv")).unwrap();
    assert_eq!(mids, ids);
    let again = tmp.path().join("aff.csv");
    io::write_sample_matrix_csv(&again, &mids, &m).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(out.join("affinity/intra_mirna.csv")).unwrap());
    for json in ["report.json", "fusion_report.json", "preprocess_report.json"] {
        io::read_json(&out.join(json)).unwrap();
    }
}

#[test]
fn null_model_run_has_no_signal() {
    let tmp = TempDir::new().unwrap();
    let (data, out) = (tmp.path().join("data"), tmp.path().join("out"));
    synth(&data, &["--n", "90", "--separation", "0", "--seed", "3"]);
    let res = run_pipeline(&data, &out, &["--eval-clusters", "3", "--stage3-k2-range", "2:40"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let rows = io::read_json(&out.join("metrics/final.json")).unwrap();
    let eval = rows.as_array().unwrap().iter().find(|r| r["labeling"] == "k3_3").unwrap();
    let ari = eval["ari"].as_f64().unwrap();
    assert!(ari <= 0.2, "null-model ARI {ari}");
}
