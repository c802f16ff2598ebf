use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_navnet");

fn navnet(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("NAV_LOG_LEVEL", "warn").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, flights_per_profile: usize) -> String {
    let groups: Vec<String> = ["circle", "survey_lawnmower", "waypoint_polyline", "aggressive_manual", "hover"]
        .iter()
        .map(|p| format!(r#"{{ "profile": "{p}", "count": {flights_per_profile}, "duration_s": 66.0, "ground_time_s": 3.0 }}"#))
        .collect();
    let text = format!(
        r#"{{
  "seed": 5,
  "synth": {{ "groups": [{}] }},
  "preprocess": {{ "window": 10, "stride": 8, "val_stride": 4, "val_fraction": 0.142857 }},
  "network": {{ "recurrent_layers": 1, "hidden_size": 8 }},
  "train": {{ "epochs": 2, "batch_size": 128, "early_stop_patience": 0 }}
}}"#,
        groups.join(", ")
    );
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn pipeline(cfg: &str, out: &Path) {
    let out = out.to_str().unwrap();
    for stage in [&["synth"][..], &["preprocess"], &["train"], &["eval", "--baseline"], &["stream"]] {
        let mut args = vec!["--config", cfg, "--out", out, "--jobs", "2"];
        args.extend_from_slice(stage);
        let o = navnet(&args);
        assert_eq!(code(&o), 0, "{stage:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn thirty_five_flight_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 7);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline(&cfg, &a);
    pipeline(&cfg, &b);

    let manifest = fs::read_to_string(a.join("data/dataset.json")).unwrap();
    assert_eq!(manifest.matches("\"id\"").count(), 35);
    let split = fs::read_to_string(a.join("preprocess/split.json")).unwrap();
    let split: serde_json::Value = serde_json::from_str(&split).unwrap();
    assert_eq!(split["val"].as_array().unwrap().len(), 5);
    for f in [
        "preprocess/cleanup_report.json",
        "preprocess/train/windows.bin",
        "preprocess/train/windows.json",
        "preprocess/val/windows.bin",
        "train/model_best.navc",
        "train/model_final.navc",
        "train/train_report.json",
        "eval/summary.csv",
        "stream/online_predictions.csv",
        "stream/compare_report.json",
    ] {
        assert!(a.join(f).exists(), "{f}");
    }
    let metrics_a = fs::read(a.join("eval/metrics.json")).unwrap();
    assert_eq!(metrics_a, fs::read(b.join("eval/metrics.json")).unwrap());
    assert_eq!(fs::read(a.join("preprocess/train/windows.bin")).unwrap(), fs::read(b.join("preprocess/train/windows.bin")).unwrap());

    let summary = fs::read_to_string(a.join("eval/summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert!(header.contains("nn_mpe_m") && header.contains("dr_mpe_m"), "{header}");
    assert_eq!(summary.lines().count(), 1 + 5 + 4);
    let id = split["val"][0].as_str().unwrap();
    let pc = fs::read_to_string(a.join("eval/flights").join(id).join("path_compare.csv")).unwrap();
    assert!(pc.starts_with("t_us,true_pn,true_pe,true_pd,pred_pn,pred_pe,pred_pd,true_vn,true_ve,true_vd,pred_vn,pred_ve,pred_vd"));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("stream/compare_report.json")).unwrap()).unwrap();
    assert_eq!(report["bitwise_equal"], true);
}

#[test]
fn unknown_flag_exits_with_one() {
    assert_eq!(code(&navnet(&["synth", "--no-such-flag"])), 1);
    assert_eq!(code(&navnet(&["frobnicate"])), 1);
}

#[test]
fn help_documents_every_flag() {
    let top = navnet(&["--help"]);
    assert_eq!(code(&top), 0);
    let text = String::from_utf8_lossy(&top.stdout);
    for sub in ["synth", "preprocess", "train", "eval", "stream"] {
        assert!(text.contains(sub), "{sub}");
        let o = navnet(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        let help = String::from_utf8_lossy(&o.stdout);
        for flag in ["--config", "--out", "--seed", "--jobs"] {
            assert!(help.contains(flag), "{sub} {flag}");
        }
    }
    let eval = String::from_utf8_lossy(&navnet(&["eval", "--help"]).stdout).to_string();
    assert!(eval.contains("--baseline") && eval.contains("--checkpoint"));
}

#[test]
fn config_and_data_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&navnet(&["--config", missing.to_str().unwrap(), "--out", out, "synth"])), 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{ "seed": 1, "no_such_key": 3 }"#).unwrap();
    assert_eq!(code(&navnet(&["--config", bad.to_str().unwrap(), "--out", out, "synth"])), 1);
    assert_eq!(code(&navnet(&["synth"])), 1);
    assert_eq!(code(&navnet(&["--out", out, "synth"])), 1);
    assert_eq!(code(&navnet(&["--out", out, "preprocess"])), 2);
    assert_eq!(code(&navnet(&["--out", out, "eval"])), 2);
}

#[test]
fn divergence_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), 1);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for stage in ["synth", "preprocess"] {
        assert_eq!(code(&navnet(&["--config", &cfg_path, "--out", out, "--jobs", "1", stage])), 0);
    }
    let text = fs::read_to_string(&cfg_path).unwrap().replace(
        r#""epochs": 2,"#,
        r#""epochs": 2, "lr_schedule": [[0, 1e300]],"#,
    );
    fs::write(&cfg_path, text).unwrap();
    assert_eq!(code(&navnet(&["--config", &cfg_path, "--out", out, "train"])), 3);
}
