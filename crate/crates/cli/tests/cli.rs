use std::path::Path;
use std::process::{Command, Output};

use sddpg_core::eval::EvalReport;
use sddpg_core::model_io::{Model, ModelFile};
use sddpg_core::train::TrainConfig;

fn sddpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sddpg")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sddpg(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn tiny_config(dir: &Path, actor: &str) -> String {
    let mut cfg = TrainConfig::desk();
    cfg.actor = actor.parse().unwrap();
    cfg.san_hidden = vec![12, 12];
    cfg.deep_hidden = vec![12, 12];
    cfg.critic_hidden = vec![16, 16];
    cfg.batch_size = 8;
    cfg.warmup_steps = 40;
    cfg.max_episode_steps = 120;
    cfg.curriculum[0].steps = 150;
    cfg.curriculum[1].steps = 150;
    let path = dir.join(format!("{actor}.toml"));
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn show_config_round_trips() {
    for preset in ["desk", "paper"] {
        let text = ok(&["show-config", "--preset", preset]);
        let cfg = TrainConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, TrainConfig::preset(preset.parse().unwrap()));
    }
}

#[test]
fn train_eval_quantize_bench_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = tiny_config(d, "spiking");
    let runs = d.join("runs");
    ok(&["train", "--config", &cfg, "--seed", "0,1", "--out-dir", runs.to_str().unwrap()]);
    for seed in [0, 1] {
        let s = runs.join(format!("seed-{seed}"));
        for f in ["actor.json", "critic.json", "train_log.csv", "config.toml", "checkpoint-stage0.json", "checkpoint-stage1.json"] {
            assert!(s.join(f).exists(), "missing {f} for seed {seed}");
        }
    }
    let log0 = std::fs::read_to_string(runs.join("seed-0/train_log.csv")).unwrap();
    assert!(log0.starts_with("# sddpg training log v1\nepisode,stage,outcome,steps,return\n"));
    assert_ne!(log0, std::fs::read_to_string(runs.join("seed-1/train_log.csv")).unwrap());

    let resumed = d.join("resumed");
    let ck = runs.join("seed-0/checkpoint-stage0.json");
    ok(&["train", "--resume", ck.to_str().unwrap(), "--out-dir", resumed.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(resumed.join("train_log.csv")).unwrap(), log0);

    let actor = runs.join("seed-0/actor.json");
    let q = d.join("q.json");
    ok(&["quantize", "--model", actor.to_str().unwrap(), "--out", q.to_str().unwrap()]);
    assert!(matches!(ModelFile::load(&q).unwrap().model, Model::Quantized(_)));

    let r1 = d.join("r1.json");
    let r2 = d.join("r2.json");
    let r3 = d.join("r3.json");
    ok(&["eval", "--model", actor.to_str().unwrap(), "--episodes", "5", "--seed", "3", "--out", r1.to_str().unwrap()]);
    ok(&["eval", "--model", q.to_str().unwrap(), "--episodes", "5", "--seed", "3", "--out", r2.to_str().unwrap()]);
    ok(&["eval", "--model", actor.to_str().unwrap(), "--episodes", "5", "--seed", "4", "--out", r3.to_str().unwrap()]);
    let report = EvalReport::from_json(&std::fs::read_to_string(&r1).unwrap()).unwrap();
    assert_eq!(report.episodes.len(), 5);
    assert_eq!(report.method, "sddpg");

    let bench = d.join("bench");
    let table = ok(&["bench", r1.to_str().unwrap(), r2.to_str().unwrap(), "--out-dir", bench.to_str().unwrap()]);
    assert!(table.contains("sddpg-int8"));
    for f in ["bench.csv", "success.svg", "heatmap-sddpg.svg", "heatmap-sddpg-int8.svg"] {
        assert!(bench.join(f).exists(), "missing {f}");
    }

    let mismatch = sddpg(&["bench", r1.to_str().unwrap(), r3.to_str().unwrap(), "--out-dir", bench.to_str().unwrap()]);
    assert_eq!(mismatch.status.code(), Some(3));
}

#[test]
fn repeated_eval_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = tiny_config(d, "deep-poisson");
    let runs = d.join("runs");
    ok(&["train", "--config", &cfg, "--seed", "2", "--out-dir", runs.to_str().unwrap()]);
    let actor = runs.join("seed-2/actor.json");
    let (a, b) = (d.join("a.json"), d.join("b.json"));
    for r in [&a, &b] {
        ok(&["eval", "--model", actor.to_str().unwrap(), "--episodes", "4", "--seed", "9", "--out", r.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn convert_dense_actor() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = tiny_config(d, "deep");
    let runs = d.join("runs");
    ok(&["train", "--config", &cfg, "--seed", "0", "--out-dir", runs.to_str().unwrap()]);
    let out = d.join("converted.json");
    let actor = runs.join("seed-0/actor.json");
    ok(&["convert", "--model", actor.to_str().unwrap(), "--states", "100", "--timesteps", "5", "--out", out.to_str().unwrap()]);
    let m = ModelFile::load(&out).unwrap();
    assert_eq!(m.method, "ddpg-converted");
    // a converted dense actor is not a dense actor any more
    let again = sddpg(&["convert", "--model", out.to_str().unwrap(), "--out", d.join("x.json").to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "actor = \"spiking\"\nunknown_key = 3\n").unwrap();
    let out = sddpg(&["train", "--config", bad.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
    let missing = sddpg(&["eval", "--model", "/nonexistent.json", "--out", dir.path().join("r.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let world = sddpg(&["eval", "--model", "/nonexistent.json", "--world", "bundled:nowhere", "--out", "r.json"]);
    assert_eq!(world.status.code(), Some(2));
}
