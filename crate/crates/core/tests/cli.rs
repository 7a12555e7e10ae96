mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::toy_corpus;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polychron"));
    c.env_remove("POLYCHRON_THREADS");
    c
}

fn polychron(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY_INI: &str = "\
[model]
n = 8
n_t = 4
n_c = 4
n_t_u = 4
n_c_u = 4
n_inp = 8

[train]
schedule = constant
lr_scale = 5
batch_size = 4
max_steps = 20
eval_interval = 10
eval_windows = 16
seed = 3
";

fn setup(dir: &Path) -> (String, String) {
    let cfg = dir.join("tiny.ini");
    let data = dir.join("data.txt");
    std::fs::write(&cfg, TINY_INI).unwrap();
    std::fs::write(&data, toy_corpus(20_000, 9)).unwrap();
    (cfg.display().to_string(), data.display().to_string())
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let o = polychron(&["train", "--config", "x.ini", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--data"));
}

#[test]
fn help_lists_subcommands_and_parameters() {
    let o = polychron(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    for sub in ["train", "eval", "generate", "resources", "capacity", "selftest"] {
        assert!(s.contains(sub), "{sub} missing from help");
    }
    let o = polychron(&["resources", "--help"]);
    let s = stdout(&o);
    for flag in ["--model", "--n-t", "--n-c", "--n-inp", "--format", "--scope"] {
        assert!(s.contains(flag), "{flag} missing from resources help");
    }
}

#[test]
fn resources_defaults() {
    let o = polychron(&["resources", "--model", "snn-transformer", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("component,metric,value\n"));
    assert!(s.contains("total,compute_total,172800\n"), "{s}");
    assert!(s.contains("total,memory_footprint,10496000\n"));
    assert!(s.contains("total,bandwidth_per_token,120+30*n_inp\n"));

    let s = stdout(&polychron(&["resources", "--model", "ann-transformer", "--format", "csv"]));
    assert!(s.contains("total,compute_total,235405312\n"));
    assert!(s.contains("total,memory_footprint,3145728\n"));
    assert!(s.contains("total,bandwidth_per_token,1048576+576*n_inp\n"));

    let s = stdout(&polychron(&["resources", "--model", "rnn", "--format", "csv"]));
    assert!(s.contains("S,memory_footprint,4194304\n"));
    assert!(s.contains("S,bandwidth_per_token,5376\n"));
    assert!(s.contains("Uh,memory_footprint,1048576\n"));
    assert!(s.contains("Uh,bandwidth_per_token,17152\n"));
    assert!(s.contains("total,memory_footprint,5259264\n"));

    let text = stdout(&polychron(&["resources", "--model", "rnn"]));
    assert!(text.contains("5259264"));
}

#[test]
fn resources_rejects_oversized_tables() {
    let o = polychron(&["resources", "--model", "rnn", "--n-c", "200"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn capacity_prints_all_three_measures() {
    let s = stdout(&polychron(&["capacity", "--bins", "4"]));
    assert!(s.contains("640 bits"));
    assert!(s.contains("81.92"));
    assert!(s.contains("36.12"));
}

#[test]
fn train_eval_generate_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, data) = setup(d.path());
    let out = d.path().join("run");
    let o = polychron(&["train", "--config", &cfg, "--data", &data, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("step 0 "));
    let last_bpc = lines[2].rsplit(' ').next().unwrap().to_string();

    let ckpt = out.join("step_20.ckpt");
    let o = polychron(&["eval", "--ckpt", ckpt.to_str().unwrap(), "--data", &data]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), last_bpc);

    let gen = |len: &str, seed: &str| {
        polychron(&["generate", "--ckpt", ckpt.to_str().unwrap(), "--prompt", "the ", "--len", len, "--seed", seed]).stdout
    };
    assert!(gen("0", "1").is_empty());
    assert_eq!(gen("50", "1").len(), 50);
    assert_eq!(gen("50", "1"), gen("50", "1"));
}

#[test]
fn resume_continues_the_step_counter() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, data) = setup(d.path());
    let out = d.path().join("run");
    let out_s = out.to_str().unwrap();
    let o = polychron(&["train", "--config", &cfg, "--data", &data, "--out", out_s, "--set", "train.max_steps=10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ck = out.join("step_10.ckpt");
    let o = polychron(&["train", "--config", &cfg, "--data", &data, "--out", out_s, "--resume", ck.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next().unwrap().split(' ').nth(1), Some("20"));

    let whole = d.path().join("whole");
    polychron(&["train", "--config", &cfg, "--data", &data, "--out", whole.to_str().unwrap()]);
    assert_eq!(
        std::fs::read_to_string(out.join("curve.csv")).unwrap(),
        std::fs::read_to_string(whole.join("curve.csv")).unwrap()
    );

    let o = polychron(&[
        "train", "--config", &cfg, "--data", &data, "--out", out_s, "--resume", ck.to_str().unwrap(), "--set", "model.n=16",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[model]"));
}

#[test]
fn thread_count_does_not_change_results() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, data) = setup(d.path());
    let mut ckpts = Vec::new();
    for (i, t) in ["1", "3"].iter().enumerate() {
        let out = d.path().join(format!("t{i}"));
        let o = bin()
            .env("POLYCHRON_THREADS", t)
            .args(["train", "--config", &cfg, "--data", &data, "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        ckpts.push(std::fs::read(out.join("step_20.ckpt")).unwrap());
    }
    assert_eq!(ckpts[0], ckpts[1]);
}

#[test]
fn unknown_config_key_is_named() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, data) = setup(d.path());
    let out = d.path().join("run");
    let o = polychron(&["train", "--config", &cfg, "--data", &data, "--out", out.to_str().unwrap(), "--set", "train.lr_scael=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("train.lr_scael"), "{}", stderr(&o));
}

#[test]
fn untrained_model_scores_eight_bits_on_random_bytes() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, _) = setup(d.path());
    let data = d.path().join("random.bin");
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    std::fs::write(&data, (0..40_000).map(|_| rng.random::<u8>()).collect::<Vec<u8>>()).unwrap();
    let out = d.path().join("run");
    let o = polychron(&[
        "train", "--config", &cfg, "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--set", "train.max_steps=0", "--set", "train.eval_interval=1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ck = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "ckpt"));
    let ck = ck.expect("a checkpoint of the untrained model");
    let s = stdout(&polychron(&["eval", "--ckpt", ck.to_str().unwrap(), "--data", data.to_str().unwrap()]));
    let bpc: f64 = s.trim().parse().unwrap();
    assert!((bpc - 8.0).abs() < 0.05, "{bpc}");
}

#[test]
fn selftest_passes_and_catches_the_injected_bug() {
    let o = polychron(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")), "{}", stdout(&o));
    let o = polychron(&["selftest", "--inject-bit-order-bug"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}
