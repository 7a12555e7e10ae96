mod common;

use std::path::Path;

use common::{tiny_rnn_config, toy_corpus};
use polychron::train::{
    evaluate, load_checkpoint, train_loop, Checkpoint, Corpus, CurvePoint, TrainConfig, TrainOptions, TrainState,
};
use polychron::Error;

fn run(cfg: &TrainConfig, corpus: &Corpus, out: &Path, threads: usize) -> Vec<CurvePoint> {
    let mut state = TrainState::new(cfg).unwrap();
    train_loop(
        &mut state,
        corpus,
        cfg,
        TrainOptions {
            out_dir: Some(out),
            threads,
            on_point: None,
        },
    )
    .unwrap()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn same_seed_same_bytes_regardless_of_threads() {
    let cfg = tiny_rnn_config();
    let corpus = Corpus::from_bytes(toy_corpus(20_000, 1), 0.1).unwrap();
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = run(&cfg, &corpus, dirs[0].path(), 1);
    let b = run(&cfg, &corpus, dirs[1].path(), 1);
    let c = run(&cfg, &corpus, dirs[2].path(), 3);
    assert_eq!(a, b);
    assert_eq!(a, c);
    for d in &dirs[1..] {
        assert_eq!(read(dirs[0].path().join("curve.csv")), read(d.path().join("curve.csv")));
        for s in [10, 20, 30, 40] {
            let f = format!("step_{s}.ckpt");
            assert_eq!(read(dirs[0].path().join(&f)), read(d.path().join(&f)), "{f}");
        }
    }
}

#[test]
fn different_seeds_differ() {
    let mut cfg = tiny_rnn_config();
    let corpus = Corpus::from_bytes(toy_corpus(20_000, 1), 0.1).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = run(&cfg, &corpus, d1.path(), 1);
    cfg.train.seed += 1;
    let b = run(&cfg, &corpus, d2.path(), 1);
    assert_ne!(a, b);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let cfg = tiny_rnn_config();
    let corpus = Corpus::from_bytes(toy_corpus(20_000, 2), 0.1).unwrap();
    let full = tempfile::tempdir().unwrap();
    let whole = run(&cfg, &corpus, full.path(), 1);

    let part = tempfile::tempdir().unwrap();
    let ckpt = load_checkpoint(&full.path().join("step_20.ckpt")).unwrap();
    assert_eq!(ckpt.step, 20);
    let mut state = TrainState::from_checkpoint(ckpt);
    let tail = train_loop(
        &mut state,
        &corpus,
        &cfg,
        TrainOptions {
            out_dir: Some(part.path()),
            threads: 2,
            on_point: None,
        },
    )
    .unwrap();
    assert_eq!(tail.first().unwrap().step, 30, "no baseline point and no repeated step");
    assert_eq!(&whole[whole.len() - tail.len()..], &tail[..]);
    assert_eq!(read(full.path().join("step_40.ckpt")), read(part.path().join("step_40.ckpt")));
}

#[test]
fn curve_csv_has_header_and_increasing_steps() {
    let cfg = tiny_rnn_config();
    let corpus = Corpus::from_bytes(toy_corpus(20_000, 3), 0.1).unwrap();
    let d = tempfile::tempdir().unwrap();
    let pts = run(&cfg, &corpus, d.path(), 0);
    let mut r = csv::Reader::from_path(d.path().join("curve.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["step", "train_loss_nats", "val_bpc"]);
    let rows: Vec<(u64, f64, f64)> = r.deserialize().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), pts.len());
    assert_eq!(rows[0].0, 0);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    for (row, p) in rows.iter().zip(&pts) {
        assert_eq!(*row, (p.step, p.train_loss_nats, p.val_bpc));
    }
}

#[test]
fn untrained_model_is_near_uniform() {
    let cfg = tiny_rnn_config();
    let state = TrainState::new(&cfg).unwrap();
    let corpus = Corpus::from_bytes(toy_corpus(5_000, 4), 0.5).unwrap();
    let bpc = evaluate(&state.model, &corpus.val, cfg.model.n_inp, 0).unwrap();
    assert!((bpc - 8.0).abs() < 0.05, "{bpc}");
}

#[test]
fn single_character_corpus_is_learned() {
    let mut cfg = tiny_rnn_config();
    cfg.set("train.max_steps", "200").unwrap();
    cfg.set("train.eval_interval", "50").unwrap();
    let corpus = Corpus::from_bytes(vec![b'a'; 4_000], 0.1).unwrap();
    let mut state = TrainState::new(&cfg).unwrap();
    let curve = train_loop(&mut state, &corpus, &cfg, TrainOptions::default()).unwrap();
    let last = curve.last().unwrap();
    assert_eq!(last.step, 200);
    assert!(last.val_bpc < 0.01, "{curve:?}");
}

#[test]
fn stop_bpc_ends_early_and_saves() {
    let mut cfg = tiny_rnn_config();
    cfg.set("train.max_steps", "1000").unwrap();
    cfg.set("train.stop_bpc", "0.5").unwrap();
    cfg.set("train.ckpt_interval", "1000").unwrap();
    let corpus = Corpus::from_bytes(vec![b'z'; 4_000], 0.1).unwrap();
    let d = tempfile::tempdir().unwrap();
    let curve = run(&cfg, &corpus, d.path(), 1);
    let last = curve.last().unwrap();
    assert!(last.step < 1000 && last.val_bpc < 0.5);
    assert!(d.path().join(format!("step_{}.ckpt", last.step)).exists());
}

#[test]
fn huge_learning_rate_reports_divergence() {
    let mut cfg = tiny_rnn_config();
    cfg.set("train.lr_scale", "1e38").unwrap();
    cfg.set("train.max_steps", "200").unwrap();
    let corpus = Corpus::from_bytes(toy_corpus(20_000, 5), 0.1).unwrap();
    let mut state = TrainState::new(&cfg).unwrap();
    match train_loop(&mut state, &corpus, &cfg, TrainOptions::default()) {
        Err(Error::Divergence { step }) => assert!(step >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn checkpoint_round_trip() {
    let cfg = tiny_rnn_config();
    let corpus = Corpus::from_bytes(toy_corpus(20_000, 6), 0.1).unwrap();
    let d = tempfile::tempdir().unwrap();
    run(&cfg, &corpus, d.path(), 1);
    let bytes = read(d.path().join("step_40.ckpt"));
    let ck = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(ck.step, 40);
    assert_eq!(ck.config, cfg);
    assert_eq!(ck.to_bytes().unwrap(), bytes);

    let mut t = tiny_rnn_config();
    t.set("model.kind", "transformer").unwrap();
    t.set("model.n_t", "3").unwrap();
    t.set("model.n_c", "3").unwrap();
    t.set("model.p", "2").unwrap();
    t.set("model.ffn", "true").unwrap();
    let s = TrainState::new(&t).unwrap();
    let tb = s.checkpoint(&t).to_bytes().unwrap();
    assert_eq!(Checkpoint::from_bytes(&tb).unwrap(), s.checkpoint(&t));
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let cfg = tiny_rnn_config();
    let bytes = TrainState::new(&cfg).unwrap().checkpoint(&cfg).to_bytes().unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Checkpoint::from_bytes(&bad).is_err());
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() / 2]).is_err());
    assert!(Checkpoint::from_bytes(&[]).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(Checkpoint::from_bytes(&long).is_err());
}

#[test]
fn config_errors_name_the_key() {
    let e = TrainConfig::from_ini_str("[model]\nn = 8\nbogus = 1\n").unwrap_err();
    assert!(e.to_string().contains("bogus"), "{e}");
    let e = TrainConfig::from_ini_str("[train]\nbatch_size = 0\n").unwrap_err();
    assert!(e.to_string().contains("batch_size"), "{e}");
    let e = TrainConfig::from_ini_str("[train]\nrule = spiking-scalar\n").unwrap_err();
    assert!(e.to_string().contains("spiking-scalar") || e.to_string().contains("rule"), "{e}");
    let e = TrainConfig::from_ini_str("[train]\nrule = min_pair_flip\n").unwrap_err();
    assert!(e.to_string().contains("min_pair_flip"), "{e}");
    assert!(!e.to_string().is_empty());
    let ok = TrainConfig::from_ini_str("[model]\nn = 8\n[train]\nseed = 3\n").unwrap();
    assert_eq!((ok.model.n, ok.train.seed), (8, 3));
    assert_eq!(TrainConfig::from_kv_lines(&ok.to_kv_lines()).unwrap(), ok);
}
