//! Full-size RNN convergence run. Hours on a laptop, so it is ignored by
//! default: `cargo test --release -p polychron --test long_run -- --ignored --nocapture`.

mod common;

use std::path::Path;

use polychron::train::{train_loop, Corpus, TrainConfig, TrainOptions, TrainState};

#[test]
#[ignore]
fn full_size_rnn_long_run() {
    let cfg = TrainConfig::from_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/rnn_full.ini")).unwrap();
    let text = common::english_corpus().expect("set POLYCHRON_CORPUS to a >= 1 MB English text");
    let corpus = Corpus::from_bytes(text, cfg.data.val_fraction).unwrap();
    let mut state = TrainState::new(&cfg).unwrap();
    let mut report = |p: &polychron::train::CurvePoint| println!("step {} val_bpc {:.4}", p.step, p.val_bpc);
    let curve = train_loop(
        &mut state,
        &corpus,
        &cfg,
        TrainOptions {
            out_dir: None,
            threads: 0,
            on_point: Some(&mut report),
        },
    )
    .unwrap();
    let best = curve.iter().map(|p| p.val_bpc).fold(f64::INFINITY, f64::min);
    println!("best val_bpc {best:.4} (target <= 1.45)");
    assert!(best <= 1.45, "best val_bpc {best:.4}");
}
