use super::*;
use crate::datastore::{synth_generate, SynthConfig, SynthCorpus};
use crate::model::{Dropout, Variant};
use crate::textpipe::vocab_build;

struct Fixture {
    corpus: SynthCorpus,
    src_vocab: Vocabulary,
    trg_vocab: Vocabulary,
    train: Vec<Sample>,
    valid: Vec<Sample>,
}

fn fixture(n_train: usize) -> Fixture {
    let cfg = SynthConfig { n_train, n_valid: 6, n_test: 4, n_fillers: 6, ..SynthConfig::default() };
    let corpus = synth_generate(&cfg, 1).unwrap();
    let (s, t) = corpus.all_sentences();
    let (src_vocab, trg_vocab) = (vocab_build(&s), vocab_build(&t));
    let train = corpus.train.samples(&src_vocab, &trg_vocab);
    let valid = corpus.valid.samples(&src_vocab, &trg_vocab);
    Fixture { corpus, src_vocab, trg_vocab, train, valid }
}

impl Fixture {
    fn model_cfg(&self, v: Variant) -> ModelConfig {
        let c = &self.corpus.config;
        ModelConfig {
            variant: v,
            emb_dim: 8,
            rnn_dim: 8,
            src_vocab: self.src_vocab.len(),
            trg_vocab: self.trg_vocab.len(),
            global_dim: c.d_g,
            spatial_cells: c.p,
            spatial_dim: c.d_s,
            dropout: Dropout::ENDE,
            normalize_features: false,
        }
    }

    fn data<'a>(&'a self, refs: &'a [Vec<String>]) -> TrainData<'a> {
        TrainData { train: &self.train, valid: &self.valid, valid_refs: refs, trg_vocab: &self.trg_vocab }
    }
}

fn quick_cfg() -> TrainConfig {
    TrainConfig {
        lr: 5e-3,
        batch_size: 4,
        eval_every: 5,
        patience: 3,
        max_updates: 20,
        beam_for_validation: 2,
        ..Default::default()
    }
}

#[test]
fn loss_falls_on_a_small_corpus() {
    let f = fixture(12);
    let refs = f.corpus.valid.trg.clone();
    let mut mc = f.model_cfg(Variant::Baseline);
    mc.dropout = Dropout::OFF;
    let before = per_token_nll(&Model::<f32>::new(mc.clone(), 3).unwrap(), &f.train).unwrap();
    let cfg = TrainConfig { lr: 1e-2, l2: 0.0, max_updates: 150, eval_every: 1000, ..quick_cfg() };
    let out = train(&mc, &cfg, f.data(&refs), 3, None).unwrap();
    let after = per_token_nll(&out.last, &f.train).unwrap();
    assert!(after < 0.5 * before, "{before} -> {after}");
    assert_eq!(out.log.stop_reason, Some(StopReason::MaxUpdates));
    assert_eq!(out.log.updates(), 150);
}

#[test]
fn same_seed_reproduces_log_and_weights() {
    let f = fixture(10);
    let refs = f.corpus.valid.trg.clone();
    let mc = f.model_cfg(Variant::TrgMul);
    let a = train(&mc, &quick_cfg(), f.data(&refs), 9, None).unwrap();
    let b = train(&mc, &quick_cfg(), f.data(&refs), 9, None).unwrap();
    let bits = |l: &RunLog| l.losses().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.log), bits(&b.log));
    assert_eq!(a.log.to_jsonl(), b.log.to_jsonl());
    assert_eq!(a.last.params().to_bytes(None), b.last.params().to_bytes(None));
    let c = train(&mc, &quick_cfg(), f.data(&refs), 10, None).unwrap();
    assert_ne!(bits(&a.log), bits(&c.log));
}

#[test]
fn constant_metric_stops_after_patience() {
    let f = fixture(10);
    let refs = vec![vec!["never-produced".to_string()]; f.valid.len()];
    let cfg = TrainConfig { eval_every: 3, patience: 2, max_updates: 1000, ..quick_cfg() };
    let out = train(&f.model_cfg(Variant::Baseline), &cfg, f.data(&refs), 1, None).unwrap();
    assert_eq!(out.log.updates(), 3 * (1 + 2));
    assert_eq!(out.log.stop_reason, Some(StopReason::EarlyStop));
    assert_eq!(out.log.validations(), vec![(3, 0.0), (6, 0.0), (9, 0.0)]);
    assert_eq!(out.log.best_update, Some(3));
}

#[test]
fn clipping_bounds_every_applied_gradient() {
    let f = fixture(10);
    let refs = f.corpus.valid.trg.clone();
    let cfg = TrainConfig { clip: 0.05, ..quick_cfg() };
    let out = train(&f.model_cfg(Variant::FusionConv), &cfg, f.data(&refs), 2, None).unwrap();
    let mut clipped = 0;
    for e in &out.log.events {
        if let LogEvent::Update { grad_norm, applied_norm, .. } = e {
            assert!(*applied_norm <= 0.05 + 1e-6);
            clipped += usize::from(*grad_norm > 0.05);
        }
    }
    assert!(clipped > 0);
}

#[test]
fn best_checkpoint_holds_the_best_validation() {
    let f = fixture(16);
    let refs = f.corpus.valid.trg.clone();
    let d = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { eval_every: 4, patience: 100, max_updates: 40, lr: 1e-2, ..quick_cfg() };
    let mut mc = f.model_cfg(Variant::DecInit);
    mc.dropout = Dropout::OFF;
    let out = train(&mc, &cfg, f.data(&refs), 5, Some(d.path())).unwrap();
    let vals = out.log.validations();
    let max = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.log.best_metric, Some(max));
    assert!(vals.windows(2).all(|w| w[1].0 - w[0].0 == 4));
    let saved = Model::<f32>::load(&d.path().join("best.ckpt")).unwrap();
    let m = validation_metric(&[&saved], &f.valid, &refs, &f.trg_vocab, cfg.beam_for_validation).unwrap();
    assert_eq!(m, max);
    assert!(d.path().join("last.ckpt").exists());
    let text = std::fs::read_to_string(d.path().join("log.jsonl")).unwrap();
    assert_eq!(RunLog::from_jsonl(5, &text).unwrap().losses(), out.log.losses());
}

#[test]
fn non_finite_loss_aborts_with_position() {
    let mut f = fixture(10);
    f.train[5].global_feat.as_mut().unwrap()[0] = f32::NAN;
    let refs = f.corpus.valid.trg.clone();
    let cfg = TrainConfig { shuffle: false, ..quick_cfg() };
    match train(&f.model_cfg(Variant::DecInit), &cfg, f.data(&refs), 1, None) {
        Err(Error::NanLoss { update, batch }) => assert_eq!((update, batch), (2, 1)),
        other => panic!("expected NaN abort, got {:?}", other.map(|o| o.log.stop_reason)),
    }
}

#[test]
fn multi_seed_runs_are_isolated_and_ordered() {
    let f = fixture(8);
    let refs = f.corpus.valid.trg.clone();
    let cfg = TrainConfig { max_updates: 6, ..quick_cfg() };
    let mc = f.model_cfg(Variant::CtxMul);
    let seq = train_multi(&mc, &cfg, f.data(&refs), &[3, 1, 2], None, false).unwrap();
    let par = train_multi(&mc, &cfg, f.data(&refs), &[2, 3, 1], None, true).unwrap();
    assert_eq!(seq.iter().map(|o| o.log.seed).collect::<Vec<_>>(), vec![1, 2, 3]);
    for (a, b) in seq.iter().zip(&par) {
        assert_eq!(a.log, b.log);
    }
    assert!(train_multi(&mc, &cfg, f.data(&refs), &[1, 1], None, false).is_err());
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    assert!(TrainConfig { patience: 0, ..Default::default() }.validate().is_err());
    assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_err());
    let c: TrainConfig = serde_json::from_str(r#"{"lr": 0.001}"#).unwrap();
    assert_eq!((c.lr, c.batch_size, c.eval_every), (0.001, 32, 1000));
}
