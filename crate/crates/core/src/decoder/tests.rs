use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::model::{ModelConfig, Variant};
use crate::numerics::rng_stream;

fn toy_model(seed: u64, vocab: usize) -> Model<f64> {
    let cfg = ModelConfig { trg_vocab: vocab, ..ModelConfig::toy(Variant::Baseline) };
    let mut m = Model::<f64>::new(cfg, seed).unwrap();
    // Sharpen the output layer so distributions are far from uniform.
    let mut rng = rng_stream(seed, 7);
    for (name, t) in m.params_mut().iter_mut() {
        let scale = if name == "out.W_o" { 3.0 } else { 0.5 };
        for x in t.data_mut() {
            *x += rng.random_range(-scale..scale);
        }
    }
    m
}

fn src(seed: u64) -> Vec<u32> {
    let mut rng = rng_stream(seed, 8);
    let n = rng.random_range(1..5);
    (0..n).map(|_| rng.random_range(4..20)).collect()
}

/// Best complete sequence of at most `max_len` tokens by exhaustive search.
fn exhaustive(m: &Model<f64>, src: &[u32], max_len: usize) -> (Vec<u32>, f64) {
    let (enc, st) = m.start(src, Features::NONE).unwrap();
    let vocab = m.config().trg_vocab as u32;
    let mut best: (Vec<u32>, f64) = (Vec::new(), f64::NEG_INFINITY);
    let mut stack = vec![(Vec::<u32>::new(), 0.0f64, st)];
    while let Some((prefix, lp, state)) = stack.pop() {
        let y = prefix.last().copied().unwrap_or(BOS_ID);
        let (p, next) = m.decode_step(&enc, y, &state).unwrap();
        for v in 0..vocab {
            let score = lp + p[v as usize].ln();
            let mut seq = prefix.clone();
            if v == EOS_ID {
                if score > best.1 {
                    best = (seq, score);
                }
            } else if prefix.len() + 1 < max_len {
                seq.push(v);
                stack.push((seq, score, next.clone()));
            }
        }
    }
    best
}

#[test]
fn wide_beam_finds_exhaustive_argmax() {
    let (vocab, max_len) = (5, 4);
    // Every prefix survives: 5 + 4·5 + 16·5 + 64·5 candidates at most.
    let cfg = BeamConfig { beam_size: 512, max_len: Some(max_len), ..Default::default() };
    for seed in 0..20 {
        let m = toy_model(seed, vocab);
        let s = src(seed);
        let got = beam_search(&[&m], &s, Features::NONE, &cfg).unwrap();
        let (ids, lp) = exhaustive(&m, &s, max_len);
        assert!(got.finished);
        assert_eq!(got.ids, ids, "seed {seed}");
        assert!((got.log_prob - lp).abs() < 1e-12, "seed {seed}: {} vs {lp}", got.log_prob);
    }
}

#[test]
fn beam_of_one_is_greedy() {
    for seed in 0..100 {
        let m = toy_model(1000 + seed, 6);
        let s = src(seed);
        let b = beam_search(&[&m], &s, Features::NONE, &BeamConfig::with_beam(1)).unwrap();
        let g = greedy_decode(&[&m], &s, Features::NONE, None, EnsembleMode::Arith).unwrap();
        assert_eq!(b, g, "seed {seed}");
    }
}

#[test]
fn identical_ensemble_matches_single_model() {
    let cfg = ModelConfig { trg_vocab: 12, ..ModelConfig::toy(Variant::FusionConv) };
    let m = Model::<f32>::new(cfg.clone(), 3).unwrap();
    let members = vec![&m; 5];
    let mut rng = rng_stream(4, 0);
    for _ in 0..5 {
        let s: Vec<u32> = (0..4).map(|_| rng.random_range(4..20)).collect();
        let sp: Vec<f32> = (0..cfg.spatial_cells * cfg.spatial_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Features { global: None, spatial: Some(&sp) };
        let single = beam_search(&[&m], &s, f, &BeamConfig::default()).unwrap();
        for mode in [EnsembleMode::Arith, EnsembleMode::Geo] {
            let ens = beam_search(&members, &s, f, &BeamConfig { ensemble: mode, ..Default::default() }).unwrap();
            assert_eq!(ens.ids, single.ids);
        }
    }
}

#[test]
fn output_has_no_inner_eos_and_is_deterministic() {
    for seed in 0..10 {
        let m = toy_model(seed, 7);
        let s = src(seed);
        let a = beam_search(&[&m], &s, Features::NONE, &BeamConfig::default()).unwrap();
        let b = beam_search(&[&m], &s, Features::NONE, &BeamConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(!a.ids.contains(&EOS_ID));
        assert!(a.ids.len() <= 3 * s.len() + 5);
        assert!(a.log_prob <= 0.0);
    }
}

#[test]
fn unfinished_search_is_flagged() {
    let (m, s) = (0..50)
        .map(|seed| (toy_model(seed, 6), src(seed)))
        .find(|(m, s)| greedy_decode(&[m], s, Features::NONE, Some(1), EnsembleMode::Arith).unwrap().ids.len() == 1)
        .expect("some model does not stop after one token");
    let t =
        beam_search(&[&m], &s, Features::NONE, &BeamConfig { beam_size: 1, max_len: Some(1), ..Default::default() })
            .unwrap();
    assert!(!t.finished);
    assert_eq!(t.ids.len(), 1);
}

#[test]
fn invalid_requests() {
    let m = toy_model(0, 5);
    let other = toy_model(1, 6);
    assert!(beam_search(&[&m], &[4], Features::NONE, &BeamConfig::with_beam(0)).is_err());
    assert!(beam_search::<f64>(&[], &[4], Features::NONE, &BeamConfig::default()).is_err());
    assert!(beam_search(&[&m, &other], &[4], Features::NONE, &BeamConfig::default()).is_err());
}

#[test]
fn ensemble_step_examples() {
    let p = vec![0.2f64, 0.3, 0.5];
    assert_eq!(ensemble_step(std::slice::from_ref(&p), EnsembleMode::Arith).unwrap(), p);
    assert_eq!(ensemble_step(&[vec![1.0f64, 0.0], vec![0.0, 1.0]], EnsembleMode::Arith).unwrap(), vec![0.5, 0.5]);
    assert!(ensemble_step(&[vec![1.0f64, 0.0], vec![1.0]], EnsembleMode::Arith).is_err());
    assert!(ensemble_step::<f64>(&[], EnsembleMode::Arith).is_err());
    let g = ensemble_step(&[vec![0.5f64, 0.5], vec![0.5, 0.5]], EnsembleMode::Geo).unwrap();
    assert!(g.iter().all(|&x| (x - 0.5).abs() < 1e-15));
}

proptest! {
    #[test]
    fn ensemble_stays_on_simplex(
        raw in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 6), 1..6),
        geo in any::<bool>(),
    ) {
        let dists: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum::<f64>() + 1e-9;
                r.iter().map(|x| (x + 1e-9 / 6.0) / s).collect()
            })
            .collect();
        let mode = if geo { EnsembleMode::Geo } else { EnsembleMode::Arith };
        let e = ensemble_step(&dists, mode).unwrap();
        prop_assert!(e.iter().all(|&x| x >= 0.0));
        prop_assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}
