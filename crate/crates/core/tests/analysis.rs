mod common;

use common::*;
use droplm::analysis::{generate, per_step_stats, sample_next};
use droplm::corpus::BatchStream;
use droplm::nlm::{Arch, ModelParams};
use droplm::numerics::Tensor;
use droplm::trainer::{evaluate, evaluate_loss, run};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn per_step_losses_agree_with_evaluate() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let v = 17;
    let model = ModelParams::<f64>::new(Arch::Lstm, v, 8, 9, &mut rng);
    let ids: Vec<usize> = (0..403).map(|i| (i * i + 3 * i) % v).collect();
    for t_len in [1, 7, 10] {
        let s = per_step_stats(&model, &ids, t_len, 1).unwrap();
        let windows = (ids.len() - 1) / t_len;
        let covered = &ids[..windows * t_len + 1];
        let (sum, count) = evaluate_loss(&model, &mut BatchStream::new(covered, 1, t_len).unwrap()).unwrap();
        assert_eq!(s.n.iter().sum::<usize>(), count);
        let direct = (sum / count as f64).exp();
        let rel = (s.overall_ppl() - direct).abs() / direct;
        assert!(rel < 1e-9, "T={t_len}: {} vs {direct}", s.overall_ppl());
    }
}

#[test]
fn oracle_isolates_the_uncertain_offset() {
    let ids = offset_corpus(400, 3);
    let s = per_step_stats(&OffsetOracle, &ids, ORACLE_WINDOW, 1).unwrap();
    for t in 0..ORACLE_WINDOW {
        if t == 5 {
            assert!((s.mean_ppl[t] - 4.0).abs() <= 0.01, "{}", s.mean_ppl[t]);
            assert_eq!((s.mad_lower[t], s.mad_upper[t]), (0.0, 0.0));
        } else {
            assert!((s.mean_ppl[t] - 1.0).abs() <= 1e-6, "t={t}: {}", s.mean_ppl[t]);
        }
        assert_eq!(s.n[t], 400);
    }
}

#[test]
fn memorizing_model_is_near_one_at_every_offset() {
    let data = fibonacci_data();
    let res = run::<f32>(&overfit_config(Arch::Lstm), &data, None).unwrap();
    let s = per_step_stats(&res.model, &data.train, 10, 1).unwrap();
    assert!(s.overall_ppl() < 1.2, "{}", s.overall_ppl());
    for t in 0..10 {
        assert!(s.mean_ppl[t] < 1.3, "t={t}: {}", s.mean_ppl[t]);
    }
}

/// A model whose next-token distribution ignores its input: zero decoder
/// weights and the given log-probabilities as bias.
fn fixed_distribution(logp: &[f64]) -> ModelParams<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let v = logp.len();
    let mut m = ModelParams::<f64>::new(Arch::Gru, v, 3, 3, &mut rng);
    m.decoder_w = Tensor::zeros(3, v);
    m.decoder_b = Tensor::from_vec(1, v, logp.to_vec()).unwrap();
    m
}

#[test]
fn one_hot_model_repeats_its_token() {
    let mut logp = vec![0.0; 10];
    logp[7] = 1e3;
    let m = fixed_distribution(&logp);
    let out = generate(&m, &[1], 25, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(out, vec![7; 25]);
    assert!(generate(&m, &[1], 0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap().is_empty());
}

#[test]
fn generation_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = ModelParams::<f64>::new(Arch::Lstm, 12, 5, 5, &mut rng);
    let a = generate(&m, &[0, 3], 40, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = generate(&m, &[0, 3], 40, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|&id| id < 12));
}

#[test]
fn sampling_frequencies_match_the_softmax() {
    let probs = [0.1, 0.2, 0.3, 0.4];
    let logits = Tensor::from_vec(1, 4, probs.iter().map(|p: &f64| p.ln() + 2.0).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[sample_next(&logits, &mut rng)] += 1;
    }
    let tv: f64 = 0.5 * counts.iter().zip(probs).map(|(&c, p)| (c as f64 / n as f64 - p).abs()).sum::<f64>();
    assert!(tv < 0.01, "total variation {tv}");

    let m = fixed_distribution(&probs.map(f64::ln));
    let mut counts = [0usize; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..20_000 {
        counts[generate(&m, &[2], 1, &mut rng).unwrap()[0]] += 1;
    }
    let tv: f64 = 0.5 * counts.iter().zip(probs).map(|(&c, p)| (c as f64 / 20_000.0 - p).abs()).sum::<f64>();
    assert!(tv < 0.02, "total variation {tv}");
}

#[test]
fn zero_decoder_stats_match_evaluate() {
    let m = fixed_distribution(&[0.0; 9]);
    let ids: Vec<usize> = (0..61).map(|i| i % 9).collect();
    let s = per_step_stats(&m, &ids, 6, 1).unwrap();
    let ppl = evaluate(&m, &mut BatchStream::new(&ids, 1, 6).unwrap()).unwrap();
    assert!((ppl - 9.0).abs() < 1e-9);
    assert!(s.mean_ppl.iter().all(|p| (p - 9.0).abs() < 1e-9));
}

