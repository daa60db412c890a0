use coexplore_teamformer::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weights(seed: u64) -> AttentionWeights {
    AttentionWeights::seeded(ModelConfig::default(), seed)
}

fn input(n: usize, seed: u64) -> FeatureTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * 8 * 8 * 32).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureTensor::from_vec(n, 8, 32, data).unwrap()
}

#[test]
fn stf_is_permutation_equivariant() {
    let w = weights(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 2..=6 {
        let x = input(n, n as u64);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let a = w.encode(&x).unwrap().permute_agents(&perm);
        let b = w.encode(&x.permute_agents(&perm)).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-5, "n={n}: {}", a.max_abs_diff(&b));
        for k in 0..n {
            let ha = w.forward(&x, perm[k]).unwrap();
            let hb = w.forward(&x.permute_agents(&perm), k).unwrap();
            assert!(ha.region.iter().zip(&hb.region).all(|(p, q)| (p - q).abs() <= 1e-9));
        }
    }
}

#[test]
fn ise_never_mixes_agents() {
    let w = weights(3);
    let x = input(3, 0);
    let mut y = x.clone();
    y.token_mut(1, 4, 2)[5] += 0.5;
    let a = ise_forward(&x, &w.blocks[0].ise).unwrap();
    let b = ise_forward(&y, &w.blocks[0].ise).unwrap();
    for a_ in [0, 2] {
        for i in 0..64 {
            assert_eq!(a.token(a_, i % 8, i / 8), b.token(a_, i % 8, i / 8));
        }
    }
    assert_ne!(a.token(1, 0, 0), b.token(1, 0, 0));
}

#[test]
fn tre_never_mixes_grids() {
    let w = weights(4);
    let x = input(4, 1);
    let mut y = x.clone();
    for a in 0..4 {
        y.token_mut(a, 0, 0).iter_mut().for_each(|v| *v += 1.0);
    }
    let a = tre_forward(&x, &w.blocks[0].tre).unwrap();
    let b = tre_forward(&y, &w.blocks[0].tre).unwrap();
    for k in 0..4 {
        assert_eq!(a.token(k, 7, 7), b.token(k, 7, 7));
        assert_eq!(a.token(k, 1, 0), b.token(k, 1, 0));
    }
    assert_ne!(a.token(0, 0, 0), b.token(0, 0, 0));
}

#[test]
fn zero_projections_leave_the_residual() {
    let mut w = weights(5);
    w.blocks[0].ise.zero_projections();
    w.blocks[0].tre.zero_projections();
    let x = input(2, 2);
    assert_eq!(ise_forward(&x, &w.blocks[0].ise).unwrap(), x);
    assert_eq!(stf_block(&x, &w.blocks[0]).unwrap(), x);
}

#[test]
fn one_weight_set_serves_every_team_size() {
    let w = weights(6);
    for n in 1..=8 {
        let x = input(n, 10 + n as u64);
        let y = w.encode(&x).unwrap();
        assert_eq!(y.shape(), [n, 8, 8, 32]);
        assert!(y.as_slice().iter().all(|v| v.is_finite()));
        for k in 0..n {
            let h = w.forward(&x, k).unwrap();
            assert!((h.region.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(h.point.0 > 0.0 && h.point.0 < 1.0 && h.point.1 > 0.0 && h.point.1 < 1.0);
        }
    }
}

#[test]
fn single_agent_team_attention_is_finite() {
    let w = weights(7);
    let x = input(1, 3);
    let y = tre_forward(&x, &w.blocks[1].tre).unwrap();
    assert_eq!(y.shape(), x.shape());
    assert!(y.as_slice().iter().all(|v| v.is_finite()));
}

#[test]
fn forward_is_deterministic() {
    let x = input(3, 9);
    assert_eq!(weights(8).encode(&x).unwrap(), weights(8).encode(&x).unwrap());
    assert_ne!(weights(8).encode(&x).unwrap(), weights(9).encode(&x).unwrap());
}

#[test]
fn heads_edge_cases() {
    let mut w = weights(10);
    let x = input(2, 4);
    assert!(matches!(action_heads(&x, 2, &w), Err(TfError::IndexOutOfRange { index: 2, len: 2 })));
    w.region_head.weight.fill(0.0);
    w.region_head.bias.fill(0.3);
    let h = action_heads(&x, 1, &w).unwrap();
    assert!(h.region.iter().all(|p| (p - 1.0 / 64.0).abs() < 1e-15));
    w.point_head.weight.fill(0.0);
    w.point_head.bias = vec![0.0, 800.0];
    let h = action_heads(&x, 0, &w).unwrap();
    assert_eq!(h.point.0, 0.5);
    assert!(h.point.1 <= 1.0);
}

#[test]
fn wrong_width_is_rejected() {
    let w = weights(11);
    let x = FeatureTensor::zeros(2, 8, 16);
    assert!(matches!(ise_forward(&x, &w.blocks[0].ise), Err(TfError::ShapeMismatch { .. })));
    assert!(matches!(w.encode(&FeatureTensor::zeros(2, 4, 32)), Err(TfError::ShapeMismatch { .. })));
    assert!(FeatureTensor::from_vec(1, 8, 32, vec![0.0; 10]).is_err());
}

/// Pairs of tokens that attend to each other, counted by enumeration.
fn brute_pairs(n: u64, g: u64) -> (u64, u64) {
    let tokens: Vec<(u64, u64)> = (0..n).flat_map(|a| (0..g * g).map(move |c| (a, c))).collect();
    let (mut hier, mut uni) = (0, 0);
    for &(a, c) in &tokens {
        for &(b, e) in &tokens {
            uni += 1;
            hier += (a == b) as u64 + (c == e) as u64;
        }
    }
    (hier, uni)
}

#[test]
fn flop_estimate_matches_enumeration() {
    for n in 1..=6 {
        for g in 2..=8 {
            let f = flop_estimate(n, g, 32);
            assert_eq!((f.hierarchical, f.unified), brute_pairs(n, g), "n={n} g={g}");
        }
    }
    let f = flop_estimate(4, 8, 32);
    assert_eq!(f.hierarchical, 17_408);
    assert_eq!(f.macs_per_pair, 64);
    let one = flop_estimate(1, 8, 32);
    assert_eq!(one.hierarchical, 64 + 4096);
    assert_eq!(one.unified + 64, one.hierarchical);
}

#[test]
fn flop_ratio_is_linear_after_removing_the_grid_term() {
    let mut last = 0.0;
    for n in 1..=16u64 {
        let f = flop_estimate(n, 8, 32);
        let r = f.unified as f64 / f.hierarchical as f64;
        assert!(r > last);
        last = r;
        assert!((r * (n as f64 + 64.0) / 64.0 - n as f64).abs() < 1e-9);
    }
}

#[test]
fn weight_file_round_trips() {
    let w = weights(12);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.bin");
    w.save(&p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(bytes.len(), 32 + 8 * w.param_count());
    let back = AttentionWeights::load(&p).unwrap();
    assert_eq!(back, w);
    let x = input(2, 5);
    assert_eq!(back.encode(&x).unwrap(), w.encode(&x).unwrap());
    assert!(AttentionWeights::from_bytes(&bytes[..bytes.len() - 8]).is_err());
    assert!(AttentionWeights::from_bytes(b"nope").is_err());
}

#[test]
fn cnn_feeds_the_encoder() {
    let cnn = CnnExtractor::seeded(6, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let maps: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..6 * 240 * 240).map(|_| rng.random::<f64>()).collect())
        .collect();
    let x = cnn.features(&maps, 240).unwrap();
    assert_eq!(x.shape(), [2, 8, 8, 32]);
    assert!(x.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
    let h = weights(0).forward(&x, 1).unwrap();
    assert!((h.region.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    assert!(cnn.features(&[vec![0.0; 10]], 240).is_err());
}
