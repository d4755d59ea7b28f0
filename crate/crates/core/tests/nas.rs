mod common;

use common::data::*;
use common::specs::*;
use common::*;
use ppg_tcn::model::*;
use ppg_tcn::nas::*;
use ppg_tcn::pipeline::fit_normalization;
use ppg_tcn::train::{evaluate_mae, Dataset, TrainConfig};
use ppg_tcn::Tensor;
use rand::Rng;

fn small_net() -> NetworkSpec {
    NetworkSpec::new(
        3,
        20,
        vec![
            LayerSpec::conv(3, 6, 3, 2, 1),
            LayerSpec::batchnorm(6),
            LayerSpec::relu(6),
            LayerSpec::conv(6, 5, 3, 1, 2),
            LayerSpec::batchnorm(5),
            LayerSpec::relu(5),
            LayerSpec::avgpool(5, 2, 2),
            LayerSpec::linear(25, 7),
            LayerSpec::relu(7),
            LayerSpec::head(7),
        ],
    )
    .unwrap()
}

fn conv_weight(w: &mut Weights, layer: usize) -> &mut Tensor {
    match &mut w.layers[layer] {
        LayerWeights::Conv { weight, .. } => weight,
        _ => panic!("layer {layer} is not a conv"),
    }
}

fn bn(w: &mut Weights, layer: usize) -> (&mut Tensor, &mut Tensor) {
    match &mut w.layers[layer] {
        LayerWeights::BatchNorm { gamma, beta, .. } => (gamma, beta),
        _ => panic!("layer {layer} is not batch norm"),
    }
}

fn outputs(spec: &NetworkSpec, w: &Weights, x: &Tensor) -> Vec<f32> {
    forward_batch(spec, w, x).unwrap()
}

#[test]
fn zero_strength_gives_zero_penalty_and_gradient() {
    let spec = small_net();
    let w = random_weights(&spec, 1);
    let mut grads: Vec<Tensor> = w.params().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
    let cfg = RegularizerConfig::new(CostKind::Size, 0.0, 0.01);
    assert_eq!(group_lasso_penalty(&spec, &w, &cfg, Some(&mut grads)).unwrap(), 0.0);
    assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn single_channel_penalty_closed_form() {
    // c_in·K + 1 = 2·3 + 1 = 7 for the channel's own weights and bias
    let spec = NetworkSpec::new(2, 4, vec![LayerSpec::conv(2, 1, 3, 1, 1), LayerSpec::head(4)]).unwrap();
    let mut w = Weights::zeros(&spec);
    conv_weight(&mut w, 0)
        .data_mut()
        .copy_from_slice(&[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let cfg = RegularizerConfig::new(CostKind::Size, 0.1, 0.01);
    let costs = channel_costs(&spec, CostKind::Size).unwrap();
    let consumer = 4.0; // the head reads 4 time steps of the channel
    assert_eq!(costs[0].per_channel, 7.0 + consumer);
    let own = 0.1 * 2.0 * 7.0;
    assert!((own - 1.4f64).abs() < 1e-12);
    let p = group_lasso_penalty(&spec, &w, &cfg, None).unwrap() as f64;
    assert!((p - (own + 0.1 * 2.0 * consumer)).abs() < 1e-6, "{p}");
}

#[test]
fn size_cost_matches_parameter_drop() {
    let spec = build_seed();
    for c in channel_costs(&spec, CostKind::Size).unwrap() {
        let mut keep = vec![true; spec.layers[c.layer].c_out];
        keep[0] = false;
        let w = Weights::zeros(&spec);
        let (smaller, _) = prune_channels(&spec, &w, &[(c.layer, keep)], ChannelGroup::ConvWeights).unwrap();
        assert_eq!((count_params(&spec) - count_params(&smaller)) as f64, c.per_channel);
    }
}

#[test]
fn flops_cost_matches_mac_drop() {
    let spec = build_seed();
    for c in channel_costs(&spec, CostKind::Flops).unwrap() {
        let mut keep = vec![true; spec.layers[c.layer].c_out];
        keep[0] = false;
        let w = Weights::zeros(&spec);
        let (smaller, _) = prune_channels(&spec, &w, &[(c.layer, keep)], ChannelGroup::ConvWeights).unwrap();
        let drop = count_macs(&spec).unwrap() - count_macs(&smaller).unwrap();
        assert_eq!(drop as f64, c.per_channel, "layer {}", c.layer);
    }
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    let spec = small_net();
    for group in [ChannelGroup::ConvWeights, ChannelGroup::BnGamma] {
        for kind in [CostKind::Size, CostKind::Flops] {
            let w = random_weights(&spec, 3);
            let mut cfg = RegularizerConfig::new(kind, 1e-2, 0.01);
            cfg.group = group;
            let mut grads: Vec<Tensor> = w.params().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
            group_lasso_penalty(&spec, &w, &cfg, Some(&mut grads)).unwrap();
            for (k, (_, t)) in w.params().iter().enumerate() {
                let base: Vec<f64> = to64(t);
                let fd = finite_diff(&base, 1e-3, |p| {
                    let mut w2 = w.clone();
                    let mut params = w2.params_mut();
                    params[k].1.data_mut().iter_mut().zip(p).for_each(|(d, &v)| *d = v as f32);
                    group_lasso_penalty(&spec, &w2, &cfg, None).unwrap() as f64
                });
                let err = rel_err(&to64(&grads[k]), &fd);
                let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(scale == 0.0 || err < 1e-2, "{group:?} {kind:?} tensor {k}: {err}");
            }
        }
    }
}

#[test]
fn penalty_is_homogeneous_per_channel() {
    let spec = small_net();
    let w = random_weights(&spec, 5);
    let cfg = RegularizerConfig::new(CostKind::Size, 1e-3, 0.01);
    let base = group_lasso_penalty(&spec, &w, &cfg, None).unwrap() as f64;
    let mut zeroed = w.clone();
    let width = 3 * 3;
    conv_weight(&mut zeroed, 0).data_mut()[2 * width..3 * width].fill(0.0);
    let without = group_lasso_penalty(&spec, &zeroed, &cfg, None).unwrap() as f64;
    let term = base - without;
    for alpha in [0.5f32, 2.0, 3.5] {
        let mut scaled = w.clone();
        conv_weight(&mut scaled, 0).data_mut()[2 * width..3 * width]
            .iter_mut()
            .for_each(|v| *v *= alpha);
        let p = group_lasso_penalty(&spec, &scaled, &cfg, None).unwrap() as f64;
        assert!((p - without - alpha as f64 * term).abs() < 1e-5 * base, "alpha {alpha}");
    }
}

#[test]
fn zero_threshold_prunes_nothing() {
    let spec = small_net();
    let w = random_weights(&spec, 2);
    for group in [ChannelGroup::ConvWeights, ChannelGroup::BnGamma] {
        let (s, p) = prune(&spec, &w, 0.0, group).unwrap();
        assert_eq!(s, spec);
        assert_eq!(p, w);
    }
}

#[test]
fn dead_channel_with_zero_shift_is_removed_bit_exactly() {
    let spec = small_net();
    let mut r = rng(3);
    let x = random_tensor(&[4, 3, 20], &mut r);
    for layer in [0, 3] {
        let mut w = random_weights(&spec, 7);
        let width = spec.layers[layer].c_in * spec.layers[layer].kernel;
        conv_weight(&mut w, layer).data_mut()[width..2 * width].fill(0.0);
        if let LayerWeights::Conv { bias, .. } = &mut w.layers[layer] {
            bias.data_mut()[1] = 0.0;
        }
        if let LayerWeights::BatchNorm { beta, stats, .. } = &mut w.layers[layer + 1] {
            beta.data_mut()[1] = 0.0;
            stats.mean.data_mut()[1] = 0.0;
        }
        let (s, p) = prune(&spec, &w, 1e-6, ChannelGroup::ConvWeights).unwrap();
        assert_eq!(s.layers[layer].c_out, spec.layers[layer].c_out - 1);
        assert_eq!(outputs(&s, &p, &x), outputs(&spec, &w, &x));
    }
}

#[test]
fn removed_constants_are_folded_downstream() {
    let spec = small_net();
    let mut r = rng(4);
    let x = random_tensor(&[4, 3, 20], &mut r);
    // zero weights but non-zero bias and shift: the channel emits a constant
    // (exact for a dense consumer; a conv consumer's left padding sees zeros)
    let mut w = random_weights(&spec, 8);
    conv_weight(&mut w, 3).data_mut()[..18].fill(0.0);
    bn(&mut w, 4).1.data_mut()[0] = 0.7;
    let (s, p) = prune(&spec, &w, 1e-6, ChannelGroup::ConvWeights).unwrap();
    assert_eq!(s.layers[3].c_out, 4);
    for (a, b) in outputs(&s, &p, &x).iter().zip(outputs(&spec, &w, &x)) {
        assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0), "{a} vs {b}");
    }
    // scale grouping: zero gamma leaves ReLU(beta)
    let mut w = random_weights(&spec, 9);
    bn(&mut w, 4).0.data_mut()[3] = 0.0;
    bn(&mut w, 4).1.data_mut()[3] = 0.4;
    let (s, p) = prune(&spec, &w, 1e-3, ChannelGroup::BnGamma).unwrap();
    assert_eq!(s.layers[3].c_out, 4);
    for (a, b) in outputs(&s, &p, &x).iter().zip(outputs(&spec, &w, &x)) {
        assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn channels_without_downstream_effect_prune_cleanly() {
    let mut r = rng(21);
    for case in 0..20 {
        let spec = small_net();
        let mut w = random_weights(&spec, 100 + case);
        let layer = if case % 2 == 0 { 0 } else { 3 };
        let c_out = spec.layers[layer].c_out;
        let victim = r.gen_range(0..c_out);
        // silence the channel in its consumer
        match &mut w.layers[if layer == 0 { 3 } else { 7 }] {
            LayerWeights::Conv { weight, .. } => {
                let (rows, k) = (weight.dim(0), weight.dim(2));
                for o in 0..rows {
                    weight.data_mut()[(o * c_out + victim) * k..(o * c_out + victim + 1) * k].fill(0.0);
                }
            }
            LayerWeights::Linear { weight, .. } => {
                let cols = weight.dim(1);
                let per = cols / c_out;
                for o in 0..weight.dim(0) {
                    weight.data_mut()[o * cols + victim * per..o * cols + (victim + 1) * per].fill(0.0);
                }
            }
            _ => unreachable!(),
        }
        let mut keep = vec![true; c_out];
        keep[victim] = false;
        let (s, p) = prune_channels(&spec, &w, &[(layer, keep)], ChannelGroup::ConvWeights).unwrap();
        p.check(&s).unwrap();
        assert_eq!(count_params(&s), enumerate_params(&s));
        let x = random_tensor(&[3, 3, 20], &mut r);
        for (a, b) in outputs(&s, &p, &x).iter().zip(outputs(&spec, &w, &x)) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn pruning_keeps_the_strongest_channel() {
    let spec = small_net();
    let w = random_weights(&spec, 1);
    let (s, p) = prune(&spec, &w, 1e9, ChannelGroup::ConvWeights).unwrap();
    assert!(s.conv_widths().iter().all(|&c| c == 1));
    p.check(&s).unwrap();
    assert_eq!(count_params(&s), enumerate_params(&s));
}

#[test]
fn ties_at_the_threshold_are_kept() {
    let spec = small_net();
    let mut w = random_weights(&spec, 1);
    let width = 9;
    let t = conv_weight(&mut w, 0);
    t.data_mut()[..width].fill(0.0);
    t.data_mut()[0] = 0.5;
    let (s, _) = prune(&spec, &w, 0.5, ChannelGroup::ConvWeights).unwrap();
    assert_eq!(s.layers[0].c_out, 6);
}

#[test]
fn expansion_scales_conv_widths() {
    let seed = build_seed();
    assert_eq!(expand(&seed, 1.0).unwrap(), seed);
    let wide = expand(&seed, 2.0).unwrap();
    assert_eq!(wide.block_channels(), vec![64, 128, 256]);
    assert_eq!(count_params(&wide), enumerate_params(&wide));
    assert_eq!(count_macs(&wide).unwrap(), enumerate_macs(&wide));
    assert!(expand(&seed, 0.5).is_err());
}

#[test]
fn pareto_examples() {
    assert_eq!(pareto_indices(&[(5.0, 10_000), (6.0, 20_000)]), vec![0]);
    let mut both = pareto_indices(&[(5.0, 10_000), (4.0, 20_000)]);
    both.sort();
    assert_eq!(both, vec![0, 1]);
}

#[test]
fn pareto_matches_brute_force() {
    let mut r = rng(6);
    for round in 0..5 {
        let n = if round == 0 { 1000 } else { r.gen_range(1..300) };
        let pts: Vec<(f32, u64)> = (0..n)
            .map(|_| ((r.gen_range(0..200) as f32) / 10.0, r.gen_range(0..100u64) * 1000))
            .collect();
        let mut got = pareto_indices(&pts);
        got.sort();
        let wide: Vec<(f64, u64)> = pts.iter().map(|&(a, b)| (a as f64, b)).collect();
        assert_eq!(got, pareto_brute(&wide));
    }
}

fn search_data() -> (SearchData, NetworkSpec) {
    let a = subject(1, 60.0, 100.0, 60.0);
    let b = subject(2, 70.0, 110.0, 40.0);
    let norm = fit_normalization(&a.windows).unwrap();
    let data = SearchData {
        train: Dataset::from_windows(&a.windows, &norm).unwrap(),
        val: Dataset::from_windows(&b.windows[..8], &norm).unwrap(),
        eval: Dataset::from_windows(&b.windows[8..], &norm).unwrap(),
        norm,
    };
    (data, tiny_spec())
}

#[test]
fn no_op_search_returns_the_seed() {
    let (data, seed) = search_data();
    let cfg = TrainConfig {
        max_epochs: 2,
        patience: 2,
        batch_size: 16,
        ..Default::default()
    };
    let opts = SearchOptions {
        shrink: cfg.clone(),
        retrain: cfg,
        ..Default::default()
    };
    let grid = vec![
        RegularizerConfig::new(CostKind::Size, 0.0, 0.0),
        RegularizerConfig::new(CostKind::Flops, 1e-4, 0.05),
        RegularizerConfig {
            expansion: 2.0,
            ..RegularizerConfig::new(CostKind::Size, 1e-5, 0.01)
        },
    ];
    let points = morph_search(&seed, &data, &grid, &opts, None).unwrap();
    assert_eq!(points.len(), grid.len());
    assert_eq!(points[0].spec(), &seed);
    for (p, g) in points.iter().zip(&grid) {
        assert_eq!(p.config, *g);
        assert_eq!(p.params, count_params(p.spec()));
        assert_eq!(p.macs, count_macs(p.spec()).unwrap());
        assert_eq!(evaluate_mae(&p.model, &data.eval).unwrap(), p.mae);
    }
    let again = morph_search(&seed, &data, &grid[..1], &opts, None).unwrap();
    assert_eq!(again[0].mae, points[0].mae);
    assert_eq!(again[0].model.weights, points[0].model.weights);
}

#[test]
fn default_grid_has_eighteen_points() {
    let grid = default_grid();
    assert_eq!(grid.len(), 18);
    assert!(grid
        .iter()
        .any(|g| g.kind == CostKind::Size && g.strength == 1e-5 && g.prune_threshold == 0.01));
}
