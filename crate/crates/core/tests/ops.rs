mod common;

use common::suites::*;
use common::*;
use ppg_tcn::ops::{self, NormMode};
use ppg_tcn::Tensor;
use proptest::prelude::*;

#[test]
fn conv_matches_nested_loop_oracle() {
    let mut seed = 0;
    for d in [1, 2, 4, 8] {
        for k in [1, 3, 5] {
            for s in [1, 2] {
                seed += 1;
                let case = ConvCase::random(seed, k, d, s);
                let err = conv_forward_error(&case, seed);
                assert!(err < 1e-6, "d={d} k={k} s={s}: {err}");
            }
        }
    }
}

#[test]
fn conv_gradients_match_finite_differences() {
    for seed in 0..20 {
        let k = [1, 2, 3, 5][seed as usize % 4];
        let d = [1, 2, 3][seed as usize % 3];
        let s = 1 + seed as usize % 2;
        let case = ConvCase::random(100 + seed, k, d, s);
        let err = conv_grad_error(&case, seed);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn batchnorm_gradients_match_finite_differences() {
    for seed in 0..20 {
        for mode in [NormMode::Train, NormMode::Infer] {
            let err = batchnorm_grad_error(seed, mode, seed % 2 == 0);
            assert!(err < 1e-4, "seed {seed} {mode:?}: {err}");
        }
    }
}

#[test]
fn pointwise_and_dense_gradients() {
    for seed in 0..20 {
        assert!(relu_grad_error(seed) < 1e-4);
        assert!(avgpool_grad_error(seed) < 1e-4);
        assert!(linear_grad_error(seed) < 1e-4);
        assert!(logcosh_grad_error(seed) < 1e-4);
    }
}

#[test]
fn dilated_conv_equals_undilated_on_subsampled_input() {
    // With stride 1 and dilation d, the outputs at t ≡ r (mod d) only read
    // inputs with the same residue: they equal a dilation-1 conv on that
    // subsequence.
    let mut r = rng(7);
    for d in [2, 3, 4] {
        let x = random_tensor(&[1, 2, 24], &mut r);
        let w = random_tensor(&[3, 2, 3], &mut r);
        let b = random_tensor(&[3], &mut r);
        let y = ops::conv1d_forward(&x, &w, &b, d, 1).unwrap();
        for res in 0..d {
            let idx: Vec<usize> = (res..24).step_by(d).collect();
            let mut sub = Vec::new();
            for c in 0..2 {
                sub.extend(idx.iter().map(|&t| x.data()[c * 24 + t]));
            }
            let xs = Tensor::new(&[1, 2, idx.len()], sub).unwrap();
            let ys = ops::conv1d_forward(&xs, &w, &b, 1, 1).unwrap();
            for m in 0..3 {
                for (j, &t) in idx.iter().enumerate() {
                    let a = y.data()[m * 24 + t];
                    let e = ys.data()[m * idx.len() + j];
                    assert!((a - e).abs() <= 1e-6 * e.abs().max(1.0), "{a} vs {e}");
                }
            }
        }
    }
}

#[test]
fn forward_kernels_are_deterministic() {
    let mut r = rng(11);
    let x = random_tensor(&[3, 5, 64], &mut r);
    let w = random_tensor(&[7, 5, 3], &mut r);
    let b = random_tensor(&[7], &mut r);
    let a = ops::conv1d_forward(&x, &w, &b, 4, 2).unwrap();
    let c = ops::conv1d_forward(&x, &w, &b, 4, 2).unwrap();
    assert_eq!(a.data(), c.data());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zeroing_the_future_never_changes_the_past(
        seed in 0u64..1000,
        cut in 0usize..30,
        d in 1usize..5,
        k in 1usize..5,
    ) {
        let mut r = rng(seed);
        let x = random_tensor(&[1, 3, 30], &mut r);
        let w = random_tensor(&[2, 3, k], &mut r);
        let b = random_tensor(&[2], &mut r);
        let y = ops::conv1d_forward(&x, &w, &b, d, 1).unwrap();
        let mut xz = x.clone();
        for c in 0..3 {
            for t in cut + 1..30 {
                xz.data_mut()[c * 30 + t] = 0.0;
            }
        }
        let yz = ops::conv1d_forward(&xz, &w, &b, d, 1).unwrap();
        for m in 0..2 {
            for t in 0..=cut {
                prop_assert_eq!(y.data()[m * 30 + t], yz.data()[m * 30 + t]);
            }
        }
    }

    #[test]
    fn kernels_keep_finite_values(seed in 0u64..1000) {
        let mut r = rng(seed);
        let x = random_tensor(&[2, 4, 33], &mut r);
        let w = random_tensor(&[6, 4, 3], &mut r);
        let y = ops::conv1d_forward(&x, &w, &Tensor::zeros(&[6]), 3, 2).unwrap();
        prop_assert!(y.is_finite());
        let g = ops::conv1d_backward(&y, &x, &w, 3, 2).unwrap();
        prop_assert!(g.input.is_finite() && g.weight.is_finite());
    }
}
