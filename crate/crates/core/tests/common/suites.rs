//! Seeded case runners shared by the op tests and the acceptance suite.
//! Each returns the observed relative error against an oracle.

#![allow(dead_code)]

use ppg_tcn::ops::{self, GradTape, NormMode, ParamId, RunningStats, BN_EPS};
use ppg_tcn::Tensor;
use rand::Rng;

use super::*;

pub const FD_STEP: f64 = 1e-3;

pub struct ConvCase {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub stride: usize,
    pub t_in: usize,
}

impl ConvCase {
    pub fn random(seed: u64, kernel: usize, dilation: usize, stride: usize) -> Self {
        let mut r = rng(seed);
        Self {
            batch: r.gen_range(1..3),
            c_in: r.gen_range(1..6),
            c_out: r.gen_range(1..10),
            kernel,
            dilation,
            stride,
            t_in: r.gen_range(1..40),
        }
    }
}

/// Forward conv vs. the nested-loop oracle.
pub fn conv_forward_error(case: &ConvCase, seed: u64) -> f64 {
    let mut r = rng(seed ^ 0x5eed);
    let x = random_tensor(&[case.batch, case.c_in, case.t_in], &mut r);
    let w = random_tensor(&[case.c_out, case.c_in, case.kernel], &mut r);
    let b = random_tensor(&[case.c_out], &mut r);
    let y = ops::conv1d_forward(&x, &w, &b, case.dilation, case.stride).unwrap();
    let reference = conv_ref(
        &to64(&x),
        (case.batch, case.c_in, case.t_in),
        &to64(&w),
        case.c_out,
        case.kernel,
        &to64(&b),
        case.dilation,
        case.stride,
    );
    rel_err(&to64(&y), &reference)
}

/// Conv gradients (input, weight, bias) vs. finite differences of the f64 oracle.
pub fn conv_grad_error(case: &ConvCase, seed: u64) -> f64 {
    let mut r = rng(seed ^ 0xc0de);
    let shape = (case.batch, case.c_in, case.t_in);
    let x = random_tensor(&[case.batch, case.c_in, case.t_in], &mut r);
    let w = random_tensor(&[case.c_out, case.c_in, case.kernel], &mut r);
    let b = random_tensor(&[case.c_out], &mut r);
    let t_out = case.t_in.div_ceil(case.stride);
    let proj = random_tensor(&[case.batch, case.c_out, t_out], &mut r);
    let p = to64(&proj);

    let g = ops::conv1d_backward(&proj, &x, &w, case.dilation, case.stride).unwrap();
    let (x64, w64, b64) = (to64(&x), to64(&w), to64(&b));
    let loss = |x: &[f64], w: &[f64], b: &[f64]| {
        dot(
            &conv_ref(x, shape, w, case.c_out, case.kernel, b, case.dilation, case.stride),
            &p,
        )
    };
    let fx = finite_diff(&x64, FD_STEP, |v| loss(v, &w64, &b64));
    let fw = finite_diff(&w64, FD_STEP, |v| loss(&x64, v, &b64));
    let fb = finite_diff(&b64, FD_STEP, |v| loss(&x64, &w64, v));
    rel_err(&to64(&g.input), &fx)
        .max(rel_err(&to64(&g.weight), &fw))
        .max(rel_err(&to64(&g.bias), &fb))
}

/// Batch norm gradients in train or infer mode.
pub fn batchnorm_grad_error(seed: u64, mode: NormMode, rank3: bool) -> f64 {
    let mut r = rng(seed ^ 0xb17);
    let batch = r.gen_range(2..5);
    let c = r.gen_range(1..5);
    let t = if rank3 { r.gen_range(2..9) } else { 1 };
    let shape: Vec<usize> = if rank3 { vec![batch, c, t] } else { vec![batch, c] };
    let x = random_tensor(&shape, &mut r);
    let gamma = Tensor::new(&[c], uniform_vec(c, 0.5, 1.5, &mut r).iter().map(|&v| v as f32).collect()).unwrap();
    let beta = random_tensor(&[c], &mut r);
    let mut stats = RunningStats {
        mean: random_tensor(&[c], &mut r),
        var: Tensor::new(&[c], uniform_vec(c, 0.5, 2.0, &mut r).iter().map(|&v| v as f32).collect()).unwrap(),
    };
    let (rm, rv) = (to64(&stats.mean), to64(&stats.var));
    let proj = random_tensor(&shape, &mut r);
    let p = to64(&proj);

    let mut tape = GradTape::new([&gamma, &beta]);
    tape.batchnorm(x.clone(), &gamma, &beta, &mut stats, mode, (ParamId(0), ParamId(1)))
        .unwrap();
    let gx = tape.backward(proj).unwrap();
    let grads = tape.into_grads();

    let dims = (batch, c, t);
    let eps = BN_EPS as f64;
    let loss = |x: &[f64], g: &[f64], b: &[f64]| {
        let y = match mode {
            NormMode::Train => batchnorm_train_ref(x, dims, g, b, eps),
            NormMode::Infer => batchnorm_infer_ref(x, dims, g, b, &rm, &rv, eps),
        };
        dot(&y, &p)
    };
    let (x64, g64, b64) = (to64(&x), to64(&gamma), to64(&beta));
    let fx = finite_diff(&x64, FD_STEP, |v| loss(v, &g64, &b64));
    let fg = finite_diff(&g64, FD_STEP, |v| loss(&x64, v, &b64));
    let fb = finite_diff(&b64, FD_STEP, |v| loss(&x64, &g64, v));
    rel_err(&to64(&gx), &fx)
        .max(rel_err(&to64(&grads[0]), &fg))
        .max(rel_err(&to64(&grads[1]), &fb))
}

/// ReLU gradient, with inputs kept away from the kink.
pub fn relu_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed ^ 0x7e1);
    let n = r.gen_range(2..40);
    let data: Vec<f32> = (0..n)
        .map(|_| {
            let v: f32 = r.gen_range(0.05..1.0);
            if r.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let x = Tensor::new(&[1, n], data).unwrap();
    let proj = random_tensor(&[1, n], &mut r);
    let p = to64(&proj);
    let mut tape = GradTape::new([]);
    tape.relu(x.clone());
    let gx = tape.backward(proj).unwrap();
    let fx = finite_diff(&to64(&x), FD_STEP, |v| {
        dot(&v.iter().map(|&a| a.max(0.0)).collect::<Vec<_>>(), &p)
    });
    rel_err(&to64(&gx), &fx)
}

pub fn avgpool_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed ^ 0xa09);
    let (batch, c) = (r.gen_range(1..3), r.gen_range(1..4));
    let window = r.gen_range(1..4);
    let stride = r.gen_range(1..4);
    let t = r.gen_range(window..window + 20);
    let x = random_tensor(&[batch, c, t], &mut r);
    let y = ops::avgpool1d(&x, window, stride).unwrap();
    let proj = random_tensor(y.shape(), &mut r);
    let p = to64(&proj);
    let mut tape = GradTape::new([]);
    tape.avgpool(x.clone(), window, stride).unwrap();
    let gx = tape.backward(proj).unwrap();
    let fx = finite_diff(&to64(&x), FD_STEP, |v| dot(&avgpool_ref(v, batch * c, t, window, stride), &p));
    rel_err(&to64(&gx), &fx)
}

pub fn linear_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed ^ 0x11e);
    let (batch, n_in, n_out) = (r.gen_range(1..5), r.gen_range(1..20), r.gen_range(1..20));
    let x = random_tensor(&[batch, n_in], &mut r);
    let w = random_tensor(&[n_out, n_in], &mut r);
    let b = random_tensor(&[n_out], &mut r);
    let proj = random_tensor(&[batch, n_out], &mut r);
    let p = to64(&proj);
    let mut tape = GradTape::new([&w, &b]);
    tape.linear(x.clone(), &w, &b, (ParamId(0), ParamId(1))).unwrap();
    let gx = tape.backward(proj).unwrap();
    let grads = tape.into_grads();
    let (x64, w64, b64) = (to64(&x), to64(&w), to64(&b));
    let loss = |x: &[f64], w: &[f64], b: &[f64]| dot(&linear_ref(x, batch, n_in, w, n_out, b), &p);
    let fx = finite_diff(&x64, FD_STEP, |v| loss(v, &w64, &b64));
    let fw = finite_diff(&w64, FD_STEP, |v| loss(&x64, v, &b64));
    let fb = finite_diff(&b64, FD_STEP, |v| loss(&x64, &w64, v));
    rel_err(&to64(&gx), &fx)
        .max(rel_err(&to64(&grads[0]), &fw))
        .max(rel_err(&to64(&grads[1]), &fb))
}

pub fn logcosh_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed ^ 0x10c);
    let n = r.gen_range(1..30);
    let pred: Vec<f32> = (0..n).map(|_| r.gen_range(-4.0..4.0)).collect();
    let target: Vec<f32> = (0..n).map(|_| r.gen_range(-4.0..4.0)).collect();
    let (_, grad) = ops::logcosh_loss(&pred, &target).unwrap();
    let t64: Vec<f64> = target.iter().map(|&v| v as f64).collect();
    let p64: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
    let fd = finite_diff(&p64, FD_STEP, |v| logcosh_ref(v, &t64));
    rel_err(&grad.iter().map(|&v| v as f64).collect::<Vec<_>>(), &fd)
}
