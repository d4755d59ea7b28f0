//! Inner loops shared by the convolution and linear kernels.
//!
//! Every routine keeps a fixed per-element summation order, so results are
//! identical whether the AVX2 or the baseline build of the loop runs: the
//! wider path only processes more independent output elements at once.

const LANES: usize = 8;

/// Parameters of one causal convolution over a single sample.
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub stride: usize,
    pub t_out: usize,
    /// Length of each stride phase of the padded input.
    pub phase_len: usize,
}

impl ConvGeom {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, dilation: usize, stride: usize, t_in: usize) -> Self {
        let pad = (kernel - 1) * dilation;
        let t_out = t_in.div_ceil(stride);
        let phase_len = t_out + pad / stride + 1;
        Self {
            c_in,
            c_out,
            kernel,
            dilation,
            stride,
            t_out,
            phase_len,
        }
    }

    pub fn pad(&self) -> usize {
        (self.kernel - 1) * self.dilation
    }

    /// (phase, start) of the contiguous input run read by tap `lag`.
    #[inline(always)]
    pub fn tap(&self, lag: usize) -> (usize, usize) {
        let offset = self.pad() - lag * self.dilation;
        (offset % self.stride, offset / self.stride)
    }

    pub fn phases_len(&self) -> usize {
        self.c_in * self.stride * self.phase_len
    }
}

/// Splits one sample `[c_in × t_in]` into left-zero-padded stride phases,
/// laid out `[c_in][stride][phase_len]`.
pub(crate) fn build_phases(geom: &ConvGeom, x: &[f32], t_in: usize, out: &mut [f32]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let pad = geom.pad();
    for ci in 0..geom.c_in {
        let src = &x[ci * t_in..(ci + 1) * t_in];
        let base = ci * geom.stride * geom.phase_len;
        for (t, &v) in src.iter().enumerate() {
            let p = t + pad;
            let (r, q) = (p % geom.stride, p / geom.stride);
            if q < geom.phase_len {
                out[base + r * geom.phase_len + q] = v;
            }
        }
    }
}

/// Inverse of [`build_phases`] for gradients: drops padding and scatters back.
pub(crate) fn gather_phases(geom: &ConvGeom, phases: &[f32], t_in: usize, out: &mut [f32]) {
    let pad = geom.pad();
    for ci in 0..geom.c_in {
        let base = ci * geom.stride * geom.phase_len;
        let dst = &mut out[ci * t_in..(ci + 1) * t_in];
        for (t, v) in dst.iter_mut().enumerate() {
            let p = t + pad;
            let (r, q) = (p % geom.stride, p / geom.stride);
            *v += if q < geom.phase_len {
                phases[base + r * geom.phase_len + q]
            } else {
                0.0
            };
        }
    }
}

/// Offset of each tap's run inside one channel's block of phases.
fn tap_offsets(geom: &ConvGeom) -> Vec<usize> {
    (0..geom.kernel)
        .map(|lag| {
            let (r, start) = geom.tap(lag);
            r * geom.phase_len + start
        })
        .collect()
}

/// `y[co][t] = bias[co] + Σ_ci Σ_lag w[co][ci][lag] · x[ci][t·s − lag·d]`,
/// accumulated with the tap index innermost, then the input channel.
#[inline(always)]
fn conv_forward_generic(geom: &ConvGeom, phases: &[f32], w: &[f32], bias: &[f32], y: &mut [f32]) {
    let taps = tap_offsets(geom);
    let mut co = 0;
    while co + 8 <= geom.c_out {
        forward_rows::<8>(geom, &taps, phases, w, bias, y, co);
        co += 8;
    }
    while co + 4 <= geom.c_out {
        forward_rows::<4>(geom, &taps, phases, w, bias, y, co);
        co += 4;
    }
    while co < geom.c_out {
        forward_rows::<1>(geom, &taps, phases, w, bias, y, co);
        co += 1;
    }
}

#[inline(always)]
fn forward_rows<const R: usize>(
    geom: &ConvGeom,
    taps: &[usize],
    phases: &[f32],
    w: &[f32],
    bias: &[f32],
    y: &mut [f32],
    co: usize,
) {
    let (c_in, k, t_out) = (geom.c_in, geom.kernel, geom.t_out);
    let w_row = c_in * k;
    let chan = geom.stride * geom.phase_len;
    let wrows: [&[f32]; R] = std::array::from_fn(|j| &w[(co + j) * w_row..(co + j + 1) * w_row]);
    let mut t = 0;
    while t + LANES <= t_out {
        let mut acc = [[0.0f32; LANES]; R];
        for j in 0..R {
            acc[j] = [bias[co + j]; LANES];
        }
        for ci in 0..c_in {
            let xc = &phases[ci * chan + t..(ci + 1) * chan];
            for (lag, &off) in taps.iter().enumerate() {
                let xs: &[f32; LANES] = xc[off..off + LANES].try_into().unwrap();
                for j in 0..R {
                    let wv = wrows[j][ci * k + lag];
                    for l in 0..LANES {
                        acc[j][l] += wv * xs[l];
                    }
                }
            }
        }
        for j in 0..R {
            y[(co + j) * t_out + t..(co + j) * t_out + t + LANES].copy_from_slice(&acc[j]);
        }
        t += LANES;
    }
    for j in 0..R {
        for tt in t..t_out {
            let mut acc = bias[co + j];
            for ci in 0..c_in {
                for (lag, &off) in taps.iter().enumerate() {
                    acc += wrows[j][ci * k + lag] * phases[ci * chan + off + tt];
                }
            }
            y[(co + j) * t_out + tt] = acc;
        }
    }
}

/// Accumulates `grad_w` and `grad_phases` for one sample.
#[inline(always)]
fn conv_backward_generic(
    geom: &ConvGeom,
    batch: usize,
    phases: &[f32],
    w: &[f32],
    g: &[f32],
    grad_w: &mut [f32],
    grad_phases: &mut [f32],
) {
    conv_grad_weight(geom, batch, phases, g, grad_w);
    let (plen, glen) = (geom.phases_len(), geom.c_out * geom.t_out);
    for b in 0..batch {
        conv_grad_input(
            geom,
            w,
            &g[b * glen..(b + 1) * glen],
            &mut grad_phases[b * plen..(b + 1) * plen],
        );
    }
}

/// `grad_w[co][ci][lag] += Σ_b Σ_t g[b][co][t] · x_lag[b][ci][t]`.
#[inline(always)]
fn conv_grad_weight(geom: &ConvGeom, batch: usize, phases: &[f32], g: &[f32], grad_w: &mut [f32]) {
    let taps = tap_offsets(geom);
    let mut co = 0;
    while co + 8 <= geom.c_out {
        grad_weight_rows::<8>(geom, batch, &taps, phases, g, grad_w, co);
        co += 8;
    }
    while co + 4 <= geom.c_out {
        grad_weight_rows::<4>(geom, batch, &taps, phases, g, grad_w, co);
        co += 4;
    }
    while co < geom.c_out {
        grad_weight_rows::<1>(geom, batch, &taps, phases, g, grad_w, co);
        co += 1;
    }
}

#[inline(always)]
fn grad_weight_rows<const R: usize>(
    geom: &ConvGeom,
    batch: usize,
    taps: &[usize],
    phases: &[f32],
    g: &[f32],
    grad_w: &mut [f32],
    co: usize,
) {
    let (c_in, k, t_out) = (geom.c_in, geom.kernel, geom.t_out);
    let chan = geom.stride * geom.phase_len;
    let (sample_x, sample_g) = (geom.phases_len(), geom.c_out * t_out);
    let chunks = t_out / LANES;
    for ci in 0..c_in {
        for (lag, &off) in taps.iter().enumerate() {
            let mut acc = [[0.0f32; LANES]; R];
            let mut tail = [0.0f32; R];
            for b in 0..batch {
                let xr = &phases[b * sample_x + ci * chan + off..][..t_out];
                let grows: [&[f32]; R] = std::array::from_fn(|j| &g[b * sample_g + (co + j) * t_out..][..t_out]);
                for c in 0..chunks {
                    let xs: &[f32; LANES] = xr[c * LANES..(c + 1) * LANES].try_into().unwrap();
                    for j in 0..R {
                        let gs: &[f32; LANES] = grows[j][c * LANES..(c + 1) * LANES].try_into().unwrap();
                        for l in 0..LANES {
                            acc[j][l] += gs[l] * xs[l];
                        }
                    }
                }
                for j in 0..R {
                    for t in chunks * LANES..t_out {
                        tail[j] += grows[j][t] * xr[t];
                    }
                }
            }
            for j in 0..R {
                let a = &acc[j];
                let sum = ((a[0] + a[4]) + (a[1] + a[5])) + ((a[2] + a[6]) + (a[3] + a[7]));
                grad_w[(co + j) * c_in * k + ci * k + lag] += sum + tail[j];
            }
        }
    }
}

/// Transposed convolution into the padded input phases:
/// `grad_phase[ci][r][q] = Σ_co Σ_{lag in phase r} w[co][ci][lag] · g[co][q − start_lag]`.
#[inline(always)]
fn conv_grad_input(geom: &ConvGeom, w: &[f32], g: &[f32], grad_phases: &mut [f32]) {
    let (k, t_out, s) = (geom.kernel, geom.t_out, geom.stride);
    // zero margin so every tap can read a full run
    let margin = geom.pad() / s;
    let glen = margin + geom.phase_len + LANES;
    let mut gpad = vec![0.0f32; geom.c_out * glen];
    for co in 0..geom.c_out {
        gpad[co * glen + margin..co * glen + margin + t_out].copy_from_slice(&g[co * t_out..(co + 1) * t_out]);
    }
    // transposed weights [c_in][c_out][k]
    let mut wt = vec![0.0f32; w.len()];
    for co in 0..geom.c_out {
        for ci in 0..geom.c_in {
            for lag in 0..k {
                wt[(ci * geom.c_out + co) * k + lag] = w[(co * geom.c_in + ci) * k + lag];
            }
        }
    }
    let mut by_phase: Vec<Vec<(usize, usize)>> = vec![Vec::new(); s];
    for lag in 0..k {
        let (r, start) = geom.tap(lag);
        by_phase[r].push((lag, margin - start));
    }
    let pad = PaddedGrad { data: &gpad, row: glen };
    for (r, taps) in by_phase.iter().enumerate() {
        if taps.is_empty() {
            continue;
        }
        let mut ci = 0;
        while ci + 8 <= geom.c_in {
            grad_input_rows::<8>(geom, &wt, &pad, taps, r, ci, grad_phases);
            ci += 8;
        }
        while ci + 4 <= geom.c_in {
            grad_input_rows::<4>(geom, &wt, &pad, taps, r, ci, grad_phases);
            ci += 4;
        }
        while ci < geom.c_in {
            grad_input_rows::<1>(geom, &wt, &pad, taps, r, ci, grad_phases);
            ci += 1;
        }
    }
}

struct PaddedGrad<'a> {
    data: &'a [f32],
    row: usize,
}

#[inline(always)]
fn grad_input_rows<const R: usize>(
    geom: &ConvGeom,
    wt: &[f32],
    gpad: &PaddedGrad<'_>,
    taps: &[(usize, usize)],
    r: usize,
    ci: usize,
    grad_phases: &mut [f32],
) {
    let (k, s, plen, c_out) = (geom.kernel, geom.stride, geom.phase_len, geom.c_out);
    let wrows: [&[f32]; R] = std::array::from_fn(|j| &wt[(ci + j) * c_out * k..(ci + j + 1) * c_out * k]);
    let mut q = 0;
    while q < plen {
        let mut acc = [[0.0f32; LANES]; R];
        for co in 0..c_out {
            let grow = &gpad.data[co * gpad.row..(co + 1) * gpad.row];
            for &(lag, shift) in taps {
                let gs: &[f32; LANES] = grow[shift + q..shift + q + LANES].try_into().unwrap();
                for j in 0..R {
                    let wv = wrows[j][co * k + lag];
                    for l in 0..LANES {
                        acc[j][l] += wv * gs[l];
                    }
                }
            }
        }
        let n = LANES.min(plen - q);
        for (j, a) in acc.iter().enumerate() {
            let base = ((ci + j) * s + r) * plen + q;
            for (dst, v) in grad_phases[base..base + n].iter_mut().zip(a) {
                *dst += v;
            }
        }
        q += LANES;
    }
}

#[inline(always)]
pub(crate) fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// `y[o] = b[o] + Σ_i w[o][i]·x[i]`, summed in index order. `wt` is the
/// transposed weight `[in][out]`.
#[inline(always)]
fn linear_forward_generic(x: &[f32], wt: &[f32], b: &[f32], y: &mut [f32]) {
    let n_out = y.len();
    let mut o = 0;
    while o + LANES <= n_out {
        let mut acc: [f32; LANES] = b[o..o + LANES].try_into().unwrap();
        for (i, &xv) in x.iter().enumerate() {
            let ws: &[f32; LANES] = wt[i * n_out + o..i * n_out + o + LANES].try_into().unwrap();
            for l in 0..LANES {
                acc[l] += ws[l] * xv;
            }
        }
        y[o..o + LANES].copy_from_slice(&acc);
        o += LANES;
    }
    for (oo, out) in y.iter_mut().enumerate().skip(o) {
        let mut acc = b[oo];
        for (i, &xv) in x.iter().enumerate() {
            acc += wt[i * n_out + oo] * xv;
        }
        *out = acc;
    }
}

macro_rules! dispatch {
    ($name:ident, $generic:ident, $avx:ident, ($($arg:ident : $ty:ty),*)) => {
        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx2")]
        unsafe fn $avx($($arg: $ty),*) {
            $generic($($arg),*)
        }

        pub(crate) fn $name($($arg: $ty),*) {
            #[cfg(target_arch = "x86_64")]
            {
                if std::is_x86_feature_detected!("avx2") {
                    // SAFETY: the CPU supports AVX2, checked above.
                    return unsafe { $avx($($arg),*) };
                }
            }
            $generic($($arg),*)
        }
    };
}

dispatch!(conv_forward, conv_forward_generic, conv_forward_avx2,
    (geom: &ConvGeom, phases: &[f32], w: &[f32], bias: &[f32], y: &mut [f32]));
dispatch!(conv_backward, conv_backward_generic, conv_backward_avx2,
    (geom: &ConvGeom, batch: usize, phases: &[f32], w: &[f32], g: &[f32], grad_w: &mut [f32], grad_phases: &mut [f32]));
dispatch!(linear_forward, linear_forward_generic, linear_forward_avx2,
    (x: &[f32], wt: &[f32], b: &[f32], y: &mut [f32]));
