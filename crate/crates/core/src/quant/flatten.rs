use crate::error::Result;
use crate::model::{LayerKind, LayerWeights, NetworkSpec, Weights};
use crate::tensor::Tensor;

/// True when every convolution has dilation 1.
pub fn is_flat(spec: &NetworkSpec) -> bool {
    spec.layers.iter().all(|l| l.kind != LayerKind::Conv || l.dilation == 1)
}

/// Rewrites each dilated conv (dilation `d`, kernel `K`) as an undilated one
/// with kernel `d·(K−1)+1`: the original taps sit at positions `0, d, 2d, …`
/// and the rest are zero. Outputs are unchanged.
pub fn flatten_dilation(spec: &NetworkSpec, weights: &Weights) -> Result<(NetworkSpec, Weights)> {
    weights.check(spec)?;
    let mut out_spec = spec.clone();
    let mut out_w = weights.clone();
    for (l, lw) in out_spec.layers.iter_mut().zip(out_w.layers.iter_mut()) {
        if l.kind != LayerKind::Conv || l.dilation == 1 {
            continue;
        }
        let (d, k) = (l.dilation, l.kernel);
        let wide = d * (k - 1) + 1;
        if let LayerWeights::Conv { weight, .. } = lw {
            let rows = l.c_out * l.c_in;
            let mut data = vec![0.0f32; rows * wide];
            for r in 0..rows {
                for i in 0..k {
                    data[r * wide + i * d] = weight.data()[r * k + i];
                }
            }
            *weight = Tensor::new(&[l.c_out, l.c_in, wide], data)?;
        }
        l.kernel = wide;
        l.dilation = 1;
    }
    out_spec.validate()?;
    Ok((out_spec, out_w))
}
