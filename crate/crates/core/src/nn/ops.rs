//! Layer kernels on flat `[channels, height, width]` buffers.

use alloc::vec;
use alloc::vec::Vec;

#[allow(clippy::too_many_arguments)]
pub(super) fn conv_forward(
    x: &[f32],
    in_shape: &[usize],
    weight: &[f32],
    bias: &[f32],
    out_channels: usize,
    kernel: usize,
    stride: usize,
    out_shape: &[usize],
    out: &mut [f32],
) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    for o in 0..out_channels {
        let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        plane.fill(bias[o]);
        for ci in 0..c {
            let xin = &x[ci * h * w..(ci + 1) * h * w];
            for ki in 0..kernel {
                for kj in 0..kernel {
                    let wv = weight[((o * c + ci) * kernel + ki) * kernel + kj];
                    if wv == 0.0 {
                        continue;
                    }
                    for i in 0..oh {
                        let row = &xin[(i * stride + ki) * w + kj..];
                        let orow = &mut plane[i * ow..(i + 1) * ow];
                        if stride == 1 {
                            for (o, &v) in orow.iter_mut().zip(&row[..ow]) {
                                *o += wv * v;
                            }
                        } else {
                            for (j, o) in orow.iter_mut().enumerate() {
                                *o += wv * row[j * stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv_backward(
    x: &[f32],
    in_shape: &[usize],
    weight: &[f32],
    out_channels: usize,
    kernel: usize,
    stride: usize,
    out_shape: &[usize],
    grad: &[f32],
    mut dx: Option<&mut [f32]>,
    mut dparams: Option<(&mut [f32], &mut [f32])>,
) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    for o in 0..out_channels {
        let g = &grad[o * oh * ow..(o + 1) * oh * ow];
        if let Some((_, db)) = dparams.as_mut() {
            db[o] += g.iter().sum::<f32>();
        }
        for ci in 0..c {
            let base = ci * h * w;
            for ki in 0..kernel {
                for kj in 0..kernel {
                    let widx = ((o * c + ci) * kernel + ki) * kernel + kj;
                    let wv = weight[widx];
                    let mut acc = 0.0f32;
                    for i in 0..oh {
                        let grow = &g[i * ow..(i + 1) * ow];
                        let start = base + (i * stride + ki) * w + kj;
                        if stride == 1 {
                            if dparams.is_some() {
                                acc += grow.iter().zip(&x[start..start + ow]).map(|(a, b)| a * b).sum::<f32>();
                            }
                            if let Some(dx) = dx.as_deref_mut() {
                                for (d, &gv) in dx[start..start + ow].iter_mut().zip(grow) {
                                    *d += wv * gv;
                                }
                            }
                        } else {
                            for (j, &gv) in grow.iter().enumerate() {
                                let idx = start + j * stride;
                                acc += gv * x[idx];
                                if let Some(dx) = dx.as_deref_mut() {
                                    dx[idx] += wv * gv;
                                }
                            }
                        }
                    }
                    if let Some((dw, _)) = dparams.as_mut() {
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
}

pub(super) fn maxpool_forward(
    x: &[f32],
    in_shape: &[usize],
    size: usize,
    out_shape: &[usize],
    out: &mut [f32],
) -> Vec<u32> {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let mut argmax = vec![0u32; c * oh * ow];
    for ci in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_idx = 0;
                for di in 0..size {
                    for dj in 0..size {
                        let idx = ci * h * w + (i * size + di) * w + j * size + dj;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (ci * oh + i) * ow + j;
                out[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
    argmax
}

pub(super) fn dense_forward(
    x: &[f32],
    weight: &[f32],
    bias: &[f32],
    inputs: usize,
    outputs: usize,
    out: &mut [f32],
) {
    for o in 0..outputs {
        let row = &weight[o * inputs..(o + 1) * inputs];
        out[o] = bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f32>();
    }
}

pub(super) fn dense_backward(
    x: &[f32],
    weight: &[f32],
    inputs: usize,
    outputs: usize,
    grad: &[f32],
    dx: &mut [f32],
    mut dparams: Option<(&mut [f32], &mut [f32])>,
) {
    for o in 0..outputs {
        let g = grad[o];
        if g == 0.0 {
            continue;
        }
        let row = &weight[o * inputs..(o + 1) * inputs];
        for (d, &wv) in dx.iter_mut().zip(row) {
            *d += wv * g;
        }
        if let Some((dw, db)) = dparams.as_mut() {
            db[o] += g;
            for (d, &xv) in dw[o * inputs..(o + 1) * inputs].iter_mut().zip(x) {
                *d += g * xv;
            }
        }
    }
}

pub(super) fn softmax(x: &[f32], out: &mut [f32]) {
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = libm::expf(v - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}
