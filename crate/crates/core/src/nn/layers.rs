use super::Tensor;

const STD_EPS: f64 = 1e-8;

/// Border handling of [`conv3x3`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Zero,
    /// Edge replication; a constant input gives a constant output.
    Replicate,
}

fn padded(input: &Tensor, mode: Padding) -> Vec<f64> {
    let (h, w) = (input.height, input.width);
    let pw = w + 2;
    let mut out = vec![0.0; input.channels * (h + 2) * pw];
    for c in 0..input.channels {
        let src = input.channel(c);
        let base = c * (h + 2) * pw;
        for y in 0..h {
            let dst = base + (y + 1) * pw + 1;
            out[dst..dst + w].copy_from_slice(&src[y * w..(y + 1) * w]);
        }
        if mode == Padding::Replicate {
            for py in 0..h + 2 {
                let sy = py.clamp(1, h) - 1;
                for px in 0..pw {
                    if py == 0 || py == h + 1 || px == 0 || px == w + 1 {
                        let sx = px.clamp(1, w) - 1;
                        out[base + py * pw + px] = src[sy * w + sx];
                    }
                }
            }
        }
    }
    out
}

/// Same-size 3×3 convolution (cross-correlation). Weight layout
/// `[out][in][ky][kx]`.
pub fn conv3x3(input: &Tensor, weight: &[f64], bias: &[f64], mode: Padding) -> Tensor {
    let c_in = input.channels;
    let c_out = bias.len();
    assert_eq!(weight.len(), c_out * c_in * 9);
    let (h, w) = (input.height, input.width);
    let pw = w + 2;
    let plane = (h + 2) * pw;
    let pad = padded(input, mode);
    let mut out = Tensor::zeros(c_out, h, w);
    // row-at-a-time keeps the accumulator in L1
    for o in 0..c_out {
        let taps = &weight[o * c_in * 9..(o + 1) * c_in * 9];
        let dst = out.channel_mut(o);
        for (y, d) in dst.chunks_exact_mut(w).enumerate() {
            d.fill(bias[o]);
            for (i, k9) in taps.chunks_exact(9).enumerate() {
                let src = &pad[i * plane..(i + 1) * plane];
                let r0 = &src[y * pw..y * pw + pw];
                let r1 = &src[(y + 1) * pw..(y + 1) * pw + pw];
                let r2 = &src[(y + 2) * pw..(y + 2) * pw + pw];
                // all nine taps in one pass, same per-pixel summation order
                for x in 0..w {
                    let mut a = d[x];
                    a += k9[0] * r0[x];
                    a += k9[1] * r0[x + 1];
                    a += k9[2] * r0[x + 2];
                    a += k9[3] * r1[x];
                    a += k9[4] * r1[x + 1];
                    a += k9[5] * r1[x + 2];
                    a += k9[6] * r2[x];
                    a += k9[7] * r2[x + 1];
                    a += k9[8] * r2[x + 2];
                    d[x] = a;
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients into `grad_w`/`grad_b` and returns the
/// input gradient when asked for.
pub fn conv3x3_backward(
    input: &Tensor,
    weight: &[f64],
    grad_out: &Tensor,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mode: Padding,
    want_input_grad: bool,
) -> Option<Tensor> {
    let c_in = input.channels;
    let c_out = grad_out.channels;
    let (h, w) = (input.height, input.width);
    let pw = w + 2;
    let plane = (h + 2) * pw;
    let pad = padded(input, mode);
    let mut gpad = if want_input_grad { vec![0.0; c_in * plane] } else { Vec::new() };
    for o in 0..c_out {
        let g = grad_out.channel(o);
        grad_b[o] += g.iter().sum::<f64>();
        for i in 0..c_in {
            let src = &pad[i * plane..(i + 1) * plane];
            for ky in 0..3 {
                for kx in 0..3 {
                    let widx = ((o * c_in + i) * 3 + ky) * 3 + kx;
                    let mut acc = 0.0;
                    for y in 0..h {
                        let s = &src[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                        let gr = &g[y * w..(y + 1) * w];
                        acc += s.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>();
                    }
                    grad_w[widx] += acc;
                    if want_input_grad {
                        let k = weight[widx];
                        let dst = &mut gpad[i * plane..(i + 1) * plane];
                        for y in 0..h {
                            let d = &mut dst[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                            let gr = &g[y * w..(y + 1) * w];
                            for (dv, gv) in d.iter_mut().zip(gr) {
                                *dv += k * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    if !want_input_grad {
        return None;
    }
    let mut gin = Tensor::zeros(c_in, h, w);
    for i in 0..c_in {
        let src = &gpad[i * plane..(i + 1) * plane];
        let dst = gin.channel_mut(i);
        for y in 0..h {
            dst[y * w..(y + 1) * w].copy_from_slice(&src[(y + 1) * pw + 1..(y + 1) * pw + 1 + w]);
        }
        if mode == Padding::Replicate {
            // fold the border gradient back onto the pixels it was copied from
            for py in 0..h + 2 {
                let sy = py.clamp(1, h) - 1;
                for px in 0..pw {
                    if py == 0 || py == h + 1 || px == 0 || px == w + 1 {
                        dst[sy * w + px.clamp(1, w) - 1] += src[py * pw + px];
                    }
                }
            }
        }
    }
    Some(gin)
}

pub fn relu_inplace(t: &mut Tensor) {
    for v in &mut t.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries where the activated output is not positive.
pub fn relu_backward_inplace(grad: &mut Tensor, activated: &Tensor) {
    for (g, a) in grad.data.iter_mut().zip(&activated.data) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// 2×2 mean pooling, stride 2; a trailing odd row/column is dropped.
pub fn avg_pool2(t: &Tensor) -> Tensor {
    let (h2, w2) = (t.height / 2, t.width / 2);
    let mut out = Tensor::zeros(t.channels, h2, w2);
    for c in 0..t.channels {
        let src = t.channel(c);
        let dst = out.channel_mut(c);
        for y in 0..h2 {
            let r0 = &src[2 * y * t.width..];
            let r1 = &src[(2 * y + 1) * t.width..];
            for x in 0..w2 {
                dst[y * w2 + x] = 0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
            }
        }
    }
    out
}

/// Per-channel spatial mean followed by per-channel standard deviation.
pub fn mean_std_pool(t: &Tensor) -> Vec<f64> {
    let c = t.channels;
    let n = t.plane_len() as f64;
    let mut out = vec![0.0; 2 * c];
    for ch in 0..c {
        let d = t.channel(ch);
        let mu = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        out[ch] = mu;
        out[c + ch] = (var + STD_EPS).sqrt();
    }
    out
}

pub fn mean_std_pool_backward(t: &Tensor, pooled: &[f64], grad: &[f64]) -> Tensor {
    let c = t.channels;
    let n = t.plane_len() as f64;
    let mut out = Tensor::zeros(c, t.height, t.width);
    for ch in 0..c {
        let (mu, sd) = (pooled[ch], pooled[c + ch]);
        let (gm, gs) = (grad[ch] / n, grad[c + ch] / (n * sd));
        let src = t.channel(ch);
        for (o, x) in out.channel_mut(ch).iter_mut().zip(src) {
            *o = gm + gs * (x - mu);
        }
    }
    out
}

/// `y = W x + b`, `W` row-major `[out][in]`.
pub fn linear(x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, b)| b + weight[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

pub fn linear_backward(x: &[f64], weight: &[f64], grad_y: &[f64], grad_w: &mut [f64], grad_b: &mut [f64]) -> Vec<f64> {
    let n_in = x.len();
    let mut gx = vec![0.0; n_in];
    for (o, g) in grad_y.iter().enumerate() {
        grad_b[o] += g;
        let row = &weight[o * n_in..(o + 1) * n_in];
        let grow = &mut grad_w[o * n_in..(o + 1) * n_in];
        for j in 0..n_in {
            grow[j] += g * x[j];
            gx[j] += g * row[j];
        }
    }
    gx
}
