//! Batched forward/backward kernels. Activations are `[B, …]` row-major;
//! image layers use `[B, C, H, W]`.

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

pub(crate) fn dense_forward(x: &[f64], w: &[f64], b: &[f64], batch: usize, fin: usize, fout: usize) -> Vec<f64> {
    let mut y = vec![0.0; batch * fout];
    for s in 0..batch {
        let xs = &x[s * fin..(s + 1) * fin];
        for o in 0..fout {
            let row = &w[o * fin..(o + 1) * fin];
            y[s * fout + o] = b[o] + row.iter().zip(xs).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    y
}

/// Returns `(dx, dw, db)`.
pub(crate) fn dense_backward(
    x: &[f64],
    w: &[f64],
    gy: &[f64],
    batch: usize,
    fin: usize,
    fout: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut dx = vec![0.0; batch * fin];
    let mut dw = vec![0.0; fout * fin];
    let mut db = vec![0.0; fout];
    for s in 0..batch {
        let xs = &x[s * fin..(s + 1) * fin];
        let dxs = &mut dx[s * fin..(s + 1) * fin];
        for o in 0..fout {
            let g = gy[s * fout + o];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            let row = &w[o * fin..(o + 1) * fin];
            let drow = &mut dw[o * fin..(o + 1) * fin];
            for i in 0..fin {
                drow[i] += g * xs[i];
                dxs[i] += g * row[i];
            }
        }
    }
    (dx, dw, db)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
}

impl ConvGeom {
    /// Valid output range along one axis for kernel offset `d` (pad `k/2`).
    fn range(&self, d: usize, len: usize) -> (usize, usize, isize) {
        let off = d as isize - (self.k / 2) as isize;
        let lo = (-off).max(0) as usize;
        let hi = ((len as isize) - off).min(len as isize).max(0) as usize;
        (lo, hi, off)
    }
}

pub(crate) fn conv_forward(x: &[f64], wt: &[f64], bias: &[f64], g: ConvGeom) -> Vec<f64> {
    let plane = g.h * g.w;
    let mut y = vec![0.0; g.batch * g.cout * plane];
    for s in 0..g.batch {
        for co in 0..g.cout {
            let yp = &mut y[(s * g.cout + co) * plane..(s * g.cout + co + 1) * plane];
            yp.iter_mut().for_each(|v| *v = bias[co]);
            for ci in 0..g.cin {
                let xp = &x[(s * g.cin + ci) * plane..(s * g.cin + ci + 1) * plane];
                for dy in 0..g.k {
                    let (ilo, ihi, oy) = g.range(dy, g.h);
                    for dx in 0..g.k {
                        let wv = wt[((co * g.cin + ci) * g.k + dy) * g.k + dx];
                        if wv == 0.0 {
                            continue;
                        }
                        let (jlo, jhi, ox) = g.range(dx, g.w);
                        for i in ilo..ihi {
                            let src = ((i as isize + oy) as usize) * g.w;
                            let yrow = &mut yp[i * g.w + jlo..i * g.w + jhi];
                            let xrow = &xp[(src as isize + jlo as isize + ox) as usize..(src as isize + jhi as isize + ox) as usize];
                            for (a, b) in yrow.iter_mut().zip(xrow) {
                                *a += wv * b;
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Returns `(dx, dw, db)`.
pub(crate) fn conv_backward(x: &[f64], wt: &[f64], gy: &[f64], g: ConvGeom) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let plane = g.h * g.w;
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; wt.len()];
    let mut db = vec![0.0; g.cout];
    for s in 0..g.batch {
        for co in 0..g.cout {
            let gp = &gy[(s * g.cout + co) * plane..(s * g.cout + co + 1) * plane];
            db[co] += gp.iter().sum::<f64>();
            for ci in 0..g.cin {
                let base = (s * g.cin + ci) * plane;
                for dy in 0..g.k {
                    let (ilo, ihi, oy) = g.range(dy, g.h);
                    for dxk in 0..g.k {
                        let widx = ((co * g.cin + ci) * g.k + dy) * g.k + dxk;
                        let wv = wt[widx];
                        let (jlo, jhi, ox) = g.range(dxk, g.w);
                        let mut acc = 0.0;
                        for i in ilo..ihi {
                            let src = base + ((i as isize + oy) as usize) * g.w;
                            let grow = &gp[i * g.w + jlo..i * g.w + jhi];
                            let lo = (src as isize + jlo as isize + ox) as usize;
                            let hi = (src as isize + jhi as isize + ox) as usize;
                            let xrow = &x[lo..hi];
                            acc += grow.iter().zip(xrow).map(|(a, b)| a * b).sum::<f64>();
                            if wv != 0.0 {
                                for (d, gv) in dx[lo..hi].iter_mut().zip(grow) {
                                    *d += wv * gv;
                                }
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Per-channel batch statistics cached by a training-mode forward pass.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BnCache {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub batch_stats: bool,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn bn_forward(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    batch: usize,
    ch: usize,
    plane: usize,
    use_batch_stats: bool,
) -> (Vec<f64>, BnCache) {
    let n = (batch * plane) as f64;
    let (mean, var) = if use_batch_stats {
        let mut mean = vec![0.0; ch];
        let mut var = vec![0.0; ch];
        for c in 0..ch {
            let mut s = 0.0;
            for b in 0..batch {
                s += x[(b * ch + c) * plane..(b * ch + c + 1) * plane].iter().sum::<f64>();
            }
            let m = s / n;
            let mut v = 0.0;
            for b in 0..batch {
                v += x[(b * ch + c) * plane..(b * ch + c + 1) * plane]
                    .iter()
                    .map(|t| (t - m) * (t - m))
                    .sum::<f64>();
            }
            mean[c] = m;
            var[c] = v / n;
        }
        (mean, var)
    } else {
        (running_mean.to_vec(), running_var.to_vec())
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut y = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    for b in 0..batch {
        for c in 0..ch {
            let r = (b * ch + c) * plane..(b * ch + c + 1) * plane;
            for i in r {
                let h = (x[i] - mean[c]) * inv_std[c];
                xhat[i] = h;
                y[i] = gamma[c] * h + beta[c];
            }
        }
    }
    (
        y,
        BnCache {
            mean,
            var,
            xhat,
            inv_std,
            batch_stats: use_batch_stats,
        },
    )
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn bn_backward(
    gy: &[f64],
    gamma: &[f64],
    cache: &BnCache,
    batch: usize,
    ch: usize,
    plane: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = (batch * plane) as f64;
    let mut dgamma = vec![0.0; ch];
    let mut dbeta = vec![0.0; ch];
    for b in 0..batch {
        for c in 0..ch {
            for i in (b * ch + c) * plane..(b * ch + c + 1) * plane {
                dgamma[c] += gy[i] * cache.xhat[i];
                dbeta[c] += gy[i];
            }
        }
    }
    let mut dx = vec![0.0; gy.len()];
    for b in 0..batch {
        for c in 0..ch {
            let k = gamma[c] * cache.inv_std[c];
            for i in (b * ch + c) * plane..(b * ch + c + 1) * plane {
                dx[i] = if cache.batch_stats {
                    k / n * (n * gy[i] - dbeta[c] - cache.xhat[i] * dgamma[c])
                } else {
                    k * gy[i]
                };
            }
        }
    }
    (dx, dgamma, dbeta)
}

pub(crate) fn softmax_forward(x: &[f64], batch: usize, f: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for s in 0..batch {
        let xs = &x[s * f..(s + 1) * f];
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ys = &mut y[s * f..(s + 1) * f];
        let mut z = 0.0;
        for (o, v) in ys.iter_mut().zip(xs) {
            *o = (v - m).exp();
            z += *o;
        }
        ys.iter_mut().for_each(|o| *o /= z);
    }
    y
}

pub(crate) fn softmax_backward(y: &[f64], gy: &[f64], batch: usize, f: usize) -> Vec<f64> {
    let mut dx = vec![0.0; y.len()];
    for s in 0..batch {
        let r = s * f..(s + 1) * f;
        let dot: f64 = y[r.clone()].iter().zip(&gy[r.clone()]).map(|(a, b)| a * b).sum();
        for i in r {
            dx[i] = y[i] * (gy[i] - dot);
        }
    }
    dx
}

/// 2×2 average pooling; edge windows on odd sizes average the cells they
/// cover.
pub(crate) fn pool_forward(x: &[f64], bc: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut y = vec![0.0; bc * oh * ow];
    for p in 0..bc {
        for i in 0..oh {
            for j in 0..ow {
                let mut s = 0.0;
                let mut c = 0.0;
                for a in 2 * i..(2 * i + 2).min(h) {
                    for b in 2 * j..(2 * j + 2).min(w) {
                        s += x[p * h * w + a * w + b];
                        c += 1.0;
                    }
                }
                y[p * oh * ow + i * ow + j] = s / c;
            }
        }
    }
    y
}

pub(crate) fn pool_backward(gy: &[f64], bc: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut dx = vec![0.0; bc * h * w];
    for p in 0..bc {
        for i in 0..oh {
            for j in 0..ow {
                let rows = (2 * i + 2).min(h) - 2 * i;
                let cols = (2 * j + 2).min(w) - 2 * j;
                let g = gy[p * oh * ow + i * ow + j] / (rows * cols) as f64;
                for a in 2 * i..2 * i + rows {
                    for b in 2 * j..2 * j + cols {
                        dx[p * h * w + a * w + b] += g;
                    }
                }
            }
        }
    }
    dx
}

/// Nearest-neighbour 2× upsampling cropped to `oh × ow`.
pub(crate) fn upsample_forward(x: &[f64], bc: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let mut y = vec![0.0; bc * oh * ow];
    for p in 0..bc {
        for i in 0..oh {
            for j in 0..ow {
                y[p * oh * ow + i * ow + j] = x[p * h * w + (i / 2) * w + j / 2];
            }
        }
    }
    y
}

pub(crate) fn upsample_backward(gy: &[f64], bc: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let mut dx = vec![0.0; bc * h * w];
    for p in 0..bc {
        for i in 0..oh {
            for j in 0..ow {
                dx[p * h * w + (i / 2) * w + j / 2] += gy[p * oh * ow + i * ow + j];
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_1x1_is_channel_mix() {
        let g = ConvGeom { batch: 1, cin: 2, cout: 1, h: 2, w: 2, k: 1 };
        let x = [1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0];
        let y = conv_forward(&x, &[0.5, -1.0], &[1.0], g);
        assert_eq!(y, vec![1.0 + 0.5 - 10.0, 1.0 + 1.0 - 20.0, 1.0 + 1.5 - 30.0, 1.0 + 2.0 - 40.0]);
    }

    #[test]
    fn conv_3x3_matches_direct_sum() {
        let g = ConvGeom { batch: 2, cin: 2, cout: 3, h: 4, w: 5, k: 3 };
        let x: Vec<f64> = (0..2 * 2 * 20).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let wt: Vec<f64> = (0..3 * 2 * 9).map(|i| ((i * 5 % 13) as f64 - 6.0) / 7.0).collect();
        let bias = [0.1, -0.2, 0.3];
        let y = conv_forward(&x, &wt, &bias, g);
        for s in 0..2 {
            for co in 0..3 {
                for i in 0..4i64 {
                    for j in 0..5i64 {
                        let mut acc = bias[co];
                        for ci in 0..2 {
                            for dy in 0..3i64 {
                                for dx in 0..3i64 {
                                    let (a, b) = (i + dy - 1, j + dx - 1);
                                    if (0..4).contains(&a) && (0..5).contains(&b) {
                                        acc += wt[((co * 2 + ci) * 3 + dy as usize) * 3 + dx as usize]
                                            * x[(s * 2 + ci) * 20 + (a * 5 + b) as usize];
                                    }
                                }
                            }
                        }
                        let got = y[(s * 3 + co) * 20 + (i * 5 + j) as usize];
                        assert!((got - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn pool_and_upsample_odd_sizes() {
        let x: Vec<f64> = (0..15).map(|v| v as f64).collect(); // 3×5
        let y = pool_forward(&x, 1, 3, 5);
        assert_eq!(y.len(), 2 * 3);
        assert_eq!(y[0], (0.0 + 1.0 + 5.0 + 6.0) / 4.0);
        assert_eq!(y[2], (4.0 + 9.0) / 2.0);
        assert_eq!(y[5], 14.0);
        let u = upsample_forward(&y, 1, 2, 3, 3, 5);
        assert_eq!(u[0], y[0]);
        assert_eq!(u[14], y[5]);
    }
}
