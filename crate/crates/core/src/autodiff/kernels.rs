//! Matrix and 1-D convolution kernels.
//!
//! Both families are the partial derivatives of one trilinear form, so the
//! backward pass of each kernel is expressed with the other two:
//!
//! * dense:  `T(x, w, g) = sum g[b,o] w[o,i] x[b,i]`
//! * conv:   `T(x, w, g) = sum g[b,co,l] w[co,ci,k] x[b,ci,l+k-p]`
//!
//! Outputs are partitioned by row (or by output channel for weight
//! gradients) and each partition is reduced in a fixed order.

use crate::par;

/// Dot product with four independent partial sums, combined in a fixed order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// `a[m,k] · b[n,k]ᵀ -> [m,n]`
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    par::for_each_chunk(&mut out, n, m * n * k, |i, row| {
        let ai = &a[i * k..(i + 1) * k];
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(ai, &b[j * k..(j + 1) * k]);
        }
    });
    out
}

/// `a[m,k] · b[k,n] -> [m,n]`
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    par::for_each_chunk(&mut out, n, m * n * k, |i, row| {
        for (r, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av != 0.0 {
                axpy(av, &b[r * n..(r + 1) * n], row);
            }
        }
    });
    out
}

/// `a[k,m]ᵀ · b[k,n] -> [m,n]`
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    par::for_each_chunk(&mut out, n, m * n * k, |i, row| {
        for r in 0..k {
            let av = a[r * m + i];
            if av != 0.0 {
                axpy(av, &b[r * n..(r + 1) * n], row);
            }
        }
    });
    out
}

/// Dimensions of a same-padded, stride-1 convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len: usize,
    pub kernel: usize,
}

impl ConvDims {
    fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    fn work(&self) -> usize {
        self.batch * self.c_in * self.c_out * self.len * self.kernel
    }

    /// Width of an unfolded patch, `c_in · kernel`.
    fn patch(&self) -> usize {
        self.c_in * self.kernel
    }

    /// Source position `l + k − pad`, if inside the sequence.
    #[inline]
    fn source(&self, l: usize, k: usize) -> Option<usize> {
        (l + k).checked_sub(self.pad()).filter(|&m| m < self.len)
    }
}

/// Unfold one sample `[c_in, len]` into patches `[len, c_in · kernel]`.
fn im2col(xb: &[f64], d: ConvDims, cols: &mut [f64]) {
    let j = d.patch();
    for l in 0..d.len {
        let row = &mut cols[l * j..(l + 1) * j];
        for ci in 0..d.c_in {
            for k in 0..d.kernel {
                row[ci * d.kernel + k] = d.source(l, k).map_or(0.0, |m| xb[ci * d.len + m]);
            }
        }
    }
}

/// `y[b,co,l] = sum_{ci,k} w[co,ci,k] x[b,ci,l+k-p]`
pub(crate) fn conv1d(x: &[f64], w: &[f64], d: ConvDims) -> Vec<f64> {
    let (len, c_in, j) = (d.len, d.c_in, d.patch());
    let mut out = vec![0.0; d.batch * d.c_out * len];
    par::for_each_chunk(&mut out, d.c_out * len, d.work(), |b, yb| {
        let mut cols = vec![0.0; len * j];
        im2col(&x[b * c_in * len..(b + 1) * c_in * len], d, &mut cols);
        for (co, y) in yb.chunks_mut(len).enumerate() {
            let wr = &w[co * j..(co + 1) * j];
            for (l, yv) in y.iter_mut().enumerate() {
                *yv = dot(wr, &cols[l * j..(l + 1) * j]);
            }
        }
    });
    out
}

/// Adjoint of [`conv1d`] with respect to its input:
/// `z[b,ci,m] = sum_{co,k} g[b,co,m-k+p] w[co,ci,k]`
pub(crate) fn conv1d_input_grad(g: &[f64], w: &[f64], d: ConvDims) -> Vec<f64> {
    let (len, c_out, j) = (d.len, d.c_out, d.patch());
    let mut out = vec![0.0; d.batch * d.c_in * len];
    par::for_each_chunk(&mut out, d.c_in * len, d.work(), |b, zb| {
        let gb = &g[b * c_out * len..(b + 1) * c_out * len];
        let mut cols = vec![0.0; len * j];
        for co in 0..c_out {
            let wr = &w[co * j..(co + 1) * j];
            for l in 0..len {
                let gv = gb[co * len + l];
                if gv != 0.0 {
                    axpy(gv, wr, &mut cols[l * j..(l + 1) * j]);
                }
            }
        }
        for l in 0..len {
            for ci in 0..d.c_in {
                for k in 0..d.kernel {
                    if let Some(m) = d.source(l, k) {
                        zb[ci * len + m] += cols[l * j + ci * d.kernel + k];
                    }
                }
            }
        }
    });
    out
}

/// Adjoint of [`conv1d`] with respect to its weights:
/// `m[co,ci,k] = sum_{b,l} g[b,co,l] x[b,ci,l+k-p]`
pub(crate) fn conv1d_weight_grad(x: &[f64], g: &[f64], d: ConvDims) -> Vec<f64> {
    let (len, c_in, c_out, j) = (d.len, d.c_in, d.c_out, d.patch());
    let mut cols = vec![0.0; d.batch * len * j];
    for (b, cb) in cols.chunks_mut(len * j).enumerate() {
        im2col(&x[b * c_in * len..(b + 1) * c_in * len], d, cb);
    }
    let mut out = vec![0.0; c_out * j];
    par::for_each_chunk(&mut out, j, d.work(), |co, mrow| {
        for b in 0..d.batch {
            let gs = &g[(b * c_out + co) * len..(b * c_out + co + 1) * len];
            let cb = &cols[b * len * j..(b + 1) * len * j];
            for (l, &gv) in gs.iter().enumerate() {
                if gv != 0.0 {
                    axpy(gv, &cb[l * j..(l + 1) * j], mrow);
                }
            }
        }
    });
    out
}
