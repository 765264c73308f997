//! Inner loops shared by the tensor ops. Reductions use eight independent
//! accumulators in a fixed order, so results are deterministic and the
//! compiler can vectorize them.

use super::tensor::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for (ca, cb) in a.chunks_exact(8).zip(b.chunks_exact(8)) {
        for l in 0..8 {
            acc[l] += ca[l] * cb[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn sum<T: Real>(a: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in a.chunks_exact(8) {
        for l in 0..8 {
            acc[l] += c[l];
        }
    }
    let mut tail = T::zero();
    for &v in &a[chunks * 8..] {
        tail += v;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Geometry of a 3D convolution over one sample.
#[derive(Clone, Copy, Debug)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub output: [usize; 3],
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// Rows of the unfolded input: `C * kd * kh * kw`.
    pub fn rows(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    /// Output positions per channel.
    pub fn positions(&self) -> usize {
        self.output.iter().product()
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.input.iter().product::<usize>()
    }

    /// For kernel offset `d` along an axis: the output range whose input
    /// coordinate `o * stride + d - pad` falls inside `[0, n)`.
    fn valid(&self, d: usize, n: usize, out: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let off = d as isize - self.pad as isize;
        // smallest o with o*s + off >= 0
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        // largest o with o*s + off <= n - 1, exclusive bound
        let hi_incl = (n as isize - 1 - off).div_euclid(s);
        let hi = (hi_incl + 1).clamp(0, out as isize);
        (
            lo.min(out as isize) as usize,
            (hi as usize).max(lo.min(out as isize) as usize),
        )
    }

    /// Unfolds `x` (`[C, D, H, W]`) into `col` (`[rows, positions]`).
    pub fn im2col<T: Real>(&self, x: &[T], col: &mut [T]) {
        let [d, h, w] = self.input;
        let [kd, kh, kw] = self.kernel;
        let [od, oh, ow] = self.output;
        let s = self.stride;
        let p = self.pad;
        let npos = self.positions();
        col.fill(T::zero());
        for c in 0..self.in_channels {
            let xc = &x[c * d * h * w..(c + 1) * d * h * w];
            for dz in 0..kd {
                let (z0, z1) = self.valid(dz, d, od);
                for dy in 0..kh {
                    let (y0, y1) = self.valid(dy, h, oh);
                    for dx in 0..kw {
                        let (x0, x1) = self.valid(dx, w, ow);
                        let r = ((c * kd + dz) * kh + dy) * kw + dx;
                        let row = &mut col[r * npos..(r + 1) * npos];
                        for oz in z0..z1 {
                            let iz = oz * s + dz - p;
                            for oy in y0..y1 {
                                let iy = oy * s + dy - p;
                                let src = &xc[(iz * h + iy) * w..];
                                let dst = &mut row[(oz * oh + oy) * ow..];
                                if s == 1 {
                                    let ix0 = x0 + dx - p;
                                    dst[x0..x1].copy_from_slice(&src[ix0..ix0 + (x1 - x0)]);
                                } else {
                                    for ox in x0..x1 {
                                        dst[ox] = src[ox * s + dx - p];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`im2col`](Self::im2col): accumulates `col` into `gx`.
    pub fn col2im<T: Real>(&self, col: &[T], gx: &mut [T]) {
        let [d, h, w] = self.input;
        let [kd, kh, kw] = self.kernel;
        let [od, oh, ow] = self.output;
        let s = self.stride;
        let p = self.pad;
        let npos = self.positions();
        for c in 0..self.in_channels {
            let gc = &mut gx[c * d * h * w..(c + 1) * d * h * w];
            for dz in 0..kd {
                let (z0, z1) = self.valid(dz, d, od);
                for dy in 0..kh {
                    let (y0, y1) = self.valid(dy, h, oh);
                    for dx in 0..kw {
                        let (x0, x1) = self.valid(dx, w, ow);
                        let r = ((c * kd + dz) * kh + dy) * kw + dx;
                        let row = &col[r * npos..(r + 1) * npos];
                        for oz in z0..z1 {
                            let iz = oz * s + dz - p;
                            for oy in y0..y1 {
                                let iy = oy * s + dy - p;
                                let base = (iz * h + iy) * w;
                                let src = &row[(oz * oh + oy) * ow..];
                                for ox in x0..x1 {
                                    gc[base + ox * s + dx - p] += src[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// `out[k, :] = b[k] + sum_r w[k, r] * col[r, :]`
    pub fn forward<T: Real>(&self, col: &[T], w: &[T], b: &[T], out: &mut [T]) {
        let rows = self.rows();
        let npos = self.positions();
        for k in 0..self.out_channels {
            let o = &mut out[k * npos..(k + 1) * npos];
            o.fill(b[k]);
            let wk = &w[k * rows..(k + 1) * rows];
            for (r, &wr) in wk.iter().enumerate() {
                axpy(wr, &col[r * npos..(r + 1) * npos], o);
            }
        }
    }
}
