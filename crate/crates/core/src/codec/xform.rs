//! Transform-based codec: 4x4x4 blocks, separable orthonormal 4-point
//! DCT-II, power-of-two uniform quantization of coefficients.
//!
//! Every inverse-transform row has unit l2 norm over 64 entries, hence l1
//! norm at most 8, so a per-coefficient error of `q/2` bounds the sample
//! error by `4q`. With `q = 2^floor(log2(eb/4))` that is at most `eb`.
//! Blocks whose coefficients overflow the index cap, or whose f32
//! reconstruction misses the bound, are stored verbatim.

use std::sync::OnceLock;

use super::huffman;
use super::pred::{INDEX_CAP, OUTLIER};
use crate::error::{Error, Result};
use crate::field::Dims;

pub const SIDE: usize = 4;
pub const BLOCK_LEN: usize = SIDE * SIDE * SIDE;

fn dct_matrix() -> &'static [[f64; SIDE]; SIDE] {
    static M: OnceLock<[[f64; SIDE]; SIDE]> = OnceLock::new();
    M.get_or_init(|| {
        let mut m = [[0.0; SIDE]; SIDE];
        for (k, row) in m.iter_mut().enumerate() {
            let scale = if k == 0 {
                (1.0f64 / 4.0).sqrt()
            } else {
                (2.0f64 / 4.0).sqrt()
            };
            for (n, c) in row.iter_mut().enumerate() {
                *c = scale * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / 8.0).cos();
            }
        }
        m
    })
}

/// Applies `m` (or its transpose) along each of the three axes.
fn separable(block: &mut [f64; BLOCK_LEN], inverse: bool) {
    let m = dct_matrix();
    let coef = |k: usize, n: usize| if inverse { m[n][k] } else { m[k][n] };
    let strides = [1, SIDE, SIDE * SIDE];
    for stride in strides {
        let mut out = [0.0; BLOCK_LEN];
        for (at, slot) in out.iter_mut().enumerate() {
            // position along the current axis
            let pos = (at / stride) % SIDE;
            let start = at - pos * stride;
            *slot = (0..SIDE).map(|n| coef(pos, n) * block[start + n * stride]).sum();
        }
        *block = out;
    }
}

pub fn forward(block: &[f64; BLOCK_LEN]) -> [f64; BLOCK_LEN] {
    let mut b = *block;
    separable(&mut b, false);
    b
}

pub fn inverse(coeffs: &[f64; BLOCK_LEN]) -> [f64; BLOCK_LEN] {
    let mut b = *coeffs;
    separable(&mut b, true);
    b
}

/// Largest power of two not exceeding `x` (`x` positive, normal).
pub fn pow2_floor(x: f64) -> f64 {
    let exp = ((x.to_bits() >> 52) & 0x7ff) as i64 - 1023;
    2f64.powi(exp as i32)
}

/// Quantization step for an absolute bound.
pub fn step_for(eb_abs: f64) -> f64 {
    pow2_floor(eb_abs / 4.0)
}

/// Transforms and quantizes one 4x4x4 block. Returns `None` when an index
/// would reach the cap.
pub fn xform_block_quantize(block4: &[f64; BLOCK_LEN], eb_abs: f64) -> Option<([i32; BLOCK_LEN], f64)> {
    let q = step_for(eb_abs);
    let c = forward(block4);
    let mut idx = [0i32; BLOCK_LEN];
    for (slot, &v) in idx.iter_mut().zip(&c) {
        let r = (v / q).round();
        if !(r.abs() < INDEX_CAP as f64) {
            return None;
        }
        *slot = r as i32;
    }
    Some((idx, q))
}

pub fn dequantize(idx: &[i32; BLOCK_LEN], q: f64) -> [f64; BLOCK_LEN] {
    let mut c = [0.0; BLOCK_LEN];
    for (slot, &i) in c.iter_mut().zip(idx) {
        *slot = i as f64 * q;
    }
    inverse(&c)
}

struct Tiling {
    dims: Dims,
    blocks: [usize; 3],
}

impl Tiling {
    fn new(dims: Dims) -> Self {
        Tiling {
            dims,
            blocks: [dims.nx.div_ceil(SIDE), dims.ny.div_ceil(SIDE), dims.nz.div_ceil(SIDE)],
        }
    }

    fn origins(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [bx, by, bz] = self.blocks;
        (0..bz).flat_map(move |k| (0..by).flat_map(move |j| (0..bx).map(move |i| [i * SIDE, j * SIDE, k * SIDE])))
    }

    /// Gathers one block, replicating the last sample past the edges.
    fn gather(&self, values: &[f32], o: [usize; 3]) -> [f64; BLOCK_LEN] {
        let d = self.dims;
        let mut b = [0.0; BLOCK_LEN];
        for z in 0..SIDE {
            let k = (o[2] + z).min(d.nz - 1);
            for y in 0..SIDE {
                let j = (o[1] + y).min(d.ny - 1);
                for x in 0..SIDE {
                    let i = (o[0] + x).min(d.nx - 1);
                    b[x + SIDE * (y + SIDE * z)] = values[d.index(i, j, k)] as f64;
                }
            }
        }
        b
    }

    /// In-volume positions of a block as (local, global) flat indices.
    fn valid(&self, o: [usize; 3]) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.dims;
        (0..SIDE).flat_map(move |z| {
            (0..SIDE).flat_map(move |y| {
                (0..SIDE).filter_map(move |x| {
                    let (i, j, k) = (o[0] + x, o[1] + y, o[2] + z);
                    (i < d.nx && j < d.ny && k < d.nz).then(|| (x + SIDE * (y + SIDE * z), d.index(i, j, k)))
                })
            })
        })
    }
}

pub(super) fn encode(values: &[f32], dims: Dims, eb_abs: f32, out: &mut Vec<u8>) -> Result<()> {
    let eb = eb_abs as f64;
    let tiling = Tiling::new(dims);
    let mut symbols = Vec::with_capacity(tiling.blocks.iter().product::<usize>() * BLOCK_LEN);
    let mut raw = Vec::new();
    for o in tiling.origins() {
        let b = tiling.gather(values, o);
        let coded = xform_block_quantize(&b, eb).filter(|(idx, q)| {
            let rec = dequantize(idx, *q);
            tiling
                .valid(o)
                .all(|(l, g)| ((rec[l] as f32) as f64 - values[g] as f64).abs() <= eb)
        });
        match coded {
            Some((idx, _)) => symbols.extend_from_slice(&idx),
            None => {
                symbols.push(OUTLIER);
                raw.extend(tiling.valid(o).map(|(_, g)| values[g]));
            }
        }
    }
    out.extend(huffman::encode(&symbols)?.to_bytes());
    out.extend(raw.iter().flat_map(|v| v.to_le_bytes()));
    Ok(())
}

pub(super) fn decode(body: &[u8], dims: Dims, eb_abs: f32) -> Result<Vec<f32>> {
    let q = step_for(eb_abs as f64);
    let tiling = Tiling::new(dims);
    let mut symbols = huffman::Decoder::new(body)?;
    let mut out = vec![0f32; dims.len()];
    let mut verbatim = Vec::new();
    for o in tiling.origins() {
        let first = symbols.next_symbol()?;
        if first == OUTLIER {
            verbatim.push(o);
            continue;
        }
        let mut idx = [0i32; BLOCK_LEN];
        idx[0] = first;
        for slot in &mut idx[1..] {
            *slot = symbols.next_symbol()?;
        }
        let rec = dequantize(&idx, q);
        for (l, g) in tiling.valid(o) {
            out[g] = rec[l] as f32;
        }
    }
    let mut raw = body[symbols.bytes_consumed()..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for o in verbatim {
        for (_, g) in tiling.valid(o) {
            out[g] = raw
                .next()
                .ok_or_else(|| Error::Integrity("verbatim block section truncated".into()))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_is_orthonormal() {
        let mut b = [0.0; BLOCK_LEN];
        for (i, v) in b.iter_mut().enumerate() {
            *v = ((i * 37) % 11) as f64 - 5.0;
        }
        let back = inverse(&forward(&b));
        for (x, y) in b.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
        let e0: f64 = b.iter().map(|v| v * v).sum();
        let e1: f64 = forward(&b).iter().map(|v| v * v).sum();
        assert!((e0 - e1).abs() < 1e-9);
    }

    #[test]
    fn constant_block_has_single_dc() {
        let c = 1.5;
        let (idx, q) = xform_block_quantize(&[c; BLOCK_LEN], 0.01).unwrap();
        let coeffs = forward(&[c; BLOCK_LEN]);
        assert!((coeffs[0] - 8.0 * c).abs() < 1e-12);
        assert_eq!(idx[0], (8.0 * c / q).round() as i32);
        assert!(idx[1..].iter().all(|&i| i == 0));
    }

    #[test]
    fn step_formula() {
        assert_eq!(step_for(0.8), 0.125);
        assert_eq!(step_for(4.0), 1.0);
        assert_eq!(step_for(3.999), 0.5);
    }

    #[test]
    fn inverse_rows_have_bounded_l1_norm() {
        // l1 norm of each inverse-transform row, via unit coefficient impulses
        let mut worst: f64 = 0.0;
        let mut rows = vec![0.0; BLOCK_LEN];
        for k in 0..BLOCK_LEN {
            let mut c = [0.0; BLOCK_LEN];
            c[k] = 1.0;
            for (r, v) in rows.iter_mut().zip(inverse(&c)) {
                *r += v.abs();
            }
        }
        for r in rows {
            worst = worst.max(r);
        }
        assert!(worst <= 8.0, "{worst}");
    }

    #[test]
    fn quantized_block_respects_bound() {
        let mut b = [0.0; BLOCK_LEN];
        for (i, v) in b.iter_mut().enumerate() {
            *v = (i as f64 * 0.731).sin() * 3.0;
        }
        // at 1e-4 the DC index would pass the cap
        assert!(xform_block_quantize(&b, 1e-4).is_none());
        for eb in [1e-2, 0.3, 2.0] {
            let (idx, q) = xform_block_quantize(&b, eb).unwrap();
            let rec = dequantize(&idx, q);
            let err = b.iter().zip(&rec).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err <= eb, "eb {eb} err {err}");
        }
    }
}
