//! Prediction-based codec: order-1 Lorenzo prediction on reconstructed
//! values, linear quantization of residuals, Huffman-coded indices.

use super::huffman;
use crate::error::{Error, Result};
use crate::field::Dims;

/// Indices with magnitude at or above this are stored verbatim.
pub const INDEX_CAP: i32 = 1 << 15;
/// Symbol marking a verbatim (outlier) sample.
pub const OUTLIER: i32 = INDEX_CAP;

/// Order-1 Lorenzo prediction at `(i, j, k)` from already reconstructed
/// samples; neighbors outside the volume count as zero.
#[inline]
pub fn lorenzo_predict(recon: &[f32], dims: Dims, i: usize, j: usize, k: usize) -> f64 {
    let at = |di: usize, dj: usize, dk: usize| -> f64 {
        if i < di || j < dj || k < dk {
            0.0
        } else {
            recon[dims.index(i - di, j - dj, k - dk)] as f64
        }
    };
    at(1, 0, 0) + at(0, 1, 0) + at(0, 0, 1) - at(1, 1, 0) - at(1, 0, 1) - at(0, 1, 1) + at(1, 1, 1)
}

/// Quantizes `value - prediction` with bin width `2 * eb_abs`.
///
/// Returns `(OUTLIER, value)` when the index would reach [`INDEX_CAP`].
#[inline]
pub fn pred_quantize(value: f64, prediction: f64, eb_abs: f64) -> (i32, f64) {
    let bin = 2.0 * eb_abs;
    let q = ((value - prediction) / bin).round();
    if !(q.abs() < INDEX_CAP as f64) {
        return (OUTLIER, value);
    }
    (q as i32, prediction + q * bin)
}

pub(super) fn encode(values: &[f32], dims: Dims, eb_abs: f32, out: &mut Vec<u8>) -> Result<()> {
    let eb = eb_abs as f64;
    let mut recon = vec![0f32; values.len()];
    let mut symbols = Vec::with_capacity(values.len());
    let mut outliers = Vec::new();
    for k in 0..dims.nz {
        for j in 0..dims.ny {
            for i in 0..dims.nx {
                let idx = dims.index(i, j, k);
                let v = values[idx];
                let p = lorenzo_predict(&recon, dims, i, j, k);
                let (q, r) = pred_quantize(v as f64, p, eb);
                let r32 = r as f32;
                if q == OUTLIER || (r32 as f64 - v as f64).abs() > eb {
                    symbols.push(OUTLIER);
                    outliers.push(v);
                    recon[idx] = v;
                } else {
                    symbols.push(q);
                    recon[idx] = r32;
                }
            }
        }
    }
    out.extend(huffman::encode(&symbols)?.to_bytes());
    out.extend(outliers.iter().flat_map(|v| v.to_le_bytes()));
    Ok(())
}

pub(super) fn decode(body: &[u8], dims: Dims, eb_abs: f32) -> Result<Vec<f32>> {
    let eb = eb_abs as f64;
    let (symbols, used) = huffman::decode(body, dims.len())?;
    let mut outliers = body[used..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let mut recon = vec![0f32; dims.len()];
    let bin = 2.0 * eb;
    for k in 0..dims.nz {
        for j in 0..dims.ny {
            for i in 0..dims.nx {
                let idx = dims.index(i, j, k);
                let q = symbols[idx];
                recon[idx] = if q == OUTLIER {
                    outliers
                        .next()
                        .ok_or_else(|| Error::Integrity("outlier section truncated".into()))?
                } else {
                    let p = lorenzo_predict(&recon, dims, i, j, k);
                    (p + q as f64 * bin) as f32
                };
            }
        }
    }
    Ok(recon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_hand_trace() {
        let (q, r) = pred_quantize(0.35, 0.0, 0.1);
        assert_eq!(q, 2);
        assert!((r - 0.4).abs() < 1e-15);
        assert!((0.35f64 - r).abs() <= 0.1);
    }

    #[test]
    fn quantize_zero_residual() {
        assert_eq!(pred_quantize(1.25, 1.25, 0.01), (0, 1.25));
    }

    #[test]
    fn quantize_outlier_is_exact() {
        assert_eq!(pred_quantize(1e6, 0.0, 1e-6), (OUTLIER, 1e6));
    }

    #[test]
    fn lorenzo_origin_is_zero() {
        let d = Dims::cube(3);
        assert_eq!(lorenzo_predict(&[7.0; 27], d, 0, 0, 0), 0.0);
    }

    #[test]
    fn lorenzo_reproduces_constants() {
        let d = Dims::cube(4);
        assert_eq!(lorenzo_predict(&[2.5; 64], d, 2, 3, 1), 2.5);
    }

    #[test]
    fn lorenzo_reproduces_affine_fields() {
        let d = Dims::cube(5);
        let mut f = vec![0f32; d.len()];
        for k in 0..5 {
            for j in 0..5 {
                for i in 0..5 {
                    f[d.index(i, j, k)] = (i + 2 * j + 3 * k) as f32;
                }
            }
        }
        for (i, j, k) in [(1, 1, 1), (2, 3, 4), (4, 4, 4)] {
            assert_eq!(lorenzo_predict(&f, d, i, j, k), (i + 2 * j + 3 * k) as f64);
        }
    }
}
