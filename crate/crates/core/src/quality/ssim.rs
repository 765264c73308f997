//! Native 3D SSIM with a uniform cubic window.
//!
//! Window moments come from separable box sums (each axis pass adds
//! `window` consecutive values directly, so there is no running-sum drift).
//! Samples are shifted by the minimum of the original before the moments
//! are formed; variances and covariance are shift invariant and the means
//! are shifted back, which keeps `E[x^2] - E[x]^2` well conditioned.

use crate::error::{Error, Result};
use crate::field::Dims;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 7,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

fn check(original: &[f32], reconstruction: &[f32], dims: Dims, p: SsimParams) -> Result<()> {
    if original.len() != dims.len() || reconstruction.len() != dims.len() {
        return Err(Error::Argument(format!(
            "SSIM inputs of {} and {} samples do not match dims {dims}",
            original.len(),
            reconstruction.len()
        )));
    }
    if p.window == 0 || p.window > dims.nx || p.window > dims.ny || p.window > dims.nz {
        return Err(Error::Argument(format!(
            "SSIM window {} does not fit dims {dims}",
            p.window
        )));
    }
    Ok(())
}

/// SSIM with the dynamic range taken from `original`.
///
/// A constant original yields `Some(1.0)` when the reconstruction is the
/// same constant and `None` otherwise.
pub fn ssim3d(original: &[f32], reconstruction: &[f32], dims: Dims, p: SsimParams) -> Result<Option<f64>> {
    check(original, reconstruction, dims, p)?;
    let l = super::range(original);
    if l == 0.0 {
        return Ok((original == reconstruction).then_some(1.0));
    }
    ssim3d_with_range(original, reconstruction, dims, p, l).map(Some)
}

/// Windowed box sum along one axis. `src` has extents `ext`; the result has
/// `ext[axis] - w + 1` along `axis`.
fn box_axis(src: &[f64], ext: [usize; 3], axis: usize, w: usize) -> (Vec<f64>, [usize; 3]) {
    let mut out_ext = ext;
    out_ext[axis] = ext[axis] - w + 1;
    let stride = [1, ext[0], ext[0] * ext[1]][axis];
    let mut out = Vec::with_capacity(out_ext.iter().product());
    for k in 0..out_ext[2] {
        for j in 0..out_ext[1] {
            for i in 0..out_ext[0] {
                let base = i + ext[0] * (j + ext[1] * k);
                let mut acc = 0.0;
                for t in 0..w {
                    acc += src[base + t * stride];
                }
                out.push(acc);
            }
        }
    }
    (out, out_ext)
}

fn window_sums(src: Vec<f64>, dims: Dims, w: usize) -> Vec<f64> {
    let ext = dims.as_array();
    let (a, ext) = box_axis(&src, ext, 0, w);
    let (b, ext) = box_axis(&a, ext, 1, w);
    box_axis(&b, ext, 2, w).0
}

/// SSIM with an explicit dynamic range `l` (> 0).
pub fn ssim3d_with_range(original: &[f32], reconstruction: &[f32], dims: Dims, p: SsimParams, l: f64) -> Result<f64> {
    check(original, reconstruction, dims, p)?;
    if !(l > 0.0) {
        return Err(Error::Argument(format!("SSIM dynamic range must be > 0, got {l}")));
    }
    let shift = original.iter().fold(f32::INFINITY, |m, &v| m.min(v)) as f64;
    let x: Vec<f64> = original.iter().map(|&v| v as f64 - shift).collect();
    let y: Vec<f64> = reconstruction.iter().map(|&v| v as f64 - shift).collect();
    let w = p.window;
    let sx = window_sums(x.clone(), dims, w);
    let sy = window_sums(y.clone(), dims, w);
    let sxx = window_sums(x.iter().map(|v| v * v).collect(), dims, w);
    let syy = window_sums(y.iter().map(|v| v * v).collect(), dims, w);
    let sxy = window_sums(x.iter().zip(&y).map(|(a, b)| a * b).collect(), dims, w);

    let n = (w * w * w) as f64;
    let c1 = (p.k1 * l).powi(2);
    let c2 = (p.k2 * l).powi(2);
    let mut total = 0.0;
    for t in 0..sx.len() {
        let (mx, my) = (sx[t] / n, sy[t] / n);
        let vx = sxx[t] / n - mx * mx;
        let vy = syy[t] / n - my * my;
        let cxy = sxy[t] / n - mx * my;
        let (ux, uy) = (mx + shift, my + shift);
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / sx.len() as f64)
}

/// Direct per-window evaluation with two-pass moments; the reference the
/// sliding implementation is checked against.
pub fn ssim3d_bruteforce(original: &[f32], reconstruction: &[f32], dims: Dims, p: SsimParams, l: f64) -> f64 {
    let w = p.window;
    let n = (w * w * w) as f64;
    let c1 = (p.k1 * l).powi(2);
    let c2 = (p.k2 * l).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for oz in 0..=dims.nz - w {
        for oy in 0..=dims.ny - w {
            for ox in 0..=dims.nx - w {
                let mut xs = Vec::with_capacity(w * w * w);
                let mut ys = Vec::with_capacity(w * w * w);
                for k in oz..oz + w {
                    for j in oy..oy + w {
                        for i in ox..ox + w {
                            let idx = dims.index(i, j, k);
                            xs.push(original[idx] as f64);
                            ys.push(reconstruction[idx] as f64);
                        }
                    }
                }
                let mx = xs.iter().sum::<f64>() / n;
                let my = ys.iter().sum::<f64>() / n;
                let vx = xs.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
                let vy = ys.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n;
                let cxy = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
                total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_volume(r: &mut crate::rng::Rng, d: Dims) -> Vec<f32> {
        (0..d.len()).map(|_| r.random_range(-1.0f32..1.0)).collect()
    }

    #[test]
    fn identical_volumes_score_one() {
        let mut r = crate::rng::rng(1);
        let d = Dims::new(9, 8, 10);
        let a = random_volume(&mut r, d);
        let s = ssim3d(&a, &a, d, SsimParams::default()).unwrap().unwrap();
        assert!((s - 1.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn symmetric_with_shared_range() {
        let mut r = crate::rng::rng(2);
        let d = Dims::cube(8);
        let a = random_volume(&mut r, d);
        let b = random_volume(&mut r, d);
        let p = SsimParams::default();
        let ab = ssim3d_with_range(&a, &b, d, p, 2.0).unwrap();
        let ba = ssim3d_with_range(&b, &a, d, p, 2.0).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn matches_bruteforce_on_8_cube() {
        let mut r = crate::rng::rng(3);
        let d = Dims::cube(8);
        let a = random_volume(&mut r, d);
        let b: Vec<f32> = a.iter().map(|v| v + r.random_range(-0.2f32..0.2)).collect();
        let p = SsimParams::default();
        let l = super::super::range(&a);
        let fast = ssim3d(&a, &b, d, p).unwrap().unwrap();
        let slow = ssim3d_bruteforce(&a, &b, d, p, l);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        assert!((-1.0..=1.0).contains(&fast));
    }

    #[test]
    fn constant_original() {
        let d = Dims::cube(7);
        let c = vec![4.0f32; d.len()];
        let p = SsimParams::default();
        assert_eq!(ssim3d(&c, &c, d, p).unwrap(), Some(1.0));
        let mut other = c.clone();
        other[5] = 4.5;
        assert_eq!(ssim3d(&c, &other, d, p).unwrap(), None);
    }

    #[test]
    fn window_must_fit() {
        let d = Dims::new(6, 8, 8);
        let v = vec![0.0f32; d.len()];
        assert!(ssim3d(&v, &v, d, SsimParams::default()).is_err());
    }
}
