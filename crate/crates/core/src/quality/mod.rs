//! Full-reference quality metrics and prediction-error statistics.

mod labels;
mod ssim;

pub use labels::{read_labels, write_labels, QualityLabel, LABEL_HEADER};
pub use ssim::{ssim3d, ssim3d_bruteforce, ssim3d_with_range, SsimParams};

use crate::error::{Error, Result};

pub fn compression_ratio(original_bytes: usize, compressed_bytes: usize) -> Result<f64> {
    if original_bytes == 0 || compressed_bytes == 0 {
        return Err(Error::Argument(format!(
            "compression ratio needs positive sizes, got {original_bytes}/{compressed_bytes}"
        )));
    }
    Ok(original_bytes as f64 / compressed_bytes as f64)
}

fn check_pair(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Argument("empty input".into()));
    }
    Ok(())
}

/// Mean squared difference, accumulated in f64.
pub fn mse(a: &[f32], b: &[f32]) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

pub(crate) fn range(values: &[f32]) -> f64 {
    let (lo, hi) = values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    hi as f64 - lo as f64
}

/// PSNR in dB from the value range of `original`, or `None` when either the
/// range or the MSE is zero.
pub fn psnr(original: &[f32], reconstruction: &[f32]) -> Result<Option<f64>> {
    let m = mse(original, reconstruction)?;
    Ok(psnr_from(range(original), m))
}

pub fn psnr_from(range: f64, mse: f64) -> Option<f64> {
    (range > 0.0 && mse > 0.0).then(|| 20.0 * range.log10() - 10.0 * mse.log10())
}

/// Signed percentage error `(orig - pred) / orig * 100`.
pub fn percentage_error(orig: f64, pred: f64) -> Result<f64> {
    if orig == 0.0 {
        return Err(Error::Argument(
            "percentage error undefined for a zero reference".into(),
        ));
    }
    Ok((orig - pred) / orig * 100.0)
}

/// Mean absolute percentage error over `(orig, pred)` pairs.
pub fn mape(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Argument("MAPE of an empty set".into()));
    }
    let mut sum = 0.0;
    for &(o, p) in pairs {
        sum += percentage_error(o, p)?.abs();
    }
    Ok(sum / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_cases() {
        assert_eq!(compression_ratio(1_048_576, 131_072).unwrap(), 8.0);
        assert_eq!(compression_ratio(4096, 4096).unwrap(), 1.0);
        assert_eq!(compression_ratio(2048, 4096).unwrap(), 0.5);
        assert!(compression_ratio(10, 0).is_err());
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(mse(&[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn psnr_cases() {
        assert!((psnr_from(1.0, 1e-4).unwrap() - 40.0).abs() < 1e-9);
        assert!((psnr_from(100.0, 1.0).unwrap() - 40.0).abs() < 1e-9);
        assert_eq!(psnr(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), None);
        assert_eq!(psnr(&[2.0, 2.0], &[2.0, 3.0]).unwrap(), None);
    }

    #[test]
    fn psnr_shift_invariant() {
        // dyadic samples keep the shifted values exact in f32
        let a: Vec<f32> = (0..50).map(|i| ((i * 37) % 64) as f32 / 64.0).collect();
        let b: Vec<f32> = a
            .iter()
            .enumerate()
            .map(|(i, v)| v + ((i % 3) as f32 - 1.0) / 128.0)
            .collect();
        let shift = |v: &[f32]| v.iter().map(|x| x + 8.0).collect::<Vec<_>>();
        let p0 = psnr(&a, &b).unwrap().unwrap();
        let p1 = psnr(&shift(&a), &shift(&b)).unwrap().unwrap();
        assert!((p0 - p1).abs() < 1e-9, "{p0} vs {p1}");
    }

    #[test]
    fn pe_and_mape_cases() {
        assert_eq!(percentage_error(100.0, 90.0).unwrap(), 10.0);
        assert_eq!(percentage_error(7.5, 7.5).unwrap(), 0.0);
        assert_eq!(percentage_error(50.0, 55.0).unwrap(), -10.0);
        assert!(percentage_error(0.0, 1.0).is_err());
        assert_eq!(mape(&[(100.0, 90.0), (50.0, 55.0)]).unwrap(), 10.0);
        assert_eq!(mape(&[(3.0, 3.0), (4.0, 4.0)]).unwrap(), 0.0);
        assert_eq!(mape(&[(10.0, 5.0)]).unwrap(), 50.0);
        assert!(mape(&[]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn mape_ignores_order(mut pairs in proptest::collection::vec((1.0f64..100.0, 0.0f64..200.0), 1..30)) {
            let a = mape(&pairs).unwrap();
            pairs.reverse();
            let b = mape(&pairs).unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
