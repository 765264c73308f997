//! PSNR, 3D SSIM and the percentage-error metrics on a perturbed volume.
//!
//! `cargo run --release --example quality_metrics`

use cqsurrogate::field::{generate_synthetic, Dims, SyntheticSpec};
use cqsurrogate::quality::{mape, percentage_error, psnr, ssim3d, SsimParams};

fn main() -> cqsurrogate::Result<()> {
    let field = generate_synthetic(&SyntheticSpec::reference(Dims::cube(24), 3), 0)?;
    let range = (field.vmax() - field.vmin()) as f64;
    for amp in [1e-4, 1e-3, 1e-2, 1e-1] {
        let noisy: Vec<f32> = field
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + (amp * range * ((i * 7919 % 1000) as f64 / 500.0 - 1.0)) as f32)
            .collect();
        let p = psnr(field.values(), &noisy)?.unwrap();
        let s = ssim3d(field.values(), &noisy, field.dims(), SsimParams::default())?.unwrap();
        println!("noise {amp:>6.0e} x range: PSNR {p:7.2} dB, SSIM {s:.6}");
    }

    println!("PE(100, 90) = {}", percentage_error(100.0, 90.0)?);
    println!("MAPE[(100, 90), (50, 55)] = {}", mape(&[(100.0, 90.0), (50.0, 55.0)])?);
    Ok(())
}
