//! Compresses one volume with both codecs over a sweep of relative bounds
//! and checks the pointwise guarantee.
//!
//! `cargo run --release --example codec_roundtrip`

use cqsurrogate::codec::{compress, compress_roundtrip, decompress, CodecId};
use cqsurrogate::field::{generate_synthetic, Dims, SyntheticSpec};
use cqsurrogate::quality::psnr;

fn main() -> cqsurrogate::Result<()> {
    let field = generate_synthetic(&SyntheticSpec::reference(Dims::cube(32), 1), 0)?;
    let raw_bytes = field.values().len() * 4;
    println!(
        "{:>9} {:>6} {:>10} {:>8} {:>9}",
        "codec", "eb_rel", "max_err", "CR", "PSNR dB"
    );
    for codec in CodecId::ALL {
        for eb in [1e-4, 1e-3, 1e-2, 1e-1] {
            let out = compress_roundtrip(codec, field.dims(), field.values(), eb)?;
            assert!(out.max_abs_error <= out.eb.abs);
            let db = psnr(field.values(), &out.reconstruction)?.unwrap_or(f64::INFINITY);
            println!(
                "{codec:>9} {eb:>6.0e} {:>10.3e} {:>8.2} {db:>9.2}",
                out.max_abs_error,
                raw_bytes as f64 / out.compressed_bytes as f64
            );
        }
    }

    // The stream is self-describing.
    let (bytes, _) = compress(CodecId::XformEb, field.dims(), field.values(), 1e-3)?;
    let (codec, dims, values) = decompress(&bytes)?;
    println!(
        "decoded {codec} stream of {} bytes: {dims}, {} values",
        bytes.len(),
        values.len()
    );
    Ok(())
}
