//! Error-bounded lossy codecs with measured compressed sizes.
//!
//! Stream layout (little endian):
//!
//! | bytes  | content                                            |
//! |--------|----------------------------------------------------|
//! | 0..2   | magic `DQ`                                         |
//! | 2      | format version (1)                                 |
//! | 3      | codec id (0 = pred-eb, 1 = xform-eb)               |
//! | 4      | mode (0 = coded, 1 = constant, 2 = verbatim)       |
//! | 5      | reserved, zero                                     |
//! | 6..12  | nx, ny, nz as u16                                  |
//! | 12..16 | absolute bound used for coding, f32                |
//!
//! Coded streams continue with the Huffman codebook, the index payload and
//! the verbatim-value section. Constant streams carry one f32; verbatim
//! streams carry every sample as f32.

mod bits;
pub mod huffman;
pub mod pred;
pub mod xform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Dims;

pub use pred::{lorenzo_predict, pred_quantize};
pub use xform::xform_block_quantize;

pub const HEADER_LEN: usize = 16;
pub const MAGIC: [u8; 2] = *b"DQ";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodecId {
    #[serde(rename = "pred-eb")]
    PredEb,
    #[serde(rename = "xform-eb")]
    XformEb,
}

impl CodecId {
    pub const ALL: [CodecId; 2] = [CodecId::PredEb, CodecId::XformEb];

    pub fn name(self) -> &'static str {
        match self {
            CodecId::PredEb => "pred-eb",
            CodecId::XformEb => "xform-eb",
        }
    }

    fn code(self) -> u8 {
        match self {
            CodecId::PredEb => 0,
            CodecId::XformEb => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(CodecId::PredEb),
            1 => Ok(CodecId::XformEb),
            _ => Err(Error::Format(format!("unknown codec id {c}"))),
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodecId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pred-eb" => Ok(CodecId::PredEb),
            "xform-eb" => Ok(CodecId::XformEb),
            _ => Err(Error::Argument(format!("unknown codec {s:?} (pred-eb | xform-eb)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub rel: f64,
    /// `rel * (vmax - vmin)` of the data being compressed.
    pub abs: f64,
}

impl ErrorBound {
    pub fn for_range(rel: f64, vmin: f32, vmax: f32) -> Result<Self> {
        if !(rel > 0.0 && rel.is_finite()) {
            return Err(Error::Argument(format!("relative error bound must be > 0, got {rel}")));
        }
        Ok(ErrorBound {
            rel,
            abs: rel * (vmax as f64 - vmin as f64),
        })
    }

    /// The bound actually stored and used for coding: the largest f32 not
    /// above `abs`.
    pub fn coding_bound(&self) -> f32 {
        let a = self.abs.min(f32::MAX as f64) as f32;
        if a as f64 > self.abs {
            a.next_down()
        } else {
            a
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodecOutcome {
    pub codec: CodecId,
    pub eb: ErrorBound,
    pub compressed_bytes: usize,
    pub reconstruction: Vec<f32>,
    pub max_abs_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Coded = 0,
    Constant = 1,
    Verbatim = 2,
}

fn value_range(values: &[f32]) -> (f32, f32) {
    values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

fn header(codec: CodecId, mode: Mode, dims: Dims, eb: f32) -> Result<Vec<u8>> {
    let dim16 = |n: usize| {
        u16::try_from(n).map_err(|_| Error::Dimension(format!("extent {n} exceeds stream limit {}", u16::MAX)))
    };
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(&MAGIC);
    h.push(FORMAT_VERSION);
    h.push(codec.code());
    h.push(mode as u8);
    h.push(0);
    for n in dims.as_array() {
        h.extend_from_slice(&dim16(n)?.to_le_bytes());
    }
    h.extend_from_slice(&eb.to_le_bytes());
    Ok(h)
}

/// Compresses `values` under the relative bound `eb_rel`.
pub fn compress(codec: CodecId, dims: Dims, values: &[f32], eb_rel: f64) -> Result<(Vec<u8>, ErrorBound)> {
    if values.is_empty() || values.len() != dims.len() {
        return Err(Error::Dimension(format!(
            "input of {} samples does not match dims {dims}",
            values.len()
        )));
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite sample at flat index {pos}")));
    }
    let (vmin, vmax) = value_range(values);
    let eb = ErrorBound::for_range(eb_rel, vmin, vmax)?;

    if vmin == vmax {
        let mut out = header(codec, Mode::Constant, dims, 0.0)?;
        out.extend_from_slice(&vmin.to_le_bytes());
        return Ok((out, eb));
    }

    let bound = eb.coding_bound();
    let verbatim = bound < f32::MIN_POSITIVE
        || (codec == CodecId::XformEb && xform::step_for(bound as f64) < f32::MIN_POSITIVE as f64);
    if verbatim {
        let mut out = header(codec, Mode::Verbatim, dims, bound)?;
        out.extend(values.iter().flat_map(|v| v.to_le_bytes()));
        return Ok((out, eb));
    }

    let mut out = header(codec, Mode::Coded, dims, bound)?;
    match codec {
        CodecId::PredEb => pred::encode(values, dims, bound, &mut out)?,
        CodecId::XformEb => xform::encode(values, dims, bound, &mut out)?,
    }
    Ok((out, eb))
}

/// Parses a stream produced by [`compress`].
pub fn decompress(bytes: &[u8]) -> Result<(CodecId, Dims, Vec<f32>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Integrity(format!(
            "stream of {} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if bytes[0..2] != MAGIC || bytes[2] != FORMAT_VERSION {
        return Err(Error::Format("bad stream magic or version".into()));
    }
    let codec = CodecId::from_code(bytes[3])?;
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]) as usize;
    let dims = Dims::new(u16_at(6), u16_at(8), u16_at(10));
    let bound = f32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]);
    let body = &bytes[HEADER_LEN..];
    let f32s = |b: &[u8]| -> Vec<f32> {
        b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    };
    let values = match bytes[4] {
        0 => match codec {
            CodecId::PredEb => pred::decode(body, dims, bound)?,
            CodecId::XformEb => xform::decode(body, dims, bound)?,
        },
        1 => {
            let v = f32s(body);
            let c = *v
                .first()
                .ok_or_else(|| Error::Integrity("constant stream missing value".into()))?;
            vec![c; dims.len()]
        }
        2 => {
            let v = f32s(body);
            if v.len() != dims.len() {
                return Err(Error::Integrity("verbatim stream truncated".into()));
            }
            v
        }
        m => return Err(Error::Format(format!("unknown stream mode {m}"))),
    };
    Ok((codec, dims, values))
}

/// Compresses, decompresses and measures the achieved error.
pub fn compress_roundtrip(codec: CodecId, dims: Dims, values: &[f32], eb_rel: f64) -> Result<CodecOutcome> {
    let (stream, eb) = compress(codec, dims, values, eb_rel)?;
    let (_, _, reconstruction) = decompress(&stream)?;
    let max_abs_error = values
        .iter()
        .zip(&reconstruction)
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .fold(0.0, f64::max);
    Ok(CodecOutcome {
        codec,
        eb,
        compressed_bytes: stream.len(),
        reconstruction,
        max_abs_error,
    })
}
