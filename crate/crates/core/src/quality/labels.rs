use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::codec::CodecId;
use crate::error::{Error, Result};

pub const LABEL_HEADER: &str = "field,timestep,block_id,codec,eb_rel,eb_abs,cr,psnr_db,ssim,block_min,block_max";

/// One ground-truth row: the quality one codec achieved on one block at one
/// error bound. Undefined PSNR/SSIM are written as empty cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityLabel {
    #[serde(rename = "field")]
    pub field_name: String,
    pub timestep: u32,
    pub block_id: u32,
    pub codec: CodecId,
    pub eb_rel: f64,
    pub eb_abs: f64,
    pub cr: f64,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub block_min: f32,
    pub block_max: f32,
}

pub fn write_labels<W: Write>(rows: &[QualityLabel], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(LABEL_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<label csv>", e))?;
    Ok(())
}

pub fn read_labels<R: Read>(input: R) -> Result<Vec<QualityLabel>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != LABEL_HEADER {
        return Err(Error::Format(format!("unexpected label header {:?}", header.join(","))));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<QualityLabel>, _>>()?;
    for row in &rows {
        if !(row.cr > 0.0) {
            return Err(Error::Data(format!("non-positive CR in label row {row:?}")));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(psnr: Option<f64>) -> QualityLabel {
        QualityLabel {
            field_name: "rho".into(),
            timestep: 3,
            block_id: 7,
            codec: CodecId::XformEb,
            eb_rel: 1e-3,
            eb_abs: 2.5e-3,
            cr: 12.75,
            psnr_db: psnr,
            ssim: Some(0.998),
            block_min: -1.0,
            block_max: 1.5,
        }
    }

    #[test]
    fn csv_layout_and_parse_back() {
        let rows = vec![row(Some(61.5)), row(None)];
        let mut buf = Vec::new();
        write_labels(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), LABEL_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "rho,3,7,xform-eb,0.001,0.0025,12.75,61.5,0.998,-1.0,1.5"
        );
        assert_eq!(
            lines.next().unwrap(),
            "rho,3,7,xform-eb,0.001,0.0025,12.75,,0.998,-1.0,1.5"
        );
        assert_eq!(read_labels(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn wrong_header_is_format_error() {
        let text = "a,b\n1,2\n";
        assert!(matches!(read_labels(text.as_bytes()), Err(Error::Format(_))));
    }
}
