//! Binary sample blob: a 12-byte header followed by row-major little-endian `f64`s.
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"BVJS"
//! 4       2     format version (u16 LE)
//! 6       4     rows N (u32 LE)
//! 10      2     columns D (u16 LE)
//! 12      8·N·D values, row-major, f64 LE
//! ```

use super::SampleError;

pub const MAGIC: [u8; 4] = *b"BVJS";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlobHeader {
    pub version: u16,
    pub rows: u32,
    pub columns: u16,
}

impl BlobHeader {
    pub fn payload_len(&self) -> usize {
        self.rows as usize * self.columns as usize * 8
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.rows.to_le_bytes());
        out.extend_from_slice(&self.columns.to_le_bytes());
    }

    pub fn parse(blob: &[u8]) -> Result<Self, SampleError> {
        if blob.len() < HEADER_LEN {
            return Err(SampleError::MalformedBlob(format!(
                "blob is {} bytes, shorter than the {HEADER_LEN}-byte header",
                blob.len()
            )));
        }
        if blob[0..4] != MAGIC {
            return Err(SampleError::MalformedBlob("bad magic".into()));
        }
        let version = u16::from_le_bytes([blob[4], blob[5]]);
        if version != FORMAT_VERSION {
            return Err(SampleError::MalformedBlob(format!(
                "unsupported format version {version}"
            )));
        }
        let rows = u32::from_le_bytes([blob[6], blob[7], blob[8], blob[9]]);
        let columns = u16::from_le_bytes([blob[10], blob[11]]);
        Ok(Self {
            version,
            rows,
            columns,
        })
    }
}

/// Encodes a row-major matrix. Callers guarantee `values.len() == rows * columns`.
pub fn encode(rows: usize, columns: usize, values: &[f64]) -> Result<Vec<u8>, SampleError> {
    let rows = u32::try_from(rows)
        .map_err(|_| SampleError::InvalidArgument(format!("{rows} rows exceed the u32 header field")))?;
    let columns = u16::try_from(columns).map_err(|_| {
        SampleError::InvalidArgument(format!("{columns} columns exceed the u16 header field"))
    })?;
    let header = BlobHeader {
        version: FORMAT_VERSION,
        rows,
        columns,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    header.write(&mut out);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes the header and payload without interpreting the values.
pub fn decode(blob: &[u8]) -> Result<(BlobHeader, Vec<f64>), SampleError> {
    let header = BlobHeader::parse(blob)?;
    let expected = HEADER_LEN + header.payload_len();
    if blob.len() != expected {
        return Err(SampleError::MalformedBlob(format!(
            "expected {expected} bytes for {}x{} samples, got {}",
            header.rows,
            header.columns,
            blob.len()
        )));
    }
    let values = blob[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}
