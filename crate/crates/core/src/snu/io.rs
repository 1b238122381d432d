//! Binary frame files.
//!
//! Layout: `CVQF`, version u16, unit u16, count u32, sample rate in kHz u32, all little-endian,
//! followed by interleaved f32 (re, im) pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use super::{SampleFrame, Unit};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CVQF";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

pub fn write_frame<W: Write>(mut w: W, frame: &SampleFrame) -> Result<()> {
    let khz = frame.sample_rate_hz / 1e3;
    if khz.fract() != 0.0 || khz < 1.0 || khz > u32::MAX as f64 {
        return format_err(format!("sample rate {} Hz is not a whole number of kHz", frame.sample_rate_hz));
    }
    let count = u32::try_from(frame.samples.len()).map_err(|_| Error::Format("frame too long".into()))?;
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    header[6..8].copy_from_slice(&frame.unit.code().to_le_bytes());
    header[8..12].copy_from_slice(&count.to_le_bytes());
    header[12..16].copy_from_slice(&(khz as u32).to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(frame.samples.len() * 8);
    for c in &frame.samples {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one frame. `frame_id` is not stored in the file and is supplied by the caller.
pub fn read_frame<R: Read>(mut r: R, frame_id: u64) -> Result<SampleFrame> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(|_| Error::Format("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return format_err("bad magic");
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return format_err(format!("unsupported version {version}"));
    }
    let unit = Unit::from_code(u16::from_le_bytes([header[6], header[7]]))
        .ok_or_else(|| Error::Format("unknown unit code".into()))?;
    let count = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let khz = u32::from_le_bytes(header[12..16].try_into().unwrap());
    let mut payload = vec![0u8; count * 8];
    r.read_exact(&mut payload).map_err(|_| Error::Format("truncated payload".into()))?;
    let samples = payload
        .chunks_exact(8)
        .map(|b| {
            Complex::new(
                f32::from_le_bytes(b[..4].try_into().unwrap()),
                f32::from_le_bytes(b[4..].try_into().unwrap()),
            )
        })
        .collect();
    SampleFrame::new(samples, khz as f64 * 1e3, unit, frame_id).map_err(|e| Error::Format(e.to_string()))
}

pub fn save(path: impl AsRef<Path>, frame: &SampleFrame) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_frame(&mut w, frame)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>, frame_id: u64) -> Result<SampleFrame> {
    read_frame(BufReader::new(File::open(path)?), frame_id)
}
