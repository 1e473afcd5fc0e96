//! Binary PGM (gray) / PPM (rgb) export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rbf::Frame;

/// Writes `frame` as `P5` (one channel) or `P6` (three channels), 8 bits per sample.
pub fn write_pnm<W: Write>(frame: &Frame, mut w: W) -> Result<W> {
    let magic = match frame.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Config(format!("cannot export {c}-channel frame"))),
    };
    write!(w, "{magic}\n{} {}\n255\n", frame.width(), frame.height())?;
    let bytes: Vec<u8> = frame
        .data()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(w)
}

pub fn save_pnm(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    write_pnm(frame, BufWriter::new(File::create(path)?))?;
    Ok(())
}

/// Parses a binary PGM/PPM produced by [`write_pnm`].
pub fn read_pnm(bytes: &[u8]) -> Result<Frame> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated pnm header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::Format(format!("unsupported pnm magic {m}"))),
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad pnm header field {s:?}")))
    };
    let (w, h, max) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if max != 255 {
        return Err(Error::Format("only 8-bit pnm is supported".into()));
    }
    let body = bytes
        .get(pos..pos + w * h * channels)
        .ok_or_else(|| Error::Format("truncated pnm body".into()))?;
    Frame::from_u8(w, h, channels, body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_roundtrip_at_8_bits() {
        let data: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let f = Frame::new(4, 3, 1, data).unwrap();
        let bytes = write_pnm(&f, Vec::new()).unwrap();
        assert!(bytes.starts_with(b"P5\n4 3\n255\n"));
        let back = read_pnm(&bytes).unwrap();
        for (a, b) in f.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn rgb_header() {
        let f = Frame::filled(2, 2, 3, 1.0).unwrap();
        let bytes = write_pnm(&f, Vec::new()).unwrap();
        assert!(bytes.starts_with(b"P6\n2 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 12);
    }
}
