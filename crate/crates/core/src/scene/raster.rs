//! Raster file formats.
//!
//! **SSER** (binary): the four ASCII bytes `SSER`, then little-endian `u32`
//! width, height and band count, then `width·height·bands` little-endian
//! `f32` values, row-major and band-interleaved by pixel. No padding, no
//! trailer.
//!
//! **CSV**: a header line `width,height,bands`, then one line per pixel in
//! row-major order holding `bands` comma-separated values.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::SpectralImage;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"SSER";
pub const HEADER_LEN: usize = 16;

fn parse_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| parse_err(path, 0, format!("cannot read file: {e}")))
}

pub fn encode_sser<T: Scalar>(image: &SpectralImage<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * image.width() * image.height() * image.bands());
    out.extend_from_slice(MAGIC);
    for v in [image.width(), image.height(), image.bands()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in image.to_bip() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode_sser<T: Scalar>(bytes: &[u8], path: &Path) -> Result<SpectralImage<T>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(parse_err(path, 0, "missing SSER magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(path, bytes.len(), "truncated header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (width, height, bands) = (word(4), word(8), word(12));
    if width == 0 || height == 0 || bands == 0 {
        return Err(parse_err(path, 4, format!("degenerate dimensions {width}x{height}x{bands}")));
    }
    let count = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(bands))
        .ok_or_else(|| parse_err(path, 4, "dimensions overflow"))?;
    let expected = HEADER_LEN + 4 * count;
    if bytes.len() < expected {
        // Offset of the first value that is not fully present.
        let complete = (bytes.len() - HEADER_LEN) / 4;
        return Err(parse_err(
            path,
            HEADER_LEN + 4 * complete,
            format!("truncated pixel data: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(parse_err(path, expected, "trailing bytes after pixel data"));
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(parse_err(path, HEADER_LEN + 4 * i, "non-finite value"));
        }
        data.push(T::of(v as f64));
    }
    SpectralImage::from_bip(width, height, bands, &data)
}

pub fn write_sser<T: Scalar>(path: &Path, image: &SpectralImage<T>) -> Result<()> {
    fs::write(path, encode_sser(image))?;
    Ok(())
}

pub fn read_sser<T: Scalar>(path: &Path) -> Result<SpectralImage<T>> {
    decode_sser(&read_bytes(path)?, path)
}

pub fn write_csv<T: Scalar>(path: &Path, image: &SpectralImage<T>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{},{},{}", image.width(), image.height(), image.bands())?;
    for p in image.pixels() {
        let line: Vec<String> = p
            .as_slice()
            .iter()
            .map(|v| (v.as_f64() as f32).to_string())
            .collect();
        writeln!(out, "{}", line.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_csv<T: Scalar>(path: &Path) -> Result<SpectralImage<T>> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| parse_err(path, e.valid_up_to(), "invalid UTF-8"))?;
    let mut offset = 0usize;
    let mut lines = Vec::new();
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if !trimmed.trim().is_empty() {
            lines.push((start, trimmed));
        }
    }
    let Some(&(_, header)) = lines.first() else {
        return Err(parse_err(path, 0, "empty file"));
    };
    let dims: Vec<usize> = header
        .split(',')
        .map(|f| f.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, 0, format!("bad header: {e}")))?;
    let [width, height, bands] = dims[..] else {
        return Err(parse_err(path, 0, "header must be width,height,bands"));
    };
    if width * height == 0 || bands == 0 {
        return Err(parse_err(path, 0, "degenerate dimensions"));
    }
    if lines.len() - 1 < width * height {
        return Err(parse_err(
            path,
            bytes.len(),
            format!("truncated: expected {} pixel lines, found {}", width * height, lines.len() - 1),
        ));
    }
    if lines.len() - 1 > width * height {
        return Err(parse_err(path, lines[width * height + 1].0, "extra pixel lines"));
    }
    let mut data = Vec::with_capacity(width * height * bands);
    for &(start, line) in &lines[1..] {
        let before = data.len();
        for field in line.split(',') {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|e| parse_err(path, start, format!("bad value {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, start, "non-finite value"));
            }
            data.push(T::of(v as f64));
        }
        if data.len() - before != bands {
            return Err(parse_err(
                path,
                start,
                format!("expected {bands} values, found {}", data.len() - before),
            ));
        }
    }
    SpectralImage::from_bip(width, height, bands, &data)
}

/// Reads a raster, choosing the format from the extension (`.csv` or SSER).
pub fn read_raster<T: Scalar>(path: &Path) -> Result<SpectralImage<T>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv(path),
        _ => read_sser(path),
    }
}

pub fn write_raster<T: Scalar>(path: &Path, image: &SpectralImage<T>) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => write_csv(path, image),
        _ => write_sser(path, image),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Spectrum;
    use proptest::prelude::*;

    fn image(w: usize, h: usize, d: usize, vals: &[f32]) -> SpectralImage<f64> {
        let data: Vec<f64> = vals.iter().map(|v| *v as f64).collect();
        SpectralImage::from_bip(w, h, d, &data[..w * h * d]).unwrap()
    }

    #[test]
    fn header_layout_is_exact() {
        let img = SpectralImage::new(2, 1, vec![
            Spectrum::new(vec![0.5, 1.0]).unwrap(),
            Spectrum::new(vec![0.25, 0.0]).unwrap(),
        ])
        .unwrap();
        let bytes = encode_sser(&img);
        assert_eq!(&bytes[..4], b"SSER");
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &0.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 4 * 4);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let img = image(2, 2, 3, &[0.1; 12]);
        let mut bytes = encode_sser(&img);
        bytes.truncate(16 + 4 * 5 + 2);
        let err = decode_sser::<f64>(&bytes, Path::new("x.sser")).unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 36),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_magic() {
        let err = decode_sser::<f64>(b"NOPE0000000000000000", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 0, .. }));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.csv");
        let img = image(3, 2, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.0, 0.25]);
        write_csv(&p, &img).unwrap();
        assert_eq!(read_raster::<f64>(&p).unwrap(), img);

        fs::write(&p, "2,1,2\n0.1,0.2\n0.3\n").unwrap();
        match read_csv::<f64>(&p).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 14),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn sser_round_trip(w in 1usize..5, h in 1usize..5, d in 1usize..4,
                           vals in prop::collection::vec(0.0f32..1.0, 64)) {
            let img = image(w, h, d, &vals);
            let back = decode_sser::<f64>(&encode_sser(&img), Path::new("mem")).unwrap();
            prop_assert_eq!(back, img);
        }
    }
}
