//! Frame directory ingestion plus binary PPM (P6) / PBM (P4) I/O.

use std::fs;
use std::path::{Path, PathBuf};

use super::{ColorSpace, Frame, Mask};
use crate::error::{Error, Result};

/// Parses a binary P6 image with maxval 255.
pub fn parse_ppm(bytes: &[u8], index: u64) -> Result<Frame> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| Error::format("ppm", "missing magic"))?;
    if magic != b"P6" {
        return Err(Error::format("ppm", "expected P6 magic"));
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = next_token(bytes, &mut pos)
            .ok_or_else(|| Error::format("ppm", format!("missing {name}")))?;
        *slot = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("ppm", format!("bad {name}")))?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(Error::format("ppm", format!("maxval {maxval} unsupported")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format("ppm", "missing raster separator"));
    }
    pos += 1;
    let need = width * height * 3;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::format("ppm", format!("raster truncated: need {need} bytes")))?;
    Frame::from_rgb8(width, height, index, raster)
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

pub fn read_ppm(path: &Path, index: u64) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ppm(&bytes, index)
}

/// Writes an RGB (or GRAY, replicated) frame as P6.
pub fn write_ppm(path: &Path, frame: &Frame) -> Result<()> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    let samples = frame.to_rgb8();
    match frame.space() {
        ColorSpace::Rgb => out.extend_from_slice(&samples),
        ColorSpace::Gray => samples.iter().for_each(|&v| out.extend_from_slice(&[v, v, v])),
        other => return Err(Error::UnsupportedSource(other)),
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a mask as P4 (1 = set pixel, rows padded to whole bytes).
pub fn write_pbm(path: &Path, mask: &Mask) -> Result<()> {
    let mut out = format!("P4\n{} {}\n", mask.width(), mask.height()).into_bytes();
    let row_bytes = mask.width().div_ceil(8);
    for y in 0..mask.height() {
        let mut row = vec![0u8; row_bytes];
        for x in 0..mask.width() {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Lists `%06d.ppm` / `%06d.png` files in `dir`, sorted by frame number.
pub fn list_frame_files(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        let ext = ext.to_ascii_lowercase();
        if !(ext == "ppm" || (cfg!(feature = "png") && ext == "png")) {
            continue;
        }
        if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        if let Ok(n) = stem.parse::<u64>() {
            out.push((n, path));
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_frame(path: &Path, index: u64) -> Result<Frame> {
    let is_png = path
        .extension()
        .and_then(|s| s.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        read_png(path, index)
    } else {
        read_ppm(path, index)
    }
}

#[cfg(feature = "png")]
fn read_png(path: &Path, index: u64) -> Result<Frame> {
    let img = image::open(path)
        .map_err(|e| Error::format("png", e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Frame::from_rgb8(w as usize, h as usize, index, img.as_raw())
}

#[cfg(not(feature = "png"))]
fn read_png(_path: &Path, _index: u64) -> Result<Frame> {
    Err(Error::format("png", "built without png support"))
}

/// Iterator over the frames of a directory, in numeric order.
///
/// Decode failures are yielded as errors so the caller can skip them.
pub struct FrameDir {
    files: std::vec::IntoIter<(u64, PathBuf)>,
}

impl FrameDir {
    pub fn open(dir: &Path) -> Result<Self> {
        Ok(FrameDir {
            files: list_frame_files(dir)?.into_iter(),
        })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.len() == 0
    }
}

impl Iterator for FrameDir {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        let (index, path) = self.files.next()?;
        Some(read_frame(&path, index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_is_bit_exact() {
        let data: Vec<u8> = (0..=255u8).cycle().take(5 * 3 * 3).collect();
        let f = Frame::from_rgb8(5, 3, 9, &data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000009.ppm");
        write_ppm(&path, &f).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..11], b"P6\n5 3\n255\n");
        assert_eq!(&bytes[11..], &data[..]);
        let back = read_ppm(&path, 9).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn ppm_header_comments() {
        let mut bytes = b"P6 # comment\n2 1\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let f = parse_ppm(&bytes, 0).unwrap();
        assert_eq!(f.pixels(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn ppm_rejects_bad_input() {
        assert!(parse_ppm(b"P5\n1 1\n255\n\0", 0).is_err());
        assert!(parse_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0", 0).is_err());
        assert!(parse_ppm(b"P6\n2 2\n255\n\0\0\0", 0).is_err());
    }

    #[test]
    fn pbm_layout() {
        let mut m = Mask::new(10, 2);
        m.set(0, 0, true);
        m.set(9, 1, true);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask_000000.pbm");
        write_pbm(&path, &m).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"P4\n10 2\n");
        assert_eq!(&bytes[8..], &[0x80, 0x00, 0x00, 0x40]);
    }

    #[test]
    fn frame_files_sorted_numerically() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame::filled(2, 2, ColorSpace::Rgb, 0, &[1.0, 2.0, 3.0]).unwrap();
        for n in [10, 2, 100] {
            write_ppm(&dir.path().join(format!("{n:06}.ppm")), &f).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        fs::write(dir.path().join("mask_000001.ppm"), "x").unwrap();
        let files = list_frame_files(dir.path()).unwrap();
        let idx: Vec<u64> = files.iter().map(|(i, _)| *i).collect();
        assert_eq!(idx, vec![2, 10, 100]);
        let frames: Vec<Frame> = FrameDir::open(dir.path())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(frames[2].index(), 100);
    }
}
