//! `PVCB` binary codebook format (all integers and floats little-endian):
//!
//! ```text
//! magic "PVCB" | version u32 | k u32 | dim u32 | k*dim f64 | sigma f64
//! ```

use std::fs;
use std::path::Path;

use super::Codebook;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PVCB";
const VERSION: u32 = 1;

impl Codebook {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + (self.centers_flat().len() + 1) * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.k() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for v in self.centers_flat() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.sigma().to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("codebook", "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format("codebook", format!("unsupported version {version}")));
        }
        let k = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let mut centers = Vec::with_capacity(k * dim);
        for _ in 0..k * dim {
            centers.push(r.f64()?);
        }
        let sigma = r.f64()?;
        if r.pos != bytes.len() {
            return Err(Error::format("codebook", "trailing bytes"));
        }
        Codebook::from_flat(dim, centers, sigma)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Codebook::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// One center per line, space separated, full round-trip precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.k() {
            let line: Vec<String> = self.center(i).iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::format("binary file", "truncated"))?;
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Codebook {
        Codebook::new(&[vec![0.0, 1.5], vec![-2.0, 3.25], vec![1e-300, 7.0]], 0.75).unwrap()
    }

    #[test]
    fn layout_is_exact() {
        let b = sample().to_bytes();
        assert_eq!(&b[..4], b"PVCB");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 2);
        assert_eq!(b.len(), 16 + 6 * 8 + 8);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(b[b.len() - 8..].try_into().unwrap()), 0.75);
    }

    #[test]
    fn round_trip() {
        let cb = sample();
        let back = Codebook::from_bytes(&cb.to_bytes()).unwrap();
        assert_eq!(back, cb);
        assert_eq!(back.fingerprint(), cb.fingerprint());
    }

    #[test]
    fn rejects_corruption() {
        let mut b = sample().to_bytes();
        assert!(Codebook::from_bytes(&b[..b.len() - 1]).is_err());
        b[0] = b'X';
        assert!(Codebook::from_bytes(&b).is_err());
    }

    #[test]
    fn text_export_one_line_per_center() {
        let t = sample().to_text();
        assert_eq!(t.lines().count(), 3);
        assert_eq!(t.lines().next().unwrap(), "0e0 1.5e0");
    }
}
