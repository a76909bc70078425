use crate::error::{Error, Result};
use crate::imaging::{Mask, Rect};

/// An 8-connected set of candidate pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    bbox: Rect,
    /// Membership inside `bbox`, bbox-sized.
    mask: Mask,
    area: usize,
    perimeter: f64,
    centroid: (f64, f64),
}

const N8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

impl Blob {
    /// Builds a blob from global pixel coordinates. Duplicates are ignored;
    /// the set must be non-empty and 8-connected.
    pub fn from_pixels(pixels: &[(usize, usize)]) -> Result<Blob> {
        if pixels.is_empty() {
            return Err(Error::EmptyRegion("blob has no pixels"));
        }
        let x0 = pixels.iter().map(|p| p.0).min().unwrap();
        let y0 = pixels.iter().map(|p| p.1).min().unwrap();
        let x1 = pixels.iter().map(|p| p.0).max().unwrap() + 1;
        let y1 = pixels.iter().map(|p| p.1).max().unwrap() + 1;
        let bbox = Rect::new(x0, y0, x1 - x0, y1 - y0);
        let mut mask = Mask::new(bbox.w, bbox.h);
        for &(x, y) in pixels {
            mask.set(x - x0, y - y0, true);
        }
        let blob = Blob::from_local(bbox, mask);
        let (_, parts) = label(&blob.mask);
        if parts.len() != 1 {
            return Err(Error::InvalidParameter(format!(
                "blob pixels form {} components",
                parts.len()
            )));
        }
        Ok(blob)
    }

    /// `mask` must be bbox-sized with a pixel on every bbox edge.
    fn from_local(bbox: Rect, mask: Mask) -> Blob {
        let (w, h) = (mask.width(), mask.height());
        let mut area = 0;
        let mut cracks = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                if !mask.get(x, y) {
                    continue;
                }
                area += 1;
                sx += x as f64;
                sy += y as f64;
                let open = |dx: isize, dy: isize| {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize || !mask.get(nx as usize, ny as usize)
                };
                cracks += [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .filter(|&&(dx, dy)| open(dx, dy))
                    .count();
            }
        }
        let n = area as f64;
        Blob {
            bbox,
            mask,
            area,
            perimeter: cracks as f64,
            centroid: (bbox.x as f64 + sx / n, bbox.y as f64 + sy / n),
        }
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn area(&self) -> usize {
        self.area
    }

    /// Number of unit pixel edges separating the blob from its outside.
    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    /// Membership mask over the bounding box.
    pub fn local_mask(&self) -> &Mask {
        &self.mask
    }

    /// Membership at global coordinates.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bbox.contains(x, y) && self.mask.get(x - self.bbox.x, y - self.bbox.y)
    }

    /// Global coordinates of every pixel, row-major.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.area);
        for y in 0..self.bbox.h {
            for x in 0..self.bbox.w {
                if self.mask.get(x, y) {
                    out.push((self.bbox.x + x, self.bbox.y + y));
                }
            }
        }
        out
    }

    /// Blob membership over an arbitrary window, for masking crops.
    pub fn mask_in(&self, window: Rect) -> Mask {
        let mut m = Mask::new(window.w, window.h);
        for (x, y) in self.pixels() {
            if window.contains(x, y) {
                m.set(x - window.x, y - window.y, true);
            }
        }
        m
    }
}

/// Labels 8-connected components. Returns the label plane (0 = none) and
/// each component's pixels in discovery order.
fn label(mask: &Mask) -> (Vec<u32>, Vec<Vec<(usize, usize)>>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut parts = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let id = parts.len() as u32 + 1;
        let mut pixels = Vec::new();
        labels[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            pixels.push((x, y));
            for (dx, dy) in N8 {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if mask.bits()[q] && labels[q] == 0 {
                    labels[q] = id;
                    stack.push(q);
                }
            }
        }
        parts.push(pixels);
    }
    (labels, parts)
}

/// 8-connected components with at least `min_area` pixels, largest first
/// (ties by position of the first pixel in raster order).
pub fn connected_components(mask: &Mask, min_area: usize) -> Vec<Blob> {
    let (_, parts) = label(mask);
    let mut blobs: Vec<Blob> = parts
        .into_iter()
        .filter(|p| p.len() >= min_area.max(1))
        .map(|p| {
            let x0 = p.iter().map(|q| q.0).min().unwrap();
            let y0 = p.iter().map(|q| q.1).min().unwrap();
            let x1 = p.iter().map(|q| q.0).max().unwrap() + 1;
            let y1 = p.iter().map(|q| q.1).max().unwrap() + 1;
            let bbox = Rect::new(x0, y0, x1 - x0, y1 - y0);
            let mut local = Mask::new(bbox.w, bbox.h);
            for (x, y) in p {
                local.set(x - x0, y - y0, true);
            }
            Blob::from_local(bbox, local)
        })
        .collect();
    blobs.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then((a.bbox.y, a.bbox.x).cmp(&(b.bbox.y, b.bbox.x)))
    });
    blobs
}

fn morph(mask: &Mask, keep_if_all: bool) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = Mask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut all = true;
            let mut any = false;
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let v = mask.get(nx, ny);
                    all &= v;
                    any |= v;
                }
            }
            out.set(x, y, if keep_if_all { all } else { any });
        }
    }
    out
}

/// 3×3 erosion; neighbors outside the image are ignored.
pub fn erode3(mask: &Mask) -> Mask {
    morph(mask, true)
}

/// 3×3 dilation; neighbors outside the image are ignored.
pub fn dilate3(mask: &Mask) -> Mask {
    morph(mask, false)
}

/// Erosion followed by dilation with a 3×3 square.
pub fn open3(mask: &Mask) -> Mask {
    dilate3(&erode3(mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_mask(w: usize, h: usize, rects: &[Rect]) -> Mask {
        let mut m = Mask::new(w, h);
        for r in rects {
            for y in r.y..r.bottom() {
                for x in r.x..r.right() {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    #[test]
    fn square_measures() {
        let m = rect_mask(20, 20, &[Rect::new(3, 4, 10, 10)]);
        let b = connected_components(&m, 1);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].area(), 100);
        assert_eq!(b[0].perimeter(), 40.0);
        assert_eq!(b[0].bbox(), Rect::new(3, 4, 10, 10));
        assert_eq!(b[0].centroid(), (7.5, 8.5));
    }

    #[test]
    fn diagonal_pixels_connect() {
        let b = Blob::from_pixels(&[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(b.area(), 3);
        assert_eq!(b.perimeter(), 12.0);
        assert!(Blob::from_pixels(&[(0, 0), (2, 0)]).is_err());
        assert!(Blob::from_pixels(&[]).is_err());
    }

    #[test]
    fn opening_removes_specks_keeps_squares() {
        let mut m = rect_mask(30, 30, &[Rect::new(5, 5, 6, 6)]);
        m.set(20, 20, true);
        m.set(21, 20, true);
        let o = open3(&m);
        assert_eq!(o, rect_mask(30, 30, &[Rect::new(5, 5, 6, 6)]));
    }

    #[test]
    fn opening_keeps_border_squares() {
        let m = rect_mask(10, 10, &[Rect::new(0, 0, 4, 4)]);
        assert_eq!(open3(&m), m);
    }

    #[test]
    fn components_sorted_and_filtered() {
        let m = rect_mask(40, 20, &[Rect::new(1, 1, 5, 5), Rect::new(10, 1, 10, 10), Rect::new(30, 15, 2, 2)]);
        let b = connected_components(&m, 5);
        let areas: Vec<usize> = b.iter().map(Blob::area).collect();
        assert_eq!(areas, vec![100, 25]);
        assert!(connected_components(&m, 101).is_empty());
    }

    #[test]
    fn mask_in_window() {
        let b = Blob::from_pixels(&[(5, 5), (6, 5), (6, 6)]).unwrap();
        let m = b.mask_in(Rect::new(4, 4, 4, 4));
        assert!(m.get(1, 1) && m.get(2, 1) && m.get(2, 2));
        assert_eq!(m.count(), 3);
        assert!(b.contains(6, 6) && !b.contains(5, 6));
    }
}
