//! Fast Hessian interest point detector (box-filter approximation of the
//! determinant of the Hessian), used by keypoint sampling.

use crate::imaging::IntegralImage;

/// Filter sizes per octave, four layers each.
const OCTAVES: [[usize; 4]; 3] = [[9, 15, 21, 27], [15, 27, 39, 51], [27, 51, 75, 99]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: usize,
    pub y: usize,
    /// Side of the box filter that fired.
    pub scale: usize,
    pub response: f64,
}

struct ResponseLayer {
    size: usize,
    step: usize,
    cols: usize,
    rows: usize,
    det: Vec<f64>,
}

/// Clipped box sum over `rows × cols` starting at `(row, col)`.
fn box_clipped(ii: &IntegralImage, row: isize, col: isize, rows: isize, cols: isize) -> f64 {
    let r0 = row.clamp(0, ii.height() as isize) as usize;
    let c0 = col.clamp(0, ii.width() as isize) as usize;
    let r1 = (row + rows).clamp(0, ii.height() as isize) as usize;
    let c1 = (col + cols).clamp(0, ii.width() as isize) as usize;
    if r1 <= r0 || c1 <= c0 {
        return 0.0;
    }
    ii.box_sum(0, c0, r0, c1, r1)
}

impl ResponseLayer {
    fn build(ii: &IntegralImage, size: usize, step: usize) -> Self {
        let cols = ii.width() / step;
        let rows = ii.height() / step;
        let lobe = (size / 3) as isize;
        let border = ((size - 1) / 2) as isize;
        let w = size as isize;
        let inv_area = 1.0 / (size * size) as f64;
        let mut det = vec![0.0; cols * rows];
        for ar in 0..rows {
            for ac in 0..cols {
                let r = (ar * step) as isize;
                let c = (ac * step) as isize;
                let dxx = box_clipped(ii, r - lobe + 1, c - border, 2 * lobe - 1, w)
                    - 3.0 * box_clipped(ii, r - lobe + 1, c - lobe / 2, 2 * lobe - 1, lobe);
                let dyy = box_clipped(ii, r - border, c - lobe + 1, w, 2 * lobe - 1)
                    - 3.0 * box_clipped(ii, r - lobe / 2, c - lobe + 1, lobe, 2 * lobe - 1);
                let dxy = box_clipped(ii, r - lobe, c + 1, lobe, lobe)
                    + box_clipped(ii, r + 1, c - lobe, lobe, lobe)
                    - box_clipped(ii, r - lobe, c - lobe, lobe, lobe)
                    - box_clipped(ii, r + 1, c + 1, lobe, lobe);
                let (dxx, dyy, dxy) = (dxx * inv_area, dyy * inv_area, dxy * inv_area);
                det[ar * cols + ac] = dxx * dyy - 0.81 * dxy * dxy;
            }
        }
        ResponseLayer {
            size,
            step,
            cols,
            rows,
            det,
        }
    }

    /// Response at the position of `(row, col)` expressed in `other`'s grid.
    fn at(&self, row: usize, col: usize, other: &ResponseLayer) -> f64 {
        let scale = other.step / self.step;
        self.det[(row * scale) * self.cols + col * scale]
    }
}

/// Detects interest points whose Hessian determinant exceeds `threshold`
/// and is a maximum of its 3×3×3 scale-space neighborhood.
/// Results are ordered by (y, x, scale).
pub fn fast_hessian(ii: &IntegralImage, threshold: f64) -> Vec<Keypoint> {
    let mut points = Vec::new();
    for (o, sizes) in OCTAVES.iter().enumerate() {
        let step = 1usize << o;
        if ii.width() / step < 3 || ii.height() / step < 3 {
            break;
        }
        let layers: Vec<ResponseLayer> =
            sizes.iter().map(|&s| ResponseLayer::build(ii, s, step)).collect();
        for m in 1..3 {
            let (b, mid, t) = (&layers[m - 1], &layers[m], &layers[m + 1]);
            let border = (t.size / 2) / t.step + 1;
            for r in border..t.rows.saturating_sub(border) {
                for c in border..t.cols.saturating_sub(border) {
                    let v = mid.at(r, c, t);
                    if v <= threshold {
                        continue;
                    }
                    let mut is_max = true;
                    'scan: for dr in -1isize..=1 {
                        for dc in -1isize..=1 {
                            let rr = (r as isize + dr) as usize;
                            let cc = (c as isize + dc) as usize;
                            for (li, layer) in [b, mid, t].into_iter().enumerate() {
                                if li == 1 && dr == 0 && dc == 0 {
                                    continue;
                                }
                                let n = layer.at(rr, cc, t);
                                // plateaus keep only their first position in (layer, row, col) order
                                let earlier = (li, dr, dc) < (1, 0, 0);
                                if n > v || (n == v && earlier) {
                                    is_max = false;
                                    break 'scan;
                                }
                            }
                        }
                    }
                    if is_max {
                        points.push(Keypoint {
                            x: c * t.step,
                            y: r * t.step,
                            scale: mid.size,
                            response: v,
                        });
                    }
                }
            }
        }
    }
    points.sort_by(|a, b| (a.y, a.x, a.scale).cmp(&(b.y, b.x, b.scale)));
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{integral, ColorSpace, Frame};

    fn blob_image(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> Frame {
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                px.push(if d2 <= r * r { 250.0 } else { 20.0 });
            }
        }
        Frame::new(w, h, ColorSpace::Gray, 0, px).unwrap()
    }

    #[test]
    fn flat_image_has_no_keypoints() {
        let f = Frame::filled(64, 64, ColorSpace::Gray, 0, &[90.0]).unwrap();
        assert!(fast_hessian(&integral(&f), 100.0).is_empty());
    }

    #[test]
    fn bright_disc_is_detected_near_its_center() {
        let f = blob_image(64, 64, 32.0, 30.0, 4.0);
        let kps = fast_hessian(&integral(&f), 100.0);
        assert!(!kps.is_empty());
        assert!(kps
            .iter()
            .any(|k| (k.x as f64 - 32.0).abs() <= 2.0 && (k.y as f64 - 30.0).abs() <= 2.0));
    }

    #[test]
    fn higher_threshold_never_adds_points() {
        let f = blob_image(64, 64, 20.0, 40.0, 3.0);
        let ii = integral(&f);
        let lo = fast_hessian(&ii, 10.0);
        let hi = fast_hessian(&ii, 1000.0);
        assert!(hi.len() <= lo.len());
        assert!(hi.iter().all(|k| lo.contains(k)));
    }
}
