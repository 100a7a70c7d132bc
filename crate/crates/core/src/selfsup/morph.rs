use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                what: "mask",
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// Every set pixel of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }
}

/// Offsets of the digital disk `dx^2 + dy^2 <= r (r + 1)`; radius 1 is the
/// full 3x3 square.
pub fn disk(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * (r + 1) {
                out.push((dy, dx));
            }
        }
    }
    out
}

fn probe(mask: &BinaryMask, radius: usize, all: bool) -> BinaryMask {
    let se = disk(radius);
    let (w, h) = (mask.width as isize, mask.height as isize);
    let mut out = BinaryMask::empty(mask.width, mask.height);
    for r in 0..h {
        for c in 0..w {
            let mut hit_any = false;
            let mut hit_all = true;
            for (dy, dx) in &se {
                let (y, x) = (r + dy, c + dx);
                let v = y >= 0 && y < h && x >= 0 && x < w && mask.data[(y * w + x) as usize];
                hit_any |= v;
                hit_all &= v;
            }
            out.data[(r * w + c) as usize] = if all { hit_all } else { hit_any };
        }
    }
    out
}

/// Pixel stays set only if the whole disk around it is set; pixels outside
/// the image count as unset.
pub fn morph_erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    probe(mask, radius, true)
}

/// Pixel becomes set if any pixel of the disk around it is set.
pub fn morph_dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    probe(mask, radius, false)
}

/// Erosion then dilation: removes specks smaller than the disk.
pub fn morph_open(mask: &BinaryMask, radius: usize) -> BinaryMask {
    morph_dilate(&morph_erode(mask, radius), radius)
}

/// Dilation then erosion: fills holes smaller than the disk.
///
/// Computed on a canvas padded by `radius`, so foreground touching the
/// image border is not eaten by the erosion; closing never removes pixels.
pub fn morph_close(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let pad = radius;
    let (pw, ph) = (mask.width + 2 * pad, mask.height + 2 * pad);
    let padded = BinaryMask::from_fn(pw, ph, |r, c| {
        r >= pad
            && c >= pad
            && r < pad + mask.height
            && c < pad + mask.width
            && mask.get(r - pad, c - pad)
    });
    let closed = morph_erode(&morph_dilate(&padded, radius), radius);
    BinaryMask::from_fn(mask.width, mask.height, |r, c| closed.get(r + pad, c + pad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_one_is_three_by_three() {
        assert_eq!(disk(1).len(), 9);
        assert_eq!(disk(2).len(), 21);
    }

    #[test]
    fn erode_full_mask_clears_border() {
        let m = BinaryMask::from_fn(6, 5, |_, _| true);
        let e = morph_erode(&m, 1);
        for r in 0..5 {
            for c in 0..6 {
                let interior = r > 0 && r < 4 && c > 0 && c < 5;
                assert_eq!(e.get(r, c), interior);
            }
        }
    }

    #[test]
    fn dilate_single_pixel() {
        let m = BinaryMask::from_fn(7, 7, |r, c| r == 3 && c == 3);
        let d = morph_dilate(&m, 1);
        assert_eq!(d.count(), 9);
        assert!(d.get(2, 2) && d.get(4, 4) && !d.get(1, 3));
    }

    #[test]
    fn open_removes_speck_close_fills_hole() {
        let speck = BinaryMask::from_fn(9, 9, |r, c| r == 4 && c == 4);
        assert_eq!(morph_open(&speck, 1).count(), 0);
        let holed = BinaryMask::from_fn(9, 9, |r, c| {
            (2..7).contains(&r) && (2..7).contains(&c) && !(r == 4 && c == 4)
        });
        let closed = morph_close(&holed, 1);
        assert!(closed.get(4, 4));
        assert_eq!(closed.count(), 25);
    }

    #[test]
    fn closing_keeps_border_foreground() {
        let m = BinaryMask::from_fn(6, 6, |r, _| r < 2);
        assert_eq!(morph_close(&m, 1), m);
    }

    #[test]
    fn square_survives_closing_after_dilation_erosion() {
        let sq = BinaryMask::from_fn(16, 16, |r, c| (3..13).contains(&r) && (3..13).contains(&c));
        assert_eq!(morph_erode(&morph_dilate(&sq, 1), 1), sq);
        assert_eq!(morph_open(&sq, 1), sq);
    }
}
