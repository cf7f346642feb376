//! Pixel geometry shared by rendering and component labelling.

use crate::error::{Error, Result};
use crate::polynomial::ComplexPoint;

/// Axis-aligned rectangle of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ComplexBox {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let b = ComplexBox {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        if !(re_max > re_min && im_max > im_min) || ![re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("box {b:?} has no positive area")));
        }
        Ok(b)
    }

    /// Square box of half-width `r` around the origin.
    pub fn centered(r: f64) -> Result<Self> {
        ComplexBox::new(-r, r, -r, r)
    }

    /// Box spanning `[re_min, re_max]` horizontally and roughly `[-half, half]`
    /// vertically, shifted by half a pixel so that, on a grid with `height`
    /// rows, one row of pixel centers lies exactly on the real axis.
    pub fn on_real_axis(re_min: f64, re_max: f64, half: f64, height: usize) -> Result<Self> {
        if height == 0 {
            return Err(Error::InvalidInput("height must be positive".into()));
        }
        let pitch = 2.0 * half / height as f64;
        let row = (height / 2) as f64;
        let im_max = (row + 0.5) * pitch;
        ComplexBox::new(re_min, re_max, im_max - height as f64 * pitch, im_max)
    }

    pub fn contains(&self, z: ComplexPoint) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }
}

/// A `width x height` raster over a box. Row 0 is the top (largest imaginary
/// part); pixels are sampled at their centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    pub bbox: ComplexBox,
    pub width: usize,
    pub height: usize,
}

impl PixelGrid {
    pub fn new(bbox: ComplexBox, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("raster dimensions must be positive".into()));
        }
        Ok(PixelGrid { bbox, width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pitch_re(&self) -> f64 {
        (self.bbox.re_max - self.bbox.re_min) / self.width as f64
    }

    pub fn pitch_im(&self) -> f64 {
        (self.bbox.im_max - self.bbox.im_min) / self.height as f64
    }

    /// The larger of the two pixel pitches.
    pub fn pitch(&self) -> f64 {
        self.pitch_re().max(self.pitch_im())
    }

    #[inline]
    pub fn center(&self, col: usize, row: usize) -> ComplexPoint {
        ComplexPoint::new(
            self.bbox.re_min + (col as f64 + 0.5) * self.pitch_re(),
            self.bbox.im_max - (row as f64 + 0.5) * self.pitch_im(),
        )
    }

    #[inline]
    pub fn center_of_index(&self, idx: usize) -> ComplexPoint {
        self.center(idx % self.width, idx / self.width)
    }

    /// Pixel containing `z`, if inside the box.
    #[inline]
    pub fn pixel_of(&self, z: ComplexPoint) -> Option<(usize, usize)> {
        let fx = (z.re - self.bbox.re_min) / self.pitch_re();
        let fy = (self.bbox.im_max - z.im) / self.pitch_im();
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (col, row) = (fx as usize, fy as usize);
        (col < self.width && row < self.height).then_some((col, row))
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }
}
