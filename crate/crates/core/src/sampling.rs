//! Deterministic low-discrepancy sampling of component masks.

use crate::components::{Collar, ComponentMask};
use crate::polynomial::ComplexPoint;

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// The `i`-th point (from 1) of the base-(2, 3) Halton sequence in `[0,1)^2`.
pub fn halton(i: u64) -> (f64, f64) {
    (radical_inverse(i, 2), radical_inverse(i, 3))
}

/// Up to `k` points of the Halton sequence, mapped into the bounding box of
/// the mask and kept if they pass the collar test. The first `k` accepted
/// points are a prefix of the first `2k` accepted points, so doubling `k`
/// nests sample sets.
pub fn halton_points(mask: &ComponentMask, k: usize, collar: Collar) -> Vec<ComplexPoint> {
    halton_points_where(mask, k, collar, |_| true)
}

/// As [`halton_points`], additionally requiring `keep(z)`.
pub fn halton_points_where(
    mask: &ComponentMask,
    k: usize,
    collar: Collar,
    keep: impl Fn(ComplexPoint) -> bool,
) -> Vec<ComplexPoint> {
    let g = &mask.grid;
    let Some((c0, c1, r0, r1)) = pixel_bounds(mask) else {
        return Vec::new();
    };
    let lo = g.center(c0, r1);
    let hi = g.center(c1, r0);
    let (hx, hy) = (g.pitch_re() / 2.0, g.pitch_im() / 2.0);
    let (x0, y0) = (lo.re - hx, lo.im - hy);
    let (w, h) = (hi.re - lo.re + 2.0 * hx, hi.im - lo.im + 2.0 * hy);
    // Give up after a budget proportional to the inverse fill fraction.
    let fill = mask.pixel_count() as f64 / ((c1 - c0 + 1) * (r1 - r0 + 1)) as f64;
    let budget = ((k as f64 / fill.max(1e-6)) * 64.0) as u64 + 1024;
    let mut out = Vec::with_capacity(k);
    let mut i = 1u64;
    while out.len() < k && i <= budget {
        let (u, v) = halton(i);
        let z = ComplexPoint::new(x0 + u * w, y0 + v * h);
        if mask.contains(z, collar) && keep(z) {
            out.push(z);
        }
        i += 1;
    }
    out
}

fn pixel_bounds(mask: &ComponentMask) -> Option<(usize, usize, usize, usize)> {
    let w = mask.grid.width;
    let mut b: Option<(usize, usize, usize, usize)> = None;
    for (idx, _) in mask.bits.iter().enumerate().filter(|(_, &on)| on) {
        let (c, r) = (idx % w, idx / w);
        b = Some(match b {
            None => (c, c, r, r),
            Some((c0, c1, r0, r1)) => (c0.min(c), c1.max(c), r0.min(r), r1.max(r)),
        });
    }
    b
}
