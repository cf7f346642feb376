//! Escape radius, orbit classification, connectivity of the Julia set from
//! the critical orbits, and escape-time rasters.

use std::io::{self, Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ComplexBox, PixelGrid};
use crate::polynomial::{ComplexPoint, Polynomial, Root};

pub const DEFAULT_CLASSIFY_ITER: usize = 1000;
pub const DEFAULT_RENDER_ITER: usize = 256;
/// Number of boundary samples used to witness the escape radius.
pub const WITNESS_SAMPLES: usize = 4096;
/// Relative tolerance used when an orbit is compared with its own past.
pub const CYCLE_TOL: f64 = 1e-9;

/// A polynomial together with a verified escape radius and orbit budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DynSetup {
    pub poly: Polynomial,
    pub radius: f64,
    pub max_iter: usize,
}

impl DynSetup {
    pub fn new(poly: Polynomial) -> Result<Self> {
        let radius = escape_radius(&poly)?;
        Ok(DynSetup {
            poly,
            radius,
            max_iter: DEFAULT_CLASSIFY_ITER,
        })
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitClass {
    /// First step `k` with `|f^k(z)| > R`.
    Escaped(usize),
    Bounded,
}

impl OrbitClass {
    pub fn is_bounded(self) -> bool {
        matches!(self, OrbitClass::Bounded)
    }
}

/// Radius `R = max(1, (2 + sum_{i<d} |a_i|) / |a_d|)`, so that `|z| >= R`
/// forces `|p(z)| >= 2|z|`. The bound is confirmed on a dense sample of the
/// circle `|z| = R`.
pub fn escape_radius(p: &Polynomial) -> Result<f64> {
    let d = p.degree();
    if d < 2 {
        return Err(Error::InvalidInput("escape radius needs degree >= 2".into()));
    }
    let lower: f64 = p.coeffs()[..d].iter().map(|c| c.norm()).sum();
    let radius = ((2.0 + lower) / p.leading().norm()).max(1.0);
    for k in 0..WITNESS_SAMPLES {
        let theta = std::f64::consts::TAU * k as f64 / WITNESS_SAMPLES as f64;
        let z = ComplexPoint::from_polar(radius, theta);
        let image = p.eval(z).norm();
        let required = 2.0 * radius;
        if image < required * (1.0 - 1e-12) {
            return Err(Error::WitnessFailed {
                point: z,
                image_modulus: image,
                required,
            });
        }
    }
    Ok(radius)
}

/// Escape-time classification with the strict test `|f^k(z)| > R`.
pub fn classify(setup: &DynSetup, z: ComplexPoint) -> OrbitClass {
    let r2 = setup.radius * setup.radius;
    let mut w = z;
    for k in 0..=setup.max_iter {
        if w.norm_sqr() > r2 {
            return OrbitClass::Escaped(k);
        }
        if k < setup.max_iter {
            w = setup.poly.eval(w);
        }
    }
    OrbitClass::Bounded
}

/// Like [`classify`], but an orbit that returns to within
/// `tol * max(1, |z|)` of one of its earlier points is declared bounded at
/// once. This recognises critical orbits that land exactly on a repelling
/// cycle, which floating-point iteration would otherwise push off the cycle
/// and out to infinity.
pub fn classify_tracking_cycles(setup: &DynSetup, z: ComplexPoint, tol: f64) -> OrbitClass {
    let r2 = setup.radius * setup.radius;
    let mut orbit: Vec<ComplexPoint> = Vec::with_capacity(64);
    let mut w = z;
    for k in 0..=setup.max_iter {
        if w.norm_sqr() > r2 {
            return OrbitClass::Escaped(k);
        }
        let scale = tol * w.norm().max(1.0);
        if orbit.iter().any(|prev| (prev - w).norm() <= scale) {
            return OrbitClass::Bounded;
        }
        orbit.push(w);
        if k < setup.max_iter {
            w = setup.poly.eval(w);
        }
    }
    OrbitClass::Bounded
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Connected,
    Disconnected,
    TotallyDisconnected,
}

pub const CONNECTIVITY_CAVEAT: &str = "all-bounded critical orbits decide connectedness exactly; \
a mixed or all-escaping verdict is a sufficient condition only, and a map labelled Disconnected \
may still have a totally disconnected Julia set";

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityReport {
    pub class: Connectivity,
    /// Critical points (with multiplicity) and the fate of their orbits.
    pub critical: Vec<(Root, OrbitClass)>,
    pub caveat: &'static str,
}

/// Classifies the Julia set through the critical orbits.
pub fn connectivity_class(setup: &DynSetup) -> Result<ConnectivityReport> {
    let critical = setup.poly.critical_points(1e-10)?;
    let fates: Vec<(Root, OrbitClass)> = critical
        .into_iter()
        .map(|c| (c, classify_tracking_cycles(setup, c.z, CYCLE_TOL)))
        .collect();
    let bounded = fates.iter().filter(|(_, o)| o.is_bounded()).count();
    let class = if bounded == fates.len() {
        Connectivity::Connected
    } else if bounded == 0 {
        Connectivity::TotallyDisconnected
    } else {
        Connectivity::Disconnected
    };
    Ok(ConnectivityReport {
        class,
        critical: fates,
        caveat: CONNECTIVITY_CAVEAT,
    })
}

/// Per-pixel byte raster.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub grid: PixelGrid,
    pub values: Vec<u8>,
}

impl RasterImage {
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.values[self.grid.index(col, row)]
    }

    /// Binary PGM (`P5`, maxval 255), rows top to bottom.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_pgm(&mut out, self.grid.width, self.grid.height, &self.values)
    }
}

pub fn write_pgm<W: Write>(out: &mut W, width: usize, height: usize, values: &[u8]) -> io::Result<()> {
    write_pgm_with_comments(out, width, height, values, &[])
}

/// As [`write_pgm`], with `# ` comment lines after the magic number.
pub fn write_pgm_with_comments<W: Write>(
    out: &mut W,
    width: usize,
    height: usize,
    values: &[u8],
    comments: &[String],
) -> io::Result<()> {
    assert_eq!(values.len(), width * height);
    writeln!(out, "P5")?;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    write!(out, "{width} {height}\n255\n")?;
    out.write_all(values)
}

/// Reads a binary PGM with maxval 255; returns `(width, height, pixels)`.
pub fn read_pgm<R: Read>(mut input: R) -> io::Result<(usize, usize, Vec<u8>)> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < buf.len() && buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < buf.len() && buf[pos] == b'#' {
            while pos < buf.len() && buf[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&buf[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("not a P5 image with maxval 255"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let data = buf
        .get(pos..pos + width * height)
        .ok_or_else(|| bad("truncated data"))?;
    Ok((width, height, data.to_vec()))
}

/// Escape-time raster: 0 for bounded pixels, `clamp(k, 1, 255)` for pixels
/// escaping at step `k`.
pub fn render(setup: &DynSetup, bbox: ComplexBox, width: usize, height: usize) -> Result<RasterImage> {
    let grid = PixelGrid::new(bbox, width, height)?;
    let mut values = vec![0u8; grid.len()];
    values.par_chunks_mut(width).enumerate().for_each(|(row, line)| {
        for (col, v) in line.iter_mut().enumerate() {
            *v = match classify(setup, grid.center(col, row)) {
                OrbitClass::Bounded => 0,
                OrbitClass::Escaped(k) => k.clamp(1, 255) as u8,
            };
        }
    });
    Ok(RasterImage { grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute-force witness oracle: min over a fine circle of |p(z)| / |z|.
    fn min_growth(p: &Polynomial, r: f64) -> f64 {
        (0..20_000)
            .map(|k| {
                let z = Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / 20_000.0);
                p.eval(z).norm() / r
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn escape_radius_examples() {
        let cheb = Polynomial::chebyshev2();
        assert_eq!(escape_radius(&cheb).unwrap(), 4.0);
        assert!(min_growth(&cheb, 4.0) >= 2.0 - 1e-12);

        assert_eq!(escape_radius(&Polynomial::power(2).unwrap()).unwrap(), 2.0);

        let fig = Polynomial::from_real(&[-1.455, 0.0, 1.0, 0.215]).unwrap();
        let r = escape_radius(&fig).unwrap();
        assert!((r - 4.455 / 0.215).abs() < 1e-12);
        assert!((r - 20.72).abs() < 0.01);
        assert!(min_growth(&fig, r) >= 2.0);
    }

    #[test]
    fn escape_radius_rejects_linear() {
        assert!(escape_radius(&Polynomial::from_real(&[1.0, 2.0]).unwrap()).is_err());
    }

    #[test]
    fn classify_examples() {
        let s = DynSetup::new(Polynomial::chebyshev2()).unwrap();
        assert_eq!(classify(&s, c(0.0, 0.0)), OrbitClass::Bounded);
        assert_eq!(classify(&s, c(3.0, 0.0)), OrbitClass::Escaped(1));
        assert_eq!(classify(&s, c(5.0, 0.0)), OrbitClass::Escaped(0));
        let sq = DynSetup::new(Polynomial::power(2).unwrap()).unwrap();
        assert_eq!(classify(&sq, c(1.0, 0.0)), OrbitClass::Bounded);
    }

    #[test]
    fn connectivity_examples() {
        let s = DynSetup::new(Polynomial::chebyshev2()).unwrap();
        assert_eq!(connectivity_class(&s).unwrap().class, Connectivity::Connected);
        let s = DynSetup::new(Polynomial::from_real(&[-6.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(s.radius, 8.0);
        assert_eq!(classify(&s, c(0.0, 0.0)), OrbitClass::Escaped(2));
        let rep = connectivity_class(&s).unwrap();
        assert_eq!(rep.class, Connectivity::TotallyDisconnected);
        assert!(!rep.caveat.is_empty());
    }

    #[test]
    fn cycle_tracking_catches_landing_on_repelling_fixed_point() {
        // 0 -> -2 -> 2 -> 2 for the Chebyshev map; perturb so that plain
        // iteration drifts off the repelling point 2.
        let s = DynSetup::new(Polynomial::from_real(&[-2.0 - 1e-13, 0.0, 1.0]).unwrap()).unwrap();
        assert!(matches!(classify(&s, c(0.0, 0.0)), OrbitClass::Escaped(_)));
        assert_eq!(
            classify_tracking_cycles(&s, c(0.0, 0.0), CYCLE_TOL),
            OrbitClass::Bounded
        );
    }

    #[test]
    fn render_square_map_disc() {
        let s = DynSetup::new(Polynomial::power(2).unwrap())
            .unwrap()
            .with_max_iter(DEFAULT_RENDER_ITER);
        let img = render(&s, ComplexBox::centered(2.0).unwrap(), 40, 40).unwrap();
        let pitch = img.grid.pitch();
        for row in 0..40 {
            for col in 0..40 {
                let z = img.grid.center(col, row);
                let bounded = img.get(col, row) == 0;
                if z.norm() < 1.0 - pitch {
                    assert!(bounded, "{z}");
                }
                if z.norm() > 1.0 + pitch {
                    assert!(!bounded, "{z}");
                }
            }
        }
    }

    #[test]
    fn render_chebyshev_bounded_only_near_interval() {
        let s = DynSetup::new(Polynomial::chebyshev2())
            .unwrap()
            .with_max_iter(DEFAULT_RENDER_ITER);
        for n in [64usize, 65] {
            let bbox = ComplexBox::centered(3.0).unwrap();
            let img = render(&s, bbox, n, n).unwrap();
            let pitch = img.grid.pitch();
            let mut bounded_rows = std::collections::BTreeSet::new();
            for row in 0..n {
                for col in 0..n {
                    if img.get(col, row) == 0 {
                        let z = img.grid.center(col, row);
                        assert!(z.im.abs() < pitch && z.re.abs() <= 2.0 + pitch, "{z}");
                        bounded_rows.insert(row);
                    }
                }
            }
            if n % 2 == 1 {
                // the middle row sits on the real axis and meets [-2, 2]
                assert_eq!(bounded_rows.into_iter().collect::<Vec<_>>(), vec![n / 2]);
            }
        }
    }

    #[test]
    fn pgm_roundtrip() {
        let s = DynSetup::new(Polynomial::power(2).unwrap()).unwrap();
        let img = render(&s, ComplexBox::centered(2.0).unwrap(), 7, 5).unwrap();
        let mut bytes = Vec::new();
        img.write_pgm(&mut bytes).unwrap();
        assert!(bytes.starts_with(b"P5\n7 5\n255\n"));
        let (w, h, data) = read_pgm(&bytes[..]).unwrap();
        assert_eq!((w, h), (7, 5));
        assert_eq!(data, img.values);
    }

    #[test]
    fn pgm_comments_are_skipped() {
        let mut bytes = Vec::new();
        write_pgm_with_comments(&mut bytes, 2, 1, &[35, 10], &["poly = z^2".into()]).unwrap();
        assert_eq!(&bytes[..], b"P5\n# poly = z^2\n2 1\n255\n#\n");
        assert_eq!(read_pgm(&bytes[..]).unwrap(), (2, 1, vec![35, 10]));
    }

    #[test]
    fn render_is_thread_count_independent() {
        let s = DynSetup::new(Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap())
            .unwrap()
            .with_max_iter(64);
        let bbox = ComplexBox::centered(2.0).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| render(&s, bbox, 97, 61).unwrap())
        };
        assert_eq!(run(1).values, run(4).values);
    }
}
