//! Complex polynomials: evaluation, differentiation, orbit derivatives and a
//! simultaneous (Aberth–Ehrlich) root finder.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::dd::ComplexDD;
use crate::error::{Error, Result};

/// A point of the dynamical plane.
pub type ComplexPoint = Complex64;

/// Arithmetic mode for root polishing and derivative accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Double,
    DoubleDouble,
}

const MAX_ABERTH_ITER: usize = 500;
/// Fixed irrational rotation of the starting circle (fractional part of the golden ratio).
const START_ROTATION: f64 = 0.618_033_988_749_894_8;
/// Roots closer than this multiple of the Cauchy bound are merged.
const MERGE_FACTOR: f64 = 1e-9;

/// A root together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub z: ComplexPoint,
    pub multiplicity: usize,
}

/// Result of iterating a polynomial along an orbit while accumulating the
/// derivative of the iterate by the chain rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitDerivative {
    pub point: ComplexPoint,
    pub derivative: Complex64,
    /// Set when the orbit (or the derivative) overflowed to a non-finite value.
    pub overflowed: bool,
}

/// Complex polynomial, coefficients indexed by power.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial(")?;
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})z^{k}")?;
        }
        write!(f, ")")
    }
}

impl Polynomial {
    /// Builds a polynomial from coefficients `a_0, a_1, ..., a_d`. Trailing
    /// zero coefficients are dropped; the zero polynomial is rejected.
    pub fn new(coeffs: impl Into<Vec<Complex64>>) -> Result<Self> {
        let mut coeffs = coeffs.into();
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs[coeffs.len() - 1].norm() == 0.0 {
            return Err(Error::InvalidInput("zero polynomial".into()));
        }
        Ok(Polynomial { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Polynomial::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect::<Vec<_>>())
    }

    /// `z^d`.
    pub fn power(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("power map needs d >= 1".into()));
        }
        let mut c = vec![Complex64::new(0.0, 0.0); d + 1];
        c[d] = Complex64::new(1.0, 0.0);
        Polynomial::new(c)
    }

    /// The quadratic Chebyshev map `z^2 - 2`.
    pub fn chebyshev2() -> Self {
        Polynomial::from_real(&[-2.0, 0.0, 1.0]).expect("valid")
    }

    /// `eps z^3 + z^2 - beta`; quadratic when `eps == 0`.
    pub fn cubic_family(eps: f64, beta: f64) -> Result<Self> {
        Polynomial::from_real(&[-beta, 0.0, 1.0, eps])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    /// Horner evaluation.
    #[inline]
    pub fn eval(&self, z: ComplexPoint) -> ComplexPoint {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Horner evaluation of the value and first derivative together.
    #[inline]
    pub fn eval_with_derivative(&self, z: ComplexPoint) -> (ComplexPoint, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn eval_dd(&self, z: ComplexDD) -> ComplexDD {
        let mut acc = ComplexDD::ZERO;
        for c in self.coeffs.iter().rev() {
            acc = acc * z + ComplexDD::from(*c);
        }
        acc
    }

    /// Upper bound of `sum |a_k| |z|^k`, the natural scale of `p(z)` rounding errors.
    pub fn eval_scale(&self, z: ComplexPoint) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    /// Formal derivative. A constant differentiates to the zero constant.
    pub fn derivative(&self) -> Polynomial {
        if self.degree() == 0 {
            // d/dz c = 0; represent it by an explicit zero constant.
            return Polynomial {
                coeffs: vec![Complex64::new(0.0, 0.0)],
            };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        Polynomial { coeffs }
    }

    /// Returns `(f^n(z), (f^n)'(z))`.
    pub fn orbit_derivative(&self, z: ComplexPoint, n: usize) -> OrbitDerivative {
        let mut point = z;
        let mut derivative = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            let (p, dp) = self.eval_with_derivative(point);
            derivative *= dp;
            point = p;
            if !point.re.is_finite()
                || !point.im.is_finite()
                || !derivative.re.is_finite()
                || !derivative.im.is_finite()
            {
                return OrbitDerivative {
                    point: Complex64::new(f64::INFINITY, 0.0),
                    derivative: Complex64::new(f64::INFINITY, 0.0),
                    overflowed: true,
                };
            }
        }
        OrbitDerivative {
            point,
            derivative,
            overflowed: false,
        }
    }

    /// Cauchy bound `1 + max_k |a_k / a_d|`; every root lies in the closed disc of this radius.
    pub fn cauchy_bound(&self) -> f64 {
        let lead = self.leading().norm();
        1.0 + self.coeffs[..self.degree()]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max)
    }

    /// All roots with multiplicity, sorted by argument then modulus.
    pub fn roots(&self, tol: f64) -> Result<Vec<Root>> {
        self.roots_with(tol, Precision::Double)
    }

    pub fn roots_with(&self, tol: f64, precision: Precision) -> Result<Vec<Root>> {
        if self.degree() == 0 {
            return Err(Error::InvalidInput("constant polynomial has no roots".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        aberth(self, tol, precision)
    }

    /// Roots of `p(w) = target`, i.e. the preimages of `target`.
    pub fn preimages(&self, target: ComplexPoint, tol: f64, precision: Precision) -> Result<Vec<Root>> {
        self.shifted(target).roots_with(tol, precision)
    }

    /// `p - target`.
    pub fn shifted(&self, target: ComplexPoint) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] -= target;
        Polynomial { coeffs }
    }

    /// Roots of the derivative, with multiplicity.
    pub fn critical_points(&self, tol: f64) -> Result<Vec<Root>> {
        if self.degree() < 2 {
            return Err(Error::InvalidInput("critical points need degree >= 2".into()));
        }
        self.derivative().roots(tol)
    }

    /// Critical points expanded by multiplicity.
    pub fn critical_point_list(&self, tol: f64) -> Result<Vec<ComplexPoint>> {
        Ok(expand_roots(&self.critical_points(tol)?))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        let coeffs = (0..n)
            .map(|k| self.coeffs.get(k).copied().unwrap_or(zero) + rhs.coeffs.get(k).copied().unwrap_or(zero))
            .collect::<Vec<_>>();
        Polynomial::new(coeffs.clone()).unwrap_or(Polynomial { coeffs: vec![zero] })
    }
}

impl Mul<&Polynomial> for Complex64 {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let coeffs: Vec<_> = rhs.coeffs.iter().map(|c| c * self).collect();
        Polynomial::new(coeffs).unwrap_or(Polynomial {
            coeffs: vec![Complex64::new(0.0, 0.0)],
        })
    }
}

/// Repeats each root according to its multiplicity.
pub fn expand_roots(roots: &[Root]) -> Vec<ComplexPoint> {
    roots
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.z, r.multiplicity))
        .collect()
}

/// Total order on points: by argument, then modulus.
pub fn angle_order(a: &ComplexPoint, b: &ComplexPoint) -> Ordering {
    a.arg().total_cmp(&b.arg()).then_with(|| a.norm().total_cmp(&b.norm()))
}

fn aberth(p: &Polynomial, tol: f64, precision: Precision) -> Result<Vec<Root>> {
    let d = p.degree();
    let lead = p.leading();
    let monic: Vec<Complex64> = p.coeffs.iter().map(|c| c / lead).collect();
    let monic = Polynomial { coeffs: monic };
    let bound = monic.cauchy_bound();

    if d == 1 {
        let z = -monic.coeffs[0];
        return Ok(vec![Root { z, multiplicity: 1 }]);
    }

    // Start on a circle around the root centroid.
    let center = -monic.coeffs[d - 1] / d as f64;
    let radius = {
        let shifted_const = monic.eval(center).norm();
        let r = shifted_const.powf(1.0 / d as f64);
        if r.is_finite() && r > 0.0 {
            r
        } else {
            bound
        }
    };
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let theta = TAU * (k as f64 + START_ROTATION) / d as f64 + START_ROTATION;
            center + Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut converged = vec![false; d];
    let mut iterations = 0;
    while iterations < MAX_ABERTH_ITER && converged.iter().any(|c| !c) {
        iterations += 1;
        for i in 0..d {
            if converged[i] {
                continue;
            }
            let (v, dv) = monic.eval_with_derivative(z[i]);
            if v.norm() == 0.0 {
                converged[i] = true;
                continue;
            }
            let newton = v / dv;
            let repulsion: Complex64 = (0..d)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = z[i] - z[j];
                    if diff.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        diff.inv()
                    }
                })
                .sum();
            let mut step = newton / (Complex64::new(1.0, 0.0) - newton * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                step = if newton.re.is_finite() && newton.im.is_finite() {
                    newton
                } else {
                    Complex64::new(bound * 1e-3, 0.0)
                };
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                converged[i] = true;
            }
        }
    }

    // Merge clusters into multiple roots (centroid of the cluster).
    let merge_radius = MERGE_FACTOR * bound;
    let mut roots: Vec<Root> = Vec::with_capacity(d);
    let mut used = vec![false; d];
    for i in 0..d {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![z[i]];
        let mut grew = true;
        while grew {
            grew = false;
            for j in 0..d {
                if !used[j] && members.iter().any(|m| (m - z[j]).norm() <= merge_radius) {
                    used[j] = true;
                    members.push(z[j]);
                    grew = true;
                }
            }
        }
        let centroid = members.iter().sum::<Complex64>() / members.len() as f64;
        roots.push(Root {
            z: centroid,
            multiplicity: members.len(),
        });
    }

    // Newton polish simple roots.
    for r in roots.iter_mut().filter(|r| r.multiplicity == 1) {
        r.z = polish(&monic, r.z, precision);
    }

    let mut worst = 0.0f64;
    for r in &roots {
        let scale = monic.eval_scale(r.z).max(1.0);
        let residual = match precision {
            Precision::Double => monic.eval(r.z).norm(),
            Precision::DoubleDouble => monic.eval_dd(r.z.into()).to_complex().norm(),
        };
        worst = worst.max(residual / scale);
    }
    if !(worst <= tol) {
        return Err(Error::NonConvergence {
            iterations,
            residual: worst,
        });
    }

    roots.sort_by(|a, b| angle_order(&a.z, &b.z));
    Ok(roots)
}

fn polish(p: &Polynomial, mut z: Complex64, precision: Precision) -> Complex64 {
    let residual = |w: Complex64| match precision {
        Precision::Double => p.eval(w),
        Precision::DoubleDouble => p.eval_dd(w.into()).to_complex(),
    };
    let mut best = residual(z).norm();
    for _ in 0..3 {
        if best == 0.0 {
            break;
        }
        let (_, dv) = p.eval_with_derivative(z);
        if dv.norm() == 0.0 {
            break;
        }
        let candidate = z - residual(z) / dv;
        let r = residual(candidate).norm();
        if r < best {
            best = r;
            z = candidate;
        } else {
            break;
        }
    }
    z
}
