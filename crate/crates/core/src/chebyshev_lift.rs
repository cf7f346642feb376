//! The Zhukovsky covering `Π(z) = (z + 1/z)/2`, the circle lift `G` of
//! interval Chebyshev dynamics, and numerical checks of the transfer
//! identity relating derivative sums of `F` and of `G`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::polynomial::{ComplexPoint, Polynomial};
use crate::pressure::{preimage_tree, DEFAULT_TREE_TOL};
use crate::sampling::halton;

/// Lifted points closer than this to `±1` make `Π'` vanish.
pub const RAMIFICATION_TOL: f64 = 1e-9;
/// Coefficient tolerance for accepting a normalized map as exactly `±T_k`.
pub const EXACT_TOL: f64 = 1e-12;
/// Itinerary length used by the conjugacy check.
pub const ITINERARY_LEN: usize = 48;

pub fn zhukovsky(z: ComplexPoint) -> Result<ComplexPoint> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroInput);
    }
    Ok(0.5 * (z + z.inv()))
}

/// `Π'(z) = (1 - 1/z^2)/2`.
pub fn zhukovsky_derivative(z: ComplexPoint) -> ComplexPoint {
    0.5 * (Complex64::new(1.0, 0.0) - (z * z).inv())
}

/// The preimage of `x` under `Π` inside the closed unit disc.
pub fn zhukovsky_inverse(x: ComplexPoint) -> ComplexPoint {
    let s = (x * x - 1.0).sqrt();
    let (a, b) = (x + s, x - s);
    if a.norm() <= b.norm() {
        a
    } else {
        b
    }
}

/// Chebyshev polynomial `T_k` on `[-1, 1]`, via the three-term recurrence.
pub fn chebyshev_t(k: usize) -> Result<Polynomial> {
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 1.0];
    if k == 0 {
        return Polynomial::from_real(&prev);
    }
    for _ in 1..k {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, &c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    Polynomial::from_real(&cur)
}

/// Coefficients of `p(a w + b)`.
pub fn compose_affine(p: &Polynomial, a: Complex64, b: Complex64) -> Result<Polynomial> {
    let coeffs = p.coeffs();
    let mut acc = vec![coeffs[coeffs.len() - 1]];
    for &c in coeffs[..coeffs.len() - 1].iter().rev() {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, &v) in acc.iter().enumerate() {
            next[i] += v * b;
            next[i + 1] += v * a;
        }
        next[0] += c;
        acc = next;
    }
    Polynomial::new(acc)
}

/// The affine change of variable sending `[alpha, omega]` to `[-1, 1]` and
/// the map it conjugates `p` to.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub alpha: f64,
    pub omega: f64,
    /// `q = A ∘ p ∘ A^{-1}`.
    pub q: Polynomial,
    /// Degree of the Chebyshev model on the interval.
    pub k: usize,
    /// `+1` for `T_k`, `-1` for `-T_k`.
    pub sign: f64,
    /// Largest coefficient difference between `q` and `sign * T_k`
    /// (infinite when the degrees differ).
    pub model_residual: f64,
}

impl Normalization {
    /// `A(z) = (2z - alpha - omega) / (omega - alpha)`.
    pub fn to_unit(&self, z: ComplexPoint) -> ComplexPoint {
        (2.0 * z - (self.alpha + self.omega)) / (self.omega - self.alpha)
    }

    pub fn from_unit(&self, w: ComplexPoint) -> ComplexPoint {
        0.5 * ((self.omega - self.alpha) * w + (self.alpha + self.omega))
    }

    pub fn is_exact(&self) -> bool {
        self.model_residual <= EXACT_TOL
    }

    /// Interval point conjugating `q` to `sign * T_k` (for `k = 2`), from
    /// the itinerary of `w` relative to the turning point `turn`.
    pub fn conjugacy(&self, w: f64, turn: f64) -> f64 {
        let mut bits = Vec::with_capacity(ITINERARY_LEN);
        let mut z = w;
        for _ in 0..ITINERARY_LEN {
            bits.push(z < turn);
            z = self.q.eval(Complex64::new(z, 0.0)).re.clamp(-1.0, 1.0);
        }
        // Inverse tent-map steps on the angle variable θ, with w = cos(πθ).
        let mut theta = 0.5;
        for &left in bits.iter().rev() {
            theta = if left { 1.0 - theta / 2.0 } else { theta / 2.0 };
        }
        (std::f64::consts::PI * theta).cos()
    }
}

/// Normalizes `p` on its invariant interval `[alpha, omega]`. The
/// restriction to the interval must have degree 2.
pub fn normalize_to_chebyshev(
    p: &Polynomial,
    alpha: f64,
    omega: f64,
    restriction_degree: usize,
) -> Result<Normalization> {
    if restriction_degree != 2 {
        return Err(Error::NotDegreeTwo(restriction_degree));
    }
    if !(omega > alpha) {
        return Err(Error::InvalidInput(format!("empty interval [{alpha}, {omega}]")));
    }
    let half = Complex64::new((omega - alpha) / 2.0, 0.0);
    let mid = Complex64::new((alpha + omega) / 2.0, 0.0);
    let inner = compose_affine(p, half, mid)?;
    let coeffs: Vec<Complex64> = inner
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, &c)| if i == 0 { (c - mid) / half } else { c / half })
        .collect();
    let q = Polynomial::new(coeffs)?;
    let sign = q.eval(Complex64::new(1.0, 0.0)).re.signum();
    let model = chebyshev_t(restriction_degree)?;
    let model_residual = if q.degree() == model.degree() {
        q.coeffs()
            .iter()
            .zip(model.coeffs())
            .map(|(a, b)| (a - sign * b).norm())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(Normalization {
        alpha,
        omega,
        q,
        k: restriction_degree,
        sign,
        model_residual,
    })
}

/// Maximum of `|h(q(w)) - T(h(w))|` over `samples` points of `[-1, 1]`,
/// plus the number of monotonicity violations of `h` on the sorted samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugacyCheck {
    pub residual: f64,
    pub monotonicity_violations: usize,
    pub endpoint_error: f64,
}

pub fn conjugacy_check(norm: &Normalization, samples: usize) -> Result<ConjugacyCheck> {
    if norm.k != 2 {
        return Err(Error::NotDegreeTwo(norm.k));
    }
    let crit = norm
        .q
        .critical_points(1e-14)?
        .into_iter()
        .map(|r| r.z)
        .filter(|z| z.im.abs() < 1e-9 && z.re.abs() < 1.0)
        .collect::<Vec<_>>();
    if crit.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "expected one interior turning point, found {}",
            crit.len()
        )));
    }
    let turn = crit[0].re;
    let model = chebyshev_t(2)?;
    let t = |w: f64| norm.sign * model.eval(Complex64::new(w, 0.0)).re;
    let mut residual = 0.0f64;
    let mut violations = 0;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..samples {
        // Strictly increasing interior points.
        let w = -1.0 + 2.0 * (i as f64 + 0.5) / samples as f64;
        let hw = norm.conjugacy(w, turn);
        let qw = norm.q.eval(Complex64::new(w, 0.0)).re.clamp(-1.0, 1.0);
        residual = residual.max((norm.conjugacy(qw, turn) - t(hw)).abs());
        if norm.sign > 0.0 && hw < prev - 1e-12 {
            violations += 1;
        }
        prev = hw;
    }
    // With sign +1 the conjugacy fixes the endpoints and sends the turning
    // point to 0.
    let endpoint_error = (norm.conjugacy(1.0, turn) - 1.0)
        .abs()
        .max((norm.conjugacy(-1.0, turn) + 1.0).abs())
        .max(norm.conjugacy(turn, turn).abs());
    Ok(ConjugacyCheck {
        residual,
        monotonicity_violations: violations,
        endpoint_error,
    })
}

/// Exact interval Chebyshev dynamics `F` together with its circle lift `G(z) = ±z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSystem {
    /// The map in its original coordinates.
    pub f: Polynomial,
    pub norm: Normalization,
}

impl LiftedSystem {
    pub fn new(f: Polynomial, norm: Normalization) -> Result<Self> {
        if !norm.is_exact() {
            return Err(Error::InvalidInput(format!(
                "normalized map differs from ±T_{} by {:e}",
                norm.k, norm.model_residual
            )));
        }
        Ok(LiftedSystem { f, norm })
    }

    /// `z^2 - 2` on `[-2, 2]`.
    pub fn chebyshev2() -> Self {
        let f = Polynomial::chebyshev2();
        let norm = normalize_to_chebyshev(&f, -2.0, 2.0, 2).expect("valid interval");
        LiftedSystem::new(f, norm).expect("z^2 - 2 is exactly Chebyshev")
    }

    pub fn g(&self, z: ComplexPoint) -> ComplexPoint {
        self.norm.sign * z.powu(self.norm.k as u32)
    }

    pub fn q(&self, w: ComplexPoint) -> ComplexPoint {
        self.norm.q.eval(w)
    }

    /// All `v` with `G^n(v) = w`, with `|(G^n)'(v)|`.
    pub fn lift_preimages(&self, w: ComplexPoint, n: usize) -> Vec<(ComplexPoint, f64)> {
        let k = self.norm.k;
        let mut nodes = vec![(w, 1.0f64)];
        for _ in 0..n {
            let mut next = Vec::with_capacity(nodes.len() * k);
            for &(u, d) in &nodes {
                // v^k = sign * u
                let (r, theta) = (self.norm.sign * u).to_polar();
                let root_r = r.powf(1.0 / k as f64);
                for j in 0..k {
                    let v = Complex64::from_polar(root_r, (theta + 2.0 * std::f64::consts::PI * j as f64) / k as f64);
                    let dv = k as f64 * root_r.powi(k as i32 - 1);
                    next.push((v, d * dv));
                }
            }
            nodes = next;
        }
        nodes
    }

    /// `Σ_{G^n(v) = w} |(G^n)'(v)|^{-1}`.
    pub fn circle_sum(&self, w: ComplexPoint, n: usize) -> f64 {
        self.lift_preimages(w, n).iter().map(|&(_, d)| 1.0 / d).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCheck {
    pub x: ComplexPoint,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
}

/// Compares `Σ |(F^n)'(y)|^{-1}` with the lifted sum
/// `|Π'(w)|^{-1} Σ |Π'(v)| / |(G^n)'(v)|`, where `w = Π^{-1}(A x)` lies in
/// the unit disc.
pub fn verify_transfer_identity(sys: &LiftedSystem, x: ComplexPoint, n: usize) -> Result<TransferCheck> {
    let tree = preimage_tree(&sys.f, x, n, DEFAULT_TREE_TOL)?;
    let lhs = tree.log_sum(n, 1.0).exp();
    let w = zhukovsky_inverse(sys.norm.to_unit(x));
    let mut terms = Vec::with_capacity(1 << n);
    for (v, dg) in sys.lift_preimages(w, n) {
        let ram = (v - 1.0).norm().min((v + 1.0).norm());
        if ram < RAMIFICATION_TOL {
            return Err(Error::RamificationHit(ram));
        }
        terms.push(zhukovsky_derivative(v).norm() / dg);
    }
    let dw = zhukovsky_derivative(w).norm();
    if dw < RAMIFICATION_TOL {
        return Err(Error::RamificationHit(dw));
    }
    let rhs = crate::pressure::neumaier_sum(terms) / dw;
    Ok(TransferCheck {
        x,
        n,
        lhs,
        rhs,
        rel_error: (lhs - rhs).abs() / lhs.abs().max(rhs.abs()),
    })
}

/// Base points `x = A^{-1}(Π(w))` for `w` in the annulus `0.3 <= |w| <= 0.95`,
/// taken from the Halton sequence.
pub fn transfer_samples(sys: &LiftedSystem, count: usize) -> Vec<ComplexPoint> {
    (1..=count as u64)
        .map(|i| {
            let (u, v) = halton(i);
            let w = Complex64::from_polar(0.3 + 0.65 * u, 2.0 * std::f64::consts::PI * v);
            sys.norm.from_unit(zhukovsky(w).expect("w is nonzero"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zhukovsky_examples() {
        assert_eq!(zhukovsky(c(1.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(zhukovsky(c(-1.0, 0.0)).unwrap(), c(-1.0, 0.0));
        assert_eq!(zhukovsky(c(2.0, 0.0)).unwrap(), c(1.25, 0.0));
        let th = 0.7f64;
        assert!((zhukovsky(Complex64::from_polar(1.0, th)).unwrap() - c(th.cos(), 0.0)).norm() < 1e-15);
        assert_eq!(zhukovsky(c(0.0, 0.0)).unwrap_err(), Error::ZeroInput);
    }

    #[test]
    fn inverse_branch_inside_disc() {
        for x in [c(0.5, 0.3), c(-3.0, 0.1), c(0.0, -2.0)] {
            let w = zhukovsky_inverse(x);
            assert!(w.norm() <= 1.0);
            assert!((zhukovsky(w).unwrap() - x).norm() < 1e-13);
        }
    }

    #[test]
    fn chebyshev_recurrence() {
        let t2 = chebyshev_t(2).unwrap();
        assert_eq!(t2.coeffs(), &[c(-1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let t3 = chebyshev_t(3).unwrap();
        for th in [0.1f64, 1.0, 2.5] {
            assert!((t3.eval(c(th.cos(), 0.0)).re - (3.0 * th).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn z2_minus_2_normalizes_exactly() {
        let n = normalize_to_chebyshev(&Polynomial::chebyshev2(), -2.0, 2.0, 2).unwrap();
        assert_eq!(n.q.coeffs(), &[c(-1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(n.sign, 1.0);
        assert!(n.is_exact());
        assert_eq!(
            normalize_to_chebyshev(&Polynomial::chebyshev2(), -2.0, 2.0, 3).unwrap_err(),
            Error::NotDegreeTwo(3)
        );
    }

    #[test]
    fn semiconjugacy_on_circle() {
        let sys = LiftedSystem::chebyshev2();
        for i in 0..10_000 {
            let z = Complex64::from_polar(1.0, i as f64 * 0.000_628_3);
            let lhs = sys.q(zhukovsky(z).unwrap());
            let rhs = zhukovsky(sys.g(z)).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn transfer_identity_single_step_by_hand() {
        // n = 1: the two preimages of x under z^2 - 2 are ±sqrt(x + 2).
        let sys = LiftedSystem::chebyshev2();
        let x = c(0.7, 0.1);
        let y = (x + 2.0).sqrt();
        let lhs = 2.0 / (2.0 * y).norm();
        let t = verify_transfer_identity(&sys, x, 1).unwrap();
        assert!((t.lhs - lhs).abs() < 1e-14);
        assert!(t.rel_error < 1e-10);
    }

    #[test]
    fn circle_sum_is_one() {
        let sys = LiftedSystem::chebyshev2();
        for n in 1..=10 {
            let s = sys.circle_sum(Complex64::from_polar(1.0, 0.4), n);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ramification_detected() {
        let sys = LiftedSystem::chebyshev2();
        // x = 2 lifts to w = 1, itself a ramification point.
        assert!(matches!(
            verify_transfer_identity(&sys, c(2.0, 0.0), 2),
            Err(Error::RamificationHit(_))
        ));
    }

    #[test]
    fn minus_chebyshev_lift() {
        // -z^2 + 2 on [-2, 2] normalizes to 1 - 2w^2 = -T_2.
        let f = Polynomial::from_real(&[2.0, 0.0, -1.0]).unwrap();
        let n = normalize_to_chebyshev(&f, -2.0, 2.0, 2).unwrap();
        assert_eq!(n.sign, -1.0);
        assert!(n.is_exact());
        let sys = LiftedSystem::new(f, n).unwrap();
        let z = Complex64::from_polar(1.0, 0.9);
        assert!((sys.q(zhukovsky(z).unwrap()) - zhukovsky(sys.g(z)).unwrap()).norm() < 1e-14);
        let t = verify_transfer_identity(&sys, c(0.4, 0.3), 5).unwrap();
        assert!(t.rel_error < 1e-9, "{t:?}");
    }

    #[test]
    fn chebyshev_is_its_own_conjugacy() {
        let n = normalize_to_chebyshev(&Polynomial::chebyshev2(), -2.0, 2.0, 2).unwrap();
        let check = conjugacy_check(&n, 1000).unwrap();
        assert!(check.residual < 1e-9);
        assert_eq!(check.monotonicity_violations, 0);
        // h is the identity for q = T_2
        assert!((n.conjugacy(0.3, 0.0) - 0.3).abs() < 1e-9);
    }
}
