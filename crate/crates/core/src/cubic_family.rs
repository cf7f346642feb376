//! The family `f(z) = εz³ + z² − β`: the repelling fixed point `p` near 2,
//! the curve `Γ` on which `f²(0) = p`, and a full check that the component
//! of the filled Julia set containing 0 is the interval `[−β, p]`.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::chebyshev_lift::{conjugacy_check, normalize_to_chebyshev, ConjugacyCheck};
use crate::components::{component_chain, first_poly_like, ComponentAtlas, DEFAULT_LEVEL_CAP};
use crate::error::{Error, Result};
use crate::escape::{classify, connectivity_class, Connectivity, DynSetup, OrbitClass};
use crate::grid::{ComplexBox, PixelGrid};
use crate::polynomial::Polynomial;

/// Continuation step in ε along the curve.
pub const CONTINUATION_STEP: f64 = 0.005;
/// Largest |ε| reached by continuation.
pub const CONTINUATION_LIMIT: f64 = 0.15;
const NEWTON_MAX_ITER: usize = 60;
/// Residual required of points on the curve.
pub const GAMMA_TOL: f64 = 1e-12;

fn newton_error(what: &str, eps: f64, beta: f64) -> Error {
    Error::NewtonDiverged(format!("{what} at eps = {eps}, beta = {beta}"))
}

/// `ε p³ + p² − p − β = 0`, solved by Newton from 2.
pub fn fixed_point_near_2(eps: f64, beta: f64) -> Result<f64> {
    if !(eps.abs() < 0.2 && (beta - 2.0).abs() < 1.5) {
        return Err(Error::InvalidInput(format!(
            "(eps, beta) = ({eps}, {beta}) is too far from (0, 2)"
        )));
    }
    let g = |z: f64| ((eps * z + 1.0) * z - 1.0) * z - beta;
    let dg = |z: f64| (3.0 * eps * z + 2.0) * z - 1.0;
    let mut z = 2.0f64;
    for _ in 0..NEWTON_MAX_ITER {
        let step = g(z) / dg(z);
        z -= step;
        if !z.is_finite() {
            break;
        }
        if step.abs() <= 1e-15 * z.abs() {
            let multiplier = (3.0 * eps * z + 2.0) * z;
            if multiplier.abs() <= 1.0 {
                return Err(Error::NotRepelling {
                    point: z,
                    multiplier: multiplier.abs(),
                });
            }
            return Ok(z);
        }
    }
    Err(newton_error("fixed point", eps, beta))
}

/// `(∂p/∂ε, ∂p/∂β)` by implicit differentiation.
pub fn fixed_point_gradient(eps: f64, beta: f64) -> Result<(f64, f64)> {
    let p = fixed_point_near_2(eps, beta)?;
    let denom = (3.0 * eps * p + 2.0) * p - 1.0;
    Ok((-p * p * p / denom, 1.0 / denom))
}

/// `γ(ε, β) = f²(0) = −εβ³ + β² − β`.
pub fn gamma(eps: f64, beta: f64) -> f64 {
    ((-eps * beta + 1.0) * beta - 1.0) * beta
}

/// `(∂γ/∂ε, ∂γ/∂β)`.
pub fn gamma_gradient(eps: f64, beta: f64) -> (f64, f64) {
    (-beta * beta * beta, -3.0 * eps * beta * beta + 2.0 * beta - 1.0)
}

/// `γ(ε, β) − p(ε, β)`.
pub fn gamma_residual(eps: f64, beta: f64) -> Result<f64> {
    Ok(gamma(eps, beta) - fixed_point_near_2(eps, beta)?)
}

/// Central finite-difference gradient of `g` at `(eps, beta)`.
pub fn central_gradient(g: impl Fn(f64, f64) -> Result<f64>, eps: f64, beta: f64, h: f64) -> Result<(f64, f64)> {
    Ok((
        (g(eps + h, beta)? - g(eps - h, beta)?) / (2.0 * h),
        (g(eps, beta + h)? - g(eps, beta - h)?) / (2.0 * h),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyPoint {
    pub eps: f64,
    pub beta: f64,
    pub p: f64,
    /// `|f²(0) − p|`.
    pub residual: f64,
    pub on_gamma: bool,
}

impl FamilyPoint {
    pub fn new(eps: f64, beta: f64) -> Result<Self> {
        let p = fixed_point_near_2(eps, beta)?;
        let residual = (gamma(eps, beta) - p).abs();
        Ok(FamilyPoint {
            eps,
            beta,
            p,
            residual,
            on_gamma: residual < 1e-11,
        })
    }

    pub fn polynomial(&self) -> Result<Polynomial> {
        Polynomial::cubic_family(self.eps, self.beta)
    }

    /// The free critical point `−2/(3ε)`.
    pub fn escaping_critical_point(&self) -> f64 {
        -2.0 / (3.0 * self.eps)
    }
}

/// Newton in β on `γ − p` at fixed ε, from `beta0`.
fn newton_beta(eps: f64, beta0: f64, tol: f64) -> Result<f64> {
    let mut beta = beta0;
    for _ in 0..NEWTON_MAX_ITER {
        let r = gamma_residual(eps, beta).map_err(|_| newton_error("curve", eps, beta))?;
        if r.abs() < tol {
            return Ok(beta);
        }
        let (_, dp) = fixed_point_gradient(eps, beta)?;
        let (_, dg) = gamma_gradient(eps, beta);
        let step = r / (dg - dp);
        beta -= step;
        if !beta.is_finite() {
            break;
        }
        if step.abs() < 1e-16 * beta.abs() {
            let r = gamma_residual(eps, beta)?;
            if r.abs() < tol {
                return Ok(beta);
            }
            break;
        }
    }
    Err(newton_error("curve", eps, beta0))
}

/// The point of `Γ` above `eps`, by continuation from `(0, 2)` in steps of
/// [`CONTINUATION_STEP`].
pub fn gamma_solve(eps: f64, tol: f64) -> Result<FamilyPoint> {
    if !(eps.abs() < CONTINUATION_LIMIT) {
        return Err(newton_error("continuation range exceeded", eps, f64::NAN));
    }
    let steps = (eps.abs() / CONTINUATION_STEP).ceil() as usize;
    let mut beta = 2.0;
    for i in 1..=steps {
        let e = if i == steps {
            eps
        } else {
            eps.signum() * CONTINUATION_STEP * i as f64
        };
        beta = newton_beta(e, beta, tol)?;
    }
    FamilyPoint::new(eps, beta)
}

/// Samples of `Γ` at `eps_min, eps_min + step, ..., <= eps_max`, continued
/// sequentially from `(0, 2)`.
pub fn gamma_curve(eps_min: f64, eps_max: f64, step: f64, tol: f64) -> Result<Vec<FamilyPoint>> {
    if !(step > 0.0) || eps_max < eps_min {
        return Err(Error::InvalidInput(format!(
            "bad curve range {eps_min}:{eps_max}:{step}"
        )));
    }
    let count = ((eps_max - eps_min) / step + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(count);
    let first = gamma_solve(eps_min, tol)?;
    let mut beta = first.beta;
    out.push(first);
    for i in 1..count {
        let eps = eps_min + step * i as f64;
        if !(eps.abs() < CONTINUATION_LIMIT) {
            return Err(newton_error("continuation range exceeded", eps, beta));
        }
        // Sub-steps keep each Newton start within the continuation step.
        let prev = eps - step;
        let sub = (step / CONTINUATION_STEP).ceil().max(1.0) as usize;
        for j in 1..=sub {
            beta = newton_beta(prev + step * j as f64 / sub as f64, beta, tol)?;
        }
        out.push(FamilyPoint::new(eps, beta)?);
    }
    Ok(out)
}

/// `dβ/dε` along `Γ` from the two gradients.
pub fn curve_slope(eps: f64, beta: f64) -> Result<f64> {
    let (ge, gb) = gamma_gradient(eps, beta);
    let (pe, pb) = fixed_point_gradient(eps, beta)?;
    Ok(-(ge - pe) / (gb - pb))
}

/// The parameter `b` with `f²(0) = 0` for `f = a z³ + z² − b`.
pub fn figure1_parameters(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 0.25) {
        if a >= 0.25 {
            return Err(Error::NoRealRoot(a));
        }
        return Err(Error::InvalidInput(format!("a = {a} must lie in (0, 0.25)")));
    }
    // (1 - sqrt(1 - 4a)) / (2a), rationalized to avoid cancellation.
    let b = 2.0 / (1.0 + (1.0 - 4.0 * a).sqrt());
    let residual = period_two_residual(a, b);
    if residual >= 1e-12 {
        return Err(Error::NewtonDiverged(format!(
            "period-2 residual {residual:e} at a = {a}"
        )));
    }
    Ok(b)
}

/// `|f²(0)|` for `f = a z³ + z² − b`.
pub fn period_two_residual(a: f64, b: f64) -> f64 {
    let f = |z: f64| (a * z + 1.0) * z * z - b;
    f(f(0.0)).abs()
}

/// Grid parameters of [`verify_example`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleOptions {
    pub resolution: usize,
    pub level: usize,
    pub m_cap: usize,
    /// Hausdorff threshold in pixel pitches.
    pub hausdorff_pitches: f64,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        ExampleOptions {
            resolution: 2048,
            level: 10,
            m_cap: DEFAULT_LEVEL_CAP,
            hausdorff_pitches: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: char,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleReport {
    pub point: FamilyPoint,
    pub radius: f64,
    pub grid: PixelGrid,
    pub checks: Vec<Check>,
    /// Hausdorff distance to the interval, in pixel pitches, per level.
    pub hausdorff: Vec<f64>,
    pub degree: Option<usize>,
    pub poly_like_level: Option<usize>,
    pub conjugacy: Option<ConjugacyCheck>,
}

impl ExampleReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "eps: {:.16e}", self.point.eps);
        let _ = writeln!(s, "beta: {:.16e}", self.point.beta);
        let _ = writeln!(s, "p: {:.16e}", self.point.p);
        let _ = writeln!(s, "gamma_residual: {:.16e}", self.point.residual);
        let _ = writeln!(s, "escape_radius: {:.16e}", self.radius);
        let b = self.grid.bbox;
        let _ = writeln!(
            s,
            "grid: {}x{} [{:.16e}, {:.16e}] x [{:.16e}, {:.16e}]",
            self.grid.width, self.grid.height, b.re_min, b.re_max, b.im_min, b.im_max
        );
        let _ = writeln!(s, "pitch: {:.16e}", self.grid.pitch());
        for (n, h) in self.hausdorff.iter().enumerate() {
            let _ = writeln!(s, "hausdorff_pitches_level_{n}: {h:.16e}");
        }
        if let Some(m) = self.poly_like_level {
            let _ = writeln!(s, "poly_like_level: {m}");
        }
        if let Some(d) = self.degree {
            let _ = writeln!(s, "poly_like_degree: {d}");
        }
        if let Some(c) = self.conjugacy {
            let _ = writeln!(s, "conjugacy_residual: {:.16e}", c.residual);
            let _ = writeln!(s, "conjugacy_monotonicity_violations: {}", c.monotonicity_violations);
            let _ = writeln!(s, "conjugacy_endpoint_error: {:.16e}", c.endpoint_error);
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "check_{}: {} ({}; {})",
                c.id,
                if c.pass { "pass" } else { "fail" },
                c.name,
                c.detail
            );
        }
        let _ = writeln!(
            s,
            "verdict: {}",
            if self.all_pass() {
                "all checks pass"
            } else {
                "some checks fail"
            }
        );
        s
    }
}

/// [`seed_grid`] around 0.
pub fn example_grid(setup: &DynSetup, resolution: usize) -> Result<PixelGrid> {
    seed_grid(setup, Complex64::new(0.0, 0.0), resolution)
}

/// Square box snapped so one pixel row lies on the real axis, covering the
/// level-1 component containing `seed` (found on a coarse grid over the
/// escape disc) with a margin.
pub fn seed_grid(setup: &DynSetup, seed: Complex64, resolution: usize) -> Result<PixelGrid> {
    let r = setup.radius;
    let coarse_res = 513;
    let coarse = PixelGrid::new(ComplexBox::on_real_axis(-r, r, r, coarse_res)?, coarse_res, coarse_res)?;
    let atlas = ComponentAtlas::build(setup, coarse, 1)?;
    let lg = atlas.level(1)?;
    let label = lg.label_at(seed);
    let info = lg.component(label).ok_or(Error::ResolutionTooCoarse { level: 1 })?;
    let b = info.bbox(&coarse);
    let half = 0.5 * (b.re_max - b.re_min).max(b.im_max - b.im_min) * 1.1;
    let center = 0.5 * (b.re_min + b.re_max);
    let bbox = ComplexBox::on_real_axis(center - half, center + half, half, resolution)?;
    PixelGrid::new(bbox, resolution, resolution)
}

/// Checks (a)–(g) that the component of `K(f)` containing 0 is `[−β, p]`.
pub fn verify_example(eps: f64, opts: &ExampleOptions) -> Result<ExampleReport> {
    if !(eps > 0.0 && eps <= 0.15) {
        return Err(Error::InvalidInput(format!("eps = {eps} must lie in (0, 0.15]")));
    }
    let point = gamma_solve(eps, GAMMA_TOL)?;
    let f = point.polynomial()?;
    let setup = DynSetup::new(f.clone())?;
    let (beta, p) = (point.beta, point.p);
    let fr = |x: f64| f.eval(Complex64::new(x, 0.0)).re;
    let scale = 1e-12 * p.abs().max(beta.abs());
    let mut checks = Vec::new();

    let a_res = (fr(0.0) + beta).abs();
    checks.push(Check {
        id: 'a',
        name: "f(0) = -beta",
        pass: a_res <= scale,
        detail: format!("residual {a_res:.3e}"),
    });

    let values = [fr(-beta), fr(p), fr(0.0)];
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-11 * p.abs().max(beta.abs());
    checks.push(Check {
        id: 'b',
        name: "f(I) within I",
        pass: lo >= -beta - slack && hi <= p + slack,
        detail: format!("image [{lo:.16e}, {hi:.16e}] vs I = [{:.16e}, {p:.16e}]", -beta),
    });

    let crit = f.critical_point_list(1e-12)?;
    let interior: Vec<f64> = crit
        .iter()
        .filter(|z| z.im.abs() < 1e-9 && z.re > -beta && z.re < p)
        .map(|z| z.re)
        .collect();
    checks.push(Check {
        id: 'c',
        name: "one critical point in the open interval",
        pass: interior.len() == 1 && interior[0].abs() < 1e-9,
        detail: format!("interior critical points {interior:?}"),
    });

    let c = point.escaping_critical_point();
    let fc = fr(c);
    let class = classify(&setup, Complex64::new(c, 0.0));
    checks.push(Check {
        id: 'd',
        name: "free critical point escapes",
        pass: fc > p && matches!(class, OrbitClass::Escaped(_)) && strictly_increasing_escape(&f, fc, setup.radius),
        detail: format!("c = {c:.16e}, f(c) = {fc:.16e}, class {class:?}"),
    });

    let conn = connectivity_class(&setup)?;
    checks.push(Check {
        id: 'e',
        name: "Julia set disconnected",
        pass: conn.class == Connectivity::Disconnected,
        detail: format!("{:?}", conn.class),
    });

    let grid = example_grid(&setup, opts.resolution)?;
    let atlas = ComponentAtlas::build(&setup, grid, opts.level)?;
    let chain = component_chain(&atlas, Complex64::new(0.0, 0.0), opts.level)?;
    let (ia, ib) = (Complex64::new(-beta, 0.0), Complex64::new(p, 0.0));
    let mut hausdorff = Vec::with_capacity(opts.level + 1);
    for n in 0..=opts.level {
        hausdorff.push(chain.mask(&atlas, n)?.hausdorff_to_segment(ia, ib) / grid.pitch());
    }
    // Nested sets approach I; allow one pitch of jitter between levels.
    let decreasing = hausdorff.windows(2).all(|w| w[1] <= w[0] + 1.0);
    let last = *hausdorff.last().expect("at least level 0");
    checks.push(Check {
        id: 'f',
        name: "component chain converges to I",
        pass: chain.all_nested() && decreasing && last < opts.hausdorff_pitches && last < hausdorff[1],
        detail: format!(
            "Hausdorff {last:.3} pitches at level {}, nested {}, decreasing {decreasing}",
            opts.level,
            chain.all_nested()
        ),
    });

    let restriction = first_poly_like(&setup, &atlas, &chain, opts.m_cap.min(opts.level - 1));
    let (degree, m) = match &restriction {
        Ok(r) => (Some(r.degree), Some(r.level)),
        Err(_) => (None, None),
    };
    checks.push(Check {
        id: 'g',
        name: "polynomial-like restriction has degree 2",
        pass: degree == Some(2),
        detail: match &restriction {
            Ok(r) => format!("m = {}, degree {}", r.level, r.degree),
            Err(e) => format!("{e}"),
        },
    });

    let conjugacy = normalize_to_chebyshev(&f, -beta, p, 2)
        .and_then(|n| conjugacy_check(&n, 2000))
        .ok();

    Ok(ExampleReport {
        point,
        radius: setup.radius,
        grid,
        checks,
        hausdorff,
        degree,
        poly_like_level: m,
        conjugacy,
    })
}

/// The real orbit from `x0 > p` increases strictly until it leaves the disc.
fn strictly_increasing_escape(f: &Polynomial, x0: f64, radius: f64) -> bool {
    let mut x = x0;
    for _ in 0..10_000 {
        if x > radius {
            return true;
        }
        let next = f.eval(Complex64::new(x, 0.0)).re;
        if !(next > x) {
            return false;
        }
        x = next;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_at_origin_parameters() {
        assert_eq!(fixed_point_near_2(0.0, 2.0).unwrap(), 2.0);
        assert!(matches!(fixed_point_near_2(0.5, 2.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn fixed_point_satisfies_equation() {
        for (eps, beta) in [(0.05, 2.1), (-0.1, 1.8), (0.12, 2.3)] {
            let p = fixed_point_near_2(eps, beta).unwrap();
            let r = eps * p * p * p + p * p - beta - p;
            assert!(r.abs() < 1e-12, "{r}");
            assert!(((3.0 * eps * p + 2.0) * p).abs() > 1.0);
        }
    }

    #[test]
    fn gradients_at_origin() {
        assert_eq!(gamma_gradient(0.0, 2.0), (-8.0, 3.0));
        let (pe, pb) = fixed_point_gradient(0.0, 2.0).unwrap();
        assert!((pe + 8.0 / 3.0).abs() < 1e-15 && (pb - 1.0 / 3.0).abs() < 1e-15);
        assert!((curve_slope(0.0, 2.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_residual_zero_at_origin() {
        assert_eq!(gamma_residual(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(gamma_solve(0.0, 1e-13).unwrap().beta, 2.0);
    }

    #[test]
    fn curve_point_is_on_gamma() {
        let pt = gamma_solve(0.05, 1e-13).unwrap();
        assert!(pt.residual < 1e-12);
        // f(f(0)) = p
        let f = pt.polynomial().unwrap();
        let z = f.eval(f.eval(Complex64::new(0.0, 0.0)));
        assert!((z.re - pt.p).abs() < 1e-12);
    }

    #[test]
    fn continuation_limit() {
        assert!(matches!(gamma_solve(0.2, 1e-12), Err(Error::NewtonDiverged(_))));
    }

    #[test]
    fn figure_one_parameter() {
        let b = figure1_parameters(0.215).unwrap();
        assert!((b - (1.0 - 0.14f64.sqrt()) / 0.43).abs() < 1e-14);
        assert!(period_two_residual(0.215, b) < 1e-12);
        assert_eq!(figure1_parameters(0.3).unwrap_err(), Error::NoRealRoot(0.3));
        assert!((figure1_parameters(1e-8).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_critical_value() {
        let pt = gamma_solve(0.05, 1e-13).unwrap();
        let f = pt.polynomial().unwrap();
        let c = pt.escaping_critical_point();
        let fc = f.eval(Complex64::new(c, 0.0)).re;
        assert!((fc - (4.0 / (27.0 * 0.05 * 0.05) - pt.beta)).abs() < 1e-10);
    }
}
