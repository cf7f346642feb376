//! Geometric pressure from full preimage trees, restricted sums inside a
//! polynomial-like domain, and the Bowen zero.

use rayon::prelude::*;

use crate::components::{Collar, ComponentMask, PolyLikeRestriction};
use crate::error::{Error, Result};
use crate::escape::DynSetup;
use crate::polynomial::{ComplexPoint, Polynomial, Precision};
use crate::sampling::halton_points_where;

/// Default cap on the number of leaves of a preimage tree.
pub const DEFAULT_LEAF_CAP: u64 = 2_000_000;
/// Default residual tolerance for the per-level root solves.
pub const DEFAULT_TREE_TOL: f64 = 1e-10;
/// Leaves with `|(f^n)'(v)|` below this are flagged as near a critical value.
pub const CRITICAL_LEAF_MODULUS: f64 = 1e-12;
/// Base points closer than this to a forward critical orbit are rejected.
pub const POST_CRITICAL_DISTANCE: f64 = 1e-6;
/// Number of tail entries averaged by the extrapolation.
pub const TAIL: usize = 3;
/// Minimum number of base points for the `C_0` estimate.
pub const MIN_C0_SAMPLES: usize = 20;

/// Compensated (Neumaier) summation in the given order.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `log Σ exp(-t * l_i)` over log-moduli `l_i`, shifted for range safety and
/// summed in order with compensation. At `t = 0` every term is exactly 1.
pub fn log_weighted_sum(log_moduli: &[f64], t: f64) -> f64 {
    if log_moduli.is_empty() {
        return f64::NEG_INFINITY;
    }
    if t == 0.0 {
        return (log_moduli.len() as f64).ln();
    }
    let shift = log_moduli.iter().map(|&l| -t * l).fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::INFINITY {
        return f64::INFINITY;
    }
    shift + neumaier_sum(log_moduli.iter().map(|&l| (-t * l - shift).exp())).ln()
}

/// All `n`-th preimages of a base point, level by level, with the
/// logarithm of `|(f^k)'(v)|` for every node of every level `k = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageTree {
    pub base: ComplexPoint,
    pub depth: usize,
    /// `levels[k-1]` holds the nodes of level `k` as `(v, log|(f^k)'(v)|)`,
    /// repeated according to multiplicity.
    pub levels: Vec<Vec<(ComplexPoint, f64)>>,
    /// Some node sits at (or numerically on) a critical point.
    pub near_critical: bool,
}

impl PreimageTree {
    pub fn leaves(&self) -> &[(ComplexPoint, f64)] {
        self.levels.last().map(|l| l.as_slice()).unwrap_or(&[])
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    /// `log Σ_{v in f^{-k}(x)} |(f^k)'(v)|^{-t}`.
    pub fn log_sum(&self, k: usize, t: f64) -> f64 {
        let logs: Vec<f64> = self.levels[k - 1].iter().map(|&(_, l)| l).collect();
        log_weighted_sum(&logs, t)
    }
}

/// One expansion step: all preimages of every node, each carrying the
/// accumulated log-derivative. Order follows the parents, then the roots.
fn expand(
    p: &Polynomial,
    nodes: &[(ComplexPoint, f64)],
    tol: f64,
    precision: Precision,
    keep: &(dyn Fn(ComplexPoint) -> bool + Sync),
) -> Result<Vec<(ComplexPoint, f64)>> {
    let children: Vec<Result<Vec<(ComplexPoint, f64)>>> = nodes
        .par_iter()
        .map(|&(z, l)| {
            let mut out = Vec::with_capacity(p.degree());
            for r in p.preimages(z, tol, precision)? {
                if !keep(r.z) {
                    continue;
                }
                let (_, dv) = p.eval_with_derivative(r.z);
                let lv = l + dv.norm().ln();
                for _ in 0..r.multiplicity {
                    out.push((r.z, lv));
                }
            }
            Ok(out)
        })
        .collect();
    let mut next = Vec::with_capacity(nodes.len() * p.degree());
    for c in children {
        next.extend(c?);
    }
    Ok(next)
}

/// Builds the full tree of preimages of `x` down to depth `n`.
pub fn preimage_tree(p: &Polynomial, x: ComplexPoint, n: usize, tol: f64) -> Result<PreimageTree> {
    preimage_tree_capped(p, x, n, tol, DEFAULT_LEAF_CAP)
}

pub fn preimage_tree_capped(
    p: &Polynomial,
    x: ComplexPoint,
    n: usize,
    tol: f64,
    leaf_cap: u64,
) -> Result<PreimageTree> {
    preimage_tree_with(p, x, n, tol, leaf_cap, Precision::Double)
}

/// As [`preimage_tree_capped`], solving each level in the given precision.
pub fn preimage_tree_with(
    p: &Polynomial,
    x: ComplexPoint,
    n: usize,
    tol: f64,
    leaf_cap: u64,
    precision: Precision,
) -> Result<PreimageTree> {
    if n == 0 {
        return Err(Error::InvalidInput("tree depth must be at least 1".into()));
    }
    if p.degree() < 2 {
        return Err(Error::InvalidInput("preimage trees need degree >= 2".into()));
    }
    let leaves = (p.degree() as f64).powi(n as i32);
    if leaves > leaf_cap as f64 {
        return Err(Error::LeafBudget(leaf_cap));
    }
    let mut levels = Vec::with_capacity(n);
    let mut nodes = vec![(x, 0.0f64)];
    for _ in 0..n {
        nodes = expand(p, &nodes, tol, precision, &|_| true)?;
        levels.push(nodes.clone());
    }
    let near_critical = levels.iter().flatten().any(|&(_, l)| l < CRITICAL_LEAF_MODULUS.ln());
    Ok(PreimageTree {
        base: x,
        depth: n,
        levels,
        near_critical,
    })
}

/// Rejects base points within [`POST_CRITICAL_DISTANCE`] of the first `n`
/// forward images of any critical point.
pub fn check_not_post_critical(p: &Polynomial, x: ComplexPoint, n: usize) -> Result<()> {
    for c in p.critical_point_list(1e-12)? {
        let mut z = c;
        for _ in 0..n {
            z = p.eval(z);
            let distance = (z - x).norm();
            if distance < POST_CRITICAL_DISTANCE {
                return Err(Error::PostCritical { point: x, distance });
            }
            if !z.norm().is_finite() {
                break;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureEstimate {
    pub t: f64,
    pub base: ComplexPoint,
    /// `(1/n) log S_n` for `n = 1..=N`.
    pub averages: Vec<f64>,
    /// `log S_n - log S_{n-1}` for `n = 1..=N` (with `S_0 = 1`).
    pub increments: Vec<f64>,
    /// Mean of the last three increments.
    pub extrapolated: f64,
    /// `max - min` over the last three increments.
    pub dispersion: f64,
    pub leaves: Vec<usize>,
    pub near_critical: bool,
}

/// Pressure estimate at `t` from an already built tree.
pub fn estimate_from_tree(tree: &PreimageTree, t: f64) -> Result<PressureEstimate> {
    if t > 0.0 && tree.near_critical {
        let min = tree
            .levels
            .iter()
            .flatten()
            .map(|&(_, l)| l.exp())
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NearCriticalValue(min));
    }
    let logs: Vec<f64> = (1..=tree.depth).map(|k| tree.log_sum(k, t)).collect();
    let averages: Vec<f64> = logs.iter().enumerate().map(|(i, l)| l / (i + 1) as f64).collect();
    let increments: Vec<f64> = logs
        .iter()
        .enumerate()
        .map(|(i, &l)| if i == 0 { l } else { l - logs[i - 1] })
        .collect();
    let tail = &increments[increments.len().saturating_sub(TAIL)..];
    let extrapolated = tail.iter().sum::<f64>() / tail.len() as f64;
    let dispersion =
        tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PressureEstimate {
        t,
        base: tree.base,
        averages,
        increments,
        extrapolated,
        dispersion,
        leaves: tree.levels.iter().map(|l| l.len()).collect(),
        near_critical: tree.near_critical,
    })
}

/// `P_n(t, f; x)` for `n = 1..=depth`, with the tail extrapolation.
pub fn pressure_estimate(p: &Polynomial, t: f64, x: ComplexPoint, depth: usize, tol: f64) -> Result<PressureEstimate> {
    check_not_post_critical(p, x, depth)?;
    let tree = preimage_tree(p, x, depth, tol)?;
    estimate_from_tree(&tree, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BowenZero {
    pub t: f64,
    pub bracket: (f64, f64),
    pub depth: usize,
}

/// Bisection on the extrapolated depth-`N` pressure for its zero in `[t_lo, t_hi]`.
pub fn bowen_zero(
    p: &Polynomial,
    x: ComplexPoint,
    depth: usize,
    t_lo: f64,
    t_hi: f64,
    tol_t: f64,
) -> Result<BowenZero> {
    if !(t_hi > t_lo) || !(tol_t > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bad bisection bracket [{t_lo}, {t_hi}] / tolerance {tol_t}"
        )));
    }
    check_not_post_critical(p, x, depth)?;
    let tree = preimage_tree(p, x, depth, DEFAULT_TREE_TOL)?;
    bowen_zero_from_tree(&tree, t_lo, t_hi, tol_t)
}

pub fn bowen_zero_from_tree(tree: &PreimageTree, t_lo: f64, t_hi: f64, tol_t: f64) -> Result<BowenZero> {
    let value = |t: f64| estimate_from_tree(tree, t).map(|e| e.extrapolated);
    let (mut lo, mut hi) = (t_lo, t_hi);
    if !(value(lo)? > 0.0 && value(hi)? < 0.0) {
        return Err(Error::NoBracket { lo: t_lo, hi: t_hi });
    }
    while hi - lo > tol_t {
        let mid = 0.5 * (lo + hi);
        if value(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BowenZero {
        t: 0.5 * (lo + hi),
        bracket: (lo, hi),
        depth: tree.depth,
    })
}

/// `L_k(F, x)` for `k = 1..=n`, keeping only preimages inside `U_{m+1}`
/// (one-pixel dilation collar).
pub fn restricted_ln_sequence(
    setup: &DynSetup,
    restriction: &PolyLikeRestriction,
    x: ComplexPoint,
    n: usize,
) -> Result<Vec<f64>> {
    if !restriction.outer.contains(x, Collar::Dilate) {
        return Err(Error::InvalidInput(format!("base point {x} is outside U_m")));
    }
    let inner = &restriction.inner;
    let keep = |z: ComplexPoint| inner.contains(z, Collar::Dilate);
    let mut nodes = vec![(x, 0.0f64)];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        nodes = expand(&setup.poly, &nodes, DEFAULT_TREE_TOL, Precision::Double, &keep)?;
        if nodes.is_empty() {
            return Err(Error::EmptyTree);
        }
        let logs: Vec<f64> = nodes.iter().map(|&(_, l)| l).collect();
        out.push(log_weighted_sum(&logs, 1.0));
    }
    Ok(out)
}

/// `L_n(F, x) = log Σ |(F^n)'(y)|^{-1}` over the restricted preimages.
pub fn restricted_ln(setup: &DynSetup, restriction: &PolyLikeRestriction, x: ComplexPoint, n: usize) -> Result<f64> {
    Ok(*restricted_ln_sequence(setup, restriction, x, n)?
        .last()
        .ok_or_else(|| Error::InvalidInput("n must be at least 1".into()))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct C0Estimate {
    pub c0: f64,
    /// Minimum of `L_n` over samples and `n <= n_max`.
    pub min_ln: f64,
    pub argmin: (ComplexPoint, usize),
    pub samples: usize,
}

/// `C_0 = max(0, -min L_n(F, x))` over the sample points and `n <= n_max`.
pub fn estimate_c0(
    setup: &DynSetup,
    restriction: &PolyLikeRestriction,
    samples: &[ComplexPoint],
    n_max: usize,
) -> Result<C0Estimate> {
    if samples.len() < MIN_C0_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_C0_SAMPLES} sample points, got {}",
            samples.len()
        )));
    }
    let seqs: Vec<Result<Vec<f64>>> = samples
        .par_iter()
        .map(|&x| restricted_ln_sequence(setup, restriction, x, n_max))
        .collect();
    let mut min_ln = f64::INFINITY;
    let mut argmin = (samples[0], 1);
    for (x, seq) in samples.iter().zip(seqs) {
        for (k, l) in seq?.into_iter().enumerate() {
            if l < min_ln {
                min_ln = l;
                argmin = (*x, k + 1);
            }
        }
    }
    Ok(C0Estimate {
        c0: (-min_ln).max(0.0),
        min_ln,
        argmin,
        samples: samples.len(),
    })
}

/// Sample protocol for `L_n`: Halton points of `U_m` (eroded) that avoid
/// the dilated approximation of `C`.
pub fn ln_samples(restriction: &PolyLikeRestriction, c_approx: &ComponentMask, k: usize) -> Vec<ComplexPoint> {
    halton_points_where(&restriction.outer, k, Collar::Erode, |z| {
        !c_approx.contains(z, Collar::Dilate)
    })
}
