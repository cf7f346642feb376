//! Free iterated branches `φ_ℓ = F^{−ℓ} ∘ h`, the sums `Λ_N`, and the
//! combinatorial bound `Λ_N ≥ ab(1+ab)^{N−1}` as numerical evidence for
//! `P(1, f) > 0`.
//!
//! Time is counted in units of `f^{N₁}`: an `h` step inverts `f^{N₁}` into
//! `V`, an `F` step inverts `F^{N₁}` into `U_{m+1}`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::components::{
    component_chain, find_v_branch, first_poly_like, pullback, Collar, ComponentAtlas, ComponentMask,
    PolyLikeRestriction, VBranch,
};
use crate::error::{Error, Result};
use crate::escape::DynSetup;
use crate::grid::PixelGrid;
use crate::polynomial::{ComplexPoint, Precision};
use crate::pressure::{log_weighted_sum, preimage_tree_capped, DEFAULT_TREE_TOL};

/// Default and maximal block count `N`.
pub const DEFAULT_N: usize = 6;
pub const MAX_N: usize = 12;
/// Minimum number of sample points for `a`.
pub const MIN_A_SAMPLES: usize = 20;
/// Cap on enumerated compositions times branches.
pub const LEAF_BUDGET: u64 = 20_000_000;

/// The polynomial-like restriction together with a branch component `V`.
#[derive(Debug, Clone)]
pub struct BranchSystem {
    pub setup: DynSetup,
    pub restriction: PolyLikeRestriction,
    pub v: VBranch,
    /// Deepest chain component, standing in for the component `C`.
    pub c_approx: ComponentMask,
    /// Collar used for `F` steps into `U_{m+1}`.
    pub inner_collar: Collar,
    /// Collar used for `h` steps into `V`.
    pub v_collar: Collar,
}

impl BranchSystem {
    /// Runs the component pipeline on `grid` down to `level` from `seed`.
    pub fn discover(setup: &DynSetup, grid: PixelGrid, level: usize, seed: ComplexPoint, m_cap: usize) -> Result<Self> {
        let atlas = ComponentAtlas::build(setup, grid, level)?;
        let chain = component_chain(&atlas, seed, level)?;
        let restriction = first_poly_like(setup, &atlas, &chain, m_cap.min(level.saturating_sub(1)))?;
        let v = find_v_branch(setup, &atlas, &chain, &restriction, level)?;
        let c_approx = chain.mask(&atlas, level)?;
        Ok(BranchSystem {
            setup: setup.clone(),
            restriction,
            v,
            c_approx,
            inner_collar: Collar::Erode,
            v_collar: Collar::Erode,
        })
    }

    pub fn n1(&self) -> usize {
        self.v.n1
    }

    /// Branches of `h`: solutions of `f^{N₁}(y) = x` in `V`, with `log|(f^{N₁})'(y)|`.
    pub fn h_step(&self, x: ComplexPoint) -> Result<Vec<(ComplexPoint, f64)>> {
        Ok(pullback(&self.setup, x, self.n1())?
            .into_iter()
            .filter(|&(y, _)| self.v.mask.contains(y, self.v_collar))
            .map(|(y, d)| (y, d.ln()))
            .collect())
    }

    /// Branches of `F^{-N₁}`: `N₁` single inverse steps, each kept only if it
    /// lands in `U_{m+1}`.
    pub fn f_step(&self, x: ComplexPoint) -> Result<Vec<(ComplexPoint, f64)>> {
        let mut nodes = vec![(x, 0.0f64)];
        for _ in 0..self.n1() {
            let mut next = Vec::with_capacity(nodes.len() * 2);
            for &(z, l) in &nodes {
                for r in self.setup.poly.preimages(z, DEFAULT_TREE_TOL, Precision::Double)? {
                    if !self.restriction.inner.contains(r.z, self.inner_collar) {
                        continue;
                    }
                    let (_, d) = self.setup.poly.eval_with_derivative(r.z);
                    for _ in 0..r.multiplicity {
                        next.push((r.z, l + d.norm().ln()));
                    }
                }
            }
            nodes = next;
        }
        Ok(nodes)
    }

    /// `Σ |h'(x)|`.
    pub fn h_sum(&self, x: ComplexPoint) -> Result<f64> {
        let branches = self.h_step(x)?;
        if branches.is_empty() {
            return Err(Error::EmptyBranch(x));
        }
        Ok(branches.iter().map(|&(_, l)| (-l).exp()).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AEstimate {
    pub a: f64,
    pub argmin: ComplexPoint,
    pub per_sample: Vec<f64>,
}

/// `a = min_x Σ |h'(x)|` over the samples.
pub fn measure_a(sys: &BranchSystem, samples: &[ComplexPoint]) -> Result<AEstimate> {
    if samples.len() < MIN_A_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_A_SAMPLES} sample points, got {}",
            samples.len()
        )));
    }
    let per_sample: Vec<f64> = samples.par_iter().map(|&x| sys.h_sum(x)).collect::<Result<_>>()?;
    let (i, a) = per_sample.iter().enumerate().fold(
        (0, f64::INFINITY),
        |(bi, b), (i, &v)| if v < b { (i, v) } else { (bi, b) },
    );
    Ok(AEstimate {
        a,
        argmin: samples[i],
        per_sample,
    })
}

/// `Σ_{k=1}^{N} C(N−1, k−1) x^k`, summed term by term.
pub fn binomial_sum(x: f64, n: usize) -> f64 {
    let mut c = 1.0f64;
    let mut total = 0.0;
    for k in 1..=n {
        if k > 1 {
            c = c * (n - k + 1) as f64 / (k - 1) as f64;
        }
        total += c * x.powi(k as i32);
    }
    total
}

/// Closed form `x(1+x)^{N−1}`.
pub fn binomial_bound(x: f64, n: usize) -> f64 {
    x * (1.0 + x).powi(n as i32 - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRecord {
    pub n: usize,
    pub x: ComplexPoint,
    pub lambda: f64,
    pub log_lambda: f64,
    /// Contribution of compositions with `k` blocks, `k = 1..=N`.
    pub per_k: Vec<f64>,
    pub branches_per_k: Vec<usize>,
    pub a: f64,
    pub b: f64,
    pub bound: f64,
    /// `Λ_N(x) >= bound` up to `1e-9` relative slack.
    pub bound_holds: bool,
    /// Endpoints of all branches, with `log|derivative|` (only kept for `N <= 6`).
    pub endpoints: Vec<(ComplexPoint, f64)>,
}

#[derive(Clone, Copy)]
enum Unit {
    H,
    F,
}

fn step(sys: &BranchSystem, unit: Unit, z: ComplexPoint) -> Result<Vec<(ComplexPoint, f64)>> {
    match unit {
        Unit::H => sys.h_step(z),
        Unit::F => sys.f_step(z),
    }
}

/// Depth-first enumeration from a node; leaves are appended as `(k, z, log)`.
fn enumerate(
    sys: &BranchSystem,
    z: ComplexPoint,
    l: f64,
    remaining: usize,
    k: usize,
    out: &mut Vec<(usize, ComplexPoint, f64)>,
) -> Result<()> {
    if remaining == 0 {
        out.push((k, z, l));
        return Ok(());
    }
    for (y, ly) in sys.h_step(z)? {
        enumerate(sys, y, l + ly, remaining - 1, k + 1, out)?;
    }
    if k > 0 {
        for (y, ly) in sys.f_step(z)? {
            enumerate(sys, y, l + ly, remaining - 1, k, out)?;
        }
    }
    Ok(())
}

/// `Λ_N(x)` over all compositions of `N` units, each block one `h` step
/// followed by `F` steps.
pub fn lambda_n(sys: &BranchSystem, x: ComplexPoint, n: usize, a: f64, b: f64) -> Result<LambdaRecord> {
    if n == 0 || n > MAX_N {
        return Err(Error::InvalidInput(format!("N = {n} outside 1..={MAX_N}")));
    }
    let width = 1 + sys.restriction.degree.pow(sys.n1() as u32) as u64;
    if (width as f64).powi(n as i32 - 1) > LEAF_BUDGET as f64 {
        return Err(Error::LeafBudget(LEAF_BUDGET));
    }
    // Expand a few units breadth-first, then finish each prefix in parallel.
    let split = n.min(3);
    let mut frontier = vec![(x, 0.0f64, 0usize)];
    for _ in 0..split {
        let mut next = Vec::new();
        for &(z, l, k) in &frontier {
            for (y, ly) in step(sys, Unit::H, z)? {
                next.push((y, l + ly, k + 1));
            }
            if k > 0 {
                for (y, ly) in step(sys, Unit::F, z)? {
                    next.push((y, l + ly, k));
                }
            }
        }
        frontier = next;
    }
    let parts: Vec<Result<Vec<(usize, ComplexPoint, f64)>>> = frontier
        .par_iter()
        .map(|&(z, l, k)| {
            let mut out = Vec::new();
            enumerate(sys, z, l, n - split, k, &mut out)?;
            Ok(out)
        })
        .collect();
    let mut logs_per_k: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut endpoints = Vec::new();
    for part in parts {
        for (k, z, l) in part? {
            logs_per_k[k].push(l);
            if n <= 6 {
                endpoints.push((z, l));
            }
        }
    }
    let per_k: Vec<f64> = logs_per_k[1..]
        .iter()
        .map(|ls| log_weighted_sum(ls, 1.0).exp())
        .collect();
    let all: Vec<f64> = logs_per_k.iter().flatten().copied().collect();
    let log_lambda = log_weighted_sum(&all, 1.0);
    let lambda = log_lambda.exp();
    let bound = binomial_bound(a * b, n);
    Ok(LambdaRecord {
        n,
        x,
        lambda,
        log_lambda,
        per_k,
        branches_per_k: logs_per_k[1..].iter().map(|v| v.len()).collect(),
        a,
        b,
        bound,
        bound_holds: lambda >= bound * (1.0 - 1e-9),
        endpoints,
    })
}

/// Whether some two branch endpoints coincide (same point and same
/// derivative, within `tol`).
pub fn has_duplicate_branches(record: &LambdaRecord, tol: f64) -> bool {
    let mut pts = record.endpoints.clone();
    pts.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            if q.0.re - p.0.re > tol {
                break;
            }
            if (q.0 - p.0).norm() < tol && (q.1 - p.1).abs() < tol {
                return true;
            }
        }
    }
    false
}

/// `log Σ_{y in f^{-N₁N}(x)} |(f^{N₁N})'(y)|^{-1}`, the unrestricted sum that
/// dominates `Λ_N`.
pub fn unrestricted_log_sum(sys: &BranchSystem, x: ComplexPoint, n: usize) -> Result<f64> {
    let depth = n * sys.n1();
    let tree = preimage_tree_capped(&sys.setup.poly, x, depth, DEFAULT_TREE_TOL, 2_000_000)?;
    Ok(tree.log_sum(depth, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub n: usize,
    pub n1: usize,
    pub a: f64,
    pub c0: f64,
    pub b: f64,
    pub records: Vec<LambdaRecord>,
    /// `min_x (1/N) log Λ_N(x)`, per unit of `f^{N₁}`.
    pub min_rate: f64,
    /// `log(1 + ab)`, per unit of `f^{N₁}`.
    pub asymptote: f64,
}

impl LowerBoundReport {
    /// Lower bound on `P(1, f)` implied by the asymptote, per step of `f`.
    pub fn pressure_lower_bound(&self) -> f64 {
        self.asymptote / self.n1 as f64
    }

    /// `log(1 + ab) > 0` and every sampled `Λ_N` meets the bound. The
    /// finite-`N` rate `min_rate` still carries the `log(ab)/N` offset and is
    /// reported, not required to be positive.
    pub fn evidence_positive(&self) -> bool {
        self.asymptote > 0.0 && self.records.iter().all(|r| r.bound_holds)
    }

    /// `key: value` lines followed by a per-sample table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n1: {}", self.n1);
        let _ = writeln!(s, "a: {:.16e}", self.a);
        let _ = writeln!(s, "c0: {:.16e}", self.c0);
        let _ = writeln!(s, "b: {:.16e}", self.b);
        let _ = writeln!(s, "N: {}", self.n);
        let _ = writeln!(s, "log_one_plus_ab: {:.16e}", self.asymptote);
        let _ = writeln!(s, "min_rate: {:.16e}", self.min_rate);
        let _ = writeln!(s, "pressure_one_lower_bound: {:.16e}", self.pressure_lower_bound());
        let _ = writeln!(s, "x_re,x_im,N,lambda,bound,holds");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
                r.x.re, r.x.im, r.n, r.lambda, r.bound, r.bound_holds
            );
        }
        let verdict = if self.evidence_positive() {
            "numerical evidence that P(1,f) > 0, so the Bowen zero exceeds 1 (not a proof)"
        } else {
            "no numerical evidence that P(1,f) > 0 at this resolution (not a proof either way)"
        };
        let _ = writeln!(s, "verdict: {verdict}");
        s
    }
}

/// `Λ_N` over the samples with the bound from `a` and `b = exp(−C₀)`.
pub fn pressure_one_lower_bound(
    sys: &BranchSystem,
    samples: &[ComplexPoint],
    n: usize,
    a: f64,
    c0: f64,
) -> Result<LowerBoundReport> {
    let b = (-c0).exp();
    let mut records = Vec::with_capacity(samples.len());
    for &x in samples {
        records.push(lambda_n(sys, x, n, a, b)?);
    }
    let min_rate = records
        .iter()
        .map(|r| r.log_lambda / n as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(LowerBoundReport {
        n,
        n1: sys.n1(),
        a,
        c0,
        b,
        records,
        min_rate,
        asymptote: (a * b).ln_1p(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_identity_exact_on_integers() {
        // Σ C(N−1, k−1) x^k = x (1+x)^{N−1} over the integers.
        for n in 1..=12u32 {
            for x in 1..=5u128 {
                let mut c = 1u128;
                let mut sum = 0u128;
                for k in 1..=n {
                    if k > 1 {
                        c = c * (n - k + 1) as u128 / (k - 1) as u128;
                    }
                    sum += c * x.pow(k);
                }
                assert_eq!(sum, x * (1 + x).pow(n - 1));
            }
        }
    }

    #[test]
    fn binomial_identity_on_reals() {
        for n in 1..=12 {
            for x in [0.01, 0.3, 1.7] {
                let (s, b) = (binomial_sum(x, n), binomial_bound(x, n));
                assert!((s - b).abs() <= 1e-13 * b);
            }
        }
    }
}
