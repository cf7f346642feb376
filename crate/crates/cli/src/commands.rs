//! The subcommands. Each builds its whole output in memory and writes it
//! once, so output bytes do not depend on scheduling.

use std::fmt::Write as _;

use arcdim_core::chebyshev_lift::{
    conjugacy_check, normalize_to_chebyshev, transfer_samples, verify_transfer_identity, LiftedSystem,
};
use arcdim_core::components::{component_chain, find_v_branch, first_poly_like, label_binary};
use arcdim_core::cubic_family::{
    central_gradient, curve_slope, fixed_point_gradient, fixed_point_near_2, gamma, gamma_curve, gamma_gradient,
    seed_grid, verify_example, ExampleOptions,
};
use arcdim_core::escape::{connectivity_class, render, write_pgm_with_comments};
use arcdim_core::lowerbound::{lambda_n, measure_a, pressure_one_lower_bound, BranchSystem};
use arcdim_core::pressure::{
    bowen_zero_from_tree, check_not_post_critical, estimate_c0, estimate_from_tree, ln_samples, preimage_tree,
    preimage_tree_with, DEFAULT_LEAF_CAP,
};
use arcdim_core::{ComponentAtlas, DynSetup, Error, PixelGrid};

use crate::config::{parse_box, parse_poly, RunConfig};
use crate::{emit, CliError};

type CmdResult = Result<(), CliError>;

pub fn dispatch(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    match cfg.command.as_str() {
        "render" => render_cmd(cfg, stdout),
        "components" => components_cmd(cfg, stdout),
        "pressure" => pressure_cmd(cfg, stdout),
        "dimension" => dimension_cmd(cfg, stdout),
        "verify-lift" => verify_lift_cmd(cfg, stdout),
        "curve" => curve_cmd(cfg, stdout),
        "verify-example" => verify_example_cmd(cfg, stdout),
        "lowerbound" => lowerbound_cmd(cfg, stdout),
        other => Err(CliError::Config(format!("unknown subcommand {other}"))),
    }
}

fn out_path(cfg: &RunConfig) -> &str {
    cfg.raw("out").unwrap_or("-")
}

fn positive(cfg: &RunConfig, key: &str) -> Result<usize, CliError> {
    let v: usize = cfg.get(key)?;
    if v == 0 {
        return Err(CliError::Config(format!("{key} must be positive")));
    }
    Ok(v)
}

fn e16(x: f64) -> String {
    format!("{x:.16e}")
}

fn render_cmd(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    let spec = parse_poly(cfg.raw("poly").unwrap_or(""))?;
    let setup = DynSetup::new(spec.poly.clone())?.with_max_iter(positive(cfg, "max-iter")?);
    let (w, h) = (positive(cfg, "width")?, positive(cfg, "height")?);
    let bbox = parse_box(cfg.raw("box").unwrap_or("auto"), setup.radius, h)?;
    let img = render(&setup, bbox, w, h)?;
    let mut pgm = Vec::new();
    write_pgm_with_comments(&mut pgm, w, h, &img.values, &cfg.echo())?;
    let out = out_path(cfg);
    emit(out, &pgm, stdout)?;
    if out != "-" {
        let (_, comps) = label_binary(&img.grid, |i| img.values[i] == 0);
        let mut s = cfg.echo_block();
        for line in spec.describe() {
            let _ = writeln!(s, "{line}");
        }
        let _ = writeln!(s, "escape_radius: {}", e16(setup.radius));
        let _ = writeln!(s, "bounded_pixels: {}", img.values.iter().filter(|&&v| v == 0).count());
        let _ = writeln!(s, "bounded_components: {}", comps.len());
        emit("-", s.as_bytes(), stdout)?;
    }
    Ok(())
}

fn components_cmd(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    let spec = parse_poly(cfg.raw("poly").unwrap_or(""))?;
    let setup = DynSetup::new(spec.poly.clone())?;
    let res = positive(cfg, "resolution")?;
    let level: usize = cfg.get("level")?;
    let grid = match cfg.raw("box").unwrap_or("auto") {
        "seed" => seed_grid(&setup, cfg.get_point("seed")?, res)?,
        raw => PixelGrid::new(parse_box(raw, setup.radius, res)?, res, res)?,
    };
    let bbox = grid.bbox;
    let m_cap: usize = cfg.get("m-cap")?;
    let atlas = ComponentAtlas::build(&setup, grid, level)?;
    let lg = atlas.level(level)?;

    let out = out_path(cfg).to_string();
    let labels: Vec<u8> = lg.labels.iter().map(|&l| l.min(255) as u8).collect();
    let mut pgm = Vec::new();
    write_pgm_with_comments(&mut pgm, res, res, &labels, &cfg.echo())?;
    emit(&out, &pgm, stdout)?;
    let sidecar_path = cfg
        .raw("sidecar")
        .map(str::to_string)
        .unwrap_or_else(|| format!("{out}.txt"));
    if out != "-" {
        let mut side = cfg.echo_block();
        side.push_str(&lg.sidecar());
        emit(&sidecar_path, side.as_bytes(), stdout)?;
    }

    let img = render(
        &setup.clone().with_max_iter(arcdim_core::escape::DEFAULT_RENDER_ITER),
        bbox,
        res,
        res,
    )?;
    if let Some(path) = cfg.raw("render") {
        let mut bytes = Vec::new();
        write_pgm_with_comments(&mut bytes, res, res, &img.values, &cfg.echo())?;
        emit(path, &bytes, stdout)?;
    }
    let (_, bounded) = label_binary(&img.grid, |i| img.values[i] == 0);

    let mut s = cfg.echo_block();
    for line in spec.describe() {
        let _ = writeln!(s, "{line}");
    }
    let conn = connectivity_class(&setup)?;
    let _ = writeln!(s, "escape_radius: {}", e16(setup.radius));
    let _ = writeln!(s, "connectivity: {:?}", conn.class);
    let _ = writeln!(s, "connectivity_note: {}", conn.caveat);
    let _ = writeln!(s, "pitch: {}", e16(grid.pitch()));
    let _ = writeln!(s, "level: {level}");
    let _ = writeln!(s, "components: {}", lg.component_count());
    let _ = writeln!(s, "bounded_components_in_render: {}", bounded.len());
    let mut sizes: Vec<usize> = bounded.iter().map(|c| c.pixel_count).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.truncate(8);
    let _ = writeln!(
        s,
        "largest_bounded_components: {}",
        sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
    );

    if cfg.raw("seed").is_some() {
        let seed = cfg.get_point("seed")?;
        let chain = component_chain(&atlas, seed, level)?;
        let areas = chain.areas().iter().map(|a| a.to_string()).collect::<Vec<_>>();
        let _ = writeln!(s, "seed: {},{}", e16(seed.re), e16(seed.im));
        let _ = writeln!(s, "chain_areas: {}", areas.join(","));
        let _ = writeln!(s, "chain_nested: {}", chain.all_nested());
        let _ = writeln!(s, "chain_closure_nested: {}", chain.closure_nested.iter().all(|&b| b));
        match first_poly_like(&setup, &atlas, &chain, m_cap.min(level.saturating_sub(1))) {
            Ok(r) => {
                let _ = writeln!(s, "poly_like_level: {}", r.level);
                let _ = writeln!(s, "poly_like_degree: {}", r.degree);
                let _ = writeln!(s, "poly_like_unresolved: {}", r.unresolved);
                if let Some(raw) = cfg.raw("ln-n-max") {
                    let c_approx = chain.mask(&atlas, level)?;
                    let k: usize = cfg.get("ln-samples")?;
                    let samples = ln_samples(&r, &c_approx, k);
                    let _ = writeln!(s, "ln_samples: {}", samples.len());
                    for n_max in crate::config::parse_list(raw, "ln-n-max")? {
                        let est = estimate_c0(&setup, &r, &samples, n_max as usize)?;
                        let _ = writeln!(s, "min_ln_n_max_{}: {}", n_max as usize, e16(est.min_ln));
                    }
                }
                match find_v_branch(&setup, &atlas, &chain, &r, level) {
                    Ok(v) => {
                        let _ = writeln!(s, "v_level: {}", v.n1);
                        let _ = writeln!(s, "v_pixels: {}", v.pixel_count);
                        let _ = writeln!(
                            s,
                            "v_bbox: {},{},{},{}",
                            e16(v.bbox.re_min),
                            e16(v.bbox.re_max),
                            e16(v.bbox.im_min),
                            e16(v.bbox.im_max)
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(s, "v_branch: {}: {e}", e.name());
                    }
                }
            }
            Err(e) => {
                let _ = writeln!(s, "poly_like: {}: {e}", e.name());
            }
        }
    }
    let report = cfg.raw("report").unwrap_or("-");
    emit(report, s.as_bytes(), stdout)
}

fn flags_of(near_critical: bool) -> &'static str {
    if near_critical {
        "near_critical"
    } else {
        "ok"
    }
}

fn pressure_cmd(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    let spec = parse_poly(cfg.raw("poly").unwrap_or(""))?;
    let x = cfg.get_point("x")?;
    let depth = positive(cfg, "N")?;
    let tol: f64 = cfg.get("tol")?;
    let ts = cfg.get_list("t")?;
    check_not_post_critical(&spec.poly, x, depth)?;
    let tree = preimage_tree_with(&spec.poly, x, depth, tol, DEFAULT_LEAF_CAP, cfg.precision()?)?;
    let mut s = cfg.echo_block();
    let _ = writeln!(s, "t,n,P_n,increment,leaves,flags");
    let mut tails = String::new();
    for &t in &ts {
        let est = estimate_from_tree(&tree, t)?;
        for n in 0..depth {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                e16(t),
                n + 1,
                e16(est.averages[n]),
                e16(est.increments[n]),
                est.leaves[n],
                flags_of(est.near_critical)
            );
        }
        let _ = writeln!(
            tails,
            "# t = {}: extrapolated = {}, dispersion = {}",
            e16(t),
            e16(est.extrapolated),
            e16(est.dispersion)
        );
    }
    s.push_str(&tails);
    emit(out_path(cfg), s.as_bytes(), stdout)
}

fn dimension_cmd(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    let spec = parse_poly(cfg.raw("poly").unwrap_or(""))?;
    let x = cfg.get_point("x")?;
    let depth = positive(cfg, "N")?;
    let tol: f64 = cfg.get("tol")?;
    let (lo, hi, tol_t): (f64, f64, f64) = (cfg.get("t-lo")?, cfg.get("t-hi")?, cfg.get("tol-t")?);
    if !(hi > lo) || !(tol_t > 0.0) {
        return Err(CliError::Config(format!("bad bracket [{lo}, {hi}] or tol-t {tol_t}")));
    }
    check_not_post_critical(&spec.poly, x, depth)?;
    let tree = preimage_tree_with(&spec.poly, x, depth, tol, DEFAULT_LEAF_CAP, cfg.precision()?)?;
    let z = bowen_zero_from_tree(&tree, lo, hi, tol_t)?;
    let at_zero = estimate_from_tree(&tree, z.t)?;
    let mut s = cfg.echo_block();
    let _ = writeln!(s, "t_star: {}", e16(z.t));
    let _ = writeln!(s, "bracket: {},{}", e16(z.bracket.0), e16(z.bracket.1));
    let _ = writeln!(s, "N: {}", z.depth);
    let _ = writeln!(s, "dispersion_at_t_star: {}", e16(at_zero.dispersion));
    let _ = writeln!(
        s,
        "notes: zero of the mean of the last three increments of log S_n(t); leaves at depth N = {}",
        tree.leaf_count()
    );
    emit(out_path(cfg), s.as_bytes(), stdout)
}

fn verify_lift_cmd(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    let spec = parse_poly(cfg.raw("poly").unwrap_or(""))?;
    let (alpha, omega) = match cfg.raw("interval").unwrap_or("auto") {
        "auto" => spec
            .interval()
            .ok_or_else(|| CliError::Config("interval=auto needs cheb2 or a cubic family polynomial".into()))?,
        raw => match crate::config::parse_list(raw, "interval")?.as_slice() {
            [a, b] => (*a, *b),
            _ => return Err(CliError::Config("interval must be alpha,omega".into())),
        },
    };
    let norm = normalize_to_chebyshev(&spec.poly, alpha, omega, 2)?;
    let mut s = cfg.echo_block();
    if !norm.is_exact() {
        // Not exactly Chebyshev: only the topological conjugacy is checked.
        let c = conjugacy_check(&norm, 1024)?;
        let _ = writeln!(s, "alpha: {}", e16(alpha));
        let _ = writeln!(s, "omega: {}", e16(omega));
        let _ = writeln!(s, "model_residual: {}", e16(norm.model_residual));
        let _ = writeln!(s, "conjugacy_residual: {}", e16(c.residual));
        let _ = writeln!(s, "conjugacy_monotonicity_violations: {}", c.monotonicity_violations);
        let _ = writeln!(s, "conjugacy_endpoint_error: {}", e16(c.endpoint_error));
        return emit(out_path(cfg), s.as_bytes(), stdout);
    }
    let sys = LiftedSystem::new(spec.poly.clone(), norm)?;
    let count = positive(cfg, "samples")?;
    let n_max = positive(cfg, "n-max")?;
    let circle_n = positive(cfg, "circle-n")?;
    let _ = writeln!(s, "x_re,x_im,n,lhs,rhs,relerr");
    let mut max_rel = 0.0f64;
    for (i, x) in transfer_samples(&sys, count).into_iter().enumerate() {
        let n = 1 + i % n_max;
        let c = verify_transfer_identity(&sys, x, n)?;
        max_rel = max_rel.max(c.rel_error);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e16(x.re),
            e16(x.im),
            n,
            e16(c.lhs),
            e16(c.rhs),
            e16(c.rel_error)
        );
    }
    let mut circle_err = 0.0f64;
    for i in 0..16 {
        let w = arcdim_core::ComplexPoint::from_polar(1.0, 0.1 + i as f64 * 0.39);
        circle_err = circle_err.max((sys.circle_sum(w, circle_n) - 1.0).abs());
    }
    let _ = writeln!(s, "# max_relerr: {}", e16(max_rel));
    let _ = writeln!(s, "# circle_sum_max_error: {}", e16(circle_err));
    emit(out_path(cfg), s.as_bytes(), stdout)
}

fn curve_cmd(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    let raw = cfg.raw("eps").unwrap_or("");
    let parts: Vec<f64> = raw
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("bad eps range {raw:?}: {e}")))?;
    let [lo, hi, step] = parts[..] else {
        return Err(CliError::Config("eps must be min:max:step".into()));
    };
    let tol: f64 = cfg.get("tol")?;
    let h: f64 = cfg.get("fd-step")?;
    let points = gamma_curve(lo, hi, step, tol)?;
    let mut s = cfg.echo_block();
    let _ = writeln!(s, "eps,beta,p,residual");
    let mut max_res = 0.0f64;
    for p in &points {
        max_res = max_res.max(p.residual);
        let _ = writeln!(s, "{},{},{},{}", e16(p.eps), e16(p.beta), e16(p.p), e16(p.residual));
    }
    let _ = writeln!(s, "# max_residual: {}", e16(max_res));
    let _ = writeln!(s, "# slope_at_zero: {}", e16(curve_slope(0.0, 2.0)?));
    // Gradients at (0, 2): analytic against central differences.
    let ga = gamma_gradient(0.0, 2.0);
    let gf = central_gradient(|e, b| Ok(gamma(e, b)), 0.0, 2.0, h)?;
    let pa = fixed_point_gradient(0.0, 2.0)?;
    let pf = central_gradient(fixed_point_near_2, 0.0, 2.0, h)?;
    let _ = writeln!(s, "# grad_gamma_analytic: {},{}", e16(ga.0), e16(ga.1));
    let _ = writeln!(s, "# grad_gamma_numeric: {},{}", e16(gf.0), e16(gf.1));
    let _ = writeln!(s, "# grad_p_analytic: {},{}", e16(pa.0), e16(pa.1));
    let _ = writeln!(s, "# grad_p_numeric: {},{}", e16(pf.0), e16(pf.1));
    emit(out_path(cfg), s.as_bytes(), stdout)
}

fn verify_example_cmd(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    let opts = ExampleOptions {
        resolution: positive(cfg, "resolution")?,
        level: positive(cfg, "level")?,
        m_cap: cfg.get("m-cap")?,
        hausdorff_pitches: cfg.get("hausdorff")?,
    };
    let mut s = cfg.echo_block();
    let mut failed = Vec::new();
    for (i, eps) in cfg.get_list("eps")?.into_iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let report = verify_example(eps, &opts)?;
        if !report.all_pass() {
            failed.push(eps);
        }
        s.push_str(&report.to_text());
    }
    emit(out_path(cfg), s.as_bytes(), stdout)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::VerificationFailed(format!("checks fail at eps = {failed:?}")).into())
    }
}

fn lowerbound_cmd(cfg: &RunConfig, stdout: &mut Vec<u8>) -> CmdResult {
    let spec = parse_poly(cfg.raw("poly").unwrap_or(""))?;
    let setup = DynSetup::new(spec.poly.clone())?;
    let seed = cfg.get_point("seed")?;
    let res = positive(cfg, "resolution")?;
    let level = positive(cfg, "level")?;
    let n = positive(cfg, "N")?;
    let k = positive(cfg, "samples")?;
    let cert = positive(cfg, "cert-samples")?;
    let c0_n = positive(cfg, "c0-n-max")?;
    let grid = seed_grid(&setup, seed, res)?;
    let sys = BranchSystem::discover(&setup, grid, level, seed, cfg.get("m-cap")?)?;

    let samples = ln_samples(&sys.restriction, &sys.c_approx, 2 * k);
    if samples.len() < 2 * k {
        return Err(Error::InvalidInput(format!(
            "only {} sample points found in U_m, need {}",
            samples.len(),
            2 * k
        ))
        .into());
    }
    let (half, full) = (&samples[..k], &samples[..]);
    let a = measure_a(&sys, half)?;
    let a2 = measure_a(&sys, full)?;
    let c0 = estimate_c0(&setup, &sys.restriction, half, c0_n)?;
    let c02 = estimate_c0(&setup, &sys.restriction, full, c0_n)?;
    let rel = |x: f64, y: f64| {
        if x == 0.0 {
            (y - x).abs()
        } else {
            (y - x).abs() / x.abs()
        }
    };
    let b = (-c0.c0).exp();

    let mut s = cfg.echo_block();
    for line in spec.describe() {
        let _ = writeln!(s, "{line}");
    }
    let b_box = grid.bbox;
    let _ = writeln!(
        s,
        "grid: {res}x{res} [{}, {}] x [{}, {}]",
        e16(b_box.re_min),
        e16(b_box.re_max),
        e16(b_box.im_min),
        e16(b_box.im_max)
    );
    let _ = writeln!(s, "poly_like_level: {}", sys.restriction.level);
    let _ = writeln!(s, "poly_like_degree: {}", sys.restriction.degree);
    let _ = writeln!(s, "v_level: {}", sys.n1());
    let _ = writeln!(s, "v_pixels: {}", sys.v.pixel_count);
    let _ = writeln!(
        s,
        "v_bbox: {},{},{},{}",
        e16(sys.v.bbox.re_min),
        e16(sys.v.bbox.re_max),
        e16(sys.v.bbox.im_min),
        e16(sys.v.bbox.im_max)
    );
    let _ = writeln!(s, "v_collar: {:?}", sys.v_collar);
    let _ = writeln!(s, "inner_collar: {:?}", sys.inner_collar);
    let _ = writeln!(s, "a_samples_{k}: {}", e16(a.a));
    let _ = writeln!(s, "a_samples_{}: {}", 2 * k, e16(a2.a));
    let _ = writeln!(s, "a_variation: {}", e16(rel(a.a, a2.a)));
    let _ = writeln!(s, "c0_samples_{k}: {}", e16(c0.c0));
    let _ = writeln!(s, "c0_samples_{}: {}", 2 * k, e16(c02.c0));
    let _ = writeln!(s, "c0_variation: {}", e16(rel(c0.c0, c02.c0)));
    let _ = writeln!(s, "c0_argmin_depth: {}", c0.argmin.1);
    let _ = writeln!(s, "b: {}", e16(b));

    // Λ_N for N = 1..=n at the first sample, split by block count.
    let x0 = samples[0];
    let _ = writeln!(s, "lambda_table: x = {},{}", e16(x0.re), e16(x0.im));
    let _ = writeln!(s, "N,lambda,bound,holds,per_k");
    for nn in 1..=n {
        let r = lambda_n(&sys, x0, nn, a.a, b)?;
        let per_k = r.per_k.iter().map(|v| e16(*v)).collect::<Vec<_>>().join(";");
        let _ = writeln!(s, "{nn},{},{},{},{per_k}", e16(r.lambda), e16(r.bound), r.bound_holds);
    }
    let report = pressure_one_lower_bound(&sys, &samples[..cert.min(samples.len())], n, a.a, c0.c0)?;
    s.push_str(&report.to_text());

    // Direct pressure estimate and Bowen zero for comparison.
    let x = cfg.get_point("x")?;
    let depth = positive(cfg, "pressure-N")?;
    check_not_post_critical(&spec.poly, x, depth)?;
    let tree = preimage_tree(&spec.poly, x, depth, arcdim_core::pressure::DEFAULT_TREE_TOL)?;
    let est = estimate_from_tree(&tree, 1.0)?;
    let tail = &est.increments[est.increments.len().saturating_sub(3)..];
    let _ = writeln!(s, "pressure_depth: {depth}");
    let _ = writeln!(s, "pressure_one_extrapolated: {}", e16(est.extrapolated));
    let _ = writeln!(
        s,
        "pressure_one_last_increments: {}",
        tail.iter().map(|v| e16(*v)).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        s,
        "pressure_one_last_increments_positive: {}",
        tail.iter().all(|&v| v > 0.0)
    );
    let (lo, hi, tol_t): (f64, f64, f64) = (cfg.get("t-lo")?, cfg.get("t-hi")?, cfg.get("tol-t")?);
    match bowen_zero_from_tree(&tree, lo, hi, tol_t) {
        Ok(z) => {
            let _ = writeln!(s, "bowen_zero: {}", e16(z.t));
        }
        Err(e) => {
            let _ = writeln!(s, "bowen_zero: {}: {e}", e.name());
        }
    }
    emit(out_path(cfg), s.as_bytes(), stdout)
}
