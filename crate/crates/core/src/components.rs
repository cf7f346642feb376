//! Connected components of the preimages `f^{-n}(D(0,R))` on a pixel grid:
//! the nested chain of components around a seed, detection of the
//! polynomial-like restriction `f: U_{m+1} -> U_m`, and the search for a
//! second branch component `V` inside `U_m` that avoids `U_{m+1}`.

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::escape::{classify, classify_tracking_cycles, connectivity_class, Connectivity, DynSetup, CYCLE_TOL};
use crate::grid::{ComplexBox, PixelGrid};
use crate::polynomial::{ComplexPoint, Precision, Root};
use crate::sampling::halton_points;

/// Default cap when probing for the first polynomial-like level.
pub const DEFAULT_LEVEL_CAP: usize = 12;
/// Root tolerance used when pulling points back through the grid levels.
const PULLBACK_TOL: f64 = 1e-10;

/// How a point near a component boundary is treated by membership tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collar {
    /// The pixel containing the point decides.
    Exact,
    /// Accept if any pixel of the surrounding 3x3 block belongs.
    Dilate,
    /// Accept only if the whole 3x3 block belongs.
    Erode,
}

/// Per-component summary of a labelled level.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentInfo {
    pub label: u32,
    pub pixel_count: usize,
    /// Inclusive pixel bounds `(col_min, col_max, row_min, row_max)`.
    pub pixel_bounds: (usize, usize, usize, usize),
    /// Critical points (with multiplicity) whose pixel carries this label.
    pub critical: Vec<Root>,
}

impl ComponentInfo {
    pub fn bbox(&self, grid: &PixelGrid) -> ComplexBox {
        let (c0, c1, r0, r1) = self.pixel_bounds;
        let (hx, hy) = (grid.pitch_re() / 2.0, grid.pitch_im() / 2.0);
        let lo = grid.center(c0, r1);
        let hi = grid.center(c1, r0);
        ComplexBox {
            re_min: lo.re - hx,
            re_max: hi.re + hx,
            im_min: lo.im - hy,
            im_max: hi.im + hy,
        }
    }

    pub fn critical_count(&self) -> usize {
        self.critical.iter().map(|r| r.multiplicity).sum()
    }
}

/// Labelled components of `f^{-n}(D(0,R))` at one level. Label 0 marks
/// pixels outside the preimage, labels `1..` are assigned in raster-scan
/// discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelGrid {
    pub level: usize,
    pub grid: PixelGrid,
    pub labels: Vec<u32>,
    pub components: Vec<ComponentInfo>,
}

impl LevelGrid {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, label: u32) -> Option<&ComponentInfo> {
        label.checked_sub(1).and_then(|i| self.components.get(i as usize))
    }

    pub fn label_at(&self, z: ComplexPoint) -> u32 {
        self.grid
            .pixel_of(z)
            .map(|(c, r)| self.labels[self.grid.index(c, r)])
            .unwrap_or(0)
    }

    /// Pixel mask of one component.
    pub fn mask(&self, label: u32) -> ComponentMask {
        ComponentMask {
            grid: self.grid,
            level: self.level,
            label,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// Pixel indices of one component, in raster order.
    pub fn pixels(&self, label: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }

    /// Labels clamped to 255, as a binary PGM.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        let bytes: Vec<u8> = self.labels.iter().map(|&l| l.min(255) as u8).collect();
        crate::escape::write_pgm(&mut out, self.grid.width, self.grid.height, &bytes)
    }

    /// One record per component: label, pixel count, bounding box and the
    /// number of critical points it contains.
    pub fn sidecar(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# level: {}", self.level);
        let _ = writeln!(s, "# components: {}", self.components.len());
        let _ = writeln!(s, "label,pixels,re_min,re_max,im_min,im_max,critical");
        for c in &self.components {
            let b = c.bbox(&self.grid);
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                c.label,
                c.pixel_count,
                b.re_min,
                b.re_max,
                b.im_min,
                b.im_max,
                c.critical_count()
            );
        }
        s
    }
}

/// Pixel set of a single component, with collar-aware point membership.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMask {
    pub grid: PixelGrid,
    pub level: usize,
    pub label: u32,
    pub bits: Vec<bool>,
}

impl ComponentMask {
    pub fn pixel_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    fn bit(&self, col: isize, row: isize) -> bool {
        if col < 0 || row < 0 || col as usize >= self.grid.width || row as usize >= self.grid.height {
            return false;
        }
        self.bits[self.grid.index(col as usize, row as usize)]
    }

    pub fn contains(&self, z: ComplexPoint, collar: Collar) -> bool {
        let Some((col, row)) = self.grid.pixel_of(z) else {
            return false;
        };
        let (col, row) = (col as isize, row as isize);
        match collar {
            Collar::Exact => self.bit(col, row),
            Collar::Dilate => (-1..=1).any(|dr| (-1..=1).any(|dc| self.bit(col + dc, row + dr))),
            Collar::Erode => (-1..=1).all(|dr| (-1..=1).all(|dc| self.bit(col + dc, row + dr))),
        }
    }

    pub fn is_subset_of(&self, other: &ComponentMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn intersects(&self, other: &ComponentMask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(&a, &b)| a && b)
    }

    /// Whether the one-pixel dilation of `self` (inside the box) stays in `other`.
    pub fn closure_within(&self, other: &ComponentMask) -> bool {
        let (w, h) = (self.grid.width as isize, self.grid.height as isize);
        (0..h).all(|row| {
            (0..w).all(|col| {
                if !self.bit(col, row) {
                    return true;
                }
                (-1..=1).all(|dr| {
                    (-1..=1).all(|dc| {
                        let (c, r) = (col + dc, row + dr);
                        c < 0 || r < 0 || c >= w || r >= h || other.bit(c, r)
                    })
                })
            })
        })
    }

    /// Pixel centers of the component, in raster order.
    pub fn centers(&self) -> Vec<ComplexPoint> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then(|| self.grid.center_of_index(i)))
            .collect()
    }

    /// Up to `k` pixel centers spread evenly over the raster order.
    pub fn spread_centers(&self, k: usize) -> Vec<ComplexPoint> {
        let all = self.centers();
        if all.len() <= k {
            return all;
        }
        (0..k).map(|i| all[i * all.len() / k]).collect()
    }

    /// Hausdorff distance between the pixel centers and the segment `[a, b]`.
    pub fn hausdorff_to_segment(&self, a: ComplexPoint, b: ComplexPoint) -> f64 {
        let seg_dist = |z: ComplexPoint| {
            let ab = b - a;
            let t = (((z - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
            (z - (a + ab * t)).norm()
        };
        let from_mask = self.centers().into_iter().map(seg_dist).fold(0.0, f64::max);
        let step = self.grid.pitch() / 4.0;
        let samples = ((b - a).norm() / step).ceil().max(1.0) as usize;
        let from_segment = (0..=samples)
            .map(|i| self.nearest_center_distance(a + (b - a) * (i as f64 / samples as f64)))
            .fold(0.0, f64::max);
        from_mask.max(from_segment)
    }

    fn nearest_center_distance(&self, z: ComplexPoint) -> f64 {
        let g = &self.grid;
        let col = ((z.re - g.bbox.re_min) / g.pitch_re()).floor() as isize;
        let row = ((g.bbox.im_max - z.im) / g.pitch_im()).floor() as isize;
        let max_r = g.width.max(g.height) as isize;
        let mut best = f64::INFINITY;
        for radius in 0..=max_r {
            for dr in -radius..=radius {
                for dc in -radius..=radius {
                    if dr.abs() != radius && dc.abs() != radius {
                        continue;
                    }
                    if self.bit(col + dc, row + dr) {
                        let c = g.center((col + dc) as usize, (row + dr) as usize);
                        best = best.min((c - z).norm());
                    }
                }
            }
            // Any pixel further out is at least `radius` pitches away.
            if best <= radius as f64 * g.pitch_re().min(g.pitch_im()) {
                break;
            }
        }
        best
    }
}

/// Escape depths of every pixel center up to `n_max`, from which the
/// labelled level grids are derived.
#[derive(Debug, Clone)]
pub struct ComponentAtlas {
    pub setup: DynSetup,
    pub grid: PixelGrid,
    pub n_max: usize,
    /// Largest `n <= n_max` with `|f^j(center)| < R` for all `j <= n`, plus one;
    /// zero when the center itself lies outside the disc.
    depth: Vec<u16>,
    critical: Vec<Root>,
}

impl ComponentAtlas {
    pub fn build(setup: &DynSetup, grid: PixelGrid, n_max: usize) -> Result<Self> {
        if n_max >= u16::MAX as usize {
            return Err(Error::InvalidInput("level budget too large".into()));
        }
        let r2 = setup.radius * setup.radius;
        let mut depth = vec![0u16; grid.len()];
        depth.par_chunks_mut(grid.width).enumerate().for_each(|(row, line)| {
            for (col, d) in line.iter_mut().enumerate() {
                let mut z = grid.center(col, row);
                let mut n = 0u16;
                while (n as usize) <= n_max && z.norm_sqr() < r2 {
                    n += 1;
                    z = setup.poly.eval(z);
                }
                *d = n;
            }
        });
        let critical = setup.poly.critical_points(1e-10)?;
        Ok(ComponentAtlas {
            setup: setup.clone(),
            grid,
            n_max,
            depth,
            critical,
        })
    }

    pub fn critical_points(&self) -> &[Root] {
        &self.critical
    }

    /// Whether the pixel with index `idx` lies in `f^{-n}(D(0,R))`.
    #[inline]
    pub fn inside(&self, idx: usize, n: usize) -> bool {
        self.depth[idx] as usize > n
    }

    /// Labels the components of level `n` by 4-connected flood fill.
    pub fn level(&self, n: usize) -> Result<LevelGrid> {
        if n > self.n_max {
            return Err(Error::InvalidInput(format!(
                "level {n} beyond atlas budget {}",
                self.n_max
            )));
        }
        let (labels, components) = label_binary(&self.grid, |idx| self.inside(idx, n));
        let mut level = LevelGrid {
            level: n,
            grid: self.grid,
            labels,
            components,
        };
        for root in &self.critical {
            if let Some(label) = locate_label(&level, root.z) {
                level.components[label as usize - 1].critical.push(*root);
            }
        }
        Ok(level)
    }
}

/// 4-connected components of the pixels where `inside` holds. Labels start
/// at 1 in raster-scan discovery order; 0 marks outside pixels.
pub fn label_binary(grid: &PixelGrid, inside: impl Fn(usize) -> bool) -> (Vec<u32>, Vec<ComponentInfo>) {
    let (w, h) = (grid.width, grid.height);
    let mut labels = vec![0u32; grid.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if labels[start] != 0 || !inside(start) {
            continue;
        }
        let label = components.len() as u32 + 1;
        let mut info = ComponentInfo {
            label,
            pixel_count: 0,
            pixel_bounds: (usize::MAX, 0, usize::MAX, 0),
            critical: Vec::new(),
        };
        labels[start] = label;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (col, row) = (idx % w, idx / w);
            info.pixel_count += 1;
            let b = &mut info.pixel_bounds;
            b.0 = b.0.min(col);
            b.1 = b.1.max(col);
            b.2 = b.2.min(row);
            b.3 = b.3.max(row);
            let mut visit = |j: usize| {
                if labels[j] == 0 && inside(j) {
                    labels[j] = label;
                    stack.push(j);
                }
            };
            if col > 0 {
                visit(idx - 1);
            }
            if col + 1 < w {
                visit(idx + 1);
            }
            if row > 0 {
                visit(idx - w);
            }
            if row + 1 < h {
                visit(idx + w);
            }
        }
        components.push(info);
    }
    (labels, components)
}

/// Label of the pixel containing `z`; if that pixel is outside the level,
/// the unique label among its 3x3 neighbours, if any.
fn locate_label(level: &LevelGrid, z: ComplexPoint) -> Option<u32> {
    let (col, row) = level.grid.pixel_of(z)?;
    let own = level.labels[level.grid.index(col, row)];
    if own != 0 {
        return Some(own);
    }
    let mut found = None;
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            let (c, r) = (col as isize + dc, row as isize + dr);
            if c < 0 || r < 0 || c as usize >= level.grid.width || r as usize >= level.grid.height {
                continue;
            }
            let l = level.labels[level.grid.index(c as usize, r as usize)];
            if l != 0 {
                match found {
                    None => found = Some(l),
                    Some(prev) if prev != l => return None,
                    _ => {}
                }
            }
        }
    }
    found
}

/// Labelled level `n` on a fresh grid.
pub fn level_grid(setup: &DynSetup, n: usize, bbox: ComplexBox, width: usize, height: usize) -> Result<LevelGrid> {
    let grid = PixelGrid::new(bbox, width, height)?;
    ComponentAtlas::build(setup, grid, n)?.level(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainLevel {
    pub level: usize,
    pub label: u32,
    pub pixel_count: usize,
    pub pixel_bounds: (usize, usize, usize, usize),
}

/// The components `U_0(C) ⊃ U_1(C) ⊃ ...` containing a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentChain {
    pub seed: ComplexPoint,
    pub levels: Vec<ChainLevel>,
    /// `nested[n]`: pixels of level `n + 1` are a subset of those of level `n`.
    pub nested: Vec<bool>,
    /// `closure_nested[n]`: the one-pixel dilation of level `n + 1` stays in level `n`.
    pub closure_nested: Vec<bool>,
}

impl ComponentChain {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn all_nested(&self) -> bool {
        self.nested.iter().all(|&b| b)
    }

    pub fn areas(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.pixel_count).collect()
    }

    /// Pixel mask of the chain component at level `n`.
    pub fn mask(&self, atlas: &ComponentAtlas, n: usize) -> Result<ComponentMask> {
        let lvl = self
            .levels
            .get(n)
            .ok_or_else(|| Error::InvalidInput(format!("chain has no level {n}")))?;
        Ok(atlas.level(n)?.mask(lvl.label))
    }
}

/// Follows the components containing `seed` through levels `0..=n_max`.
pub fn component_chain(atlas: &ComponentAtlas, seed: ComplexPoint, n_max: usize) -> Result<ComponentChain> {
    if n_max > atlas.n_max {
        return Err(Error::InvalidInput(format!(
            "chain depth {n_max} beyond atlas budget {}",
            atlas.n_max
        )));
    }
    if !classify_tracking_cycles(&atlas.setup, seed, CYCLE_TOL).is_bounded() {
        return Err(Error::SeedEscapes(seed));
    }
    let (col, row) = atlas
        .grid
        .pixel_of(seed)
        .ok_or_else(|| Error::InvalidInput(format!("seed {seed} outside the grid")))?;
    let seed_idx = atlas.grid.index(col, row);

    let mut levels = Vec::with_capacity(n_max + 1);
    let mut nested = Vec::with_capacity(n_max);
    let mut closure_nested = Vec::with_capacity(n_max);
    let mut prev: Option<ComponentMask> = None;
    for n in 0..=n_max {
        let lg = atlas.level(n)?;
        let label = lg.labels[seed_idx];
        if label == 0 {
            return Err(Error::ResolutionTooCoarse { level: n });
        }
        let info = lg.component(label).expect("label exists");
        levels.push(ChainLevel {
            level: n,
            label,
            pixel_count: info.pixel_count,
            pixel_bounds: info.pixel_bounds,
        });
        let mask = lg.mask(label);
        if let Some(p) = &prev {
            nested.push(mask.is_subset_of(p));
            closure_nested.push(mask.closure_within(p));
        }
        prev = Some(mask);
    }
    Ok(ComponentChain {
        seed,
        levels,
        nested,
        closure_nested,
    })
}

/// `F = f: U_{m+1} -> U_m`, certified at grid scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyLikeRestriction {
    pub level: usize,
    /// `U_m` (label at level `m`).
    pub outer_label: u32,
    /// `U_{m+1}` (label at level `m + 1`).
    pub inner_label: u32,
    pub degree: usize,
    /// Critical points of `f` inside `U_{m+1}`, with multiplicity.
    pub critical: Vec<Root>,
    pub outer: ComponentMask,
    pub inner: ComponentMask,
    /// Other level-`(m+1)` components inside `U_m` whose image could not be
    /// located because it left the grid.
    pub unresolved: usize,
}

impl PolyLikeRestriction {
    /// The whole grid as `U_m` and `U_{m+1}`: every preimage is kept. Used to
    /// compare restricted and unrestricted sums.
    pub fn full_plane(grid: PixelGrid, degree: usize) -> Self {
        let mask = ComponentMask {
            grid,
            level: 0,
            label: 1,
            bits: vec![true; grid.len()],
        };
        PolyLikeRestriction {
            level: 0,
            outer_label: 1,
            inner_label: 1,
            degree,
            critical: Vec::new(),
            outer: mask.clone(),
            inner: mask,
            unresolved: 0,
        }
    }
}

const IMAGE_SAMPLES: usize = 16;

/// Checks that `U_{m+1}` is the only component of `f^{-1}(U_m)` inside
/// `U_m`, and counts the critical points it contains.
pub fn detect_poly_like(
    setup: &DynSetup,
    atlas: &ComponentAtlas,
    chain: &ComponentChain,
    m: usize,
) -> Result<PolyLikeRestriction> {
    if m + 1 > chain.depth() {
        return Err(Error::InvalidInput(format!(
            "chain of depth {} cannot certify level {m}",
            chain.depth()
        )));
    }
    let outer_level = atlas.level(m)?;
    let inner_level = atlas.level(m + 1)?;
    let outer_label = chain.levels[m].label;
    let inner_label = chain.levels[m + 1].label;

    // Group pixels of level m+1 by component, keeping only those in U_m.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); inner_level.components.len()];
    for (idx, (&li, &lo)) in inner_level.labels.iter().zip(&outer_level.labels).enumerate() {
        if li != 0 && lo == outer_label {
            members[li as usize - 1].push(idx);
        }
    }
    let mut offending = 0;
    let mut unresolved = 0;
    for (k, pixels) in members.iter().enumerate() {
        let label = k as u32 + 1;
        if label == inner_label || pixels.is_empty() {
            continue;
        }
        let take = pixels.len().min(IMAGE_SAMPLES);
        let mut hits = 0;
        let mut located = 0;
        for i in 0..take {
            let z = outer_level.grid.center_of_index(pixels[i * pixels.len() / take]);
            let image = setup.poly.eval(z);
            if outer_level.grid.bbox.contains(image) {
                located += 1;
                if outer_level.label_at(image) == outer_label {
                    hits += 1;
                }
            }
        }
        if located == 0 {
            unresolved += 1;
        } else if 2 * hits > located {
            offending += 1;
        }
    }
    if offending > 0 {
        return Err(Error::NotYetPolyLike(m));
    }

    let critical = inner_level
        .component(inner_label)
        .map(|c| c.critical.clone())
        .unwrap_or_default();
    let count: usize = critical.iter().map(|r| r.multiplicity).sum();
    let degree = 1 + count;
    if degree < 2 {
        return Err(Error::DegenerateRestriction { level: m, degree });
    }
    if degree >= setup.poly.degree() {
        // Every critical point is still captured; with escaping critical
        // orbits the restriction cannot yet have C as its filled Julia set.
        let conn = connectivity_class(setup)?;
        if conn.class != Connectivity::Connected {
            return Err(Error::NotYetPolyLike(m));
        }
    }
    Ok(PolyLikeRestriction {
        level: m,
        outer_label,
        inner_label,
        degree,
        critical,
        outer: outer_level.mask(outer_label),
        inner: inner_level.mask(inner_label),
        unresolved,
    })
}

/// Probes `m = 1, 2, ...` up to `cap` for the first polynomial-like level.
pub fn first_poly_like(
    setup: &DynSetup,
    atlas: &ComponentAtlas,
    chain: &ComponentChain,
    cap: usize,
) -> Result<PolyLikeRestriction> {
    let last = cap.min(chain.depth().saturating_sub(1));
    for m in 1..=last {
        match detect_poly_like(setup, atlas, chain, m) {
            Ok(r) => return Ok(r),
            Err(Error::NotYetPolyLike(_)) | Err(Error::DegenerateRestriction { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NotYetPolyLike(last))
}

/// A component `V` of `f^{-n1}(D(0,R))` lying in `U_m` and disjoint from
/// `U_{m+1}`, with `f^{n1}(V) ⊇ U_m` checked on sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct VBranch {
    pub n1: usize,
    pub label: u32,
    pub bbox: ComplexBox,
    pub pixel_count: usize,
    pub mask: ComponentMask,
    /// A point of `V` whose orbit stays bounded (a preimage of the seed).
    pub bounded_witness: ComplexPoint,
}

/// Number of `U_m` sample points used to certify `f^{n1}(V) ⊇ U_m`.
pub const COVER_SAMPLES: usize = 64;

/// Searches levels `m+1 ..= level_cap` for the branch component `V`.
pub fn find_v_branch(
    setup: &DynSetup,
    atlas: &ComponentAtlas,
    chain: &ComponentChain,
    restriction: &PolyLikeRestriction,
    level_cap: usize,
) -> Result<VBranch> {
    let m = restriction.level;
    let cap = level_cap.min(atlas.n_max);
    let outer = &restriction.outer;
    let inner_level = atlas.level(m + 1)?;
    let samples = halton_points(outer, COVER_SAMPLES, Collar::Erode);
    for n1 in m + 1..=cap {
        let lg = atlas.level(n1)?;
        // Candidate labels: components inside U_m and outside U_{m+1}.
        let mut inside = vec![true; lg.components.len()];
        let mut touches_inner = vec![false; lg.components.len()];
        for (idx, &l) in lg.labels.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let k = l as usize - 1;
            if !outer.bits[idx] {
                inside[k] = false;
            }
            if inner_level.labels[idx] == restriction.inner_label {
                touches_inner[k] = true;
            }
        }
        let mut candidates: Vec<&ComponentInfo> = lg
            .components
            .iter()
            .filter(|c| inside[c.label as usize - 1] && !touches_inner[c.label as usize - 1])
            .collect();
        candidates.sort_by(|a, b| b.pixel_count.cmp(&a.pixel_count).then(a.label.cmp(&b.label)));
        for cand in candidates {
            let mask = lg.mask(cand.label);
            let covers = samples.iter().all(|&x| {
                pullback(setup, x, n1)
                    .map(|ys| ys.iter().any(|&(y, _)| mask.contains(y, Collar::Dilate)))
                    .unwrap_or(false)
            });
            if !covers {
                continue;
            }
            let witness = pullback(setup, chain.seed, n1)?.into_iter().map(|(y, _)| y).find(|&y| {
                mask.contains(y, Collar::Dilate) && classify_tracking_cycles(setup, y, CYCLE_TOL).is_bounded()
            });
            let Some(bounded_witness) = witness else {
                continue;
            };
            return Ok(VBranch {
                n1,
                label: cand.label,
                bbox: cand.bbox(&lg.grid),
                pixel_count: cand.pixel_count,
                mask,
                bounded_witness,
            });
        }
    }
    Err(Error::NotFound(cap))
}

/// All solutions of `f^n(y) = x` (with multiplicity), each paired with
/// `|(f^n)'(y)|`.
pub fn pullback(setup: &DynSetup, x: ComplexPoint, n: usize) -> Result<Vec<(ComplexPoint, f64)>> {
    let mut frontier = vec![(x, 1.0f64)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(frontier.len() * setup.poly.degree());
        for &(z, d) in &frontier {
            for r in setup.poly.preimages(z, PULLBACK_TOL, Precision::Double)? {
                let (_, dv) = setup.poly.eval_with_derivative(r.z);
                for _ in 0..r.multiplicity {
                    next.push((r.z, d * dv.norm()));
                }
            }
        }
        frontier = next;
    }
    Ok(frontier)
}

/// Strict escape-time check used by tests: no bounded orbit leaves the disc.
pub fn bounded_pixels_in(mask: &ComponentMask, setup: &DynSetup) -> usize {
    mask.centers()
        .into_iter()
        .filter(|&z| classify(setup, z).is_bounded())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::Polynomial;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cheb_atlas(n: usize, res: usize) -> (DynSetup, ComponentAtlas) {
        let s = DynSetup::new(Polynomial::chebyshev2()).unwrap();
        let bbox = ComplexBox::on_real_axis(-3.0, 3.0, 3.0, res).unwrap();
        let grid = PixelGrid::new(bbox, res, res).unwrap();
        let atlas = ComponentAtlas::build(&s, grid, n).unwrap();
        (s, atlas)
    }

    #[test]
    fn level_zero_is_disc_in_box() {
        let s = DynSetup::new(Polynomial::chebyshev2()).unwrap();
        let lg = level_grid(&s, 0, ComplexBox::centered(5.0).unwrap(), 50, 50).unwrap();
        assert_eq!(lg.component_count(), 1);
        for (i, &l) in lg.labels.iter().enumerate() {
            assert_eq!(l == 1, lg.grid.center_of_index(i).norm() < 4.0);
        }
    }

    #[test]
    fn chebyshev_level_five_single_component() {
        let (_, atlas) = cheb_atlas(5, 201);
        let lg = atlas.level(5).unwrap();
        assert_eq!(lg.component_count(), 1);
        let l = lg.label_at(c(0.0, 0.0));
        assert_eq!(l, 1);
        for x in [-2.0, -1.0, 0.5, 1.99] {
            assert_eq!(lg.label_at(c(x, 0.0)), 1);
        }
    }

    #[test]
    fn labels_follow_raster_discovery_order() {
        // Labels are 1..k and each first appears after all smaller ones.
        let s = DynSetup::new(Polynomial::from_real(&[-6.0, 0.0, 1.0]).unwrap()).unwrap();
        let lg = level_grid(&s, 2, ComplexBox::centered(4.0).unwrap(), 120, 120).unwrap();
        assert!(lg.component_count() >= 2);
        let mut next = 1;
        for &l in &lg.labels {
            if l == next {
                next += 1;
            }
            assert!(l < next);
        }
        assert_eq!(next as usize - 1, lg.component_count());
    }

    #[test]
    fn distinct_labels_are_not_adjacent() {
        let s = DynSetup::new(Polynomial::from_real(&[-6.0, 0.0, 1.0]).unwrap()).unwrap();
        let lg = level_grid(&s, 3, ComplexBox::centered(4.0).unwrap(), 150, 150).unwrap();
        let w = lg.grid.width;
        for (i, &l) in lg.labels.iter().enumerate() {
            if l == 0 {
                continue;
            }
            if i % w + 1 < w {
                let r = lg.labels[i + 1];
                assert!(r == 0 || r == l);
            }
            if i + w < lg.labels.len() {
                let d = lg.labels[i + w];
                assert!(d == 0 || d == l);
            }
        }
    }

    #[test]
    fn chebyshev_chain_shrinks_and_nests() {
        let (_, atlas) = cheb_atlas(8, 257);
        let chain = component_chain(&atlas, c(0.0, 0.0), 8).unwrap();
        assert!(chain.all_nested());
        let areas = chain.areas();
        // Deep levels thin out to the pixel row on the real axis.
        for w in areas.windows(2) {
            assert!(w[1] <= w[0], "{areas:?}");
        }
        assert!(areas[8] * 100 < areas[0]);
    }

    #[test]
    fn chain_rejects_escaping_seed() {
        let (_, atlas) = cheb_atlas(4, 65);
        assert_eq!(
            component_chain(&atlas, c(2.5, 0.0), 4).unwrap_err(),
            Error::SeedEscapes(c(2.5, 0.0))
        );
    }

    #[test]
    fn chebyshev_restriction_has_degree_two() {
        let (s, atlas) = cheb_atlas(8, 257);
        let chain = component_chain(&atlas, c(0.0, 0.0), 8).unwrap();
        let r = detect_poly_like(&s, &atlas, &chain, 3).unwrap();
        assert_eq!(r.degree, 2);
        assert_eq!(r.level, 3);
        assert!(r.inner.is_subset_of(&r.outer));
        assert_eq!(
            find_v_branch(&s, &atlas, &chain, &r, 8).unwrap_err(),
            Error::NotFound(8)
        );
    }

    #[test]
    fn collars() {
        let (_, atlas) = cheb_atlas(0, 60);
        let mask = atlas.level(0).unwrap().mask(1);
        assert!(mask.contains(c(0.0, 0.0), Collar::Erode));
        // just outside the disc of radius 4 but the box ends at 3: outside the grid
        assert!(!mask.contains(c(3.5, 0.0), Collar::Dilate));
        // a point in the boundary column of the box: erosion fails, exact succeeds
        let edge = c(2.99, 0.0);
        assert!(mask.contains(edge, Collar::Exact));
        assert!(!mask.contains(edge, Collar::Erode));
    }

    #[test]
    fn sidecar_lists_components() {
        let (_, atlas) = cheb_atlas(3, 101);
        let lg = atlas.level(3).unwrap();
        let s = lg.sidecar();
        assert!(s.contains("label,pixels,re_min,re_max,im_min,im_max,critical"));
        assert_eq!(
            s.lines().filter(|l| !l.starts_with('#')).count(),
            1 + lg.component_count()
        );
        assert!(s.lines().nth(3).unwrap().ends_with(",1"));
    }

    #[test]
    fn hausdorff_to_own_axis_row() {
        let (_, atlas) = cheb_atlas(0, 61);
        let lg = atlas.level(0).unwrap();
        // a synthetic mask: the real-axis row between -2 and 2
        let mut mask = lg.mask(1);
        for (i, b) in mask.bits.iter_mut().enumerate() {
            let z = lg.grid.center_of_index(i);
            *b = z.im.abs() < 1e-12 && z.re.abs() <= 2.0;
        }
        let d = mask.hausdorff_to_segment(c(-2.0, 0.0), c(2.0, 0.0));
        assert!(d <= lg.grid.pitch(), "{d}");
    }
}
