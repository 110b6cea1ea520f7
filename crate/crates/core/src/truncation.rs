//! Restricted maximal functions of gradients, the truncation sets
//! `R_α = {M ≤ α}`, the localized exhaustion `{C_l}`, and Luzin-type
//! selections.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::capacity::{
    capacity_compact, hausdorff_estimate, CapacityConfig, CapacityError, CapacityEstimate, Condenser,
};
use crate::grid::{
    mask_closure, precise_representative, DyadicLadder, GridDomain, GridError, MaskFlavor, RegionMask,
    ScalarField, VectorField,
};
use crate::sobolev::{gradient, hessian_energy};
use crate::stencil;

/// Masks with at most this many cells are scanned over all pairs.
pub const EXHAUSTIVE_LIMIT: usize = 4096;

/// Cell layers excluded at the box faces when measuring Lipschitz
/// constants of a representative built from ball averages.
pub const REPRESENTATIVE_COLLAR: usize = 3;

#[derive(Debug, Error)]
pub enum TruncationError {
    #[error("radius ladder is empty")]
    EmptyLadder,
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("point {0:?} is not in the truncation set")]
    PointNotInSet(Vec<f64>),
    #[error("smallest radius {smallest} is below the grid spacing {h}")]
    LadderTooDeep { smallest: f64, h: f64 },
    #[error("mask minus exclusion is empty")]
    EmptyMask,
    #[error("alpha ladder has {alphas} levels but {nested} nested domains were requested")]
    LadderShorterThanNesting { alphas: usize, nested: usize },
    #[error("alpha ladder must be strictly increasing")]
    AlphasNotIncreasing,
    #[error("residual never fell below eps = {eps} (best {best})")]
    ResidualNeverBelowEps { eps: f64, best: f64 },
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
    #[error("eps must be positive, got {0}")]
    InvalidEps(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

pub type Result<T> = std::result::Result<T, TruncationError>;

/// Dyadic radii `h, 2h, 4h, ...` up to the box diameter.
pub fn dyadic_radii(d: &GridDomain) -> Vec<f64> {
    let h = d.spacing();
    let diam = d.diameter();
    let mut out = Vec::new();
    let mut r = h;
    while r <= diam * (1.0 + 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out
}

/// `M(x) = max_r |g|_{B(x, r)}` over a radius ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximalField {
    pub values: ScalarField,
    pub radii: Vec<f64>,
}

impl MaximalField {
    pub fn max(&self) -> f64 {
        self.values.max()
    }
}

/// Pointwise maximum over `radii` of the averages of `|g|` over
/// `B(x, r) ∩ box`.
pub fn restricted_maximal(g: &VectorField, radii: &[f64]) -> Result<MaximalField> {
    if radii.is_empty() {
        return Err(TruncationError::EmptyLadder);
    }
    let norm = g.norm_field();
    let d = norm.domain().clone();
    let h = d.spacing();
    let mut out = vec![f64::NEG_INFINITY; d.len()];
    for &r in radii {
        if !(r >= h * (1.0 - 1e-12)) {
            return Err(TruncationError::LadderTooDeep { smallest: r, h });
        }
        let means = stencil::ball_means_in_box(&norm, r);
        for (o, m) in out.iter_mut().zip(means) {
            *o = o.max(m);
        }
    }
    Ok(MaximalField { values: ScalarField::new(d, out)?, radii: radii.to_vec() })
}

/// Closed truncation set `{M ≤ α}`.
pub fn truncation_set(m: &MaximalField, alpha: f64) -> Result<RegionMask> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(TruncationError::InvalidAlpha(alpha));
    }
    let d = m.values.domain();
    let cells = m.values.values().iter().map(|&v| v <= alpha).collect();
    let raw = RegionMask::new(d.clone(), cells)?;
    Ok(mask_closure(&raw).with_flavor(MaskFlavor::Closed))
}

/// Dyadic differences of ball averages at `x` and their normalized sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct TelescopingReport {
    /// `f_{B(x, r/2^(k+1))} - f_{B(x, r/2^k)}` for `k = 0..K`.
    pub differences: Vec<f64>,
    /// `|difference_k| 2^k / (r α)`.
    pub defects: Vec<f64>,
    /// `f*(x) - f_{B(x, r)}` from the supplied representative.
    pub endpoint_gap: f64,
}

impl TelescopingReport {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().copied().fold(0.0, f64::max)
    }

    /// Sum of the signed differences, `f_{B(x, r/2^K)} - f_{B(x, r)}`.
    pub fn telescoped(&self) -> f64 {
        self.differences.iter().sum()
    }
}

pub fn telescoping_defect(
    f: &ScalarField,
    fstar: &ScalarField,
    maximal: &MaximalField,
    x: &[f64],
    r: f64,
    alpha: f64,
    levels: usize,
) -> Result<TelescopingReport> {
    let d = f.domain();
    let h = d.spacing();
    let smallest = r / 2f64.powi(levels as i32);
    if levels == 0 || smallest < h * (1.0 - 1e-12) {
        return Err(TruncationError::LadderTooDeep { smallest, h });
    }
    let set = truncation_set(maximal, alpha)?;
    let cell = d.locate(x).ok_or_else(|| TruncationError::PointNotInSet(x.to_vec()))?;
    if !set.contains(cell) {
        return Err(TruncationError::PointNotInSet(x.to_vec()));
    }
    let means: Vec<f64> = (0..=levels)
        .map(|k| crate::grid::ball_average(f, x, r / 2f64.powi(k as i32)))
        .collect::<std::result::Result<_, _>>()?;
    let differences: Vec<f64> = means.windows(2).map(|w| w[1] - w[0]).collect();
    let defects = differences
        .iter()
        .enumerate()
        .map(|(k, v)| v.abs() * 2f64.powi(k as i32) / (r * alpha))
        .collect();
    Ok(TelescopingReport { differences, defects, endpoint_gap: fstar.get(cell) - means[0] })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzEstimate {
    pub constant: f64,
    pub pairs: usize,
    pub exhaustive: bool,
    pub seed: u64,
}

/// Largest difference quotient of `fstar` between cell centers of
/// `m ∖ excl`; all pairs when at most [`EXHAUSTIVE_LIMIT`] cells remain,
/// otherwise `sample_pairs` pairs drawn from a seeded generator.
pub fn lipschitz_constant_on_mask(
    fstar: &ScalarField,
    m: &RegionMask,
    excl: &RegionMask,
    sample_pairs: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    let d = fstar.domain();
    let keep = m.difference(excl)?;
    let cells: Vec<usize> = keep.indices().collect();
    if cells.is_empty() || sample_pairs == 0 {
        return Err(TruncationError::EmptyMask);
    }
    let dim = d.dim();
    let pts: Vec<[f64; 3]> = cells.iter().map(|&i| d.center(i)).collect();
    let vals: Vec<f64> = cells.iter().map(|&i| fstar.get(i)).collect();
    let quotient = |a: usize, b: usize| {
        let dist = (0..dim).map(|k| (pts[a][k] - pts[b][k]).powi(2)).sum::<f64>().sqrt();
        (vals[a] - vals[b]).abs() / dist
    };
    let n = cells.len();
    let mut best = 0.0f64;
    if n <= EXHAUSTIVE_LIMIT {
        for a in 0..n {
            for b in a + 1..n {
                best = best.max(quotient(a, b));
            }
        }
        return Ok(LipschitzEstimate { constant: best, pairs: n * (n - 1) / 2, exhaustive: true, seed });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn = 0;
    while drawn < sample_pairs {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        best = best.max(quotient(a, b));
        drawn += 1;
    }
    Ok(LipschitzEstimate { constant: best, pairs: drawn, exhaustive: false, seed })
}

/// Settings shared by ladder constructions.
#[derive(Clone, Debug)]
pub struct LadderOptions {
    pub radii: Option<Vec<f64>>,
    /// Cauchy tolerance of the precise representative; defaults to
    /// `0.1 h` times the mean gradient norm.
    pub cauchy_tol: Option<f64>,
    pub sample_pairs: usize,
    pub seed: u64,
    /// Layers by which the exceptional mask is dilated before measuring.
    pub exceptional_dilation: usize,
    /// Exponent for complement capacities; `None` skips them.
    pub capacity_p: Option<f64>,
    pub capacity: CapacityConfig,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self {
            radii: None,
            cauchy_tol: None,
            sample_pairs: 200_000,
            seed: 0,
            exceptional_dilation: 0,
            capacity_p: None,
            capacity: CapacityConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncationLadder {
    pub alphas: Vec<f64>,
    pub masks: Vec<RegionMask>,
    pub exceptional: RegionMask,
    pub lipschitz: Vec<f64>,
    /// Complement capacities per level (empty when not requested).
    pub complement_capacity: Vec<f64>,
}

impl TruncationLadder {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn is_nested(&self) -> bool {
        self.masks.windows(2).all(|w| w[0].is_subset_of(&w[1]))
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(" ");
        writeln!(s, "levels = {}", self.masks.len()).unwrap();
        writeln!(s, "alphas = {}", join(&self.alphas)).unwrap();
        writeln!(s, "lipschitz = {}", join(&self.lipschitz)).unwrap();
        writeln!(s, "complement_capacity = {}", join(&self.complement_capacity)).unwrap();
        writeln!(s, "exceptional_cells = {}", self.exceptional.count()).unwrap();
        s
    }
}

fn default_cauchy_tol(f: &ScalarField) -> f64 {
    let g = gradient(f).norm_field();
    let mean = g.values().iter().sum::<f64>() / g.values().len() as f64;
    0.1 * f.domain().spacing() * mean.max(1e-9)
}

/// Precise representative from the two finest dyadic radii and its flagged
/// non-convergence mask. Flags are kept only off the boundary collar, where
/// the averages do not depend on the extension mode.
pub fn representative(f: &ScalarField, cauchy_tol: Option<f64>) -> Result<(ScalarField, RegionMask)> {
    let tol = cauchy_tol.unwrap_or_else(|| default_cauchy_tol(f));
    let d = f.domain();
    let (fstar, flagged) = precise_representative(f, DyadicLadder::new(2.0 * d.spacing(), 1), tol)?;
    let flagged = flagged.intersection(&RegionMask::core(d, REPRESENTATIVE_COLLAR))?;
    Ok((fstar, flagged))
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    for &a in alphas {
        if !(a > 0.0) || !a.is_finite() {
            return Err(TruncationError::InvalidAlpha(a));
        }
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TruncationError::AlphasNotIncreasing);
    }
    Ok(())
}

fn complement_capacity(mask: &RegionMask, p: f64, config: &CapacityConfig) -> Result<f64> {
    let plate = mask.complement();
    Ok(capacity_compact(&Condenser::clipped(&plate, p)?, config).value)
}

/// Ladder of truncation sets `R_α` of `f` over `alphas`.
pub fn truncation_ladder(f: &ScalarField, alphas: &[f64], opts: &LadderOptions) -> Result<TruncationLadder> {
    check_alphas(alphas)?;
    let d = f.domain();
    let radii = opts.radii.clone().unwrap_or_else(|| dyadic_radii(d));
    let maximal = restricted_maximal(&gradient(f), &radii)?;
    let (fstar, flagged) = representative(f, opts.cauchy_tol)?;
    let exceptional = flagged.dilate(opts.exceptional_dilation);
    let excl = exceptional.union(&RegionMask::core(d, REPRESENTATIVE_COLLAR).complement())?;
    let mut masks = Vec::with_capacity(alphas.len());
    let mut lipschitz = Vec::with_capacity(alphas.len());
    let mut caps = Vec::new();
    for &a in alphas {
        let m = truncation_set(&maximal, a)?;
        let lip = match lipschitz_constant_on_mask(&fstar, &m, &excl, opts.sample_pairs, opts.seed) {
            Ok(l) => l.constant,
            Err(TruncationError::EmptyMask) => 0.0,
            Err(e) => return Err(e),
        };
        lipschitz.push(lip);
        if let Some(p) = opts.capacity_p {
            caps.push(complement_capacity(&m, p, &opts.capacity)?);
        }
        masks.push(m);
    }
    Ok(TruncationLadder { alphas: alphas.to_vec(), masks, exceptional, lipschitz, complement_capacity: caps })
}

/// `6t^5 - 15t^4 + 10t^3` clamped to `[0, 1]`.
fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Nested open boxes `Ω_k` shrunk from the domain by margins.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedBoxes {
    /// Margin of `Ω_k` for `k = 1..=K+1`.
    pub margins: Vec<f64>,
}

impl NestedBoxes {
    pub fn new(d: &GridDomain, count: usize) -> Self {
        let h = d.spacing();
        let half = (0..d.dim()).map(|a| 0.5 * (d.upper()[a] - d.lower()[a])).fold(f64::INFINITY, f64::min);
        let floor = (REPRESENTATIVE_COLLAR as f64) * h;
        let margins = (1..=count + 1).map(|k| (half / 2f64.powi(k as i32)).max(floor)).collect();
        Self { margins }
    }

    /// Closed box `closure(Ω_k)` as a mask (`k` starts at 1).
    pub fn closed_mask(&self, d: &GridDomain, k: usize) -> RegionMask {
        let m = self.margins[k - 1];
        RegionMask::from_fn(d, |x| {
            (0..d.dim()).all(|a| x[a] >= d.lower()[a] + m && x[a] <= d.upper()[a] - m)
        })
        .with_flavor(MaskFlavor::Closed)
    }

    /// Cutoff equal to 1 on `closure(Ω_k)` and vanishing outside `Ω_(k+1)`.
    pub fn cutoff(&self, d: &GridDomain, k: usize) -> ScalarField {
        let inner = self.margins[k - 1];
        let outer = self.margins[k];
        let width = (inner - outer).max(f64::MIN_POSITIVE);
        ScalarField::from_fn(d, |x| {
            (0..d.dim())
                .map(|a| {
                    let dist = (x[a] - d.lower()[a]).min(d.upper()[a] - x[a]);
                    if inner <= outer {
                        if dist >= inner { 1.0 } else { 0.0 }
                    } else {
                        smoothstep5((dist - outer) / width)
                    }
                })
                .product()
        })
        .expect("cutoff values are finite")
    }
}

/// Localized exhaustion `C_l = (⋂_{k≥l} A^k) ∩ closure(Ω_l)` where `A^k`
/// is the truncation set of `ζ_k f` at `α_k`. Without `alphas` the level
/// thresholds follow `α_k^p = 2^k ‖∇²(ζ_k f)‖_p^p`.
pub fn exhaustion(
    f: &ScalarField,
    alphas: Option<&[f64]>,
    nested: usize,
    p: f64,
    opts: &LadderOptions,
) -> Result<TruncationLadder> {
    let d = f.domain();
    if nested == 0 {
        return Err(TruncationError::LadderShorterThanNesting { alphas: 0, nested });
    }
    if let Some(a) = alphas {
        if a.len() < nested {
            return Err(TruncationError::LadderShorterThanNesting { alphas: a.len(), nested });
        }
        check_alphas(&a[..nested])?;
    }
    let boxes = NestedBoxes::new(d, nested);
    let radii = opts.radii.clone().unwrap_or_else(|| dyadic_radii(d));
    let mut level_alphas = Vec::with_capacity(nested);
    let mut sets = Vec::with_capacity(nested);
    for k in 1..=nested {
        let fk = f.zip_with(&boxes.cutoff(d, k), |a, b| a * b)?;
        let alpha = match alphas {
            Some(a) => a[k - 1],
            None => (2f64.powi(k as i32) * hessian_energy(&fk, p)).powf(1.0 / p).max(1e-12),
        };
        let maximal = restricted_maximal(&gradient(&fk), &radii)?;
        sets.push(truncation_set(&maximal, alpha)?);
        level_alphas.push(alpha);
    }
    let (fstar, flagged) = representative(f, opts.cauchy_tol)?;
    let exceptional = flagged.dilate(opts.exceptional_dilation);
    let mut masks = Vec::with_capacity(nested);
    let mut lipschitz = Vec::with_capacity(nested);
    let mut caps = Vec::new();
    for l in 1..=nested {
        let mut b = sets[l - 1].clone();
        for s in &sets[l..] {
            b = b.intersection(s)?;
        }
        let c = mask_closure(&b.intersection(&boxes.closed_mask(d, l))?).with_flavor(MaskFlavor::Closed);
        let lip = match lipschitz_constant_on_mask(&fstar, &c, &exceptional, opts.sample_pairs, opts.seed) {
            Ok(e) => e.constant,
            Err(TruncationError::EmptyMask) => 0.0,
            Err(e) => return Err(e),
        };
        lipschitz.push(lip);
        if let Some(cp) = opts.capacity_p {
            caps.push(complement_capacity(&sets[l - 1], cp, &opts.capacity)?);
        }
        masks.push(c);
    }
    Ok(TruncationLadder { alphas: level_alphas, masks, exceptional, lipschitz, complement_capacity: caps })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChebyshevCheck {
    /// Capacity of the complement of `R_α`.
    pub lhs: f64,
    /// `α^(-p) ‖∇²f‖_p^p`.
    pub rhs_without_constant: f64,
    /// `lhs / rhs_without_constant`, the empirical constant.
    pub ratio: f64,
}

pub fn chebyshev_bound_check(f: &ScalarField, alpha: f64, complement_capacity: f64, p: f64) -> ChebyshevCheck {
    let rhs = alpha.powf(-p) * hessian_energy(f, p);
    let ratio = if complement_capacity == 0.0 {
        0.0
    } else if rhs > 0.0 {
        complement_capacity / rhs
    } else {
        f64::INFINITY
    };
    ChebyshevCheck { lhs: complement_capacity, rhs_without_constant: rhs, ratio }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevSweep {
    pub alphas: Vec<f64>,
    pub checks: Vec<ChebyshevCheck>,
    /// Least-squares slope of `ln lhs` against `ln α` over positive entries.
    pub slope: f64,
    /// Largest empirical constant over the sweep.
    pub constant: f64,
    pub max_maximal: f64,
}

/// Complement capacities of `R_α` of `f` over `alphas` with their Chebyshev
/// ratios. Without `alphas`, one decade below the maximum of `M` in ten
/// geometric steps.
pub fn chebyshev_sweep(
    f: &ScalarField,
    alphas: Option<&[f64]>,
    p: f64,
    radii: Option<&[f64]>,
    config: &CapacityConfig,
) -> Result<ChebyshevSweep> {
    let d = f.domain();
    let default_radii = dyadic_radii(d);
    let maximal = restricted_maximal(&gradient(f), radii.unwrap_or(&default_radii))?;
    let top = maximal.max();
    let ladder: Vec<f64> = match alphas {
        Some(a) => a.to_vec(),
        None => (0..10).rev().map(|k| top * 10f64.powf(-(k as f64 + 1.0) / 10.0)).collect(),
    };
    check_alphas(&ladder)?;
    let mut checks = Vec::with_capacity(ladder.len());
    for &a in &ladder {
        let cap = complement_capacity(&truncation_set(&maximal, a)?, p, config)?;
        checks.push(chebyshev_bound_check(f, a, cap, p));
    }
    let pts: Vec<(f64, f64)> =
        ladder.iter().zip(&checks).filter(|(_, c)| c.lhs > 0.0).map(|(a, c)| (a.ln(), c.lhs.ln())).collect();
    let slope = fit_slope(&pts);
    let constant = checks.iter().map(|c| c.ratio).fold(0.0, f64::max);
    Ok(ChebyshevSweep { alphas: ladder, checks, slope, constant, max_maximal: top })
}

/// Least-squares slope; NaN with fewer than two points.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LuzinMode {
    /// Residual measured by the `H^(n-1)` estimate.
    Hausdorff,
    /// Residual measured by p-capacity; masks enter through their interiors.
    Capacity { p: f64 },
}

#[derive(Clone, Debug)]
pub struct LuzinSelection {
    pub selected: RegionMask,
    /// Number of ladder masks used (0 means none).
    pub level: usize,
    pub residual: f64,
    pub excluded: RegionMask,
}

/// Smallest prefix of the ladder whose union (or union of interiors) leaves
/// a residual of `b` below `eps`.
pub fn luzin_select(
    b: &RegionMask,
    ladder: &TruncationLadder,
    eps: f64,
    mode: LuzinMode,
    config: &CapacityConfig,
) -> Result<LuzinSelection> {
    if !(eps > 0.0) {
        return Err(TruncationError::InvalidEps(eps));
    }
    let d = b.domain();
    let parts: Vec<RegionMask> = match mode {
        LuzinMode::Hausdorff => {
            if d.dim() < 2 {
                return Err(TruncationError::PreconditionUnmet("H^(n-1) needs n >= 2".into()));
            }
            let est = hausdorff_estimate(b, d.dim() as f64 - 1.0, &[]).value;
            if !est.is_finite() {
                return Err(TruncationError::PreconditionUnmet("H^(n-1)(B) is not finite".into()));
            }
            ladder.masks.clone()
        }
        LuzinMode::Capacity { .. } => {
            let interiors: Vec<RegionMask> = ladder.masks.iter().map(|m| m.interior()).collect();
            let mut all = RegionMask::empty(d);
            for m in &interiors {
                all = all.union(m)?;
            }
            if !b.is_subset_of(&all) {
                return Err(TruncationError::PreconditionUnmet("B is not inside the union of mask interiors".into()));
            }
            interiors
        }
    };
    let residual_of = |rest: &RegionMask| -> Result<f64> {
        Ok(match mode {
            LuzinMode::Hausdorff => hausdorff_estimate(rest, d.dim() as f64 - 1.0, &[]).value,
            LuzinMode::Capacity { p } => capacity_compact(&Condenser::clipped(rest, p)?, config).value,
        })
    };
    let mut union = RegionMask::empty(d);
    let mut best = f64::INFINITY;
    for level in 0..=parts.len() {
        if level > 0 {
            union = union.union(&parts[level - 1])?;
        }
        let excluded = b.difference(&union)?;
        let residual = residual_of(&excluded)?;
        best = best.min(residual);
        if residual < eps {
            return Ok(LuzinSelection { selected: b.intersection(&union)?, level, residual, excluded });
        }
    }
    Err(TruncationError::ResidualNeverBelowEps { eps, best })
}

#[derive(Clone, Debug)]
pub struct QuasiLipschitzCover {
    pub cover: RegionMask,
    pub alpha: f64,
    pub capacity: CapacityEstimate,
    pub lipschitz: f64,
}

/// Open cover `V` of the complement of `R_α ∖ E`, dilated by one layer, for
/// the largest `α` of the ladder (default: the maximum of `M`) whose cover
/// has capacity at most `eps`.
pub fn quasi_lipschitz_cover(
    f: &ScalarField,
    eps: f64,
    p: f64,
    alphas: Option<&[f64]>,
    opts: &LadderOptions,
) -> Result<QuasiLipschitzCover> {
    if !(eps > 0.0) {
        return Err(TruncationError::InvalidEps(eps));
    }
    let d = f.domain();
    let radii = opts.radii.clone().unwrap_or_else(|| dyadic_radii(d));
    let maximal = restricted_maximal(&gradient(f), &radii)?;
    let ladder: Vec<f64> = alphas.map(|a| a.to_vec()).unwrap_or_else(|| vec![maximal.max().max(1e-300)]);
    check_alphas(&ladder)?;
    let (fstar, flagged) = representative(f, opts.cauchy_tol)?;
    let mut best = f64::INFINITY;
    for &alpha in ladder.iter().rev() {
        let kept = truncation_set(&maximal, alpha)?.difference(&flagged)?;
        let cover = kept.complement().dilate(1).with_flavor(MaskFlavor::Open);
        let cap = capacity_compact(&Condenser::clipped(&cover, p)?, &opts.capacity);
        best = best.min(cap.value);
        if cap.value <= eps {
            let outside = cover.complement().intersection(&RegionMask::core(d, REPRESENTATIVE_COLLAR))?;
            let none = RegionMask::empty(d);
            let lipschitz = match lipschitz_constant_on_mask(&fstar, &outside, &none, opts.sample_pairs, opts.seed) {
                Ok(e) => e.constant,
                Err(TruncationError::EmptyMask) => 0.0,
                Err(e) => return Err(e),
            };
            return Ok(QuasiLipschitzCover { cover, alpha, capacity: cap, lipschitz });
        }
    }
    Err(TruncationError::ResidualNeverBelowEps { eps, best })
}

#[cfg(test)]
mod tests;
