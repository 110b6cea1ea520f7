//! Grid maps `φ: Ω → R^n`, their Jacobians, preimage counts on a target
//! grid, and both sides of the change-of-variables formula with the
//! singular set excised.

use std::fmt::Write as _;

use thiserror::Error;

use crate::capacity::{capacity_outer, classify_decay, CapacityConfig, CapacityError, Decay};
use crate::grid::{GridDomain, GridError, RegionMask, ScalarField};
use crate::sobolev::gradient;
use crate::truncation::{restricted_maximal, truncation_ladder, LadderOptions, TruncationError, TruncationLadder};

/// Jacobians below this magnitude contribute nothing to the left side.
pub const DEGENERATE_JACOBIAN: f64 = 1e-14;

/// Floor of the denominator in the relative gap.
pub const GAP_FLOOR: f64 = 1e-12;

const MAX_SUBDIV_2D: usize = 12;
const MAX_SUBDIV_3D: usize = 4;

#[derive(Debug, Error)]
pub enum CovError {
    #[error("map needs {expected} components, got {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("test function takes negative value {0}")]
    NegativeTestFunction(f64),
    #[error("grids differ in dimension")]
    DimensionMismatch,
    #[error("subdivision must be at least 1")]
    InvalidSubdivision,
    #[error("candidate {0} does not decay under refinement")]
    CandidateNotNull(usize),
    #[error("probe needs at least one refinement level")]
    NoLevels,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Truncation(#[from] TruncationError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

pub type Result<T> = std::result::Result<T, CovError>;

/// Closed-form corpus maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticMap {
    Identity,
    Scaling(f64),
    /// `(x1, ..., xn) ↦ (|x1|, x2, ..., xn)`.
    Fold,
    /// `(x1, x2) ↦ (x1² - x2², 2 x1 x2)`.
    ComplexSquare,
    /// `x ↦ |x|^(β-1) x`.
    RadialStretch(f64),
}

impl AnalyticMap {
    pub fn apply(&self, x: &[f64]) -> [f64; 3] {
        let mut y = [0.0; 3];
        match *self {
            AnalyticMap::Identity => y[..x.len()].copy_from_slice(x),
            AnalyticMap::Scaling(c) => {
                for (o, v) in y.iter_mut().zip(x) {
                    *o = c * v;
                }
            }
            AnalyticMap::Fold => {
                y[..x.len()].copy_from_slice(x);
                y[0] = x[0].abs();
            }
            AnalyticMap::ComplexSquare => {
                y[0] = x[0] * x[0] - x[1] * x[1];
                y[1] = 2.0 * x[0] * x[1];
            }
            AnalyticMap::RadialStretch(beta) => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let s = if r > 0.0 { r.powf(beta - 1.0) } else { 0.0 };
                for (o, v) in y.iter_mut().zip(x) {
                    *o = s * v;
                }
            }
        }
        y
    }

    /// `|det Dφ(x)|` where defined.
    pub fn abs_jacobian(&self, x: &[f64]) -> f64 {
        let n = x.len() as i32;
        match *self {
            AnalyticMap::Identity | AnalyticMap::Fold => 1.0,
            AnalyticMap::Scaling(c) => c.abs().powi(n),
            AnalyticMap::ComplexSquare => 4.0 * (x[0] * x[0] + x[1] * x[1]),
            AnalyticMap::RadialStretch(beta) => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                beta * r.powf(n as f64 * (beta - 1.0))
            }
        }
    }

    pub fn as_str(&self) -> String {
        match self {
            AnalyticMap::Identity => "identity".into(),
            AnalyticMap::Scaling(c) => format!("scaling:{c}"),
            AnalyticMap::Fold => "fold".into(),
            AnalyticMap::ComplexSquare => "complex_square".into(),
            AnalyticMap::RadialStretch(b) => format!("radial_stretch:{b}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a.parse::<f64>().ok()?)),
            None => (s, None),
        };
        match (head, arg) {
            ("identity", None) => Some(AnalyticMap::Identity),
            ("scaling", Some(c)) => Some(AnalyticMap::Scaling(c)),
            ("fold", None) => Some(AnalyticMap::Fold),
            ("complex_square", None) => Some(AnalyticMap::ComplexSquare),
            ("radial_stretch", Some(b)) => Some(AnalyticMap::RadialStretch(b)),
            _ => None,
        }
    }
}

/// A map given by one component field per target coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolevMap {
    components: Vec<ScalarField>,
    form: Option<AnalyticMap>,
}

impl SobolevMap {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let dim = components.first().map_or(0, |c| c.domain().dim());
        if components.len() != dim || dim == 0 {
            return Err(CovError::ComponentCount { expected: dim.max(1), found: components.len() });
        }
        if components.iter().any(|c| c.domain() != components[0].domain()) {
            return Err(GridError::DomainMismatch.into());
        }
        Ok(Self { components, form: None })
    }

    pub fn from_analytic(domain: &GridDomain, form: AnalyticMap) -> Result<Self> {
        let components = (0..domain.dim())
            .map(|k| ScalarField::from_fn(domain, |x| form.apply(x)[k]))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { components, form: Some(form) })
    }

    /// Attach a closed form used for subcell sampling.
    pub fn with_form(mut self, form: AnalyticMap) -> Self {
        self.form = Some(form);
        self
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn form(&self) -> Option<AnalyticMap> {
        self.form
    }

    pub fn domain(&self) -> &GridDomain {
        self.components[0].domain()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// `φ(x)`: closed form when tagged, otherwise multilinear interpolation
    /// of the component fields.
    pub fn sample(&self, x: &[f64]) -> [f64; 3] {
        match self.form {
            Some(f) => f.apply(x),
            None => {
                let mut y = [0.0; 3];
                for (k, c) in self.components.iter().enumerate() {
                    y[k] = c.interpolate(x);
                }
                y
            }
        }
    }

    /// Componentwise scaling `c φ`; drops the analytic tag unless the map is
    /// itself a scaling or the identity.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let components = self.components.iter().map(|f| f.scaled(c)).collect::<std::result::Result<_, _>>()?;
        let form = match self.form {
            Some(AnalyticMap::Identity) => Some(AnalyticMap::Scaling(c)),
            Some(AnalyticMap::Scaling(a)) => Some(AnalyticMap::Scaling(a * c)),
            _ => None,
        };
        Ok(Self { components, form })
    }

    pub fn manifest_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "components = {}", self.components.len()).unwrap();
        match self.form {
            Some(f) => writeln!(s, "form = {}", f.as_str()).unwrap(),
            None => writeln!(s, "form = none").unwrap(),
        }
        for k in 0..self.components.len() {
            writeln!(s, "component = component_{k}.field").unwrap();
        }
        s
    }
}

/// Derivative matrix per cell, row `k` the gradient of component `k`.
fn derivative_rows(phi: &SobolevMap) -> Vec<Vec<ScalarField>> {
    phi.components.iter().map(|c| gradient(c).components().to_vec()).collect()
}

fn det(m: &[[f64; 3]; 3], n: usize) -> f64 {
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// `det Dφ` per cell from the central-difference derivative matrix.
pub fn jacobian(phi: &SobolevMap) -> ScalarField {
    let rows = derivative_rows(phi);
    let d = phi.domain();
    let n = phi.dim();
    let values = (0..d.len())
        .map(|i| {
            let mut m = [[0.0; 3]; 3];
            for r in 0..n {
                for c in 0..n {
                    m[r][c] = rows[r][c].get(i);
                }
            }
            det(&m, n)
        })
        .collect();
    ScalarField::new(d.clone(), values).expect("finite derivatives")
}

/// Largest Frobenius norm of `Dφ` over the cells of `a`.
fn derivative_bound(phi: &SobolevMap, a: &RegionMask) -> f64 {
    let rows = derivative_rows(phi);
    a.indices()
        .map(|i| rows.iter().flat_map(|r| r.iter().map(move |g| g.get(i).powi(2))).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Subdivision making each subcell image at most half a target cell wide.
pub fn auto_subdivision(phi: &SobolevMap, a: &RegionMask, target: &GridDomain) -> usize {
    let cap = if phi.dim() >= 3 { MAX_SUBDIV_3D } else { MAX_SUBDIV_2D };
    let l = derivative_bound(phi, a);
    let s = (2.0 * l * phi.domain().spacing() / target.spacing()).ceil();
    if s.is_finite() { (s as usize).clamp(2, cap) } else { cap }
}

/// Preimage counts per target cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplicityField {
    pub target: GridDomain,
    pub counts: Vec<u32>,
    pub source: String,
    pub subdiv: usize,
}

impl MultiplicityField {
    pub fn get(&self, idx: usize) -> u32 {
        self.counts[idx]
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Target cells with a positive count next to a cell of different count.
    pub fn collar(&self) -> RegionMask {
        let t = &self.target;
        let cells = (0..t.len())
            .map(|i| {
                let c = self.counts[i];
                let edge = (0..t.dim()).any(|a| {
                    let mi = t.multi_index(i);
                    mi[a] == 0 || mi[a] + 1 == t.cells()[a]
                });
                c > 0 && (edge || t.neighbors(i).any(|j| self.counts[j] != c))
            })
            .collect();
        RegionMask::new(t.clone(), cells).expect("same grid")
    }
}

struct Subcells {
    shape: [usize; 3],
    /// Target cell per subcell, `u32::MAX` when inactive.
    target: Vec<u32>,
}

fn deposit(phi: &SobolevMap, a: &RegionMask, target: &GridDomain, subdiv: usize) -> Subcells {
    let d = phi.domain();
    let dim = d.dim();
    let base = d.shape3();
    let mut shape = [1usize; 3];
    for k in 0..dim {
        shape[k] = base[k] * subdiv;
    }
    let hs = d.spacing() / subdiv as f64;
    let mut out = vec![u32::MAX; shape[0] * shape[1] * shape[2]];
    for i in a.indices() {
        let mi = d.multi_index(i);
        let s1 = if dim > 1 { subdiv } else { 1 };
        let s2 = if dim > 2 { subdiv } else { 1 };
        for a0 in 0..subdiv {
            for a1 in 0..s1 {
                for a2 in 0..s2 {
                    let sub = [a0, a1, a2];
                    let mut fine = [0usize; 3];
                    let mut x = [0.0; 3];
                    for k in 0..dim {
                        fine[k] = mi[k] * subdiv + sub[k];
                        x[k] = d.lower()[k] + (fine[k] as f64 + 0.5) * hs;
                    }
                    let y = phi.sample(&x[..dim]);
                    if let Some(t) = target.locate(&y[..dim]) {
                        out[(fine[0] * shape[1] + fine[1]) * shape[2] + fine[2]] = t as u32;
                    }
                }
            }
        }
    }
    Subcells { shape, target: out }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Number of distinct preimage clusters of every target cell: subcells of
/// `a` are joined when they touch (faces, edges or corners) and land in the
/// same target cell.
pub fn multiplicity(phi: &SobolevMap, a: &RegionMask, target: &GridDomain, subdiv: usize) -> Result<MultiplicityField> {
    if subdiv == 0 {
        return Err(CovError::InvalidSubdivision);
    }
    if target.dim() != phi.dim() {
        return Err(CovError::DimensionMismatch);
    }
    let cells = deposit(phi, a, target, subdiv);
    let [n0, n1, n2] = cells.shape;
    let len = cells.target.len();
    let mut parent: Vec<u32> = (0..len as u32).collect();
    // neighbors preceding in raster order
    let mut offsets = Vec::new();
    for d0 in -1i64..=1 {
        for d1 in -1i64..=1 {
            for d2 in -1i64..=1 {
                if (d0, d1, d2) < (0, 0, 0) && (n1 > 1 || d1 == 0) && (n2 > 1 || d2 == 0) {
                    offsets.push([d0, d1, d2]);
                }
            }
        }
    }
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let idx = (i0 * n1 + i1) * n2 + i2;
                let t = cells.target[idx];
                if t == u32::MAX {
                    continue;
                }
                for o in &offsets {
                    let j = [i0 as i64 + o[0], i1 as i64 + o[1], i2 as i64 + o[2]];
                    if j[0] < 0 || j[1] < 0 || j[2] < 0 || j[1] >= n1 as i64 || j[2] >= n2 as i64 {
                        continue;
                    }
                    let jdx = ((j[0] as usize * n1 + j[1] as usize) * n2) + j[2] as usize;
                    if cells.target[jdx] == t {
                        let ra = find(&mut parent, idx as u32);
                        let rb = find(&mut parent, jdx as u32);
                        if ra != rb {
                            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                            parent[hi as usize] = lo;
                        }
                    }
                }
            }
        }
    }
    let mut counts = vec![0u32; target.len()];
    for (idx, &t) in cells.target.iter().enumerate() {
        if t != u32::MAX && parent[idx] == idx as u32 {
            counts[t as usize] += 1;
        }
    }
    Ok(MultiplicityField { target: target.clone(), counts, source: format!("cells={}", a.count()), subdiv })
}

/// Target cells hit by some subcell of `a`.
pub fn image_mask(phi: &SobolevMap, a: &RegionMask, target: &GridDomain, subdiv: usize) -> Result<RegionMask> {
    if subdiv == 0 {
        return Err(CovError::InvalidSubdivision);
    }
    let cells = deposit(phi, a, target, subdiv);
    let mut m = RegionMask::empty(target);
    for &t in &cells.target {
        if t != u32::MAX {
            m.set(t as usize, true);
        }
    }
    Ok(m)
}

fn check_nonnegative(u: &ScalarField) -> Result<()> {
    let m = u.min();
    if m < 0.0 {
        return Err(CovError::NegativeTestFunction(m));
    }
    Ok(())
}

/// `Σ_{x ∈ A} u(φ(x)) |J(x, φ)| h^n` with `u` interpolated on its grid.
pub fn lhs_integral(phi: &SobolevMap, a: &RegionMask, u: &ScalarField) -> Result<f64> {
    check_nonnegative(u)?;
    let jac = jacobian(phi);
    Ok(lhs_with_jacobian(phi, a, u, &jac))
}

fn lhs_with_jacobian(phi: &SobolevMap, a: &RegionMask, u: &ScalarField, jac: &ScalarField) -> f64 {
    let d = phi.domain();
    let n = phi.dim();
    let mut acc = 0.0;
    for i in a.indices() {
        let j = jac.get(i).abs();
        if j < DEGENERATE_JACOBIAN {
            continue;
        }
        let mut y = [0.0; 3];
        for k in 0..n {
            y[k] = phi.components[k].get(i);
        }
        acc += u.interpolate(&y[..n]) * j;
    }
    acc * d.cell_volume()
}

/// `Σ_y u(y) N(y) h^n` over target cells outside `excluded`.
pub fn rhs_integral(mult: &MultiplicityField, u: &ScalarField, excluded: Option<&RegionMask>) -> Result<f64> {
    check_nonnegative(u)?;
    if u.domain() != &mult.target {
        return Err(GridError::DomainMismatch.into());
    }
    let mut acc = 0.0;
    for (i, &c) in mult.counts.iter().enumerate() {
        if c == 0 || excluded.is_some_and(|e| e.contains(i)) {
            continue;
        }
        acc += u.get(i) * c as f64;
    }
    Ok(acc * mult.target.cell_volume())
}

#[derive(Clone, Debug)]
pub struct SingularSet {
    pub mask: RegionMask,
    pub capacity: f64,
    /// `A_k`: componentwise intersections of the ladders.
    pub levels: Vec<RegionMask>,
    pub ladders: Vec<TruncationLadder>,
    pub alphas: Vec<f64>,
}

/// Doublings of the default ladder above its base.
pub const DEFAULT_LADDER_SPAN: usize = 3;

/// `α_k = 2^k m`, `k = 0..=DEFAULT_LADDER_SPAN`, with `m` the median of the
/// component maximal functions.
pub fn default_alphas(phi: &SobolevMap) -> Result<Vec<f64>> {
    let radii = crate::truncation::dyadic_radii(phi.domain());
    let mut all = Vec::new();
    for c in &phi.components {
        let m = restricted_maximal(&gradient(c), &radii)?;
        all.extend_from_slice(m.values.values());
    }
    all.sort_by(f64::total_cmp);
    let median = all[all.len() / 2].max(1e-12);
    Ok((0..=DEFAULT_LADDER_SPAN).map(|k| median * (1u32 << k) as f64).collect())
}

/// `S = Ω ∖ ⋃ A_k`, `A_k` the intersection over components of their k-th
/// truncation set, with the outer p-capacity of `S`.
pub fn singular_set(
    phi: &SobolevMap,
    p: f64,
    alphas: Option<&[f64]>,
    config: &CapacityConfig,
) -> Result<SingularSet> {
    let alphas = match alphas {
        Some(a) => a.to_vec(),
        None => default_alphas(phi)?,
    };
    let opts = LadderOptions { sample_pairs: 20_000, ..LadderOptions::default() };
    let ladders: Vec<TruncationLadder> =
        phi.components.iter().map(|c| truncation_ladder(c, &alphas, &opts)).collect::<std::result::Result<_, _>>()?;
    let d = phi.domain();
    let mut levels = Vec::with_capacity(alphas.len());
    for k in 0..alphas.len() {
        let mut m = RegionMask::full(d);
        for l in &ladders {
            m = m.intersection(&l.masks[k])?;
        }
        levels.push(m);
    }
    let mut union = RegionMask::empty(d);
    for m in &levels {
        union = union.union(m)?;
    }
    let mask = union.complement();
    let capacity = if mask.is_empty() { 0.0 } else { capacity_outer(&mask, p, &[1], config)?.value() };
    Ok(SingularSet { mask, capacity, levels, ladders, alphas })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub singular_capacity: f64,
    pub singular_image_measure: f64,
    /// rhs over all of `A` with no image excluded.
    pub rhs_unexcised: f64,
    /// Part of `rhs` carried by the image-boundary collar.
    pub collar_rhs: f64,
    pub level_lhs: Vec<f64>,
    pub level_rhs: Vec<f64>,
    pub subdiv: usize,
    pub source_cells: Vec<usize>,
    pub target_cells: Vec<usize>,
}

pub fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(GAP_FLOOR)
}

impl CovReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(" ");
        let ints = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(s, "lhs = {:.12e}", self.lhs).unwrap();
        writeln!(s, "rhs = {:.12e}", self.rhs).unwrap();
        writeln!(s, "gap = {:.12e}", self.gap).unwrap();
        writeln!(s, "singular_capacity = {:.12e}", self.singular_capacity).unwrap();
        writeln!(s, "singular_image_measure = {:.12e}", self.singular_image_measure).unwrap();
        writeln!(s, "rhs_unexcised = {:.12e}", self.rhs_unexcised).unwrap();
        writeln!(s, "collar_rhs = {:.12e}", self.collar_rhs).unwrap();
        writeln!(s, "level_lhs = {}", join(&self.level_lhs)).unwrap();
        writeln!(s, "level_rhs = {}", join(&self.level_rhs)).unwrap();
        writeln!(s, "subdiv = {}", self.subdiv).unwrap();
        writeln!(s, "source_cells = {}", ints(&self.source_cells)).unwrap();
        writeln!(s, "target_cells = {}", ints(&self.target_cells)).unwrap();
        s
    }
}

#[derive(Clone, Debug)]
pub struct CovConfig {
    pub p: f64,
    pub alphas: Option<Vec<f64>>,
    pub subdiv: Option<usize>,
    pub capacity: CapacityConfig,
}

impl Default for CovConfig {
    fn default() -> Self {
        Self { p: 1.5, alphas: None, subdiv: None, capacity: CapacityConfig::default() }
    }
}

/// Both sides of the formula on `A ∖ S`, with the exhaustion trace over
/// `A ∩ A_k`.
pub fn change_of_variables_check(phi: &SobolevMap, a: &RegionMask, u: &ScalarField, config: &CovConfig) -> Result<CovReport> {
    check_nonnegative(u)?;
    let target = u.domain();
    let sing = singular_set(phi, config.p, config.alphas.as_deref(), &config.capacity)?;
    let regular = a.difference(&sing.mask)?;
    let subdiv = config.subdiv.unwrap_or_else(|| auto_subdivision(phi, &regular, target));
    let jac = jacobian(phi);
    let mut level_lhs = Vec::with_capacity(sing.levels.len());
    let mut level_rhs = Vec::with_capacity(sing.levels.len());
    for lvl in &sing.levels {
        let part = a.intersection(lvl)?;
        level_lhs.push(lhs_with_jacobian(phi, &part, u, &jac));
        level_rhs.push(rhs_integral(&multiplicity(phi, &part, target, subdiv)?, u, None)?);
    }
    let singular_image = image_mask(phi, &a.intersection(&sing.mask)?, target, subdiv)?.dilate(1);
    let lhs = lhs_with_jacobian(phi, &regular, u, &jac);
    let mult = multiplicity(phi, &regular, target, subdiv)?;
    let rhs = rhs_integral(&mult, u, Some(&singular_image))?;
    let full = multiplicity(phi, a, target, subdiv)?;
    let rhs_unexcised = rhs_integral(&full, u, None)?;
    let collar = mult.collar().difference(&singular_image)?;
    let collar_rhs: f64 = collar.indices().map(|i| u.get(i) * mult.get(i) as f64).sum::<f64>() * target.cell_volume();
    Ok(CovReport {
        lhs,
        rhs,
        gap: relative_gap(lhs, rhs),
        singular_capacity: sing.capacity,
        singular_image_measure: singular_image.measure(),
        rhs_unexcised,
        collar_rhs,
        level_lhs,
        level_rhs,
        subdiv,
        source_cells: phi.domain().cells().to_vec(),
        target_cells: target.cells().to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullMode {
    /// Candidates of vanishing measure; images of `N ∖ S` are measured.
    Measure,
    /// Candidates of vanishing capacity; images of `N` are measured.
    Capacity,
}

/// One refinement level of a Luzin N-property probe.
#[derive(Clone, Debug)]
pub struct ProbeLevel {
    pub map: SobolevMap,
    pub target: GridDomain,
    pub candidates: Vec<RegionMask>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    /// Per candidate, the source-side smallness measure across levels.
    pub source: Vec<Vec<f64>>,
    /// Per candidate, the image measure estimate across levels.
    pub image: Vec<Vec<f64>>,
    pub image_decay: Vec<Decay>,
}

pub fn luzin_n_probe(levels: &[ProbeLevel], mode: NullMode, p: f64, config: &CovConfig) -> Result<ProbeReport> {
    let first = levels.first().ok_or(CovError::NoLevels)?;
    let count = first.candidates.len();
    let mut source = vec![Vec::new(); count];
    for lvl in levels {
        for (c, n) in lvl.candidates.iter().enumerate() {
            let v = match mode {
                NullMode::Measure => n.measure(),
                NullMode::Capacity => {
                    if n.is_empty() {
                        0.0
                    } else {
                        capacity_outer(n, p, &[], &config.capacity)?.value()
                    }
                }
            };
            source[c].push(v);
        }
    }
    for (c, s) in source.iter().enumerate() {
        if classify_decay(s) == Decay::Stable {
            return Err(CovError::CandidateNotNull(c));
        }
    }
    let mut image = vec![Vec::new(); count];
    for lvl in levels {
        let excised = match mode {
            NullMode::Measure => Some(singular_set(&lvl.map, p, config.alphas.as_deref(), &config.capacity)?.mask),
            NullMode::Capacity => None,
        };
        for (c, n) in lvl.candidates.iter().enumerate() {
            let set = match &excised {
                Some(s) => n.difference(s)?,
                None => n.clone(),
            };
            let subdiv = config.subdiv.unwrap_or_else(|| auto_subdivision(&lvl.map, &set, &lvl.target));
            image[c].push(image_mask(&lvl.map, &set, &lvl.target, subdiv)?.measure());
        }
    }
    let image_decay = image.iter().map(|v| classify_decay(v)).collect();
    Ok(ProbeReport { source, image, image_decay })
}

#[cfg(test)]
mod tests;
