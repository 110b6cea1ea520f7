//! Variational p-capacity of condensers on a grid container, outer and inner
//! capacities through dilation and erosion ladders, and box-counting
//! Hausdorff estimates.

mod hausdorff;
mod solver;

use std::fmt::Write as _;

use thiserror::Error;

use crate::grid::{GridDomain, GridError, MaskFlavor, RegionMask, ScalarField};

pub use hausdorff::{
    cap1_hausdorff_consistency, classify_decay, hausdorff_estimate, ConsistencyReport, Decay,
    HausdorffEstimate, Verdict,
};
pub use solver::ZERO_LAYERS;

use solver::{primal_dual_power, primal_dual_tv, projected_descent, round_to_level_set, to_field, Problem};

/// Minimum distance, in cell layers, between a plate and the box faces.
pub const PLATE_CLEARANCE: usize = 3;

/// Exponent used by the smoothed p = 1 backend.
pub const SMOOTHED_EXPONENT: f64 = 1.0 + 1e-3;

#[derive(Debug, Error)]
pub enum CapacityError {
    #[error("exponent p must be finite and at least 1, got {0}")]
    InvalidExponent(f64),
    #[error("plate reaches within {found} cell layers of the container boundary (need {PLATE_CLEARANCE})")]
    PlateTooClose { found: usize },
    #[error("masks live on different grids")]
    DomainMismatch,
    #[error("sequence is not nested at position {0}")]
    NotNested(usize),
    #[error("ladder is empty")]
    EmptyLadder,
    #[error("solver stopped after {iterations} iterations with relative decrease {rel_decrease:e}")]
    NonConvergence { iterations: usize, rel_decrease: f64 },
    #[error("inconclusive trend: H^(n-1) {hausdorff:?} but cap_1 {capacity:?}")]
    InconclusiveTrend {
        hausdorff: Decay,
        capacity: Decay,
        report: Box<ConsistencyReport>,
    },
    #[error("dimension {0} not supported here (need n >= 2)")]
    DimensionTooLow(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub type Result<T> = std::result::Result<T, CapacityError>;

/// Compact plate inside the grid box. Admissible functions vanish on the two
/// outermost cell layers of the box.
#[derive(Clone, Debug)]
pub struct Condenser {
    plate: RegionMask,
    p: f64,
}

impl Condenser {
    pub fn new(plate: RegionMask, p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(CapacityError::InvalidExponent(p));
        }
        let d = plate.domain();
        if let Some(found) = plate.indices().map(|i| d.boundary_distance(i)).min() {
            if found < PLATE_CLEARANCE {
                return Err(CapacityError::PlateTooClose { found });
            }
        }
        Ok(Self { plate: plate.with_flavor(MaskFlavor::Closed), p })
    }

    /// Condenser with the plate clipped to the admissible core.
    pub fn clipped(plate: &RegionMask, p: f64) -> Result<Self> {
        let core = RegionMask::core(plate.domain(), PLATE_CLEARANCE);
        Self::new(plate.intersection(&core)?, p)
    }

    pub fn plate(&self) -> &RegionMask {
        &self.plate
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn domain(&self) -> &GridDomain {
        self.plate.domain()
    }

    pub fn is_empty(&self) -> bool {
        self.plate.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum P1Backend {
    PrimalDual,
    Smoothed,
}

impl P1Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            P1Backend::PrimalDual => "primal_dual",
            P1Backend::Smoothed => "smoothed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CapacityConfig {
    /// Relative energy decrease that stops the p > 1 solver.
    pub tol: f64,
    /// Relative duality gap that stops the p = 1 primal-dual solver.
    pub gap_tol: f64,
    /// Defaults to `100 * (cells per axis)^2`.
    pub max_iter: Option<usize>,
    pub p1_backend: P1Backend,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self { tol: 1e-8, gap_tol: 1e-3, max_iter: None, p1_backend: P1Backend::PrimalDual }
    }
}

impl CapacityConfig {
    fn iterations_for(&self, d: &GridDomain) -> usize {
        self.max_iter.unwrap_or_else(|| {
            let n = *d.cells().iter().max().unwrap_or(&1);
            100 * n * n
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub iterations: usize,
    /// Final relative energy decrease, or relative duality gap for p = 1.
    pub rel_decrease: f64,
    pub resolution: Vec<usize>,
    pub p: f64,
    pub smoothing: Option<f64>,
    pub backend: &'static str,
    pub converged: bool,
    /// Set when p ≥ n, where the value depends on the container size.
    pub container_dependent: bool,
}

impl Certificate {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let res: Vec<String> = self.resolution.iter().map(|c| c.to_string()).collect();
        writeln!(s, "iterations = {}", self.iterations).unwrap();
        writeln!(s, "rel_decrease = {:e}", self.rel_decrease).unwrap();
        writeln!(s, "resolution = {}", res.join(" ")).unwrap();
        writeln!(s, "p = {}", self.p).unwrap();
        match self.smoothing {
            Some(q) => writeln!(s, "smoothing = {q}").unwrap(),
            None => writeln!(s, "smoothing = none").unwrap(),
        }
        writeln!(s, "backend = {}", self.backend).unwrap();
        writeln!(s, "converged = {}", self.converged).unwrap();
        writeln!(s, "container_dependent = {}", self.container_dependent).unwrap();
        s
    }
}

#[derive(Clone, Debug)]
pub struct CapacityEstimate {
    pub value: f64,
    pub minimizer: ScalarField,
    pub certificate: Certificate,
}

impl CapacityEstimate {
    /// `Err(NonConvergence)` when the certificate is flagged.
    pub fn require_converged(&self) -> Result<&Self> {
        if self.certificate.converged {
            Ok(self)
        } else {
            Err(CapacityError::NonConvergence {
                iterations: self.certificate.iterations,
                rel_decrease: self.certificate.rel_decrease,
            })
        }
    }
}

/// Discrete energy `h^n Σ |D u|^p` of a field under the zero extension,
/// forward differences.
pub fn dirichlet_energy(u: &ScalarField, p: f64) -> f64 {
    let plate = RegionMask::empty(u.domain());
    Problem::new(&plate, p).energy(u.values())
}

/// Whether `u` is admissible for the condenser: 1 on the plate, 0 on the
/// zero layers, within `[0, 1]` elsewhere.
pub fn is_admissible(c: &Condenser, u: &ScalarField) -> bool {
    let d = c.domain();
    u.domain() == d
        && (0..d.len()).all(|i| {
            let v = u.get(i);
            if d.boundary_distance(i) < ZERO_LAYERS {
                v == 0.0
            } else if c.plate.contains(i) {
                v == 1.0
            } else {
                (0.0..=1.0).contains(&v)
            }
        })
}

pub fn capacity_compact(c: &Condenser, config: &CapacityConfig) -> CapacityEstimate {
    let d = c.domain();
    let container_dependent = c.p >= d.dim() as f64;
    let resolution = d.cells().to_vec();
    if c.is_empty() {
        return CapacityEstimate {
            value: 0.0,
            minimizer: ScalarField::zeros(d),
            certificate: Certificate {
                iterations: 0,
                rel_decrease: 0.0,
                resolution,
                p: c.p,
                smoothing: None,
                backend: "empty",
                converged: true,
                container_dependent,
            },
        };
    }
    let max_iter = config.iterations_for(d);
    let problem = Problem::new(&c.plate, c.p);
    let init = problem.radial_initialization(&c.plate);
    let (field, outcome_iters, rel, converged, smoothing, backend) = if c.p > 1.0 && c.p < PRIMAL_DUAL_BELOW {
        let o = primal_dual_power(&problem, init, config.gap_tol, max_iter);
        (o.field, o.iterations, o.rel_decrease, o.converged, None, "primal_dual_power")
    } else if c.p > 1.0 {
        let init = coarse_start(&c.plate, c.p, config).unwrap_or(init);
        let o = projected_descent(&problem, init, config.tol, max_iter);
        (o.field, o.iterations, o.rel_decrease, o.converged, None, "projected_descent")
    } else {
        match config.p1_backend {
            P1Backend::PrimalDual => {
                let o = primal_dual_tv(&problem, init, config.gap_tol, max_iter);
                let mut u = o.field;
                round_to_level_set(&problem, &mut u);
                (u, o.iterations, o.rel_decrease, o.converged, None, P1Backend::PrimalDual.as_str())
            }
            P1Backend::Smoothed => {
                let smooth = Problem::new(&c.plate, SMOOTHED_EXPONENT);
                let o = projected_descent(&smooth, init, config.tol, max_iter);
                let mut u = o.field;
                round_to_level_set(&problem, &mut u);
                (
                    u,
                    o.iterations,
                    o.rel_decrease,
                    o.converged,
                    Some(SMOOTHED_EXPONENT),
                    P1Backend::Smoothed.as_str(),
                )
            }
        }
    };
    let value = problem.energy(&field);
    CapacityEstimate {
        value,
        minimizer: to_field(d, field),
        certificate: Certificate {
            iterations: outcome_iters,
            rel_decrease: rel,
            resolution,
            p: c.p,
            smoothing,
            backend,
            converged,
            container_dependent,
        },
    }
}

/// Exponents in `(1, PRIMAL_DUAL_BELOW)` use the primal-dual solver; the
/// gradient of `|Δu|^p` is too stiff there for projected descent.
pub const PRIMAL_DUAL_BELOW: f64 = 1.5;

/// Smallest grid solved as the bottom of a coarse-to-fine start.
const COARSEST_CELLS: usize = 16;

/// Minimizer on the grid with half the cells per axis, interpolated back.
/// `None` when the grid does not halve.
fn coarse_start(plate: &RegionMask, p: f64, config: &CapacityConfig) -> Option<Vec<f64>> {
    let d = plate.domain();
    let cells = d.cells();
    if cells.iter().any(|&n| n % 2 != 0 || n / 2 < COARSEST_CELLS) {
        return None;
    }
    let half: Vec<usize> = cells.iter().map(|n| n / 2).collect();
    let coarse = GridDomain::new(d.lower(), d.upper(), &half).ok()?;
    let mut cp = RegionMask::empty(&coarse);
    for i in plate.indices() {
        let mi = d.multi_index(i);
        cp.set(coarse.linear_index([mi[0] / 2, mi[1] / 2, mi[2] / 2]), true);
    }
    let problem = Problem::new(&cp, p);
    let init = coarse_start(&cp, p, config).unwrap_or_else(|| problem.radial_initialization(&cp));
    let o = projected_descent(&problem, init, config.tol, config.iterations_for(&coarse));
    let field = to_field(&coarse, o.field);
    let mut u: Vec<f64> = (0..d.len()).map(|i| field.interpolate(&d.center(i)[..d.dim()])).collect();
    Problem::new(plate, p).project(&mut u);
    Some(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

impl Trend {
    pub fn of(values: &[f64]) -> Self {
        let tol = |a: f64, b: f64| 1e-9 * a.abs().max(b.abs());
        let up = values.windows(2).all(|w| w[1] >= w[0] - tol(w[0], w[1]));
        let down = values.windows(2).all(|w| w[1] <= w[0] + tol(w[0], w[1]));
        match (up, down) {
            (true, true) => Trend::Constant,
            (true, false) => Trend::Increasing,
            (false, true) => Trend::Decreasing,
            (false, false) => Trend::Mixed,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Increasing => "increasing",
            Trend::Decreasing => "decreasing",
            Trend::Constant => "constant",
            Trend::Mixed => "mixed",
        }
    }
}

/// A capacity value chosen from a ladder of set approximations.
#[derive(Clone, Debug)]
pub struct LadderEstimate {
    pub estimate: CapacityEstimate,
    /// Layer count per rung (erosion or dilation depth).
    pub layers: Vec<usize>,
    pub values: Vec<f64>,
    pub trend: Trend,
}

impl LadderEstimate {
    pub fn value(&self) -> f64 {
        self.estimate.value
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(CapacityError::InvalidExponent(p));
    }
    Ok(())
}

/// Inner capacity of an open set: the largest compact-plate capacity over
/// erosions of `u` by the given layer counts (default 1, 2, 3). Plates are
/// clipped to the admissible core.
pub fn capacity_open(u: &RegionMask, p: f64, erosions: &[usize], config: &CapacityConfig) -> Result<LadderEstimate> {
    check_exponent(p)?;
    let ladder: Vec<usize> = if erosions.is_empty() { vec![1, 2, 3] } else { erosions.to_vec() };
    let mut best: Option<CapacityEstimate> = None;
    let mut values = Vec::with_capacity(ladder.len());
    for &k in &ladder {
        let plate = u.erode(k);
        let est = capacity_compact(&Condenser::clipped(&plate, p)?, config);
        values.push(est.value);
        if best.as_ref().map_or(true, |b| est.value > b.value) {
            best = Some(est);
        }
    }
    let trend = Trend::of(&values);
    Ok(LadderEstimate { estimate: best.expect("ladder nonempty"), layers: ladder, values, trend })
}

/// Outer capacity: the smallest inner capacity over dilations of `e` by the
/// given layer counts (default 1, 2, 3).
pub fn capacity_outer(e: &RegionMask, p: f64, dilations: &[usize], config: &CapacityConfig) -> Result<LadderEstimate> {
    check_exponent(p)?;
    let ladder: Vec<usize> = if dilations.is_empty() { vec![1, 2, 3] } else { dilations.to_vec() };
    let mut best: Option<CapacityEstimate> = None;
    let mut values = Vec::with_capacity(ladder.len());
    for &k in &ladder {
        let open = e.dilate(k).with_flavor(MaskFlavor::Open);
        let est = capacity_open(&open, p, &[], config)?.estimate;
        values.push(est.value);
        if best.as_ref().map_or(true, |b| est.value < b.value) {
            best = Some(est);
        }
    }
    let trend = Trend::of(&values);
    Ok(LadderEstimate { estimate: best.expect("ladder nonempty"), layers: ladder, values, trend })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecreasingLimitReport {
    pub values: Vec<f64>,
    pub intersection_value: f64,
    /// `max_k |cap(C_k) - cap(∩C)|` over the second half of the sequence.
    pub tail_deviation: f64,
    /// Largest increase between consecutive values.
    pub max_increase: f64,
}

/// Capacities along a nested decreasing sequence of compact plates and of
/// their intersection.
pub fn capacity_limit_decreasing_check(
    compacts: &[RegionMask],
    p: f64,
    config: &CapacityConfig,
) -> Result<DecreasingLimitReport> {
    let first = compacts.first().ok_or(CapacityError::EmptyLadder)?;
    for (k, w) in compacts.windows(2).enumerate() {
        if w[0].domain() != w[1].domain() {
            return Err(CapacityError::DomainMismatch);
        }
        if !w[1].is_subset_of(&w[0]) {
            return Err(CapacityError::NotNested(k + 1));
        }
    }
    let mut meet = first.clone();
    let mut values = Vec::with_capacity(compacts.len());
    for c in compacts {
        meet = meet.intersection(c)?;
        values.push(capacity_compact(&Condenser::new(c.clone(), p)?, config).value);
    }
    let intersection_value = capacity_compact(&Condenser::new(meet, p)?, config).value;
    let tail = &values[values.len() / 2..];
    let tail_deviation = tail.iter().map(|v| (v - intersection_value).abs()).fold(0.0, f64::max);
    let max_increase = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(DecreasingLimitReport { values, intersection_value, tail_deviation, max_increase })
}
