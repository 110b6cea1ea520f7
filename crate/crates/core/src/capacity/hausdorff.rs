//! Box-covering Hausdorff estimates and the H^(n-1) / cap_1 comparison.

use crate::grid::{GridDomain, RegionMask};

use super::{capacity_outer, CapacityConfig, CapacityError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HausdorffEstimate {
    pub value: f64,
    /// Box side per scale.
    pub scales: Vec<f64>,
    /// Covering sum `N(δ) δ^s` per scale.
    pub sums: Vec<f64>,
    /// `H_δ`: the smallest covering sum over scales not exceeding δ.
    pub running: Vec<f64>,
}

/// Number of aligned boxes of `b` cells per side meeting the mask.
fn box_count(m: &RegionMask, b: usize) -> usize {
    let d = m.domain();
    let shape = d.shape3();
    let dim = d.dim();
    let mut boxes = [1usize; 3];
    for a in 0..dim {
        boxes[a] = shape[a].div_ceil(b);
    }
    let mut hit = vec![false; boxes[0] * boxes[1] * boxes[2]];
    for i in m.indices() {
        let mi = d.multi_index(i);
        let mut bi = [0usize; 3];
        for a in 0..dim {
            bi[a] = mi[a] / b;
        }
        hit[(bi[0] * boxes[1] + bi[1]) * boxes[2] + bi[2]] = true;
    }
    hit.iter().filter(|&&h| h).count()
}

/// Covering sums `Σ δ^s` over aligned boxes of side `δ = b h` for every `b`
/// in `ladder` (cell units, default 1, 2, 4, 8). `H_δ` is the smallest sum
/// over scales up to δ; the reported value is the largest `H_δ`.
pub fn hausdorff_estimate(m: &RegionMask, s: f64, ladder: &[usize]) -> HausdorffEstimate {
    let h = m.domain().spacing();
    let mut rungs: Vec<usize> = if ladder.is_empty() { vec![1, 2, 4, 8] } else { ladder.to_vec() };
    rungs.retain(|&b| b >= 1);
    rungs.sort_unstable();
    rungs.dedup();
    let mut scales = Vec::with_capacity(rungs.len());
    let mut sums = Vec::with_capacity(rungs.len());
    let mut running = Vec::with_capacity(rungs.len());
    let mut best = f64::INFINITY;
    for &b in &rungs {
        let delta = b as f64 * h;
        let sum = box_count(m, b) as f64 * delta.powf(s);
        best = best.min(sum);
        scales.push(delta);
        sums.push(sum);
        running.push(best);
    }
    let value = running.iter().copied().fold(0.0, f64::max);
    HausdorffEstimate { value, scales, sums, running }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decay {
    Decaying,
    Stable,
    /// Identically zero along the sweep.
    Null,
}

/// A sequence decays when its last value is at most a quarter of its first.
pub fn classify_decay(values: &[f64]) -> Decay {
    if values.iter().all(|v| *v == 0.0) {
        return Decay::Null;
    }
    match (values.first(), values.last()) {
        (Some(&a), Some(&b)) if b <= 0.25 * a => Decay::Decaying,
        _ => Decay::Stable,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    CoDecay,
    CoStable,
    BothZero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub resolutions: Vec<usize>,
    pub hausdorff: Vec<f64>,
    pub capacity: Vec<f64>,
    pub hausdorff_decay: Decay,
    pub capacity_decay: Decay,
}

/// Paired refinement sweeps of the `H^(n-1)` estimate and the outer
/// 1-capacity of `shape` rasterized on each grid.
pub fn cap1_hausdorff_consistency(
    shape: &dyn Fn(&GridDomain) -> RegionMask,
    grids: &[GridDomain],
    config: &CapacityConfig,
) -> Result<(Verdict, ConsistencyReport)> {
    let mut report = ConsistencyReport {
        resolutions: Vec::new(),
        hausdorff: Vec::new(),
        capacity: Vec::new(),
        hausdorff_decay: Decay::Null,
        capacity_decay: Decay::Null,
    };
    if grids.is_empty() {
        return Err(CapacityError::EmptyLadder);
    }
    for d in grids {
        if d.dim() < 2 {
            return Err(CapacityError::DimensionTooLow(d.dim()));
        }
        let m = shape(d);
        let s = d.dim() as f64 - 1.0;
        report.resolutions.push(d.cells()[0]);
        report.hausdorff.push(hausdorff_estimate(&m, s, &[]).value);
        report.capacity.push(capacity_outer(&m, 1.0, &[], config)?.value());
    }
    report.hausdorff_decay = classify_decay(&report.hausdorff);
    report.capacity_decay = classify_decay(&report.capacity);
    let verdict = match (report.hausdorff_decay, report.capacity_decay) {
        (Decay::Null, Decay::Null) => Verdict::BothZero,
        (Decay::Decaying | Decay::Null, Decay::Decaying | Decay::Null) => Verdict::CoDecay,
        (Decay::Stable, Decay::Stable) => Verdict::CoStable,
        (h, c) => {
            return Err(CapacityError::InconclusiveTrend { hausdorff: h, capacity: c, report: Box::new(report) })
        }
    };
    Ok((verdict, report))
}
