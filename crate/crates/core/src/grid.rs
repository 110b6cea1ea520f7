//! Uniform grids over axis-aligned boxes, sampled fields and cell masks.
//!
//! Everything here is cell-centered: a grid with `N` cells on an axis of
//! length `L` has spacing `h = L / N` and samples at `lower + (i + 1/2) h`.
//! Linear indices are row-major with the last axis fastest.

use thiserror::Error;

use crate::stencil;

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension {0} not supported (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("axis {axis}: upper corner {upper} must exceed lower corner {lower}")]
    DegenerateBox { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis}: {cells} cells, at least {MIN_CELLS} required")]
    TooFewCells { axis: usize, cells: usize },
    #[error("spacing differs across axes ({first} vs {other})")]
    NonUniformSpacing { first: f64, other: f64 },
    #[error("field has {got} values, domain has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at cell {0}")]
    NonFinite(usize),
    #[error("fields or masks live on different domains")]
    DomainMismatch,
    #[error("radius {radius} is below the grid spacing {h}")]
    RadiusTooSmall { radius: f64, h: f64 },
    #[error("point {0:?} lies outside the domain")]
    PointOutsideDomain(Vec<f64>),
    #[error("radius ladder reaches {smallest}, below the grid spacing {h}")]
    LadderTooDeep { smallest: f64, h: f64 },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

pub type Result<T, E = GridError> = std::result::Result<T, E>;

/// An axis-aligned box with `cells[a]` uniform cells along each axis.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain {
    dim: usize,
    lower: [f64; 3],
    upper: [f64; 3],
    shape: [usize; 3],
    h: f64,
}

impl GridDomain {
    pub fn new(lower: &[f64], upper: &[f64], cells: &[usize]) -> Result<Self> {
        let dim = lower.len();
        if !(1..=3).contains(&dim) || upper.len() != dim || cells.len() != dim {
            return Err(GridError::UnsupportedDimension(dim));
        }
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        let mut shape = [1usize; 3];
        let mut h = 0.0;
        for a in 0..dim {
            if !(upper[a] > lower[a]) || !lower[a].is_finite() || !upper[a].is_finite() {
                return Err(GridError::DegenerateBox { axis: a, lower: lower[a], upper: upper[a] });
            }
            if cells[a] < MIN_CELLS {
                return Err(GridError::TooFewCells { axis: a, cells: cells[a] });
            }
            let ha = (upper[a] - lower[a]) / cells[a] as f64;
            if a == 0 {
                h = ha;
            } else if ((ha - h) / h).abs() > 1e-12 {
                return Err(GridError::NonUniformSpacing { first: h, other: ha });
            }
            lo[a] = lower[a];
            hi[a] = upper[a];
            shape[a] = cells[a];
        }
        Ok(Self { dim, lower: lo, upper: hi, shape, h })
    }

    /// The cube `[lo, hi]^dim` with `n` cells per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::UnsupportedDimension(dim));
        }
        Self::new(&vec![lo; dim], &vec![hi; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    /// Shape padded with ones to three axes.
    pub(crate) fn shape3(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.upper[a] - self.lower[a]).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|a| (self.upper[a] - self.lower[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let [_, n1, n2] = self.shape;
        [idx / (n1 * n2), (idx / n2) % n1, idx % n2]
    }

    pub fn linear_index(&self, mi: [usize; 3]) -> usize {
        (mi[0] * self.shape[1] + mi[1]) * self.shape[2] + mi[2]
    }

    /// Linear index of a signed multi-index, `None` when outside the grid.
    pub fn checked_index(&self, mi: [i64; 3]) -> Option<usize> {
        let mut u = [0usize; 3];
        for a in 0..3 {
            if mi[a] < 0 || mi[a] >= self.shape[a] as i64 {
                return None;
            }
            u[a] = mi[a] as usize;
        }
        Some(self.linear_index(u))
    }

    /// Cell center, padded with zeros beyond `dim`.
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.lower[a] + (mi[a] as f64 + 0.5) * self.h;
        }
        x
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() >= self.dim && (0..self.dim).all(|a| x[a] >= self.lower[a] && x[a] <= self.upper[a])
    }

    /// Continuous index coordinates: cell `i` spans `[i, i + 1)`.
    pub(crate) fn index_coords(&self, x: &[f64]) -> [f64; 3] {
        let mut s = [0.5; 3];
        for a in 0..self.dim {
            s[a] = (x[a] - self.lower[a]) / self.h;
        }
        s
    }

    /// Cell containing `x`; points on the upper face belong to the last cell.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if !self.contains_point(x) {
            return None;
        }
        let s = self.index_coords(x);
        let mut mi = [0usize; 3];
        for a in 0..self.dim {
            let i = s[a].floor() as i64;
            mi[a] = i.clamp(0, self.shape[a] as i64 - 1) as usize;
        }
        Some(self.linear_index(mi))
    }

    /// Face neighbors inside the grid.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let mi = self.multi_index(idx);
        (0..self.dim).flat_map(move |a| {
            let lo = (mi[a] > 0).then(|| {
                let mut m = mi;
                m[a] -= 1;
                self.linear_index(m)
            });
            let hi = (mi[a] + 1 < self.shape[a]).then(|| {
                let mut m = mi;
                m[a] += 1;
                self.linear_index(m)
            });
            lo.into_iter().chain(hi)
        })
    }

    /// Number of cell layers between `idx` and the nearest face of the box.
    pub fn boundary_distance(&self, idx: usize) -> usize {
        let mi = self.multi_index(idx);
        (0..self.dim)
            .map(|a| mi[a].min(self.shape[a] - 1 - mi[a]))
            .min()
            .unwrap_or(0)
    }

    /// Same box with `factor` times as many cells per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let cells: Vec<usize> = self.cells().iter().map(|c| c * factor).collect();
        Self::new(self.lower(), self.upper(), &cells)
    }
}

/// How a field is continued outside its box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExtensionMode {
    #[default]
    Zero,
    Reflect,
}

impl ExtensionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtensionMode::Zero => "zero",
            ExtensionMode::Reflect => "reflect",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(ExtensionMode::Zero),
            "reflect" => Some(ExtensionMode::Reflect),
            _ => None,
        }
    }
}

/// Mirror an index about the faces of `[0, n)`.
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut r = i.rem_euclid(period);
    if r >= n {
        r = period - 1 - r;
    }
    r as usize
}

/// A real value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    domain: GridDomain,
    values: Vec<f64>,
    extension: ExtensionMode,
}

impl ScalarField {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(GridError::LengthMismatch { expected: domain.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { domain, values, extension: ExtensionMode::Zero })
    }

    pub fn from_fn(domain: &GridDomain, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = domain.dim();
        let values = (0..domain.len()).map(|i| f(&domain.center(i)[..dim])).collect();
        Self::new(domain.clone(), values)
    }

    pub fn constant(domain: &GridDomain, c: f64) -> Self {
        Self { domain: domain.clone(), values: vec![c; domain.len()], extension: ExtensionMode::Zero }
    }

    pub fn zeros(domain: &GridDomain) -> Self {
        Self::constant(domain, 0.0)
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(domain: GridDomain, values: Vec<f64>, extension: ExtensionMode) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain, values, extension }
    }

    pub fn with_extension(mut self, extension: ExtensionMode) -> Self {
        self.extension = extension;
        self
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn extension(&self) -> ExtensionMode {
        self.extension
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Value at a possibly out-of-grid multi-index, continued by the extension mode.
    pub fn value_ext(&self, mi: [i64; 3]) -> f64 {
        if let Some(i) = self.domain.checked_index(mi) {
            return self.values[i];
        }
        match self.extension {
            ExtensionMode::Zero => 0.0,
            ExtensionMode::Reflect => {
                let s = self.domain.shape3();
                let m = [
                    reflect_index(mi[0], s[0]),
                    reflect_index(mi[1], s[1]),
                    reflect_index(mi[2], s[2]),
                ];
                self.values[self.domain.linear_index(m)]
            }
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Ok(Self::new(self.domain.clone(), values)?.with_extension(self.extension))
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.domain != other.domain {
            return Err(GridError::DomainMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::new(self.domain.clone(), values)?.with_extension(self.extension))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cell-sum quadrature of the field over the box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_volume()
    }

    /// Multilinear interpolation between cell centers, continued by the
    /// extension mode; zero for points outside the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        if !self.domain.contains_point(x) {
            return 0.0;
        }
        let dim = self.domain.dim();
        let s = self.domain.index_coords(x);
        let mut base = [0i64; 3];
        let mut frac = [0.0; 3];
        for a in 0..dim {
            let t = s[a] - 0.5;
            let f = t.floor();
            base[a] = f as i64;
            frac[a] = t - f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut mi = base;
            for a in 0..dim {
                if corner >> a & 1 == 1 {
                    mi[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.value_ext(mi);
            }
        }
        acc
    }
}

/// `dim` scalar components on one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(GridError::LengthMismatch { expected: 1, got: 0 });
        };
        if components.iter().any(|c| c.domain() != first.domain()) {
            return Err(GridError::DomainMismatch);
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &ScalarField {
        &self.components[k]
    }

    pub fn domain(&self) -> &GridDomain {
        self.components[0].domain()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Pointwise Euclidean norm, keeping the first component's extension mode.
    pub fn norm_field(&self) -> ScalarField {
        let n = self.domain().len();
        let values = (0..n)
            .map(|i| self.components.iter().map(|c| c.values[i] * c.values[i]).sum::<f64>().sqrt())
            .collect();
        ScalarField::from_parts(self.domain().clone(), values, self.components[0].extension)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.components.iter().map(|f| f.scaled(c)).collect::<Result<_>>()?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MaskFlavor {
    Closed,
    Open,
    #[default]
    Plain,
}

impl MaskFlavor {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskFlavor::Closed => "closed",
            MaskFlavor::Open => "open",
            MaskFlavor::Plain => "plain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "closed" => Some(MaskFlavor::Closed),
            "open" => Some(MaskFlavor::Open),
            "plain" => Some(MaskFlavor::Plain),
            _ => None,
        }
    }
}

/// A set of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    domain: GridDomain,
    cells: Vec<bool>,
    flavor: MaskFlavor,
}

impl RegionMask {
    pub fn new(domain: GridDomain, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != domain.len() {
            return Err(GridError::LengthMismatch { expected: domain.len(), got: cells.len() });
        }
        Ok(Self { domain, cells, flavor: MaskFlavor::Plain })
    }

    pub fn empty(domain: &GridDomain) -> Self {
        Self { domain: domain.clone(), cells: vec![false; domain.len()], flavor: MaskFlavor::Plain }
    }

    pub fn full(domain: &GridDomain) -> Self {
        Self { domain: domain.clone(), cells: vec![true; domain.len()], flavor: MaskFlavor::Plain }
    }

    /// Cells whose center satisfies the predicate.
    pub fn from_fn(domain: &GridDomain, pred: impl Fn(&[f64]) -> bool) -> Self {
        let dim = domain.dim();
        let cells = (0..domain.len()).map(|i| pred(&domain.center(i)[..dim])).collect();
        Self { domain: domain.clone(), cells, flavor: MaskFlavor::Plain }
    }

    /// Cells whose center lies within `radius` of `center`.
    pub fn ball(domain: &GridDomain, center: &[f64], radius: f64) -> Self {
        let c = center.to_vec();
        Self::from_fn(domain, move |x| {
            x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= radius * radius
        })
    }

    /// Cells met by the segment `a`–`b`, found by sampling at a quarter spacing.
    pub fn segment(domain: &GridDomain, a: &[f64], b: &[f64]) -> Self {
        let mut m = Self::empty(domain);
        let len = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let steps = ((len / (0.25 * domain.spacing())).ceil() as usize).max(1);
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect();
            if let Some(i) = domain.locate(&x) {
                m.cells[i] = true;
            }
        }
        m
    }

    /// The single cell containing `x`.
    pub fn point(domain: &GridDomain, x: &[f64]) -> Result<Self> {
        let i = domain.locate(x).ok_or_else(|| GridError::PointOutsideDomain(x.to_vec()))?;
        let mut m = Self::empty(domain);
        m.cells[i] = true;
        Ok(m)
    }

    /// Cells at least `layers` away from every face of the box.
    pub fn core(domain: &GridDomain, layers: usize) -> Self {
        let cells = (0..domain.len()).map(|i| domain.boundary_distance(i) >= layers).collect();
        Self { domain: domain.clone(), cells, flavor: MaskFlavor::Plain }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn flavor(&self) -> MaskFlavor {
        self.flavor
    }

    pub fn with_flavor(mut self, flavor: MaskFlavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.cells[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().enumerate().filter_map(|(i, &c)| c.then_some(i))
    }

    /// Lebesgue measure: member count times the cell volume.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.domain.cell_volume()
    }

    fn combine(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        if self.domain != other.domain {
            return Err(GridError::DomainMismatch);
        }
        let cells = self.cells.iter().zip(&other.cells).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { domain: self.domain.clone(), cells, flavor: MaskFlavor::Plain })
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Self {
        Self {
            domain: self.domain.clone(),
            cells: self.cells.iter().map(|&c| !c).collect(),
            flavor: MaskFlavor::Plain,
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.domain == other.domain && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    /// Grid closure: adds every cell all of whose face neighbors are members.
    pub fn closure(&self) -> Self {
        let mut cells = self.cells.clone();
        for i in 0..self.domain.len() {
            if !self.cells[i] && self.domain.neighbors(i).all(|j| self.cells[j]) {
                cells[i] = true;
            }
        }
        Self { domain: self.domain.clone(), cells, flavor: MaskFlavor::Closed }
    }

    /// Grid interior: drops every member with no member face neighbor.
    pub fn interior(&self) -> Self {
        let mut cells = self.cells.clone();
        for i in 0..self.domain.len() {
            if self.cells[i] && !self.domain.neighbors(i).any(|j| self.cells[j]) {
                cells[i] = false;
            }
        }
        Self { domain: self.domain.clone(), cells, flavor: MaskFlavor::Open }
    }

    pub fn is_closed(&self) -> bool {
        self.closure().cells == self.cells
    }

    pub fn is_open(&self) -> bool {
        self.interior().cells == self.cells
    }

    /// Adds `layers` rings of face neighbors.
    pub fn dilate(&self, layers: usize) -> Self {
        let mut cur = self.cells.clone();
        for _ in 0..layers {
            let mut next = cur.clone();
            for i in 0..self.domain.len() {
                if cur[i] {
                    for j in self.domain.neighbors(i) {
                        next[j] = true;
                    }
                }
            }
            cur = next;
        }
        Self { domain: self.domain.clone(), cells: cur, flavor: MaskFlavor::Plain }
    }

    /// Removes `layers` rings; cells on the box boundary count as exposed.
    pub fn erode(&self, layers: usize) -> Self {
        let mut cur = self.cells.clone();
        let dim = self.domain.dim();
        for _ in 0..layers {
            let mut next = cur.clone();
            for i in 0..self.domain.len() {
                if cur[i] {
                    let mut inside = 0;
                    let mut all = true;
                    for j in self.domain.neighbors(i) {
                        inside += 1;
                        all &= cur[j];
                    }
                    if !all || inside < 2 * dim {
                        next[i] = false;
                    }
                }
            }
            cur = next;
        }
        Self { domain: self.domain.clone(), cells: cur, flavor: MaskFlavor::Plain }
    }

    /// Largest distance from `x` to a member cell center.
    pub fn max_distance_from(&self, x: &[f64]) -> f64 {
        let dim = self.domain.dim();
        self.indices()
            .map(|i| {
                let c = self.domain.center(i);
                (0..dim).map(|a| (c[a] - x[a]).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Lebesgue measure of a mask.
pub fn lebesgue_measure(m: &RegionMask) -> f64 {
    m.measure()
}

pub fn mask_closure(m: &RegionMask) -> RegionMask {
    m.closure()
}

pub fn mask_interior(m: &RegionMask) -> RegionMask {
    m.interior()
}

/// Mean of `f` over the ball `B(center, radius)`.
///
/// Cells are weighted by the fraction of their `3^n` subcell sample points
/// inside the ball; cells beyond the box take their value from the
/// field's extension mode.
pub fn ball_average(f: &ScalarField, center: &[f64], radius: f64) -> Result<f64> {
    let d = f.domain();
    if center.len() < d.dim() || !d.contains_point(center) {
        return Err(GridError::PointOutsideDomain(center.to_vec()));
    }
    let h = d.spacing();
    if !(radius >= h * (1.0 - 1e-12)) {
        return Err(GridError::RadiusTooSmall { radius, h });
    }
    let s = d.index_coords(center);
    let st = stencil::BallStencil::at(d.dim(), s, radius / h);
    Ok(st.mean_at(f, [0, 0, 0]))
}

/// A decreasing dyadic radius sequence `r, r/2, ..., r/2^levels`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicLadder {
    pub largest: f64,
    pub levels: usize,
}

impl DyadicLadder {
    pub fn new(largest: f64, levels: usize) -> Self {
        Self { largest, levels }
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..=self.levels).map(|k| self.largest / 2f64.powi(k as i32)).collect()
    }

    pub fn smallest(&self) -> f64 {
        self.largest / 2f64.powi(self.levels as i32)
    }
}

/// Ball-average limits and the cells where the averages fail to settle.
///
/// The limit is extrapolated from the two finest radii assuming a
/// quadratic error in the radius; cells whose last two averages differ by
/// more than `tol` are flagged and get the value 0.
pub fn precise_representative(
    f: &ScalarField,
    ladder: DyadicLadder,
    tol: f64,
) -> Result<(ScalarField, RegionMask)> {
    let d = f.domain();
    let h = d.spacing();
    if !(tol > 0.0) {
        return Err(GridError::InvalidTolerance(tol));
    }
    if ladder.levels == 0 || ladder.smallest() < h * (1.0 - 1e-12) {
        return Err(GridError::LadderTooDeep { smallest: ladder.smallest(), h });
    }
    let fine = stencil::ball_means(f, ladder.smallest());
    let coarse = stencil::ball_means(f, 2.0 * ladder.smallest());
    let mut flagged = RegionMask::empty(d);
    let mut values = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let diff = fine[i] - coarse[i];
        if diff.abs() <= tol {
            values.push(fine[i] + diff / 3.0);
        } else {
            flagged.cells[i] = true;
            values.push(0.0);
        }
    }
    Ok((ScalarField::from_parts(d.clone(), values, f.extension()), flagged))
}
