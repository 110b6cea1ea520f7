//! Scenario files, batch execution and report emission.
//!
//! A scenario is a flat `key = value` text file; repeated keys form lists.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{
    cap1_hausdorff_consistency, capacity_compact, classify_decay, hausdorff_estimate, is_admissible,
    CapacityConfig, CapacityError, Condenser, Decay, Verdict,
};
use crate::corpus::{self, CorpusError, EntryKind};
use crate::covmap::{change_of_variables_check, CovConfig};
use crate::grid::{mask_closure, GridDomain, RegionMask, ScalarField};
use crate::io;
use crate::oracle::radial_capacity;
use crate::sobolev::gradient;
use crate::truncation::{
    dyadic_radii, exhaustion, lipschitz_constant_on_mask, luzin_select, restricted_maximal, truncation_ladder,
    truncation_set, LadderOptions, LuzinMode, EXHAUSTIVE_LIMIT, REPRESENTATIVE_COLLAR,
};

/// Environment variable naming the directory that receives scenario output.
pub const OUTPUT_ROOT_VAR: &str = "LIPCAP_OUTPUT_ROOT";

/// Gaps below this are rounding.
const ROUNDING_GAP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("{what} required for kind={kind}")]
    Missing { what: &'static str, kind: Kind },
    #[error("invalid {key}: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("cannot write report: {0}")]
    Write(#[from] io::IoError),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Truncation,
    Capacity,
    Hausdorff,
    Covmap,
    Luzin,
    Consistency,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Truncation => "truncation",
            Kind::Capacity => "capacity",
            Kind::Hausdorff => "hausdorff",
            Kind::Covmap => "covmap",
            Kind::Luzin => "luzin",
            Kind::Consistency => "consistency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Kind::Truncation, Kind::Capacity, Kind::Hausdorff, Kind::Covmap, Kind::Luzin, Kind::Consistency]
            .into_iter()
            .find(|k| k.as_str() == s)
    }

    fn entry_kind(self) -> EntryKind {
        match self {
            Kind::Truncation | Kind::Luzin => EntryKind::Function,
            Kind::Capacity | Kind::Hausdorff | Kind::Consistency => EntryKind::Set,
            Kind::Covmap => EntryKind::Map,
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub entry: String,
    pub resolutions: Vec<usize>,
    pub dim: usize,
    pub p: Option<f64>,
    pub alphas: Vec<f64>,
    pub eps: Vec<f64>,
    pub seed: u64,
    pub tolerance: Option<f64>,
    /// `param.<name> = value` lines, passed to the corpus entry.
    pub params: BTreeMap<String, f64>,
    /// Set entry used by `luzin`.
    pub set: String,
    pub set_params: BTreeMap<String, f64>,
    /// Bump test function for `covmap`; `None` means `u = 1`.
    pub bump: Option<([f64; 3], f64)>,
    pub nested: usize,
    pub exclusion_radius: f64,
    pub output: Option<String>,
}

fn parse_list<T: std::str::FromStr>(key: &'static str, v: &str) -> Result<Vec<T>> {
    v.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| ScenarioError::Invalid { key, msg: format!("cannot parse {t:?}") }))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &'static str, v: &str) -> Result<T> {
    v.parse().map_err(|_| ScenarioError::Invalid { key, msg: format!("cannot parse {v:?}") })
}

impl Scenario {
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut kind = None;
        let mut entry = None;
        let mut s = Scenario {
            name: name.to_string(),
            kind: Kind::Truncation,
            entry: String::new(),
            resolutions: Vec::new(),
            dim: 2,
            p: None,
            alphas: Vec::new(),
            eps: Vec::new(),
            seed: 0,
            tolerance: None,
            params: BTreeMap::new(),
            set: "segment".into(),
            set_params: BTreeMap::new(),
            bump: None,
            nested: 3,
            exclusion_radius: 0.1,
            output: None,
        };
        let mut center: Option<Vec<f64>> = None;
        let mut radius: Option<f64> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ScenarioError::Syntax { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "kind" => {
                    kind = Some(Kind::parse(v).ok_or_else(|| ScenarioError::Invalid { key: "kind", msg: v.to_string() })?)
                }
                "entry" => entry = Some(v.to_string()),
                "resolution" | "resolutions" => s.resolutions.extend(parse_list::<usize>("resolution", v)?),
                "dim" => s.dim = parse_one("dim", v)?,
                "p" => s.p = Some(parse_one("p", v)?),
                "alpha" | "alphas" => s.alphas.extend(parse_list::<f64>("alpha", v)?),
                "eps" => s.eps.extend(parse_list::<f64>("eps", v)?),
                "seed" => s.seed = parse_one("seed", v)?,
                "tolerance" => s.tolerance = Some(parse_one("tolerance", v)?),
                "set" => s.set = v.to_string(),
                "u_center" => center = Some(parse_list("u_center", v)?),
                "u_radius" => radius = Some(parse_one("u_radius", v)?),
                "nested" => s.nested = parse_one("nested", v)?,
                "exclusion_radius" => s.exclusion_radius = parse_one("exclusion_radius", v)?,
                "output" => s.output = Some(v.to_string()),
                _ => {
                    if let Some(p) = k.strip_prefix("param.") {
                        s.params.insert(p.to_string(), parse_one("param", v)?);
                    } else if let Some(p) = k.strip_prefix("set_param.") {
                        s.set_params.insert(p.to_string(), parse_one("set_param", v)?);
                    } else {
                        return Err(ScenarioError::UnknownKey(k.to_string()));
                    }
                }
            }
        }
        s.kind = kind.ok_or(ScenarioError::Invalid { key: "kind", msg: "missing".into() })?;
        s.entry = entry.ok_or(ScenarioError::Missing { what: "corpus entry", kind: s.kind })?;
        if let (Some(c), r) = (center.as_ref(), radius) {
            let mut arr = [0.0; 3];
            for (a, v) in arr.iter_mut().zip(c) {
                *a = *v;
            }
            s.bump = Some((arr, r.unwrap_or(0.3)));
        } else if let Some(r) = radius {
            s.bump = Some(([0.5, 0.1, 0.0], r));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read { path: path.to_path_buf(), source })?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
        Self::parse(&name, &text)
    }

    /// Completeness of the parameters for the kind, checked before any work.
    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() {
            return Err(ScenarioError::Missing { what: "at least one resolution", kind: self.kind });
        }
        if let Some(&r) = self.resolutions.iter().find(|&&r| r < 8) {
            return Err(ScenarioError::Invalid { key: "resolution", msg: format!("{r} is below 8 cells") });
        }
        if !(1..=3).contains(&self.dim) {
            return Err(ScenarioError::Invalid { key: "dim", msg: format!("{} is not 1, 2 or 3", self.dim) });
        }
        let entry = corpus::describe(&self.entry)?;
        if entry.kind != self.kind.entry_kind() {
            return Err(ScenarioError::Invalid {
                key: "entry",
                msg: format!("{} is a {}, kind={} needs a {}", entry.id, entry.kind, self.kind, self.kind.entry_kind()),
            });
        }
        match self.kind {
            Kind::Capacity | Kind::Covmap if self.p.is_none() => {
                return Err(ScenarioError::Missing { what: "exponent p", kind: self.kind })
            }
            Kind::Luzin if self.eps.is_empty() => return Err(ScenarioError::Missing { what: "eps", kind: self.kind }),
            _ => {}
        }
        if let Some(p) = self.p {
            if !(p >= 1.0) {
                return Err(ScenarioError::Invalid { key: "p", msg: format!("{p} is below 1") });
            }
        }
        if self.alphas.iter().any(|a| !(*a > 0.0)) || self.alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ScenarioError::Invalid { key: "alpha", msg: "alphas must be positive and increasing".into() });
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(ScenarioError::Invalid { key: "eps", msg: "eps must be positive".into() });
        }
        if self.kind == Kind::Luzin {
            let set = corpus::describe(&self.set)?;
            if set.kind != EntryKind::Set {
                return Err(ScenarioError::Invalid { key: "set", msg: format!("{} is not a set", set.id) });
            }
        }
        Ok(())
    }

    fn domain(&self, n: usize) -> GridDomain {
        GridDomain::cube(self.dim, -1.0, 1.0, n).expect("validated resolution")
    }
}

/// One row of the check table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    #[serde(with = "lenient_f64")]
    pub lhs: f64,
    #[serde(with = "lenient_f64")]
    pub rhs: f64,
    #[serde(with = "lenient_f64")]
    pub ratio: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub provenance: String,
    pub oracle: String,
}

/// Non-finite values travel as the strings `inf`, `-inf` and `NaN`.
mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs != 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

impl Check {
    /// `|lhs - rhs| ≤ tol · max(|rhs|, 1)` when `rhs` is zero, else relative.
    pub fn close(id: String, lhs: f64, rhs: f64, tol: f64, provenance: &str, oracle: &str) -> Self {
        let scale = if rhs == 0.0 { 1.0 } else { rhs.abs() };
        let pass = (lhs - rhs).abs() <= tol * scale;
        Self { id, lhs, rhs, ratio: ratio(lhs, rhs), tolerance: tol, pass, provenance: provenance.into(), oracle: oracle.into() }
    }

    /// `lhs ≤ rhs (1 + tol)`.
    pub fn at_most(id: String, lhs: f64, rhs: f64, tol: f64, provenance: &str, oracle: &str) -> Self {
        let pass = lhs <= rhs + tol * rhs.abs();
        Self { id, lhs, rhs, ratio: ratio(lhs, rhs), tolerance: tol, pass, provenance: provenance.into(), oracle: oracle.into() }
    }

    /// `lhs < rhs`.
    pub fn below(id: String, lhs: f64, rhs: f64, provenance: &str, oracle: &str) -> Self {
        Self { id, lhs, rhs, ratio: ratio(lhs, rhs), tolerance: 0.0, pass: lhs < rhs, provenance: provenance.into(), oracle: oracle.into() }
    }

    pub fn flag(id: String, ok: bool, provenance: &str, oracle: &str) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self { id, lhs: v, rhs: 1.0, ratio: v, tolerance: 0.0, pass: ok, provenance: provenance.into(), oracle: oracle.into() }
    }

    fn error(id: String, err: impl std::fmt::Display) -> Self {
        Self {
            id,
            lhs: f64::NAN,
            rhs: f64::NAN,
            ratio: f64::NAN,
            tolerance: 0.0,
            pass: false,
            provenance: "TRIVIAL".into(),
            oracle: format!("error: {err}"),
        }
    }
}

const TRIVIAL: &str = "TRIVIAL";
const DERIVED: &str = "DERIVED";

/// Stored bound on `Lip(f*|R_α) / α`, frozen from a sweep of the function
/// corpus (largest measured ratio 1.68, half-space indicator). Neither `R_α`
/// nor `f*` depends on p, so the bound is shared by all exponents.
pub fn lipschitz_baseline(n: usize, _p: f64) -> f64 {
    match n {
        1 | 2 | 3 => 2.0,
        _ => f64::INFINITY,
    }
}

fn default_truncation_alphas(f: &ScalarField) -> Vec<f64> {
    let m = restricted_maximal(&gradient(f), &dyadic_radii(f.domain())).expect("nonempty ladder");
    let mut v = m.values.values().to_vec();
    v.sort_by(f64::total_cmp);
    let median = v[v.len() / 2].max(1e-12);
    (0..5).map(|k| median * (1u32 << k) as f64).collect()
}

fn run_truncation(s: &Scenario, out: Option<&Path>, checks: &mut Vec<Check>) -> Result<()> {
    let p = s.p.unwrap_or(2.0);
    let opts = LadderOptions { seed: s.seed, ..LadderOptions::default() };
    for &n in &s.resolutions {
        let d = s.domain(n);
        let f = corpus::field(&s.entry, &d, &s.params)?;
        let alphas = if s.alphas.is_empty() { default_truncation_alphas(&f) } else { s.alphas.clone() };
        let ladder = match truncation_ladder(&f, &alphas, &opts) {
            Ok(l) => l,
            Err(e) => {
                checks.push(Check::error(format!("n{n}_ladder"), e));
                continue;
            }
        };
        if let Some(dir) = out {
            io::write_ladder(&dir.join(format!("ladder_{n}")), &ladder)?;
        }
        let nest = ladder.masks.windows(2).filter(|w| !w[0].is_subset_of(&w[1])).count();
        checks.push(Check::at_most(format!("n{n}_nesting_violations"), nest as f64, 0.0, 0.0, TRIVIAL, "set inclusion"));
        let open = ladder.masks.iter().filter(|m| mask_closure(m) != **m).count();
        checks.push(Check::at_most(format!("n{n}_closure_violations"), open as f64, 0.0, 0.0, TRIVIAL, "closure idempotence"));
        let radii = dyadic_radii(&d);
        let g = gradient(&f);
        let m1 = restricted_maximal(&g, &radii).expect("nonempty ladder");
        let m2 = restricted_maximal(&g.scaled(2.0).expect("finite"), &radii).expect("nonempty ladder");
        let scale_bad = alphas
            .iter()
            .filter(|&&a| truncation_set(&m1, a).ok() != truncation_set(&m2, 2.0 * a).ok())
            .count();
        checks.push(Check::at_most(format!("n{n}_scaling_violations"), scale_bad as f64, 0.0, 0.0, TRIVIAL, "exact power-of-two scaling"));
        let base = lipschitz_baseline(s.dim, p);
        for (k, (l, a)) in ladder.lipschitz.iter().zip(&alphas).enumerate() {
            checks.push(Check::at_most(
                format!("n{n}_level{k}_lipschitz_over_alpha"),
                l / a,
                base,
                0.0,
                DERIVED,
                "frozen corpus baseline",
            ));
        }
        if s.entry == "affine" {
            let core = RegionMask::core(&d, REPRESENTATIVE_COLLAR);
            let exact = corpus::gradient_norm("affine", &vec![0.0; s.dim], &s.params)?.expect("closed form");
            if core.count() <= EXHAUSTIVE_LIMIT {
                let e = lipschitz_constant_on_mask(&f, &core, &RegionMask::empty(&d), 1, s.seed);
                match e {
                    Ok(e) => checks.push(Check::close(format!("n{n}_affine_exact_slope"), e.constant, exact, 1e-10, DERIVED, "closed-form gradient norm")),
                    Err(err) => checks.push(Check::error(format!("n{n}_affine_exact_slope"), err)),
                }
            }
        }
    }
    Ok(())
}

fn capacity_config() -> CapacityConfig {
    CapacityConfig::default()
}

fn run_capacity(s: &Scenario, out: Option<&Path>, checks: &mut Vec<Check>) -> Result<()> {
    let p = s.p.expect("validated");
    for &n in &s.resolutions {
        let d = s.domain(n);
        let plate = corpus::set(&s.entry, &d, &s.params)?;
        let c = match Condenser::new(plate, p) {
            Ok(c) => c,
            Err(e @ CapacityError::PlateTooClose { .. }) => {
                return Err(ScenarioError::Invalid { key: "entry", msg: e.to_string() })
            }
            Err(e) => return Err(ScenarioError::Invalid { key: "p", msg: e.to_string() }),
        };
        let est = capacity_compact(&c, &capacity_config());
        if let Some(dir) = out {
            io::write_capacity(&dir.join(format!("capacity_{n}")), &est)?;
        }
        checks.push(Check::flag(format!("n{n}_admissible"), is_admissible(&c, &est.minimizer), TRIVIAL, "constraint check"));
        checks.push(Check::flag(format!("n{n}_converged"), est.certificate.converged, TRIVIAL, "solver certificate"));
        if s.entry == "ball" {
            let r = corpus::describe("ball")?.params[0].1;
            let r = s.params.get("r").copied().unwrap_or(r);
            let tol = s.tolerance.unwrap_or(if s.dim == 3 { 0.07 } else { 0.05 });
            let oracle = radial_capacity(s.dim, p, r, 1.0, 20_000);
            checks.push(Check::close(format!("n{n}_radial_oracle"), est.value, oracle, tol, DERIVED, "one-dimensional radial capacity"));
        }
    }
    Ok(())
}

/// Expected Hausdorff value and whether the estimate should decay.
fn hausdorff_oracle(s: &Scenario, exponent: f64) -> Option<(f64, bool)> {
    let n = s.dim as f64;
    match s.entry.as_str() {
        "point" => Some((0.0, true)),
        "segment" if exponent == 1.0 => Some((s.params.get("length").copied().unwrap_or(0.8), false)),
        "ball" if exponent == n => {
            let r = s.params.get("r").copied().unwrap_or(0.2);
            Some((crate::oracle::unit_sphere_area(s.dim) / n * r.powf(n), false))
        }
        _ => None,
    }
}

fn run_hausdorff(s: &Scenario, checks: &mut Vec<Check>) -> Result<()> {
    let exponent = s.params.get("s").copied().unwrap_or(s.dim as f64 - 1.0);
    let tol = s.tolerance.unwrap_or(0.15);
    let oracle = hausdorff_oracle(s, exponent);
    let mut values = Vec::new();
    for &n in &s.resolutions {
        let d = s.domain(n);
        let m = corpus::set(&s.entry, &d, &s.params)?;
        let est = hausdorff_estimate(&m, exponent, &[]);
        values.push(est.value);
        if let Some((v, _)) = oracle {
            checks.push(Check::close(format!("n{n}_hausdorff"), est.value, v, tol, TRIVIAL, "closed-form measure"));
        }
    }
    if let Some((_, decays)) = oracle {
        if s.resolutions.len() > 1 {
            let got = classify_decay(&values);
            let ok = (got == Decay::Decaying) == decays;
            let last = *values.last().unwrap();
            checks.push(Check {
                id: "decay".into(),
                lhs: ratio(last, values[0]),
                rhs: 0.25,
                ratio: ratio(ratio(last, values[0]), 0.25),
                tolerance: 0.0,
                pass: ok,
                provenance: TRIVIAL.into(),
                oracle: if decays { "null set decays".into() } else { "positive measure persists".into() },
            });
        }
    }
    Ok(())
}

fn run_consistency(s: &Scenario, checks: &mut Vec<Check>) -> Result<()> {
    let grids: Vec<GridDomain> = s.resolutions.iter().map(|&n| s.domain(n)).collect();
    // validate the set at every resolution before solving
    for d in &grids {
        corpus::set(&s.entry, d, &s.params)?;
    }
    let entry = s.entry.clone();
    let params = s.params.clone();
    let shape = move |d: &GridDomain| corpus::set(&entry, d, &params).expect("validated");
    let expected = match s.entry.as_str() {
        "point" => Some(Verdict::CoDecay),
        "segment" | "ball" => Some(Verdict::CoStable),
        _ => None,
    };
    match cap1_hausdorff_consistency(&shape, &grids, &capacity_config()) {
        Ok((verdict, report)) => {
            let h = ratio(*report.hausdorff.last().unwrap(), report.hausdorff[0]);
            let c = ratio(*report.capacity.last().unwrap(), report.capacity[0]);
            let ok = expected.map_or(true, |e| e == verdict);
            checks.push(Check {
                id: format!("verdict_{verdict:?}").to_lowercase(),
                lhs: h,
                rhs: c,
                ratio: ratio(h, c),
                tolerance: 0.0,
                pass: ok,
                provenance: TRIVIAL.into(),
                oracle: "hausdorff and capacity decay agree".into(),
            });
        }
        Err(e) => checks.push(Check::error("verdict".into(), e)),
    }
    Ok(())
}

fn run_covmap(s: &Scenario, out: Option<&Path>, checks: &mut Vec<Check>) -> Result<()> {
    let p = s.p.expect("validated");
    let tol = s.tolerance.unwrap_or(0.02);
    let cfg = CovConfig { p, alphas: if s.alphas.is_empty() { None } else { Some(s.alphas.clone()) }, ..CovConfig::default() };
    let mut gaps = Vec::new();
    for &n in &s.resolutions {
        let d = s.domain(n);
        let phi = corpus::map(&s.entry, &d, &s.params)?;
        let t = corpus::target_domain(&s.entry, &d, &s.params)?;
        let u = match s.bump {
            Some((c, r)) => ScalarField::from_fn(&t, |y| {
                let q: f64 = y.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (r * r);
                if q < 1.0 { (1.0 - q).powi(3) } else { 0.0 }
            }),
            None => Ok(ScalarField::constant(&t, 1.0)),
        }
        .expect("finite test function");
        if let Some(dir) = out {
            io::write_map(&dir.join(format!("map_{n}")), &phi)?;
        }
        match change_of_variables_check(&phi, &RegionMask::full(&d), &u, &cfg) {
            Ok(rep) => {
                if let Some(dir) = out {
                    io::atomic_write(&dir.join(format!("cov_{n}.txt")), rep.to_text().as_bytes())?;
                }
                gaps.push(rep.gap);
                checks.push(Check::close(format!("n{n}_lhs_vs_rhs"), rep.lhs, rep.rhs, tol, DERIVED, "multiplicity-weighted target sum"));
                let effect = crate::covmap::relative_gap(rep.rhs, rep.rhs_unexcised);
                checks.push(Check::at_most(format!("n{n}_exclusion_effect"), effect, rep.gap, 0.0, TRIVIAL, "singular-set excision"));
            }
            Err(e) => checks.push(Check::error(format!("n{n}_lhs_vs_rhs"), e)),
        }
    }
    if gaps.len() > 1 {
        let (first, last) = (gaps[0], *gaps.last().unwrap());
        checks.push(Check {
            id: "gap_refinement".into(),
            lhs: last,
            rhs: first,
            ratio: ratio(last, first),
            tolerance: ROUNDING_GAP,
            pass: last <= first || last < ROUNDING_GAP,
            provenance: TRIVIAL.into(),
            oracle: "gap does not grow under refinement".into(),
        });
    }
    Ok(())
}

fn run_luzin(s: &Scenario, out: Option<&Path>, checks: &mut Vec<Check>) -> Result<()> {
    let p = s.p.unwrap_or(2.0);
    let opts = LadderOptions { seed: s.seed, ..LadderOptions::default() };
    let mode = match s.params.get("capacity_mode") {
        Some(&q) if q > 0.0 => LuzinMode::Capacity { p: q },
        _ => LuzinMode::Hausdorff,
    };
    let alphas = if s.alphas.is_empty() { None } else { Some(s.alphas.as_slice()) };
    for &n in &s.resolutions {
        let d = s.domain(n);
        let f = corpus::field(&s.entry, &d, &s.params)?;
        let b = corpus::set(&s.set, &d, &s.set_params)?;
        let ladder = match exhaustion(&f, alphas, s.nested, p, &opts) {
            Ok(l) => l,
            Err(e) => {
                checks.push(Check::error(format!("n{n}_exhaustion"), e));
                continue;
            }
        };
        if let Some(dir) = out {
            io::write_ladder(&dir.join(format!("exhaustion_{n}")), &ladder)?;
        }
        for &eps in &s.eps {
            match luzin_select(&b, &ladder, eps, mode, &capacity_config()) {
                Ok(sel) => {
                    checks.push(Check::below(format!("n{n}_eps{eps:e}_residual"), sel.residual, eps, TRIVIAL, "selection rule"));
                    let reach = if sel.excluded.is_empty() { 0.0 } else { sel.excluded.max_distance_from(&vec![0.0; s.dim]) };
                    checks.push(Check::at_most(
                        format!("n{n}_eps{eps:e}_excluded_reach"),
                        reach,
                        s.exclusion_radius,
                        0.0,
                        TRIVIAL,
                        "exclusion localized at the origin",
                    ));
                }
                Err(e) => checks.push(Check::error(format!("n{n}_eps{eps:e}_residual"), e)),
            }
        }
    }
    Ok(())
}

/// Execute a validated scenario. Artifacts go under `out` when given.
pub fn run_scenario(s: &Scenario, out: Option<&Path>) -> Result<Vec<Check>> {
    s.validate()?;
    let mut checks = Vec::new();
    match s.kind {
        Kind::Truncation => run_truncation(s, out, &mut checks)?,
        Kind::Capacity => run_capacity(s, out, &mut checks)?,
        Kind::Hausdorff => run_hausdorff(s, &mut checks)?,
        Kind::Consistency => run_consistency(s, &mut checks)?,
        Kind::Covmap => run_covmap(s, out, &mut checks)?,
        Kind::Luzin => run_luzin(s, out, &mut checks)?,
    }
    require_oracles(&mut checks);
    Ok(checks)
}

/// A derived row without a named oracle cannot pass.
pub fn require_oracles(checks: &mut [Check]) {
    for c in checks {
        if c.provenance == DERIVED && c.oracle.is_empty() {
            c.pass = false;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportPayload {
    pub scenario: String,
    pub kind: Kind,
    pub entry: String,
    pub seed: u64,
    pub resolutions: Vec<usize>,
    pub checks: Vec<Check>,
}

pub const CSV_HEADER: &str = "check_id,lhs,rhs,ratio,tolerance,pass,provenance,oracle,seed";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn checks_csv(checks: &[Check], seed: u64) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for c in checks {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&c.id),
            c.lhs,
            c.rhs,
            c.ratio,
            c.tolerance,
            if c.pass { "pass" } else { "fail" },
            c.provenance,
            csv_field(&c.oracle),
            seed
        )
        .unwrap();
    }
    s
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("lipcap-out"))
}

pub fn output_dir(s: &Scenario) -> PathBuf {
    output_root().join(s.output.as_deref().unwrap_or(&s.name))
}

/// Summary, CSV and JSON. Only the summary carries a timestamp.
pub fn write_reports(dir: &Path, s: &Scenario, checks: &[Check], timestamp: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(io::IoError::from)?;
    let payload = ReportPayload {
        scenario: s.name.clone(),
        kind: s.kind,
        entry: s.entry.clone(),
        seed: s.seed,
        resolutions: s.resolutions.clone(),
        checks: checks.to_vec(),
    };
    let json = serde_json::to_string_pretty(&payload).expect("report serializes");
    io::atomic_write(&dir.join("checks.json"), json.as_bytes())?;
    io::atomic_write(&dir.join("checks.csv"), checks_csv(checks, s.seed).as_bytes())?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
    let mut summary = format!("timestamp = {timestamp}\n");
    writeln!(summary, "scenario = {}\nkind = {}\nentry = {}\nseed = {}", s.name, s.kind, s.entry, s.seed).unwrap();
    writeln!(summary, "resolutions = {}", s.resolutions.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")).unwrap();
    writeln!(summary, "checks = {}\npassed = {}", checks.len(), checks.len() - failed.len()).unwrap();
    for f in &failed {
        writeln!(summary, "failed = {f}").unwrap();
    }
    io::atomic_write(&dir.join("summary.txt"), summary.as_bytes())?;
    Ok(())
}

/// Concatenate the JSON payloads of several report directories.
pub fn merge_reports(dirs: &[PathBuf]) -> Result<Vec<ReportPayload>> {
    dirs.iter()
        .map(|d| {
            let path = d.join("checks.json");
            let text = fs::read_to_string(&path).map_err(|source| ScenarioError::Read { path: path.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| ScenarioError::Invalid { key: "report", msg: format!("{}: {e}", path.display()) })
        })
        .collect()
}

pub fn merged_csv(reports: &[ReportPayload]) -> String {
    let mut s = format!("scenario,{CSV_HEADER}\n");
    for r in reports {
        for line in checks_csv(&r.checks, r.seed).lines().skip(1) {
            writeln!(s, "{},{line}", csv_field(&r.scenario)).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests;
