//! Named test functions, maps and sets with their known facts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::covmap::{AnalyticMap, CovError, SobolevMap};
use crate::grid::{ExtensionMode, GridDomain, GridError, RegionMask, ScalarField};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown corpus entry {0:?}")]
    UnknownEntry(String),
    #[error("entry {id} is a {found}, not a {wanted}")]
    WrongKind { id: String, found: EntryKind, wanted: EntryKind },
    #[error("entry {id} needs parameter {param}")]
    InvalidParameter { id: String, param: &'static str },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Map(#[from] CovError),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    Function,
    Map,
    Set,
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntryKind::Function => "function",
            EntryKind::Map => "map",
            EntryKind::Set => "set",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Trivial,
    Derived(&'static str),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Trivial => f.write_str("[TRIVIAL]"),
            Provenance::Derived(oracle) => write!(f, "[DERIVED: {oracle}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fact {
    pub name: &'static str,
    pub value: String,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub id: &'static str,
    pub kind: EntryKind,
    pub definition: &'static str,
    /// Parameters with their defaults.
    pub params: Vec<(&'static str, f64)>,
    pub facts: Vec<Fact>,
}

impl CorpusEntry {
    pub fn describe(&self) -> String {
        let mut s = format!("id = {}\nkind = {}\ndefinition = {}\n", self.id, self.kind, self.definition);
        for (k, v) in &self.params {
            s += &format!("param {k} = {v}\n");
        }
        for f in &self.facts {
            s += &format!("{} = {} {}\n", f.name, f.value, f.provenance);
        }
        s
    }
}

/// `∫_0^1 r^((β-2)p) r^(n-1) dr < ∞`, i.e. `|x|^β ∈ W²_p` near the origin
/// for non-even `β`.
pub fn radial_w2p_member(beta: f64, p: f64, n: usize) -> bool {
    (beta - 2.0) * p + n as f64 > 0.0
}

const AFFINE_SLOPE: [f64; 3] = [0.3, -0.4, 0.2];
const AFFINE_OFFSET: f64 = 0.25;

fn fact(name: &'static str, value: impl Into<String>, provenance: Provenance) -> Fact {
    Fact { name, value: value.into(), provenance }
}

fn registry() -> Vec<CorpusEntry> {
    use EntryKind::*;
    use Provenance::*;
    let radial = "radial integral oracle";
    vec![
        CorpusEntry {
            id: "affine",
            kind: Function,
            definition: "f(x) = a.x + b, a = (0.3, -0.4, 0.2), b = 0.25",
            params: vec![],
            facts: vec![
                fact("gradient", "a (first n entries)", Trivial),
                fact("lipschitz_constant_2d", "0.5", Trivial),
                fact("hessian", "0", Trivial),
            ],
        },
        CorpusEntry {
            id: "quadratic",
            kind: Function,
            definition: "f(x) = |x|^2 / 2",
            params: vec![],
            facts: vec![
                fact("hessian", "identity", Trivial),
                fact("w2p_member", "every p", Trivial),
            ],
        },
        CorpusEntry {
            id: "radial_beta",
            kind: Function,
            definition: "f(x) = |x|^beta",
            params: vec![("beta", 1.5)],
            facts: vec![
                fact("gradient_norm", "beta |x|^(beta-1)", Trivial),
                fact("w2p_threshold", "(beta-2)p + n > 0", Derived(radial)),
            ],
        },
        CorpusEntry {
            id: "halfspace_indicator",
            kind: Function,
            definition: "f(x) = 1 if x1 > 0 else 0",
            params: vec![],
            facts: vec![
                fact("representative_on_hyperplane", "0.5", Derived("half-ball area ratio")),
                fact("w1p_member", "no", Trivial),
            ],
        },
        CorpusEntry {
            id: "smooth_trig",
            kind: Function,
            definition: "f(x) = sin(pi x1 / 2) cos(pi x2 / 2) + x3 / 4",
            params: vec![],
            facts: vec![fact("w2p_member", "every p", Trivial)],
        },
        CorpusEntry {
            id: "identity_map",
            kind: Map,
            definition: "phi(x) = x",
            params: vec![],
            facts: vec![fact("jacobian", "1", Trivial), fact("multiplicity", "1 on the image", Trivial)],
        },
        CorpusEntry {
            id: "scaling_map",
            kind: Map,
            definition: "phi(x) = c x",
            params: vec![("c", 2.0)],
            facts: vec![fact("jacobian", "c^n", Trivial), fact("multiplicity", "1 on the image", Trivial)],
        },
        CorpusEntry {
            id: "fold_map",
            kind: Map,
            definition: "phi(x) = (|x1|, x2, ..., xn)",
            params: vec![],
            facts: vec![
                fact("abs_jacobian", "1 off the fold", Trivial),
                fact("multiplicity", "2 on x1 > 0 for the symmetric box", Trivial),
            ],
        },
        CorpusEntry {
            id: "complex_square",
            kind: Map,
            definition: "phi(x1, x2) = (x1^2 - x2^2, 2 x1 x2), 2-D only",
            params: vec![],
            facts: vec![
                fact("jacobian", "4 |x|^2", Trivial),
                fact("multiplicity", "2 off the origin on symmetric sets", Trivial),
            ],
        },
        CorpusEntry {
            id: "radial_stretch_map",
            kind: Map,
            definition: "phi(x) = |x|^(beta-1) x",
            params: vec![("beta", 0.5)],
            facts: vec![
                fact("abs_jacobian", "beta |x|^(n(beta-1))", Trivial),
                fact("lipschitz", "iff beta >= 1", Trivial),
                fact("w2p_threshold", "(beta-2)p + n > 0", Derived(radial)),
            ],
        },
        CorpusEntry {
            id: "ball",
            kind: Set,
            definition: "closed ball of radius r at the origin",
            params: vec![("r", 0.2)],
            facts: vec![fact(
                "capacity_2d_p2",
                format!("2 pi / ln(1/r) in B(0,1); r = 0.2 gives {:.6}", 2.0 * PI / 5f64.ln()),
                Derived("one-dimensional radial capacity oracle"),
            )],
        },
        CorpusEntry {
            id: "point",
            kind: Set,
            definition: "the cell containing (0.0123, 0.0123, ...)",
            params: vec![],
            facts: vec![
                fact("hausdorff_n_minus_1", "0", Trivial),
                fact("capacity_1", "0 in the limit", Derived("single-cell perimeter (2+sqrt 2)h")),
            ],
        },
        CorpusEntry {
            id: "segment",
            kind: Set,
            definition: "segment from (-L/2, 0.0123) to (L/2, 0.0123)",
            params: vec![("length", 0.8)],
            facts: vec![fact("hausdorff_1", "L", Trivial), fact("capacity_1", "positive in the limit", Trivial)],
        },
    ]
}

pub fn list() -> Vec<CorpusEntry> {
    registry()
}

pub fn describe(id: &str) -> Result<CorpusEntry> {
    registry().into_iter().find(|e| e.id == id).ok_or_else(|| CorpusError::UnknownEntry(id.to_string()))
}

fn param(entry: &CorpusEntry, params: &BTreeMap<String, f64>, name: &'static str) -> Result<f64> {
    params
        .get(name)
        .copied()
        .or_else(|| entry.params.iter().find(|(k, _)| *k == name).map(|(_, v)| *v))
        .filter(|v| v.is_finite())
        .ok_or_else(|| CorpusError::InvalidParameter { id: entry.id.to_string(), param: name })
}

fn expect(entry: &CorpusEntry, kind: EntryKind) -> Result<()> {
    if entry.kind != kind {
        return Err(CorpusError::WrongKind { id: entry.id.to_string(), found: entry.kind, wanted: kind });
    }
    Ok(())
}

/// Sample a function entry at cell centers.
pub fn field(id: &str, d: &GridDomain, params: &BTreeMap<String, f64>) -> Result<ScalarField> {
    let e = describe(id)?;
    expect(&e, EntryKind::Function)?;
    let n = d.dim();
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f = match id {
        "affine" => ScalarField::from_fn(d, |x| {
            x.iter().zip(AFFINE_SLOPE).map(|(a, b)| a * b).sum::<f64>() + AFFINE_OFFSET
        })?,
        "quadratic" => ScalarField::from_fn(d, |x| 0.5 * norm(x).powi(2))?,
        "radial_beta" => {
            let beta = param(&e, params, "beta")?;
            ScalarField::from_fn(d, |x| norm(x).powf(beta))?
        }
        "halfspace_indicator" => ScalarField::from_fn(d, |x| if x[0] > 0.0 { 1.0 } else { 0.0 })?,
        "smooth_trig" => ScalarField::from_fn(d, |x| {
            let mut v = (0.5 * PI * x[0]).sin();
            if n > 1 {
                v *= (0.5 * PI * x[1]).cos();
            }
            if n > 2 {
                v += 0.25 * x[2];
            }
            v
        })?,
        _ => unreachable!("registry and sampler disagree on {id}"),
    };
    Ok(f.with_extension(ExtensionMode::Zero))
}

/// Exact gradient norm where the entry has one in closed form.
pub fn gradient_norm(id: &str, x: &[f64], params: &BTreeMap<String, f64>) -> Result<Option<f64>> {
    let e = describe(id)?;
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(match id {
        "affine" => Some(AFFINE_SLOPE[..x.len()].iter().map(|a| a * a).sum::<f64>().sqrt()),
        "quadratic" => Some(r),
        "radial_beta" => Some(param(&e, params, "beta")? * r.powf(param(&e, params, "beta")? - 1.0)),
        _ => None,
    })
}

pub fn analytic_map(id: &str, params: &BTreeMap<String, f64>) -> Result<AnalyticMap> {
    let e = describe(id)?;
    expect(&e, EntryKind::Map)?;
    Ok(match id {
        "identity_map" => AnalyticMap::Identity,
        "scaling_map" => AnalyticMap::Scaling(param(&e, params, "c")?),
        "fold_map" => AnalyticMap::Fold,
        "complex_square" => AnalyticMap::ComplexSquare,
        "radial_stretch_map" => AnalyticMap::RadialStretch(param(&e, params, "beta")?),
        _ => unreachable!("registry and sampler disagree on {id}"),
    })
}

pub fn map(id: &str, d: &GridDomain, params: &BTreeMap<String, f64>) -> Result<SobolevMap> {
    let form = analytic_map(id, params)?;
    if form == AnalyticMap::ComplexSquare && d.dim() != 2 {
        return Err(CorpusError::InvalidParameter { id: id.to_string(), param: "dim" });
    }
    Ok(SobolevMap::from_analytic(d, form)?)
}

/// Box that contains the image of `d` under the entry, with the same cell
/// count per axis.
pub fn target_domain(id: &str, d: &GridDomain, params: &BTreeMap<String, f64>) -> Result<GridDomain> {
    let form = analytic_map(id, params)?;
    let reach = (0..d.dim()).map(|a| d.lower()[a].abs().max(d.upper()[a].abs())).fold(0.0, f64::max);
    let r = d.diameter() / 2.0;
    let extent = match form {
        AnalyticMap::Identity | AnalyticMap::Fold => return Ok(d.clone()),
        AnalyticMap::Scaling(c) => {
            let lo: Vec<f64> = d.lower().iter().zip(d.upper()).map(|(l, u)| (c * l).min(c * u)).collect();
            let hi: Vec<f64> = d.lower().iter().zip(d.upper()).map(|(l, u)| (c * l).max(c * u)).collect();
            return Ok(GridDomain::new(&lo, &hi, d.cells())?);
        }
        AnalyticMap::ComplexSquare => r * r,
        AnalyticMap::RadialStretch(beta) => r.powf(beta).max(reach),
    };
    let n = d.dim();
    let cells = *d.cells().iter().max().unwrap();
    Ok(GridDomain::cube(n, -extent, extent, cells)?)
}

pub fn set(id: &str, d: &GridDomain, params: &BTreeMap<String, f64>) -> Result<RegionMask> {
    let e = describe(id)?;
    expect(&e, EntryKind::Set)?;
    let n = d.dim();
    Ok(match id {
        "ball" => RegionMask::ball(d, &vec![0.0; n], param(&e, params, "r")?),
        "point" => RegionMask::point(d, &vec![0.0123; n])?,
        "segment" => {
            let l = param(&e, params, "length")?;
            let mut a = vec![0.0123; n];
            let mut b = vec![0.0123; n];
            a[0] = -0.5 * l;
            b[0] = 0.5 * l;
            RegionMask::segment(d, &a, &b)
        }
        _ => unreachable!("registry and sampler disagree on {id}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_required_entries() {
        let ids: Vec<&str> = list().iter().map(|e| e.id).collect();
        for id in [
            "affine",
            "quadratic",
            "radial_beta",
            "halfspace_indicator",
            "identity_map",
            "scaling_map",
            "fold_map",
            "complex_square",
            "radial_stretch_map",
        ] {
            assert!(ids.contains(&id), "{id}");
        }
        assert!(matches!(describe("bogus"), Err(CorpusError::UnknownEntry(_))));
    }

    #[test]
    fn every_fact_is_tagged() {
        for e in list() {
            for f in &e.facts {
                let text = f.provenance.to_string();
                assert!(text == "[TRIVIAL]" || text.starts_with("[DERIVED: "), "{}: {text}", e.id);
                if let Provenance::Derived(o) = f.provenance {
                    assert!(!o.is_empty());
                }
            }
        }
        assert!(describe("radial_beta").unwrap().describe().contains("(beta-2)p + n > 0"));
    }

    #[test]
    fn membership_threshold_matches_radial_integral() {
        // ∫_ε^1 r^k dr stays bounded as ε → 0 iff k > -1
        let integral = |k: f64, eps: f64| {
            let steps = 20_000;
            let (a, b) = (eps.ln(), 0.0f64);
            let dt = (b - a) / steps as f64;
            (0..steps).map(|i| ((a + (i as f64 + 0.5) * dt) * (k + 1.0)).exp() * dt).sum::<f64>()
        };
        for (beta, p, n) in [(1.5, 2.0, 2), (0.5, 1.2, 2), (0.5, 1.5, 2), (1.2, 3.0, 2), (1.0, 2.5, 3), (0.2, 2.0, 3)] {
            let k = (beta - 2.0) * p + n as f64 - 1.0;
            let grows = integral(k, 1e-12) > 10.0 * integral(k, 1e-6);
            assert_eq!(radial_w2p_member(beta, p, n), !grows, "beta={beta} p={p} n={n}");
        }
    }

    #[test]
    fn samplers_match_kinds() {
        let d = GridDomain::cube(2, -1.0, 1.0, 16).unwrap();
        let none = BTreeMap::new();
        for e in list() {
            match e.kind {
                EntryKind::Function => assert!(field(e.id, &d, &none).is_ok()),
                EntryKind::Map => {
                    let phi = map(e.id, &d, &none).unwrap();
                    let t = target_domain(e.id, &d, &none).unwrap();
                    for i in 0..d.len() {
                        let y = phi.sample(&d.center(i)[..2]);
                        assert!(t.contains_point(&y[..2]), "{} maps outside its target", e.id);
                    }
                }
                EntryKind::Set => assert!(!set(e.id, &d, &none).unwrap().is_empty()),
            }
        }
        assert!(matches!(field("fold_map", &d, &none), Err(CorpusError::WrongKind { .. })));
        let d3 = GridDomain::cube(3, -1.0, 1.0, 8).unwrap();
        assert!(map("complex_square", &d3, &none).is_err());
    }
}
