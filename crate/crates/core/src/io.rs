//! On-disk formats: a text header closed by `end`, then a little-endian
//! binary block in row-major order (last axis fastest).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::capacity::CapacityEstimate;
use crate::covmap::{AnalyticMap, MultiplicityField, SobolevMap};
use crate::grid::{ExtensionMode, GridDomain, GridError, MaskFlavor, RegionMask, ScalarField};
use crate::truncation::TruncationLadder;

const MAGIC: &str = "lipcap-grid 1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("expected a {expected} file, found {found}")]
    WrongKind { expected: &'static str, found: String },
    #[error("binary block has {got} bytes, expected {expected}")]
    Truncated { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Map(#[from] crate::covmap::CovError),
}

pub type Result<T> = std::result::Result<T, IoError>;

/// Write through a sibling temporary file and rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn header(kind: &str, d: &GridDomain, extra: &[(&str, &str)]) -> String {
    let mut s = format!("{MAGIC}\nkind = {kind}\ndim = {}\n", d.dim());
    s += &format!("lower = {}\n", join(d.lower().iter().map(|v| format!("{v:?}"))));
    s += &format!("upper = {}\n", join(d.upper().iter().map(|v| format!("{v:?}"))));
    s += &format!("cells = {}\n", join(d.cells()));
    for (k, v) in extra {
        s += &format!("{k} = {v}\n");
    }
    s + "end\n"
}

struct Header {
    kind: String,
    domain: GridDomain,
    entries: Vec<(String, String)>,
}

impl Header {
    fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| IoError::Header(format!("missing key {key}")))
    }

    fn expect_kind(&self, expected: &'static str) -> Result<()> {
        if self.kind != expected {
            return Err(IoError::WrongKind { expected, found: self.kind.clone() });
        }
        Ok(())
    }
}

fn parse_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let mut pos = 0;
    let mut entries = Vec::new();
    let mut first = true;
    loop {
        let rest = &bytes[pos..];
        let nl = rest.iter().position(|b| *b == b'\n').ok_or_else(|| IoError::Header("missing `end`".into()))?;
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| IoError::Header("non-utf8 header".into()))?;
        pos += nl + 1;
        let line = line.trim();
        if first {
            if line != MAGIC {
                return Err(IoError::Header(format!("unknown magic {line:?}")));
            }
            first = false;
            continue;
        }
        if line == "end" {
            break;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| IoError::Header(format!("not key = value: {line}")))?;
        entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut h = Header { kind: String::new(), domain: GridDomain::cube(1, 0.0, 1.0, 4)?, entries };
    h.kind = h.get("kind")?.to_string();
    let floats = |s: &str| -> Result<Vec<f64>> {
        s.split_whitespace().map(|t| t.parse().map_err(|_| IoError::Header(format!("bad number {t}")))).collect()
    };
    let dim: usize = h.get("dim")?.parse().map_err(|_| IoError::Header("bad dim".into()))?;
    let lower = floats(h.get("lower")?)?;
    let upper = floats(h.get("upper")?)?;
    let cells: Vec<usize> = h
        .get("cells")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| IoError::Header(format!("bad cell count {t}"))))
        .collect::<Result<_>>()?;
    if lower.len() != dim || upper.len() != dim || cells.len() != dim {
        return Err(IoError::Header(format!("corner or cell lists do not have {dim} entries")));
    }
    h.domain = GridDomain::new(&lower, &upper, &cells)?;
    Ok((h, &bytes[pos..]))
}

fn check_len(block: &[u8], expected: usize) -> Result<()> {
    if block.len() != expected {
        return Err(IoError::Truncated { expected, got: block.len() });
    }
    Ok(())
}

pub fn encode_field(f: &ScalarField) -> Vec<u8> {
    let mut out = header("field", f.domain(), &[("extension", f.extension().as_str())]).into_bytes();
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let (h, block) = parse_header(bytes)?;
    h.expect_kind("field")?;
    let ext = h.get("extension")?;
    let ext = ExtensionMode::parse(ext).ok_or_else(|| IoError::Header(format!("unknown extension {ext}")))?;
    check_len(block, 8 * h.domain.len())?;
    let values = block.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(ScalarField::new(h.domain, values)?.with_extension(ext))
}

pub fn encode_mask(m: &RegionMask) -> Vec<u8> {
    let mut out = header("mask", m.domain(), &[("flavor", m.flavor().as_str())]).into_bytes();
    let mut bytes = vec![0u8; m.domain().len().div_ceil(8)];
    for i in m.indices() {
        bytes[i / 8] |= 1 << (i % 8);
    }
    out.extend_from_slice(&bytes);
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<RegionMask> {
    let (h, block) = parse_header(bytes)?;
    h.expect_kind("mask")?;
    let flavor = h.get("flavor")?;
    let flavor = MaskFlavor::parse(flavor).ok_or_else(|| IoError::Header(format!("unknown flavor {flavor}")))?;
    let n = h.domain.len();
    check_len(block, n.div_ceil(8))?;
    let cells = (0..n).map(|i| block[i / 8] >> (i % 8) & 1 == 1).collect();
    Ok(RegionMask::new(h.domain, cells)?.with_flavor(flavor))
}

pub fn encode_counts(m: &MultiplicityField) -> Vec<u8> {
    let sub = m.subdiv.to_string();
    let mut out = header("counts", &m.target, &[("subdiv", &sub), ("source", &m.source)]).into_bytes();
    for c in &m.counts {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

pub fn decode_counts(bytes: &[u8]) -> Result<MultiplicityField> {
    let (h, block) = parse_header(bytes)?;
    h.expect_kind("counts")?;
    let subdiv = h.get("subdiv")?.parse().map_err(|_| IoError::Header("bad subdiv".into()))?;
    let source = h.get("source")?.to_string();
    check_len(block, 4 * h.domain.len())?;
    let counts = block.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(MultiplicityField { target: h.domain, counts, source, subdiv })
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    atomic_write(path, &encode_field(f))
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    decode_field(&fs::read(path)?)
}

pub fn write_mask(path: &Path, m: &RegionMask) -> Result<()> {
    atomic_write(path, &encode_mask(m))
}

pub fn read_mask(path: &Path) -> Result<RegionMask> {
    decode_mask(&fs::read(path)?)
}

pub fn write_counts(path: &Path, m: &MultiplicityField) -> Result<()> {
    atomic_write(path, &encode_counts(m))
}

pub fn read_counts(path: &Path) -> Result<MultiplicityField> {
    decode_counts(&fs::read(path)?)
}

/// `level_<k>.mask` per level plus `summary.txt`.
pub fn write_ladder(dir: &Path, ladder: &TruncationLadder) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, m) in ladder.masks.iter().enumerate() {
        write_mask(&dir.join(format!("level_{k}.mask")), m)?;
    }
    write_mask(&dir.join("exceptional.mask"), &ladder.exceptional)?;
    atomic_write(&dir.join("summary.txt"), ladder.summary_text().as_bytes())
}

/// `minimizer.field` plus `certificate.txt`.
pub fn write_capacity(dir: &Path, est: &CapacityEstimate) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_field(&dir.join("minimizer.field"), &est.minimizer)?;
    let text = format!("value = {:.12e}\n{}", est.value, est.certificate.to_text());
    atomic_write(&dir.join("certificate.txt"), text.as_bytes())
}

/// `component_<k>.field` per component plus `manifest.txt`.
pub fn write_map(dir: &Path, phi: &SobolevMap) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, c) in phi.components().iter().enumerate() {
        write_field(&dir.join(format!("component_{k}.field")), c)?;
    }
    atomic_write(&dir.join("manifest.txt"), phi.manifest_text().as_bytes())
}

pub fn read_map(dir: &Path) -> Result<SobolevMap> {
    let manifest = fs::read_to_string(dir.join("manifest.txt"))?;
    let mut form = None;
    let mut files = Vec::new();
    for line in manifest.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        match k.trim() {
            "form" if v.trim() != "none" => {
                form = Some(AnalyticMap::parse(v.trim()).ok_or_else(|| IoError::Header(format!("unknown form {v}")))?)
            }
            "component" => files.push(v.trim().to_string()),
            _ => {}
        }
    }
    let components = files.iter().map(|f| read_field(&dir.join(f))).collect::<Result<Vec<_>>>()?;
    let map = SobolevMap::new(components)?;
    Ok(match form {
        Some(f) => map.with_form(f),
        None => map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{capacity_compact, CapacityConfig, Condenser};

    fn scratch_dir(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("lipcap-io-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn field_round_trip_is_bitwise() {
        let d = GridDomain::new(&[-1.0, 0.0], &[1.0, 0.75], &[16, 6]).unwrap();
        let f = ScalarField::from_fn(&d, |x| (3.0 * x[0]).sin() / 7.0 + x[1]).unwrap().with_extension(ExtensionMode::Reflect);
        let back = decode_field(&encode_field(&f)).unwrap();
        assert_eq!(back, f);
        assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let bytes = encode_field(&f);
        assert!(matches!(decode_field(&bytes[..bytes.len() - 1]), Err(IoError::Truncated { .. })));
        assert!(matches!(decode_mask(&bytes), Err(IoError::WrongKind { .. })));
    }

    #[test]
    fn header_is_text_and_values_are_row_major() {
        let d = GridDomain::cube(2, 0.0, 1.0, 4).unwrap();
        let f = ScalarField::from_fn(&d, |x| x[1]).unwrap();
        let bytes = encode_field(&f);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.starts_with("lipcap-grid 1\nkind = field\ndim = 2\n"));
        let (_, block) = parse_header(&bytes).unwrap();
        // last axis fastest: the second value is one step along x2
        let v1 = f64::from_le_bytes(block[8..16].try_into().unwrap());
        assert_eq!(v1, d.center(1)[1]);
        assert_eq!(d.multi_index(1), [0, 1, 0]);
    }

    #[test]
    fn mask_and_counts_round_trip() {
        let d = GridDomain::cube(3, -1.0, 1.0, 5).unwrap();
        let m = RegionMask::ball(&d, &[0.1, 0.0, -0.2], 0.6).with_flavor(MaskFlavor::Open);
        assert_eq!(decode_mask(&encode_mask(&m)).unwrap(), m);
        let c = MultiplicityField {
            target: d.clone(),
            counts: (0..d.len() as u32).map(|i| i % 3).collect(),
            source: "cells=7".into(),
            subdiv: 4,
        };
        assert_eq!(decode_counts(&encode_counts(&c)).unwrap(), c);
    }

    #[test]
    fn directories_for_ladders_capacities_and_maps() {
        let dir = scratch_dir("dirs");
        let d = GridDomain::cube(2, -1.0, 1.0, 24).unwrap();
        let phi = SobolevMap::from_analytic(&d, AnalyticMap::Fold).unwrap();
        write_map(&dir.join("map"), &phi).unwrap();
        assert_eq!(read_map(&dir.join("map")).unwrap(), phi);

        let est = capacity_compact(&Condenser::new(RegionMask::ball(&d, &[0.0, 0.0], 0.3), 2.0).unwrap(), &CapacityConfig::default());
        write_capacity(&dir.join("cap"), &est).unwrap();
        assert_eq!(read_field(&dir.join("cap/minimizer.field")).unwrap().values(), est.minimizer.values());
        assert!(fs::read_to_string(dir.join("cap/certificate.txt")).unwrap().contains("converged"));

        let f = ScalarField::from_fn(&d, |x| x[0] * x[1]).unwrap();
        let lad = crate::truncation::truncation_ladder(&f, &[0.5, 1.0], &Default::default()).unwrap();
        write_ladder(&dir.join("ladder"), &lad).unwrap();
        assert_eq!(read_mask(&dir.join("ladder/level_1.mask")).unwrap(), lad.masks[1]);
        assert!(dir.join("ladder/summary.txt").exists());
        assert!(!dir.join("ladder/summary.txt.tmp").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
