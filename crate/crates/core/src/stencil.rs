//! Ball-average stencils and their evaluation over whole fields.
//!
//! Small stencils are applied directly; large ones go through an FFT
//! correlation on the padded field. Both paths read the same weights.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::grid::{reflect_index, ExtensionMode, ScalarField};

/// Above this many multiply-adds a field-wide average uses the FFT path.
const DIRECT_WORK_LIMIT: usize = 40_000_000;

/// Subcell samples per axis used for partial-cell weights.
const SUBSAMPLES: usize = 3;

#[derive(Clone, Debug)]
pub(crate) struct BallStencil {
    pub offsets: Vec<[i64; 3]>,
    pub weights: Vec<f64>,
    pub total: f64,
    /// Largest |offset| on any axis.
    pub reach: usize,
}

impl BallStencil {
    /// Stencil for a ball centered at continuous index coordinates `s`
    /// (cell `i` spans `[i, i + 1)`) with radius `r` in cell units.
    /// Offsets are absolute multi-indices.
    pub fn at(dim: usize, s: [f64; 3], r: f64) -> Self {
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..dim {
            lo[a] = (s[a] - r).floor() as i64 - 1;
            hi[a] = (s[a] + r).floor() as i64 + 1;
        }
        let r2 = r * r;
        let sub: Vec<f64> = (0..SUBSAMPLES).map(|k| (k as f64 + 0.5) / SUBSAMPLES as f64).collect();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut total = 0.0;
        let mut reach = 0usize;
        let per_cell = (SUBSAMPLES as f64).powi(dim as i32);
        for i0 in lo[0]..=hi[0] {
            for i1 in lo[1]..=hi[1] {
                for i2 in lo[2]..=hi[2] {
                    let idx = [i0, i1, i2];
                    let mut hits = 0usize;
                    let n1 = if dim > 1 { SUBSAMPLES } else { 1 };
                    let n2 = if dim > 2 { SUBSAMPLES } else { 1 };
                    for a in 0..SUBSAMPLES {
                        let d0 = idx[0] as f64 + sub[a] - s[0];
                        for b in 0..n1 {
                            let d1 = if dim > 1 { idx[1] as f64 + sub[b] - s[1] } else { 0.0 };
                            for c in 0..n2 {
                                let d2 = if dim > 2 { idx[2] as f64 + sub[c] - s[2] } else { 0.0 };
                                if d0 * d0 + d1 * d1 + d2 * d2 <= r2 {
                                    hits += 1;
                                }
                            }
                        }
                    }
                    if hits > 0 {
                        let w = hits as f64 / per_cell;
                        offsets.push(idx);
                        weights.push(w);
                        total += w;
                        for a in 0..dim {
                            reach = reach.max(idx[a].unsigned_abs() as usize);
                        }
                    }
                }
            }
        }
        Self { offsets, weights, total, reach }
    }

    /// Stencil for a ball centered on a cell center, offsets relative to that cell.
    pub fn cell_centered(dim: usize, r: f64) -> Self {
        Self::at(dim, [0.5; 3], r)
    }

    /// Weighted mean of `f` over the stencil shifted by `shift`.
    pub fn mean_at(&self, f: &ScalarField, shift: [i64; 3]) -> f64 {
        let mut acc = 0.0;
        for (o, &w) in self.offsets.iter().zip(&self.weights) {
            acc += w * f.value_ext([o[0] + shift[0], o[1] + shift[1], o[2] + shift[2]]);
        }
        acc / self.total
    }
}

/// Field padded by `pad` cells on each active axis with extension values.
struct Padded {
    values: Vec<f64>,
    shape: [usize; 3],
    pad: [usize; 3],
}

fn padded(f: &ScalarField, reach: usize) -> Padded {
    let d = f.domain();
    let dim = d.dim();
    let s = d.shape3();
    let mut pad = [0usize; 3];
    let mut shape = [1usize; 3];
    for a in 0..3 {
        pad[a] = if a < dim { reach } else { 0 };
        shape[a] = s[a] + 2 * pad[a];
    }
    let mut values = vec![0.0; shape[0] * shape[1] * shape[2]];
    let ext = f.extension();
    for i0 in 0..shape[0] {
        for i1 in 0..shape[1] {
            for i2 in 0..shape[2] {
                let mi = [
                    i0 as i64 - pad[0] as i64,
                    i1 as i64 - pad[1] as i64,
                    i2 as i64 - pad[2] as i64,
                ];
                let inside = (0..3).all(|a| mi[a] >= 0 && mi[a] < s[a] as i64);
                let v = if inside {
                    f.get(d.linear_index([mi[0] as usize, mi[1] as usize, mi[2] as usize]))
                } else {
                    match ext {
                        ExtensionMode::Zero => 0.0,
                        ExtensionMode::Reflect => {
                            let m = [
                                reflect_index(mi[0], s[0]),
                                reflect_index(mi[1], s[1]),
                                reflect_index(mi[2], s[2]),
                            ];
                            f.get(d.linear_index(m))
                        }
                    }
                };
                values[(i0 * shape[1] + i1) * shape[2] + i2] = v;
            }
        }
    }
    Padded { values, shape, pad }
}

/// Mean of `f` over `B(x, radius)` for every cell center `x`.
pub(crate) fn ball_means(f: &ScalarField, radius: f64) -> Vec<f64> {
    let d = f.domain();
    let st = BallStencil::cell_centered(d.dim(), radius / d.spacing());
    ball_means_with(f, &st)
}

/// Mean of `f` over `B(x, radius) ∩ box` for every cell center `x`.
pub(crate) fn ball_means_in_box(f: &ScalarField, radius: f64) -> Vec<f64> {
    let d = f.domain();
    let st = BallStencil::cell_centered(d.dim(), radius / d.spacing());
    let inner = f.clone().with_extension(ExtensionMode::Zero);
    let ones = ScalarField::constant(d, 1.0);
    let num = ball_means_with(&inner, &st);
    let den = ball_means_with(&ones, &st);
    num.iter().zip(&den).map(|(a, b)| a / b).collect()
}

pub(crate) fn ball_means_with(f: &ScalarField, st: &BallStencil) -> Vec<f64> {
    let d = f.domain();
    let work = st.offsets.len().saturating_mul(d.len());
    let p = padded(f, st.reach);
    if work <= DIRECT_WORK_LIMIT || d.dim() == 1 {
        direct(&p, st, d.shape3())
    } else {
        fft_correlate(&p, st, d.shape3())
    }
}

fn direct(p: &Padded, st: &BallStencil, s: [usize; 3]) -> Vec<f64> {
    let [_, p1, p2] = p.shape;
    let lin: Vec<isize> = st
        .offsets
        .iter()
        .map(|o| (o[0] as isize * p1 as isize + o[1] as isize) * p2 as isize + o[2] as isize)
        .collect();
    let mut out = Vec::with_capacity(s[0] * s[1] * s[2]);
    for i0 in 0..s[0] {
        for i1 in 0..s[1] {
            for i2 in 0..s[2] {
                let base = (((i0 + p.pad[0]) * p1 + i1 + p.pad[1]) * p2 + i2 + p.pad[2]) as isize;
                let mut acc = 0.0;
                for (&l, &w) in lin.iter().zip(&st.weights) {
                    acc += w * p.values[(base + l) as usize];
                }
                out.push(acc / st.total);
            }
        }
    }
    out
}

/// In-place FFT over every axis of a row-major 3-axis array.
fn fft_nd(data: &mut [Complex<f64>], shape: [usize; 3], planner: &mut FftPlanner<f64>, inverse: bool) {
    let strides = [shape[1] * shape[2], shape[2], 1];
    let mut line = Vec::new();
    for a in 0..3 {
        let n = shape[a];
        if n <= 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        line.resize(n, Complex::new(0.0, 0.0));
        let others: Vec<usize> = (0..3).filter(|&b| b != a).collect();
        for j in 0..shape[others[0]] {
            for k in 0..shape[others[1]] {
                let base = j * strides[others[0]] + k * strides[others[1]];
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + t * strides[a]];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * strides[a]] = *v;
                }
            }
        }
    }
}

/// Circular correlation on the padded array; no wrap-around reaches the
/// output cells because the padding equals the stencil reach.
fn fft_correlate(p: &Padded, st: &BallStencil, s: [usize; 3]) -> Vec<f64> {
    let shape = p.shape;
    let n = shape[0] * shape[1] * shape[2];
    let mut planner = FftPlanner::new();
    let mut signal: Vec<Complex<f64>> = p.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut kernel = vec![Complex::new(0.0, 0.0); n];
    for (o, &w) in st.offsets.iter().zip(&st.weights) {
        let mut m = [0usize; 3];
        for a in 0..3 {
            m[a] = o[a].rem_euclid(shape[a] as i64) as usize;
        }
        kernel[(m[0] * shape[1] + m[1]) * shape[2] + m[2]].re += w;
    }
    fft_nd(&mut signal, shape, &mut planner, false);
    fft_nd(&mut kernel, shape, &mut planner, false);
    for (x, k) in signal.iter_mut().zip(&kernel) {
        *x *= k.conj();
    }
    fft_nd(&mut signal, shape, &mut planner, true);
    let scale = 1.0 / (n as f64 * st.total);
    let mut out = Vec::with_capacity(s[0] * s[1] * s[2]);
    for i0 in 0..s[0] {
        for i1 in 0..s[1] {
            for i2 in 0..s[2] {
                let j = ((i0 + p.pad[0]) * shape[1] + i1 + p.pad[1]) * shape[2] + i2 + p.pad[2];
                out.push(signal[j].re * scale);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    #[test]
    fn stencil_is_symmetric_and_weights_bounded() {
        let st = BallStencil::cell_centered(2, 3.7);
        for w in &st.weights {
            assert!(*w > 0.0 && *w <= 1.0);
        }
        let m: f64 = st
            .offsets
            .iter()
            .zip(&st.weights)
            .map(|(o, w)| w * o[0] as f64)
            .sum();
        assert!(m.abs() < 1e-12);
        // area in cell units
        assert!((st.total - std::f64::consts::PI * 3.7 * 3.7).abs() < 2.0 * 3.7);
    }

    #[test]
    fn fft_path_matches_direct() {
        let d = GridDomain::cube(2, -1.0, 1.0, 24).unwrap();
        for ext in [ExtensionMode::Zero, ExtensionMode::Reflect] {
            let f = ScalarField::from_fn(&d, |x| (3.0 * x[0]).sin() + x[1] * x[1])
                .unwrap()
                .with_extension(ext);
            let st = BallStencil::cell_centered(2, 7.5);
            let p = padded(&f, st.reach);
            let a = direct(&p, &st, d.shape3());
            let b = fft_correlate(&p, &st, d.shape3());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn fft_path_matches_direct_3d() {
        let d = GridDomain::cube(3, -1.0, 1.0, 8).unwrap();
        let f = ScalarField::from_fn(&d, |x| x[0] * x[1] - x[2]).unwrap();
        let st = BallStencil::cell_centered(3, 2.5);
        let p = padded(&f, st.reach);
        let a = direct(&p, &st, d.shape3());
        let b = fft_correlate(&p, &st, d.shape3());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
