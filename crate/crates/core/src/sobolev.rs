//! Finite-difference derivatives, Sobolev norms, and the empirical
//! Poincaré and integration-by-parts checks.

use std::fmt::Write as _;

use thiserror::Error;

use crate::grid::{GridDomain, GridError, ScalarField, VectorField};
use crate::stencil::BallStencil;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SobolevError {
    #[error("exponent p = {0} is invalid (p >= 1 required)")]
    InvalidExponent(f64),
    #[error("order {0} is not supported (at most 2)")]
    InvalidOrder(usize),
    #[error("gradient vanishes on the ball; the Poincaré ratio is 0/0 (lhs = {lhs})")]
    DegenerateDenominator { lhs: f64 },
    #[error("test function is nonzero within two cell layers of the boundary")]
    SupportViolation,
    #[error("multi-index {0:?} is invalid for this domain")]
    InvalidMultiIndex(Vec<usize>),
    #[error("ball B({center:?}, {radius}) is not contained in the domain")]
    BallOutsideDomain { center: Vec<f64>, radius: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub type Result<T, E = SobolevError> = std::result::Result<T, E>;

fn axis_stride(d: &GridDomain, axis: usize) -> usize {
    let s = d.shape3();
    match axis {
        0 => s[1] * s[2],
        1 => s[2],
        _ => 1,
    }
}

/// First derivative along `axis` with spacing `step` cells: central in the
/// interior, second-order one-sided where the central stencil leaves the grid.
fn first_difference(d: &GridDomain, v: &[f64], axis: usize, step: usize) -> Vec<f64> {
    let n = d.shape3()[axis];
    let stride = axis_stride(d, axis);
    let h = d.spacing() * step as f64;
    let mut out = vec![0.0; v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = d.multi_index(idx)[axis];
        let at = |k: isize| v[(idx as isize + k * (step * stride) as isize) as usize];
        *o = if i >= step && i + step < n {
            (at(1) - at(-1)) / (2.0 * h)
        } else if i + 2 * step < n {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else {
            (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
        };
    }
    out
}

/// Second derivative along `axis`: three-point in the interior, four-point
/// one-sided at the ends.
fn second_difference(d: &GridDomain, v: &[f64], axis: usize, step: usize) -> Vec<f64> {
    let n = d.shape3()[axis];
    let stride = axis_stride(d, axis);
    let h = d.spacing() * step as f64;
    let mut out = vec![0.0; v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = d.multi_index(idx)[axis];
        let at = |k: isize| v[(idx as isize + k * (step * stride) as isize) as usize];
        *o = if i >= step && i + step < n {
            (at(1) - 2.0 * at(0) + at(-1)) / (h * h)
        } else if i + 3 * step < n {
            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h)
        } else {
            (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / (h * h)
        };
    }
    out
}

/// Central-difference gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let d = f.domain();
    let comps = (0..d.dim())
        .map(|a| ScalarField::from_parts(d.clone(), first_difference(d, f.values(), a, 1), f.extension()))
        .collect();
    VectorField::new(comps).expect("components share a domain")
}

/// Hessian flattened row-major into `dim * dim` components.
pub fn hessian(f: &ScalarField) -> VectorField {
    let d = f.domain();
    let n = d.dim();
    let mut comps: Vec<Option<Vec<f64>>> = vec![None; n * n];
    for i in 0..n {
        comps[i * n + i] = Some(second_difference(d, f.values(), i, 1));
        for j in (i + 1)..n {
            let dj = first_difference(d, f.values(), j, 1);
            let mixed = first_difference(d, &dj, i, 1);
            comps[j * n + i] = Some(mixed.clone());
            comps[i * n + j] = Some(mixed);
        }
    }
    let comps = comps
        .into_iter()
        .map(|c| ScalarField::from_parts(d.clone(), c.expect("filled"), f.extension()))
        .collect();
    VectorField::new(comps).expect("components share a domain")
}

fn check_multi_index(d: &GridDomain, alpha: &[usize]) -> Result<()> {
    let order: usize = alpha.iter().sum();
    if alpha.len() != d.dim() || order > 2 {
        return Err(SobolevError::InvalidMultiIndex(alpha.to_vec()));
    }
    Ok(())
}

/// `D^alpha` with difference spacing `step` cells.
fn derivative_values(d: &GridDomain, v: &[f64], alpha: &[usize], step: usize) -> Vec<f64> {
    let axes: Vec<usize> = alpha
        .iter()
        .enumerate()
        .flat_map(|(a, &k)| std::iter::repeat(a).take(k))
        .collect();
    match axes.as_slice() {
        [] => v.to_vec(),
        [a] => first_difference(d, v, *a, step),
        [a, b] if a == b => second_difference(d, v, *a, step),
        [a, b] => first_difference(d, &first_difference(d, v, *b, step), *a, step),
        _ => unreachable!("order checked"),
    }
}

/// `D^alpha f` for `|alpha| <= 2`.
pub fn derivative(f: &ScalarField, alpha: &[usize]) -> Result<ScalarField> {
    let d = f.domain();
    check_multi_index(d, alpha)?;
    Ok(ScalarField::from_parts(d.clone(), derivative_values(d, f.values(), alpha, 1), f.extension()))
}

/// `(sum |v|^p h^n)^(1/p)`.
pub fn lp_norm(values: &[f64], p: f64, cell_volume: f64) -> f64 {
    if p == 1.0 {
        return values.iter().map(|v| v.abs()).sum::<f64>() * cell_volume;
    }
    (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell_volume).powf(1.0 / p)
}

/// `sum |v|^p h^n`.
pub fn lp_norm_pow(values: &[f64], p: f64, cell_volume: f64) -> f64 {
    values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell_volume
}

#[derive(Clone, Debug, PartialEq)]
pub struct SobolevNormReport {
    pub order: usize,
    pub exponent: f64,
    /// `terms[k]` is the L^p norm of the k-th derivative tensor (Euclidean
    /// norm pointwise).
    pub terms: Vec<f64>,
    pub total: f64,
}

impl SobolevNormReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "order = {}", self.order).unwrap();
        writeln!(s, "exponent = {}", self.exponent).unwrap();
        for (k, t) in self.terms.iter().enumerate() {
            writeln!(s, "term_{k} = {t:.12e}").unwrap();
        }
        writeln!(s, "total = {:.12e}", self.total).unwrap();
        s
    }
}

pub fn sobolev_norm(f: &ScalarField, m: usize, p: f64) -> Result<SobolevNormReport> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(SobolevError::InvalidExponent(p));
    }
    if m > 2 {
        return Err(SobolevError::InvalidOrder(m));
    }
    let vol = f.domain().cell_volume();
    let mut terms = vec![lp_norm(f.values(), p, vol)];
    if m >= 1 {
        terms.push(lp_norm(gradient(f).norm_field().values(), p, vol));
    }
    if m >= 2 {
        terms.push(lp_norm(hessian(f).norm_field().values(), p, vol));
    }
    let total = terms.iter().sum();
    Ok(SobolevNormReport { order: m, exponent: p, terms, total })
}

/// `‖∇²f‖_p^p` with the Frobenius norm pointwise.
pub fn hessian_energy(f: &ScalarField, p: f64) -> f64 {
    lp_norm_pow(hessian(f).norm_field().values(), p, f.domain().cell_volume())
}

/// Empirical Poincaré constant on a ball:
/// `mean|f - f_B| / (r · mean|∇f|)`.
pub fn poincare_ratio(f: &ScalarField, center: &[f64], radius: f64) -> Result<f64> {
    let g = gradient(f).norm_field();
    poincare_ratio_with(f, &g, center, radius)
}

/// As [`poincare_ratio`] with a precomputed `|∇f|` field.
pub fn poincare_ratio_with(
    f: &ScalarField,
    grad_norm: &ScalarField,
    center: &[f64],
    radius: f64,
) -> Result<f64> {
    let d = f.domain();
    let dim = d.dim();
    let inside = center.len() >= dim
        && (0..dim).all(|a| center[a] - radius >= d.lower()[a] - 1e-12 && center[a] + radius <= d.upper()[a] + 1e-12);
    if !inside {
        return Err(SobolevError::BallOutsideDomain { center: center.to_vec(), radius });
    }
    if radius < d.spacing() {
        return Err(GridError::RadiusTooSmall { radius, h: d.spacing() }.into());
    }
    let st = BallStencil::at(dim, d.index_coords(center), radius / d.spacing());
    let origin = [0i64; 3];
    let mean = st.mean_at(f, origin);
    let g = st.mean_at(grad_norm, origin);
    let mut lhs = 0.0;
    for (o, &w) in st.offsets.iter().zip(&st.weights) {
        lhs += w * (f.value_ext(*o) - mean).abs();
    }
    lhs /= st.total;
    if !(g > 0.0) {
        return Err(SobolevError::DegenerateDenominator { lhs });
    }
    Ok(lhs / (radius * g))
}

/// `|∫ f D^α η − (−1)^{|α|} ∫ (D^α f) η|`.
///
/// `D^α η` uses differences of spacing `2h` and `D^α f` the standard
/// spacing `h`; both are second-order accurate, so for smooth data the
/// residual is `O(h²)`. The wide stencil needs η to vanish on the two
/// outermost cell layers.
pub fn integration_by_parts_residual(f: &ScalarField, eta: &ScalarField, alpha: &[usize]) -> Result<f64> {
    let d = f.domain();
    if eta.domain() != d {
        return Err(GridError::DomainMismatch.into());
    }
    check_multi_index(d, alpha)?;
    if (0..d.len()).any(|i| d.boundary_distance(i) < 2 && eta.get(i) != 0.0) {
        return Err(SobolevError::SupportViolation);
    }
    let order: usize = alpha.iter().sum();
    let d_eta = wide_derivative(d, eta.values(), alpha);
    let d_f = derivative_values(d, f.values(), alpha, 1);
    let lhs: f64 = f.values().iter().zip(&d_eta).map(|(a, b)| a * b).sum();
    let rhs: f64 = d_f.iter().zip(eta.values()).map(|(a, b)| a * b).sum();
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    Ok((lhs - sign * rhs).abs() * d.cell_volume())
}

/// Central differences of spacing `2h` with η continued by zero.
fn wide_derivative(d: &GridDomain, v: &[f64], alpha: &[usize]) -> Vec<f64> {
    let h2 = 2.0 * d.spacing();
    let get = |mi: [i64; 3]| d.checked_index(mi).map_or(0.0, |i| v[i]);
    let diff1 = |vals: &dyn Fn([i64; 3]) -> f64, a: usize, mi: [i64; 3]| {
        let mut p = mi;
        let mut m = mi;
        p[a] += 2;
        m[a] -= 2;
        (vals(p) - vals(m)) / (2.0 * h2)
    };
    let axes: Vec<usize> = alpha
        .iter()
        .enumerate()
        .flat_map(|(a, &k)| std::iter::repeat(a).take(k))
        .collect();
    let mut out = vec![0.0; v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let u = d.multi_index(idx);
        let mi = [u[0] as i64, u[1] as i64, u[2] as i64];
        *o = match axes.as_slice() {
            [] => v[idx],
            [a] => diff1(&get, *a, mi),
            [a, b] if a == b => {
                let mut p = mi;
                let mut m = mi;
                p[*a] += 2;
                m[*a] -= 2;
                (get(p) - 2.0 * get(mi) + get(m)) / (h2 * h2)
            }
            [a, b] => {
                let inner = |q: [i64; 3]| diff1(&get, *b, q);
                diff1(&inner, *a, mi)
            }
            _ => unreachable!(),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square(n: usize) -> GridDomain {
        GridDomain::cube(2, -1.0, 1.0, n).unwrap()
    }

    fn bump(x: &[f64]) -> f64 {
        let r2 = x.iter().map(|v| v * v).sum::<f64>() / 0.64;
        if r2 < 1.0 {
            (1.0 - r2).powi(4)
        } else {
            0.0
        }
    }

    #[test]
    fn gradient_exact_for_affine_and_quadratic() {
        let d = square(16);
        let f = ScalarField::from_fn(&d, |x| 0.5 + 2.0 * x[0] - 3.0 * x[1]).unwrap();
        let g = gradient(&f);
        for i in 0..d.len() {
            assert!((g.component(0).get(i) - 2.0).abs() < 1e-12);
            assert!((g.component(1).get(i) + 3.0).abs() < 1e-12);
        }
        let q = ScalarField::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let g = gradient(&q);
        for i in 0..d.len() {
            let c = d.center(i);
            assert!((g.component(0).get(i) - c[0]).abs() < 1e-12);
            assert!((g.component(1).get(i) - c[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_second_order_for_trig() {
        let err = |n: usize| {
            let d = square(n);
            let f = ScalarField::from_fn(&d, |x| (PI * x[0]).sin() * (PI * x[1]).cos()).unwrap();
            let g = gradient(&f);
            (0..d.len())
                .map(|i| {
                    let c = d.center(i);
                    (g.component(0).get(i) - PI * (PI * c[0]).cos() * (PI * c[1]).cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 3.5, "ratio {ratio}");
    }

    #[test]
    fn hessian_of_quadratic_is_identity() {
        let d = square(12);
        let q = ScalarField::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let h = hessian(&q);
        for i in 0..d.len() {
            assert!((h.component(0).get(i) - 1.0).abs() < 1e-9);
            assert!(h.component(1).get(i).abs() < 1e-9);
            assert!((h.component(3).get(i) - 1.0).abs() < 1e-9);
        }
        let a = ScalarField::from_fn(&d, |x| 1.0 - x[0] + 4.0 * x[1]).unwrap();
        assert!(hessian(&a).norm_field().max_abs() < 1e-9);
    }

    #[test]
    fn hessian_radial_converges_away_from_origin() {
        let beta = 2.5;
        let analytic = |x: &[f64]| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let a = beta * r.powf(beta - 2.0);
            let b = beta * (beta - 2.0) * r.powf(beta - 4.0);
            [a + b * x[0] * x[0], b * x[0] * x[1], a + b * x[1] * x[1]]
        };
        let err = |n: usize| {
            let d = square(n);
            let f = ScalarField::from_fn(&d, |x| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(beta)).unwrap();
            let h = hessian(&f);
            let mut e: f64 = 0.0;
            for i in 0..d.len() {
                let c = d.center(i);
                let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
                if r < 0.25 || r > 0.9 {
                    continue;
                }
                let ex = analytic(&c[..2]);
                e = e.max((h.component(0).get(i) - ex[0]).abs());
                e = e.max((h.component(1).get(i) - ex[1]).abs());
                e = e.max((h.component(3).get(i) - ex[2]).abs());
            }
            e
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 3.0, "ratio {ratio}");
    }

    #[test]
    fn norm_examples() {
        let d = GridDomain::cube(2, 0.0, 1.0, 16).unwrap();
        let c = ScalarField::constant(&d, 3.0);
        let r = sobolev_norm(&c, 1, 2.0).unwrap();
        assert!((r.terms[0] - 3.0).abs() < 1e-12);
        assert_eq!(r.terms[1], 0.0);
        let x = ScalarField::from_fn(&d, |x| x[0]).unwrap();
        let r = sobolev_norm(&x, 1, 2.0).unwrap();
        assert!((r.terms[1] - 1.0).abs() < 1e-12);
        assert!((r.total - r.terms.iter().sum::<f64>()).abs() < 1e-15);
        assert!(matches!(sobolev_norm(&x, 1, 0.5), Err(SobolevError::InvalidExponent(_))));
        assert!(matches!(sobolev_norm(&x, 3, 2.0), Err(SobolevError::InvalidOrder(3))));
        assert!(r.to_text().contains("term_1 = 1.0000"));
    }

    #[test]
    fn poincare_affine_matches_polar_constant() {
        // mean |y_1| over the unit disc = 4 / (3π)
        let oracle = 4.0 / (3.0 * PI);
        let d = square(128);
        let f = ScalarField::from_fn(&d, |x| 1.0 + 0.7 * x[0] - 0.2 * x[1]).unwrap();
        for r in [0.2, 0.5] {
            let v = poincare_ratio(&f, &[0.1, -0.05], r).unwrap();
            assert!((v - oracle).abs() / oracle < 0.02, "{v} vs {oracle}");
        }
        let c = ScalarField::constant(&d, 2.0);
        assert!(matches!(
            poincare_ratio(&c, &[0.0, 0.0], 0.3),
            Err(SobolevError::DegenerateDenominator { .. })
        ));
        assert!(matches!(
            poincare_ratio(&f, &[0.9, 0.0], 0.3),
            Err(SobolevError::BallOutsideDomain { .. })
        ));
    }

    #[test]
    fn ibp_constant_and_support() {
        let d = square(32);
        let c = ScalarField::constant(&d, 2.5);
        let eta = ScalarField::from_fn(&d, bump).unwrap();
        assert!(integration_by_parts_residual(&c, &eta, &[1, 0]).unwrap() < 1e-13);
        let wide = ScalarField::from_fn(&d, |x| 1.0 + x[0]).unwrap();
        assert_eq!(
            integration_by_parts_residual(&c, &wide, &[1, 0]),
            Err(SobolevError::SupportViolation)
        );
    }

    #[test]
    fn ibp_second_order_decay() {
        for alpha in [[1usize, 0], [0, 1], [2, 0], [1, 1]] {
            let res = |n: usize| {
                let d = square(n);
                let f = ScalarField::from_fn(&d, |x| (PI * (x[0] + 0.3)).sin() * (PI * (x[1] - 0.2)).cos() + x[0] * x[0] * x[1])
                    .unwrap();
                let eta = ScalarField::from_fn(&d, bump).unwrap();
                integration_by_parts_residual(&f, &eta, &alpha).unwrap()
            };
            let (a, b) = (res(64), res(128));
            let order = (a / b).log2();
            assert!(order > 1.9, "alpha {alpha:?}: order {order}");
        }
    }
}
