//! Discrete p-Dirichlet energy minimization with admissibility projection.
//!
//! The energy of a cell field `u` is `Σ_i |D u(i)|^p h^n` where `D u(i)` is
//! the forward-difference gradient at cell `i` and `u` is zero beyond the
//! box. Admissible fields equal 1 on the plate, 0 on the two outermost cell
//! layers, and lie in `[0, 1]` elsewhere.

use crate::grid::{GridDomain, RegionMask, ScalarField};

/// Cell layers pinned to zero at the container boundary.
pub const ZERO_LAYERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CellRole {
    Plate,
    Zero,
    Free,
}

pub(crate) struct Problem {
    pub domain: GridDomain,
    pub p: f64,
    pub roles: Vec<CellRole>,
    strides: [usize; 3],
    shape: [usize; 3],
    /// `h^(n - p)`, the weight of `|Δu|^p`.
    weight: f64,
}

impl Problem {
    pub fn new(plate: &RegionMask, p: f64) -> Self {
        let domain = plate.domain().clone();
        let roles = (0..domain.len())
            .map(|i| {
                if domain.boundary_distance(i) < ZERO_LAYERS {
                    CellRole::Zero
                } else if plate.contains(i) {
                    CellRole::Plate
                } else {
                    CellRole::Free
                }
            })
            .collect();
        let shape = domain.shape3();
        let strides = [shape[1] * shape[2], shape[2], 1];
        let weight = domain.spacing().powf(domain.dim() as f64 - p);
        Self { domain, p, roles, strides, shape, weight }
    }

    pub fn project(&self, u: &mut [f64]) {
        for (v, r) in u.iter_mut().zip(&self.roles) {
            *v = match r {
                CellRole::Plate => 1.0,
                CellRole::Zero => 0.0,
                CellRole::Free => v.clamp(0.0, 1.0),
            };
        }
    }

    /// Forward differences at `idx`; returns the number of active axes.
    #[inline]
    fn differences(&self, u: &[f64], idx: usize, out: &mut [f64; 3]) -> usize {
        let dim = self.domain.dim();
        let mi = self.domain.multi_index(idx);
        for a in 0..dim {
            let next = if mi[a] + 1 < self.shape[a] { u[idx + self.strides[a]] } else { 0.0 };
            out[a] = next - u[idx];
        }
        dim
    }

    /// `Σ |Δu|^q h^(n-p)` for exponent `q` (the energy when `q = p`).
    pub fn energy_with(&self, u: &[f64], q: f64) -> f64 {
        let mut acc = 0.0;
        let mut d = [0.0; 3];
        for idx in 0..u.len() {
            let dim = self.differences(u, idx, &mut d);
            let s: f64 = d[..dim].iter().map(|v| v * v).sum();
            if s > 0.0 {
                acc += if q == 2.0 { s } else { s.powf(0.5 * q) };
            }
        }
        acc * self.domain.spacing().powf(self.domain.dim() as f64 - q)
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.energy_with(u, self.p)
    }

    /// Energy and its gradient with respect to the cell values.
    pub fn energy_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut acc = 0.0;
        let mut d = [0.0; 3];
        let p = self.p;
        for idx in 0..u.len() {
            let dim = self.differences(u, idx, &mut d);
            let s: f64 = d[..dim].iter().map(|v| v * v).sum();
            if s <= 0.0 {
                continue;
            }
            let (e, coef) = if p == 2.0 { (s, 2.0) } else {
                let m = s.powf(0.5 * (p - 2.0));
                (m * s, p * m)
            };
            acc += e;
            let mi = self.domain.multi_index(idx);
            for a in 0..dim {
                let c = coef * d[a];
                grad[idx] -= c;
                if mi[a] + 1 < self.shape[a] {
                    grad[idx + self.strides[a]] += c;
                }
            }
        }
        for g in grad.iter_mut() {
            *g *= self.weight;
        }
        acc * self.weight
    }

    /// Linear radial profile from the plate out to the zero layers.
    pub fn radial_initialization(&self, plate: &RegionMask) -> Vec<f64> {
        let d = &self.domain;
        let dim = d.dim();
        let h = d.spacing();
        let count = plate.count().max(1) as f64;
        let mut c = [0.0; 3];
        for i in plate.indices() {
            let x = d.center(i);
            for a in 0..dim {
                c[a] += x[a] / count;
            }
        }
        let inner = plate.max_distance_from(&c[..dim]) + 0.5 * h;
        let outer = (0..dim)
            .map(|a| {
                let lo = d.lower()[a] + ZERO_LAYERS as f64 * h;
                let hi = d.upper()[a] - ZERO_LAYERS as f64 * h;
                (c[a] - lo).min(hi - c[a])
            })
            .fold(f64::INFINITY, f64::min);
        let mut u: Vec<f64> = (0..d.len())
            .map(|i| {
                if outer <= inner {
                    return 0.0;
                }
                let x = d.center(i);
                let r = (0..dim).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>().sqrt();
                ((outer - r) / (outer - inner)).clamp(0.0, 1.0)
            })
            .collect();
        self.project(&mut u);
        u
    }

    /// `h^(n-1) D u` per cell and axis (p = 1 operator).
    fn apply_k(&self, u: &[f64], out: &mut [[f64; 3]], scale: f64) {
        let mut d = [0.0; 3];
        for idx in 0..u.len() {
            let dim = self.differences(u, idx, &mut d);
            for a in 0..dim {
                out[idx][a] = scale * d[a];
            }
        }
    }

    /// Adjoint of [`Self::apply_k`].
    fn apply_kt(&self, y: &[[f64; 3]], out: &mut [f64], scale: f64) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let dim = self.domain.dim();
        for idx in 0..y.len() {
            let mi = self.domain.multi_index(idx);
            for a in 0..dim {
                let v = scale * y[idx][a];
                out[idx] -= v;
                if mi[a] + 1 < self.shape[a] {
                    out[idx + self.strides[a]] += v;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct SolveOutcome {
    pub field: Vec<f64>,
    pub iterations: usize,
    pub rel_decrease: f64,
    pub converged: bool,
}

/// Accelerated projected gradient with backtracking and function-value
/// restart.
pub(crate) fn projected_descent(problem: &Problem, init: Vec<f64>, tol: f64, max_iter: usize) -> SolveOutcome {
    let n = init.len();
    let dim = problem.domain.dim() as f64;
    let h = problem.domain.spacing();
    // Lipschitz bound of the p = 2 energy gradient
    let mut lip = 8.0 * dim * h.powf(dim - 2.0) * (problem.p / 2.0).max(0.25);
    let mut x = init;
    problem.project(&mut x);
    let mut y = x.clone();
    let mut z = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut ex = problem.energy(&x);
    let mut t = 1.0f64;
    let mut rel = f64::INFINITY;
    let mut converged = false;
    let mut it = 0;
    let mut quiet = 0;
    while it < max_iter {
        it += 1;
        let ey = problem.energy_and_gradient(&y, &mut grad);
        let mut ez;
        loop {
            for i in 0..n {
                z[i] = y[i] - grad[i] / lip;
            }
            problem.project(&mut z);
            ez = problem.energy(&z);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let dz = z[i] - y[i];
                lin += grad[i] * dz;
                sq += dz * dz;
            }
            if ez <= ey + lin + 0.5 * lip * sq + 1e-15 * ey.abs() || lip > 1e300 {
                break;
            }
            lip *= 2.0;
        }
        if ez > ex {
            if t == 1.0 {
                // a plain step from x no longer decreases: stationary to rounding
                rel = 0.0;
                quiet += 1;
                if quiet >= 3 {
                    converged = true;
                    break;
                }
                continue;
            }
            // momentum overshoot: restart from the last accepted iterate
            t = 1.0;
            y.copy_from_slice(&x);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = z[i] + beta * (z[i] - x[i]);
        }
        problem.project(&mut y);
        std::mem::swap(&mut x, &mut z);
        rel = if ez > 0.0 { (ex - ez) / ez } else { 0.0 };
        ex = ez;
        t = t_next;
        if problem.p != 2.0 {
            lip *= 0.98;
        }
        if rel < tol {
            quiet += 1;
            if quiet >= 3 {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    SolveOutcome { field: x, iterations: it, rel_decrease: rel, converged }
}

/// First-order primal-dual scheme for the total-variation energy (p = 1),
/// stopped on the relative duality gap.
pub(crate) fn primal_dual_tv(problem: &Problem, init: Vec<f64>, gap_tol: f64, max_iter: usize) -> SolveOutcome {
    let n = init.len();
    let dim = problem.domain.dim();
    let h = problem.domain.spacing();
    let scale = h.powi(dim as i32 - 1);
    let norm = scale * (4.0 * dim as f64).sqrt();
    let sigma = 1.0 / norm;
    let tau = 1.0 / norm;
    let mut u = init;
    problem.project(&mut u);
    let mut bar = u.clone();
    let mut prev = u.clone();
    let mut y = vec![[0.0; 3]; n];
    let mut ku = vec![[0.0; 3]; n];
    let mut kty = vec![0.0; n];
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        problem.apply_k(&bar, &mut ku, scale);
        for i in 0..n {
            let mut s = 0.0;
            for a in 0..dim {
                y[i][a] += sigma * ku[i][a];
                s += y[i][a] * y[i][a];
            }
            if s > 1.0 {
                let inv = 1.0 / s.sqrt();
                for a in 0..dim {
                    y[i][a] *= inv;
                }
            }
        }
        problem.apply_kt(&y, &mut kty, scale);
        prev.copy_from_slice(&u);
        for i in 0..n {
            u[i] -= tau * kty[i];
        }
        problem.project(&mut u);
        for i in 0..n {
            bar[i] = 2.0 * u[i] - prev[i];
        }
        if it % 25 == 0 || it == max_iter {
            let primal = problem.energy(&u);
            problem.apply_kt(&y, &mut kty, scale);
            let dual: f64 = (0..n)
                .map(|i| match problem.roles[i] {
                    CellRole::Plate => kty[i],
                    CellRole::Free => kty[i].min(0.0),
                    CellRole::Zero => 0.0,
                })
                .sum();
            gap = if primal > 0.0 { (primal - dual) / primal } else { 0.0 };
            if gap < gap_tol {
                converged = true;
                break;
            }
        }
    }
    SolveOutcome { field: u, iterations: it, rel_decrease: gap, converged }
}

/// `ρ ≥ 0` with `ρ + λ p ρ^(p-1) = r`: the radius of `prox_{λ|·|^p}`.
/// Newton from `guess` when it is usable, otherwise from an upper bound.
fn prox_radius(r: f64, lambda: f64, p: f64, guess: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let c = lambda * p;
    let mut rho = if guess > 0.0 && guess < r { guess } else { r.min((r / c).powf(1.0 / (p - 1.0))) };
    for _ in 0..60 {
        let m = rho.powf(p - 2.0);
        let g = rho + c * m * rho - r;
        let dg = 1.0 + c * (p - 1.0) * m;
        let next = (rho - g / dg).max(rho * 1e-3);
        if (next - rho).abs() <= 1e-13 * r {
            return next;
        }
        rho = next;
    }
    rho
}

/// Primal-dual scheme for `Σ |Δu|^p h^(n-p)` with `1 < p`, stopped on the
/// relative duality gap. The energy is written as `Σ |K u|^p` with
/// `K = h^((n-p)/p) Δ`.
pub(crate) fn primal_dual_power(problem: &Problem, init: Vec<f64>, gap_tol: f64, max_iter: usize) -> SolveOutcome {
    let n = init.len();
    let dim = problem.domain.dim();
    let p = problem.p;
    let q = p / (p - 1.0);
    let scale = problem.weight.powf(1.0 / p);
    let norm = scale * (4.0 * dim as f64).sqrt();
    let sigma = 1.0 / norm;
    let tau = 1.0 / norm;
    let mut u = init;
    problem.project(&mut u);
    let mut bar = u.clone();
    let mut prev = u.clone();
    let mut y = vec![[0.0; 3]; n];
    let mut radii = vec![0.0; n];
    let mut ku = vec![[0.0; 3]; n];
    let mut kty = vec![0.0; n];
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        problem.apply_k(&bar, &mut ku, scale);
        for i in 0..n {
            // Moreau: prox_{σF*}(v) = v - σ prox_{F/σ}(v/σ)
            let mut r2 = 0.0;
            for a in 0..dim {
                y[i][a] += sigma * ku[i][a];
                r2 += y[i][a] * y[i][a];
            }
            let r = r2.sqrt() / sigma;
            if r > 0.0 {
                radii[i] = prox_radius(r, 1.0 / sigma, p, radii[i]);
                let keep = 1.0 - radii[i] / r;
                for a in 0..dim {
                    y[i][a] *= keep;
                }
            }
        }
        problem.apply_kt(&y, &mut kty, scale);
        prev.copy_from_slice(&u);
        for i in 0..n {
            u[i] -= tau * kty[i];
        }
        problem.project(&mut u);
        for i in 0..n {
            bar[i] = 2.0 * u[i] - prev[i];
        }
        if it % 25 == 0 || it == max_iter {
            let primal = problem.energy(&u);
            problem.apply_kt(&y, &mut kty, scale);
            let conj: f64 = y
                .iter()
                .map(|v| {
                    let r = v[..dim].iter().map(|c| c * c).sum::<f64>().sqrt();
                    (p - 1.0) * (r / p).powf(q)
                })
                .sum();
            let lin: f64 = (0..n)
                .map(|i| match problem.roles[i] {
                    CellRole::Plate => kty[i],
                    CellRole::Free => kty[i].min(0.0),
                    CellRole::Zero => 0.0,
                })
                .sum();
            let dual = lin - conj;
            gap = if primal > 0.0 { (primal - dual) / primal } else { 0.0 };
            if gap < gap_tol {
                converged = true;
                break;
            }
        }
    }
    SolveOutcome { field: u, iterations: it, rel_decrease: gap, converged }
}

/// Replace `u` by the cheapest admissible superlevel-set indicator when
/// one has lower total-variation energy.
pub(crate) fn round_to_level_set(problem: &Problem, u: &mut Vec<f64>) {
    let mut best = problem.energy(u);
    let mut choice: Option<Vec<f64>> = None;
    for k in 1..40 {
        let t = k as f64 / 40.0;
        let mut v: Vec<f64> = u.iter().map(|&x| if x >= t { 1.0 } else { 0.0 }).collect();
        problem.project(&mut v);
        let e = problem.energy(&v);
        if e < best {
            best = e;
            choice = Some(v);
        }
    }
    if let Some(v) = choice {
        *u = v;
    }
}

pub(crate) fn to_field(domain: &GridDomain, values: Vec<f64>) -> ScalarField {
    ScalarField::from_parts(domain.clone(), values, crate::grid::ExtensionMode::Zero)
}
