//! Closed-form and one-dimensional reference values, computed without the
//! grid solvers.

use std::f64::consts::PI;

/// Surface area of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // 2 π^(n/2) / Γ(n/2) via the recursion |S^(n-1)| = 2π/(n-2) |S^(n-3)|
            2.0 * PI / (n as f64 - 2.0) * unit_sphere_area(n - 2)
        }
    }
}

/// p-capacity of the ball condenser `B(r) ⊂ B(R)` in `R^n`, minimized over
/// radial profiles that are piecewise linear on `segments` geometrically
/// spaced shells. For fixed shells the optimal slopes are explicit, so the
/// minimization is exact over that class.
pub fn radial_capacity(n: usize, p: f64, r: f64, outer: f64, segments: usize) -> f64 {
    assert!(0.0 < r && r < outer && p >= 1.0 && segments > 0);
    let q = (outer / r).powf(1.0 / segments as f64);
    let omega = unit_sphere_area(n);
    // cost of a unit drop across shell [a, b]: ω ∫ ρ^(n-1) dρ / (b - a)^p
    let costs: Vec<f64> = (0..segments)
        .map(|k| {
            let a = r * q.powi(k as i32);
            let b = if k + 1 == segments { outer } else { r * q.powi(k as i32 + 1) };
            let shell = omega * (b.powi(n as i32) - a.powi(n as i32)) / n as f64;
            shell / (b - a).powf(p)
        })
        .collect();
    if p == 1.0 {
        // linear in the drops: put the whole drop on the cheapest shell
        return costs.iter().copied().fold(f64::INFINITY, f64::min);
    }
    // minimize Σ c_k |t_k|^p subject to Σ t_k = 1
    let e = 1.0 / (p - 1.0);
    let s: f64 = costs.iter().map(|c| c.powf(-e)).sum();
    s.powf(1.0 - p)
}

/// Closed-form ball-in-ball p-capacity in `R^n`.
pub fn ball_in_ball_capacity(n: usize, p: f64, r: f64, outer: f64) -> f64 {
    let omega = unit_sphere_area(n);
    let nf = n as f64;
    if p == nf {
        return omega * (outer / r).ln().powf(1.0 - p);
    }
    let k = (p - nf) / (p - 1.0);
    let integral = ((outer.powf(k) - r.powf(k)) / k).abs();
    omega * integral.powf(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_profile_matches_closed_forms() {
        for (n, p) in [(2, 2.0), (3, 2.0), (2, 1.5), (2, 3.0), (3, 4.0)] {
            let a = radial_capacity(n, p, 0.2, 1.0, 20_000);
            let b = ball_in_ball_capacity(n, p, 0.2, 1.0);
            assert!((a - b).abs() / b < 1e-4, "n={n} p={p}: {a} vs {b}");
        }
        let two = ball_in_ball_capacity(2, 2.0, 0.2, 1.0);
        assert!((two - 2.0 * PI / 5f64.ln()).abs() < 1e-12);
        assert!((ball_in_ball_capacity(3, 2.0, 0.2, 1.0) - PI).abs() < 1e-12);
    }

    #[test]
    fn p_one_oracle_is_inner_sphere_area() {
        let v = radial_capacity(2, 1.0, 0.2, 1.0, 1000);
        assert!((v - 2.0 * PI * 0.2).abs() < 1e-2);
    }
}
