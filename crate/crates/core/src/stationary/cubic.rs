//! The two-site sector of the unidirectional chain: the m = 2 energies solve
//!
//! ```text
//! 4E³ − 8ΓE² + (5Γ² + 1)E − Γ³ = 0
//! ```
//!
//! which has three real roots beyond the discriminant zero Γ_c.

fn cubic(gamma: f64, e: f64) -> f64 {
    ((4.0 * e - 8.0 * gamma) * e + 5.0 * gamma * gamma + 1.0) * e - gamma.powi(3)
}

/// Value of the cubic at `e`.
pub fn site2_cubic(gamma: f64, e: f64) -> f64 {
    cubic(gamma, e)
}

/// Real roots in ascending order.
pub fn site2_cubic_roots(gamma: f64) -> Vec<f64> {
    let f = |e: f64| cubic(gamma, e);
    // Cauchy bound on the roots of the monic form.
    let bound = 1.0
        + (2.0 * gamma.abs())
            .max((5.0 * gamma * gamma + 1.0) / 4.0)
            .max(gamma.abs().powi(3) / 4.0);
    // critical points of 12E² − 16ΓE + 5Γ² + 1
    let disc = 16.0 * gamma * gamma - 48.0;
    let mut knots = vec![-bound];
    if disc > 0.0 {
        let s = disc.sqrt();
        knots.push((16.0 * gamma - s) / 24.0);
        knots.push((16.0 * gamma + s) / 24.0);
    }
    knots.push(bound);

    let scale = 1.0 + gamma.abs().powi(3);
    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            roots.push(bisect(&f, a, b));
        }
    }
    if f(*knots.last().unwrap()) == 0.0 {
        roots.push(*knots.last().unwrap());
    }
    // A double root touches zero at a critical point without a sign change.
    for &c in &knots[1..knots.len() - 1] {
        if f(c).abs() <= 1e-13 * scale
            && !roots.iter().any(|r| (r - c).abs() < 1e-6 * (1.0 + c.abs()))
        {
            roots.push(c);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
    roots
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Discriminant of the cubic, `16(Γ⁴ − 11Γ² − 1)`.
pub fn site2_discriminant(gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    16.0 * (g2 * g2 - 11.0 * g2 - 1.0)
}

/// Γ_c = √((11 + 5√5)/2), where the discriminant vanishes.
pub fn bifurcation_gamma_c() -> f64 {
    ((11.0 + 5.0 * 5f64.sqrt()) / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_zero_has_single_root() {
        assert_eq!(site2_cubic_roots(0.0), vec![0.0]);
    }

    #[test]
    fn root_count_changes_at_gamma_c() {
        let gc = bifurcation_gamma_c();
        assert!((gc - 3.3302).abs() < 5e-5);
        assert!(site2_discriminant(gc).abs() < 1e-12);
        assert_eq!(site2_cubic_roots(gc - 1e-3).len(), 1);
        assert_eq!(site2_cubic_roots(gc + 1e-3).len(), 3);
        assert_eq!(site2_cubic_roots(1.0).len(), 1);
    }

    #[test]
    fn roots_at_twelve() {
        let r = site2_cubic_roots(12.0);
        assert_eq!(r.len(), 3);
        for e in &r {
            assert!(site2_cubic(12.0, *e).abs() < 1e-10);
        }
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }
}
