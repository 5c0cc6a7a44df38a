//! Special functions for the Rician observation model.

/// Above this argument `i0e` switches from the power series to the
/// large-argument expansion.
const I0_SERIES_LIMIT: f64 = 30.0;

/// Poisson-mixture evaluation of the Marcum Q function is used while both
/// `a²/2` and `b²/2` stay below this; beyond it the tail is integrated.
const MARCUM_SERIES_LIMIT: f64 = 600.0;

const MARCUM_REL_TOL: f64 = 1e-15;

/// Exponentially scaled modified Bessel function of the first kind, order
/// zero: `exp(-z) * I0(z)` for `z >= 0`.
pub fn i0e(z: f64) -> f64 {
    let z = z.abs();
    if z <= I0_SERIES_LIMIT {
        // sum_k (z^2/4)^k / (k!)^2, all terms positive
        let quarter = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= quarter / (k * k);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum * (-z).exp()
    } else {
        // I0(z) ~ e^z / sqrt(2 pi z) * sum_k ((2k-1)!!)^2 / (k! (8z)^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while k < 2.0 * z {
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * z * k);
            if next >= term {
                break;
            }
            term = next;
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum / (2.0 * std::f64::consts::PI * z).sqrt()
    }
}

/// `ln I0(z)`, finite for every finite `z`.
pub fn ln_i0(z: f64) -> f64 {
    z.abs() + i0e(z).ln()
}

/// Generalized Marcum Q function of order one, `Q1(a, b)`: the probability
/// that a Rician variable with noncentrality `a` and unit scale is at least
/// `b`.
///
/// Evaluated as a Poisson(a²/2)-weighted sum of Poisson(b²/2) CDF values,
/// i.e. the Bessel series `exp(-(a²+b²)/2) Σ (a/b)^k I_k(ab)` regrouped into
/// positive terms, and truncated once the remaining Poisson mass is below a
/// relative tolerance of 1e-15. Extreme arguments are integrated directly.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0);
    if b <= 0.0 {
        return 1.0;
    }
    if a == 0.0 {
        return (-0.5 * b * b).exp();
    }
    let lambda = 0.5 * a * a;
    let y = 0.5 * b * b;
    if lambda > MARCUM_SERIES_LIMIT || y > MARCUM_SERIES_LIMIT {
        return marcum_q1_quadrature(a, b);
    }

    let mut weight = (-lambda).exp();
    let mut y_term = (-y).exp();
    let mut cdf = y_term;
    let mut sum = weight * cdf;
    let mut k = 1.0;
    loop {
        weight *= lambda / k;
        y_term *= y / k;
        cdf = (cdf + y_term).min(1.0);
        sum += weight * cdf;
        if k > lambda {
            // Poisson tail beyond k is dominated by a geometric series.
            let ratio = lambda / (k + 1.0);
            let rest = weight * ratio / (1.0 - ratio);
            if rest <= MARCUM_REL_TOL * sum || rest < f64::MIN_POSITIVE {
                break;
            }
        }
        k += 1.0;
    }
    sum.min(1.0)
}

/// Complement `1 - Q1(a, b)`, the probability that the Rician variable is
/// below `b`, summed directly so it keeps its relative precision when
/// `Q1(a, b)` is within rounding of one.
///
/// Same Poisson mixture as [`marcum_q1`], with the Poisson(b²/2) CDF replaced
/// by its upper tail. The upper tails are built by a downward recurrence
/// (additions only) from the last index the mixture needs.
pub fn marcum_p1(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0);
    if b <= 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return -(-0.5 * b * b).exp_m1();
    }
    let lambda = 0.5 * a * a;
    let y = 0.5 * b * b;
    if lambda > MARCUM_SERIES_LIMIT || y > MARCUM_SERIES_LIMIT {
        return marcum_p1_quadrature(a, b);
    }

    // Poisson(λ) weights up to the truncation index used by `marcum_q1`.
    let mut weights = vec![(-lambda).exp()];
    let mut mass = weights[0];
    let mut k = 1.0;
    loop {
        let w = weights[weights.len() - 1] * lambda / k;
        weights.push(w);
        mass += w;
        if k > lambda {
            let ratio = lambda / (k + 1.0);
            let rest = w * ratio / (1.0 - ratio);
            if rest <= MARCUM_REL_TOL * mass || rest < f64::MIN_POSITIVE {
                break;
            }
        }
        k += 1.0;
    }
    let top = weights.len() - 1;

    // Poisson(y) terms 0..=top, then the tail beyond `top`.
    let mut terms = Vec::with_capacity(top + 1);
    let mut t = (-y).exp();
    terms.push(t);
    for j in 1..=top {
        t *= y / j as f64;
        terms.push(t);
    }
    let mut upper = 0.0;
    let mut j = top as f64 + 1.0;
    loop {
        t *= y / j;
        upper += t;
        if j > y && (t <= upper * 1e-17 || t < f64::MIN_POSITIVE) {
            break;
        }
        j += 1.0;
    }

    // Σ_k w_k Pr(Poisson(y) > k), from k = top down to 0.
    let mut sum = 0.0;
    for k in (0..=top).rev() {
        sum += weights[k] * upper.min(1.0);
        upper += terms[k];
    }
    sum.clamp(0.0, 1.0)
}

fn rician_density(a: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            x * (-0.5 * (x - a).powi(2)).exp() * i0e(x * a)
        }
    }
}

fn integrate_unit_segments<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    let mut left = lo;
    while left < hi {
        let right = (left + 1.0).min(hi);
        total += adaptive_simpson(f, left, right, 1e-15);
        left = right;
    }
    total
}

fn marcum_p1_quadrature(a: f64, b: f64) -> f64 {
    if b > a {
        return 1.0 - marcum_q1_quadrature(a, b);
    }
    let lo = (a - 40.0).max(0.0);
    if b <= lo {
        return 0.0;
    }
    // The density rises towards `b`; scaling by its value there turns the
    // absolute quadrature tolerance into a relative one.
    let density = rician_density(a);
    let scale = density(b);
    if scale <= 0.0 {
        return 0.0;
    }
    let scaled = |x: f64| density(x) / scale;
    (scale * integrate_unit_segments(&scaled, lo, b)).clamp(0.0, 1.0)
}

fn marcum_q1_quadrature(a: f64, b: f64) -> f64 {
    // Mass outside [a - 40, a + 40] is far below double precision.
    let lo = b.max(a - 40.0);
    let hi = a.max(b) + 40.0;
    integrate_unit_segments(&rician_density(a), lo, hi).clamp(0.0, 1.0)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
