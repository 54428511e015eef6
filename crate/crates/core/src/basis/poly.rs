//! Scalar orthogonal-polynomial and trigonometric families.
//!
//! Everything here is evaluated by three-term recurrences and is defined on
//! all of the real line (or plane); the domain checks live in the
//! user-facing wrappers in the parent module.

use std::f64::consts::PI;

/// Legendre polynomial `P_n(x)` via the Bonnet recurrence.
pub fn legendre(n: usize, x: f64) -> f64 {
    let mut p_prev = 1.0;
    if n == 0 {
        return p_prev;
    }
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    p
}

/// `P_n(x)` together with `P_n'(x)`.
///
/// The derivative uses `P'_{k+1} = P'_{k-1} + (2k+1) P_k`, which stays finite
/// at the endpoints `x = ±1`.
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let d_next = d_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Jacobi polynomial `P_n^{(alpha, beta)}(x)`.
pub fn jacobi(n: usize, alpha: f64, beta: f64, x: f64) -> f64 {
    let mut p_prev = 1.0;
    if n == 0 {
        return p_prev;
    }
    let ab = alpha + beta;
    let mut p = 0.5 * ((ab + 2.0) * x + (alpha - beta));
    for k in 1..n {
        let kf = k as f64;
        let c = 2.0 * kf + ab;
        let a1 = 2.0 * (kf + 1.0) * (kf + ab + 1.0) * c;
        let a2 = (c + 1.0) * (alpha * alpha - beta * beta);
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * (kf + alpha) * (kf + beta) * (c + 2.0);
        let next = ((a2 + a3 * x) * p - a4 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    p
}

/// Collapsed Legendre factor `((1-y)/2)^m P_m((2x+y+1)/(1-y))`, evaluated
/// as the polynomial it is so that the top vertex `y = 1` needs no limit.
pub(crate) fn collapsed_legendre(m: usize, x: f64, y: f64) -> f64 {
    let s = 0.5 * (1.0 - y);
    let u = x + 0.5 * (1.0 + y);
    let mut q_prev = 1.0;
    if m == 0 {
        return q_prev;
    }
    let mut q = u;
    let s2 = s * s;
    for j in 1..m {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * u * q - jf * s2 * q_prev) / (jf + 1.0);
        q_prev = q;
        q = next;
    }
    q
}

/// Koornwinder polynomial `K_{m,n}` on the right triangle with vertices
/// (-1,-1), (-1,1), (1,-1); not normalized.
pub(crate) fn koornwinder(m: usize, n: usize, x: f64, y: f64) -> f64 {
    collapsed_legendre(m, x, y) * jacobi(n, (2 * m + 1) as f64, 0.0, y)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Zernike radial polynomial `Q_{m,n}(r)` for `n >= m >= 0`, `n - m` even,
/// from its explicit binomial sum.
pub(crate) fn zernike_radial(m: usize, n: usize, r: f64) -> f64 {
    debug_assert!(n >= m && (n - m).is_multiple_of(2));
    let half = (n - m) / 2;
    (0..=half)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n - k, k) * binomial(n - 2 * k, half - k) * r.powi((n - 2 * k) as i32)
        })
        .sum()
}

/// Zernike polynomial with signed azimuthal index at Cartesian `(x, y)`.
pub(crate) fn zernike(m: i32, n: usize, x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    let theta = y.atan2(x);
    let am = m.unsigned_abs() as usize;
    let radial = zernike_radial(am, n, r);
    if m >= 0 {
        radial * (am as f64 * theta).cos()
    } else {
        radial * (am as f64 * theta).sin()
    }
}

/// Frequency of the `j`-th member of `{1, sin x, cos x, sin 2x, ...}`.
pub fn trig_frequency(j: usize) -> usize {
    j.div_ceil(2)
}

/// The `j`-th member of the L²(0, 2π)-orthonormal trigonometric family.
pub(crate) fn trig(j: usize, x: f64) -> f64 {
    if j == 0 {
        return 1.0 / (2.0 * PI).sqrt();
    }
    let freq = trig_frequency(j) as f64;
    let v = if j % 2 == 1 {
        (freq * x).sin()
    } else {
        (freq * x).cos()
    };
    v / PI.sqrt()
}
