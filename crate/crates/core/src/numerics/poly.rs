//! Soft-thresholding and the small polynomial solvers behind the closed-form
//! line searches.

use crate::error::{Error, Result};
use crate::numerics::matrix::{DenseMatrix, DenseVector};

/// `[x − τ]⁺ − [−x − τ]⁺`, the proximal map of `τ|·|`.
pub fn soft_threshold(x: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be nonnegative, got {tau}")));
    }
    Ok(shrink(x, tau))
}

/// Unchecked soft-thresholding for hot loops; `tau` must be nonnegative.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    (x - tau).max(0.0) - (-x - tau).max(0.0)
}

pub fn soft_threshold_vec(x: &DenseVector, tau: f64) -> Result<DenseVector> {
    soft_threshold(0.0, tau)?;
    Ok(x.map(|v| shrink(v, tau)))
}

pub fn soft_threshold_matrix(x: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    soft_threshold(0.0, tau)?;
    Ok(x.map(|v| shrink(v, tau)))
}

/// All real roots of `c3·γ³ + c2·γ² + c1·γ + c0`, ascending.
///
/// Closed form (Cardano for one real root, the trigonometric form for three)
/// followed by a single guarded Newton step per root.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<Vec<f64>> {
    if c3 == 0.0 {
        return Err(Error::DegenerateCubic);
    }
    if ![c3, c2, c1, c0].iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("cubic coefficients"));
    }
    let (b, c, d) = (c2 / c3, c1 / c3, c0 / c3);
    // γ = t − b/3 turns the monic cubic into t³ + p t + q.
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);

    let mut roots = if p == 0.0 {
        vec![(-q).cbrt() - shift]
    } else if disc > 0.0 {
        // Pick the sign that avoids cancellation, recover the partner from uv = −p/3.
        let sign = if q >= 0.0 { -1.0 } else { 1.0 };
        let u = (-q / 2.0 + sign * disc.sqrt()).cbrt();
        let v = if u == 0.0 { 0.0 } else { -p / (3.0 * u) };
        vec![u + v - shift]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
        (0..3).map(|k| r * (phi - two_pi_3 * k as f64).cos() - shift).collect()
    };

    let poly = |g: f64| ((c3 * g + c2) * g + c1) * g + c0;
    let deriv = |g: f64| (3.0 * c3 * g + 2.0 * c2) * g + c1;
    for g in roots.iter_mut() {
        let slope = deriv(*g);
        if slope != 0.0 {
            let polished = *g - poly(*g) / slope;
            if polished.is_finite() && poly(polished).abs() <= poly(*g).abs() {
                *g = polished;
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    let scale = roots.iter().fold(1.0_f64, |m, r| m.max(r.abs()));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * scale);
    Ok(roots)
}

/// Real roots of `a·γ² + b·γ + c`; `a` may be zero.
fn quadratic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { Vec::new() } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// `φ(γ) = ¼aγ⁴ + ⅓bγ³ + ½cγ² + dγ`.
#[inline]
pub fn quartic_value(a: f64, b: f64, c: f64, d: f64, g: f64) -> f64 {
    (((0.25 * a * g + b / 3.0) * g + 0.5 * c) * g + d) * g
}

/// Global minimizer over `[0, 1]` of `¼aγ⁴ + ⅓bγ³ + ½cγ² + dγ`.
///
/// Candidates are the real stationary points clipped to the interval plus both
/// endpoints; ties go to the smaller stepsize.
pub fn quartic_min_unit(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let scale = b.abs().max(c.abs()).max(d.abs());
    let stationary = if a != 0.0 && a.abs() > 1e-14 * scale {
        cubic_real_roots(a, b, c, d).unwrap_or_default()
    } else if b != 0.0 && b.abs() > 1e-14 * c.abs().max(d.abs()) {
        quadratic_real_roots(b, c, d)
    } else if c != 0.0 {
        vec![-d / c]
    } else {
        Vec::new()
    };

    let mut best = (0.0, 0.0);
    let candidates = stationary
        .into_iter()
        .filter(|g| g.is_finite())
        .map(|g| g.clamp(0.0, 1.0))
        .chain(std::iter::once(1.0));
    for g in candidates {
        let v = quartic_value(a, b, c, d, g);
        if v < best.1 || (v == best.1 && g < best.0) {
            best = (g, v);
        }
    }
    best.0
}
