//! Fresnel degree-of-polarization curves for diffuse and specular
//! reflection, and their numerical inversion to viewing angles.

use super::{MaterialSpec, PolarizationError};
use std::f64::consts::FRAC_PI_2;

/// Zenith angles are capped at π/2 − 1e-6 to stay clear of the grazing
/// singularity; the specular curve value at the cap acts as the endpoint of
/// its second branch.
pub const THETA_CAP: f64 = FRAC_PI_2 - 1e-6;

/// Bisection stops when the bracket is narrower than this (radians).
const BISECT_TOL: f64 = 1e-10;
const BISECT_MAX_ITERS: u32 = 100;

/// Degree of polarization of diffuse (refracted, then escaped) reflection at
/// viewing angle `theta` for refractive index `m.eta`.
///
/// Strictly increasing on `[0, π/2)`; its supremum stays below 1.
pub fn dop_diffuse(theta: f64, m: &MaterialSpec) -> Result<f64, PolarizationError> {
    if !(0.0..=FRAC_PI_2 - 1e-9).contains(&theta) {
        return Err(PolarizationError::OutOfDomain {
            what: "diffuse viewing angle",
            value: theta,
        });
    }
    Ok(dop_diffuse_unchecked(theta, m.eta))
}

#[inline]
pub(crate) fn dop_diffuse_unchecked(theta: f64, eta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let s2 = s * s;
    let num = (eta - 1.0 / eta).powi(2) * s2;
    let den = 2.0 + 2.0 * eta * eta - (eta + 1.0 / eta).powi(2) * s2
        + 4.0 * c * (eta * eta - s2).sqrt();
    num / den
}

/// Degree of polarization of specular (mirror) reflection at viewing angle
/// `theta` for refractive index `m.eta`.
///
/// Rises from 0 to exactly 1 at the Brewster angle `atan η`, then falls
/// back toward 0 at grazing incidence.
pub fn dop_specular(theta: f64, m: &MaterialSpec) -> Result<f64, PolarizationError> {
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(PolarizationError::OutOfDomain {
            what: "specular viewing angle",
            value: theta,
        });
    }
    Ok(dop_specular_unchecked(theta, m.eta))
}

#[inline]
pub(crate) fn dop_specular_unchecked(theta: f64, eta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let s2 = s * s;
    let e2 = eta * eta;
    let num = 2.0 * s2 * c * (e2 - s2).sqrt();
    let den = e2 - s2 - e2 * s2 + 2.0 * s2 * s2;
    // Algebraically ≤ 1 with equality at Brewster; rounding can overshoot
    // by an ulp there.
    (num / den).min(1.0)
}

/// The Brewster angle `atan η`: specular reflection there is fully polarized.
pub fn brewster_angle(m: &MaterialSpec) -> f64 {
    m.eta.atan()
}

/// The up-to-three viewing angles consistent with an observed degree of
/// polarization: one diffuse solution and two specular branch solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopInversion {
    /// Diffuse solution on `[0, π/2)`; `None` when `rho` exceeds the
    /// attainable diffuse maximum.
    pub theta_d: Option<f64>,
    /// Specular solution at or below the Brewster angle.
    pub theta_s1: Option<f64>,
    /// Specular solution at or above the Brewster angle. When `rho` falls
    /// below the curve value at the grazing cap, the cap itself is returned
    /// as the branch endpoint.
    pub theta_s2: Option<f64>,
}

/// Inverts the DoP curves: finds viewing angles whose diffuse / specular DoP
/// equals `rho`, by bisection on each monotone branch.
pub fn invert_dop(rho: f64, m: &MaterialSpec) -> Result<DopInversion, PolarizationError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(PolarizationError::OutOfDomain {
            what: "degree of polarization",
            value: rho,
        });
    }
    let eta = m.eta;
    let brewster = brewster_angle(m);

    // Diffuse branch: increasing on [0, cap].
    let rho_d_max = dop_diffuse_unchecked(THETA_CAP, eta);
    let theta_d = if rho <= rho_d_max {
        Some(bisect_increasing(
            |t| dop_diffuse_unchecked(t, eta),
            0.0,
            THETA_CAP,
            rho,
        ))
    } else {
        None
    };

    // Specular branch 1: increasing on [0, brewster], range [0, 1].
    let theta_s1 = Some(bisect_increasing(
        |t| dop_specular_unchecked(t, eta),
        0.0,
        brewster,
        rho,
    ));

    // Specular branch 2: decreasing on [brewster, cap], range [rho_s(cap), 1].
    let rho_s_cap = dop_specular_unchecked(THETA_CAP, eta);
    let theta_s2 = if rho >= rho_s_cap {
        Some(bisect_increasing(
            |t| -dop_specular_unchecked(t, eta),
            brewster,
            THETA_CAP,
            -rho,
        ))
    } else {
        // Below the attainable range of the branch: grazing cap endpoint.
        Some(THETA_CAP)
    };

    Ok(DopInversion {
        theta_d,
        theta_s1,
        theta_s2,
    })
}

/// Bisection for `f(θ) = target` with `f` increasing on `[lo, hi]` and
/// `target` within `[f(lo), f(hi)]`. Exact endpoint hits return the endpoint.
fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    if f(lo) >= target {
        return lo;
    }
    if f(hi) <= target {
        return hi;
    }
    for _ in 0..BISECT_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if hi - lo < BISECT_TOL {
            return mid;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
