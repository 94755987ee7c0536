//! Forward and inverted polarimetric physical model.
//!
//! The forward direction maps surface geometry to the four intensities a
//! division-of-focal-plane polarization camera records; the inverse direction
//! recovers unpolarized intensity, degree of polarization (DoP), and angle of
//! polarization (AoP) per pixel by linear least squares, then lifts them to
//! plausible surface normals through the Fresnel DoP curves.

mod fresnel;

pub use fresnel::{
    DopInversion, THETA_CAP, brewster_angle, dop_diffuse, dop_specular, invert_dop,
};

use crate::geometry::CameraIntrinsics;
use crate::grid::{Grid, Mask, ScalarMap, VectorMap};
use crate::numeric::{wrap_full_turn, wrap_half_turn};
use crate::Vec3;
use nalgebra::{Matrix3x4, Matrix4x3, Vector4};
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Canonical polarization filter angles (radians): 0°, 45°, 90°, 135°.
pub const CANONICAL_FILTER_ANGLES: [f64; 4] = [0.0, FRAC_PI_2 * 0.5, FRAC_PI_2, FRAC_PI_2 * 1.5];

/// Tolerance for accepting an inverted viewing angle as a genuine root of
/// the DoP curve it came from.
pub const DOP_ROOT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PolarizationError {
    #[error("{what} = {value} is outside its valid domain")]
    OutOfDomain { what: &'static str, value: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("normal faces away from the camera (n·v = {dot})")]
    BackFacing { dot: f64 },
}

/// One pixel's four polarized intensity measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarSample {
    pub intensities: [f64; 4],
    pub filter_angles: [f64; 4],
}

impl PolarSample {
    pub fn new(intensities: [f64; 4], filter_angles: [f64; 4]) -> Result<Self, PolarizationError> {
        for i in intensities {
            if !i.is_finite() || i < 0.0 {
                return Err(PolarizationError::OutOfDomain {
                    what: "polarized intensity",
                    value: i,
                });
            }
        }
        for a in 0..4 {
            for b in a + 1..4 {
                if filter_angles[a] == filter_angles[b] {
                    return Err(PolarizationError::DegenerateInput(format!(
                        "filter angles {a} and {b} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            intensities,
            filter_angles,
        })
    }

    /// Sample at the canonical 0°/45°/90°/135° filter angles.
    pub fn canonical(intensities: [f64; 4]) -> Result<Self, PolarizationError> {
        Self::new(intensities, CANONICAL_FILTER_ANGLES)
    }
}

/// Per-pixel polarimetric state: unpolarized intensity, DoP, and AoP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarDecomposition {
    /// Unpolarized intensity, ≥ 0 (arbitrary linear radiometric units).
    pub i_un: f64,
    /// Degree of polarization in [0, 1].
    pub rho: f64,
    /// Angle of polarization in [0, π).
    pub phi: f64,
}

impl PolarDecomposition {
    pub fn new(i_un: f64, rho: f64, phi: f64) -> Result<Self, PolarizationError> {
        if !i_un.is_finite() || i_un < 0.0 {
            return Err(PolarizationError::OutOfDomain {
                what: "unpolarized intensity",
                value: i_un,
            });
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(PolarizationError::OutOfDomain {
                what: "degree of polarization",
                value: rho,
            });
        }
        if !(0.0..PI).contains(&phi) {
            return Err(PolarizationError::OutOfDomain {
                what: "angle of polarization",
                value: phi,
            });
        }
        Ok(Self { i_un, rho, phi })
    }
}

/// Material described by its refractive index.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSpec {
    pub name: String,
    pub eta: f64,
}

impl MaterialSpec {
    pub fn new(name: impl Into<String>, eta: f64) -> Result<Self, PolarizationError> {
        if !(1.0 < eta && eta < 4.0) {
            return Err(PolarizationError::OutOfDomain {
                what: "refractive index",
                value: eta,
            });
        }
        Ok(Self {
            name: name.into(),
            eta,
        })
    }

    pub fn stainless_steel() -> Self {
        Self::new("stainless steel", 2.75).unwrap()
    }

    pub fn glass() -> Self {
        Self::new("glass", 1.52).unwrap()
    }

    pub fn plastics() -> Self {
        Self::new("plastics", 1.50).unwrap()
    }
}

/// Surface reflection regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionMode {
    Diffuse,
    Specular,
}

/// Surface normal in spherical form: azimuth `alpha` in [0, 2π), zenith
/// (viewing angle) `theta` in [0, π/2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalAngles {
    pub alpha: f64,
    pub theta: f64,
}

impl NormalAngles {
    /// Wraps the azimuth into [0, 2π); rejects zeniths outside [0, π/2].
    pub fn new(alpha: f64, theta: f64) -> Result<Self, PolarizationError> {
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(PolarizationError::OutOfDomain {
                what: "zenith angle",
                value: theta,
            });
        }
        Ok(Self {
            alpha: wrap_full_turn(alpha),
            theta,
        })
    }
}

/// The up-to-three plausible per-pixel normals from the physical model,
/// expressed in the front-facing convention (z toward the camera, so
/// z ≥ 0). Missing viewing-angle solutions are filled with (0, 0, 1) and
/// flagged invalid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPriors {
    pub n_d: Vec3,
    pub n_s1: Vec3,
    pub n_s2: Vec3,
    pub valid_d: bool,
    pub valid_s1: bool,
    pub valid_s2: bool,
}

impl NormalPriors {
    /// Valid priors in fixed (diffuse, specular-1, specular-2) order.
    pub fn valid(&self) -> impl Iterator<Item = Vec3> + '_ {
        [
            (self.valid_d, self.n_d),
            (self.valid_s1, self.n_s1),
            (self.valid_s2, self.n_s2),
        ]
        .into_iter()
        .filter_map(|(ok, n)| ok.then_some(n))
    }
}

/// Analytic DoP pair produced by the inverted physical model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalyticDop {
    pub rho_d_hat: f64,
    pub rho_s_hat: f64,
}

/// Polarized intensity through a linear filter at angle `phi_pol`:
/// `I = I_un · (1 + ρ · cos(2(φ − φ_pol)))`.
#[inline]
pub fn forward_intensity(d: &PolarDecomposition, phi_pol: f64) -> f64 {
    d.i_un * (1.0 + d.rho * (2.0 * (d.phi - phi_pol)).cos())
}

/// Result of fitting a decomposition to measured intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionFit {
    pub decomposition: PolarDecomposition,
    /// Set when the raw least-squares DoP exceeded 1 (noise) and was clamped.
    pub non_physical: bool,
}

/// Precomputed least-squares solver for a fixed set of filter angles.
///
/// The design matrix depends only on the filter angles, so fitting a whole
/// image costs one 3×4 matrix-vector product per pixel.
#[derive(Debug, Clone)]
pub struct DecompositionSolver {
    pinv: Matrix3x4<f64>,
}

impl DecompositionSolver {
    pub fn new(filter_angles: [f64; 4]) -> Result<Self, PolarizationError> {
        let mut design = Matrix4x3::<f64>::zeros();
        for (row, &angle) in filter_angles.iter().enumerate() {
            design[(row, 0)] = 1.0;
            design[(row, 1)] = (2.0 * angle).cos();
            design[(row, 2)] = (2.0 * angle).sin();
        }
        let svd = design.svd(true, true);
        let smax = svd.singular_values.max();
        if svd.rank(1e-9 * smax) < 3 {
            return Err(PolarizationError::DegenerateInput(
                "design matrix is rank-deficient for these filter angles".into(),
            ));
        }
        let pinv = svd
            .pseudo_inverse(1e-12 * smax)
            .map_err(|e| PolarizationError::DegenerateInput(e.to_string()))?;
        Ok(Self { pinv })
    }

    /// Least-squares fit of `(I_un, ρ, φ)` to four intensities.
    ///
    /// Amplitudes below 1e-12 of the unpolarized intensity count as fully
    /// unpolarized (ρ = 0, φ = 0 by convention); the filter-angle cosines
    /// are irrational, so a constant signal never nulls them exactly.
    pub fn fit(&self, intensities: [f64; 4]) -> DecompositionFit {
        let x = self.pinv * Vector4::from(intensities);
        let i_un = x[0].max(0.0);
        let amplitude = x[1].hypot(x[2]);
        let (mut rho, phi) = if amplitude > 1e-12 * i_un && i_un > 0.0 {
            (amplitude / i_un, wrap_half_turn(0.5 * x[2].atan2(x[1])))
        } else {
            (0.0, 0.0)
        };
        let non_physical = rho > 1.0;
        if non_physical {
            rho = 1.0;
        }
        DecompositionFit {
            decomposition: PolarDecomposition { i_un, rho, phi },
            non_physical,
        }
    }
}

/// Fits `(I_un, ρ, φ)` to one sample by linear least squares.
pub fn fit_decomposition(s: &PolarSample) -> Result<DecompositionFit, PolarizationError> {
    Ok(DecompositionSolver::new(s.filter_angles)?.fit(s.intensities))
}

/// AoP predicted for a surface azimuth under the given reflection mode:
/// equal to the azimuth for diffuse reflection, shifted by −π/2 for
/// specular; both modulo π.
pub fn aop_from_azimuth(alpha: f64, mode: ReflectionMode) -> f64 {
    match mode {
        ReflectionMode::Diffuse => wrap_half_turn(alpha),
        ReflectionMode::Specular => wrap_half_turn(alpha - FRAC_PI_2),
    }
}

/// Surface azimuth consistent with an observed AoP under the given mode
/// (inverse of [`aop_from_azimuth`] up to the π-ambiguity).
pub fn azimuth_from_aop(phi: f64, mode: ReflectionMode) -> f64 {
    match mode {
        ReflectionMode::Diffuse => wrap_full_turn(phi),
        ReflectionMode::Specular => wrap_full_turn(phi + FRAC_PI_2),
    }
}

/// Unit normal from spherical angles:
/// `n = (cos α · sin θ, sin α · sin θ, cos θ)ᵀ`.
pub fn normal_from_angles(a: &NormalAngles) -> Vec3 {
    let (sa, ca) = a.alpha.sin_cos();
    let (st, ct) = a.theta.sin_cos();
    Vec3::new(ca * st, sa * st, ct)
}

/// Lifts one pixel's decomposition to its plausible surface normals.
///
/// The diffuse prior takes its azimuth straight from the AoP; the specular
/// priors shift it by π/2. Zenith angles come from inverting the DoP curves;
/// a returned angle only counts as valid if it reproduces the observed DoP
/// within [`DOP_ROOT_TOL`] (the specular grazing endpoint, in particular,
/// does not).
pub fn priors_from_pixel(
    d: &PolarDecomposition,
    m: &MaterialSpec,
) -> Result<NormalPriors, PolarizationError> {
    let inv = invert_dop(d.rho, m)?;
    let alpha_d = azimuth_from_aop(d.phi, ReflectionMode::Diffuse);
    let alpha_s = azimuth_from_aop(d.phi, ReflectionMode::Specular);
    let placeholder = Vec3::new(0.0, 0.0, 1.0);

    let lift = |alpha: f64, theta: Option<f64>, curve: fn(f64, f64) -> f64| -> (Vec3, bool) {
        match theta {
            Some(t) if (curve(t, m.eta) - d.rho).abs() <= DOP_ROOT_TOL => {
                let angles = NormalAngles::new(alpha, t.min(FRAC_PI_2)).expect("theta in range");
                (normal_from_angles(&angles), true)
            }
            _ => (placeholder, false),
        }
    };

    let (n_d, valid_d) = lift(alpha_d, inv.theta_d, fresnel::dop_diffuse_unchecked);
    let (n_s1, valid_s1) = lift(alpha_s, inv.theta_s1, fresnel::dop_specular_unchecked);
    let (n_s2, valid_s2) = lift(alpha_s, inv.theta_s2, fresnel::dop_specular_unchecked);

    Ok(NormalPriors {
        n_d,
        n_s1,
        n_s2,
        valid_d,
        valid_s1,
        valid_s2,
    })
}

/// Inverted physical model for one pixel: viewing angle from `cos θ_v = n·v`,
/// then the analytic diffuse/specular DoP pair at that angle.
///
/// `n` is the surface normal and `v` the unit vector from the surface toward
/// the camera, in the same frame. Grazing angles are capped at
/// [`THETA_CAP`]; normals facing away beyond −1e-9 are rejected.
pub fn analytic_dop_from_normal(
    n: &Vec3,
    v: &Vec3,
    m: &MaterialSpec,
) -> Result<AnalyticDop, PolarizationError> {
    for (vec, what) in [(n, "normal"), (v, "view vector")] {
        if (vec.norm() - 1.0).abs() > 1e-6 {
            return Err(PolarizationError::OutOfDomain {
                what,
                value: vec.norm(),
            });
        }
    }
    let dot = n.dot(v);
    if dot < -1e-9 {
        return Err(PolarizationError::BackFacing { dot });
    }
    let theta_v = dot.clamp(0.0, 1.0).acos().min(THETA_CAP);
    Ok(AnalyticDop {
        rho_d_hat: fresnel::dop_diffuse_unchecked(theta_v, m.eta),
        rho_s_hat: fresnel::dop_specular_unchecked(theta_v, m.eta),
    })
}

/// Four co-registered polarized intensity images.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarQuadruplet {
    pub filter_angles: [f64; 4],
    pub images: [ScalarMap; 4],
}

impl PolarQuadruplet {
    pub fn new(
        filter_angles: [f64; 4],
        images: [ScalarMap; 4],
    ) -> Result<Self, PolarizationError> {
        let shape = images[0].shape();
        if images.iter().any(|im| im.shape() != shape) {
            return Err(PolarizationError::DegenerateInput(
                "quadruplet images have mismatched dimensions".into(),
            ));
        }
        Ok(Self {
            filter_angles,
            images,
        })
    }

    pub fn width(&self) -> usize {
        self.images[0].width()
    }

    pub fn height(&self) -> usize {
        self.images[0].height()
    }

    /// Per-pixel intensities in filter-angle order.
    #[inline]
    pub fn sample(&self, x: usize, y: usize) -> [f64; 4] {
        [
            *self.images[0].get(x, y),
            *self.images[1].get(x, y),
            *self.images[2].get(x, y),
            *self.images[3].get(x, y),
        ]
    }
}

/// Image-level decomposition maps recovered from a quadruplet.
#[derive(Debug, Clone)]
pub struct DecompositionMaps {
    pub i_un: ScalarMap,
    pub rho: ScalarMap,
    pub phi: ScalarMap,
    /// Pixels whose raw DoP exceeded 1 and was clamped.
    pub non_physical: Mask,
}

/// Fits the decomposition at every pixel of a quadruplet.
pub fn decompose_quadruplet(q: &PolarQuadruplet) -> Result<DecompositionMaps, PolarizationError> {
    let solver = DecompositionSolver::new(q.filter_angles)?;
    let (w, h) = (q.width(), q.height());
    let fits: Vec<DecompositionFit> = (0..w * h)
        .into_par_iter()
        .map(|i| solver.fit(q.sample(i % w, i / w)))
        .collect();
    Ok(DecompositionMaps {
        i_un: Grid::from_vec(w, h, fits.iter().map(|f| f.decomposition.i_un).collect()),
        rho: Grid::from_vec(w, h, fits.iter().map(|f| f.decomposition.rho).collect()),
        phi: Grid::from_vec(w, h, fits.iter().map(|f| f.decomposition.phi).collect()),
        non_physical: Grid::from_vec(w, h, fits.iter().map(|f| f.non_physical).collect()),
    })
}

/// Applies the inverted physical model across a rendered normal map:
/// per-pixel analytic diffuse/specular DoP from the normal and the
/// backprojected view ray. Pixels outside the mask stay at zero.
///
/// Interpolated normals can dip microscopically below the horizon at
/// silhouettes; their `n·v` is clamped to zero rather than rejected.
pub fn analytic_dop_maps(
    normals: &VectorMap,
    mask: &Mask,
    k: &CameraIntrinsics,
    m: &MaterialSpec,
) -> Grid<AnalyticDop> {
    let (w, h) = normals.shape();
    let out: Vec<AnalyticDop> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if !*mask.get(x, y) {
                return AnalyticDop::default();
            }
            let v = k.view_dir_unchecked(x as f64 + 0.5, y as f64 + 0.5);
            let n = normals.get(x, y);
            let theta_v = n.dot(&v).clamp(0.0, 1.0).acos().min(THETA_CAP);
            AnalyticDop {
                rho_d_hat: fresnel::dop_diffuse_unchecked(theta_v, m.eta),
                rho_s_hat: fresnel::dop_specular_unchecked(theta_v, m.eta),
            }
        })
        .collect();
    Grid::from_vec(w, h, out)
}
