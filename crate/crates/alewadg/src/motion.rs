//! Prescribed mesh motions and their analytic derivatives.
//!
//! Every supported motion acts separably per axis and fixes the domain
//! boundary, with the common structure
//!
//! ```text
//! x(ξ,τ)      = ξ + sin(πτ) B(ξ) / π
//! ∂x/∂ξ       = 1 + sin(πτ) A(ξ)
//! ∂x/∂τ       =     cos(πτ) B(ξ)
//! ∂²x/∂ξ∂τ    =   π cos(πτ) A(ξ)
//! ```
//!
//! so time-dependent geometry evaluation reduces to two precomputed profiles
//! `A`, `B` per point and axis. Separability also keeps the mapping Jacobian
//! diagonal: `J ∂ξ_i/∂x_j = 0` for `i ≠ j`.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::Error;

/// Mesh motion selected by name on the CLI: `static`, `poly1d` or `poly2d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Static,
    Poly1d,
    Poly2d,
}

impl FromStr for Motion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "static" => Ok(Motion::Static),
            "poly1d" => Ok(Motion::Poly1d),
            "poly2d" => Ok(Motion::Poly2d),
            other => Err(Error::InvalidConfig(format!("unknown motion '{other}'"))),
        }
    }
}

impl Motion {
    pub fn name(&self) -> &'static str {
        match self {
            Motion::Static => "static",
            Motion::Poly1d => "poly1d",
            Motion::Poly2d => "poly2d",
        }
    }

    /// The τ-independent profiles `(A, B)` at a single axis coordinate.
    pub fn axis_profiles(&self, xi: f64) -> (f64, f64) {
        match self {
            Motion::Static => (0.0, 0.0),
            Motion::Poly1d => (-0.5 * xi, 0.25 * PI * (1.0 - xi * xi)),
            Motion::Poly2d => {
                let (s, c) = (PI * xi).sin_cos();
                let w = 1.0 - xi * xi;
                (
                    0.25 * (PI * c * w - 2.0 * xi * s),
                    0.25 * PI * s * w,
                )
            }
        }
    }

    pub fn axis_x(&self, xi: f64, tau: f64) -> f64 {
        let (_, b) = self.axis_profiles(xi);
        xi + (PI * tau).sin() * b / PI
    }

    pub fn axis_dx_dxi(&self, xi: f64, tau: f64) -> f64 {
        let (a, _) = self.axis_profiles(xi);
        1.0 + (PI * tau).sin() * a
    }

    pub fn axis_dx_dtau(&self, xi: f64, tau: f64) -> f64 {
        let (_, b) = self.axis_profiles(xi);
        (PI * tau).cos() * b
    }

    pub fn axis_d2x_dxi_dtau(&self, xi: f64, tau: f64) -> f64 {
        let (a, _) = self.axis_profiles(xi);
        PI * (PI * tau).cos() * a
    }

    /// Physical position of a reference point (components beyond `dim` pass
    /// through unchanged).
    pub fn map_point(&self, xi: [f64; 2], dim: usize, tau: f64) -> [f64; 2] {
        let mut out = xi;
        for d in 0..dim {
            out[d] = self.axis_x(xi[d], tau);
        }
        out
    }

    /// Mapping Jacobian `J = det(∂x/∂ξ)`.
    pub fn jacobian(&self, xi: [f64; 2], dim: usize, tau: f64) -> f64 {
        (0..dim).map(|d| self.axis_dx_dxi(xi[d], tau)).product()
    }

    /// Deterministic sampled maximum of `|∂x/∂τ|` over the domain and
    /// `τ ∈ [0, t_max]`, used for CFL-based time step selection.
    pub fn max_mesh_speed(&self, dim: usize, lo: [f64; 2], hi: [f64; 2], t_max: f64) -> f64 {
        if *self == Motion::Static {
            return 0.0;
        }
        let nxi = 257;
        let ntau = 129;
        let mut speed: f64 = 0.0;
        for kt in 0..ntau {
            let tau = t_max * kt as f64 / (ntau - 1) as f64;
            let c = (PI * tau).cos().abs();
            let mut sq = 0.0;
            for d in 0..dim {
                let mut axis_max: f64 = 0.0;
                for kx in 0..nxi {
                    let xi = lo[d] + (hi[d] - lo[d]) * kx as f64 / (nxi - 1) as f64;
                    let (_, b) = self.axis_profiles(xi);
                    axis_max = axis_max.max((c * b).abs());
                }
                sq += axis_max * axis_max;
            }
            speed = speed.max(sq.sqrt());
        }
        speed
    }
}

/// The 1D motion with its analytic derivatives, `(x, ∂x/∂ξ, ∂x/∂τ)`.
pub fn motion_1d(xi: f64, tau: f64) -> (f64, f64, f64) {
    let m = Motion::Poly1d;
    (
        m.axis_x(xi, tau),
        m.axis_dx_dxi(xi, tau),
        m.axis_dx_dtau(xi, tau),
    )
}

/// The 2D motion applied per axis; returns `(x_i, ∂x_i/∂ξ_i, ∂x_i/∂τ)` for
/// both axes.
pub fn motion_2d(xi1: f64, xi2: f64, tau: f64) -> [(f64, f64, f64); 2] {
    let m = Motion::Poly2d;
    [xi1, xi2].map(|xi| {
        (
            m.axis_x(xi, tau),
            m.axis_dx_dxi(xi, tau),
            m.axis_dx_dtau(xi, tau),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    #[test]
    fn identity_at_time_zero() {
        for m in [Motion::Poly1d, Motion::Poly2d] {
            for k in 0..=10 {
                let xi = -1.0 + 0.2 * k as f64;
                assert_abs_diff_eq!(m.axis_x(xi, 0.0), xi, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn boundary_stays_fixed() {
        for m in [Motion::Poly1d, Motion::Poly2d] {
            for tau in [0.1, 0.33, 0.5, 1.2] {
                assert_abs_diff_eq!(m.axis_x(-1.0, tau), -1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(m.axis_x(1.0, tau), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn poly1d_closed_forms() {
        let (x, dxdxi, dxdtau) = motion_1d(0.0, 0.5);
        assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(dxdxi, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dxdtau, 0.0, epsilon = 1e-12);
        // ∂x/∂ξ = 1 - sin(pi tau) xi / 2
        let d = Motion::Poly1d.axis_dx_dxi(0.4, 0.25);
        assert_abs_diff_eq!(
            d,
            1.0 - 0.5 * (PI * 0.25).sin() * 0.4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn poly2d_fixed_points() {
        for xi in [-1.0, 0.0, 1.0] {
            for tau in [0.2, 0.5, 0.8] {
                assert_abs_diff_eq!(Motion::Poly2d.axis_x(xi, tau), xi, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        let eps = 1e-6;
        for m in [Motion::Poly1d, Motion::Poly2d] {
            for _ in 0..100 {
                let xi = rng.random_range(-1.0..1.0);
                let tau = rng.random_range(0.0..1.5);
                let fd_xi = (m.axis_x(xi + eps, tau) - m.axis_x(xi - eps, tau)) / (2.0 * eps);
                let fd_tau = (m.axis_x(xi, tau + eps) - m.axis_x(xi, tau - eps)) / (2.0 * eps);
                let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
                assert!(rel(m.axis_dx_dxi(xi, tau), fd_xi) < 1e-7);
                assert!(rel(m.axis_dx_dtau(xi, tau), fd_tau) < 1e-7);
                let fd_mix = (m.axis_dx_dtau(xi + eps, tau) - m.axis_dx_dtau(xi - eps, tau))
                    / (2.0 * eps);
                assert!(rel(m.axis_d2x_dxi_dtau(xi, tau), fd_mix) < 1e-6);
            }
        }
    }

    #[test]
    fn poly2d_jacobian_matches_finite_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let m = Motion::Poly2d;
        let eps = 1e-6;
        for _ in 0..50 {
            let xi = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let tau = rng.random_range(0.0..1.0);
            let j = m.jacobian(xi, 2, tau);
            let dx1 = (m.axis_x(xi[0] + eps, tau) - m.axis_x(xi[0] - eps, tau)) / (2.0 * eps);
            let dx2 = (m.axis_x(xi[1] + eps, tau) - m.axis_x(xi[1] - eps, tau)) / (2.0 * eps);
            assert_abs_diff_eq!(j, dx1 * dx2, epsilon = 1e-8);
        }
    }

    #[test]
    fn mesh_speed_bounds() {
        let speed = Motion::Poly1d.max_mesh_speed(1, [-1.0, 0.0], [1.0, 0.0], 1.0);
        assert_abs_diff_eq!(speed, PI / 4.0, epsilon = 1e-4);
        let speed2 = Motion::Poly2d.max_mesh_speed(2, [-1.0, -1.0], [1.0, 1.0], 1.0);
        assert!(speed2 > 0.8 && speed2 < 1.0, "speed2 = {speed2}");
        assert_eq!(
            Motion::Static.max_mesh_speed(2, [-1.0, -1.0], [1.0, 1.0], 1.0),
            0.0
        );
    }

    #[test]
    fn motion_parses_from_name() {
        assert_eq!("poly2d".parse::<Motion>().unwrap(), Motion::Poly2d);
        assert!("wobble".parse::<Motion>().is_err());
    }
}
