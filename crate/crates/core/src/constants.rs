//! Sphere measures and the moment constants built from them.
//!
//! `I_q(N) = ∫_{S^{N-1}} |z₁|^q dH^{N-1}(z)` is evaluated from the Gamma
//! identity `2 π^{(N-1)/2} Γ((q+1)/2) / Γ((q+N)/2)`. When every Gamma
//! argument is a multiple of 1/2 the evaluation is carried out symbolically
//! as `c · π^{k/2}` so that values such as `K_{2,2} = 1/2` come out exact.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature;

/// `I_q(N)` together with the arguments it was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereMoment {
    pub dimension: usize,
    pub exponent: f64,
    pub value: f64,
}

/// `coef · π^{half_pow / 2}`
#[derive(Debug, Clone, Copy)]
struct PiMonomial {
    coef: f64,
    half_pow: i32,
}

impl PiMonomial {
    fn mul(self, other: PiMonomial) -> PiMonomial {
        PiMonomial {
            coef: self.coef * other.coef,
            half_pow: self.half_pow + other.half_pow,
        }
    }

    fn div(self, other: PiMonomial) -> PiMonomial {
        PiMonomial {
            coef: self.coef / other.coef,
            half_pow: self.half_pow - other.half_pow,
        }
    }

    fn value(self) -> f64 {
        let whole = PI.powi(self.half_pow.div_euclid(2));
        let half = if self.half_pow.rem_euclid(2) == 1 {
            PI.sqrt()
        } else {
            1.0
        };
        self.coef * whole * half
    }
}

/// Γ(a) as a π-monomial when `a` is a positive multiple of 1/2.
fn gamma_half_integer(a: f64) -> Option<PiMonomial> {
    let twice = 2.0 * a;
    if a <= 0.0 || a > 170.0 || twice.fract() != 0.0 {
        return None;
    }
    let (mut base, half_pow) = if (twice as u64).is_multiple_of(2) {
        (1.0, 0)
    } else {
        (0.5, 1)
    };
    let mut coef = 1.0;
    while base < a {
        coef *= base;
        base += 1.0;
    }
    Some(PiMonomial { coef, half_pow })
}

/// Γ(a)/Γ(b) times π^{extra_half_pow/2}, exact on half-integers.
fn gamma_ratio_times_pi(a: f64, b: f64, extra_half_pow: i32) -> f64 {
    match (gamma_half_integer(a), gamma_half_integer(b)) {
        (Some(ga), Some(gb)) => ga
            .div(gb)
            .mul(PiMonomial {
                coef: 1.0,
                half_pow: extra_half_pow,
            })
            .value(),
        _ => {
            let log = libm::lgamma(a) - libm::lgamma(b) + 0.5 * extra_half_pow as f64 * PI.ln();
            log.exp()
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Domain("sphere dimension N must be at least 1".into()));
    }
    Ok(())
}

/// H^{N-1}(S^{N-1}) = 2π^{N/2}/Γ(N/2); 2 for N = 1 (counting measure on {±1}).
pub fn sphere_surface_area(dim: usize) -> Result<f64> {
    check_dim(dim)?;
    let n = dim as f64;
    Ok(2.0 * gamma_ratio_times_pi(1.0, 0.5 * n, dim as i32))
}

/// Lebesgue measure of the unit ball in R^N.
pub fn unit_ball_volume(dim: usize) -> Result<f64> {
    Ok(sphere_surface_area(dim)? / dim as f64)
}

/// `I_q(N)`.
pub fn first_coord_moment(q: f64, dim: usize) -> Result<SphereMoment> {
    check_dim(dim)?;
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!(
            "moment exponent q = {q} must be finite and >= 0"
        )));
    }
    let n = dim as f64;
    let value = 2.0 * gamma_ratio_times_pi(0.5 * (q + 1.0), 0.5 * (q + n), dim as i32 - 1);
    Ok(SphereMoment {
        dimension: dim,
        exponent: q,
        value,
    })
}

/// `K_{q,N} = I_q(N) / H^{N-1}(S^{N-1})`, the normalized BBM constant.
pub fn bbm_constant(q: f64, dim: usize) -> Result<f64> {
    check_dim(dim)?;
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::Domain(format!("BBM constant needs q >= 1, got {q}")));
    }
    let n = dim as f64;
    // Γ((q+1)/2) Γ(N/2) / (√π Γ((q+N)/2)); kept as one monomial for exactness.
    let value = match (
        gamma_half_integer(0.5 * (q + 1.0)),
        gamma_half_integer(0.5 * n),
        gamma_half_integer(0.5 * (q + n)),
    ) {
        (Some(a), Some(b), Some(c)) => a.mul(b).div(c).div(PiMonomial { coef: 1.0, half_pow: 1 }).value(),
        _ => first_coord_moment(q, dim)?.value / sphere_surface_area(dim)?,
    };
    Ok(value)
}

/// Lower constant `c̃_N = I_1(N) / ((N+1)(H^{N-1}(S^{N-1}) + 1))`; its q-th power
/// never exceeds `I_q(N)/(N+q)`.
pub fn holder_lower_constant(dim: usize) -> Result<f64> {
    let i1 = first_coord_moment(1.0, dim)?.value;
    let area = sphere_surface_area(dim)?;
    Ok(i1 / ((dim as f64 + 1.0) * (area + 1.0)))
}

/// Numerical `I_q(N)` by sphere quadrature, used to cross-check the closed form.
pub fn moment_by_quadrature(q: f64, dim: usize, resolution: usize) -> Result<f64> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!(
            "moment exponent q = {q} must be finite and >= 0"
        )));
    }
    if resolution < 16 {
        return Err(Error::param("resolution", "must be at least 16"));
    }
    quadrature::sphere_integral(dim, resolution, |z| z[0].abs().powf(q)).ok_or(Error::UnsupportedDimension(dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn surface_areas() {
        assert_eq!(sphere_surface_area(1).unwrap(), 2.0);
        assert_relative_eq!(sphere_surface_area(2).unwrap(), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_surface_area(3).unwrap(), 4.0 * PI, max_relative = 1e-15);
        // S^3 has area 2π².
        assert_relative_eq!(sphere_surface_area(4).unwrap(), 2.0 * PI * PI, max_relative = 1e-15);
        assert!(matches!(sphere_surface_area(0), Err(Error::Domain(_))));
    }

    #[test]
    fn moments_by_direct_integration() {
        // ∫ cos²θ dθ over the circle
        assert_relative_eq!(first_coord_moment(2.0, 2).unwrap().value, PI, max_relative = 1e-15);
        // ∫ |cos θ| dθ over the circle
        assert_relative_eq!(first_coord_moment(1.0, 2).unwrap().value, 4.0, max_relative = 1e-15);
        // 2π ∫_0^π |cos θ| sin θ dθ
        assert_relative_eq!(
            first_coord_moment(1.0, 3).unwrap().value,
            2.0 * PI,
            max_relative = 1e-15
        );
        assert_eq!(first_coord_moment(3.0, 1).unwrap().value, 2.0);
        assert!(first_coord_moment(-1.0, 2).is_err());
        assert!(first_coord_moment(1.0, 0).is_err());
    }

    #[test]
    fn non_half_integer_moments_use_lgamma() {
        // I_{3.7}(1) is still the two-point sum
        assert_relative_eq!(first_coord_moment(3.7, 1).unwrap().value, 2.0, max_relative = 1e-14);
        let q = 0.3;
        let quad = moment_by_quadrature(q, 3, 4096).unwrap();
        // I_q(3) = 4π/(q+1)
        assert_relative_eq!(quad, 4.0 * PI / (q + 1.0), max_relative = 1e-10);
        assert_relative_eq!(
            first_coord_moment(q, 3).unwrap().value,
            4.0 * PI / (q + 1.0),
            max_relative = 1e-13
        );
    }

    #[test]
    fn bbm_constants() {
        assert_eq!(bbm_constant(2.0, 1).unwrap(), 1.0);
        assert_eq!(bbm_constant(2.0, 2).unwrap(), 0.5);
        assert_relative_eq!(bbm_constant(1.0, 2).unwrap(), 4.0 / (2.0 * PI), max_relative = 1e-15);
        assert_eq!(bbm_constant(7.5, 1).unwrap(), 1.0);
        assert!(bbm_constant(0.5, 2).is_err());
    }

    #[test]
    fn quadrature_examples() {
        assert_relative_eq!(moment_by_quadrature(2.0, 2, 4096).unwrap(), PI, epsilon = 1e-10);
        assert_relative_eq!(moment_by_quadrature(0.0, 3, 2048).unwrap(), 4.0 * PI, epsilon = 1e-8);
        assert_eq!(moment_by_quadrature(5.0, 1, 16).unwrap(), 2.0);
        assert!(matches!(
            moment_by_quadrature(1.0, 4, 64),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(moment_by_quadrature(1.0, 2, 8).is_err());
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for &q in &[0.0, 0.5, 1.0, 2.0, 3.7] {
            for dim in 1..=3 {
                let exact = first_coord_moment(q, dim).unwrap().value;
                let quad = moment_by_quadrature(q, dim, 4096).unwrap();
                assert!((exact - quad).abs() <= 1e-8, "q={q} N={dim}: {exact} vs {quad}");
            }
        }
    }

    #[test]
    fn moment_invariants() {
        for dim in 1..=5 {
            let area = sphere_surface_area(dim).unwrap();
            assert_relative_eq!(first_coord_moment(0.0, dim).unwrap().value, area, max_relative = 1e-14);
            let mut prev = f64::INFINITY;
            for k in 0..40 {
                let q = 0.25 * k as f64;
                let v = first_coord_moment(q, dim).unwrap().value;
                assert!(v > 0.0);
                assert!(v <= prev * (1.0 + 1e-14), "I_q({dim}) increased at q={q}");
                prev = v;
                if q >= 1.0 {
                    let k = bbm_constant(q, dim).unwrap();
                    assert!(k > 0.0 && k <= 1.0);
                }
            }
        }
    }

    #[test]
    fn holder_chain() {
        for dim in 1..=3 {
            let c = holder_lower_constant(dim).unwrap();
            for &q in &[1.0, 1.5, 2.0, 3.0] {
                let rhs = first_coord_moment(q, dim).unwrap().value / (dim as f64 + q);
                assert!(c.powf(q) <= rhs, "N={dim} q={q}: {} > {rhs}", c.powf(q));
            }
        }
    }
}
