//! Classical right-hand sides: ∫_Ω |∇u|^q, ‖Du‖(Ω), the jump energy
//! ∫_{J_u ∩ Ω} |u⁺ - u⁻|^q dH^{N-1}, and the sphere-averaged integrand of the
//! general-F limit.

use serde::{Deserialize, Serialize};

use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::fields::{pow_q, FSpec, Field, FieldKind};
use crate::quadrature::{composite_gauss, sphere_integral};
use crate::rng::map_blocks;
use crate::tail::MIN_BUDGET;

fn default_budget() -> u64 {
    1_000_000
}

fn default_sphere() -> usize {
    1024
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default = "default_budget")]
    pub spatial_budget: u64,
    #[serde(default)]
    pub seed: u64,
    /// Central-difference step; analytic gradients when absent.
    #[serde(default)]
    pub fd_step: Option<f64>,
    /// Resolution of the sphere rule used by the general-F integrand.
    #[serde(default = "default_sphere")]
    pub sphere_resolution: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            spatial_budget: default_budget(),
            seed: 0,
            fd_step: None,
            sphere_resolution: default_sphere(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyKind {
    Sobolev,
    TotalVariation,
    Jump,
    GeneralF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    Quadrature,
    FiniteDifference,
}

/// A nonnegative value or the +∞ marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Magnitude {
    Finite(f64),
    Infinite,
}

impl Magnitude {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Magnitude::Finite(v) => Some(*v),
            Magnitude::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Magnitude::Infinite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyValue {
    pub kind: EnergyKind,
    pub value: Magnitude,
    pub method: Method,
    pub ci_halfwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl EnergyValue {
    fn analytic(kind: EnergyKind, value: Magnitude) -> EnergyValue {
        EnergyValue {
            kind,
            value,
            method: Method::Analytic,
            ci_halfwidth: None,
            warning: None,
        }
    }

    /// The value, or `None` when the energy is infinite.
    pub fn finite_value(&self) -> Option<f64> {
        self.value.finite()
    }

    /// One-sigma error (0 for deterministic methods).
    pub fn stderr(&self) -> f64 {
        self.ci_halfwidth.map_or(0.0, |c| c / 3.0)
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param("q", "q must be ≥ 1"));
    }
    Ok(())
}

fn check_dims(field: &Field, domain: &Domain) -> Result<()> {
    if field.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: field.dim(),
        });
    }
    Ok(())
}

/// Whether the jump of a step field meets Ω in a set of positive H^{N-1} measure.
fn jump_in_domain(field: &Field, domain: &Domain) -> Result<Option<f64>> {
    let Some(j) = field.jump() else {
        return Ok(None);
    };
    if j.jump.iter().all(|&a| a == 0.0) {
        return Ok(None);
    }
    let section = domain.hyperplane_section(&j.normal, j.offset)?;
    Ok(if section > 0.0 { Some(section) } else { None })
}

/// Decides finiteness of ∫|∇u|^q for cusp and power fields.
fn radial_energy_finite(field: &Field, domain: &Domain, q: f64) -> Result<bool> {
    let Some(rad) = field.radial() else {
        return Ok(true);
    };
    let (lo, hi) = domain.bounding_box();
    let covered = lo
        .iter()
        .zip(&hi)
        .zip(rad.lo.iter().zip(rad.hi))
        .all(|((a, b), (c, d))| *c <= *a && *b <= *d);
    if !covered {
        return Err(Error::Unsupported(
            "the support box of the field must contain Ω (its boundary would be a jump)".into(),
        ));
    }
    let tip_near = rad
        .center
        .iter()
        .zip(lo.iter().zip(&hi))
        .all(|(c, (a, b))| *a <= *c && *c <= *b);
    Ok(!tip_near || (1.0 - rad.exponent) * q < domain.dim() as f64)
}

/// ∫_Ω h(Du(x)) dx. Returns (value, half-width, method).
fn integrate_jacobian<H>(field: &Field, domain: &Domain, cfg: &EnergyConfig, h: H) -> Result<(f64, Option<f64>, Method)>
where
    H: Fn(&[f64]) -> f64 + Sync + Send,
{
    let fd = match (cfg.fd_step, field.kind()) {
        (Some(step), _) => Some(step),
        (None, FieldKind::Grid) => {
            let g = field.grid().expect("grid field");
            Some(1e-3 * g.spacing().iter().copied().fold(f64::INFINITY, f64::min))
        }
        (None, _) => None,
    };
    let method = if fd.is_some() {
        Method::FiniteDifference
    } else {
        Method::Quadrature
    };
    let dim = domain.dim();
    let jac_at = |x: &[f64]| -> Result<Vec<f64>> {
        match field.gradient(x, fd) {
            Ok(g) => Ok(g.jacobian),
            // singular points have measure zero
            Err(Error::NonDifferentiable) => Ok(vec![0.0; field.codim() * dim]),
            Err(e) => Err(e),
        }
    };

    if matches!(field.kind(), FieldKind::Linear | FieldKind::Constant) {
        let mut probe = vec![0.0; dim];
        let (lo, hi) = domain.bounding_box();
        for i in 0..dim {
            probe[i] = 0.5 * (lo[i] + hi[i]);
        }
        let v = domain.volume() * h(&jac_at(&probe)?);
        let method = if fd.is_some() {
            Method::FiniteDifference
        } else {
            Method::Analytic
        };
        return Ok((v, None, method));
    }

    if let (FieldKind::Gaussian, Some((lo, hi))) = (field.kind(), domain.as_box()) {
        let panels = match dim {
            1 => 64,
            2 => 32,
            _ => 8,
        };
        let axes: Vec<Vec<(f64, f64)>> = (0..dim).map(|a| composite_gauss(lo[a], hi[a], panels, 8)).collect();
        let per_axis = axes[0].len();
        let total = per_axis.pow(dim as u32);
        let mut x = vec![0.0; dim];
        let mut sum = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            for a in (0..dim).rev() {
                let (node, weight) = axes[a][rem % per_axis];
                rem /= per_axis;
                x[a] = node;
                w *= weight;
            }
            sum += w * h(&jac_at(&x)?);
        }
        return Ok((sum, None, method));
    }

    if cfg.spatial_budget < MIN_BUDGET {
        return Err(Error::BudgetTooSmall {
            got: cfg.spatial_budget,
            min: MIN_BUDGET,
        });
    }
    let blocks = map_blocks(
        cfg.spatial_budget,
        crate::rng::DEFAULT_BLOCK,
        cfg.seed,
        |count, rng| -> Result<(f64, f64)> {
            let mut x = vec![0.0; dim];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                domain.sample_into(rng, &mut x)?;
                let v = h(&jac_at(&x)?);
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        },
    );
    let (mut s, mut s2) = (0.0, 0.0);
    for b in blocks {
        let (a, b2) = b?;
        s += a;
        s2 += b2;
    }
    let n = cfg.spatial_budget as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    let vol = domain.volume();
    Ok((vol * mean, Some(3.0 * vol * (var / n).sqrt()), method))
}

fn frobenius(j: &[f64]) -> f64 {
    j.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ∫_Ω |∇u|^q dx, +∞ when u ∉ W^{1,q}(Ω).
pub fn sobolev_energy(field: &Field, domain: &Domain, q: f64, cfg: &EnergyConfig) -> Result<EnergyValue> {
    check_q(q)?;
    check_dims(field, domain)?;
    let kind = EnergyKind::Sobolev;
    if field.is_constant() {
        return Ok(EnergyValue::analytic(kind, Magnitude::Finite(0.0)));
    }
    if field.kind() == FieldKind::Step {
        let value = if jump_in_domain(field, domain)?.is_some() {
            Magnitude::Infinite
        } else {
            Magnitude::Finite(0.0)
        };
        return Ok(EnergyValue::analytic(kind, value));
    }
    if !radial_energy_finite(field, domain, q)? {
        return Ok(EnergyValue::analytic(kind, Magnitude::Infinite));
    }
    let (value, ci, method) = integrate_jacobian(field, domain, cfg, |j| pow_q(frobenius(j), q))?;
    Ok(EnergyValue {
        kind,
        value: Magnitude::Finite(value),
        method,
        ci_halfwidth: ci,
        warning: None,
    })
}

/// ‖Du‖(Ω).
pub fn total_variation(field: &Field, domain: &Domain, cfg: &EnergyConfig) -> Result<EnergyValue> {
    check_dims(field, domain)?;
    if field.kind() == FieldKind::Step {
        let j = field.jump().expect("step fields carry a jump");
        let size = frobenius(&j.jump);
        let section = domain.hyperplane_section(&j.normal, j.offset)?;
        return Ok(EnergyValue::analytic(
            EnergyKind::TotalVariation,
            Magnitude::Finite(size * section),
        ));
    }
    let mut e = sobolev_energy(field, domain, 1.0, cfg)?;
    e.kind = EnergyKind::TotalVariation;
    Ok(e)
}

/// ∫_{J_u ∩ Ω} |u⁺ - u⁻|^q dH^{N-1} for a planar jump.
pub fn jump_energy(field: &Field, domain: &Domain, q: f64) -> Result<EnergyValue> {
    check_q(q)?;
    check_dims(field, domain)?;
    let j = field.jump().ok_or(Error::NoJumpSet)?;
    let section = domain.hyperplane_section(&j.normal, j.offset)?;
    let mut e = EnergyValue::analytic(
        EnergyKind::Jump,
        Magnitude::Finite(pow_q(frobenius(&j.jump), q) * section),
    );
    if q == 1.0 {
        e.warning = Some("the jump sandwich assumes q > 1".into());
    }
    Ok(e)
}

/// (1/N) ∫_Ω ∫_{S^{N-1}} F(|Du(x) z|) dH^{N-1}(z) dx. For scalar u the inner
/// integrand equals F(|∇u(x)| |z₁|) after a rotation.
pub fn general_f_limit(field: &Field, domain: &Domain, f: FSpec, cfg: &EnergyConfig) -> Result<EnergyValue> {
    f.validate()?;
    check_dims(field, domain)?;
    let kind = EnergyKind::GeneralF;
    if field.is_constant() {
        return Ok(EnergyValue::analytic(kind, Magnitude::Finite(0.0)));
    }
    if field.kind() == FieldKind::Step {
        return Err(Error::Unsupported("the general-F limit needs a W^{1,q} field".into()));
    }
    if !radial_energy_finite(field, domain, f.q)? {
        return Ok(EnergyValue::analytic(kind, Magnitude::Infinite));
    }
    let dim = domain.dim();
    let m = field.codim();
    let resolution = cfg.sphere_resolution.max(16);
    if dim > 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let n = dim as f64;
    let (value, ci, method) = integrate_jacobian(field, domain, cfg, |jac| {
        let inner = sphere_integral(dim, resolution, |z| {
            let mut norm2 = 0.0;
            for k in 0..m {
                let row = &jac[k * dim..(k + 1) * dim];
                let v: f64 = row.iter().zip(z).map(|(a, b)| a * b).sum();
                norm2 += v * v;
            }
            f.eval(norm2.sqrt())
        });
        inner.unwrap_or(f64::NAN) / n
    })?;
    Ok(EnergyValue {
        kind,
        value: Magnitude::Finite(value),
        method,
        ci_halfwidth: ci,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Components, FieldSpec, Slope};
    use approx::assert_relative_eq;

    fn linear(a: &[f64]) -> Field {
        Field::build(&FieldSpec::Linear {
            slope: Slope::Vector(a.to_vec()),
            offset: None,
        })
        .unwrap()
    }

    fn step(normal: &[f64], offset: f64, jump: f64) -> Field {
        Field::build(&FieldSpec::Step {
            normal: normal.to_vec(),
            offset,
            jump: Components::Scalar(jump),
            base: None,
        })
        .unwrap()
    }

    fn gaussian_1d() -> Field {
        Field::build(&FieldSpec::Gaussian {
            center: vec![0.0],
            amplitude: Components::Scalar(1.0),
            width: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn sobolev_examples() {
        let cfg = EnergyConfig::default();
        let sq = Domain::unit_box(2).unwrap();
        let e = sobolev_energy(&linear(&[1.0, 0.0]), &sq, 2.0, &cfg).unwrap();
        assert_eq!(e.value, Magnitude::Finite(1.0));
        assert_eq!(e.method, Method::Analytic);
        assert!(e.ci_halfwidth.is_none());

        let line = Domain::cuboid(&[-3.0], &[3.0]).unwrap();
        let g = sobolev_energy(&gaussian_1d(), &line, 2.0, &cfg).unwrap();
        // ∫ 4x² e^{-2x²} dx = √(π/2); the tails beyond ±3 are below 1e-6
        let expected = std::f64::consts::FRAC_PI_2.sqrt();
        assert!((g.value.finite().unwrap() - expected).abs() < 1e-3);

        let s = sobolev_energy(&step(&[1.0], 0.5, 1.0), &Domain::unit_box(1).unwrap(), 1.0, &cfg).unwrap();
        assert!(s.value.is_infinite());
        // jump outside the domain
        let s = sobolev_energy(&step(&[1.0], 2.0, 1.0), &Domain::unit_box(1).unwrap(), 1.0, &cfg).unwrap();
        assert_eq!(s.value, Magnitude::Finite(0.0));
    }

    #[test]
    fn total_variation_examples() {
        let cfg = EnergyConfig::default();
        let sq = Domain::unit_box(2).unwrap();
        let disk = Domain::ball(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(
            total_variation(&step(&[1.0, 0.0], 0.5, 1.0), &sq, &cfg).unwrap().value,
            Magnitude::Finite(1.0)
        );
        let tv = total_variation(&step(&[1.0, 0.0], 0.0, 2.0), &disk, &cfg).unwrap();
        assert_relative_eq!(tv.value.finite().unwrap(), 4.0, max_relative = 1e-15);
        assert_eq!(
            total_variation(&linear(&[3.0, 4.0]), &sq, &cfg).unwrap().value,
            Magnitude::Finite(5.0)
        );
    }

    #[test]
    fn jump_examples() {
        let e = jump_energy(&step(&[1.0], 0.5, 1.0), &Domain::unit_box(1).unwrap(), 2.0).unwrap();
        assert_eq!(e.value, Magnitude::Finite(1.0));
        let e = jump_energy(&step(&[1.0, 0.0], 0.5, 1.0), &Domain::unit_box(2).unwrap(), 3.0).unwrap();
        assert_eq!(e.value, Magnitude::Finite(1.0));
        let disk = Domain::ball(&[0.0, 0.0], 1.0).unwrap();
        let e = jump_energy(&step(&[1.0, 0.0], 0.0, 2.0), &disk, 2.0).unwrap();
        assert_relative_eq!(e.value.finite().unwrap(), 8.0, max_relative = 1e-15);
        let e = jump_energy(&step(&[1.0], 0.5, 1.0), &Domain::unit_box(1).unwrap(), 1.0).unwrap();
        assert!(e.warning.is_some());
        assert!(matches!(
            jump_energy(&linear(&[1.0]), &Domain::unit_box(1).unwrap(), 2.0),
            Err(Error::NoJumpSet)
        ));
    }

    #[test]
    fn general_f_examples() {
        let cfg = EnergyConfig::default();
        let unit = Domain::unit_box(1).unwrap();
        let capped = general_f_limit(&linear(&[1.0]), &unit, FSpec::capped(2.0, 0.5), &cfg).unwrap();
        assert_eq!(capped.value, Magnitude::Finite(1.0));
        let power = general_f_limit(&linear(&[1.0]), &unit, FSpec::power(2.0), &cfg).unwrap();
        assert_eq!(power.value, Magnitude::Finite(2.0));
        // (1/2)·I_2(2)·|a|² on the unit square
        let sq = Domain::unit_box(2).unwrap();
        let v = general_f_limit(&linear(&[1.0, 0.0]), &sq, FSpec::power(2.0), &cfg).unwrap();
        assert_relative_eq!(
            v.value.finite().unwrap(),
            std::f64::consts::FRAC_PI_2,
            max_relative = 1e-10
        );
    }

    #[test]
    fn singular_fields() {
        let cfg = EnergyConfig::default();
        let cusp = Field::build(&FieldSpec::Cusp {
            center: vec![0.0],
            exponent: 0.5,
            support_lo: vec![-1.0],
            support_hi: vec![1.0],
        })
        .unwrap();
        let d = Domain::cuboid(&[-1.0], &[1.0]).unwrap();
        // |u'|² = 1/(4|x|) is not integrable at the tip
        assert!(sobolev_energy(&cusp, &d, 2.0, &cfg).unwrap().value.is_infinite());
        // ∫ |u'| = 2·(1^{1/2}) = 2
        let tv = sobolev_energy(&cusp, &d, 1.0, &cfg).unwrap();
        assert!((tv.value.finite().unwrap() - 2.0).abs() <= tv.ci_halfwidth.unwrap().max(0.02));
        let narrow = Domain::cuboid(&[-2.0], &[1.0]).unwrap();
        assert!(sobolev_energy(&cusp, &narrow, 1.0, &cfg).is_err());
    }

    #[test]
    fn homogeneity() {
        let cfg = EnergyConfig::default();
        let sq = Domain::unit_box(2).unwrap();
        let u = linear(&[0.3, -1.1]);
        for &lambda in &[0.5, 2.0, 3.0] {
            for &q in &[1.0, 2.0, 2.5] {
                let a = sobolev_energy(&u, &sq, q, &cfg).unwrap().value.finite().unwrap();
                let b = sobolev_energy(&u.scaled(lambda), &sq, q, &cfg)
                    .unwrap()
                    .value
                    .finite()
                    .unwrap();
                assert_relative_eq!(b, lambda.powf(q) * a, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn finite_differences_agree_with_analytic() {
        let line = Domain::cuboid(&[-3.0], &[3.0]).unwrap();
        let fd = EnergyConfig {
            fd_step: Some(1e-5),
            ..EnergyConfig::default()
        };
        let a = sobolev_energy(&gaussian_1d(), &line, 2.0, &EnergyConfig::default()).unwrap();
        let b = sobolev_energy(&gaussian_1d(), &line, 2.0, &fd).unwrap();
        assert_eq!(b.method, Method::FiniteDifference);
        assert_relative_eq!(
            a.value.finite().unwrap(),
            b.value.finite().unwrap(),
            max_relative = 1e-4
        );
    }
}
