//! Catalog of test functions u: R^N → R^m with the analytic data the
//! estimators and energies need (gradients, Lipschitz and oscillation bounds,
//! jump descriptors).

use serde::{Deserialize, Serialize};

use crate::domains::{distance, dot, Domain};
use crate::error::{Error, Result};
use crate::rng::substream;

/// A scalar or a vector of components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Components {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Components {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            Components::Scalar(v) => vec![*v],
            Components::Vector(v) => v.clone(),
        }
    }
}

impl Default for Components {
    fn default() -> Self {
        Components::Scalar(1.0)
    }
}

/// Slope of a linear field: a gradient vector (m = 1) or an m×N matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Slope {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

fn one() -> f64 {
    1.0
}

/// Serializable description of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    /// u(x) = A x + b
    Linear {
        slope: Slope,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    /// u(x) = a · exp(-|x - c|² / w²)
    Gaussian {
        center: Vec<f64>,
        #[serde(default)]
        amplitude: Components,
        #[serde(default = "one")]
        width: f64,
    },
    Constant {
        dim: usize,
        value: Components,
    },
    /// u = base on {x·ν < c}, base + jump on {x·ν > c}.
    Step {
        normal: Vec<f64>,
        offset: f64,
        jump: Components,
        #[serde(default)]
        base: Option<Components>,
    },
    /// u(x) = |x - c|^β inside the support box, 0 outside; β in (0, 1).
    Cusp {
        center: Vec<f64>,
        exponent: f64,
        support_lo: Vec<f64>,
        support_hi: Vec<f64>,
    },
    /// u(x) = |x - c|^{-β} inside the support box, 0 outside; β > 0.
    PowerSingularity {
        center: Vec<f64>,
        exponent: f64,
        support_lo: Vec<f64>,
        support_hi: Vec<f64>,
    },
    /// Node values on a cell-centred grid over the box (lo, hi), either given
    /// explicitly (row-major, last axis fastest) or sampled from another field.
    Grid {
        lo: Vec<f64>,
        hi: Vec<f64>,
        nodes: Vec<usize>,
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default)]
        sample: Option<Box<FieldSpec>>,
    },
}

/// F(a) = min(|a|^q, cap), or |a|^q without a cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FSpec {
    pub q: f64,
    #[serde(default)]
    pub cap: Option<f64>,
}

impl FSpec {
    pub fn power(q: f64) -> FSpec {
        FSpec { q, cap: None }
    }

    pub fn capped(q: f64, cap: f64) -> FSpec {
        FSpec { q, cap: Some(cap) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0) || !self.q.is_finite() {
            return Err(Error::param("q", "q must be ≥ 1"));
        }
        if let Some(c) = self.cap {
            if !(c >= 0.0) {
                return Err(Error::param("cap", "must be nonnegative"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, a: f64) -> f64 {
        let v = pow_q(a.abs(), self.q);
        match self.cap {
            Some(c) => v.min(c),
            None => v,
        }
    }
}

/// a^q with the common exponents evaluated by multiplication.
#[inline]
pub fn pow_q(a: f64, q: f64) -> f64 {
    if q == 2.0 {
        a * a
    } else if q == 1.0 {
        a
    } else if q == 0.0 {
        1.0
    } else {
        a.powf(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    Smooth,
    Lipschitz,
    BvWithJump,
    NonBesov,
}

/// Planar jump set {x·ν = c} with u⁺ - u⁻ = `jump` (u⁺ on the side x·ν > c).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpDescriptor {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub jump: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    lo: Vec<f64>,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
    hi: Vec<f64>,
    values: Vec<f64>,
}

impl GridData {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Position of node `flat` (row-major, last axis fastest).
    pub fn node_position(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for axis in (0..self.nodes.len()).rev() {
            let i = rem % self.nodes[axis];
            rem /= self.nodes[axis];
            out[axis] = self.lo[axis] + (i as f64 + 0.5) * self.spacing[axis];
        }
    }

    fn interpolate(&self, x: &[f64]) -> f64 {
        let n = self.nodes.len();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..n {
            let count = self.nodes[a];
            let mut s = ((x[a] - self.lo[a]) / self.spacing[a] - 0.5).clamp(0.0, (count - 1) as f64);
            // node coordinates round-trip through the division up to an ulp
            if (s - s.round()).abs() < 1e-9 {
                s = s.round();
            }
            let i = (s.floor() as usize).min(count.saturating_sub(2));
            base[a] = i;
            frac[a] = if count == 1 { 0.0 } else { s - i as f64 };
        }
        let mut total = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut flat = 0usize;
            for a in 0..n {
                let bit = corner >> a & 1;
                let idx = (base[a] + bit).min(self.nodes[a] - 1);
                weight *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * self.nodes[a] + idx;
            }
            if weight != 0.0 {
                total += weight * self.values[flat];
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Linear {
        matrix: Vec<f64>,
        offset: Vec<f64>,
    },
    Gaussian {
        center: Vec<f64>,
        amplitude: Vec<f64>,
        width: f64,
    },
    Constant {
        value: Vec<f64>,
    },
    Step {
        jump: JumpDescriptor,
        base: Vec<f64>,
    },
    Cusp {
        center: Vec<f64>,
        exponent: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Power {
        center: Vec<f64>,
        exponent: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Grid(GridData),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Linear,
    Gaussian,
    Constant,
    Step,
    Cusp,
    PowerSingularity,
    Grid,
}

/// u = |x - c|^exponent on the open box (lo, hi), 0 outside; the exponent is
/// negative for power singularities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial<'a> {
    pub center: &'a [f64],
    pub exponent: f64,
    pub lo: &'a [f64],
    pub hi: &'a [f64],
}

/// An immutable test function. Evaluation is reentrant.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    kind: Kind,
    dim: usize,
    codim: usize,
    gain: f64,
}

/// Jacobian (m×N, row-major) and its Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub jacobian: Vec<f64>,
    pub norm: f64,
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::param(name, "must not be empty"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::param(name, "must be finite"));
    }
    Ok(())
}

fn check_support(lo: &[f64], hi: &[f64], dim: usize) -> Result<()> {
    if lo.len() != dim || hi.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: lo.len().min(hi.len()),
        });
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::param("support", "need lo < hi on every axis"));
    }
    Ok(())
}

fn in_box(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a < *v && *v < *b)
}

impl Field {
    pub fn build(spec: &FieldSpec) -> Result<Field> {
        let (kind, dim, codim) = match spec {
            FieldSpec::Linear { slope, offset } => {
                let rows: Vec<Vec<f64>> = match slope {
                    Slope::Vector(v) => vec![v.clone()],
                    Slope::Matrix(m) => m.clone(),
                };
                if rows.is_empty() {
                    return Err(Error::param("slope", "must not be empty"));
                }
                let dim = rows[0].len();
                for r in &rows {
                    check_finite("slope", r)?;
                    if r.len() != dim {
                        return Err(Error::param("slope", "rows must have equal length"));
                    }
                }
                let codim = rows.len();
                let offset = offset.clone().unwrap_or_else(|| vec![0.0; codim]);
                if offset.len() != codim {
                    return Err(Error::param("offset", format!("needs {codim} components")));
                }
                let matrix = rows.concat();
                (Kind::Linear { matrix, offset }, dim, codim)
            }
            FieldSpec::Gaussian {
                center,
                amplitude,
                width,
            } => {
                check_finite("center", center)?;
                let amplitude = amplitude.to_vec();
                check_finite("amplitude", &amplitude)?;
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::param("width", "must be positive"));
                }
                let codim = amplitude.len();
                (
                    Kind::Gaussian {
                        center: center.clone(),
                        amplitude,
                        width: *width,
                    },
                    center.len(),
                    codim,
                )
            }
            FieldSpec::Constant { dim, value } => {
                if *dim == 0 {
                    return Err(Error::param("dim", "must be at least 1"));
                }
                let value = value.to_vec();
                check_finite("value", &value)?;
                let codim = value.len();
                (Kind::Constant { value }, *dim, codim)
            }
            FieldSpec::Step {
                normal,
                offset,
                jump,
                base,
            } => {
                check_finite("normal", normal)?;
                let norm = dot(normal, normal).sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::param("normal", format!("must have unit length, |ν| = {norm}")));
                }
                if !offset.is_finite() {
                    return Err(Error::param("offset", "must be finite"));
                }
                let jump = jump.to_vec();
                check_finite("jump", &jump)?;
                let codim = jump.len();
                let base = base
                    .as_ref()
                    .map(Components::to_vec)
                    .unwrap_or_else(|| vec![0.0; codim]);
                if base.len() != codim {
                    return Err(Error::param("base", format!("needs {codim} components")));
                }
                (
                    Kind::Step {
                        jump: JumpDescriptor {
                            normal: normal.clone(),
                            offset: *offset,
                            jump,
                        },
                        base,
                    },
                    normal.len(),
                    codim,
                )
            }
            FieldSpec::Cusp {
                center,
                exponent,
                support_lo,
                support_hi,
            } => {
                check_finite("center", center)?;
                if !(*exponent > 0.0 && *exponent < 1.0) {
                    return Err(Error::param("exponent", "cusp exponent must lie in (0, 1)"));
                }
                check_support(support_lo, support_hi, center.len())?;
                (
                    Kind::Cusp {
                        center: center.clone(),
                        exponent: *exponent,
                        lo: support_lo.clone(),
                        hi: support_hi.clone(),
                    },
                    center.len(),
                    1,
                )
            }
            FieldSpec::PowerSingularity {
                center,
                exponent,
                support_lo,
                support_hi,
            } => {
                check_finite("center", center)?;
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::param("exponent", "singularity exponent must be positive"));
                }
                check_support(support_lo, support_hi, center.len())?;
                (
                    Kind::Power {
                        center: center.clone(),
                        exponent: *exponent,
                        lo: support_lo.clone(),
                        hi: support_hi.clone(),
                    },
                    center.len(),
                    1,
                )
            }
            FieldSpec::Grid {
                lo,
                hi,
                nodes,
                values,
                sample,
            } => {
                let dim = lo.len();
                check_support(lo, hi, dim)?;
                if dim == 0 || dim > 3 {
                    return Err(Error::UnsupportedDimension(dim));
                }
                if nodes.len() != dim || nodes.contains(&0) {
                    return Err(Error::param("nodes", "need a positive node count per axis"));
                }
                let spacing: Vec<f64> = (0..dim).map(|a| (hi[a] - lo[a]) / nodes[a] as f64).collect();
                let mut grid = GridData {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    nodes: nodes.clone(),
                    spacing,
                    values: Vec::new(),
                };
                let count = grid.node_count();
                grid.values = match (values, sample) {
                    (Some(v), None) => {
                        if v.len() != count {
                            return Err(Error::param(
                                "values",
                                format!("expected {count} node values, got {}", v.len()),
                            ));
                        }
                        check_finite("values", v)?;
                        v.clone()
                    }
                    (None, Some(inner)) => {
                        let source = Field::build(inner)?;
                        if source.dim != dim || source.codim != 1 {
                            return Err(Error::param("sample", "must be a scalar field of the grid dimension"));
                        }
                        let mut p = vec![0.0; dim];
                        let mut out = [0.0];
                        (0..count)
                            .map(|i| {
                                grid.node_position(i, &mut p);
                                source.eval_into(&p, &mut out);
                                out[0]
                            })
                            .collect()
                    }
                    _ => return Err(Error::param("grid", "give exactly one of `values` or `sample`")),
                };
                (Kind::Grid(grid), dim, 1)
            }
        };
        Ok(Field {
            kind,
            dim,
            codim,
            gain: 1.0,
        })
    }

    /// The field λu.
    pub fn scaled(&self, lambda: f64) -> Field {
        Field {
            gain: self.gain * lambda,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn kind(&self) -> FieldKind {
        match &self.kind {
            Kind::Linear { .. } => FieldKind::Linear,
            Kind::Gaussian { .. } => FieldKind::Gaussian,
            Kind::Constant { .. } => FieldKind::Constant,
            Kind::Step { .. } => FieldKind::Step,
            Kind::Cusp { .. } => FieldKind::Cusp,
            Kind::Power { .. } => FieldKind::PowerSingularity,
            Kind::Grid(_) => FieldKind::Grid,
        }
    }

    pub fn radial(&self) -> Option<Radial<'_>> {
        match &self.kind {
            Kind::Cusp {
                center,
                exponent,
                lo,
                hi,
            } => Some(Radial {
                center,
                exponent: *exponent,
                lo,
                hi,
            }),
            Kind::Power {
                center,
                exponent,
                lo,
                hi,
            } => Some(Radial {
                center,
                exponent: -exponent,
                lo,
                hi,
            }),
            _ => None,
        }
    }

    pub fn regularity(&self) -> Regularity {
        match &self.kind {
            Kind::Linear { .. } | Kind::Gaussian { .. } | Kind::Constant { .. } => Regularity::Smooth,
            Kind::Step { .. } => Regularity::BvWithJump,
            Kind::Cusp { .. } | Kind::Grid(_) => Regularity::Lipschitz,
            Kind::Power { .. } => Regularity::NonBesov,
        }
    }

    pub fn is_constant(&self) -> bool {
        let flat = match &self.kind {
            Kind::Constant { .. } => true,
            Kind::Linear { matrix, .. } => matrix.iter().all(|&a| a == 0.0),
            Kind::Gaussian { amplitude, .. } => amplitude.iter().all(|&a| a == 0.0),
            Kind::Step { jump, .. } => jump.jump.iter().all(|&a| a == 0.0),
            Kind::Grid(g) => g.values.iter().all(|&v| v == g.values[0]),
            Kind::Cusp { .. } | Kind::Power { .. } => false,
        };
        flat || self.gain == 0.0
    }

    pub fn jump(&self) -> Option<JumpDescriptor> {
        match &self.kind {
            Kind::Step { jump, .. } => Some(JumpDescriptor {
                jump: jump.jump.iter().map(|j| j * self.gain).collect(),
                ..jump.clone()
            }),
            _ => None,
        }
    }

    pub fn grid(&self) -> Option<&GridData> {
        match &self.kind {
            Kind::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// The grid box for grid fields.
    pub fn support_box(&self) -> Option<(&[f64], &[f64])> {
        self.grid().map(|g| (g.lo.as_slice(), g.hi.as_slice()))
    }

    pub(crate) fn gain(&self) -> f64 {
        self.gain
    }

    /// Writes u(x) into `out` (length m). `x` must have length N; grid fields
    /// are extended by their boundary values outside the node hull.
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Linear { matrix, offset } => {
                for (k, o) in out.iter_mut().enumerate() {
                    let row = &matrix[k * self.dim..(k + 1) * self.dim];
                    *o = dot(row, x) + offset[k];
                }
            }
            Kind::Gaussian {
                center,
                amplitude,
                width,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let e = (-r2 / (width * width)).exp();
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = a * e;
                }
            }
            Kind::Constant { value } => out.copy_from_slice(value),
            Kind::Step { jump, base } => {
                let up = dot(&jump.normal, x) > jump.offset;
                for ((o, b), j) in out.iter_mut().zip(base).zip(&jump.jump) {
                    *o = if up { b + j } else { *b };
                }
            }
            Kind::Cusp {
                center,
                exponent,
                lo,
                hi,
            } => {
                out[0] = if in_box(x, lo, hi) {
                    distance(x, center).powf(*exponent)
                } else {
                    0.0
                };
            }
            Kind::Power {
                center,
                exponent,
                lo,
                hi,
            } => {
                let r = distance(x, center);
                out[0] = if in_box(x, lo, hi) && r > 0.0 {
                    r.powf(-exponent)
                } else {
                    0.0
                };
            }
            Kind::Grid(g) => out[0] = g.interpolate(x),
        }
        if self.gain != 1.0 {
            out.iter_mut().for_each(|o| *o *= self.gain);
        }
    }

    /// u(x), with support and dimension checks.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Kind::Grid(g) = &self.kind {
            if !x
                .iter()
                .zip(g.lo.iter().zip(&g.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
            {
                return Err(Error::OutsideSupport);
            }
        }
        let mut out = vec![0.0; self.codim];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Jacobian at `x`: analytic when `fd_step` is `None`, central differences
    /// with step `fd_step` otherwise.
    pub fn gradient(&self, x: &[f64], fd_step: Option<f64>) -> Result<Gradient> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let jacobian = match fd_step {
            Some(h) => {
                if !(h > 0.0) {
                    return Err(Error::param("fd_step", "must be positive"));
                }
                self.central_difference(x, h)
            }
            None => self.analytic_jacobian(x)?,
        };
        let norm = jacobian.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Gradient { jacobian, norm })
    }

    fn central_difference(&self, x: &[f64], h: f64) -> Vec<f64> {
        let (n, m) = (self.dim, self.codim);
        let mut jac = vec![0.0; m * n];
        let mut p = x.to_vec();
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for j in 0..n {
            p[j] = x[j] + h;
            self.eval_into(&p, &mut plus);
            p[j] = x[j] - h;
            self.eval_into(&p, &mut minus);
            p[j] = x[j];
            for k in 0..m {
                jac[k * n + j] = (plus[k] - minus[k]) / (2.0 * h);
            }
        }
        jac
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (n, m) = (self.dim, self.codim);
        let g = self.gain;
        let jac = match &self.kind {
            Kind::Linear { matrix, .. } => matrix.iter().map(|a| a * g).collect(),
            Kind::Gaussian {
                center,
                amplitude,
                width,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let e = (-r2 / (width * width)).exp();
                let mut jac = vec![0.0; m * n];
                for k in 0..m {
                    for j in 0..n {
                        jac[k * n + j] = -2.0 * (x[j] - center[j]) / (width * width) * amplitude[k] * e * g;
                    }
                }
                jac
            }
            Kind::Constant { .. } => vec![0.0; m * n],
            Kind::Step { jump, .. } => {
                if (dot(&jump.normal, x) - jump.offset).abs() < 1e-12 {
                    return Err(Error::NonDifferentiable);
                }
                vec![0.0; m * n]
            }
            Kind::Cusp {
                center,
                exponent,
                lo,
                hi,
            }
            | Kind::Power {
                center,
                exponent,
                lo,
                hi,
            } => {
                if !in_box(x, lo, hi) {
                    vec![0.0; n]
                } else {
                    let r = distance(x, center);
                    if r == 0.0 {
                        return Err(Error::NonDifferentiable);
                    }
                    let beta = if matches!(self.kind, Kind::Cusp { .. }) {
                        *exponent
                    } else {
                        -exponent
                    };
                    let c = beta * r.powf(beta - 2.0) * g;
                    x.iter().zip(center).map(|(a, b)| c * (a - b)).collect()
                }
            }
            Kind::Grid(_) => return Err(Error::NonDifferentiable),
        };
        Ok(jac)
    }

    /// Global Lipschitz constant, when one is known in closed form.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        let g = self.gain.abs();
        match &self.kind {
            Kind::Linear { matrix, .. } => Some(g * matrix.iter().map(|a| a * a).sum::<f64>().sqrt()),
            Kind::Gaussian { amplitude, width, .. } => {
                let a = amplitude.iter().map(|a| a * a).sum::<f64>().sqrt();
                Some(g * a * 2f64.sqrt() * (-0.5f64).exp() / width)
            }
            Kind::Constant { .. } => Some(0.0),
            Kind::Grid(grid) => {
                let n = grid.nodes.len();
                let mut worst: f64 = 0.0;
                let mut p = vec![0usize; n];
                for flat in 0..grid.values.len() {
                    let mut rem = flat;
                    for a in (0..n).rev() {
                        p[a] = rem % grid.nodes[a];
                        rem /= grid.nodes[a];
                    }
                    let mut stride = 1;
                    for a in (0..n).rev() {
                        if p[a] + 1 < grid.nodes[a] {
                            let d = (grid.values[flat + stride] - grid.values[flat]).abs() / grid.spacing[a];
                            worst = worst.max(d);
                        }
                        stride *= grid.nodes[a];
                    }
                }
                Some(g * worst * (n as f64).sqrt())
            }
            Kind::Step { .. } | Kind::Cusp { .. } | Kind::Power { .. } => None,
        }
    }

    /// Bound on sup |u(y) - u(x)| over Ω × Ω.
    pub fn oscillation_bound(&self, domain: &Domain) -> f64 {
        let g = self.gain.abs();
        match &self.kind {
            Kind::Constant { .. } => 0.0,
            Kind::Linear { .. } => self.lipschitz_bound().unwrap_or(0.0) * domain.diameter(),
            Kind::Gaussian { amplitude, .. } => g * amplitude.iter().map(|a| a * a).sum::<f64>().sqrt(),
            Kind::Step { jump, .. } => g * jump.jump.iter().map(|a| a * a).sum::<f64>().sqrt(),
            _ => {
                // 2 sup |u| over probe points
                let mut rng = substream(0x05C1_77E5, 0);
                let mut x = vec![0.0; self.dim];
                let mut out = vec![0.0; self.codim];
                let mut sup: f64 = 0.0;
                for _ in 0..100_000 {
                    if domain.sample_into(&mut rng, &mut x).is_err() {
                        break;
                    }
                    self.eval_into(&x, &mut out);
                    sup = sup.max(out.iter().map(|v| v * v).sum::<f64>().sqrt());
                }
                2.0 * sup
            }
        }
    }

    /// Whether u lies in B^{r/q}_{q,∞} near its singular set, from the
    /// scaling of each catalog kind.
    pub fn expected_besov_bounded(&self, q: f64, r: f64) -> Option<bool> {
        let s = r / q;
        let n = self.dim as f64;
        match &self.kind {
            Kind::Linear { .. } | Kind::Gaussian { .. } | Kind::Constant { .. } | Kind::Grid(_) => Some(s <= 1.0),
            Kind::Step { .. } => Some(self.is_constant() || s <= 1.0 / q),
            Kind::Cusp { exponent, .. } => Some(s <= exponent + n / q),
            Kind::Power { exponent, .. } => Some(s <= -exponent + n / q),
        }
    }

    /// Predicted log-log slope of ε ↦ D_{ε,r} as ε → 0 for singular kinds.
    pub fn expected_directional_slope(&self, q: f64, r: f64) -> Option<f64> {
        let n = self.dim as f64;
        match &self.kind {
            Kind::Power { exponent, .. } => Some((n - exponent * q).min(q) - r),
            Kind::Step { .. } => Some(1.0 - r),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn linear(a: &[f64]) -> Field {
        Field::build(&FieldSpec::Linear {
            slope: Slope::Vector(a.to_vec()),
            offset: None,
        })
        .unwrap()
    }

    fn gaussian(dim: usize) -> Field {
        Field::build(&FieldSpec::Gaussian {
            center: vec![0.0; dim],
            amplitude: Components::Scalar(1.0),
            width: 1.0,
        })
        .unwrap()
    }

    fn step2d() -> Field {
        Field::build(&FieldSpec::Step {
            normal: vec![1.0, 0.0],
            offset: 0.5,
            jump: Components::Scalar(1.0),
            base: None,
        })
        .unwrap()
    }

    #[test]
    fn linear_values_and_gradient() {
        let f = linear(&[2.0, 3.0]);
        assert_eq!(f.evaluate(&[1.0, 1.0]).unwrap(), vec![5.0]);
        let g = linear(&[1.0, 0.0]).gradient(&[0.3, 0.9], None).unwrap();
        assert_eq!(g.jacobian, vec![1.0, 0.0]);
        assert_eq!(g.norm, 1.0);
        assert_eq!(linear(&[1.0, 0.0]).lipschitz_bound(), Some(1.0));
        assert_eq!(f.regularity(), Regularity::Smooth);
    }

    #[test]
    fn gaussian_values_and_gradient() {
        let f = gaussian(2);
        assert_eq!(f.evaluate(&[0.0, 0.0]).unwrap(), vec![1.0]);
        let g = f.gradient(&[1.0, 0.0], None).unwrap();
        assert_relative_eq!(g.norm, 2.0 * (-1.0f64).exp(), max_relative = 1e-15);
        let fd = f.gradient(&[1.0, 0.0], Some(1e-5)).unwrap();
        assert!((fd.norm - g.norm).abs() < 1e-8);
        let bound = gaussian(1).scaled(3.0).lipschitz_bound().unwrap();
        assert_relative_eq!(bound, 3.0 * 0.857_763_884_960_706_8, max_relative = 1e-12);
    }

    #[test]
    fn step_values_and_jump() {
        let f = Field::build(&FieldSpec::Step {
            normal: vec![1.0],
            offset: 0.5,
            jump: Components::Scalar(1.0),
            base: None,
        })
        .unwrap();
        assert_eq!(f.evaluate(&[0.6]).unwrap(), vec![1.0]);
        assert_eq!(f.evaluate(&[0.4]).unwrap(), vec![0.0]);
        assert_eq!(f.lipschitz_bound(), None);
        assert_eq!(f.regularity(), Regularity::BvWithJump);
        let jump = f.jump().unwrap();
        assert_eq!(jump.jump, vec![1.0]);
        assert!(matches!(f.gradient(&[0.5], None), Err(Error::NonDifferentiable)));
        assert_eq!(f.gradient(&[0.7], None).unwrap().norm, 0.0);
    }

    #[test]
    fn step_sides_differ_by_jump_vector() {
        let f = Field::build(&FieldSpec::Step {
            normal: vec![0.6, 0.8],
            offset: 0.1,
            jump: Components::Vector(vec![1.5, -2.0]),
            base: Some(Components::Vector(vec![0.25, 3.0])),
        })
        .unwrap();
        let mut rng = substream(3, 0);
        for _ in 0..100 {
            let p: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let t = dot(&[0.6, 0.8], &p) - 0.1;
            let up: Vec<f64> = p.iter().zip([0.6, 0.8]).map(|(x, n)| x + (0.01 - t) * n).collect();
            let down: Vec<f64> = p.iter().zip([0.6, 0.8]).map(|(x, n)| x + (-0.01 - t) * n).collect();
            let a = f.evaluate(&up).unwrap();
            let b = f.evaluate(&down).unwrap();
            assert_eq!(a[0] - b[0], 1.5);
            assert_eq!(a[1] - b[1], -2.0);
        }
    }

    #[test]
    fn cusp_gradient_undefined_at_tip() {
        let f = Field::build(&FieldSpec::Cusp {
            center: vec![0.0],
            exponent: 0.5,
            support_lo: vec![-1.0],
            support_hi: vec![1.0],
        })
        .unwrap();
        assert!(matches!(f.gradient(&[0.0], None), Err(Error::NonDifferentiable)));
        let g = f.gradient(&[0.25], None).unwrap();
        assert_relative_eq!(g.norm, 1.0, max_relative = 1e-15);
        assert!(f.gradient(&[0.0], Some(1e-3)).is_ok());
        assert_eq!(f.evaluate(&[2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn invalid_parameters() {
        let bad_normal = FieldSpec::Step {
            normal: vec![1.0, 1.0],
            offset: 0.0,
            jump: Components::Scalar(1.0),
            base: None,
        };
        assert!(Field::build(&bad_normal).is_err());
        let bad_cusp = FieldSpec::Cusp {
            center: vec![0.0],
            exponent: 1.5,
            support_lo: vec![-1.0],
            support_hi: vec![1.0],
        };
        assert!(Field::build(&bad_cusp).is_err());
        let bad_grid = FieldSpec::Grid {
            lo: vec![0.0],
            hi: vec![1.0],
            nodes: vec![4],
            values: Some(vec![1.0, 2.0]),
            sample: None,
        };
        assert!(Field::build(&bad_grid).is_err());
    }

    #[test]
    fn smooth_fields_match_central_differences() {
        let fields = [
            linear(&[0.3, -1.2]),
            gaussian(2),
            gaussian(3).scaled(-2.0),
            Field::build(&FieldSpec::Linear {
                slope: Slope::Matrix(vec![vec![1.0, 2.0], vec![-0.5, 0.25]]),
                offset: Some(vec![1.0, 0.0]),
            })
            .unwrap(),
        ];
        let mut rng = substream(17, 0);
        for f in &fields {
            for _ in 0..100 {
                let p: Vec<f64> = (0..f.dim()).map(|_| rng.random::<f64>() * 3.0 - 1.5).collect();
                let a = f.gradient(&p, None).unwrap();
                let d = f.gradient(&p, Some(1e-5)).unwrap();
                for (x, y) in a.jacobian.iter().zip(&d.jacobian) {
                    assert!((x - y).abs() <= 1e-7 * x.abs().max(1e-3), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn grid_reproduces_nodes() {
        let spec = FieldSpec::Grid {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 2.0],
            nodes: vec![7, 5],
            values: None,
            sample: Some(Box::new(FieldSpec::Gaussian {
                center: vec![0.3, 0.9],
                amplitude: Components::Scalar(1.0),
                width: 0.7,
            })),
        };
        let g = Field::build(&spec).unwrap();
        let source = Field::build(&FieldSpec::Gaussian {
            center: vec![0.3, 0.9],
            amplitude: Components::Scalar(1.0),
            width: 0.7,
        })
        .unwrap();
        let data = g.grid().unwrap();
        let mut p = [0.0; 2];
        for i in 0..data.node_count() {
            data.node_position(i, &mut p);
            assert_eq!(g.evaluate(&p).unwrap(), source.evaluate(&p).unwrap());
        }
        assert!(matches!(g.evaluate(&[1.5, 0.5]), Err(Error::OutsideSupport)));
        // halfway between the first two nodes on axis 0
        let mid = [data.spacing()[0], data.spacing()[1] * 0.5];
        let mut a = [0.0; 2];
        data.node_position(0, &mut a);
        let mut b = [0.0; 2];
        data.node_position(5, &mut b);
        let expected = 0.5 * (source.evaluate(&a).unwrap()[0] + source.evaluate(&b).unwrap()[0]);
        assert_relative_eq!(g.evaluate(&mid).unwrap()[0], expected, max_relative = 1e-12);
    }

    #[test]
    fn besov_expectations() {
        let power = Field::build(&FieldSpec::PowerSingularity {
            center: vec![0.0],
            exponent: 0.125,
            support_lo: vec![-1.0],
            support_hi: vec![1.0],
        })
        .unwrap();
        assert_eq!(power.expected_besov_bounded(2.0, 1.0), Some(false));
        assert_eq!(power.expected_directional_slope(2.0, 1.0), Some(-0.25));
        let step = Field::build(&FieldSpec::Step {
            normal: vec![1.0],
            offset: 0.5,
            jump: Components::Scalar(1.0),
            base: None,
        })
        .unwrap();
        assert_eq!(step.expected_besov_bounded(2.0, 1.0), Some(true));
        assert_eq!(step2d().expected_besov_bounded(2.0, 1.5), Some(false));
    }
}
