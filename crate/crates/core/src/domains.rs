//! Regions Ω ⊂ R^N: membership, measure, diameter, uniform sampling.
//!
//! Boundary points are classified as outside; every integral in this crate is
//! insensitive to L^N-null sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::unit_ball_volume;
use crate::error::{Error, Result};

const MAX_REJECTIONS: usize = 10_000;

/// Serializable description of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// The open box (lo, hi) with the closed box [hole_lo, hole_hi] removed.
    BoxMinusBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
        hole_lo: Vec<f64>,
        hole_hi: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Cuboid {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Cuboid {
    fn new(lo: &[f64], hi: &[f64], what: &str) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::param(what, "dimension must be at least 1"));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (a, b) in lo.iter().zip(hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::param(
                    what,
                    format!("need lo < hi on every axis, got {a} .. {b}"),
                ));
            }
        }
        Ok(Cuboid {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        })
    }

    fn contains_open(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *a < *x && *x < *b)
    }

    fn contains_closed(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    fn diagonal(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    fn intersect(&self, other: &Cuboid) -> Option<Cuboid> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        lo.iter().zip(&hi).all(|(a, b)| a < b).then_some(Cuboid { lo, hi })
    }

    fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.lo.len();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                    .collect()
            })
            .collect()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(&self.lo).zip(&self.hi) {
            *o = a + (b - a) * rng.random::<f64>();
        }
    }

    /// Euclidean distance between two cuboids (0 when they overlap).
    fn distance_to(&self, other: &Cuboid) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((a0, a1), (b0, b1))| {
                let gap = (b0 - a1).max(a0 - b1).max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    fn point_distance(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (a, b))| {
                let gap = (a - x).max(x - b).max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// H^{N-1} of {x·ν = c} ∩ cuboid, for axis-aligned ν in any dimension or
    /// any ν in the plane.
    fn section(&self, normal: &[f64], offset: f64) -> Result<f64> {
        let n = self.lo.len();
        if n == 1 {
            let x = offset / normal[0];
            return Ok(if self.lo[0] < x && x < self.hi[0] { 1.0 } else { 0.0 });
        }
        let nonzero: Vec<usize> = (0..n).filter(|&i| normal[i] != 0.0).collect();
        if nonzero.len() == 1 {
            let axis = nonzero[0];
            let x = offset / normal[axis];
            if !(self.lo[axis] < x && x < self.hi[axis]) {
                return Ok(0.0);
            }
            return Ok((0..n).filter(|&i| i != axis).map(|i| self.hi[i] - self.lo[i]).product());
        }
        if n == 2 {
            // p(τ) = offset·ν + τ·ν⊥, clipped against both slabs.
            let base = [offset * normal[0], offset * normal[1]];
            let dir = [-normal[1], normal[0]];
            let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..2 {
                if dir[i] == 0.0 {
                    if !(self.lo[i] < base[i] && base[i] < self.hi[i]) {
                        return Ok(0.0);
                    }
                } else {
                    let a = (self.lo[i] - base[i]) / dir[i];
                    let b = (self.hi[i] - base[i]) / dir[i];
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
            }
            return Ok((t1 - t0).max(0.0));
        }
        Err(Error::Unsupported(
            "oblique hyperplane sections of boxes are only implemented for N <= 2".into(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Box(Cuboid),
    Ball { center: Vec<f64>, radius: f64 },
    BoxMinusBox { outer: Cuboid, hole: Cuboid },
}

/// An immutable region Ω of R^N.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    dim: usize,
    volume: f64,
    diameter: f64,
}

impl Domain {
    pub fn from_spec(spec: &DomainSpec) -> Result<Domain> {
        match spec {
            DomainSpec::Box { lo, hi } => Domain::cuboid(lo, hi),
            DomainSpec::Ball { center, radius } => Domain::ball(center, *radius),
            DomainSpec::BoxMinusBox {
                lo,
                hi,
                hole_lo,
                hole_hi,
            } => Domain::box_minus_box(lo, hi, hole_lo, hole_hi),
        }
    }

    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Result<Domain> {
        let c = Cuboid::new(lo, hi, "box")?;
        Ok(Domain {
            dim: lo.len(),
            volume: c.volume(),
            diameter: c.diagonal(),
            shape: Shape::Box(c),
        })
    }

    /// (0, 1)^N
    pub fn unit_box(dim: usize) -> Result<Domain> {
        Domain::cuboid(&vec![0.0; dim], &vec![1.0; dim])
    }

    pub fn ball(center: &[f64], radius: f64) -> Result<Domain> {
        if center.is_empty() {
            return Err(Error::param("ball", "dimension must be at least 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("ball", "radius must be positive and the center finite"));
        }
        let dim = center.len();
        Ok(Domain {
            dim,
            volume: unit_ball_volume(dim)? * radius.powi(dim as i32),
            diameter: 2.0 * radius,
            shape: Shape::Ball {
                center: center.to_vec(),
                radius,
            },
        })
    }

    pub fn box_minus_box(lo: &[f64], hi: &[f64], hole_lo: &[f64], hole_hi: &[f64]) -> Result<Domain> {
        let outer = Cuboid::new(lo, hi, "box-minus-box")?;
        let hole = Cuboid::new(hole_lo, hole_hi, "box-minus-box hole")?;
        if hole.lo.len() != outer.lo.len() {
            return Err(Error::DimensionMismatch {
                expected: outer.lo.len(),
                got: hole.lo.len(),
            });
        }
        let clipped = outer
            .intersect(&hole)
            .ok_or_else(|| Error::param("box-minus-box hole", "must overlap the outer box"))?;
        let volume = outer.volume() - clipped.volume();
        if volume <= 0.0 {
            return Err(Error::param("box-minus-box hole", "removes the whole outer box"));
        }
        let mut domain = Domain {
            dim: lo.len(),
            volume,
            diameter: 0.0,
            shape: Shape::BoxMinusBox { outer, hole: clipped },
        };
        domain.diameter = domain.box_minus_box_diameter();
        Ok(domain)
    }

    /// The diameter of a set equals that of its extreme points; for a box with
    /// a box removed these are among the corners of both boxes that survive
    /// in the closure.
    fn box_minus_box_diameter(&self) -> f64 {
        let Shape::BoxMinusBox { outer, hole } = &self.shape else {
            unreachable!()
        };
        let scale = outer.diagonal() * 1e-9;
        let candidates: Vec<Vec<f64>> = outer
            .corners()
            .into_iter()
            .chain(hole.corners())
            .filter(|p| self.in_closure(p, scale))
            .collect();
        let mut best: f64 = 0.0;
        for (i, a) in candidates.iter().enumerate() {
            for b in &candidates[i + 1..] {
                best = best.max(distance(a, b));
            }
        }
        best
    }

    fn in_closure(&self, p: &[f64], scale: f64) -> bool {
        let n = self.dim;
        let mut probe = vec![0.0; n];
        (0..3usize.pow(n as u32)).any(|code| {
            let mut c = code;
            for (i, v) in probe.iter_mut().enumerate() {
                let step = (c % 3) as f64 - 1.0;
                c /= 3;
                *v = p[i] + step * scale;
            }
            self.inside(&probe)
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.shape, Shape::BoxMinusBox { .. })
    }

    /// Membership test with a dimension check.
    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        Ok(self.inside(point))
    }

    /// Membership test without the dimension check; `point.len()` must be N.
    #[inline]
    pub fn inside(&self, point: &[f64]) -> bool {
        match &self.shape {
            Shape::Box(c) => c.contains_open(point),
            Shape::Ball { center, radius } => {
                let d2: f64 = point.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
                d2 < radius * radius
            }
            Shape::BoxMinusBox { outer, hole } => outer.contains_open(point) && !hole.contains_closed(point),
        }
    }

    /// Axis-aligned bounding box (lo, hi).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Box(c) | Shape::BoxMinusBox { outer: c, .. } => (c.lo.clone(), c.hi.clone()),
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// `Some((lo, hi))` when the domain is a plain box.
    pub fn as_box(&self) -> Option<(&[f64], &[f64])> {
        match &self.shape {
            Shape::Box(c) => Some((&c.lo, &c.hi)),
            _ => None,
        }
    }

    /// Uniform sample written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        match &self.shape {
            Shape::Box(c) => {
                c.sample(rng, out);
                Ok(())
            }
            Shape::Ball { center, radius } => {
                for _ in 0..MAX_REJECTIONS {
                    let mut d2 = 0.0;
                    for (o, c) in out.iter_mut().zip(center) {
                        let u = 2.0 * rng.random::<f64>() - 1.0;
                        *o = c + radius * u;
                        d2 += u * u;
                    }
                    if d2 < 1.0 {
                        return Ok(());
                    }
                }
                Err(Error::RejectionFailed(MAX_REJECTIONS))
            }
            Shape::BoxMinusBox { outer, hole } => {
                for _ in 0..MAX_REJECTIONS {
                    outer.sample(rng, out);
                    if !hole.contains_closed(out) {
                        return Ok(());
                    }
                }
                Err(Error::RejectionFailed(MAX_REJECTIONS))
            }
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let mut p = vec![0.0; self.dim];
        self.sample_into(rng, &mut p)?;
        Ok(p)
    }

    /// dist(inner, R^N \ outer), from the parameters of both domains.
    pub fn dist_to_complement(inner: &Domain, outer: &Domain) -> Result<f64> {
        if inner.dim != outer.dim {
            return Err(Error::DimensionMismatch {
                expected: outer.dim,
                got: inner.dim,
            });
        }
        let d = match (&inner.shape, &outer.shape) {
            (Shape::Box(a), Shape::Box(b)) => box_margin(a, b),
            (Shape::Ball { center: c1, radius: r1 }, Shape::Ball { center: c2, radius: r2 }) => {
                r2 - r1 - distance(c1, c2)
            }
            (Shape::Box(a), Shape::Ball { center, radius }) => {
                let far = a.corners().iter().map(|p| distance(p, center)).fold(0.0, f64::max);
                radius - far
            }
            (Shape::Ball { center, radius }, Shape::Box(b)) => {
                center
                    .iter()
                    .zip(b.lo.iter().zip(&b.hi))
                    .map(|(c, (lo, hi))| (c - lo).min(hi - c))
                    .fold(f64::INFINITY, f64::min)
                    - radius
            }
            (Shape::Box(a), Shape::BoxMinusBox { outer, hole }) => {
                let to_hole = a.distance_to(hole);
                if a.intersect(hole).is_some() {
                    return Err(Error::NotNested);
                }
                box_margin(a, outer).min(to_hole)
            }
            (Shape::Ball { center, radius }, Shape::BoxMinusBox { outer, hole }) => {
                let to_outer = center
                    .iter()
                    .zip(outer.lo.iter().zip(&outer.hi))
                    .map(|(c, (lo, hi))| (c - lo).min(hi - c))
                    .fold(f64::INFINITY, f64::min)
                    - radius;
                to_outer.min(hole.point_distance(center) - radius)
            }
            (Shape::BoxMinusBox { .. }, _) => {
                return Err(Error::Unsupported(
                    "distance from a non-convex inner domain is not implemented".into(),
                ))
            }
        };
        if d < -1e-12 * outer.diameter {
            return Err(Error::NotNested);
        }
        Ok(d.max(0.0))
    }

    /// H^{N-1}({x·ν = c} ∩ Ω) for a unit normal ν.
    pub fn hyperplane_section(&self, normal: &[f64], offset: f64) -> Result<f64> {
        if normal.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: normal.len(),
            });
        }
        match &self.shape {
            Shape::Box(c) => c.section(normal, offset),
            Shape::Ball { center, radius } => {
                let d = (offset - dot(normal, center)).abs();
                if d >= *radius {
                    return Ok(0.0);
                }
                if self.dim == 1 {
                    return Ok(1.0);
                }
                let rho = (radius * radius - d * d).sqrt();
                Ok(unit_ball_volume(self.dim - 1)? * rho.powi(self.dim as i32 - 1))
            }
            Shape::BoxMinusBox { outer, hole } => Ok(outer.section(normal, offset)? - hole.section(normal, offset)?),
        }
    }
}

fn box_margin(inner: &Cuboid, outer: &Cuboid) -> f64 {
    inner
        .lo
        .iter()
        .zip(&inner.hi)
        .zip(outer.lo.iter().zip(&outer.hi))
        .map(|((a0, a1), (b0, b1))| (a0 - b0).min(b1 - a1))
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
