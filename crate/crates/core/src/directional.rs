//! Sphere-averaged difference quotients
//! D_{ε,r}(u; Ω) = ∫_{S^{N-1}} ∫_Ω χ_Ω(x + εn) |u(x + εn) - u(x)|^q / ε^r dx dH^{N-1}(n),
//! single-direction quotients, the annulus-mollifier functional, and the
//! Besov boundedness diagnostic built on D_{ε,r}.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::sphere_surface_area;
use crate::domains::{dot, Domain};
use crate::error::{Error, Result};
use crate::fields::{pow_q, Field};
use crate::plateau::{log_log_slope, trailing_plateau, WindowConfig};
use crate::rng::{map_blocks, uniform_direction, Stream, DEFAULT_BLOCK};
use crate::tail::MIN_BUDGET;

fn default_resolution() -> usize {
    256
}

fn default_block() -> u64 {
    DEFAULT_BLOCK
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    /// Uniform spatial samples x ∈ Ω.
    pub spatial_budget: u64,
    /// Angles of the circle rule (N = 2).
    #[serde(default = "default_resolution")]
    pub sphere_resolution: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_block")]
    pub block: u64,
}

impl QuadConfig {
    pub fn new(spatial_budget: u64, seed: u64) -> QuadConfig {
        QuadConfig {
            spatial_budget,
            sphere_resolution: default_resolution(),
            seed,
            block: DEFAULT_BLOCK,
        }
    }

    fn check(&self) -> Result<()> {
        if self.spatial_budget < MIN_BUDGET {
            return Err(Error::BudgetTooSmall {
                got: self.spatial_budget,
                min: MIN_BUDGET,
            });
        }
        if self.sphere_resolution < 4 {
            return Err(Error::param("sphere_resolution", "must be at least 4"));
        }
        if self.block == 0 {
            return Err(Error::param("block", "must be positive"));
        }
        Ok(())
    }
}

/// A Monte Carlo value with its 3σ half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_halfwidth: f64,
    /// Set when the result is 0 because ε reaches past the diameter.
    pub beyond_diameter: bool,
}

impl Estimate {
    fn zero(beyond_diameter: bool) -> Estimate {
        Estimate {
            value: 0.0,
            ci_halfwidth: 0.0,
            beyond_diameter,
        }
    }
}

/// V · mean of `g` over uniform points of Ω, with the 3σ half-width.
fn spatial_integral<G>(domain: &Domain, cfg: &QuadConfig, g: G) -> Result<Estimate>
where
    G: Fn(&[f64], &mut Stream, &mut Scratch) -> f64 + Sync + Send,
{
    let dim = domain.dim();
    let blocks = map_blocks(
        cfg.spatial_budget,
        cfg.block,
        cfg.seed,
        |count, rng| -> Result<(f64, f64)> {
            let mut x = vec![0.0; dim];
            let mut scratch = Scratch::new(dim);
            let (mut sum, mut sum2) = (0.0, 0.0);
            for _ in 0..count {
                domain.sample_into(rng, &mut x)?;
                let v = g(&x, rng, &mut scratch);
                sum += v;
                sum2 += v * v;
            }
            Ok((sum, sum2))
        },
    );
    let (mut sum, mut sum2) = (0.0, 0.0);
    for b in blocks {
        let (s, s2) = b?;
        sum += s;
        sum2 += s2;
    }
    let n = cfg.spatial_budget as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    let v = domain.volume();
    Ok(Estimate {
        value: v * mean,
        ci_halfwidth: 3.0 * v * (var / n).sqrt(),
        beyond_diameter: false,
    })
}

struct Scratch {
    y: Vec<f64>,
    dir: Vec<f64>,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Scratch {
        Scratch {
            y: vec![0.0; dim],
            dir: vec![0.0; dim],
            ux: Vec::new(),
            uy: Vec::new(),
        }
    }
}

/// Quadrature on S^{N-1} with weights summing to H^{N-1}(S^{N-1}): the two
/// points ±1 for N = 1, an equispaced angle rule with a random rotation for
/// N = 2, one uniform direction for N ≥ 3.
#[derive(Debug, Clone, Copy)]
struct SphereRule {
    dim: usize,
    angles: usize,
    area: f64,
}

impl SphereRule {
    fn new(dim: usize, angles: usize) -> Result<SphereRule> {
        Ok(SphereRule {
            dim,
            angles,
            area: sphere_surface_area(dim)?,
        })
    }

    fn for_each<F: FnMut(&[f64], f64)>(&self, rng: &mut Stream, dir: &mut [f64], mut f: F) {
        match self.dim {
            1 => {
                dir[0] = 1.0;
                f(dir, 1.0);
                dir[0] = -1.0;
                f(dir, 1.0);
            }
            2 => {
                let step = TAU / self.angles as f64;
                let phase = step * rng.random::<f64>();
                for j in 0..self.angles {
                    let (s, c) = (phase + step * j as f64).sin_cos();
                    dir[0] = c;
                    dir[1] = s;
                    f(dir, step);
                }
            }
            _ => {
                uniform_direction(rng, dir);
                f(dir, self.area);
            }
        }
    }
}

fn check_exponents(q: f64, r: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param("q", "q must be ≥ 1"));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::param("r", "r must be ≥ 0"));
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

/// |u(x + h·dir) - u(x)| with `ux = u(x)` already evaluated.
#[inline]
fn increment(field: &Field, x: &[f64], h: f64, s: &mut Scratch) -> f64 {
    for i in 0..x.len() {
        s.y[i] = x[i] + h * s.dir[i];
    }
    field.eval_into(&s.y, &mut s.uy);
    if s.ux.len() == 1 {
        (s.uy[0] - s.ux[0]).abs()
    } else {
        s.ux.iter()
            .zip(&s.uy)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// D_{ε,r}(u; Ω).
pub fn directional_functional(
    field: &Field,
    domain: &Domain,
    q: f64,
    r: f64,
    eps: f64,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    check_exponents(q, r)?;
    check_dims(field, domain)?;
    cfg.check()?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", "must be positive"));
    }
    if eps >= domain.diameter() {
        return Ok(Estimate::zero(true));
    }
    let rule = SphereRule::new(domain.dim(), cfg.sphere_resolution)?;
    let scale = eps.powf(-r);
    let codim = field.codim();
    spatial_integral(domain, cfg, |x, rng, s| {
        s.ux.resize(codim, 0.0);
        s.uy.resize(codim, 0.0);
        field.eval_into(x, &mut s.ux);
        let mut total = 0.0;
        let mut dir = std::mem::take(&mut s.dir);
        rule.for_each(rng, &mut dir, |n, w| {
            s.dir.clear();
            s.dir.extend_from_slice(n);
            for i in 0..x.len() {
                s.y[i] = x[i] + eps * n[i];
            }
            if domain.inside(&s.y) {
                total += w * pow_q(increment(field, x, eps, s), q);
            }
        });
        s.dir = dir;
        total * scale
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalProfile {
    pub eps_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    pub q: f64,
    pub r: f64,
    pub sphere_resolution: usize,
    pub spatial_budget: u64,
    pub seed: u64,
    /// ε values at or beyond diam(Ω), reported as 0.
    pub beyond_diameter: Vec<f64>,
}

impl DirectionalProfile {
    /// CSV with columns eps, value, ci_halfwidth.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,value,ci_halfwidth\n");
        for i in 0..self.eps_grid.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.eps_grid[i], self.values[i], self.ci_halfwidth[i]
            ));
        }
        out
    }
}

fn check_descending(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.is_empty() {
        return Err(Error::param("eps_grid", "must not be empty"));
    }
    if eps_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::param("eps_grid", "values must be positive"));
    }
    if eps_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("eps_grid", "must be strictly decreasing"));
    }
    Ok(())
}

/// D_{ε,r} along a decreasing ε grid; every ε reuses the same spatial
/// samples so the profile is smooth in ε.
pub fn directional_profile(
    field: &Field,
    domain: &Domain,
    q: f64,
    r: f64,
    eps_grid: &[f64],
    cfg: &QuadConfig,
) -> Result<DirectionalProfile> {
    check_descending(eps_grid)?;
    let mut values = Vec::with_capacity(eps_grid.len());
    let mut ci = Vec::with_capacity(eps_grid.len());
    let mut beyond = Vec::new();
    for &eps in eps_grid {
        let e = directional_functional(field, domain, q, r, eps, cfg)?;
        if e.beyond_diameter {
            beyond.push(eps);
        }
        values.push(e.value);
        ci.push(e.ci_halfwidth);
    }
    Ok(DirectionalProfile {
        eps_grid: eps_grid.to_vec(),
        values,
        ci_halfwidth: ci,
        q,
        r,
        sphere_resolution: cfg.sphere_resolution,
        spatial_budget: cfg.spatial_budget,
        seed: cfg.seed,
        beyond_diameter: beyond,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionalSummary {
    pub sup_value: f64,
    pub limsup_est: f64,
    pub liminf_est: f64,
    pub limsup_stderr: f64,
    pub liminf_stderr: f64,
    pub sup_stderr: f64,
    pub window: (usize, usize),
    pub converged: bool,
    pub plateau_spread: f64,
}

/// Trailing-window lim sup / lim inf as ε → 0, same rule as for tail profiles.
pub fn directional_summary(profile: &DirectionalProfile, cfg: &WindowConfig) -> DirectionalSummary {
    let p = trailing_plateau(&profile.eps_grid, &profile.values, &profile.ci_halfwidth, cfg);
    let (isup, sup) =
        profile.values.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
    DirectionalSummary {
        sup_value: sup,
        limsup_est: p.max,
        liminf_est: p.min,
        limsup_stderr: p.max_stderr,
        liminf_stderr: p.min_stderr,
        sup_stderr: profile.ci_halfwidth[isup] / 3.0,
        window: (p.start, p.end),
        converged: p.converged,
        plateau_spread: p.spread,
    }
}

/// ∫_inner |u(x + εk) - u(x)|^q / ε^r dx for a unit vector k.
pub fn single_direction_functional(
    field: &Field,
    inner: &Domain,
    q: f64,
    r: f64,
    eps: f64,
    direction: &[f64],
    cfg: &QuadConfig,
) -> Result<Estimate> {
    check_exponents(q, r)?;
    check_dims(field, inner)?;
    cfg.check()?;
    if direction.len() != inner.dim() {
        return Err(Error::DimensionMismatch {
            expected: inner.dim(),
            got: direction.len(),
        });
    }
    if (dot(direction, direction).sqrt() - 1.0).abs() > 1e-9 {
        return Err(Error::param("direction", "must be a unit vector"));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", "must be positive"));
    }
    let scale = eps.powf(-r);
    let codim = field.codim();
    spatial_integral(inner, cfg, |x, _rng, s| {
        s.ux.resize(codim, 0.0);
        s.uy.resize(codim, 0.0);
        s.dir.copy_from_slice(direction);
        field.eval_into(x, &mut s.ux);
        pow_q(increment(field, x, eps, s), q) * scale
    })
}

/// ∫_Ω ∫_Ω ρ_ε(|y - x|) |u(y) - u(x)|^q / |y - x|^q dy dx with the annulus
/// mollifier ρ_ε(t) = 1_{[ε-σ, ε+σ]}(t) / (2σ H^{N-1}(S^{N-1}) t^{N-1}).
pub fn bbm_mollifier_functional(
    field: &Field,
    domain: &Domain,
    q: f64,
    eps: f64,
    sigma: f64,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    check_exponents(q, 0.0)?;
    check_dims(field, domain)?;
    cfg.check()?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", "must be positive"));
    }
    if !(sigma > 0.0 && sigma <= eps / 8.0) {
        return Err(Error::param("sigma", "need 0 < σ ≤ ε/8"));
    }
    if eps + sigma >= domain.diameter() {
        return Err(Error::param("eps", "ε + σ must stay below the diameter"));
    }
    let rule = SphereRule::new(domain.dim(), cfg.sphere_resolution)?;
    let codim = field.codim();
    spatial_integral(domain, cfg, |x, rng, s| {
        s.ux.resize(codim, 0.0);
        s.uy.resize(codim, 0.0);
        field.eval_into(x, &mut s.ux);
        let t = eps - sigma + 2.0 * sigma * rng.random::<f64>();
        let mut total = 0.0;
        let mut dir = std::mem::take(&mut s.dir);
        rule.for_each(rng, &mut dir, |n, w| {
            s.dir.clear();
            s.dir.extend_from_slice(n);
            for i in 0..x.len() {
                s.y[i] = x[i] + t * n[i];
            }
            if domain.inside(&s.y) {
                total += w * pow_q(increment(field, x, t, s) / t, q);
            }
        });
        s.dir = dir;
        total / rule.area
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesovConfig {
    /// Smallest trailing log-log slope still read as bounded.
    pub slope_threshold: f64,
    /// Largest accepted ratio of the last value to the window median.
    pub growth_ratio: f64,
    /// Span of the fitting window in decades of ε.
    pub window_decades: f64,
}

impl Default for BesovConfig {
    fn default() -> Self {
        BesovConfig {
            slope_threshold: -0.05,
            growth_ratio: 10.0,
            window_decades: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesovDiagnostic {
    pub bounded: bool,
    pub trend_exponent: f64,
    pub window: (usize, usize),
    pub profile: DirectionalProfile,
}

/// Reads boundedness of ε ↦ D_{ε,r} (0 < r < q) off the trailing log-log slope.
pub fn besov_diagnostic(
    field: &Field,
    domain: &Domain,
    q: f64,
    r: f64,
    eps_grid: &[f64],
    quad: &QuadConfig,
    cfg: &BesovConfig,
) -> Result<BesovDiagnostic> {
    if !(r > 0.0 && r < q) {
        return Err(Error::param("r", "the diagnostic needs 0 < r < q"));
    }
    if eps_grid.len() < 6 {
        return Err(Error::param("eps_grid", "need at least 6 points"));
    }
    let profile = directional_profile(field, domain, q, r, eps_grid, quad)?;
    let n = eps_grid.len();
    let last = eps_grid[n - 1];
    let start = (0..n)
        .rev()
        .find(|&i| (eps_grid[i] / last).log10() >= cfg.window_decades - 1e-9)
        .unwrap_or(0);
    let slope = log_log_slope(&profile.eps_grid, &profile.values, start..n).unwrap_or(0.0);
    let mut window: Vec<f64> = profile.values[start..].to_vec();
    window.sort_by(f64::total_cmp);
    let median = window[window.len() / 2];
    // D grows as ε ↓ 0 exactly when the slope in ln ε is negative
    let bounded = slope >= cfg.slope_threshold && profile.values[n - 1] <= cfg.growth_ratio * median;
    Ok(BesovDiagnostic {
        bounded,
        trend_exponent: slope,
        window: (start, n),
        profile,
    })
}
