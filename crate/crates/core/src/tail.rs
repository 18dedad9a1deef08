//! Tail measures μ(s) = L^{2N}{(x, y) ∈ Ω×Ω : T(x, y) > s} of the
//! difference-quotient kernel and their profiles s ↦ s·μ(s).
//!
//! Pairs are drawn as y = x + t·n with x uniform on Ω, n uniform on the
//! sphere and t from a two-part radial law: uniform in the small ball
//! |z| < t_lo with probability `INNER_MASS`, log-uniform on [t_lo, diam(Ω)]
//! otherwise. Every displacement that can connect two points of Ω has
//! positive density, so the weighted hit fraction is unbiased for every
//! field; the log-uniform part spreads the samples evenly over the radii at
//! which the level sets of the thresholds live.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{sphere_surface_area, unit_ball_volume};
use crate::domains::{distance, Domain};
use crate::error::{Error, Result};
use crate::fields::{pow_q, FSpec, Field};
use crate::plateau::{trailing_plateau, WindowConfig};
use crate::rng::{map_blocks, map_ordered, uniform_direction, DEFAULT_BLOCK};

/// Smallest pair budget accepted by the Monte Carlo estimator.
pub const MIN_BUDGET: u64 = 10_000;
/// Largest node count accepted by the exact grid oracle.
pub const MAX_ORACLE_NODES: usize = 20_000;

const INNER_MASS: f64 = 0.02;
/// Ratio between t_lo and the largest level-set radius at s_max.
const INNER_FRACTION: f64 = 0.01;
/// Shell radii below this multiple of diam(Ω) are refused.
const MIN_RELATIVE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub budget: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_block")]
    pub block: u64,
}

fn default_block() -> u64 {
    DEFAULT_BLOCK
}

impl SamplerConfig {
    pub fn new(budget: u64, seed: u64) -> SamplerConfig {
        SamplerConfig {
            budget,
            seed,
            block: DEFAULT_BLOCK,
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.budget < MIN_BUDGET {
            return Err(Error::BudgetTooSmall {
                got: self.budget,
                min: MIN_BUDGET,
            });
        }
        if self.block == 0 {
            return Err(Error::param("block", "must be positive"));
        }
        Ok(())
    }
}

/// The threshold kernel T(x, y) as a function of |u(y) - u(x)| and |y - x|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    /// |du|^q / t^{r+N}
    Power { q: f64, r: f64 },
    /// F(|du| / t) / t^N
    General(FSpec),
}

impl Kernel {
    fn validate(&self) -> Result<()> {
        match self {
            Kernel::Power { q, r } => {
                if !(*q >= 1.0) || !q.is_finite() {
                    return Err(Error::param("q", "q must be ≥ 1"));
                }
                if !(*r > 0.0) || !r.is_finite() {
                    return Err(Error::param("r", "r must be > 0"));
                }
                Ok(())
            }
            Kernel::General(f) => f.validate(),
        }
    }

    /// Written as (du/t)^q · t^{q-r} / t^N so that r = q agrees bit for bit
    /// with the uncapped general kernel.
    #[inline]
    fn value(&self, du: f64, t: f64, dim: i32) -> f64 {
        let tn = t.powi(dim);
        match self {
            Kernel::Power { q, r } => pow_q(du / t, *q) * pow_q(t, q - r) / tn,
            Kernel::General(f) => f.eval(du / t) / tn,
        }
    }

    /// Radius beyond which T ≤ s is guaranteed, from the oscillation bound
    /// `osc`, an optional Lipschitz bound and the cap of F.
    fn level_radius(&self, s: f64, dim: usize, osc: f64, lip: Option<f64>) -> f64 {
        let n = dim as f64;
        let (q, r, cap) = match self {
            Kernel::Power { q, r } => (*q, *r, None),
            Kernel::General(f) => (f.q, f.q, f.cap),
        };
        let mut radius = (osc.powf(q) / s).powf(1.0 / (r + n));
        if let Some(l) = lip {
            if r + n - q > 0.0 {
                radius = radius.min((l.powf(q) / s).powf(1.0 / (r + n - q)));
            }
        }
        if let Some(c) = cap {
            radius = radius.min((c / s).powf(1.0 / n));
        }
        radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    MonteCarlo,
    ExactGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProfile {
    pub s_grid: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    pub s_mu: Vec<f64>,
    pub sample_count: u64,
    pub estimator: Estimator,
    pub seed: u64,
    /// Largest increase of the raw estimate along the grid before clipping.
    pub raw_violation: f64,
}

impl TailProfile {
    fn zero(s_grid: &[f64], sample_count: u64, estimator: Estimator, seed: u64) -> TailProfile {
        let k = s_grid.len();
        TailProfile {
            s_grid: s_grid.to_vec(),
            mu_hat: vec![0.0; k],
            ci_halfwidth: vec![0.0; k],
            s_mu: vec![0.0; k],
            sample_count,
            estimator,
            seed,
            raw_violation: 0.0,
        }
    }

    fn from_raw(
        s_grid: &[f64],
        raw: Vec<f64>,
        ci_halfwidth: Vec<f64>,
        cap: f64,
        sample_count: u64,
        estimator: Estimator,
        seed: u64,
    ) -> TailProfile {
        let raw_violation = raw.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let mut mu_hat = Vec::with_capacity(raw.len());
        let mut running = cap;
        for v in raw {
            running = running.min(v.max(0.0));
            mu_hat.push(running);
        }
        let s_mu = s_grid.iter().zip(&mu_hat).map(|(s, m)| s * m).collect();
        TailProfile {
            s_grid: s_grid.to_vec(),
            mu_hat,
            ci_halfwidth,
            s_mu,
            sample_count,
            estimator,
            seed,
            raw_violation,
        }
    }

    /// Half-widths of s·μ̂(s).
    pub fn s_mu_halfwidth(&self) -> Vec<f64> {
        self.s_grid.iter().zip(&self.ci_halfwidth).map(|(s, c)| s * c).collect()
    }

    /// CSV with columns s, mu_hat, ci_halfwidth, s_mu.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,mu_hat,ci_halfwidth,s_mu\n");
        for i in 0..self.s_grid.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.s_grid[i], self.mu_hat[i], self.ci_halfwidth[i], self.s_mu[i]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSummary {
    pub sup_s_mu: f64,
    pub limsup_est: f64,
    pub liminf_est: f64,
    /// One-sigma errors of the two window extremes.
    pub limsup_stderr: f64,
    pub liminf_stderr: f64,
    pub sup_stderr: f64,
    pub window: (usize, usize),
    pub converged: bool,
    pub plateau_spread: f64,
}

fn check_grid(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() {
        return Err(Error::param("s_grid", "must not be empty"));
    }
    if s_grid.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::param("s_grid", "thresholds must be positive and finite"));
    }
    if s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("s_grid", "thresholds must be strictly increasing"));
    }
    Ok(())
}

#[inline]
fn difference_norm(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        (a[0] - b[0]).abs()
    } else {
        distance(a, b)
    }
}

/// Monte Carlo profile of μ(s) for T = |u(y) - u(x)|^q / |y - x|^{r+N}.
pub fn tail_measure_profile(
    field: &Field,
    domain: &Domain,
    q: f64,
    r: f64,
    s_grid: &[f64],
    sampler: &SamplerConfig,
) -> Result<TailProfile> {
    kernel_profile(field, domain, Kernel::Power { q, r }, s_grid, sampler)
}

/// Monte Carlo profile of μ(s) for T = F(|u(y) - u(x)| / |y - x|) / |y - x|^N.
pub fn f_tail_profile(
    field: &Field,
    domain: &Domain,
    f: FSpec,
    s_grid: &[f64],
    sampler: &SamplerConfig,
) -> Result<TailProfile> {
    kernel_profile(field, domain, Kernel::General(f), s_grid, sampler)
}

pub fn kernel_profile(
    field: &Field,
    domain: &Domain,
    kernel: Kernel,
    s_grid: &[f64],
    sampler: &SamplerConfig,
) -> Result<TailProfile> {
    kernel.validate()?;
    check_grid(s_grid)?;
    sampler.check()?;
    let dim = domain.dim();
    if field.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: field.dim(),
        });
    }
    let seed = sampler.seed;
    let budget = sampler.budget;
    let s_max = *s_grid.last().unwrap();
    let osc = field.oscillation_bound(domain);
    let radius = kernel.level_radius(s_max, dim, osc, field.lipschitz_bound());
    if !(radius > 0.0) {
        // T vanishes identically
        return Ok(TailProfile::zero(s_grid, budget, Estimator::MonteCarlo, seed));
    }
    let diam = domain.diameter();
    if radius < MIN_RELATIVE_RADIUS * diam {
        return Err(Error::ShellUnderflow(format!(
            "level sets at s = {s_max:e} lie within |y - x| < {radius:e}; lower the largest threshold"
        )));
    }
    let t_hi = diam;
    let t_lo = (INNER_FRACTION * radius)
        .max(MIN_RELATIVE_RADIUS * diam)
        .min(0.1 * t_hi);
    let log_span = (t_hi / t_lo).ln();
    let volume = domain.volume();
    let n = dim as f64;
    let inner_weight = volume * unit_ball_volume(dim)? * t_lo.powi(dim as i32) / INNER_MASS;
    let shell_weight = volume * sphere_surface_area(dim)? * log_span / (1.0 - INNER_MASS);
    let k = s_grid.len();
    let codim = field.codim();
    let idim = dim as i32;

    let blocks = map_blocks(
        budget,
        sampler.block,
        seed,
        |count, rng| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut bins = vec![0.0; k];
            let mut bins2 = vec![0.0; k];
            let mut x = vec![0.0; dim];
            let mut y = vec![0.0; dim];
            let mut dir = vec![0.0; dim];
            let mut ux = vec![0.0; codim];
            let mut uy = vec![0.0; codim];
            for _ in 0..count {
                domain.sample_into(rng, &mut x)?;
                uniform_direction(rng, &mut dir);
                let (t, w) = if rng.random::<f64>() < INNER_MASS {
                    (t_lo * rng.random::<f64>().powf(1.0 / n), inner_weight)
                } else {
                    let t = t_lo * (log_span * rng.random::<f64>()).exp();
                    (t, shell_weight * t.powi(idim))
                };
                for i in 0..dim {
                    y[i] = x[i] + t * dir[i];
                }
                if !domain.inside(&y) {
                    continue;
                }
                field.eval_into(&x, &mut ux);
                field.eval_into(&y, &mut uy);
                let du = difference_norm(&ux, &uy);
                if du == 0.0 {
                    continue;
                }
                let tv = kernel.value(du, t, idim);
                let hits = s_grid.partition_point(|&s| s < tv);
                if hits > 0 {
                    bins[hits - 1] += w;
                    bins2[hits - 1] += w * w;
                }
            }
            Ok((bins, bins2))
        },
    );

    let mut bins = vec![0.0; k];
    let mut bins2 = vec![0.0; k];
    for block in blocks {
        let (b, b2) = block?;
        for i in 0..k {
            bins[i] += b[i];
            bins2[i] += b2[i];
        }
    }
    let total = budget as f64;
    let mut raw = vec![0.0; k];
    let mut ci = vec![0.0; k];
    let (mut acc, mut acc2) = (0.0, 0.0);
    for i in (0..k).rev() {
        acc += bins[i];
        acc2 += bins2[i];
        let mean = acc / total;
        let var = (acc2 / total - mean * mean).max(0.0);
        raw[i] = mean;
        ci[i] = 3.0 * (var / total).sqrt();
    }
    Ok(TailProfile::from_raw(
        s_grid,
        raw,
        ci,
        volume * volume,
        budget,
        Estimator::MonteCarlo,
        seed,
    ))
}

/// Exact discrete tail measure of a grid field: every ordered pair of distinct
/// nodes carries the weight (cell volume)², T is evaluated on node values.
pub fn tail_measure_exact_grid(field: &Field, q: f64, r: f64, s_grid: &[f64]) -> Result<TailProfile> {
    exact_grid_profile(field, Kernel::Power { q, r }, s_grid)
}

pub fn exact_grid_profile(field: &Field, kernel: Kernel, s_grid: &[f64]) -> Result<TailProfile> {
    kernel.validate()?;
    check_grid(s_grid)?;
    let grid = field
        .grid()
        .ok_or_else(|| Error::param("field", "the exact oracle needs a grid field"))?;
    let nodes = grid.node_count();
    if nodes > MAX_ORACLE_NODES {
        return Err(Error::NodeBudget {
            nodes,
            limit: MAX_ORACLE_NODES,
        });
    }
    let dim = field.dim();
    let idim = dim as i32;
    let gain = field.gain();
    let values: Vec<f64> = grid.values().iter().map(|v| v * gain).collect();
    let mut positions = vec![0.0; nodes * dim];
    for i in 0..nodes {
        grid.node_position(i, &mut positions[i * dim..(i + 1) * dim]);
    }
    let cell: f64 = grid.spacing().iter().product();
    let box_volume = cell * nodes as f64;
    // (x_i, x_j) and (x_j, x_i) hit together
    let weight = 2.0 * cell * cell;
    let k = s_grid.len();
    const ROWS: usize = 64;
    let chunks = nodes.div_ceil(ROWS) as u64;
    let partial = map_ordered(chunks, |c| {
        let mut counts = vec![0u64; k];
        let lo = c as usize * ROWS;
        for i in lo..(lo + ROWS).min(nodes) {
            let pi = &positions[i * dim..(i + 1) * dim];
            for j in (i + 1)..nodes {
                let du = (values[j] - values[i]).abs();
                if du == 0.0 {
                    continue;
                }
                let t = distance(pi, &positions[j * dim..(j + 1) * dim]);
                let tv = kernel.value(du, t, idim);
                let hits = s_grid.partition_point(|&s| s < tv);
                if hits > 0 {
                    counts[hits - 1] += 1;
                }
            }
        }
        counts
    });
    let mut counts = vec![0u64; k];
    for p in partial {
        for i in 0..k {
            counts[i] += p[i];
        }
    }
    let mut raw = vec![0.0; k];
    let mut acc = 0u64;
    for i in (0..k).rev() {
        acc += counts[i];
        raw[i] = acc as f64 * weight;
    }
    let pairs = (nodes * nodes.saturating_sub(1) / 2) as u64;
    Ok(TailProfile::from_raw(
        s_grid,
        raw,
        vec![0.0; k],
        box_volume * box_volume,
        pairs,
        Estimator::ExactGrid,
        0,
    ))
}

/// sup, limsup and liminf of s·μ(s) read off the trailing plateau.
pub fn tail_summary(profile: &TailProfile, cfg: &WindowConfig) -> Result<TailSummary> {
    if profile.s_grid.len() < 8 {
        return Err(Error::param("s_grid", "a summary needs at least 8 thresholds"));
    }
    let half = profile.s_mu_halfwidth();
    let plateau = trailing_plateau(&profile.s_grid, &profile.s_mu, &half, cfg);
    let (isup, sup) =
        profile.s_mu.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
    Ok(TailSummary {
        sup_s_mu: sup,
        limsup_est: plateau.max,
        liminf_est: plateau.min,
        limsup_stderr: plateau.max_stderr,
        liminf_stderr: plateau.min_stderr,
        sup_stderr: half[isup] / 3.0,
        window: (plateau.start, plateau.end),
        converged: plateau.converged,
        plateau_spread: plateau.spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Components, FieldSpec, Slope};
    use crate::plateau::GridConfig;

    fn linear_1d() -> Field {
        Field::build(&FieldSpec::Linear {
            slope: Slope::Vector(vec![1.0]),
            offset: None,
        })
        .unwrap()
    }

    fn unit() -> Domain {
        Domain::unit_box(1).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = [10.0, 100.0];
        let f = linear_1d();
        let d = unit();
        let ok = SamplerConfig::new(MIN_BUDGET, 0);
        assert!(tail_measure_profile(&f, &d, 2.0, 0.0, &s, &ok).is_err());
        assert!(tail_measure_profile(&f, &d, 0.5, 1.0, &s, &ok).is_err());
        assert!(matches!(
            tail_measure_profile(&f, &d, 2.0, 2.0, &s, &SamplerConfig::new(999, 0)),
            Err(Error::BudgetTooSmall { .. })
        ));
        assert!(matches!(
            tail_measure_profile(&f, &d, 2.0, 2.0, &[10.0, 1e12], &ok),
            Err(Error::ShellUnderflow(_))
        ));
        assert!(tail_measure_profile(&f, &d, 2.0, 2.0, &[100.0, 10.0], &ok).is_err());
    }

    #[test]
    fn constant_field_is_exactly_zero() {
        let f = Field::build(&FieldSpec::Constant {
            dim: 2,
            value: Components::Scalar(3.0),
        })
        .unwrap();
        let d = Domain::unit_box(2).unwrap();
        let s = GridConfig::new(1.0, 1e4, 4).points().unwrap();
        let p = tail_measure_profile(&f, &d, 2.0, 1.0, &s, &SamplerConfig::new(MIN_BUDGET, 1)).unwrap();
        assert!(p.mu_hat.iter().all(|&m| m == 0.0));
        let summary = tail_summary(&p, &WindowConfig::default()).unwrap();
        assert_eq!(summary.sup_s_mu, 0.0);
        assert!(summary.converged);
    }

    #[test]
    fn linear_law_at_ten() {
        let p = tail_measure_profile(
            &linear_1d(),
            &unit(),
            2.0,
            2.0,
            &[10.0],
            &SamplerConfig::new(200_000, 3),
        )
        .unwrap();
        assert!(
            (p.mu_hat[0] - 0.19).abs() <= p.ci_halfwidth[0],
            "{} ± {}",
            p.mu_hat[0],
            p.ci_halfwidth[0]
        );
    }

    #[test]
    fn two_node_grid() {
        let f = Field::build(&FieldSpec::Grid {
            lo: vec![0.0],
            hi: vec![2.0],
            nodes: vec![2],
            values: Some(vec![0.0, 1.0]),
            sample: None,
        })
        .unwrap();
        let p = tail_measure_exact_grid(&f, 1.0, 1.0, &[0.5]).unwrap();
        assert_eq!(p.mu_hat, vec![2.0]);
    }

    #[test]
    fn oracle_node_budget() {
        let f = Field::build(&FieldSpec::Grid {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
            nodes: vec![200, 101],
            values: Some(vec![0.0; 20_200]),
            sample: None,
        })
        .unwrap();
        assert!(matches!(
            tail_measure_exact_grid(&f, 2.0, 2.0, &[1.0]),
            Err(Error::NodeBudget { .. })
        ));
    }

    #[test]
    fn summary_needs_eight_thresholds() {
        let p = TailProfile::zero(&[1.0, 2.0], 0, Estimator::MonteCarlo, 0);
        assert!(tail_summary(&p, &WindowConfig::default()).is_err());
    }

    #[test]
    fn power_kernel_with_r_equal_q_matches_uncapped_general_kernel() {
        for &(du, t) in &[(0.3, 0.01), (1.0, 1e-4), (2.5, 0.7)] {
            for &q in &[1.0, 1.5, 2.0, 3.0] {
                for dim in 1..=3 {
                    let a = Kernel::Power { q, r: q }.value(du, t, dim);
                    let b = Kernel::General(FSpec::power(q)).value(du, t, dim);
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
