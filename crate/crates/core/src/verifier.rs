//! Theorem checks: every inequality or identity is evaluated with a
//! tolerance built from a relative slack plus the combined Monte Carlo error.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Serialize, Serializer};

use crate::config::{ConfigErrors, RunConfig, TheoremCheck, TheoremId};
use crate::constants::{first_coord_moment, holder_lower_constant, unit_ball_volume};
use crate::directional::{
    besov_diagnostic, directional_profile, directional_summary, single_direction_functional, DirectionalProfile,
    DirectionalSummary, QuadConfig,
};
use crate::domains::Domain;
use crate::energies::{
    general_f_limit, jump_energy, sobolev_energy, total_variation, EnergyConfig, EnergyValue, Magnitude,
};
use crate::error::{Error, Result};
use crate::fields::{FSpec, Field};
use crate::plateau::trailing_plateau;
use crate::rng::{derive_seed, substream, uniform_direction};
use crate::tail::{f_tail_profile, tail_measure_profile, tail_summary, SamplerConfig, TailProfile, TailSummary};

const SALT_TAIL: u64 = 1;
const SALT_DIRECTIONAL: u64 = 2;
const SALT_ENERGY: u64 = 3;
const SALT_DIRECTIONS: u64 = 4;

/// Random directions probed by the direction-average bound when N ≥ 2.
pub const PROBE_DIRECTIONS: usize = 16;

/// Absolute tolerance on the fitted Besov trend exponent.
pub const SLOPE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
}

/// A measured or predicted quantity with its one-sigma error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: Magnitude,
    pub stderr: f64,
}

impl Quantity {
    pub fn finite(value: f64, stderr: f64) -> Quantity {
        Quantity {
            value: Magnitude::Finite(value),
            stderr,
        }
    }

    pub fn exact(value: f64) -> Quantity {
        Quantity::finite(value, 0.0)
    }

    fn of_energy(e: &EnergyValue, factor: f64) -> Quantity {
        match e.value {
            Magnitude::Finite(v) => Quantity::finite(factor * v, factor * e.stderr()),
            Magnitude::Infinite => Quantity {
                value: Magnitude::Infinite,
                stderr: 0.0,
            },
        }
    }
}

fn ser_magnitude<S: Serializer>(m: &Magnitude, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Magnitude::Finite(v) => s.serialize_f64(*v),
        Magnitude::Infinite => s.serialize_str("+inf"),
    }
}

/// One evaluated bound `lhs <= rhs` or `lhs == rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub label: String,
    pub relation: Relation,
    #[serde(serialize_with = "ser_magnitude")]
    pub lhs: Magnitude,
    #[serde(serialize_with = "ser_magnitude")]
    pub rhs: Magnitude,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    /// `None` when one side is infinite and the comparison is symbolic.
    pub tolerance: Option<f64>,
    /// Slack in units of the tolerance; the bound holds iff margin ≥ -1.
    pub margin: Option<f64>,
    pub holds: bool,
}

/// rel_tol · max(|a|, |b|) + 3 · sqrt(σ_a² + σ_b²), plus a floor for exact zeros.
pub fn tolerance(a: f64, b: f64, sa: f64, sb: f64, rel_tol: f64) -> f64 {
    rel_tol * a.abs().max(b.abs()) + 3.0 * (sa * sa + sb * sb).sqrt() + 1e-12
}

impl Comparison {
    /// `lhs <= rhs` up to the tolerance.
    pub fn le(label: &str, lhs: Quantity, rhs: Quantity, rel_tol: f64) -> Comparison {
        Comparison::build(label, Relation::Le, lhs, rhs, |l, r, sl, sr| {
            tolerance(l, r, sl, sr, rel_tol)
        })
    }

    /// `lhs == rhs` up to the tolerance.
    pub fn eq(label: &str, lhs: Quantity, rhs: Quantity, rel_tol: f64) -> Comparison {
        Comparison::build(label, Relation::Eq, lhs, rhs, |l, r, sl, sr| {
            tolerance(l, r, sl, sr, rel_tol)
        })
    }

    /// `lhs == rhs` within a fixed absolute tolerance.
    pub fn eq_abs(label: &str, lhs: f64, rhs: f64, tol: f64) -> Comparison {
        Comparison::build(
            label,
            Relation::Eq,
            Quantity::exact(lhs),
            Quantity::exact(rhs),
            |_, _, _, _| tol.max(f64::MIN_POSITIVE),
        )
    }

    fn build(
        label: &str,
        relation: Relation,
        lhs: Quantity,
        rhs: Quantity,
        tol: impl Fn(f64, f64, f64, f64) -> f64,
    ) -> Comparison {
        let (tolerance, margin, holds) = match (lhs.value, rhs.value) {
            (Magnitude::Finite(l), Magnitude::Finite(r)) => {
                let t = tol(l, r, lhs.stderr, rhs.stderr);
                let m = match relation {
                    Relation::Le => (r - l) / t,
                    Relation::Eq => -(l - r).abs() / t,
                } + 0.0;
                (Some(t), Some(m), m >= -1.0)
            }
            (Magnitude::Infinite, Magnitude::Infinite) => (None, None, true),
            (Magnitude::Finite(_), Magnitude::Infinite) => (None, None, relation == Relation::Le),
            (Magnitude::Infinite, Magnitude::Finite(_)) => (None, None, false),
        };
        Comparison {
            label: label.to_string(),
            relation,
            lhs: lhs.value,
            rhs: rhs.value,
            lhs_stderr: lhs.stderr,
            rhs_stderr: rhs.stderr,
            tolerance,
            margin,
            holds,
        }
    }
}

/// Result of the Besov boundedness diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesovReading {
    pub bounded: bool,
    pub expected_bounded: Option<bool>,
    pub trend_exponent: f64,
    pub expected_trend: Option<f64>,
    pub window: (usize, usize),
}

/// lim sup over ε of the single-direction functional, per probed direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionSweep {
    pub directions: Vec<Vec<f64>>,
    pub limsup: Vec<f64>,
    pub limsup_stderr: Vec<f64>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Measured {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directional: Option<DirectionalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directions: Option<DirectionSweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub besov: Option<BesovReading>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_mu_hat: Option<f64>,
    /// Constants entering the bounds (I_q(N), c̃_N, ...).
    pub constants: BTreeMap<String, f64>,
    /// Diagnostic ratios that carry no pass/fail meaning.
    pub ratios: BTreeMap<String, f64>,
}

/// Profiles behind a record, kept out of the JSON report.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Tail(TailProfile),
    Directional(DirectionalProfile),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub theorem_id: TheoremId,
    pub inputs: TheoremCheck,
    pub measured: Measured,
    pub bounds: Vec<Comparison>,
    pub margins: Vec<Option<f64>>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub profiles: Vec<(String, Profile)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub version: u32,
    pub seed: u64,
    pub budgets: crate::config::Budgets,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub meta: ReportMeta,
    pub checks: Vec<CheckRecord>,
}

impl ExperimentReport {
    /// Pass only if every check passed; any inconclusive check outranks a fail.
    pub fn overall(&self) -> Verdict {
        let mut v = Verdict::Pass;
        for c in &self.checks {
            v = match (v, c.verdict) {
                (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
                (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
                _ => Verdict::Pass,
            };
        }
        v
    }
}

struct Run<'a> {
    chk: &'a TheoremCheck,
    field: Field,
    domain: Domain,
    measured: Measured,
    bounds: Vec<Comparison>,
    notes: Vec<String>,
    profiles: Vec<(String, Profile)>,
    unsettled: bool,
}

impl<'a> Run<'a> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn sampler(&self) -> SamplerConfig {
        SamplerConfig::new(self.chk.budgets.pairs, derive_seed(self.chk.seed, SALT_TAIL))
    }

    fn quad(&self) -> QuadConfig {
        let mut q = QuadConfig::new(self.chk.budgets.spatial, derive_seed(self.chk.seed, SALT_DIRECTIONAL));
        q.sphere_resolution = self.chk.budgets.sphere_resolution;
        q
    }

    fn energy_cfg(&self) -> EnergyConfig {
        EnergyConfig {
            spatial_budget: self.chk.budgets.energy,
            seed: derive_seed(self.chk.seed, SALT_ENERGY),
            ..EnergyConfig::default()
        }
    }

    fn constant(&mut self, name: &str, v: f64) -> f64 {
        self.measured.constants.insert(name.to_string(), v);
        v
    }

    fn tail(&mut self, profile: TailProfile) -> Result<TailSummary> {
        let s = tail_summary(&profile, &self.chk.tolerances.window)?;
        self.profiles.push(("tail".into(), Profile::Tail(profile)));
        self.measured.tail = Some(s);
        Ok(s)
    }

    fn power_tail(&mut self) -> Result<TailSummary> {
        let s_grid = self.chk.s_grid.points()?;
        let p = tail_measure_profile(
            &self.field,
            &self.domain,
            self.chk.q,
            self.chk.r,
            &s_grid,
            &self.sampler(),
        )?;
        self.tail(p)
    }

    fn directional(&mut self) -> Result<DirectionalSummary> {
        let eps = self.chk.eps_grid.points()?;
        let p = directional_profile(&self.field, &self.domain, self.chk.q, self.chk.r, &eps, &self.quad())?;
        let s = directional_summary(&p, &self.chk.tolerances.window);
        self.profiles.push(("directional".into(), Profile::Directional(p)));
        self.measured.directional = Some(s);
        Ok(s)
    }

    /// Needs the trailing plateau to have settled.
    fn require(&mut self, converged: bool, what: &str) {
        if !converged {
            self.unsettled = true;
            self.notes
                .push(format!("{what} plateau did not settle within tolerance"));
        }
    }

    fn bound(&mut self, c: Comparison) {
        self.bounds.push(c);
    }

    /// Sobolev energy, or total variation for q = 1 fields with a jump.
    fn reference_energy(&mut self) -> Result<EnergyValue> {
        let cfg = self.energy_cfg();
        let e = if self.chk.q == 1.0 && self.field.jump().is_some() {
            total_variation(&self.field, &self.domain, &cfg)?
        } else {
            sobolev_energy(&self.field, &self.domain, self.chk.q, &cfg)?
        };
        self.measured.energy = Some(e.clone());
        Ok(e)
    }

    fn sobolev(&mut self) -> Result<EnergyValue> {
        let e = sobolev_energy(&self.field, &self.domain, self.chk.q, &self.energy_cfg())?;
        self.measured.energy = Some(e.clone());
        Ok(e)
    }

    fn ratio(&mut self, name: &str, num: f64, energy: &EnergyValue) {
        if let Some(den) = energy.finite_value().filter(|d| *d > 0.0) {
            self.measured.ratios.insert(name.to_string(), num / den);
        }
    }
}

fn bsvy_sup_bounds(run: &mut Run) -> Result<()> {
    let tail = run.power_tail()?;
    let e = run.reference_energy()?;
    let c = run.constant("c_tilde", holder_lower_constant(run.dim())?);
    let rel = run.chk.rel_tol;
    let lower = Quantity::of_energy(&e, c.powf(run.chk.q));
    run.bound(Comparison::le(
        "c̃^q·E <= sup s·μ",
        lower,
        Quantity::finite(tail.sup_s_mu, tail.sup_stderr),
        rel,
    ));
    run.ratio("sup_over_energy", tail.sup_s_mu, &e);
    Ok(())
}

fn limit_identity(run: &mut Run) -> Result<()> {
    let tail = run.power_tail()?;
    run.require(tail.converged, "tail");
    let e = run.sobolev()?;
    let iq = run.constant("I_q", first_coord_moment(run.chk.q, run.dim())?.value);
    let target = Quantity::of_energy(&e, iq / run.dim() as f64);
    let rel = run.chk.rel_tol;
    run.bound(Comparison::eq(
        "lim sup s·μ == I_q/N·E",
        Quantity::finite(tail.limsup_est, tail.limsup_stderr),
        target,
        rel,
    ));
    run.bound(Comparison::eq(
        "lim inf s·μ == I_q/N·E",
        Quantity::finite(tail.liminf_est, tail.liminf_stderr),
        target,
        rel,
    ));
    run.ratio("limsup_over_energy", tail.limsup_est, &e);
    Ok(())
}

fn main_sandwich(run: &mut Run) -> Result<()> {
    let tail = run.power_tail()?;
    run.require(tail.converged, "tail");
    let e = run.reference_energy()?;
    let n = run.dim() as f64;
    let iq = run.constant("I_q", first_coord_moment(run.chk.q, run.dim())?.value);
    let rel = run.chk.rel_tol;
    let limsup = Quantity::finite(tail.limsup_est, tail.limsup_stderr);
    run.bound(Comparison::le(
        "I_q/(N+q)·E <= lim sup s·μ",
        Quantity::of_energy(&e, iq / (n + run.chk.q)),
        limsup,
        rel,
    ));
    run.bound(Comparison::le(
        "lim sup s·μ <= sup s·μ",
        limsup,
        Quantity::finite(tail.sup_s_mu, tail.sup_stderr),
        rel,
    ));
    run.ratio("sup_over_energy", tail.sup_s_mu, &e);
    run.ratio("limsup_over_energy", tail.limsup_est, &e);
    Ok(())
}

fn constant_detection(run: &mut Run) -> Result<()> {
    let s_grid = run.chk.s_grid.points()?;
    let p = tail_measure_profile(&run.field, &run.domain, run.chk.q, run.chk.r, &s_grid, &run.sampler())?;
    let max_mu = p.mu_hat.iter().copied().fold(0.0, f64::max);
    run.measured.max_mu_hat = Some(max_mu);
    let tail = run.tail(p)?;
    if run.field.is_constant() {
        run.notes.push("constant field: every μ̂ must vanish exactly".into());
        run.bound(Comparison::eq_abs("max μ̂ == 0", max_mu, 0.0, 0.0));
    } else {
        run.require(tail.converged, "tail");
        let threshold = run.chk.tolerances.detection_threshold;
        run.bound(Comparison::le(
            "detection threshold <= lim sup s·μ",
            Quantity::exact(threshold),
            Quantity::finite(tail.limsup_est, tail.limsup_stderr),
            0.0,
        ));
    }
    Ok(())
}

fn general_f(run: &mut Run) -> Result<()> {
    let f = match run.chk.f_cap {
        Some(c) => FSpec::capped(run.chk.q, c),
        None => FSpec::power(run.chk.q),
    };
    let s_grid = run.chk.s_grid.points()?;
    let p = f_tail_profile(&run.field, &run.domain, f, &s_grid, &run.sampler())?;
    let tail = run.tail(p)?;
    run.require(tail.converged, "tail");
    let e = general_f_limit(&run.field, &run.domain, f, &run.energy_cfg())?;
    run.measured.energy = Some(e.clone());
    let target = Quantity::of_energy(&e, 1.0);
    let rel = run.chk.rel_tol;
    run.bound(Comparison::eq(
        "lim sup s·μ_F == limit",
        Quantity::finite(tail.limsup_est, tail.limsup_stderr),
        target,
        rel,
    ));
    run.bound(Comparison::eq(
        "lim inf s·μ_F == limit",
        Quantity::finite(tail.liminf_est, tail.liminf_stderr),
        target,
        rel,
    ));
    Ok(())
}

fn eps_tail_sandwich(run: &mut Run) -> Result<()> {
    let tail = run.power_tail()?;
    let dir = run.directional()?;
    run.require(tail.converged, "tail");
    run.require(dir.converged, "directional");
    let n = run.dim() as f64;
    let r = run.chk.r;
    let rel = run.chk.rel_tol;
    run.bound(Comparison::le(
        "lim inf D_ε <= (N+r)·lim sup s·μ",
        Quantity::finite(dir.liminf_est, dir.liminf_stderr),
        Quantity::finite((n + r) * tail.limsup_est, (n + r) * tail.limsup_stderr),
        rel,
    ));
    run.bound(Comparison::le(
        "N·lim inf s·μ <= lim sup D_ε",
        Quantity::finite(n * tail.liminf_est, n * tail.liminf_stderr),
        Quantity::finite(dir.limsup_est, dir.limsup_stderr),
        rel,
    ));
    Ok(())
}

fn jump_sandwich(run: &mut Run) -> Result<()> {
    let tail = run.power_tail()?;
    run.require(tail.converged, "tail");
    let e = jump_energy(&run.field, &run.domain, run.chk.q)?;
    run.measured.energy = Some(e.clone());
    let n = run.dim() as f64;
    let i1 = run.constant("I_1", first_coord_moment(1.0, run.dim())?.value);
    let middle = Quantity::of_energy(&e, i1);
    let rel = run.chk.rel_tol;
    run.bound(Comparison::le(
        "N·lim inf s·μ <= I_1·J_q",
        Quantity::finite(n * tail.liminf_est, n * tail.liminf_stderr),
        middle,
        rel,
    ));
    run.bound(Comparison::le(
        "I_1·J_q <= (N+1)·lim sup s·μ",
        middle,
        Quantity::finite((n + 1.0) * tail.limsup_est, (n + 1.0) * tail.limsup_stderr),
        rel,
    ));
    Ok(())
}

fn convex_sup_limit(run: &mut Run) -> Result<()> {
    if !run.domain.is_convex() {
        return Err(Error::Unsupported("the convex sup check needs a convex domain".into()));
    }
    let dir = run.directional()?;
    run.require(dir.converged, "directional");
    let rel = run.chk.rel_tol;
    run.bound(Comparison::le(
        "sup_ε D_ε <= lim D_ε",
        Quantity::finite(dir.sup_value, dir.sup_stderr),
        Quantity::finite(dir.limsup_est, dir.limsup_stderr),
        rel,
    ));
    Ok(())
}

fn probe_directions(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let mut rng = substream(derive_seed(seed, SALT_DIRECTIONS), 0);
    (0..PROBE_DIRECTIONS)
        .map(|_| {
            let mut k = vec![0.0; dim];
            uniform_direction(&mut rng, &mut k);
            k
        })
        .collect()
}

fn direction_average_bound(run: &mut Run) -> Result<()> {
    let inner_spec = run.chk.inner.as_ref().ok_or(Error::NotNested)?;
    let inner = Domain::from_spec(inner_spec)?;
    let gap = Domain::dist_to_complement(&inner, &run.domain)?;
    let eps = run.chk.eps_grid.points()?;
    if eps.iter().any(|&e| e >= gap) {
        return Err(Error::param("eps_grid", "every ε must stay below the nesting gap"));
    }
    let dir = run.directional()?;
    run.require(dir.converged, "directional");
    let quad = run.quad();
    let mut sweep = DirectionSweep {
        directions: probe_directions(run.dim(), run.chk.seed),
        limsup: Vec::new(),
        limsup_stderr: Vec::new(),
        converged: Vec::new(),
    };
    for k in &sweep.directions {
        let mut values = Vec::with_capacity(eps.len());
        let mut ci = Vec::with_capacity(eps.len());
        for &e in &eps {
            let est = single_direction_functional(&run.field, &inner, run.chk.q, run.chk.r, e, k, &quad)?;
            values.push(est.value);
            ci.push(est.ci_halfwidth);
        }
        let p = trailing_plateau(&eps, &values, &ci, &run.chk.tolerances.window);
        sweep.limsup.push(p.max);
        sweep.limsup_stderr.push(p.max_stderr);
        sweep.converged.push(p.converged);
    }
    let all = sweep.converged.iter().all(|c| *c);
    run.require(all, "single-direction");
    let (imax, lhs) =
        sweep.limsup.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
    let lhs_err = sweep.limsup_stderr[imax];
    run.measured.directions = Some(sweep);
    let n = run.dim() as f64;
    let c = (2f64).powf(n + run.chk.q) / ((n - 1.0 + run.chk.r) * unit_ball_volume(run.dim())?);
    let c = run.constant("direction_constant", c);
    let rel = run.chk.rel_tol;
    run.bound(Comparison::le(
        "max_k lim sup ∫|Δ_εk u|^q/ε^r <= C·lim sup D_ε",
        Quantity::finite(lhs, lhs_err),
        Quantity::finite(c * dir.limsup_est, c * dir.limsup_stderr),
        rel,
    ));
    if dir.limsup_est > 0.0 {
        run.measured
            .ratios
            .insert("lhs_over_rhs".into(), lhs / (c * dir.limsup_est));
    }
    Ok(())
}

fn besov_equivalence(run: &mut Run) -> Result<()> {
    let eps = run.chk.eps_grid.points()?;
    let d = besov_diagnostic(
        &run.field,
        &run.domain,
        run.chk.q,
        run.chk.r,
        &eps,
        &run.quad(),
        &run.chk.tolerances.besov,
    )?;
    let expected = run.field.expected_besov_bounded(run.chk.q, run.chk.r);
    let trend = run.field.expected_directional_slope(run.chk.q, run.chk.r);
    run.measured.besov = Some(BesovReading {
        bounded: d.bounded,
        expected_bounded: expected,
        trend_exponent: d.trend_exponent,
        expected_trend: trend,
        window: d.window,
    });
    run.profiles
        .push(("directional".into(), Profile::Directional(d.profile)));
    match expected {
        Some(b) => run.bound(Comparison::eq_abs(
            "bounded == expected",
            d.bounded as u8 as f64,
            b as u8 as f64,
            0.0,
        )),
        None => {
            run.unsettled = true;
            run.notes.push("no predicted Besov class for this field".into());
        }
    }
    if let (Some(t), false) = (trend, d.bounded) {
        run.bound(Comparison::eq_abs(
            "trend exponent == predicted",
            d.trend_exponent,
            t,
            SLOPE_TOLERANCE,
        ));
    }
    Ok(())
}

/// Runs one resolved check. Engine errors produce an inconclusive record
/// that names the error; they never count as a failed bound.
pub fn run_check(chk: &TheoremCheck) -> CheckRecord {
    let built = Field::build(&chk.field).and_then(|f| Ok((f, Domain::from_spec(&chk.domain)?)));
    let (field, domain) = match built {
        Ok(x) => x,
        Err(e) => return error_record(chk, e),
    };
    let mut run = Run {
        chk,
        field,
        domain,
        measured: Measured::default(),
        bounds: Vec::new(),
        notes: Vec::new(),
        profiles: Vec::new(),
        unsettled: false,
    };
    let outcome = match chk.theorem_id {
        TheoremId::BsvySupBounds => bsvy_sup_bounds(&mut run),
        TheoremId::LimitIdentity => limit_identity(&mut run),
        TheoremId::MainSandwich => main_sandwich(&mut run),
        TheoremId::ConstantDetection => constant_detection(&mut run),
        TheoremId::GeneralFLimit => general_f(&mut run),
        TheoremId::EpsTailSandwich => eps_tail_sandwich(&mut run),
        TheoremId::JumpSandwich => jump_sandwich(&mut run),
        TheoremId::ConvexSupLimit => convex_sup_limit(&mut run),
        TheoremId::DirectionAverageBound => direction_average_bound(&mut run),
        TheoremId::BesovEquivalence => besov_equivalence(&mut run),
    };
    if let Err(e) = outcome {
        run.unsettled = true;
        run.notes.push(format!("engine error: {e}"));
    }
    let verdict = if run.unsettled {
        Verdict::Inconclusive
    } else if run.bounds.iter().all(|b| b.holds) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    CheckRecord {
        name: chk.name.clone(),
        theorem_id: chk.theorem_id,
        inputs: chk.clone(),
        measured: run.measured,
        margins: run.bounds.iter().map(|b| b.margin).collect(),
        bounds: run.bounds,
        verdict,
        notes: run.notes,
        profiles: run.profiles,
    }
}

fn error_record(chk: &TheoremCheck, e: Error) -> CheckRecord {
    CheckRecord {
        name: chk.name.clone(),
        theorem_id: chk.theorem_id,
        inputs: chk.clone(),
        measured: Measured::default(),
        bounds: Vec::new(),
        margins: Vec::new(),
        verdict: Verdict::Inconclusive,
        notes: vec![format!("engine error: {e}")],
        profiles: Vec::new(),
    }
}

/// Validates the whole configuration first, then runs every check.
pub fn run_suite(cfg: &RunConfig) -> std::result::Result<ExperimentReport, ConfigErrors> {
    cfg.validate()?;
    let start = Instant::now();
    let checks = cfg.theorem_checks();
    let records = run_all(&checks, cfg.parallel_checks);
    Ok(ExperimentReport {
        meta: ReportMeta {
            version: cfg.version,
            seed: cfg.seed,
            budgets: cfg.budgets,
            runtime_s: start.elapsed().as_secs_f64(),
        },
        checks: records,
    })
}

#[cfg(feature = "parallel")]
fn run_all(checks: &[TheoremCheck], parallel: bool) -> Vec<CheckRecord> {
    use rayon::prelude::*;
    if parallel {
        checks.par_iter().map(run_check).collect()
    } else {
        checks.iter().map(run_check).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all(checks: &[TheoremCheck], _parallel: bool) -> Vec<CheckRecord> {
    checks.iter().map(run_check).collect()
}
