//! Experiment files: a strict JSON schema with every validation error
//! reported together with its path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::directional::BesovConfig;
use crate::domains::{Domain, DomainSpec};
use crate::fields::{Field, FieldKind, FieldSpec};
use crate::plateau::{GridConfig, WindowConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "bsvy-sup-bounds")]
    BsvySupBounds,
    #[serde(rename = "limit-identity")]
    LimitIdentity,
    #[serde(rename = "main-sandwich")]
    MainSandwich,
    #[serde(rename = "constant-detection")]
    ConstantDetection,
    #[serde(rename = "general-F-limit")]
    GeneralFLimit,
    #[serde(rename = "eps-tail-sandwich")]
    EpsTailSandwich,
    #[serde(rename = "jump-sandwich")]
    JumpSandwich,
    #[serde(rename = "convex-sup-limit")]
    ConvexSupLimit,
    #[serde(rename = "direction-average-bound")]
    DirectionAverageBound,
    #[serde(rename = "besov-equivalence")]
    BesovEquivalence,
}

impl TheoremId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::BsvySupBounds => "bsvy-sup-bounds",
            TheoremId::LimitIdentity => "limit-identity",
            TheoremId::MainSandwich => "main-sandwich",
            TheoremId::ConstantDetection => "constant-detection",
            TheoremId::GeneralFLimit => "general-F-limit",
            TheoremId::EpsTailSandwich => "eps-tail-sandwich",
            TheoremId::JumpSandwich => "jump-sandwich",
            TheoremId::ConvexSupLimit => "convex-sup-limit",
            TheoremId::DirectionAverageBound => "direction-average-bound",
            TheoremId::BesovEquivalence => "besov-equivalence",
        }
    }

    fn uses_tail(&self) -> bool {
        !matches!(
            self,
            TheoremId::ConvexSupLimit | TheoremId::DirectionAverageBound | TheoremId::BesovEquivalence
        )
    }

    fn uses_directional(&self) -> bool {
        matches!(
            self,
            TheoremId::EpsTailSandwich
                | TheoremId::ConvexSupLimit
                | TheoremId::DirectionAverageBound
                | TheoremId::BesovEquivalence
        )
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Pairs drawn by the tail estimator.
    pub pairs: u64,
    /// Spatial samples of the directional functionals.
    pub spatial: u64,
    /// Angles of the circle rule (N = 2).
    pub sphere_resolution: usize,
    /// Spatial samples of Monte Carlo energies.
    pub energy: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            pairs: 1_000_000,
            spatial: 200_000,
            sphere_resolution: 256,
            energy: 1_000_000,
        }
    }
}

/// Per-check budget overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetOverrides {
    pub pairs: Option<u64>,
    pub spatial: Option<u64>,
    pub sphere_resolution: Option<usize>,
    pub energy: Option<u64>,
}

impl Budgets {
    fn with(&self, o: &Option<BudgetOverrides>) -> Budgets {
        let Some(o) = o else { return *self };
        Budgets {
            pairs: o.pairs.unwrap_or(self.pairs),
            spatial: o.spatial.unwrap_or(self.spatial),
            sphere_resolution: o.sphere_resolution.unwrap_or(self.sphere_resolution),
            energy: o.energy.unwrap_or(self.energy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative tolerance of identity checks.
    pub identity_rel_tol: f64,
    /// Relative tolerance of inequality checks.
    pub inequality_rel_tol: f64,
    /// Trailing s·μ̂ a non-constant field must exceed.
    pub detection_threshold: f64,
    pub window: WindowConfig,
    pub besov: BesovConfig,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity_rel_tol: 0.05,
            inequality_rel_tol: 0.02,
            detection_threshold: 0.1,
            window: WindowConfig::default(),
            besov: BesovConfig::default(),
        }
    }
}

fn default_s_grid() -> GridConfig {
    GridConfig::new(10.0, 1000.0, 4)
}

fn default_eps_grid() -> GridConfig {
    GridConfig::new(0.1, 0.001, 4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub theorem: TheoremId,
    #[serde(default)]
    pub name: Option<String>,
    pub field: String,
    pub domain: String,
    /// Inner domain of the direction-vs-average bound.
    #[serde(default)]
    pub inner: Option<String>,
    pub q: f64,
    /// Defaults to q, or 1 for the jump sandwich.
    #[serde(default)]
    pub r: Option<f64>,
    /// Cap c of F(a) = min(|a|^q, c) for the general-F limit.
    #[serde(default)]
    pub f_cap: Option<f64>,
    #[serde(default)]
    pub s_grid: Option<GridConfig>,
    #[serde(default)]
    pub eps_grid: Option<GridConfig>,
    #[serde(default)]
    pub budgets: Option<BudgetOverrides>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldSpec>,
    #[serde(default)]
    pub domains: BTreeMap<String, DomainSpec>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_s_grid")]
    pub s_grid: GridConfig,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
    #[serde(default)]
    pub parallel_checks: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    fn single(path: impl Into<String>, message: impl Into<String>) -> ConfigErrors {
        ConfigErrors(vec![ConfigError {
            path: path.into(),
            message: message.into(),
        }])
    }
}

/// A check with names resolved and all defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub name: String,
    pub theorem_id: TheoremId,
    pub field: FieldSpec,
    pub domain: DomainSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<DomainSpec>,
    pub q: f64,
    pub r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_cap: Option<f64>,
    pub s_grid: GridConfig,
    pub eps_grid: GridConfig,
    pub budgets: Budgets,
    pub tolerances: Tolerances,
    pub rel_tol: f64,
    pub seed: u64,
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigErrors> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigErrors::single(
            if path == "." { String::new() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigErrors> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigErrors::single(path.display().to_string(), e.to_string()))?;
    parse_config_str(&text)
}

struct Collector(Vec<ConfigError>);

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn grid(&mut self, path: &str, g: &GridConfig) {
        if let Err(e) = g.points() {
            self.push(path, e.to_string());
        }
    }
}

impl RunConfig {
    /// Collects every validation error instead of stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut c = Collector(Vec::new());
        if self.version != CONFIG_VERSION {
            c.push(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            );
        }
        let mut fields = BTreeMap::new();
        for (name, spec) in &self.fields {
            match Field::build(spec) {
                Ok(f) => {
                    fields.insert(name.as_str(), f);
                }
                Err(e) => c.push(format!("fields.{name}"), e.to_string()),
            }
        }
        let mut domains = BTreeMap::new();
        for (name, spec) in &self.domains {
            match Domain::from_spec(spec) {
                Ok(d) => {
                    domains.insert(name.as_str(), d);
                }
                Err(e) => c.push(format!("domains.{name}"), e.to_string()),
            }
        }
        let b = &self.budgets;
        for (key, v) in [("pairs", b.pairs), ("spatial", b.spatial), ("energy", b.energy)] {
            if v == 0 {
                c.push(format!("budgets.{key}"), "must be positive");
            }
        }
        if b.sphere_resolution < 4 {
            c.push("budgets.sphere_resolution", "must be at least 4");
        }
        c.grid("s_grid", &self.s_grid);
        c.grid("eps_grid", &self.eps_grid);
        let t = &self.tolerances;
        for (key, v) in [
            ("identity_rel_tol", t.identity_rel_tol),
            ("inequality_rel_tol", t.inequality_rel_tol),
            ("detection_threshold", t.detection_threshold),
            ("window.tolerance", t.window.tolerance),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                c.push(format!("tolerances.{key}"), "must be a nonnegative number");
            }
        }
        if !(t.window.min_decades > 0.0) {
            c.push("tolerances.window.min_decades", "must be positive");
        }

        for (i, chk) in self.checks.iter().enumerate() {
            let p = |k: &str| format!("checks[{i}].{k}");
            if !(chk.q >= 1.0) || !chk.q.is_finite() {
                c.push(p("q"), "q must be ≥ 1");
            }
            if let Some(r) = chk.r {
                if !(r > 0.0) || !r.is_finite() {
                    c.push(p("r"), "r must be > 0");
                }
            }
            let r = resolved_r(chk);
            let field = fields.get(chk.field.as_str());
            if field.is_none() && !self.fields.contains_key(&chk.field) {
                c.push(p("field"), format!("unknown field `{}`", chk.field));
            }
            let domain = domains.get(chk.domain.as_str());
            if domain.is_none() && !self.domains.contains_key(&chk.domain) {
                c.push(p("domain"), format!("unknown domain `{}`", chk.domain));
            }
            if let (Some(f), Some(d)) = (field, domain) {
                if f.dim() != d.dim() {
                    c.push(
                        p("field"),
                        format!("field has dimension {} but the domain has {}", f.dim(), d.dim()),
                    );
                }
            }
            if let Some(g) = &chk.s_grid {
                c.grid(&p("s_grid"), g);
            }
            if let Some(g) = &chk.eps_grid {
                c.grid(&p("eps_grid"), g);
            }
            if let Some(t) = chk.rel_tol {
                if !(t >= 0.0) {
                    c.push(p("rel_tol"), "must be nonnegative");
                }
            }
            let s_len = chk.s_grid.unwrap_or(self.s_grid).points().map(|v| v.len()).unwrap_or(0);
            if chk.theorem.uses_tail() && s_len > 0 && s_len < 8 {
                c.push(p("s_grid"), "need at least 8 thresholds");
            }
            if chk.theorem.uses_directional() {
                if let (Ok(eps), Some(d)) = (chk.eps_grid.unwrap_or(self.eps_grid).points(), domain) {
                    if eps.windows(2).any(|w| !(w[1] < w[0])) {
                        c.push(p("eps_grid"), "must be decreasing (start > stop)");
                    }
                    if eps.iter().any(|&e| e >= d.diameter()) {
                        c.push(p("eps_grid"), "every ε must stay below the domain diameter");
                    }
                }
            }
            if matches!(
                chk.theorem,
                TheoremId::BsvySupBounds | TheoremId::LimitIdentity | TheoremId::MainSandwich
            ) && r != chk.q
            {
                c.push(p("r"), "this statement is for r = q");
            }
            if chk.theorem == TheoremId::GeneralFLimit && chk.r.is_some() {
                c.push(p("r"), "the general-F kernel has no r");
            }
            match chk.theorem {
                TheoremId::JumpSandwich => {
                    if let Some(f) = field {
                        if f.jump().is_none() {
                            c.push(p("field"), "the jump sandwich needs a field with a jump set");
                        }
                    }
                    if r != 1.0 {
                        c.push(p("r"), "the jump sandwich is stated for r = 1");
                    }
                }
                TheoremId::ConvexSupLimit => {
                    if let Some(d) = domain {
                        if !d.is_convex() {
                            c.push(p("domain"), "the convex sup check needs a convex domain");
                        }
                    }
                }
                TheoremId::DirectionAverageBound => match &chk.inner {
                    None => c.push(p("inner"), "the direction-average bound needs an inner domain"),
                    Some(name) => match domains.get(name.as_str()) {
                        None => {
                            if !self.domains.contains_key(name) {
                                c.push(p("inner"), format!("unknown domain `{name}`"));
                            }
                        }
                        Some(inner) => {
                            if let Some(outer) = domain {
                                match Domain::dist_to_complement(inner, outer) {
                                    Ok(d) if d > 0.0 => {
                                        if let Ok(eps) = chk.eps_grid.unwrap_or(self.eps_grid).points() {
                                            if eps.iter().any(|&e| e >= d) {
                                                c.push(
                                                    p("eps_grid"),
                                                    format!("every ε must stay below the nesting gap {d}"),
                                                );
                                            }
                                        }
                                    }
                                    Ok(_) => c.push(p("inner"), "inner domain touches the boundary of the outer one"),
                                    Err(e) => c.push(p("inner"), e.to_string()),
                                }
                            }
                        }
                    },
                },
                TheoremId::BesovEquivalence => {
                    if !(r > 0.0 && r < chk.q) {
                        c.push(p("r"), "the Besov diagnostic needs 0 < r < q");
                    }
                    if let Ok(eps) = chk.eps_grid.unwrap_or(self.eps_grid).points() {
                        if eps.len() < 6 {
                            c.push(p("eps_grid"), "need at least 6 points");
                        }
                    }
                }
                TheoremId::GeneralFLimit => {
                    if let Some(cap) = chk.f_cap {
                        if !(cap >= 0.0) {
                            c.push(p("f_cap"), "must be nonnegative");
                        }
                    }
                    if let Some(f) = field {
                        if matches!(f.kind(), FieldKind::Step) && !f.is_constant() {
                            c.push(p("field"), "the general-F limit needs a W^{1,q} field");
                        }
                    }
                }
                _ => {}
            }
            if chk.theorem != TheoremId::GeneralFLimit && chk.f_cap.is_some() {
                c.push(p("f_cap"), "only used by general-F-limit");
            }
            if chk.theorem != TheoremId::DirectionAverageBound && chk.inner.is_some() {
                c.push(p("inner"), "only used by direction-average-bound");
            }
        }
        if c.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(c.0))
        }
    }

    /// Resolved checks, in file order.
    pub fn theorem_checks(&self) -> Vec<TheoremCheck> {
        self.checks
            .iter()
            .enumerate()
            .map(|(i, chk)| {
                let rel_tol = chk.rel_tol.unwrap_or(match chk.theorem {
                    TheoremId::LimitIdentity | TheoremId::GeneralFLimit => self.tolerances.identity_rel_tol,
                    _ => self.tolerances.inequality_rel_tol,
                });
                TheoremCheck {
                    name: chk
                        .name
                        .clone()
                        .unwrap_or_else(|| format!("{i:02}-{}-{}", chk.theorem, chk.field)),
                    theorem_id: chk.theorem,
                    field: self.fields[&chk.field].clone(),
                    domain: self.domains[&chk.domain].clone(),
                    inner: chk.inner.as_ref().map(|n| self.domains[n].clone()),
                    q: chk.q,
                    r: resolved_r(chk),
                    f_cap: chk.f_cap,
                    s_grid: chk.s_grid.unwrap_or(self.s_grid),
                    eps_grid: chk.eps_grid.unwrap_or(self.eps_grid),
                    budgets: self.budgets.with(&chk.budgets),
                    tolerances: self.tolerances,
                    rel_tol,
                    seed: chk.seed.unwrap_or_else(|| crate::rng::derive_seed(self.seed, i as u64)),
                }
            })
            .collect()
    }
}

fn resolved_r(chk: &CheckConfig) -> f64 {
    chk.r.unwrap_or(match chk.theorem {
        TheoremId::JumpSandwich => 1.0,
        _ => chk.q,
    })
}
