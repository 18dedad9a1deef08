//! wasm-bindgen entry points for the browser demo in `www/`. Every export takes
//! JSON specs as strings and returns a JSON string.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde_json::json;
use wasm_bindgen::prelude::*;

use weaklab::constants::{bbm_constant, first_coord_moment, sphere_surface_area, unit_ball_volume};
use weaklab::directional::{directional_profile, directional_summary, QuadConfig};
use weaklab::plateau::{GridConfig, WindowConfig};
use weaklab::tail::{tail_measure_profile, tail_summary, SamplerConfig};
use weaklab::{Domain, DomainSpec, Field, FieldSpec};

/// Browsers run single-threaded, so budgets are capped well below the CLI's.
pub const MAX_PAIRS: u64 = 2_000_000;
pub const MAX_SPATIAL: u64 = 400_000;

fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("{what}: {e}"))
}

fn setup(field: &str, domain: &str) -> Result<(Field, Domain), String> {
    let f: FieldSpec = parse("field", field)?;
    let d: DomainSpec = parse("domain", domain)?;
    let f = Field::build(&f).map_err(|e| e.to_string())?;
    let d = Domain::from_spec(&d).map_err(|e| e.to_string())?;
    if f.dim() != d.dim() {
        return Err(format!(
            "field is {}-dimensional but the domain is {}-dimensional",
            f.dim(),
            d.dim()
        ));
    }
    Ok((f, d))
}

fn budget(what: &str, got: f64, max: u64) -> Result<u64, String> {
    if !(got >= 1.0) || got > max as f64 {
        return Err(format!("{what} must be between 1 and {max}"));
    }
    Ok(got as u64)
}

pub fn constants_json(dim: usize, q: f64) -> Result<String, String> {
    let err = |e: weaklab::Error| e.to_string();
    Ok(json!({
        "N": dim,
        "q": q,
        "I_q": first_coord_moment(q, dim).map_err(err)?.value,
        "K_qN": bbm_constant(q, dim).map_err(err)?,
        "sphere_area": sphere_surface_area(dim).map_err(err)?,
        "ball_volume": unit_ball_volume(dim).map_err(err)?,
    })
    .to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn tail_json(
    field: &str,
    domain: &str,
    q: f64,
    r: f64,
    s_min: f64,
    s_max: f64,
    pairs: f64,
    seed: u64,
) -> Result<String, String> {
    let (f, d) = setup(field, domain)?;
    let s = GridConfig::new(s_min, s_max, 4).points().map_err(|e| e.to_string())?;
    let sampler = SamplerConfig::new(budget("pairs", pairs, MAX_PAIRS)?, seed);
    let p = tail_measure_profile(&f, &d, q, r, &s, &sampler).map_err(|e| e.to_string())?;
    let summary = tail_summary(&p, &WindowConfig::default()).ok();
    Ok(json!({
        "x": p.s_grid,
        "y": p.s_mu,
        "halfwidth": p.s_mu_halfwidth(),
        "summary": summary,
    })
    .to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn directional_json(
    field: &str,
    domain: &str,
    q: f64,
    r: f64,
    eps_max: f64,
    eps_min: f64,
    spatial: f64,
    seed: u64,
) -> Result<String, String> {
    let (f, d) = setup(field, domain)?;
    let eps = GridConfig::new(eps_max, eps_min, 4)
        .points()
        .map_err(|e| e.to_string())?;
    let mut quad = QuadConfig::new(budget("spatial samples", spatial, MAX_SPATIAL)?, seed);
    quad.sphere_resolution = 64;
    let p = directional_profile(&f, &d, q, r, &eps, &quad).map_err(|e| e.to_string())?;
    let summary = directional_summary(&p, &WindowConfig::default());
    Ok(json!({
        "x": p.eps_grid,
        "y": p.values,
        "halfwidth": p.ci_halfwidth,
        "summary": summary,
    })
    .to_string())
}

/// `{"N", "q", "I_q", "K_qN", "sphere_area", "ball_volume"}`.
#[wasm_bindgen]
pub fn constants(dim: usize, q: f64) -> Result<String, JsError> {
    constants_json(dim, q).map_err(|e| JsError::new(&e))
}

/// s·μ(s) over a geometric grid, with 3σ half-widths and the trailing-window summary.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn tail_profile(
    field: &str,
    domain: &str,
    q: f64,
    r: f64,
    s_min: f64,
    s_max: f64,
    pairs: f64,
    seed: u32,
) -> Result<String, JsError> {
    tail_json(field, domain, q, r, s_min, s_max, pairs, seed as u64).map_err(|e| JsError::new(&e))
}

/// D_{ε,r} for ε from `eps_max` down to `eps_min`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn directional(
    field: &str,
    domain: &str,
    q: f64,
    r: f64,
    eps_max: f64,
    eps_min: f64,
    spatial: f64,
    seed: u32,
) -> Result<String, JsError> {
    directional_json(field, domain, q, r, eps_max, eps_min, spatial, seed as u64).map_err(|e| JsError::new(&e))
}
