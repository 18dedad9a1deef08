//! Named fields and domains for the one-shot subcommands. Any argument that
//! starts with `{` is parsed as a JSON spec instead.

use weaklab::fields::{Components, FieldSpec, Slope};
use weaklab::DomainSpec;

use crate::CliError;

pub const FIELD_NAMES: &str = "linear, gaussian, constant, step, cusp, power";
pub const DOMAIN_NAMES: &str = "unit, sym, ball";

fn unit_vector(dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = 1.0;
    v
}

pub fn field(arg: &str, dim: usize) -> Result<FieldSpec, CliError> {
    if arg.trim_start().starts_with('{') {
        return serde_json::from_str(arg).map_err(|e| CliError::Config(format!("--field: {e}")));
    }
    if dim == 0 {
        return Err(CliError::Config("--dim must be positive".into()));
    }
    let spec = match arg {
        "linear" => FieldSpec::Linear {
            slope: Slope::Vector(unit_vector(dim)),
            offset: None,
        },
        "gaussian" => FieldSpec::Gaussian {
            center: vec![0.0; dim],
            amplitude: Components::Scalar(1.0),
            width: 1.0,
        },
        "constant" => FieldSpec::Constant {
            dim,
            value: Components::Scalar(1.0),
        },
        "step" => FieldSpec::Step {
            normal: unit_vector(dim),
            offset: 0.5,
            jump: Components::Scalar(1.0),
            base: None,
        },
        "cusp" => FieldSpec::Cusp {
            center: vec![0.0; dim],
            exponent: 0.5,
            support_lo: vec![-1.0; dim],
            support_hi: vec![1.0; dim],
        },
        "power" => FieldSpec::PowerSingularity {
            center: vec![0.0; dim],
            exponent: 0.125,
            support_lo: vec![-1.0; dim],
            support_hi: vec![1.0; dim],
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown field `{other}` (expected one of {FIELD_NAMES}, or a JSON spec)"
            )))
        }
    };
    Ok(spec)
}

pub fn domain(arg: &str, dim: usize) -> Result<DomainSpec, CliError> {
    if arg.trim_start().starts_with('{') {
        return serde_json::from_str(arg).map_err(|e| CliError::Config(format!("--domain: {e}")));
    }
    let spec = match arg {
        "unit" => DomainSpec::Box {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        },
        "sym" => DomainSpec::Box {
            lo: vec![-1.0; dim],
            hi: vec![1.0; dim],
        },
        "ball" => DomainSpec::Ball {
            center: vec![0.0; dim],
            radius: 1.0,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown domain `{other}` (expected one of {DOMAIN_NAMES}, or a JSON spec)"
            )))
        }
    };
    Ok(spec)
}
