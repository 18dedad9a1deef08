//! Trailing plateau windows: the finite-data stand-in for lim sup / lim inf.
//!
//! Profiles are ordered so that the last entry is closest to the limit
//! (largest s for tail profiles, smallest ε for directional ones).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    /// Largest accepted relative spread over the window.
    pub tolerance: f64,
    /// Minimum span of the window in decades of the grid parameter.
    pub min_decades: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            tolerance: 0.02,
            min_decades: 1.0,
        }
    }
}

/// Geometric parameter grid from `start` to `stop` (either order) with
/// `per_decade` points per factor of ten.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    #[serde(default = "default_per_decade")]
    pub per_decade: usize,
}

fn default_per_decade() -> usize {
    4
}

impl GridConfig {
    pub fn new(start: f64, stop: f64, per_decade: usize) -> GridConfig {
        GridConfig {
            start,
            stop,
            per_decade,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0 && self.stop > 0.0 && self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::param("grid", "endpoints must be positive and finite"));
        }
        if self.per_decade == 0 {
            return Err(Error::param("per_decade", "must be positive"));
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let span = (self.stop / self.start).log10();
        let steps = (span.abs() * self.per_decade as f64 - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 {
            return Ok(vec![self.start]);
        }
        Ok((0..=steps)
            .map(|k| {
                if k == steps {
                    self.stop
                } else {
                    self.start * 10f64.powf(span * k as f64 / steps as f64)
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plateau {
    /// First index of the window; the window always extends to the end.
    pub start: usize,
    pub end: usize,
    pub max: f64,
    pub min: f64,
    /// One-sigma error of the entries attaining `max` and `min`.
    pub max_stderr: f64,
    pub min_stderr: f64,
    pub spread: f64,
    pub converged: bool,
}

/// Relative spread left after each entry is allowed to move by its
/// half-width.
fn ci_spread(values: &[f64], halfwidths: &[f64]) -> f64 {
    let hi = values
        .iter()
        .zip(halfwidths)
        .map(|(v, c)| v - c)
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = values
        .iter()
        .zip(halfwidths)
        .map(|(v, c)| v + c)
        .fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let excess = (hi - lo).max(0.0);
    if excess == 0.0 {
        0.0
    } else if mean.abs() > 0.0 {
        excess / mean.abs()
    } else {
        f64::INFINITY
    }
}

fn decades(a: f64, b: f64) -> f64 {
    (b / a).log10().abs()
}

/// Largest trailing window spanning at least `min_decades` whose spread is
/// within tolerance. If none qualifies the shortest qualifying-length window
/// is returned with `converged = false`.
pub fn trailing_plateau(params: &[f64], values: &[f64], halfwidths: &[f64], cfg: &WindowConfig) -> Plateau {
    let n = values.len();
    assert!(n > 0 && params.len() == n && halfwidths.len() == n);
    let last = n - 1;
    // Starting indices whose suffix spans enough decades.
    let long_enough = |i: usize| decades(params[i], params[last]) >= cfg.min_decades - 1e-9;
    let latest_start = (0..n).rev().find(|&i| long_enough(i));

    let mut chosen = None;
    if let Some(latest) = latest_start {
        for start in 0..=latest {
            let s = ci_spread(&values[start..], &halfwidths[start..]);
            if s <= cfg.tolerance {
                chosen = Some((start, s, true));
                break;
            }
        }
    }
    let (start, spread, converged) = chosen.unwrap_or_else(|| {
        let start = latest_start.unwrap_or(0);
        (start, ci_spread(&values[start..], &halfwidths[start..]), false)
    });

    let (mut imax, mut imin) = (start, start);
    for i in start..n {
        if values[i] > values[imax] {
            imax = i;
        }
        if values[i] < values[imin] {
            imin = i;
        }
    }
    Plateau {
        start,
        end: n,
        max: values[imax],
        min: values[imin],
        max_stderr: halfwidths[imax] / 3.0,
        min_stderr: halfwidths[imin] / 3.0,
        spread,
        converged,
    }
}

/// Least-squares slope of ln(value) against ln(param) over `range`,
/// skipping non-positive values. `None` when fewer than two usable points.
pub fn log_log_slope(params: &[f64], values: &[f64], range: std::ops::Range<usize>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = range
        .filter(|&i| values[i] > 0.0 && params[i] > 0.0)
        .map(|i| (params[i].ln(), values[i].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 10f64.powf(i as f64 / 4.0)).collect()
    }

    #[test]
    fn flat_profile_converges_on_whole_grid() {
        let p = grid(9);
        let v = vec![2.0; 9];
        let w = plateau_of(&p, &v);
        assert!(w.converged);
        assert_eq!(w.start, 0);
        assert_eq!(w.max, 2.0);
        assert_eq!(w.min, 2.0);
    }

    fn plateau_of(p: &[f64], v: &[f64]) -> Plateau {
        trailing_plateau(p, v, &vec![0.0; v.len()], &WindowConfig::default())
    }

    #[test]
    fn approach_profile_picks_tail() {
        let p = grid(13);
        let v: Vec<f64> = p.iter().map(|s| 2.0 - 1.0 / s).collect();
        let w = plateau_of(&p, &v);
        assert!(w.converged);
        // 2 - 1/s is flat to 2% from s ≈ 10^1.5 onward
        assert!(w.start >= 3 && w.start <= 8, "start {}", w.start);
        assert!((w.max - 2.0).abs() < 0.01);
    }

    #[test]
    fn growing_profile_does_not_converge() {
        let p = grid(13);
        let v: Vec<f64> = p.iter().map(|s| s.powf(0.3)).collect();
        let w = plateau_of(&p, &v);
        assert!(!w.converged);
        assert_eq!(w.start, 8);
    }

    #[test]
    fn zero_profile_converges() {
        let p = grid(8);
        let w = plateau_of(&p, &[0.0; 8]);
        assert!(w.converged);
        assert_eq!(w.spread, 0.0);
    }

    #[test]
    fn halfwidths_absorb_noise() {
        let p = grid(9);
        let v = [1.0, 1.1, 0.9, 1.05, 0.95, 1.0, 1.08, 0.92, 1.0];
        let tight = trailing_plateau(&p, &v, &[0.0; 9], &WindowConfig::default());
        assert!(!tight.converged);
        let loose = trailing_plateau(&p, &v, &[0.1; 9], &WindowConfig::default());
        assert!(loose.converged);
    }

    #[test]
    fn grid_points() {
        let g = GridConfig::new(10.0, 1000.0, 4).points().unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 10.0);
        assert_eq!(g[8], 1000.0);
        assert!((g[4] - 100.0).abs() < 1e-12);
        let d = GridConfig::new(0.1, 0.001, 4).points().unwrap();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        assert!(GridConfig::new(0.0, 1.0, 4).points().is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let p = grid(9);
        let v: Vec<f64> = p.iter().map(|e| 3.0 * e.powf(-0.25)).collect();
        let slope = log_log_slope(&p, &v, 0..9).unwrap();
        assert!((slope + 0.25).abs() < 1e-12);
    }
}
