//! Run configuration: JSON file plus flat flag overrides.
//!
//! Unknown keys are rejected; flags take precedence over file values; every
//! resolved field is validated before any computation starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CpsError, Result};
use crate::lattice::{Boundary, LatticeSpec};
use crate::rates::{preset, BaseRates, Preset, RateSet};
use crate::render::SvgStyle;

/// Raw configuration as written in a file or collected from flags. All
/// fields optional; merging fills gaps.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub lambda: Option<f64>,
    /// Shorthand setting both recovery rates.
    pub delta: Option<f64>,
    pub delta_a: Option<f64>,
    pub delta_d: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    /// Explicit full rate set; overrides the preset fields.
    pub rates: Option<RateSet>,
    /// One-dimensional ring length shorthand.
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub boundary: Option<Boundary>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub seed: Option<u64>,
    pub replicas: Option<u32>,
    pub sample_points: Option<usize>,
    pub lambda_grid: Option<Vec<f64>>,
    pub horizons: Option<Vec<f64>>,
    pub x0: Option<Vec<usize>>,
    pub a0: Option<Vec<usize>>,
    pub threshold: Option<f64>,
    pub bracket: Option<[f64; 2]>,
    pub instances: Option<u32>,
    pub style: Option<SvgStyle>,
    pub out: Option<String>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CpsError::invalid(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CpsError::invalid(format!("config {}: {e}", path.display())))
    }

    /// Overlays `self` (flags) on `base` (file): present flag values win.
    pub fn over(self, base: RawConfig) -> RawConfig {
        RawConfig {
            preset: self.preset.or(base.preset),
            lambda: self.lambda.or(base.lambda),
            delta: self.delta.or(base.delta),
            delta_a: self.delta_a.or(base.delta_a),
            delta_d: self.delta_d.or(base.delta_d),
            sigma: self.sigma.or(base.sigma),
            rho: self.rho.or(base.rho),
            rates: self.rates.or(base.rates),
            l: self.l.or(base.l),
            dims: self.dims.or(base.dims),
            boundary: self.boundary.or(base.boundary),
            t: self.t.or(base.t),
            seed: self.seed.or(base.seed),
            replicas: self.replicas.or(base.replicas),
            sample_points: self.sample_points.or(base.sample_points),
            lambda_grid: self.lambda_grid.or(base.lambda_grid),
            horizons: self.horizons.or(base.horizons),
            x0: self.x0.or(base.x0),
            a0: self.a0.or(base.a0),
            threshold: self.threshold.or(base.threshold),
            bracket: self.bracket.or(base.bracket),
            instances: self.instances.or(base.instances),
            style: self.style.or(base.style),
            out: self.out.or(base.out),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub lattice: LatticeSpec,
    pub rates: RateSet,
    pub horizon: f64,
    pub seed: u64,
    pub replicas: u32,
    pub sample_points: usize,
    pub lambda_grid: Vec<f64>,
    pub horizons: Vec<f64>,
    pub x0: Vec<usize>,
    pub a0: Option<Vec<usize>>,
    pub threshold: f64,
    pub bracket: Option<(f64, f64)>,
    pub instances: u32,
    pub style: SvgStyle,
    pub out: Option<String>,
}

fn require_nonneg(name: &str, v: Option<f64>) -> Result<()> {
    if let Some(v) = v {
        if !v.is_finite() || v < 0.0 {
            return Err(CpsError::invalid(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(())
}

/// Resolves a merged raw configuration, applying defaults and validating
/// every field. Defaults: periodic nearest-neighbor ring of 100 sites,
/// `sigma = rho = 1`, seed 1, 100 replicas, origin infection.
pub fn resolve(raw: &RawConfig) -> Result<RunConfig> {
    for (name, v) in [
        ("lambda", raw.lambda),
        ("delta", raw.delta),
        ("delta_a", raw.delta_a),
        ("delta_d", raw.delta_d),
        ("sigma", raw.sigma),
        ("rho", raw.rho),
        ("threshold", raw.threshold),
    ] {
        require_nonneg(name, v)?;
    }

    let lattice = if let Some(dims) = &raw.dims {
        let boundary = raw.boundary.unwrap_or(Boundary::Periodic);
        let mut spec = LatticeSpec::torus(dims.clone());
        spec.boundary = boundary;
        spec
    } else {
        let len = raw.l.unwrap_or(100);
        let mut spec = LatticeSpec::ring(len);
        if let Some(b) = raw.boundary {
            spec.boundary = b;
        }
        spec
    };
    lattice.validate()?;

    let rates = if let Some(rates) = &raw.rates {
        rates.validate()?;
        rates.clone()
    } else {
        let name = raw.preset.as_deref().unwrap_or("cp");
        let which = Preset::parse(name)?;
        let delta_a = raw.delta_a.or(raw.delta).unwrap_or(1.0);
        let delta_d = raw.delta_d.or(raw.delta);
        preset(
            which,
            &BaseRates {
                lambda: raw.lambda.unwrap_or(1.0),
                delta_a,
                delta_d,
                sigma: raw.sigma.unwrap_or(1.0),
                rho: raw.rho.unwrap_or(1.0),
            },
        )?
    };

    let horizon = raw.t.unwrap_or(50.0);
    if !(horizon > 0.0) {
        return Err(CpsError::invalid(format!("T must be > 0, got {horizon}")));
    }
    let n_sites = lattice.n_sites();
    let x0 = raw.x0.clone().unwrap_or_else(|| vec![0]);
    if x0.iter().any(|&s| s >= n_sites) {
        return Err(CpsError::invalid("x0 contains a site outside the lattice"));
    }
    if let Some(a0) = &raw.a0 {
        if a0.iter().any(|&s| s >= n_sites) {
            return Err(CpsError::invalid("a0 contains a site outside the lattice"));
        }
    }
    let bracket = match raw.bracket {
        Some([lo, hi]) => {
            if !(lo >= 0.0 && hi > lo) {
                return Err(CpsError::invalid(format!(
                    "bracket must satisfy 0 <= lo < hi, got [{lo}, {hi}]"
                )));
            }
            Some((lo, hi))
        }
        None => None,
    };
    let horizons = raw
        .horizons
        .clone()
        .unwrap_or_else(|| vec![horizon / 4.0, horizon / 2.0, horizon]);
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] > w[1]) {
        return Err(CpsError::invalid("horizons must be sorted and nonempty"));
    }

    Ok(RunConfig {
        lattice,
        rates,
        horizon,
        seed: raw.seed.unwrap_or(1),
        replicas: raw.replicas.unwrap_or(100),
        sample_points: raw.sample_points.unwrap_or(101).max(2),
        lambda_grid: raw.lambda_grid.clone().unwrap_or_default(),
        horizons,
        x0,
        a0: raw.a0.clone(),
        threshold: raw.threshold.unwrap_or(0.05),
        bracket,
        instances: raw.instances.unwrap_or(200),
        style: raw.style.unwrap_or(SvgStyle::Lines),
        out: raw.out.clone(),
    })
}

/// Atomic file write: stage to a temp sibling, then rename into place so no
/// partial output survives a failure.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
