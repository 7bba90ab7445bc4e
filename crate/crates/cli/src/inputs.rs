use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use coverlab_core::observable::ObservableEntry;
use coverlab_core::ulam::{ulam_compile, IntervalMap, PiecewiseCocycle};
use coverlab_core::{build_model, CoverError, CoverObservable, MarkovModel, ModelConfig};

use crate::{ObsArgs, Result};

/// Ulam model file: `{"ulam": {"map": .., "level": .., "cocycle": ..}}`.
#[derive(Debug, Deserialize)]
struct UlamFile {
    ulam: UlamSpec,
}

#[derive(Debug, Deserialize)]
struct UlamSpec {
    map: IntervalMap,
    level: u32,
    cocycle: PiecewiseCocycle,
}

pub fn load_model(path: &Path) -> Result<MarkovModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoverError::Config(format!("cannot read model {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CoverError::Config(format!("model {} is not JSON: {e}", path.display())))?;
    if value.get("ulam").is_some() {
        let spec: UlamFile = serde_json::from_value(value)
            .map_err(|e| CoverError::Config(format!("bad Ulam model in {}: {e}", path.display())))?;
        return ulam_compile(&spec.ulam.map, spec.ulam.level, &spec.ulam.cocycle);
    }
    let config: ModelConfig = serde_json::from_value(value)
        .map_err(|e| CoverError::Config(format!("bad model file {}: {e}", path.display())))?;
    build_model(&config)
}

fn load_observable(path: &Path, d: usize) -> Result<CoverObservable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoverError::Config(format!("cannot read observable {}: {e}", path.display())))?;
    let entries: Vec<ObservableEntry> = serde_json::from_str(&text)
        .map_err(|e| CoverError::Config(format!("bad observable file {}: {e}", path.display())))?;
    CoverObservable::from_entries(d, &entries)
}

pub fn load_observables(obs: &ObsArgs, model: &MarkovModel) -> Result<(CoverObservable, CoverObservable)> {
    let d = model.dim();
    let f = match &obs.obs_f {
        Some(p) => load_observable(p, d)?,
        None => CoverObservable::delta(d, 0, &vec![0; d], 0),
    };
    let g = match &obs.obs_g {
        Some(p) => load_observable(p, d)?,
        None => f.clone(),
    };
    for o in [&f, &g] {
        o.check_states(model.state_count())?;
    }
    Ok((f, g))
}

/// Canonical form of the inputs, hashed for the cache key.
#[derive(Serialize)]
pub struct CanonicalInputs<'a, P: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub model: ModelConfig,
    pub observables: Vec<Vec<ObservableEntry>>,
    pub params: P,
}

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| CoverError::Config(format!("bad {what} entry {s:?}")))
        })
        .collect()
}

pub fn complex_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}
