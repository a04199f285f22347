//! JSON configuration: the model parameters at the top level plus optional
//! per-command blocks. Unknown keys are rejected everywhere.

use std::path::Path;

use qrotor::Params;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub param: Option<String>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectifyBlock {
    pub grid: Option<usize>,
    pub alphas: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Qubits in their bath Gibbs states, rotor in `|l = 0⟩`.
    #[default]
    RotorAtRest,
    /// Gibbs state of `H₀` with each factor at its own temperature.
    ProductGibbs,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveBlock {
    pub t_end: Option<f64>,
    pub points: Option<usize>,
    pub initial: Option<InitialState>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionBlock {
    pub taus: Option<Vec<f64>>,
    pub grid_step: Option<f64>,
    pub t_end: Option<f64>,
    /// Reduced ladder for the collision study.
    pub l_min: Option<i64>,
    pub l_max: Option<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeBlock {
    pub widen_step: Option<i64>,
    /// Length of the transient scan for the boundary test; 0 skips it.
    pub t_end: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub params: Params,
    pub sweep: SweepBlock,
    pub rectify: RectifyBlock,
    pub evolve: EvolveBlock,
    pub collision: CollisionBlock,
    pub converge: ConvergeBlock,
}

const BLOCKS: [&str; 5] = ["sweep", "rectify", "evolve", "collision", "converge"];

fn block<T: for<'de> Deserialize<'de> + Default>(
    map: &mut Map<String, Value>,
    key: &str,
) -> Result<T, CliError> {
    match map.remove(key) {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v)
            .map_err(|e| CliError::Config(format!("block `{key}`: {e}"))),
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let Value::Object(mut map) = value else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        let sweep = block(&mut map, BLOCKS[0])?;
        let rectify = block(&mut map, BLOCKS[1])?;
        let evolve = block(&mut map, BLOCKS[2])?;
        let collision = block(&mut map, BLOCKS[3])?;
        let converge = block(&mut map, BLOCKS[4])?;
        let params: Params = serde_json::from_value(Value::Object(map))
            .map_err(|e| CliError::Config(e.to_string()))?;
        params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            params,
            sweep,
            rectify,
            evolve,
            collision,
            converge,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Returns `p` with one scalar parameter replaced. `beta2_over_beta1` sets
/// `β₂ = value · β₁`; any other name must be a numeric `Params` field.
pub fn with_param(p: &Params, name: &str, value: f64) -> Result<Params, CliError> {
    if name == "beta2_over_beta1" {
        return Ok(Params {
            beta2: value * p.beta1,
            ..p.clone()
        });
    }
    let mut v = serde_json::to_value(p).expect("Params serializes");
    let slot = v
        .get_mut(name)
        .filter(|s| s.is_number())
        .ok_or_else(|| CliError::Config(format!("unknown sweep parameter `{name}`")))?;
    *slot = if slot.is_i64() {
        if value.fract() != 0.0 {
            return Err(CliError::Config(format!("`{name}` takes integer values")));
        }
        Value::from(value as i64)
    } else {
        Value::from(value)
    };
    serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_json() -> String {
        serde_json::to_string(&Params::fig2(0.5)).unwrap()
    }

    #[test]
    fn parses_params_and_blocks() {
        let mut v: Value = serde_json::from_str(&fig2_json()).unwrap();
        v["sweep"] = serde_json::json!({"param": "beta2_over_beta1", "points": 5});
        let c = Config::from_json(&v.to_string()).unwrap();
        assert_eq!(c.params, Params::fig2(0.5));
        assert_eq!(c.sweep.points, Some(5));
        assert_eq!(c.rectify, RectifyBlock::default());
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut v: Value = serde_json::from_str(&fig2_json()).unwrap();
        v["lamda"] = Value::from(0.1);
        assert!(matches!(Config::from_json(&v.to_string()), Err(CliError::Config(_))));
        let mut v: Value = serde_json::from_str(&fig2_json()).unwrap();
        v["sweep"] = serde_json::json!({"pionts": 5});
        assert!(matches!(Config::from_json(&v.to_string()), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_invalid_physics() {
        let mut v: Value = serde_json::from_str(&fig2_json()).unwrap();
        v["chi"] = Value::from(1.0);
        assert!(matches!(Config::from_json(&v.to_string()), Err(CliError::Config(_))));
        v["chi"] = Value::from(0.0);
        v["l_max"] = Value::from(-20);
        assert!(matches!(Config::from_json(&v.to_string()), Err(CliError::Config(_))));
    }

    #[test]
    fn optional_fields_default() {
        let mut v: Value = serde_json::from_str(&fig2_json()).unwrap();
        let m = v.as_object_mut().unwrap();
        for k in ["omega_cutoff", "steady_tol", "ode_tol", "keep_zero_frequency"] {
            m.remove(k);
        }
        assert_eq!(Config::from_json(&v.to_string()).unwrap().params, Params::fig2(0.5));
    }

    #[test]
    fn param_override() {
        let p = Params::fig2(0.5);
        assert_eq!(with_param(&p, "beta2_over_beta1", 0.3).unwrap().beta2, 0.1 * 0.3);
        assert_eq!(with_param(&p, "chi", 0.25).unwrap().chi, 0.25);
        assert_eq!(with_param(&p, "l_max", 12.0).unwrap().l_max, 12);
        assert!(with_param(&p, "l_max", 12.5).is_err());
        assert!(with_param(&p, "nonsense", 1.0).is_err());
    }
}
