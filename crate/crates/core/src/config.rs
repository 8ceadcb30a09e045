//! Structured-text (TOML) configuration for map families and billiard
//! tables. Unknown keys are rejected.

use crate::billiard::{BilliardError, BilliardTable, Disc};
use crate::linalg::Vec2;
use crate::maps::{IntMat2, MapError, ShearFn, TorusEndo, VianaMap};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("unknown family {0:?} (expected linear | sheared | product | viana)")]
    UnknownFamily(String),
    #[error("family {family} requires field {field}")]
    MissingField { family: &'static str, field: &'static str },
    #[error("map error: {0}")]
    Map(#[from] MapError),
    #[error("billiard error: {0}")]
    Billiard(#[from] BilliardError),
}

/// Map definition. Keys used per family:
/// - `linear`: matrix
/// - `sheared`: matrix, conjugacy (default identity), t,
///   shear_sin/shear_cos (default sine)
/// - `product`: m1, m2
/// - `viana`: d, alpha, optional a0 (computed from the preperiodic
///   condition when absent)
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[i64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugacy: Option<[[i64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shear_sin: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shear_cos: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
}

/// A built map: either a torus endomorphism or a Viana skew product.
#[derive(Clone, Debug)]
pub enum DynMap {
    Endo(TorusEndo),
    Viana(VianaMap),
}

impl MapConfig {
    pub fn build(&self) -> Result<DynMap, ConfigError> {
        let matrix = |field: &'static str, family: &'static str| -> Result<IntMat2, ConfigError> {
            let m = self.matrix.ok_or(ConfigError::MissingField { family, field })?;
            Ok(IntMat2::new(m[0][0], m[0][1], m[1][0], m[1][1])?)
        };
        match self.family.as_str() {
            "linear" => Ok(DynMap::Endo(TorusEndo::linear(matrix("matrix", "linear")?))),
            "sheared" => {
                let e = matrix("matrix", "sheared")?;
                let p = match self.conjugacy {
                    Some(m) => IntMat2::new(m[0][0], m[0][1], m[1][0], m[1][1])?,
                    None => IntMat2::new(1, 0, 0, 1).expect("identity"),
                };
                let t = self.t.ok_or(ConfigError::MissingField { family: "sheared", field: "t" })?;
                let shear = match (&self.shear_sin, &self.shear_cos) {
                    (None, None) => ShearFn::sine(),
                    (s, c) => ShearFn {
                        sin: s.clone().unwrap_or_default(),
                        cos: c.clone().unwrap_or_default(),
                    },
                };
                Ok(DynMap::Endo(TorusEndo::sheared(e, p, t, shear)?))
            }
            "product" => {
                let m1 = self.m1.ok_or(ConfigError::MissingField { family: "product", field: "m1" })?;
                let m2 = self.m2.ok_or(ConfigError::MissingField { family: "product", field: "m2" })?;
                Ok(DynMap::Endo(TorusEndo::product(m1, m2)?))
            }
            "viana" => {
                let d = self.d.ok_or(ConfigError::MissingField { family: "viana", field: "d" })?;
                let alpha = self.alpha.ok_or(ConfigError::MissingField { family: "viana", field: "alpha" })?;
                let map = match self.a0 {
                    Some(a0) => VianaMap::with_a0(a0, d, alpha)?,
                    None => VianaMap::new(d, alpha)?,
                };
                Ok(DynMap::Viana(map))
            }
            other => Err(ConfigError::UnknownFamily(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub tau_max: f64,
    pub discs: Vec<DiscConfig>,
}

impl TableConfig {
    pub fn build(&self) -> Result<BilliardTable, ConfigError> {
        let discs = self
            .discs
            .iter()
            .map(|d| Disc { center: Vec2::new(d.center[0], d.center[1]), radius: d.radius })
            .collect();
        Ok(BilliardTable::new(discs, self.tau_max)?)
    }
}

pub fn load_map(path: &str) -> Result<(MapConfig, DynMap), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_string(), source })?;
    let cfg: MapConfig = toml::from_str(&text)
        .map_err(|source| ConfigError::Parse { path: path.to_string(), source: Box::new(source) })?;
    let map = cfg.build()?;
    Ok((cfg, map))
}

pub fn load_table(path: &str) -> Result<(TableConfig, BilliardTable), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_string(), source })?;
    let cfg: TableConfig = toml::from_str(&text)
        .map_err(|source| ConfigError::Parse { path: path.to_string(), source: Box::new(source) })?;
    let table = cfg.build()?;
    Ok((cfg, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let text = "family = \"linear\"\nmatrix = [[6, 1], [1, 1]]\nbogus = 3\n";
        let parsed: Result<MapConfig, _> = toml::from_str(text);
        assert!(parsed.is_err());
    }

    #[test]
    fn sheared_defaults() {
        let text = "family = \"sheared\"\nmatrix = [[6, 1], [1, 1]]\nt = 6.0\n";
        let cfg: MapConfig = toml::from_str(text).unwrap();
        match cfg.build().unwrap() {
            DynMap::Endo(TorusEndo::Sheared { t, .. }) => assert_eq!(t, 6.0),
            _ => panic!("expected sheared map"),
        }
    }

    #[test]
    fn viana_defaults_compute_a0() {
        let text = "family = \"viana\"\nd = 16\nalpha = 0.01\n";
        let cfg: MapConfig = toml::from_str(text).unwrap();
        match cfg.build().unwrap() {
            DynMap::Viana(v) => assert!((v.a0() - 1.5436890126920764).abs() < 1e-12),
            _ => panic!("expected viana map"),
        }
    }
}
