use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::SlicePair;
use crate::solver::{Model, SolverConfig};
use crate::transforms::{FamilySpec, TransformKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Tcu1,
    Tcsl,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "tcu1" => Ok(Self::Tcu1),
            "tcsl" => Ok(Self::Tcsl),
            _ => Err(Error::Config(format!("unknown model '{s}' (expected tcu1 or tcsl)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tcu1 => "tcu1",
            Self::Tcsl => "tcsl",
        })
    }
}

/// Contents of a run configuration file (TOML). Every key is optional;
/// command-line flags take precedence.
///
/// ```toml
/// model = "tcsl"
/// pair = [2, 3]          # slice modes, 1-based
/// seed = 7
///
/// [transforms]
/// mode1 = "learnable"
/// mode4 = "learnable"
///
/// [solver]
/// rho_mu = 1.1
/// max_iter = 300
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelKind>,
    pub pair: Option<[usize; 2]>,
    pub seed: Option<u64>,
    pub transforms: Option<FamilySpec>,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Slice modes used when TC-SL is selected without an explicit pair:
/// modes 2 and 3 for tensors of order ≥ 3, otherwise modes 1 and 2.
pub fn default_pair(order: usize) -> [usize; 2] {
    if order >= 3 {
        [2, 3]
    } else {
        [1, 2]
    }
}

/// Builds the solver model from the CLI-level choice and a 1-based pair.
pub fn resolve_model(kind: ModelKind, pair: Option<[usize; 2]>, order: usize) -> Result<Model> {
    match kind {
        ModelKind::Tcu1 => Ok(Model::TcU1),
        ModelKind::Tcsl => {
            let [a, b] = pair.unwrap_or_else(|| default_pair(order));
            Ok(Model::TcSl(SlicePair::from_one_based(a, b, order)?))
        }
    }
}

/// Family used when none is given.
///
/// * synthetic TC-U1: DCT on modes `1..h−1`, learnable on mode `h`;
/// * other TC-U1: DFT on modes 1 and 2, learnable on the rest;
/// * TC-SL: identity on the slice modes, learnable elsewhere.
pub fn default_family(model: Model, order: usize, synthetic: bool) -> FamilySpec {
    let mut spec = FamilySpec::new();
    match model {
        Model::TcU1 if synthetic => {
            for k in 1..order {
                spec = spec.with(k, TransformKind::Dcm);
            }
            spec = spec.with(order, TransformKind::Learnable);
        }
        Model::TcU1 => {
            let fixed = if order >= 3 { 2 } else { order.saturating_sub(1).max(1) };
            for k in 1..=order {
                let kind = if k <= fixed {
                    TransformKind::Dfm
                } else {
                    TransformKind::Learnable
                };
                spec = spec.with(k, kind);
            }
        }
        Model::TcSl(pair) => {
            for k in 0..order {
                if k != pair.k1 && k != pair.k2 {
                    spec = spec.with(k + 1, TransformKind::Learnable);
                }
            }
        }
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_full_config() {
        let cfg = RunConfig::from_toml(
            "model = \"tcsl\"\npair = [1, 4]\nseed = 3\n[transforms]\nmode2 = \"dcm\"\n[solver]\nmax_iter = 40\n",
        )
        .unwrap();
        assert_eq!(cfg.model, Some(ModelKind::Tcsl));
        assert_eq!(cfg.pair, Some([1, 4]));
        assert_eq!(cfg.transforms.unwrap().kind(2), TransformKind::Dcm);
        assert_eq!(cfg.solver.max_iter, 40);
        assert!(RunConfig::from_toml("modle = \"tcu1\"\n").is_err());
        assert!(RunConfig::from_toml("model = \"tcx\"\n").is_err());
    }

    #[test]
    fn model_resolution() {
        assert_eq!(resolve_model(ModelKind::Tcu1, None, 4).unwrap(), Model::TcU1);
        let m = resolve_model(ModelKind::Tcsl, Some([1, 4]), 4).unwrap();
        assert_eq!(m, Model::TcSl(SlicePair { k1: 0, k2: 3 }));
        assert!(resolve_model(ModelKind::Tcsl, Some([1, 5]), 4).is_err());
        assert_eq!("TC-SL".parse::<ModelKind>().unwrap(), ModelKind::Tcsl);
    }

    #[test]
    fn default_families() {
        let s = default_family(Model::TcU1, 4, true);
        assert_eq!(s.to_string(), "mode1=dcm,mode2=dcm,mode3=dcm,mode4=learnable");
        let s = default_family(Model::TcU1, 4, false);
        assert_eq!(s.kind(1), TransformKind::Dfm);
        assert_eq!(s.kind(3), TransformKind::Learnable);
        let s = default_family(Model::TcSl(SlicePair { k1: 1, k2: 2 }), 4, false);
        assert_eq!(s.kind(1), TransformKind::Learnable);
        assert_eq!(s.kind(2), TransformKind::Identity);
        assert_eq!(s.kind(4), TransformKind::Learnable);
    }
}
