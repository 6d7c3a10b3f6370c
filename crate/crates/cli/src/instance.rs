use std::fs;

use dyncontract::instances::{counterexample, fig1};
use dyncontract::ladder::Family;
use dyncontract::setting::{Contract, ContractSetting};
use dyncontract::winwin::{shifted_family, win_win_instance};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Base and perturbation of the built-in win-win instances.
pub const WIN_WIN_BASE: f64 = 2.0;
pub const WIN_WIN_EPS: f64 = 1e-3;

pub fn load(id: &str) -> Result<ContractSetting, CliError> {
    match id {
        "fig1" => Ok(fig1()),
        "counterexample-4x4" => Ok(counterexample()),
        _ if id.starts_with("winwin-") => {
            let n: usize = id["winwin-".len()..]
                .parse()
                .map_err(|_| CliError::Usage(format!("bad win-win size in {id:?}")))?;
            win_win_instance(n, WIN_WIN_BASE, WIN_WIN_EPS).map_err(|e| CliError::Usage(e.to_string()))
        }
        path => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid instance {path}: {e}")))
        }
    }
}

/// Hex SHA-256 of the instance's canonical JSON.
pub fn content_hash(setting: &ContractSetting) -> String {
    let json = serde_json::to_string(setting).expect("settings serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Linear,
    Scaled,
    General,
}

/// Resolves the family flag. Shifted instances default to their shifted
/// direction; `scaled` without a base uses the rewards plus the shift.
pub fn family(setting: &ContractSetting, arg: Option<FamilyArg>, base: Option<&[f64]>) -> Result<Family, CliError> {
    match (arg, base) {
        (Some(FamilyArg::General), _) => Ok(Family::General),
        (Some(FamilyArg::Linear), _) => Ok(Family::Linear),
        (_, Some(p)) => {
            if p.len() != setting.m() {
                return Err(CliError::Usage(format!("--base needs {} payments, got {}", setting.m(), p.len())));
            }
            Ok(Family::Scaled(Contract(p.to_vec())))
        }
        (Some(FamilyArg::Scaled), None) => Ok(match shifted_family(setting) {
            Family::Linear => Family::Scaled(Contract(setting.rewards().to_vec())),
            f => f,
        }),
        (None, None) => Ok(shifted_family(setting)),
    }
}
