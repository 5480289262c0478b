//! JSON instance manifests (schema version "1").

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    QuadraticSpp,
    Bilinear,
    AffineConstrained,
    LinearBilinear,
    Consensus,
}

impl InstanceKind {
    pub fn label(self) -> &'static str {
        match self {
            InstanceKind::QuadraticSpp => "quadratic-spp",
            InstanceKind::Bilinear => "bilinear",
            InstanceKind::AffineConstrained => "affine-constrained",
            InstanceKind::LinearBilinear => "linear-bilinear",
            InstanceKind::Consensus => "consensus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Path,
    Ring,
    Star,
}

/// Declared constants. Which ones are present depends on the kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_y: Option<f64>,
    /// Largest eigenvalue of the smaller Gram matrix of `B`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    /// Smallest eigenvalue of the smaller Gram matrix of `B`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_x_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_y_bound: Option<f64>,
}

/// Data files, relative to the manifest's directory. Missing `P` / `Q` mean
/// zero matrices, missing `a` / `c` zero vectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Files {
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_star: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub topology: Topology,
    pub nodes: usize,
    pub local_dim: usize,
    /// Extreme nonzero eigenvalues of the graph Laplacian.
    pub laplacian_lambda_max: f64,
    pub laplacian_lambda_min_pos: f64,
}

/// Instance description. The data is
/// `p(x) = x^T P x / 2 + a^T x`, `q(y) = y^T Q y / 2 + c^T y`,
/// `R(x, y) = (mu_x/2)||x||^2 + x^T B y - (mu_y/2)||y||^2`, where the coupling
/// moduli are only nonzero for `quadratic-spp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    pub id: String,
    pub kind: InstanceKind,
    pub seed: u64,
    pub d_x: usize,
    pub d_y: usize,
    pub constants: Constants,
    pub files: Files,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<Network>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(BenchError::io(path))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| BenchError::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(BenchError::Manifest {
                path: path.to_path_buf(),
                reason: format!("unsupported schema version {:?}", m.schema_version),
            });
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(BenchError::io(path))
    }

    /// Required constant or a manifest error naming it.
    pub fn constant(&self, path: &Path, name: &str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| BenchError::Manifest {
            path: path.to_path_buf(),
            reason: format!("{} instance lacks constant {name}", self.kind.label()),
        })
    }
}
