//! In-memory instances, their on-disk layout and the load-time consistency
//! check of declared constants.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use saddle_core::linalg::{inverse_iteration, power_iteration};

use crate::error::{BenchError, Result};
use crate::manifest::{InstanceKind, Manifest};
use crate::matrix_io::{read_matrix, read_vector, write_csv, write_matrix};

/// Relative tolerance between declared constants and estimates from the data.
pub const CONSTANT_TOLERANCE: f64 = 0.05;

/// `p(x) = x^T P x / 2 + a^T x`, `q(y) = y^T Q y / 2 + c^T y`,
/// `R(x, y) = (mu_x/2)||x||^2 + x^T B y - (mu_y/2)||y||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceData {
    pub p: DMatrix<f64>,
    pub a: DVector<f64>,
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub b: DMatrix<f64>,
    pub mu_x: f64,
    pub mu_y: f64,
    pub x_star: Option<DVector<f64>>,
    pub y_star: Option<DVector<f64>>,
}

impl InstanceData {
    pub fn dims(&self) -> (usize, usize) {
        self.b.shape()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub manifest: Manifest,
    pub data: InstanceData,
}

fn has_p(kind: InstanceKind) -> bool {
    kind != InstanceKind::LinearBilinear
}

fn has_q(kind: InstanceKind) -> bool {
    matches!(kind, InstanceKind::QuadraticSpp | InstanceKind::Bilinear)
}

impl Instance {
    /// Writes the data files and `manifest.json` into `dir`, filling in the
    /// manifest's file table. Returns the manifest path.
    pub fn write(&mut self, dir: &Path, csv: bool) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
        let kind = self.manifest.kind;
        let d = &self.data;
        let files = &mut self.manifest.files;
        let mut mats: Vec<(&str, DMatrix<f64>)> = Vec::new();
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        if has_p(kind) {
            files.p = Some("P.bin".into());
            mats.push(("P", d.p.clone()));
        }
        files.a = Some("a.bin".into());
        mats.push(("a", col(&d.a)));
        if has_q(kind) {
            files.q = Some("Q.bin".into());
            mats.push(("Q", d.q.clone()));
        }
        files.c = Some("c.bin".into());
        mats.push(("c", col(&d.c)));
        files.b = "B.bin".into();
        mats.push(("B", d.b.clone()));
        if let (Some(x), Some(y)) = (&d.x_star, &d.y_star) {
            files.x_star = Some("x_star.bin".into());
            files.y_star = Some("y_star.bin".into());
            mats.push(("x_star", col(x)));
            mats.push(("y_star", col(y)));
        }
        for (name, m) in &mats {
            write_matrix(&dir.join(format!("{name}.bin")), m)?;
            if csv {
                write_csv(&dir.join(format!("{name}.csv")), m)?;
            }
        }
        let path = dir.join("manifest.json");
        self.manifest.save(&path)?;
        Ok(path)
    }

    /// Reads a manifest and its data, then checks the declared constants.
    pub fn load(manifest_path: &Path) -> Result<Instance> {
        let inst = Self::load_unchecked(manifest_path)?;
        inst.verify(manifest_path)?;
        Ok(inst)
    }

    pub fn load_unchecked(manifest_path: &Path) -> Result<Instance> {
        let manifest = Manifest::load(manifest_path)?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let bad = |reason: String| BenchError::Manifest {
            path: manifest_path.to_path_buf(),
            reason,
        };
        let (dx, dy) = (manifest.d_x, manifest.d_y);
        let f = &manifest.files;
        let b = read_matrix(&dir.join(&f.b))?;
        if b.shape() != (dx, dy) {
            return Err(bad(format!("B is {:?}, declared {dx}x{dy}", b.shape())));
        }
        let square = |name: &str, file: &Option<String>, n: usize| -> Result<DMatrix<f64>> {
            match file {
                None => Ok(DMatrix::zeros(n, n)),
                Some(rel) => {
                    let m = read_matrix(&dir.join(rel))?;
                    if m.shape() != (n, n) {
                        return Err(bad(format!("{name} is {:?}, expected {n}x{n}", m.shape())));
                    }
                    Ok(m)
                }
            }
        };
        let vector = |name: &str, file: &Option<String>, n: usize| -> Result<Option<DVector<f64>>> {
            match file {
                None => Ok(None),
                Some(rel) => {
                    let v = read_vector(&dir.join(rel))?;
                    if v.len() != n {
                        return Err(bad(format!("{name} has length {}, expected {n}", v.len())));
                    }
                    Ok(Some(v))
                }
            }
        };
        let p = square("P", &f.p, dx)?;
        let q = square("Q", &f.q, dy)?;
        let a = vector("a", &f.a, dx)?.unwrap_or_else(|| DVector::zeros(dx));
        let c = vector("c", &f.c, dy)?.unwrap_or_else(|| DVector::zeros(dy));
        let x_star = vector("x_star", &f.x_star, dx)?;
        let y_star = vector("y_star", &f.y_star, dy)?;
        let (mu_x, mu_y) = match manifest.kind {
            InstanceKind::QuadraticSpp => (
                manifest.constant(manifest_path, "mu_x", manifest.constants.mu_x)?,
                manifest.constant(manifest_path, "mu_y", manifest.constants.mu_y)?,
            ),
            _ => (0.0, 0.0),
        };
        Ok(Instance {
            manifest,
            data: InstanceData {
                p,
                a,
                q,
                c,
                b,
                mu_x,
                mu_y,
                x_star,
                y_star,
            },
        })
    }

    /// Compares every declared constant with an iterative estimate from the
    /// data.
    pub fn verify(&self, manifest_path: &Path) -> Result<()> {
        let m = &self.manifest;
        let k = &m.constants;
        let d = &self.data;
        let need = |name: &str, v: Option<f64>| m.constant(manifest_path, name, v);
        let gram = || gram_extremes(&d.b);
        match m.kind {
            InstanceKind::QuadraticSpp => {
                check("L_p", need("l_p", k.l_p)?, top_eigenvalue(&d.p))?;
                check("L_q", need("l_q", k.l_q)?, top_eigenvalue(&d.q))?;
                let (lmax, _) = gram();
                let l_r = coupling_lipschitz(d.mu_x, d.mu_y, lmax.sqrt());
                check("L_R", need("l_r", k.l_r)?, l_r)?;
            }
            InstanceKind::Bilinear => {
                check("L_p", need("l_p", k.l_p)?, top_eigenvalue(&d.p))?;
                check("mu_p", need("mu_p", k.mu_p)?, bottom_eigenvalue(&d.p))?;
                check("L_q", need("l_q", k.l_q)?, top_eigenvalue(&d.q))?;
                check("mu_q", need("mu_q", k.mu_q)?, bottom_eigenvalue(&d.q))?;
                let (lmax, lmin) = gram();
                check("lambda_max", need("lambda_max", k.lambda_max)?, lmax)?;
                check("lambda_min", need("lambda_min", k.lambda_min)?, lmin)?;
            }
            InstanceKind::AffineConstrained | InstanceKind::Consensus => {
                check("L_p", need("l_p", k.l_p)?, top_eigenvalue(&d.p))?;
                check("mu_p", need("mu_p", k.mu_p)?, bottom_eigenvalue(&d.p))?;
                let (lmax, lmin) = gram();
                check("lambda_max", need("lambda_max", k.lambda_max)?, lmax)?;
                check("lambda_min", need("lambda_min", k.lambda_min)?, lmin)?;
                need("d_y_bound", k.d_y_bound)?;
            }
            InstanceKind::LinearBilinear => {
                let (lmax, lmin) = gram();
                check("lambda_max", need("lambda_max", k.lambda_max)?, lmax)?;
                check("lambda_min", need("lambda_min", k.lambda_min)?, lmin)?;
                need("d_x_bound", k.d_x_bound)?;
                need("d_y_bound", k.d_y_bound)?;
            }
        }
        Ok(())
    }
}

fn check(name: &str, declared: f64, estimated: f64) -> Result<()> {
    let ok = if declared == 0.0 {
        estimated.abs() <= 1e-12
    } else {
        (estimated - declared).abs() <= CONSTANT_TOLERANCE * declared.abs()
    };
    if ok {
        Ok(())
    } else {
        Err(BenchError::ConstantMismatch {
            name: name.into(),
            declared,
            estimated,
        })
    }
}

/// Lipschitz constant of `grad R` for `R = (mu_x/2)||x||^2 + x^T B y -
/// (mu_y/2)||y||^2` with `||B|| = sigma`.
pub fn coupling_lipschitz(mu_x: f64, mu_y: f64, sigma: f64) -> f64 {
    ((mu_x - mu_y).abs() + ((mu_x + mu_y).powi(2) + 4.0 * sigma * sigma).sqrt()) / 2.0
}

/// Inverse of [`coupling_lipschitz`] in `sigma`; `None` when `l_r` is below
/// `max(mu_x, mu_y)`.
pub fn sigma_for_lipschitz(l_r: f64, mu_x: f64, mu_y: f64) -> Option<f64> {
    let s = 2.0 * l_r - (mu_x - mu_y).abs();
    let sq = (s * s - (mu_x + mu_y).powi(2)) / 4.0;
    (l_r >= mu_x.max(mu_y)).then(|| sq.max(0.0).sqrt())
}

fn matvec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Power-iteration estimate of the largest eigenvalue of a symmetric PSD
/// matrix.
pub fn top_eigenvalue(m: &DMatrix<f64>) -> f64 {
    power_iteration(|v: &[f64]| matvec(m, v), m.nrows(), 2000, 1e-12).value
}

/// Inverse-iteration estimate of the smallest eigenvalue of an SPD matrix.
pub fn bottom_eigenvalue(m: &DMatrix<f64>) -> f64 {
    inverse_iteration(|v: &[f64]| matvec(m, v), m.nrows(), 500, 1e-12).value
}

/// Extreme eigenvalues of the smaller Gram matrix of `b`.
pub fn gram_extremes(b: &DMatrix<f64>) -> (f64, f64) {
    let g = if b.nrows() <= b.ncols() {
        b * b.transpose()
    } else {
        b.transpose() * b
    };
    (top_eigenvalue(&g), bottom_eigenvalue(&g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipschitz_and_sigma_are_inverse() {
        for (l, mx, my) in [(10.0, 1.0, 1.0), (3.0, 0.5, 2.0), (2.0, 2.0, 0.1)] {
            let s = sigma_for_lipschitz(l, mx, my).unwrap();
            assert!((coupling_lipschitz(mx, my, s) - l).abs() < 1e-12);
        }
        assert_eq!(sigma_for_lipschitz(1.0, 1.0, 1.0), Some(0.0));
        assert!(sigma_for_lipschitz(0.5, 1.0, 0.1).is_none());
    }

    #[test]
    fn lipschitz_matches_symmetric_eigenvalues() {
        // [[mu_x, s], [s, -mu_y]] has spectral radius equal to the formula
        let (mx, my, s): (f64, f64, f64) = (0.7, 1.9, 1.3);
        let m = nalgebra::Matrix2::new(mx, s, s, -my);
        let eig = m.symmetric_eigenvalues();
        let r = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!((r - coupling_lipschitz(mx, my, s)).abs() < 1e-12);
    }

    #[test]
    fn mismatch_detected() {
        assert!(check("L", 4.0, 4.1).is_ok());
        assert!(check("L", 4.0, 4.3).is_err());
        assert!(check("L", 0.0, 0.0).is_ok());
        assert!(check("L", 0.0, 0.1).is_err());
    }
}
