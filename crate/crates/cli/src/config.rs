//! Validated run configuration, written into every output manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thinlab::{Error, Family, Result, ThinPlan};

use crate::args::{FamilyArgs, FamilyName};
use crate::io::{read_matrix, ValueKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub cols: usize,
}

/// Everything needed to re-run a command: its arguments, the resolved
/// family and plan, the seed, and a checksum of the input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ThinPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputInfo>,
    /// Parsed flags of the subcommand.
    pub options: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunConfig {
    pub fn new(subcommand: &str, argv: &[String], seed: u64, options: serde_json::Value) -> Self {
        RunConfig {
            tool: "thinlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            argv: argv.to_vec(),
            seed,
            family: None,
            plan: None,
            input: None,
            options,
            outputs: Vec::new(),
        }
    }
}

impl FamilyArgs {
    /// Matrix kind the input must have for this family.
    pub fn value_kind(&self) -> ValueKind {
        match self.family {
            FamilyName::Poisson | FamilyName::Negbin | FamilyName::Binomial | FamilyName::Multinomial => {
                ValueKind::Count
            }
            _ => ValueKind::Real,
        }
    }

    /// Resolve the flags into a validated family. `dims` is the column count
    /// of the data, used by the vector families.
    pub fn resolve(&self, dims: usize) -> Result<Family> {
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| Error::Usage(format!("--family {} needs --{flag}", self.name())))
        };
        let trials = || {
            self.trials.ok_or_else(|| Error::Usage(format!("--family {} needs --trials", self.name())))
        };
        let fam = match self.family {
            FamilyName::Poisson => Family::Poisson,
            FamilyName::Gaussian => Family::Gaussian { var: need(self.var, "var")? },
            FamilyName::Mvn => {
                let path = self.cov.as_ref().ok_or_else(|| Error::Usage("--family mvn needs --cov".into()))?;
                let cov = read_matrix(path, ValueKind::Real)?;
                if cov.shape() != (dims, dims) {
                    return Err(Error::Usage(format!(
                        "covariance is {}×{}, data has {dims} columns",
                        cov.nrows(),
                        cov.ncols()
                    )));
                }
                Family::MultivariateGaussian { cov }
            }
            FamilyName::Negbin => Family::NegativeBinomial { size: need(self.size, "size")? },
            FamilyName::Gamma => Family::Gamma { shape: need(self.shape, "shape")? },
            FamilyName::Exponential => Family::Exponential,
            FamilyName::Binomial => Family::Binomial { trials: trials()? },
            FamilyName::Multinomial => Family::Multinomial { trials: trials()?, dims },
        };
        fam.validate()?;
        Ok(fam)
    }

    fn name(&self) -> String {
        format!("{:?}", self.family).to_lowercase()
    }
}

/// Read the input matrix and record its checksum.
pub fn load_input(path: &Path, kind: ValueKind) -> Result<(nalgebra::DMatrix<f64>, InputInfo)> {
    let x = read_matrix(path, kind)?;
    let info = InputInfo {
        path: path.display().to_string(),
        sha256: crate::io::sha256_file(path)?,
        rows: x.nrows(),
        cols: x.ncols(),
    };
    Ok((x, info))
}
