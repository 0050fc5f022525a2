use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FitReport, TuckerModel};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3};

/// Row-major matrix as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// JSON form of a fitted model. Numbers are written in shortest
/// round-trip form, so reading a file back reproduces every value exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub ranks: [usize; 3],
    pub dims: [usize; 3],
    pub factors: [MatrixDoc; 3],
    /// Core values, first index fastest.
    pub core: Vec<f64>,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub report: Option<FitReport>,
}

/// A model together with the hyperparameters and report it was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: TuckerModel,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub report: Option<FitReport>,
}

impl ModelFile {
    pub fn to_document(&self) -> ModelDocument {
        let m = &self.model;
        let (l1, l2, l3) = m.ranks();
        let (n, mm, k) = m.dims();
        let doc = |u: &Matrix| MatrixDoc {
            rows: u.rows(),
            cols: u.cols(),
            values: u.as_slice().to_vec(),
        };
        let [u1, u2, u3] = m.factors();
        ModelDocument {
            ranks: [l1, l2, l3],
            dims: [n, mm, k],
            factors: [doc(u1), doc(u2), doc(u3)],
            core: m.core().as_slice().to_vec(),
            alpha: self.alpha,
            beta: self.beta,
            report: self.report.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        let [f1, f2, f3] = doc.factors;
        let mat = |d: MatrixDoc| Matrix::new(d.rows, d.cols, d.values);
        let [l1, l2, l3] = doc.ranks;
        let core = Tensor3::new((l1, l2, l3), doc.core)?;
        let model = TuckerModel::new(core, mat(f1)?, mat(f2)?, mat(f3)?)?;
        let (n, m, k) = model.dims();
        if [n, m, k] != doc.dims {
            return Err(Error::dim(format!(
                "factor shapes imply dims {:?}, document says {:?}",
                [n, m, k],
                doc.dims
            )));
        }
        Ok(Self {
            model,
            alpha: doc.alpha,
            beta: doc.beta,
            report: doc.report,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
