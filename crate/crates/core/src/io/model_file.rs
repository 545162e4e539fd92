use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bicop::{Family, PairCopula, Reflection};
use crate::error::{Error, Result};
use crate::fitting::FittedModel;
use crate::margins::{MarginKind, MarginModel};
use crate::prediction::check_response;
use crate::vine::{VineArray, VineModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    pub margin: MarginKind,
}

/// One pair copula, addressed by tree (1-based) and array column (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub tree: usize,
    pub column: usize,
    /// readable label such as "x1,y;x2"
    #[serde(default)]
    pub label: String,
    pub family: String,
    pub reflection: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataDoc {
    pub seed: u64,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub warnings: Vec<String>,
    /// hash of the training data, see `fingerprint`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub schema_version: u32,
    pub variables: Vec<VariableDoc>,
    pub structure: VineArray,
    pub margins: Vec<MarginModel>,
    pub edges: Vec<EdgeDoc>,
    pub response: Option<String>,
    pub metadata: MetadataDoc,
}

impl ModelDoc {
    pub fn from_fitted(fm: &FittedModel) -> Self {
        let m = &fm.model;
        let names = m.names();
        let st = m.structure();
        let mut edges = Vec::new();
        for l in 0..m.truncation() {
            for j in (l + 1)..m.dim() {
                let c = m.copula(l, j);
                let e = st.edge(l, j);
                let cond: Vec<&str> = e.cond.iter().map(|&v| names[v].as_str()).collect();
                let mut label = format!("{},{}", names[e.pair.0], names[e.pair.1]);
                if !cond.is_empty() {
                    label = format!("{label};{}", cond.join(","));
                }
                edges.push(EdgeDoc {
                    tree: l + 1,
                    column: j + 1,
                    label,
                    family: c.family().name().into(),
                    reflection: c.reflection().name().into(),
                    params: c.params().to_vec(),
                });
            }
        }
        ModelDoc {
            schema_version: SCHEMA_VERSION,
            variables: names.iter().zip(m.margins()).map(|(n, mm)| VariableDoc { name: n.clone(), margin: mm.kind() }).collect(),
            structure: st.clone(),
            margins: m.margins().to_vec(),
            edges,
            response: fm.response.map(|r| names[r].clone()),
            metadata: MetadataDoc {
                seed: fm.seed,
                loglik: fm.copula_loglik,
                aic: fm.aic(),
                bic: fm.bic(),
                n_obs: fm.n_obs,
                n_params: m.n_params(),
                warnings: fm.warnings.clone(),
                training_fingerprint: None,
            },
        }
    }

    pub fn into_fitted(self) -> Result<FittedModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "model schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let d = self.structure.dim();
        if self.variables.len() != d || self.margins.len() != d {
            return Err(Error::Schema(format!(
                "structure has dimension {d} but {} variables and {} margins",
                self.variables.len(),
                self.margins.len()
            )));
        }
        for (v, m) in self.variables.iter().zip(&self.margins) {
            if v.margin != m.kind() {
                return Err(Error::Schema(format!("variable {} declares a different margin kind", v.name)));
            }
        }
        let t = self.structure.truncation();
        let mut grid: Vec<Vec<Option<PairCopula>>> = vec![vec![None; d]; t];
        for e in &self.edges {
            if e.tree < 1 || e.tree > t || e.column <= e.tree || e.column > d {
                return Err(Error::Schema(format!("edge at tree {} column {} is outside the array", e.tree, e.column)));
            }
            let slot = &mut grid[e.tree - 1][e.column - 1];
            if slot.is_some() {
                return Err(Error::Schema(format!("duplicate edge at tree {} column {}", e.tree, e.column)));
            }
            let fam: Family = e.family.parse()?;
            let refl: Reflection = e.reflection.parse()?;
            *slot = Some(PairCopula::new(fam, refl, &e.params)?);
        }
        let mut edges = Vec::with_capacity(t);
        for (l, row) in grid.into_iter().enumerate() {
            let mut out = Vec::with_capacity(d);
            for (j, c) in row.into_iter().enumerate() {
                match c {
                    Some(c) => out.push(c),
                    None if j <= l => out.push(PairCopula::independence()),
                    None => return Err(Error::Schema(format!("missing edge at tree {} column {}", l + 1, j + 1))),
                }
            }
            edges.push(out);
        }
        let names: Vec<String> = self.variables.into_iter().map(|v| v.name).collect();
        let response = match &self.response {
            Some(r) => Some(names.iter().position(|n| n == r).ok_or_else(|| Error::Schema(format!("response {r} is not a variable")))?),
            None => None,
        };
        let model = VineModel::new(names, self.margins, self.structure, edges)?;
        if let Some(r) = response {
            check_response(&model, r)?;
        }
        Ok(FittedModel {
            model,
            response,
            copula_loglik: self.metadata.loglik,
            n_obs: self.metadata.n_obs,
            seed: self.metadata.seed,
            warnings: self.metadata.warnings,
        })
    }
}

pub fn model_to_json(fm: &FittedModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelDoc::from_fitted(fm))?)
}

pub fn model_from_json(s: &str) -> Result<FittedModel> {
    let doc: ModelDoc = serde_json::from_str(s).map_err(|e| Error::Schema(format!("model JSON: {e}")))?;
    doc.into_fitted()
}

pub fn save_model(path: &Path, fm: &FittedModel) -> Result<()> {
    std::fs::write(path, model_to_json(fm)?)?;
    Ok(())
}

pub fn save_model_doc(path: &Path, doc: &ModelDoc) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(doc)?)?;
    Ok(())
}

pub fn load_model_doc(path: &Path) -> Result<ModelDoc> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&s).map_err(|e| Error::Schema(format!("model JSON: {e}")))
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    load_model_doc(path)?.into_fitted()
}
