use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::data::DatasetCollection;
use super::model::{ModelSpec, PredictionModel, Predictions};
use super::space::{Parameter, ParameterSpace};
use crate::error::{Error, Result};

pub const PROBLEM_SCHEMA_VERSION: &str = "1";

/// Parameter space + observations + prediction model.
#[derive(Debug, Clone)]
pub struct Problem {
    space: ParameterSpace,
    data: DatasetCollection,
    spec: ModelSpec,
    model: Arc<dyn PredictionModel>,
}

impl PartialEq for Problem {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.data == other.data && self.spec == other.spec
    }
}

/// On-disk layout of a problem definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: String,
    pub model: ModelSpec,
    pub parameters: Vec<Parameter>,
    pub datasets: DatasetCollection,
}

impl Problem {
    pub fn new(space: ParameterSpace, data: DatasetCollection, spec: ModelSpec) -> Result<Self> {
        let model: Arc<dyn PredictionModel> = Arc::from(spec.build()?);
        Ok(Self {
            space,
            data,
            spec,
            model,
        })
    }

    /// Problem with a user-supplied model that is not part of the registry.
    /// Such problems can be calibrated but not reloaded from a file.
    pub fn with_model(
        space: ParameterSpace,
        data: DatasetCollection,
        model: Arc<dyn PredictionModel>,
    ) -> Self {
        let spec = ModelSpec::new(model.id());
        Self {
            space,
            data,
            spec,
            model,
        }
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn data(&self) -> &DatasetCollection {
        &self.data
    }

    pub fn model_spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn model(&self) -> &dyn PredictionModel {
        self.model.as_ref()
    }

    /// Same problem over a different parameter space (fixed values or
    /// narrowed ranges).
    pub fn with_space(&self, space: ParameterSpace) -> Self {
        Self {
            space,
            ..self.clone()
        }
    }

    /// Filter verdict for a free-coordinate vector.
    pub fn accepts(&self, free_values: &[f64]) -> bool {
        self.space
            .assemble(free_values)
            .map(|full| self.model.accepts(&full))
            .unwrap_or(false)
    }

    pub fn predict(&self, free_values: &[f64]) -> Result<Predictions> {
        predict(self.model.as_ref(), &self.space, free_values, &self.data)
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            schema_version: PROBLEM_SCHEMA_VERSION.into(),
            model: self.spec.clone(),
            parameters: self.space.parameters().to_vec(),
            datasets: self.data.clone(),
        }
    }

    pub fn from_file(file: ProblemFile) -> Result<Self> {
        if file.schema_version != PROBLEM_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion {
                found: file.schema_version,
                expected: PROBLEM_SCHEMA_VERSION.into(),
            });
        }
        Self::new(
            ParameterSpace::new(file.parameters)?,
            file.datasets,
            file.model,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ProblemFile = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::schema(e.path().to_string(), e.inner().to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Runs the filter, then the model, and checks the output shape.
///
/// Filter rejection and numerical failure are reported as distinct errors;
/// output is either complete and finite or a failure, never partial.
pub fn predict(
    model: &dyn PredictionModel,
    space: &ParameterSpace,
    free_values: &[f64],
    data: &DatasetCollection,
) -> Result<Predictions> {
    let full = space.assemble(free_values)?;
    if !model.accepts(&full) {
        return Err(Error::FilterRejected);
    }
    let preds = model
        .predict(&full, data)
        .map_err(Error::PredictionFailure)?;
    if preds.len() != data.len() {
        return Err(Error::PredictionFailure(format!(
            "{} prediction sets for {} datasets",
            preds.len(),
            data.len()
        )));
    }
    for (p, ds) in preds.iter().zip(data.iter()) {
        if p.len() != ds.len() {
            return Err(Error::PredictionFailure(format!(
                "dataset `{}`: {} predictions for {} observations",
                ds.id,
                p.len(),
                ds.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::PredictionFailure(format!(
                "dataset `{}`: non-finite prediction",
                ds.id
            )));
        }
    }
    Ok(preds)
}
