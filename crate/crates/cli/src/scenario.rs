//! Scenario files: a single job or a batch of jobs, each naming a command,
//! its input documents (inline or by relative path), and command-specific
//! parameters.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

use nam_core::json::{MatrixDoc, MeasureDoc, ProductPairDoc, WeakDistDoc};
use nam_core::kakutani::ProductPair;
use nam_core::linalg::PerturbationOperator;
use nam_core::measures::BallMeasure;
use nam_core::weak_dist::WeakDistribution;

use crate::InputError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Transform,
    Convolve,
    Product,
    Pushforward,
    Moments,
    Consistency,
    Tightness,
    Kakutani,
    Orthogonality,
    Decompose,
    Split,
    Minlos,
    SazonovWitness,
    VerifyIdentities,
}

impl Command {
    pub fn name(&self) -> String {
        serde_json::to_value(self)
            .expect("command serializes")
            .as_str()
            .expect("command is a string")
            .to_owned()
    }
}

/// One input document: either inline JSON or a path relative to the
/// scenario file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputRef {
    Path(String),
    Inline(Value),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub command: Command,
    #[serde(default)]
    pub inputs: BTreeMap<String, InputRef>,
    #[serde(default)]
    pub params: serde_json::Map<String, Value>,
}

/// A scenario file holds one scenario or an ordered batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioFile {
    Batch(Vec<Scenario>),
    Single(Scenario),
}

impl ScenarioFile {
    pub fn into_scenarios(self) -> Vec<Scenario> {
        match self {
            ScenarioFile::Batch(v) => v,
            ScenarioFile::Single(s) => vec![s],
        }
    }
}

impl Scenario {
    fn raw_input(&self, name: &str, base_dir: &Path) -> Result<Value, InputError> {
        let input = self.inputs.get(name).ok_or_else(|| {
            InputError(format!(
                "command '{}' needs input '{name}'",
                self.command.name()
            ))
        })?;
        match input {
            InputRef::Inline(v) => Ok(v.clone()),
            InputRef::Path(rel) => {
                let path = base_dir.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    InputError(format!("cannot read input '{name}' at {}: {e}", path.display()))
                })?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }

    pub fn measure_input(&self, name: &str, base_dir: &Path) -> Result<BallMeasure, InputError> {
        let doc: MeasureDoc = serde_json::from_value(self.raw_input(name, base_dir)?)?;
        Ok(doc.to_measure()?)
    }

    pub fn weak_dist_input(
        &self,
        name: &str,
        base_dir: &Path,
    ) -> Result<WeakDistribution, InputError> {
        let doc: WeakDistDoc = serde_json::from_value(self.raw_input(name, base_dir)?)?;
        Ok(doc.to_weak_distribution()?)
    }

    pub fn operator_input(
        &self,
        name: &str,
        base_dir: &Path,
    ) -> Result<PerturbationOperator, InputError> {
        let doc: MatrixDoc = serde_json::from_value(self.raw_input(name, base_dir)?)?;
        Ok(doc.to_operator()?)
    }

    pub fn product_pair_input(
        &self,
        name: &str,
        base_dir: &Path,
    ) -> Result<ProductPair, InputError> {
        let doc: ProductPairDoc = serde_json::from_value(self.raw_input(name, base_dir)?)?;
        Ok(doc.to_pair()?)
    }

    /// Deserialize the params object into a command-specific struct.
    pub fn typed_params<P: serde::de::DeserializeOwned>(&self) -> Result<P, InputError> {
        Ok(serde_json::from_value(Value::Object(self.params.clone()))?)
    }
}
