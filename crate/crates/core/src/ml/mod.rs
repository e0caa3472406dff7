//! Classifier families, cross-validation, grid search and the end-to-end
//! evaluation pipeline.

pub mod cv;
pub mod forest;
pub mod grid;
pub mod linear;
pub mod mlp;
pub mod pipeline;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ClassLabel, Dataset, FeatureId, FeatureVector};

/// The four supported classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Svm,
    Dt,
    Rf,
    Mlp,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [
        ModelFamily::Svm,
        ModelFamily::Dt,
        ModelFamily::Rf,
        ModelFamily::Mlp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::Svm => "svm",
            ModelFamily::Dt => "dt",
            ModelFamily::Rf => "rf",
            ModelFamily::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Result<ModelFamily> {
        match s {
            "svm" => Ok(ModelFamily::Svm),
            "dt" => Ok(ModelFamily::Dt),
            "rf" => Ok(ModelFamily::Rf),
            "mlp" => Ok(ModelFamily::Mlp),
            other => Err(Error::InvalidInput(format!("unknown model family {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Float(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(v) if *v >= 0 => Some(*v as usize),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// Ordered hyperparameter assignment (deterministic serialization).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamMap(pub BTreeMap<String, ParamValue>);

impl ParamMap {
    pub fn new() -> Self {
        ParamMap(BTreeMap::new())
    }

    pub fn set(mut self, key: &str, value: ParamValue) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }
}

/// Range/choice constraints for one parameter of one family.
enum ParamRule {
    FloatRange(f64, f64),
    IntRange(i64, i64),
    Choice(&'static [&'static str]),
}

fn param_rules(family: ModelFamily) -> Vec<(&'static str, ParamRule)> {
    match family {
        ModelFamily::Svm => vec![
            ("c", ParamRule::FloatRange(0.01, 100.0)),
            ("gamma", ParamRule::FloatRange(0.001, 1.0)),
            ("kernel", ParamRule::Choice(&["linear", "polynomial", "rbf"])),
        ],
        ModelFamily::Dt => vec![
            ("max_depth", ParamRule::IntRange(2, 10)),
            ("min_samples_split", ParamRule::IntRange(2, 10)),
            ("min_samples_leaf", ParamRule::IntRange(1, 10)),
        ],
        ModelFamily::Rf => vec![
            ("max_depth", ParamRule::IntRange(2, 10)),
            ("min_samples_split", ParamRule::IntRange(2, 10)),
            ("min_samples_leaf", ParamRule::IntRange(1, 10)),
            ("n_estimators", ParamRule::IntRange(10, 100)),
        ],
        ModelFamily::Mlp => vec![
            ("hidden_layers", ParamRule::IntRange(1, 3)),
            ("hidden_nodes", ParamRule::IntRange(10, 1000)),
            ("activation", ParamRule::Choice(&["logistic", "tanh", "relu"])),
            ("solver", ParamRule::Choice(&["adam", "sgd"])),
            ("alpha", ParamRule::FloatRange(0.0001, 0.1)),
        ],
    }
}

/// Calibrated default hyperparameters per family.
pub fn default_params(family: ModelFamily) -> ParamMap {
    match family {
        ModelFamily::Svm => ParamMap::new()
            .set("kernel", ParamValue::Text("linear".into()))
            .set("c", ParamValue::Float(1.0))
            .set("gamma", ParamValue::Float(0.001)),
        ModelFamily::Dt => ParamMap::new()
            .set("max_depth", ParamValue::Int(2))
            .set("min_samples_split", ParamValue::Int(4))
            .set("min_samples_leaf", ParamValue::Int(8)),
        ModelFamily::Rf => ParamMap::new()
            .set("n_estimators", ParamValue::Int(40))
            .set("max_depth", ParamValue::Int(9))
            .set("min_samples_split", ParamValue::Int(5))
            .set("min_samples_leaf", ParamValue::Int(4)),
        ModelFamily::Mlp => ParamMap::new()
            .set("solver", ParamValue::Text("adam".into()))
            .set("hidden_layers", ParamValue::Int(1))
            .set("hidden_nodes", ParamValue::Int(50))
            .set("alpha", ParamValue::Float(0.1))
            .set("activation", ParamValue::Text("relu".into())),
    }
}

/// Fills defaults and validates names, types and documented ranges.
pub fn resolve_params(family: ModelFamily, params: &ParamMap) -> Result<ParamMap> {
    let rules = param_rules(family);
    for key in params.0.keys() {
        if !rules.iter().any(|(k, _)| k == key) {
            return Err(Error::InvalidInput(format!(
                "unknown hyperparameter {key:?} for family {family}"
            )));
        }
    }
    let mut resolved = default_params(family);
    for (k, v) in &params.0 {
        resolved.0.insert(k.clone(), v.clone());
    }
    for (key, rule) in &rules {
        let v = resolved.get(key).expect("default exists");
        let ok = match rule {
            ParamRule::FloatRange(lo, hi) => v
                .as_f64()
                .map(|x| x >= *lo && x <= *hi)
                .unwrap_or(false),
            ParamRule::IntRange(lo, hi) => matches!(v, ParamValue::Int(x) if x >= lo && x <= hi),
            ParamRule::Choice(opts) => v
                .as_str()
                .map(|s| opts.contains(&s))
                .unwrap_or(false),
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "hyperparameter {key:?} = {v:?} outside the documented range for {family}"
            )));
        }
    }
    Ok(resolved)
}

/// A fitted classifier with its training schema.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub family: ModelFamily,
    pub classes: Vec<ClassLabel>,
    pub schema: Vec<FeatureId>,
    inner: ModelInner,
}

#[derive(Debug, Clone)]
enum ModelInner {
    Svm(svm::SvmOvr),
    Dt(tree::DecisionTree),
    Rf(forest::RandomForest),
    Mlp(mlp::MlpNet),
}

impl TrainedModel {
    /// Predicts the class of one raw feature row (no schema check).
    pub fn predict_row(&self, x: &[f64]) -> ClassLabel {
        let idx = match &self.inner {
            ModelInner::Svm(m) => m.predict(x),
            ModelInner::Dt(m) => m.predict(x),
            ModelInner::Rf(m) => m.predict(x),
            ModelInner::Mlp(m) => m.predict(x),
        };
        self.classes[idx]
    }

    /// Direct access to the first tree of a random forest (for parity checks).
    pub fn forest_trees(&self) -> Option<&[tree::DecisionTree]> {
        match &self.inner {
            ModelInner::Rf(m) => Some(&m.trees),
            _ => None,
        }
    }
}

/// Schema-checked prediction.
pub fn predict(model: &TrainedModel, features: &FeatureVector) -> Result<ClassLabel> {
    features.validate()?;
    if features.values.len() != model.schema.len() {
        return Err(Error::DimensionMismatch(format!(
            "feature vector length {} does not match training schema length {}",
            features.values.len(),
            model.schema.len()
        )));
    }
    if features.feature_ids != model.schema {
        return Err(Error::InvalidInput(
            "feature identities do not match the training schema".into(),
        ));
    }
    Ok(model.predict_row(&features.values))
}

/// Trains one classifier. Deterministic given `(family, params, data, seed)`.
pub fn train(
    family: ModelFamily,
    params: &ParamMap,
    data: &Dataset,
    seed: u64,
) -> Result<TrainedModel> {
    data.validate()?;
    let classes = data.classes_present();
    if classes.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training data holds a single class ({:?}); nothing to separate",
            classes.first()
        )));
    }
    let resolved = resolve_params(family, params)?;
    let y: Vec<usize> = data
        .labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let inner = match family {
        ModelFamily::Svm => ModelInner::Svm(svm::SvmOvr::fit(
            &data.features,
            &y,
            classes.len(),
            &resolved,
        )?),
        ModelFamily::Dt => ModelInner::Dt(tree::DecisionTree::fit(
            &data.features,
            &y,
            classes.len(),
            &tree::TreeParams::from_map(&resolved)?,
            None,
        )),
        ModelFamily::Rf => ModelInner::Rf(forest::RandomForest::fit(
            &data.features,
            &y,
            classes.len(),
            &resolved,
            seed,
        )?),
        ModelFamily::Mlp => ModelInner::Mlp(mlp::MlpNet::fit(
            &data.features,
            &y,
            classes.len(),
            &resolved,
            seed,
        )?),
    };
    Ok(TrainedModel {
        family,
        classes,
        schema: data.feature_ids.clone(),
        inner,
    })
}

/// Fraction of rows the model labels correctly.
pub fn accuracy(model: &TrainedModel, data: &Dataset) -> f64 {
    let mut hits = 0usize;
    for r in 0..data.n_rows() {
        let row: Vec<f64> = data.features.row(r).to_vec();
        if model.predict_row(&row) == data.labels[r] {
            hits += 1;
        }
    }
    hits as f64 / data.n_rows().max(1) as f64
}


#[cfg(test)]
mod tests {
    use super::test_fixtures::*;
    use super::*;

    #[test]
    fn params_validate_names_and_ranges() {
        assert!(resolve_params(ModelFamily::Svm, &ParamMap::new()).is_ok());
        assert!(resolve_params(
            ModelFamily::Svm,
            &ParamMap::new().set("c", ParamValue::Float(1000.0))
        )
        .is_err());
        assert!(resolve_params(
            ModelFamily::Svm,
            &ParamMap::new().set("bogus", ParamValue::Int(1))
        )
        .is_err());
        assert!(resolve_params(
            ModelFamily::Dt,
            &ParamMap::new().set("max_depth", ParamValue::Int(50))
        )
        .is_err());
        assert!(resolve_params(
            ModelFamily::Mlp,
            &ParamMap::new().set("activation", ParamValue::Text("swish".into()))
        )
        .is_err());
    }

    #[test]
    fn all_families_beat_majority_baseline_with_defaults() {
        let data = blobs(20, 42);
        let baseline = majority_fraction(&data.labels);
        for family in ModelFamily::ALL {
            let model = train(family, &default_params(family), &data, 7).unwrap();
            let acc = accuracy(&model, &data);
            assert!(
                acc >= baseline,
                "{family} training accuracy {acc} below baseline {baseline}"
            );
            assert!(acc >= 0.95, "{family} training accuracy {acc}");
        }
    }

    #[test]
    fn single_class_data_rejected() {
        let mut data = blobs(10, 1);
        data.labels = vec![ClassLabel::Low; data.labels.len()];
        for family in ModelFamily::ALL {
            assert!(train(family, &default_params(family), &data, 0).is_err());
        }
    }

    #[test]
    fn predictions_are_deterministic_and_schema_checked() {
        let data = blobs(15, 3);
        let model = train(ModelFamily::Rf, &default_params(ModelFamily::Rf), &data, 11).unwrap();
        let fv = FeatureVector {
            values: data.features.row(0).to_vec(),
            feature_ids: data.feature_ids.clone(),
        };
        let a = predict(&model, &fv).unwrap();
        let b = predict(&model, &fv).unwrap();
        assert_eq!(a, b);
        let short = FeatureVector {
            values: vec![0.0],
            feature_ids: vec![data.feature_ids[0].clone()],
        };
        assert!(predict(&model, &short).is_err());
    }

    #[test]
    fn unlimited_depth_tree_memorizes_training_points() {
        let data = blobs(15, 5);
        let params = ParamMap::new()
            .set("max_depth", ParamValue::Int(10))
            .set("min_samples_split", ParamValue::Int(2))
            .set("min_samples_leaf", ParamValue::Int(1));
        let model = train(ModelFamily::Dt, &params, &data, 0).unwrap();
        assert_eq!(accuracy(&model, &data), 1.0);
    }

    #[test]
    fn mlp_with_calibrated_defaults_trains() {
        let data = blobs(10, 9);
        let model = train(ModelFamily::Mlp, &default_params(ModelFamily::Mlp), &data, 1).unwrap();
        let acc = accuracy(&model, &data);
        assert!(acc >= 0.95, "training accuracy {acc}");
    }
}
