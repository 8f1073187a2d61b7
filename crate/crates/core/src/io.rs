//! Model files and numeric output formatting.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lattice::DescriptionSet;
use crate::probability::{JointDistribution, VariableSpec};
use crate::regions::{
    AuxModel, DistortionMeasure, DistortionSpec, MinRates, Role, RoleKind, Scheme,
};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub name: String,
    pub kind: RoleKind,
    pub subset: Vec<usize>,
}

fn default_source() -> String {
    "X".to_string()
}

fn default_true() -> bool {
    true
}

/// On-disk model: the probability schema plus roles and distortions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "L")]
    pub l: usize,
    pub scheme: Scheme,
    pub variables: Vec<VariableSpec>,
    pub probs: Vec<f64>,
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default)]
    pub roles: Vec<RoleSpec>,
    #[serde(default)]
    pub distortions: BTreeMap<String, DistortionMeasure>,
    #[serde(default = "default_true")]
    pub vkg_last_term_conditions_on_shared: bool,
}

impl ModelFile {
    pub fn from_model<T: Scalar>(model: &AuxModel<T>, dspec: &DistortionSpec) -> Self {
        let j = model.joint();
        let roles = model
            .roles()
            .into_iter()
            .filter(|r| {
                let ix = j.index_of(&r.name).expect("role names resolve");
                j.alphabet(ix) > 1
            })
            .map(|r| RoleSpec {
                name: r.name,
                kind: r.kind,
                subset: r.subset.members(),
            })
            .collect();
        // Materialized constants are dropped; they are recreated on load.
        let keep: Vec<usize> = (0..j.num_vars())
            .filter(|&i| i == model.source_var() || j.alphabet(i) > 1)
            .collect();
        let marg = j.marginalize_set(crate::probability::VarSet::from_indices(keep));
        Self {
            l: model.l(),
            scheme: model.scheme(),
            variables: marg.vars().to_vec(),
            probs: marg.probs().iter().map(|p| p.as_f64()).collect(),
            source: model.source_name().to_string(),
            roles,
            distortions: dspec.to_json_map(),
            vkg_last_term_conditions_on_shared: model.vkg_last_term_conditions_on_shared(),
        }
    }

    pub fn to_model<T: Scalar>(&self) -> Result<(AuxModel<T>, DistortionSpec)> {
        let probs = self.probs.iter().map(|&p| T::lit(p)).collect();
        let joint = JointDistribution::new(self.variables.clone(), probs)?;
        let roles = self
            .roles
            .iter()
            .map(|r| {
                Ok(Role::new(
                    r.name.clone(),
                    r.kind,
                    DescriptionSet::new(self.l, &r.subset)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut model = AuxModel::new(self.l, self.scheme, joint, &self.source, &roles)?;
        model.set_vkg_last_term_conditions_on_shared(self.vkg_last_term_conditions_on_shared);
        let dspec = DistortionSpec::from_json_map(self.l, &self.distortions)?;
        let nx = model.joint().alphabet(model.source_var());
        for m in dspec.measures.values() {
            m.validate(nx)?;
        }
        Ok((model, dspec))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<(AuxModel<T>, DistortionSpec)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    ModelFile::from_json(&text)?.to_model()
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Shortest decimal rendering of `x` rounded to `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

/// Rounds every float inside a JSON value to `digits` significant digits.
pub fn round_json(v: Value, digits: usize) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64"), digits);
            serde_json::Number::from_f64(x)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(|x| round_json(x, digits)).collect()),
        Value::Object(o) => Value::Object(
            o.into_iter()
                .map(|(k, x)| (k, round_json(x, digits)))
                .collect(),
        ),
        other => other,
    }
}

/// `{"rates": [...], "allocation": {...} | null, "distortions": {...}}`.
pub fn rates_json<T: Scalar>(r: &MinRates<T>) -> Value {
    let v = serde_json::json!({
        "rates": r.rates,
        "objective": r.objective.as_f64(),
        "allocation": r.allocation,
        "distortions": r.distortions,
    });
    round_json(v, 12)
}
