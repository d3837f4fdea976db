//! JSON instance files.
//!
//! ```json
//! {
//!   "candidates":  [{"id": 0, "x": 1.5, "y": 2.0, "type": 1}],
//!   "competitors": [{"id": 1, "x": 0.0, "y": 4.0, "type": 0}],
//!   "r": 1,
//!   "customers":   [{"q": 1.0, "v": [-1.2, -0.4]}]
//! }
//! ```
//!
//! `v` lists candidate utilities first, then competitor utilities. `type` is
//! optional. `q` is either given for every customer or for none, in which
//! case weights are uniform.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChoiceInstance, Facility, Point2D};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FacilityRecord {
    id: usize,
    x: f64,
    y: f64,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    location_type: Option<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomerRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    candidates: Vec<FacilityRecord>,
    #[serde(default)]
    competitors: Vec<FacilityRecord>,
    r: usize,
    customers: Vec<CustomerRecord>,
}

fn record(f: &Facility) -> FacilityRecord {
    FacilityRecord {
        id: f.id,
        x: f.position.x,
        y: f.position.y,
        location_type: f.location_type,
    }
}

fn facility(rec: &FacilityRecord, candidate: bool) -> Facility {
    let p = Point2D::new(rec.x, rec.y);
    let f = if candidate {
        Facility::candidate(rec.id, p)
    } else {
        Facility::competitor(rec.id, p)
    };
    match rec.location_type {
        Some(t) => f.with_type(t),
        None => f,
    }
}

pub fn instance_to_json(instance: &ChoiceInstance) -> Result<String> {
    let n = instance.n_customers();
    let implicit = instance.weights().iter().all(|q| *q == 1.0 / n as f64);
    let file = InstanceFile {
        candidates: instance.candidates().iter().map(record).collect(),
        competitors: instance.competitors().iter().map(record).collect(),
        r: instance.budget(),
        customers: (0..n)
            .map(|i| CustomerRecord {
                q: (!implicit).then(|| instance.weights()[i]),
                v: instance.utilities(i).to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses an instance; `origin` names the source in error messages.
pub fn instance_from_json(text: &str, origin: &Path) -> Result<ChoiceInstance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let stride = file.candidates.len() + file.competitors.len();
    let given = file.customers.iter().filter(|c| c.q.is_some()).count();
    if given != 0 && given != file.customers.len() {
        return Err(Error::InvalidInstance(
            "weights must be given for all customers or none".into(),
        ));
    }
    let mut utilities = Vec::with_capacity(file.customers.len() * stride);
    for (i, c) in file.customers.iter().enumerate() {
        if c.v.len() != stride {
            return Err(Error::InvalidInstance(format!(
                "customer {i} has {} utilities, expected {stride}",
                c.v.len()
            )));
        }
        utilities.extend_from_slice(&c.v);
    }
    let weights = (given > 0).then(|| file.customers.iter().map(|c| c.q.unwrap_or(0.0)).collect());
    ChoiceInstance::new(
        file.candidates.iter().map(|f| facility(f, true)).collect(),
        file.competitors.iter().map(|f| facility(f, false)).collect(),
        utilities,
        weights,
        file.r,
    )
}

pub fn save_instance(instance: &ChoiceInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, instance_to_json(instance)?).map_err(|e| Error::io(path, e))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ChoiceInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    instance_from_json(&text, path)
}
