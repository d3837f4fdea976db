//! Problem data model and exact evaluation of the multinomial logit objective.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn euclidean(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn manhattan(&self, other: &Point2D) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacilityKind {
    Candidate,
    Competitor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facility {
    pub id: usize,
    pub position: Point2D,
    pub kind: FacilityKind,
    /// Location type, present only for typed families.
    pub location_type: Option<u8>,
}

impl Facility {
    pub fn candidate(id: usize, position: Point2D) -> Self {
        Facility {
            id,
            position,
            kind: FacilityKind::Candidate,
            location_type: None,
        }
    }

    pub fn competitor(id: usize, position: Point2D) -> Self {
        Facility {
            id,
            position,
            kind: FacilityKind::Competitor,
            location_type: None,
        }
    }

    pub fn with_type(mut self, location_type: u8) -> Self {
        self.location_type = Some(location_type);
        self
    }
}

/// Finite-support maximum capture problem.
///
/// `utilities` is row-major with one row per customer; each row lists the
/// deterministic utilities of the candidates followed by the competitors.
/// Utilities are stored already scaled, so solvers never see model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceInstance {
    candidates: Vec<Facility>,
    competitors: Vec<Facility>,
    utilities: Vec<f64>,
    weights: Vec<f64>,
    budget: usize,
}

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

impl ChoiceInstance {
    /// Builds and validates an instance. `weights = None` means uniform weights.
    pub fn new(
        candidates: Vec<Facility>,
        competitors: Vec<Facility>,
        utilities: Vec<f64>,
        weights: Option<Vec<f64>>,
        budget: usize,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidInstance(msg));
        let stride = candidates.len() + competitors.len();
        if candidates.is_empty() {
            return invalid("no candidate facilities".into());
        }
        if !utilities.len().is_multiple_of(stride) || utilities.is_empty() {
            return invalid(format!(
                "utility matrix of {} entries is not a nonempty multiple of {stride} alternatives",
                utilities.len()
            ));
        }
        let n = utilities.len() / stride;
        if let Some(i) = utilities.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite utility for customer {}", i / stride));
        }
        let weights = match weights {
            Some(w) => w,
            None => vec![1.0 / n as f64; n],
        };
        if weights.len() != n {
            return invalid(format!("{} weights for {n} customers", weights.len()));
        }
        if let Some(i) = weights.iter().position(|q| !(q.is_finite() && *q > 0.0)) {
            return invalid(format!("weight of customer {i} is not positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return invalid(format!("weights sum to {total}, expected 1"));
        }
        if budget < 1 || budget > candidates.len() {
            return invalid(format!(
                "budget {budget} outside 1..={}",
                candidates.len()
            ));
        }
        let mut ids = HashSet::new();
        for f in candidates.iter().chain(&competitors) {
            if !ids.insert(f.id) {
                return invalid(format!("duplicate facility id {}", f.id));
            }
            if !f.position.is_finite() {
                return invalid(format!("facility {} has a non-finite position", f.id));
            }
        }
        if candidates.iter().any(|f| f.kind != FacilityKind::Candidate)
            || competitors.iter().any(|f| f.kind != FacilityKind::Competitor)
        {
            return invalid("facility kind does not match its list".into());
        }
        let typed = candidates
            .iter()
            .chain(&competitors)
            .filter(|f| f.location_type.is_some())
            .count();
        if typed != 0 && typed != stride {
            return invalid("location types must be given for all facilities or none".into());
        }
        Ok(ChoiceInstance {
            candidates,
            competitors,
            utilities,
            weights,
            budget,
        })
    }

    pub fn candidates(&self) -> &[Facility] {
        &self.candidates
    }

    pub fn competitors(&self) -> &[Facility] {
        &self.competitors
    }

    pub fn n_customers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn n_competitors(&self) -> usize {
        self.competitors.len()
    }

    pub fn n_alternatives(&self) -> usize {
        self.candidates.len() + self.competitors.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every customer carries exactly the same weight.
    pub fn has_uniform_weights(&self) -> bool {
        self.weights.iter().all(|q| *q == self.weights[0])
    }

    /// Utilities of customer `n`, candidates first.
    pub fn utilities(&self, n: usize) -> &[f64] {
        let stride = self.n_alternatives();
        &self.utilities[n * stride..(n + 1) * stride]
    }

    pub fn candidate_utilities(&self, n: usize) -> &[f64] {
        &self.utilities(n)[..self.n_candidates()]
    }

    pub fn competitor_utilities(&self, n: usize) -> &[f64] {
        &self.utilities(n)[self.n_candidates()..]
    }

    /// Same instance with another budget.
    pub fn with_budget(&self, budget: usize) -> Result<Self> {
        ChoiceInstance::new(
            self.candidates.clone(),
            self.competitors.clone(),
            self.utilities.clone(),
            Some(self.weights.clone()),
            budget,
        )
    }

    pub fn check_decision(&self, x: &DecisionVector) -> Result<()> {
        if x.len() != self.n_candidates() {
            return Err(Error::DecisionLength {
                got: x.len(),
                expected: self.n_candidates(),
            });
        }
        if x.count() > self.budget {
            return Err(Error::BudgetExceeded {
                open: x.count(),
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn check_customer(&self, n: usize) -> Result<()> {
        if n >= self.n_customers() {
            return Err(Error::CustomerOutOfRange {
                index: n,
                len: self.n_customers(),
            });
        }
        Ok(())
    }
}

/// Which candidates are opened.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DecisionRepr", into = "DecisionRepr")]
pub struct DecisionVector {
    open: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct DecisionRepr {
    n_candidates: usize,
    open: Vec<usize>,
}

impl TryFrom<DecisionRepr> for DecisionVector {
    type Error = String;

    fn try_from(r: DecisionRepr) -> std::result::Result<Self, String> {
        DecisionVector::from_indices(r.n_candidates, &r.open).map_err(|e| e.to_string())
    }
}

impl From<DecisionVector> for DecisionRepr {
    fn from(x: DecisionVector) -> Self {
        DecisionRepr {
            n_candidates: x.len(),
            open: x.indices(),
        }
    }
}

impl DecisionVector {
    pub fn closed(n_candidates: usize) -> Self {
        DecisionVector {
            open: vec![false; n_candidates],
        }
    }

    pub fn from_bits(open: Vec<bool>) -> Self {
        DecisionVector { open }
    }

    pub fn from_indices(n_candidates: usize, indices: &[usize]) -> Result<Self> {
        let mut open = vec![false; n_candidates];
        for &c in indices {
            if c >= n_candidates {
                return Err(Error::InvalidParameter(format!(
                    "candidate {c} out of range for {n_candidates} candidates"
                )));
            }
            open[c] = true;
        }
        Ok(DecisionVector { open })
    }

    /// The first `r` candidates: the lexicographically smallest decision of size `r`.
    pub fn first(n_candidates: usize, r: usize) -> Self {
        let mut open = vec![false; n_candidates];
        open[..r.min(n_candidates)].fill(true);
        DecisionVector { open }
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn count(&self) -> usize {
        self.open.iter().filter(|b| **b).count()
    }

    pub fn is_open(&self, c: usize) -> bool {
        self.open[c]
    }

    pub fn set(&mut self, c: usize, open: bool) {
        self.open[c] = open;
    }

    pub fn bits(&self) -> &[bool] {
        &self.open
    }

    pub fn indices(&self) -> Vec<usize> {
        self.open
            .iter()
            .enumerate()
            .filter_map(|(c, b)| b.then_some(c))
            .collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.open.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Componentwise `self <= other`.
    pub fn is_subset_of(&self, other: &DecisionVector) -> bool {
        self.open.len() == other.open.len()
            && self.open.iter().zip(&other.open).all(|(a, b)| !a || *b)
    }

    /// Tie-break order shared by every solver: compare the ascending lists of
    /// opened indices, so `{0, 1} < {0, 2} < {1, 2}`.
    pub fn lex_cmp(&self, other: &DecisionVector) -> Ordering {
        self.indices().cmp(&other.indices())
    }
}

impl fmt::Display for DecisionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices().iter().map(|c| c.to_string()).collect();
        write!(f, "{{{}}}", idx.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Simulation route, unclustered coverage rows.
    Sb,
    /// Simulation route with profile clustering.
    Sbc,
    /// Multicut outer approximation.
    Moa,
    /// Exhaustive enumeration.
    Brute,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sb => "sb",
            Method::Sbc => "sbc",
            Method::Moa => "moa",
            Method::Brute => "brute",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sb" => Ok(Method::Sb),
            "sbc" => Ok(Method::Sbc),
            "moa" => Ok(Method::Moa),
            "brute" => Ok(Method::Brute),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub decision: DecisionVector,
    /// Objective of the problem the method solved, as a market share in [0, 1].
    pub objective: f64,
    pub method: Method,
    #[serde(with = "duration_ms")]
    pub wall_time: Duration,
    /// Branch-and-bound nodes or outer-approximation iterations.
    pub iterations: u64,
    /// False when a node, time or iteration limit stopped the search.
    pub optimal: bool,
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1e3))
    }
}

/// `W[n]`: summed exponentiated utility of all competitors for customer `n`.
pub fn competitor_mass(instance: &ChoiceInstance, n: usize) -> Result<f64> {
    instance.check_customer(n)?;
    Ok(instance.competitor_utilities(n).iter().map(|v| v.exp()).sum())
}

/// Multinomial logit choice probabilities over one open set.
pub fn mnl_probabilities(utilities: &[f64]) -> Result<Vec<f64>> {
    if utilities.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = utilities.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Ok(p)
}

pub(crate) fn log_sum_exp<I: IntoIterator<Item = f64> + Clone>(values: I) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Probability that customer `n` picks one of the opened candidates.
pub fn capture_probability(instance: &ChoiceInstance, n: usize, x: &DecisionVector) -> Result<f64> {
    instance.check_customer(n)?;
    instance.check_decision(x)?;
    Ok(capture_unchecked(instance, n, x))
}

pub(crate) fn capture_unchecked(instance: &ChoiceInstance, n: usize, x: &DecisionVector) -> f64 {
    let cand = instance.candidate_utilities(n);
    let open = cand
        .iter()
        .zip(x.bits())
        .filter_map(|(v, &b)| b.then_some(*v));
    if x.count() == 0 {
        return 0.0;
    }
    if instance.n_competitors() == 0 {
        return 1.0;
    }
    let ls_open = log_sum_exp(open);
    let ls_comp = log_sum_exp(instance.competitor_utilities(n).iter().copied());
    // s / (s + W) = 1 / (1 + exp(ln W - ln s))
    1.0 / (1.0 + (ls_comp - ls_open).exp())
}

/// Expected captured market share `Z_N(x)`.
pub fn objective_mnl(instance: &ChoiceInstance, x: &DecisionVector) -> Result<f64> {
    instance.check_decision(x)?;
    Ok(objective_unchecked(instance, x))
}

pub(crate) fn objective_unchecked(instance: &ChoiceInstance, x: &DecisionVector) -> f64 {
    (0..instance.n_customers())
        .map(|n| instance.weights()[n] * capture_unchecked(instance, n, x))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}
