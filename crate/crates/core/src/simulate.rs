//! Simulation route: noise scenarios turned into 0-1 coverage rows, and the
//! profile clustering that shrinks them.
//!
//! Every simulated customer `(n, s)` gets the binary row
//! `a[c] = 1 iff v[n][c] + xi[c] >= max_{k in E} (v[n][k] + xi[k])`, i.e. the
//! candidates that would beat every competitor under that draw. The firm
//! captures the customer iff it opens at least one candidate of the row.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::NoiseModel;
use crate::model::ChoiceInstance;
use crate::rng;

pub(crate) fn words_for(n_candidates: usize) -> usize {
    n_candidates.div_ceil(64).max(1)
}

/// Weight attached to each coverage row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowWeights {
    /// Every row weighs the same; masses are then tracked as exact counts.
    Uniform(f64),
    PerRow(Vec<f64>),
}

/// Unclustered simulation problem: one packed bit row per simulated customer.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageProblem {
    n_candidates: usize,
    budget: usize,
    words: usize,
    bits: Vec<u64>,
    weights: RowWeights,
}

impl CoverageProblem {
    /// Builds a problem from explicit rows.
    pub fn from_rows(
        n_candidates: usize,
        budget: usize,
        rows: &[Vec<bool>],
        weights: RowWeights,
    ) -> Result<Self> {
        let words = words_for(n_candidates);
        let mut bits = vec![0u64; rows.len() * words];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_candidates {
                return Err(Error::InvalidInstance(format!(
                    "row {i} has {} entries, expected {n_candidates}",
                    row.len()
                )));
            }
            for (c, _) in row.iter().enumerate().filter(|(_, b)| **b) {
                bits[i * words + c / 64] |= 1 << (c % 64);
            }
        }
        Self::from_packed(n_candidates, budget, bits, weights)
    }

    pub(crate) fn from_packed(
        n_candidates: usize,
        budget: usize,
        bits: Vec<u64>,
        weights: RowWeights,
    ) -> Result<Self> {
        let words = words_for(n_candidates);
        let n_rows = bits.len() / words;
        if n_candidates == 0 || budget == 0 || budget > n_candidates {
            return Err(Error::InvalidInstance(format!(
                "budget {budget} outside 1..={n_candidates}"
            )));
        }
        match &weights {
            RowWeights::Uniform(w) => {
                if !(*w > 0.0) {
                    return Err(Error::InvalidInstance("row weight must be positive".into()));
                }
            }
            RowWeights::PerRow(w) => {
                if w.len() != n_rows {
                    return Err(Error::InvalidInstance(format!(
                        "{} weights for {n_rows} rows",
                        w.len()
                    )));
                }
                if w.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::InvalidInstance("row weights must be positive".into()));
                }
            }
        }
        Ok(CoverageProblem {
            n_candidates,
            budget,
            words,
            bits,
            weights,
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn n_rows(&self) -> usize {
        self.bits.len() / self.words
    }

    pub fn weights(&self) -> &RowWeights {
        &self.weights
    }

    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        unpack(self.row_words(i), self.n_candidates)
    }

    pub fn row_weight(&self, i: usize) -> f64 {
        match &self.weights {
            RowWeights::Uniform(w) => *w,
            RowWeights::PerRow(w) => w[i],
        }
    }

    /// Every row becomes its own profile (zero rows still dropped), so the
    /// exact solver can be run on the unclustered problem.
    pub fn as_unclustered(&self) -> ClusteredProblem {
        let unit = match &self.weights {
            RowWeights::Uniform(w) => *w,
            RowWeights::PerRow(_) => 1.0,
        };
        let mass_of = |i: usize| match &self.weights {
            RowWeights::Uniform(_) => 1.0,
            RowWeights::PerRow(w) => w[i],
        };
        let mut profiles = Vec::new();
        let mut mass = Vec::new();
        let mut total = Vec::with_capacity(self.n_rows());
        for i in 0..self.n_rows() {
            let row = self.row_words(i);
            total.push(mass_of(i));
            if row.iter().any(|w| *w != 0) {
                profiles.extend_from_slice(row);
                mass.push(mass_of(i));
            }
        }
        ClusteredProblem {
            n_candidates: self.n_candidates,
            budget: self.budget,
            words: self.words,
            profiles,
            mass,
            total_mass: neumaier_sum(total),
            unit,
        }
    }
}

fn unpack(words: &[u64], n: usize) -> Vec<bool> {
    (0..n).map(|c| words[c / 64] >> (c % 64) & 1 == 1).collect()
}

/// Compensated summation.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Distinct preference profiles with aggregated mass.
///
/// Masses are expressed in units of `unit`: with uniform row weights they are
/// exact integer counts. `total_mass` also counts the dropped all-zero profile,
/// so objectives are fractions of the whole simulated market.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredProblem {
    n_candidates: usize,
    budget: usize,
    words: usize,
    profiles: Vec<u64>,
    mass: Vec<f64>,
    total_mass: f64,
    unit: f64,
}

impl ClusteredProblem {
    /// Builds a problem from explicit profiles. Zero profiles are dropped
    /// (their mass stays in the total), duplicates are not merged.
    pub fn new(
        n_candidates: usize,
        budget: usize,
        profiles: &[Vec<bool>],
        mass: Vec<f64>,
        total_mass: f64,
    ) -> Result<Self> {
        if profiles.len() != mass.len() {
            return Err(Error::InvalidInstance("one mass per profile expected".into()));
        }
        if mass.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidInstance("profile masses must be positive".into()));
        }
        let coverage = CoverageProblem::from_rows(
            n_candidates,
            budget,
            profiles,
            RowWeights::PerRow(mass.clone()),
        )?;
        let mut p = coverage.as_unclustered();
        if total_mass + 1e-12 < p.total_mass {
            return Err(Error::InvalidInstance(
                "total mass below the sum of profile masses".into(),
            ));
        }
        p.total_mass = total_mass;
        Ok(p)
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn n_profiles(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Weight represented by one unit of mass.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn profile_words(&self, p: usize) -> &[u64] {
        &self.profiles[p * self.words..(p + 1) * self.words]
    }

    pub fn profile(&self, p: usize) -> Vec<bool> {
        unpack(self.profile_words(p), self.n_candidates)
    }

    pub fn covers(&self, p: usize, c: usize) -> bool {
        self.profiles[p * self.words + c / 64] >> (c % 64) & 1 == 1
    }

    pub fn with_budget(&self, budget: usize) -> Result<Self> {
        if budget == 0 || budget > self.n_candidates {
            return Err(Error::InvalidParameter(format!(
                "budget {budget} outside 1..={}",
                self.n_candidates
            )));
        }
        Ok(ClusteredProblem {
            budget,
            ..self.clone()
        })
    }

    /// Mass covered by opening `open` (raw mass units).
    pub fn covered_mass(&self, open: &[bool]) -> f64 {
        let mut mask = vec![0u64; self.words];
        for (c, _) in open.iter().enumerate().filter(|(_, b)| **b) {
            mask[c / 64] |= 1 << (c % 64);
        }
        neumaier_sum((0..self.n_profiles()).filter_map(|p| {
            self.profile_words(p)
                .iter()
                .zip(&mask)
                .any(|(a, m)| a & m != 0)
                .then_some(self.mass[p])
        }))
    }

    /// Captured fraction of the total market for `open`.
    pub fn objective(&self, open: &[bool]) -> f64 {
        if self.total_mass == 0.0 {
            return 0.0;
        }
        self.covered_mass(open) / self.total_mass
    }

    /// Back to coverage form: one row per profile plus, when some mass was
    /// dropped, a zero row carrying it.
    pub fn as_coverage(&self) -> CoverageProblem {
        let mut bits = self.profiles.clone();
        let mut weights: Vec<f64> = self.mass.iter().map(|m| m * self.unit).collect();
        let dropped = self.total_mass - self.mass.iter().sum::<f64>();
        if dropped > 0.0 {
            bits.extend(std::iter::repeat_n(0, self.words));
            weights.push(dropped * self.unit);
        }
        CoverageProblem {
            n_candidates: self.n_candidates,
            budget: self.budget,
            words: self.words,
            bits,
            weights: RowWeights::PerRow(weights),
        }
    }
}

/// Candidates that beat every competitor for one noisy utility vector.
/// Ties count as a win; with no competitors every candidate wins.
pub fn capture_row(utilities: &[f64], n_candidates: usize) -> Vec<bool> {
    let mut words = vec![0u64; words_for(n_candidates)];
    fill_capture_words(utilities, n_candidates, &mut words);
    unpack(&words, n_candidates)
}

fn fill_capture_words(utilities: &[f64], n_candidates: usize, out: &mut [u64]) {
    let best_competitor = utilities[n_candidates..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    out.fill(0);
    for (c, u) in utilities[..n_candidates].iter().enumerate() {
        if *u >= best_competitor {
            out[c / 64] |= 1 << (c % 64);
        }
    }
}

/// Customers handled by one noise sub-stream.
const CUSTOMER_CHUNK: usize = 256;

/// Builds the `|N| * |S|` coverage rows for an instance. Row `(n, s)` sits at
/// index `n * |S| + s`; weights are `q[n] / |S|`.
pub fn build_coverage(
    instance: &ChoiceInstance,
    n_scenarios: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<CoverageProblem> {
    if n_scenarios == 0 {
        return Err(Error::InvalidParameter("at least one scenario is required".into()));
    }
    let d = instance.n_candidates();
    let stride = instance.n_alternatives();
    let words = words_for(d);
    let n = instance.n_customers();
    let mut bits = vec![0u64; n * n_scenarios * words];
    bits.par_chunks_mut(CUSTOMER_CHUNK * n_scenarios * words)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = rng::substream(seed, rng::SCENARIOS, chunk as u64);
            let mut noisy = vec![0.0; stride];
            for (i, row) in out.chunks_mut(words).enumerate() {
                let customer = chunk * CUSTOMER_CHUNK + i / n_scenarios;
                for (u, v) in noisy.iter_mut().zip(instance.utilities(customer)) {
                    *u = v + noise.draw(&mut rng);
                }
                fill_capture_words(&noisy, d, row);
            }
        });
    let weights = if instance.has_uniform_weights() {
        RowWeights::Uniform(instance.weights()[0] / n_scenarios as f64)
    } else {
        RowWeights::PerRow(
            instance
                .weights()
                .iter()
                .flat_map(|q| std::iter::repeat_n(q / n_scenarios as f64, n_scenarios))
                .collect(),
        )
    };
    CoverageProblem::from_packed(d, instance.budget(), bits, weights)
}

/// Merges identical rows and drops the all-zero profile. Profiles keep their
/// first-occurrence order.
pub fn cluster(problem: &CoverageProblem) -> ClusteredProblem {
    let words = problem.words;
    let uniform = matches!(problem.weights, RowWeights::Uniform(_));
    let unit = match &problem.weights {
        RowWeights::Uniform(w) => *w,
        RowWeights::PerRow(_) => 1.0,
    };
    let mut index: HashMap<&[u64], usize> = HashMap::new();
    let mut profiles = Vec::new();
    let mut mass_terms: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut zero_count = 0u64;
    let mut all_terms = Vec::with_capacity(if uniform { 0 } else { problem.n_rows() });
    for i in 0..problem.n_rows() {
        let row = problem.row_words(i);
        let w = problem.row_weight(i);
        if !uniform {
            all_terms.push(w);
        }
        if row.iter().all(|x| *x == 0) {
            zero_count += 1;
            continue;
        }
        let p = *index.entry(row).or_insert_with(|| {
            profiles.extend_from_slice(row);
            counts.push(0);
            mass_terms.push(Vec::new());
            counts.len() - 1
        });
        counts[p] += 1;
        if !uniform {
            mass_terms[p].push(w);
        }
    }
    let (mass, total_mass) = if uniform {
        let mass: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
        let total = counts.iter().sum::<u64>() + zero_count;
        (mass, total as f64)
    } else {
        let mass = mass_terms.into_iter().map(neumaier_sum).collect();
        (mass, neumaier_sum(all_terms))
    };
    ClusteredProblem {
        n_candidates: problem.n_candidates,
        budget: problem.budget,
        words,
        profiles,
        mass,
        total_mass,
        unit,
    }
}

/// Percentage of decision variables removed by clustering:
/// `100 * (1 - |P| / (|N| |S|))`.
pub fn size_reduction(before: &CoverageProblem, after: &ClusteredProblem) -> f64 {
    if before.n_rows() == 0 {
        return 0.0;
    }
    100.0 * (1.0 - after.n_profiles() as f64 / before.n_rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::instance;
    use crate::model::{objective_mnl, DecisionVector};
    use proptest::prelude::*;

    #[test]
    fn capture_row_examples() {
        assert_eq!(capture_row(&[-3.0, -2.0, -1.0], 2), vec![false, false]);
        assert_eq!(capture_row(&[-3.0, -2.0], 2), vec![true, true]);
        assert_eq!(capture_row(&[1.0, 0.5, 1.0, 0.0], 2), vec![true, false]);
        // > 64 candidates spill into a second word
        let mut u = vec![0.0; 70];
        u.push(0.5);
        u[68] = 1.0;
        let row = capture_row(&u, 70);
        assert_eq!(row.iter().filter(|b| **b).count(), 1);
        assert!(row[68]);
    }

    #[test]
    fn build_coverage_noiseless_limit() {
        let inst = instance(
            &[vec![5.0, -5.0, 0.0], vec![-5.0, 5.0, 0.0], vec![-5.0, -5.0, 0.0]],
            2,
            1,
        );
        let noise = NoiseModel::Normal { sigma: 1e-9 };
        let cov = build_coverage(&inst, 4, &noise, 1).unwrap();
        assert_eq!(cov.n_rows(), 12);
        for s in 0..4 {
            assert_eq!(cov.row(s), vec![true, false]);
            assert_eq!(cov.row(4 + s), vec![false, true]);
            assert_eq!(cov.row(8 + s), vec![false, false]);
        }
        assert_eq!(cov.weights(), &RowWeights::Uniform(1.0 / 12.0));
        assert!(build_coverage(&inst, 0, &noise, 1).is_err());
    }

    #[test]
    fn build_coverage_deterministic() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![(i % 7) as f64 * 0.1, -0.3, 0.1, 0.0]).collect();
        let inst = instance(&rows, 3, 2);
        let a = build_coverage(&inst, 3, &NoiseModel::GumbelStandard, 8).unwrap();
        let b = build_coverage(&inst, 3, &NoiseModel::GumbelStandard, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_rows(), 900);
    }

    #[test]
    fn simulated_capture_frequency_converges_to_mnl() {
        let rows = vec![
            vec![0.2, -0.5, 0.0, 0.3],
            vec![-1.0, 0.4, 0.1, -0.2],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![1.5, -2.0, 0.5, 0.7],
            vec![-0.3, 0.9, -1.2, 0.4],
        ];
        let inst = instance(&rows, 3, 2);
        let x = DecisionVector::from_indices(3, &[0, 2]).unwrap();
        let exact = objective_mnl(&inst, &x).unwrap();
        let cov = build_coverage(&inst, 10_000, &NoiseModel::GumbelStandard, 3).unwrap();
        let clustered = cluster(&cov);
        let sim = clustered.objective(x.bits());
        assert!((sim - exact).abs() / exact < 0.005, "sim {sim} exact {exact}");
    }

    #[test]
    fn cluster_examples() {
        let rows = vec![vec![true, false]; 5];
        let cov = CoverageProblem::from_rows(2, 1, &rows, RowWeights::Uniform(0.2)).unwrap();
        let cl = cluster(&cov);
        assert_eq!(cl.n_profiles(), 1);
        assert_eq!(cl.mass(), &[5.0]);
        assert_eq!(size_reduction(&cov, &cl), 80.0);

        let zeros = vec![vec![false, false]; 4];
        let cov = CoverageProblem::from_rows(2, 1, &zeros, RowWeights::Uniform(0.25)).unwrap();
        let cl = cluster(&cov);
        assert_eq!(cl.n_profiles(), 0);
        assert_eq!(cl.total_mass() * cl.unit(), 1.0);
        assert_eq!(size_reduction(&cov, &cl), 100.0);

        let distinct = vec![vec![true, false], vec![false, true], vec![true, true]];
        let cov = CoverageProblem::from_rows(2, 1, &distinct, RowWeights::Uniform(1.0 / 3.0)).unwrap();
        assert_eq!(size_reduction(&cov, &cluster(&cov)), 0.0);
    }

    #[test]
    fn cluster_keeps_first_occurrence_order() {
        let rows = vec![
            vec![false, true, false],
            vec![true, false, false],
            vec![false, true, false],
            vec![false, false, false],
        ];
        let cov = CoverageProblem::from_rows(3, 1, &rows, RowWeights::Uniform(0.25)).unwrap();
        let cl = cluster(&cov);
        assert_eq!(cl.profile(0), vec![false, true, false]);
        assert_eq!(cl.profile(1), vec![true, false, false]);
        assert_eq!(cl.mass(), &[2.0, 1.0]);
        assert_eq!(cl.total_mass(), 4.0);
    }

    fn arb_coverage() -> impl Strategy<Value = CoverageProblem> {
        (1usize..9, 1usize..40).prop_flat_map(|(d, n)| {
            let rows = prop::collection::vec(prop::collection::vec(any::<bool>(), d), n);
            let weights = prop::collection::vec(0.01f64..1.0, n);
            (Just(d), rows, weights, any::<bool>()).prop_map(|(d, rows, w, uniform)| {
                let weights = if uniform {
                    RowWeights::Uniform(1.0 / rows.len() as f64)
                } else {
                    RowWeights::PerRow(w)
                };
                CoverageProblem::from_rows(d, 1, &rows, weights).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn mass_is_conserved(cov in arb_coverage()) {
            let cl = cluster(&cov);
            let zero: f64 = (0..cov.n_rows())
                .filter(|&i| cov.row_words(i).iter().all(|w| *w == 0))
                .map(|i| match cov.weights() { RowWeights::Uniform(_) => 1.0, RowWeights::PerRow(w) => w[i] })
                .sum();
            let kept: f64 = cl.mass().iter().sum();
            match cov.weights() {
                RowWeights::Uniform(_) => prop_assert_eq!(kept + zero, cov.n_rows() as f64),
                RowWeights::PerRow(w) => {
                    let total: f64 = w.iter().sum();
                    prop_assert!((kept + zero - total).abs() < 1e-12);
                    prop_assert!((cl.total_mass() - total).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn clustering_is_idempotent(cov in arb_coverage()) {
            let once = cluster(&cov);
            let twice = cluster(&once.as_coverage());
            prop_assert_eq!(once.n_profiles(), twice.n_profiles());
            for p in 0..once.n_profiles() {
                prop_assert_eq!(once.profile(p), twice.profile(p));
                let a = once.mass()[p] * once.unit();
                let b = twice.mass()[p] * twice.unit();
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((once.total_mass() * once.unit() - twice.total_mass() * twice.unit()).abs() < 1e-12);
        }

        #[test]
        fn profiles_are_distinct_nonzero_and_bounded(cov in arb_coverage()) {
            let cl = cluster(&cov);
            let d = cov.n_candidates();
            prop_assert!(cl.n_profiles() <= cov.n_rows().min((1usize << d) - 1));
            let mut seen = std::collections::HashSet::new();
            for p in 0..cl.n_profiles() {
                let prof = cl.profile(p);
                prop_assert!(prof.iter().any(|b| *b));
                prop_assert!(seen.insert(prof));
            }
            let r = size_reduction(&cov, &cl);
            prop_assert!((0.0..=100.0).contains(&r));
        }
    }
}
