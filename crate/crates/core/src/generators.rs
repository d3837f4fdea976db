//! Synthetic instance families and the random draws that feed simulation.
//!
//! Three families are provided:
//!
//! * `hm14`: customers and facilities uniform on `[0, 30]^2`, utilities
//!   `-beta * d` for candidates and `-alpha * beta * d` for competitors with
//!   Euclidean distance `d`. Produces a finite-support [`ChoiceInstance`].
//! * `hm14-mmnl`: 50 candidates and 10 competitors fixed uniform on `[0, 30]^2`,
//!   customer positions uniform, utility `-Manhattan(theta, c)`.
//! * `mmnl3`: three location types and three customer segments, customers
//!   drawn from a four-neighborhood Gaussian mixture, utility
//!   `-beta * (delta[K] * M_c + gamma[K][l])`.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChoiceInstance, Facility, Point2D};
use crate::rng::{self, CHUNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Hm14,
    Hm14Mmnl,
    Mmnl3,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Hm14 => "hm14",
            Family::Hm14Mmnl => "hm14-mmnl",
            Family::Mmnl3 => "mmnl3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hm14Params {
    pub n_customers: usize,
    pub n_candidates: usize,
    #[serde(default = "default_hm14_competitors")]
    pub n_competitors: usize,
    pub beta: f64,
    pub alpha: f64,
    pub budget: usize,
    #[serde(default = "default_hm14_side")]
    pub side: f64,
}

fn default_hm14_competitors() -> usize {
    10
}

fn default_hm14_side() -> f64 {
    30.0
}

impl Hm14Params {
    pub fn new(n_customers: usize, n_candidates: usize, beta: f64, alpha: f64, budget: usize) -> Self {
        Hm14Params {
            n_customers,
            n_candidates,
            n_competitors: default_hm14_competitors(),
            beta,
            alpha,
            budget,
            side: default_hm14_side(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        // alpha = 0 is allowed: it makes every competitor utility 0.
        if !(self.beta > 0.0 && self.alpha >= 0.0 && self.side > 0.0) {
            return Err(Error::InvalidParameter(
                "hm14 needs beta > 0, alpha >= 0 and a positive side".into(),
            ));
        }
        if self.n_customers == 0 || self.n_candidates == 0 {
            return Err(Error::InvalidParameter("hm14 counts must be positive".into()));
        }
        if self.budget == 0 || self.budget > self.n_candidates {
            return Err(Error::InvalidParameter(format!(
                "budget {} outside 1..={}",
                self.budget, self.n_candidates
            )));
        }
        Ok(())
    }
}

/// Parameters of the three-segment mixed logit family. `Default` gives the
/// published parameter set with `beta = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mmnl3Params {
    pub beta: f64,
    /// Distance aversion per customer segment.
    pub delta: [f64; 3],
    /// `gamma[segment][location type]`.
    pub gamma: [[f64; 3]; 3],
    /// Neighborhood shares.
    pub pi: [f64; 4],
    /// `rho[neighborhood][segment]`.
    pub rho: [[f64; 3]; 4],
    pub mu: [[f64; 2]; 4],
    pub sigma: [[[f64; 2]; 2]; 4],
    pub candidates_per_type: usize,
    pub competitors_per_type: usize,
    /// Facilities are uniform on `[-half_width, half_width]^2`.
    pub half_width: f64,
    pub budget: usize,
}

impl Default for Mmnl3Params {
    fn default() -> Self {
        Mmnl3Params {
            beta: 1.0,
            delta: [3.0, 1.0, 2.0],
            gamma: [[20.0, 60.0, 30.0], [40.0, 20.0, 60.0], [60.0, 40.0, 20.0]],
            pi: [0.4, 0.3, 0.2, 0.1],
            rho: [
                [0.2, 0.7, 0.1],
                [0.3, 0.4, 0.3],
                [0.3, 0.4, 0.3],
                [0.0, 0.2, 0.8],
            ],
            mu: [[2.0, -2.0], [-10.0, -10.0], [-4.0, 10.0], [12.0, -5.0]],
            sigma: [
                [[9.0, 1.0], [1.0, 9.0]],
                [[9.0, -6.0], [-6.0, 9.0]],
                [[16.0, 1.0], [1.0, 4.0]],
                [[2.0, 0.0], [0.0, 21.0]],
            ],
            candidates_per_type: 20,
            competitors_per_type: 10,
            half_width: 15.0,
            budget: 10,
        }
    }
}

impl Mmnl3Params {
    pub fn with_beta(beta: f64) -> Self {
        Mmnl3Params {
            beta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("mmnl3: {m}")));
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.pi.iter().any(|p| *p < 0.0) {
            return bad("pi must be a probability vector");
        }
        for row in &self.rho {
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
                return bad("each rho row must be a probability vector");
            }
        }
        for s in &self.sigma {
            if s[0][1] != s[1][0] || cholesky2(s).is_none() {
                return bad("each sigma must be symmetric positive definite");
            }
        }
        let n_candidates = 3 * self.candidates_per_type;
        if self.budget == 0 || self.budget > n_candidates {
            return bad("budget outside 1..=|D|");
        }
        if !(self.half_width > 0.0) {
            return bad("half width must be positive");
        }
        Ok(())
    }
}

/// Lower Cholesky factor of a 2x2 matrix, `None` unless positive definite.
fn cholesky2(s: &[[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    if !(s[0][0] > 0.0) {
        return None;
    }
    let l11 = s[0][0].sqrt();
    let l21 = s[1][0] / l11;
    let d = s[1][1] - l21 * l21;
    if !(d > 0.0) {
        return None;
    }
    Some([[l11, 0.0], [l21, d.sqrt()]])
}

/// Realized attributes `theta` of one customer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomerAttributes {
    pub position: Point2D,
    /// Customer segment, 0-based; present only for `mmnl3`.
    pub segment: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
struct Neighborhood {
    share: f64,
    segment_shares: [f64; 3],
    mean: [f64; 2],
    chol: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
enum AttributeSampler {
    UniformSquare { lo: f64, hi: f64 },
    Mixture(Vec<Neighborhood>),
}

#[derive(Debug, Clone, PartialEq)]
enum UtilityModel {
    NegManhattan { beta: f64 },
    Typed { beta: f64, delta: [f64; 3], gamma: [[f64; 3]; 3] },
}

/// Infinite-support model: fixed facilities, an attribute sampler and a
/// deterministic utility function `v_c(theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    family: Family,
    candidates: Vec<Facility>,
    competitors: Vec<Facility>,
    budget: usize,
    sampler: AttributeSampler,
    utility: UtilityModel,
}

fn draw_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave u just above the last partial sum.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

impl GenerativeModel {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn candidates(&self) -> &[Facility] {
        &self.candidates
    }

    pub fn competitors(&self) -> &[Facility] {
        &self.competitors
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

    pub fn sample_attributes<R: Rng + ?Sized>(&self, rng: &mut R) -> CustomerAttributes {
        match &self.sampler {
            AttributeSampler::UniformSquare { lo, hi } => {
                let x = rng::uniform(rng, *lo, *hi);
                let y = rng::uniform(rng, *lo, *hi);
                CustomerAttributes {
                    position: Point2D::new(x, y),
                    segment: None,
                }
            }
            AttributeSampler::Mixture(hoods) => {
                let shares: Vec<f64> = hoods.iter().map(|h| h.share).collect();
                let h = &hoods[draw_categorical(rng, &shares)];
                let segment = draw_categorical(rng, &h.segment_shares) as u8;
                let z0: f64 = StandardNormal.sample(rng);
                let z1: f64 = StandardNormal.sample(rng);
                let x = h.mean[0] + h.chol[0][0] * z0;
                let y = h.mean[1] + h.chol[1][0] * z0 + h.chol[1][1] * z1;
                CustomerAttributes {
                    position: Point2D::new(x, y),
                    segment: Some(segment),
                }
            }
        }
    }

    /// `v_c(theta)` for one facility.
    pub fn utility(&self, attrs: &CustomerAttributes, facility: &Facility) -> f64 {
        let m = attrs.position.manhattan(&facility.position);
        match &self.utility {
            UtilityModel::NegManhattan { beta } => -beta * m,
            UtilityModel::Typed { beta, delta, gamma } => {
                let k = attrs.segment.unwrap_or(0) as usize;
                let l = facility.location_type.unwrap_or(0) as usize;
                -beta * (delta[k] * m + gamma[k][l])
            }
        }
    }

    /// Utilities of all alternatives, candidates first.
    pub fn utilities_into(&self, attrs: &CustomerAttributes, out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(self.candidates.iter().chain(&self.competitors)) {
            *o = self.utility(attrs, f);
        }
    }

    /// `n` attribute draws from sub-streams of `(seed, stream_id)`, chunked so
    /// the result is independent of the thread count.
    pub fn sample_population(&self, n: usize, seed: u64, stream_id: u64) -> Vec<CustomerAttributes> {
        let chunks = n.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .flat_map_iter(|chunk| {
                let mut rng = rng::substream(seed, stream_id, chunk as u64);
                let len = CHUNK.min(n - chunk * CHUNK);
                (0..len)
                    .map(|_| self.sample_attributes(&mut rng))
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

fn uniform_points<R: Rng + ?Sized>(rng: &mut R, count: usize, lo: f64, hi: f64) -> Vec<Point2D> {
    (0..count)
        .map(|_| {
            let x = rng::uniform(rng, lo, hi);
            let y = rng::uniform(rng, lo, hi);
            Point2D::new(x, y)
        })
        .collect()
}

/// Finite-support instance with uniform customers and Euclidean distances.
pub fn gen_hm14(params: &Hm14Params, seed: u64) -> Result<ChoiceInstance> {
    params.validate()?;
    let side = params.side;
    let mut frng = rng::stream(seed, rng::FACILITIES);
    let cand_pos = uniform_points(&mut frng, params.n_candidates, 0.0, side);
    let comp_pos = uniform_points(&mut frng, params.n_competitors, 0.0, side);
    let mut crng = rng::stream(seed, rng::CUSTOMERS);
    let customers = uniform_points(&mut crng, params.n_customers, 0.0, side);

    let candidates: Vec<Facility> = cand_pos
        .into_iter()
        .enumerate()
        .map(|(i, p)| Facility::candidate(i, p))
        .collect();
    let competitors: Vec<Facility> = comp_pos
        .into_iter()
        .enumerate()
        .map(|(i, p)| Facility::competitor(params.n_candidates + i, p))
        .collect();

    let mut utilities = Vec::with_capacity(customers.len() * (candidates.len() + competitors.len()));
    for c in &customers {
        utilities.extend(candidates.iter().map(|f| -params.beta * c.euclidean(&f.position)));
        utilities.extend(
            competitors
                .iter()
                .map(|f| -params.alpha * params.beta * c.euclidean(&f.position)),
        );
    }
    ChoiceInstance::new(candidates, competitors, utilities, None, params.budget)
}

/// Generative version of the uniform family: 50 candidates, 10 competitors,
/// `r = 5`, Manhattan distance.
pub fn gen_hm14_mmnl(seed: u64) -> GenerativeModel {
    const SIDE: f64 = 30.0;
    let mut frng = rng::stream(seed, rng::FACILITIES);
    let candidates = uniform_points(&mut frng, 50, 0.0, SIDE)
        .into_iter()
        .enumerate()
        .map(|(i, p)| Facility::candidate(i, p))
        .collect();
    let competitors = uniform_points(&mut frng, 10, 0.0, SIDE)
        .into_iter()
        .enumerate()
        .map(|(i, p)| Facility::competitor(50 + i, p))
        .collect();
    GenerativeModel {
        family: Family::Hm14Mmnl,
        candidates,
        competitors,
        budget: 5,
        sampler: AttributeSampler::UniformSquare { lo: 0.0, hi: SIDE },
        utility: UtilityModel::NegManhattan { beta: 1.0 },
    }
}

/// Three-segment, three-location-type mixed logit model.
pub fn gen_mmnl3(params: &Mmnl3Params, seed: u64) -> Result<GenerativeModel> {
    params.validate()?;
    let mut frng = rng::stream(seed, rng::FACILITIES);
    let (lo, hi) = (-params.half_width, params.half_width);
    let mut candidates = Vec::new();
    for l in 0..3u8 {
        for p in uniform_points(&mut frng, params.candidates_per_type, lo, hi) {
            candidates.push(Facility::candidate(candidates.len(), p).with_type(l));
        }
    }
    let offset = candidates.len();
    let mut competitors = Vec::new();
    for l in 0..3u8 {
        for p in uniform_points(&mut frng, params.competitors_per_type, lo, hi) {
            competitors.push(Facility::competitor(offset + competitors.len(), p).with_type(l));
        }
    }
    let hoods = (0..4)
        .map(|j| Neighborhood {
            share: params.pi[j],
            segment_shares: params.rho[j],
            mean: params.mu[j],
            chol: cholesky2(&params.sigma[j]).expect("validated"),
        })
        .collect();
    Ok(GenerativeModel {
        family: Family::Mmnl3,
        candidates,
        competitors,
        budget: params.budget,
        sampler: AttributeSampler::Mixture(hoods),
        utility: UtilityModel::Typed {
            beta: params.beta,
            delta: params.delta,
            gamma: params.gamma,
        },
    })
}

/// Distribution of the random utility terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Standard type I extreme value.
    #[default]
    GumbelStandard,
    Normal { sigma: f64 },
}

/// Standard Gumbel quantile.
pub fn gumbel_quantile(u: f64) -> f64 {
    -(-u.ln()).ln()
}

impl NoiseModel {
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::GumbelStandard => gumbel_quantile(rng::open_unit(rng)),
            NoiseModel::Normal { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
        }
    }
}

pub fn sample_noise<R: RngCore + ?Sized>(model: &NoiseModel, rng: &mut R, count: usize) -> Vec<f64> {
    (0..count).map(|_| model.draw(rng)).collect()
}

/// Draws `n` customers and returns the finite-support instance they define,
/// with uniform weights.
pub fn materialize_sample(model: &GenerativeModel, n: usize, seed: u64) -> Result<ChoiceInstance> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let population = model.sample_population(n, seed, rng::CUSTOMERS);
    instance_from_attributes(model, &population)
}

pub fn instance_from_attributes(
    model: &GenerativeModel,
    population: &[CustomerAttributes],
) -> Result<ChoiceInstance> {
    let stride = model.n_alternatives();
    let mut utilities = vec![0.0; population.len() * stride];
    utilities
        .par_chunks_mut(stride)
        .zip(population.par_iter())
        .for_each(|(row, a)| model.utilities_into(a, row));
    ChoiceInstance::new(
        model.candidates.clone(),
        model.competitors.clone(),
        utilities,
        None,
        model.budget,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gumbel_quantile_examples() {
        assert!(gumbel_quantile((-1f64).exp()).abs() < 1e-15);
        assert!((gumbel_quantile(0.5) - 0.366_512_920_581_664_3).abs() < 1e-12);
    }

    #[test]
    fn gumbel_mean_is_euler_mascheroni() {
        let mut rng = rng::stream(11, rng::SCENARIOS);
        let draws = sample_noise(&NoiseModel::GumbelStandard, &mut rng, 1_000_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.577_215_664_9).abs() < 0.005, "mean {mean}");
        assert!(draws.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn noise_draws_are_uncorrelated() {
        let mut rng = rng::stream(12, rng::SCENARIOS);
        let n = 100_000;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let a = NoiseModel::GumbelStandard.draw(&mut rng);
                let b = NoiseModel::GumbelStandard.draw(&mut rng);
                (a, b)
            })
            .collect();
        let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (a, b) in &pairs {
            sab += (a - ma) * (b - mb);
            saa += (a - ma).powi(2);
            sbb += (b - mb).powi(2);
        }
        let corr = sab / (saa * sbb).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn hm14_is_deterministic_and_in_support() {
        let p = Hm14Params::new(40, 25, 10.0, 0.1, 3);
        let a = gen_hm14(&p, 5).unwrap();
        let b = gen_hm14(&p, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_hm14(&p, 6).unwrap());
        for f in a.candidates().iter().chain(a.competitors()) {
            assert!((0.0..=30.0).contains(&f.position.x) && (0.0..=30.0).contains(&f.position.y));
        }
        assert_eq!(a.n_competitors(), 10);
        assert!(a.weights().iter().all(|q| *q == 1.0 / 40.0));
    }

    #[test]
    fn hm14_alpha_zero_neutralizes_competitors() {
        let p = Hm14Params::new(15, 5, 5.0, 0.0, 2);
        let inst = gen_hm14(&p, 1).unwrap();
        for n in 0..inst.n_customers() {
            assert!(inst.competitor_utilities(n).iter().all(|v| *v == 0.0));
            let w = crate::model::competitor_mass(&inst, n).unwrap();
            assert_eq!(w, 10.0);
        }
    }

    #[test]
    fn hm14_mmnl_support_and_sign() {
        let model = gen_hm14_mmnl(3);
        assert_eq!((model.n_candidates(), model.n_competitors(), model.budget()), (50, 10, 5));
        let pop = model.sample_population(5000, 3, rng::CUSTOMERS);
        let mut row = vec![0.0; model.n_alternatives()];
        for a in &pop {
            assert!((0.0..=30.0).contains(&a.position.x) && (0.0..=30.0).contains(&a.position.y));
            assert!(a.segment.is_none());
            model.utilities_into(a, &mut row);
            assert!(row.iter().all(|v| *v <= 0.0));
        }
    }

    #[test]
    fn mmnl3_layout_and_types() {
        let model = gen_mmnl3(&Mmnl3Params::default(), 9).unwrap();
        assert_eq!((model.n_candidates(), model.n_competitors(), model.budget()), (60, 30, 10));
        for (i, f) in model.candidates().iter().enumerate() {
            assert_eq!(f.location_type, Some((i / 20) as u8));
        }
        for (i, f) in model.competitors().iter().enumerate() {
            assert_eq!(f.location_type, Some((i / 10) as u8));
        }
        for f in model.candidates().iter().chain(model.competitors()) {
            assert!(f.position.x.abs() <= 15.0 && f.position.y.abs() <= 15.0);
        }
    }

    #[test]
    fn mmnl3_segment_marginals_match_mixture() {
        // pi^T rho = (0.23, 0.50, 0.27)
        let p = Mmnl3Params::default();
        let expected: Vec<f64> = (0..3)
            .map(|k| (0..4).map(|j| p.pi[j] * p.rho[j][k]).sum())
            .collect();
        for (e, want) in expected.iter().zip([0.23, 0.50, 0.27]) {
            assert!((e - want).abs() < 1e-12);
        }
        let model = gen_mmnl3(&p, 1).unwrap();
        let pop = model.sample_population(1_000_000, 21, rng::CUSTOMERS);
        let mut counts = [0usize; 3];
        for a in &pop {
            counts[a.segment.unwrap() as usize] += 1;
        }
        for k in 0..3 {
            let f = counts[k] as f64 / pop.len() as f64;
            assert!((f - expected[k]).abs() < 0.005, "segment {k}: {f}");
        }
    }

    #[test]
    fn mmnl3_neighborhood_frequencies_and_means() {
        let p = Mmnl3Params::default();
        let model = gen_mmnl3(&p, 1).unwrap();
        let AttributeSampler::Mixture(hoods) = &model.sampler else {
            panic!("mixture sampler expected")
        };
        // Draw neighborhoods directly through the same sampler path.
        let mut rng = rng::stream(4, rng::CUSTOMERS);
        let n = 100_000;
        let shares: Vec<f64> = hoods.iter().map(|h| h.share).collect();
        let mut counts = [0usize; 4];
        let mut mean1 = [0.0; 2];
        let mut n1 = 0usize;
        for _ in 0..n {
            let j = draw_categorical(&mut rng, &shares);
            counts[j] += 1;
            if j == 0 {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                let h = &hoods[0];
                mean1[0] += h.mean[0] + h.chol[0][0] * z0;
                mean1[1] += h.mean[1] + h.chol[1][0] * z0 + h.chol[1][1] * z1;
                n1 += 1;
            }
        }
        // Pearson chi-square with 3 degrees of freedom; 11.34 is the 0.99 quantile.
        let chi2: f64 = (0..4)
            .map(|j| {
                let e = p.pi[j] * n as f64;
                (counts[j] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 11.34, "chi2 {chi2}");

        // Neighborhood-1 mean from 10^5 dedicated draws.
        let mut rng = rng::stream(5, rng::CUSTOMERS);
        let h = &hoods[0];
        let mut m = [0.0; 2];
        for _ in 0..100_000 {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            m[0] += h.mean[0] + h.chol[0][0] * z0;
            m[1] += h.mean[1] + h.chol[1][0] * z0 + h.chol[1][1] * z1;
        }
        assert!((m[0] / 1e5 - 2.0).abs() < 0.05 && (m[1] / 1e5 + 2.0).abs() < 0.05);
        assert!(n1 > 0 && (mean1[0] / n1 as f64 - 2.0).abs() < 0.1);
    }

    #[test]
    fn cholesky_reproduces_covariance() {
        for s in Mmnl3Params::default().sigma {
            let l = cholesky2(&s).unwrap();
            let r00 = l[0][0] * l[0][0];
            let r10 = l[1][0] * l[0][0];
            let r11 = l[1][0] * l[1][0] + l[1][1] * l[1][1];
            assert!((r00 - s[0][0]).abs() < 1e-12);
            assert!((r10 - s[1][0]).abs() < 1e-12);
            assert!((r11 - s[1][1]).abs() < 1e-12);
        }
        assert!(cholesky2(&[[1.0, 2.0], [2.0, 1.0]]).is_none());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = Mmnl3Params {
            pi: [0.5, 0.3, 0.2, 0.1],
            ..Mmnl3Params::default()
        };
        assert!(gen_mmnl3(&p, 0).is_err());
        let mut p = Mmnl3Params::default();
        p.sigma[0] = [[1.0, 3.0], [3.0, 1.0]];
        assert!(gen_mmnl3(&p, 0).is_err());
        assert!(gen_hm14(&Hm14Params::new(10, 5, 0.0, 0.1, 2), 0).is_err());
        assert!(gen_hm14(&Hm14Params::new(10, 5, 1.0, 0.1, 6), 0).is_err());
    }

    #[test]
    fn materialize_is_deterministic() {
        let model = gen_mmnl3(&Mmnl3Params::default(), 2).unwrap();
        let one = materialize_sample(&model, 1, 4).unwrap();
        assert_eq!(one.n_customers(), 1);
        assert_eq!(one.weights().iter().sum::<f64>(), 1.0);
        let a = materialize_sample(&model, 9000, 4).unwrap();
        let b = materialize_sample(&model, 9000, 4).unwrap();
        assert_eq!(a, b);
        assert!(materialize_sample(&model, 0, 4).is_err());
    }
}
