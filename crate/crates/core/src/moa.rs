//! Multicut outer approximation for the multinomial logit problem.
//!
//! Customers are split into `T` groups. For each group the function
//! `g_t(x) = -sum_n q_n s_n(x) / (s_n(x) + W_n)`, with
//! `s_n(x) = sum_c x_c exp(v_nc)` and `W_n` the competitor mass, is convex on
//! the unit box. The method alternates between an integer master problem
//! `min sum_t theta_t` over `|x| = r`, where every `theta_t` is bounded below by
//! `g_t(1)` and by the tangent cuts collected so far, and the exact evaluation
//! of the master's answer, which yields new cuts. It stops when the master
//! bound meets the best evaluated decision.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::ops::Range;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{objective_mnl, ChoiceInstance, DecisionVector, Method, Solution};

/// Splits `0..n_customers` into `n_groups` contiguous blocks whose sizes
/// differ by at most one, larger blocks first.
pub fn partition(n_customers: usize, n_groups: usize) -> Result<Vec<Range<usize>>> {
    if n_groups == 0 || n_groups > n_customers {
        return Err(Error::InvalidParameter(format!(
            "group count {n_groups} must lie in 1..={n_customers}"
        )));
    }
    let base = n_customers / n_groups;
    let extra = n_customers % n_groups;
    let mut start = 0;
    Ok((0..n_groups)
        .map(|t| {
            let len = base + usize::from(t < extra);
            let range = start..start + len;
            start += len;
            range
        })
        .collect())
}

/// Cached exponentiated utilities of a block of customers.
///
/// Each customer's utilities are shifted by their maximum before
/// exponentiation; the capture ratio and its gradient are unchanged by the
/// common factor.
#[derive(Debug, Clone)]
pub struct CustomerGroup {
    n_candidates: usize,
    weight: Vec<f64>,
    competitor: Vec<f64>,
    attraction: Vec<f64>,
}

impl CustomerGroup {
    pub fn new(instance: &ChoiceInstance, customers: Range<usize>) -> Self {
        let d = instance.n_candidates();
        let mut group = CustomerGroup {
            n_candidates: d,
            weight: Vec::with_capacity(customers.len()),
            competitor: Vec::with_capacity(customers.len()),
            attraction: Vec::with_capacity(customers.len() * d),
        };
        for n in customers {
            let v = instance.utilities(n);
            let shift = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            group.weight.push(instance.weights()[n]);
            group
                .competitor
                .push(instance.competitor_utilities(n).iter().map(|u| (u - shift).exp()).sum());
            group
                .attraction
                .extend(instance.candidate_utilities(n).iter().map(|u| (u - shift).exp()));
        }
        group
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.attraction[i * self.n_candidates..(i + 1) * self.n_candidates]
    }

    fn share(s: f64, w: f64) -> f64 {
        let denom = s + w;
        if denom > 0.0 {
            s / denom
        } else if w == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// `g_t(x)` for a point of the unit box.
    pub fn value(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| {
                let s: f64 = self.row(i).iter().zip(x).map(|(e, xi)| e * xi).sum();
                -self.weight[i] * Self::share(s, self.competitor[i])
            })
            .sum()
    }

    /// `g_t(x)` and its gradient.
    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.n_candidates];
        let mut value = 0.0;
        for i in 0..self.len() {
            let row = self.row(i);
            let s: f64 = row.iter().zip(x).map(|(e, xi)| e * xi).sum();
            let w = self.competitor[i];
            value -= self.weight[i] * Self::share(s, w);
            let denom = s + w;
            if denom > 0.0 {
                let scale = self.weight[i] * w / (denom * denom);
                for (g, e) in grad.iter_mut().zip(row) {
                    *g -= scale * e;
                }
            }
        }
        (value, grad)
    }

    /// `g_t(1)`: the group's value with every candidate open, a lower bound
    /// over the whole box since `g_t` is nonincreasing.
    pub fn lower_bound(&self) -> f64 {
        self.value(&vec![1.0; self.n_candidates])
    }
}

/// `theta_t >= coefficients . x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub group: usize,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl Cut {
    pub fn at(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Tangent cut of group `t` at `x`.
pub fn tangent_cut(group: &CustomerGroup, t: usize, x: &[f64]) -> Cut {
    let (value, grad) = group.value_grad(x);
    let intercept = value - grad.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>();
    Cut {
        group: t,
        coefficients: grad,
        intercept,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoaConfig {
    /// Number of customer groups; `None` gives one group per customer.
    pub groups: Option<usize>,
    /// Stop once the bound and the incumbent share agree to this absolute gap.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Node budget for each master solve.
    pub master_node_limit: u64,
    pub time_limit: Duration,
}

impl Default for MoaConfig {
    fn default() -> Self {
        MoaConfig {
            groups: None,
            tolerance: 1e-6,
            max_iterations: 10_000,
            master_node_limit: 50_000_000,
            time_limit: Duration::from_secs(600),
        }
    }
}

/// One outer iteration, in market-share units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Optimal master value, an upper bound on the best share.
    pub bound: f64,
    /// Share of the best decision evaluated so far.
    pub incumbent: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoaOutcome {
    pub solution: Solution,
    pub bound: f64,
    pub trace: Vec<TraceEntry>,
    pub n_cuts: usize,
}

/// Groups of an instance together with their lower bounds.
#[derive(Debug, Clone)]
pub struct MoaModel {
    groups: Vec<CustomerGroup>,
    lower: Vec<f64>,
    n_candidates: usize,
    budget: usize,
}

impl MoaModel {
    pub fn new(instance: &ChoiceInstance, n_groups: Option<usize>) -> Result<Self> {
        let n = instance.n_customers();
        let blocks = partition(n, n_groups.unwrap_or(n))?;
        let groups: Vec<CustomerGroup> = blocks.into_iter().map(|b| CustomerGroup::new(instance, b)).collect();
        let lower = groups.iter().map(CustomerGroup::lower_bound).collect();
        Ok(MoaModel {
            groups,
            lower,
            n_candidates: instance.n_candidates(),
            budget: instance.budget(),
        })
    }

    pub fn groups(&self) -> &[CustomerGroup] {
        &self.groups
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    /// `G(x) = sum_t g_t(x)`, minus the captured share.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.groups.iter().map(|g| g.value(x)).sum()
    }
}

/// Cuts of a single-customer group are affine in `s(x)` with slope `-lambda`.
#[derive(Debug, Clone, Copy)]
struct ScalarCut {
    intercept: f64,
    slope: f64,
}

#[derive(Debug, Clone)]
struct GeneralCut {
    intercept: f64,
    coefficients: Vec<f64>,
    /// Candidate indices by ascending coefficient.
    order: Vec<u32>,
}

enum GroupCuts {
    Scalar {
        attraction: Vec<f64>,
        /// Candidate indices by descending attraction.
        order: Vec<u32>,
        cuts: Vec<ScalarCut>,
    },
    General(Vec<GeneralCut>),
}

/// The master problem: piecewise-linear underestimator of `G`.
struct Master {
    d: usize,
    r: usize,
    lower: Vec<f64>,
    groups: Vec<GroupCuts>,
}

struct MasterEval {
    value: f64,
    /// Branching score per candidate; larger means more promising.
    score: Vec<f64>,
}

#[derive(Debug)]
struct MasterNode {
    bound: f64,
    seq: u64,
    state: Vec<u8>,
    included: Vec<usize>,
}

const FREE: u8 = 0;
const IN: u8 = 1;
const OUT: u8 = 2;

impl PartialEq for MasterNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for MasterNode {}

impl PartialOrd for MasterNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MasterNode {
    // Min-heap on the bound, FIFO among equals.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl Master {
    fn new(model: &MoaModel) -> Self {
        let d = model.n_candidates;
        let groups = model
            .groups
            .iter()
            .map(|g| {
                if g.len() == 1 {
                    let attraction = g.row(0).to_vec();
                    let mut order: Vec<u32> = (0..d as u32).collect();
                    order.sort_by(|a, b| attraction[*b as usize].total_cmp(&attraction[*a as usize]));
                    GroupCuts::Scalar {
                        attraction,
                        order,
                        cuts: Vec::new(),
                    }
                } else {
                    GroupCuts::General(Vec::new())
                }
            })
            .collect();
        Master {
            d,
            r: model.budget,
            lower: model.lower.clone(),
            groups,
        }
    }

    fn add_cut(&mut self, model: &MoaModel, t: usize, x: &[f64]) -> Cut {
        let cut = tangent_cut(&model.groups[t], t, x);
        match &mut self.groups[t] {
            GroupCuts::Scalar { attraction, cuts, .. } => {
                // gradient = -lambda * attraction
                let (c, e) = attraction
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(c, e)| (c, *e))
                    .unwrap_or((0, 0.0));
                let slope = if e > 0.0 { -cut.coefficients[c] / e } else { 0.0 };
                cuts.push(ScalarCut {
                    intercept: cut.intercept,
                    slope,
                });
            }
            GroupCuts::General(cuts) => {
                let mut order: Vec<u32> = (0..self.d as u32).collect();
                order.sort_by(|a, b| cut.coefficients[*a as usize].total_cmp(&cut.coefficients[*b as usize]));
                cuts.push(GeneralCut {
                    intercept: cut.intercept,
                    coefficients: cut.coefficients.clone(),
                    order,
                });
            }
        }
        cut
    }

    /// Master value at a complete decision.
    fn value_at(&self, set: &[usize]) -> f64 {
        self.groups
            .iter()
            .zip(&self.lower)
            .map(|(g, &lb)| match g {
                GroupCuts::Scalar { attraction, cuts, .. } => {
                    let s: f64 = set.iter().map(|&c| attraction[c]).sum();
                    cuts.iter().map(|k| k.intercept - k.slope * s).fold(lb, f64::max)
                }
                GroupCuts::General(cuts) => cuts
                    .iter()
                    .map(|k| k.intercept + set.iter().map(|&c| k.coefficients[c]).sum::<f64>())
                    .fold(lb, f64::max),
            })
            .sum()
    }

    /// Lower bound over all completions of a node, with branching scores.
    fn bound(&self, state: &[u8], included: &[usize]) -> MasterEval {
        let slots = self.r - included.len();
        let free: Vec<usize> = (0..self.d).filter(|&c| state[c] == FREE).collect();
        let mut score = vec![0.0; self.d];
        let mut value = 0.0;
        // Single-customer terms admit two bounds: every customer completes
        // the node with its own best candidates, or, since minus their sum is
        // monotone submodular in the open set, the value at the fixed part
        // minus the largest single-candidate improvements.
        let mut any_scalar = false;
        let mut independent = 0.0;
        let mut base_total = 0.0;
        for (g, &lb) in self.groups.iter().zip(&self.lower) {
            match g {
                GroupCuts::Scalar {
                    attraction,
                    order,
                    cuts,
                } => {
                    any_scalar = true;
                    let phi = |s: f64| cuts.iter().fold(lb, |m, k| m.max(k.intercept - k.slope * s));
                    let s_fix: f64 = included.iter().map(|&c| attraction[c]).sum();
                    let top: f64 = order
                        .iter()
                        .filter(|c| state[**c as usize] == FREE)
                        .take(slots)
                        .map(|c| attraction[*c as usize])
                        .sum();
                    independent += phi(s_fix + top);
                    let base = phi(s_fix);
                    base_total += base;
                    if slots > 0 {
                        for &c in &free {
                            score[c] += base - phi(s_fix + attraction[c]);
                        }
                    }
                }
                GroupCuts::General(cuts) => {
                    let mut best = lb;
                    let mut active: Option<&GeneralCut> = None;
                    for k in cuts {
                        let mut v = k.intercept + included.iter().map(|&c| k.coefficients[c]).sum::<f64>();
                        v += k
                            .order
                            .iter()
                            .filter(|c| state[**c as usize] == FREE)
                            .take(slots)
                            .map(|c| k.coefficients[*c as usize])
                            .sum::<f64>();
                        if v > best {
                            best = v;
                            active = Some(k);
                        }
                    }
                    value += best;
                    if let Some(k) = active {
                        for (s, a) in score.iter_mut().zip(&k.coefficients) {
                            *s -= a;
                        }
                    }
                }
            }
        }
        if any_scalar {
            let mut gains: Vec<f64> = free.iter().map(|&c| score[c]).collect();
            gains.sort_unstable_by(|a, b| b.total_cmp(a));
            let submodular = base_total - gains.iter().take(slots).sum::<f64>();
            value += independent.max(submodular);
        }
        MasterEval { value, score }
    }

    /// Exact minimization of the master by best-first branch and bound.
    /// Returns the optimal value and a minimizer, starting from `start`.
    fn solve(&self, start: &[usize], node_limit: u64, deadline: Instant) -> (f64, Vec<usize>, u64, bool) {
        let d = self.d;
        let r = self.r;
        let mut inc_value = self.value_at(start);
        let mut inc_set = start.to_vec();
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        heap.push(MasterNode {
            bound: f64::NEG_INFINITY,
            seq,
            state: vec![FREE; d],
            included: Vec::new(),
        });
        let mut nodes = 0u64;
        while let Some(node) = heap.pop() {
            if node.bound >= inc_value {
                break;
            }
            if nodes >= node_limit || (nodes.is_multiple_of(256) && Instant::now() > deadline) {
                // The smallest pending bound is still a valid lower bound.
                let pending = heap.iter().map(|n| n.bound).fold(node.bound, f64::min);
                return (pending.min(inc_value), inc_set, nodes, false);
            }
            nodes += 1;
            let slots = r - node.included.len();
            let n_free = node.state.iter().filter(|s| **s == FREE).count();
            let eval = self.bound(&node.state, &node.included);
            if eval.value >= inc_value {
                continue;
            }
            if slots == 0 || n_free == slots {
                // The bound is exact at the unique completion.
                let mut set = node.included.clone();
                if slots > 0 {
                    set.extend((0..d).filter(|&c| node.state[c] == FREE));
                }
                set.sort_unstable();
                inc_value = eval.value;
                inc_set = set;
                continue;
            }
            // Heuristic completion by score.
            let mut free: Vec<usize> = (0..d).filter(|&c| node.state[c] == FREE).collect();
            free.sort_by(|a, b| eval.score[*b].total_cmp(&eval.score[*a]).then(a.cmp(b)));
            let branch = free[0];
            let mut guess = node.included.clone();
            guess.extend(free.iter().take(slots));
            guess.sort_unstable();
            let gv = self.value_at(&guess);
            if gv < inc_value {
                inc_value = gv;
                inc_set = guess;
            }
            if eval.value >= inc_value {
                continue;
            }
            let mut state_in = node.state.clone();
            state_in[branch] = IN;
            let mut included = node.included.clone();
            included.push(branch);
            seq += 1;
            heap.push(MasterNode {
                bound: eval.value,
                seq,
                state: state_in,
                included,
            });
            if n_free > slots {
                let mut state_out = node.state;
                state_out[branch] = OUT;
                seq += 1;
                heap.push(MasterNode {
                    bound: eval.value,
                    seq,
                    state: state_out,
                    included: node.included,
                });
            }
        }
        (inc_value, inc_set, nodes, true)
    }
}

fn indicator(d: usize, set: &[usize]) -> Vec<f64> {
    let mut x = vec![0.0; d];
    set.iter().for_each(|&c| x[c] = 1.0);
    x
}

/// Solves `max Z(x)` over `|x| = r` on the sample in `instance`.
pub fn solve_moa(instance: &ChoiceInstance, config: &MoaConfig) -> Result<MoaOutcome> {
    if !(config.tolerance >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be nonnegative", config.tolerance)));
    }
    let start = Instant::now();
    let deadline = start + config.time_limit;
    let model = MoaModel::new(instance, config.groups)?;
    let d = instance.n_candidates();
    let r = instance.budget();
    let mut master = Master::new(&model);
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut n_cuts = 0usize;

    let mut best: Vec<usize> = (0..r).collect();
    let mut best_value = model.value(&indicator(d, &best));
    let mut pending = best.clone();
    let mut trace = Vec::new();
    let mut bound = f64::NEG_INFINITY;
    let mut optimal = false;

    for iteration in 1..=config.max_iterations {
        if visited.insert(pending.clone()) {
            let x = indicator(d, &pending);
            for t in 0..model.groups.len() {
                master.add_cut(&model, t, &x);
                n_cuts += 1;
            }
        }
        let (lb, set, _, complete) = master.solve(&best, config.master_node_limit, deadline);
        bound = lb;
        let value = model.value(&indicator(d, &set));
        if value < best_value || (value == best_value && set < best) {
            best_value = value;
            best = set.clone();
        }
        let gap = best_value - bound;
        trace.push(TraceEntry {
            iteration,
            bound: -bound,
            incumbent: -best_value,
            gap: gap.max(0.0),
        });
        if !complete {
            break;
        }
        if gap <= config.tolerance {
            optimal = true;
            break;
        }
        if Instant::now() > deadline {
            break;
        }
        pending = set;
    }

    let decision = DecisionVector::from_indices(d, &best)?;
    let objective = objective_mnl(instance, &decision)?;
    Ok(MoaOutcome {
        solution: Solution {
            decision,
            objective,
            method: Method::Moa,
            wall_time: start.elapsed(),
            iterations: trace.len() as u64,
            optimal,
        },
        bound: -bound,
        trace,
        n_cuts,
    })
}

/// Best decision by enumerating every size-`r` subset, for small instances.
pub fn solve_mnl_bruteforce(instance: &ChoiceInstance) -> Result<Solution> {
    let d = instance.n_candidates();
    let r = instance.budget();
    let needed = crate::binary::binomial(d, r);
    if needed > crate::binary::BRUTE_FORCE_LIMIT {
        return Err(Error::EnumerationLimit {
            needed,
            limit: crate::binary::BRUTE_FORCE_LIMIT,
        });
    }
    let start = Instant::now();
    let mut set: Vec<usize> = (0..r).collect();
    let mut best: Option<(f64, DecisionVector)> = None;
    let mut count = 0u64;
    loop {
        let x = DecisionVector::from_indices(d, &set)?;
        let z = objective_mnl(instance, &x)?;
        count += 1;
        if best.as_ref().is_none_or(|(b, _)| z > *b) {
            best = Some((z, x));
        }
        // next combination in lexicographic order
        let Some(i) = (0..r).rev().find(|&i| set[i] < d - r + i) else {
            break;
        };
        set[i] += 1;
        for j in i + 1..r {
            set[j] = set[j - 1] + 1;
        }
    }
    let (objective, decision) = best.expect("at least one subset");
    Ok(Solution {
        decision,
        objective,
        method: Method::Brute,
        wall_time: start.elapsed(),
        iterations: count,
        optimal: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::instance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, max_d: usize) -> ChoiceInstance {
        let d = rng.random_range(2..=max_d);
        let e = rng.random_range(0..4);
        let n = rng.random_range(1..25);
        let r = rng.random_range(1..=d.min(4));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d + e).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        instance(&rows, d, r)
    }

    #[test]
    fn partition_sizes() {
        let p = partition(10, 3).unwrap();
        assert_eq!(p, vec![0..4, 4..7, 7..10]);
        assert_eq!(partition(4, 4).unwrap().len(), 4);
        assert!(partition(3, 0).is_err());
        assert!(partition(3, 4).is_err());
    }

    #[test]
    fn group_value_matches_objective() {
        let inst = instance(&[vec![0.0, 1.0, 0.5], vec![2.0, -1.0, 0.0]], 2, 1);
        let model = MoaModel::new(&inst, Some(1)).unwrap();
        let x = DecisionVector::from_indices(2, &[1]).unwrap();
        let z = objective_mnl(&inst, &x).unwrap();
        assert!((model.value(&x.as_f64()) + z).abs() < 1e-15);
    }

    #[test]
    fn single_customer_gradient_closed_form() {
        // s = e^0 + e^1 with both open, W = e^0.5
        let inst = instance(&[vec![0.0, 1.0, 0.5]], 2, 1);
        let g = CustomerGroup::new(&inst, 0..1);
        let (_, grad) = g.value_grad(&[1.0, 1.0]);
        let s = 1f64.exp() + 1.0;
        let w = 0.5f64.exp();
        let expect = [-w / (s + w).powi(2), -w * 1f64.exp() / (s + w).powi(2)];
        for (a, b) in grad.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14 * b.abs());
        }
    }

    #[test]
    fn cuts_underestimate_and_touch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, 6);
            let model = MoaModel::new(&inst, Some(1)).unwrap();
            let g = &model.groups()[0];
            let d = inst.n_candidates();
            let at: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            let cut = tangent_cut(g, 0, &at);
            assert!((cut.at(&at) - g.value(&at)).abs() < 1e-12);
            for _ in 0..20 {
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
                assert!(cut.at(&y) <= g.value(&y) + 1e-12);
                assert!(g.lower_bound() <= g.value(&y) + 1e-12);
            }
        }
    }

    #[test]
    fn no_competitors_always_captures() {
        let inst = instance(&[vec![0.0, 1.0], vec![3.0, -2.0]], 2, 1);
        let out = solve_moa(&inst, &MoaConfig::default()).unwrap();
        assert_eq!(out.solution.objective, 1.0);
        assert!(out.solution.optimal);
        assert_eq!(out.solution.decision.indices(), vec![0]);
    }

    #[test]
    fn trace_sandwiches_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 8);
            let exact = solve_mnl_bruteforce(&inst).unwrap().objective;
            let out = solve_moa(&inst, &MoaConfig::default()).unwrap();
            for e in &out.trace {
                assert!(e.incumbent <= exact + 1e-12);
                assert!(e.bound >= exact - 1e-9);
            }
            let incs: Vec<f64> = out.trace.iter().map(|e| e.incumbent).collect();
            assert!(incs.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn moa_matches_enumeration(seed in any::<u64>(), grouped in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = random_instance(&mut rng, 9);
            let groups = if grouped { Some(1 + inst.n_customers() / 3) } else { None };
            let cfg = MoaConfig { groups, ..Default::default() };
            let out = solve_moa(&inst, &cfg).unwrap();
            let exact = solve_mnl_bruteforce(&inst).unwrap();
            prop_assert!(out.solution.optimal);
            prop_assert!((out.solution.objective - exact.objective).abs() <= 1e-6);
            prop_assert_eq!(out.solution.decision.count(), inst.budget());
        }
    }
}
