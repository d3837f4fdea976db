//! Exact maximum coverage under a cardinality budget.
//!
//! Solves `max sum_p q_p y_p` s.t. `y_p <= sum_c a_pc x_c`, `sum_c x_c = r` on
//! a [`ClusteredProblem`]. Coverage is monotone, so opening exactly `r`
//! candidates loses nothing. Among optimal decisions the solvers return the
//! one whose ascending index list is lexicographically smallest.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionVector, Method, Solution};
use crate::simulate::ClusteredProblem;

/// Largest number of subsets [`solve_bruteforce`] agrees to enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    BranchAndBound,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub node_limit: u64,
    pub time_limit: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolverMode::BranchAndBound,
            node_limit: 20_000_000,
            time_limit: Duration::from_secs(600),
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Column-major view of the profiles.
struct Columns<'a> {
    problem: &'a ClusteredProblem,
    cols: Vec<Vec<u32>>,
    /// Tolerance on mass comparisons; zero when masses are integral.
    eps: f64,
}

impl<'a> Columns<'a> {
    fn new(problem: &'a ClusteredProblem) -> Self {
        let d = problem.n_candidates();
        let mut cols = vec![Vec::new(); d];
        for p in 0..problem.n_profiles() {
            for (c, col) in cols.iter_mut().enumerate() {
                if problem.covers(p, c) {
                    col.push(p as u32);
                }
            }
        }
        let integral = problem.mass().iter().all(|m| m.fract() == 0.0) && problem.total_mass() < 9e15;
        let eps = if integral { 0.0 } else { 1e-12 * problem.total_mass().max(1.0) };
        Columns { problem, cols, eps }
    }
}

/// Fixed-in / fixed-out split of the candidates; the rest are free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partial {
    pub included: Vec<usize>,
    pub excluded: Vec<usize>,
}

/// Scratch state shared by bound evaluations.
struct Workspace {
    mark: Vec<u32>,
    stamp: u32,
    gains: Vec<f64>,
}

impl Workspace {
    fn new(n_profiles: usize, n_candidates: usize) -> Self {
        Workspace {
            mark: vec![0; n_profiles],
            stamp: 0,
            gains: vec![0.0; n_candidates],
        }
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.fill(0);
            self.stamp = 1;
        }
        self.stamp
    }
}

struct NodeEval {
    covered: f64,
    bound: f64,
    free: Vec<usize>,
    slots: usize,
}

/// Covered mass of `included`, residual gains of `free`, and the union bound.
fn evaluate(cols: &Columns<'_>, ws: &mut Workspace, included: &[usize], free: Vec<usize>, budget: usize) -> NodeEval {
    let mass = cols.problem.mass();
    let stamp = ws.next_stamp();
    let mut covered = 0.0;
    for &c in included {
        for &p in &cols.cols[c] {
            let p = p as usize;
            if ws.mark[p] != stamp {
                ws.mark[p] = stamp;
                covered += mass[p];
            }
        }
    }
    let slots = budget.saturating_sub(included.len());
    if slots == 0 || free.is_empty() {
        return NodeEval {
            covered,
            bound: covered,
            free,
            slots,
        };
    }
    let mut gains: Vec<f64> = Vec::with_capacity(free.len());
    for &c in &free {
        let g: f64 = cols.cols[c]
            .iter()
            .filter(|p| ws.mark[**p as usize] != stamp)
            .map(|p| mass[*p as usize])
            .sum();
        ws.gains[c] = g;
        gains.push(g);
    }
    // Mass still coverable by some free column caps the union bound.
    let reach = ws.next_stamp();
    let mut coverable = 0.0;
    for &c in &free {
        for &p in &cols.cols[c] {
            let p = p as usize;
            if ws.mark[p] != stamp && ws.mark[p] != reach {
                // Uncovered profiles carry the old stamp value or older ones;
                // re-mark them with `reach` once counted.
                coverable += mass[p];
                ws.mark[p] = reach;
            }
        }
    }
    gains.sort_unstable_by(|a, b| b.total_cmp(a));
    let top: f64 = gains.iter().take(slots).sum();
    NodeEval {
        covered,
        bound: covered + top.min(coverable),
        free,
        slots,
    }
}

/// Admissible bound on the best objective reachable from `partial`, as a
/// fraction of the total mass.
pub fn upper_bound(partial: &Partial, problem: &ClusteredProblem) -> f64 {
    let cols = Columns::new(problem);
    let mut ws = Workspace::new(problem.n_profiles(), problem.n_candidates());
    let d = problem.n_candidates();
    let mut fixed = vec![false; d];
    partial.included.iter().chain(&partial.excluded).for_each(|&c| fixed[c] = true);
    let free: Vec<usize> = (0..d).filter(|c| !fixed[*c]).collect();
    let eval = evaluate(&cols, &mut ws, &partial.included, free, problem.budget());
    if problem.total_mass() == 0.0 {
        return 0.0;
    }
    eval.bound / problem.total_mass()
}

fn lex_less(a: &[usize], b: &[usize]) -> bool {
    a.cmp(b) == Ordering::Less
}

#[derive(Debug)]
struct Node {
    bound: f64,
    seq: u64,
    included: Vec<usize>,
    excluded: Vec<bool>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    value: f64,
    set: Vec<usize>,
}

impl Incumbent {
    fn offer(&mut self, value: f64, mut set: Vec<usize>) {
        set.sort_unstable();
        if value > self.value || (value == self.value && lex_less(&set, &self.set)) {
            self.value = value;
            self.set = set;
        }
    }

    /// True when no set under a node with this bound and lexicographically
    /// smallest completion can replace the incumbent.
    fn dominates(&self, bound: f64, eps: f64, lexmin: &[usize]) -> bool {
        bound < self.value - eps || (bound <= self.value && !lex_less(lexmin, &self.set))
    }
}

fn lexmin_completion(included: &[usize], free: &[usize], slots: usize) -> Vec<usize> {
    let mut set: Vec<usize> = included.iter().copied().chain(free.iter().copied().take(slots)).collect();
    set.sort_unstable();
    set
}

/// Greedy completion of `included` by largest residual gain.
fn greedy(cols: &Columns<'_>, included: &[usize], free: &[usize], slots: usize) -> (f64, Vec<usize>) {
    let mass = cols.problem.mass();
    let mut covered = vec![false; mass.len()];
    let mut value = 0.0;
    for &c in included {
        for &p in &cols.cols[c] {
            if !covered[p as usize] {
                covered[p as usize] = true;
                value += mass[p as usize];
            }
        }
    }
    let mut set = included.to_vec();
    let mut avail: Vec<usize> = free.to_vec();
    for _ in 0..slots.min(avail.len()) {
        let (best_i, _) = avail
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let g: f64 = cols.cols[c]
                    .iter()
                    .filter(|p| !covered[**p as usize])
                    .map(|p| mass[*p as usize])
                    .sum();
                (i, g)
            })
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let c = avail.remove(best_i);
        for &p in &cols.cols[c] {
            if !covered[p as usize] {
                covered[p as usize] = true;
                value += mass[p as usize];
            }
        }
        set.push(c);
    }
    (value, set)
}

fn finish(
    problem: &ClusteredProblem,
    set: &[usize],
    method: Method,
    start: Instant,
    nodes: u64,
    optimal: bool,
) -> Result<Solution> {
    let decision = DecisionVector::from_indices(problem.n_candidates(), set)?;
    Ok(Solution {
        objective: problem.objective(decision.bits()),
        decision,
        method,
        wall_time: start.elapsed(),
        iterations: nodes,
        optimal,
    })
}

fn check_budget(problem: &ClusteredProblem) -> Result<()> {
    let r = problem.budget();
    if r == 0 || r > problem.n_candidates() {
        return Err(Error::InvalidParameter(format!(
            "budget {r} outside 1..={}",
            problem.n_candidates()
        )));
    }
    Ok(())
}

/// Proven-optimal solve (unless a limit stops it first). The reported method
/// is `Sbc`; callers solving an unclustered problem relabel it.
pub fn solve_exact(problem: &ClusteredProblem, config: &SolverConfig) -> Result<Solution> {
    check_budget(problem)?;
    match config.mode {
        SolverMode::Exhaustive => enumerate(problem, config, Method::Sbc),
        SolverMode::BranchAndBound => branch_and_bound(problem, config),
    }
}

fn branch_and_bound(problem: &ClusteredProblem, config: &SolverConfig) -> Result<Solution> {
    let start = Instant::now();
    let d = problem.n_candidates();
    let r = problem.budget();
    let cols = Columns::new(problem);
    let eps = cols.eps;
    let mut ws = Workspace::new(problem.n_profiles(), d);

    let all: Vec<usize> = (0..d).collect();
    let (gv, gs) = greedy(&cols, &[], &all, r);
    let mut inc = Incumbent {
        value: f64::NEG_INFINITY,
        set: vec![usize::MAX],
    };
    inc.offer(gv, gs);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::INFINITY,
        seq,
        included: Vec::new(),
        excluded: vec![false; d],
    });
    let mut nodes = 0u64;
    let mut optimal = true;

    while let Some(node) = heap.pop() {
        if nodes >= config.node_limit || start.elapsed() > config.time_limit {
            optimal = false;
            break;
        }
        nodes += 1;
        let free: Vec<usize> = (0..d)
            .filter(|&c| !node.excluded[c] && !node.included.contains(&c))
            .collect();
        let slots = r - node.included.len();
        if free.len() < slots {
            continue;
        }
        let lexmin = lexmin_completion(&node.included, &free, slots);
        if inc.dominates(node.bound, eps, &lexmin) {
            continue;
        }
        let ev = evaluate(&cols, &mut ws, &node.included, free, r);
        if inc.dominates(ev.bound, eps, &lexmin) {
            continue;
        }
        // No slot left, no free column left to choose from, or nothing left
        // to gain: the smallest completion is as good as any.
        let max_gain = ev.free.iter().map(|&c| ws.gains[c]).fold(0.0, f64::max);
        if ev.slots == 0 || ev.free.len() == ev.slots || max_gain <= 0.0 {
            let value = if ev.free.len() == ev.slots && ev.slots > 0 {
                evaluate(&cols, &mut ws, &lexmin, Vec::new(), r).covered
            } else {
                ev.covered
            };
            inc.offer(value, lexmin);
            continue;
        }
        if node.included.is_empty() || nodes.is_multiple_of(64) {
            let (v, s) = greedy(&cols, &node.included, &ev.free, ev.slots);
            inc.offer(v, s);
        }
        // Branch on the free column with the largest residual gain.
        let branch = ev
            .free
            .iter()
            .copied()
            .fold(ev.free[0], |b, c| if ws.gains[c] > ws.gains[b] { c } else { b });
        let mut included = node.included.clone();
        included.push(branch);
        seq += 1;
        heap.push(Node {
            bound: ev.bound,
            seq,
            included,
            excluded: node.excluded.clone(),
        });
        let mut excluded = node.excluded;
        excluded[branch] = true;
        seq += 1;
        heap.push(Node {
            bound: ev.bound,
            seq,
            included: node.included,
            excluded,
        });
    }
    let set = inc.set.clone();
    finish(problem, &set, Method::Sbc, start, nodes, optimal)
}

/// Exhaustive enumeration of all size-`r` subsets in lexicographic order.
pub fn solve_bruteforce(problem: &ClusteredProblem) -> Result<Solution> {
    check_budget(problem)?;
    let needed = binomial(problem.n_candidates(), problem.budget());
    if needed > BRUTE_FORCE_LIMIT {
        return Err(Error::EnumerationLimit {
            needed,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    enumerate(problem, &SolverConfig::default(), Method::Brute)
}

fn enumerate(problem: &ClusteredProblem, config: &SolverConfig, method: Method) -> Result<Solution> {
    let start = Instant::now();
    let cols = Columns::new(problem);
    let d = problem.n_candidates();
    let r = problem.budget();
    let mass = problem.mass();
    let mut count = vec![0u32; problem.n_profiles()];
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut stack: Vec<usize> = Vec::with_capacity(r);
    let mut value = 0.0;
    let mut leaves = 0u64;
    let mut optimal = true;

    fn add(cols: &Columns<'_>, count: &mut [u32], mass: &[f64], c: usize, value: &mut f64) {
        for &p in &cols.cols[c] {
            let p = p as usize;
            if count[p] == 0 {
                *value += mass[p];
            }
            count[p] += 1;
        }
    }
    fn remove(cols: &Columns<'_>, count: &mut [u32], mass: &[f64], c: usize, value: &mut f64) {
        for &p in &cols.cols[c] {
            let p = p as usize;
            count[p] -= 1;
            if count[p] == 0 {
                *value -= mass[p];
            }
        }
    }

    // Iterative lexicographic walk over combinations.
    let mut next = 0usize;
    'walk: loop {
        while stack.len() < r && next <= d - (r - stack.len()) {
            add(&cols, &mut count, mass, next, &mut value);
            stack.push(next);
            next += 1;
        }
        if stack.len() == r {
            leaves += 1;
            if value > best.0 {
                best = (value, stack.clone());
            }
            if leaves.is_multiple_of(4096) && (leaves >= config.node_limit || start.elapsed() > config.time_limit) {
                optimal = false;
                break 'walk;
            }
        }
        match stack.pop() {
            Some(c) => {
                remove(&cols, &mut count, mass, c, &mut value);
                next = c + 1;
            }
            None => break,
        }
        // Integral masses: add/remove round-trips are exact. Float masses
        // drift slowly, so resynchronize at the top of each subtree.
        if stack.is_empty() {
            value = 0.0;
        }
    }
    finish(problem, &best.1, method, start, leaves, optimal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{cluster, CoverageProblem, RowWeights};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(rows: &[Vec<bool>], budget: usize) -> ClusteredProblem {
        let d = rows[0].len();
        let cov = CoverageProblem::from_rows(d, budget, rows, RowWeights::Uniform(1.0 / rows.len() as f64)).unwrap();
        cluster(&cov)
    }

    pub(crate) fn random_problem(rng: &mut ChaCha8Rng, max_d: usize, max_r: usize) -> ClusteredProblem {
        let d = rng.random_range(1..=max_d);
        let r = rng.random_range(1..=max_r.min(d));
        let n = rng.random_range(1..60);
        let density = rng.random_range(0.05..0.5);
        let rows: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_bool(density)).collect())
            .collect();
        problem(&rows, r)
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(50, 5), 2_118_760);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn full_budget_covers_everything() {
        let rows = vec![
            vec![true, false, false],
            vec![false, false, true],
            vec![false, false, false],
            vec![false, true, true],
        ];
        let p = problem(&rows, 3);
        let s = solve_exact(&p, &SolverConfig::default()).unwrap();
        let coverable: f64 = p.mass().iter().sum();
        assert_eq!(s.objective, coverable / p.total_mass());
        assert_eq!(s.objective, 0.75);
        assert!(s.optimal);
    }

    #[test]
    fn single_pick_is_best_column_smallest_index() {
        let rows = vec![
            vec![false, true, true, false],
            vec![false, true, true, false],
            vec![true, false, false, false],
        ];
        let p = problem(&rows, 1);
        let s = solve_exact(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.decision.indices(), vec![1]);
        let b = solve_bruteforce(&p).unwrap();
        assert_eq!(b.decision.indices(), vec![1]);
    }

    #[test]
    fn bruteforce_small_cases() {
        let p = problem(&[vec![true]], 1);
        assert_eq!(solve_bruteforce(&p).unwrap().decision.indices(), vec![0]);
        // two identical columns: the smaller index wins
        let p = problem(&[vec![true, true], vec![true, true]], 1);
        assert_eq!(solve_bruteforce(&p).unwrap().decision.indices(), vec![0]);
        let big = problem(&[vec![true; 40]], 20);
        assert!(matches!(solve_bruteforce(&big), Err(Error::EnumerationLimit { .. })));
    }

    #[test]
    fn padding_uses_smallest_unused_indices() {
        // Only column 3 ever captures; r = 3 pads with 0 and 1.
        let rows = vec![vec![false, false, false, true, false]; 3];
        let p = problem(&rows, 3);
        let s = solve_exact(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.decision.indices(), vec![0, 1, 3]);
        assert_eq!(s.decision.count(), 3);
        let p = problem(&[vec![false, false, false]], 2);
        assert_eq!(solve_exact(&p, &SolverConfig::default()).unwrap().decision.indices(), vec![0, 1]);
    }

    #[test]
    fn upper_bound_examples() {
        let rows = vec![
            vec![true, false, false],
            vec![true, false, false],
            vec![false, true, false],
            vec![false, false, true],
        ];
        let p = problem(&rows, 2);
        // disjoint columns: bound equals best completion
        let root = upper_bound(&Partial::default(), &p);
        assert_eq!(root, 0.75);
        let full = Partial {
            included: vec![1, 2],
            excluded: vec![],
        };
        assert_eq!(upper_bound(&full, &p), 0.5);
    }

    #[test]
    fn bound_dominates_completion_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        while checked < 200 {
            let p = random_problem(&mut rng, 9, 4);
            let d = p.n_candidates();
            let r = p.budget();
            let mut partial = Partial::default();
            for c in 0..d {
                match rng.random_range(0..4) {
                    0 if partial.included.len() < r => partial.included.push(c),
                    1 => partial.excluded.push(c),
                    _ => {}
                }
            }
            let free = d - partial.included.len() - partial.excluded.len();
            let slots = r - partial.included.len();
            if free < slots {
                continue;
            }
            // exhaustive optimum over completions
            let free_cols: Vec<usize> = (0..d)
                .filter(|c| !partial.included.contains(c) && !partial.excluded.contains(c))
                .collect();
            let mut best: f64 = 0.0;
            for mask in 0u32..(1 << free_cols.len()) {
                if mask.count_ones() as usize != slots {
                    continue;
                }
                let mut open = vec![false; d];
                partial.included.iter().for_each(|&c| open[c] = true);
                for (i, &c) in free_cols.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        open[c] = true;
                    }
                }
                best = best.max(p.objective(&open));
            }
            assert!(upper_bound(&partial, &p) >= best - 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn limits_return_feasible_incumbent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<bool>> = (0..400)
            .map(|_| (0..30).map(|_| rng.random_bool(0.15)).collect())
            .collect();
        let p = problem(&rows, 6);
        let cfg = SolverConfig {
            node_limit: 3,
            ..Default::default()
        };
        let s = solve_exact(&p, &cfg).unwrap();
        assert!(!s.optimal);
        assert_eq!(s.decision.count(), 6);
        assert_eq!(s.objective, p.objective(s.decision.bits()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exact_matches_bruteforce(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 10, 4);
            let a = solve_exact(&p, &SolverConfig::default()).unwrap();
            let b = solve_bruteforce(&p).unwrap();
            prop_assert_eq!(a.objective, b.objective);
            prop_assert_eq!(&a.decision, &b.decision);
            let ex = solve_exact(&p, &SolverConfig { mode: SolverMode::Exhaustive, ..Default::default() }).unwrap();
            prop_assert_eq!(ex.decision, b.decision);
        }
    }
}
