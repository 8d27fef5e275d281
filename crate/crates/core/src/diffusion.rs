//! Independent Cascade diffusion: single realizations, Monte-Carlo influence
//! estimates, and lazy-greedy targeted influence maximization.
//!
//! A realization is drawn as a live-edge graph (each edge kept with its
//! probability) and the influenced set is everything reachable from the
//! seeds. Coins are flipped lazily the first time an edge is examined, which
//! has the same distribution as the round-based process.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::model::{SocialGraph, UserId};
use crate::{Error, Result};

/// Ordered set of distinct seed users.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SeedSet(Vec<UserId>);

impl SeedSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps the first occurrence of every user.
    pub fn from_users(users: impl IntoIterator<Item = UserId>) -> Self {
        let mut s = SeedSet::new();
        s.extend(users);
        s
    }

    /// Returns `false` if `user` was already present.
    pub fn insert(&mut self, user: UserId) -> bool {
        if self.0.contains(&user) {
            return false;
        }
        self.0.push(user);
        true
    }

    pub fn extend(&mut self, users: impl IntoIterator<Item = UserId>) {
        for u in users {
            self.insert(u);
        }
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.0.contains(&user)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[UserId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = UserId> + '_ {
        self.0.iter().copied()
    }

    pub fn validate(&self, social: &SocialGraph) -> Result<()> {
        match self.0.iter().find(|&&u| u >= social.node_count()) {
            Some(&u) => Err(Error::UnknownId { kind: "user", id: u }),
            None => Ok(()),
        }
    }
}

impl From<SeedSet> for Vec<UserId> {
    fn from(s: SeedSet) -> Self {
        s.0
    }
}

/// Reusable scratch space for repeated IC realizations on one graph.
pub struct Diffuser<'g> {
    graph: &'g SocialGraph,
    mark: Vec<u32>,
    epoch: u32,
    active: Vec<UserId>,
}

impl<'g> Diffuser<'g> {
    pub fn new(graph: &'g SocialGraph) -> Self {
        Diffuser { graph, mark: vec![0; graph.node_count()], epoch: 0, active: Vec::new() }
    }

    /// One realization; returns the influenced users in activation order.
    pub fn run<R: Rng + ?Sized>(&mut self, seeds: &[UserId], rng: &mut R) -> &[UserId] {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        self.active.clear();
        for &s in seeds {
            if self.mark[s] != self.epoch {
                self.mark[s] = self.epoch;
                self.active.push(s);
            }
        }
        let mut head = 0;
        while head < self.active.len() {
            let u = self.active[head];
            head += 1;
            for &e in self.graph.out_edges(u) {
                let edge = self.graph.edge(e);
                if self.mark[edge.to] == self.epoch {
                    continue;
                }
                if rng.gen::<f64>() < edge.p {
                    self.mark[edge.to] = self.epoch;
                    self.active.push(edge.to);
                }
            }
        }
        &self.active
    }
}

/// One IC realization from `seeds`; the influenced users, ascending.
pub fn simulate_ic<R: Rng + ?Sized>(social: &SocialGraph, seeds: &[UserId], rng: &mut R) -> Vec<UserId> {
    let mut out = Diffuser::new(social).run(seeds, rng).to_vec();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceEstimate {
    /// Mean number of influenced targets.
    pub expected: f64,
    /// Standard error of `expected`.
    pub std_error: f64,
    pub trials: usize,
    /// Empirical activation probability of each target.
    pub activation: BTreeMap<UserId, f64>,
}

/// Monte-Carlo estimate of the number of `targets` influenced by `seeds`.
pub fn estimate_influence<R: Rng + ?Sized>(
    social: &SocialGraph,
    seeds: &[UserId],
    targets: &[UserId],
    trials: usize,
    rng: &mut R,
) -> Result<InfluenceEstimate> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let mut is_target = vec![false; social.node_count()];
    for &t in targets {
        *is_target.get_mut(t).ok_or(Error::UnknownId { kind: "user", id: t })? = true;
    }
    let mut hits = vec![0u64; social.node_count()];
    let mut sum = 0u64;
    let mut sum_sq = 0u64;
    let mut diffuser = Diffuser::new(social);
    for _ in 0..trials {
        let mut count = 0u64;
        for &u in diffuser.run(seeds, rng) {
            if is_target[u] {
                hits[u] += 1;
                count += 1;
            }
        }
        sum += count;
        sum_sq += count * count;
    }
    let n = trials as f64;
    let mean = sum as f64 / n;
    let var = if trials > 1 { (sum_sq as f64 - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
    let activation = targets.iter().map(|&t| (t, hits[t] as f64 / n)).collect();
    Ok(InfluenceEstimate { expected: mean, std_error: libm::sqrt(var / n), trials, activation })
}

/// A fixed batch of live-edge graphs shared by every evaluation of a greedy
/// run (common random numbers), so that estimated spread is an exact
/// coverage function over the batch: monotone and submodular.
pub struct LiveEdgeSamples<'g> {
    graph: &'g SocialGraph,
    samples: usize,
    words: usize,
    bits: Vec<u64>,
}

impl<'g> LiveEdgeSamples<'g> {
    pub fn sample<R: Rng + ?Sized>(graph: &'g SocialGraph, samples: usize, rng: &mut R) -> Self {
        let samples = samples.max(1);
        let words = graph.edge_count().div_ceil(64);
        let mut bits = vec![0u64; samples * words];
        for r in 0..samples {
            for (e, edge) in graph.edges().iter().enumerate() {
                if rng.gen::<f64>() < edge.p {
                    bits[r * words + e / 64] |= 1 << (e % 64);
                }
            }
        }
        LiveEdgeSamples { graph, samples, words, bits }
    }

    pub fn graph(&self) -> &'g SocialGraph {
        self.graph
    }

    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    #[inline]
    pub fn is_live(&self, sample: usize, edge: usize) -> bool {
        self.bits[sample * self.words + edge / 64] & (1 << (edge % 64)) != 0
    }

    /// Users reached from `seeds` over the live edges of `sample`, ascending.
    pub fn reached(&self, sample: usize, seeds: &[UserId]) -> Vec<UserId> {
        let graph = self.graph;
        let mut seen = vec![false; graph.node_count()];
        let mut stack: Vec<UserId> = Vec::new();
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(u) = stack.pop() {
            for &e in graph.out_edges(u) {
                let w = graph.edge(e).to;
                if !seen[w] && self.is_live(sample, e) {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        (0..seen.len()).filter(|&u| seen[u]).collect()
    }

    /// Average weighted coverage of `seeds` over the batch.
    pub fn coverage(&self, seeds: &[UserId], weights: &[f64]) -> f64 {
        let mut state = Coverage::new(self, weights);
        for &s in seeds {
            state.commit(s);
        }
        state.covered / self.samples as f64
    }
}

/// Per-sample reached sets of the current seed set.
struct Coverage<'s, 'g> {
    samples: &'s LiveEdgeSamples<'g>,
    weights: &'s [f64],
    n: usize,
    reached: Vec<bool>,
    covered: f64,
    stamp: Vec<u32>,
    epoch: u32,
    stack: Vec<UserId>,
}

impl<'s, 'g> Coverage<'s, 'g> {
    fn new(samples: &'s LiveEdgeSamples<'g>, weights: &'s [f64]) -> Self {
        let n = samples.graph.node_count();
        Coverage {
            samples,
            weights,
            n,
            reached: vec![false; n * samples.samples],
            covered: 0.0,
            stamp: vec![0; n],
            epoch: 0,
            stack: Vec::new(),
        }
    }

    /// Sum over samples of the weight newly reached from `v`; with `commit`
    /// the reached sets are updated.
    fn explore(&mut self, v: UserId, commit: bool) -> f64 {
        let graph = self.samples.graph;
        let mut total = 0.0;
        for r in 0..self.samples.samples {
            let base = r * self.n;
            if self.reached[base + v] {
                continue;
            }
            self.epoch = self.epoch.wrapping_add(1);
            if self.epoch == 0 {
                self.stamp.iter_mut().for_each(|s| *s = 0);
                self.epoch = 1;
            }
            self.stamp[v] = self.epoch;
            self.stack.clear();
            self.stack.push(v);
            while let Some(u) = self.stack.pop() {
                total += self.weights[u];
                if commit {
                    self.reached[base + u] = true;
                }
                for &e in graph.out_edges(u) {
                    let w = graph.edge(e).to;
                    if self.stamp[w] != self.epoch && !self.reached[base + w] && self.samples.is_live(r, e) {
                        self.stamp[w] = self.epoch;
                        self.stack.push(w);
                    }
                }
            }
        }
        if commit {
            self.covered += total;
        }
        total
    }

    fn commit(&mut self, v: UserId) -> f64 {
        self.explore(v, true)
    }

    fn gain(&mut self, v: UserId) -> f64 {
        self.explore(v, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    /// Seeds added by the run, in selection order.
    pub seeds: SeedSet,
    /// Estimated marginal gain of each added seed.
    pub gains: Vec<f64>,
    /// Estimated weighted coverage of initial plus added seeds.
    pub coverage: f64,
    /// Total target weight.
    pub target_weight: f64,
}

/// Lazy-greedy targeted influence maximization over a fixed live-edge batch.
///
/// Each step adds the candidate with the largest estimated marginal gain in
/// weighted target coverage (ties to the smaller user id). The run stops when
/// `budget` seeds were added, when coverage reaches `coverage_goal` times the
/// total target weight, or when no candidate has a positive gain.
pub struct TargetedGreedy<'a, 'g> {
    samples: &'a LiveEdgeSamples<'g>,
    weights: Vec<f64>,
    initial: Vec<UserId>,
    excluded: Vec<bool>,
}

impl<'a, 'g> TargetedGreedy<'a, 'g> {
    /// Unit benefit on each target, zero elsewhere.
    pub fn new(samples: &'a LiveEdgeSamples<'g>, targets: &[UserId]) -> Self {
        let n = samples.graph.node_count();
        let mut weights = vec![0.0; n];
        for &t in targets {
            weights[t] = 1.0;
        }
        Self::weighted(samples, weights)
    }

    /// Arbitrary non-negative benefit per user.
    pub fn weighted(samples: &'a LiveEdgeSamples<'g>, weights: Vec<f64>) -> Self {
        let n = samples.graph.node_count();
        assert_eq!(weights.len(), n, "one weight per user");
        TargetedGreedy { samples, weights, initial: Vec::new(), excluded: vec![false; n] }
    }

    /// Seeds already chosen; their coverage counts but they are not returned.
    pub fn with_initial(mut self, seeds: &[UserId]) -> Self {
        self.initial = seeds.to_vec();
        self
    }

    /// Users that may never be picked.
    pub fn excluding(mut self, users: &[UserId]) -> Self {
        for &u in users {
            self.excluded[u] = true;
        }
        self
    }

    pub fn run(&self, budget: usize, coverage_goal: f64) -> GreedyOutcome {
        #[derive(PartialEq)]
        struct Entry {
            gain: f64,
            user: UserId,
            fresh_at: usize,
        }
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                self.gain.total_cmp(&other.gain).then_with(|| other.user.cmp(&self.user))
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let target_weight: f64 = self.weights.iter().sum();
        let samples = self.samples.samples as f64;
        let mut coverage = Coverage::new(self.samples, &self.weights);
        for &s in &self.initial {
            coverage.commit(s);
        }
        let mut outcome = GreedyOutcome {
            seeds: SeedSet::new(),
            gains: Vec::new(),
            coverage: coverage.covered / samples,
            target_weight,
        };
        if target_weight <= 0.0 {
            return outcome;
        }
        let goal = coverage_goal * target_weight * samples;

        let mut heap: BinaryHeap<Entry> = (0..coverage.n)
            .filter(|&u| !self.excluded[u] && !self.initial.contains(&u))
            .map(|u| Entry { gain: coverage.gain(u), user: u, fresh_at: 0 })
            .collect();

        while outcome.seeds.len() < budget && coverage.covered < goal - 1e-9 {
            let Some(top) = heap.pop() else { break };
            if top.fresh_at != outcome.seeds.len() {
                let gain = coverage.gain(top.user);
                heap.push(Entry { gain, user: top.user, fresh_at: outcome.seeds.len() });
                continue;
            }
            if top.gain <= 0.0 {
                break;
            }
            coverage.commit(top.user);
            outcome.seeds.insert(top.user);
            outcome.gains.push(top.gain / samples);
            outcome.coverage = coverage.covered / samples;
        }
        outcome
    }
}

/// Greedy seed selection for influencing `targets`: at most `k` seeds, stops
/// early once the estimated coverage reaches `coverage_goal * |targets|`.
pub fn greedy_targeted_im<R: Rng + ?Sized>(
    social: &SocialGraph,
    targets: &[UserId],
    k: usize,
    coverage_goal: f64,
    trials: usize,
    rng: &mut R,
) -> Result<SeedSet> {
    if !(coverage_goal > 0.0 && coverage_goal <= 1.0) {
        return Err(Error::invalid("coverage goal must lie in (0, 1]"));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= social.node_count()) {
        return Err(Error::UnknownId { kind: "user", id: t });
    }
    if targets.is_empty() {
        return Ok(SeedSet::new());
    }
    let samples = LiveEdgeSamples::sample(social, trials, rng);
    Ok(TargetedGreedy::new(&samples, targets).run(k, coverage_goal).seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn path(p: f64) -> SocialGraph {
        let mut g = SocialGraph::with_nodes(3);
        g.add_edge(0, 1, p).unwrap();
        g.add_edge(1, 2, p).unwrap();
        g
    }

    #[test]
    fn zero_probability_keeps_seeds_only() {
        assert_eq!(simulate_ic(&path(0.0), &[1], &mut rng()), vec![1]);
    }

    #[test]
    fn certain_chain() {
        assert_eq!(simulate_ic(&path(1.0), &[0], &mut rng()), vec![0, 1, 2]);
    }

    #[test]
    fn bernoulli_frequency() {
        let mut g = SocialGraph::with_nodes(2);
        g.add_edge(0, 1, 0.3).unwrap();
        let mut r = rng();
        let mut d = Diffuser::new(&g);
        let hits = (0..100_000).filter(|_| d.run(&[0], &mut r).len() == 2).count();
        assert!((hits as f64 / 1e5 - 0.3).abs() < 0.01);
    }

    #[test]
    fn estimate_edge_cases() {
        let g = path(1.0);
        let e = estimate_influence(&g, &[], &[0, 1, 2], 10, &mut rng()).unwrap();
        assert_eq!(e.expected, 0.0);
        let e = estimate_influence(&g, &[0], &[0, 1, 2], 10, &mut rng()).unwrap();
        assert_eq!(e.expected, 3.0);
        assert!(estimate_influence(&g, &[0], &[0], 0, &mut rng()).is_err());
    }

    #[test]
    fn star_center_dominates() {
        let mut g = SocialGraph::with_nodes(11);
        for leaf in 1..11 {
            g.add_edge(0, leaf, 1.0).unwrap();
        }
        let targets: Vec<_> = (1..11).collect();
        let seeds = greedy_targeted_im(&g, &targets, 1, 1.0, 50, &mut rng()).unwrap();
        assert_eq!(seeds.as_slice(), &[0]);
    }

    #[test]
    fn self_activation_only() {
        let mut g = SocialGraph::with_nodes(4);
        g.add_edge(0, 1, 0.0).unwrap();
        g.add_edge(2, 3, 0.0).unwrap();
        let seeds = greedy_targeted_im(&g, &[3, 1], 2, 1.0, 20, &mut rng()).unwrap();
        assert_eq!(seeds.as_slice(), &[1, 3]);
    }

    #[test]
    fn empty_targets_give_empty_seeds() {
        let seeds = greedy_targeted_im(&path(1.0), &[], 3, 0.9, 20, &mut rng()).unwrap();
        assert!(seeds.is_empty());
    }

    #[test]
    fn stops_at_coverage_goal() {
        let mut g = SocialGraph::with_nodes(4);
        for v in 1..4 {
            g.add_edge(0, v, 0.0).unwrap();
        }
        // half the targets suffice for a 0.5 goal
        let seeds = greedy_targeted_im(&g, &[0, 1, 2, 3], 4, 0.5, 10, &mut rng()).unwrap();
        assert_eq!(seeds.len(), 2);
    }

    #[test]
    fn initial_and_excluded_seeds() {
        let mut g = SocialGraph::with_nodes(3);
        g.add_edge(0, 1, 1.0).unwrap();
        g.add_edge(0, 2, 1.0).unwrap();
        let samples = LiveEdgeSamples::sample(&g, 8, &mut rng());
        let out = TargetedGreedy::new(&samples, &[1, 2]).excluding(&[0]).run(5, 1.0);
        assert_eq!(out.seeds.as_slice(), &[1, 2]);
        let out = TargetedGreedy::new(&samples, &[1, 2]).with_initial(&[0]).run(5, 1.0);
        assert!(out.seeds.is_empty());
        assert_eq!(out.coverage, 2.0);
    }

    #[test]
    fn seed_set_dedups() {
        let s = SeedSet::from_users([3, 1, 3, 2, 1]);
        assert_eq!(s.as_slice(), &[3, 1, 2]);
    }
}
