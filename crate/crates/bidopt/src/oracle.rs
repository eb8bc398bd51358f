//! Independent brute-force oracles for small instances: exhaustive grid
//! search over pure and two-bid mixed strategies, and an exact bipartite
//! feasibility check. Used to certify solver outputs, never by the solver's
//! hot path itself (the solver has its own transportation check).

use crate::error::{Error, Result};
use crate::market::{MixedStrategy, ProblemInstance, PureAllocation};
use crate::solver;
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Fractions enumerate {0, 1/q, ..., 1}.
    pub gamma_steps: usize,
    /// Refuse enumerations larger than this many states.
    pub max_states: f64,
    /// Also try midpoints between adjacent knot bids (pointless for step
    /// curves, where win cost is flat between knots).
    pub include_midpoints: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { gamma_steps: 20, max_states: 1e8, include_midpoints: false }
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub cost: f64,
    pub allocation: PureAllocation,
    pub states_searched: u64,
    /// Discretization slack of the fraction grid: (1/q)·Σ_j win_cost at the
    /// group's top knot. Comparisons against exact optima carry this slack.
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct MixedGridResult {
    pub cost: f64,
    pub strategy: MixedStrategy,
    pub states_searched: u64,
    pub slack: f64,
}

struct Pair {
    campaign: usize,
    group: usize,
    /// Candidate bids with precomputed volume and win cost.
    bids: Vec<(f64, f64, f64)>,
}

struct Prep {
    pairs: Vec<Pair>,
    demands: Vec<f64>,
    cids: Vec<String>,
    gids: Vec<String>,
    /// Max impressions campaign i can still gain from pairs[k..].
    suffix_potential: Vec<Vec<f64>>,
    slack: f64,
}

fn prepare(instance: &ProblemInstance, spec: &GridSpec) -> Result<Prep> {
    if spec.gamma_steps == 0 || spec.gamma_steps > 50 {
        return Err(Error::Domain(format!(
            "gamma_steps must be in 1..=50, got {}",
            spec.gamma_steps
        )));
    }
    let cids: Vec<String> = instance.campaigns.iter().map(|c| c.id.clone()).collect();
    let gids: Vec<String> = instance.groups.iter().map(|g| g.id.clone()).collect();
    let demands: Vec<f64> = instance.campaigns.iter().map(|c| c.impressions).collect();
    let mut pairs = Vec::new();
    for (j, g) in instance.groups.iter().enumerate() {
        for (i, c) in instance.campaigns.iter().enumerate() {
            if !instance.is_admissible(&c.id, &g.id) {
                continue;
            }
            let mut bids: Vec<f64> = g.curve.knots().iter().map(|k| k.0).collect();
            if spec.include_midpoints {
                let mids: Vec<f64> =
                    g.curve.knots().windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)).collect();
                bids.extend(mids);
                bids.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
            let bids = bids
                .into_iter()
                .map(|b| Ok((b, g.curve.eval(b)?, g.curve.win_cost(b)?)))
                .collect::<Result<Vec<_>>>()?;
            pairs.push(Pair { campaign: i, group: j, bids });
        }
    }
    // Suffix potentials for demand pruning.
    let mut suffix_potential = vec![vec![0.0; cids.len()]; pairs.len() + 1];
    for k in (0..pairs.len()).rev() {
        let mut row = suffix_potential[k + 1].clone();
        let top = pairs[k].bids.iter().map(|b| b.1).fold(0.0_f64, f64::max);
        row[pairs[k].campaign] += top;
        suffix_potential[k] = row;
    }
    let slack = (1.0 / spec.gamma_steps as f64)
        * instance
            .groups
            .iter()
            .map(|g| {
                let top = g.curve.knots().last().unwrap().0;
                g.curve.win_cost(top).unwrap()
            })
            .sum::<f64>();
    Ok(Prep { pairs, demands, cids, gids, suffix_potential, slack })
}

fn check_cap(states: f64, cap: f64) -> Result<()> {
    if states > cap {
        return Err(Error::OracleCap { states, cap });
    }
    Ok(())
}

/// Exhaustive search over knot bids and grid fractions for the cheapest
/// feasible pure allocation.
pub fn grid_pure_optimum(instance: &ProblemInstance, spec: &GridSpec) -> Result<GridResult> {
    let prep = prepare(instance, spec)?;
    let q = spec.gamma_steps;
    let states: f64 = prep
        .pairs
        .iter()
        .map(|p| (p.bids.len() * (q + 1)) as f64)
        .product();
    check_cap(states, spec.max_states)?;

    struct Search<'a> {
        prep: &'a Prep,
        q: usize,
        best_cost: f64,
        best: Vec<(usize, usize)>, // (bid index, fraction steps) per pair
        current: Vec<(usize, usize)>,
        obtained: Vec<f64>,
        group_steps: Vec<usize>,
        visited: u64,
    }
    impl Search<'_> {
        fn feasible_tail(&self, k: usize) -> bool {
            self.prep.demands.iter().enumerate().all(|(i, &d)| {
                self.obtained[i] + self.prep.suffix_potential[k][i] >= d - 1e-9 * d.max(1.0)
            })
        }
        fn go(&mut self, k: usize, cost: f64) {
            self.visited += 1;
            if cost >= self.best_cost || !self.feasible_tail(k) {
                return;
            }
            if k == self.prep.pairs.len() {
                self.best_cost = cost;
                self.best = self.current.clone();
                return;
            }
            let pair = &self.prep.pairs[k];
            let room = self.q - self.group_steps[pair.group];
            for bi in 0..pair.bids.len() {
                let (_, volume, win) = pair.bids[bi];
                for steps in 0..=room {
                    let frac = steps as f64 / self.q as f64;
                    self.current.push((bi, steps));
                    self.obtained[pair.campaign] += frac * volume;
                    self.group_steps[pair.group] += steps;
                    self.go(k + 1, cost + frac * win);
                    self.group_steps[pair.group] -= steps;
                    self.obtained[pair.campaign] -= frac * volume;
                    self.current.pop();
                }
            }
        }
    }
    let mut search = Search {
        prep: &prep,
        q,
        best_cost: f64::INFINITY,
        best: Vec::new(),
        current: Vec::new(),
        obtained: vec![0.0; prep.cids.len()],
        group_steps: vec![0; prep.gids.len()],
        visited: 0,
    };
    search.go(0, 0.0);
    if !search.best_cost.is_finite() {
        return Err(Error::Infeasible { campaigns: prep.cids.clone() });
    }
    let mut allocation = PureAllocation::default();
    for (k, &(bi, steps)) in search.best.iter().enumerate() {
        let pair = &prep.pairs[k];
        let frac = steps as f64 / q as f64;
        if frac > 0.0 {
            allocation.entries.insert(
                (prep.cids[pair.campaign].clone(), prep.gids[pair.group].clone()),
                (pair.bids[bi].0, frac),
            );
        }
    }
    Ok(GridResult {
        cost: search.best_cost,
        allocation,
        states_searched: search.visited,
        slack: prep.slack,
    })
}

/// Exhaustive search over two-bid mixed strategies on the same grid.
pub fn grid_mixed_cost(instance: &ProblemInstance, spec: &GridSpec) -> Result<MixedGridResult> {
    let prep = prepare(instance, spec)?;
    let q = spec.gamma_steps;

    // Per-pair options: (lo bid, hi bid, lo steps, hi steps).
    struct Option4 {
        imps: f64,
        cost: f64,
        steps: usize,
        points: Vec<(f64, f64)>,
    }
    let mut options: Vec<Vec<Option4>> = Vec::with_capacity(prep.pairs.len());
    for pair in &prep.pairs {
        let mut opts = Vec::new();
        for lo in 0..pair.bids.len() {
            for hi in lo..pair.bids.len() {
                for s_lo in 0..=q {
                    let s_hi_max = q - s_lo;
                    for s_hi in 0..=s_hi_max {
                        if lo == hi && s_hi > 0 {
                            continue; // same bid twice is the single-bid case
                        }
                        if s_lo == 0 && lo != hi {
                            continue; // lo bid unused: covered by (hi, hi)
                        }
                        let f_lo = s_lo as f64 / q as f64;
                        let f_hi = s_hi as f64 / q as f64;
                        let imps = f_lo * pair.bids[lo].1 + f_hi * pair.bids[hi].1;
                        let cost = f_lo * pair.bids[lo].2 + f_hi * pair.bids[hi].2;
                        let mut points = Vec::new();
                        if f_lo > 0.0 {
                            points.push((pair.bids[lo].0, f_lo));
                        }
                        if f_hi > 0.0 {
                            points.push((pair.bids[hi].0, f_hi));
                        }
                        opts.push(Option4 { imps, cost, steps: s_lo + s_hi, points });
                    }
                }
            }
        }
        options.push(opts);
    }
    let states: f64 = options.iter().map(|o| o.len() as f64).product();
    check_cap(states, spec.max_states)?;

    struct Search<'a> {
        prep: &'a Prep,
        options: &'a [Vec<Option4>],
        q: usize,
        best_cost: f64,
        best: Vec<usize>,
        current: Vec<usize>,
        obtained: Vec<f64>,
        group_steps: Vec<usize>,
        visited: u64,
    }
    impl Search<'_> {
        fn go(&mut self, k: usize, cost: f64) {
            self.visited += 1;
            if cost >= self.best_cost {
                return;
            }
            let ok = self.prep.demands.iter().enumerate().all(|(i, &d)| {
                self.obtained[i] + self.prep.suffix_potential[k][i] >= d - 1e-9 * d.max(1.0)
            });
            if !ok {
                return;
            }
            if k == self.prep.pairs.len() {
                self.best_cost = cost;
                self.best = self.current.clone();
                return;
            }
            let pair = &self.prep.pairs[k];
            let room = self.q - self.group_steps[pair.group];
            for (oi, opt) in self.options[k].iter().enumerate() {
                if opt.steps > room {
                    continue;
                }
                self.current.push(oi);
                self.obtained[pair.campaign] += opt.imps;
                self.group_steps[pair.group] += opt.steps;
                self.go(k + 1, cost + opt.cost);
                self.group_steps[pair.group] -= opt.steps;
                self.obtained[pair.campaign] -= opt.imps;
                self.current.pop();
            }
        }
    }
    let mut search = Search {
        prep: &prep,
        options: &options,
        q,
        best_cost: f64::INFINITY,
        best: Vec::new(),
        current: Vec::new(),
        obtained: vec![0.0; prep.cids.len()],
        group_steps: vec![0; prep.gids.len()],
        visited: 0,
    };
    search.go(0, 0.0);
    if !search.best_cost.is_finite() {
        return Err(Error::Infeasible { campaigns: prep.cids.clone() });
    }
    let mut strategy = MixedStrategy::default();
    for (k, &oi) in search.best.iter().enumerate() {
        let pair = &prep.pairs[k];
        let points = options[k][oi].points.clone();
        if !points.is_empty() {
            strategy.entries.insert(
                (prep.cids[pair.campaign].clone(), prep.gids[pair.group].clone()),
                points,
            );
        }
    }
    Ok(MixedGridResult {
        cost: search.best_cost,
        strategy,
        states_searched: search.visited,
        slack: prep.slack,
    })
}

/// Exact feasibility of meeting the subproblem demands at price p, by
/// augmenting-path max-flow over the admissibility bipartite graph.
pub fn maxflow_feasible(
    instance: &ProblemInstance,
    cc: &BTreeSet<String>,
    ct: &BTreeSet<String>,
    p: f64,
) -> bool {
    solver::maxflow_done(instance, cc, ct, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supply_curve::SupplyCurve;

    fn f1() -> ProblemInstance {
        let g1 = SupplyCurve::step(vec![(1.0, 100.0), (2.0, 300.0)]).unwrap();
        ProblemInstance::from_groups(
            vec![("c1".into(), 150.0, vec!["g1".into()])],
            vec![("g1".into(), g1)],
        )
        .unwrap()
    }

    fn f2() -> ProblemInstance {
        let g1 = SupplyCurve::step(vec![(1.0, 100.0), (5.0, 200.0)]).unwrap();
        let g2 = SupplyCurve::step(vec![(0.5, 100.0)]).unwrap();
        ProblemInstance::from_groups(
            vec![
                ("c1".into(), 150.0, vec!["g1".into()]),
                ("c2".into(), 50.0, vec!["g1".into(), "g2".into()]),
            ],
            vec![("g1".into(), g1), ("g2".into(), g2)],
        )
        .unwrap()
    }

    #[test]
    fn pure_grid_f1() {
        let spec = GridSpec { gamma_steps: 20, ..Default::default() };
        let r = grid_pure_optimum(&f1(), &spec).unwrap();
        assert_eq!(r.cost, 250.0);
        assert_eq!(r.allocation.entries[&("c1".into(), "g1".into())], (2.0, 0.5));
    }

    #[test]
    fn pure_grid_f2() {
        let spec = GridSpec { gamma_steps: 20, ..Default::default() };
        let r = grid_pure_optimum(&f2(), &spec).unwrap();
        assert_eq!(r.cost, 475.0);
    }

    #[test]
    fn mixed_grid_fixtures() {
        let spec = GridSpec { gamma_steps: 20, ..Default::default() };
        assert_eq!(grid_mixed_cost(&f1(), &spec).unwrap().cost, 200.0);
        assert_eq!(grid_mixed_cost(&f2(), &spec).unwrap().cost, 375.0);
    }

    #[test]
    fn maxflow_examples() {
        let f2 = f2();
        let cc: BTreeSet<String> = ["c1".to_string(), "c2".to_string()].into();
        let ct: BTreeSet<String> = ["g1".to_string(), "g2".to_string()].into();
        assert!(!maxflow_feasible(&f2, &cc, &ct, 1.0));
        let cc1: BTreeSet<String> = ["c1".to_string()].into();
        let ct1: BTreeSet<String> = ["g1".to_string()].into();
        assert!(maxflow_feasible(&f2, &cc1, &ct1, 5.0));
    }
}
