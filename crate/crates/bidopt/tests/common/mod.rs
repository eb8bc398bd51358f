//! Shared fixtures and random-instance generators for the integration tests.
//! All generated instances are feasible by construction: demands are set to
//! what a planted strategy actually obtains.

#![allow(dead_code)]

use bidopt::market::ProblemInstance;
use bidopt::supply_curve::SupplyCurve;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_f1() -> ProblemInstance {
    let g1 = SupplyCurve::step(vec![(1.0, 100.0), (2.0, 300.0)]).unwrap();
    ProblemInstance::from_groups(
        vec![("c1".into(), 150.0, vec!["g1".into()])],
        vec![("g1".into(), g1)],
    )
    .unwrap()
}

pub fn fixture_f2() -> ProblemInstance {
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

pub fn fixture_f3() -> ProblemInstance {
    let g1 = SupplyCurve::linear(vec![(0.0, 0.0), (10.0, 1000.0)]).unwrap();
    ProblemInstance::from_groups(
        vec![("c1".into(), 150.0, vec!["g1".into()])],
        vec![("g1".into(), g1)],
    )
    .unwrap()
}

/// Random step curve on short-decimal grids: bids are multiples of 0.25,
/// volumes multiples of 10.
pub fn random_step_curve(rng: &mut ChaCha8Rng, max_knots: usize) -> SupplyCurve {
    let n = rng.gen_range(1..=max_knots);
    let mut ticks: Vec<u32> = (1..=20).collect();
    ticks.shuffle(rng);
    let mut bids: Vec<f64> = ticks[..n].iter().map(|&t| t as f64 * 0.25).collect();
    bids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut volume = 0.0;
    let knots = bids
        .into_iter()
        .map(|b| {
            volume += rng.gen_range(1..=10) as f64 * 10.0;
            (b, volume)
        })
        .collect();
    SupplyCurve::step(knots).unwrap()
}

/// Random continuous piecewise-linear curve (first knot has volume 0).
pub fn random_linear_curve(rng: &mut ChaCha8Rng, max_knots: usize) -> SupplyCurve {
    let n = rng.gen_range(2..=max_knots.max(2));
    let mut ticks: Vec<u32> = (0..=20).collect();
    ticks.shuffle(rng);
    let mut bids: Vec<f64> = ticks[..n].iter().map(|&t| t as f64 * 0.5).collect();
    bids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut volume = 0.0;
    let knots = bids
        .into_iter()
        .enumerate()
        .map(|(k, b)| {
            if k > 0 {
                volume += rng.gen_range(1..=10) as f64 * 10.0;
            }
            (b, volume)
        })
        .collect();
    SupplyCurve::linear(knots).unwrap()
}

pub struct GenSpec {
    pub max_campaigns: usize,
    pub max_groups: usize,
    pub max_knots: usize,
    /// Cap on admissible (campaign, group) pairs, to keep oracles tractable.
    pub max_pairs: usize,
    /// Fraction grid used to plant the feasible point.
    pub gamma_steps: usize,
    /// Force every campaign to be admissible to every group.
    pub complete: bool,
    pub continuous: bool,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            max_campaigns: 3,
            max_groups: 3,
            max_knots: 4,
            max_pairs: 9,
            gamma_steps: 4,
            complete: false,
            continuous: false,
        }
    }
}

/// Feasible-by-construction random instance: a strategy on the fraction grid
/// is planted and each campaign's demand is set to what it obtains.
pub fn random_instance(rng: &mut ChaCha8Rng, spec: &GenSpec) -> ProblemInstance {
    'retry: loop {
        let nc = rng.gen_range(1..=spec.max_campaigns);
        let ng = rng.gen_range(1..=spec.max_groups);
        let curves: Vec<SupplyCurve> = (0..ng)
            .map(|_| {
                if spec.continuous {
                    random_linear_curve(rng, spec.max_knots)
                } else {
                    random_step_curve(rng, spec.max_knots)
                }
            })
            .collect();

        // Admissibility with full campaign and group coverage.
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        if spec.complete {
            for i in 0..nc {
                for j in 0..ng {
                    pairs.push((i, j));
                }
            }
        } else {
            let mut all: Vec<(usize, usize)> =
                (0..nc).flat_map(|i| (0..ng).map(move |j| (i, j))).collect();
            all.shuffle(rng);
            let target = rng.gen_range(nc.max(ng)..=spec.max_pairs.min(all.len()).max(nc.max(ng)));
            for &(i, j) in &all {
                let covers_campaign = !pairs.iter().any(|&(pi, _)| pi == i);
                let covers_group = !pairs.iter().any(|&(_, pj)| pj == j);
                if covers_campaign || covers_group || pairs.len() < target {
                    pairs.push((i, j));
                }
            }
        }
        if pairs.len() > spec.max_pairs {
            continue 'retry;
        }

        // Plant a strategy on the grid; group fraction budgets respected.
        let q = spec.gamma_steps;
        let mut group_budget = vec![q; ng];
        let mut demand = vec![0.0; nc];
        // Deterministic pair order (group-major) matching the oracle's.
        let mut ordered = pairs.clone();
        ordered.sort_by_key(|&(i, j)| (j, i));
        for &(i, j) in &ordered {
            let steps = rng.gen_range(0..=group_budget[j]);
            group_budget[j] -= steps;
            if steps == 0 {
                continue;
            }
            let frac = steps as f64 / q as f64;
            let knots = curves[j].knots();
            let bid = if spec.continuous {
                // Any point above the zero knot.
                let hi = knots.last().unwrap().0;
                let lo = knots[0].0;
                lo + (hi - lo) * rng.gen_range(0.05..=1.0_f64)
            } else {
                knots[rng.gen_range(0..knots.len())].0
            };
            demand[i] += frac * curves[j].eval(bid).unwrap();
        }
        if demand.iter().any(|&d| d <= 0.0) {
            continue 'retry;
        }

        let campaigns: Vec<(String, f64, Vec<String>)> = (0..nc)
            .map(|i| {
                let groups = pairs
                    .iter()
                    .filter(|&&(pi, _)| pi == i)
                    .map(|&(_, j)| format!("g{j}"))
                    .collect();
                (format!("c{i}"), demand[i], groups)
            })
            .collect();
        let groups: Vec<(String, SupplyCurve)> = curves
            .into_iter()
            .enumerate()
            .map(|(j, c)| (format!("g{j}"), c))
            .collect();
        return ProblemInstance::from_groups(campaigns, groups).unwrap();
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
