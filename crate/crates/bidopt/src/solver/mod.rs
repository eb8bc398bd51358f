//! Recursive decomposition solver.
//!
//! Each recursion step pools a campaign subset against a group subset: it
//! computes the cheapest single price at which pooled supply covers pooled
//! demand, solves a convex QP for fractions at that price, and — when some
//! campaigns cannot be filled because of admissibility — splits the pool into
//! the deficient side (which recurses to a higher price) and the rest.

mod mixed;
mod qp;
mod verify;

pub use mixed::{build_mixed, B1Choice};
pub use qp::QPSolution;
pub use verify::{verify_sufficient, VerificationReport, Verdict};

use crate::error::{Error, Result};
use crate::flow::{transportation, transportation_deficient, transportation_feasible_exact};
use crate::market::{ProblemInstance, PureAllocation};
use std::collections::{BTreeMap, BTreeSet};

/// Residual clamp factor (× total demand).
pub const EPS_RES: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct Component {
    pub campaigns: BTreeSet<String>,
    pub groups: BTreeSet<String>,
    pub price: f64,
    /// t_{i,j} per campaign per admissible group in the component.
    pub fractions: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Component {
    pub fn demand(&self, instance: &ProblemInstance) -> f64 {
        self.campaigns
            .iter()
            .map(|c| instance.campaign(c).map_or(0.0, |c| c.impressions))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub components: Vec<Component>,
}

impl Decomposition {
    pub fn prices(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.price).collect()
    }
}

fn subset_demand(instance: &ProblemInstance, cc: &BTreeSet<String>) -> f64 {
    cc.iter().map(|c| instance.campaign(c).map_or(0.0, |c| c.impressions)).sum()
}

/// Smallest price at which the groups' pooled supply covers the campaigns'
/// pooled demand.
pub fn price(instance: &ProblemInstance, cc: &BTreeSet<String>, ct: &BTreeSet<String>) -> Result<f64> {
    let demand = subset_demand(instance, cc);
    if demand <= 0.0 {
        return Err(Error::Domain("price of a zero-demand campaign set".into()));
    }
    let curves: Vec<_> = ct
        .iter()
        .map(|g| {
            instance
                .group(g)
                .map(|g| &g.curve)
                .ok_or_else(|| Error::Domain(format!("unknown group {g}")))
        })
        .collect::<Result<_>>()?;
    let tol = 1e-9 * demand.max(1.0);
    let max_total: f64 = curves.iter().map(|c| c.max_volume()).sum();
    if max_total < demand - tol {
        return Err(Error::Infeasible { campaigns: cc.iter().cloned().collect() });
    }
    let mut bids: Vec<f64> = curves.iter().flat_map(|c| c.knots().iter().map(|k| k.0)).collect();
    bids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bids.dedup_by(|a, b| (*a - *b).abs() <= crate::supply_curve::EPS_BID);

    let mut prev_sum = 0.0;
    for (k, &b) in bids.iter().enumerate() {
        if k > 0 {
            // The pooled curve is affine on the open interval; if the demand
            // level is crossed before the knot, solve for the exact bid.
            let approach: f64 = curves.iter().map(|c| c.left_limit(b).unwrap()).sum();
            if approach >= demand - tol && prev_sum < demand - tol {
                let prev_b = bids[k - 1];
                let p = prev_b + (demand - prev_sum) / (approach - prev_sum) * (b - prev_b);
                return Ok(p.min(b));
            }
        }
        let at: f64 = curves.iter().map(|c| c.eval(b).unwrap()).sum();
        if at >= demand - tol {
            return Ok(b);
        }
        prev_sum = at;
    }
    // demand <= max_total within tolerance but no knot attained it.
    Ok(*bids.last().unwrap())
}

/// Admissible (campaign, group) pairs of a subproblem, in deterministic order.
fn subproblem_pairs(
    instance: &ProblemInstance,
    cc: &BTreeSet<String>,
    ct: &BTreeSet<String>,
) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for c in cc {
        for g in instance.admissible_groups(c) {
            if ct.contains(g) {
                pairs.push((c.clone(), g.clone()));
            }
        }
    }
    pairs
}

/// Fraction QP at a fixed price. The done flag is decided by an exact
/// bipartite-transportation check, not by the floating-point descent.
pub fn alloc(
    instance: &ProblemInstance,
    cc: &BTreeSet<String>,
    ct: &BTreeSet<String>,
    p: f64,
) -> Result<QPSolution> {
    let pairs = subproblem_pairs(instance, cc, ct);
    qp::solve(instance, cc, ct, p, &pairs)
}

/// Splits an unfinished subproblem into the deficient side (campaigns whose
/// demand cannot be met at this price, with every group they may use) and the
/// rest. The deficient set is the min-cut source side of the same exact
/// transportation check that decided the done flag; it always agrees with
/// which campaigns the QP left short, but stays robust when shortfalls are
/// tiny relative to the residual clamp.
pub fn split(
    instance: &ProblemInstance,
    cc: &BTreeSet<String>,
    ct: &BTreeSet<String>,
    qp: &QPSolution,
) -> Result<((BTreeSet<String>, BTreeSet<String>), (BTreeSet<String>, BTreeSet<String>))> {
    if qp.done {
        return Err(Error::Domain("split called on a finished subproblem".into()));
    }
    let pairs = subproblem_pairs(instance, cc, ct);
    let cids: Vec<&String> = cc.iter().collect();
    let cidx: BTreeMap<&String, usize> = cids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let gids: Vec<&String> = ct.iter().collect();
    let gidx: BTreeMap<&String, usize> = gids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let demands: Vec<f64> = cids.iter().map(|c| instance.campaign(c).unwrap().impressions).collect();
    let caps: Vec<f64> =
        gids.iter().map(|g| instance.group(g).unwrap().curve.eval(qp.price).unwrap()).collect();
    let edges: Vec<(usize, usize)> = pairs.iter().map(|(c, g)| (cidx[c], gidx[g])).collect();
    let cc1: BTreeSet<String> = transportation_deficient(&demands, &caps, &edges)
        .into_iter()
        .map(|i| cids[i].clone())
        .collect();
    let mut ct1 = BTreeSet::new();
    for c in &cc1 {
        for g in instance.admissible_groups(c) {
            if ct.contains(g) {
                ct1.insert(g.clone());
            }
        }
    }
    if cc1.is_empty() || (cc1.len() == cc.len() && ct1.len() == ct.len()) {
        return Err(Error::Infeasible { campaigns: cc.iter().cloned().collect() });
    }
    let cc2: BTreeSet<String> = cc.difference(&cc1).cloned().collect();
    let ct2: BTreeSet<String> = ct.difference(&ct1).cloned().collect();
    Ok(((cc1, ct1), (cc2, ct2)))
}

/// Fractions for a finished subproblem, via an exact transportation solve.
///
/// A floor of D_j⁻(p) impressions per group is requested first so that no
/// group is used below its supply just under the price; that both keeps the
/// pure-vs-bound gap within its analytic bound and keeps the two-bid mixed
/// construction's fractions non-negative. If admissibility blocks the floored
/// problem, the plain solve is used instead.
fn component_fractions(
    instance: &ProblemInstance,
    cc: &BTreeSet<String>,
    ct: &BTreeSet<String>,
    p: f64,
    qp: &QPSolution,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    let pairs = subproblem_pairs(instance, cc, ct);
    let cids: Vec<&String> = cc.iter().collect();
    let gids: Vec<&String> = ct.iter().collect();
    let cidx: BTreeMap<&String, usize> = cids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let gidx: BTreeMap<&String, usize> = gids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let demands: Vec<f64> = cids.iter().map(|c| instance.campaign(c).unwrap().impressions).collect();
    let caps: Vec<f64> = gids.iter().map(|g| instance.group(g).unwrap().curve.eval(p).unwrap()).collect();
    let floors: Vec<f64> = gids
        .iter()
        .enumerate()
        .map(|(j, g)| instance.group(g).unwrap().curve.left_limit(p).unwrap().min(caps[j]))
        .collect();
    let edges: Vec<(usize, usize)> = pairs.iter().map(|(c, g)| (cidx[c], gidx[g])).collect();

    let x = transportation(&demands, &caps, &edges, Some(&floors))
        .or_else(|| transportation(&demands, &caps, &edges, None));

    let mut fractions: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    match x {
        Some(x) => {
            for (c, g) in &pairs {
                let cap = caps[gidx[g]];
                let t = if cap > 0.0 { (x[cidx[c]][gidx[g]] / cap).clamp(0.0, 1.0) } else { 0.0 };
                fractions.entry(c.clone()).or_default().insert(g.clone(), t);
            }
        }
        None => {
            // Numerical fallback: reuse the QP fractions.
            for (c, g) in &pairs {
                let t = qp.fractions.get(&(c.clone(), g.clone())).copied().unwrap_or(0.0);
                fractions.entry(c.clone()).or_default().insert(g.clone(), t);
            }
        }
    }
    fractions
}

/// Runs the full recursion and collects the components.
pub fn decompose(instance: &ProblemInstance) -> Result<Decomposition> {
    let cc: BTreeSet<String> = instance.campaigns.iter().map(|c| c.id.clone()).collect();
    let ct: BTreeSet<String> = instance.groups.iter().map(|g| g.id.clone()).collect();
    let mut components = Vec::new();
    if cc.is_empty() {
        return Ok(Decomposition { components });
    }
    rec(instance, cc, ct, &mut components, 0)?;
    Ok(Decomposition { components })
}

fn rec(
    instance: &ProblemInstance,
    cc: BTreeSet<String>,
    ct: BTreeSet<String>,
    out: &mut Vec<Component>,
    depth: usize,
) -> Result<()> {
    assert!(
        depth <= instance.campaigns.len(),
        "recursion deeper than the campaign count"
    );
    if cc.is_empty() {
        return Ok(());
    }
    let p = price(instance, &cc, &ct)?;
    let qp = alloc(instance, &cc, &ct, p)?;
    if qp.done {
        let fractions = component_fractions(instance, &cc, &ct, p, &qp);
        out.push(Component { campaigns: cc, groups: ct, price: p, fractions });
        return Ok(());
    }
    let ((cc1, ct1), (cc2, ct2)) = split(instance, &cc, &ct, &qp)?;
    rec(instance, cc1, ct1, out, depth + 1)?;
    if !cc2.is_empty() {
        rec(instance, cc2, ct2, out, depth + 1)?;
    }
    Ok(())
}

/// One bid (the component price) and one fraction per in-component pair.
pub fn build_allocation(decomposition: &Decomposition) -> PureAllocation {
    let mut alloc = PureAllocation::default();
    for comp in &decomposition.components {
        for (c, per_group) in &comp.fractions {
            for (g, &t) in per_group {
                alloc.entries.insert((c.clone(), g.clone()), (comp.price, t));
            }
        }
    }
    alloc
}

/// Floor on the cost of any feasible mixed strategy:
/// Σ over components of (demand × price − ∫₀ᵖ pooled supply).
pub fn lower_bound(decomposition: &Decomposition, instance: &ProblemInstance) -> f64 {
    decomposition
        .components
        .iter()
        .map(|comp| {
            let integral: f64 = comp
                .groups
                .iter()
                .map(|g| instance.group(g).unwrap().curve.integral(comp.price).unwrap())
                .sum();
            comp.demand(instance) * comp.price - integral
        })
        .sum()
}

/// Upper bound on the pure allocation's excess over the lower bound, driven
/// by the curve jumps at each component price.
pub fn gap_bound(decomposition: &Decomposition, instance: &ProblemInstance) -> f64 {
    decomposition
        .components
        .iter()
        .map(|comp| {
            comp.groups
                .iter()
                .map(|g| {
                    let curve = &instance.group(g).unwrap().curve;
                    let d = curve.eval(comp.price).unwrap();
                    if d <= 0.0 {
                        return 0.0;
                    }
                    let jump = d - curve.left_limit(comp.price).unwrap();
                    jump / d * curve.integral(comp.price).unwrap()
                })
                .sum::<f64>()
        })
        .sum()
}

/// Exact feasibility of meeting the subproblem's demands at price p.
pub fn maxflow_done(
    instance: &ProblemInstance,
    cc: &BTreeSet<String>,
    ct: &BTreeSet<String>,
    p: f64,
) -> bool {
    let pairs = subproblem_pairs(instance, cc, ct);
    let cids: Vec<&String> = cc.iter().collect();
    let gids: Vec<&String> = ct.iter().collect();
    let cidx: BTreeMap<&String, usize> = cids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let gidx: BTreeMap<&String, usize> = gids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let demands: Vec<f64> = cids.iter().map(|c| instance.campaign(c).unwrap().impressions).collect();
    let caps: Vec<f64> = gids.iter().map(|g| instance.group(g).unwrap().curve.eval(p).unwrap()).collect();
    let edges: Vec<(usize, usize)> = pairs.iter().map(|(c, g)| (cidx[c], gidx[g])).collect();
    transportation_feasible_exact(&demands, &caps, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{check_feasible, mixed_cost, pure_cost};
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

    fn f3() -> ProblemInstance {
        let g1 = SupplyCurve::linear(vec![(0.0, 0.0), (10.0, 1000.0)]).unwrap();
        ProblemInstance::from_groups(
            vec![("c1".into(), 150.0, vec!["g1".into()])],
            vec![("g1".into(), g1)],
        )
        .unwrap()
    }

    fn all_sets(inst: &ProblemInstance) -> (BTreeSet<String>, BTreeSet<String>) {
        (
            inst.campaigns.iter().map(|c| c.id.clone()).collect(),
            inst.groups.iter().map(|g| g.id.clone()).collect(),
        )
    }

    #[test]
    fn price_examples() {
        let f2 = f2();
        let (cc, ct) = all_sets(&f2);
        assert_eq!(price(&f2, &cc, &ct).unwrap(), 1.0);
        let cc1: BTreeSet<String> = ["c1".to_string()].into();
        let ct1: BTreeSet<String> = ["g1".to_string()].into();
        assert_eq!(price(&f2, &cc1, &ct1).unwrap(), 5.0);
        let f1 = f1();
        let (cc, ct) = all_sets(&f1);
        assert_eq!(price(&f1, &cc, &ct).unwrap(), 2.0);
    }

    #[test]
    fn alloc_and_split_examples() {
        let f2 = f2();
        let (cc, ct) = all_sets(&f2);
        let qp = alloc(&f2, &cc, &ct, 1.0).unwrap();
        assert!(!qp.done);
        assert!((qp.residuals["c1"] - 50.0).abs() < 1e-4, "{}", qp.residuals["c1"]);
        assert_eq!(qp.residuals["c2"], 0.0);

        let ((cc1, ct1), (cc2, ct2)) = split(&f2, &cc, &ct, &qp).unwrap();
        assert_eq!(cc1, ["c1".to_string()].into());
        assert_eq!(ct1, ["g1".to_string()].into());
        assert_eq!(cc2, ["c2".to_string()].into());
        assert_eq!(ct2, ["g2".to_string()].into());

        let qp1 = alloc(&f2, &cc1, &ct1, 5.0).unwrap();
        assert!(qp1.done);
        assert!((qp1.fractions[&("c1".to_string(), "g1".to_string())] - 0.75).abs() < 1e-9);
        assert!(split(&f2, &cc1, &ct1, &qp1).is_err());
    }

    #[test]
    fn decompose_fixtures() {
        let f2 = f2();
        let d = decompose(&f2).unwrap();
        assert_eq!(d.components.len(), 2);
        assert_eq!(d.components[0].price, 5.0);
        assert_eq!(d.components[1].price, 0.5);
        assert!((d.components[0].fractions["c1"]["g1"] - 0.75).abs() < 1e-9);
        assert!((d.components[1].fractions["c2"]["g2"] - 0.5).abs() < 1e-9);
        assert!((lower_bound(&d, &f2) - 375.0).abs() < 1e-9);
        assert!((gap_bound(&d, &f2) - 200.0).abs() < 1e-9);
        let alloc = build_allocation(&d);
        assert!((pure_cost(&f2, &alloc).unwrap() - 475.0).abs() < 1e-9);

        let f1 = f1();
        let d = decompose(&f1).unwrap();
        assert_eq!(d.components.len(), 1);
        assert_eq!(d.components[0].price, 2.0);
        assert!((d.components[0].fractions["c1"]["g1"] - 0.5).abs() < 1e-9);
        assert!((lower_bound(&d, &f1) - 200.0).abs() < 1e-9);
        assert!((gap_bound(&d, &f1) - 200.0 / 3.0).abs() < 1e-6);

        let f3 = f3();
        let d = decompose(&f3).unwrap();
        assert_eq!(d.components.len(), 1);
        assert!((d.components[0].price - 1.5).abs() < 1e-12);
        assert!((d.components[0].fractions["c1"]["g1"] - 1.0).abs() < 1e-9);
        assert!((lower_bound(&d, &f3) - 112.5).abs() < 1e-9);
        assert_eq!(gap_bound(&d, &f3), 0.0);
    }

    #[test]
    fn mixed_fixtures() {
        let f1 = f1();
        let d = decompose(&f1).unwrap();
        let s = build_mixed(&d, &f1, &B1Choice::Auto).unwrap();
        let pts = &s.entries[&("c1".to_string(), "g1".to_string())];
        assert_eq!(pts.len(), 2);
        assert!((pts[0].0 - 1.0).abs() < 1e-12 && (pts[0].1 - 0.75).abs() < 1e-9);
        assert!((pts[1].0 - 2.0).abs() < 1e-12 && (pts[1].1 - 0.25).abs() < 1e-9);
        assert!((mixed_cost(&f1, &s).unwrap() - 200.0).abs() < 1e-9);

        let f2 = f2();
        let d = decompose(&f2).unwrap();
        let s = build_mixed(&d, &f2, &B1Choice::Auto).unwrap();
        assert!((mixed_cost(&f2, &s).unwrap() - 375.0).abs() < 1e-9);
        let pts = &s.entries[&("c1".to_string(), "g1".to_string())];
        assert!((pts[0].1 - 0.5).abs() < 1e-9 && (pts[1].1 - 0.5).abs() < 1e-9);
        assert!(check_feasible(&f2, &s).unwrap().pass);

        // Continuous curve: mixing degenerates to the pure entry.
        let f3 = f3();
        let d = decompose(&f3).unwrap();
        let s = build_mixed(&d, &f3, &B1Choice::Auto).unwrap();
        assert_eq!(
            s.entries[&("c1".to_string(), "g1".to_string())],
            vec![(d.components[0].price, 1.0)]
        );
        assert!((mixed_cost(&f3, &s).unwrap() - 112.5).abs() < 1e-9);
    }

    #[test]
    fn verify_fixtures() {
        let f3 = f3();
        let d = decompose(&f3).unwrap();
        let alloc = build_allocation(&d);
        let report = verify_sufficient(&f3, &alloc).unwrap();
        assert_eq!(report.verdict, Verdict::VerifiedOptimal);

        let f2 = f2();
        let d = decompose(&f2).unwrap();
        let alloc = build_allocation(&d);
        let report = verify_sufficient(&f2, &alloc).unwrap();
        assert_eq!(report.verdict, Verdict::NotApplicableDiscontinuous);

        // Two prices inside one block is not component-structured.
        let mut bad = PureAllocation::default();
        bad.entries.insert(("c1".into(), "g1".into()), (5.0, 0.5));
        bad.entries.insert(("c2".into(), "g1".into()), (1.0, 0.2));
        let report = verify_sufficient(&f2, &bad).unwrap();
        assert_eq!(report.verdict, Verdict::NotComponentStructured);
    }

    #[test]
    fn infeasible_instance_detected() {
        let g1 = SupplyCurve::step(vec![(1.0, 100.0), (5.0, 200.0)]).unwrap();
        let inst = ProblemInstance::from_groups(
            vec![("c1".into(), 500.0, vec!["g1".into()])],
            vec![("g1".into(), g1)],
        )
        .unwrap();
        assert!(matches!(decompose(&inst), Err(crate::error::Error::Infeasible { .. })));
    }
}
