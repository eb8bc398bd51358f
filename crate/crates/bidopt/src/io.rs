//! Versioned JSON encodings for curves, instances, strategies and solutions.
//! Schemas are strict: unknown fields are rejected, "version" must be 1.

use crate::error::{Error, Result};
use crate::market::{
    build_targeting_groups, MixedStrategy, ProblemInstance, PureAllocation,
};
use crate::solver::Decomposition;
use crate::supply_curve::{SegmentKind, SupplyCurve};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDto {
    pub kind: String,
    pub knots: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentKind>>,
}

impl CurveDto {
    pub fn to_curve(&self) -> Result<SupplyCurve> {
        match self.kind.as_str() {
            "step" => {
                if self.segments.is_some() {
                    return Err(Error::Schema("segments only apply to kind \"mixed\"".into()));
                }
                SupplyCurve::step(self.knots.clone())
            }
            "linear" => {
                if self.segments.is_some() {
                    return Err(Error::Schema("segments only apply to kind \"mixed\"".into()));
                }
                SupplyCurve::linear(self.knots.clone())
            }
            "mixed" => {
                let segments = self
                    .segments
                    .clone()
                    .ok_or_else(|| Error::Schema("kind \"mixed\" requires segments".into()))?;
                SupplyCurve::new(self.knots.clone(), segments)
            }
            other => Err(Error::Schema(format!("unknown curve kind {other:?}"))),
        }
    }

    pub fn from_curve(curve: &SupplyCurve) -> CurveDto {
        let segs = curve.segments();
        let (kind, segments) = if segs.iter().all(|s| *s == SegmentKind::Step) {
            ("step", None)
        } else if segs.iter().all(|s| *s == SegmentKind::Linear) {
            ("linear", None)
        } else {
            ("mixed", Some(segs.to_vec()))
        };
        CurveDto { kind: kind.to_string(), knots: curve.knots().to_vec(), segments }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignDto {
    pub id: String,
    pub impressions: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDto {
    pub id: String,
    pub curve: CurveDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDto {
    pub version: u32,
    pub campaigns: Vec<CampaignDto>,
    pub groups: Vec<GroupDto>,
}

fn check_version(version: u32) -> Result<()> {
    if version != 1 {
        return Err(Error::Schema(format!("unsupported version {version}, expected 1")));
    }
    Ok(())
}

fn schema(e: Error) -> Error {
    match e {
        Error::Domain(msg) => Error::Schema(msg),
        other => other,
    }
}

pub fn parse_instance(json: &str) -> Result<ProblemInstance> {
    let dto: InstanceDto =
        serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    instance_from_dto(dto)
}

pub fn instance_from_dto(dto: InstanceDto) -> Result<ProblemInstance> {
    check_version(dto.version)?;
    let any_criteria = dto.campaigns.iter().any(|c| c.criteria.is_some());
    let any_groups = dto.campaigns.iter().any(|c| c.groups.is_some());
    if any_criteria && any_groups {
        return Err(Error::Schema(
            "campaigns must all use \"groups\" or all use \"criteria\"".into(),
        ));
    }
    if !any_criteria {
        let campaigns = dto
            .campaigns
            .into_iter()
            .map(|c| {
                let groups = c
                    .groups
                    .ok_or_else(|| Error::Schema(format!("campaign {}: missing groups", c.id)))?;
                Ok((c.id, c.impressions, groups))
            })
            .collect::<Result<Vec<_>>>()?;
        let groups = dto
            .groups
            .into_iter()
            .map(|g| Ok((g.id, g.curve.to_curve().map_err(schema)?)))
            .collect::<Result<Vec<_>>>()?;
        return ProblemInstance::from_groups(campaigns, groups).map_err(schema);
    }

    // Criteria form: partition the type universe by campaign signature, then
    // pool each signature group's member curves.
    let mut universe = BTreeSet::new();
    let mut entries: Vec<(String, BTreeSet<String>, SupplyCurve)> = Vec::new();
    for g in dto.groups {
        let types: BTreeSet<String> = g
            .types
            .ok_or_else(|| Error::Schema(format!("group {}: criteria form requires types", g.id)))?
            .into_iter()
            .collect();
        if types.is_empty() {
            return Err(Error::Schema(format!("group {}: empty types", g.id)));
        }
        for t in &types {
            if !universe.insert(t.clone()) {
                return Err(Error::Schema(format!("type {t} appears in two groups")));
            }
        }
        entries.push((g.id, types, g.curve.to_curve().map_err(schema)?));
    }
    if universe.is_empty() {
        return Err(Error::Schema("empty type universe".into()));
    }
    let mut raw = Vec::new();
    let mut demands = BTreeMap::new();
    for c in &dto.campaigns {
        let criteria: BTreeSet<String> = c
            .criteria
            .clone()
            .ok_or_else(|| Error::Schema(format!("campaign {}: missing criteria", c.id)))?
            .into_iter()
            .collect();
        raw.push((c.id.clone(), criteria));
        demands.insert(c.id.clone(), c.impressions);
    }
    let skeleton = build_targeting_groups(&raw, &universe).map_err(schema)?;

    // Every curve entry must fall wholly inside one signature group.
    let type_to_group: BTreeMap<&String, &String> = skeleton
        .groups
        .iter()
        .flat_map(|(gid, types, _)| types.iter().map(move |t| (t, gid)))
        .collect();
    let mut member_curves: BTreeMap<&String, Vec<SupplyCurve>> = BTreeMap::new();
    for (eid, types, curve) in &entries {
        let targets: BTreeSet<&&String> = types.iter().filter_map(|t| type_to_group.get(t)).collect();
        if targets.is_empty() {
            continue; // no campaign targets these types
        }
        if targets.len() > 1 || types.iter().any(|t| !type_to_group.contains_key(t)) {
            return Err(Error::Schema(format!(
                "group {eid}: its types span different campaign signatures; split it per type"
            )));
        }
        member_curves.entry(targets.into_iter().next().unwrap()).or_default().push(curve.clone());
    }
    let mut groups = Vec::new();
    for (gid, _types, _) in &skeleton.groups {
        let curves = member_curves
            .remove(gid)
            .ok_or_else(|| Error::Schema(format!("no curve covers the types of group {gid}")))?;
        groups.push((gid.clone(), SupplyCurve::aggregate(&curves).map_err(schema)?));
    }
    let campaigns = raw
        .into_iter()
        .map(|(cid, _)| {
            let gids = skeleton.admissible[&cid].iter().cloned().collect();
            (cid.clone(), demands[&cid], gids)
        })
        .collect();
    ProblemInstance::from_groups(campaigns, groups).map_err(schema)
}

pub fn instance_to_json(instance: &ProblemInstance) -> String {
    let dto = InstanceDto {
        version: 1,
        campaigns: instance
            .campaigns
            .iter()
            .map(|c| CampaignDto {
                id: c.id.clone(),
                impressions: c.impressions,
                groups: Some(instance.admissible_groups(&c.id).iter().cloned().collect()),
                criteria: None,
            })
            .collect(),
        groups: instance
            .groups
            .iter()
            .map(|g| GroupDto {
                id: g.id.clone(),
                curve: CurveDto::from_curve(&g.curve),
                types: g.member_types.as_ref().map(|t| t.iter().cloned().collect()),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&dto).unwrap()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyEntryDto {
    pub campaign: String,
    pub group: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bids: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDto {
    pub version: u32,
    pub kind: String,
    pub entries: Vec<StrategyEntryDto>,
}

#[derive(Debug, Clone)]
pub enum Strategy {
    Pure(PureAllocation),
    Mixed(MixedStrategy),
}

impl Strategy {
    pub fn as_mixed(&self) -> MixedStrategy {
        match self {
            Strategy::Pure(p) => p.lift(),
            Strategy::Mixed(m) => m.clone(),
        }
    }
}

pub fn parse_strategy(json: &str) -> Result<Strategy> {
    let dto: StrategyDto =
        serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    strategy_from_dto(dto)
}

pub fn strategy_from_dto(dto: StrategyDto) -> Result<Strategy> {
    check_version(dto.version)?;
    match dto.kind.as_str() {
        "pure" => {
            let mut alloc = PureAllocation::default();
            for e in dto.entries {
                let (bid, fraction) = match (e.bid, e.fraction, &e.bids) {
                    (Some(b), Some(f), None) => (b, f),
                    _ => {
                        return Err(Error::Schema(format!(
                            "pure entry ({}, {}) needs bid and fraction",
                            e.campaign, e.group
                        )))
                    }
                };
                alloc.entries.insert((e.campaign, e.group), (bid, fraction));
            }
            Ok(Strategy::Pure(alloc))
        }
        "mixed" => {
            let mut s = MixedStrategy::default();
            for e in dto.entries {
                let bids = match (e.bid, e.fraction, e.bids) {
                    (None, None, Some(bids)) => bids,
                    _ => {
                        return Err(Error::Schema(format!(
                            "mixed entry ({}, {}) needs a bids list",
                            e.campaign, e.group
                        )))
                    }
                };
                s.entries.insert((e.campaign, e.group), bids);
            }
            Ok(Strategy::Mixed(s))
        }
        other => Err(Error::Schema(format!("unknown strategy kind {other:?}"))),
    }
}

pub fn strategy_to_dto(strategy: &Strategy) -> StrategyDto {
    match strategy {
        Strategy::Pure(p) => StrategyDto {
            version: 1,
            kind: "pure".into(),
            entries: p
                .entries
                .iter()
                .map(|((c, g), &(b, f))| StrategyEntryDto {
                    campaign: c.clone(),
                    group: g.clone(),
                    bid: Some(b),
                    fraction: Some(f),
                    bids: None,
                })
                .collect(),
        },
        Strategy::Mixed(m) => StrategyDto {
            version: 1,
            kind: "mixed".into(),
            entries: m
                .entries
                .iter()
                .map(|((c, g), points)| StrategyEntryDto {
                    campaign: c.clone(),
                    group: g.clone(),
                    bid: None,
                    fraction: None,
                    bids: Some(points.clone()),
                })
                .collect(),
        },
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDto {
    pub price: f64,
    pub campaigns: Vec<String>,
    pub groups: Vec<String>,
    pub fractions: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDto {
    pub version: u32,
    pub components: Vec<ComponentDto>,
    pub lower_bound: f64,
    pub pure_cost: f64,
    pub gap_bound: f64,
    pub allocation: StrategyDto,
}

pub fn solution_to_dto(
    decomposition: &Decomposition,
    allocation: &PureAllocation,
    lower_bound: f64,
    pure_cost: f64,
    gap_bound: f64,
) -> SolutionDto {
    SolutionDto {
        version: 1,
        components: decomposition
            .components
            .iter()
            .map(|c| ComponentDto {
                price: c.price,
                campaigns: c.campaigns.iter().cloned().collect(),
                groups: c.groups.iter().cloned().collect(),
                fractions: c.fractions.clone(),
            })
            .collect(),
        lower_bound,
        pure_cost,
        gap_bound,
        allocation: strategy_to_dto(&Strategy::Pure(allocation.clone())),
    }
}

pub fn parse_solution(json: &str) -> Result<SolutionDto> {
    let dto: SolutionDto =
        serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    check_version(dto.version)?;
    Ok(dto)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_round_trip() {
        let json = r#"{"kind":"step","knots":[[1.0,100.0],[2.0,300.0]]}"#;
        let dto: CurveDto = serde_json::from_str(json).unwrap();
        let curve = dto.to_curve().unwrap();
        assert_eq!(curve.eval(2.0).unwrap(), 300.0);
        let back = serde_json::to_string(&CurveDto::from_curve(&curve)).unwrap();
        let again: CurveDto = serde_json::from_str(&back).unwrap();
        assert_eq!(again.to_curve().unwrap(), curve);
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"kind":"step","knots":[[1.0,100.0]],"extra":1}"#;
        assert!(serde_json::from_str::<CurveDto>(json).is_err());
    }

    #[test]
    fn instance_explicit_form() {
        let json = r#"{
            "version": 1,
            "campaigns": [{"id":"c1","impressions":150,"groups":["g1"]}],
            "groups": [{"id":"g1","curve":{"kind":"step","knots":[[1.0,100.0],[2.0,300.0]]}}]
        }"#;
        let inst = parse_instance(json).unwrap();
        assert_eq!(inst.campaigns.len(), 1);
        assert!(inst.is_admissible("c1", "g1"));
    }

    #[test]
    fn instance_criteria_form() {
        let json = r#"{
            "version": 1,
            "campaigns": [
                {"id":"c1","impressions":100,"criteria":["t1","t2"]},
                {"id":"c2","impressions":50,"criteria":["t2","t3"]}
            ],
            "groups": [
                {"id":"e1","curve":{"kind":"step","knots":[[1.0,100.0]]},"types":["t1"]},
                {"id":"e2","curve":{"kind":"step","knots":[[1.0,200.0]]},"types":["t2"]},
                {"id":"e3","curve":{"kind":"step","knots":[[1.0,300.0]]},"types":["t3"]}
            ]
        }"#;
        let inst = parse_instance(json).unwrap();
        assert_eq!(inst.groups.len(), 3);
        assert_eq!(inst.admissible_groups("c1").len(), 2);
        assert_eq!(inst.admissible_groups("c2").len(), 2);
    }

    #[test]
    fn bad_version_rejected() {
        let json = r#"{"version":2,"campaigns":[],"groups":[]}"#;
        assert!(matches!(parse_instance(json), Err(Error::Schema(_))));
    }
}
