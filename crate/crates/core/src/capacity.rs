//! Capacity-region queries as linear programs.
//!
//! Requests for object `i` arrive at rate `lambda_i` and are split across the
//! object's serving options; an option with nodes `S` puts its full rate on
//! every node of `S`. A demand is covered when some split keeps every node at
//! or below `mu`. The first option of each object is always a direct holder,
//! so its flow is eliminated as `lambda_i - sum(other flows)`; this leaves one
//! row per node plus one row per object with three or more options.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::model::{DemandVector, NodeId, ObjectId, ServingOption, StoragePlan};

/// Relative slack (in units of `mu`) within which a demand counts as covered.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub option: ServingOption,
    /// Requests/second routed through `option`.
    pub rate: f64,
}

/// Split of a demand over serving options.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub flows: Vec<Flow>,
}

impl Assignment {
    pub fn node_loads(&self, n: usize) -> Vec<f64> {
        let mut loads = vec![0.0; n];
        for f in &self.flows {
            for node in &f.option.nodes {
                loads[node.index()] += f.rate;
            }
        }
        loads
    }

    pub fn rate_for(&self, object: ObjectId) -> f64 {
        self.flows
            .iter()
            .filter(|f| f.option.object == object)
            .map(|f| f.rate)
            .sum()
    }

    /// Downloads per second.
    pub fn cost(&self) -> f64 {
        self.flows.iter().map(|f| f.rate * f.option.cost() as f64).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub covered: bool,
    pub witness: Option<Assignment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelVerdict {
    pub covered: bool,
    pub service_cost: Option<f64>,
    pub max_load: Option<f64>,
    pub gray: bool,
}

impl ModelVerdict {
    pub fn uncovered() -> Self {
        ModelVerdict {
            covered: false,
            service_cost: None,
            max_load: None,
            gray: false,
        }
    }

    /// Gray-region membership at width `w`; empty for `w == 0`.
    pub fn gray_at(&self, w: f64) -> bool {
        w > 0.0 && self.covered && self.max_load.is_some_and(|l| l >= 1.0 - w)
    }
}

enum Objective {
    MinMaxLoad,
    /// Minimum extra downloads with node loads capped at `cap` (units of mu).
    MinCost { cap: f64 },
}

/// A plan with its serving options precomputed, for repeated queries.
#[derive(Debug, Clone)]
pub struct CapacityModel<'a> {
    plan: &'a StoragePlan,
    options: Vec<Vec<ServingOption>>,
}

impl<'a> CapacityModel<'a> {
    pub fn new(plan: &'a StoragePlan) -> Result<Self> {
        let options = plan.option_table();
        if let Some(i) = options.iter().position(Vec::is_empty) {
            return Err(Error::PlanInvariant(format!("object {i} is not stored anywhere")));
        }
        Ok(CapacityModel { plan, options })
    }

    pub fn plan(&self) -> &StoragePlan {
        self.plan
    }

    pub fn options(&self, object: ObjectId) -> &[ServingOption] {
        &self.options[object.index()]
    }

    fn normalized(&self, demand: &DemandVector) -> Result<Vec<f64>> {
        if demand.len() != self.plan.k() {
            return Err(Error::DimensionMismatch {
                expected: self.plan.k(),
                got: demand.len(),
            });
        }
        let mu = self.plan.mu();
        Ok(demand.rates().iter().map(|r| r / mu).collect())
    }

    fn solve(&self, d: &[f64], objective: Objective) -> Result<Option<(f64, Assignment)>> {
        let n = self.plan.n();
        let mut vars: Vec<(usize, usize)> = Vec::new();
        let mut base = vec![0.0; n];
        let mut gub_rows = Vec::new();
        for (i, opts) in self.options.iter().enumerate() {
            if d[i] <= 0.0 {
                continue;
            }
            base[opts[0].nodes[0].index()] += d[i];
            let first = vars.len();
            vars.extend((1..opts.len()).map(|s| (i, s)));
            if opts.len() > 2 {
                gub_rows.push((first..vars.len(), d[i]));
            }
        }
        let with_t = matches!(objective, Objective::MinMaxLoad);
        let t_var = vars.len();
        let mut lp = LinearProgram::new(vars.len() + usize::from(with_t));
        let mut node_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (v, &(i, s)) in vars.iter().enumerate() {
            let opts = &self.options[i];
            lp.set_upper(v, d[i]);
            if let Objective::MinCost { .. } = objective {
                lp.set_cost(v, (opts[s].cost() - opts[0].cost()) as f64);
            }
            node_terms[opts[0].nodes[0].index()].push((v, -1.0));
            for node in &opts[s].nodes {
                node_terms[node.index()].push((v, 1.0));
            }
        }
        if with_t {
            lp.set_cost(t_var, 1.0);
        }
        for (node, mut terms) in node_terms.into_iter().enumerate() {
            match objective {
                Objective::MinMaxLoad => {
                    if terms.is_empty() && base[node] == 0.0 {
                        continue;
                    }
                    terms.push((t_var, -1.0));
                    lp.add_row(terms, Relation::Le, -base[node]);
                }
                Objective::MinCost { cap } => {
                    if terms.is_empty() {
                        if base[node] > cap * (1.0 + FEASIBILITY_TOL) {
                            return Ok(None);
                        }
                        continue;
                    }
                    lp.add_row(terms, Relation::Le, cap - base[node]);
                }
            }
        }
        for (range, rate) in gub_rows {
            lp.add_row(range.map(|v| (v, 1.0)).collect(), Relation::Le, rate);
        }
        let (x, value) = match lp.minimize()? {
            LpOutcome::Optimal { x, objective } => (x, objective),
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Unbounded => return Err(Error::Solver("capacity program unbounded".into())),
        };
        let assignment = self.assignment(d, &vars, &x);
        Ok(Some((value, assignment)))
    }

    fn assignment(&self, d: &[f64], vars: &[(usize, usize)], x: &[f64]) -> Assignment {
        let mu = self.plan.mu();
        let mut extra = vec![Vec::new(); self.plan.k()];
        for (&(i, s), &y) in vars.iter().zip(x) {
            extra[i].push((s, y));
        }
        let mut flows = Vec::new();
        for (i, opts) in self.options.iter().enumerate() {
            if d[i] <= 0.0 {
                continue;
            }
            let moved: f64 = extra[i].iter().map(|&(_, y)| y).sum();
            flows.push(Flow {
                option: opts[0].clone(),
                rate: (d[i] - moved).max(0.0) * mu,
            });
            for &(s, y) in &extra[i] {
                if y > 0.0 {
                    flows.push(Flow {
                        option: opts[s].clone(),
                        rate: y * mu,
                    });
                }
            }
        }
        Assignment { flows }
    }

    /// Load-balancing-optimal max load `t*` (may exceed 1) with its assignment.
    pub fn min_max_load(&self, demand: &DemandVector) -> Result<(f64, Assignment)> {
        let d = self.normalized(demand)?;
        self.solve(&d, Objective::MinMaxLoad)?
            .ok_or_else(|| Error::Solver("min-max program infeasible".into()))
    }

    pub fn check_coverage(&self, demand: &DemandVector) -> Result<Coverage> {
        let (t, witness) = self.min_max_load(demand)?;
        let covered = t <= 1.0 + FEASIBILITY_TOL;
        Ok(Coverage {
            covered,
            witness: covered.then_some(witness),
        })
    }

    pub fn max_load(&self, demand: &DemandVector) -> Result<f64> {
        let (t, _) = self.min_max_load(demand)?;
        if t > 1.0 + FEASIBILITY_TOL {
            return Err(Error::OutsideRegion);
        }
        Ok(t.min(1.0))
    }

    fn cost_given_load(&self, demand: &DemandVector, t: f64) -> Result<f64> {
        let d = self.normalized(demand)?;
        let cap = t.max(1.0);
        let (extra, _) = self
            .solve(&d, Objective::MinCost { cap })?
            .ok_or(Error::OutsideRegion)?;
        Ok((d.iter().sum::<f64>() + extra) * self.plan.mu())
    }

    /// Minimum download rate over all feasible assignments.
    pub fn service_cost(&self, demand: &DemandVector) -> Result<f64> {
        let (t, _) = self.min_max_load(demand)?;
        if t > 1.0 + FEASIBILITY_TOL {
            return Err(Error::OutsideRegion);
        }
        self.cost_given_load(demand, t)
    }

    pub fn verdict(&self, demand: &DemandVector, gray_width: f64) -> Result<ModelVerdict> {
        check_width(gray_width)?;
        let (t, _) = self.min_max_load(demand)?;
        if t > 1.0 + FEASIBILITY_TOL {
            return Ok(ModelVerdict::uncovered());
        }
        let cost = self.cost_given_load(demand, t)?;
        let mut v = ModelVerdict {
            covered: true,
            service_cost: Some(cost),
            max_load: Some(t.min(1.0)),
            gray: false,
        };
        v.gray = v.gray_at(gray_width);
        Ok(v)
    }
}

fn check_width(w: f64) -> Result<()> {
    if (0.0..1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("gray width must lie in [0, 1), got {w}")))
    }
}

pub fn check_coverage(plan: &StoragePlan, demand: &DemandVector) -> Result<Coverage> {
    CapacityModel::new(plan)?.check_coverage(demand)
}

pub fn service_cost(plan: &StoragePlan, demand: &DemandVector) -> Result<f64> {
    CapacityModel::new(plan)?.service_cost(demand)
}

pub fn max_load(plan: &StoragePlan, demand: &DemandVector) -> Result<f64> {
    CapacityModel::new(plan)?.max_load(demand)
}

pub fn verdict(plan: &StoragePlan, demand: &DemandVector, gray_width: f64) -> Result<ModelVerdict> {
    CapacityModel::new(plan)?.verdict(demand, gray_width)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub verdict: ModelVerdict,
}

/// Evaluates the model over a grid of group rates. Each group's rate is
/// split uniformly over its objects; objects in neither group get no demand.
pub fn region_sweep(
    plan: &StoragePlan,
    group_a: &[ObjectId],
    group_b: &[ObjectId],
    grid_a: &[f64],
    grid_b: &[f64],
    gray_width: f64,
) -> Result<Vec<SweepPoint>> {
    check_width(gray_width)?;
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::InvalidArgument("sweep groups must be non-empty".into()));
    }
    let k = plan.k();
    let mut member = vec![None; k];
    for (g, group) in [group_a, group_b].into_iter().enumerate() {
        for o in group {
            if o.index() >= k {
                return Err(Error::InvalidArgument(format!("object {} out of range", o.0)));
            }
            if member[o.index()].replace(g).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "object {} appears in both groups or twice",
                    o.0
                )));
            }
        }
    }
    let model = CapacityModel::new(plan)?;
    let mut out = Vec::with_capacity(grid_a.len() * grid_b.len());
    for &la in grid_a {
        for &lb in grid_b {
            let per = [la / group_a.len() as f64, lb / group_b.len() as f64];
            let rates = member.iter().map(|m| m.map_or(0.0, |g| per[g])).collect();
            let demand = DemandVector::new(rates)?;
            out.push(SweepPoint {
                lambda_a: la,
                lambda_b: lb,
                verdict: model.verdict(&demand, gray_width)?,
            });
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn verdict_csv_header(k: usize) -> String {
    let mut s = String::new();
    for i in 1..=k {
        let _ = write!(s, "lambda_{i},");
    }
    s.push_str("covered,service_cost,max_load,gray");
    s
}

pub fn verdict_csv_row(demand: &DemandVector, v: &ModelVerdict) -> String {
    let mut s = String::new();
    for r in demand.rates() {
        let _ = write!(s, "{r},");
    }
    let _ = write!(
        s,
        "{},{},{},{}",
        v.covered,
        opt(v.service_cost),
        opt(v.max_load),
        v.gray
    );
    s
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("lambda_a,lambda_b,covered,service_cost,max_load,gray\n");
    for p in points {
        let v = &p.verdict;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.lambda_a,
            p.lambda_b,
            v.covered,
            opt(v.service_cost),
            opt(v.max_load),
            v.gray
        );
    }
    s
}

/// Load each node would carry under `assignment`, as a fraction of `mu`.
pub fn load_fractions(plan: &StoragePlan, assignment: &Assignment) -> Vec<(NodeId, f64)> {
    assignment
        .node_loads(plan.n())
        .into_iter()
        .enumerate()
        .map(|(i, l)| (NodeId(i as u32), l / plan.mu()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Scheme, StoredItem};

    fn o(i: u32) -> ObjectId {
        ObjectId(i)
    }

    fn s_aab(mu: f64) -> StoragePlan {
        StoragePlan::new(
            2,
            mu,
            Scheme::Replication,
            vec![
                vec![StoredItem::Original(o(0))],
                vec![StoredItem::Replica(o(0))],
                vec![StoredItem::Original(o(1))],
            ],
        )
        .unwrap()
    }

    fn s_ab_parity(mu: f64) -> StoragePlan {
        StoragePlan::new(
            2,
            mu,
            Scheme::XorCoding,
            vec![
                vec![StoredItem::Original(o(0))],
                vec![StoredItem::Original(o(1))],
                vec![StoredItem::Parity(o(0), o(1))],
            ],
        )
        .unwrap()
    }

    fn d(r: &[f64]) -> DemandVector {
        DemandVector::new(r.to_vec()).unwrap()
    }

    #[test]
    fn boundary_of_replicated_toy_is_covered() {
        let mu = 3.0;
        let plan = s_aab(mu);
        let cov = check_coverage(&plan, &d(&[2.0 * mu, mu])).unwrap();
        assert!(cov.covered);
        let w = cov.witness.unwrap();
        assert!((w.rate_for(o(0)) - 2.0 * mu).abs() < 1e-9);
        assert!(w.node_loads(3).iter().all(|&l| l <= mu * (1.0 + 1e-9)));
        assert!((max_load(&plan, &d(&[2.0 * mu, mu])).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coded_toy_rejects_sum_above_two_mu() {
        let plan = s_ab_parity(1.0);
        let cov = check_coverage(&plan, &d(&[1.5, 0.6])).unwrap();
        assert!(!cov.covered);
        assert!(cov.witness.is_none());
        assert!(matches!(service_cost(&plan, &d(&[1.5, 0.6])), Err(Error::OutsideRegion)));
        assert!(matches!(max_load(&plan, &d(&[1.5, 0.6])), Err(Error::OutsideRegion)));
    }

    #[test]
    fn zero_demand() {
        let plan = s_ab_parity(1.0);
        let v = verdict(&plan, &DemandVector::zeros(2), 0.1).unwrap();
        assert!(v.covered);
        assert_eq!(v.service_cost, Some(0.0));
        assert_eq!(v.max_load, Some(0.0));
        assert!(!v.gray);
    }

    #[test]
    fn service_cost_examples() {
        let mu = 2.0;
        let plan = s_ab_parity(mu);
        // mu direct at cost 1, mu collaboratively at cost 2.
        let c = service_cost(&plan, &d(&[2.0 * mu, 0.0])).unwrap();
        assert!((c - 3.0 * mu).abs() < 1e-9 * mu);
        let c = service_cost(&plan, &d(&[mu, mu])).unwrap();
        assert!((c - 2.0 * mu).abs() < 1e-9 * mu);
    }

    #[test]
    fn max_load_splits_replicas() {
        let plan = s_aab(1.0);
        let l = max_load(&plan, &d(&[1.0, 0.5])).unwrap();
        assert!((l - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let plan = s_aab(1.0);
        assert!(matches!(
            check_coverage(&plan, &d(&[1.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn gray_membership() {
        let plan = s_aab(1.0);
        // loads (0.95, 0.95, 0): max load 0.95
        let v = verdict(&plan, &d(&[1.9, 0.0]), 0.1).unwrap();
        assert!((v.max_load.unwrap() - 0.95).abs() < 1e-9);
        assert!(v.gray);
        let v = verdict(&plan, &d(&[2.0, 1.0]), 0.0).unwrap();
        assert!(v.covered && !v.gray);
        let v = verdict(&plan, &d(&[2.5, 0.0]), 0.1).unwrap();
        assert_eq!(v, ModelVerdict::uncovered());
        assert!(verdict(&plan, &d(&[0.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn sweep_validates_groups() {
        let plan = s_aab(1.0);
        assert!(region_sweep(&plan, &[o(0)], &[o(0)], &[0.0], &[0.0], 0.0).is_err());
        assert!(region_sweep(&plan, &[], &[o(1)], &[0.0], &[0.0], 0.0).is_err());
        let pts = region_sweep(&plan, &[o(0)], &[o(1)], &[0.0, 1.0], &[0.0], 0.0).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts[0].verdict.covered && pts[0].verdict.service_cost == Some(0.0));
        let csv = sweep_csv(&pts);
        assert!(csv.starts_with("lambda_a,lambda_b,covered,service_cost,max_load,gray\n0,0,true,0,0,false"));
    }

    #[test]
    fn csv_row_leaves_absent_fields_empty() {
        let row = verdict_csv_row(&d(&[1.5, 0.6]), &ModelVerdict::uncovered());
        assert_eq!(row, "1.5,0.6,false,,,false");
        assert_eq!(verdict_csv_header(2), "lambda_1,lambda_2,covered,service_cost,max_load,gray");
    }
}
