//! Model-versus-system agreement: run classification, MCC with gray-region
//! exclusion, and the experiment grids that produce labeled pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::capacity::{verdict_csv_header, verdict_csv_row, CapacityModel, ModelVerdict};
use crate::error::{Error, Result};
use crate::model::{build_plan, DemandVector, Scheme, StoragePlan};
use crate::seed::derive_seed;
use crate::sim::{simulate, Routing, SimConfig, SimResult};
use crate::workload::{
    aggregate, demands_csv, generate_trace, trace_to_demand, Behavior, Trace, Window,
    WorkloadSpec,
};

pub const DEFAULT_THRESHOLD: f64 = 0.02;

/// A run succeeds when strictly fewer than `threshold` of its requests dropped.
pub fn classify(result: &SimResult, threshold: f64) -> bool {
    result.drop_fraction < threshold
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub demand: DemandVector,
    pub model: ModelVerdict,
    pub system_success: bool,
    pub drop_fraction: f64,
}

impl LabeledPair {
    pub fn new(demand: DemandVector, model: ModelVerdict, result: &SimResult, threshold: f64) -> Self {
        LabeledPair {
            demand,
            model,
            system_success: classify(result, threshold),
            drop_fraction: result.drop_fraction,
        }
    }
}

/// Positive means "covered" for the model and "successful" for the system.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_labels(labels: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Confusion::default();
        for (predicted, actual) in labels {
            match (predicted, actual) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `None` when any marginal of the table is zero.
    pub fn mcc(&self) -> Option<f64> {
        let [tp, fp, tn, fn_] = [self.tp, self.fp, self.tn, self.fn_].map(|c| c as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return None;
        }
        Some(((tp * tn - fp * fn_) / denom.sqrt()).clamp(-1.0, 1.0))
    }

    /// Chi-squared test of association with Yates' continuity correction.
    pub fn p_value(&self) -> Option<f64> {
        let [a, b, c, d] = [self.tp, self.fp, self.fn_, self.tn].map(|x| x as f64);
        let n = a + b + c + d;
        let denom = (a + b) * (c + d) * (a + c) * (b + d);
        if denom == 0.0 {
            return None;
        }
        let diff = ((a * d - b * c).abs() - n / 2.0).max(0.0);
        let chi2 = n * diff * diff / denom;
        // Survival function of chi-squared with one degree of freedom.
        Some(erfc((chi2 / 2.0).sqrt()))
    }

    /// Share of model-uncovered demands the system served successfully.
    pub fn false_omission_rate(&self) -> Option<f64> {
        let neg = self.fn_ + self.tn;
        (neg > 0).then(|| self.fn_ as f64 / neg as f64)
    }

    /// Share of model-covered demands the system failed to serve.
    pub fn false_discovery_rate(&self) -> Option<f64> {
        let pos = self.tp + self.fp;
        (pos > 0).then(|| self.fp as f64 / pos as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    /// `None` when the correlation is undefined.
    pub mcc: Option<f64>,
    pub confusion: Confusion,
    pub included: usize,
    pub excluded_gray: usize,
    pub p_value: Option<f64>,
}

impl CorrelationReport {
    pub fn excluded_fraction(&self) -> f64 {
        let total = self.included + self.excluded_gray;
        if total == 0 {
            0.0
        } else {
            self.excluded_gray as f64 / total as f64
        }
    }
}

/// Correlation over pairs outside the gray region of width `w`.
pub fn mcc(pairs: &[LabeledPair], w: f64) -> Result<CorrelationReport> {
    mcc_of(pairs.iter().map(|p| (&p.model, p.system_success)), w)
}

fn mcc_of<'a>(
    labels: impl Iterator<Item = (&'a ModelVerdict, bool)>,
    w: f64,
) -> Result<CorrelationReport> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::InvalidArgument(format!("gray width must lie in [0, 1), got {w}")));
    }
    let mut excluded_gray = 0;
    let mut kept = Vec::new();
    for (model, success) in labels {
        if model.gray_at(w) {
            excluded_gray += 1;
        } else {
            kept.push((model.covered, success));
        }
    }
    let confusion = Confusion::from_labels(kept.iter().copied());
    let defined = kept.len() >= 2;
    Ok(CorrelationReport {
        mcc: confusion.mcc().filter(|_| defined),
        p_value: confusion.p_value().filter(|_| defined),
        confusion,
        included: kept.len(),
        excluded_gray,
    })
}

/// Settings shared by every experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Per-node service rate (requests/second).
    pub mu: f64,
    pub duration_s: f64,
    /// Timing template; seed and routing are set per run.
    pub sim: SimConfig,
    pub threshold: f64,
    pub gray_widths: Vec<f64>,
    pub seed: u64,
    pub artifacts: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(mu: f64, duration_s: f64, seed: u64) -> Self {
        ExperimentConfig {
            mu,
            duration_s,
            sim: SimConfig::new(seed),
            threshold: DEFAULT_THRESHOLD,
            gray_widths: vec![0.0, 0.1],
            seed,
            artifacts: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if let Some(w) = self.gray_widths.iter().find(|w| !(0.0..1.0).contains(*w)) {
            return Err(Error::InvalidArgument(format!("gray width must lie in [0, 1), got {w}")));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) || !(self.duration_s > 0.0) {
            return Err(Error::InvalidArgument("mu and duration must be positive".into()));
        }
        Ok(())
    }

    fn sim_config(&self, routing: Routing, seed: u64) -> SimConfig {
        SimConfig {
            routing,
            seed,
            ..self.sim.clone()
        }
    }
}

// Labels separating the seed streams of different artifacts.
const PLAN_STREAM: u64 = 1;
const TRACE_STREAM: u64 = 2;
const SIM_STREAM: u64 = 3;
const AGG_STREAM: u64 = 4;

fn scheme_index(s: Scheme) -> u64 {
    match s {
        Scheme::Replication => 0,
        Scheme::XorCoding => 1,
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Verdict plus one labeled pair per routing mode for a single trace.
fn label_trace(
    plan: &StoragePlan,
    trace: &Trace,
    routings: &[Routing],
    sim_seed: u64,
    config: &ExperimentConfig,
    artifacts: Option<&Path>,
) -> Result<(ModelVerdict, Vec<LabeledPair>)> {
    let demand = trace_to_demand(trace, plan.k(), Window::Whole)?
        .pop()
        .expect("whole-trace demand");
    let verdict = CapacityModel::new(plan)?.verdict(&demand, 0.0)?;
    let mut pairs = Vec::with_capacity(routings.len());
    for &routing in routings {
        let result = simulate(trace, plan, &config.sim_config(routing, sim_seed))?;
        if let Some(dir) = artifacts {
            let row = format!("{}\n{}\n", SimResult::csv_header(), result.csv_row());
            write_artifact(dir, &format!("result_{}.csv", routing.label()), &row)?;
        }
        pairs.push(LabeledPair::new(demand.clone(), verdict, &result, config.threshold));
    }
    if let Some(dir) = artifacts {
        write_artifact(dir, "plan.txt", &plan.to_text())?;
        write_artifact(dir, "trace.csv", &trace.to_text())?;
        write_artifact(dir, "demand.csv", &demands_csv(std::slice::from_ref(&demand)))?;
        let v = format!("{}\n{}\n", verdict_csv_header(plan.k()), verdict_csv_row(&demand, &verdict));
        write_artifact(dir, "verdict.csv", &v)?;
    }
    Ok((verdict, pairs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub k: usize,
    pub schemes: Vec<Scheme>,
    pub overheads: Vec<f64>,
    pub alphas: Vec<f64>,
    pub traces_per_cell: usize,
    pub routings: Vec<Routing>,
}

impl GridSpec {
    pub fn standard(routings: Vec<Routing>) -> Self {
        GridSpec {
            n: 6,
            k: 60,
            schemes: vec![Scheme::Replication, Scheme::XorCoding],
            overheads: vec![1.5, 2.0],
            alphas: vec![0.5, 0.75, 1.0],
            traces_per_cell: 50,
            routings,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub scheme: Scheme,
    pub overhead: f64,
    pub alpha: f64,
    /// Pairs for each routing mode, in `GridSpec::routings` order, or the
    /// error that stopped the cell.
    pub pairs: std::result::Result<Vec<Vec<LabeledPair>>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub scheme: Scheme,
    pub overhead: f64,
    pub alpha: f64,
    pub routing: Routing,
    pub gray_width: f64,
    pub report: std::result::Result<CorrelationReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub cells: Vec<GridCell>,
    pub rows: Vec<GridRow>,
}

pub fn run_grid(spec: &GridSpec, config: &ExperimentConfig) -> Result<GridReport> {
    config.validate()?;
    if spec.traces_per_cell == 0 || spec.routings.is_empty() {
        return Err(Error::InvalidArgument("grid needs traces and routing modes".into()));
    }
    let mut cells = Vec::new();
    for (si, &scheme) in spec.schemes.iter().enumerate() {
        for (oi, &overhead) in spec.overheads.iter().enumerate() {
            for (ai, &alpha) in spec.alphas.iter().enumerate() {
                cells.push((si, scheme, oi, overhead, ai, alpha));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.traces_per_cell).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<Result<Vec<LabeledPair>>> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (_, scheme, oi, overhead, ai, alpha) = cells[c];
            let tag = [scheme_index(scheme), oi as u64, t as u64];
            let plan_seed = derive_seed(config.seed, &[PLAN_STREAM, tag[0], tag[1], tag[2]]);
            let plan = build_plan(spec.n, spec.k, config.mu, overhead, scheme, plan_seed)?;
            let trace_seed = derive_seed(config.seed, &[TRACE_STREAM, tag[0], tag[1], ai as u64, tag[2]]);
            let trace = generate_trace(
                &WorkloadSpec::for_plan(&plan, alpha, config.duration_s, trace_seed),
                &plan,
            )?;
            let sim_seed = derive_seed(config.seed, &[SIM_STREAM, tag[0], tag[1], ai as u64, tag[2]]);
            let dir = config.artifacts.as_ref().map(|root| {
                root.join(format!("{}_o{overhead}_a{alpha}", scheme.as_str()))
                    .join(format!("trace_{t:03}"))
            });
            label_trace(&plan, &trace, &spec.routings, sim_seed, config, dir.as_deref())
                .map(|(_, pairs)| pairs)
        })
        .collect();

    let mut grid_cells = Vec::with_capacity(cells.len());
    let mut rows = Vec::new();
    for (c, chunk) in outcomes.chunks(spec.traces_per_cell).enumerate() {
        let (_, scheme, _, overhead, _, alpha) = cells[c];
        let pairs = chunk
            .iter()
            .map(|r| r.as_ref().cloned().map_err(ToString::to_string))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(|per_trace| {
                (0..spec.routings.len())
                    .map(|m| per_trace.iter().map(|p| p[m].clone()).collect())
                    .collect::<Vec<Vec<LabeledPair>>>()
            });
        for (m, &routing) in spec.routings.iter().enumerate() {
            for &w in &config.gray_widths {
                let report = match &pairs {
                    Ok(p) => mcc(&p[m], w).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                };
                rows.push(GridRow {
                    scheme,
                    overhead,
                    alpha,
                    routing,
                    gray_width: w,
                    report,
                });
            }
        }
        grid_cells.push(GridCell {
            scheme,
            overhead,
            alpha,
            pairs,
        });
    }
    Ok(GridReport {
        cells: grid_cells,
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

const REPORT_COLUMNS: &str =
    "mcc,tp,fp,tn,fn,included,excluded_gray,excluded_fraction,p_value,false_omission,false_discovery,error";

fn report_fields(report: &std::result::Result<CorrelationReport, String>) -> String {
    match report {
        Ok(r) => {
            let c = r.confusion;
            format!(
                "{},{},{},{},{},{},{},{:.6},{},{},{},",
                opt(r.mcc),
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                r.included,
                r.excluded_gray,
                r.excluded_fraction(),
                opt(r.p_value),
                opt(c.false_omission_rate()),
                opt(c.false_discovery_rate())
            )
        }
        Err(e) => format!(",,,,,,,,,,,\"{}\"", e.replace('"', "'")),
    }
}

/// Mean of the defined MCC values among `rows`, with how many were defined.
pub fn mean_mcc<'a>(rows: impl IntoIterator<Item = &'a std::result::Result<CorrelationReport, String>>) -> Option<(f64, usize)> {
    let values: Vec<f64> = rows
        .into_iter()
        .filter_map(|r| r.as_ref().ok().and_then(|r| r.mcc))
        .collect();
    (!values.is_empty()).then(|| (values.iter().sum::<f64>() / values.len() as f64, values.len()))
}

impl GridReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("scheme,overhead,alpha,routing,gray_width,{REPORT_COLUMNS}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.scheme.as_str(),
                r.overhead,
                r.alpha,
                r.routing.label(),
                r.gray_width,
                report_fields(&r.report)
            );
        }
        s
    }

    pub fn rows_where(&self, keep: impl Fn(&GridRow) -> bool) -> Vec<&GridRow> {
        self.rows.iter().filter(|r| keep(r)).collect()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mut keys: Vec<(&'static str, f64)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.routing.label(), r.gray_width)) {
                keys.push((r.routing.label(), r.gray_width));
            }
        }
        for (routing, w) in keys {
            for scheme in [Scheme::Replication, Scheme::XorCoding] {
                let rows = self.rows_where(|r| {
                    r.routing.label() == routing && r.gray_width == w && r.scheme == scheme
                });
                if rows.is_empty() {
                    continue;
                }
                let failed = rows.iter().filter(|r| r.report.is_err()).count();
                match mean_mcc(rows.iter().map(|r| &r.report)) {
                    Some((m, defined)) => {
                        let _ = writeln!(
                            s,
                            "{routing:<8} w={w:<4} {:<11} mean MCC {m:.3} over {defined}/{} cells ({failed} failed)",
                            scheme.as_str(),
                            rows.len()
                        );
                    }
                    None => {
                        let _ = writeln!(
                            s,
                            "{routing:<8} w={w:<4} {:<11} mean MCC undefined ({failed} failed)",
                            scheme.as_str()
                        );
                    }
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoSpec {
    pub n: usize,
    pub k: usize,
    pub overhead: f64,
    pub behaviors: Vec<Behavior>,
    /// Traces alternate between these schemes and pool into one report.
    pub schemes: Vec<Scheme>,
    /// Traces cycle through these skews.
    pub alphas: Vec<f64>,
    pub traces_per_behavior: usize,
    pub routing: Routing,
}

impl GeoSpec {
    pub fn standard(routing: Routing) -> Self {
        GeoSpec {
            n: 6,
            k: 60,
            overhead: 1.5,
            behaviors: vec![Behavior::Baseline, Behavior::Local, Behavior::Remote],
            schemes: vec![Scheme::Replication, Scheme::XorCoding],
            alphas: vec![0.5, 0.75, 1.0],
            traces_per_behavior: 300,
            routing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoRow {
    pub behavior: Behavior,
    pub gray_width: f64,
    pub report: CorrelationReport,
}

pub fn geo_experiment(spec: &GeoSpec, config: &ExperimentConfig) -> Result<(Vec<GeoRow>, Vec<Vec<LabeledPair>>)> {
    config.validate()?;
    if spec.traces_per_behavior == 0 {
        return Err(Error::InvalidArgument("geo experiment needs at least one trace per behavior".into()));
    }
    if spec.behaviors.is_empty() || spec.schemes.is_empty() || spec.alphas.is_empty() {
        return Err(Error::InvalidArgument("geo experiment needs behaviors, schemes and alphas".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..spec.behaviors.len())
        .flat_map(|b| (0..spec.traces_per_behavior).map(move |t| (b, t)))
        .collect();
    let outcomes: Vec<LabeledPair> = jobs
        .par_iter()
        .map(|&(b, t)| {
            let behavior = spec.behaviors[b];
            let scheme = spec.schemes[t % spec.schemes.len()];
            let alpha = spec.alphas[t % spec.alphas.len()];
            let plan_seed = derive_seed(config.seed, &[PLAN_STREAM, b as u64, t as u64]);
            let plan = build_plan(spec.n, spec.k, config.mu, spec.overhead, scheme, plan_seed)?;
            let trace_spec = WorkloadSpec {
                behavior,
                ..WorkloadSpec::for_plan(
                    &plan,
                    alpha,
                    config.duration_s,
                    derive_seed(config.seed, &[TRACE_STREAM, b as u64, t as u64]),
                )
            };
            let trace = generate_trace(&trace_spec, &plan)?;
            let sim_seed = derive_seed(config.seed, &[SIM_STREAM, b as u64, t as u64]);
            let dir = config
                .artifacts
                .as_ref()
                .map(|root| root.join(behavior.as_str()).join(format!("trace_{t:03}")));
            let (_, mut pairs) =
                label_trace(&plan, &trace, &[spec.routing], sim_seed, config, dir.as_deref())?;
            Ok(pairs.pop().expect("one routing mode"))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_behavior: Vec<Vec<LabeledPair>> = outcomes
        .chunks(spec.traces_per_behavior)
        .map(<[LabeledPair]>::to_vec)
        .collect();
    let mut rows = Vec::new();
    for (b, pairs) in per_behavior.iter().enumerate() {
        for &w in &config.gray_widths {
            rows.push(GeoRow {
                behavior: spec.behaviors[b],
                gray_width: w,
                report: mcc(pairs, w)?,
            });
        }
    }
    Ok((rows, per_behavior))
}

pub fn geo_csv(rows: &[GeoRow]) -> String {
    let mut s = format!("behavior,gray_width,{REPORT_COLUMNS}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.behavior, r.gray_width, report_fields(&Ok(r.report)));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpec {
    pub n: usize,
    pub k: usize,
    pub group_size: usize,
    pub overhead: f64,
    pub schemes: Vec<Scheme>,
    pub alphas: Vec<f64>,
    pub traces_per_cell: usize,
    pub routing: Routing,
    pub gray_width: f64,
}

impl ScaleSpec {
    pub fn standard(routing: Routing) -> Self {
        ScaleSpec {
            n: 10,
            k: 1000,
            group_size: 10,
            overhead: 1.5,
            schemes: vec![Scheme::Replication, Scheme::XorCoding],
            alphas: vec![0.5, 0.75, 1.0],
            traces_per_cell: 50,
            routing,
            gray_width: 0.1,
        }
    }
}

/// Verdicts and outcomes for one trace at both sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSample {
    pub model_small: ModelVerdict,
    pub model_large: ModelVerdict,
    pub system_small: bool,
    pub system_large: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleCell {
    pub scheme: Scheme,
    pub alpha: f64,
    pub samples: Vec<ScaleSample>,
    /// Indexed `[model][system]`, 0 = small and 1 = large.
    pub matrix: [[CorrelationReport; 2]; 2],
}

impl ScaleCell {
    pub fn same_size(&self) -> Option<f64> {
        self.matrix[1][1].mcc
    }

    /// Model on aggregated objects against the full-size system.
    pub fn cross_size(&self) -> Option<f64> {
        self.matrix[0][1].mcc
    }
}

pub fn scale_experiment(spec: &ScaleSpec, config: &ExperimentConfig) -> Result<Vec<ScaleCell>> {
    config.validate()?;
    if spec.traces_per_cell == 0 {
        return Err(Error::InvalidArgument("scale experiment needs at least one trace".into()));
    }
    let mut cells = Vec::new();
    for &scheme in &spec.schemes {
        for (ai, &alpha) in spec.alphas.iter().enumerate() {
            cells.push((scheme, ai, alpha));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.traces_per_cell).map(move |t| (c, t)))
        .collect();
    let samples: Vec<ScaleSample> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (scheme, ai, alpha) = cells[c];
            let tag = [scheme_index(scheme), ai as u64, t as u64];
            let plan_seed = derive_seed(config.seed, &[PLAN_STREAM, tag[0], tag[2]]);
            let large = build_plan(spec.n, spec.k, config.mu, spec.overhead, scheme, plan_seed)?;
            let trace_seed = derive_seed(config.seed, &[TRACE_STREAM, tag[0], tag[1], tag[2]]);
            let trace = generate_trace(
                &WorkloadSpec::for_plan(&large, alpha, config.duration_s, trace_seed),
                &large,
            )?;
            let agg_seed = derive_seed(config.seed, &[AGG_STREAM, tag[0], tag[2]]);
            let (small_trace, small) = aggregate(&trace, &large, spec.group_size, agg_seed)?;
            let sim_seed = derive_seed(config.seed, &[SIM_STREAM, tag[0], tag[1], tag[2]]);
            let dir = config.artifacts.as_ref().map(|root| {
                root.join(format!("{}_a{alpha}", scheme.as_str())).join(format!("trace_{t:03}"))
            });
            let routing = [spec.routing];
            let (model_large, large_pairs) = label_trace(
                &large,
                &trace,
                &routing,
                sim_seed,
                config,
                dir.as_ref().map(|d| d.join("large")).as_deref(),
            )?;
            let (model_small, small_pairs) = label_trace(
                &small,
                &small_trace,
                &routing,
                sim_seed,
                config,
                dir.as_ref().map(|d| d.join("small")).as_deref(),
            )?;
            Ok(ScaleSample {
                model_small,
                model_large,
                system_small: small_pairs[0].system_success,
                system_large: large_pairs[0].system_success,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    cells
        .iter()
        .zip(samples.chunks(spec.traces_per_cell))
        .map(|(&(scheme, _, alpha), chunk)| {
            let report = |model: usize, system: usize| {
                mcc_of(
                    chunk.iter().map(|s| {
                        let m = if model == 0 { &s.model_small } else { &s.model_large };
                        (m, if system == 0 { s.system_small } else { s.system_large })
                    }),
                    spec.gray_width,
                )
            };
            Ok(ScaleCell {
                scheme,
                alpha,
                samples: chunk.to_vec(),
                matrix: [[report(0, 0)?, report(0, 1)?], [report(1, 0)?, report(1, 1)?]],
            })
        })
        .collect()
}

pub fn scale_csv(cells: &[ScaleCell]) -> String {
    let mut s = format!("scheme,alpha,model,system,{REPORT_COLUMNS}\n");
    let size = ["small", "large"];
    for c in cells {
        for (m, row) in c.matrix.iter().enumerate() {
            for (y, report) in row.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    c.scheme.as_str(),
                    c.alpha,
                    size[m],
                    size[y],
                    report_fields(&Ok(*report))
                );
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(covered: bool, max_load: f64) -> ModelVerdict {
        ModelVerdict {
            covered,
            service_cost: covered.then_some(1.0),
            max_load: covered.then_some(max_load),
            gray: false,
        }
    }

    fn pair(covered: bool, success: bool, max_load: f64) -> LabeledPair {
        LabeledPair {
            demand: DemandVector::zeros(1),
            model: verdict(covered, max_load),
            system_success: success,
            drop_fraction: if success { 0.0 } else { 0.5 },
        }
    }

    #[test]
    fn classification_boundary() {
        let mut r = simulate(
            &Trace {
                k: 1,
                n: 1,
                duration_s: 1.0,
                users: vec![],
                requests: vec![],
            },
            &StoragePlan::new(1, 1.0, Scheme::Replication, vec![vec![crate::model::StoredItem::Original(crate::model::ObjectId(0))]])
                .unwrap(),
            &SimConfig::new(0),
        )
        .unwrap();
        assert!(classify(&r, 0.02));
        r.drop_fraction = 0.019;
        assert!(classify(&r, 0.02));
        r.drop_fraction = 0.02;
        assert!(!classify(&r, 0.02));
    }

    #[test]
    fn mcc_examples() {
        let c = Confusion {
            tp: 4,
            fp: 1,
            tn: 4,
            fn_: 1,
        };
        assert!((c.mcc().unwrap() - 0.6).abs() < 1e-12);
        let perfect = Confusion {
            tp: 3,
            fp: 0,
            tn: 2,
            fn_: 0,
        };
        assert_eq!(perfect.mcc(), Some(1.0));
        let all_positive = Confusion {
            tp: 3,
            fp: 2,
            tn: 0,
            fn_: 0,
        };
        assert_eq!(all_positive.mcc(), None);
        assert_eq!(all_positive.p_value(), None);
    }

    #[test]
    fn yates_p_value() {
        // Reference value from an independent contingency-table routine.
        let c = Confusion {
            tp: 10,
            fp: 2,
            fn_: 3,
            tn: 15,
        };
        let p = c.p_value().unwrap();
        assert!((p - 0.001_221_098_516_311_5).abs() < 1e-9, "p = {p}");
    }

    #[test]
    fn gray_exclusion_and_undefined() {
        let pairs = vec![
            pair(true, true, 0.5),
            pair(true, false, 0.95),
            pair(false, false, 0.0),
            pair(true, true, 0.3),
        ];
        let at0 = mcc(&pairs, 0.0).unwrap();
        assert_eq!((at0.included, at0.excluded_gray), (4, 0));
        assert_eq!(at0.confusion.fp, 1);
        let at10 = mcc(&pairs, 0.1).unwrap();
        assert_eq!((at10.included, at10.excluded_gray), (3, 1));
        assert_eq!(at10.mcc, Some(1.0));
        assert!((at10.excluded_fraction() - 0.25).abs() < 1e-12);
        assert!(mcc(&pairs, 1.0).is_err());
        assert_eq!(mcc(&pairs[..1], 0.0).unwrap().mcc, None);
    }
}
