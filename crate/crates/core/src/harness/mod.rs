//! Configuration parsing, parameter sweeps, invariant checks and CSV output.
//!
//! A run expands the configuration into independent grid points, evaluates
//! them (optionally on a thread pool), sorts the records by
//! `(experiment, h, d, p, seed)` and writes `records.csv`, `fits.csv`,
//! `plotdata.csv` and `run.cfg`.

mod config;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

pub use config::{parse_config, Experiment, ExperimentConfig, KEYS};
pub use table::{compare_runs, compare_tables, fmt_num, Cell, ColumnDelta, CompareReport, Flag, ResultTable, COMPARE_TOL};

use crate::estimates::{
    convergence_fit, convergence_point, identity_levels, inverse_experiment, kendall_tau, loglog_fit, mixed_sample,
    naive_fit, superapprox_experiment, technique_lemma_experiment, EstimateRecord, LocalContext, STREAM_LOCAL,
};
use crate::fespace::{build_space, split_seed, Field, LagrangeSpace, ScalarField};
use crate::forms::CoefficientSet;
use crate::mesh::{build_mesh, Rect, SubdomainSpec};
use crate::scaling::scaled_cutoff;
use crate::{Error, Result};

/// Acceptance limits checked after every run.
pub mod limits {
    pub const CONVERGENCE_H1_SLOPE: f64 = 0.15;
    pub const CONVERGENCE_L2_SLOPE: f64 = 0.2;
    pub const INVERSE_SPREAD: f64 = 2.0;
    pub const IDENTITY_DEFECT: f64 = 1e-8;
    pub const IDENTITY_FLOOR: f64 = 1e-12;
    pub const TECHNIQUE_FACTOR: f64 = 3.0;
    pub const SUPERAPPROX_SPREAD: f64 = 3.0;
    pub const SUPERAPPROX_FACTOR: f64 = 3.0;
    pub const LOCAL_SPREAD: f64 = 10.0;
    pub const LOCAL_TAU: f64 = 0.5;
}

/// A failed invariant, printed as one `key=value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub experiment: Experiment,
    pub check: String,
    pub group: String,
    pub value: Option<f64>,
    pub limit: Option<f64>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VIOLATION experiment={} check={} group={}", self.experiment, self.check, self.group)?;
        if let Some(v) = self.value {
            write!(f, " value={}", fmt_num(v))?;
        }
        if let Some(l) = self.limit {
            write!(f, " limit={}", fmt_num(l))?;
        }
        if !self.message.is_empty() {
            write!(f, " message=\"{}\"", self.message.replace('"', "'"))?;
        }
        Ok(())
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub records: Vec<EstimateRecord>,
    pub record_table: ResultTable,
    pub fits: ResultTable,
    pub plot: ResultTable,
    pub violations: Vec<Violation>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// One independent unit of work; `side` is the side of the centred square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub r: usize,
    pub n: usize,
    pub side: f64,
    pub p: usize,
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r={} n={} d={} p={}", self.r, self.n, self.side, self.p)
    }
}

/// Grid points of a configuration in a fixed order.
pub fn grid(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    use Experiment::*;
    let (ns, sides, ps): (Vec<usize>, Vec<f64>, Vec<usize>) = match cfg.experiment {
        Identity => (vec![cfg.n[0]], vec![1.0], vec![0]),
        Convergence => (cfg.n.clone(), vec![1.0], vec![0]),
        Inverse | Superapprox | Technique => (cfg.n.clone(), cfg.d.clone(), vec![0]),
        LocalEstimate | NaiveSweep => (cfg.n.clone(), cfg.d.clone(), cfg.p.clone()),
    };
    let mut out = Vec::new();
    for &r in &cfg.r {
        for &n in &ns {
            for &side in &sides {
                for &p in &ps {
                    out.push(GridPoint { r, n, side, p });
                }
            }
        }
    }
    out
}

fn unit_space(n: usize, r: usize) -> Result<Arc<LagrangeSpace>> {
    build_space(Arc::new(build_mesh(Rect::unit(), n)?), r)
}

fn square(side: f64) -> Result<SubdomainSpec> {
    Ok(SubdomainSpec::new(Rect::centered_square([0.5, 0.5], side)?))
}

/// Base seed of one grid point, derived from its parameters so that it does
/// not depend on the order of the lists in the config.
pub fn point_seed(base: u64, pt: GridPoint) -> u64 {
    split_seed(split_seed(base, pt.r as u64, pt.n as u64), pt.side.to_bits(), pt.p as u64)
}

/// Records of one grid point.
pub fn run_point(cfg: &ExperimentConfig, coeffs: &CoefficientSet, pt: GridPoint) -> Result<Vec<EstimateRecord>> {
    let seeds = cfg.seeds as u64;
    let base = point_seed(cfg.seed, pt);
    let GridPoint { r, n, side, p } = pt;
    match cfg.experiment {
        Experiment::Convergence => Ok(vec![convergence_point(coeffs, &Field::sin_sin(), r, n)?]),
        Experiment::Inverse => inverse_experiment(&unit_space(n, r)?, &square(side)?, cfg.seeds, base),
        Experiment::Superapprox => {
            let space = unit_space(n, r)?;
            let g = square(side)?;
            let omega = scaled_cutoff(&g.region)?;
            let support = space.dofs_in(&g)?;
            (0..seeds)
                .map(|k| {
                    let w = mixed_sample(&space, &g.region, &support, base, k)?;
                    Ok(superapprox_experiment(&space, &g, &omega, &w)?.with_seed(k))
                })
                .collect()
        }
        Experiment::Technique => {
            let space = unit_space(n, r)?;
            let omega0 = square(side)?;
            let omega = scaled_cutoff(&omega0.region)?;
            let support = space.interior_dofs(&omega0)?;
            (0..seeds)
                .map(|k| {
                    let w = mixed_sample(&space, &omega0.region, &support, base, k)?;
                    Ok(technique_lemma_experiment(&space, coeffs, &omega, &w, &omega0)?.with_seed(k))
                })
                .collect()
        }
        Experiment::Identity => {
            let omega = scaled_cutoff(&Rect::unit())?;
            let u = Field::sin_sin();
            identity_levels(&u, &omega, coeffs, 2 * r + 4, cfg.levels)?
                .into_iter()
                .map(|b| {
                    let rec = EstimateRecord::new(Experiment::Identity.name(), b.defect.abs(), vec![(
                        "a0_term".into(),
                        b.a0_term.abs(),
                    )])?;
                    Ok(rec
                        .with_params(coeffs.name(), 0.5f64.powi(b.level as i32), omega.support().diameter(), r, 0)
                        .diag("level", b.level as f64)
                        .diag("a_term", b.a_term)
                        .diag("n_term", b.n_term)
                        .diag("t1", b.t1)
                        .diag("t2", b.t2)
                        .diag("defect", b.defect))
                })
                .collect()
        }
        Experiment::LocalEstimate | Experiment::NaiveSweep => {
            let mesh = Arc::new(build_mesh(Rect::unit(), n)?);
            let omega0 = square(side)?;
            let d_sub = mesh.shrink_by_layers(&omega0, p)?;
            let ctx = LocalContext::new(&build_space(mesh, r)?, coeffs);
            (0..seeds)
                .map(|k| {
                    let (f, ext) = cfg.data.fields(&omega0.region, split_seed(base, STREAM_LOCAL, k));
                    let mut rec = ctx.local_estimate(&f, ext.as_ref().map(|e| e as &dyn ScalarField), &d_sub, &omega0)?;
                    rec.experiment = cfg.experiment.name().to_string();
                    Ok(rec.with_seed(k))
                })
                .collect()
        }
    }
}

/// Errors that mark a grid point as geometrically infeasible rather than
/// aborting the run.
fn is_infeasible(e: &Error) -> bool {
    matches!(
        e.root(),
        Error::DegenerateSubdomain(_) | Error::Layer(_) | Error::EmptySpace(_) | Error::EmptySupport
    )
}

fn sort_records(records: &mut [EstimateRecord]) {
    records.sort_by(|a, b| {
        a.experiment
            .cmp(&b.experiment)
            .then(a.h.total_cmp(&b.h))
            .then(a.d.total_cmp(&b.d))
            .then(a.p.cmp(&b.p))
            .then(a.seed.cmp(&b.seed))
            .then(a.r.cmp(&b.r))
            .then(a.preset.cmp(&b.preset))
    });
}

/// Runs every grid point on `jobs` threads and checks the invariants.
pub fn execute(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutcome> {
    cfg.validate()?;
    let coeffs = CoefficientSet::preset(&cfg.preset)?;
    let points = grid(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    let results: Vec<Result<Vec<EstimateRecord>>> =
        pool.install(|| points.par_iter().map(|&pt| run_point(cfg, &coeffs, pt)).collect());
    let mut records = Vec::new();
    let mut violations = Vec::new();
    for (pt, res) in points.iter().zip(results) {
        match res {
            Ok(mut recs) => {
                for rec in &mut recs {
                    rec.preset = cfg.preset.clone();
                }
                records.extend(recs);
            }
            Err(e) if is_infeasible(&e) => violations.push(Violation {
                experiment: cfg.experiment,
                check: "infeasible_point".into(),
                group: pt.to_string().replace(' ', "_"),
                value: None,
                limit: None,
                message: e.to_string(),
            }),
            Err(e) => return Err(e.context(format!("{} at {pt}", cfg.experiment))),
        }
    }
    sort_records(&mut records);
    let record_table = record_table(cfg.experiment, &records)?;
    let mut checks = Checks { experiment: cfg.experiment, violations };
    let (fits, plot) = summarize(cfg, &records, &mut checks)?;
    Ok(RunOutcome { config: cfg.clone(), records, record_table, fits, plot, violations: checks.violations })
}

/// Writes the four output files of a run into `dir`.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    if dir.as_os_str().is_empty() {
        return Err(Error::Io("empty output directory path".into()));
    }
    let ctx = |e: std::io::Error| Error::from(e).context(dir.display().to_string());
    std::fs::create_dir_all(dir).map_err(ctx)?;
    let header = format!(
        "# scale-probe {}\n# platform: {}-{}\n",
        env!("CARGO_PKG_VERSION"),
        std::env::consts::OS,
        std::env::consts::ARCH
    );
    std::fs::write(dir.join("records.csv"), outcome.record_table.to_csv()).map_err(ctx)?;
    std::fs::write(dir.join("fits.csv"), outcome.fits.to_csv()).map_err(ctx)?;
    std::fs::write(dir.join("plotdata.csv"), outcome.plot.to_csv()).map_err(ctx)?;
    std::fs::write(dir.join("run.cfg"), header + &outcome.config.to_text()).map_err(ctx)?;
    Ok(())
}

/// [`execute`] followed by [`write_outputs`].
pub fn run(cfg: &ExperimentConfig, dir: &Path, jobs: usize) -> Result<RunOutcome> {
    if dir.as_os_str().is_empty() {
        return Err(Error::Io("empty output directory path".into()));
    }
    let outcome = execute(cfg, jobs)?;
    write_outputs(&outcome, dir)?;
    Ok(outcome)
}

/// Right-hand-side term and diagnostic names of each experiment's records.
pub fn record_fields(e: Experiment) -> (&'static [&'static str], &'static [&'static str]) {
    match e {
        Experiment::Convergence => (&["h_pow_r"], &["l2_error"]),
        Experiment::Inverse => (&["inverse_l2"], &[]),
        Experiment::Superapprox => (&["l2_term", "h1_term"], &["dofs_outside_g0", "quad_rel_change"]),
        Experiment::Technique => (&["w0_sq"], &["a0_term", "a_term"]),
        Experiment::Identity => (&["a0_term"], &["level", "a_term", "n_term", "t1", "t2", "defect"]),
        Experiment::LocalEstimate | Experiment::NaiveSweep => (
            &["inverse_term", "data_term"],
            &["epsilon", "w0", "fdual", "naive_ratio", "data_term_half", "ratio_half", "solver_residual"],
        ),
    }
}

pub fn records_header(e: Experiment) -> Vec<String> {
    let (terms, diags) = record_fields(e);
    let mut h: Vec<String> = ["experiment", "preset", "h", "d", "r", "p", "seed", "lhs"].map(String::from).to_vec();
    h.extend(terms.iter().map(|s| s.to_string()));
    h.extend(["rhs", "ratio"].map(String::from));
    h.extend(diags.iter().map(|s| s.to_string()));
    h
}

pub fn fits_header(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::Convergence => &[
            "experiment", "preset", "r", "samples", "h1_c_emp", "h1_slope", "h1_slope_ci", "l2_c_emp", "l2_slope",
            "l2_slope_ci",
        ],
        Experiment::Inverse => &["experiment", "preset", "r", "d", "samples", "c_emp", "c_min", "c_max", "spread"],
        Experiment::Superapprox => &[
            "experiment", "preset", "r", "d", "samples", "c_emp", "c_min", "c_max", "spread", "c_finest",
            "ref_ratio", "dofs_outside_g0", "quad_rel_change",
        ],
        Experiment::Technique => &[
            "experiment", "preset", "r", "d", "samples", "calibration_h", "c_emp", "validation_max_ratio",
            "violations",
        ],
        Experiment::Identity => &[
            "experiment", "preset", "r", "levels", "defect", "defect_prev1", "defect_prev2", "a0_term", "monotone",
        ],
        Experiment::LocalEstimate => &[
            "experiment", "preset", "r", "d", "p", "samples", "c_emp", "ratio_min", "ratio_max", "tau", "tau_half",
            "slope", "slope_half", "grid_spread",
        ],
        Experiment::NaiveSweep => {
            &[
                "experiment", "preset", "r", "h", "p", "d", "naive_constant", "slope", "slope_ci", "constant_slope",
                "constant_slope_ci", "monotone",
            ]
        }
    }
}

pub const PLOT_HEADER: [&str; 3] = ["log10_x", "log10_y", "series"];

/// Human-readable schema summary used by `scale-probe list`.
pub fn describe(e: Experiment) -> String {
    format!(
        "{}\n  records.csv: {}\n  fits.csv: {}\n  plotdata.csv: {}\n",
        e.name(),
        records_header(e).join(","),
        fits_header(e).join(","),
        PLOT_HEADER.join(",")
    )
}

fn record_table(e: Experiment, records: &[EstimateRecord]) -> Result<ResultTable> {
    let header = records_header(e);
    let (terms, diags) = record_fields(e);
    let mut t = ResultTable { header, rows: Vec::new() };
    for rec in records {
        let names_match = rec.rhs_terms.iter().map(|(k, _)| k.as_str()).eq(terms.iter().copied())
            && rec.diagnostics.iter().map(|(k, _)| k.as_str()).eq(diags.iter().copied());
        if !names_match {
            return Err(Error::Schema(format!("{} record does not match the {e} schema", rec.experiment)));
        }
        let mut row: Vec<Cell> = vec![
            rec.experiment.as_str().into(),
            rec.preset.as_str().into(),
            rec.h.into(),
            rec.d.into(),
            rec.r.into(),
            rec.p.into(),
            rec.seed.into(),
            rec.lhs.into(),
        ];
        row.extend(rec.rhs_terms.iter().map(|(_, v)| Cell::Num(*v)));
        row.push(rec.rhs().into());
        row.push(rec.ratio.into());
        row.extend(rec.diagnostics.iter().map(|(_, v)| Cell::Num(*v)));
        t.push(row)?;
    }
    Ok(t)
}

struct Checks {
    experiment: Experiment,
    violations: Vec<Violation>,
}

impl Checks {
    /// Records a violation unless `ok`.
    fn require(&mut self, ok: bool, check: &str, group: &str, value: f64, limit: f64) {
        if !ok {
            self.violations.push(Violation {
                experiment: self.experiment,
                check: check.into(),
                group: group.into(),
                value: Some(value),
                limit: Some(limit),
                message: String::new(),
            });
        }
    }
}

/// Groups records by a key of ordered bit patterns; every key component
/// must be a non-negative float or an integer.
fn group_by(
    records: &[EstimateRecord],
    key: impl Fn(&EstimateRecord) -> Vec<u64>,
) -> BTreeMap<Vec<u64>, Vec<&EstimateRecord>> {
    let mut m: BTreeMap<Vec<u64>, Vec<&EstimateRecord>> = BTreeMap::new();
    for rec in records {
        m.entry(key(rec)).or_default().push(rec);
    }
    m
}

/// `(h, max ratio)` per mesh size, finest last.
fn per_h_max(records: &[&EstimateRecord]) -> Vec<(f64, f64)> {
    let mut m: BTreeMap<u64, f64> = BTreeMap::new();
    for rec in records {
        let e = m.entry(rec.h.to_bits()).or_insert(f64::NEG_INFINITY);
        *e = e.max(rec.ratio);
    }
    m.into_iter().rev().map(|(h, c)| (f64::from_bits(h), c)).collect()
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    (min > 0.0 && max.is_finite()).then(|| max / min)
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, f64::max)
}

fn plot_row(t: &mut ResultTable, x: f64, y: f64, series: String) -> Result<()> {
    if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
        t.push(vec![x.log10().into(), y.log10().into(), series.into()])?;
    }
    Ok(())
}

fn label(prefix: &str, r: usize, d: f64) -> String {
    format!("{prefix}r{r}_d{d:.4}")
}

fn summarize(cfg: &ExperimentConfig, records: &[EstimateRecord], checks: &mut Checks) -> Result<(ResultTable, ResultTable)> {
    use limits::*;
    let e = cfg.experiment;
    let mut fits = ResultTable::new(fits_header(e));
    let mut plot = ResultTable::new(&PLOT_HEADER);
    let name = e.name();
    let preset = cfg.preset.as_str();
    match e {
        Experiment::Convergence => {
            for (key, group) in group_by(records, |r| vec![r.r as u64]) {
                let r = key[0] as usize;
                let conv = convergence_fit(group.into_iter().cloned().collect())?;
                fits.push(vec![
                    name.into(),
                    preset.into(),
                    r.into(),
                    conv.records.len().into(),
                    conv.h1.c_emp.into(),
                    conv.h1.slope.into(),
                    conv.h1.slope_ci.into(),
                    conv.l2.c_emp.into(),
                    conv.l2.slope.into(),
                    conv.l2.slope_ci.into(),
                ])?;
                let g = format!("r{r}");
                if let Some(s) = conv.h1.slope {
                    checks.require((s - r as f64).abs() <= CONVERGENCE_H1_SLOPE, "h1_slope", &g, s, r as f64);
                }
                if let Some(s) = conv.l2.slope {
                    let target = r as f64 + 1.0;
                    checks.require((s - target).abs() <= CONVERGENCE_L2_SLOPE, "l2_slope", &g, s, target);
                }
                for rec in &conv.records {
                    plot_row(&mut plot, rec.h, rec.lhs, format!("h1_r{r}"))?;
                    plot_row(&mut plot, rec.h, rec.diagnostic("l2_error").unwrap_or(0.0), format!("l2_r{r}"))?;
                }
            }
        }
        Experiment::Inverse => {
            for (key, group) in group_by(records, |r| vec![r.r as u64, r.d.to_bits()]) {
                let (r, d) = (key[0] as usize, f64::from_bits(key[1]));
                let cs = per_h_max(&group);
                let sp = spread(cs.iter().map(|c| c.1));
                fits.push(vec![
                    name.into(),
                    preset.into(),
                    r.into(),
                    d.into(),
                    group.len().into(),
                    max_of(cs.iter().map(|c| c.1)).into(),
                    cs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).into(),
                    max_of(cs.iter().map(|c| c.1)).into(),
                    sp.into(),
                ])?;
                let g = label("", r, d);
                let v = sp.unwrap_or(f64::INFINITY);
                checks.require(v <= INVERSE_SPREAD, "inverse_spread", &g, v, INVERSE_SPREAD);
                for (h, c) in cs {
                    plot_row(&mut plot, h, c, g.clone())?;
                }
            }
        }
        Experiment::Superapprox => {
            let groups = group_by(records, |r| vec![r.r as u64, r.d.to_bits()]);
            // reference constant: largest d at the finest h, per degree
            let mut reference: BTreeMap<u64, f64> = BTreeMap::new();
            for (key, group) in &groups {
                let finest = per_h_max(group).last().map_or(f64::NAN, |c| c.1);
                reference.insert(key[0], finest);
            }
            for (key, group) in &groups {
                let (r, d) = (key[0] as usize, f64::from_bits(key[1]));
                let cs = per_h_max(group);
                let sp = spread(cs.iter().map(|c| c.1));
                let finest = cs.last().map_or(f64::NAN, |c| c.1);
                let c_ref = reference[&key[0]];
                let ref_ratio = finest / c_ref;
                let outside: f64 = group.iter().map(|r| r.diagnostic("dofs_outside_g0").unwrap_or(0.0)).sum();
                let quad = max_of(group.iter().map(|r| r.diagnostic("quad_rel_change").unwrap_or(0.0)));
                fits.push(vec![
                    name.into(),
                    preset.into(),
                    r.into(),
                    d.into(),
                    group.len().into(),
                    max_of(group.iter().map(|r| r.ratio)).into(),
                    cs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).into(),
                    max_of(cs.iter().map(|c| c.1)).into(),
                    sp.into(),
                    finest.into(),
                    (ref_ratio.is_finite()).then_some(ref_ratio).into(),
                    outside.into(),
                    quad.into(),
                ])?;
                let g = label("", r, d);
                checks.require(outside == 0.0, "dofs_outside_g0", &g, outside, 0.0);
                let is_reference = groups.keys().filter(|k| k[0] == key[0]).all(|k| f64::from_bits(k[1]) <= d);
                if is_reference {
                    let v = sp.unwrap_or(f64::INFINITY);
                    checks.require(v <= SUPERAPPROX_SPREAD, "superapprox_spread", &g, v, SUPERAPPROX_SPREAD);
                }
                checks.require(ref_ratio <= SUPERAPPROX_FACTOR, "superapprox_d_ratio", &g, ref_ratio, SUPERAPPROX_FACTOR);
                for (h, c) in cs {
                    plot_row(&mut plot, h, c, g.clone())?;
                }
            }
        }
        Experiment::Technique => {
            for (key, group) in group_by(records, |r| vec![r.r as u64, r.d.to_bits()]) {
                let (r, d) = (key[0] as usize, f64::from_bits(key[1]));
                let h_cal = max_of(group.iter().map(|r| r.h));
                let c_emp = max_of(group.iter().filter(|r| r.h == h_cal).map(|r| r.ratio)).max(0.0);
                let validation: Vec<&&EstimateRecord> = group.iter().filter(|r| r.h < h_cal).collect();
                let bound = TECHNIQUE_FACTOR * c_emp;
                let failed = validation.iter().filter(|r| r.lhs > bound * r.rhs()).count();
                let vmax = (!validation.is_empty()).then(|| max_of(validation.iter().map(|r| r.ratio)));
                fits.push(vec![
                    name.into(),
                    preset.into(),
                    r.into(),
                    d.into(),
                    group.len().into(),
                    h_cal.into(),
                    c_emp.into(),
                    vmax.into(),
                    failed.into(),
                ])?;
                let g = label("", r, d);
                checks.require(failed == 0, "technique_validation", &g, vmax.unwrap_or(0.0), bound);
                for (h, c) in per_h_max(&group) {
                    plot_row(&mut plot, h, c, g.clone())?;
                }
            }
        }
        Experiment::Identity => {
            for (key, group) in group_by(records, |r| vec![r.r as u64]) {
                let r = key[0] as usize;
                let mut levels: Vec<&EstimateRecord> = group;
                levels.sort_by(|a, b| b.h.total_cmp(&a.h));
                let defects: Vec<f64> = levels.iter().map(|r| r.lhs).collect();
                let k = defects.len();
                let last3 = &defects[k.saturating_sub(3)..];
                let monotone = last3.windows(2).all(|w| w[1] <= w[0] || w[1] <= IDENTITY_FLOOR);
                let top = defects[k - 1];
                fits.push(vec![
                    name.into(),
                    preset.into(),
                    r.into(),
                    k.into(),
                    top.into(),
                    (k >= 2).then(|| defects[k - 2]).into(),
                    (k >= 3).then(|| defects[k - 3]).into(),
                    levels[k - 1].rhs().into(),
                    monotone.into(),
                ])?;
                let g = format!("r{r}");
                checks.require(top <= IDENTITY_DEFECT, "identity_defect", &g, top, IDENTITY_DEFECT);
                checks.require(monotone, "identity_monotone", &g, top, IDENTITY_FLOOR);
                for rec in &levels {
                    plot_row(&mut plot, rec.h, rec.lhs, format!("defect_r{r}"))?;
                }
            }
        }
        Experiment::LocalEstimate => {
            let mut spreads: BTreeMap<u64, Option<f64>> = BTreeMap::new();
            for (key, group) in group_by(records, |r| vec![r.r as u64]) {
                spreads.insert(key[0], spread(group.iter().map(|r| r.ratio)));
            }
            for (r, sp) in &spreads {
                let v = sp.unwrap_or(f64::INFINITY);
                checks.require(v <= LOCAL_SPREAD, "local_grid_spread", &format!("r{r}"), v, LOCAL_SPREAD);
            }
            for (key, group) in group_by(records, |r| vec![r.r as u64, r.d.to_bits(), r.p as u64]) {
                let (r, d, p) = (key[0] as usize, f64::from_bits(key[1]), key[2] as usize);
                let hs: Vec<f64> = group.iter().map(|r| r.h).collect();
                let ratios: Vec<f64> = group.iter().map(|r| r.ratio).collect();
                let halves: Vec<f64> = group.iter().map(|r| r.diagnostic("ratio_half").unwrap_or(f64::NAN)).collect();
                let several_h = hs.iter().any(|&h| h != hs[0]);
                let tau = several_h.then(|| kendall_tau(&hs, &ratios));
                let tau_half = several_h.then(|| kendall_tau(&hs, &halves));
                let slope = loglog_fit(&hs, &ratios).ok().map(|f| f.0);
                let slope_half = loglog_fit(&hs, &halves).ok().map(|f| f.0);
                fits.push(vec![
                    name.into(),
                    preset.into(),
                    r.into(),
                    d.into(),
                    p.into(),
                    group.len().into(),
                    max_of(ratios.iter().copied()).into(),
                    ratios.iter().copied().fold(f64::INFINITY, f64::min).into(),
                    max_of(ratios.iter().copied()).into(),
                    tau.into(),
                    tau_half.into(),
                    slope.into(),
                    slope_half.into(),
                    spreads[&key[0]].into(),
                ])?;
                let g = format!("{}_p{p}", label("", r, d));
                if let Some(t) = tau {
                    checks.require(t.abs() < LOCAL_TAU, "kendall_tau", &g, t, LOCAL_TAU);
                }
                for (h, c) in per_h_max(&group) {
                    plot_row(&mut plot, h, c, g.clone())?;
                }
            }
        }
        Experiment::NaiveSweep => {
            for (key, group) in group_by(records, |r| vec![r.r as u64, r.h.to_bits(), r.p as u64]) {
                let (r, h, p) = (key[0] as usize, f64::from_bits(key[1]), key[2] as usize);
                let owned: Vec<EstimateRecord> = group.into_iter().cloned().collect();
                let g = format!("r{r}_h{h:.6}_p{p}");
                let sweep = match naive_fit(&owned) {
                    Ok(s) => s,
                    Err(Error::Samples(msg)) => {
                        checks.violations.push(Violation {
                            experiment: e,
                            check: "naive_samples".into(),
                            group: g,
                            value: None,
                            limit: None,
                            message: msg,
                        });
                        continue;
                    }
                    Err(err) => return Err(err),
                };
                for &(d, c) in sweep.constants.iter().rev() {
                    fits.push(vec![
                        name.into(),
                        preset.into(),
                        r.into(),
                        h.into(),
                        p.into(),
                        d.into(),
                        c.into(),
                        sweep.fit.slope.into(),
                        sweep.fit.slope_ci.into(),
                        sweep.constant_slope.0.into(),
                        sweep.constant_slope.1.into(),
                        sweep.monotone.into(),
                    ])?;
                    plot_row(&mut plot, d, c, format!("naive_{g}"))?;
                }
                let (s, ci) = (sweep.fit.slope.unwrap_or(f64::NAN), sweep.fit.slope_ci.unwrap_or(f64::NAN));
                checks.require(sweep.monotone, "naive_monotone", &g, 0.0, 0.0);
                checks.require(s + ci < 0.0, "naive_slope_upper", &g, s + ci, 0.0);
            }
        }
    }
    Ok((fits, plot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        parse_config(text).unwrap()
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid(&cfg("experiment=identity\nr=1,2")).len(), 2);
        assert_eq!(grid(&cfg("experiment=convergence\nd=1,0.5")).len(), 4);
        assert_eq!(grid(&cfg("experiment=local-estimate\nd=1,0.5\np=1,2")).len(), 12);
    }

    #[test]
    fn inverse_run_is_sorted_and_schema_bound() {
        let c = cfg("experiment=inverse\nn=4,8,16\nd=1,0.5\nseeds=3");
        let out = execute(&c, 2).unwrap();
        assert_eq!(out.records.len(), 18);
        assert!(out.records.windows(2).all(|w| (w[0].h, w[0].d) <= (w[1].h, w[1].d)));
        assert_eq!(out.record_table.header, records_header(Experiment::Inverse));
        assert_eq!(out.fits.rows.len(), 2);
        assert!(out.plot.rows.len() >= 6);
    }

    #[test]
    fn infeasible_points_become_violations() {
        let c = cfg("experiment=local-estimate\nn=4\nd=0.5\np=2\nseeds=1");
        let out = execute(&c, 1).unwrap();
        assert!(!out.passed());
        assert_eq!(out.violations[0].check, "infeasible_point");
        assert!(out.violations[0].to_string().starts_with("VIOLATION experiment=local-estimate check=infeasible_point"));
    }

    #[test]
    fn identity_run_passes() {
        let out = execute(&cfg("experiment=identity\nlevels=4"), 1).unwrap();
        assert_eq!(out.records.len(), 4);
        assert_eq!(out.fits.rows.len(), 1);
    }

    #[test]
    fn empty_output_path_is_an_error() {
        let c = cfg("experiment=identity\nlevels=3");
        assert!(matches!(run(&c, Path::new(""), 1), Err(Error::Io(_))));
    }

    #[test]
    fn violation_line_format() {
        let v = Violation {
            experiment: Experiment::Inverse,
            check: "inverse_spread".into(),
            group: "r1_d1.4142".into(),
            value: Some(2.5),
            limit: Some(2.0),
            message: String::new(),
        };
        assert_eq!(
            v.to_string(),
            "VIOLATION experiment=inverse check=inverse_spread group=r1_d1.4142 value=2.5000000000000000e0 limit=2.0000000000000000e0"
        );
    }
}
