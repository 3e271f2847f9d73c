//! Check suites and reports.
//!
//! A suite is a fixed list of named checks. Each check evaluates one
//! identity at every sampled point and reports the maximum residual, the
//! worst point, the tolerance it was held to and the sample count. A check
//! whose hypothesis fails on the supplied metric (no Weyl nullity, no
//! partner metric, no metrisability solution) is marked `n/a` rather than
//! silently passed. Reports are deterministic for a fixed configuration and
//! seed, byte for byte, except for the timestamp in the metadata block.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::chart::MetricSpec;
use crate::curvature::{self, CurvaturePack};
use crate::expr::Expr;
use crate::flows;
use crate::got;
use crate::io;
use crate::metrisability::Solution;
use crate::nullity::{self, NullityReport};
use crate::projective::ProjectivePair;
use crate::tractor::{self, ConnectionKind, StandardConnection, StandardSection};
use crate::{Error, Result};

/// Tolerances applied by the runner.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Pointwise identity residuals.
    #[serde(default = "default_residual")]
    pub residual: f64,
    /// Loop-holonomy comparisons, limited by extrapolation error.
    #[serde(default = "default_holonomy")]
    pub holonomy: f64,
    /// Relative singular-value cutoff for kernel extraction.
    #[serde(default = "default_rank")]
    pub rank: f64,
}

fn default_residual() -> f64 {
    1e-6
}
fn default_holonomy() -> f64 {
    1e-4
}
fn default_rank() -> f64 {
    nullity::DEFAULT_RANK_TOL
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            residual: default_residual(),
            holonomy: default_holonomy(),
            rank: default_rank(),
        }
    }
}

/// A full run configuration; also the schema of `--config` files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: String,
    /// `catalog:<name>` or a metric file path.
    pub metric: String,
    /// Optional partner source; overrides a partner carried by `metric`.
    #[serde(default)]
    pub partner: Option<String>,
    /// Catalog parameters, as strings (e.g. `f` = `sin(t)`, `n` = `3`).
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

fn default_points() -> usize {
    60
}

/// Outcome status of one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "n/a")]
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub max_residual: Option<f64>,
    pub worst_point: Option<Vec<f64>>,
    pub tolerance: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub suite: String,
    pub metric: String,
    pub partner: Option<String>,
    pub seed: u64,
    pub points: usize,
    pub version: String,
    pub timestamp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<CheckResult>,
    pub meta: Meta,
}

impl Report {
    /// True when no check failed; `n/a` does not fail.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One line per check, for terminal output.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::NotApplicable => "n/a ",
            };
            match c.max_residual {
                Some(r) => out.push_str(&format!(
                    "{status}  {:<28} max residual {r:.3e}  (tol {:.1e}, {} samples)\n",
                    c.name, c.tolerance, c.samples
                )),
                None => out.push_str(&format!("{status}  {:<28} hypothesis not met\n", c.name)),
            }
        }
        out
    }
}

/// Per-point residual rows for the optional CSV export.
#[derive(Clone, Debug)]
pub struct CsvRow {
    pub check: String,
    pub point: Vec<f64>,
    pub residual: f64,
}

pub fn write_csv(path: &Path, coords: &[String], rows: &[CsvRow]) -> Result<()> {
    let mut out = String::from("check");
    for c in coords {
        out.push(',');
        out.push_str(c);
    }
    out.push_str(",residual\n");
    for row in rows {
        out.push_str(&row.check);
        for v in &row.point {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", row.residual));
    }
    fs::write(path, out).map_err(|e| Error::IntegrationFailure(format!("csv write: {e}")))
}

/// Everything a check may consume, resolved from the configuration.
pub struct Context {
    pub spec: MetricSpec,
    pub geom: Arc<crate::tensor::SymbolicGeometry>,
    pub pair: Option<ProjectivePair>,
    pub solution: Option<Solution>,
    /// Closed-form nullity eigenvalue, when the source supplied one.
    pub b_expr: Option<Expr>,
    /// Warping function f(t) for warped-product sources.
    pub warp_f: Option<Expr>,
    pub f_scalar: Option<Expr>,
    pub points: Vec<Vec<f64>>,
    pub tol: Tolerances,
    pub seed: u64,
}

impl Context {
    fn pack(&self, point: &[f64]) -> Result<CurvaturePack> {
        curvature::pack_at(&self.spec, point)
    }

    /// Curvature pack and nullity report, or `None` when the kernel is
    /// empty at the point.
    fn nullity(&self, point: &[f64]) -> Result<Option<(CurvaturePack, NullityReport)>> {
        let pack = self.pack(point)?;
        let space = nullity::nullity_space(&pack, self.tol.rank);
        if space.dim() == 0 {
            return Ok(None);
        }
        let report = nullity::nullity_report(&pack, &space)?;
        Ok(Some((pack, report)))
    }

    /// A symbolic B for connection building: the closed form when known,
    /// otherwise the constant observed at the box center (covers metrics
    /// with constant B and no catalog attachment).
    fn b_symbolic(&self) -> Result<Option<Expr>> {
        if let Some(b) = &self.b_expr {
            return Ok(Some(b.clone()));
        }
        let center = self.spec.chart.center();
        match self.nullity(&center)? {
            Some((_, report)) => Ok(Some(Expr::constant(report.b))),
            None => Ok(None),
        }
    }
}

enum Outcome {
    Points(Vec<(Vec<f64>, f64)>),
    Skip,
}

enum TolKind {
    Residual,
    Holonomy,
}

struct CheckDef {
    name: &'static str,
    kind: TolKind,
    run: fn(&Context) -> Result<Outcome>,
}

/// Maps a residual function over the sampled points. Returning `Ok(None)`
/// from the closure marks the whole check not applicable.
fn per_point(
    ctx: &Context,
    f: impl Fn(&Context, &[f64]) -> Result<Option<f64>>,
) -> Result<Outcome> {
    let mut rows = Vec::with_capacity(ctx.points.len());
    for p in &ctx.points {
        match f(ctx, p)? {
            Some(r) => rows.push((p.clone(), r)),
            None => return Ok(Outcome::Skip),
        }
    }
    Ok(Outcome::Points(rows))
}

fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0f64, |m, v| m.max(v.abs()))
}

// ---- weyl suite -----------------------------------------------------------

fn c_weyl_trace(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| Ok(Some(c.pack(p)?.weyl_trace_residual())))
}

fn c_bianchi(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| Ok(Some(c.pack(p)?.bianchi_residual())))
}

fn c_pair_symmetry(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| Ok(Some(c.pack(p)?.pair_symmetry_residual())))
}

fn c_weyl_divergence(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| Ok(Some(c.pack(p)?.em_identity_residual()?)))
}

// ---- nullity suite --------------------------------------------------------

fn c_kernel_equations(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| {
        Ok(c.nullity(p)?.map(|(_, r)| r.max_residual()))
    })
}

fn c_trace_identities(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| {
        Ok(c.nullity(p)?.map(|(pack, r)| {
            let t = nullity::phi_trace_residuals(&pack, &r);
            t.trace_identity.max(t.tracefree_identity)
        }))
    })
}

fn c_reconstruction(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| {
        Ok(c.nullity(p)?
            .map(|(pack, r)| nullity::reconstruction_residual(&pack, &r)))
    })
}

fn c_b_dispersion(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| Ok(c.nullity(p)?.map(|(_, r)| r.b_spread)))
}

fn c_warped_b(ctx: &Context) -> Result<Outcome> {
    let Some(f) = ctx.warp_f.clone() else {
        return Ok(Outcome::Skip);
    };
    per_point(ctx, move |c, p| match c.nullity(p)? {
        Some((_, r)) => Ok(Some(nullity::warped_b_check(&f, p[0], r.b)?)),
        None => Ok(None),
    })
}

// ---- equivalence suite ----------------------------------------------------

fn with_pair(
    ctx: &Context,
    f: impl Fn(&ProjectivePair, &[f64]) -> Result<Option<f64>>,
) -> Result<Outcome> {
    let Some(pair) = &ctx.pair else {
        return Ok(Outcome::Skip);
    };
    per_point(ctx, |_, p| f(pair, p))
}

fn c_connection_change(ctx: &Context) -> Result<Outcome> {
    with_pair(ctx, |pair, p| Ok(Some(pair.connection_residual(p)?)))
}

fn c_metric_compatibility(ctx: &Context) -> Result<Outcome> {
    with_pair(ctx, |pair, p| Ok(Some(pair.compatibility_residual(p)?)))
}

fn c_schouten_change(ctx: &Context) -> Result<Outcome> {
    with_pair(ctx, |pair, p| Ok(Some(pair.schouten_residual(p)?)))
}

fn c_density_normalisation(ctx: &Context) -> Result<Outcome> {
    with_pair(ctx, |pair, p| {
        let d = pair.density_residuals(p)?;
        Ok(Some(d.determinant.max(d.lambda_gradient)))
    })
}

fn c_nullity_transfer(ctx: &Context) -> Result<Outcome> {
    with_pair(ctx, |pair, p| match pair.nullity_transfer(p) {
        Ok(t) => Ok(Some(t.b_residual.max(t.phi_residual))),
        Err(Error::EmptyKernel) => Ok(None),
        Err(e) => Err(e),
    })
}

fn c_unparametrized_geodesics(ctx: &Context) -> Result<Outcome> {
    let Some(pair) = &ctx.pair else {
        return Ok(Outcome::Skip);
    };
    let n = ctx.spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(1));
    let mut rows = Vec::new();
    for x0 in ctx.points.iter().take(20) {
        let v0: Vec<f64> = (0..n)
            .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
            .collect();
        let norm: f64 = v0.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        let v0: Vec<f64> = v0.iter().map(|c| c / norm).collect();
        let path = flows::geodesic(&pair.geom, x0, &v0, 0.25, 48)?;
        let r = flows::unparametrized_match(&pair.partner_geom, &pair.geom, &path)?;
        rows.push((x0.clone(), r));
    }
    Ok(Outcome::Points(rows))
}

// ---- metrisability suite --------------------------------------------------

fn with_solution(
    ctx: &Context,
    f: impl Fn(&Context, &Solution, &[f64]) -> Result<Option<f64>>,
) -> Result<Outcome> {
    let Some(sol) = &ctx.solution else {
        return Ok(Outcome::Skip);
    };
    per_point(ctx, |c, p| f(c, sol, p))
}

fn c_mobility_equation(ctx: &Context) -> Result<Outcome> {
    with_solution(ctx, |_, sol, p| Ok(Some(sol.metrisability_residual(p)?)))
}

fn c_normal_prolongation(ctx: &Context) -> Result<Outcome> {
    with_solution(ctx, |_, sol, p| {
        let r = sol.normal_system_residual(p)?;
        Ok(Some(r.second.max(r.third)))
    })
}

fn c_nullity_prolongation(ctx: &Context) -> Result<Outcome> {
    let Some(b) = ctx.b_expr.clone() else {
        return Ok(Outcome::Skip);
    };
    with_solution(ctx, move |_, sol, p| {
        let r = sol.nullity_system_residual(&b, p)?;
        Ok(Some(r.second.max(r.third)))
    })
}

fn c_z_commutation(ctx: &Context) -> Result<Outcome> {
    with_solution(ctx, |c, sol, p| match c.nullity(p)? {
        Some((_, report)) => Ok(Some(sol.z_commutation_residual(&report, p)?)),
        None => Ok(None),
    })
}

fn c_killing_tensor(ctx: &Context) -> Result<Outcome> {
    let Some(sol) = &ctx.solution else {
        return Ok(Outcome::Skip);
    };
    let k = sol.killing_tensor(0.3);
    per_point(ctx, move |_, p| Ok(Some(sol.killing_residual(&k, p)?)))
}

fn c_structure_fit(ctx: &Context) -> Result<Outcome> {
    let Some(b) = ctx.b_expr.clone() else {
        return Ok(Outcome::Skip);
    };
    with_solution(ctx, move |_, sol, p| match sol.structure_fit(&b, p) {
        Ok(fit) => Ok(Some(fit.residual)),
        Err(Error::MissingNullity) => Ok(None),
        Err(e) => Err(e),
    })
}

// ---- tractor suite --------------------------------------------------------

fn c_nullity_holonomy(ctx: &Context) -> Result<Outcome> {
    let Some(b) = ctx.b_symbolic()? else {
        return Ok(Outcome::Skip);
    };
    let conn = StandardConnection::new(ctx.geom.clone(), ConnectionKind::Nullity, Some(&b))?;
    // Holonomy loops are expensive; certify at a few interior points pulled
    // halfway toward the box center so the rectangles stay in the chart.
    let center = ctx.spec.chart.center();
    let mut rows = Vec::new();
    for raw in ctx.points.iter().take(2).chain(std::iter::once(&center)) {
        let p: Vec<f64> = raw
            .iter()
            .zip(&center)
            .map(|(x, c)| c + 0.5 * (x - c))
            .collect();
        let Some((_, report)) = ctx.nullity(&p)? else {
            return Ok(Outcome::Skip);
        };
        let r = tractor::loop_nullity_certificate(
            &conn,
            &report,
            &p,
            &[2e-2, 1e-2, 5e-3],
            16,
        )?;
        rows.push((p, r));
    }
    Ok(Outcome::Points(rows))
}

fn c_parallel_scale(ctx: &Context) -> Result<Outcome> {
    let Some(f) = ctx.warp_f.clone() else {
        return Ok(Outcome::Skip);
    };
    let Some(b) = ctx.b_symbolic()? else {
        return Ok(Outcome::Skip);
    };
    let n = ctx.spec.dim();
    let t_name = ctx.spec.chart.coords[0].clone();
    let mut nu = Array1::from_elem(n, Expr::constant(0.0));
    nu[0] = f.clone();
    let section = StandardSection {
        nu,
        rho: Expr::mul(Expr::constant(-1.0), f.differentiate(&t_name)),
    };
    let conn = StandardConnection::new(ctx.geom.clone(), ConnectionKind::Nullity, Some(&b))?;
    per_point(ctx, move |_, p| {
        Ok(Some(conn.parallel_residual(&section, p)?))
    })
}

// ---- got suite ------------------------------------------------------------

fn got_inputs(ctx: &Context) -> Result<Option<(Expr, Expr, f64)>> {
    let Some(f) = ctx.f_scalar.clone() else {
        return Ok(None);
    };
    let Some(b) = ctx.b_symbolic()? else {
        return Ok(None);
    };
    let b0 = ctx.spec.eval(&b, &ctx.spec.chart.center())?;
    Ok(Some((f, b, b0)))
}

fn c_third_order(ctx: &Context) -> Result<Outcome> {
    let Some((f, _, b0)) = got_inputs(ctx)? else {
        return Ok(Outcome::Skip);
    };
    per_point(ctx, move |c, p| {
        Ok(Some(got::got_residual(&c.geom, &f, b0, p)?))
    })
}

fn c_skew_identity(ctx: &Context) -> Result<Outcome> {
    let Some((f, _, b0)) = got_inputs(ctx)? else {
        return Ok(Outcome::Skip);
    };
    per_point(ctx, move |c, p| {
        Ok(Some(got::got_skew_residual(&c.geom, &f, b0, p)?))
    })
}

fn c_s_operator(ctx: &Context) -> Result<Outcome> {
    let Some((f, b, _)) = got_inputs(ctx)? else {
        return Ok(Outcome::Skip);
    };
    per_point(ctx, move |c, p| {
        let s = got::s_operator(&c.geom, &f, &b, p)?;
        Ok(Some(max_abs(s.iter())))
    })
}

fn c_dual_parallel(ctx: &Context) -> Result<Outcome> {
    let Some((f, b, _)) = got_inputs(ctx)? else {
        return Ok(Outcome::Skip);
    };
    let section = tractor::split_dual(&ctx.geom, &f, &b);
    per_point(ctx, move |c, p| {
        Ok(Some(tractor::dual_parallel_residual(
            &c.geom, &section, &b, p,
        )?))
    })
}

// ---- einstein suite -------------------------------------------------------

fn c_conformal_weyl(ctx: &Context) -> Result<Outcome> {
    per_point(ctx, |c, p| {
        let pack = c.pack(p)?;
        let cw = pack.conformal_weyl()?;
        let mut worst = 0.0f64;
        for (a, b) in pack.weyl.iter().zip(cw.iter()) {
            worst = worst.max((a - b).abs());
        }
        Ok(Some(worst))
    })
}

fn c_schouten_parallel(ctx: &Context) -> Result<Outcome> {
    // The scale's own solution lifts to the dual-bundle section (1, 0, P);
    // under the normal connection every row vanishes except ∇_a P_bc.
    per_point(ctx, |c, p| {
        Ok(Some(max_abs(c.pack(p)?.covschouten.iter())))
    })
}

// ---- registry -------------------------------------------------------------

macro_rules! checks {
    ($(($name:literal, $kind:ident, $f:ident)),* $(,)?) => {
        &[$(CheckDef { name: $name, kind: TolKind::$kind, run: $f }),*]
    };
}

static WEYL: &[CheckDef] = checks![
    ("weyl_trace_free", Residual, c_weyl_trace),
    ("first_bianchi", Residual, c_bianchi),
    ("pair_symmetry", Residual, c_pair_symmetry),
    ("weyl_divergence", Residual, c_weyl_divergence),
];

static NULLITY: &[CheckDef] = checks![
    ("kernel_equations", Residual, c_kernel_equations),
    ("trace_identities", Residual, c_trace_identities),
    ("weyl_reconstruction", Residual, c_reconstruction),
    ("b_dispersion", Residual, c_b_dispersion),
    ("warped_b", Residual, c_warped_b),
];

static EQUIVALENCE: &[CheckDef] = checks![
    ("connection_change", Residual, c_connection_change),
    ("metric_compatibility", Residual, c_metric_compatibility),
    ("schouten_change", Residual, c_schouten_change),
    ("density_normalisation", Residual, c_density_normalisation),
    ("nullity_transfer", Residual, c_nullity_transfer),
    ("unparametrized_geodesics", Residual, c_unparametrized_geodesics),
];

static METRISABILITY: &[CheckDef] = checks![
    ("mobility_equation", Residual, c_mobility_equation),
    ("normal_prolongation", Residual, c_normal_prolongation),
    ("nullity_prolongation", Residual, c_nullity_prolongation),
    ("z_commutation", Residual, c_z_commutation),
    ("killing_tensor", Residual, c_killing_tensor),
    ("structure_fit", Residual, c_structure_fit),
];

static TRACTOR: &[CheckDef] = checks![
    ("nullity_holonomy", Holonomy, c_nullity_holonomy),
    ("parallel_scale", Residual, c_parallel_scale),
];

static GOT: &[CheckDef] = checks![
    ("third_order", Residual, c_third_order),
    ("skew_identity", Residual, c_skew_identity),
    ("s_operator", Residual, c_s_operator),
    ("dual_parallel", Residual, c_dual_parallel),
];

static EINSTEIN: &[CheckDef] = checks![
    ("conformal_weyl", Residual, c_conformal_weyl),
    ("schouten_parallel", Residual, c_schouten_parallel),
];

static REGISTRY: &[(&str, &[CheckDef])] = &[
    ("weyl", WEYL),
    ("nullity", NULLITY),
    ("equivalence", EQUIVALENCE),
    ("metrisability", METRISABILITY),
    ("tractor", TRACTOR),
    ("got", GOT),
    ("einstein", EINSTEIN),
];

fn registry() -> &'static [(&'static str, &'static [CheckDef])] {
    REGISTRY
}

/// Names of the available suites.
pub fn suite_names() -> Vec<&'static str> {
    registry().iter().map(|(n, _)| *n).collect()
}

fn checks_for(suite: &str) -> Result<&'static [CheckDef]> {
    registry()
        .iter()
        .find(|(n, _)| *n == suite)
        .map(|(_, c)| *c)
        .ok_or_else(|| Error::UnknownEntry(format!("suite `{suite}`")))
}

// ---- source resolution and the runner -------------------------------------

/// Builds the context for a configuration: resolves the metric source,
/// attaches partner/solution/closed forms and samples the points.
pub fn build_context(config: &SuiteConfig) -> Result<Context> {
    checks_for(&config.suite)?;
    let mut b_expr = None;
    let mut warp_f = None;
    let mut f_scalar = None;
    let solution_mixed;
    let (spec, mut partner) = if let Some(name) = config.metric.strip_prefix("catalog:") {
        let entry = catalog::lookup(name, &config.params)?;
        b_expr = entry.b.clone();
        warp_f = entry.warp_f.clone();
        solution_mixed = entry.solution.clone();
        (entry.metric, entry.partner)
    } else {
        let input = io::load_metric_file(Path::new(&config.metric))?;
        solution_mixed = input.sigma.clone();
        f_scalar = input.f_scalar.clone();
        (input.metric, input.partner)
    };
    if let Some(src) = &config.partner {
        partner = Some(if let Some(name) = src.strip_prefix("catalog:") {
            catalog::lookup(name, &config.params)?.metric
        } else {
            io::load_metric_file(Path::new(src))?.metric
        });
    }
    let geom = crate::tensor::SymbolicGeometry::new(&spec);
    let pair = match &partner {
        Some(p) => Some(ProjectivePair::new(&spec, p)?),
        None => None,
    };
    let solution = match (&solution_mixed, &pair) {
        (Some(m), _) => Some(Solution::from_mixed(geom.clone(), m.clone())),
        (None, Some(pair)) => Some(Solution::from_pair(pair)),
        (None, None) => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let points = spec.chart.sample_many(config.points, &mut rng);
    Ok(Context {
        spec,
        geom,
        pair,
        solution,
        b_expr,
        warp_f,
        f_scalar,
        points,
        tol: config.tolerances,
        seed: config.seed,
    })
}

pub struct RunOutput {
    pub report: Report,
    pub rows: Vec<CsvRow>,
}

/// Runs every check of the configured suite and assembles the report.
pub fn run_suite(config: &SuiteConfig) -> Result<RunOutput> {
    let ctx = build_context(config)?;
    let defs = checks_for(&config.suite)?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for def in defs {
        let tolerance = match def.kind {
            TolKind::Residual => ctx.tol.residual,
            TolKind::Holonomy => ctx.tol.holonomy,
        };
        match (def.run)(&ctx)? {
            Outcome::Skip => checks.push(CheckResult {
                name: def.name.to_string(),
                status: Status::NotApplicable,
                max_residual: None,
                worst_point: None,
                tolerance,
                samples: 0,
            }),
            Outcome::Points(pts) => {
                let mut max_residual = 0.0f64;
                let mut worst_point = None;
                for (p, r) in &pts {
                    if *r >= max_residual || worst_point.is_none() {
                        max_residual = *r;
                        worst_point = Some(p.clone());
                    }
                    rows.push(CsvRow {
                        check: def.name.to_string(),
                        point: p.clone(),
                        residual: *r,
                    });
                }
                let status = if max_residual <= tolerance {
                    Status::Pass
                } else {
                    Status::Fail
                };
                checks.push(CheckResult {
                    name: def.name.to_string(),
                    status,
                    max_residual: Some(max_residual),
                    worst_point,
                    tolerance,
                    samples: pts.len(),
                });
            }
        }
    }
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default();
    let report = Report {
        checks,
        meta: Meta {
            suite: config.suite.clone(),
            metric: config.metric.clone(),
            partner: config.partner.clone(),
            seed: config.seed,
            points: config.points,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        },
    };
    Ok(RunOutput { report, rows })
}

/// Parses a `--config` file.
pub fn load_config(path: &Path) -> Result<SuiteConfig> {
    let src = fs::read_to_string(path).map_err(|e| Error::Schema {
        pointer: "/".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    serde_json::from_str(&src).map_err(|e| Error::Schema {
        pointer: "/".into(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(suite: &str, metric: &str) -> SuiteConfig {
        SuiteConfig {
            suite: suite.into(),
            metric: metric.into(),
            partner: None,
            params: BTreeMap::new(),
            points: 12,
            seed: 11,
            tolerances: Tolerances::default(),
            out: None,
            csv: None,
        }
    }

    fn statuses(report: &Report) -> BTreeMap<String, Status> {
        report
            .checks
            .iter()
            .map(|c| (c.name.clone(), c.status))
            .collect()
    }

    #[test]
    fn nullity_suite_on_the_cone_passes_with_zero_b() {
        let out = run_suite(&config("nullity", "catalog:cone")).unwrap();
        assert!(out.report.passed(), "{}", out.report.render_text());
        let ctx = build_context(&config("nullity", "catalog:cone")).unwrap();
        let (_, r) = ctx.nullity(&ctx.points[0]).unwrap().unwrap();
        assert!(r.b.abs() < 1e-8, "cone B = {}", r.b);
    }

    #[test]
    fn equivalence_suite_passes_on_the_classical_pair() {
        let out = run_suite(&config("equivalence", "catalog:levi_civita_pair")).unwrap();
        assert!(out.report.passed(), "{}", out.report.render_text());
        let s = statuses(&out.report);
        assert_eq!(s["connection_change"], Status::Pass);
        assert_eq!(s["unparametrized_geodesics"], Status::Pass);
    }

    #[test]
    fn generic_metric_marks_dependent_checks_not_applicable() {
        let out = run_suite(&config("nullity", "catalog:levi_civita_pair")).unwrap();
        assert!(out.report.passed());
        let s = statuses(&out.report);
        assert_eq!(s["kernel_equations"], Status::NotApplicable);
        assert_eq!(s["warped_b"], Status::NotApplicable);
        let ctx = build_context(&config("nullity", "catalog:levi_civita_pair")).unwrap();
        assert!(ctx.nullity(&ctx.points[0]).unwrap().is_none());
    }

    #[test]
    fn reports_round_trip_and_are_deterministic() {
        let cfg = config("weyl", "catalog:warped_pair");
        let a = run_suite(&cfg).unwrap().report;
        let b = run_suite(&cfg).unwrap().report;
        let parsed: Report = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(parsed, a);
        let strip = |mut r: Report| {
            r.meta.timestamp = String::new();
            r.to_json()
        };
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let err = run_suite(&config("frobnicate", "catalog:flat")).err().unwrap();
        assert!(matches!(err, Error::UnknownEntry(_)));
    }

    #[test]
    fn metrisability_suite_passes_on_the_warped_pair() {
        let mut cfg = config("metrisability", "catalog:warped_pair");
        cfg.points = 8;
        let out = run_suite(&cfg).unwrap();
        assert!(out.report.passed(), "{}", out.report.render_text());
        let s = statuses(&out.report);
        assert_eq!(s["mobility_equation"], Status::Pass);
        assert_eq!(s["nullity_prolongation"], Status::Pass);
    }
}
