//! Coordinate charts, metric specifications, and pointwise metric jets.
//!
//! Everything downstream is single-chart and pointwise: a `MetricSpec` holds
//! symbolic metric components over a sampling box, and `metric_jet` turns it
//! into numeric components with partial derivatives up to order three at one
//! point. All derivatives are symbolic-then-evaluated, never differenced.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{Array2, Array3, Array4, Array5};
use once_cell::sync::OnceCell;
use rand::Rng;

use crate::expr::{Expr, PointScope};
use crate::{Error, Result};

/// A coordinate chart: names plus a per-coordinate sampling interval.
#[derive(Clone, Debug)]
pub struct Chart {
    pub coords: Vec<String>,
    pub bounds: Vec<[f64; 2]>,
}

impl Chart {
    pub fn new(coords: Vec<String>, bounds: Vec<[f64; 2]>) -> Result<Chart> {
        let n = coords.len();
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        if bounds.len() != n {
            return Err(Error::BadParams(format!(
                "{} coordinates but {} bounds",
                n,
                bounds.len()
            )));
        }
        for (name, b) in coords.iter().zip(&bounds) {
            if !(b[0] < b[1]) {
                return Err(Error::BadParams(format!(
                    "empty sampling interval for `{name}`: [{}, {}]",
                    b[0], b[1]
                )));
            }
        }
        Ok(Chart { coords, bounds })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.bounds)
                .all(|(x, b)| *x >= b[0] && *x <= b[1])
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect()
    }

    /// One uniform sample from the box interior (5% margin from each edge,
    /// so finite-difference stencils and short curves stay inside).
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|b| {
                let w = b[1] - b[0];
                rng.gen_range(b[0] + 0.05 * w..b[1] - 0.05 * w)
            })
            .collect()
    }

    pub fn sample_many(&self, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// Symbolic derivative tables of the metric, built once per spec.
struct DerivTables {
    /// dg[[i,j,k]] = ∂_k g_ij
    dg: Array3<Expr>,
    /// ddg[[i,j,k,l]] = ∂_l ∂_k g_ij
    ddg: Array4<Expr>,
    /// dddg[[i,j,k,l,m]] = ∂_m ∂_l ∂_k g_ij
    dddg: Array5<Expr>,
}

/// A metric given by symbolic components on a chart, with parameter bindings.
#[derive(Clone)]
pub struct MetricSpec {
    pub chart: Chart,
    pub g: Array2<Expr>,
    pub params: Vec<(String, f64)>,
    tables: OnceCell<Arc<DerivTables>>,
}

impl MetricSpec {
    pub fn new(chart: Chart, g: Array2<Expr>, params: Vec<(String, f64)>) -> Result<MetricSpec> {
        let n = chart.dim();
        if g.shape() != [n, n] {
            return Err(Error::BadParams(format!(
                "metric shape {:?} does not match dimension {n}",
                g.shape()
            )));
        }
        let spec = MetricSpec {
            chart,
            g,
            params,
            tables: OnceCell::new(),
        };
        // Symmetry probe at the box center: expression-level symmetry is not
        // required, value-level symmetry is.
        let center = spec.chart.center();
        let scope = spec.scope(&center);
        for i in 0..n {
            for j in (i + 1)..n {
                let a = spec.g[[i, j]].eval(&scope)?;
                let b = spec.g[[j, i]].eval(&scope)?;
                let scale = 1.0 + a.abs().max(b.abs());
                if (a - b).abs() > 1e-10 * scale {
                    return Err(Error::Schema {
                        pointer: format!("/g/{i}/{j}"),
                        message: format!(
                            "g[{i}][{j}] = {a} but g[{j}][{i}] = {b} at the box center"
                        ),
                    });
                }
            }
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Evaluation scope binding coordinates to `point` and the parameters.
    pub fn scope<'a>(&'a self, point: &'a [f64]) -> PointScope<'a> {
        PointScope {
            coords: &self.chart.coords,
            point,
            params: &self.params,
        }
    }

    /// Evaluates an arbitrary expression at a point of this chart.
    pub fn eval(&self, e: &Expr, point: &[f64]) -> Result<f64> {
        e.eval(&self.scope(point))
    }

    fn tables(&self) -> &DerivTables {
        let tables: &Arc<DerivTables> = self.tables.get_or_init(|| {
            let n = self.dim();
            let names = &self.chart.coords;
            let dg = Array3::from_shape_fn([n, n, n], |(i, j, k)| {
                self.g[[i, j]].differentiate(&names[k])
            });
            let ddg = Array4::from_shape_fn([n, n, n, n], |(i, j, k, l)| {
                dg[[i, j, k]].differentiate(&names[l])
            });
            let dddg = Array5::from_shape_fn([n, n, n, n, n], |(i, j, k, l, m)| {
                ddg[[i, j, k, l]].differentiate(&names[m])
            });
            Arc::new(DerivTables { dg, ddg, dddg })
        });
        tables.as_ref()
    }
}

/// Metric components and partials up to order three at a single point.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub point: Vec<f64>,
    pub g: Array2<f64>,
    /// dg[[i,j,k]] = ∂_k g_ij
    pub dg: Array3<f64>,
    pub ddg: Array4<f64>,
    pub dddg: Array5<f64>,
    pub ginv: Array2<f64>,
    pub det: f64,
}

/// Computes the order-3 metric jet at `point`.
pub fn metric_jet(spec: &MetricSpec, point: &[f64]) -> Result<MetricJet> {
    let n = spec.dim();
    let scope = spec.scope(point);
    let ev = |e: &Expr| e.eval(&scope);

    let mut g = Array2::zeros([n, n]);
    for i in 0..n {
        for j in 0..n {
            g[[i, j]] = ev(&spec.g[[i, j]])?;
        }
    }
    let t = spec.tables();
    let mut dg = Array3::zeros([n, n, n]);
    let mut ddg = Array4::zeros([n, n, n, n]);
    let mut dddg = Array5::zeros([n, n, n, n, n]);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                dg[[i, j, k]] = ev(&t.dg[[i, j, k]])?;
                for l in 0..n {
                    ddg[[i, j, k, l]] = ev(&t.ddg[[i, j, k, l]])?;
                    for m in 0..n {
                        dddg[[i, j, k, l, m]] = ev(&t.dddg[[i, j, k, l, m]])?;
                    }
                }
            }
        }
    }

    let gm = DMatrix::from_fn(n, n, |i, j| g[[i, j]]);
    let det = gm.determinant();
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if det.abs() < 1e-12 * scale.powi(n as i32) {
        return Err(Error::DegenerateMetric {
            point: point.to_vec(),
            det,
        });
    }
    let inv = gm
        .try_inverse()
        .ok_or_else(|| Error::DegenerateMetric {
            point: point.to_vec(),
            det,
        })?;
    let ginv = Array2::from_shape_fn([n, n], |(i, j)| inv[(i, j)]);

    Ok(MetricJet {
        point: point.to_vec(),
        g,
        dg,
        ddg,
        dddg,
        ginv,
        det,
    })
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}
