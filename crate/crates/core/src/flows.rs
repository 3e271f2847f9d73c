//! Numerical flows on a chart: geodesics of a metric, parallel transport of
//! fiber vectors along paths, and small rectangular transport loops whose
//! deficit recovers curvature. Everything integrates with classical
//! fourth-order Runge-Kutta, so halving the step should shrink errors by
//! roughly sixteen; tests assert at least eight.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::metric_jet;
use crate::tensor::SymbolicGeometry;
use crate::{Error, Result};

/// One sample of an integrated curve: parameter, position, velocity.
#[derive(Clone, Debug)]
pub struct PathPoint {
    pub s: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// An integrated geodesic. `complete` is false when the curve left the
/// chart box before reaching the requested length; the points collected up
/// to that moment are still returned.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub points: Vec<PathPoint>,
    pub complete: bool,
}

impl GeodesicPath {
    pub fn end(&self) -> &PathPoint {
        self.points.last().expect("paths hold at least the start")
    }

    /// Relative drift of the kinetic energy g(v, v) between the first and
    /// last sample, a conserved quantity of the exact flow.
    pub fn energy_drift(&self, geom: &SymbolicGeometry) -> Result<f64> {
        let energy = |p: &PathPoint| -> Result<f64> {
            let jet = metric_jet(&geom.spec, &p.x)?;
            let n = jet.dim();
            let mut e = 0.0;
            for i in 0..n {
                for j in 0..n {
                    e += jet.g[[i, j]] * p.v[i] * p.v[j];
                }
            }
            Ok(e)
        };
        let e0 = energy(&self.points[0])?;
        let e1 = energy(self.end())?;
        Ok((e1 - e0).abs() / e0.abs().max(1e-12))
    }
}

fn gamma_at(geom: &SymbolicGeometry, x: &[f64]) -> Result<Vec<f64>> {
    let n = geom.dim();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = geom.spec.eval(&geom.gamma[[i, j, k]], x)?;
            }
        }
    }
    Ok(out)
}

fn geodesic_rhs(geom: &SymbolicGeometry, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = geom.dim();
    let gamma = gamma_at(geom, x)?;
    let mut acc = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                acc[i] -= gamma[(i * n + j) * n + k] * v[j] * v[k];
            }
        }
    }
    Ok((v.to_vec(), acc))
}

/// Integrates the geodesic equation x'' = −Γ(x', x') from `(x0, v0)` for
/// parameter length `length` in `steps` Runge-Kutta steps. Stops early if
/// the curve leaves the chart box.
pub fn geodesic(
    geom: &Arc<SymbolicGeometry>,
    x0: &[f64],
    v0: &[f64],
    length: f64,
    steps: usize,
) -> Result<GeodesicPath> {
    if steps == 0 {
        return Err(Error::IntegrationFailure("zero steps requested".into()));
    }
    let n = geom.dim();
    let h = length / steps as f64;
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut points = vec![PathPoint {
        s: 0.0,
        x: x.clone(),
        v: v.clone(),
    }];
    for step in 0..steps {
        let (k1x, k1v) = geodesic_rhs(geom, &x, &v)?;
        let trial = |xa: &[f64], va: &[f64], kx: &[f64], kv: &[f64], c: f64| {
            let xt: Vec<f64> = (0..n).map(|i| xa[i] + c * h * kx[i]).collect();
            let vt: Vec<f64> = (0..n).map(|i| va[i] + c * h * kv[i]).collect();
            (xt, vt)
        };
        let (x2, v2) = trial(&x, &v, &k1x, &k1v, 0.5);
        let (k2x, k2v) = geodesic_rhs(geom, &x2, &v2)?;
        let (x3, v3) = trial(&x, &v, &k2x, &k2v, 0.5);
        let (k3x, k3v) = geodesic_rhs(geom, &x3, &v3)?;
        let (x4, v4) = trial(&x, &v, &k3x, &k3v, 1.0);
        let (k4x, k4v) = geodesic_rhs(geom, &x4, &v4)?;
        for i in 0..n {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        if !x.iter().all(|c| c.is_finite()) {
            return Err(Error::StepUnstable(format!(
                "geodesic blew up at step {step}"
            )));
        }
        let s = (step + 1) as f64 * h;
        if !geom.spec.chart.contains(&x) {
            points.push(PathPoint {
                s,
                x: x.clone(),
                v: v.clone(),
            });
            return Ok(GeodesicPath {
                points,
                complete: false,
            });
        }
        points.push(PathPoint {
            s,
            x: x.clone(),
            v: v.clone(),
        });
    }
    Ok(GeodesicPath {
        points,
        complete: true,
    })
}

/// How far a curve integrated in one connection is from being an
/// unparametrized geodesic of another. For each sample the acceleration
/// gap A = (Γ̄ − Γ)(v, v) is split off its component along v; the returned
/// value is the largest transverse part, normalized by |A| + |v|².
pub fn unparametrized_match(
    partner: &Arc<SymbolicGeometry>,
    base: &Arc<SymbolicGeometry>,
    path: &GeodesicPath,
) -> Result<f64> {
    let n = base.dim();
    let mut worst = 0.0f64;
    for p in &path.points {
        let gb = gamma_at(partner, &p.x)?;
        let gg = gamma_at(base, &p.x)?;
        let mut a = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    a[i] += (gb[(i * n + j) * n + k] - gg[(i * n + j) * n + k])
                        * p.v[j]
                        * p.v[k];
                }
            }
        }
        let vv: f64 = p.v.iter().map(|c| c * c).sum();
        let av: f64 = a.iter().zip(&p.v).map(|(ai, vi)| ai * vi).sum();
        let mut transverse = 0.0;
        for i in 0..n {
            let t = a[i] - av / vv * p.v[i];
            transverse += t * t;
        }
        let anorm: f64 = a.iter().map(|c| c * c).sum::<f64>().sqrt();
        worst = worst.max(transverse.sqrt() / (anorm + vv));
    }
    Ok(worst)
}

/// Transports a fiber vector along a parametrized path by integrating
/// dV/ds = −ẋ^a A_a(x) V with Runge-Kutta. `path` returns position and
/// tangent at a parameter value in [0, s_end]; `connection` returns one
/// fiber matrix per coordinate direction.
pub fn transport_along(
    path: &dyn Fn(f64) -> (Vec<f64>, Vec<f64>),
    connection: &dyn Fn(&[f64]) -> Result<Vec<DMatrix<f64>>>,
    s_end: f64,
    steps: usize,
    v0: &DVector<f64>,
) -> Result<DVector<f64>> {
    if steps == 0 {
        return Err(Error::IntegrationFailure("zero steps requested".into()));
    }
    let h = s_end / steps as f64;
    let rhs = |s: f64, v: &DVector<f64>| -> Result<DVector<f64>> {
        let (x, dx) = path(s);
        let mats = connection(&x)?;
        let mut out = DVector::zeros(v.len());
        for (a, m) in mats.iter().enumerate() {
            out -= m * v * dx[a];
        }
        Ok(out)
    };
    let mut v = v0.clone();
    for step in 0..steps {
        let s = step as f64 * h;
        let k1 = rhs(s, &v)?;
        let k2 = rhs(s + 0.5 * h, &(&v + &k1 * (0.5 * h)))?;
        let k3 = rhs(s + 0.5 * h, &(&v + &k2 * (0.5 * h)))?;
        let k4 = rhs(s + h, &(&v + &k3 * h))?;
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::StepUnstable(format!(
                "transport blew up at step {step}"
            )));
        }
    }
    Ok(v)
}

/// Holonomy of a small coordinate rectangle. Starting at `base`, the loop
/// runs +ε along coordinate `a`, +ε along `b`, −ε along `a`, −ε along `b`;
/// the returned matrix maps a fiber vector to its transport around the
/// whole loop. The deficit (I − H)/ε² converges to the curvature
/// F_ab = ∂_a A_b − ∂_b A_a + [A_a, A_b] of the connection.
pub fn rectangle_holonomy(
    base: &[f64],
    a: usize,
    b: usize,
    eps: f64,
    connection: &dyn Fn(&[f64]) -> Result<Vec<DMatrix<f64>>>,
    fiber: usize,
    steps_per_side: usize,
) -> Result<DMatrix<f64>> {
    let n = base.len();
    let mut h = DMatrix::identity(fiber, fiber);
    // Corners of the rectangle in order.
    let mut corners = vec![base.to_vec(); 5];
    corners[1][a] += eps;
    corners[2][a] += eps;
    corners[2][b] += eps;
    corners[3][b] += eps;
    for side in 0..4 {
        let from = corners[side].clone();
        let to = corners[side + 1].clone();
        let path = move |s: f64| -> (Vec<f64>, Vec<f64>) {
            let x: Vec<f64> = (0..n)
                .map(|i| from[i] + s * (to[i] - from[i]))
                .collect();
            let dx: Vec<f64> = (0..n).map(|i| to[i] - from[i]).collect();
            (x, dx)
        };
        // Transport each basis vector to build the side map, then compose.
        let mut side_map = DMatrix::zeros(fiber, fiber);
        for col in 0..fiber {
            let mut e = DVector::zeros(fiber);
            e[col] = 1.0;
            let out = transport_along(&path, connection, 1.0, steps_per_side, &e)?;
            side_map.set_column(col, &out);
        }
        h = side_map * h;
    }
    Ok(h)
}

/// Tangent-bundle connection matrices (A_a)^i_j = Γ^i_{a j} of a metric,
/// in the callback shape the transport routines expect.
pub fn tangent_connection(
    geom: Arc<SymbolicGeometry>,
) -> impl Fn(&[f64]) -> Result<Vec<DMatrix<f64>>> {
    move |x: &[f64]| {
        let n = geom.dim();
        let mut out = Vec::with_capacity(n);
        for a in 0..n {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = geom.spec.eval(&geom.gamma[[i, a, j]], x)?;
                }
            }
            out.push(m);
        }
        Ok(out)
    }
}

/// Richardson extrapolation of (I − H(ε))/ε² over a decreasing sequence of
/// rectangle sizes. The loop starts at a corner, so the deficit error
/// expansion begins at first order in ε; successive extrapolation passes
/// remove the ε, ε², ... terms. Returns the extrapolated deficit matrix.
pub fn loop_deficit(
    base: &[f64],
    a: usize,
    b: usize,
    eps: &[f64],
    connection: &dyn Fn(&[f64]) -> Result<Vec<DMatrix<f64>>>,
    fiber: usize,
    steps_per_side: usize,
) -> Result<DMatrix<f64>> {
    if eps.len() < 2 {
        return Err(Error::IntegrationFailure(
            "loop deficit needs at least two rectangle sizes".into(),
        ));
    }
    let mut deficits = Vec::with_capacity(eps.len());
    for &e in eps {
        let h = rectangle_holonomy(base, a, b, e, connection, fiber, steps_per_side)?;
        let d = (DMatrix::identity(fiber, fiber) - h) / (e * e);
        deficits.push(d);
    }
    let mut table = deficits;
    let mut order = 1i32;
    while table.len() > 1 {
        let mut next = Vec::with_capacity(table.len() - 1);
        for i in 0..table.len() - 1 {
            let r = eps[eps.len() - table.len() + i] / eps[eps.len() - table.len() + i + 1];
            let rp = r.powi(order);
            next.push((&table[i + 1] * rp - &table[i]) / (rp - 1.0));
        }
        table = next;
        order += 1;
    }
    Ok(table.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::curvature::pack_at;
    use crate::projective::ProjectivePair;

    #[test]
    fn flat_geodesics_are_straight() {
        let spec = catalog::flat(3).unwrap().metric;
        let geom = SymbolicGeometry::new(&spec);
        let path = geodesic(&geom, &[0.1, 0.2, 0.3], &[0.05, -0.02, 0.01], 2.0, 64).unwrap();
        assert!(path.complete);
        let end = path.end();
        assert!((end.x[0] - 0.2).abs() < 1e-12);
        assert!((end.x[1] - 0.16).abs() < 1e-12);
        assert!((end.x[2] - 0.32).abs() < 1e-12);
    }

    #[test]
    fn energy_is_conserved_and_order_is_four() {
        let spec = catalog::lookup("warped", &Default::default()).unwrap().metric;
        let geom = SymbolicGeometry::new(&spec);
        let x0 = spec.chart.center();
        let v0 = vec![0.2, 0.1, -0.05];
        let coarse = geodesic(&geom, &x0, &v0, 1.5, 32).unwrap();
        let fine = geodesic(&geom, &x0, &v0, 1.5, 64).unwrap();
        let truth = geodesic(&geom, &x0, &v0, 1.5, 256).unwrap();
        assert!(coarse.energy_drift(&geom).unwrap() < 1e-8);
        let err = |p: &GeodesicPath| -> f64 {
            p.end()
                .x
                .iter()
                .zip(&truth.end().x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (ec, ef) = (err(&coarse), err(&fine));
        assert!(ec / ef.max(1e-16) > 8.0, "convergence ratio {} too small", ec / ef);
    }

    #[test]
    fn paired_metrics_share_unparametrized_geodesics() {
        let entry = catalog::lookup("levi_civita_pair", &Default::default()).unwrap();
        let pair = ProjectivePair::new(&entry.metric, entry.partner.as_ref().unwrap()).unwrap();
        let x0 = entry.metric.chart.center();
        let path = geodesic(&pair.geom, &x0, &[0.1, 0.15, -0.1], 1.0, 64).unwrap();
        let res = unparametrized_match(&pair.partner_geom, &pair.geom, &path).unwrap();
        assert!(res < 1e-8, "match residual {res}");

        // A metric with different geodesics must fail the same test.
        let sphere = catalog::round_sphere(3).unwrap().metric;
        let flat = catalog::flat(3).unwrap().metric;
        // Rename flat coordinates onto the sphere chart for comparison.
        let geom_s = SymbolicGeometry::new(&sphere);
        let mut g = ndarray::Array2::from_elem([3, 3], crate::expr::Expr::zero());
        for i in 0..3 {
            g[[i, i]] = crate::expr::Expr::one();
        }
        let _ = flat;
        let respec = crate::chart::MetricSpec::new(
            sphere.chart.clone(),
            g,
            vec![],
        )
        .unwrap();
        let geom_f = SymbolicGeometry::new(&respec);
        let path = geodesic(&geom_s, &sphere.chart.center(), &[0.2, 0.1, 0.05], 1.0, 64).unwrap();
        let res = unparametrized_match(&geom_f, &geom_s, &path).unwrap();
        assert!(res > 1e-3, "expected mismatch, got {res}");
    }

    #[test]
    fn latitude_holonomy_on_the_two_sphere() {
        // Transporting around the latitude circle t1 = π/3 rotates tangent
        // vectors by 2π(1 − cos t1) = π.
        let spec = catalog::round_sphere(2).unwrap().metric;
        let geom = SymbolicGeometry::new(&spec);
        let theta = std::f64::consts::FRAC_PI_3;
        let conn = tangent_connection(geom);
        let two_pi = 2.0 * std::f64::consts::PI;
        let path = move |s: f64| (vec![theta, s * two_pi], vec![0.0, two_pi]);
        let v0 = DVector::from_vec(vec![1.0, 0.0]);
        let out = transport_along(&path, &conn, 1.0, 512, &v0).unwrap();
        // Angle measured in the orthonormal frame (∂_1, ∂_2 / sin θ).
        let angle = (out[1] * theta.sin()).atan2(out[0]);
        let deficit = (angle.abs() - std::f64::consts::PI).abs();
        assert!(deficit < 1e-6, "holonomy angle off by {deficit}");
    }

    #[test]
    fn rectangle_deficit_recovers_riemann() {
        let spec = catalog::round_sphere(2).unwrap().metric;
        let geom = SymbolicGeometry::new(&spec);
        let base = spec.chart.center();
        let pack = pack_at(&spec, &base).unwrap();
        let conn = tangent_connection(geom);
        let deficit = loop_deficit(&base, 0, 1, &[1e-2, 5e-3, 2.5e-3], &conn, 2, 64).unwrap();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((deficit[(i, j)] - pack.riemann[[i, j, 0, 1]]).abs());
            }
        }
        assert!(worst < 1e-5, "deficit mismatch {worst}");
    }
}
