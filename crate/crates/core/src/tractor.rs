//! Tractor bundles over a chart. The standard tractor bundle glues a
//! tangent vector slot to a scalar slot; its connection family is indexed
//! by a symmetric tensor M_ab that is the Schouten tensor for the normal
//! connection, B g_ab over a nullity metric, or the interpolation
//! P − t φ between the two. The dual second-power bundle carries the
//! three-slot connection whose parallel sections correspond to solutions
//! of the third-order Gallot-Obata-Tanno equation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Array3};

use crate::expr::Expr;
use crate::flows;
use crate::nullity::NullityReport;
use crate::tensor::{ExprField, Slot, SymbolicGeometry};
use crate::{Error, Result};

/// Which symmetric tensor sits in the bottom row of the standard tractor
/// connection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConnectionKind {
    /// M = P, the projective Schouten tensor.
    Normal,
    /// M = B g, available over metrics with Weyl nullity.
    Nullity,
    /// M = P − t φ; t = 0 is normal, t = 1 is the nullity connection.
    Interpolated(f64),
}

/// A section of the standard tractor bundle in symbolic components.
#[derive(Clone, Debug)]
pub struct StandardSection {
    pub nu: Array1<Expr>,
    pub rho: Expr,
}

/// The standard tractor connection for one metric and one choice of M.
pub struct StandardConnection {
    pub geom: Arc<SymbolicGeometry>,
    /// Symbolic M_ab.
    pub m: Array2<Expr>,
    pub kind: ConnectionKind,
}

impl StandardConnection {
    /// Builds the connection. `b` must be supplied (as a symbolic scalar in
    /// the chart coordinates) for the nullity and interpolated kinds.
    pub fn new(
        geom: Arc<SymbolicGeometry>,
        kind: ConnectionKind,
        b: Option<&Expr>,
    ) -> Result<StandardConnection> {
        let n = geom.dim();
        let schouten = geom.schouten();
        let m = match kind {
            ConnectionKind::Normal => schouten,
            ConnectionKind::Nullity => {
                let b = b.ok_or(Error::MissingNullity)?;
                Array2::from_shape_fn([n, n], |(a, c)| {
                    Expr::mul(b.clone(), geom.spec.g[[a, c]].clone())
                })
            }
            ConnectionKind::Interpolated(t) => {
                let b = b.ok_or(Error::MissingNullity)?;
                // P − tφ = (1 − t) P + t B g
                Array2::from_shape_fn([n, n], |(a, c)| {
                    Expr::add(
                        Expr::mul(Expr::constant(1.0 - t), schouten[[a, c]].clone()),
                        Expr::mul(
                            Expr::constant(t),
                            Expr::mul(b.clone(), geom.spec.g[[a, c]].clone()),
                        ),
                    )
                })
            }
        };
        Ok(StandardConnection { geom, m, kind })
    }

    pub fn fiber_dim(&self) -> usize {
        self.geom.dim() + 1
    }

    /// Connection matrices A_a with the ordering (ν^0..ν^{n−1}, ρ), so that
    /// the covariant derivative is ∂_a V + A_a V with slots
    /// (∇_a ν^b + ρ δ^b_a, ∇_a ρ − M_ab ν^b).
    pub fn matrices(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let n = self.geom.dim();
        let mut out = Vec::with_capacity(n);
        for a in 0..n {
            let mut mat = DMatrix::zeros(n + 1, n + 1);
            for b in 0..n {
                for s in 0..n {
                    mat[(b, s)] = self.geom.spec.eval(&self.geom.gamma[[b, a, s]], x)?;
                }
                if b == a {
                    mat[(b, n)] = 1.0;
                }
                mat[(n, b)] = -self.geom.spec.eval(&self.m[[a, b]], x)?;
            }
            out.push(mat);
        }
        Ok(out)
    }

    /// Slot components of the covariant derivative of a section at a point:
    /// `(top[[b, a]], bottom[a])`.
    pub fn derivative(
        &self,
        section: &StandardSection,
        point: &[f64],
    ) -> Result<(Array2<f64>, Vec<f64>)> {
        let n = self.geom.dim();
        let nu_field = ExprField::vector(section.nu.clone(), Slot::Up);
        let dnu = self.geom.cov_derivative(&nu_field);
        let dnu = self.geom.eval_field(&dnu, point)?;
        let rho = self.geom.spec.eval(&section.rho, point)?;
        let nu: Vec<f64> = section
            .nu
            .iter()
            .map(|e| self.geom.spec.eval(e, point))
            .collect::<Result<_>>()?;
        let mut top = Array2::<f64>::zeros([n, n]);
        for b in 0..n {
            for a in 0..n {
                top[[b, a]] = dnu.comps[[b, a]] + if a == b { rho } else { 0.0 };
            }
        }
        let mut bottom = vec![0.0; n];
        for a in 0..n {
            bottom[a] = self
                .geom
                .spec
                .eval(&section.rho.differentiate(&self.geom.spec.chart.coords[a]), point)?;
            for s in 0..n {
                bottom[a] -= self.geom.spec.eval(&self.m[[a, s]], point)? * nu[s];
            }
        }
        Ok((top, bottom))
    }

    /// max slot component of the covariant derivative; zero for parallel
    /// sections.
    pub fn parallel_residual(&self, section: &StandardSection, point: &[f64]) -> Result<f64> {
        let (top, bottom) = self.derivative(section, point)?;
        let mut worst = top.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in bottom {
            worst = worst.max(v.abs());
        }
        Ok(worst)
    }

    /// Transports a section value along a straight chart segment and
    /// compares against the section's own value at the far end. Parallel
    /// sections give zero.
    pub fn transport_mismatch(
        &self,
        section: &StandardSection,
        from: &[f64],
        to: &[f64],
        steps: usize,
    ) -> Result<f64> {
        let n = self.geom.dim();
        let value_at = |x: &[f64]| -> Result<DVector<f64>> {
            let mut v = DVector::zeros(n + 1);
            for b in 0..n {
                v[b] = self.geom.spec.eval(&section.nu[b], x)?;
            }
            v[n] = self.geom.spec.eval(&section.rho, x)?;
            Ok(v)
        };
        let v0 = value_at(from)?;
        let expected = value_at(to)?;
        let from_v = from.to_vec();
        let to_v = to.to_vec();
        let path = move |s: f64| -> (Vec<f64>, Vec<f64>) {
            let x: Vec<f64> = (0..n)
                .map(|i| from_v[i] + s * (to_v[i] - from_v[i]))
                .collect();
            let dx: Vec<f64> = (0..n).map(|i| to_v[i] - from_v[i]).collect();
            (x, dx)
        };
        let conn = |x: &[f64]| self.matrices(x);
        let out = flows::transport_along(&path, &conn, 1.0, steps, &v0)?;
        Ok((out - expected).amax())
    }
}

/// Loop-deficit certificate for the nullity connection: the ν-block of the
/// Richardson-extrapolated rectangle deficit must equal the curvature
/// Z^b_{s ab} = R + B K of the metric, for every coordinate plane through
/// the point. Returns the worst absolute mismatch.
pub fn loop_nullity_certificate(
    conn: &StandardConnection,
    report: &NullityReport,
    point: &[f64],
    eps: &[f64],
    steps_per_side: usize,
) -> Result<f64> {
    if conn.kind != ConnectionKind::Nullity {
        return Err(Error::UnsupportedCombination(
            "loop certificate is defined for the nullity connection".into(),
        ));
    }
    let n = conn.geom.dim();
    let fiber = n + 1;
    let cb = |x: &[f64]| conn.matrices(x);
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in (a + 1)..n {
            let deficit = flows::loop_deficit(point, a, b, eps, &cb, fiber, steps_per_side)?;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((deficit[(i, j)] - report.z[[i, j, a, b]]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// A section of the dual second-power tractor bundle: a scalar, a covector
/// and a symmetric two-tensor.
#[derive(Clone, Debug)]
pub struct DualSection {
    pub tau: Expr,
    pub mu: Array1<Expr>,
    pub rho: Array2<Expr>,
}

/// The splitting operator into the dual bundle over a nullity metric:
/// τ ↦ (τ, ½∇τ, ½∇∇τ + B g τ). Parallel sections of the dual connection
/// are exactly these images for τ solving the third-order equation.
pub fn split_dual(geom: &SymbolicGeometry, tau: &Expr, b: &Expr) -> DualSection {
    let n = geom.dim();
    let grad = geom.grad(tau);
    let hess = geom.cov_derivative(&grad);
    let mu = Array1::from_shape_fn(n, |a| {
        Expr::mul(Expr::constant(0.5), grad.comps[[a]].clone())
    });
    let rho = Array2::from_shape_fn([n, n], |(i, j)| {
        Expr::add(
            Expr::mul(Expr::constant(0.5), hess.comps[[i, j]].clone()),
            Expr::mul(b.clone(), Expr::mul(geom.spec.g[[i, j]].clone(), tau.clone())),
        )
    });
    DualSection {
        tau: tau.clone(),
        mu,
        rho,
    }
}

/// Slot components of the dual connection applied to a section:
/// (∇_a τ − 2 μ_a,
///  ∇_a μ_b + B g_ab τ − ρ_ab,
///  ∇_a ρ_bc + B (g_ab μ_c + g_ac μ_b)),
/// returned as `(row1[a], row2[[b, a]], row3[[b, c, a]])`.
pub fn dual_derivative(
    geom: &SymbolicGeometry,
    section: &DualSection,
    b_scalar: &Expr,
    point: &[f64],
) -> Result<(Vec<f64>, Array2<f64>, Array3<f64>)> {
    let n = geom.dim();
    let spec = &geom.spec;
    let bval = spec.eval(b_scalar, point)?;
    let g = crate::chart::metric_jet(spec, point)?.g;
    let tau = spec.eval(&section.tau, point)?;
    let mu: Vec<f64> = section
        .mu
        .iter()
        .map(|e| spec.eval(e, point))
        .collect::<Result<_>>()?;
    let rho = Array2::from_shape_fn([n, n], |(i, j)| {
        spec.eval(&section.rho[[i, j]], point).unwrap_or(f64::NAN)
    });

    let mut row1 = vec![0.0; n];
    for a in 0..n {
        row1[a] =
            spec.eval(&section.tau.differentiate(&spec.chart.coords[a]), point)? - 2.0 * mu[a];
    }

    let mu_field = ExprField::vector(section.mu.clone(), Slot::Down);
    let dmu = geom.eval_field(&geom.cov_derivative(&mu_field), point)?;
    let mut row2 = Array2::<f64>::zeros([n, n]);
    for b in 0..n {
        for a in 0..n {
            row2[[b, a]] = dmu.comps[[b, a]] + bval * g[[a, b]] * tau - rho[[a, b]];
        }
    }

    let rho_field = ExprField::matrix(section.rho.clone(), [Slot::Down, Slot::Down]);
    let drho = geom.eval_field(&geom.cov_derivative(&rho_field), point)?;
    let mut row3 = Array3::<f64>::zeros([n, n, n]);
    for b in 0..n {
        for c in 0..n {
            for a in 0..n {
                row3[[b, c, a]] = drho.comps[[b, c, a]]
                    + bval * (g[[a, b]] * mu[c] + g[[a, c]] * mu[b]);
            }
        }
    }
    Ok((row1, row2, row3))
}

/// max slot component of the dual connection derivative.
pub fn dual_parallel_residual(
    geom: &SymbolicGeometry,
    section: &DualSection,
    b_scalar: &Expr,
    point: &[f64],
) -> Result<f64> {
    let (r1, r2, r3) = dual_derivative(geom, section, b_scalar, point)?;
    let mut worst = r1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    worst = r2.iter().fold(worst, |m, v| m.max(v.abs()));
    worst = r3.iter().fold(worst, |m, v| m.max(v.abs()));
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::nullity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere_section(geom: &SymbolicGeometry) -> StandardSection {
        // The gradient of cos t1 is concircular on the round sphere, and
        // pairs with cos t1 itself into a parallel tractor.
        let f = Expr::symbol("t1").cos();
        let grad = geom.grad_up(&f);
        let n = geom.dim();
        StandardSection {
            nu: Array1::from_shape_fn(n, |i| grad.comps[[i]].clone()),
            rho: f,
        }
    }

    #[test]
    fn normal_connection_has_parallel_sections_on_the_sphere() {
        let spec = catalog::round_sphere(3).unwrap().metric;
        let geom = SymbolicGeometry::new(&spec);
        let conn = StandardConnection::new(geom.clone(), ConnectionKind::Normal, None).unwrap();
        let section = sphere_section(&geom);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in spec.chart.sample_many(6, &mut rng) {
            let r = conn.parallel_residual(&section, &p).unwrap();
            assert!(r < 1e-9, "residual {r} at {p:?}");
        }
        // On the sphere P = g and B = 1, so all three connection kinds
        // coincide; the interpolated residuals must agree.
        let b = Expr::one();
        for kind in [ConnectionKind::Nullity, ConnectionKind::Interpolated(0.37)] {
            let c = StandardConnection::new(geom.clone(), kind, Some(&b)).unwrap();
            let p = spec.chart.center();
            assert!(c.parallel_residual(&section, &p).unwrap() < 1e-9);
        }
    }

    #[test]
    fn nullity_connection_has_parallel_sections_on_warped_products() {
        let entry = catalog::lookup("warped", &Default::default()).unwrap();
        let geom = SymbolicGeometry::new(&entry.metric);
        let f = entry.warp_f.clone().unwrap();
        let n = geom.dim();
        // (f ∂_t, −f′) is parallel for the B g connection.
        let mut nu = Array1::from_elem(n, Expr::zero());
        nu[0] = f.clone();
        let section = StandardSection {
            nu,
            rho: f.differentiate("t").neg(),
        };
        let b = entry.b.clone().unwrap();
        let conn = StandardConnection::new(geom, ConnectionKind::Nullity, Some(&b)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for p in entry.metric.chart.sample_many(6, &mut rng) {
            let r = conn.parallel_residual(&section, &p).unwrap();
            assert!(r < 1e-9, "residual {r} at {p:?}");
        }
    }

    #[test]
    fn transport_reconstructs_parallel_sections() {
        let spec = catalog::round_sphere(3).unwrap().metric;
        let geom = SymbolicGeometry::new(&spec);
        let conn = StandardConnection::new(geom.clone(), ConnectionKind::Normal, None).unwrap();
        let section = sphere_section(&geom);
        let from = vec![1.0, 1.2, 0.8];
        let to = vec![1.5, 0.9, 1.4];
        let miss = conn.transport_mismatch(&section, &from, &to, 128).unwrap();
        assert!(miss < 1e-8, "transport mismatch {miss}");
    }

    #[test]
    fn loop_deficit_matches_z_on_warped_products() {
        let entry = catalog::lookup("warped", &Default::default()).unwrap();
        let geom = SymbolicGeometry::new(&entry.metric);
        let b = entry.b.clone().unwrap();
        let conn = StandardConnection::new(geom, ConnectionKind::Nullity, Some(&b)).unwrap();
        let point = entry.metric.chart.center();
        let report = nullity::report_at(&entry.metric, &point).unwrap();
        let worst =
            loop_nullity_certificate(&conn, &report, &point, &[1e-2, 5e-3, 2.5e-3], 8).unwrap();
        assert!(worst < 1e-4, "loop mismatch {worst}");
    }

    #[test]
    fn dual_splitting_detects_third_order_solutions() {
        let spec = catalog::round_sphere(3).unwrap().metric;
        let geom = SymbolicGeometry::new(&spec);
        let b = Expr::one();
        // cos² t1 solves the third-order equation with B₀ = 1 ...
        let good = Expr::symbol("t1").cos().powi(2);
        let section = split_dual(&geom, &good, &b);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in spec.chart.sample_many(6, &mut rng) {
            let r = dual_parallel_residual(&geom, &section, &b, &p).unwrap();
            assert!(r < 1e-9, "residual {r} at {p:?}");
        }
        // ... while cos t1 (a second-order solution) does not.
        let bad = Expr::symbol("t1").cos();
        let section = split_dual(&geom, &bad, &b);
        let p = spec.chart.center();
        let r = dual_parallel_residual(&geom, &section, &b, &p).unwrap();
        assert!(r > 1e-3, "expected nonzero residual, got {r}");
    }
}
