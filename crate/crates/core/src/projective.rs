//! Projective changes between Levi-Civita connections. Two metrics on one
//! chart are projectively equivalent when their connections share the same
//! unparametrized geodesics, which pins down a one-form Υ_a = ∂_a Υ built
//! from the metric volume ratio. This module constructs Υ symbolically,
//! certifies the connection and compatibility identities, and carries the
//! solution tensor a^i_j of the metrisability equation attached to a pair.

use std::sync::Arc;

use ndarray::{Array2, Array3};

use crate::chart::MetricSpec;
use crate::curvature::pack_at;
use crate::expr::Expr;
use crate::nullity;
use crate::tensor::{ExprField, Slot, SymbolicGeometry};
use crate::{Error, Result};

/// A metric g with a projective partner ḡ on the same chart, plus the
/// symbolic data of the change: Υ, Υ_a, a^i_j = e^{2Υ} ḡ^{iq} g_{qj}
/// and a^{ij} = e^{2Υ} ḡ^{ij}.
pub struct ProjectivePair {
    pub geom: Arc<SymbolicGeometry>,
    pub partner_geom: Arc<SymbolicGeometry>,
    pub upsilon: Expr,
    /// Υ_a = ∂_a Υ, one entry per coordinate.
    pub dupsilon: Vec<Expr>,
    /// a^i_j, the endomorphism form of the metrisability solution.
    pub solution_mixed: Array2<Expr>,
    /// a^{ij}, the contravariant form.
    pub solution_upper: Array2<Expr>,
}

impl ProjectivePair {
    pub fn new(spec: &MetricSpec, partner: &MetricSpec) -> Result<ProjectivePair> {
        if spec.dim() != partner.dim() || spec.chart.coords != partner.chart.coords {
            return Err(Error::UnsupportedCombination(
                "paired metrics must share one chart".into(),
            ));
        }
        let n = spec.dim();
        let geom = SymbolicGeometry::new(spec);
        let partner_geom = SymbolicGeometry::new(partner);
        // Υ = (1/(2(n+1))) log|det ḡ / det g|; squaring the ratio keeps the
        // logarithm defined for either metric signature.
        let ratio = Expr::div(partner_geom.det.clone(), geom.det.clone());
        let upsilon = Expr::mul(
            Expr::constant(0.25 / (n as f64 + 1.0)),
            Expr::mul(ratio.clone(), ratio).log(),
        );
        let dupsilon: Vec<Expr> = spec
            .chart
            .coords
            .iter()
            .map(|c| upsilon.differentiate(c))
            .collect();
        let scale = Expr::mul(Expr::constant(2.0), upsilon.clone()).exp();
        let solution_upper = Array2::from_shape_fn([n, n], |(i, j)| {
            Expr::mul(scale.clone(), partner_geom.ginv[[i, j]].clone())
        });
        let solution_mixed = Array2::from_shape_fn([n, n], |(i, j)| {
            let mut acc = Expr::zero();
            for q in 0..n {
                acc = Expr::add(
                    acc,
                    Expr::mul(solution_upper[[i, q]].clone(), spec.g[[q, j]].clone()),
                );
            }
            acc
        });
        Ok(ProjectivePair {
            geom,
            partner_geom,
            upsilon,
            dupsilon,
            solution_mixed,
            solution_upper,
        })
    }

    fn dim(&self) -> usize {
        self.geom.dim()
    }

    fn eval_dupsilon(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.dupsilon
            .iter()
            .map(|e| self.geom.spec.eval(e, point))
            .collect()
    }

    /// max |Γ̄^i_jk − Γ^i_jk − δ^i_k Υ_j − δ^i_j Υ_k| at a point. Zero
    /// exactly when the two connections are projectively related by Υ.
    pub fn connection_residual(&self, point: &[f64]) -> Result<f64> {
        let n = self.dim();
        let ups = self.eval_dupsilon(point)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let gbar = self
                        .partner_geom
                        .spec
                        .eval(&self.partner_geom.gamma[[i, j, k]], point)?;
                    let mut rhs = self.geom.spec.eval(&self.geom.gamma[[i, j, k]], point)?;
                    if i == k {
                        rhs += ups[j];
                    }
                    if i == j {
                        rhs += ups[k];
                    }
                    worst = worst.max((gbar - rhs).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Residual of ∇^g_k ḡ_ij = 2 ḡ_ij Υ_k + ḡ_ik Υ_j + ḡ_jk Υ_i, the
    /// derivative of the partner metric in the unbarred connection.
    pub fn compatibility_residual(&self, point: &[f64]) -> Result<f64> {
        let n = self.dim();
        let ups = self.eval_dupsilon(point)?;
        let gbar_field = ExprField::matrix(
            self.partner_geom.spec.g.clone(),
            [Slot::Down, Slot::Down],
        );
        let nabla = self.geom.cov_derivative(&gbar_field);
        let nabla = self.geom.eval_field(&nabla, point)?;
        let gbar = crate::chart::metric_jet(&self.partner_geom.spec, point)?.g;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = nabla.comps[[i, j, k]];
                    let rhs = 2.0 * gbar[[i, j]] * ups[k]
                        + gbar[[i, k]] * ups[j]
                        + gbar[[j, k]] * ups[i];
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        Ok(worst)
    }

    /// ∇^g_b Υ_a evaluated at a point, indexed `[a, b]`.
    fn hessian_upsilon(&self, point: &[f64]) -> Result<Array2<f64>> {
        let field = ExprField::vector(
            ndarray::Array1::from_vec(self.dupsilon.clone()),
            Slot::Down,
        );
        let hess = self.geom.cov_derivative(&field);
        let t = self.geom.eval_field(&hess, point)?;
        let n = self.dim();
        Ok(Array2::from_shape_fn([n, n], |(a, b)| t.comps[[a, b]]))
    }

    /// Residual of the Schouten transformation
    /// P̄_ab = P_ab − ∇_a Υ_b + Υ_a Υ_b under the projective change.
    pub fn schouten_residual(&self, point: &[f64]) -> Result<f64> {
        let n = self.dim();
        let ups = self.eval_dupsilon(point)?;
        let hess = self.hessian_upsilon(point)?;
        let pack = pack_at(&self.geom.spec, point)?;
        let pack_bar = pack_at(&self.partner_geom.spec, point)?;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let rhs = pack.schouten[[a, b]] - hess[[a, b]] + ups[a] * ups[b];
                worst = worst.max((pack_bar.schouten[[a, b]] - rhs).abs());
            }
        }
        Ok(worst)
    }

    /// Nullity constants of both metrics at a point, with the residuals
    /// connecting them: B̄ ḡ_ab = B g_ab − ∇_a Υ_b + Υ_a Υ_b, and the
    /// invariance φ̄_ab = φ_ab of the fundamental tensor.
    pub fn nullity_transfer(&self, point: &[f64]) -> Result<NullityTransfer> {
        let n = self.dim();
        let ups = self.eval_dupsilon(point)?;
        let hess = self.hessian_upsilon(point)?;
        let report = nullity::report_at(&self.geom.spec, point)?;
        let report_bar = nullity::report_at(&self.partner_geom.spec, point)?;
        let g = crate::chart::metric_jet(&self.geom.spec, point)?.g;
        let gbar = crate::chart::metric_jet(&self.partner_geom.spec, point)?.g;
        let mut b_residual = 0.0f64;
        let mut phi_residual = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let rhs = report.b * g[[a, b]] - hess[[a, b]] + ups[a] * ups[b];
                b_residual = b_residual.max((report_bar.b * gbar[[a, b]] - rhs).abs());
                phi_residual =
                    phi_residual.max((report_bar.phi[[a, b]] - report.phi[[a, b]]).abs());
            }
        }
        Ok(NullityTransfer {
            b: report.b,
            b_partner: report_bar.b,
            b_residual,
            phi_residual,
        })
    }

    /// Residuals of the density bookkeeping of the solution tensor:
    /// det(a^i_j) e^{2Υ} = 1, and λ_i ≡ −Υ_s a^s_i = ½ ∂_i (g_pq a^{pq}).
    pub fn density_residuals(&self, point: &[f64]) -> Result<DensityResiduals> {
        let n = self.dim();
        let spec = &self.geom.spec;
        let ups = self.eval_dupsilon(point)?;
        let upsilon = spec.eval(&self.upsilon, point)?;
        let mut a_mixed = Array2::<f64>::zeros([n, n]);
        for i in 0..n {
            for j in 0..n {
                a_mixed[[i, j]] = spec.eval(&self.solution_mixed[[i, j]], point)?;
            }
        }
        let det = nalgebra::DMatrix::from_fn(n, n, |i, j| a_mixed[[i, j]]).determinant();
        let determinant = (det * (2.0 * upsilon).exp() - 1.0).abs();

        // tr = g_pq a^{pq} as one symbolic scalar, then its gradient.
        let mut trace = Expr::zero();
        for p in 0..n {
            for q in 0..n {
                trace = Expr::add(
                    trace,
                    Expr::mul(spec.g[[p, q]].clone(), self.solution_upper[[p, q]].clone()),
                );
            }
        }
        let mut lambda_gradient = 0.0f64;
        for i in 0..n {
            let mut lambda = 0.0;
            for s in 0..n {
                lambda -= ups[s] * a_mixed[[s, i]];
            }
            let dtr = spec.eval(&trace.differentiate(&spec.chart.coords[i]), point)?;
            lambda_gradient = lambda_gradient.max((lambda - 0.5 * dtr).abs());
        }
        Ok(DensityResiduals {
            determinant,
            lambda_gradient,
        })
    }

    /// Γ^i_jk of g and ḡ as numeric tables, for callers building transport
    /// operators along the pair.
    pub fn gammas_at(&self, point: &[f64]) -> Result<(Array3<f64>, Array3<f64>)> {
        let n = self.dim();
        let mut a = Array3::<f64>::zeros([n, n, n]);
        let mut b = Array3::<f64>::zeros([n, n, n]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    a[[i, j, k]] = self.geom.spec.eval(&self.geom.gamma[[i, j, k]], point)?;
                    b[[i, j, k]] = self
                        .partner_geom
                        .spec
                        .eval(&self.partner_geom.gamma[[i, j, k]], point)?;
                }
            }
        }
        Ok((a, b))
    }
}

/// Nullity constants of a pair with the residuals of their transfer law.
#[derive(Clone, Copy, Debug)]
pub struct NullityTransfer {
    pub b: f64,
    pub b_partner: f64,
    pub b_residual: f64,
    pub phi_residual: f64,
}

/// Residuals of the volume and trace identities of a solution tensor.
#[derive(Clone, Copy, Debug)]
pub struct DensityResiduals {
    pub determinant: f64,
    pub lambda_gradient: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair_for(name: &str) -> (ProjectivePair, catalog::CatalogEntry) {
        let entry = catalog::lookup(name, &Default::default()).unwrap();
        let pair = ProjectivePair::new(&entry.metric, entry.partner.as_ref().unwrap()).unwrap();
        (pair, entry)
    }

    #[test]
    fn levi_civita_pair_identities() {
        let (pair, _) = pair_for("levi_civita_pair");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in pair.geom.spec.chart.sample_many(8, &mut rng) {
            assert!(pair.connection_residual(&p).unwrap() < 1e-8, "c at {p:?}");
            assert!(pair.compatibility_residual(&p).unwrap() < 1e-8);
            assert!(pair.schouten_residual(&p).unwrap() < 1e-8);
            let d = pair.density_residuals(&p).unwrap();
            assert!(d.determinant < 1e-9, "det: {}", d.determinant);
            assert!(d.lambda_gradient < 1e-9, "lambda: {}", d.lambda_gradient);
        }
    }

    #[test]
    fn upsilon_is_antisymmetric_in_the_pair() {
        let (pair, entry) = pair_for("levi_civita_pair");
        let reverse =
            ProjectivePair::new(entry.partner.as_ref().unwrap(), &entry.metric).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in pair.geom.spec.chart.sample_many(5, &mut rng) {
            let fwd = pair.geom.spec.eval(&pair.upsilon, &p).unwrap();
            let rev = reverse.geom.spec.eval(&reverse.upsilon, &p).unwrap();
            assert!((fwd + rev).abs() < 1e-10);
        }
    }

    #[test]
    fn warped_pair_nullity_transfer() {
        let (pair, entry) = pair_for("warped_pair");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in pair.geom.spec.chart.sample_many(8, &mut rng) {
            assert!(pair.connection_residual(&p).unwrap() < 1e-7);
            assert!(pair.compatibility_residual(&p).unwrap() < 1e-7);
            let t = pair.nullity_transfer(&p).unwrap();
            assert!(t.b_residual < 1e-6, "Btrans at {p:?}: {}", t.b_residual);
            assert!(t.phi_residual < 1e-6, "phi at {p:?}: {}", t.phi_residual);
            // Closed forms for both constants.
            let b_closed = crate::nullity::warped_b_check(
                entry.warp_f.as_ref().unwrap(),
                p[0],
                t.b,
            )
            .unwrap();
            assert!(b_closed < 1e-7);
            let bbar = entry.partner_b.as_ref().unwrap();
            let bbar_val = pair
                .geom
                .spec
                .eval(bbar, &p)
                .unwrap();
            assert!((t.b_partner - bbar_val).abs() < 1e-6, "Bbar at {p:?}");
        }
    }

    #[test]
    fn catalog_solutions_match_pair_construction() {
        for name in ["warped_pair", "product_pair"] {
            let (pair, entry) = pair_for(name);
            let sol = entry.solution.as_ref().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let n = pair.geom.dim();
            for p in pair.geom.spec.chart.sample_many(5, &mut rng) {
                for i in 0..n {
                    for j in 0..n {
                        let lhs = pair
                            .geom
                            .spec
                            .eval(&pair.solution_mixed[[i, j]], &p)
                            .unwrap();
                        let rhs = pair.geom.spec.eval(&sol[[i, j]], &p).unwrap();
                        assert!(
                            (lhs - rhs).abs() < 1e-8,
                            "{name} a^{i}_{j} at {p:?}: {lhs} vs {rhs}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn unrelated_metrics_fail_the_connection_test() {
        let flat = catalog::flat(3).unwrap().metric;
        let warped = catalog::lookup("warped", &Default::default()).unwrap().metric;
        // Rebuild the warped metric on flat coordinates so charts agree.
        let coords = flat.chart.coords.clone();
        let t = Expr::symbol(&coords[0]);
        let f2 = {
            let f = Expr::constant(2.0) + t.sin();
            Expr::mul(f.clone(), f)
        };
        let mut g = Array2::from_elem([3, 3], Expr::zero());
        g[[0, 0]] = Expr::one();
        g[[1, 1]] = f2.clone();
        g[[2, 2]] = f2;
        let chart = crate::chart::Chart::new(
            coords,
            warped.chart.bounds.iter().map(|b| *b).collect(),
        )
        .unwrap();
        let respec = MetricSpec::new(chart, g, vec![]).unwrap();
        let pair = ProjectivePair::new(&flat, &respec).unwrap();
        let p = flat.chart.center();
        assert!(pair.connection_residual(&p).unwrap() > 1e-3);
    }
}
