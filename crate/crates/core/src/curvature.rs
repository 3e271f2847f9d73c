//! Curvature of the Levi-Civita connection at a point.
//!
//! Sign conventions: [∇_l, ∇_k] v^j = R^j_{ilk} v^i, so
//! R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{ks} Γ^s_{lj} − Γ^i_{ls} Γ^s_{kj},
//! Ric_jk = R^a_{jak}, and on the unit sphere Ric = +(n−1)g. The projective
//! Schouten tensor is P = Ric/(n−1); the projective Weyl tensor
//! W^i_{jkl} = R^i_{jkl} + δ^i_l P_{jk} − δ^i_k P_{jl} is trace-free on the
//! upper index; the Cotton tensor is C_{cab} = ∇_a P_{bc} − ∇_b P_{ac}.
//!
//! Everything here is built from an order-3 metric jet; all derivatives of
//! curvature quantities are exact (symbolic differentiation happened inside
//! the jet), never finite differences.

use ndarray::{Array2, Array3, Array4, Array5};

use crate::chart::{metric_jet, MetricJet, MetricSpec};
use crate::expr::Expr;
use crate::tensor::{ExprField, SymbolicGeometry, Tensor};
use crate::{Error, Result};

/// All curvature-derived tensors at one point.
#[derive(Clone, Debug)]
pub struct CurvaturePack {
    pub point: Vec<f64>,
    pub g: Array2<f64>,
    pub ginv: Array2<f64>,
    /// gamma[[i,j,k]] = Γ^i_jk
    pub gamma: Array3<f64>,
    /// dgamma[[i,j,k,l]] = ∂_l Γ^i_jk
    pub dgamma: Array4<f64>,
    /// riemann[[i,j,k,l]] = R^i_jkl
    pub riemann: Array4<f64>,
    /// driemann[[i,j,k,l,m]] = ∂_m R^i_jkl
    pub driemann: Array5<f64>,
    pub ricci: Array2<f64>,
    pub scal: f64,
    /// Projective Schouten P = Ric/(n−1).
    pub schouten: Array2<f64>,
    /// dschouten[[b,c,a]] = ∂_a P_bc
    pub dschouten: Array3<f64>,
    /// covschouten[[b,c,a]] = ∇_a P_bc
    pub covschouten: Array3<f64>,
    /// weyl[[i,j,k,l]] = W^i_jkl
    pub weyl: Array4<f64>,
    /// cotton[[c,a,b]] = C_cab = ∇_a P_bc − ∇_b P_ac
    pub cotton: Array3<f64>,
    /// k_tensor[[i,j,k,l]] = K^i_jkl = δ^i_l g_jk − δ^i_k g_jl
    pub k_tensor: Array4<f64>,
    /// Conformal Schouten (n ≥ 3 only).
    conformal_schouten: Option<Array2<f64>>,
    /// Conformal Weyl C^i_jkl (n ≥ 3 only).
    conformal_weyl: Option<Array4<f64>>,
}

fn kron(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

impl CurvaturePack {
    pub fn new(jet: &MetricJet) -> CurvaturePack {
        let n = jet.dim();
        let g = jet.g.clone();
        let ginv = jet.ginv.clone();

        // ∂ g^{ij} = −g^{ia} ∂g_ab g^{bj}; second derivative by the product
        // rule on that.
        let mut dginv = Array3::zeros([n, n, n]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            acc -= ginv[[i, a]] * jet.dg[[a, b, k]] * ginv[[b, j]];
                        }
                    }
                    dginv[[i, j, k]] = acc;
                }
            }
        }
        let mut ddginv = Array4::zeros([n, n, n, n]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = 0.0;
                        for a in 0..n {
                            for b in 0..n {
                                acc -= dginv[[i, a, l]] * jet.dg[[a, b, k]] * ginv[[b, j]]
                                    + ginv[[i, a]] * jet.ddg[[a, b, k, l]] * ginv[[b, j]]
                                    + ginv[[i, a]] * jet.dg[[a, b, k]] * dginv[[b, j, l]];
                            }
                        }
                        ddginv[[i, j, k, l]] = acc;
                    }
                }
            }
        }

        // First-kind symbols c[[s,j,k]] = (1/2)(∂_j g_sk + ∂_k g_sj − ∂_s g_jk)
        // and their first and second partials.
        let mut c1 = Array3::zeros([n, n, n]);
        let mut dc1 = Array4::zeros([n, n, n, n]);
        let mut ddc1 = Array5::zeros([n, n, n, n, n]);
        for s in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c1[[s, j, k]] =
                        0.5 * (jet.dg[[s, k, j]] + jet.dg[[s, j, k]] - jet.dg[[j, k, s]]);
                    for l in 0..n {
                        dc1[[s, j, k, l]] = 0.5
                            * (jet.ddg[[s, k, j, l]] + jet.ddg[[s, j, k, l]]
                                - jet.ddg[[j, k, s, l]]);
                        for m in 0..n {
                            ddc1[[s, j, k, l, m]] = 0.5
                                * (jet.dddg[[s, k, j, l, m]] + jet.dddg[[s, j, k, l, m]]
                                    - jet.dddg[[j, k, s, l, m]]);
                        }
                    }
                }
            }
        }

        let mut gamma = Array3::zeros([n, n, n]);
        let mut dgamma = Array4::zeros([n, n, n, n]);
        let mut ddgamma = Array5::zeros([n, n, n, n, n]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for s in 0..n {
                        acc += ginv[[i, s]] * c1[[s, j, k]];
                    }
                    gamma[[i, j, k]] = acc;
                    for l in 0..n {
                        let mut acc = 0.0;
                        for s in 0..n {
                            acc += dginv[[i, s, l]] * c1[[s, j, k]]
                                + ginv[[i, s]] * dc1[[s, j, k, l]];
                        }
                        dgamma[[i, j, k, l]] = acc;
                        for m in 0..n {
                            let mut acc = 0.0;
                            for s in 0..n {
                                acc += ddginv[[i, s, l, m]] * c1[[s, j, k]]
                                    + dginv[[i, s, l]] * dc1[[s, j, k, m]]
                                    + dginv[[i, s, m]] * dc1[[s, j, k, l]]
                                    + ginv[[i, s]] * ddc1[[s, j, k, l, m]];
                            }
                            ddgamma[[i, j, k, l, m]] = acc;
                        }
                    }
                }
            }
        }

        let mut riemann = Array4::zeros([n, n, n, n]);
        let mut driemann = Array5::zeros([n, n, n, n, n]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = dgamma[[i, l, j, k]] - dgamma[[i, k, j, l]];
                        for s in 0..n {
                            acc += gamma[[i, k, s]] * gamma[[s, l, j]]
                                - gamma[[i, l, s]] * gamma[[s, k, j]];
                        }
                        riemann[[i, j, k, l]] = acc;
                        for m in 0..n {
                            let mut acc =
                                ddgamma[[i, l, j, k, m]] - ddgamma[[i, k, j, l, m]];
                            for s in 0..n {
                                acc += dgamma[[i, k, s, m]] * gamma[[s, l, j]]
                                    + gamma[[i, k, s]] * dgamma[[s, l, j, m]]
                                    - dgamma[[i, l, s, m]] * gamma[[s, k, j]]
                                    - gamma[[i, l, s]] * dgamma[[s, k, j, m]];
                            }
                            driemann[[i, j, k, l, m]] = acc;
                        }
                    }
                }
            }
        }

        let mut ricci = Array2::<f64>::zeros([n, n]);
        let mut dricci = Array3::<f64>::zeros([n, n, n]);
        for j in 0..n {
            for k in 0..n {
                for a in 0..n {
                    ricci[[j, k]] += riemann[[a, j, a, k]];
                    for m in 0..n {
                        dricci[[j, k, m]] += driemann[[a, j, a, k, m]];
                    }
                }
            }
        }
        let mut scal = 0.0;
        for j in 0..n {
            for k in 0..n {
                scal += ginv[[j, k]] * ricci[[j, k]];
            }
        }

        let denom = (n - 1) as f64;
        let schouten = ricci.mapv(|v| v / denom);
        let mut dschouten = Array3::zeros([n, n, n]);
        let mut covschouten = Array3::zeros([n, n, n]);
        for b in 0..n {
            for c in 0..n {
                for a in 0..n {
                    dschouten[[b, c, a]] = dricci[[b, c, a]] / denom;
                    let mut acc = dricci[[b, c, a]] / denom;
                    for s in 0..n {
                        acc -= gamma[[s, b, a]] * schouten[[s, c]]
                            + gamma[[s, c, a]] * schouten[[b, s]];
                    }
                    covschouten[[b, c, a]] = acc;
                }
            }
        }
        let mut cotton = Array3::zeros([n, n, n]);
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    cotton[[c, a, b]] = covschouten[[b, c, a]] - covschouten[[a, c, b]];
                }
            }
        }

        let mut weyl = Array4::zeros([n, n, n, n]);
        let mut k_tensor = Array4::zeros([n, n, n, n]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        weyl[[i, j, k, l]] = riemann[[i, j, k, l]]
                            + kron(i, l) * schouten[[j, k]]
                            - kron(i, k) * schouten[[j, l]];
                        k_tensor[[i, j, k, l]] =
                            kron(i, l) * g[[j, k]] - kron(i, k) * g[[j, l]];
                    }
                }
            }
        }

        let (conformal_schouten, conformal_weyl) = if n >= 3 {
            let cdenom = (n - 2) as f64;
            let pc = Array2::from_shape_fn([n, n], |(i, j)| {
                (ricci[[i, j]] - scal / (2.0 * (n as f64 - 1.0)) * g[[i, j]]) / cdenom
            });
            // Lowered Riemann.
            let mut rlow = Array4::zeros([n, n, n, n]);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let mut acc = 0.0;
                            for s in 0..n {
                                acc += g[[i, s]] * riemann[[s, j, k, l]];
                            }
                            rlow[[i, j, k, l]] = acc;
                        }
                    }
                }
            }
            let mut cup = Array4::zeros([n, n, n, n]);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let clow = rlow[[i, j, k, l]]
                                - (pc[[i, k]] * g[[j, l]] - pc[[i, l]] * g[[j, k]]
                                    + pc[[j, l]] * g[[i, k]]
                                    - pc[[j, k]] * g[[i, l]]);
                            // Accumulate raised first index directly below.
                            cup[[i, j, k, l]] = clow;
                        }
                    }
                }
            }
            let mut craised = Array4::zeros([n, n, n, n]);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let mut acc = 0.0;
                            for s in 0..n {
                                acc += ginv[[i, s]] * cup[[s, j, k, l]];
                            }
                            craised[[i, j, k, l]] = acc;
                        }
                    }
                }
            }
            (Some(pc), Some(craised))
        } else {
            (None, None)
        };

        CurvaturePack {
            point: jet.point.clone(),
            g,
            ginv,
            gamma,
            dgamma,
            riemann,
            driemann,
            ricci,
            scal,
            schouten,
            dschouten,
            covschouten,
            weyl,
            cotton,
            k_tensor,
            conformal_schouten,
            conformal_weyl,
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn conformal_schouten(&self) -> Result<&Array2<f64>> {
        self.conformal_schouten
            .as_ref()
            .ok_or(Error::DimensionTooSmall(self.dim()))
    }

    pub fn conformal_weyl(&self) -> Result<&Array4<f64>> {
        self.conformal_weyl
            .as_ref()
            .ok_or(Error::DimensionTooSmall(self.dim()))
    }

    /// ∇_c W^c_{dab}, computed from the exact ∂R and ∂P slots.
    pub fn div_weyl(&self) -> Array3<f64> {
        let n = self.dim();
        // ∂_m W^i_jkl.
        let mut dweyl = Array5::zeros([n, n, n, n, n]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        for m in 0..n {
                            dweyl[[i, j, k, l, m]] = self.driemann[[i, j, k, l, m]]
                                + kron(i, l) * self.dschouten[[j, k, m]]
                                - kron(i, k) * self.dschouten[[j, l, m]];
                        }
                    }
                }
            }
        }
        let mut out = Array3::zeros([n, n, n]);
        for d in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut acc = 0.0;
                    for c in 0..n {
                        acc += dweyl[[c, d, a, b, c]];
                        for s in 0..n {
                            acc += self.gamma[[c, s, c]] * self.weyl[[s, d, a, b]]
                                - self.gamma[[s, d, c]] * self.weyl[[c, s, a, b]]
                                - self.gamma[[s, a, c]] * self.weyl[[c, d, s, b]]
                                - self.gamma[[s, b, c]] * self.weyl[[c, d, a, s]];
                        }
                    }
                    out[[d, a, b]] = acc;
                }
            }
        }
        out
    }

    /// Max |W^a_{bcd}| over all single traces of the upper index.
    pub fn weyl_trace_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        // Contract upper with each lower slot, and the metric trace g^{bc}.
        for x in 0..n {
            for y in 0..n {
                let mut t1 = 0.0; // W^a_{a x y}
                let mut t2 = 0.0; // W^a_{x a y}
                let mut t3 = 0.0; // W^a_{x y a}
                for a in 0..n {
                    t1 += self.weyl[[a, a, x, y]];
                    t2 += self.weyl[[a, x, a, y]];
                    t3 += self.weyl[[a, x, y, a]];
                }
                worst = worst.max(t1.abs()).max(t2.abs()).max(t3.abs());
            }
        }
        worst
    }

    /// Max |R^i_{[jkl]}| (first Bianchi identity).
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.riemann[[i, j, k, l]]
                            + self.riemann[[i, k, l, j]]
                            + self.riemann[[i, l, j, k]];
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        worst
    }

    /// Max |R_ijkl − R_klij| on the lowered Riemann tensor.
    pub fn pair_symmetry_residual(&self) -> f64 {
        let n = self.dim();
        let mut rlow = Array4::zeros([n, n, n, n]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = 0.0;
                        for s in 0..n {
                            acc += self.g[[i, s]] * self.riemann[[s, j, k, l]];
                        }
                        rlow[[i, j, k, l]] = acc;
                    }
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst
                            .max((rlow[[i, j, k, l]] - rlow[[k, l, i, j]]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Residual of the identity relating the projective and conformal Weyl
    /// tensors through the trace-free projective Schouten tensor:
    /// (n−2)W = (n−2)C + (δ^i_k P̊_lj − δ^i_l P̊_kj) + (n−1)(P̊^i_k g_jl − P̊^i_l g_jk).
    pub fn em_identity_residual(&self) -> Result<f64> {
        let n = self.dim();
        let cw = self.conformal_weyl()?;
        let j_trace: f64 = {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += self.ginv[[a, b]] * self.schouten[[a, b]];
                }
            }
            acc
        };
        let p0 = Array2::from_shape_fn([n, n], |(i, j)| {
            self.schouten[[i, j]] - j_trace / n as f64 * self.g[[i, j]]
        });
        let mut p0up = Array2::zeros([n, n]);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for s in 0..n {
                    acc += self.ginv[[i, s]] * p0[[s, j]];
                }
                p0up[[i, j]] = acc;
            }
        }
        let nm2 = (n - 2) as f64;
        let nm1 = (n - 1) as f64;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let lhs = nm2 * self.weyl[[i, j, k, l]];
                        let rhs = nm2 * cw[[i, j, k, l]]
                            + (kron(i, k) * p0[[l, j]] - kron(i, l) * p0[[k, j]])
                            + nm1
                                * (p0up[[i, k]] * self.g[[j, l]]
                                    - p0up[[i, l]] * self.g[[j, k]]);
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Convenience: jet + pack at a point.
pub fn pack_at(spec: &MetricSpec, point: &[f64]) -> Result<CurvaturePack> {
    Ok(CurvaturePack::new(&metric_jet(spec, point)?))
}

/// Covariant derivative of a symbolic field, evaluated at a point.
pub fn covariant_derivative(
    geom: &SymbolicGeometry,
    field: &ExprField,
    point: &[f64],
) -> Result<Tensor> {
    let d = geom.cov_derivative(field);
    geom.eval_field(&d, point)
}

/// Residuals of the conformal Ricci transformation for ĝ = e^{2ψ} g.
#[derive(Clone, Copy, Debug)]
pub struct ConformalResidual {
    pub ricci: f64,
    pub scalar: f64,
}

impl ConformalResidual {
    pub fn max(&self) -> f64 {
        self.ricci.max(self.scalar)
    }
}

/// Checks the conformal transformation of Ricci and scalar curvature for
/// ĝ = e^{2ψ} g against a direct curvature computation of ĝ:
/// R̂_ij = R_ij − (n−2)(ψ_{,ij} − ψ_i ψ_j) − (Δ₂ + (n−2)Δ₁) g_ij and
/// Scal(ĝ) = e^{−2ψ}(Scal − 2(n−1)Δ₂ − (n−1)(n−2)Δ₁), with ψ_{,ij} the
/// g-covariant Hessian, Δ₂ its g-trace and Δ₁ = |dψ|²_g.
pub fn conformal_ricci_check(
    spec: &MetricSpec,
    psi: &Expr,
    point: &[f64],
) -> Result<ConformalResidual> {
    let n = spec.dim();
    let pack = pack_at(spec, point)?;

    let conf = Expr::mul(Expr::constant(2.0), psi.clone()).exp();
    let ghat = spec.g.mapv(|e| Expr::mul(conf.clone(), e));
    let hat_spec = MetricSpec::new(spec.chart.clone(), ghat, spec.params.clone())?;
    let hat_pack = pack_at(&hat_spec, point)?;

    // ψ derivatives at the point, Hessian with g's connection.
    let scope = spec.scope(point);
    let names = &spec.chart.coords;
    let mut dpsi = vec![0.0; n];
    let mut hess = Array2::zeros([n, n]);
    for i in 0..n {
        let di = psi.differentiate(&names[i]);
        dpsi[i] = di.eval(&scope)?;
        for j in 0..n {
            hess[[i, j]] = di.differentiate(&names[j]).eval(&scope)?;
        }
    }
    for i in 0..n {
        for j in 0..n {
            for s in 0..n {
                let correction = pack.gamma[[s, i, j]] * dpsi[s];
                hess[[i, j]] -= correction;
            }
        }
    }
    let mut d2 = 0.0;
    let mut d1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            d2 += pack.ginv[[i, j]] * hess[[i, j]];
            d1 += pack.ginv[[i, j]] * dpsi[i] * dpsi[j];
        }
    }

    let nm2 = (n - 2) as f64;
    let mut ricci_res = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let rhs = pack.ricci[[i, j]]
                - nm2 * (hess[[i, j]] - dpsi[i] * dpsi[j])
                - (d2 + nm2 * d1) * pack.g[[i, j]];
            ricci_res = ricci_res.max((hat_pack.ricci[[i, j]] - rhs).abs());
        }
    }
    let epsi = psi.eval(&scope)?;
    let nm1 = (n - 1) as f64;
    let rhs_scal = (-2.0 * epsi).exp() * (pack.scal - 2.0 * nm1 * d2 - nm1 * nm2 * d1);
    let scalar_res = (hat_pack.scal - rhs_scal).abs();
    Ok(ConformalResidual {
        ricci: ricci_res,
        scalar: scalar_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::parse::parse_expr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_pack_is_zero() {
        let spec = catalog::flat(3).unwrap().metric;
        let pack = pack_at(&spec, &[0.3, -0.1, 0.7]).unwrap();
        assert_eq!(pack.riemann.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(pack.schouten.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(pack.weyl.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(pack.cotton.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
    }

    #[test]
    fn round_sphere_constant_curvature() {
        // R^i_jkl = −K^i_jkl on the unit sphere; W and Cotton vanish; the
        // conformal Weyl tensor vanishes and P = g.
        let spec = catalog::round_sphere(3).unwrap().metric;
        let p = [1.0, 1.3, 2.0];
        let pack = pack_at(&spec, &p).unwrap();
        let n = 3;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        assert!(
                            (pack.riemann[[i, j, k, l]] + pack.k_tensor[[i, j, k, l]])
                                .abs()
                                < 1e-9,
                            "R+K at [{i}{j}{k}{l}]"
                        );
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!((pack.schouten[[i, j]] - pack.g[[i, j]]).abs() < 1e-9);
            }
        }
        assert!(pack.weyl.iter().all(|v| v.abs() < 1e-9));
        assert!(pack.cotton.iter().all(|v| v.abs() < 1e-9));
        assert!(pack
            .conformal_weyl()
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn identities_across_catalog() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in ["warped", "round_sphere", "cone", "hyperbolic", "levi_civita_pair"] {
            let entry = catalog::lookup(name, &Default::default()).unwrap();
            for p in entry.metric.chart.sample_many(10, &mut rng) {
                let pack = pack_at(&entry.metric, &p).unwrap();
                assert!(pack.weyl_trace_residual() < 1e-8, "{name} trace");
                assert!(pack.bianchi_residual() < 1e-9, "{name} bianchi");
                assert!(pack.pair_symmetry_residual() < 1e-9, "{name} pair");
                assert!(
                    pack.em_identity_residual().unwrap() < 1e-8,
                    "{name} EM identity: {}",
                    pack.em_identity_residual().unwrap()
                );
            }
        }
    }

    #[test]
    fn divergence_of_weyl_is_cotton() {
        let entry = catalog::lookup("warped", &Default::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in entry.metric.chart.sample_many(10, &mut rng) {
            let pack = pack_at(&entry.metric, &p).unwrap();
            let div = pack.div_weyl();
            let n = pack.dim() as f64;
            let mut worst = 0.0f64;
            for d in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        worst = worst.max(
                            (div[[d, a, b]] - (n - 2.0) * pack.cotton[[d, a, b]]).abs(),
                        );
                    }
                }
            }
            assert!(worst < 1e-7, "divW vs Cotton at {p:?}: {worst}");
        }
    }

    #[test]
    fn einstein_weyl_tensors_agree() {
        let spec = catalog::round_sphere(3).unwrap().metric;
        let pack = pack_at(&spec, &[0.9, 1.7, 3.0]).unwrap();
        let cw = pack.conformal_weyl().unwrap();
        let mut worst = 0.0f64;
        for (w, c) in pack.weyl.iter().zip(cw.iter()) {
            worst = worst.max((w - c).abs());
        }
        assert!(worst < 1e-9);
    }

    #[test]
    fn conformal_check_examples() {
        // Constant rescale leaves Ricci alone.
        let spec = catalog::lookup("warped", &Default::default()).unwrap().metric;
        let r = conformal_ricci_check(&spec, &Expr::constant(0.7), &[0.4, 0.2, -0.3])
            .unwrap();
        assert!(r.max() < 1e-9, "constant psi: {:?}", r);

        // Flat 2d metric with psi = t.
        let flat2 = catalog::flat(2).unwrap().metric;
        let psi = parse_expr("x1").unwrap();
        let r = conformal_ricci_check(&flat2, &psi, &[0.3, -0.2]).unwrap();
        assert!(r.max() < 1e-8, "e^2t flat: {:?}", r);

        // Generic warp, generic psi.
        let psi = parse_expr("0.3*t + 0.1*x1^2").unwrap();
        let r = conformal_ricci_check(&spec, &psi, &[0.5, 0.3, 0.1]).unwrap();
        assert!(r.max() < 1e-8, "warped psi: {:?}", r);
    }

    #[test]
    fn warped_unwarp_gives_product_ricci() {
        // psi = −log f turns dt² + f²h into a product metric: the first row
        // and column of Ric(ĝ) vanish.
        let entry = catalog::lookup("warped", &Default::default()).unwrap();
        let spec = entry.metric;
        let f = entry.warp_f.unwrap();
        let psi = Expr::div(Expr::one(), f).log();
        let p = [0.6, 0.2, -0.4];
        let r = conformal_ricci_check(&spec, &psi, &p).unwrap();
        assert!(r.max() < 1e-8);
        let conf = Expr::mul(Expr::constant(2.0), psi).exp();
        let ghat = spec.g.mapv(|e| Expr::mul(conf.clone(), e));
        let hat = MetricSpec::new(spec.chart.clone(), ghat, vec![]).unwrap();
        let pack = pack_at(&hat, &p).unwrap();
        for j in 0..3 {
            assert!(pack.ricci[[0, j]].abs() < 1e-8, "Ric[0,{j}]");
            assert!(pack.ricci[[j, 0]].abs() < 1e-8);
        }
    }
}
