//! The metrisability equation and its prolongations. A solution is a
//! symmetric contravariant tensor a^{bc} with
//! ∇_k a^{ij} = λ^i δ^j_k + λ^j δ^i_k, where λ is half the gradient of the
//! metric trace of a. Over metrics with Weyl nullity the first derived
//! equation closes with the single scalar B; in general the closure
//! carries Weyl and Cotton correction terms. This module builds solutions
//! symbolically, measures every equation as a pointwise residual, and
//! derives the Killing tensors and integrals a solution generates.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::chart::{metric_jet, MetricSpec};
use crate::curvature::{pack_at, CurvaturePack};
use crate::expr::Expr;
use crate::flows::GeodesicPath;
use crate::nullity::NullityReport;
use crate::projective::ProjectivePair;
use crate::tensor::{sym_comatrix, ExprField, Slot, SymbolicGeometry};
use crate::{Error, Result};

/// A candidate solution of the metrisability equation in symbolic form,
/// with the derived quantities the prolongation needs.
pub struct Solution {
    pub geom: Arc<SymbolicGeometry>,
    /// a^{ij}
    pub upper: Array2<Expr>,
    /// a^i_j = a^{is} g_{sj}
    pub mixed: Array2<Expr>,
    /// λ_k = ½ ∂_k (g_pq a^{pq})
    pub lambda_low: Array1<Expr>,
    /// λ^i = g^{ik} λ_k
    pub lambda_up: Array1<Expr>,
}

impl Solution {
    pub fn from_upper(geom: Arc<SymbolicGeometry>, upper: Array2<Expr>) -> Solution {
        let n = geom.dim();
        let mixed = Array2::from_shape_fn([n, n], |(i, j)| {
            let mut acc = Expr::zero();
            for s in 0..n {
                acc = Expr::add(
                    acc,
                    Expr::mul(upper[[i, s]].clone(), geom.spec.g[[s, j]].clone()),
                );
            }
            acc
        });
        let mut trace = Expr::zero();
        for p in 0..n {
            for q in 0..n {
                trace = Expr::add(
                    trace,
                    Expr::mul(geom.spec.g[[p, q]].clone(), upper[[p, q]].clone()),
                );
            }
        }
        let lambda_low = Array1::from_shape_fn(n, |k| {
            Expr::mul(
                Expr::constant(0.5),
                trace.differentiate(&geom.spec.chart.coords[k]),
            )
        });
        let lambda_up = Array1::from_shape_fn(n, |i| {
            let mut acc = Expr::zero();
            for k in 0..n {
                acc = Expr::add(
                    acc,
                    Expr::mul(geom.ginv[[i, k]].clone(), lambda_low[k].clone()),
                );
            }
            acc
        });
        Solution {
            geom,
            upper,
            mixed,
            lambda_low,
            lambda_up,
        }
    }

    pub fn from_mixed(geom: Arc<SymbolicGeometry>, mixed: Array2<Expr>) -> Solution {
        let n = geom.dim();
        let upper = Array2::from_shape_fn([n, n], |(i, j)| {
            let mut acc = Expr::zero();
            for s in 0..n {
                acc = Expr::add(
                    acc,
                    Expr::mul(mixed[[i, s]].clone(), geom.ginv[[s, j]].clone()),
                );
            }
            acc
        });
        Solution::from_upper(geom, upper)
    }

    /// The inverse metric itself, the solution every metric carries.
    pub fn trivial(geom: Arc<SymbolicGeometry>) -> Solution {
        let upper = geom.ginv.clone();
        Solution::from_upper(geom, upper)
    }

    /// The solution a projective partner induces, a^{ij} = e^{2Υ} ḡ^{ij}.
    pub fn from_pair(pair: &ProjectivePair) -> Solution {
        Solution::from_upper(pair.geom.clone(), pair.solution_upper.clone())
    }

    fn dim(&self) -> usize {
        self.geom.dim()
    }

    fn eval(&self, e: &Expr, point: &[f64]) -> Result<f64> {
        self.geom.spec.eval(e, point)
    }

    /// max |∇_k a^{ij} − λ^i δ^j_k − λ^j δ^i_k| at a point.
    pub fn metrisability_residual(&self, point: &[f64]) -> Result<f64> {
        let n = self.dim();
        let field = ExprField {
            valence: crate::tensor::Valence(vec![Slot::Up, Slot::Up]),
            comps: self.upper.clone().into_dyn(),
        };
        let da = self.geom.eval_field(&self.geom.cov_derivative(&field), point)?;
        let lam: Vec<f64> = self
            .lambda_up
            .iter()
            .map(|e| self.eval(e, point))
            .collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut rhs = 0.0;
                    if j == k {
                        rhs += lam[i];
                    }
                    if i == k {
                        rhs += lam[j];
                    }
                    worst = worst.max((da.comps[[i, j, k]] - rhs).abs());
                }
            }
        }
        Ok(worst)
    }

    /// ∇_j λ^i as a symbolic field, indexed `[[i, j]]`.
    fn dlambda(&self) -> ExprField {
        let field = ExprField::vector(self.lambda_up.clone(), Slot::Up);
        self.geom.cov_derivative(&field)
    }

    /// The scalar the nullity prolongation closes with,
    /// ρ = (1/n)(∇_i λ^i + B a^i_i), derived by tracing
    /// ∇_j λ^i = ρ δ^i_j − B a^i_j.
    pub fn rho_nullity(&self, b: &Expr) -> Expr {
        let n = self.dim();
        let dl = self.dlambda();
        let mut div = Expr::zero();
        for i in 0..n {
            div = Expr::add(div, dl.comps[[i, i]].clone());
        }
        let mut tr = Expr::zero();
        for i in 0..n {
            tr = Expr::add(tr, self.mixed[[i, i]].clone());
        }
        Expr::mul(
            Expr::constant(1.0 / n as f64),
            Expr::add(div, Expr::mul(b.clone(), tr)),
        )
    }

    /// Residuals of the closed nullity prolongation:
    /// `second` for ∇_j λ^i = ρ δ^i_j − B a^i_j,
    /// `third` for ∇_a ρ = −2 B λ_a − (1/(n−1)) a^{bc} (g_ab ∇_c B − g_bc ∇_a B),
    /// and `third_plain` for the same line with the ∇B term dropped.
    pub fn nullity_system_residual(
        &self,
        b: &Expr,
        point: &[f64],
    ) -> Result<NullitySystemResiduals> {
        let n = self.dim();
        let coords = &self.geom.spec.chart.coords;
        let dl = self.geom.eval_field(&self.dlambda(), point)?;
        let rho = self.rho_nullity(b);
        let rho_val = self.eval(&rho, point)?;
        let bval = self.eval(b, point)?;
        let g = metric_jet(&self.geom.spec, point)?.g;
        let amix = self.eval_matrix(&self.mixed, point)?;
        let aup = self.eval_matrix(&self.upper, point)?;
        let lam_low: Vec<f64> = self
            .lambda_low
            .iter()
            .map(|e| self.eval(e, point))
            .collect::<Result<_>>()?;
        let db: Vec<f64> = coords
            .iter()
            .map(|c| self.eval(&b.differentiate(c), point))
            .collect::<Result<_>>()?;

        let mut second = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let rhs = if i == j { rho_val } else { 0.0 } - bval * amix[[i, j]];
                second = second.max((dl.comps[[i, j]] - rhs).abs());
            }
        }

        let mut third = 0.0f64;
        let mut third_plain = 0.0f64;
        for a in 0..n {
            let drho = self.eval(&rho.differentiate(&coords[a]), point)?;
            let mut liouville = 0.0;
            for bb in 0..n {
                for c in 0..n {
                    liouville += aup[[bb, c]] * (g[[a, bb]] * db[c] - g[[bb, c]] * db[a]);
                }
            }
            let plain = drho + 2.0 * bval * lam_low[a];
            third_plain = third_plain.max(plain.abs());
            third = third.max((plain + liouville / (n as f64 - 1.0)).abs());
        }
        Ok(NullitySystemResiduals {
            second,
            third,
            third_plain,
        })
    }

    /// Residuals of the general prolongation with curvature corrections:
    /// `second` for ∇_a λ^b = ρ δ^b_a − P_ac a^{cb} + (1/n) W^b_{cad} a^{cd},
    /// `third` for ∇_a ρ = −2 P_ab λ^b + (2/n) C_{cab} a^{bc},
    /// with ρ = (1/n)(∇_i λ^i + P_ic a^{ci}).
    pub fn normal_system_residual(&self, point: &[f64]) -> Result<NormalSystemResiduals> {
        let n = self.dim();
        let coords = &self.geom.spec.chart.coords;
        let pack = pack_at(&self.geom.spec, point)?;
        let dl = self.geom.eval_field(&self.dlambda(), point)?;
        let aup = self.eval_matrix(&self.upper, point)?;
        let lam_up: Vec<f64> = self
            .lambda_up
            .iter()
            .map(|e| self.eval(e, point))
            .collect::<Result<_>>()?;

        // ρ symbolically, so the third line can differentiate it.
        let schouten = self.geom.schouten();
        let dlf = self.dlambda();
        let mut div = Expr::zero();
        for i in 0..n {
            div = Expr::add(div, dlf.comps[[i, i]].clone());
        }
        let mut psigma = Expr::zero();
        for i in 0..n {
            for c in 0..n {
                psigma = Expr::add(
                    psigma,
                    Expr::mul(schouten[[i, c]].clone(), self.upper[[c, i]].clone()),
                );
            }
        }
        let rho = Expr::mul(Expr::constant(1.0 / n as f64), Expr::add(div, psigma));
        let rho_val = self.eval(&rho, point)?;

        let mut second = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let mut rhs = if a == b { rho_val } else { 0.0 };
                for c in 0..n {
                    rhs -= pack.schouten[[a, c]] * aup[[c, b]];
                    for d in 0..n {
                        rhs += pack.weyl[[b, c, a, d]] * aup[[c, d]] / n as f64;
                    }
                }
                second = second.max((dl.comps[[b, a]] - rhs).abs());
            }
        }

        let mut third = 0.0f64;
        for a in 0..n {
            let drho = self.eval(&rho.differentiate(&coords[a]), point)?;
            let mut rhs = 0.0;
            for b in 0..n {
                rhs -= 2.0 * pack.schouten[[a, b]] * lam_up[b];
                for c in 0..n {
                    rhs += 2.0 / n as f64 * pack.cotton[[c, a, b]] * aup[[b, c]];
                }
            }
            third = third.max((drho - rhs).abs());
        }
        Ok(NormalSystemResiduals { second, third })
    }

    /// max |a^{ip} Z^j_{pkl} + a^{pj} Z^i_{pkl}|, the commutation of a
    /// solution with the nullity curvature.
    pub fn z_commutation_residual(
        &self,
        report: &NullityReport,
        point: &[f64],
    ) -> Result<f64> {
        let n = self.dim();
        let aup = self.eval_matrix(&self.upper, point)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = 0.0;
                        for p in 0..n {
                            acc += aup[[i, p]] * report.z[[j, p, k, l]]
                                + aup[[p, j]] * report.z[[i, p, k, l]];
                        }
                        worst = worst.max(acc.abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Degree of the minimal polynomial of a^i_j at a point, decided by a
    /// singular-value rank test on the vectorized powers.
    pub fn minimal_polynomial_degree(&self, point: &[f64]) -> Result<usize> {
        let n = self.dim();
        let a = self.eval_matrix(&self.mixed, point)?;
        let amat = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
        let mut powers = vec![DMatrix::<f64>::identity(n, n)];
        for _ in 0..n {
            powers.push(&amat * powers.last().unwrap());
        }
        for d in 1..=n {
            let mut m = DMatrix::zeros(n * n, d + 1);
            for (col, p) in powers.iter().take(d + 1).enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        m[(i * n + j, col)] = p[(i, j)];
                    }
                }
            }
            let sv = m.singular_values();
            let smax = sv.max();
            let smin = sv.min();
            if smin <= 1e-8 * smax.max(1.0) {
                return Ok(d);
            }
        }
        Ok(n)
    }

    /// The Killing two-tensor K_bc = g_bs com(A − t·Id)^s_c built from the
    /// comatrix of the shifted endomorphism.
    pub fn killing_tensor(&self, t: f64) -> Array2<Expr> {
        let n = self.dim();
        let shifted = Array2::from_shape_fn([n, n], |(i, j)| {
            if i == j {
                Expr::sub(self.mixed[[i, j]].clone(), Expr::constant(t))
            } else {
                self.mixed[[i, j]].clone()
            }
        });
        let com = sym_comatrix(&shifted);
        Array2::from_shape_fn([n, n], |(b, c)| {
            let mut acc = Expr::zero();
            for s in 0..n {
                acc = Expr::add(
                    acc,
                    Expr::mul(self.geom.spec.g[[b, s]].clone(), com[[s, c]].clone()),
                );
            }
            acc
        })
    }

    /// max |∇_(a K_bc)| of a candidate Killing tensor at a point.
    pub fn killing_residual(&self, k: &Array2<Expr>, point: &[f64]) -> Result<f64> {
        let n = self.dim();
        let field = ExprField::matrix(k.clone(), [Slot::Down, Slot::Down]);
        let dk = self.geom.eval_field(&self.geom.cov_derivative(&field), point)?;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let sym = dk.comps[[b, c, a]] + dk.comps[[c, a, b]] + dk.comps[[a, b, c]];
                    worst = worst.max((sym / 3.0).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Relative drift of the quadratic integral K_bc γ'^b γ'^c along an
    /// integrated geodesic.
    pub fn integral_drift(&self, k: &Array2<Expr>, path: &GeodesicPath) -> Result<f64> {
        let n = self.dim();
        let value = |x: &[f64], v: &[f64]| -> Result<f64> {
            let mut acc = 0.0;
            for b in 0..n {
                for c in 0..n {
                    acc += self.eval(&k[[b, c]], x)? * v[b] * v[c];
                }
            }
            Ok(acc)
        };
        let first = value(&path.points[0].x, &path.points[0].v)?;
        let mut worst = 0.0f64;
        for p in &path.points {
            let cur = value(&p.x, &p.v)?;
            worst = worst.max((cur - first).abs());
        }
        Ok(worst / first.abs().max(1e-12))
    }

    /// Fits a^{bc} = ν g^{bc} + ε u^b u^c with u = grad B at a point and
    /// returns the coefficients with the max residual of the fit. Requires
    /// |∇B| bounded away from zero.
    pub fn structure_fit(&self, b: &Expr, point: &[f64]) -> Result<StructureFit> {
        let n = self.dim();
        let aup = self.eval_matrix(&self.upper, point)?;
        let jet = metric_jet(&self.geom.spec, point)?;
        let coords = &self.geom.spec.chart.coords;
        let db: Vec<f64> = coords
            .iter()
            .map(|c| self.eval(&b.differentiate(c), point))
            .collect::<Result<_>>()?;
        let mut u = vec![0.0; n];
        for i in 0..n {
            for s in 0..n {
                u[i] += jet.ginv[[i, s]] * db[s];
            }
        }
        let unorm: f64 = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        if unorm < 1e-8 {
            return Err(Error::MissingNullity);
        }
        // Two-parameter least squares over the n² slots.
        let rows = n * n;
        let mut m = DMatrix::zeros(rows, 2);
        let mut rhs = DMatrix::zeros(rows, 1);
        for i in 0..n {
            for j in 0..n {
                m[(i * n + j, 0)] = jet.ginv[[i, j]];
                m[(i * n + j, 1)] = u[i] * u[j];
                rhs[(i * n + j, 0)] = aup[[i, j]];
            }
        }
        let svd = m.clone().svd(true, true);
        let coef = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::IntegrationFailure(e.to_string()))?;
        let fitres = (&m * &coef - rhs).abs().max();
        Ok(StructureFit {
            nu: coef[(0, 0)],
            eps: coef[(1, 0)],
            residual: fitres,
        })
    }

    fn eval_matrix(&self, m: &Array2<Expr>, point: &[f64]) -> Result<Array2<f64>> {
        let n = self.dim();
        let mut out = Array2::<f64>::zeros([n, n]);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] = self.eval(&m[[i, j]], point)?;
            }
        }
        Ok(out)
    }
}

/// Residuals of the nullity-closed prolongation.
#[derive(Clone, Copy, Debug)]
pub struct NullitySystemResiduals {
    pub second: f64,
    pub third: f64,
    /// Third line without the ∇B correction; large when B is nonconstant.
    pub third_plain: f64,
}

/// Residuals of the curvature-corrected prolongation.
#[derive(Clone, Copy, Debug)]
pub struct NormalSystemResiduals {
    pub second: f64,
    pub third: f64,
}

/// Coefficients of the two-term structure of a solution over a nonconstant
/// nullity scalar.
#[derive(Clone, Copy, Debug)]
pub struct StructureFit {
    pub nu: f64,
    pub eps: f64,
    pub residual: f64,
}

/// Residual of the identity tying the Liouville combination to the Cotton
/// tensor and the derivative of φ:
/// n a^{bc}(g_ab ∇_c B − g_bc ∇_a B)
///   = (n−1)(a^{bc} ∇_a φ_bc − 2 C_cab a^{bc}).
pub fn liouville_cotton_residual(
    pack: &CurvaturePack,
    sigma: &Array2<f64>,
    b_grad: &[f64],
) -> f64 {
    let n = pack.dim();
    let nf = n as f64;
    let mut worst = 0.0f64;
    for a in 0..n {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for b in 0..n {
            for c in 0..n {
                lhs += nf * sigma[[b, c]] * (pack.g[[a, b]] * b_grad[c] - pack.g[[b, c]] * b_grad[a]);
                // ∇_a φ_bc = ∇_a P_bc − (∇_a B) g_bc
                let dphi = pack.covschouten[[b, c, a]] - b_grad[a] * pack.g[[b, c]];
                rhs += (nf - 1.0) * (sigma[[b, c]] * dphi - 2.0 * pack.cotton[[c, a, b]] * sigma[[b, c]]);
            }
        }
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Difference of the trace-free Ricci tensors of two metrics at a point.
pub fn tracefree_ricci_gap(
    spec: &MetricSpec,
    partner: &MetricSpec,
    point: &[f64],
) -> Result<Array2<f64>> {
    let n = spec.dim();
    let pack = pack_at(spec, point)?;
    let pack_bar = pack_at(partner, point)?;
    Ok(Array2::from_shape_fn([n, n], |(i, j)| {
        let tf = pack.ricci[[i, j]] - pack.scal / n as f64 * pack.g[[i, j]];
        let tf_bar =
            pack_bar.ricci[[i, j]] - pack_bar.scal / n as f64 * pack_bar.g[[i, j]];
        tf - tf_bar
    }))
}

/// Closed form of the only possibly nonzero entry of the gap for a warped
/// pair: (1/(f²(f²+C))) ((n−1)(n−2)/n (f f'' − f'²) + R⁰/n), with R⁰ the
/// scalar curvature of the base.
pub fn warped_gap_closed_form(
    f: &Expr,
    c: f64,
    r0: f64,
    n: usize,
    t: f64,
) -> Result<f64> {
    let scope = vec![("t".to_string(), t)];
    let fv = f.eval(&scope)?;
    let fp = f.differentiate("t").eval(&scope)?;
    let fpp = f.differentiate("t").differentiate("t").eval(&scope)?;
    let nf = n as f64;
    Ok(1.0 / (fv * fv * (fv * fv + c))
        * ((nf - 1.0) * (nf - 2.0) / nf * (fv * fpp - fp * fp) + r0 / nf))
}
