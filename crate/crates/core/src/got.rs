//! The third-order Gallot-Obata-Tanno equation and its relatives: the
//! Obata Hessian equation, concircular vector fields, and the invariant
//! operators that extend both to metrics whose nullity scalar varies.
//! Everything is evaluated pointwise as a residual of symbolic covariant
//! derivatives.

use ndarray::{Array1, Array2, Array3};

use crate::chart::metric_jet;
use crate::curvature::pack_at;
use crate::expr::Expr;
use crate::tensor::{ExprField, Slot, SymbolicGeometry};
use crate::Result;

/// max |∇_a∇_b∇_c f + B₀ (2 g_bc ∇_a f + g_ab ∇_c f + g_ca ∇_b f)| at a
/// point, the third-order equation with constant B₀.
pub fn got_residual(geom: &SymbolicGeometry, f: &Expr, b0: f64, point: &[f64]) -> Result<f64> {
    let n = geom.dim();
    let grad = geom.grad(f);
    let hess = geom.cov_derivative(&grad);
    let third = geom.cov_derivative(&hess);
    let third = geom.eval_field(&third, point)?;
    let df = geom.eval_field(&grad, point)?;
    let g = metric_jet(&geom.spec, point)?.g;
    let mut worst = 0.0f64;
    // Derivative indices append last: third[[c, b, a]] = ∇_a∇_b∇_c f.
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let lhs = third.comps[[c, b, a]]
                    + b0 * (2.0 * g[[b, c]] * df.comps[[a]]
                        + g[[a, b]] * df.comps[[c]]
                        + g[[c, a]] * df.comps[[b]]);
                worst = worst.max(lhs.abs());
            }
        }
    }
    Ok(worst)
}

/// max |R^d_{cab} ∇_d f − B₀ (g_cb ∇_a f − g_ca ∇_b f)|, the skew part of
/// the third-order equation. For a solution of the equation this holds
/// automatically through the Ricci identity.
pub fn got_skew_residual(
    geom: &SymbolicGeometry,
    f: &Expr,
    b0: f64,
    point: &[f64],
) -> Result<f64> {
    let n = geom.dim();
    let pack = pack_at(&geom.spec, point)?;
    let grad = geom.grad(f);
    let df = geom.eval_field(&grad, point)?;
    let mut dfu = vec![0.0; n];
    for d in 0..n {
        for s in 0..n {
            dfu[d] += pack.ginv[[d, s]] * df.comps[[s]];
        }
    }
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut lhs = 0.0;
                for d in 0..n {
                    lhs += pack.riemann[[d, c, a, b]] * df.comps[[d]];
                }
                let _ = dfu;
                let rhs = b0 * (pack.g[[c, b]] * df.comps[[a]] - pack.g[[c, a]] * df.comps[[b]]);
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// max |∇_a∇_b f + B₀ g_ab f|, the Obata equation.
pub fn obata_residual(geom: &SymbolicGeometry, f: &Expr, b0: f64, point: &[f64]) -> Result<f64> {
    let n = geom.dim();
    let hess = geom.cov_derivative(&geom.grad(f));
    let hess = geom.eval_field(&hess, point)?;
    let fval = geom.spec.eval(f, point)?;
    let g = metric_jet(&geom.spec, point)?.g;
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            worst = worst.max((hess.comps[[a, b]] + b0 * g[[a, b]] * fval).abs());
        }
    }
    Ok(worst)
}

/// Best-fit concircular factor and residual of a vector field:
/// η = (1/n) ∇_a v^a and the max deviation of ∇_a v^b from η δ^b_a, plus
/// the Weyl contraction of the field.
#[derive(Clone, Copy, Debug)]
pub struct ConcircularReport {
    pub eta: f64,
    pub residual: f64,
    pub weyl_contraction: f64,
}

pub fn concircular_residual(
    geom: &SymbolicGeometry,
    v: &Array1<Expr>,
    point: &[f64],
) -> Result<ConcircularReport> {
    let n = geom.dim();
    let field = ExprField::vector(v.clone(), Slot::Up);
    let dv = geom.eval_field(&geom.cov_derivative(&field), point)?;
    let mut eta = 0.0;
    for a in 0..n {
        eta += dv.comps[[a, a]];
    }
    eta /= n as f64;
    let mut residual = 0.0f64;
    for b in 0..n {
        for a in 0..n {
            let target = if a == b { eta } else { 0.0 };
            residual = residual.max((dv.comps[[b, a]] - target).abs());
        }
    }
    let pack = pack_at(&geom.spec, point)?;
    let vval: Vec<f64> = v
        .iter()
        .map(|e| geom.spec.eval(e, point))
        .collect::<Result<_>>()?;
    let mut wv = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += pack.weyl[[i, j, k, l]] * vval[j];
                }
                wv = wv.max(acc.abs());
            }
        }
    }
    Ok(ConcircularReport {
        eta,
        residual,
        weyl_contraction: wv,
    })
}

/// The second-order invariant operator E_ab(σ) = ∇_a∇_b σ + B g_ab σ with
/// a possibly nonconstant B, returned as components at a point.
pub fn e_operator(
    geom: &SymbolicGeometry,
    sigma: &Expr,
    b: &Expr,
    point: &[f64],
) -> Result<Array2<f64>> {
    let n = geom.dim();
    let hess = geom.cov_derivative(&geom.grad(sigma));
    let hess = geom.eval_field(&hess, point)?;
    let bval = geom.spec.eval(b, point)?;
    let sval = geom.spec.eval(sigma, point)?;
    let g = metric_jet(&geom.spec, point)?.g;
    Ok(Array2::from_shape_fn([n, n], |(a, bb)| {
        hess.comps[[a, bb]] + bval * g[[a, bb]] * sval
    }))
}

/// The third-order invariant operator
/// S_abc(τ) = ∇_(a∇_b∇_c) τ + 4 B g_(ab ∇_c) τ + 2 g_(ab ∇_c) B τ,
/// fully symmetrized, with a possibly nonconstant B.
pub fn s_operator(
    geom: &SymbolicGeometry,
    tau: &Expr,
    b: &Expr,
    point: &[f64],
) -> Result<Array3<f64>> {
    let n = geom.dim();
    let grad = geom.grad(tau);
    let third = geom.cov_derivative(&geom.cov_derivative(&grad));
    let third = geom.eval_field(&third, point)?;
    let dtau = geom.eval_field(&grad, point)?;
    let db = geom.eval_field(&geom.grad(b), point)?;
    let bval = geom.spec.eval(b, point)?;
    let tval = geom.spec.eval(tau, point)?;
    let g = metric_jet(&geom.spec, point)?.g;
    let mut out = Array3::<f64>::zeros([n, n, n]);
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for a in 0..n {
        for bb in 0..n {
            for c in 0..n {
                let idx = [a, bb, c];
                let mut acc = 0.0;
                for p in perms {
                    let (x, y, z) = (idx[p[0]], idx[p[1]], idx[p[2]]);
                    // ∇_x∇_y∇_z τ = third[[z, y, x]]
                    acc += third.comps[[z, y, x]]
                        + 4.0 * bval * g[[x, y]] * dtau.comps[[z]]
                        + 2.0 * g[[x, y]] * db.comps[[z]] * tval;
                }
                out[[a, bb, c]] = acc / 6.0;
            }
        }
    }
    Ok(out)
}
