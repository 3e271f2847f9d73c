//! Projective Weyl nullity at a point: the kernel of v ↦ W^i_{jkl} v^j, the
//! Schouten eigenvalue B on that kernel, the fundamental invariant
//! φ = P − B g, and the tensor Z = R + B·K, each certified by residuals.

use nalgebra::DMatrix;
use ndarray::{Array2, Array4};

use crate::chart::MetricSpec;
use crate::curvature::{pack_at, CurvaturePack};
use crate::expr::Expr;
use crate::{Error, Result};

/// Default relative rank threshold for the nullity decision.
pub const DEFAULT_RANK_TOL: f64 = 1e-7;

/// Kernel basis of the Weyl contraction map with its singular values.
#[derive(Clone, Debug)]
pub struct NullitySpace {
    /// Orthonormal kernel vectors in chart components.
    pub basis: Vec<Vec<f64>>,
    /// All singular values of the (n³ × n) contraction matrix, descending.
    pub singular_values: Vec<f64>,
}

impl NullitySpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Flattens v ↦ W^i_{jkl} v^j into an (n³ × n) matrix and extracts its
/// kernel by singular value decomposition. The threshold is
/// `rank_tol × max(σ_max, 1)`.
pub fn nullity_space(pack: &CurvaturePack, rank_tol: f64) -> NullitySpace {
    let n = pack.dim();
    let mut m = DMatrix::zeros(n * n * n, n);
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let row = (i * n + k) * n + l;
                for j in 0..n {
                    m[(row, j)] = pack.weyl[[i, j, k, l]];
                }
            }
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut pairs: Vec<(f64, Vec<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(r, s)| (*s, (0..n).map(|j| vt[(r, j)]).collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let sigma_max = pairs.first().map(|p| p.0).unwrap_or(0.0);
    let tau = rank_tol * sigma_max.max(1.0);
    let singular_values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let basis: Vec<Vec<f64>> = pairs
        .into_iter()
        .filter(|(s, _)| *s <= tau)
        .map(|(_, v)| v)
        .collect();
    NullitySpace {
        basis,
        singular_values,
    }
}

/// Nullity invariants and their defining residuals at one point.
#[derive(Clone, Debug)]
pub struct NullityReport {
    pub kernel: Vec<Vec<f64>>,
    pub dim: usize,
    pub b: f64,
    /// Max deviation of per-vector Schouten quotients from `b`.
    pub b_spread: f64,
    /// φ_ab = P_ab − B g_ab.
    pub phi: Array2<f64>,
    /// Z^i_jkl = R^i_jkl + B K^i_jkl.
    pub z: Array4<f64>,
    pub singular_values: Vec<f64>,
    /// max |P^i_j v^j − B v^i| over kernel vectors.
    pub pe_residual: f64,
    /// max |R^i_jkl v^j + B K^i_jkl v^j| over kernel vectors.
    pub knullity_residual: f64,
    /// max |v^a φ_ab|.
    pub phi_annihilation: f64,
    /// max |Z^i_jkl v^j|.
    pub z_residual: f64,
    /// max |W^i_jkl v^j| (kernel certificate).
    pub w_residual: f64,
}

/// Builds the full report from a nonempty kernel. B is extracted as the
/// Euclidean least-squares quotient ⟨Pv, v⟩/⟨v, v⟩ on the first kernel
/// vector; kernel vectors may be g-null in indefinite signature, so the
/// g-pairing is avoided and the (Pe) residual certifies the value instead.
pub fn nullity_report(pack: &CurvaturePack, space: &NullitySpace) -> Result<NullityReport> {
    let n = pack.dim();
    if space.basis.is_empty() {
        return Err(Error::EmptyKernel);
    }
    // Mixed Schouten P^i_j.
    let mut pmix = Array2::<f64>::zeros([n, n]);
    for i in 0..n {
        for j in 0..n {
            for s in 0..n {
                pmix[[i, j]] += pack.ginv[[i, s]] * pack.schouten[[s, j]];
            }
        }
    }
    let quotient = |v: &[f64]| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let mut pv = 0.0;
            for j in 0..n {
                pv += pmix[[i, j]] * v[j];
            }
            num += pv * v[i];
            den += v[i] * v[i];
        }
        num / den
    };
    let b = quotient(&space.basis[0]);
    let b_spread = space
        .basis
        .iter()
        .map(|v| (quotient(v) - b).abs())
        .fold(0.0f64, f64::max);

    let phi = Array2::from_shape_fn([n, n], |(i, j)| {
        pack.schouten[[i, j]] - b * pack.g[[i, j]]
    });
    let z = Array4::from_shape_fn([n, n, n, n], |(i, j, k, l)| {
        pack.riemann[[i, j, k, l]] + b * pack.k_tensor[[i, j, k, l]]
    });

    let mut pe_residual = 0.0f64;
    let mut knullity_residual = 0.0f64;
    let mut phi_annihilation = 0.0f64;
    let mut z_residual = 0.0f64;
    let mut w_residual = 0.0f64;
    for v in &space.basis {
        for i in 0..n {
            let mut pv = 0.0;
            for j in 0..n {
                pv += pmix[[i, j]] * v[j];
            }
            pe_residual = pe_residual.max((pv - b * v[i]).abs());
        }
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut rv = 0.0;
                    let mut kv = 0.0;
                    let mut zv = 0.0;
                    let mut wv = 0.0;
                    for j in 0..n {
                        rv += pack.riemann[[i, j, k, l]] * v[j];
                        kv += pack.k_tensor[[i, j, k, l]] * v[j];
                        zv += z[[i, j, k, l]] * v[j];
                        wv += pack.weyl[[i, j, k, l]] * v[j];
                    }
                    knullity_residual = knullity_residual.max((rv + b * kv).abs());
                    z_residual = z_residual.max(zv.abs());
                    w_residual = w_residual.max(wv.abs());
                }
            }
        }
        for bidx in 0..n {
            let mut acc = 0.0;
            for a in 0..n {
                acc += v[a] * phi[[a, bidx]];
            }
            phi_annihilation = phi_annihilation.max(acc.abs());
        }
    }

    Ok(NullityReport {
        kernel: space.basis.clone(),
        dim: space.basis.len(),
        b,
        b_spread,
        phi,
        z,
        singular_values: space.singular_values.clone(),
        pe_residual,
        knullity_residual,
        phi_annihilation,
        z_residual,
        w_residual,
    })
}

impl NullityReport {
    pub fn max_residual(&self) -> f64 {
        self.pe_residual
            .max(self.knullity_residual)
            .max(self.phi_annihilation)
            .max(self.z_residual)
            .max(self.w_residual)
    }
}

/// Full pipeline at a point with the default rank threshold.
pub fn report_at(spec: &MetricSpec, point: &[f64]) -> Result<NullityReport> {
    let pack = pack_at(spec, point)?;
    let space = nullity_space(&pack, DEFAULT_RANK_TOL);
    nullity_report(&pack, &space)
}

/// |B_reported − (−f''(t)/f(t))|, the warped-product closed form.
pub fn warped_b_check(f: &Expr, t: f64, b_reported: f64) -> Result<f64> {
    let scope = vec![("t".to_string(), t)];
    let fv = f.eval(&scope)?;
    let fpp = f.differentiate("t").differentiate("t").eval(&scope)?;
    Ok((b_reported + fpp / fv).abs())
}

/// Residual of φ̊^a_b = (1/n) W^a_{cbd} g^{cd} (the trace-free part of φ
/// seen inside the Weyl tensor), plus the metric-trace identity
/// g^{ab}φ_ab = J − nB.
#[derive(Clone, Copy, Debug)]
pub struct PhiTraceResiduals {
    pub trace_identity: f64,
    pub tracefree_identity: f64,
}

pub fn phi_trace_residuals(pack: &CurvaturePack, report: &NullityReport) -> PhiTraceResiduals {
    let n = pack.dim();
    let nf = n as f64;
    let mut j_trace = 0.0;
    let mut phi_trace = 0.0;
    for a in 0..n {
        for b in 0..n {
            j_trace += pack.ginv[[a, b]] * pack.schouten[[a, b]];
            phi_trace += pack.ginv[[a, b]] * report.phi[[a, b]];
        }
    }
    let trace_identity = (phi_trace - (j_trace - nf * report.b)).abs();

    let mut worst = 0.0f64;
    for a in 0..n {
        for bb in 0..n {
            // φ̊^a_b = g^{as}(φ_sb − (tr φ/n) g_sb)
            let mut lhs = 0.0;
            for s in 0..n {
                lhs += pack.ginv[[a, s]]
                    * (report.phi[[s, bb]] - phi_trace / nf * pack.g[[s, bb]]);
            }
            let mut rhs = 0.0;
            for c in 0..n {
                for d in 0..n {
                    rhs += pack.weyl[[a, c, bb, d]] * pack.ginv[[c, d]];
                }
            }
            rhs /= nf;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    PhiTraceResiduals {
        trace_identity,
        tracefree_identity: worst,
    }
}

/// Residual of the reconstruction W^i_jkl = Z^i_jkl + δ^i_l φ_jk − δ^i_k φ_jl.
pub fn reconstruction_residual(pack: &CurvaturePack, report: &NullityReport) -> f64 {
    let n = pack.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut rhs = report.z[[i, j, k, l]];
                    if i == l {
                        rhs += report.phi[[j, k]];
                    }
                    if i == k {
                        rhs -= report.phi[[j, l]];
                    }
                    worst = worst.max((pack.weyl[[i, j, k, l]] - rhs).abs());
                }
            }
        }
    }
    worst
}
