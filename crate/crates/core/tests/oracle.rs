//! Second-path oracles.
//!
//! The curvature quantities used throughout the crate are produced from
//! exact symbolic derivatives of the metric. This file recomputes them by a
//! deliberately independent route, plain central finite differences of the
//! metric components and of quantities derived from those differences, and
//! requires agreement. It also cross-checks the symbolic derivative engine
//! against finite differences on randomly generated expression trees, and
//! pins a handful of hand-computed curvature values.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;

use projnull::catalog;
use projnull::chart::MetricSpec;
use projnull::curvature::pack_at;
use projnull::expr::Expr;

// ---- finite-difference pipeline, sharing nothing with the library's
// ---- curvature code beyond pointwise evaluation of g ----------------------

fn g_at(spec: &MetricSpec, x: &[f64]) -> DMatrix<f64> {
    let n = spec.dim();
    DMatrix::from_fn(n, n, |i, j| spec.eval(&spec.g[[i, j]], x).unwrap())
}

fn shifted(x: &[f64], k: usize, h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += h;
    y
}

/// ∂_k g_ij by central differences.
fn fd_dg(spec: &MetricSpec, x: &[f64], k: usize, h: f64) -> DMatrix<f64> {
    let plus = g_at(spec, &shifted(x, k, h));
    let minus = g_at(spec, &shifted(x, k, -h));
    (plus - minus) / (2.0 * h)
}

/// Γ^i_{jk} from finite differences of g.
fn fd_gamma(spec: &MetricSpec, x: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    let n = spec.dim();
    let ginv = g_at(spec, x).try_inverse().unwrap();
    let dg: Vec<DMatrix<f64>> = (0..n).map(|k| fd_dg(spec, x, k, h)).collect();
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                }
                gamma[i][j][k] = 0.5 * s;
            }
        }
    }
    gamma
}

/// R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{ks}Γ^s_{lj} − Γ^i_{ls}Γ^s_{kj},
/// with the Γ derivatives themselves taken by central differences.
fn fd_riemann(spec: &MetricSpec, x: &[f64], h: f64) -> Vec<Vec<Vec<Vec<f64>>>> {
    let n = spec.dim();
    let gamma = fd_gamma(spec, x, h);
    let dgamma: Vec<Vec<Vec<Vec<f64>>>> = (0..n)
        .map(|k| {
            let plus = fd_gamma(spec, &shifted(x, k, h), h);
            let minus = fd_gamma(spec, &shifted(x, k, -h), h);
            let mut d = vec![vec![vec![0.0; n]; n]; n];
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        d[i][j][l] = (plus[i][j][l] - minus[i][j][l]) / (2.0 * h);
                    }
                }
            }
            d
        })
        .collect();
    let mut r = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = dgamma[k][i][l][j] - dgamma[l][i][k][j];
                    for s in 0..n {
                        v += gamma[i][k][s] * gamma[s][l][j] - gamma[i][l][s] * gamma[s][k][j];
                    }
                    r[i][j][k][l] = v;
                }
            }
        }
    }
    r
}

/// P_jk = Ric_jk/(n−1) from the finite-difference Riemann tensor.
fn fd_schouten(spec: &MetricSpec, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = spec.dim();
    let r = fd_riemann(spec, x, h);
    DMatrix::from_fn(n, n, |j, k| {
        let mut s = 0.0;
        for a in 0..n {
            s += r[a][j][a][k];
        }
        s / (n as f64 - 1.0)
    })
}

fn probe_points(spec: &MetricSpec) -> Vec<Vec<f64>> {
    // Fixed interior points: the box center and two off-center shifts kept
    // clear of the walls so the finite-difference stencils stay inside.
    let c = spec.chart.center();
    let mut out = vec![c.clone()];
    for (sign, frac) in [(1.0, 0.21), (-1.0, 0.17)] {
        let p: Vec<f64> = spec
            .chart
            .bounds
            .iter()
            .zip(&c)
            .map(|(b, ci)| ci + sign * frac * (b[1] - b[0]) / 2.0)
            .collect();
        out.push(p);
    }
    out
}

fn catalog_spec(name: &str) -> MetricSpec {
    catalog::lookup(name, &BTreeMap::new()).unwrap().metric
}

#[test]
fn finite_differences_confirm_christoffel_symbols() {
    for name in ["round_sphere", "warped_pair", "levi_civita_pair"] {
        let spec = catalog_spec(name);
        let n = spec.dim();
        for x in probe_points(&spec) {
            let pack = pack_at(&spec, &x).unwrap();
            let fd = fd_gamma(&spec, &x, 1e-5);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let a = pack.gamma[[i, j, k]];
                        let b = fd[i][j][k];
                        assert!(
                            (a - b).abs() <= 1e-7 * (1.0 + a.abs()),
                            "{name}: gamma[{i}{j}{k}] symbolic {a} vs fd {b} at {x:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn finite_differences_confirm_the_riemann_tensor() {
    for name in ["round_sphere", "warped_pair", "hyperbolic"] {
        let spec = catalog_spec(name);
        let n = spec.dim();
        for x in probe_points(&spec) {
            let pack = pack_at(&spec, &x).unwrap();
            let fd = fd_riemann(&spec, &x, 1e-4);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let a = pack.riemann[[i, j, k, l]];
                            let b = fd[i][j][k][l];
                            assert!(
                                (a - b).abs() <= 1e-5 * (1.0 + a.abs()),
                                "{name}: R[{i}{j}{k}{l}] symbolic {a} vs fd {b} at {x:?}"
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn finite_differences_confirm_schouten_and_cotton() {
    for name in ["round_sphere", "warped_pair"] {
        let spec = catalog_spec(name);
        let n = spec.dim();
        for x in probe_points(&spec) {
            let pack = pack_at(&spec, &x).unwrap();
            let fd_p = fd_schouten(&spec, &x, 1e-4);
            for j in 0..n {
                for k in 0..n {
                    let a = pack.schouten[[j, k]];
                    let b = fd_p[(j, k)];
                    assert!(
                        (a - b).abs() <= 1e-5 * (1.0 + a.abs()),
                        "{name}: P[{j}{k}] symbolic {a} vs fd {b} at {x:?}"
                    );
                }
            }
            // Cotton C_cab = ∇_a P_bc − ∇_b P_ac, assembled from the
            // finite-difference Schouten and Christoffel symbols.
            let h = 1e-4;
            let gamma = fd_gamma(&spec, &x, h);
            let dp: Vec<DMatrix<f64>> = (0..n)
                .map(|k| {
                    (fd_schouten(&spec, &shifted(&x, k, h), h)
                        - fd_schouten(&spec, &shifted(&x, k, -h), h))
                        / (2.0 * h)
                })
                .collect();
            let p = fd_p;
            let cov = |a: usize, b: usize, c: usize| {
                let mut v = dp[a][(b, c)];
                for s in 0..n {
                    v -= gamma[s][a][b] * p[(s, c)] + gamma[s][a][c] * p[(b, s)];
                }
                v
            };
            for c in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let sym = pack.cotton[[c, a, b]];
                        let fd = cov(a, b, c) - cov(b, a, c);
                        assert!(
                            (sym - fd).abs() <= 1e-3 * (1.0 + sym.abs()),
                            "{name}: C[{c}{a}{b}] symbolic {sym} vs fd {fd} at {x:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn hand_computed_sphere_curvature() {
    // g = dt² + sin²t dφ² on S²: R^t_{φtφ} = sin²t, R^φ_{tφt} = 1, and
    // Ric = (n−1) g in every dimension.
    let spec = catalog_spec("round_sphere");
    let x = [0.9, 1.1, 2.0];
    let pack = pack_at(&spec, &x).unwrap();
    let n = spec.dim();
    for j in 0..n {
        for k in 0..n {
            let want = (n as f64 - 1.0) * pack.g[[j, k]];
            assert!(
                (pack.ricci[[j, k]] - want).abs() < 1e-11,
                "Ric[{j}{k}] = {} vs (n-1)g = {want}",
                pack.ricci[[j, k]]
            );
        }
    }
    let s2 = {
        let two = catalog::lookup("round_sphere", &BTreeMap::from([(
            "n".to_string(),
            "2".to_string(),
        )]))
        .unwrap()
        .metric;
        pack_at(&two, &[0.9, 1.1]).unwrap()
    };
    let st = 0.9f64.sin();
    assert!((s2.riemann[[0, 1, 0, 1]] - st * st).abs() < 1e-12);
    assert!((s2.riemann[[1, 0, 1, 0]] - 1.0).abs() < 1e-12);
}

#[test]
fn warped_nullity_eigenvalue_matches_the_quotient_formula() {
    // On dt² + f²h the kernel holds ∂_t and B = −f''/f; recompute B here
    // straight from the closed form, independently of the kernel code.
    for (f_src, lo, hi) in [
        ("2+sin(t)", -1.2, 1.2),
        ("exp(t)", -1.0, 1.0),
        ("t", 0.3, 1.2),
    ] {
        let params = BTreeMap::from([
            ("f".to_string(), f_src.to_string()),
            ("t0".to_string(), lo.to_string()),
            ("t1".to_string(), hi.to_string()),
        ]);
        let entry = catalog::lookup("warped", &params).unwrap();
        let spec = entry.metric;
        let f = projnull::parse::parse_expr(f_src).unwrap();
        let fpp = f.differentiate("t").differentiate("t");
        for x in probe_points(&spec) {
            let report = projnull::nullity::report_at(&spec, &x).unwrap();
            let scope = vec![("t".to_string(), x[0])];
            let want = -fpp.eval(&scope).unwrap() / f.eval(&scope).unwrap();
            assert!(
                (report.b - want).abs() < 1e-9,
                "f={f_src}: B {} vs closed form {want} at {x:?}",
                report.b
            );
        }
    }
}

// ---- expression engine versus finite differences --------------------------

/// Random closed expressions in x and y that stay finite and smooth on the
/// probe square: sums, products, guarded quotients, sin/cos/exp and squares.
fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-2.0..2.0f64).prop_map(Expr::constant),
        Just(Expr::symbol("x")),
        Just(Expr::symbol("y")),
    ];
    leaf.prop_recursive(5, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            // Denominator bounded away from zero.
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| a / (Expr::constant(2.0) + b.sin().powi(2))),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            // Tamed exponent keeps values in a comparable range.
            inner.clone().prop_map(|a| (a.sin() * Expr::constant(0.5)).exp()),
            inner.clone().prop_map(|a| a.powi(2)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(192))]

    #[test]
    fn symbolic_derivatives_match_finite_differences(
        e in expr_strategy(),
        x in -1.2..1.2f64,
        y in -1.2..1.2f64,
    ) {
        let scope = vec![("x".to_string(), x), ("y".to_string(), y)];
        let value = e.eval(&scope).unwrap();
        prop_assume!(value.is_finite() && value.abs() < 1e6);
        let dx = e.differentiate("x");
        let sym = dx.eval(&scope).unwrap();
        prop_assume!(sym.is_finite() && sym.abs() < 1e6);
        let h = 1e-5;
        let f = |xv: f64| {
            e.eval(&vec![("x".to_string(), xv), ("y".to_string(), y)]).unwrap()
        };
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        // Central differences are second order; the scale guard keeps the
        // comparison meaningful when the derivative is large.
        let third = {
            let d3 = dx.differentiate("x").differentiate("x");
            d3.eval(&scope).map(|v| v.abs()).unwrap_or(0.0)
        };
        prop_assume!(third.is_finite() && third < 1e8);
        let budget = 1e-6 * (1.0 + sym.abs()) + h * h * third;
        prop_assert!(
            (sym - fd).abs() <= budget,
            "d/dx mismatch: symbolic {sym} vs fd {fd} (budget {budget})"
        );
    }

    #[test]
    fn mixed_partials_commute(
        e in expr_strategy(),
        x in -1.2..1.2f64,
        y in -1.2..1.2f64,
    ) {
        let scope = vec![("x".to_string(), x), ("y".to_string(), y)];
        let xy = e.differentiate("x").differentiate("y").eval(&scope).unwrap();
        let yx = e.differentiate("y").differentiate("x").eval(&scope).unwrap();
        prop_assume!(xy.is_finite() && xy.abs() < 1e9);
        prop_assert!((xy - yx).abs() <= 1e-10 * (1.0 + xy.abs()));
    }
}
