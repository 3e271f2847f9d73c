//! Dense tensors at a point, symbolic tensor fields, and exact covariant
//! differentiation through symbolic Christoffel symbols.
//!
//! Two computation paths coexist on purpose. Curvature packs (module
//! `curvature`) work on numeric jets; this module differentiates expression
//! fields symbolically, which is what nested covariant derivatives (third
//! derivatives in the Gallot-Obata-Tanno equation, prolongation residuals)
//! need to stay exact.

use std::sync::Arc;

use ndarray::{Array1, Array2, Array3, ArrayD, IxDyn};
use once_cell::sync::OnceCell;

use crate::chart::MetricSpec;
use crate::expr::Expr;
use crate::{Error, Result};

/// Index position.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Slot {
    Up,
    Down,
}

/// Ordered index positions of a tensor, e.g. `^i_jkl`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Valence(pub Vec<Slot>);

impl Valence {
    /// Parses a valence string such as `"^i_jkl"`: each letter after `^` is
    /// an upper slot, each letter after `_` a lower slot.
    pub fn parse(s: &str) -> Result<Valence> {
        let mut slots = Vec::new();
        let mut current = None;
        for c in s.chars() {
            match c {
                '^' => current = Some(Slot::Up),
                '_' => current = Some(Slot::Down),
                c if c.is_ascii_alphabetic() => match current {
                    Some(slot) => slots.push(slot),
                    None => {
                        return Err(Error::ValenceMismatch(format!(
                            "index `{c}` before any `^` or `_` in `{s}`"
                        )))
                    }
                },
                c if c.is_whitespace() => {}
                c => {
                    return Err(Error::ValenceMismatch(format!(
                        "unexpected `{c}` in valence `{s}`"
                    )))
                }
            }
        }
        Ok(Valence(slots))
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn scalar() -> Valence {
        Valence(Vec::new())
    }

    /// Valence with one more lower index appended (a covariant derivative).
    pub fn with_lower(&self) -> Valence {
        let mut v = self.0.clone();
        v.push(Slot::Down);
        Valence(v)
    }
}

/// Numeric tensor components at a point.
#[derive(Clone, Debug)]
pub struct Tensor {
    pub valence: Valence,
    pub comps: ArrayD<f64>,
    pub point: Vec<f64>,
}

impl Tensor {
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Tensor field with symbolic components.
#[derive(Clone)]
pub struct ExprField {
    pub valence: Valence,
    pub comps: ArrayD<Expr>,
}

impl ExprField {
    pub fn scalar(e: Expr) -> ExprField {
        ExprField {
            valence: Valence::scalar(),
            comps: ArrayD::from_elem(IxDyn(&[]), e),
        }
    }

    pub fn vector(comps: Array1<Expr>, slot: Slot) -> ExprField {
        ExprField {
            valence: Valence(vec![slot]),
            comps: comps.into_dyn(),
        }
    }

    pub fn matrix(comps: Array2<Expr>, slots: [Slot; 2]) -> ExprField {
        ExprField {
            valence: Valence(slots.to_vec()),
            comps: comps.into_dyn(),
        }
    }

    pub fn rank(&self) -> usize {
        self.valence.rank()
    }
}

/// All multi-indices of the given rank over `0..n`, in row-major order.
pub fn multi_indices(rank: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; rank]];
    let total = n.pow(rank as u32);
    out.reserve(total.saturating_sub(1));
    for flat in 1..total {
        let mut idx = vec![0; rank];
        let mut rest = flat;
        for pos in (0..rank).rev() {
            idx[pos] = rest % n;
            rest /= n;
        }
        out.push(idx);
    }
    out
}

/// Symbolic determinant by cofactor expansion along the first row.
pub fn sym_det(m: &Array2<Expr>) -> Expr {
    let n = m.nrows();
    if n == 1 {
        return m[[0, 0]].clone();
    }
    let mut acc = Expr::zero();
    for j in 0..n {
        let minor = Array2::from_shape_fn([n - 1, n - 1], |(r, c)| {
            m[[r + 1, if c < j { c } else { c + 1 }]].clone()
        });
        let term = Expr::mul(m[[0, j]].clone(), sym_det(&minor));
        acc = if j % 2 == 0 {
            Expr::add(acc, term)
        } else {
            Expr::sub(acc, term)
        };
    }
    acc
}

/// Cofactor of entry (i, j): signed determinant of the complementary minor.
fn sym_cofactor(m: &Array2<Expr>, i: usize, j: usize) -> Expr {
    let n = m.nrows();
    let minor = Array2::from_shape_fn([n - 1, n - 1], |(r, c)| {
        m[[if r < i { r } else { r + 1 }, if c < j { c } else { c + 1 }]].clone()
    });
    let d = if n == 1 { Expr::one() } else { sym_det(&minor) };
    if (i + j) % 2 == 0 {
        d
    } else {
        d.neg()
    }
}

/// Symbolic matrix inverse via the adjugate: inv[i][j] = cof(j, i)/det.
pub fn sym_inverse(m: &Array2<Expr>) -> Array2<Expr> {
    let n = m.nrows();
    let det = sym_det(m);
    Array2::from_shape_fn([n, n], |(i, j)| {
        Expr::div(sym_cofactor(m, j, i), det.clone())
    })
}

/// Comatrix (adjugate transpose convention of `com(M)^i_j = cof(i, j)`),
/// so that `M · com(M)^T = det(M) · Id`. Built by explicit cofactors, which
/// stays exact when `M` is singular.
pub fn sym_comatrix(m: &Array2<Expr>) -> Array2<Expr> {
    let n = m.nrows();
    // Adjugate: adj[i][j] = cof(j, i); M · adj = det · Id for every M.
    Array2::from_shape_fn([n, n], |(i, j)| sym_cofactor(m, j, i))
}

/// Symbolic Levi-Civita geometry of a metric spec: inverse metric,
/// Christoffel symbols, Ricci and projective Schouten tensors, and exact
/// covariant derivatives of expression fields.
pub struct SymbolicGeometry {
    pub spec: MetricSpec,
    pub det: Expr,
    pub ginv: Array2<Expr>,
    /// gamma[[i,j,k]] = Γ^i_jk
    pub gamma: Array3<Expr>,
    ricci: OnceCell<Array2<Expr>>,
}

impl SymbolicGeometry {
    pub fn new(spec: &MetricSpec) -> Arc<SymbolicGeometry> {
        let n = spec.dim();
        let names = spec.chart.coords.clone();
        let det = sym_det(&spec.g);
        let ginv = sym_inverse(&spec.g);
        let dg = Array3::from_shape_fn([n, n, n], |(i, j, k)| {
            spec.g[[i, j]].differentiate(&names[k])
        });
        let gamma = Array3::from_shape_fn([n, n, n], |(i, j, k)| {
            let mut acc = Expr::zero();
            for s in 0..n {
                let inner = Expr::sub(
                    Expr::add(dg[[s, k, j]].clone(), dg[[s, j, k]].clone()),
                    dg[[j, k, s]].clone(),
                );
                acc = Expr::add(acc, Expr::mul(ginv[[i, s]].clone(), inner));
            }
            Expr::mul(Expr::constant(0.5), acc)
        });
        Arc::new(SymbolicGeometry {
            spec: spec.clone(),
            det,
            ginv,
            gamma,
            ricci: OnceCell::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Symbolic Ricci tensor, Ric_jk = R^a_{jak}.
    pub fn ricci(&self) -> &Array2<Expr> {
        self.ricci.get_or_init(|| {
            let n = self.dim();
            let names = &self.spec.chart.coords;
            Array2::from_shape_fn([n, n], |(j, k)| {
                let mut acc = Expr::zero();
                for a in 0..n {
                    // R^a_{jak} = ∂_a Γ^a_{kj} − ∂_k Γ^a_{aj}
                    //           + Γ^a_{as} Γ^s_{kj} − Γ^a_{ks} Γ^s_{aj}
                    acc = Expr::add(acc, self.gamma[[a, k, j]].differentiate(&names[a]));
                    acc = Expr::sub(acc, self.gamma[[a, a, j]].differentiate(&names[k]));
                    for s in 0..n {
                        acc = Expr::add(
                            acc,
                            Expr::mul(
                                self.gamma[[a, a, s]].clone(),
                                self.gamma[[s, k, j]].clone(),
                            ),
                        );
                        acc = Expr::sub(
                            acc,
                            Expr::mul(
                                self.gamma[[a, k, s]].clone(),
                                self.gamma[[s, a, j]].clone(),
                            ),
                        );
                    }
                }
                acc
            })
        })
    }

    /// Projective Schouten tensor P = Ric/(n−1).
    pub fn schouten(&self) -> Array2<Expr> {
        let n = self.dim();
        self.ricci()
            .mapv(|e| Expr::div(e, Expr::constant((n - 1) as f64)))
    }

    /// Covariant derivative of an expression field; the new lower index is
    /// appended last, so `out[..., k] = ∇_k field[...]`.
    pub fn cov_derivative(&self, field: &ExprField) -> ExprField {
        let n = self.dim();
        let names = &self.spec.chart.coords;
        let rank = field.rank();
        let mut out = ArrayD::from_elem(IxDyn(&vec![n; rank + 1]), Expr::zero());
        for idx in multi_indices(rank + 1, n) {
            let k = idx[rank];
            let base = &idx[..rank];
            let mut acc = field.comps[IxDyn(base)].differentiate(&names[k]);
            for (pos, slot) in field.valence.0.iter().enumerate() {
                for m in 0..n {
                    let mut swapped = base.to_vec();
                    swapped[pos] = m;
                    let t = field.comps[IxDyn(&swapped)].clone();
                    match slot {
                        Slot::Up => {
                            acc = Expr::add(
                                acc,
                                Expr::mul(self.gamma[[base[pos], k, m]].clone(), t),
                            );
                        }
                        Slot::Down => {
                            acc = Expr::sub(
                                acc,
                                Expr::mul(self.gamma[[m, base[pos], k]].clone(), t),
                            );
                        }
                    }
                }
            }
            out[IxDyn(&idx)] = acc;
        }
        ExprField {
            valence: field.valence.with_lower(),
            comps: out,
        }
    }

    /// Gradient covector of a scalar expression.
    pub fn grad(&self, s: &Expr) -> ExprField {
        let names = &self.spec.chart.coords;
        ExprField::vector(
            Array1::from_iter(names.iter().map(|c| s.differentiate(c))),
            Slot::Down,
        )
    }

    /// Raises the index of a gradient: v^i = g^{is} ∂_s f.
    pub fn grad_up(&self, s: &Expr) -> ExprField {
        let n = self.dim();
        let names = &self.spec.chart.coords;
        ExprField::vector(
            Array1::from_shape_fn(n, |i| {
                let mut acc = Expr::zero();
                for k in 0..n {
                    acc = Expr::add(
                        acc,
                        Expr::mul(self.ginv[[i, k]].clone(), s.differentiate(&names[k])),
                    );
                }
                acc
            }),
            Slot::Up,
        )
    }

    /// Evaluates a symbolic field at a point.
    pub fn eval_field(&self, field: &ExprField, point: &[f64]) -> Result<Tensor> {
        let scope = self.spec.scope(point);
        let mut comps = ArrayD::zeros(field.comps.raw_dim());
        for (dst, src) in comps.iter_mut().zip(field.comps.iter()) {
            *dst = src.eval(&scope)?;
        }
        Ok(Tensor {
            valence: field.valence.clone(),
            comps,
            point: point.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{metric_jet, Chart};
    use crate::parse::parse_expr;

    fn warped(f_src: &str) -> MetricSpec {
        let chart = Chart::new(
            vec!["t".into(), "x".into(), "y".into()],
            vec![[-1.2, 1.2], [-1.0, 1.0], [-1.0, 1.0]],
        )
        .unwrap();
        let f2 = parse_expr(&format!("({f_src})^2")).unwrap();
        let mut g = Array2::from_elem([3, 3], Expr::zero());
        g[[0, 0]] = Expr::one();
        g[[1, 1]] = f2.clone();
        g[[2, 2]] = f2;
        MetricSpec::new(chart, g, vec![]).unwrap()
    }

    #[test]
    fn sym_inverse_matches_numeric() {
        let spec = warped("2 + sin(t)");
        let geom = SymbolicGeometry::new(&spec);
        let p = [0.4, 0.1, -0.3];
        let jet = metric_jet(&spec, &p).unwrap();
        let scope = spec.scope(&p);
        for i in 0..3 {
            for j in 0..3 {
                let v = geom.ginv[[i, j]].eval(&scope).unwrap();
                assert!((v - jet.ginv[[i, j]]).abs() < 1e-12);
            }
        }
        let d = geom.det.eval(&scope).unwrap();
        assert!((d - jet.det).abs() < 1e-12 * (1.0 + jet.det.abs()));
    }

    #[test]
    fn comatrix_identity() {
        // M · adj(M) = det(M) Id, including at a singular matrix.
        let m = Array2::from_shape_vec(
            [3, 3],
            vec![
                Expr::symbol("a"),
                Expr::one(),
                Expr::zero(),
                Expr::one(),
                Expr::symbol("a"),
                Expr::zero(),
                Expr::zero(),
                Expr::zero(),
                Expr::constant(2.0),
            ],
        )
        .unwrap();
        let adj = sym_comatrix(&m);
        let det = sym_det(&m);
        for a in [1.0, -1.0, 0.37] {
            // a = 1 makes M singular.
            let scope = vec![("a".to_string(), a)];
            let d = det.eval(&scope).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for s in 0..3 {
                        acc += m[[i, s]].eval(&scope).unwrap()
                            * adj[[s, j]].eval(&scope).unwrap();
                    }
                    let expect = if i == j { d } else { 0.0 };
                    assert!((acc - expect).abs() < 1e-12, "a={a} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn metric_is_parallel() {
        let spec = warped("2 + sin(t)");
        let geom = SymbolicGeometry::new(&spec);
        let gfield = ExprField::matrix(spec.g.clone(), [Slot::Down, Slot::Down]);
        let nabla_g = geom.cov_derivative(&gfield);
        let t = geom.eval_field(&nabla_g, &[0.7, 0.2, -0.5]).unwrap();
        assert!(t.max_abs() < 1e-10, "|∇g| = {}", t.max_abs());
    }

    #[test]
    fn concircular_derivative_on_warped() {
        // v = f(t) ∂_t has ∇_j v^i = f'(t) δ^i_j.
        let spec = warped("2 + sin(t)");
        let geom = SymbolicGeometry::new(&spec);
        let f = parse_expr("2 + sin(t)").unwrap();
        let mut comps = Array1::from_elem(3, Expr::zero());
        comps[0] = f.clone();
        let v = ExprField::vector(comps, Slot::Up);
        let dv = geom.cov_derivative(&v);
        let p = [0.7, 0.2, -0.5];
        let t = geom.eval_field(&dv, &p).unwrap();
        let fp = f.differentiate("t").eval(&spec.scope(&p)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { fp } else { 0.0 };
                assert!(
                    (t.comps[[i, j]] - expect).abs() < 1e-9,
                    "({i},{j}): {} vs {expect}",
                    t.comps[[i, j]]
                );
            }
        }
    }

    #[test]
    fn valence_parse() {
        let v = Valence::parse("^i_jkl").unwrap();
        assert_eq!(v.0, vec![Slot::Up, Slot::Down, Slot::Down, Slot::Down]);
        assert!(Valence::parse("ij").is_err());
    }
}
