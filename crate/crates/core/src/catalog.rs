//! Builtin metrics: flat space, round spheres, warped products (cones,
//! hyperbolic space, generic warps), the three-dimensional Levi-Civita
//! projective pair, warped pairs with their attached metrisability solution,
//! and affinely equivalent product pairs.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::chart::{Chart, MetricSpec};
use crate::expr::Expr;
use crate::parse::parse_expr;
use crate::{Error, Result};

/// A catalog metric, optionally with a projectively equivalent partner and
/// closed-form attachments used as oracles by the check suites.
#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub metric: MetricSpec,
    pub partner: Option<MetricSpec>,
    /// Metrisability solution in mixed components a^i_j, where one is known.
    pub solution: Option<Array2<Expr>>,
    /// Closed-form nullity eigenvalue B of `metric`, where one is known.
    pub b: Option<Expr>,
    /// Closed-form B of `partner`.
    pub partner_b: Option<Expr>,
    /// Warping function f(t) when `metric` is dt² + f(t)² h with t the
    /// first coordinate.
    pub warp_f: Option<Expr>,
}

impl CatalogEntry {
    fn plain(name: &str, metric: MetricSpec) -> CatalogEntry {
        CatalogEntry {
            name: name.to_string(),
            metric,
            partner: None,
            solution: None,
            b: None,
            partner_b: None,
            warp_f: None,
        }
    }
}

fn delta(n: usize) -> Array2<Expr> {
    Array2::from_shape_fn([n, n], |(i, j)| {
        Expr::constant(if i == j { 1.0 } else { 0.0 })
    })
}

/// Euclidean metric on the box [−1, 1]^n.
pub fn flat(n: usize) -> Result<CatalogEntry> {
    let coords = (1..=n).map(|i| format!("x{i}")).collect();
    let chart = Chart::new(coords, vec![[-1.0, 1.0]; n])?;
    let metric = MetricSpec::new(chart, delta(n), vec![])?;
    let mut entry = CatalogEntry::plain("flat", metric);
    entry.b = Some(Expr::zero());
    Ok(entry)
}

/// Unit round n-sphere in iterated polar coordinates t1..tn:
/// g = dt1² + sin²t1 (dt2² + sin²t2 (...)). Polar angles sample away from
/// the poles; the last angle box is long enough for full 2π loops.
pub fn round_sphere(n: usize) -> Result<CatalogEntry> {
    let coords: Vec<String> = (1..=n).map(|i| format!("t{i}")).collect();
    let mut bounds = vec![[0.4, 2.7]; n];
    bounds[n - 1] = [0.0, 7.0];
    let chart = Chart::new(coords.clone(), bounds)?;
    let mut g = Array2::from_elem([n, n], Expr::zero());
    for k in 0..n {
        let mut entry = Expr::one();
        for i in 0..k {
            entry = entry * Expr::symbol(&coords[i]).sin().powi(2);
        }
        g[[k, k]] = entry;
    }
    let metric = MetricSpec::new(chart, g, vec![])?;
    let mut entry = CatalogEntry::plain("round_sphere", metric);
    entry.b = Some(Expr::one());
    entry.warp_f = Some(Expr::symbol("t1").sin());
    Ok(entry)
}

fn warp_chart(t_box: [f64; 2], base: &MetricSpec) -> Result<Chart> {
    if base.chart.coords.iter().any(|c| c == "t") {
        return Err(Error::BadParams(
            "warped base already uses the coordinate name `t`".into(),
        ));
    }
    let mut coords = vec!["t".to_string()];
    coords.extend(base.chart.coords.iter().cloned());
    let mut bounds = vec![t_box];
    bounds.extend(base.chart.bounds.iter().cloned());
    Chart::new(coords, bounds)
}

fn check_positive_warp(f: &Expr, t_box: [f64; 2]) -> Result<()> {
    for k in 0..=20 {
        let t = t_box[0] + (t_box[1] - t_box[0]) * k as f64 / 20.0;
        let v = f.eval(&vec![("t".to_string(), t)])?;
        if v <= 0.0 {
            return Err(Error::BadParams(format!(
                "warping function is not positive on the box: f({t}) = {v}"
            )));
        }
    }
    Ok(())
}

fn warped_metric(f: &Expr, t_box: [f64; 2], base: &MetricSpec) -> Result<MetricSpec> {
    check_positive_warp(f, t_box)?;
    let chart = warp_chart(t_box, base)?;
    let n = chart.dim();
    let f2 = f.powi(2);
    let mut g = Array2::from_elem([n, n], Expr::zero());
    g[[0, 0]] = Expr::one();
    for i in 1..n {
        for j in 1..n {
            g[[i, j]] = f2.clone() * base.g[[i - 1, j - 1]].clone();
        }
    }
    MetricSpec::new(chart, g, base.params.clone())
}

/// Warped product g = dt² + f(t)² h over the given base, with the
/// closed-form B = −f''/f attached.
pub fn warped(f: &Expr, t_box: [f64; 2], base: &MetricSpec) -> Result<CatalogEntry> {
    let metric = warped_metric(f, t_box, base)?;
    let mut entry = CatalogEntry::plain("warped", metric);
    let fpp = f.differentiate("t").differentiate("t");
    entry.b = Some(-(fpp / f.clone()));
    entry.warp_f = Some(f.clone());
    Ok(entry)
}

/// Hyperbolic space as the warp f = e^t over a flat base (B = −1).
pub fn hyperbolic(n: usize) -> Result<CatalogEntry> {
    if n < 3 {
        return Err(Error::BadParams("hyperbolic needs n >= 3".into()));
    }
    let base = flat(n - 1)?.metric;
    let f = Expr::symbol("t").exp();
    let mut entry = warped(&f, [-1.0, 1.0], &base)?;
    entry.name = "hyperbolic".into();
    Ok(entry)
}

/// Cone over a flat base: the warp f = t (B = 0).
pub fn cone(n: usize) -> Result<CatalogEntry> {
    if n < 3 {
        return Err(Error::BadParams("cone needs n >= 3".into()));
    }
    let base = flat(n - 1)?.metric;
    let f = Expr::symbol("t");
    let mut entry = warped(&f, [0.5, 2.0], &base)?;
    entry.name = "cone".into();
    Ok(entry)
}

/// The classical three-dimensional Levi-Civita projectively equivalent pair
/// built from separated functions X_i(x^i). Sampling boxes keep the X_i
/// pairwise disjoint and away from zero, so both metrics are nondegenerate.
pub fn levi_civita_pair(x1: &Expr, x2: &Expr, x3: &Expr) -> Result<CatalogEntry> {
    let chart = Chart::new(
        vec!["x1".into(), "x2".into(), "x3".into()],
        vec![[5.0, 6.0], [1.0, 2.0], [-2.0, -1.0]],
    )?;
    let d12 = x1.clone() - x2.clone();
    let d13 = x1.clone() - x3.clone();
    let d23 = x2.clone() - x3.clone();
    let mut g = Array2::from_elem([3, 3], Expr::zero());
    g[[0, 0]] = d12.clone() * d13.clone();
    g[[1, 1]] = d12.clone() * d23.clone();
    g[[2, 2]] = d13.clone() * d23.clone();

    let mut gbar = Array2::from_elem([3, 3], Expr::zero());
    gbar[[0, 0]] = g[[0, 0]].clone() / (x1.powi(2) * x2.clone() * x3.clone());
    gbar[[1, 1]] = g[[1, 1]].clone() / (x1.clone() * x2.powi(2) * x3.clone());
    gbar[[2, 2]] = g[[2, 2]].clone() / (x1.clone() * x2.clone() * x3.powi(2));

    let metric = MetricSpec::new(chart.clone(), g, vec![])?;
    let partner = MetricSpec::new(chart, gbar, vec![])?;
    let mut entry = CatalogEntry::plain("levi_civita_pair", metric);
    entry.partner = Some(partner);
    Ok(entry)
}

/// A warped metric together with its projectively equivalent companion and
/// the attached metrisability solution a^i_j = diag(f² + C, C, …, C).
pub fn warped_pair(
    f: &Expr,
    t_box: [f64; 2],
    base: &MetricSpec,
    c: f64,
) -> Result<CatalogEntry> {
    if c == 0.0 {
        return Err(Error::BadParams("warped_pair needs C != 0".into()));
    }
    let mut entry = warped(f, t_box, base)?;
    entry.name = "warped_pair".into();
    let n = entry.metric.dim();

    let cc = Expr::constant(c);
    let f2 = f.powi(2);
    let denom = cc.clone() + f2.clone();
    // Companion must stay nondegenerate: C + f² may not vanish on the box.
    check_positive_warp(&denom, t_box).map_err(|_| {
        Error::BadParams("C + f(t)^2 vanishes on the sampling box".into())
    })?;

    let chart = warp_chart(t_box, base)?;
    let mut gbar = Array2::from_elem([n, n], Expr::zero());
    gbar[[0, 0]] = cc.clone() / denom.powi(2);
    for i in 1..n {
        for j in 1..n {
            gbar[[i, j]] =
                f2.clone() / denom.clone() * base.g[[i - 1, j - 1]].clone();
        }
    }
    entry.partner = Some(MetricSpec::new(chart, gbar, base.params.clone())?);

    let mut a = Array2::from_elem([n, n], Expr::zero());
    a[[0, 0]] = f2.clone() + cc.clone();
    for i in 1..n {
        a[[i, i]] = cc.clone();
    }
    entry.solution = Some(a);

    let fp = f.differentiate("t");
    let fpp = fp.differentiate("t");
    entry.partner_b =
        Some(-((denom * fpp - f.clone() * fp.powi(2)) / f.clone()));
    Ok(entry)
}

/// Affinely equivalent product pair (g1 ⊕ g2, g1 ⊕ 2·g2), the compact-product
/// construction with the complex structure stripped. Defaults to round S²
/// times a flat plane.
pub fn product_pair(m1: &MetricSpec, m2: &MetricSpec) -> Result<CatalogEntry> {
    for c in &m2.chart.coords {
        if m1.chart.coords.contains(c) {
            return Err(Error::BadParams(format!(
                "product factors share the coordinate name `{c}`"
            )));
        }
    }
    let n1 = m1.dim();
    let n2 = m2.dim();
    let n = n1 + n2;
    let mut coords = m1.chart.coords.clone();
    coords.extend(m2.chart.coords.iter().cloned());
    let mut bounds = m1.chart.bounds.clone();
    bounds.extend(m2.chart.bounds.iter().cloned());
    let chart = Chart::new(coords, bounds)?;

    let block = |w2: f64| -> Array2<Expr> {
        Array2::from_shape_fn([n, n], |(i, j)| {
            if i < n1 && j < n1 {
                m1.g[[i, j]].clone()
            } else if i >= n1 && j >= n1 {
                Expr::constant(w2) * m2.g[[i - n1, j - n1]].clone()
            } else {
                Expr::zero()
            }
        })
    };
    let mut params = m1.params.clone();
    params.extend(m2.params.iter().cloned());
    let metric = MetricSpec::new(chart.clone(), block(1.0), params.clone())?;
    let partner = MetricSpec::new(chart, block(2.0), params)?;
    let mut entry = CatalogEntry::plain("product_pair", metric);
    entry.partner = Some(partner);
    // The pair is affinely equivalent, so the attached solution has λ = 0:
    // a^i_j is the constant diagonal from a^{ij} = e^{2Υ} ḡ^{ij} g-raised.
    let w = 2f64.powf(n2 as f64 / (n as f64 + 1.0));
    let mut a = Array2::from_elem([n, n], Expr::zero());
    for i in 0..n {
        a[[i, i]] = Expr::constant(if i < n1 { w } else { w / 2.0 });
    }
    entry.solution = Some(a);
    Ok(entry)
}

fn get_usize(params: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| Error::BadParams(format!("`{key}` must be an integer, got `{s}`"))),
    }
}

fn get_f64(params: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| Error::BadParams(format!("`{key}` must be a number, got `{s}`"))),
    }
}

fn get_expr(params: &BTreeMap<String, String>, key: &str, default: &str) -> Result<Expr> {
    parse_expr(params.get(key).map(String::as_str).unwrap_or(default))
}

fn base_from_params(params: &BTreeMap<String, String>) -> Result<MetricSpec> {
    match params.get("base").map(String::as_str).unwrap_or("flat2") {
        "flat2" => Ok(flat(2)?.metric),
        "flat3" => Ok(flat(3)?.metric),
        "sphere2" => Ok(round_sphere(2)?.metric),
        other => Err(Error::BadParams(format!(
            "unknown base `{other}` (expected flat2, flat3, or sphere2)"
        ))),
    }
}

/// Looks up a catalog entry by name with string parameters (as given on the
/// command line: `catalog:warped_pair` with `--param f=sin(t)` etc.).
pub fn lookup(name: &str, params: &BTreeMap<String, String>) -> Result<CatalogEntry> {
    match name {
        "flat" => flat(get_usize(params, "n", 3)?),
        "round_sphere" => round_sphere(get_usize(params, "n", 3)?),
        "hyperbolic" => hyperbolic(get_usize(params, "n", 3)?),
        "cone" => cone(get_usize(params, "n", 3)?),
        "warped" => {
            let f = get_expr(params, "f", "2 + sin(t)")?;
            let base = base_from_params(params)?;
            let t0 = get_f64(params, "t0", -1.2)?;
            let t1 = get_f64(params, "t1", 1.2)?;
            warped(&f, [t0, t1], &base)
        }
        "warped_pair" => {
            let f = get_expr(params, "f", "2 + sin(t)")?;
            let base = base_from_params(params)?;
            let t0 = get_f64(params, "t0", -1.2)?;
            let t1 = get_f64(params, "t1", 1.2)?;
            let c = get_f64(params, "C", 1.0)?;
            warped_pair(&f, [t0, t1], &base, c)
        }
        "levi_civita_pair" => {
            let x1 = get_expr(params, "X1", "x1")?;
            let x2 = get_expr(params, "X2", "x2")?;
            let x3 = get_expr(params, "X3", "x3")?;
            levi_civita_pair(&x1, &x2, &x3)
        }
        "product_pair" => {
            let m1 = round_sphere(2)?.metric;
            let m2 = flat(2)?.metric;
            product_pair(&m1, &m2)
        }
        other => Err(Error::UnknownEntry(other.to_string())),
    }
}

/// Names and one-line descriptions for `catalog list`.
pub fn listing() -> Vec<(&'static str, &'static str)> {
    vec![
        ("flat", "Euclidean metric on [-1,1]^n (n=3)"),
        ("round_sphere", "unit n-sphere in iterated polar coordinates (n=3)"),
        ("hyperbolic", "warped f=exp(t) over a flat base, B=-1 (n=3)"),
        ("cone", "warped f=t over a flat base, B=0 (n=3)"),
        ("warped", "dt^2 + f(t)^2 h; params f, base, t0, t1 (default f=2+sin(t))"),
        (
            "warped_pair",
            "warped metric with its projective companion and solution a; params f, base, t0, t1, C",
        ),
        (
            "levi_civita_pair",
            "classical 3D projectively equivalent pair; params X1, X2, X3 (default x1, x2, x3)",
        ),
        ("product_pair", "affinely equivalent pair g1+g2 vs g1+2*g2 (S^2 x R^2)"),
    ]
}
