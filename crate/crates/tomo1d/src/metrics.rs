//! Distribution- and parameter-level error metrics.
//!
//! The Mallows distance is the L1 distance between quantile functions,
//! `int_0^1 |F^-1(p) - G^-1(p)| dp`, approximated by a midpoint rule over
//! equispaced probability nodes. Atoms are handled by the generalized
//! inverse `F^-1(p) = inf { x : F(x) >= p }`. The normalized variant divides
//! by the standard deviation of the reference distribution, which for the
//! atom-plus-exponential queueing law has the closed form
//! `sigma^2 = u v^2 (2 - u)` (from `E[X] = uv` and `E[X^2] = 2uv^2`, both
//! integrals of the survival function `u exp(-x/v)`).

use serde::{Deserialize, Serialize};

use crate::cf_gmm::MixtureLinkModel;
use crate::error::{Result, TomoError};

/// Families with exact quantile functions; grid curves fall back to linear
/// interpolation of the sampled CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnalyticCdf {
    Uniform { a: f64, b: f64 },
    /// Atom of mass `1 - u` at zero plus an exponential tail of scale `v`:
    /// `P(X > x) = u exp(-x / v)`.
    Mm1 { u: f64, v: f64 },
    Mixture(MixtureLinkModel),
}

impl AnalyticCdf {
    fn quantile(&self, p: f64) -> f64 {
        match self {
            AnalyticCdf::Uniform { a, b } => a + p * (b - a),
            AnalyticCdf::Mm1 { u, v } => {
                if p <= 1.0 - u {
                    0.0
                } else {
                    v * (u / (1.0 - p).max(f64::MIN_POSITIVE)).ln()
                }
            }
            AnalyticCdf::Mixture(model) => model.quantile(p),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            AnalyticCdf::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            AnalyticCdf::Mm1 { u, v } => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0 - u * (-x / v).exp()
                }
            }
            AnalyticCdf::Mixture(model) => model.cdf(x),
        }
    }

    /// Exact standard deviation when available in closed form.
    fn std_dev(&self) -> Option<f64> {
        match self {
            AnalyticCdf::Uniform { a, b } => Some((b - a).abs() / 12f64.sqrt()),
            AnalyticCdf::Mm1 { u, v } => Some((u * v * v * (2.0 - u)).sqrt()),
            AnalyticCdf::Mixture(_) => None,
        }
    }

    fn scaled(&self, s: f64) -> AnalyticCdf {
        match self {
            AnalyticCdf::Uniform { a, b } => AnalyticCdf::Uniform { a: a * s, b: b * s },
            AnalyticCdf::Mm1 { u, v } => AnalyticCdf::Mm1 { u: *u, v: v * s },
            AnalyticCdf::Mixture(m) => AnalyticCdf::Mixture(m.scaled(s)),
        }
    }
}

/// A cumulative distribution function on a finite grid, optionally tagged
/// with the closed form it was sampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfCurve {
    x: Vec<f64>,
    f: Vec<f64>,
    pub analytic: Option<AnalyticCdf>,
}

impl CdfCurve {
    /// Wrap a sampled CDF: `x` strictly increasing, `f` nondecreasing in
    /// [0, 1].
    pub fn from_grid(x: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if x.len() != f.len() || x.is_empty() {
            return Err(TomoError::InvalidParameter(
                "CDF grid and values must be nonempty and equal length".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(TomoError::InvalidParameter("CDF grid must be finite".into()));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TomoError::InvalidParameter(
                "CDF grid must be strictly increasing".into(),
            ));
        }
        if f.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) {
            return Err(TomoError::InvalidParameter(
                "CDF values must lie in [0, 1]".into(),
            ));
        }
        if f.windows(2).any(|w| w[0] > w[1] + 1e-12) {
            return Err(TomoError::InvalidParameter(
                "CDF values must be nondecreasing".into(),
            ));
        }
        Ok(Self { x, f, analytic: None })
    }

    /// Empirical CDF of a sample.
    pub fn empirical(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(TomoError::InvalidParameter(
                "empirical CDF needs finite, nonempty data".into(),
            ));
        }
        values.sort_by(|a, b| a.total_cmp(b));
        let n = values.len() as f64;
        let mut x = Vec::new();
        let mut f = Vec::new();
        let mut seen = 0usize;
        let mut i = 0;
        while i < values.len() {
            let v = values[i];
            let mut j = i;
            while j < values.len() && values[j] == v {
                j += 1;
            }
            seen += j - i;
            x.push(v);
            f.push(seen as f64 / n);
            i = j;
        }
        if x.len() == 1 {
            // A constant sample still needs a two-point grid.
            let v = x[0];
            let eps = v.abs().max(1.0) * 1e-12;
            x.insert(0, v - eps);
            f.insert(0, 0.0);
        }
        Self::from_grid(x, f)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(TomoError::InvalidParameter("need b > a".into()));
        }
        let mut curve = Self::from_grid(vec![a, b], vec![0.0, 1.0])?;
        curve.analytic = Some(AnalyticCdf::Uniform { a, b });
        Ok(curve)
    }

    /// Queueing delay law `P(X = 0) = 1 - u`, `P(X > x) = u exp(-x / v)`.
    pub fn mm1(u: f64, v: f64) -> Result<Self> {
        if !(u > 0.0 && u < 1.0) || !(v > 0.0) {
            return Err(TomoError::InvalidParameter(
                "utilization must be in (0,1) and scale positive".into(),
            ));
        }
        let analytic = AnalyticCdf::Mm1 { u, v };
        let mut curve = Self::sample_analytic(&analytic)?;
        curve.analytic = Some(analytic);
        Ok(curve)
    }

    pub fn from_mixture(model: &MixtureLinkModel) -> Result<Self> {
        let analytic = AnalyticCdf::Mixture(model.clone());
        let mut curve = Self::sample_analytic(&analytic)?;
        curve.analytic = Some(analytic);
        Ok(curve)
    }

    fn sample_analytic(analytic: &AnalyticCdf) -> Result<Self> {
        // Quantile-spaced grid dense enough for plotting and for grid-based
        // consumers; metric evaluation uses the exact quantiles anyway.
        let levels = 2048;
        let mut x = Vec::with_capacity(levels + 1);
        let mut f = Vec::with_capacity(levels + 1);
        let push = |xi: f64, analytic: &AnalyticCdf, x: &mut Vec<f64>, f: &mut Vec<f64>| {
            if x.last().map_or(true, |&last| xi > last) {
                x.push(xi);
                f.push(analytic.cdf(xi).clamp(0.0, 1.0));
            }
        };
        push(analytic.quantile(0.0).min(0.0), analytic, &mut x, &mut f);
        for i in 1..levels {
            let p = i as f64 / levels as f64;
            push(analytic.quantile(p), analytic, &mut x, &mut f);
        }
        push(analytic.quantile(1.0 - 1e-9), analytic, &mut x, &mut f);
        Self::from_grid(x, f)
    }

    pub fn grid(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.f)
    }

    /// Generalized inverse `inf { x : F(x) >= p }`, linearly interpolating
    /// between grid points for grid-backed curves.
    pub fn quantile(&self, p: f64) -> f64 {
        if let Some(a) = &self.analytic {
            return a.quantile(p);
        }
        let f = &self.f;
        let x = &self.x;
        if p <= f[0] {
            return x[0];
        }
        if p > *f.last().unwrap() {
            return *x.last().unwrap();
        }
        // First index with f[i] >= p.
        let mut lo = 0usize;
        let mut hi = f.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if f[mid] >= p {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let i = lo;
        let (f0, f1) = (f[i - 1], f[i]);
        if f1 <= f0 {
            return x[i];
        }
        let t = (p - f0) / (f1 - f0);
        x[i - 1] + t * (x[i] - x[i - 1])
    }

    /// Mean and standard deviation from the quantile function (exact when a
    /// closed form exists).
    pub fn std_dev(&self, n_nodes: usize) -> f64 {
        if let Some(sd) = self.analytic.as_ref().and_then(AnalyticCdf::std_dev) {
            return sd;
        }
        let n = n_nodes.max(16);
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for i in 0..n {
            let p = (i as f64 + 0.5) / n as f64;
            let q = self.quantile(p);
            m1 += q;
            m2 += q * q;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        (m2 - m1 * m1).max(0.0).sqrt()
    }

    /// Rescale the random variable by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(TomoError::InvalidParameter("scale must be positive".into()));
        }
        let mut curve = Self::from_grid(self.x.iter().map(|&v| v * s).collect(), self.f.clone())?;
        curve.analytic = self.analytic.as_ref().map(|a| a.scaled(s));
        Ok(curve)
    }

    /// CSV rows `x,F(x)` for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,cdf\n");
        for (xi, fi) in self.x.iter().zip(&self.f) {
            out.push_str(&crate::io::fmt_f64(*xi));
            out.push(',');
            out.push_str(&crate::io::fmt_f64(*fi));
            out.push('\n');
        }
        out
    }
}

/// Mallows distance via midpoint quadrature over `n_quantile_nodes`
/// probability nodes (none of which touch 0 or 1).
pub fn mallows_distance(f: &CdfCurve, g: &CdfCurve, n_quantile_nodes: usize) -> f64 {
    let n = n_quantile_nodes.max(1);
    let mut acc = 0.0;
    for i in 0..n {
        let p = (i as f64 + 0.5) / n as f64;
        acc += (f.quantile(p) - g.quantile(p)).abs();
    }
    acc / n as f64
}

/// Mallows distance divided by the standard deviation of `f_true`.
pub fn normalized_mallows(f_true: &CdfCurve, f_hat: &CdfCurve, n_nodes: usize) -> Result<f64> {
    let sd = f_true.std_dev(n_nodes.max(10_000));
    if !(sd > 0.0) {
        return Err(TomoError::DegenerateDistribution(
            "reference distribution has zero standard deviation".into(),
        ));
    }
    Ok(mallows_distance(f_true, f_hat, n_nodes) / sd)
}

/// Elementwise `|log theta_hat - log theta|`; both arguments must be
/// strictly positive.
pub fn log_abs_error(theta_hat: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    if theta_hat.len() != theta.len() {
        return Err(TomoError::DimensionMismatch(
            "estimate and truth differ in length".into(),
        ));
    }
    theta_hat
        .iter()
        .zip(theta)
        .map(|(&h, &t)| {
            if h > 0.0 && t > 0.0 {
                Ok((h.ln() - t.ln()).abs())
            } else {
                Err(TomoError::InvalidParameter(
                    "log error requires strictly positive entries".into(),
                ))
            }
        })
        .collect()
}
