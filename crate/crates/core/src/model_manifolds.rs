//! Concrete pseudo-Kähler charts, test functions on them, and geodesics.
//!
//! Complex coordinates are split as `z_a = x_{2a} + i x_{2a+1}` (0-based), and
//! the complex structure is multiplication by `i`: `J ∂_{x} = ∂_{y}`,
//! `J ∂_{y} = −∂_{x}` on every complex line.

use std::sync::Arc;

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor_calculus::local::LocalGeometry;
use crate::tensor_calculus::{ChartPoint, ClosedFormField, JetMatrixFn, KahlerChart};

/// Coordinate radius of the affine Fubini–Study chart.
pub const FUBINI_STUDY_DOMAIN: f64 = 2.0;
/// Coordinate radius of flat charts.
pub const FLAT_DOMAIN: f64 = 10.0;

/// Tolerance on `g(v, v)` for tagging a geodesic as lightlike.
pub const LIGHTLIKE_TOL: f64 = 1e-8;

fn standard_complex_structure(dim: usize) -> JetMatrixFn {
    Arc::new(move |x: &[Jet]| {
        let mut out = vec![x[0].zero_like(); dim * dim];
        for a in 0..dim / 2 {
            let (re, im) = (2 * a, 2 * a + 1);
            out[im * dim + re] = x[0].constant_like(1.0);
            out[re * dim + im] = x[0].constant_like(-1.0);
        }
        out
    })
}

/// `CP(n)` in the affine chart `z ↦ [1 : z]`, with the Fubini–Study metric
/// normalized to holomorphic sectional curvature 1 (so `CP(1)` is the unit
/// sphere in stereographic coordinates and `g(0) = 4·Id`).
///
/// The Hermitian metric is `h_{ab̄} = 4 (δ_ab (1+|z|²) − z̄_a z_b) / (1+|z|²)²`
/// and `g = Re h`.
pub fn fubini_study_chart(n: usize) -> Result<KahlerChart> {
    if n == 0 {
        return Err(Error::InvalidInput("CP(n) needs n >= 1".into()));
    }
    let dim = 2 * n;
    let metric: JetMatrixFn = Arc::new(move |x: &[Jet]| {
        let mut s = x[0].constant_like(1.0);
        for xi in x {
            s += &(xi * xi);
        }
        let inv_s2 = (&s * &s).recip().scale(4.0);
        let mut out = vec![x[0].zero_like(); dim * dim];
        for a in 0..n {
            for b in 0..n {
                let (xa, ya) = (&x[2 * a], &x[2 * a + 1]);
                let (xb, yb) = (&x[2 * b], &x[2 * b + 1]);
                let mut re = -(xa * xb + ya * yb);
                if a == b {
                    re += &s;
                }
                let re = &re * &inv_s2;
                let im = -(&(xa * yb - ya * xb) * &inv_s2);
                out[(2 * a) * dim + 2 * b] = re.clone();
                out[(2 * a + 1) * dim + 2 * b + 1] = re;
                out[(2 * a) * dim + 2 * b + 1] = im.clone();
                out[(2 * a + 1) * dim + 2 * b] = -im;
            }
        }
        out
    });
    KahlerChart::new(
        format!("fubini_study(n={n})"),
        dim,
        FUBINI_STUDY_DOMAIN,
        metric,
        standard_complex_structure(dim),
    )
}

/// Flat `C^{p+q}` with metric of signature `(2p, 2q)`: the first `p` complex
/// coordinates are positive, the remaining `q` negative.
pub fn flat_kahler_chart(p: usize, q: usize) -> Result<KahlerChart> {
    if p + q == 0 {
        return Err(Error::InvalidInput("flat chart needs p + q >= 1".into()));
    }
    let dim = 2 * (p + q);
    let metric: JetMatrixFn = Arc::new(move |x: &[Jet]| {
        let mut out = vec![x[0].zero_like(); dim * dim];
        for i in 0..dim {
            let sign = if i < 2 * p { 1.0 } else { -1.0 };
            out[i * dim + i] = x[0].constant_like(sign);
        }
        out
    });
    KahlerChart::new(
        format!("flat(p={p},q={q})"),
        dim,
        FLAT_DOMAIN,
        metric,
        standard_complex_structure(dim),
    )
}

fn homogeneous_weight(x: &[Jet], axis: usize) -> (Jet, Jet) {
    let mut s = x[0].constant_like(1.0);
    for xi in x {
        s += &(xi * xi);
    }
    let numer = if axis == 0 {
        x[0].constant_like(1.0)
    } else {
        let (re, im) = (&x[2 * axis - 2], &x[2 * axis - 1]);
        re * re + im * im
    };
    (numer, s)
}

fn check_axis(n: usize, axis: usize) -> Result<()> {
    if n == 0 || axis > n {
        return Err(Error::InvalidInput(format!(
            "axis must lie in 0..={n} for CP({n}), got {axis}"
        )));
    }
    Ok(())
}

/// First-eigenvalue eigenfunction `(n+1)|Z_axis|²/|Z|² − 1` of the
/// Fubini–Study Laplacian, with homogeneous coordinates `Z = (1, z)`.
///
/// For `n = 1, axis = 0` this is the height `(1−|z|²)/(1+|z|²)` on the unit sphere.
pub fn cpn_height_function(n: usize, axis: usize) -> Result<ClosedFormField> {
    check_axis(n, axis)?;
    let weight = (n + 1) as f64;
    Ok(ClosedFormField::new(
        2 * n,
        format!("height(n={n},axis={axis})"),
        move |x: &[Jet]| {
            let (numer, s) = homogeneous_weight(x, axis);
            (&numer / &s).scale(weight) - 1.0
        },
    ))
}

/// Square of [`cpn_height_function`]. On `CP(1)` (the unit sphere) this is a
/// second-eigenvalue eigenfunction up to a constant.
pub fn cpn_height_squared(n: usize, axis: usize) -> Result<ClosedFormField> {
    check_axis(n, axis)?;
    let weight = (n + 1) as f64;
    Ok(ClosedFormField::new(
        2 * n,
        format!("height_squared(n={n},axis={axis})"),
        move |x: &[Jet]| {
            let (numer, s) = homogeneous_weight(x, axis);
            let h = (&numer / &s).scale(weight) - 1.0;
            &h * &h
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CausalType {
    Spacelike,
    Timelike,
    Lightlike,
}

impl CausalType {
    pub fn classify(norm: f64) -> CausalType {
        if norm.abs() <= LIGHTLIKE_TOL {
            CausalType::Lightlike
        } else if norm > 0.0 {
            CausalType::Spacelike
        } else {
            CausalType::Timelike
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSample {
    pub t: f64,
    pub point: ChartPoint,
    pub velocity: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub samples: Vec<GeodesicSample>,
    pub causal_type: CausalType,
    /// `g(v0, v0)`.
    pub initial_norm: f64,
    /// Largest `|g(ẋ, ẋ) − g(v0, v0)|` over the samples.
    pub norm_drift: f64,
    /// Set when the path was truncated at the chart boundary.
    pub left_domain: bool,
    pub steps: usize,
}

impl GeodesicPath {
    /// Turns a truncated path into [`Error::LeftDomain`].
    pub fn ensure_inside(&self) -> Result<&GeodesicPath> {
        if self.left_domain {
            let t = self.samples.last().map_or(0.0, |s| s.t);
            return Err(Error::LeftDomain { t });
        }
        Ok(self)
    }

    pub fn end(&self) -> &GeodesicSample {
        self.samples
            .last()
            .expect("geodesic has at least one sample")
    }
}

const GEODESIC_TOL: f64 = 1e-8;
const GEODESIC_MAX_STEPS: usize = 1 << 18;

fn acceleration(chart: &KahlerChart, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = chart.dim();
    let geometry = LocalGeometry::at(chart, &ChartPoint::from_vector_unchecked(x), 0)?;
    let gamma = geometry.christoffel_values();
    Ok(DVector::from_fn(dim, |k, _| {
        let mut acc = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                acc += gamma[(k * dim + i) * dim + j] * v[i] * v[j];
            }
        }
        -acc
    }))
}

fn quadratic_norm(chart: &KahlerChart, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let g = chart.metric_at(&ChartPoint::from_vector_unchecked(x))?;
    Ok(v.dot(&(g * v)))
}

struct RawPath {
    samples: Vec<GeodesicSample>,
    left_domain: bool,
}

fn rk4_geodesic(
    chart: &KahlerChart,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    t_end: f64,
    steps: usize,
) -> RawPath {
    let h = t_end / steps as f64;
    let mut x = x0.clone();
    let mut v = v0.clone();
    let mut samples = vec![GeodesicSample {
        t: 0.0,
        point: ChartPoint::from_vector_unchecked(&x),
        velocity: v.clone(),
    }];
    for step in 0..steps {
        let stage = || -> Result<(DVector<f64>, DVector<f64>)> {
            let a1 = acceleration(chart, &x, &v)?;
            let (x2, v2) = (&x + &v * (h / 2.0), &v + &a1 * (h / 2.0));
            let a2 = acceleration(chart, &x2, &v2)?;
            let (x3, v3) = (&x + &v2 * (h / 2.0), &v + &a2 * (h / 2.0));
            let a3 = acceleration(chart, &x3, &v3)?;
            let (x4, v4) = (&x + &v3 * h, &v + &a3 * h);
            let a4 = acceleration(chart, &x4, &v4)?;
            let dx = (&v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
            let dv = (&a1 + &a2 * 2.0 + &a3 * 2.0 + &a4) * (h / 6.0);
            Ok((&x + dx, &v + dv))
        };
        match stage() {
            Ok((nx, nv)) if chart.contains(&ChartPoint::from_vector_unchecked(&nx)) => {
                x = nx;
                v = nv;
            }
            _ => {
                return RawPath {
                    samples,
                    left_domain: true,
                }
            }
        }
        samples.push(GeodesicSample {
            t: (step + 1) as f64 * h,
            point: ChartPoint::from_vector_unchecked(&x),
            velocity: v.clone(),
        });
    }
    RawPath {
        samples,
        left_domain: false,
    }
}

fn max_drift(chart: &KahlerChart, samples: &[GeodesicSample], norm0: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in samples {
        let q = quadratic_norm(chart, &s.point.to_vector(), &s.velocity)?;
        worst = worst.max((q - norm0).abs());
    }
    Ok(worst)
}

/// Integrates `ẍ^k + Γ^k_ij ẋ^i ẋ^j = 0` on `[0, t_end]` with classical RK4.
///
/// The step count starts at `steps` and is doubled until `g(ẋ, ẋ)` is
/// conserved to `1e−8·(1+|g(v0,v0)|)` and successive resolutions agree to
/// `1e−8` in position. A path that reaches the chart boundary is returned
/// truncated with `left_domain` set.
pub fn integrate_geodesic(
    chart: &KahlerChart,
    x0: &ChartPoint,
    v0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<GeodesicPath> {
    chart.check_point(x0)?;
    if v0.len() != chart.dim() {
        return Err(Error::DimensionMismatch {
            expected: chart.dim(),
            found: v0.len(),
        });
    }
    if steps < 16 {
        return Err(Error::InvalidInput(format!(
            "geodesic integration needs at least 16 steps, got {steps}"
        )));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidInput(format!("invalid end time {t_end}")));
    }
    let x = x0.to_vector();
    let v = DVector::from_column_slice(v0);
    let norm0 = quadratic_norm(chart, &x, &v)?;
    let drift_tol = GEODESIC_TOL * (1.0 + norm0.abs());

    let mut n = steps;
    let mut coarse = rk4_geodesic(chart, &x, &v, t_end, n);
    loop {
        if coarse.left_domain {
            let drift = max_drift(chart, &coarse.samples, norm0)?;
            return Ok(GeodesicPath {
                samples: coarse.samples,
                causal_type: CausalType::classify(norm0),
                initial_norm: norm0,
                norm_drift: drift,
                left_domain: true,
                steps: n,
            });
        }
        let fine = rk4_geodesic(chart, &x, &v, t_end, 2 * n);
        let drift = max_drift(chart, &fine.samples, norm0)?;
        let position_gap = if fine.left_domain {
            f64::INFINITY
        } else {
            coarse
                .samples
                .iter()
                .zip(fine.samples.iter().step_by(2))
                .map(|(a, b)| (a.point.to_vector() - b.point.to_vector()).amax())
                .fold(0.0, f64::max)
                / 15.0
        };
        if !fine.left_domain && drift <= drift_tol && position_gap <= GEODESIC_TOL {
            return Ok(GeodesicPath {
                samples: fine.samples,
                causal_type: CausalType::classify(norm0),
                initial_norm: norm0,
                norm_drift: drift,
                left_domain: false,
                steps: 2 * n,
            });
        }
        n *= 2;
        if n > GEODESIC_MAX_STEPS {
            return Err(Error::NonConvergence(format!(
                "geodesic did not converge with {n} steps (drift {drift:e})"
            )));
        }
        coarse = fine;
    }
}

/// `count` points drawn uniformly from the coordinate ball of the given radius.
/// Deterministic for a fixed seed.
pub fn sample_points(
    chart: &KahlerChart,
    count: usize,
    seed: u64,
    radius: f64,
) -> Result<Vec<ChartPoint>> {
    if !(radius > 0.0 && radius <= chart.domain_radius()) {
        return Err(Error::InvalidInput(format!(
            "sampling radius {radius} must lie in (0, {}]",
            chart.domain_radius()
        )));
    }
    let dim = chart.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let u: f64 = rng.random();
        let r = radius * u.powf(1.0 / dim as f64);
        let coords = dir.iter().map(|x| x / norm * r).collect();
        out.push(ChartPoint::new(coords)?);
    }
    Ok(out)
}

/// A random vector with `g(v, v) = 0` at `p` and unit Euclidean length,
/// mixing positive and negative eigendirections of `g` in equal measure.
pub fn random_lightlike_vector<R: Rng + ?Sized>(
    chart: &KahlerChart,
    p: &ChartPoint,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let g = chart.metric_at(p)?;
    let eig = SymmetricEigen::new(g.clone());
    let dim = chart.dim();
    let mut pos = DVector::zeros(dim);
    let mut neg = DVector::zeros(dim);
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let weight: f64 = rng.sample(StandardNormal);
        let column = eig.eigenvectors.column(k) * weight;
        if *lambda > 0.0 {
            pos += column;
        } else {
            neg += column;
        }
    }
    let gp = pos.dot(&(&g * &pos));
    let gn = -neg.dot(&(&g * &neg));
    if !(gp > 0.0 && gn > 0.0) {
        return Err(Error::InvalidInput(format!(
            "metric of {} is definite at this point; no lightlike directions",
            chart.name()
        )));
    }
    let v = pos / gp.sqrt() + neg / gn.sqrt();
    Ok(v.normalize())
}
