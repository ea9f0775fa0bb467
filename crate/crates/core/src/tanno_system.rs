//! The third-order Tanno equation, its first-order reformulation and transport
//! of solutions along curves.
//!
//! With `c = 1` a solution `f` corresponds to the bundle
//! `a_ij = −f_{,ij} − 2f g_ij`, `f_i = f_{,i}`, `μ = −2f`, which satisfies the
//! closed first-order system
//!
//! ```text
//! a_{ij,k} = f_i g_jk + f_j g_ik − f̄_i J_jk − f̄_j J_ik
//! f_{i,j}  = μ g_ij − a_ij
//! μ_{,i}   = −2 f_i
//! ```
//!
//! Operations documented as "c = 1" reject problems with any other constant;
//! use [`TannoProblem::rescaled`] to absorb a nonzero constant into the metric.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::model_manifolds::{CausalType, GeodesicPath};
use crate::tensor_calculus::local::{
    covariant_derivative, covariant_jets, covariant_jets_of, jets_to_matrix, LocalGeometry,
};
use crate::tensor_calculus::{
    ChartPoint, CotensorField, KahlerChart, ScalarField, SharedField, TensorValue, Variance,
};

/// Longest polyline segment accepted by [`transport_bundle`].
pub const TRANSPORT_SEGMENT_BOUND: f64 = 0.5;
/// Internal RK4 step length used when densifying a polyline.
pub const TRANSPORT_SUBSTEP: f64 = 2e-2;

/// A candidate solution `f` of the Tanno equation with constant `c` on a chart.
#[derive(Clone)]
pub struct TannoProblem {
    pub chart: KahlerChart,
    pub field: SharedField,
    pub c: f64,
}

impl std::fmt::Debug for TannoProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TannoProblem")
            .field("chart", &self.chart.name())
            .field("field", &self.field.label())
            .field("c", &self.c)
            .finish()
    }
}

impl TannoProblem {
    pub fn new(chart: KahlerChart, field: SharedField, c: f64) -> Result<TannoProblem> {
        if !c.is_finite() {
            return Err(Error::InvalidInput(format!(
                "constant c must be finite (got {c})"
            )));
        }
        if field.dim() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: field.dim(),
            });
        }
        Ok(TannoProblem { chart, field, c })
    }

    /// The same field on the chart with metric `c·g`, where it solves the
    /// equation with constant 1.
    pub fn rescaled(&self) -> Result<TannoProblem> {
        if self.c == 0.0 {
            return Err(Error::InvalidInput(
                "c = 0 cannot be absorbed into the metric".into(),
            ));
        }
        Ok(TannoProblem {
            chart: self.chart.scaled(self.c)?,
            field: Arc::clone(&self.field),
            c: 1.0,
        })
    }

    /// The same chart and constant with another field.
    pub fn with_field(&self, field: SharedField) -> Result<TannoProblem> {
        TannoProblem::new(self.chart.clone(), field, self.c)
    }

    pub(crate) fn require_unit(&self) -> Result<()> {
        if self.c != 1.0 {
            return Err(Error::InvalidInput(format!(
                "operation assumes c = 1 (got c = {}); rescale the chart first",
                self.c
            )));
        }
        Ok(())
    }
}

/// `(a_ij, f_i, μ)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionBundle {
    pub a: DMatrix<f64>,
    pub grad: DVector<f64>,
    pub mu: f64,
}

impl SolutionBundle {
    pub fn zero(dim: usize) -> SolutionBundle {
        SolutionBundle {
            a: DMatrix::zeros(dim, dim),
            grad: DVector::zeros(dim),
            mu: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// `α·u + β·v`.
    pub fn combine(
        alpha: f64,
        u: &SolutionBundle,
        beta: f64,
        v: &SolutionBundle,
    ) -> SolutionBundle {
        SolutionBundle {
            a: &u.a * alpha + &v.a * beta,
            grad: &u.grad * alpha + &v.grad * beta,
            mu: alpha * u.mu + beta * v.mu,
        }
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &SolutionBundle) -> f64 {
        let a = (&self.a - &other.a).amax();
        let g = (&self.grad - &other.grad).amax();
        a.max(g).max((self.mu - other.mu).abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.a.amax().max(self.grad.amax()).max(self.mu.abs())
    }

    /// `f̄_i = J^α_i f_α`.
    pub fn grad_bar(&self, j: &DMatrix<f64>) -> DVector<f64> {
        j.transpose() * &self.grad
    }

    /// `‖Jᵀ a J − a‖`.
    pub fn hermitian_defect(&self, j: &DMatrix<f64>) -> f64 {
        (j.transpose() * &self.a * j - &self.a).norm()
    }

    fn to_state(&self) -> DVector<f64> {
        let dim = self.dim();
        let mut s = DVector::zeros(dim * dim + dim + 1);
        for i in 0..dim {
            for j in 0..dim {
                s[i * dim + j] = self.a[(i, j)];
            }
            s[dim * dim + i] = self.grad[i];
        }
        s[dim * dim + dim] = self.mu;
        s
    }

    fn from_state(s: &DVector<f64>, dim: usize) -> SolutionBundle {
        SolutionBundle {
            a: DMatrix::from_fn(dim, dim, |i, j| s[i * dim + j]),
            grad: DVector::from_fn(dim, |i, _| s[dim * dim + i]),
            mu: s[dim * dim + dim],
        }
    }
}

/// Jets of the bundle built from a field, one Taylor order below the field.
pub(crate) struct BundleJets {
    pub a: Vec<Jet>,
    pub grad: Vec<Jet>,
    pub mu: Jet,
}

/// The bundle of `field` expanded to Taylor order `order` around `p`.
pub(crate) fn bundle_jets(
    chart: &KahlerChart,
    field: &dyn ScalarField,
    p: &ChartPoint,
    order: usize,
) -> Result<BundleJets> {
    chart.check_point(p)?;
    let dim = chart.dim();
    let f_full = field.jet_at(p, order + 2)?;
    let hess = covariant_jets_of(chart, &f_full, p, 2)?;
    let f = f_full.truncate(order);
    let g = chart.metric_jets(p, order)?;
    let a = (0..dim * dim)
        .map(|ij| {
            let mut x = -&hess[ij];
            x.axpy(-2.0, &(&f * &g[ij]));
            x
        })
        .collect();
    let grad = (0..dim)
        .map(|i| f_full.derivative(i).truncate(order))
        .collect();
    let mu = f.scale(-2.0);
    Ok(BundleJets { a, grad, mu })
}

/// `f_i g_jk + f_j g_ik − f̄_i J_jk − f̄_j J_ik` at `(i * dim + j) * dim + k`.
fn main_rhs(grad: &DVector<f64>, g: &DMatrix<f64>, j: &DMatrix<f64>) -> Vec<f64> {
    let dim = grad.len();
    let bar = j.transpose() * grad;
    let jl = g * j;
    let mut out = vec![0.0; dim * dim * dim];
    for i in 0..dim {
        for jj in 0..dim {
            for k in 0..dim {
                out[(i * dim + jj) * dim + k] = grad[i] * g[(jj, k)] + grad[jj] * g[(i, k)]
                    - bar[i] * jl[(jj, k)]
                    - bar[jj] * jl[(i, k)];
            }
        }
    }
    out
}

fn norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn third_order_residual(prob: &TannoProblem, p: &ChartPoint, with_j: bool) -> Result<TensorValue> {
    let chart = &prob.chart;
    let dim = chart.dim();
    let f3 = covariant_jets(chart, prob.field.as_ref(), p, 3, 0)?;
    let f = prob.field.jet_at(p, 1)?;
    let grad = DVector::from_vec(f.gradient());
    let g = chart.metric_at(p)?;
    let j = chart.complex_structure_at(p)?;
    let bar = j.transpose() * &grad;
    let jl = &g * &j;
    let mut out = vec![0.0; dim * dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            for k in 0..dim {
                let idx = (a * dim + b) * dim + k;
                let mut term =
                    2.0 * grad[k] * g[(a, b)] + grad[a] * g[(b, k)] + grad[b] * g[(a, k)];
                if with_j {
                    term -= bar[a] * jl[(b, k)] + bar[b] * jl[(a, k)];
                }
                out[idx] = f3[idx].value() + prob.c * term;
            }
        }
    }
    TensorValue::new(dim, vec![Variance::Lower; 3], out)
}

/// Left side of the Tanno equation, `f_{,ijk} + c(2f_k g_ij + f_i g_jk +
/// f_j g_ik − f̄_i J_jk − f̄_j J_ik)`.
pub fn tanno_residual(prob: &TannoProblem, p: &ChartPoint) -> Result<TensorValue> {
    third_order_residual(prob, p, true)
}

/// As [`tanno_residual`] without the complex-structure terms.
pub fn gallot_tanno_residual(prob: &TannoProblem, p: &ChartPoint) -> Result<TensorValue> {
    third_order_residual(prob, p, false)
}

/// `‖(Δf)_{,k} + 4c(n+1) f_{,k}‖` with `n` the complex dimension.
pub fn laplace_identity_residual(prob: &TannoProblem, p: &ChartPoint) -> Result<f64> {
    let chart = &prob.chart;
    chart.check_point(p)?;
    let dim = chart.dim();
    let f = prob.field.jet_at(p, 3)?;
    let hess = covariant_jets_of(chart, &f, p, 2)?;
    let geometry = LocalGeometry::at(chart, p, 1)?;
    let mut lap = Jet::zero(dim, 1);
    for ij in 0..dim * dim {
        lap += &(&geometry.inverse[ij] * &hess[ij]);
    }
    let factor = 4.0 * prob.c * (chart.complex_dim() as f64 + 1.0);
    Ok(norm((0..dim).map(|k| {
        lap.derivative(k).value() + factor * f.partial(&[k])
    })))
}

/// `(a, f_i, μ)` at `p`. Requires `c = 1`.
pub fn bundle_from_f(prob: &TannoProblem, p: &ChartPoint) -> Result<SolutionBundle> {
    prob.require_unit()?;
    let dim = prob.chart.dim();
    let b = bundle_jets(&prob.chart, prob.field.as_ref(), p, 0)?;
    Ok(SolutionBundle {
        a: jets_to_matrix(&b.a, dim),
        grad: DVector::from_iterator(dim, b.grad.iter().map(Jet::value)),
        mu: b.mu.value(),
    })
}

/// `f = −μ/2`.
pub fn f_from_mu(mu: f64) -> f64 {
    -0.5 * mu
}

/// Residual norms of the three first-order equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemResiduals {
    /// `‖a_{ij,k} − (f_i g_jk + f_j g_ik − f̄_i J_jk − f̄_j J_ik)‖`.
    pub main: f64,
    /// `‖f_{i,j} − μ g_ij + a_ij‖`.
    pub gradient: f64,
    /// `‖μ_{,i} + 2 f_i‖`.
    pub mu: f64,
}

impl SystemResiduals {
    pub fn max(&self) -> f64 {
        self.main.max(self.gradient).max(self.mu)
    }
}

/// Residuals of the first-order system for the bundle built from `f`.
/// Requires `c = 1`.
pub fn system_residual(prob: &TannoProblem, p: &ChartPoint) -> Result<SystemResiduals> {
    prob.require_unit()?;
    let chart = &prob.chart;
    let dim = chart.dim();
    let b = bundle_jets(chart, prob.field.as_ref(), p, 1)?;
    let geometry = LocalGeometry::at(chart, p, 0)?;
    let g = geometry.metric_values();
    let j = chart.complex_structure_at(p)?;
    let grad = DVector::from_iterator(dim, b.grad.iter().map(Jet::value));
    let mu = b.mu.value();

    let da = covariant_derivative(
        &b.a,
        &[Variance::Lower, Variance::Lower],
        &geometry.christoffel,
        dim,
    );
    let rhs = main_rhs(&grad, &g, &j);
    let main = norm(da.iter().zip(&rhs).map(|(x, r)| x.value() - r));

    let df = covariant_derivative(&b.grad, &[Variance::Lower], &geometry.christoffel, dim);
    let gradient = norm((0..dim * dim).map(|ij| {
        let (i, jj) = (ij / dim, ij % dim);
        df[ij].value() - (mu * g[(i, jj)] - b.a[ij].value())
    }));

    let mu_res = norm((0..dim).map(|i| b.mu.partial(&[i]) + 2.0 * grad[i]));
    Ok(SystemResiduals {
        main,
        gradient,
        mu: mu_res,
    })
}

/// `‖f_i − ¼ (a^α_α)_{,i}‖`. Requires `c = 1`.
pub fn trace_identity_residual(prob: &TannoProblem, p: &ChartPoint) -> Result<f64> {
    prob.require_unit()?;
    let chart = &prob.chart;
    let dim = chart.dim();
    let b = bundle_jets(chart, prob.field.as_ref(), p, 1)?;
    let geometry = LocalGeometry::at(chart, p, 1)?;
    let mut trace = Jet::zero(dim, 1);
    for ij in 0..dim * dim {
        trace += &(&geometry.inverse[ij] * &b.a[ij]);
    }
    Ok(norm(
        (0..dim).map(|i| b.grad[i].value() - 0.25 * trace.partial(&[i])),
    ))
}

/// The `a_ij` component of the bundle of a field, as a cotensor field.
#[derive(Clone)]
pub struct BundleTensorField {
    chart: KahlerChart,
    field: SharedField,
}

impl BundleTensorField {
    pub fn new(chart: KahlerChart, field: SharedField) -> BundleTensorField {
        BundleTensorField { chart, field }
    }
}

impl CotensorField for BundleTensorField {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn jets_at(&self, p: &ChartPoint, order: usize) -> Result<Vec<Jet>> {
        Ok(bundle_jets(&self.chart, self.field.as_ref(), p, order)?.a)
    }
}

/// Coordinate derivative of the bundle state along `velocity` at `x`.
fn transport_rhs(
    chart: &KahlerChart,
    x: &DVector<f64>,
    velocity: &DVector<f64>,
    state: &DVector<f64>,
) -> Result<DVector<f64>> {
    let dim = chart.dim();
    let p = ChartPoint::from_vector_unchecked(x);
    let geometry = LocalGeometry::at(chart, &p, 0)?;
    let g = geometry.metric_values();
    let gamma = geometry.christoffel_values();
    let j = chart.complex_structure_at(&p)?;
    let b = SolutionBundle::from_state(state, dim);
    let rhs = main_rhs(&b.grad, &g, &j);
    let gm = |m: usize, k: usize, i: usize| gamma[(m * dim + k) * dim + i];

    let mut out = DVector::zeros(state.len());
    for i in 0..dim {
        for jj in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                let mut d = rhs[(i * dim + jj) * dim + k];
                for m in 0..dim {
                    d += gm(m, k, i) * b.a[(m, jj)] + gm(m, k, jj) * b.a[(i, m)];
                }
                acc += velocity[k] * d;
            }
            out[i * dim + jj] = acc;
        }
        let mut acc = 0.0;
        for k in 0..dim {
            let mut d = b.mu * g[(i, k)] - b.a[(i, k)];
            for m in 0..dim {
                d += gm(m, k, i) * b.grad[m];
            }
            acc += velocity[k] * d;
        }
        out[dim * dim + i] = acc;
    }
    out[dim * dim + dim] = -2.0 * b.grad.dot(velocity);
    Ok(out)
}

/// Integrates the first-order system along a polyline, starting from `init`
/// at the first vertex. Each segment is traversed at constant coordinate
/// speed with RK4 steps no longer than [`TRANSPORT_SUBSTEP`].
pub fn transport_bundle(
    chart: &KahlerChart,
    path: &[ChartPoint],
    init: &SolutionBundle,
) -> Result<SolutionBundle> {
    let dim = chart.dim();
    if init.dim() != dim || init.a.nrows() != dim || init.a.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: init.dim(),
        });
    }
    let Some(first) = path.first() else {
        return Err(Error::InvalidInput("transport path is empty".into()));
    };
    chart.check_point(first)?;
    let mut state = init.to_state();
    for pair in path.windows(2) {
        chart.check_point(&pair[1])?;
        let start = pair[0].to_vector();
        let delta = pair[1].to_vector() - &start;
        let length = delta.norm();
        if length > TRANSPORT_SEGMENT_BOUND {
            return Err(Error::StepTooLarge {
                length,
                bound: TRANSPORT_SEGMENT_BOUND,
            });
        }
        if length == 0.0 {
            continue;
        }
        let steps = (length / TRANSPORT_SUBSTEP).ceil().max(1.0) as usize;
        let h = 1.0 / steps as f64;
        let at = |s: f64| &start + &delta * s;
        for step in 0..steps {
            let s = step as f64 * h;
            let k1 = transport_rhs(chart, &at(s), &delta, &state)?;
            let k2 = transport_rhs(chart, &at(s + 0.5 * h), &delta, &(&state + &k1 * (0.5 * h)))?;
            let k3 = transport_rhs(chart, &at(s + 0.5 * h), &delta, &(&state + &k2 * (0.5 * h)))?;
            let k4 = transport_rhs(chart, &at(s + h), &delta, &(&state + &k3 * h))?;
            state += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    Ok(SolutionBundle::from_state(&state, dim))
}

/// Largest `|d³/dt³ f(γ(t))|` over the samples of a lightlike geodesic.
///
/// The curve is expanded to third order at each sample from the geodesic
/// equation, `ẍ = −Γ(ẋ, ẋ)` and `x⃛ = −∂Γ(ẋ; ẋ, ẋ) − 2Γ(ẍ, ẋ)`, and composed with
/// the Taylor expansion of `f`.
pub fn lightlike_third_derivative(
    chart: &KahlerChart,
    f: &dyn ScalarField,
    geo: &GeodesicPath,
) -> Result<f64> {
    if geo.causal_type != CausalType::Lightlike {
        return Err(Error::NotLightlike {
            norm: geo.initial_norm,
        });
    }
    let dim = chart.dim();
    let mut worst: f64 = 0.0;
    for sample in &geo.samples {
        let p = &sample.point;
        let v = &sample.velocity;
        let geometry = LocalGeometry::at(chart, p, 1)?;
        let gamma = &geometry.christoffel;
        let idx = |k: usize, i: usize, j: usize| (k * dim + i) * dim + j;

        let mut acc = vec![0.0; dim];
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    acc[k] -= gamma[idx(k, i, j)].value() * v[i] * v[j];
                }
            }
        }
        let mut jerk = vec![0.0; dim];
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    let gk = &gamma[idx(k, i, j)];
                    let mut dg = 0.0;
                    for m in 0..dim {
                        dg += gk.partial(&[m]) * v[m];
                    }
                    jerk[k] -= dg * v[i] * v[j] + 2.0 * gk.value() * acc[i] * v[j];
                }
            }
        }

        let t = Jet::variable(1, 3, 0, 0.0);
        let t2 = &t * &t;
        let t3 = &t2 * &t;
        let offsets: Vec<Jet> = (0..dim)
            .map(|k| &(&t * v[k] + &t2 * (0.5 * acc[k])) + &t3 * (jerk[k] / 6.0))
            .collect();
        let f_jet = f.jet_at(p, 3)?;
        let along = f_jet.compose(&offsets);
        worst = worst.max(along.partial(&[0, 0, 0]).abs());
    }
    Ok(worst)
}
