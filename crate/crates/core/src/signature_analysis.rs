//! Metric inertia and the eigenspace restrictions used to show that a metric
//! carrying a nontrivial projector solution is definite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended_operator::{assemble_l, PointClass};
use crate::tanno_system::{bundle_from_f, TannoProblem};
use crate::tensor_calculus::local::covariant_jets_of;
use crate::tensor_calculus::{ChartPoint, KahlerChart, SINGULAR_DET};

/// Numbers of positive and negative eigenvalues of a symmetric form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
}

impl std::fmt::Display for Inertia {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.positive, self.negative)
    }
}

/// Inertia of a symmetric matrix, ignoring eigenvalues within `zero_tol`.
pub fn inertia(form: &DMatrix<f64>, zero_tol: f64) -> Inertia {
    if form.is_empty() {
        return Inertia {
            positive: 0,
            negative: 0,
        };
    }
    let sym = (form + form.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    Inertia {
        positive: eig.eigenvalues.iter().filter(|x| **x > zero_tol).count(),
        negative: eig.eigenvalues.iter().filter(|x| **x < -zero_tol).count(),
    }
}

/// Inertia of `g` at `p`.
pub fn metric_signature(chart: &KahlerChart, p: &ChartPoint) -> Result<Inertia> {
    let g = chart.metric_at(p)?;
    let det = g.determinant();
    if det.abs() < SINGULAR_DET || !det.is_finite() {
        return Err(Error::SingularMetric { det });
    }
    Ok(inertia(&g, 0.0))
}

/// Gram matrix `form(b_i, b_j)` of a symmetric form on the span of `basis`.
/// An empty basis gives a `0×0` matrix.
pub fn restrict_form(form: &DMatrix<f64>, basis: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    if basis.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let dim = form.nrows();
    if let Some(v) = basis.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    let normalized: Vec<DVector<f64>> = basis.iter().map(|v| v.normalize()).collect();
    let b = DMatrix::from_columns(&normalized);
    let gram_det = (b.transpose() * &b).determinant();
    if !(gram_det > 1e-10) {
        return Err(Error::DegenerateBasis { gram_det });
    }
    let b = DMatrix::from_columns(basis);
    Ok(b.transpose() * form * b)
}

/// Basis of the eigenspace of `m` for the real eigenvalue `lambda`, from the
/// singular vectors of `m − λ·Id` with singular value at most
/// `tol · max(‖m‖, 1)`.
pub fn eigenspace_basis(m: &DMatrix<f64>, lambda: f64, tol: f64) -> Vec<DVector<f64>> {
    let n = m.nrows();
    let shifted = m - DMatrix::<f64>::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let cutoff = tol * m.norm().max(1.0);
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cutoff)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect()
}

/// Global conclusion drawn from the per-point inertia.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureVerdict {
    Positive,
    Negative,
    Indefinite,
    /// Inertia changes between samples, which a continuous nondegenerate
    /// metric cannot do; signals a numerical or input problem.
    MixedAcrossPoints,
}

/// Inertia at one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointInertia {
    pub point: ChartPoint,
    pub inertia: Inertia,
}

/// What was checked at a critical point of `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalWitness {
    pub point: ChartPoint,
    pub mu: f64,
    pub classification: PointClass,
    /// Coordinate norm of `grad μ` after refinement.
    pub grad_norm: f64,
    /// Eigenvalue of `a^i_j` whose eigenspace is examined: 0 at a maximum,
    /// 1 at a minimum.
    pub eigenvalue: f64,
    pub subspace_dim: usize,
    /// Inertia of `g` restricted to the eigenspace.
    pub restricted_metric: Inertia,
    /// Largest eigenvalue of `μ_{,ij}` at a maximum, smallest at a minimum.
    pub hessian_extreme: f64,
    /// `‖μ_{,ij}|E ∓ 2 g|E‖` (sign `+` at a maximum, `−` at a minimum).
    pub restriction_identity: f64,
}

/// Output of [`positivity_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureReport {
    /// Inertia at the first sample.
    pub n_pos: usize,
    pub n_neg: usize,
    pub per_point: Vec<PointInertia>,
    pub verdict: SignatureVerdict,
    /// False for trivial operators (`L = 0` or `L = Id`, i.e. constant
    /// solutions), in which case only the inertia is reported.
    pub hypothesis_met: bool,
    pub maximum: Option<ExtremalWitness>,
    pub minimum: Option<ExtremalWitness>,
    /// Point classes seen among the samples and the refined critical points.
    pub witnessed: Vec<PointClass>,
    pub notes: Vec<String>,
}

/// Tolerances for [`positivity_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Bound on `‖L² − L‖`.
    pub projector_tol: f64,
    /// Gradient norm below which a point counts as critical.
    pub grad_tol: f64,
    /// Eigenvalue tolerance for clustering and eigenspaces.
    pub cluster_tol: f64,
    /// Refinement starts taken from each end of the `μ` range.
    pub starts: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            projector_tol: 1e-7,
            grad_tol: 1e-6,
            cluster_tol: 1e-6,
            starts: 3,
        }
    }
}

fn verdict_of(per_point: &[PointInertia], dim: usize) -> SignatureVerdict {
    let first = per_point[0].inertia;
    if per_point.iter().any(|p| p.inertia != first) {
        SignatureVerdict::MixedAcrossPoints
    } else if first.positive == dim {
        SignatureVerdict::Positive
    } else if first.negative == dim {
        SignatureVerdict::Negative
    } else {
        SignatureVerdict::Indefinite
    }
}

/// Coordinate value, gradient and Hessian of `μ = −2f`.
fn mu_taylor(prob: &TannoProblem, p: &ChartPoint) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let dim = prob.chart.dim();
    let mu = prob.field.jet_at(p, 2)?.scale(-2.0);
    let grad = DVector::from_fn(dim, |i, _| mu.partial(&[i]));
    let hess = DMatrix::from_fn(dim, dim, |i, j| mu.partial(&[i, j]));
    Ok((mu.value(), grad, hess))
}

/// Monotone search for a critical point of `μ`, climbing when `sign > 0` and
/// descending otherwise. A pseudo-inverse Newton step is taken when it moves
/// `μ` the right way, so degenerate critical manifolds are approached along
/// their normal directions; otherwise a backtracking gradient step.
fn refine_critical_point(
    prob: &TannoProblem,
    start: &ChartPoint,
    sign: f64,
) -> Result<(ChartPoint, f64)> {
    let mut x = start.to_vector();
    let (mut mu, mut grad, mut hess) = mu_taylor(prob, start)?;
    let mut gnorm = grad.norm();
    let slack = |mu: f64| 1e-15 * mu.abs().max(1.0);
    for _ in 0..300 {
        if gnorm < 1e-14 {
            break;
        }
        let svd = hess.clone().svd(true, true);
        let cutoff = 1e-10 * svd.singular_values.max().max(1e-300);
        let mut accepted = false;
        if let Ok(step) = svd.solve(&grad, cutoff) {
            let trial = &x - &step;
            let p = ChartPoint::from_vector_unchecked(&trial);
            if prob.chart.contains(&p) {
                let (m2, g2, h2) = mu_taylor(prob, &p)?;
                if sign * (m2 - mu) >= -slack(mu) && g2.norm() < gnorm {
                    (x, mu, grad, hess) = (trial, m2, g2, h2);
                    accepted = true;
                }
            }
        }
        if !accepted {
            let mut t = 1.0;
            while t > 1e-12 {
                let trial = &x + &grad * (sign * t);
                let p = ChartPoint::from_vector_unchecked(&trial);
                if prob.chart.contains(&p) {
                    let (m2, g2, h2) = mu_taylor(prob, &p)?;
                    if sign * (m2 - mu) >= 1e-4 * t * gnorm * gnorm {
                        (x, mu, grad, hess) = (trial, m2, g2, h2);
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        if !accepted {
            break;
        }
        gnorm = grad.norm();
    }
    Ok((ChartPoint::from_vector_unchecked(&x), gnorm))
}

fn classify_mu(mu: f64, tol: f64) -> PointClass {
    if (mu - 1.0).abs() <= tol {
        PointClass::MuMax
    } else if mu.abs() <= tol {
        PointClass::MuMin
    } else {
        PointClass::Interior
    }
}

fn witness_at(
    prob: &TannoProblem,
    point: ChartPoint,
    grad_norm: f64,
    class: PointClass,
    opts: &ScanOptions,
) -> Result<ExtremalWitness> {
    let chart = &prob.chart;
    let dim = chart.dim();
    let g = chart.metric_at(&point)?;
    let ginv = chart.inverse_metric_at(&point)?;
    let bundle = bundle_from_f(prob, &point)?;
    let mixed = &ginv * &bundle.a;
    let mu_jet = prob.field.jet_at(&point, 2)?.scale(-2.0);
    let hess_jets = covariant_jets_of(chart, &mu_jet, &point, 2)?;
    let hess = DMatrix::from_fn(dim, dim, |i, j| hess_jets[i * dim + j].value());
    let hess = (&hess + hess.transpose()) * 0.5;

    let (eigenvalue, sign) = match class {
        PointClass::MuMax => (0.0, 1.0),
        _ => (1.0, -1.0),
    };
    let basis = eigenspace_basis(&mixed, eigenvalue, opts.cluster_tol);
    let g_restricted = restrict_form(&g, &basis)?;
    let h_restricted = restrict_form(&hess, &basis)?;
    let restriction_identity = if basis.is_empty() {
        0.0
    } else {
        (&h_restricted + &g_restricted * (2.0 * sign)).norm()
    };
    let eig = SymmetricEigen::new(hess).eigenvalues;
    let hessian_extreme = match class {
        PointClass::MuMax => eig.max(),
        _ => eig.min(),
    };
    Ok(ExtremalWitness {
        point,
        mu: bundle.mu,
        classification: class,
        grad_norm,
        eigenvalue,
        subspace_dim: basis.len(),
        restricted_metric: inertia(&g_restricted, opts.cluster_tol),
        hessian_extreme,
        restriction_identity,
    })
}

/// Inertia of `g` at every sample together with the eigenspace checks at the
/// critical points of `μ`, for a solution whose `L` is a projector. Requires
/// `c = 1`.
pub fn positivity_scan(
    prob: &TannoProblem,
    samples: &[ChartPoint],
    opts: &ScanOptions,
) -> Result<SignatureReport> {
    prob.require_unit()?;
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "positivity scan needs at least one sample".into(),
        ));
    }
    let chart = &prob.chart;
    let dim = chart.dim();
    let per_point: Vec<PointInertia> = samples
        .par_iter()
        .map(|p| {
            Ok(PointInertia {
                point: p.clone(),
                inertia: metric_signature(chart, p)?,
            })
        })
        .collect::<Result<_>>()?;
    let verdict = verdict_of(&per_point, dim);
    let first = per_point[0].inertia;
    let mut notes = Vec::new();
    if verdict == SignatureVerdict::MixedAcrossPoints {
        notes.push("metric inertia differs between samples".to_string());
    }

    let l = assemble_l(prob, &samples[0])?.entries;
    let idempotency = (&l * &l - &l).norm();
    if idempotency > opts.projector_tol {
        return Err(Error::NotProjector {
            residual: idempotency,
        });
    }
    let n = l.nrows();
    let trivial = l.norm() <= opts.projector_tol
        || (&l - DMatrix::<f64>::identity(n, n)).norm() <= opts.projector_tol;
    if trivial {
        notes.push(
            "constant solution: L is 0 or the identity, so the definiteness hypothesis is not met"
                .to_string(),
        );
        return Ok(SignatureReport {
            n_pos: first.positive,
            n_neg: first.negative,
            per_point,
            verdict,
            hypothesis_met: false,
            maximum: None,
            minimum: None,
            witnessed: Vec::new(),
            notes,
        });
    }

    let mut mus: Vec<(f64, usize)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, p)| Ok((mu_taylor(prob, p)?.0, i)))
        .collect::<Result<_>>()?;
    mus.sort_by(|a, b| a.0.total_cmp(&b.0));
    let starts: Vec<(usize, f64)> = {
        let k = opts.starts.min(mus.len());
        let mut s: Vec<(usize, f64)> = mus[..k].iter().map(|m| (m.1, -1.0)).collect();
        s.extend(mus[mus.len() - k..].iter().map(|m| (m.1, 1.0)));
        s
    };
    let refined: Vec<(ChartPoint, f64)> = starts
        .par_iter()
        .map(|&(i, sign)| refine_critical_point(prob, &samples[i], sign))
        .collect::<Result<_>>()?;

    let class_tol = opts.grad_tol.sqrt().max(opts.projector_tol);
    let mut witnessed: Vec<PointClass> = mus.iter().map(|m| classify_mu(m.0, class_tol)).collect();
    let mut maximum: Option<(ChartPoint, f64)> = None;
    let mut minimum: Option<(ChartPoint, f64)> = None;
    let mut best_gradient = f64::INFINITY;
    for (p, gnorm) in refined {
        best_gradient = best_gradient.min(gnorm);
        if gnorm >= opts.grad_tol {
            continue;
        }
        let mu = mu_taylor(prob, &p)?.0;
        let slot = match classify_mu(mu, class_tol) {
            PointClass::MuMax => &mut maximum,
            PointClass::MuMin => &mut minimum,
            PointClass::Interior => {
                notes.push(format!("critical point with μ = {mu} outside {{0, 1}}"));
                continue;
            }
        };
        if slot.as_ref().is_none_or(|(_, g)| gnorm < *g) {
            *slot = Some((p, gnorm));
        }
    }
    if maximum.is_none() && minimum.is_none() {
        return Err(Error::NoExtremalPoint { best_gradient });
    }
    let maximum = maximum
        .map(|(p, g)| witness_at(prob, p, g, PointClass::MuMax, opts))
        .transpose()?;
    let minimum = minimum
        .map(|(p, g)| witness_at(prob, p, g, PointClass::MuMin, opts))
        .transpose()?;
    witnessed.extend(maximum.iter().map(|w| w.classification));
    witnessed.extend(minimum.iter().map(|w| w.classification));
    witnessed.sort_by_key(|c| *c as u8);
    witnessed.dedup();
    if maximum.is_none() {
        notes.push("no critical point with μ = 1 inside the chart".to_string());
    }
    if minimum.is_none() {
        notes.push("no critical point with μ = 0 inside the chart".to_string());
    }
    Ok(SignatureReport {
        n_pos: first.positive,
        n_neg: first.negative,
        per_point,
        verdict,
        hypothesis_met: true,
        maximum,
        minimum,
        witnessed,
        notes,
    })
}
