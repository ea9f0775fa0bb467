//! Finite-difference oracle built only from point values of `g`, `J` and `f`.
//! Nothing here touches the jet machinery.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use tanno_core::tensor_calculus::{ChartPoint, KahlerChart, ScalarField};

/// Base step of the central differences.
pub const STEP: f64 = 2e-2;

fn point(x: &[f64]) -> ChartPoint {
    ChartPoint::new(x.to_vec()).unwrap()
}

/// Central difference of a vector-valued map along coordinate `d`, refined
/// by two Richardson levels (error `O(h⁶)`).
pub fn fd_vec<F>(f: &F, x: &[f64], d: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let diff = |h: f64| {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[d] += h;
        minus[d] -= h;
        let (a, b) = (f(&plus), f(&minus));
        a.iter()
            .zip(&b)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect::<Vec<_>>()
    };
    let d0 = diff(STEP);
    let d1 = diff(STEP / 2.0);
    let d2 = diff(STEP / 4.0);
    (0..d0.len())
        .map(|i| {
            let r1 = (4.0 * d1[i] - d0[i]) / 3.0;
            let r2 = (4.0 * d2[i] - d1[i]) / 3.0;
            (16.0 * r2 - r1) / 15.0
        })
        .collect()
}

/// Gradient of a scalar map.
pub fn fd_gradient<F>(f: &F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    (0..x.len())
        .map(|d| fd_vec(&|y: &[f64]| vec![f(y)], x, d)[0])
        .collect()
}

/// Matrix of second partials.
pub fn fd_hessian<F>(f: &F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x.len();
    let mut h = DMatrix::zeros(dim, dim);
    for d in 0..dim {
        let col = fd_vec(&|y: &[f64]| fd_gradient(f, y), x, d);
        for i in 0..dim {
            h[(i, d)] = col[i];
        }
    }
    (&h + h.transpose()) * 0.5
}

pub fn metric(chart: &KahlerChart, x: &[f64]) -> DMatrix<f64> {
    chart.metric_at(&point(x)).unwrap()
}

pub fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let dim = m.nrows();
    (0..dim * dim).map(|k| m[(k / dim, k % dim)]).collect()
}

/// `Γ^k_ij` at `(k * dim + i) * dim + j`.
pub fn christoffel(chart: &KahlerChart, x: &[f64]) -> Vec<f64> {
    let dim = x.len();
    let ginv = metric(chart, x).try_inverse().unwrap();
    let dg: Vec<Vec<f64>> = (0..dim)
        .map(|m| fd_vec(&|y: &[f64]| flatten(&metric(chart, y)), x, m))
        .collect();
    let g = |m: usize, a: usize, b: usize| dg[m][a * dim + b];
    let mut out = vec![0.0; dim * dim * dim];
    for k in 0..dim {
        for i in 0..dim {
            for j in 0..dim {
                out[(k * dim + i) * dim + j] = 0.5
                    * (0..dim)
                        .map(|l| ginv[(k, l)] * (g(i, l, j) + g(j, l, i) - g(l, i, j)))
                        .sum::<f64>();
            }
        }
    }
    out
}

/// `f_{,ij} = ∂_i∂_j f − Γ^m_ij ∂_m f`.
pub fn covariant_hessian(chart: &KahlerChart, f: &dyn ScalarField, x: &[f64]) -> DMatrix<f64> {
    let value = |y: &[f64]| f.value_at(&point(y)).unwrap();
    let dim = x.len();
    let grad = fd_gradient(&value, x);
    let gamma = christoffel(chart, x);
    let mut h = fd_hessian(&value, x);
    for i in 0..dim {
        for j in 0..dim {
            h[(i, j)] -= (0..dim)
                .map(|m| gamma[(m * dim + i) * dim + j] * grad[m])
                .sum::<f64>();
        }
    }
    h
}

/// `f_{,ijk}` at `(i * dim + j) * dim + k`, by differentiating the covariant
/// Hessian along `k` and correcting with `Γ`.
pub fn covariant_third(chart: &KahlerChart, f: &dyn ScalarField, x: &[f64]) -> Vec<f64> {
    let dim = x.len();
    let h = covariant_hessian(chart, f, x);
    let gamma = christoffel(chart, x);
    let mut out = vec![0.0; dim * dim * dim];
    for k in 0..dim {
        let dh = fd_vec(&|y: &[f64]| flatten(&covariant_hessian(chart, f, y)), x, k);
        for i in 0..dim {
            for j in 0..dim {
                let corr: f64 = (0..dim)
                    .map(|m| {
                        gamma[(m * dim + k) * dim + i] * h[(m, j)]
                            + gamma[(m * dim + k) * dim + j] * h[(i, m)]
                    })
                    .sum();
                out[(i * dim + j) * dim + k] = dh[i * dim + j] - corr;
            }
        }
    }
    out
}

/// Left side of the Tanno equation, assembled from oracle derivatives.
pub fn tanno_residual(chart: &KahlerChart, f: &dyn ScalarField, c: f64, x: &[f64]) -> Vec<f64> {
    let dim = x.len();
    let p = point(x);
    let g = metric(chart, x);
    let j = chart.complex_structure_at(&p).unwrap();
    let kahler = &g * &j;
    let grad = DVector::from_vec(fd_gradient(&|y: &[f64]| f.value_at(&point(y)).unwrap(), x));
    let bar = j.transpose() * &grad;
    let mut out = covariant_third(chart, f, x);
    for a in 0..dim {
        for b in 0..dim {
            for k in 0..dim {
                out[(a * dim + b) * dim + k] += c
                    * (2.0 * grad[k] * g[(a, b)] + grad[a] * g[(b, k)] + grad[b] * g[(a, k)]
                        - bar[a] * kahler[(b, k)]
                        - bar[b] * kahler[(a, k)]);
            }
        }
    }
    out
}

/// `Δf = g^{ij} f_{,ij}`.
pub fn laplacian(chart: &KahlerChart, f: &dyn ScalarField, x: &[f64]) -> f64 {
    let ginv = metric(chart, x).try_inverse().unwrap();
    ginv.component_mul(&covariant_hessian(chart, f, x)).sum()
}

/// `R^l_{kij}` at `((l * dim + k) * dim + i) * dim + j`, with
/// `R(X, Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`.
pub fn riemann(chart: &KahlerChart, x: &[f64]) -> Vec<f64> {
    let dim = x.len();
    let gamma = christoffel(chart, x);
    let dgamma: Vec<Vec<f64>> = (0..dim)
        .map(|m| fd_vec(&|y: &[f64]| christoffel(chart, y), x, m))
        .collect();
    let gi = |l: usize, a: usize, b: usize| gamma[(l * dim + a) * dim + b];
    let mut out = vec![0.0; dim.pow(4)];
    for l in 0..dim {
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    let mut r =
                        dgamma[i][(l * dim + j) * dim + k] - dgamma[j][(l * dim + i) * dim + k];
                    for m in 0..dim {
                        r += gi(l, i, m) * gi(m, j, k) - gi(l, j, m) * gi(m, i, k);
                    }
                    out[((l * dim + k) * dim + i) * dim + j] = r;
                }
            }
        }
    }
    out
}

/// Sectional curvature of the plane spanned by `u` and `v`.
pub fn sectional_curvature(
    chart: &KahlerChart,
    x: &[f64],
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> f64 {
    let dim = x.len();
    let g = metric(chart, x);
    let r = riemann(chart, x);
    // g(R(u, v)v, u)
    let mut num = 0.0;
    for l in 0..dim {
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    let rv = r[((l * dim + k) * dim + i) * dim + j] * u[i] * v[j] * v[k];
                    num += (0..dim).map(|a| g[(a, l)] * u[a]).sum::<f64>() * rv;
                }
            }
        }
    }
    let guu = u.dot(&(&g * u));
    let gvv = v.dot(&(&g * v));
    let guv = u.dot(&(&g * v));
    num / (guu * gvv - guv * guv)
}

/// Holomorphic sectional curvature in direction `u`.
pub fn holomorphic_curvature(chart: &KahlerChart, x: &[f64], u: &DVector<f64>) -> f64 {
    let j = chart.complex_structure_at(&point(x)).unwrap();
    sectional_curvature(chart, x, u, &(&j * u))
}

/// Relative error `max|a − b| / max(1, max|a|)`.
pub fn relative_error(exact: &[f64], approx: &[f64]) -> f64 {
    let scale = exact.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    exact
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
