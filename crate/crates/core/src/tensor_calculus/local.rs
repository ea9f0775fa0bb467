//! Jet-valued geometry around a single point.
//!
//! Everything here works on Taylor expansions, so a covariant derivative is a
//! coordinate derivative of a jet plus Christoffel corrections, and the result
//! is again a jet (of one lower order). Tensor components are flattened
//! row-major with the derivative index appended last, so `∇_k T_{ij}` lives at
//! `(i * dim + j) * dim + k`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor_calculus::chart::SINGULAR_DET;
use crate::tensor_calculus::{ChartPoint, KahlerChart, ScalarField, Variance};

/// Metric, inverse metric and Christoffel symbols expanded around a point.
pub(crate) struct LocalGeometry {
    pub dim: usize,
    /// `g_ij` to order `order + 1`.
    pub metric: Vec<Jet>,
    /// `g^ij` to order `order`.
    pub inverse: Vec<Jet>,
    /// `Γ^k_ij` at `(k * dim + i) * dim + j`, to order `order`.
    pub christoffel: Vec<Jet>,
}

impl LocalGeometry {
    pub fn at(chart: &KahlerChart, p: &ChartPoint, order: usize) -> Result<LocalGeometry> {
        let dim = chart.dim();
        let metric = chart.metric_jets(p, order + 1)?;
        let metric_low: Vec<Jet> = metric.iter().map(|g| g.truncate(order)).collect();
        let inverse = invert_jet_matrix(&metric_low, dim)?;

        // dg[(m * dim + a) * dim + b] = ∂_m g_ab
        let mut dg = Vec::with_capacity(dim * dim * dim);
        for m in 0..dim {
            for ab in 0..dim * dim {
                dg.push(metric[ab].derivative(m));
            }
        }
        let d = |m: usize, a: usize, b: usize| &dg[(m * dim + a) * dim + b];

        let mut christoffel = Vec::with_capacity(dim * dim * dim);
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    let mut acc = Jet::zero(dim, order);
                    for l in 0..dim {
                        let first_kind = d(i, l, j) + d(j, l, i) - d(l, i, j);
                        acc += &(&inverse[k * dim + l] * &first_kind);
                    }
                    acc *= 0.5;
                    christoffel.push(acc);
                }
            }
        }
        Ok(LocalGeometry {
            dim,
            metric,
            inverse,
            christoffel,
        })
    }

    pub fn metric_values(&self) -> DMatrix<f64> {
        jets_to_matrix(&self.metric, self.dim)
    }

    pub fn christoffel_values(&self) -> Vec<f64> {
        self.christoffel.iter().map(Jet::value).collect()
    }
}

pub(crate) fn jets_to_matrix(m: &[Jet], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| m[i * dim + j].value())
}

/// Inverse of a jet-valued matrix by Gauss-Jordan elimination, pivoting on the
/// values at the expansion point.
pub(crate) fn invert_jet_matrix(m: &[Jet], dim: usize) -> Result<Vec<Jet>> {
    let values = jets_to_matrix(m, dim);
    let det = values.determinant();
    if det.abs() < SINGULAR_DET || !det.is_finite() {
        return Err(Error::SingularMetric { det });
    }
    let mut a: Vec<Vec<Jet>> = (0..dim)
        .map(|i| m[i * dim..(i + 1) * dim].to_vec())
        .collect();
    let mut inv: Vec<Vec<Jet>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| m[0].constant_like(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&r, &s| a[r][col].value().abs().total_cmp(&a[s][col].value().abs()))
            .expect("non-empty pivot range");
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let r = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x = &*x * &r;
        }
        for x in inv[col].iter_mut() {
            *x = &*x * &r;
        }
        for row in 0..dim {
            if row == col {
                continue;
            }
            let factor = a[row][col].clone();
            if factor.coefficients().iter().all(|c| *c == 0.0) {
                continue;
            }
            for k in 0..dim {
                let sub_a = &factor * &a[col][k];
                a[row][k] -= &sub_a;
                let sub_i = &factor * &inv[col][k];
                inv[row][k] -= &sub_i;
            }
        }
    }
    Ok(inv.into_iter().flatten().collect())
}

/// Covariant derivative of a tensor given by jets; the new lower index is
/// appended last and the result has one Taylor order less than `t`.
pub(crate) fn covariant_derivative(
    t: &[Jet],
    valence: &[Variance],
    christoffel: &[Jet],
    dim: usize,
) -> Vec<Jet> {
    let rank = valence.len();
    assert_eq!(t.len(), dim.pow(rank as u32));
    let order = t[0].order() - 1;
    let gamma: Vec<Jet> = christoffel.iter().map(|g| g.truncate(order)).collect();
    let gamma_is_zero: Vec<bool> = gamma
        .iter()
        .map(|g| g.coefficients().iter().all(|c| *c == 0.0))
        .collect();
    let strides: Vec<usize> = (0..rank).map(|s| dim.pow((rank - 1 - s) as u32)).collect();

    let mut out = Vec::with_capacity(t.len() * dim);
    for (flat, component) in t.iter().enumerate() {
        for k in 0..dim {
            let mut acc = component.derivative(k);
            for (slot, &variance) in valence.iter().enumerate() {
                let stride = strides[slot];
                let idx_slot = (flat / stride) % dim;
                let base = flat - idx_slot * stride;
                for m in 0..dim {
                    let other = &t[base + m * stride];
                    match variance {
                        Variance::Upper => {
                            let g = (idx_slot * dim + k) * dim + m;
                            if !gamma_is_zero[g] {
                                acc += &(&gamma[g] * other);
                            }
                        }
                        Variance::Lower => {
                            let g = (m * dim + k) * dim + idx_slot;
                            if !gamma_is_zero[g] {
                                acc -= &(&gamma[g] * other);
                            }
                        }
                    }
                }
            }
            out.push(acc);
        }
    }
    out
}

/// `∇^rank f` as jets of Taylor order `order`, with derivative indices in the
/// order they were applied (`f_{,ijk}` is stored at `(i * dim + j) * dim + k`).
pub(crate) fn covariant_jets(
    chart: &KahlerChart,
    field: &dyn ScalarField,
    p: &ChartPoint,
    rank: usize,
    order: usize,
) -> Result<Vec<Jet>> {
    chart.check_point(p)?;
    let f = field.jet_at(p, order + rank)?;
    covariant_jets_of(chart, &f, p, rank)
}

/// As [`covariant_jets`] for an already expanded field; the result has Taylor
/// order `f.order() - rank`.
pub(crate) fn covariant_jets_of(
    chart: &KahlerChart,
    f: &Jet,
    p: &ChartPoint,
    rank: usize,
) -> Result<Vec<Jet>> {
    let dim = chart.dim();
    assert!(f.order() >= rank, "jet order too low for rank {rank}");
    if rank == 0 {
        return Ok(vec![f.clone()]);
    }
    let mut t: Vec<Jet> = (0..dim).map(|i| f.derivative(i)).collect();
    if rank >= 2 {
        let geometry = LocalGeometry::at(chart, p, f.order() - 2)?;
        let mut valence = vec![Variance::Lower];
        for _ in 2..=rank {
            t = covariant_derivative(&t, &valence, &geometry.christoffel, dim);
            valence.push(Variance::Lower);
        }
    }
    Ok(t)
}
