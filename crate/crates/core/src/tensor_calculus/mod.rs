//! Chart-local pseudo-Kähler tensor calculus.
//!
//! Index conventions: `ω̄_i = J^α_i ω_α`, `J_ij = g_iα J^α_j`, covariant
//! derivative indices are appended on the right (`f_{,ijk} = ∇_k ∇_j ∇_i f`),
//! and `Δ = g^{ij} ∇_i ∇_j`. All residual norms are Frobenius norms of the full
//! component array.

mod chart;
mod field;
pub(crate) mod local;
mod tensor;

pub use chart::{JetMatrixFn, KahlerChart, SINGULAR_DET};
pub use field::{
    ClosedFormCotensor, ClosedFormField, CotensorField, JetScalarFn, ScalarField, SharedField,
};
pub use tensor::{ChartPoint, TensorValue, Variance};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use local::{covariant_derivative, covariant_jets, LocalGeometry};

/// Direction of an index move in [`raise_lower`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMove {
    Up,
    Down,
}

/// Levi-Civita connection coefficients `Γ^k_ij` at `p`.
pub fn christoffel(chart: &KahlerChart, p: &ChartPoint) -> Result<TensorValue> {
    let geometry = LocalGeometry::at(chart, p, 0)?;
    TensorValue::new(
        chart.dim(),
        vec![Variance::Upper, Variance::Lower, Variance::Lower],
        geometry.christoffel_values(),
    )
}

/// `f_{,i}`, `f_{,ij}` or `f_{,ijk}` at `p`, depending on `order`.
pub fn nabla_scalar(
    chart: &KahlerChart,
    f: &dyn ScalarField,
    p: &ChartPoint,
    order: usize,
) -> Result<TensorValue> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "covariant derivative order must be 1, 2 or 3 (got {order})"
        )));
    }
    let jets = covariant_jets(chart, f, p, order, 0)?;
    TensorValue::new(
        chart.dim(),
        vec![Variance::Lower; order],
        jets.iter().map(|j| j.value()).collect(),
    )
}

/// `a_{ij,k}` for a symmetric `(0,2)` tensor field.
pub fn nabla_cotensor2(
    chart: &KahlerChart,
    a: &dyn CotensorField,
    p: &ChartPoint,
) -> Result<TensorValue> {
    chart.check_point(p)?;
    let dim = chart.dim();
    if a.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.dim(),
        });
    }
    let jets = a.jets_at(p, 1)?;
    let geometry = LocalGeometry::at(chart, p, 0)?;
    let out = covariant_derivative(
        &jets,
        &[Variance::Lower, Variance::Lower],
        &geometry.christoffel,
        dim,
    );
    TensorValue::new(
        dim,
        vec![Variance::Lower; 3],
        out.iter().map(|j| j.value()).collect(),
    )
}

/// Moves index `slot` of `t` up (contracting with `g^{ij}`) or down (with `g_ij`).
pub fn raise_lower(
    chart: &KahlerChart,
    t: &TensorValue,
    p: &ChartPoint,
    slot: usize,
    direction: IndexMove,
) -> Result<TensorValue> {
    let dim = chart.dim();
    if t.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: t.dim(),
        });
    }
    if slot >= t.rank() {
        return Err(Error::InvalidInput(format!(
            "slot {slot} out of range for a rank-{} tensor",
            t.rank()
        )));
    }
    let (matrix, from, to) = match direction {
        IndexMove::Up => (
            chart.inverse_metric_at(p)?,
            Variance::Lower,
            Variance::Upper,
        ),
        IndexMove::Down => {
            chart.inverse_metric_at(p)?; // singular metrics are rejected both ways
            (chart.metric_at(p)?, Variance::Upper, Variance::Lower)
        }
    };
    if t.valence()[slot] != from {
        return Err(Error::InvalidInput(format!(
            "slot {slot} is already {:?}",
            t.valence()[slot]
        )));
    }
    let rank = t.rank();
    let stride = dim.pow((rank - 1 - slot) as u32);
    let src = t.components();
    let mut out = vec![0.0; src.len()];
    for (flat, value) in out.iter_mut().enumerate() {
        let i = (flat / stride) % dim;
        let base = flat - i * stride;
        *value = (0..dim)
            .map(|m| matrix[(i, m)] * src[base + m * stride])
            .sum();
    }
    let mut valence = t.valence().to_vec();
    valence[slot] = to;
    TensorValue::new(dim, valence, out)
}

/// `ω̄_i = J^α_i ω_α`.
pub fn bar_form(chart: &KahlerChart, omega: &TensorValue, p: &ChartPoint) -> Result<TensorValue> {
    if omega.rank() != 1 || omega.valence()[0] != Variance::Lower {
        return Err(Error::InvalidInput("bar_form expects a covector".into()));
    }
    if omega.dim() != chart.dim() {
        return Err(Error::DimensionMismatch {
            expected: chart.dim(),
            found: omega.dim(),
        });
    }
    let j = chart.complex_structure_at(p)?;
    Ok(TensorValue::from_vector(
        &(j.transpose() * omega.as_vector()),
        Variance::Lower,
    ))
}

/// The Kähler form `J_ij = g_iα J^α_j`.
pub fn kahler_form(chart: &KahlerChart, p: &ChartPoint) -> Result<TensorValue> {
    let g = chart.metric_at(p)?;
    let j = chart.complex_structure_at(p)?;
    Ok(TensorValue::from_matrix(
        &(g * j),
        [Variance::Lower, Variance::Lower],
    ))
}

/// Frobenius norms of `J² + Id`, `Jᵀ g J − g` and `∇J` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KahlerResiduals {
    pub complex_square: f64,
    pub compatibility: f64,
    pub parallelism: f64,
}

impl KahlerResiduals {
    pub fn max(&self) -> f64 {
        self.complex_square
            .max(self.compatibility)
            .max(self.parallelism)
    }
}

pub fn kahler_residuals(chart: &KahlerChart, p: &ChartPoint) -> Result<KahlerResiduals> {
    let dim = chart.dim();
    let geometry = LocalGeometry::at(chart, p, 0)?;
    let g = geometry.metric_values();
    let j_jets = chart.complex_structure_jets(p, 1)?;
    let j = local::jets_to_matrix(&j_jets, dim);
    let identity = DMatrix::<f64>::identity(dim, dim);
    let complex_square = (&j * &j + &identity).norm();
    let compatibility = (j.transpose() * &g * &j - &g).norm();
    let nabla_j = covariant_derivative(
        &j_jets,
        &[Variance::Upper, Variance::Lower],
        &geometry.christoffel,
        dim,
    );
    let parallelism = nabla_j
        .iter()
        .map(|x| x.value().powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(KahlerResiduals {
        complex_square,
        compatibility,
        parallelism,
    })
}

/// `Δf = g^{ij} f_{,ij}`.
pub fn laplacian(chart: &KahlerChart, f: &dyn ScalarField, p: &ChartPoint) -> Result<f64> {
    let ginv = chart.inverse_metric_at(p)?;
    let hess = nabla_scalar(chart, f, p, 2)?.as_matrix();
    Ok(ginv.component_mul(&hess).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;
    use crate::model_manifolds::{flat_kahler_chart, fubini_study_chart};

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn flat_chart_has_vanishing_christoffels() {
        let chart = flat_kahler_chart(1, 1).unwrap();
        let g = christoffel(&chart, &pt(&[0.3, -0.2, 0.1, 0.5])).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn flat_gradient_and_third_derivative() {
        let chart = flat_kahler_chart(2, 0).unwrap();
        let sq = ClosedFormField::new(4, "sq", |x: &[Jet]| {
            x.iter().fold(x[0].zero_like(), |acc, xi| acc + xi * xi)
        });
        let p = pt(&[0.1, 0.2, -0.3, 0.4]);
        let grad = nabla_scalar(&chart, &sq, &p, 1).unwrap();
        assert_eq!(grad.components(), &[0.2, 0.4, -0.6, 0.8]);

        let cube = ClosedFormField::new(4, "x1^3", |x: &[Jet]| x[0].powi(3));
        let third = nabla_scalar(&chart, &cube, &p, 3).unwrap();
        assert!((third.get(&[0, 0, 0]) - 6.0).abs() < 1e-14);
        let rest: f64 = third.components().iter().skip(1).map(|x| x.abs()).sum();
        assert_eq!(rest, 0.0);
    }

    #[test]
    fn order_out_of_range_is_rejected() {
        let chart = flat_kahler_chart(1, 0).unwrap();
        let f = ClosedFormField::constant(2, 1.0);
        assert!(matches!(
            nabla_scalar(&chart, &f, &ChartPoint::origin(2), 4),
            Err(Error::InvalidInput(_))
        ));
        assert!(nabla_scalar(&chart, &f, &ChartPoint::origin(2), 0).is_err());
    }

    #[test]
    fn out_of_domain_points_are_rejected() {
        let chart = fubini_study_chart(1).unwrap();
        let f = ClosedFormField::constant(2, 1.0);
        assert!(matches!(
            nabla_scalar(&chart, &f, &pt(&[3.0, 0.0]), 1),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            christoffel(&chart, &pt(&[0.0, 2.5])),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn lowering_with_split_signature() {
        let chart = flat_kahler_chart(1, 1).unwrap();
        let p = ChartPoint::origin(4);
        let v = TensorValue::new(4, vec![Variance::Upper], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let low = raise_lower(&chart, &v, &p, 0, IndexMove::Down).unwrap();
        assert_eq!(low.components(), &[1.0, 0.0, 0.0, 0.0]);
        let w = TensorValue::new(4, vec![Variance::Upper], vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let low = raise_lower(&chart, &w, &p, 0, IndexMove::Down).unwrap();
        assert_eq!(low.components(), &[0.0, 0.0, -1.0, 0.0]);
        assert_eq!(low.valence(), &[Variance::Lower]);
    }

    #[test]
    fn raise_lower_rejects_wrong_variance() {
        let chart = flat_kahler_chart(1, 0).unwrap();
        let v = TensorValue::new(2, vec![Variance::Lower], vec![1.0, 0.0]).unwrap();
        assert!(raise_lower(&chart, &v, &ChartPoint::origin(2), 0, IndexMove::Down).is_err());
        assert!(raise_lower(&chart, &v, &ChartPoint::origin(2), 1, IndexMove::Up).is_err());
    }

    #[test]
    fn bar_of_first_basis_covector() {
        let chart = flat_kahler_chart(1, 0).unwrap();
        let w = TensorValue::new(2, vec![Variance::Lower], vec![1.0, 0.0]).unwrap();
        let b = bar_form(&chart, &w, &ChartPoint::origin(2)).unwrap();
        assert_eq!(b.components(), &[0.0, -1.0]);
        let bb = bar_form(&chart, &b, &ChartPoint::origin(2)).unwrap();
        assert_eq!(bb.components(), &[-1.0, 0.0]);
    }

    #[test]
    fn flat_kahler_form_is_standard_symplectic() {
        let chart = flat_kahler_chart(1, 0).unwrap();
        let w = kahler_form(&chart, &ChartPoint::origin(2)).unwrap();
        assert_eq!(w.components(), &[0.0, -1.0, 1.0, 0.0]);
    }

    #[test]
    fn flat_residuals_vanish_exactly() {
        let chart = flat_kahler_chart(1, 2).unwrap();
        let r = kahler_residuals(&chart, &ChartPoint::origin(6)).unwrap();
        assert_eq!(
            (r.complex_square, r.compatibility, r.parallelism),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn scaled_complex_structure_is_detected() {
        let base = flat_kahler_chart(1, 0).unwrap();
        let metric: JetMatrixFn = std::sync::Arc::new(|x: &[Jet]| {
            vec![
                x[0].constant_like(1.0),
                x[0].zero_like(),
                x[0].zero_like(),
                x[0].constant_like(1.0),
            ]
        });
        let broken: JetMatrixFn = std::sync::Arc::new(|x: &[Jet]| {
            vec![
                x[0].zero_like(),
                x[0].constant_like(-1.1),
                x[0].constant_like(1.1),
                x[0].zero_like(),
            ]
        });
        let chart = KahlerChart::new("broken", 2, 1.0, metric, broken).unwrap();
        let r = kahler_residuals(&chart, &ChartPoint::origin(2)).unwrap();
        assert!(r.complex_square >= 0.2, "{r:?}");
        assert_eq!(
            kahler_residuals(&base, &ChartPoint::origin(2))
                .unwrap()
                .max(),
            0.0
        );
    }

    #[test]
    fn laplacian_on_flat_charts() {
        let sq = |dim: usize| {
            ClosedFormField::new(dim, "sq", |x: &[Jet]| {
                x.iter().fold(x[0].zero_like(), |acc, xi| acc + xi * xi)
            })
        };
        let chart = flat_kahler_chart(1, 0).unwrap();
        let l = laplacian(&chart, &sq(2), &pt(&[0.3, 0.7])).unwrap();
        assert!((l - 4.0).abs() < 1e-14);
        let chart = flat_kahler_chart(1, 1).unwrap();
        let l = laplacian(&chart, &sq(4), &pt(&[0.3, 0.7, -0.2, 0.1])).unwrap();
        assert!(l.abs() < 1e-14);
    }
}
