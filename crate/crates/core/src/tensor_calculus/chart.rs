use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor_calculus::ChartPoint;

/// A smooth matrix field, given as a function of the coordinate jets.
/// Returns `dim * dim` entries in row-major order.
pub type JetMatrixFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

/// Below this |det g| the metric is treated as degenerate.
pub const SINGULAR_DET: f64 = 1e-12;

/// Slack allowed on the domain radius to absorb rounding in sampled points.
const DOMAIN_SLACK: f64 = 1e-12;

/// One coordinate patch of a pseudo-Kähler manifold.
///
/// The metric `g_ij` and complex structure `J^i_j` are evaluated on jets, so
/// every quantity derived from them carries exact derivatives. A chart is
/// immutable; rescaling the metric produces a new chart.
#[derive(Clone)]
pub struct KahlerChart {
    name: String,
    dim: usize,
    domain_radius: f64,
    metric: JetMatrixFn,
    complex_structure: JetMatrixFn,
    metric_scale: f64,
}

impl fmt::Debug for KahlerChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KahlerChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain_radius", &self.domain_radius)
            .field("metric_scale", &self.metric_scale)
            .finish()
    }
}

impl KahlerChart {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        domain_radius: f64,
        metric: JetMatrixFn,
        complex_structure: JetMatrixFn,
    ) -> Result<KahlerChart> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "chart dimension must be even and positive, got {dim}"
            )));
        }
        if !(domain_radius.is_finite() && domain_radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "domain radius must be positive, got {domain_radius}"
            )));
        }
        Ok(KahlerChart {
            name: name.into(),
            dim,
            domain_radius,
            metric,
            complex_structure,
            metric_scale: 1.0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Complex dimension `n`.
    pub fn complex_dim(&self) -> usize {
        self.dim / 2
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Overall factor applied to the metric relative to the chart's base formula.
    pub fn metric_scale(&self) -> f64 {
        self.metric_scale
    }

    /// The same chart with metric `c·g`. The Levi-Civita connection and `J^i_j`
    /// are unchanged; this is how a constant `c` in the Tanno equation is
    /// absorbed into the metric.
    pub fn scaled(&self, c: f64) -> Result<KahlerChart> {
        if !(c.is_finite() && c != 0.0) {
            return Err(Error::InvalidInput(format!(
                "metric scale must be finite and non-zero, got {c}"
            )));
        }
        let mut out = self.clone();
        out.metric_scale *= c;
        out.name = format!("{}*{}", self.name, c);
        Ok(out)
    }

    pub fn check_point(&self, p: &ChartPoint) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        let radius = p.radius();
        if radius > self.domain_radius + DOMAIN_SLACK {
            return Err(Error::OutOfDomain {
                radius,
                domain_radius: self.domain_radius,
            });
        }
        Ok(())
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        self.check_point(p).is_ok()
    }

    /// Taylor expansion of `g_ij` around `p` to the given order.
    pub fn metric_jets(&self, p: &ChartPoint, order: usize) -> Result<Vec<Jet>> {
        self.check_point(p)?;
        let vars = Jet::variables(p.coords(), order);
        let mut g = (self.metric)(&vars);
        debug_assert_eq!(g.len(), self.dim * self.dim);
        if self.metric_scale != 1.0 {
            for entry in &mut g {
                *entry *= self.metric_scale;
            }
        }
        Ok(g)
    }

    /// Taylor expansion of `J^i_j` around `p` (row `i`, column `j`).
    pub fn complex_structure_jets(&self, p: &ChartPoint, order: usize) -> Result<Vec<Jet>> {
        self.check_point(p)?;
        let vars = Jet::variables(p.coords(), order);
        Ok((self.complex_structure)(&vars))
    }

    pub fn metric_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let g = self.metric_jets(p, 0)?;
        Ok(DMatrix::from_iterator(self.dim, self.dim, g.iter().map(Jet::value)).transpose())
    }

    pub fn inverse_metric_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let g = self.metric_at(p)?;
        let det = g.determinant();
        if det.abs() < SINGULAR_DET {
            return Err(Error::SingularMetric { det });
        }
        g.try_inverse().ok_or(Error::SingularMetric { det })
    }

    pub fn complex_structure_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        let j = self.complex_structure_jets(p, 0)?;
        Ok(DMatrix::from_iterator(self.dim, self.dim, j.iter().map(Jet::value)).transpose())
    }
}
