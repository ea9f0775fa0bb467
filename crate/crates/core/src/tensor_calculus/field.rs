use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor_calculus::ChartPoint;

/// A smooth real function on a chart that can be expanded to any Taylor order.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    /// Taylor expansion of the field around `p`.
    fn jet_at(&self, p: &ChartPoint, order: usize) -> Result<Jet>;

    fn value_at(&self, p: &ChartPoint) -> Result<f64> {
        Ok(self.jet_at(p, 0)?.value())
    }

    fn label(&self) -> String {
        "field".to_string()
    }
}

pub type SharedField = Arc<dyn ScalarField>;

pub type JetScalarFn = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;

/// A field given by an explicit formula in the chart coordinates.
#[derive(Clone)]
pub struct ClosedFormField {
    dim: usize,
    label: String,
    eval: JetScalarFn,
}

impl ClosedFormField {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        eval: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    ) -> ClosedFormField {
        ClosedFormField {
            dim,
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(dim: usize, value: f64) -> ClosedFormField {
        ClosedFormField::new(dim, format!("constant:{value}"), move |x: &[Jet]| {
            x[0].constant_like(value)
        })
    }

    pub fn shared(self) -> SharedField {
        Arc::new(self)
    }
}

impl ScalarField for ClosedFormField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet_at(&self, p: &ChartPoint, order: usize) -> Result<Jet> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        let vars = Jet::variables(p.coords(), order);
        Ok((self.eval)(&vars))
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// A symmetric `(0,2)` tensor field whose lower-index components can be
/// expanded to any Taylor order around a point.
pub trait CotensorField: Send + Sync {
    fn dim(&self) -> usize;

    /// `dim * dim` jets, row-major.
    fn jets_at(&self, p: &ChartPoint, order: usize) -> Result<Vec<Jet>>;
}

/// A `(0,2)` tensor field given by an explicit formula.
#[derive(Clone)]
pub struct ClosedFormCotensor {
    dim: usize,
    eval: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
}

impl ClosedFormCotensor {
    pub fn new(dim: usize, eval: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static) -> Self {
        ClosedFormCotensor {
            dim,
            eval: Arc::new(eval),
        }
    }
}

impl CotensorField for ClosedFormCotensor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jets_at(&self, p: &ChartPoint, order: usize) -> Result<Vec<Jet>> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        Ok((self.eval)(&Jet::variables(p.coords(), order)))
    }
}
