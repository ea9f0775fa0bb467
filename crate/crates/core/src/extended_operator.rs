//! The extended operator `L(f)` on `R² × M` and the algebra around it.
//!
//! `L(f)` is the `(2n+2)×(2n+2)` matrix
//!
//! ```text
//! ⎡ μ    0    f_j  ⎤
//! ⎢ 0    μ    f̄_j  ⎥
//! ⎣ f^i  f̄^i  a^i_j⎦
//! ```
//!
//! built from the bundle of `f` (with `c = 1`). No entry depends on the two
//! extra coordinates, so only the point of `M` is stored. The `*` product
//! `F*H = −2FH − ½ F_{,α} H^{,α}` turns `f ↦ L(f)` into a multiplicative map on
//! solutions, which is what the projector construction relies on.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tanno_system::{bundle_from_f, bundle_jets, SolutionBundle, TannoProblem};
use crate::tensor_calculus::local::{covariant_jets_of, invert_jet_matrix, jets_to_matrix};
use crate::tensor_calculus::{ChartPoint, KahlerChart, ScalarField, SharedField};

/// Default eigenvalue cluster tolerance, relative to the spectral radius.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// `L(f)` at a point of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMatrix {
    pub entries: DMatrix<f64>,
    pub base_point: ChartPoint,
}

impl ExtendedMatrix {
    /// Assembles the block matrix from a bundle, the metric and `J` at a point.
    pub fn from_bundle(
        bundle: &SolutionBundle,
        g: &DMatrix<f64>,
        j: &DMatrix<f64>,
        base_point: ChartPoint,
    ) -> Result<ExtendedMatrix> {
        let dim = bundle.dim();
        let ginv = g.clone().try_inverse().ok_or(Error::SingularMetric {
            det: g.determinant(),
        })?;
        let bar = bundle.grad_bar(j);
        let up = &ginv * &bundle.grad;
        let bar_up = &ginv * &bar;
        let mixed = &ginv * &bundle.a;
        let mut m = DMatrix::zeros(dim + 2, dim + 2);
        m[(0, 0)] = bundle.mu;
        m[(1, 1)] = bundle.mu;
        for i in 0..dim {
            m[(0, 2 + i)] = bundle.grad[i];
            m[(1, 2 + i)] = bar[i];
            m[(2 + i, 0)] = up[i];
            m[(2 + i, 1)] = bar_up[i];
            for k in 0..dim {
                m[(2 + i, 2 + k)] = mixed[(i, k)];
            }
        }
        Ok(ExtendedMatrix {
            entries: m,
            base_point,
        })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn mu(&self) -> f64 {
        self.entries[(0, 0)]
    }

    /// The `a^i_j` block.
    pub fn endomorphism_block(&self) -> DMatrix<f64> {
        let n = self.size() - 2;
        self.entries.view((2, 2), (n, n)).into_owned()
    }
}

/// `L(f)` at `p`. Requires `c = 1`.
#[doc(alias = "assemble_L")]
pub fn assemble_l(prob: &TannoProblem, p: &ChartPoint) -> Result<ExtendedMatrix> {
    let bundle = bundle_from_f(prob, p)?;
    let g = prob.chart.metric_at(p)?;
    let j = prob.chart.complex_structure_at(p)?;
    ExtendedMatrix::from_bundle(&bundle, &g, &j, p.clone())
}

/// `F*H` as a field.
pub struct StarProduct {
    chart: KahlerChart,
    left: SharedField,
    right: SharedField,
}

impl ScalarField for StarProduct {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn jet_at(&self, p: &ChartPoint, order: usize) -> Result<Jet> {
        let dim = self.chart.dim();
        let f = self.left.jet_at(p, order + 1)?;
        let h = if Arc::ptr_eq(&self.left, &self.right) {
            f.clone()
        } else {
            self.right.jet_at(p, order + 1)?
        };
        let ginv = invert_jet_matrix(&self.chart.metric_jets(p, order)?, dim)?;
        let df: Vec<Jet> = (0..dim).map(|i| f.derivative(i)).collect();
        let dh: Vec<Jet> = (0..dim).map(|i| h.derivative(i)).collect();
        let mut out = (&f * &h).truncate(order).scale(-2.0);
        for a in 0..dim {
            for b in 0..dim {
                out.axpy(-0.5, &(&ginv[a * dim + b] * &(&df[a] * &dh[b])));
            }
        }
        Ok(out)
    }

    fn label(&self) -> String {
        format!("({})*({})", self.left.label(), self.right.label())
    }
}

/// `F*H = −2FH − ½ g^{αβ} F_α H_β`.
pub fn star_product(chart: &KahlerChart, f: SharedField, h: SharedField) -> SharedField {
    Arc::new(StarProduct {
        chart: chart.clone(),
        left: f,
        right: h,
    })
}

/// `f^{*k}`, nested as `f*(f*(…))`. `k = 0` gives the unit `−½`.
pub fn star_power(chart: &KahlerChart, f: SharedField, k: usize) -> SharedField {
    match k {
        0 => Arc::new(crate::tensor_calculus::ClosedFormField::constant(
            chart.dim(),
            -0.5,
        )),
        1 => f,
        _ => star_product(chart, Arc::clone(&f), star_power(chart, f, k - 1)),
    }
}

/// A finite linear combination `Σ w_i F_i + c`.
struct LinearCombination {
    dim: usize,
    terms: Vec<(f64, SharedField)>,
    constant: f64,
    label: String,
}

impl ScalarField for LinearCombination {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet_at(&self, p: &ChartPoint, order: usize) -> Result<Jet> {
        let mut out = Jet::constant(self.dim, order, self.constant);
        for (w, field) in &self.terms {
            out.axpy(*w, &field.jet_at(p, order)?);
        }
        Ok(out)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// `P*(f) = c_k f^{*k} + … + c_1 f − ½ c_0`.
pub fn poly_star(chart: &KahlerChart, f: SharedField, poly: &PolynomialReal) -> SharedField {
    let coeffs = poly.coefficients();
    let terms = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| **c != 0.0)
        .map(|(k, c)| (*c, star_power(chart, Arc::clone(&f), k)))
        .collect();
    Arc::new(LinearCombination {
        dim: chart.dim(),
        terms,
        constant: -0.5 * coeffs.first().copied().unwrap_or(0.0),
        label: format!("P*({}) with P = {poly}", f.label()),
    })
}

/// Real polynomial with ascending coefficients `c_0, c_1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolynomialReal {
    coeffs: Vec<f64>,
}

impl PolynomialReal {
    /// Trailing zero coefficients are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> PolynomialReal {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        PolynomialReal { coeffs }
    }

    pub fn zero() -> PolynomialReal {
        PolynomialReal { coeffs: Vec::new() }
    }

    pub fn one() -> PolynomialReal {
        PolynomialReal::new(vec![1.0])
    }

    /// `t − root`.
    pub fn linear_factor(root: f64) -> PolynomialReal {
        PolynomialReal::new(vec![-root, 1.0])
    }

    /// `(t − z)(t − z̄)`.
    pub fn quadratic_factor(z: Complex<f64>) -> PolynomialReal {
        PolynomialReal::new(vec![z.norm_sqr(), -2.0 * z.re, 1.0])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == 1.0
    }

    pub fn monic(&self) -> PolynomialReal {
        let lead = self.leading();
        if lead == 0.0 {
            return self.clone();
        }
        self.scale(1.0 / lead)
    }

    pub fn scale(&self, factor: f64) -> PolynomialReal {
        PolynomialReal::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn mul(&self, other: &PolynomialReal) -> PolynomialReal {
        if self.is_zero() || other.is_zero() {
            return PolynomialReal::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PolynomialReal::new(out)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `P(m)` by Horner's scheme.
    pub fn eval_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let identity = DMatrix::<f64>::identity(n, n);
        self.coeffs
            .iter()
            .rev()
            .fold(DMatrix::zeros(n, n), |acc, c| acc * m + &identity * *c)
    }

    /// Largest absolute coefficient difference, padding the shorter one with zeros.
    pub fn max_coeff_diff(&self, other: &PolynomialReal) -> f64 {
        let len = self.coeffs.len().max(other.coeffs.len());
        (0..len)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(0.0);
                let b = other.coeffs.get(i).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl std::fmt::Display for PolynomialReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0.0 {
                continue;
            }
            let sign = if *c < 0.0 { "-" } else { "+" };
            if first {
                if *c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let abs = c.abs();
            match k {
                0 => write!(f, "{abs}")?,
                _ => {
                    if abs != 1.0 {
                        write!(f, "{abs}*")?;
                    }
                    if k == 1 {
                        write!(f, "t")?;
                    } else {
                        write!(f, "t^{k}")?;
                    }
                }
            }
            first = false;
        }
        Ok(())
    }
}

/// Deviations reported by [`product_block_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductBlockReport {
    /// `‖L(f)·L(F) − block formula‖`.
    pub block_deviation: f64,
    /// `‖μF_j + f_k A^k_j − Μf_j − a^k_j F_k‖`.
    pub commutation_residual: f64,
    /// `|f^k F̄_k|`.
    pub orthogonality_residual: f64,
    /// Distance of the product from the shape of an extended operator; only
    /// computed when both conditions above hold.
    pub shape_deviation: Option<f64>,
}

/// Threshold on the two product conditions, relative to `‖L(f)‖·‖L(F)‖`.
pub const PRODUCT_CONDITION_TOL: f64 = 1e-8;

/// Compares `L(f)·L(F)` with its block formula and checks whether the product
/// is again an extended operator. Both problems must use `c = 1` on the same
/// chart.
pub fn product_block_check(
    prob: &TannoProblem,
    other: &TannoProblem,
    p: &ChartPoint,
) -> Result<ProductBlockReport> {
    prob.require_unit()?;
    other.require_unit()?;
    if prob.chart.dim() != other.chart.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.chart.dim(),
            found: other.chart.dim(),
        });
    }
    if prob.chart.name() != other.chart.name() {
        return Err(Error::InvalidInput(format!(
            "fields live on different charts ({} and {})",
            prob.chart.name(),
            other.chart.name()
        )));
    }
    let dim = prob.chart.dim();
    let g = prob.chart.metric_at(p)?;
    let j = prob.chart.complex_structure_at(p)?;
    let ginv = prob.chart.inverse_metric_at(p)?;
    let b = bundle_from_f(prob, p)?;
    let c = bundle_from_f(other, p)?;
    let lf = ExtendedMatrix::from_bundle(&b, &g, &j, p.clone())?.entries;
    let lg = ExtendedMatrix::from_bundle(&c, &g, &j, p.clone())?.entries;
    let product = &lf * &lg;

    let (mu, big_mu) = (b.mu, c.mu);
    let (f_lo, h_lo) = (&b.grad, &c.grad);
    let (f_bar, h_bar) = (b.grad_bar(&j), c.grad_bar(&j));
    let (f_up, h_up) = (&ginv * f_lo, &ginv * h_lo);
    let (f_bar_up, h_bar_up) = (&ginv * &f_bar, &ginv * &h_bar);
    let (a_mixed, big_a_mixed) = (&ginv * &b.a, &ginv * &c.a);

    let mut formula = DMatrix::zeros(dim + 2, dim + 2);
    formula[(0, 0)] = mu * big_mu + f_lo.dot(&h_up);
    formula[(0, 1)] = f_lo.dot(&h_bar_up);
    formula[(1, 0)] = f_bar.dot(&h_up);
    formula[(1, 1)] = mu * big_mu + f_lo.dot(&h_up);
    let row0 = h_lo * mu + big_a_mixed.transpose() * f_lo;
    let row1 = &h_bar * mu + big_a_mixed.transpose() * &f_bar;
    let col0 = &f_up * big_mu + &a_mixed * &h_up;
    let col1 = &f_bar_up * big_mu + &a_mixed * &h_bar_up;
    let block = &a_mixed * &big_a_mixed + &f_up * h_lo.transpose() + &f_bar_up * h_bar.transpose();
    for i in 0..dim {
        formula[(0, 2 + i)] = row0[i];
        formula[(1, 2 + i)] = row1[i];
        formula[(2 + i, 0)] = col0[i];
        formula[(2 + i, 1)] = col1[i];
        for k in 0..dim {
            formula[(2 + i, 2 + k)] = block[(i, k)];
        }
    }
    let block_deviation = (&product - &formula).norm();

    let other_side = f_lo * big_mu + a_mixed.transpose() * h_lo;
    let commutation_residual = (&row0 - other_side).norm();
    let orthogonality_residual = f_up.dot(&h_bar).abs();

    let scale = lf.norm().max(1.0) * lg.norm().max(1.0);
    let holds = commutation_residual <= PRODUCT_CONDITION_TOL * scale
        && orthogonality_residual <= PRODUCT_CONDITION_TOL * scale;
    let shape_deviation = holds.then(|| shape_deviation(&product, &g, &j));
    Ok(ProductBlockReport {
        block_deviation,
        commutation_residual,
        orthogonality_residual,
        shape_deviation,
    })
}

/// Distance of a `(2n+2)`-matrix from the block shape of an extended operator.
pub fn shape_deviation(m: &DMatrix<f64>, g: &DMatrix<f64>, j: &DMatrix<f64>) -> f64 {
    let dim = g.nrows();
    let row0 = DVector::from_fn(dim, |i, _| m[(0, 2 + i)]);
    let row1 = DVector::from_fn(dim, |i, _| m[(1, 2 + i)]);
    let col0 = DVector::from_fn(dim, |i, _| m[(2 + i, 0)]);
    let col1 = DVector::from_fn(dim, |i, _| m[(2 + i, 1)]);
    let block = m.view((2, 2), (dim, dim)).into_owned();
    let lowered = g * &block;
    let mut sq = m[(0, 1)].powi(2) + m[(1, 0)].powi(2) + (m[(0, 0)] - m[(1, 1)]).powi(2);
    sq += (&row1 - j.transpose() * &row0).norm_squared();
    sq += (g * &col0 - &row0).norm_squared();
    sq += (g * &col1 - &row1).norm_squared();
    sq += (&lowered - lowered.transpose()).norm_squared();
    sq.sqrt()
}

/// A cluster of real eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealCluster {
    pub value: f64,
    pub multiplicity: usize,
}

/// A cluster of complex-conjugate pairs, represented by the member with
/// positive imaginary part; `multiplicity` counts pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexCluster {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

/// Clustered spectrum of a real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Ascending by value.
    pub real: Vec<RealCluster>,
    pub complex: Vec<ComplexCluster>,
    pub cluster_tol: f64,
}

impl Spectrum {
    pub fn real_values(&self) -> Vec<f64> {
        self.real.iter().map(|c| c.value).collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        let r = self.real.iter().map(|c| c.value.abs());
        let z = self.complex.iter().map(|c| c.re.hypot(c.im));
        r.chain(z).fold(0.0, f64::max)
    }

    fn points(&self) -> Vec<(Complex<f64>, usize)> {
        let real = self
            .real
            .iter()
            .map(|c| (Complex::new(c.value, 0.0), c.multiplicity));
        let complex = self
            .complex
            .iter()
            .map(|c| (Complex::new(c.re, c.im), c.multiplicity));
        real.chain(complex).collect()
    }

    /// Hausdorff distance between the cluster centres of two spectra, or
    /// infinity when their cluster structure (count, kind, multiplicity)
    /// differs.
    pub fn distance(&self, other: &Spectrum) -> f64 {
        let a = self.points();
        let b = other.points();
        if self.real.len() != other.real.len() || self.complex.len() != other.complex.len() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (x, mx) in &a {
            let (d, my) = b
                .iter()
                .map(|(y, my)| ((x - y).norm(), *my))
                .min_by(|s, t| s.0.total_cmp(&t.0))
                .expect("non-empty spectrum");
            if *mx != my {
                return f64::INFINITY;
            }
            worst = worst.max(d);
        }
        for (y, _) in &b {
            let d = a
                .iter()
                .map(|(x, _)| (x - y).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        worst
    }
}

impl std::fmt::Display for Spectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts: Vec<String> = self
            .real
            .iter()
            .map(|c| format!("{:.10} (x{})", c.value, c.multiplicity))
            .collect();
        parts.extend(
            self.complex
                .iter()
                .map(|c| format!("{:.10} ± {:.10}i (x{})", c.re, c.im, c.multiplicity)),
        );
        write!(f, "{}", parts.join(", "))
    }
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::NonConvergence("Schur decomposition did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Groups eigenvalues: real ones (imaginary part within `tol`) by single
/// linkage on the real line, conjugate pairs by single linkage in the plane.
pub fn cluster_eigenvalues(values: &[Complex<f64>], tol: f64) -> Spectrum {
    let mut reals: Vec<f64> = values
        .iter()
        .filter(|z| z.im.abs() <= tol)
        .map(|z| z.re)
        .collect();
    reals.sort_by(f64::total_cmp);
    let mut real: Vec<RealCluster> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for x in reals {
        match real.last_mut() {
            Some(c) if x - last <= tol => {
                c.multiplicity += 1;
                *sums.last_mut().expect("sum per cluster") += x;
            }
            _ => {
                real.push(RealCluster {
                    value: x,
                    multiplicity: 1,
                });
                sums.push(x);
            }
        }
        last = x;
    }
    for (c, s) in real.iter_mut().zip(sums) {
        c.value = s / c.multiplicity as f64;
    }

    let mut upper: Vec<Complex<f64>> = values.iter().filter(|z| z.im > tol).copied().collect();
    upper.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut groups: Vec<Vec<Complex<f64>>> = Vec::new();
    for z in upper {
        match groups
            .iter_mut()
            .find(|g| g.iter().any(|w| (w - z).norm() <= tol))
        {
            Some(g) => g.push(z),
            None => groups.push(vec![z]),
        }
    }
    let complex = groups
        .into_iter()
        .map(|g| {
            let n = g.len();
            let mean = g.iter().sum::<Complex<f64>>() / n as f64;
            ComplexCluster {
                re: mean.re,
                im: mean.im,
                multiplicity: n,
            }
        })
        .collect();
    Spectrum {
        real,
        complex,
        cluster_tol: tol,
    }
}

/// Clustered spectrum with an absolute cluster tolerance.
pub fn spectrum(m: &ExtendedMatrix, cluster_tol: f64) -> Result<Spectrum> {
    Ok(cluster_eigenvalues(&eigenvalues(&m.entries)?, cluster_tol))
}

/// Clustered spectrum with tolerance `rel · max(spectral radius, 1)`.
pub fn spectrum_relative(m: &DMatrix<f64>, rel: f64) -> Result<Spectrum> {
    let values = eigenvalues(m)?;
    let radius = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(cluster_eigenvalues(&values, rel * radius.max(1.0)))
}

/// Monic polynomial with one factor per eigenvalue cluster, verified by
/// `‖P(m)‖ ≤ tol · max(‖m‖, 1)^deg`. Assumes `m` is diagonalizable.
pub fn minimal_polynomial(m: &ExtendedMatrix, tol: f64) -> Result<PolynomialReal> {
    minimal_polynomial_of(&m.entries, tol)
}

pub fn minimal_polynomial_of(m: &DMatrix<f64>, tol: f64) -> Result<PolynomialReal> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive (got {tol})"
        )));
    }
    let spec = spectrum_relative(m, tol)?;
    let gap = 10.0 * spec.cluster_tol;
    for pair in spec.real.windows(2) {
        if pair[1].value - pair[0].value < gap {
            return Err(Error::IllConditioned(format!(
                "eigenvalues {} and {} are not separated at tolerance {}",
                pair[0].value, pair[1].value, spec.cluster_tol
            )));
        }
    }
    let mut poly = PolynomialReal::one();
    for c in &spec.real {
        poly = poly.mul(&PolynomialReal::linear_factor(c.value));
    }
    for c in &spec.complex {
        poly = poly.mul(&PolynomialReal::quadratic_factor(Complex::new(c.re, c.im)));
    }
    let bound = tol * m.norm().max(1.0).powi(poly.degree() as i32);
    let residual = poly.eval_matrix(m).norm();
    if residual > bound {
        return Err(Error::IllConditioned(format!(
            "clustered polynomial leaves residual {residual:e} > {bound:e}; matrix is not diagonalizable at this tolerance"
        )));
    }
    Ok(poly)
}

/// Polynomial sending the largest real eigenvalue of `spec` to 1 and every
/// other cluster to 0.
pub fn lagrange_projector(spec: &Spectrum) -> Result<PolynomialReal> {
    if spec.real.len() < 2 {
        return Err(Error::NoRealSplit {
            real_clusters: spec.real.len(),
        });
    }
    let target = spec.real.last().expect("at least two clusters").value;
    let mut poly = PolynomialReal::one();
    for c in &spec.real[..spec.real.len() - 1] {
        poly = poly.mul(&PolynomialReal::linear_factor(c.value).scale(1.0 / (target - c.value)));
    }
    for c in &spec.complex {
        let q = PolynomialReal::quadratic_factor(Complex::new(c.re, c.im));
        poly = poly.mul(&q.scale(1.0 / q.eval(target)));
    }
    Ok(poly)
}

/// Outcome of [`projector_from_solution`].
#[derive(Clone)]
pub struct ProjectorSolution {
    pub polynomial: PolynomialReal,
    /// `P*(f)`.
    pub field: SharedField,
    /// Spectrum of `L(f)` at the first sample.
    pub base_spectrum: Spectrum,
    /// `‖L(P*(f))² − L(P*(f))‖` at every sample, in input order.
    pub idempotency: Vec<f64>,
    /// `tr L(P*(f))` at the first sample, the rank of the projector.
    pub trace: f64,
}

impl std::fmt::Debug for ProjectorSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectorSolution")
            .field("polynomial", &self.polynomial)
            .field("field", &self.field.label())
            .field("base_spectrum", &self.base_spectrum)
            .field("idempotency", &self.idempotency)
            .field("trace", &self.trace)
            .finish()
    }
}

impl ProjectorSolution {
    pub fn max_idempotency(&self) -> f64 {
        self.idempotency.iter().copied().fold(0.0, f64::max)
    }
}

/// Builds `P` from the spectrum of `L(f)` at the first sample and checks that
/// `L(P*(f))` is a nontrivial projector at every sample within `tol`.
/// Requires `c = 1`.
pub fn projector_from_solution(
    prob: &TannoProblem,
    samples: &[ChartPoint],
    tol: f64,
) -> Result<ProjectorSolution> {
    prob.require_unit()?;
    let Some(base) = samples.first() else {
        return Err(Error::InvalidInput(
            "projector construction needs at least one sample".into(),
        ));
    };
    let l = assemble_l(prob, base)?;
    let spec = spectrum_relative(&l.entries, DEFAULT_CLUSTER_TOL)?;
    let polynomial = lagrange_projector(&spec)?;
    let field = poly_star(&prob.chart, Arc::clone(&prob.field), &polynomial);
    let checked = prob.with_field(Arc::clone(&field))?;

    let mut idempotency = Vec::with_capacity(samples.len());
    let mut trace = 0.0;
    for (i, p) in samples.iter().enumerate() {
        let m = assemble_l(&checked, p)?.entries;
        let residual = (&m * &m - &m).norm();
        if residual > tol {
            return Err(Error::NotProjector { residual });
        }
        if i == 0 {
            trace = m.trace();
            let n = m.nrows();
            if m.norm() <= tol || (&m - DMatrix::<f64>::identity(n, n)).norm() <= tol {
                return Err(Error::NotProjector { residual });
            }
        }
        idempotency.push(residual);
    }
    Ok(ProjectorSolution {
        polynomial,
        field,
        base_spectrum: spec,
        idempotency,
        trace,
    })
}

/// The three point types distinguished for projector solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    /// `0 < μ < 1`.
    Interior,
    /// `μ = 1`.
    MuMax,
    /// `μ = 0`.
    MuMin,
}

/// Eigenvalues of `a^i_j` at a point, for a solution whose `L` is a projector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenstructureReport {
    pub mu: f64,
    /// Clusters of `a^i_j`, ascending.
    pub clusters: Vec<RealCluster>,
    pub classification: PointClass,
    /// `k` with `dim E_L(1) = 2k + 2`.
    pub k_param: usize,
    /// Clusters predicted from `μ` and `k`.
    pub expected: Vec<RealCluster>,
    /// Whether `clusters` equals `expected` within the tolerance.
    pub matches_expected: bool,
    /// `‖L² − L‖` at the point.
    pub idempotency: f64,
}

fn expected_clusters(class: PointClass, mu: f64, n: usize, k: usize) -> Vec<RealCluster> {
    let entries = match class {
        PointClass::Interior => vec![
            (0.0, 2 * n as isize - 2 * k as isize - 2),
            (1.0 - mu, 2),
            (1.0, 2 * k as isize),
        ],
        PointClass::MuMax => vec![
            (0.0, 2 * n as isize - 2 * k as isize),
            (1.0, 2 * k as isize),
        ],
        PointClass::MuMin => vec![
            (0.0, 2 * n as isize - 2 * k as isize - 2),
            (1.0, 2 * k as isize + 2),
        ],
    };
    let mut out: Vec<RealCluster> = entries
        .into_iter()
        .filter(|(_, m)| *m > 0)
        .map(|(value, m)| RealCluster {
            value,
            multiplicity: m as usize,
        })
        .collect();
    out.sort_by(|a, b| a.value.total_cmp(&b.value));
    out
}

/// Classifies `p` by `μ` and compares the spectrum of `a^i_j` with the
/// prediction for projector solutions. `tol` bounds `‖L² − L‖`, the distance
/// of `μ` from 0 and 1, and the eigenvalue clustering. Requires `c = 1`.
pub fn eigenstructure_at(
    prob: &TannoProblem,
    p: &ChartPoint,
    tol: f64,
) -> Result<EigenstructureReport> {
    let l = assemble_l(prob, p)?;
    let m = &l.entries;
    let idempotency = (m * m - m).norm();
    if idempotency > tol {
        return Err(Error::NotProjector {
            residual: idempotency,
        });
    }
    let mu = l.mu();
    let classification = if (mu - 1.0).abs() <= tol {
        PointClass::MuMax
    } else if mu.abs() <= tol {
        PointClass::MuMin
    } else {
        PointClass::Interior
    };
    let rank = m.trace().round().max(0.0) as usize;
    let k_param = rank.saturating_sub(2) / 2;
    let n = prob.chart.complex_dim();
    let spec = cluster_eigenvalues(&eigenvalues(&l.endomorphism_block())?, tol);
    let expected = expected_clusters(classification, mu, n, k_param);
    let matches_expected = spec.complex.is_empty()
        && spec.real.len() == expected.len()
        && spec.real.iter().zip(&expected).all(|(a, b)| {
            a.multiplicity == b.multiplicity && (a.value - b.value).abs() <= 10.0 * tol
        });
    Ok(EigenstructureReport {
        mu,
        clusters: spec.real,
        classification,
        k_param,
        expected,
        matches_expected,
        idempotency,
    })
}

/// `‖μ_{,ij} − 2a_ij + 2μ g_ij‖` with `μ = −2f`. Requires `c = 1`.
pub fn mu_hessian_residual(prob: &TannoProblem, p: &ChartPoint) -> Result<f64> {
    prob.require_unit()?;
    let chart = &prob.chart;
    let dim = chart.dim();
    let mu = prob.field.jet_at(p, 2)?.scale(-2.0);
    let hess = covariant_jets_of(chart, &mu, p, 2)?;
    let b = bundle_jets(chart, prob.field.as_ref(), p, 0)?;
    let a = jets_to_matrix(&b.a, dim);
    let g = chart.metric_at(p)?;
    let muv = mu.value();
    let sq: f64 = (0..dim * dim)
        .map(|ij| {
            let (i, j) = (ij / dim, ij % dim);
            (hess[ij].value() - 2.0 * a[(i, j)] + 2.0 * muv * g[(i, j)]).powi(2)
        })
        .sum();
    Ok(sq.sqrt())
}
