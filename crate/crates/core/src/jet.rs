//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] of order `k` in `d` variables stores the Taylor coefficients of a
//! smooth function around a fixed expansion point, for every monomial
//! `h^α = h_1^{α_1} ⋯ h_d^{α_d}` with `|α| ≤ k`. Arithmetic on jets is
//! arithmetic on polynomials modulo monomials of degree `> k`, so composing
//! jets through ordinary formulas propagates exact derivatives up to order `k`.
//!
//! Monomials are stored graded by degree, and the ordering inside a degree does
//! not depend on the maximal order. The coefficient vector of an order-`m` jet
//! is therefore a prefix of the coefficient vector of the same function at any
//! order `k ≥ m`, which makes truncation a slice copy.
//!
//! Differentiating a jet (see [`Jet::derivative`]) lowers its order by one.
//! Nesting that operation is how covariant derivatives of order three are
//! obtained from fourth-order metric data without any finite differencing.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial bookkeeping shared by all jets of one `(dim, order)`.
pub(crate) struct Layout {
    dim: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    degrees: Vec<usize>,
    /// `pairs[i]` lists `(j, k)` such that monomial `i` times monomial `j` is monomial `k`.
    pairs: Vec<Vec<(u32, u32)>>,
    /// `raise[v][i]` is the index of monomial `i + e_v`; only defined for `deg(i) < order`.
    raise: Vec<Vec<u32>>,
    /// `parent[i] = (p, v)` with monomial `i` equal to monomial `p` times `h_v`.
    parent: Vec<(u32, u32)>,
    /// `α!` for every monomial.
    factorial: Vec<f64>,
    index: HashMap<Vec<u8>, usize>,
    lower: Option<Arc<Layout>>,
}

impl Layout {
    fn build(dim: usize, order: usize, lower: Option<Arc<Layout>>) -> Layout {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        for degree in 0..=order {
            monomials_of_degree(dim, degree, &mut exponents);
        }
        let degrees: Vec<usize> = exponents
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .collect();
        let index: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let mut pairs = vec![Vec::new(); exponents.len()];
        for (i, ei) in exponents.iter().enumerate() {
            for (j, ej) in exponents.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                let sum: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                pairs[i].push((j as u32, index[&sum] as u32));
            }
        }

        let lower_len = exponents.iter().take_while(|e| sum_u8(e) < order).count();
        let raise = (0..dim)
            .map(|v| {
                exponents[..lower_len]
                    .iter()
                    .map(|e| {
                        let mut up = e.clone();
                        up[v] += 1;
                        index[&up] as u32
                    })
                    .collect()
            })
            .collect();

        let parent = exponents
            .iter()
            .map(|e| match e.iter().position(|&x| x > 0) {
                None => (0, 0),
                Some(v) => {
                    let mut down = e.clone();
                    down[v] -= 1;
                    (index[&down] as u32, v as u32)
                }
            })
            .collect();

        let factorial = exponents
            .iter()
            .map(|e| e.iter().map(|&x| factorial(x as usize)).product())
            .collect();

        Layout {
            dim,
            order,
            exponents,
            degrees,
            pairs,
            raise,
            parent,
            factorial,
            index,
            lower,
        }
    }

    fn len(&self) -> usize {
        self.exponents.len()
    }

    fn at_order(self: &Arc<Self>, order: usize) -> Arc<Layout> {
        assert!(
            order <= self.order,
            "cannot raise jet order from {} to {order}",
            self.order
        );
        let mut current = Arc::clone(self);
        while current.order > order {
            current = Arc::clone(current.lower.as_ref().expect("lower layout chain"));
        }
        current
    }
}

fn sum_u8(e: &[u8]) -> usize {
    e.iter().map(|&x| x as usize).sum()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Appends all exponent vectors of total `degree` in `dim` variables, in
/// reverse-lexicographic order (largest power of `h_1` first).
fn monomials_of_degree(dim: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(prefix: &mut Vec<u8>, dim: usize, remaining: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() + 1 == dim {
            prefix.push(remaining as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k as u8);
            rec(prefix, dim, remaining - k, out);
            prefix.pop();
        }
    }
    if dim == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return;
    }
    rec(&mut Vec::with_capacity(dim), dim, degree, out);
}

fn layout(dim: usize, order: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(found) = cache.lock().expect("layout cache").get(&(dim, order)) {
        return Arc::clone(found);
    }
    let lower = if order == 0 {
        None
    } else {
        Some(layout(dim, order - 1))
    };
    let built = Arc::new(Layout::build(dim, order, lower));
    let mut guard = cache.lock().expect("layout cache");
    Arc::clone(guard.entry((dim, order)).or_insert(built))
}

/// A truncated Taylor expansion of a smooth real function of `dim` variables.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.layout.dim)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(dim: usize, order: usize, value: f64) -> Jet {
        let layout = layout(dim, order);
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    pub fn zero(dim: usize, order: usize) -> Jet {
        Jet::constant(dim, order, 0.0)
    }

    /// The coordinate function `x_var` expanded around a point where it equals `value`.
    pub fn variable(dim: usize, order: usize, var: usize, value: f64) -> Jet {
        assert!(var < dim, "variable index {var} out of range for dim {dim}");
        let mut jet = Jet::constant(dim, order, value);
        if order > 0 {
            let mut e = vec![0u8; dim];
            e[var] = 1;
            let idx = jet.layout.index[&e];
            jet.coeffs[idx] = 1.0;
        }
        jet
    }

    /// All coordinate functions expanded around `point`.
    pub fn variables(point: &[f64], order: usize) -> Vec<Jet> {
        let dim = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet::variable(dim, order, i, x))
            .collect()
    }

    /// A jet with the same layout as `self` holding a constant.
    pub fn constant_like(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet {
            layout: Arc::clone(&self.layout),
            coeffs,
        }
    }

    pub fn zero_like(&self) -> Jet {
        self.constant_like(0.0)
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw Taylor coefficients in graded monomial order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient of the monomial with the given exponents.
    pub fn coefficient(&self, exponents: &[u8]) -> f64 {
        assert_eq!(exponents.len(), self.dim());
        self.layout
            .index
            .get(exponents)
            .map_or(0.0, |&i| self.coeffs[i])
    }

    /// Mixed partial derivative `∂_{v_1} ⋯ ∂_{v_m}` at the expansion point.
    ///
    /// Panics if `vars.len()` exceeds the jet order.
    pub fn partial(&self, vars: &[usize]) -> f64 {
        assert!(
            vars.len() <= self.order(),
            "derivative of order {} requested from a jet of order {}",
            vars.len(),
            self.order()
        );
        let mut e = vec![0u8; self.dim()];
        for &v in vars {
            e[v] += 1;
        }
        let idx = self.layout.index[&e];
        self.coeffs[idx] * self.layout.factorial[idx]
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.partial(&[i])).collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order == self.order() {
            return self.clone();
        }
        let layout = self.layout.at_order(order);
        let coeffs = self.coeffs[..layout.len()].to_vec();
        Jet { layout, coeffs }
    }

    /// Partial derivative with respect to variable `var`, as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.order() > 0, "cannot differentiate an order-0 jet");
        assert!(var < self.dim());
        let layout = self.layout.at_order(self.order() - 1);
        let raise = &self.layout.raise[var];
        let exps = &self.layout.exponents;
        let coeffs = (0..layout.len())
            .map(|i| {
                let up = raise[i] as usize;
                self.coeffs[up] * exps[up][var] as f64
            })
            .collect();
        Jet { layout, coeffs }
    }

    /// Substitutes `args[v]` for the displacement `h_v` in the Taylor polynomial.
    ///
    /// The arguments may live in a different variable space (for instance a
    /// single curve parameter); the result has their layout.
    pub fn compose(&self, args: &[Jet]) -> Jet {
        assert_eq!(args.len(), self.dim(), "compose: argument count");
        assert!(!args.is_empty());
        let target = &args[0];
        let one = target.constant_like(1.0);
        let mut powers: Vec<Jet> = Vec::with_capacity(self.coeffs.len());
        let mut out = target.zero_like();
        for i in 0..self.coeffs.len() {
            let mono = if i == 0 {
                one.clone()
            } else {
                let (p, v) = self.layout.parent[i];
                &powers[p as usize] * &args[v as usize]
            };
            if self.coeffs[i] != 0.0 {
                out.axpy(self.coeffs[i], &mono);
            }
            powers.push(mono);
        }
        out
    }

    /// `self += alpha * other` (layouts must agree in dimension; order truncates to `self`).
    pub fn axpy(&mut self, alpha: f64, other: &Jet) {
        assert_eq!(self.dim(), other.dim(), "jet dimension mismatch");
        if other.order() < self.order() {
            *self = self.truncate(other.order());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            layout: Arc::clone(&self.layout),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Evaluates `Σ_k t_k (self − self(0))^k` for Taylor coefficients `t` of a
    /// univariate function at `self.value()`.
    fn compose_univariate(&self, taylor: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let n = self.order().min(taylor.len() - 1);
        let mut out = self.constant_like(taylor[n]);
        for k in (0..n).rev() {
            out = &out * &h;
            out.coeffs[0] += taylor[k];
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let x = self.value();
        let taylor: Vec<f64> = (0..=self.order())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / x.powi(k as i32 + 1)
            })
            .collect();
        self.compose_univariate(&taylor)
    }

    pub fn powf(&self, exponent: f64) -> Jet {
        let x = self.value();
        let mut binom = 1.0;
        let taylor: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    binom *= (exponent - (k - 1) as f64) / k as f64;
                }
                binom * x.powf(exponent - k as f64)
            })
            .collect();
        self.compose_univariate(&taylor)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut out = self.constant_like(1.0);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let taylor: Vec<f64> = (0..=self.order()).map(|k| e / factorial(k)).collect();
        self.compose_univariate(&taylor)
    }

    pub fn ln(&self) -> Jet {
        let x = self.value();
        let taylor: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k == 0 {
                    x.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * x.powi(k as i32))
                }
            })
            .collect();
        self.compose_univariate(&taylor)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let taylor: Vec<f64> = (0..=self.order())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose_univariate(&taylor)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let taylor: Vec<f64> = (0..=self.order())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose_univariate(&taylor)
    }

    fn aligned<'a>(
        a: &'a Jet,
        b: &'a Jet,
    ) -> (std::borrow::Cow<'a, Jet>, std::borrow::Cow<'a, Jet>) {
        use std::borrow::Cow;
        assert_eq!(a.dim(), b.dim(), "jet dimension mismatch");
        match a.order().cmp(&b.order()) {
            std::cmp::Ordering::Equal => (Cow::Borrowed(a), Cow::Borrowed(b)),
            std::cmp::Ordering::Less => (Cow::Borrowed(a), Cow::Owned(b.truncate(a.order()))),
            std::cmp::Ordering::Greater => (Cow::Owned(a.truncate(b.order())), Cow::Borrowed(b)),
        }
    }

    fn mul_impl(&self, other: &Jet) -> Jet {
        let (a, b) = Jet::aligned(self, other);
        let mut coeffs = vec![0.0; a.coeffs.len()];
        for (i, &ai) in a.coeffs.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for &(j, k) in &a.layout.pairs[i] {
                coeffs[k as usize] += ai * b.coeffs[j as usize];
            }
        }
        Jet {
            layout: Arc::clone(&a.layout),
            coeffs,
        }
    }

    fn zip_with(&self, other: &Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
        let (a, b) = Jet::aligned(self, other);
        Jet {
            layout: Arc::clone(&a.layout),
            coeffs: a
                .coeffs
                .iter()
                .zip(&b.coeffs)
                .map(|(x, y)| op(*x, *y))
                .collect(),
        }
    }

    /// Total degree of the monomial stored at `index` (used by tests of the layout).
    pub fn monomial_degree(&self, index: usize) -> usize {
        self.layout.degrees[index]
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        self.dim() == other.dim() && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
jet_binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
jet_binop!(Mul, mul, |a, b| a.mul_impl(b));
jet_binop!(Div, div, |a, b| a.mul_impl(&b.recip()));

macro_rules! jet_scalar_op {
    ($trait:ident, $method:ident, $jet_body:expr, $scalar_body:expr) => {
        impl $trait<f64> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                let f: fn(&Jet, f64) -> Jet = $jet_body;
                f(self, rhs)
            }
        }
        impl $trait<f64> for Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<&Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(f64, &Jet) -> Jet = $scalar_body;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_scalar_op!(
    Add,
    add,
    |a, s| {
        let mut out = a.clone();
        out.coeffs[0] += s;
        out
    },
    |s, a| a + s
);
jet_scalar_op!(
    Sub,
    sub,
    |a, s| {
        let mut out = a.clone();
        out.coeffs[0] -= s;
        out
    },
    |s, a| -a + s
);
jet_scalar_op!(Mul, mul, |a, s| a.scale(s), |s, a| a.scale(s));
jet_scalar_op!(Div, div, |a, s| a.scale(1.0 / s), |s, a| a.recip().scale(s));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.axpy(-1.0, rhs);
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        for c in &mut self.coeffs {
            *c *= rhs;
        }
    }
}

/// Sum of products `Σ_k a_k b_k`, truncated to the lowest order involved.
pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    let mut acc = &a[0] * &b[0];
    for (x, y) in a.iter().zip(b).skip(1) {
        acc += &(x * y);
    }
    acc
}
