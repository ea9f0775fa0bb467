//! Named checks. Each check evaluates one claim over the sampled points and
//! reports its largest residual.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extended_operator::{
    assemble_l, eigenstructure_at, minimal_polynomial, poly_star, product_block_check,
    projector_from_solution, shape_deviation, spectrum_relative, star_power, PolynomialReal,
    ProjectorSolution, DEFAULT_CLUSTER_TOL,
};
use crate::jet::Jet;
use crate::model_manifolds::{integrate_geodesic, random_lightlike_vector};
use crate::signature_analysis::{metric_signature, positivity_scan, ScanOptions, SignatureVerdict};
use crate::suite::config::SolutionKind;
use crate::suite::oracle::{fd_christoffel, fd_partial};
use crate::tanno_system::{
    bundle_from_f, f_from_mu, gallot_tanno_residual, laplace_identity_residual,
    lightlike_third_derivative, system_residual, tanno_residual, trace_identity_residual,
    transport_bundle, SolutionBundle, TannoProblem,
};
use crate::tensor_calculus::{
    christoffel, kahler_residuals, ChartPoint, ClosedFormField, KahlerChart, SharedField,
};

/// Everything a check needs, built once per suite run.
pub(crate) struct Context {
    pub chart: KahlerChart,
    pub field: SharedField,
    pub kind: SolutionKind,
    /// The problem with the configured constant.
    pub prob: TannoProblem,
    /// The problem with the constant absorbed into the metric, unless `c = 0`.
    pub unit: Option<TannoProblem>,
    pub samples: Vec<ChartPoint>,
    pub radius: f64,
    pub projector_tol: f64,
    pub projector: OnceLock<std::result::Result<ProjectorSolution, Error>>,
}

impl Context {
    fn projector(&self) -> std::result::Result<&ProjectorSolution, Error> {
        self.projector
            .get_or_init(|| {
                let unit = self.unit.as_ref().ok_or_else(|| {
                    Error::InvalidInput("c = 0 cannot be absorbed into the metric".into())
                })?;
                projector_from_solution(unit, &self.samples, self.projector_tol)
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

pub(crate) enum Outcome {
    Measured {
        residual: f64,
        points: usize,
        detail: Option<String>,
    },
    Skipped(String),
}

impl Outcome {
    fn measured(residual: f64, points: usize) -> Outcome {
        Outcome::Measured {
            residual,
            points,
            detail: None,
        }
    }

    fn with_detail(self, text: impl Into<String>) -> Outcome {
        match self {
            Outcome::Measured {
                residual, points, ..
            } => Outcome::Measured {
                residual,
                points,
                detail: Some(text.into()),
            },
            skipped => skipped,
        }
    }
}

type CheckFn = fn(&Context, u64) -> Result<Outcome>;

/// A registered check.
pub struct CheckSpec {
    /// Dotted name used in reports.
    pub name: &'static str,
    /// Short alias accepted in configurations.
    pub alias: &'static str,
    /// The claim being checked.
    pub claim: &'static str,
    pub default_tolerance: f64,
    pub(crate) run: CheckFn,
}

impl std::fmt::Debug for CheckSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CheckSpec")
            .field("name", &self.name)
            .field("alias", &self.alias)
            .finish()
    }
}

/// All checks in execution order.
pub fn registry() -> &'static [CheckSpec] {
    &REGISTRY
}

/// Looks a check up by dotted name or alias.
pub fn find_check(name: &str) -> Option<&'static CheckSpec> {
    REGISTRY.iter().find(|c| c.name == name || c.alias == name)
}

static REGISTRY: [CheckSpec; 25] = [
    CheckSpec {
        name: "kahler.structure",
        alias: "kahler",
        claim: "J² = −Id, Jᵀ g J = g and ∇J = 0 on the chart",
        default_tolerance: 1e-8,
        run: check_kahler,
    },
    CheckSpec {
        name: "oracle.derivatives",
        alias: "oracle",
        claim: "exact partial derivatives (orders 1–3) and Christoffel symbols agree with finite differences (relative error)",
        default_tolerance: 1e-6,
        run: check_oracle,
    },
    CheckSpec {
        name: "eq1.tanno",
        alias: "tanno",
        claim: "f_{,ijk} + c(2f_k g_ij + f_i g_jk + f_j g_ik − f̄_i J_jk − f̄_j J_ik) = 0",
        default_tolerance: 1e-7,
        run: check_tanno,
    },
    CheckSpec {
        name: "eq2.gallot_tanno",
        alias: "gallot_tanno",
        claim: "f_{,ijk} + c(2f_k g_ij + f_i g_jk + f_j g_ik) = 0",
        default_tolerance: 1e-7,
        run: check_gallot_tanno,
    },
    CheckSpec {
        name: "rem1.laplace_identity",
        alias: "laplace_identity",
        claim: "(Δf)_{,k} = −4c(n+1) f_{,k}",
        default_tolerance: 1e-6,
        run: check_laplace,
    },
    CheckSpec {
        name: "eq_system.system",
        alias: "system",
        claim: "the bundle (a, f_i, μ) solves the first-order system (c = 1)",
        default_tolerance: 1e-7,
        run: check_system,
    },
    CheckSpec {
        name: "eq_def.inverse",
        alias: "inverse",
        claim: "f = −μ/2 recovers f from its bundle",
        default_tolerance: 1e-15,
        run: check_inverse,
    },
    CheckSpec {
        name: "eq_def.hermitian",
        alias: "hermitian",
        claim: "Jᵀ a J = a for the bundle of a solution",
        default_tolerance: 1e-8,
        run: check_hermitian,
    },
    CheckSpec {
        name: "rem4.trace_identity",
        alias: "trace_identity",
        claim: "f_i = ¼ (a^α_α)_{,i}",
        default_tolerance: 1e-6,
        run: check_trace,
    },
    CheckSpec {
        name: "lemma1.transport",
        alias: "transport",
        claim: "transporting the bundle along curves reproduces it and closes loops",
        default_tolerance: 1e-5,
        run: check_transport,
    },
    CheckSpec {
        name: "lemma1.zero_transport",
        alias: "zero_transport",
        claim: "a bundle vanishing at one point vanishes along every curve",
        default_tolerance: 1e-10,
        run: check_zero_transport,
    },
    CheckSpec {
        name: "rem2.lightlike",
        alias: "lightlike",
        claim: "d³/dt³ f(γ(t)) = 0 along lightlike geodesics when c = 0",
        default_tolerance: 1e-9,
        run: check_lightlike,
    },
    CheckSpec {
        name: "eq_operator.L_identity",
        alias: "L_identity",
        claim: "L(−½) = Id and L(f) has the block shape of an extended operator",
        default_tolerance: 1e-12,
        run: check_l_identity,
    },
    CheckSpec {
        name: "eq_product.block_identity",
        alias: "block_identity",
        claim: "L(f)·L(F) equals its block formula for arbitrary fields",
        default_tolerance: 1e-10,
        run: check_block_identity,
    },
    CheckSpec {
        name: "lemma2.star_power",
        alias: "star_power",
        claim: "L(f^{*k}) = L(f)^k for k = 2, 3, 4",
        default_tolerance: 1e-7,
        run: check_star_power,
    },
    CheckSpec {
        name: "cor1.poly_star",
        alias: "poly_star",
        claim: "L(P*(f)) = P(L(f)) and P*(f) is again a solution",
        default_tolerance: 1e-7,
        run: check_poly_star,
    },
    CheckSpec {
        name: "cor2.spectrum_constancy",
        alias: "spectrum_constancy",
        claim: "the clustered spectrum of L(f) is the same at every point",
        default_tolerance: 1e-6,
        run: check_spectrum_constancy,
    },
    CheckSpec {
        name: "lemma3.minimal_polynomial",
        alias: "minimal_polynomial",
        claim: "the minimal polynomial of L(f) is the same at every point",
        default_tolerance: 1e-5,
        run: check_minimal_polynomial,
    },
    CheckSpec {
        name: "lemma4.two_eigenvalues",
        alias: "two_eigenvalues",
        claim: "L(f) has at least two distinct real eigenvalues for non-constant f (fraction of violating points)",
        default_tolerance: 1e-12,
        run: check_two_eigenvalues,
    },
    CheckSpec {
        name: "lemma5.projector",
        alias: "projector",
        claim: "some P(L(f)) = L(P*(f)) is a nontrivial projector at every point",
        default_tolerance: 1e-7,
        run: check_projector,
    },
    CheckSpec {
        name: "lemma6.eigenstructure",
        alias: "eigenstructure",
        claim: "for a projector solution, a^i_j has eigenvalues 1, 0 and 1−μ with the predicted multiplicities",
        default_tolerance: 1e-6,
        run: check_eigenstructure,
    },
    CheckSpec {
        name: "sec4.mu_range",
        alias: "mu_range",
        claim: "0 ≤ μ ≤ 1 for a projector solution",
        default_tolerance: 1e-9,
        run: check_mu_range,
    },
    CheckSpec {
        name: "eq_mu.mu_hessian",
        alias: "mu_hessian",
        claim: "μ_{,ij} = 2a_ij − 2μ g_ij",
        default_tolerance: 1e-7,
        run: check_mu_hessian,
    },
    CheckSpec {
        name: "thm3.positivity",
        alias: "positivity",
        claim: "a projector solution forces a positive definite metric",
        default_tolerance: 1e-6,
        run: check_positivity,
    },
    CheckSpec {
        name: "sig.constancy",
        alias: "signature",
        claim: "the inertia of g is the same at every sample (fraction of differing points)",
        default_tolerance: 1e-12,
        run: check_signature,
    },
];

/// Largest value of `f` over the samples, evaluated in parallel and reduced
/// in sample order. Any NaN wins.
fn max_over<F>(ctx: &Context, f: F) -> Result<Outcome>
where
    F: Fn(&ChartPoint) -> Result<f64> + Sync + Send,
{
    max_over_points(&ctx.samples, f)
}

fn max_over_points<F>(points: &[ChartPoint], f: F) -> Result<Outcome>
where
    F: Fn(&ChartPoint) -> Result<f64> + Sync + Send,
{
    let values: Vec<Result<f64>> = points.par_iter().map(f).collect();
    let mut worst: f64 = 0.0;
    for v in values {
        let v = v?;
        if v.is_nan() || v > worst {
            worst = v;
        }
    }
    Ok(Outcome::measured(worst, points.len()))
}

macro_rules! unit_or_skip {
    ($ctx:expr) => {
        match $ctx.unit.as_ref() {
            Some(u) => u,
            None => {
                return Ok(Outcome::Skipped(
                    "c = 0 cannot be absorbed into the metric; check assumes c = 1".into(),
                ))
            }
        }
    };
}

macro_rules! nonconstant_or_skip {
    ($ctx:expr) => {
        if $ctx.kind == SolutionKind::Constant {
            return Ok(Outcome::Skipped(
                "constant solution; the claim concerns non-constant solutions".into(),
            ));
        }
    };
}

fn check_kahler(ctx: &Context, _: u64) -> Result<Outcome> {
    max_over(ctx, |p| Ok(kahler_residuals(&ctx.chart, p)?.max()))
}

fn relative(exact: &[f64], approx: &[f64]) -> f64 {
    let scale = exact.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    exact
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

fn check_oracle(ctx: &Context, _: u64) -> Result<Outcome> {
    let dim = ctx.chart.dim();
    let field = Arc::clone(&ctx.field);
    max_over(ctx, move |p| {
        let value = |x: &[f64]| field.value_at(&ChartPoint::new(x.to_vec())?);
        let jet = field.jet_at(p, 3)?;
        let mut worst: f64 = 0.0;
        let mut multi_indices: Vec<Vec<usize>> = (0..dim).map(|i| vec![i]).collect();
        for i in 0..dim {
            for j in i..dim {
                multi_indices.push(vec![i, j]);
                for k in j..dim {
                    multi_indices.push(vec![i, j, k]);
                }
            }
        }
        for order in 1..=3 {
            let idx: Vec<&Vec<usize>> = multi_indices.iter().filter(|m| m.len() == order).collect();
            let exact: Vec<f64> = idx.iter().map(|m| jet.partial(m)).collect();
            let approx: Vec<f64> = idx
                .iter()
                .map(|m| fd_partial(&value, p.coords(), m))
                .collect::<Result<_>>()?;
            worst = worst.max(relative(&exact, &approx));
        }
        let gamma = christoffel(&ctx.chart, p)?;
        let fd = fd_christoffel(&ctx.chart, p)?;
        Ok(worst.max(relative(gamma.components(), &fd)))
    })
}

fn check_tanno(ctx: &Context, _: u64) -> Result<Outcome> {
    max_over(ctx, |p| Ok(tanno_residual(&ctx.prob, p)?.frobenius_norm()))
}

fn check_gallot_tanno(ctx: &Context, _: u64) -> Result<Outcome> {
    max_over(ctx, |p| {
        Ok(gallot_tanno_residual(&ctx.prob, p)?.frobenius_norm())
    })
}

fn check_laplace(ctx: &Context, _: u64) -> Result<Outcome> {
    max_over(ctx, |p| laplace_identity_residual(&ctx.prob, p))
}

fn rescale_note(ctx: &Context) -> Option<String> {
    (ctx.prob.c != 1.0).then(|| format!("evaluated on the metric rescaled by c = {}", ctx.prob.c))
}

fn with_rescale_note(ctx: &Context, out: Outcome) -> Outcome {
    match rescale_note(ctx) {
        Some(note) => out.with_detail(note),
        None => out,
    }
}

fn check_system(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    let out = max_over(ctx, |p| Ok(system_residual(unit, p)?.max()))?;
    Ok(with_rescale_note(ctx, out))
}

fn check_inverse(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    max_over(ctx, |p| {
        let b = bundle_from_f(unit, p)?;
        Ok((f_from_mu(b.mu) - unit.field.value_at(p)?).abs())
    })
}

fn check_hermitian(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    max_over(ctx, |p| {
        let j = unit.chart.complex_structure_at(p)?;
        Ok(bundle_from_f(unit, p)?.hermitian_defect(&j))
    })
}

fn check_trace(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    let out = max_over(ctx, |p| trace_identity_residual(unit, p))?;
    Ok(with_rescale_note(ctx, out))
}

/// Longest polyline segment produced by [`polyline`].
const CURVE_SEGMENT: f64 = 0.25;
const CURVES: usize = 10;

/// The straight polyline through `vertices`, subdivided into short segments.
fn polyline(vertices: &[ChartPoint]) -> Vec<ChartPoint> {
    let mut out = vec![vertices[0].clone()];
    for pair in vertices.windows(2) {
        let a = pair[0].to_vector();
        let b = pair[1].to_vector();
        let pieces = ((&b - &a).norm() / CURVE_SEGMENT).ceil().max(1.0) as usize;
        for s in 1..=pieces {
            let x = &a + (&b - &a) * (s as f64 / pieces as f64);
            out.push(ChartPoint::new(x.iter().copied().collect()).expect("finite coordinates"));
        }
    }
    out
}

/// A random point of the sampling ball.
fn random_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> ChartPoint {
    loop {
        let x: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(-radius..radius))
            .collect();
        if x.iter().map(|v| v * v).sum::<f64>().sqrt() < radius {
            return ChartPoint::new(x).expect("finite coordinates");
        }
    }
}

/// `(open curve, closed loop)` pairs through random points.
fn random_curves(ctx: &Context, seed: u64) -> Vec<(Vec<ChartPoint>, Vec<ChartPoint>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = ctx.chart.dim();
    (0..CURVES)
        .map(|_| {
            let p = random_point(&mut rng, dim, ctx.radius);
            let m = random_point(&mut rng, dim, ctx.radius);
            let q = random_point(&mut rng, dim, ctx.radius);
            let open = polyline(&[p.clone(), m.clone(), q]);
            let m2 = random_point(&mut rng, dim, ctx.radius);
            let closed = polyline(&[p.clone(), m, m2, p]);
            (open, closed)
        })
        .collect()
}

fn check_transport(ctx: &Context, seed: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    let curves = random_curves(ctx, seed);
    let results: Vec<Result<f64>> = curves
        .par_iter()
        .map(|(open, closed)| {
            let start = bundle_from_f(unit, &open[0])?;
            let end = bundle_from_f(unit, open.last().expect("non-empty"))?;
            let moved = transport_bundle(&unit.chart, open, &start)?;
            let back = transport_bundle(&unit.chart, closed, &start)?;
            Ok(moved.max_abs_diff(&end).max(back.max_abs_diff(&start)))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for r in results {
        worst = worst.max(r?);
    }
    Ok(Outcome::measured(worst, CURVES))
}

fn check_zero_transport(ctx: &Context, seed: u64) -> Result<Outcome> {
    let curves = random_curves(ctx, seed);
    let zero = SolutionBundle::zero(ctx.chart.dim());
    let results: Vec<Result<f64>> = curves
        .par_iter()
        .map(|(open, closed)| {
            let a = transport_bundle(&ctx.chart, open, &zero)?.max_abs();
            let b = transport_bundle(&ctx.chart, closed, &zero)?.max_abs();
            Ok(a.max(b))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for r in results {
        worst = worst.max(r?);
    }
    Ok(Outcome::measured(worst, CURVES))
}

const LIGHTLIKE_GEODESICS: usize = 20;

fn check_lightlike(ctx: &Context, seed: u64) -> Result<Outcome> {
    if ctx.prob.c != 0.0 {
        return Ok(Outcome::Skipped(format!(
            "third derivative vanishes along lightlike geodesics only for c = 0 (got c = {})",
            ctx.prob.c
        )));
    }
    let origin = ChartPoint::origin(ctx.chart.dim());
    let inertia = metric_signature(&ctx.chart, &origin)?;
    if inertia.negative == 0 || inertia.positive == 0 {
        return Ok(Outcome::Skipped(
            "metric is definite; there are no lightlike geodesics".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(ChartPoint, Vec<f64>)> = (0..LIGHTLIKE_GEODESICS)
        .map(|_| {
            let p = random_point(&mut rng, ctx.chart.dim(), ctx.radius);
            let v = random_lightlike_vector(&ctx.chart, &p, &mut rng)?;
            Ok((p, v.iter().copied().collect()))
        })
        .collect::<Result<_>>()?;
    let results: Vec<Result<f64>> = starts
        .par_iter()
        .map(|(p, v)| {
            let geo = integrate_geodesic(&ctx.chart, p, v, 1.0, 16)?;
            geo.ensure_inside()?;
            lightlike_third_derivative(&ctx.chart, ctx.field.as_ref(), &geo)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for r in results {
        worst = worst.max(r?);
    }
    Ok(Outcome::measured(worst, LIGHTLIKE_GEODESICS))
}

fn check_l_identity(ctx: &Context, _: u64) -> Result<Outcome> {
    let half = TannoProblem::new(
        ctx.chart.clone(),
        ClosedFormField::constant(ctx.chart.dim(), -0.5).shared(),
        1.0,
    )?;
    let own = TannoProblem::new(ctx.chart.clone(), Arc::clone(&ctx.field), 1.0)?;
    max_over(ctx, |p| {
        let id = assemble_l(&half, p)?.entries;
        let n = id.nrows();
        let unit_defect = (&id - DMatrix::<f64>::identity(n, n)).amax();
        let l = assemble_l(&own, p)?.entries;
        let g = ctx.chart.metric_at(p)?;
        let j = ctx.chart.complex_structure_at(p)?;
        Ok(unit_defect.max(shape_deviation(&l, &g, &j)))
    })
}

/// Smooth fields with no special structure, paired with `f` in the block check.
fn companion_fields(dim: usize) -> Vec<SharedField> {
    let last = dim - 1;
    vec![
        ClosedFormField::new(dim, "sin(x1) + 0.3 x2^2", move |x: &[Jet]| {
            &x[0].sin() + &(&x[1] * &x[1]).scale(0.3)
        })
        .shared(),
        ClosedFormField::new(dim, "exp(0.2 x_last) x1", move |x: &[Jet]| {
            &x[last].scale(0.2).exp() * &x[0]
        })
        .shared(),
        ClosedFormField::new(dim, "cos(x1 x2) - x_last^3", move |x: &[Jet]| {
            &(&x[0] * &x[1]).cos() - &x[last].powi(3)
        })
        .shared(),
    ]
}

fn check_block_identity(ctx: &Context, _: u64) -> Result<Outcome> {
    // Pure algebra: any constant would do, so the unrescaled chart is used with c = 1.
    let own = TannoProblem::new(ctx.chart.clone(), Arc::clone(&ctx.field), 1.0)?;
    let companions = companion_fields(ctx.chart.dim());
    let mut pairs = vec![(own.clone(), own.clone())];
    for (i, h) in companions.iter().enumerate() {
        let other = own.with_field(Arc::clone(h))?;
        pairs.push((own.clone(), other.clone()));
        let next = own.with_field(Arc::clone(&companions[(i + 1) % companions.len()]))?;
        pairs.push((other, next));
    }
    max_over(ctx, |p| {
        let mut worst: f64 = 0.0;
        for (a, b) in &pairs {
            worst = worst.max(product_block_check(a, b, p)?.block_deviation);
        }
        Ok(worst)
    })
    .map(|o| o.with_detail(format!("{} field pairs per point", pairs.len())))
}

fn check_star_power(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    let powers: Vec<(usize, TannoProblem)> = (2..=4)
        .map(|k| {
            Ok((
                k,
                unit.with_field(star_power(&unit.chart, Arc::clone(&unit.field), k))?,
            ))
        })
        .collect::<Result<_>>()?;
    max_over(ctx, |p| {
        let l = assemble_l(unit, p)?.entries;
        let mut lk = l.clone();
        let mut worst: f64 = 0.0;
        for (_, prob) in &powers {
            lk = &lk * &l;
            worst = worst.max((assemble_l(prob, p)?.entries - &lk).norm());
        }
        Ok(worst)
    })
}

fn check_poly_star(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    let polys = [
        PolynomialReal::new(vec![0.5, -1.0, 0.25]),
        PolynomialReal::new(vec![0.1, 0.3]),
        PolynomialReal::new(vec![1.0]),
    ];
    let fields: Vec<(PolynomialReal, TannoProblem)> = polys
        .iter()
        .map(|poly| {
            Ok((
                poly.clone(),
                unit.with_field(poly_star(&unit.chart, Arc::clone(&unit.field), poly))?,
            ))
        })
        .collect::<Result<_>>()?;
    max_over(ctx, |p| {
        let l = assemble_l(unit, p)?.entries;
        let mut worst: f64 = 0.0;
        for (poly, prob) in &fields {
            let lhs = assemble_l(prob, p)?.entries;
            worst = worst.max((lhs - poly.eval_matrix(&l)).norm());
            worst = worst.max(system_residual(prob, p)?.max());
        }
        Ok(worst)
    })
}

fn check_spectrum_constancy(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    let spectra: Vec<Result<_>> = ctx
        .samples
        .par_iter()
        .map(|p| spectrum_relative(&assemble_l(unit, p)?.entries, DEFAULT_CLUSTER_TOL))
        .collect();
    let spectra: Vec<_> = spectra.into_iter().collect::<Result<_>>()?;
    let worst = spectra
        .iter()
        .map(|s| s.distance(&spectra[0]))
        .fold(0.0, |m: f64, d| if d.is_nan() || d > m { d } else { m });
    Ok(Outcome::measured(worst, spectra.len()).with_detail(format!("spectrum: {}", spectra[0])))
}

fn check_minimal_polynomial(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    let polys: Vec<Result<PolynomialReal>> = ctx
        .samples
        .par_iter()
        .map(|p| minimal_polynomial(&assemble_l(unit, p)?, DEFAULT_CLUSTER_TOL))
        .collect();
    let polys: Vec<PolynomialReal> = polys.into_iter().collect::<Result<_>>()?;
    let worst = polys
        .iter()
        .map(|q| {
            if q.degree() == polys[0].degree() {
                q.max_coeff_diff(&polys[0])
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(Outcome::measured(worst, polys.len()).with_detail(format!("P(t) = {}", polys[0])))
}

fn check_two_eigenvalues(ctx: &Context, _: u64) -> Result<Outcome> {
    nonconstant_or_skip!(ctx);
    let unit = unit_or_skip!(ctx);
    let counts: Vec<Result<usize>> = ctx
        .samples
        .par_iter()
        .map(|p| {
            Ok(
                spectrum_relative(&assemble_l(unit, p)?.entries, DEFAULT_CLUSTER_TOL)?
                    .real
                    .len(),
            )
        })
        .collect();
    let mut bad = 0usize;
    for c in counts {
        if c? < 2 {
            bad += 1;
        }
    }
    Ok(Outcome::measured(
        bad as f64 / ctx.samples.len() as f64,
        ctx.samples.len(),
    ))
}

fn check_projector(ctx: &Context, _: u64) -> Result<Outcome> {
    nonconstant_or_skip!(ctx);
    unit_or_skip!(ctx);
    let proj = ctx.projector()?;
    let n = ctx.chart.complex_dim() as f64;
    let rank = proj.trace.round();
    let mut residual = proj.max_idempotency();
    let rank_ok =
        (proj.trace - rank).abs() < 1e-6 && rank as i64 % 2 == 0 && (2.0..=2.0 * n).contains(&rank);
    if !rank_ok {
        residual = f64::INFINITY;
    }
    Ok(Outcome::measured(residual, proj.idempotency.len())
        .with_detail(format!("P(t) = {}, rank {}", proj.polynomial, proj.trace)))
}

fn projector_problem(ctx: &Context) -> Result<TannoProblem> {
    let unit = ctx.unit.as_ref().expect("caller checked c");
    unit.with_field(Arc::clone(&ctx.projector()?.field))
}

fn check_eigenstructure(ctx: &Context, _: u64) -> Result<Outcome> {
    nonconstant_or_skip!(ctx);
    unit_or_skip!(ctx);
    let checked = projector_problem(ctx)?;
    max_over(ctx, |p| {
        let r = eigenstructure_at(&checked, p, DEFAULT_CLUSTER_TOL)?;
        let same_shape = r.clusters.len() == r.expected.len()
            && r.clusters
                .iter()
                .zip(&r.expected)
                .all(|(a, b)| a.multiplicity == b.multiplicity);
        if !same_shape {
            return Ok(f64::INFINITY);
        }
        Ok(r.clusters
            .iter()
            .zip(&r.expected)
            .map(|(a, b)| (a.value - b.value).abs())
            .fold(0.0, f64::max))
    })
}

fn check_mu_range(ctx: &Context, _: u64) -> Result<Outcome> {
    nonconstant_or_skip!(ctx);
    unit_or_skip!(ctx);
    let field = Arc::clone(&ctx.projector()?.field);
    max_over(ctx, |p| {
        let mu = -2.0 * field.value_at(p)?;
        Ok((-mu).max(mu - 1.0).max(0.0))
    })
}

fn check_mu_hessian(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    max_over(ctx, |p| {
        crate::extended_operator::mu_hessian_residual(unit, p)
    })
}

fn check_positivity(ctx: &Context, _: u64) -> Result<Outcome> {
    let unit = unit_or_skip!(ctx);
    let opts = ScanOptions {
        projector_tol: ctx.projector_tol,
        ..ScanOptions::default()
    };
    if ctx.kind == SolutionKind::Constant {
        let report = positivity_scan(unit, &ctx.samples, &opts)?;
        return Ok(Outcome::Skipped(format!(
            "{}; metric inertia ({}, {})",
            report.notes.join("; "),
            report.n_pos,
            report.n_neg
        )));
    }
    let checked = projector_problem(ctx)?;
    let report = positivity_scan(&checked, &ctx.samples, &opts)?;
    let witnesses: Vec<_> = report.maximum.iter().chain(report.minimum.iter()).collect();
    let mut residual = witnesses
        .iter()
        .map(|w| w.restriction_identity)
        .fold(0.0, f64::max);
    let witness_ok = witnesses.iter().all(|w| {
        let definite = w.restricted_metric.positive == w.subspace_dim;
        let sign_ok = match w.classification {
            crate::extended_operator::PointClass::MuMax => w.hessian_extreme <= opts.grad_tol,
            _ => w.hessian_extreme >= -opts.grad_tol,
        };
        definite && sign_ok
    });
    if report.verdict != SignatureVerdict::Positive || !witness_ok {
        residual = f64::INFINITY;
    }
    Ok(
        Outcome::measured(residual, report.per_point.len()).with_detail(format!(
            "verdict {:?}, inertia ({}, {}), witnessed {:?}",
            report.verdict, report.n_pos, report.n_neg, report.witnessed
        )),
    )
}

fn check_signature(ctx: &Context, _: u64) -> Result<Outcome> {
    let found: Vec<Result<_>> = ctx
        .samples
        .par_iter()
        .map(|p| metric_signature(&ctx.chart, p))
        .collect();
    let found: Vec<_> = found.into_iter().collect::<Result<_>>()?;
    let differing = found.iter().filter(|i| **i != found[0]).count();
    Ok(
        Outcome::measured(differing as f64 / found.len() as f64, found.len()).with_detail(format!(
            "inertia ({}, {})",
            found[0].positive, found[0].negative
        )),
    )
}
