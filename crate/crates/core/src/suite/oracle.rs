//! Central finite differences with two Richardson levels, used by the
//! `oracle.derivatives` check to audit the jet arithmetic.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::tensor_calculus::{ChartPoint, KahlerChart};

const BASE_STEP: f64 = 4e-2;

fn nested(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    x: &mut Vec<f64>,
    dirs: &[usize],
    h: f64,
) -> Result<f64> {
    let Some((&d, rest)) = dirs.split_first() else {
        return f(x);
    };
    let x0 = x[d];
    x[d] = x0 + h;
    let plus = nested(f, x, rest, h)?;
    x[d] = x0 - h;
    let minus = nested(f, x, rest, h)?;
    x[d] = x0;
    Ok((plus - minus) / (2.0 * h))
}

/// `∂^|dirs| f / ∂x_{dirs[0]} …` at `x`, error `O(h⁶)` in the base step.
pub(crate) fn fd_partial(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    x: &[f64],
    dirs: &[usize],
) -> Result<f64> {
    let mut buf = x.to_vec();
    let d: Vec<f64> = [BASE_STEP, BASE_STEP / 2.0, BASE_STEP / 4.0]
        .iter()
        .map(|&h| nested(f, &mut buf, dirs, h))
        .collect::<Result<_>>()?;
    let r1 = (4.0 * d[1] - d[0]) / 3.0;
    let r2 = (4.0 * d[2] - d[1]) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

/// Christoffel symbols `Γ^k_ij` at `(k * dim + i) * dim + j` from
/// finite-difference metric derivatives.
pub(crate) fn fd_christoffel(chart: &KahlerChart, p: &ChartPoint) -> Result<Vec<f64>> {
    let dim = chart.dim();
    let ginv = chart.inverse_metric_at(p)?;
    let mut dg = vec![DMatrix::<f64>::zeros(dim, dim); dim];
    for (m, slot) in dg.iter_mut().enumerate() {
        for a in 0..dim {
            for b in a..dim {
                let entry = |x: &[f64]| -> Result<f64> {
                    let q = ChartPoint::new(x.to_vec())?;
                    Ok(chart.metric_at(&q)?[(a, b)])
                };
                let v = fd_partial(&entry, p.coords(), &[m])?;
                slot[(a, b)] = v;
                slot[(b, a)] = v;
            }
        }
    }
    let mut out = vec![0.0; dim * dim * dim];
    for k in 0..dim {
        for i in 0..dim {
            for j in 0..dim {
                out[(k * dim + i) * dim + j] = 0.5
                    * (0..dim)
                        .map(|l| ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]))
                        .sum::<f64>();
            }
        }
    }
    Ok(out)
}
