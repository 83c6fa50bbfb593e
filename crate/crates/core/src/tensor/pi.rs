//! Projective norm: column generation on the dual, and an AM-space route through
//! sign-vertex linear programming.

use crate::ascent::operator_norm;
use crate::error::Result;
use crate::lp::{Cmp, LinearProgram};
use crate::space::{FunctionSpace, OperatorMatrix};

use super::search::{Mat, Rep};

pub(crate) struct CgOutcome {
    pub a: Mat,
    pub bound: f64,
    pub upper: f64,
    pub rep: Rep,
}

/// The bilinear form A viewed as an operator X → Y' under the weighted pairing of Y.
pub fn form_operator(left: &FunctionSpace, right: &FunctionSpace, a: &Mat) -> Result<OperatorMatrix> {
    let nu = right.weights();
    let entries = (0..right.atoms()).map(|b| (0..left.atoms()).map(|i| a[i][b] / nu[b]).collect()).collect();
    OperatorMatrix::new(left.clone(), right.dual()?, entries)
}

fn unit(space: &FunctionSpace, v: Vec<f64>) -> Option<Vec<f64>> {
    let n = space.norm_of(&v);
    (n > 0.0 && n.is_finite()).then(|| v.into_iter().map(|x| x / n).collect())
}

fn elementary(n: usize, a: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[a] = 1.0;
    e
}

pub(crate) fn column_generation(
    left: &FunctionSpace,
    right: &FunctionSpace,
    z: &Mat,
    seeds: &[(Vec<f64>, Vec<f64>)],
    cut_iters: usize,
) -> Result<CgOutcome> {
    let n = left.atoms();
    let m = right.atoms();
    let mut atoms: Vec<(Vec<f64>, Vec<f64>)> = vec![];
    for a in 0..n {
        for b in 0..m {
            atoms.push((unit(left, elementary(n, a)).expect("atom"), unit(right, elementary(m, b)).expect("atom")));
        }
    }
    for (x, y) in seeds {
        if let (Some(x), Some(y)) = (unit(left, x.clone()), unit(right, y.clone())) {
            atoms.push((x, y));
        }
    }
    let mut best: Option<(f64, Mat, f64)> = None;
    for _ in 0..=cut_iters {
        let mut lp = LinearProgram::default();
        for a in 0..n {
            for b in 0..m {
                let cap = 1.0 / (left.indicator_norm(a) * right.indicator_norm(b));
                lp.var(z[a][b], -cap, cap);
            }
        }
        for (x, y) in &atoms {
            let coefs: Vec<(usize, f64)> =
                (0..n * m).map(|k| (k, x[k / m] * y[k % m])).filter(|(_, c)| *c != 0.0).collect();
            lp.row(coefs.clone(), Cmp::Le, 1.0);
            lp.row(coefs, Cmp::Ge, -1.0);
        }
        let (val, sol) = lp.maximize()?;
        let a: Mat = (0..n).map(|i| sol[i * m..(i + 1) * m].to_vec()).collect();
        let op = form_operator(left, right, &a)?;
        let nb = operator_norm(&op)?;
        let bound = nb.upper.max(1.0);
        let lower = val / bound;
        if best.as_ref().is_none_or(|b| lower > b.0) {
            best = Some((lower, a.clone(), bound));
        }
        if nb.lower <= 1.0 + 1e-9 {
            break;
        }
        let x = unit(left, nb.witness.clone());
        let Some(x) = x else { break };
        let y = unit(right, right.ball_support_of(&op.apply_of(&x)));
        let Some(y) = y else { break };
        atoms.push((x, y));
    }
    let (_, a, bound) = best.expect("at least one iteration");

    let mut lp = LinearProgram::default();
    for (x, y) in &atoms {
        let c = left.norm_of(x) * right.norm_of(y);
        lp.var(c, 0.0, f64::INFINITY);
        lp.var(c, 0.0, f64::INFINITY);
    }
    for i in 0..n {
        for j in 0..m {
            let coefs = atoms
                .iter()
                .enumerate()
                .flat_map(|(k, (x, y))| {
                    let c = x[i] * y[j];
                    [(2 * k, c), (2 * k + 1, -c)]
                })
                .filter(|(_, c)| *c != 0.0)
                .collect();
            lp.row(coefs, Cmp::Eq, z[i][j]);
        }
    }
    let (_, lam) = lp.minimize()?;
    let terms: Vec<_> = atoms
        .iter()
        .enumerate()
        .filter_map(|(k, (x, y))| {
            let l = lam[2 * k] - lam[2 * k + 1];
            (l.abs() > 1e-15).then(|| (x.iter().map(|v| v * l).collect(), y.clone()))
        })
        .collect();
    let rep = Rep::from_terms(&terms).cleaned(z);
    let upper = projective_cost(left, right, &rep);
    Ok(CgOutcome { a, bound, upper, rep })
}

pub(crate) fn projective_cost(left: &FunctionSpace, right: &FunctionSpace, rep: &Rep) -> f64 {
    rep.xs.iter().zip(&rep.ys).map(|(x, y)| left.norm_of(x) * right.norm_of(y)).sum()
}

fn sign_vertices(n: usize, fix_first: bool) -> Vec<Vec<f64>> {
    let free = if fix_first { n.saturating_sub(1) } else { n };
    (0..1usize << free)
        .map(|mask| {
            (0..n)
                .map(|i| {
                    let bit = if fix_first { i.checked_sub(1) } else { Some(i) };
                    match bit {
                        Some(b) if mask >> b & 1 == 1 => -1.0,
                        _ => 1.0,
                    }
                })
                .collect()
        })
        .collect()
}

const AM_VERTEX_LIMIT: usize = 4096;

/// Moves a representation into ℓ_∞(supp x0) ⊗ ℓ_∞(supp y0), with x0, y0 its square functions,
/// solves the projective norm there exactly and maps the optimal representation back.
pub(crate) fn am_route(left: &FunctionSpace, right: &FunctionSpace, z: &Mat, rep: &Rep) -> Result<Option<(f64, Rep)>> {
    let n = left.atoms();
    let m = right.atoms();
    let square = |fam: &[Vec<f64>], len: usize| -> Vec<f64> {
        (0..len).map(|a| fam.iter().map(|v| v[a] * v[a]).sum::<f64>().sqrt()).collect()
    };
    let x0 = square(&rep.xs, n);
    let y0 = square(&rep.ys, m);
    let sx: Vec<usize> = (0..n).filter(|&a| x0[a] > 0.0).collect();
    let sy: Vec<usize> = (0..m).filter(|&b| y0[b] > 0.0).collect();
    if sx.is_empty() || sy.is_empty() {
        return Ok(None);
    }
    let vx = sign_vertices(sx.len(), true);
    let vy = sign_vertices(sy.len(), false);
    if vx.len() * vy.len() > AM_VERTEX_LIMIT {
        return Ok(None);
    }
    let (nx0, ny0) = (left.norm_of(&x0), right.norm_of(&y0));
    let mut zt = vec![vec![0.0; sy.len()]; sx.len()];
    for (x, y) in rep.xs.iter().zip(&rep.ys) {
        for (ia, &a) in sx.iter().enumerate() {
            for (ib, &b) in sy.iter().enumerate() {
                zt[ia][ib] += (x[a] * nx0 / x0[a]) * (y[b] * ny0 / y0[b]);
            }
        }
    }
    let mut lp = LinearProgram::default();
    for _ in 0..vx.len() * vy.len() {
        lp.var(1.0, 0.0, f64::INFINITY);
        lp.var(1.0, 0.0, f64::INFINITY);
    }
    for ia in 0..sx.len() {
        for ib in 0..sy.len() {
            let mut coefs = Vec::with_capacity(2 * vx.len() * vy.len());
            for (k, s) in vx.iter().enumerate() {
                for (l, t) in vy.iter().enumerate() {
                    let c = s[ia] * t[ib];
                    let v = k * vy.len() + l;
                    coefs.push((2 * v, c));
                    coefs.push((2 * v + 1, -c));
                }
            }
            lp.row(coefs, Cmp::Eq, zt[ia][ib]);
        }
    }
    let (_, lam) = lp.minimize()?;
    let mut terms = vec![];
    for (k, s) in vx.iter().enumerate() {
        for (l, t) in vy.iter().enumerate() {
            let v = k * vy.len() + l;
            let c = lam[2 * v] - lam[2 * v + 1];
            if c.abs() <= 1e-15 {
                continue;
            }
            let mut x = vec![0.0; n];
            for (ia, &a) in sx.iter().enumerate() {
                x[a] = c * s[ia] * x0[a] / nx0;
            }
            let mut y = vec![0.0; m];
            for (ib, &b) in sy.iter().enumerate() {
                y[b] = t[ib] * y0[b] / ny0;
            }
            terms.push((x, y));
        }
    }
    let rep = Rep::from_terms(&terms).cleaned(z);
    Ok(Some((projective_cost(left, right, &rep), rep)))
}
