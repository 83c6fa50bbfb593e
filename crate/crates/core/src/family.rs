//! Norms of finite families of lattice vectors, their norming families and
//! dual-ball supports. A family is stored member-major: `fam[k][atom]`.

use crate::error::Result;
use crate::exponent::Exponent;
use crate::scalar::{lp, mixed, mixed_norming, weighted_norming};
use crate::space::FunctionSpace;

pub(crate) type Family = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Mixed {
    /// ‖(Σ_i (Σ_j |x_ij|^inner)^{outer/inner})^{1/outer}‖_X, rows of length `cols`.
    Lattice { outer: Exponent, inner: Exponent, cols: usize },
    /// (Σ_k ‖x_k‖^p)^{1/p}.
    Sequence(Exponent),
}

impl Mixed {
    pub(crate) fn tuple(p: Exponent) -> Mixed {
        Mixed::Lattice { outer: p, inner: p, cols: 1 }
    }

    fn conj(self) -> Mixed {
        let c = |p: Exponent| p.conjugate().unwrap_or(Exponent::ONE);
        match self {
            Mixed::Lattice { outer, inner, cols } => Mixed::Lattice { outer: c(outer), inner: c(inner), cols },
            Mixed::Sequence(p) => Mixed::Sequence(c(p)),
        }
    }
}

fn pointwise(fam: &[Vec<f64>], atom: usize) -> Vec<f64> {
    fam.iter().map(|m| m[atom]).collect()
}

fn lattice_profile(atoms: usize, fam: &[Vec<f64>], outer: Exponent, inner: Exponent, cols: usize) -> Vec<f64> {
    (0..atoms).map(|w| mixed(&pointwise(fam, w), cols, outer, inner)).collect()
}

pub(crate) fn value(sp: &FunctionSpace, fam: &[Vec<f64>], m: Mixed) -> f64 {
    if fam.is_empty() {
        return 0.0;
    }
    match m {
        Mixed::Lattice { outer, inner, cols } => sp.norm_of(&lattice_profile(sp.atoms(), fam, outer, inner, cols)),
        Mixed::Sequence(p) => lp(&fam.iter().map(|x| sp.norm_of(x)).collect::<Vec<_>>(), p),
    }
}

/// Norm of a family of functionals in the dual of the family space.
#[cfg(test)]
pub(crate) fn dual_value(sp: &FunctionSpace, fam: &[Vec<f64>], m: Mixed) -> f64 {
    if fam.is_empty() {
        return 0.0;
    }
    match m.conj() {
        Mixed::Lattice { outer, inner, cols } => {
            sp.dual_norm_of(&lattice_profile(sp.atoms(), fam, outer, inner, cols))
        }
        Mixed::Sequence(p) => lp(&fam.iter().map(|a| sp.dual_norm_of(a)).collect::<Vec<_>>(), p),
    }
}

/// A family of functionals of dual family norm ≤ 1 whose pairing with `fam` is its value.
pub(crate) fn norming(sp: &FunctionSpace, fam: &[Vec<f64>], m: Mixed) -> Result<Family> {
    let n = sp.atoms();
    let mut out = vec![vec![0.0; n]; fam.len()];
    match m {
        Mixed::Lattice { outer, inner, cols } => {
            let prof = lattice_profile(n, fam, outer, inner, cols);
            let xp = sp.norming_of(&prof)?;
            for w in 0..n {
                if prof[w] == 0.0 {
                    continue;
                }
                let eta = mixed_norming(&pointwise(fam, w), cols, outer, inner);
                let c = xp[w].abs();
                for (k, e) in eta.into_iter().enumerate() {
                    out[k][w] = c * e;
                }
            }
        }
        Mixed::Sequence(p) => {
            let norms: Vec<f64> = fam.iter().map(|x| sp.norm_of(x)).collect();
            let c = weighted_norming(None, &norms, p);
            for (k, x) in fam.iter().enumerate() {
                if c[k] != 0.0 {
                    out[k] = sp.norming_of(x)?.into_iter().map(|v| c[k] * v).collect();
                }
            }
        }
    }
    Ok(out)
}

/// A family in the unit ball of the family norm maximizing the pairing with `a`.
pub(crate) fn support(sp: &FunctionSpace, a: &[Vec<f64>], m: Mixed) -> Family {
    let n = sp.atoms();
    let mut out = vec![vec![0.0; n]; a.len()];
    match m.conj() {
        Mixed::Lattice { outer, inner, cols } => {
            let prof = lattice_profile(n, a, outer, inner, cols);
            let u = sp.ball_support_of(&prof);
            for w in 0..n {
                if prof[w] == 0.0 || u[w] == 0.0 {
                    continue;
                }
                let eta = mixed_norming(&pointwise(a, w), cols, outer, inner);
                let c = u[w].abs();
                for (k, e) in eta.into_iter().enumerate() {
                    out[k][w] = c * e;
                }
            }
        }
        Mixed::Sequence(pc) => {
            let d: Vec<f64> = a.iter().map(|x| sp.dual_norm_of(x)).collect();
            let c = weighted_norming(None, &d, pc);
            for (k, x) in a.iter().enumerate() {
                if c[k] != 0.0 {
                    out[k] = sp.ball_support_of(x).into_iter().map(|v| c[k] * v).collect();
                }
            }
        }
    }
    out
}

pub(crate) fn pairing(sp: &FunctionSpace, a: &[Vec<f64>], x: &[Vec<f64>]) -> f64 {
    let w = sp.weights();
    a.iter()
        .zip(x)
        .map(|(ak, xk)| ak.iter().zip(xk).zip(w).map(|((p, q), m)| m * p * q).sum::<f64>())
        .sum()
}

pub(crate) fn scale(fam: &mut [Vec<f64>], c: f64) {
    fam.iter_mut().flatten().for_each(|v| *v *= c);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::exp;

    fn sample() -> Family {
        vec![vec![1.0, -2.0, 0.5], vec![0.0, 3.0, -1.0], vec![2.0, 0.5, 0.0], vec![-1.0, 1.0, 1.0]]
    }

    #[test]
    fn norming_and_support_are_dual() {
        let sp = FunctionSpace::weighted_lr(vec![0.5, 1.0, 2.0], exp(3.0)).unwrap();
        let modes = [
            Mixed::tuple(exp(2.0)),
            Mixed::tuple(Exponent::INF),
            Mixed::tuple(exp(1.0)),
            Mixed::Lattice { outer: exp(3.0), inner: exp(1.5), cols: 2 },
            Mixed::Sequence(exp(2.0)),
            Mixed::Sequence(Exponent::INF),
        ];
        let fam = sample();
        for m in modes {
            let v = value(&sp, &fam, m);
            let y = norming(&sp, &fam, m).unwrap();
            assert!((pairing(&sp, &y, &fam) - v).abs() < 1e-10 * v, "{m:?}");
            assert!(dual_value(&sp, &y, m) <= 1.0 + 1e-10, "{m:?}");
            let x = support(&sp, &fam, m);
            let dv = dual_value(&sp, &fam, m);
            assert!(value(&sp, &x, m) <= 1.0 + 1e-10, "{m:?}");
            assert!((pairing(&sp, &fam, &x) - dv).abs() < 1e-10 * dv, "{m:?}");
        }
    }
}
