//! Scalar ℓ_p helpers on plain slices.

use crate::exponent::Exponent;

/// (Σ w_i |v_i|^p)^{1/p}, max over the support of w when p = ∞. Scaled to avoid overflow.
pub(crate) fn weighted_lp(w: Option<&[f64]>, v: &[f64], p: Exponent) -> f64 {
    let m = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    match p {
        Exponent::Infinity => m,
        Exponent::Finite(p) => {
            let s: f64 = match w {
                Some(w) => v.iter().zip(w).map(|(x, wi)| wi * (x.abs() / m).powf(p)).sum(),
                None => v.iter().map(|x| (x.abs() / m).powf(p)).sum(),
            };
            m * s.powf(1.0 / p)
        }
    }
}

pub(crate) fn lp(v: &[f64], p: Exponent) -> f64 {
    weighted_lp(None, v, p)
}

/// An element of the unit sphere of L_{r'}(w) norming u in L_r(w) under the pairing Σ w a u.
/// Zero when u = 0. Requires r ≥ 1.
pub(crate) fn weighted_norming(w: Option<&[f64]>, u: &[f64], r: Exponent) -> Vec<f64> {
    let n = weighted_lp(w, u, r);
    let mut out = vec![0.0; u.len()];
    if n == 0.0 {
        return out;
    }
    match r {
        Exponent::Infinity => {
            let mut best = 0;
            for (j, x) in u.iter().enumerate() {
                if x.abs() > u[best].abs() {
                    best = j;
                }
            }
            let wj = w.map_or(1.0, |w| w[best]);
            out[best] = u[best].signum() / wj;
        }
        Exponent::Finite(r) if r == 1.0 => {
            for (o, x) in out.iter_mut().zip(u) {
                if *x != 0.0 {
                    *o = x.signum();
                }
            }
        }
        Exponent::Finite(r) => {
            for (o, x) in out.iter_mut().zip(u) {
                if *x != 0.0 {
                    *o = x.signum() * (x.abs() / n).powf(r - 1.0);
                }
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

/// Value of the pointwise mixed norm ‖(‖row_i‖_inner)_i‖_outer on a flat row-major vector.
pub(crate) fn mixed(v: &[f64], cols: usize, outer: Exponent, inner: Exponent) -> f64 {
    if cols == 0 || v.is_empty() {
        return 0.0;
    }
    if outer.approx_eq(inner) {
        return lp(v, outer);
    }
    let rows: Vec<f64> = v.chunks(cols).map(|r| lp(r, inner)).collect();
    lp(&rows, outer)
}

/// A vector in the unit sphere of the dual mixed norm (outer', inner') norming v.
pub(crate) fn mixed_norming(v: &[f64], cols: usize, outer: Exponent, inner: Exponent) -> Vec<f64> {
    if cols == 0 || v.is_empty() {
        return vec![0.0; v.len()];
    }
    if outer.approx_eq(inner) {
        return weighted_norming(None, v, outer);
    }
    let rows: Vec<f64> = v.chunks(cols).map(|r| lp(r, inner)).collect();
    let alpha = weighted_norming(None, &rows, outer);
    let mut out = Vec::with_capacity(v.len());
    for (r, a) in v.chunks(cols).zip(alpha) {
        let beta = weighted_norming(None, r, inner);
        out.extend(beta.into_iter().map(|b| a * b));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::exp;

    #[test]
    fn norming_pairs_to_norm() {
        let u = [1.0, -2.0, 0.5];
        let w = [0.3, 1.2, 2.0];
        for r in [exp(1.0), exp(1.5), exp(2.0), exp(7.0), Exponent::INF] {
            let a = weighted_norming(Some(&w), &u, r);
            let n = weighted_lp(Some(&w), &u, r);
            assert!((wdot(&w, &a, &u) - n).abs() < 1e-12 * n.max(1.0));
            let rc = r.conjugate().unwrap();
            assert!((weighted_lp(Some(&w), &a, rc) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_norming_is_dual_unit() {
        let v = [1.0, -2.0, 3.0, 0.0, 0.5, 4.0];
        let (o, i) = (exp(3.0), exp(1.5));
        let a = mixed_norming(&v, 3, o, i);
        let val = mixed(&v, 3, o, i);
        assert!((dot(&a, &v) - val).abs() < 1e-12 * val);
        let d = mixed(&a, 3, o.conjugate().unwrap(), i.conjugate().unwrap());
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_exponent_no_overflow() {
        let v = [1e200, 1e200];
        let n = lp(&v, exp(50.0));
        assert!(n.is_finite() && n > 1e200);
    }
}
