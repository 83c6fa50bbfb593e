//! Derivative-free local minimization by line searches along coordinate,
//! random and pattern directions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SearchOptions {
    pub max_sweeps: usize,
    pub tol: f64,
    pub random_dirs: usize,
    pub step0: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { max_sweeps: 400, tol: 1e-10, random_dirs: 2, step0: 0.5 }
    }
}

const GOLD: f64 = 0.381_966_011_250_105_1;

fn along(x: &[f64], d: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Minimizes f along x + t d. Returns (t, f) of the best point, t = 0 if nothing improved.
fn line_min<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], d: &[f64], fx: f64, h: f64, tol: f64) -> (f64, f64) {
    let mut h = h;
    let mut fb = f(&along(x, d, h));
    if !(fb < fx) {
        h = -h;
        fb = f(&along(x, d, h));
        if !(fb < fx) {
            return (0.0, fx);
        }
    }
    let (mut a, mut b) = (0.0, h);
    let mut c = 2.0 * h;
    let mut fc = f(&along(x, d, c));
    let mut guard = 0;
    while fc < fb && guard < 60 {
        a = b;
        b = c;
        fb = fc;
        c = 2.0 * c;
        fc = f(&along(x, d, c));
        guard += 1;
    }
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let (mut best_t, mut best_f) = (b, fb);
    let scale = 1.0 + b.abs();
    let mut x1 = lo + GOLD * (hi - lo);
    let mut x2 = hi - GOLD * (hi - lo);
    let mut f1 = f(&along(x, d, x1));
    let mut f2 = f(&along(x, d, x2));
    for _ in 0..80 {
        if (hi - lo) <= tol * scale {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + GOLD * (hi - lo);
            f1 = f(&along(x, d, x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - GOLD * (hi - lo);
            f2 = f(&along(x, d, x2));
        }
        if f1 < best_f {
            best_f = f1;
            best_t = x1;
        }
        if f2 < best_f {
            best_f = f2;
            best_t = x2;
        }
    }
    (best_t, best_f)
}

/// Local minimization of `f` from `x0`.
pub(crate) fn minimize<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: Vec<f64>,
    opts: &SearchOptions,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    if n == 0 {
        return (x, fx);
    }
    let mut steps = vec![opts.step0; n];
    let mut rstep = opts.step0;
    let dirs = opts.random_dirs.max(n);
    let mut stall = 0;
    for _ in 0..opts.max_sweeps {
        let start = x.clone();
        let f_start = fx;
        for i in 0..n {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            let (t, ft) = line_min(&f, &x, &d, fx, steps[i], opts.tol);
            if t != 0.0 {
                x[i] += t;
                fx = ft;
                steps[i] = t.abs().max(1e-14);
            } else {
                steps[i] *= 0.25;
            }
        }
        for _ in 0..dirs {
            let mut d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let nd = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nd == 0.0 {
                continue;
            }
            d.iter_mut().for_each(|v| *v /= nd);
            let (t, ft) = line_min(&f, &x, &d, fx, rstep, opts.tol);
            if t != 0.0 {
                x = along(&x, &d, t);
                fx = ft;
                rstep = t.abs().max(1e-14);
            } else {
                rstep = (rstep * 0.5).max(1e-14);
            }
        }
        if f_start - fx <= opts.tol * (1.0 + fx.abs()) && n > 1 && n <= 24 {
            let inv = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..n {
                for j in i + 1..n {
                    for sg in [1.0, -1.0] {
                        let mut d = vec![0.0; n];
                        d[i] = inv;
                        d[j] = sg * inv;
                        let h = steps[i].max(steps[j]).max(rstep).max(1e-8);
                        let (t, ft) = line_min(&f, &x, &d, fx, h, opts.tol);
                        if t != 0.0 {
                            x = along(&x, &d, t);
                            fx = ft;
                        }
                    }
                }
            }
        }
        let pd: Vec<f64> = x.iter().zip(&start).map(|(a, b)| a - b).collect();
        let pn = pd.iter().map(|v| v * v).sum::<f64>().sqrt();
        if pn > 0.0 {
            let (t, ft) = line_min(&f, &x, &pd, fx, 1.0, opts.tol);
            if t != 0.0 {
                x = along(&x, &pd, t);
                fx = ft;
            }
        }
        let xs = 1.0 + x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let gain = f_start - fx;
        if gain <= opts.tol * (1.0 + fx.abs()) {
            stall += 1;
        } else {
            stall = 0;
        }
        let small = steps.iter().all(|h| *h <= opts.tol * xs) && rstep <= opts.tol * xs;
        if (small && stall >= 2) || stall >= 8 {
            break;
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + (x[0] - x[1]).powi(2);
        let (x, fx) = minimize(f, vec![0.0, 0.0], &SearchOptions::default(), &mut rng);
        let exact = {
            // gradient zero: 2(x0-1) + 2(x0-x1) = 0, 20(x1+2) - 2(x0-x1) = 0
            let a = nalgebra::Matrix2::new(4.0, -2.0, -2.0, 22.0);
            let b = nalgebra::Vector2::new(2.0, -40.0);
            a.lu().solve(&b).unwrap()
        };
        assert!((x[0] - exact[0]).abs() < 1e-6 && (x[1] - exact[1]).abs() < 1e-6, "{x:?} {fx}");
    }

    #[test]
    fn nonsmooth_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = |x: &[f64]| (x[0] - 0.3).abs() + 2.0 * (x[1] + x[0]).abs() + (x[2] - 1.0).abs();
        let (_, fx) = minimize(f, vec![2.0, 2.0, 2.0], &SearchOptions::default(), &mut rng);
        assert!(fx < 1e-7, "{fx}");
    }
}
