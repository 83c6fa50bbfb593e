//! Local search over representations z = Σ x_i ⊗ y_i split into blocks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ascent::operator_norm_with;
use crate::exponent::Exponent;
use crate::family::{self, Family, Mixed};
use crate::space::{FunctionSpace, OperatorMatrix};

pub(crate) type Mat = Vec<Vec<f64>>;

const WEAK_SEED: u64 = 0x3ea6_0a11;

/// Per-block objective; a representation costs the sum over its blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Objective {
    Pi,
    Phi(Exponent, Exponent),
    Delta(Exponent, Exponent),
    Iota(Exponent, Exponent),
    G(Exponent),
    D(Exponent),
    W(Exponent),
}

fn conj(p: Exponent) -> Exponent {
    p.conjugate().unwrap_or(Exponent::INF)
}

/// sup over the dual unit ball of (Σ|⟨v_i, v*⟩|^s)^{1/s}, i.e. ‖ℓ_{s'}^K → X‖ on the columns v_i.
pub(crate) fn weak_norm(space: &FunctionSpace, fam: &[Vec<f64>], s: Exponent, certified: bool) -> f64 {
    if fam.iter().flatten().all(|v| *v == 0.0) {
        return 0.0;
    }
    let k = fam.len();
    let dom = FunctionSpace::lr(k, conj(s)).expect("valid exponent");
    let entries = (0..space.atoms()).map(|a| fam.iter().map(|v| v[a]).collect()).collect();
    let op = OperatorMatrix::new(dom, space.clone(), entries).expect("consistent sizes");
    let b = operator_norm_with(&op, if certified { 16 } else { 2 }, WEAK_SEED).expect("operator norm");
    if certified {
        b.upper.min(family::value(space, fam, Mixed::Sequence(s)))
    } else {
        b.lower
    }
}

impl Objective {
    fn block(&self, left: &FunctionSpace, right: &FunctionSpace, xs: &[Vec<f64>], ys: &[Vec<f64>], certified: bool) -> f64 {
        use family::value;
        match *self {
            Objective::Pi => xs.iter().zip(ys).map(|(x, y)| left.norm_of(x) * right.norm_of(y)).sum(),
            Objective::Phi(p, q) => value(left, xs, Mixed::tuple(q)) * value(right, ys, Mixed::tuple(conj(p))),
            Objective::Delta(p, q) => value(left, xs, Mixed::Sequence(q)) * value(right, ys, Mixed::tuple(conj(p))),
            Objective::Iota(p, q) => value(left, xs, Mixed::tuple(q)) * value(right, ys, Mixed::Sequence(conj(p))),
            Objective::G(p) => {
                let a = value(left, xs, Mixed::Sequence(p));
                if a == 0.0 { 0.0 } else { a * weak_norm(right, ys, conj(p), certified) }
            }
            Objective::D(p) => {
                let b = value(right, ys, Mixed::Sequence(conj(p)));
                if b == 0.0 { 0.0 } else { weak_norm(left, xs, p, certified) * b }
            }
            Objective::W(p) => {
                let a = weak_norm(left, xs, p, certified);
                if a == 0.0 { 0.0 } else { a * weak_norm(right, ys, conj(p), certified) }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Rep {
    pub xs: Family,
    pub ys: Family,
    pub labels: Vec<usize>,
}

impl Rep {
    pub(crate) fn from_terms(terms: &[(Vec<f64>, Vec<f64>)]) -> Rep {
        Rep {
            xs: terms.iter().map(|t| t.0.clone()).collect(),
            ys: terms.iter().map(|t| t.1.clone()).collect(),
            labels: vec![0; terms.len()],
        }
    }

    pub(crate) fn terms(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.xs.iter().cloned().zip(self.ys.iter().cloned()).collect()
    }

    fn len(&self) -> usize {
        self.xs.len()
    }

    fn padded(mut self, extra: usize, n: usize, m: usize) -> Rep {
        for _ in 0..extra {
            self.xs.push(vec![0.0; n]);
            self.ys.push(vec![0.0; m]);
            self.labels.push(0);
        }
        self
    }

    fn matrix(&self, n: usize, m: usize) -> Mat {
        let mut z = vec![vec![0.0; m]; n];
        for (x, y) in self.xs.iter().zip(&self.ys) {
            for a in 0..n {
                for b in 0..m {
                    z[a][b] += x[a] * y[b];
                }
            }
        }
        z
    }

    /// Drops zero terms and absorbs the floating-point residual into elementary terms.
    pub(crate) fn cleaned(mut self, z: &Mat) -> Rep {
        let n = z.len();
        let m = z.first().map_or(0, Vec::len);
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.xs[i].iter().any(|v| *v != 0.0) && self.ys[i].iter().any(|v| *v != 0.0))
            .collect();
        self = Rep {
            xs: keep.iter().map(|&i| self.xs[i].clone()).collect(),
            ys: keep.iter().map(|&i| self.ys[i].clone()).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
        };
        let cur = self.matrix(n, m);
        for a in 0..n {
            let r: Vec<f64> = (0..m).map(|b| z[a][b] - cur[a][b]).collect();
            if r.iter().any(|v| *v != 0.0) {
                let mut e = vec![0.0; n];
                e[a] = 1.0;
                self.xs.push(e);
                self.ys.push(r);
                self.labels.push(0);
            }
        }
        self
    }
}

pub(crate) struct Search<'a> {
    pub left: &'a FunctionSpace,
    pub right: &'a FunctionSpace,
    pub obj: Objective,
    pub blocks: usize,
    pub iters: usize,
}

impl Search<'_> {
    pub(crate) fn value(&self, rep: &Rep, certified: bool) -> f64 {
        if self.obj == Objective::Pi {
            return self.obj.block(self.left, self.right, &rep.xs, &rep.ys, certified);
        }
        let nb = rep.labels.iter().max().map_or(0, |m| m + 1);
        (0..nb)
            .map(|l| {
                let idx: Vec<usize> = (0..rep.len()).filter(|&i| rep.labels[i] == l).collect();
                if idx.is_empty() {
                    return 0.0;
                }
                let xs: Family = idx.iter().map(|&i| rep.xs[i].clone()).collect();
                let ys: Family = idx.iter().map(|&i| rep.ys[i].clone()).collect();
                self.obj.block(self.left, self.right, &xs, &ys, certified)
            })
            .sum()
    }

    fn improve(&self, start: Rep, rng: &mut ChaCha8Rng) -> Rep {
        let mut cur = start;
        let k = cur.len();
        if k == 0 {
            return cur;
        }
        let mut fv = self.value(&cur, false);
        let mut sigma = 0.5_f64;
        let mut fails = 0usize;
        let moves = if self.blocks > 1 { 4 } else { 3 };
        for _ in 0..self.iters {
            if sigma < 1e-8 || fv == 0.0 {
                break;
            }
            let mut cand = cur.clone();
            let mv = rng.random_range(0..moves);
            if mv <= 1 && k >= 2 {
                let i = rng.random_range(0..k);
                let mut j = rng.random_range(0..k - 1);
                if j >= i {
                    j += 1;
                }
                let mut g = [[1.0, 0.0], [0.0, 1.0]];
                for r in g.iter_mut() {
                    for v in r.iter_mut() {
                        *v += sigma * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
                if det.abs() < 1e-6 {
                    continue;
                }
                // H = G^{-T}
                let h = [[g[1][1] / det, -g[1][0] / det], [-g[0][1] / det, g[0][0] / det]];
                let (xi, xj) = (cur.xs[i].clone(), cur.xs[j].clone());
                let (yi, yj) = (cur.ys[i].clone(), cur.ys[j].clone());
                for a in 0..xi.len() {
                    cand.xs[i][a] = g[0][0] * xi[a] + g[1][0] * xj[a];
                    cand.xs[j][a] = g[0][1] * xi[a] + g[1][1] * xj[a];
                }
                for b in 0..yi.len() {
                    cand.ys[i][b] = h[0][0] * yi[b] + h[1][0] * yj[b];
                    cand.ys[j][b] = h[0][1] * yi[b] + h[1][1] * yj[b];
                }
            } else if mv == 3 {
                let i = rng.random_range(0..k);
                cand.labels[i] = rng.random_range(0..self.blocks);
                if cand.labels[i] == cur.labels[i] {
                    continue;
                }
            } else {
                let i = rng.random_range(0..k);
                let c = (sigma * rng.sample::<f64, _>(StandardNormal)).exp();
                cand.xs[i].iter_mut().for_each(|v| *v *= c);
                cand.ys[i].iter_mut().for_each(|v| *v /= c);
            }
            let fc = self.value(&cand, false);
            if fc < fv * (1.0 - 1e-13) {
                cur = cand;
                fv = fc;
                if mv != 3 {
                    sigma = (sigma * 1.3).min(4.0);
                }
                fails = 0;
            } else {
                fails += 1;
                if fails % 8 == 0 {
                    sigma *= 0.7;
                }
            }
        }
        cur
    }

    /// Runs local search from every start; returns the best certified value and representation.
    pub(crate) fn run(&self, z: &Mat, starts: Vec<Rep>, seed: u64) -> (f64, Rep) {
        let n = self.left.atoms();
        let m = self.right.atoms();
        let results: Vec<(f64, Rep)> = starts
            .into_par_iter()
            .enumerate()
            .map(|(s, start)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (s as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let extra = if self.obj == Objective::Pi { 1 } else { 2 };
                let best = self.improve(start.padded(extra, n, m), &mut rng).cleaned(z);
                (self.value(&best, true), best)
            })
            .collect();
        results
            .into_iter()
            .fold(None, |acc: Option<(f64, Rep)>, r| match acc {
                Some(a) if a.0 <= r.0 => Some(a),
                _ => Some(r),
            })
            .unwrap_or_else(|| (0.0, Rep { xs: vec![], ys: vec![], labels: vec![] }))
    }
}

/// Rows, columns and a balanced singular value decomposition of z, plus the given terms.
pub(crate) fn standard_starts(z: &Mat, given: &[(Vec<f64>, Vec<f64>)], blocks: usize) -> Vec<Rep> {
    let n = z.len();
    let m = z.first().map_or(0, Vec::len);
    let mut starts = vec![];
    if !given.is_empty() {
        starts.push(Rep::from_terms(given));
    }
    let rows: Vec<_> = (0..n)
        .filter(|&a| z[a].iter().any(|v| *v != 0.0))
        .map(|a| {
            let mut e = vec![0.0; n];
            e[a] = 1.0;
            (e, z[a].clone())
        })
        .collect();
    starts.push(Rep::from_terms(&rows));
    let cols: Vec<_> = (0..m)
        .filter(|&b| (0..n).any(|a| z[a][b] != 0.0))
        .map(|b| {
            let mut e = vec![0.0; m];
            e[b] = 1.0;
            ((0..n).map(|a| z[a][b]).collect(), e)
        })
        .collect();
    starts.push(Rep::from_terms(&cols));
    let dm = DMatrix::from_fn(n, m, |a, b| z[a][b]);
    let svd = dm.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let sv: Vec<_> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-14 * smax)
        .map(|k| {
            let s = svd.singular_values[k].sqrt();
            ((0..n).map(|a| u[(a, k)] * s).collect(), (0..m).map(|b| vt[(k, b)] * s).collect())
        })
        .collect();
    starts.push(Rep::from_terms(&sv));
    if blocks > 1 {
        let spread: Vec<Rep> = starts
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.labels = (0..r.xs.len()).map(|i| i % blocks).collect();
                r
            })
            .collect();
        starts.extend(spread);
    }
    starts
}
