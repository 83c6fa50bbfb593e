//! Thin wrapper over `microlp`.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LinearProgram {
    pub objective: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub rows: Vec<(Vec<(usize, f64)>, Cmp, f64)>,
}

impl LinearProgram {
    pub(crate) fn var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.objective.len() - 1
    }

    pub(crate) fn row(&mut self, coefs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push((coefs, cmp, rhs));
    }

    fn solve(&self, dir: OptimizationDirection) -> Result<(f64, Vec<f64>)> {
        let mut pb = Problem::new(dir);
        let vars: Vec<_> = self
            .objective
            .iter()
            .zip(&self.bounds)
            .map(|(c, (lo, hi))| pb.add_var(*c, (*lo, *hi)))
            .collect();
        for (coefs, cmp, rhs) in &self.rows {
            let expr: Vec<_> = coefs.iter().filter(|(_, c)| *c != 0.0).map(|(i, c)| (vars[*i], *c)).collect();
            let op = match cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            pb.add_constraint(expr.as_slice(), op, *rhs);
        }
        let sol = match pb.solve().map_err(|e| Error::Lp(e.to_string()))? {
            SolveOutcome::Solution(s) => s,
            SolveOutcome::Interrupted(i) => return Err(Error::Lp(format!("interrupted: {i:?}"))),
        };
        let x = vars.iter().map(|v| sol[*v]).collect();
        Ok((sol.objective(), x))
    }

    pub(crate) fn minimize(&self) -> Result<(f64, Vec<f64>)> {
        self.solve(OptimizationDirection::Minimize)
    }

    pub(crate) fn maximize(&self) -> Result<(f64, Vec<f64>)> {
        self.solve(OptimizationDirection::Maximize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        let mut lp = LinearProgram::default();
        let x = lp.var(1.0, 0.0, f64::INFINITY);
        let y = lp.var(2.0, 0.0, 3.0);
        lp.row(vec![(x, 1.0), (y, 1.0)], Cmp::Le, 4.0);
        lp.row(vec![(x, 1.0), (y, -1.0)], Cmp::Ge, -1.0);
        let (v, s) = lp.maximize().unwrap();
        assert!((v - 6.5).abs() < 1e-9, "{v} {s:?}");
    }
}
