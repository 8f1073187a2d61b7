//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Rate-region programs here have at most a few hundred rows, so a full
//! tableau is adequate. The solver is generic over [`LpScalar`] and runs
//! unchanged on exact rationals.

use crate::error::{Error, Result};
use crate::scalar::LpScalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `minimize c·x` subject to the constraints and `x ≥ 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
}

impl<T: LpScalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn solve(&self) -> Result<LpSolution<T>> {
        Tableau::build(self)?.run(self)
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    n_orig: usize,
    n_total: usize,
    artificial_start: usize,
    eps: T,
}

impl<T: LpScalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Result<Self> {
        let n = lp.num_vars();
        let m = lp.constraints.len();
        for (i, c) in lp.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
        }
        let n_slack = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        // Decide which rows need an artificial variable: after normalising the
        // rhs to be nonnegative, a row can start with its slack in the basis
        // only when that slack has coefficient +1.
        let mut needs_art = Vec::with_capacity(m);
        for c in &lp.constraints {
            let flip = c.rhs < T::zero();
            let slack_sign_pos = match c.relation {
                Relation::Le => !flip,
                Relation::Ge => flip,
                Relation::Eq => false,
            };
            needs_art.push(!(slack_sign_pos && c.relation != Relation::Eq));
        }
        let n_art = needs_art.iter().filter(|&&a| a).count();
        let n_total = n + n_slack + n_art;
        let artificial_start = n + n_slack;

        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack_col = n;
        let mut art_col = artificial_start;
        for (i, c) in lp.constraints.iter().enumerate() {
            let flip = c.rhs < T::zero();
            let mut row = vec![T::zero(); n_total];
            for (j, a) in c.coeffs.iter().enumerate() {
                row[j] = if flip { -a.clone() } else { a.clone() };
            }
            let b = if flip { -c.rhs.clone() } else { c.rhs.clone() };
            let mut slack_here = None;
            if c.relation != Relation::Eq {
                let sign = if c.relation == Relation::Le {
                    T::one()
                } else {
                    -T::one()
                };
                row[slack_col] = if flip { -sign } else { sign };
                slack_here = Some(slack_col);
                slack_col += 1;
            }
            if needs_art[i] {
                row[art_col] = T::one();
                basis.push(art_col);
                art_col += 1;
            } else {
                basis.push(slack_here.expect("row without artificial has a slack"));
            }
            rows.push(row);
            rhs.push(b);
        }
        Ok(Self {
            rows,
            rhs,
            basis,
            n_orig: n,
            n_total,
            artificial_start,
            eps: T::pivot_eps(),
        })
    }

    /// Reduced-cost row for cost vector `cost` over all columns, plus the
    /// current objective value.
    fn reduced_costs(&self, cost: &[T]) -> (Vec<T>, T) {
        let mut red: Vec<T> = cost.to_vec();
        let mut val = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, r) in red.iter_mut().enumerate() {
                *r = r.clone() - cb.clone() * self.rows[i][j].clone();
            }
            val = val + cb * self.rhs[i].clone();
        }
        (red, val)
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][col].clone();
            if f.is_zero() {
                continue;
            }
            for (v, pr) in self.rows[i].iter_mut().zip(pivot_row.iter()) {
                *v = v.clone() - f.clone() * pr.clone();
            }
            self.rhs[i] = self.rhs[i].clone() - f * pivot_rhs.clone();
            if self.rhs[i] < T::zero() && self.rhs[i] > -self.eps.clone() {
                self.rhs[i] = T::zero();
            }
        }
        self.basis[r] = col;
    }

    /// Bland's rule iterations for `cost`, restricted to columns `< allowed`.
    fn optimize(&mut self, cost: &[T], allowed: usize) -> Result<()> {
        let max_iter = 50_000;
        for _ in 0..max_iter {
            let (red, _) = self.reduced_costs(cost);
            let entering =
                (0..allowed).find(|&j| red[j] < -self.eps.clone() && !self.basis.contains(&j));
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col].clone();
                if a > self.eps {
                    let ratio = self.rhs[i].clone() / a;
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, col);
        }
        Err(Error::Limit("simplex iteration limit".into()))
    }

    fn run(mut self, lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
        if self.artificial_start < self.n_total {
            let mut phase1 = vec![T::zero(); self.n_total];
            for c in phase1.iter_mut().skip(self.artificial_start) {
                *c = T::one();
            }
            self.optimize(&phase1, self.n_total)?;
            let (_, infeas) = self.reduced_costs(&phase1);
            let scale = self
                .rhs
                .iter()
                .fold(T::one(), |acc, b| if b.abs() > acc { b.abs() } else { acc });
            if infeas > self.eps.clone() * scale {
                return Err(Error::Infeasible(
                    "linear program has no feasible point".into(),
                ));
            }
            // Drive remaining (zero-valued) artificials out of the basis.
            for r in 0..self.rows.len() {
                if self.basis[r] >= self.artificial_start {
                    if let Some(col) = (0..self.artificial_start)
                        .find(|&j| self.rows[r][j].abs() > self.eps && !self.basis.contains(&j))
                    {
                        self.pivot(r, col);
                    }
                }
            }
        }
        let mut cost = vec![T::zero(); self.n_total];
        for (c, o) in cost.iter_mut().zip(lp.objective.iter()) {
            *c = o.clone();
        }
        self.optimize(&cost, self.artificial_start)?;
        let mut x = vec![T::zero(); self.n_orig];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_orig {
                x[b] = self.rhs[i].clone();
            }
        }
        let objective = x
            .iter()
            .zip(lp.objective.iter())
            .fold(T::zero(), |acc, (xi, ci)| acc + xi.clone() * ci.clone());
        Ok(LpSolution { x, objective })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn simple_covering_lp() {
        // min x + y  s.t. x ≥ 1, y ≥ 1, x + y ≥ 2.5
        let mut lp = LinearProgram::<f64>::new(vec![1.0, 1.0]);
        lp.add(vec![1.0, 0.0], Relation::Ge, 1.0)
            .add(vec![0.0, 1.0], Relation::Ge, 1.0)
            .add(vec![1.0, 1.0], Relation::Ge, 2.5);
        let s = lp.solve().unwrap();
        assert!((s.objective - 2.5).abs() < 1e-12);
        assert!(s.x[0] >= 1.0 - 1e-12 && s.x[1] >= 1.0 - 1e-12);
    }

    #[test]
    fn exact_rational_solution() {
        // min 2x + 3y s.t. x + y ≥ 4, x + 3y ≥ 6, x ≤ 3
        let mut lp = LinearProgram::new(vec![r(2, 1), r(3, 1)]);
        lp.add(vec![r(1, 1), r(1, 1)], Relation::Ge, r(4, 1))
            .add(vec![r(1, 1), r(3, 1)], Relation::Ge, r(6, 1))
            .add(vec![r(1, 1), r(0, 1)], Relation::Le, r(3, 1));
        let s = lp.solve().unwrap();
        assert_eq!(s.x, vec![r(3, 1), r(1, 1)]);
        assert_eq!(s.objective, r(9, 1));
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x s.t. x + y = 1, -x ≥ -0.25 (x ≤ 0.25), y ≤ 0.9
        let mut lp = LinearProgram::<f64>::new(vec![-1.0, 0.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 1.0)
            .add(vec![-1.0, 0.0], Relation::Ge, -0.25)
            .add(vec![0.0, 1.0], Relation::Le, 0.9);
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 0.25).abs() < 1e-12);
        assert!((s.x[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![1.0], Relation::Ge, 2.0)
            .add(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Infeasible(_))));
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add(vec![1.0], Relation::Ge, 0.0);
        assert_eq!(lp.solve(), Err(Error::Unbounded));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's cycling example; Bland's rule terminates.
        let mut lp = LinearProgram::new(vec![r(-3, 4), r(150, 1), r(-1, 50), r(6, 1)]);
        lp.add(
            vec![r(1, 4), r(-60, 1), r(-1, 25), r(9, 1)],
            Relation::Le,
            r(0, 1),
        )
        .add(
            vec![r(1, 2), r(-90, 1), r(-1, 50), r(3, 1)],
            Relation::Le,
            r(0, 1),
        )
        .add(
            vec![r(0, 1), r(0, 1), r(1, 1), r(0, 1)],
            Relation::Le,
            r(1, 1),
        );
        let s = lp.solve().unwrap();
        assert_eq!(s.objective, r(-1, 20));
    }

    #[test]
    fn dimension_error() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(vec![1.0], Relation::Ge, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Dimension(_))));
    }
}
