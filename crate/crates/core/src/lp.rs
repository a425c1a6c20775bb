//! Small dense linear programs, solved exactly over rationals or quickly
//! over floats.
//!
//! The distortion programs produced elsewhere in this crate have at most a
//! few dozen variables, so a tableau simplex with Bland's rule is both simple
//! and fast enough. Bland's rule never cycles under exact arithmetic; the
//! iteration cap is a safety net for the float path.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::metric::Rational;

/// Number type a tableau runs on.
pub trait LpNum:
    Clone
    + PartialOrd
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn to_rational(&self) -> Rational;
    /// Strictly positive beyond this type's tolerance.
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool {
        (-self.clone()).is_pos()
    }
}

impl LpNum for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn to_rational(&self) -> Rational {
        self.clone()
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
}

const F64_EPS: f64 = 1e-9;

impl LpNum for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &Rational) -> Self {
        r.to_f64().expect("rational fits in f64")
    }
    fn to_rational(&self) -> Rational {
        Rational::from_float(*self).unwrap_or_else(Zero::zero)
    }
    fn is_pos(&self) -> bool {
        *self > F64_EPS
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One row `sum coeffs * x  relation  rhs`. Variables are implicitly >= 0;
/// repeated indices in `coeffs` accumulate.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl LinearConstraint {
    pub fn le(coeffs: Vec<(usize, Rational)>, rhs: Rational) -> Self {
        LinearConstraint { coeffs, relation: Relation::Le, rhs }
    }
    pub fn eq(coeffs: Vec<(usize, Rational)>, rhs: Rational) -> Self {
        LinearConstraint { coeffs, relation: Relation::Eq, rhs }
    }
    pub fn ge(coeffs: Vec<(usize, Rational)>, rhs: Rational) -> Self {
        LinearConstraint { coeffs, relation: Relation::Ge, rhs }
    }
}

/// Maximize `objective . x` subject to the constraints, x >= 0.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<(usize, Rational)>,
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LpOutcome {
    Optimal {
        value: Rational,
        point: Vec<Rational>,
    },
    /// `point` is feasible and `point + t * ray` stays feasible for every
    /// t >= 0 while the objective grows without bound along it.
    Unbounded {
        point: Vec<Rational>,
        ray: Vec<Rational>,
    },
    Infeasible,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LpEngine {
    /// Exact arithmetic; results are certificates.
    Rational,
    /// f64 arithmetic; results carry roundoff and are reported as the exact
    /// binary value of the computed floats.
    Float,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("float tableau lost feasibility: {0}")]
    Numerical(String),
    #[error("constraint references variable {var} but the program has {num_vars}")]
    BadVariable { var: usize, num_vars: usize },
}

const MAX_PIVOTS: usize = 100_000;

pub fn solve_lp(problem: &LpProblem, engine: LpEngine) -> Result<LpOutcome, LpError> {
    for (j, _) in problem.objective.iter().chain(
        problem.constraints.iter().flat_map(|c| c.coeffs.iter()),
    ) {
        if *j >= problem.num_vars {
            return Err(LpError::BadVariable { var: *j, num_vars: problem.num_vars });
        }
    }
    match engine {
        LpEngine::Rational => simplex::<Rational>(problem),
        LpEngine::Float => simplex::<f64>(problem),
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

enum Phase2End {
    Optimal,
    Unbounded { entering: usize },
}

impl<T: LpNum> Tableau<T> {
    fn rhs(&self, i: usize) -> &T {
        &self.rows[i][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = T::one() / self.rows[row][col].clone();
        for x in self.rows[row].iter_mut() {
            *x = x.clone() * inv.clone();
        }
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col].clone();
            if factor == T::zero() {
                continue;
            }
            for j in 0..=self.cols {
                let delta = factor.clone() * self.rows[row][j].clone();
                self.rows[i][j] = self.rows[i][j].clone() - delta;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Reduced-cost row for the objective `c`, eliminated against the basis.
    fn reduced_costs(&self, c: &[T]) -> Vec<T> {
        let mut z = c.to_vec();
        z.resize(self.cols, T::zero());
        for (i, &b) in self.basis.iter().enumerate() {
            let factor = z[b].clone();
            if factor == T::zero() {
                continue;
            }
            for j in 0..self.cols {
                let delta = factor.clone() * self.rows[i][j].clone();
                z[j] = z[j].clone() - delta;
            }
        }
        z
    }

    /// Runs Bland pivots until optimal or unbounded. `allowed` masks the
    /// columns eligible to enter.
    fn run(&mut self, c: &[T], allowed: &[bool]) -> Result<Phase2End, LpError> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit(MAX_PIVOTS));
            }
            let z = self.reduced_costs(c);
            let entering = match (0..self.cols).find(|&j| allowed[j] && z[j].is_pos()) {
                Some(j) => j,
                None => return Ok(Phase2End::Optimal),
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][entering].is_pos() {
                    continue;
                }
                let ratio = self.rhs(i).clone() / self.rows[i][entering].clone();
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
            match leave {
                Some((row, _)) => self.pivot(row, entering),
                None => return Ok(Phase2End::Unbounded { entering }),
            }
        }
    }

    fn point(&self, num_vars: usize) -> Vec<T> {
        let mut x = vec![T::zero(); self.cols];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs(i).clone();
        }
        x.truncate(num_vars);
        x
    }
}

fn simplex<T: LpNum>(problem: &LpProblem) -> Result<LpOutcome, LpError> {
    let nv = problem.num_vars;
    let m = problem.constraints.len();

    // Normalize each row to nonnegative rhs, flipping Le and Ge as needed.
    let mut dense: Vec<(Vec<T>, Relation, T)> = Vec::with_capacity(m);
    for con in &problem.constraints {
        let mut row = vec![T::zero(); nv];
        for (j, coef) in &con.coeffs {
            row[*j] = row[*j].clone() + T::from_rational(coef);
        }
        let mut rel = con.relation;
        let mut rhs = T::from_rational(&con.rhs);
        if rhs.is_neg() {
            for x in row.iter_mut() {
                *x = -x.clone();
            }
            rhs = -rhs;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Eq => Relation::Eq,
                Relation::Ge => Relation::Le,
            };
        }
        dense.push((row, rel, rhs));
    }

    let n_slack = dense.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
    let n_art = dense.iter().filter(|(_, r, _)| *r != Relation::Le).count();
    let cols = nv + n_slack + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_slack = nv;
    let mut next_art = nv + n_slack;
    for (row, rel, rhs) in dense {
        let mut full = vec![T::zero(); cols + 1];
        full[..nv].clone_from_slice(&row);
        full[cols] = rhs;
        match rel {
            Relation::Le => {
                full[next_slack] = T::one();
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                full[next_slack] = -T::one();
                next_slack += 1;
                full[next_art] = T::one();
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                full[next_art] = T::one();
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(full);
    }
    let mut tab = Tableau { rows, basis, cols, pivots: 0 };
    let art_start = nv + n_slack;

    if n_art > 0 {
        // Phase 1: maximize minus the artificial sum; zero means feasible.
        let mut c1 = vec![T::zero(); cols];
        for j in art_start..cols {
            c1[j] = -T::one();
        }
        let allowed = vec![true; cols];
        match tab.run(&c1, &allowed)? {
            Phase2End::Optimal => {}
            Phase2End::Unbounded { .. } => {
                return Err(LpError::Numerical(
                    "phase one reported unbounded".into(),
                ));
            }
        }
        let infeasibility = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .fold(T::zero(), |acc, (i, _)| acc + tab.rhs(i).clone());
        if infeasibility.is_pos() {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive leftover artificials out of the basis or drop their rows.
        let mut i = 0;
        while i < tab.basis.len() {
            if tab.basis[i] < art_start {
                i += 1;
                continue;
            }
            let col = (0..art_start)
                .find(|&j| tab.rows[i][j].is_pos() || tab.rows[i][j].is_neg());
            match col {
                Some(j) => {
                    tab.pivot(i, j);
                    i += 1;
                }
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                }
            }
        }
    }

    let mut c2 = vec![T::zero(); cols];
    for (j, coef) in &problem.objective {
        c2[*j] = c2[*j].clone() + T::from_rational(coef);
    }
    let mut allowed = vec![true; cols];
    for a in allowed.iter_mut().skip(art_start) {
        *a = false;
    }
    let end = tab.run(&c2, &allowed)?;
    let point = tab.point(nv);
    match end {
        Phase2End::Optimal => {
            let value = problem
                .objective
                .iter()
                .fold(<Rational as Zero>::zero(), |acc, (j, coef)| {
                    acc + coef * point[*j].to_rational()
                });
            Ok(LpOutcome::Optimal {
                value,
                point: point.iter().map(LpNum::to_rational).collect(),
            })
        }
        Phase2End::Unbounded { entering } => {
            let mut ray = vec![T::zero(); tab.cols];
            ray[entering] = T::one();
            for (i, &b) in tab.basis.iter().enumerate() {
                ray[b] = -tab.rows[i][entering].clone();
            }
            ray.truncate(nv);
            Ok(LpOutcome::Unbounded {
                point: point.iter().map(LpNum::to_rational).collect(),
                ray: ray.iter().map(LpNum::to_rational).collect(),
            })
        }
    }
}
