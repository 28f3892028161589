//! Linear programs over bounded variables, solved with a two-phase revised
//! primal simplex.
//!
//! Built for reproducibility rather than scale:
//! - Bland's rule throughout (lowest eligible index enters; among ratio ties
//!   the lowest variable index leaves), so runs cannot cycle and have no
//!   tie-break ambiguity.
//! - The basis is refactorized from scratch every iteration and the basic
//!   values are recomputed from the factorization, so no update error
//!   accumulates across pivots.
//! - No hashing anywhere; iteration order is fixed by variable index.
//!
//! Problem sizes here are small (tens of variables), where this strategy
//! costs nothing measurable.

use crate::linalg::{Lu, Matrix};
use thiserror::Error;

const REDUCED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const RATIO_TIE_TOL: f64 = 1e-12;
const PHASE1_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraints admit no solution")]
    Infeasible,
    #[error("objective is unbounded")]
    Unbounded,
    #[error("simplex did not converge: {reason}")]
    NumericalFailure { reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOp {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone)]
struct Constraint {
    terms: Vec<(usize, f64)>,
    op: ConstraintOp,
    rhs: f64,
}

/// Linear program builder. Variables carry bounds (either side may be
/// infinite) and an objective coefficient; constraints are sparse rows.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub values: Vec<f64>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, obj: f64) -> usize {
        assert!(!lower.is_nan() && !upper.is_nan(), "NaN bound");
        assert!(lower <= upper, "empty variable bound");
        assert!(obj.is_finite(), "objective coefficient must be finite");
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(obj);
        self.lower.len() - 1
    }

    pub fn add_constraint(&mut self, terms: &[(usize, f64)], op: ConstraintOp, rhs: f64) {
        for &(v, c) in terms {
            assert!(v < self.n_vars(), "constraint references unknown variable");
            assert!(c.is_finite(), "constraint coefficient must be finite");
        }
        assert!(rhs.is_finite(), "constraint rhs must be finite");
        self.constraints.push(Constraint {
            terms: terms.to_vec(),
            op,
            rhs,
        });
    }

    pub fn n_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn maximize(&self) -> Result<LpSolution, LpError> {
        Simplex::build(self).solve()
    }

    pub fn minimize(&self) -> Result<LpSolution, LpError> {
        let mut flipped = self.clone();
        for c in flipped.objective.iter_mut() {
            *c = -*c;
        }
        let mut sol = flipped.maximize()?;
        sol.objective = -sol.objective;
        Ok(sol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable, held at zero.
    Free,
}

struct Simplex {
    n_user: usize,
    /// Total columns: user variables, then slacks, then one artificial
    /// per row.
    n: usize,
    m: usize,
    cols: Matrix,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    /// Column basic in each row.
    basis: Vec<usize>,
    value: Vec<f64>,
    artificial_start: usize,
    objective: Vec<f64>,
}

impl Simplex {
    fn build(p: &LpProblem) -> Simplex {
        let n_user = p.n_vars();
        let m = p.constraints.len();
        let n_slack = p
            .constraints
            .iter()
            .filter(|c| c.op != ConstraintOp::Eq)
            .count();
        let artificial_start = n_user + n_slack;
        let n = artificial_start + m;

        let mut cols = Matrix::zeros(m, n);
        let mut rhs = vec![0.0; m];
        let mut lower = p.lower.clone();
        let mut upper = p.upper.clone();
        lower.resize(n, 0.0);
        upper.resize(n, f64::INFINITY);

        let mut slack = n_user;
        for (i, c) in p.constraints.iter().enumerate() {
            for &(v, coef) in &c.terms {
                cols.set(i, v, cols.get(i, v) + coef);
            }
            rhs[i] = c.rhs;
            match c.op {
                ConstraintOp::Le => {
                    cols.set(i, slack, 1.0);
                    slack += 1;
                }
                ConstraintOp::Ge => {
                    cols.set(i, slack, -1.0);
                    slack += 1;
                }
                ConstraintOp::Eq => {}
            }
        }

        // Nonbasic start: every structural and slack variable at a finite
        // bound, free variables at zero.
        let mut state = vec![VarState::AtLower; n];
        let mut value = vec![0.0; n];
        for j in 0..artificial_start {
            if lower[j].is_finite() {
                state[j] = VarState::AtLower;
                value[j] = lower[j];
            } else if upper[j].is_finite() {
                state[j] = VarState::AtUpper;
                value[j] = upper[j];
            } else {
                state[j] = VarState::Free;
                value[j] = 0.0;
            }
        }

        // Signed artificial per row so the initial basis is an identity
        // (up to sign) and all artificials start nonnegative.
        let mut basis = vec![0usize; m];
        for i in 0..m {
            let mut resid = rhs[i];
            for j in 0..artificial_start {
                resid -= cols.get(i, j) * value[j];
            }
            let col = artificial_start + i;
            cols.set(i, col, if resid >= 0.0 { 1.0 } else { -1.0 });
            state[col] = VarState::Basic;
            value[col] = resid.abs();
            basis[i] = col;
        }

        let mut objective = p.objective.clone();
        objective.resize(n, 0.0);

        Simplex {
            n_user,
            n,
            m,
            cols,
            rhs,
            lower,
            upper,
            state,
            basis,
            value,
            artificial_start,
            objective,
        }
    }

    fn solve(mut self) -> Result<LpSolution, LpError> {
        // Phase 1: drive the artificials to zero.
        let mut phase1 = vec![0.0; self.n];
        for c in phase1.iter_mut().skip(self.artificial_start) {
            *c = -1.0;
        }
        match self.run(&phase1) {
            Ok(()) => {}
            // Phase 1 is bounded by construction; an unbounded ray here is
            // a numerical artifact.
            Err(LpError::Unbounded) => {
                return Err(LpError::NumericalFailure {
                    reason: "phase 1 reported unbounded",
                })
            }
            Err(e) => return Err(e),
        }
        let infeasibility: f64 = self.value[self.artificial_start..].iter().sum();
        if infeasibility > PHASE1_TOL {
            return Err(LpError::Infeasible);
        }

        // Pin artificials to zero. Any still basic stay at value zero and
        // can leave through degenerate pivots; they can never re-enter.
        for j in self.artificial_start..self.n {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::AtLower;
                self.value[j] = 0.0;
            }
        }

        let objective = self.objective.clone();
        self.run(&objective)?;

        let values: Vec<f64> = self.value[..self.n_user].to_vec();
        let objective: f64 = values.iter().zip(&self.objective).map(|(x, c)| x * c).sum();
        Ok(LpSolution { objective, values })
    }

    /// Simplex iterations maximizing `obj` from the current basis.
    /// Returns Ok at optimality, leaving `self.value` current.
    fn run(&mut self, obj: &[f64]) -> Result<(), LpError> {
        for _ in 0..MAX_ITERATIONS {
            let bmat = self.basis_matrix();
            let lu = Lu::new(&bmat).ok_or(LpError::NumericalFailure {
                reason: "singular basis",
            })?;

            // Basic values from scratch: B x_B = rhs - N x_N.
            let mut rhs_eff = self.rhs.clone();
            for j in 0..self.n {
                if self.state[j] != VarState::Basic && self.value[j] != 0.0 {
                    for i in 0..self.m {
                        rhs_eff[i] -= self.cols.get(i, j) * self.value[j];
                    }
                }
            }
            let xb = lu.solve(&rhs_eff);
            for (row, &col) in self.basis.iter().enumerate() {
                self.value[col] = xb[row];
            }

            // Duals and the entering variable (Bland: lowest eligible index).
            let cb: Vec<f64> = self.basis.iter().map(|&c| obj[c]).collect();
            let duals = lu.solve_transpose(&cb);
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.state[j] == VarState::Basic || self.upper[j] <= self.lower[j] {
                    continue;
                }
                let mut d = obj[j];
                for i in 0..self.m {
                    d -= duals[i] * self.cols.get(i, j);
                }
                let dir = match self.state[j] {
                    VarState::AtLower if d > REDUCED_COST_TOL => 1.0,
                    VarState::AtUpper if d < -REDUCED_COST_TOL => -1.0,
                    VarState::Free if d > REDUCED_COST_TOL => 1.0,
                    VarState::Free if d < -REDUCED_COST_TOL => -1.0,
                    _ => 0.0,
                };
                if dir != 0.0 {
                    entering = Some((j, dir));
                    break;
                }
            }
            let Some((e, dir)) = entering else {
                return Ok(());
            };

            // Change of basic values per unit step of the entering variable.
            let a_e: Vec<f64> = (0..self.m).map(|i| self.cols.get(i, e)).collect();
            let w = lu.solve(&a_e);

            // Ratio test. A finite span lets the entering variable flip to
            // its opposite bound without a basis change.
            let span = self.upper[e] - self.lower[e];
            let t_flip = if span.is_finite() {
                span
            } else {
                f64::INFINITY
            };
            let mut t_basic = f64::INFINITY;
            let mut leave_row: Option<(usize, VarState)> = None;
            for row in 0..self.m {
                let k = self.basis[row];
                let delta = -dir * w[row];
                let (t, hits) = if delta < -PIVOT_TOL && self.lower[k].is_finite() {
                    (
                        ((self.value[k] - self.lower[k]) / -delta).max(0.0),
                        VarState::AtLower,
                    )
                } else if delta > PIVOT_TOL && self.upper[k].is_finite() {
                    (
                        ((self.upper[k] - self.value[k]) / delta).max(0.0),
                        VarState::AtUpper,
                    )
                } else {
                    continue;
                };
                // Bland tie-break: keep the lowest leaving variable index.
                let better = t < t_basic - RATIO_TIE_TOL
                    || (t < t_basic + RATIO_TIE_TOL
                        && leave_row.map_or(true, |(r, _)| k < self.basis[r]));
                if better {
                    t_basic = t_basic.min(t);
                    leave_row = Some((row, hits));
                }
            }

            if t_flip < t_basic - RATIO_TIE_TOL {
                // Bound flip: no pivot.
                self.state[e] = match self.state[e] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    // A free variable has infinite span and cannot flip.
                    _ => unreachable!("flip of non-bounded variable"),
                };
                self.value[e] = match self.state[e] {
                    VarState::AtUpper => self.upper[e],
                    _ => self.lower[e],
                };
                continue;
            }

            let Some((row, leave_state)) = leave_row else {
                if t_flip.is_finite() {
                    // Flip was the only limit.
                    self.state[e] = match self.state[e] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        _ => unreachable!("flip of non-bounded variable"),
                    };
                    self.value[e] = match self.state[e] {
                        VarState::AtUpper => self.upper[e],
                        _ => self.lower[e],
                    };
                    continue;
                }
                return Err(LpError::Unbounded);
            };

            // Pivot: entering becomes basic, leaving lands on the bound
            // that limited the step.
            let t = t_basic;
            let leaving = self.basis[row];
            self.value[e] += dir * t;
            self.state[e] = VarState::Basic;
            self.basis[row] = e;
            self.state[leaving] = leave_state;
            self.value[leaving] = match leave_state {
                VarState::AtUpper => self.upper[leaving],
                _ => self.lower[leaving],
            };
        }
        Err(LpError::NumericalFailure {
            reason: "iteration limit reached",
        })
    }

    fn basis_matrix(&self) -> Matrix {
        let mut b = Matrix::zeros(self.m, self.m);
        for (row, &col) in self.basis.iter().enumerate() {
            for i in 0..self.m {
                b.set(i, row, self.cols.get(i, col));
            }
        }
        b
    }
}
