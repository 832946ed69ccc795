//! Small linear-programming layer shared by every solver routine.
//!
//! Models are assembled row by row with named variables and constraints and
//! solved by a dense bounded-variable simplex. Solutions always carry the
//! primal point, the objective and one dual value per constraint.
//!
//! Dual values are reported as sensitivities of the optimal objective to the
//! constraint right-hand side, `d obj / d rhs`. For a maximisation with a
//! binding `<=` row the dual is non-negative; for a minimisation with a binding
//! `>=` row it is non-negative as well.

use std::fmt::Write as _;

use thiserror::Error;

mod simplex;

/// Absolute primal feasibility tolerance accepted on returned solutions.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable index {0} is not declared in the model")]
    UnknownVariable(usize),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("LP solver did not converge: {0}")]
    NumericalFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program: declared variables, constraints and a linear objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    sense: Sense,
    objective: Vec<(VarId, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

impl LpSolution {
    pub fn value(&self, var: VarId) -> f64 {
        self.primal[var.0]
    }

    pub fn dual(&self, con: ConId) -> f64 {
        self.dual[con.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LpModel {
    pub fn new(sense: Sense) -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            sense,
            objective: Vec::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    /// Variable bounded below by zero.
    pub fn add_nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, f64::INFINITY)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> ConId {
        let mut terms = terms;
        // repeated variables are summed into one coefficient
        terms.sort_by_key(|t| t.0);
        terms.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
        ConId(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) {
        self.objective = terms;
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.variables.len();
        for (v, c) in &self.objective {
            if v.0 >= n {
                return Err(LpError::UnknownVariable(v.0));
            }
            if !c.is_finite() {
                return Err(LpError::NonFinite("objective".into()));
            }
        }
        for con in &self.constraints {
            for (v, c) in &con.terms {
                if v.0 >= n {
                    return Err(LpError::UnknownVariable(v.0));
                }
                if !c.is_finite() {
                    return Err(LpError::NonFinite(con.name.clone()));
                }
            }
            if !con.rhs.is_finite() {
                return Err(LpError::NonFinite(con.name.clone()));
            }
        }
        for var in &self.variables {
            if var.lower.is_nan() || var.upper.is_nan() || var.lower > var.upper {
                return Err(LpError::NonFinite(var.name.clone()));
            }
        }
        Ok(())
    }

    /// Evaluates the objective at a primal point.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|(v, c)| c * x[v.0]).sum()
    }

    /// Largest absolute violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for con in &self.constraints {
            let lhs: f64 = con.terms.iter().map(|(v, c)| c * x[v.0]).sum();
            let viol = match con.relation {
                Relation::Le => lhs - con.rhs,
                Relation::Ge => con.rhs - lhs,
                Relation::Eq => (lhs - con.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (var, &xv) in self.variables.iter().zip(x) {
            worst = worst.max(var.lower - xv).max(xv - var.upper);
        }
        worst
    }

    /// Largest constraint violation at `x`, each row measured relative to
    /// `1 + |rhs| + sum |a_j x_j|`; bounds are measured absolutely.
    pub fn max_scaled_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for con in &self.constraints {
            let mut lhs = 0.0;
            let mut mag = 1.0 + con.rhs.abs();
            for (v, c) in &con.terms {
                lhs += c * x[v.0];
                mag += (c * x[v.0]).abs();
            }
            let viol = match con.relation {
                Relation::Le => lhs - con.rhs,
                Relation::Ge => con.rhs - lhs,
                Relation::Eq => (lhs - con.rhs).abs(),
            };
            worst = worst.max(viol / mag);
        }
        for (var, &xv) in self.variables.iter().zip(x) {
            worst = worst.max(var.lower - xv).max(xv - var.upper);
        }
        worst
    }

    /// Writes the model in CPLEX LP text format for cross-checking with
    /// external solvers.
    pub fn to_lp_text(&self) -> String {
        let var_name = |v: VarId| -> String {
            let name = &self.variables[v.0].name;
            if name.is_empty() {
                format!("x{}", v.0)
            } else {
                sanitize(name)
            }
        };
        let expr = |terms: &[(VarId, f64)]| -> String {
            if terms.is_empty() {
                return "0".to_string();
            }
            let mut out = String::new();
            for (i, (v, c)) in terms.iter().enumerate() {
                if i > 0 || *c < 0.0 {
                    out.push_str(if *c < 0.0 { " - " } else { " + " });
                }
                let _ = write!(out, "{:?} {}", c.abs(), var_name(*v));
            }
            out
        };
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Minimize => "Minimize\n",
            Sense::Maximize => "Maximize\n",
        });
        let _ = writeln!(out, " obj: {}", expr(&self.objective));
        out.push_str("Subject To\n");
        for (i, con) in self.constraints.iter().enumerate() {
            let name = if con.name.is_empty() {
                format!("c{i}")
            } else {
                sanitize(&con.name)
            };
            let rel = match con.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {}: {} {} {:?}", name, expr(&con.terms), rel, con.rhs);
        }
        out.push_str("Bounds\n");
        for (i, var) in self.variables.iter().enumerate() {
            let name = var_name(VarId(i));
            match (var.lower.is_finite(), var.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " {name} free");
                }
                (true, false) => {
                    let _ = writeln!(out, " {name} >= {:?}", var.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {name} <= {:?}", var.upper);
                }
                (true, true) => {
                    let _ = writeln!(out, " {:?} <= {name} <= {:?}", var.lower, var.upper);
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Solves `model` and returns primal values, objective and constraint duals.
pub fn solve_lp(model: &LpModel) -> Result<LpSolution, LpError> {
    model.check()?;
    let n = model.variables.len();
    let max_sense = model.sense == Sense::Maximize;
    let mut cols = vec![Vec::new(); n];
    let mut row_lower = Vec::with_capacity(model.constraints.len());
    let mut row_upper = Vec::with_capacity(model.constraints.len());
    for (i, con) in model.constraints.iter().enumerate() {
        for &(v, c) in &con.terms {
            if c != 0.0 {
                cols[v.0].push((i, c));
            }
        }
        let (lo, up) = match con.relation {
            Relation::Le => (f64::NEG_INFINITY, con.rhs),
            Relation::Ge => (con.rhs, f64::INFINITY),
            Relation::Eq => (con.rhs, con.rhs),
        };
        row_lower.push(lo);
        row_upper.push(up);
    }
    let mut cost = vec![0.0; n];
    for (v, c) in &model.objective {
        cost[v.0] += if max_sense { -c } else { *c };
    }
    let problem = simplex::Problem {
        cols,
        cost,
        lower: model.variables.iter().map(|v| v.lower).collect(),
        upper: model.variables.iter().map(|v| v.upper).collect(),
        row_lower,
        row_upper,
    };
    let (status, primal, dual) =
        match simplex::solve(&problem).map_err(LpError::NumericalFailure)? {
            simplex::Outcome::Optimal { x, y } => {
                let dual = if max_sense {
                    y.iter().map(|d| -d).collect()
                } else {
                    y
                };
                (LpStatus::Optimal, x, dual)
            }
            simplex::Outcome::Infeasible => (
                LpStatus::Infeasible,
                vec![0.0; n],
                vec![0.0; model.constraints.len()],
            ),
            simplex::Outcome::Unbounded => (
                LpStatus::Unbounded,
                vec![0.0; n],
                vec![0.0; model.constraints.len()],
            ),
        };
    if status != LpStatus::Optimal {
        return Ok(LpSolution {
            status,
            objective_value: match (status, max_sense) {
                (LpStatus::Infeasible, true) | (LpStatus::Unbounded, false) => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            primal,
            dual,
        });
    }
    let viol = model.max_violation(&primal);
    if !(viol <= FEASIBILITY_TOL) {
        return Err(LpError::NumericalFailure(format!(
            "returned point violates constraints by {viol:e}"
        )));
    }
    Ok(LpSolution {
        status,
        objective_value: model.objective_at(&primal),
        primal,
        dual,
    })
}
