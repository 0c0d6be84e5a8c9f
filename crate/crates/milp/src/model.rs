use std::fmt;

use crate::error::MilpError;
use crate::scalar::Scalar;

/// Index of a variable in a [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug)]
pub struct Variable<S> {
    pub name: String,
    pub lower: S,
    pub upper: S,
    pub kind: VarKind,
    pub objective: S,
}

/// Affine expression `constant + sum(coef * var)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinExpr<S> {
    pub terms: Vec<(VarId, S)>,
    pub constant: S,
}

impl<S: Scalar> Default for LinExpr<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> LinExpr<S> {
    pub fn new() -> Self {
        Self {
            terms: Vec::new(),
            constant: S::zero(),
        }
    }

    pub fn var(var: VarId) -> Self {
        Self::new().plus(var, S::one())
    }

    pub fn plus(mut self, var: VarId, coef: S) -> Self {
        self.terms.push((var, coef));
        self
    }

    pub fn offset(mut self, constant: S) -> Self {
        self.constant += constant;
        self
    }

    pub fn eval(&self, values: &[S]) -> S {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * values[v.0])
    }
}

/// Linear row `lower <= sum(coef * var) <= upper`; either side may be infinite.
#[derive(Clone, Debug)]
pub struct Constraint<S> {
    pub name: String,
    pub terms: Vec<(VarId, S)>,
    pub lower: S,
    pub upper: S,
}

impl<S: Scalar> Constraint<S> {
    pub fn activity(&self, values: &[S]) -> S {
        self.terms
            .iter()
            .fold(S::zero(), |acc, &(v, c)| acc + c * values[v.0])
    }

    pub fn violation(&self, values: &[S]) -> S {
        let a = self.activity(values);
        (self.lower - a).max(a - self.upper).max(S::zero())
    }
}

/// A linearized complementarity condition gated by one binary.
///
/// Both expressions are non-negative at every feasible point. The model rows
/// enforce `on <= M * binary` and `off <= M * (1 - binary)`, so `binary = 0`
/// pins `on` to zero and `binary = 1` pins `off` to zero. The scales are the
/// natural magnitudes of each side and are used to rank violated pairs.
#[derive(Clone, Debug)]
pub struct ComplementarityPair<S> {
    pub binary: VarId,
    pub on: LinExpr<S>,
    pub on_scale: S,
    pub off: LinExpr<S>,
    pub off_scale: S,
}

impl<S: Scalar> ComplementarityPair<S> {
    /// `min(on, off)`, clamped at zero: the amount by which the pair fails.
    pub fn residual(&self, values: &[S]) -> S {
        let on = self.on.eval(values).max(S::zero());
        let off = self.off.eval(values).max(S::zero());
        on.min(off)
    }

    /// Scale-free violation used for branching.
    pub fn violation(&self, values: &[S]) -> S {
        let on = self.on.eval(values).max(S::zero()) / self.on_scale;
        let off = self.off.eval(values).max(S::zero()) / self.off_scale;
        on * off
    }

    /// Binary value consistent with the continuous part of `values`.
    pub fn implied_binary(&self, values: &[S]) -> S {
        let on = self.on.eval(values) / self.on_scale;
        let off = self.off.eval(values) / self.off_scale;
        if on > off {
            S::one()
        } else {
            S::zero()
        }
    }
}

/// Which check a candidate point failed.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation<S> {
    Bound { var: String, amount: S },
    Row { row: String, amount: S },
    Integrality { var: String, amount: S },
    Complementarity { binary: String, amount: S },
}

impl<S: Scalar> Violation<S> {
    pub fn amount(&self) -> S {
        match self {
            Violation::Bound { amount, .. }
            | Violation::Row { amount, .. }
            | Violation::Integrality { amount, .. }
            | Violation::Complementarity { amount, .. } => *amount,
        }
    }
}

impl<S: Scalar> fmt::Display for Violation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Bound { var, amount } => write!(f, "bound of {var} violated by {amount}"),
            Violation::Row { row, amount } => write!(f, "row {row} violated by {amount}"),
            Violation::Integrality { var, amount } => {
                write!(f, "binary {var} is fractional by {amount}")
            }
            Violation::Complementarity { binary, amount } => {
                write!(f, "complementarity of {binary} violated by {amount}")
            }
        }
    }
}

/// Mixed 0-1 linear program.
#[derive(Clone, Debug)]
pub struct MilpModel<S> {
    pub name: String,
    pub sense: Sense,
    pub vars: Vec<Variable<S>>,
    pub constraints: Vec<Constraint<S>>,
    pub pairs: Vec<ComplementarityPair<S>>,
    pub objective_offset: S,
}

impl<S: Scalar> MilpModel<S> {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Self {
            name: name.into(),
            sense,
            vars: Vec::new(),
            constraints: Vec::new(),
            pairs: Vec::new(),
            objective_offset: S::zero(),
        }
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: S,
        upper: S,
        objective: S,
    ) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
            objective,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: S) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower: S::zero(),
            upper: S::one(),
            kind: VarKind::Binary,
            objective,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(VarId, S)>, lower: S, upper: S) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            lower,
            upper,
        });
    }

    pub fn add_le(&mut self, name: impl Into<String>, terms: Vec<(VarId, S)>, rhs: S) {
        self.add_row(name, terms, S::neg_infinity(), rhs);
    }

    pub fn add_ge(&mut self, name: impl Into<String>, terms: Vec<(VarId, S)>, rhs: S) {
        self.add_row(name, terms, rhs, S::infinity());
    }

    pub fn add_eq(&mut self, name: impl Into<String>, terms: Vec<(VarId, S)>, rhs: S) {
        self.add_row(name, terms, rhs, rhs);
    }

    pub fn add_pair(&mut self, pair: ComplementarityPair<S>) -> Result<(), MilpError> {
        let b = pair.binary.0;
        match self.vars.get(b) {
            None => return Err(MilpError::UnknownVariable(b)),
            Some(v) if v.kind != VarKind::Binary => {
                return Err(MilpError::NotBinary(v.name.clone()))
            }
            _ => {}
        }
        if self.pairs.iter().any(|p| p.binary == pair.binary) {
            return Err(MilpError::DuplicatePair(self.vars[b].name.clone()));
        }
        if !(pair.on_scale > S::zero() && pair.off_scale > S::zero()) {
            return Err(MilpError::InvalidScale(self.vars[b].name.clone()));
        }
        self.pairs.push(pair);
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    pub fn var(&self, id: VarId) -> &Variable<S> {
        &self.vars[id.0]
    }

    pub fn objective_value(&self, values: &[S]) -> S {
        self.vars
            .iter()
            .zip(values)
            .fold(self.objective_offset, |acc, (v, &x)| acc + v.objective * x)
    }

    /// True when `a` is a strictly better objective value than `b`.
    pub fn improves(&self, a: S, b: S) -> bool {
        match self.sense {
            Sense::Maximize => a > b,
            Sense::Minimize => a < b,
        }
    }

    /// Structural checks on the model.
    pub fn validate(&self) -> Result<(), MilpError> {
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::InvalidBounds(v.name.clone()));
            }
            if !v.objective.is_finite() {
                return Err(MilpError::NonFinite(v.name.clone()));
            }
        }
        for c in &self.constraints {
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return Err(MilpError::InvalidBounds(c.name.clone()));
            }
            for &(v, coef) in &c.terms {
                if v.0 >= self.vars.len() {
                    return Err(MilpError::UnknownVariable(v.0));
                }
                if !coef.is_finite() {
                    return Err(MilpError::NonFinite(c.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Worst violation of bounds, rows and integrality at `values`, if any
    /// exceeds `tol`. Row violations are measured relative to
    /// `max(1, |row activity terms|)`.
    pub fn worst_violation(&self, values: &[S], tol: S) -> Option<Violation<S>> {
        let mut worst: Option<Violation<S>> = None;
        let mut keep = |v: Violation<S>| {
            if v.amount() > tol && worst.as_ref().map_or(true, |w| v.amount() > w.amount()) {
                worst = Some(v);
            }
        };
        for (var, &x) in self.vars.iter().zip(values) {
            let amount = (var.lower - x).max(x - var.upper).max(S::zero());
            keep(Violation::Bound {
                var: var.name.clone(),
                amount,
            });
            if var.kind == VarKind::Binary {
                keep(Violation::Integrality {
                    var: var.name.clone(),
                    amount: x.min(S::one() - x).abs(),
                });
            }
        }
        for row in &self.constraints {
            let scale = row
                .terms
                .iter()
                .fold(S::one(), |acc, &(v, c)| acc.max((c * values[v.0]).abs()));
            keep(Violation::Row {
                row: row.name.clone(),
                amount: row.violation(values) / scale,
            });
        }
        worst
    }

    /// Largest `min(on, off)` over all complementarity pairs.
    pub fn complementarity_residual(&self, values: &[S]) -> S {
        self.pairs
            .iter()
            .map(|p| p.residual(values))
            .fold(S::zero(), S::max)
    }
}
