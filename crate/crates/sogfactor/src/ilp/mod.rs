//! Binary-variable integer linear programs: representation, exact
//! evaluation, presolve and file export/import.
//!
//! All variables are binary; both factorization encodings are fully
//! binarized, and the emulator's threshold encoding assumes it. Coefficients
//! are arbitrary-precision because carry/remainder terms scale like powers
//! of two of the operand widths.

mod format;
mod presolve;

pub use format::{export_lp, export_mps, import_lp, import_mps, FormatError};
pub use presolve::{presolve, PresolveOutcome};

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

/// Index of a variable within its model. Dense and unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    /// Family tag; groups variables that share design parameters.
    pub family: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Ge => write!(f, ">="),
            Sense::Eq => write!(f, "="),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub name: String,
    /// (coefficient, variable); no duplicate variables, no zero coefficients.
    pub terms: Vec<(BigInt, VarId)>,
    pub sense: Sense,
    pub rhs: BigInt,
    pub family: String,
}

impl LinearConstraint {
    pub fn lhs_value(&self, a: &Assignment) -> BigInt {
        let mut acc = BigInt::zero();
        for (c, v) in &self.terms {
            if a.bits[v.0] {
                acc += c;
            }
        }
        acc
    }

    /// Positive shortfall when violated under `a`, `None` when satisfied.
    pub fn shortfall(&self, a: &Assignment) -> Option<BigInt> {
        let lhs = self.lhs_value(a);
        match self.sense {
            Sense::Le => (lhs > self.rhs).then(|| lhs - &self.rhs),
            Sense::Ge => (lhs < self.rhs).then(|| &self.rhs - lhs),
            Sense::Eq => {
                if lhs == self.rhs {
                    None
                } else {
                    Some((lhs - &self.rhs).magnitude().clone().into())
                }
            }
        }
    }
}

/// One {0,1} value per variable of a model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub bits: Vec<bool>,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment { bits: vec![false; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Assignment { bits }
    }

    pub fn get(&self, v: VarId) -> bool {
        self.bits[v.0]
    }

    pub fn set(&mut self, v: VarId, value: bool) {
        self.bits[v.0] = value;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub constraint: usize,
    pub name: String,
    /// How far the constraint is missed by, always positive.
    pub shortfall: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalResult {
    Satisfied,
    Violated(Vec<Violation>),
}

impl EvalResult {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, EvalResult::Satisfied)
    }

    pub fn violation_count(&self) -> usize {
        match self {
            EvalResult::Satisfied => 0,
            EvalResult::Violated(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    UndeclaredVariable { constraint: String, var: VarId },
    DuplicateVariable { constraint: String, var: VarId },
    ZeroCoefficient { constraint: String, var: VarId },
    AssignmentLength { expected: usize, got: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::UndeclaredVariable { constraint, var } => {
                write!(f, "constraint {constraint} references undeclared variable {var}")
            }
            ModelError::DuplicateVariable { constraint, var } => {
                write!(f, "constraint {constraint} repeats variable {var}")
            }
            ModelError::ZeroCoefficient { constraint, var } => {
                write!(f, "constraint {constraint} has zero coefficient on {var}")
            }
            ModelError::AssignmentLength { expected, got } => {
                write!(f, "assignment has {got} bits, model has {expected} variables")
            }
        }
    }
}

impl std::error::Error for ModelError {}

/// A binary ILP: declared variables plus linear constraints over them.
/// Immutable once built; construction happens through the compilers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpModel {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
}

impl IlpModel {
    pub fn new(name: impl Into<String>) -> Self {
        IlpModel {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, family: impl Into<String>) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name: name.into(),
            family: family.into(),
        });
        id
    }

    pub fn add_constraint(&mut self, c: LinearConstraint) -> Result<usize, ModelError> {
        let mut seen = vec![false; self.variables.len()];
        for (coeff, v) in &c.terms {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UndeclaredVariable {
                    constraint: c.name.clone(),
                    var: *v,
                });
            }
            if seen[v.0] {
                return Err(ModelError::DuplicateVariable {
                    constraint: c.name.clone(),
                    var: *v,
                });
            }
            seen[v.0] = true;
            if coeff.is_zero() {
                return Err(ModelError::ZeroCoefficient {
                    constraint: c.name.clone(),
                    var: *v,
                });
            }
        }
        self.constraints.push(c);
        Ok(self.constraints.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    /// Exact evaluation with arbitrary-precision arithmetic.
    pub fn evaluate(&self, a: &Assignment) -> Result<EvalResult, ModelError> {
        if a.bits.len() != self.variables.len() {
            return Err(ModelError::AssignmentLength {
                expected: self.variables.len(),
                got: a.bits.len(),
            });
        }
        let mut violations = Vec::new();
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some(shortfall) = c.shortfall(a) {
                violations.push(Violation {
                    constraint: i,
                    name: c.name.clone(),
                    shortfall,
                });
            }
        }
        if violations.is_empty() {
            Ok(EvalResult::Satisfied)
        } else {
            Ok(EvalResult::Violated(violations))
        }
    }

    /// Number of unsatisfied constraints; cheaper than collecting violations.
    pub fn count_unsat(&self, a: &Assignment) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.shortfall(a).is_some())
            .count()
    }
}

/// Convenience constructor used by the compilers and tests.
pub fn constraint(
    name: impl Into<String>,
    family: impl Into<String>,
    terms: Vec<(BigInt, VarId)>,
    sense: Sense,
    rhs: impl Into<BigInt>,
) -> LinearConstraint {
    LinearConstraint {
        name: name.into(),
        terms,
        sense,
        rhs: rhs.into(),
        family: family.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn tiny_model() -> (IlpModel, VarId, VarId) {
        let mut m = IlpModel::new("tiny");
        let x1 = m.add_var("x1", "x-bits");
        let x2 = m.add_var("x2", "x-bits");
        m.add_constraint(constraint(
            "cover",
            "soag",
            vec![(BigInt::one(), x1), (BigInt::one(), x2)],
            Sense::Ge,
            1,
        ))
        .unwrap();
        (m, x1, x2)
    }

    #[test]
    fn evaluate_satisfied_and_violated() {
        let (m, _, _) = tiny_model();
        let sat = m.evaluate(&Assignment::from_bits(vec![true, false])).unwrap();
        assert!(sat.is_satisfied());
        let unsat = m.evaluate(&Assignment::from_bits(vec![false, false])).unwrap();
        match unsat {
            EvalResult::Violated(v) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].shortfall, BigInt::one());
            }
            _ => panic!("expected a violation of slack 1"),
        }
    }

    #[test]
    fn evaluate_rejects_wrong_length() {
        let (m, _, _) = tiny_model();
        assert!(m.evaluate(&Assignment::zeros(3)).is_err());
    }

    #[test]
    fn constraint_validation() {
        let mut m = IlpModel::new("bad");
        let x = m.add_var("x", "f");
        assert!(m
            .add_constraint(constraint(
                "dup",
                "f",
                vec![(BigInt::one(), x), (BigInt::one(), x)],
                Sense::Le,
                1,
            ))
            .is_err());
        assert!(m
            .add_constraint(constraint("zero", "f", vec![(BigInt::zero(), x)], Sense::Le, 1))
            .is_err());
        assert!(m
            .add_constraint(constraint(
                "undeclared",
                "f",
                vec![(BigInt::one(), VarId(5))],
                Sense::Le,
                1,
            ))
            .is_err());
    }
}
