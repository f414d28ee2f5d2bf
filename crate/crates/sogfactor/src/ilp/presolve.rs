//! Model simplification before handing a problem to the emulator.
//!
//! Three rules run to a fixpoint: single-variable constraint fixing, bound
//! propagation over {0,1} ranges, and removal of constraints that are
//! satisfied for every remaining assignment. Solutions of the reduced model
//! are in bijection with solutions of the input restricted to the fixings.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;

use super::{IlpModel, LinearConstraint, Sense, VarId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PresolveOutcome {
    Reduced {
        /// Same variable table as the input; constraints rewritten with the
        /// fixings substituted into the right-hand sides.
        model: IlpModel,
        fixed: BTreeMap<VarId, bool>,
    },
    Infeasible {
        constraint: String,
    },
}

impl PresolveOutcome {
    pub fn expect_reduced(self) -> (IlpModel, BTreeMap<VarId, bool>) {
        match self {
            PresolveOutcome::Reduced { model, fixed } => (model, fixed),
            PresolveOutcome::Infeasible { constraint } => {
                panic!("presolve found infeasibility at {constraint}")
            }
        }
    }

    /// Writes the fixings into an assignment (used after solving the
    /// reduced model, before decoding).
    pub fn apply_fixings(fixed: &BTreeMap<VarId, bool>, a: &mut super::Assignment) {
        for (&v, &val) in fixed {
            a.bits[v.0] = val;
        }
    }
}

struct Row {
    name: String,
    family: String,
    terms: Vec<(BigInt, VarId)>,
    sense: Sense,
    rhs: BigInt,
}

pub fn presolve(model: &IlpModel) -> PresolveOutcome {
    let mut fixed: BTreeMap<VarId, bool> = BTreeMap::new();
    let mut rows: Vec<Option<Row>> = model
        .constraints()
        .iter()
        .map(|c| {
            Some(Row {
                name: c.name.clone(),
                family: c.family.clone(),
                terms: c.terms.clone(),
                sense: c.sense,
                rhs: c.rhs.clone(),
            })
        })
        .collect();

    loop {
        let mut changed = false;
        for slot in rows.iter_mut() {
            let Some(row) = slot else { continue };

            // Substitute current fixings.
            if row.terms.iter().any(|(_, v)| fixed.contains_key(v)) {
                let mut rhs = row.rhs.clone();
                row.terms.retain(|(c, v)| match fixed.get(v) {
                    Some(&true) => {
                        rhs -= c;
                        false
                    }
                    Some(&false) => false,
                    None => true,
                });
                row.rhs = rhs;
                changed = true;
            }

            // Constant constraint.
            if row.terms.is_empty() {
                let zero = BigInt::zero();
                let ok = match row.sense {
                    Sense::Le => zero <= row.rhs,
                    Sense::Ge => zero >= row.rhs,
                    Sense::Eq => zero == row.rhs,
                };
                if ok {
                    *slot = None;
                    changed = true;
                    continue;
                }
                return PresolveOutcome::Infeasible {
                    constraint: row.name.clone(),
                };
            }

            // Single-variable constraint: enumerate {0,1}.
            if row.terms.len() == 1 {
                let (coeff, var) = (&row.terms[0].0, row.terms[0].1);
                let holds = |bit: bool| -> bool {
                    let lhs = if bit { coeff.clone() } else { BigInt::zero() };
                    match row.sense {
                        Sense::Le => lhs <= row.rhs,
                        Sense::Ge => lhs >= row.rhs,
                        Sense::Eq => lhs == row.rhs,
                    }
                };
                match (holds(false), holds(true)) {
                    (false, false) => {
                        return PresolveOutcome::Infeasible {
                            constraint: row.name.clone(),
                        }
                    }
                    (true, true) => {}
                    (true, false) => {
                        fixed.insert(var, false);
                    }
                    (false, true) => {
                        fixed.insert(var, true);
                    }
                }
                *slot = None;
                changed = true;
                continue;
            }

            // Bound propagation: achievable lhs range over free binaries.
            let mut min_lhs = BigInt::zero();
            let mut max_lhs = BigInt::zero();
            for (c, _) in &row.terms {
                if c.is_negative() {
                    min_lhs += c;
                } else {
                    max_lhs += c;
                }
            }

            let le_infeasible = min_lhs > row.rhs;
            let ge_infeasible = max_lhs < row.rhs;
            match row.sense {
                Sense::Le if le_infeasible => {
                    return PresolveOutcome::Infeasible {
                        constraint: row.name.clone(),
                    }
                }
                Sense::Ge if ge_infeasible => {
                    return PresolveOutcome::Infeasible {
                        constraint: row.name.clone(),
                    }
                }
                Sense::Eq if le_infeasible || ge_infeasible => {
                    return PresolveOutcome::Infeasible {
                        constraint: row.name.clone(),
                    }
                }
                _ => {}
            }

            let always_le = max_lhs <= row.rhs;
            let always_ge = min_lhs >= row.rhs;
            let remove = match row.sense {
                Sense::Le => always_le,
                Sense::Ge => always_ge,
                Sense::Eq => always_le && always_ge,
            };
            if remove {
                *slot = None;
                changed = true;
                continue;
            }

            // Forcing: a variable whose wrong polarity makes the row
            // unsatisfiable must take the other one.
            let mut forced: Vec<(VarId, bool)> = Vec::new();
            let check_le = matches!(row.sense, Sense::Le | Sense::Eq);
            let check_ge = matches!(row.sense, Sense::Ge | Sense::Eq);
            for (c, v) in &row.terms {
                if check_le {
                    if c.is_positive() && &min_lhs + c > row.rhs {
                        forced.push((*v, false));
                        continue;
                    }
                    if c.is_negative() && &min_lhs - c > row.rhs {
                        forced.push((*v, true));
                        continue;
                    }
                }
                if check_ge {
                    if c.is_positive() && &max_lhs - c < row.rhs {
                        forced.push((*v, true));
                        continue;
                    }
                    if c.is_negative() && &max_lhs + c < row.rhs {
                        forced.push((*v, false));
                        continue;
                    }
                }
            }
            for (v, val) in forced {
                if let Some(&prev) = fixed.get(&v) {
                    if prev != val {
                        return PresolveOutcome::Infeasible {
                            constraint: row.name.clone(),
                        };
                    }
                } else {
                    fixed.insert(v, val);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = IlpModel::new(model.name.clone());
    for v in model.variables() {
        out.add_var(v.name.clone(), v.family.clone());
    }
    for row in rows.into_iter().flatten() {
        out.add_constraint(LinearConstraint {
            name: row.name,
            terms: row.terms,
            sense: row.sense,
            rhs: row.rhs,
            family: row.family,
        })
        .expect("presolve produced an invalid constraint");
    }
    PresolveOutcome::Reduced { model: out, fixed }
}

trait SignExt {
    fn is_negative(&self) -> bool;
    fn is_positive(&self) -> bool;
}

impl SignExt for BigInt {
    fn is_negative(&self) -> bool {
        self.sign() == num_bigint::Sign::Minus
    }
    fn is_positive(&self) -> bool {
        self.sign() == num_bigint::Sign::Plus
    }
}
