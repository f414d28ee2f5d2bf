//! Assignment construction for the test suites and examples.
//!
//! Given operand *values*, these helpers fill in the unique candidate
//! assignment of a compiled model: AND variables from bitwise products and
//! carry variables derived by grade-school integer arithmetic. They share no
//! code with the constraint emission, so a constructed assignment passing
//! `evaluate` genuinely cross-checks the encoding.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

use crate::ilp::{Assignment, VarId};
use crate::model_congruence::{CongruenceLayout, QuadraticLayout, Variant};
use crate::model_direct::{DirectLayout, ProductBlock};

/// Writes `value` into little-endian bit variables; fails when it does not
/// fit the width.
pub fn write_bits(a: &mut Assignment, vars: &[VarId], value: &BigUint) -> bool {
    if value.bits() as usize > vars.len() {
        return false;
    }
    for (i, &v) in vars.iter().enumerate() {
        a.set(v, value.bit(i as u64));
    }
    true
}

enum Target<'a> {
    Const(&'a BigUint),
    Vars(&'a [VarId], &'a BigUint),
}

/// Fills the s and r variables of one product block for `a_val * b_val`,
/// deriving every group's carry from integer arithmetic. Returns false
/// when the values cannot satisfy the block (wrong product, capacity
/// overflow, or carries that do not fit the emitted windows).
fn fill_block(
    a: &mut Assignment,
    block: &ProductBlock,
    a_vals: &BigUint,
    b_vals: &BigUint,
    a_len: usize,
    b_len: usize,
    target: Target<'_>,
) -> bool {
    if a_vals.bits() as usize > a_len || b_vals.bits() as usize > b_len {
        return false;
    }
    // AND variables.
    for (&(j, k), &s) in &block.s_vars {
        a.set(s, a_vals.bit(j as u64) && b_vals.bit(k as u64));
    }
    let (target_val, target_len): (&BigUint, usize) = match &target {
        Target::Const(v) => (v, v.bits() as usize),
        Target::Vars(vars, v) => {
            if !write_bits(a, vars, v) {
                return false;
            }
            (v, vars.len())
        }
    };

    let g = block.group_size;
    let prod_top = a_len + b_len - 2;
    let mut pending: BTreeMap<usize, Vec<(VarId, bool)>> = BTreeMap::new();
    // Populate pending slots for every emitted r variable up front; values
    // are decided group by group.
    for m in 0..block.group_count {
        let start = m * g;
        // Value of the window's left-hand side.
        let mut lhs = BigUint::zero();
        for local in 0..g {
            let pos = start + local;
            let mut count = BigUint::zero();
            if pos <= prod_top {
                // sum_{j+k=pos} a_j b_k, including square-mode symmetry.
                for j in 0..=pos.min(a_len - 1) {
                    let k = pos - j;
                    if k >= b_len {
                        continue;
                    }
                    if a_vals.bit(j as u64) && b_vals.bit(k as u64) {
                        count += 1u32;
                    }
                }
            }
            if let Some(bits) = pending.get(&pos) {
                for (_, set) in bits {
                    if *set {
                        count += 1u32;
                    }
                }
            }
            pending.remove(&pos);
            lhs += count << local;
        }
        let mut window_target = BigUint::zero();
        for local in 0..g {
            let pos = start + local;
            if pos < target_len && target_val.bit(pos as u64) {
                window_target += BigUint::one() << local;
            }
        }
        if lhs < window_target {
            return false;
        }
        let mut carry = lhs - window_target;
        // Write the carry into this group's emitted remainder bits.
        for local in g.. {
            let Some(&r) = block.r_vars.get(&(m, local)) else {
                break;
            };
            let bit = carry.bit(local as u64);
            a.set(r, bit);
            pending.entry(start + local).or_default().push((r, bit));
            if bit {
                carry -= BigUint::one() << local;
            }
        }
        if !carry.is_zero() {
            return false; // carry has bits outside the emitted window
        }
    }
    // Everything must have been consumed; values in the target beyond the
    // processed range mean the product cannot reach them.
    pending.values().flatten().all(|(_, set)| !set)
}

/// The unique candidate assignment of a direct model for factor values
/// (p, q): factor bits, AND products, and carries. `None` when (p, q)
/// cannot satisfy the encoding.
pub fn direct_assignment(
    layout: &DirectLayout,
    n_vars: usize,
    p: &BigUint,
    q: &BigUint,
) -> Option<Assignment> {
    let mut a = Assignment::zeros(n_vars);
    if !write_bits(&mut a, &layout.p_vars, p) || !write_bits(&mut a, &layout.q_vars, q) {
        return None;
    }
    fill_block(
        &mut a,
        &layout.block,
        p,
        q,
        layout.p_vars.len(),
        layout.q_vars.len(),
        Target::Const(&layout.n),
    )
    .then_some(a)
}

/// The unique candidate assignment of a congruence model for chosen
/// (x, k, splits). Derives y, the chain/product values and all the carries.
pub fn congruence_assignment(
    layout: &CongruenceLayout,
    n_vars: usize,
    x: &BigUint,
    k: &BigUint,
    splits: &[BigUint],
) -> Option<Assignment> {
    if splits.len() != layout.y_splits.len() {
        return None;
    }
    let y = &layout.xbar * x + k * &layout.n;
    let mut a = Assignment::zeros(n_vars);
    if !write_bits(&mut a, &layout.x_vars, x) || !write_bits(&mut a, &layout.k_vars, k) {
        return None;
    }
    for (vars, val) in layout.y_splits.iter().zip(splits) {
        if !write_bits(&mut a, vars, val) {
            return None;
        }
    }
    match layout.variant {
        Variant::Basic => {
            if splits[0] != y {
                return None;
            }
        }
        Variant::GroupedProduct => {
            if splits.iter().product::<BigUint>() != y {
                return None;
            }
            let mut z_prev = splits[0].clone();
            let mut prev_len = layout.y_splits[0].len();
            for (i, block) in layout.blocks.iter().enumerate() {
                let z_next = &z_prev * &splits[i + 1];
                let z_vars = &layout.chain_vars[i];
                if !fill_block(
                    &mut a,
                    block,
                    &z_prev,
                    &splits[i + 1],
                    prev_len,
                    layout.y_splits[i + 1].len(),
                    Target::Vars(z_vars, &z_next),
                ) {
                    return None;
                }
                z_prev = z_next;
                prev_len = z_vars.len();
            }
        }
        Variant::MultiEquation => {
            for (i, block) in layout.blocks.iter().enumerate() {
                if splits[i].is_zero() || (&y % &splits[i]) != BigUint::zero() {
                    return None;
                }
                let w = &y / &splits[i];
                if !write_bits(&mut a, &block.a_vars, &w) {
                    return None;
                }
                if !fill_block(
                    &mut a,
                    block,
                    &w,
                    &splits[i],
                    block.a_vars.len(),
                    layout.y_splits[i].len(),
                    Target::Vars(&layout.chain_vars[i], &y),
                ) {
                    return None;
                }
            }
        }
    }
    Some(a)
}

/// Ground-truth assignment for the quadratic reference: x, t = x + s0,
/// u = t^2 and a chosen (y, z) with y*z = u.
pub fn quadratic_assignment(
    layout: &QuadraticLayout,
    n_vars: usize,
    x: &BigUint,
    y: &BigUint,
    z: &BigUint,
) -> Option<Assignment> {
    let t = x + &layout.sqrt_floor;
    let u = &t * &t;
    if y * z != u {
        return None;
    }
    let mut a = Assignment::zeros(n_vars);
    if !write_bits(&mut a, &layout.x_vars, x)
        || !write_bits(&mut a, &layout.t_vars, &t)
        || !write_bits(&mut a, &layout.y_vars, y)
        || !write_bits(&mut a, &layout.z_vars, z)
    {
        return None;
    }
    let t_len = layout.t_vars.len();
    if !fill_block(
        &mut a,
        &layout.square_block,
        &t,
        &t,
        t_len,
        t_len,
        Target::Vars(&layout.u_vars, &u),
    ) {
        return None;
    }
    fill_block(
        &mut a,
        &layout.yz_block,
        y,
        z,
        layout.y_vars.len(),
        layout.z_vars.len(),
        Target::Vars(&layout.u_vars, &u),
    )
    .then_some(a)
}
