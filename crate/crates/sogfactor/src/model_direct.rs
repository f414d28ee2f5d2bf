//! Direct factorization model: compile `p*q = n` into a binary ILP via
//! bit-product inequalities and grouped carry equalities, and decode
//! satisfying assignments back into factors.
//!
//! The product machinery is shared: a [`ProductBlock`] encodes `a*b = c`
//! where `c` is either a constant (the biprime) or another bit vector (used
//! by the congruence models for their product chains).

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::ilp::{constraint, Assignment, EvalResult, IlpModel, Sense, VarId, Violation};

pub const FAMILY_X_BITS: &str = "x-bits";
pub const FAMILY_PRODUCTS: &str = "products";
pub const FAMILY_REMAINDERS: &str = "remainders";
pub const FAMILY_SOAND: &str = "soand";
pub const FAMILY_SOAG: &str = "soag";

/// Emits the two inequalities that pin `s = p AND q`:
/// `p + q <= s + 1` and `p + q >= 2s`.
pub fn encode_bit_product(
    model: &mut IlpModel,
    p: VarId,
    q: VarId,
    s: VarId,
    name_prefix: &str,
    family: &str,
) {
    assert!(p != q && q != s && p != s, "bit product needs distinct variables");
    model
        .add_constraint(constraint(
            format!("{name_prefix}le"),
            family,
            vec![
                (BigInt::one(), p),
                (BigInt::one(), q),
                (BigInt::from(-1), s),
            ],
            Sense::Le,
            1,
        ))
        .expect("bit product constraint");
    model
        .add_constraint(constraint(
            format!("{name_prefix}ge"),
            family,
            vec![
                (BigInt::one(), p),
                (BigInt::one(), q),
                (BigInt::from(-2), s),
            ],
            Sense::Ge,
            0,
        ))
        .expect("bit product constraint");
}

/// What the bitwise product must equal.
pub enum ProductTarget<'a> {
    Const(&'a BigUint),
    Vars(&'a [VarId]),
}

/// Layout of one `a*b = target` encoding: the AND variables `s_jk`, the
/// per-group remainder (carry) variables, and the exact per-group upper
/// bound of the left-hand side used to size the remainder windows.
#[derive(Debug, Clone)]
pub struct ProductBlock {
    pub a_vars: Vec<VarId>,
    pub b_vars: Vec<VarId>,
    /// (j, k) -> s_jk. For squares only j < k is stored and the diagonal
    /// reuses the operand bit itself.
    pub s_vars: BTreeMap<(usize, usize), VarId>,
    /// (group index, local position >= group size) -> remainder bit.
    pub r_vars: BTreeMap<(usize, usize), VarId>,
    pub group_count: usize,
    pub sup_lhs: Vec<BigUint>,
    pub square: bool,
    pub group_size: usize,
}

impl ProductBlock {
    pub fn s_count(&self) -> usize {
        self.s_vars.len()
    }
    pub fn r_count(&self) -> usize {
        self.r_vars.len()
    }
}

/// Encodes `a * b = target` with AND products plus one grouped carry
/// equality per `group_size` output positions, each emitted as a <=/>= pair.
///
/// Square mode (`a` and `b` are the same bits) stores s_jk once per
/// unordered pair with weight 2 and reuses `a_j` itself on the diagonal.
pub fn product_block(
    model: &mut IlpModel,
    a_bits: &[VarId],
    b_bits: &[VarId],
    target: ProductTarget<'_>,
    group_size: usize,
    prefix: &str,
    square: bool,
) -> ProductBlock {
    assert!(group_size >= 1, "group size must be >= 1");
    assert!(!a_bits.is_empty() && !b_bits.is_empty());
    if square {
        assert_eq!(a_bits, b_bits, "square mode multiplies a vector by itself");
    }

    // AND variables and their defining inequality pairs.
    let mut s_vars = BTreeMap::new();
    for j in 0..a_bits.len() {
        for k in 0..b_bits.len() {
            if square && j >= k {
                continue; // (k, j) covers it; the diagonal reuses a_j
            }
            let s = model.add_var(format!("{prefix}s{j}_{k}"), FAMILY_PRODUCTS);
            encode_bit_product(
                model,
                a_bits[j],
                b_bits[k],
                s,
                &format!("{prefix}a{j}_{k}"),
                FAMILY_SOAND,
            );
            s_vars.insert((j, k), s);
        }
    }

    // Per-position contributions of the product itself: (variable, multiplicity).
    let prod_top = a_bits.len() + b_bits.len() - 2;
    let mut at_position: Vec<Vec<(VarId, u32)>> = vec![Vec::new(); prod_top + 1];
    for (&(j, k), &s) in &s_vars {
        let mult = if square { 2 } else { 1 };
        at_position[j + k].push((s, mult));
    }
    if square {
        for (j, &a) in a_bits.iter().enumerate() {
            at_position[2 * j].push((a, 1));
        }
    }

    let target_bits: Vec<bool>;
    let (const_bits, var_bits): (Option<&[bool]>, Option<&[VarId]>) = match target {
        ProductTarget::Const(n) => {
            target_bits = biguint_bits(n);
            (Some(&target_bits), None)
        }
        ProductTarget::Vars(c) => (None, Some(c)),
    };
    let target_top = match (&const_bits, &var_bits) {
        (Some(b), _) => b.len().saturating_sub(1),
        (_, Some(v)) => v.len().saturating_sub(1),
        _ => unreachable!(),
    };

    // Remainder bits of earlier groups waiting to be consumed, keyed by
    // global position.
    let mut pending: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
    let mut r_vars = BTreeMap::new();
    let mut sup_lhs = Vec::new();
    let g = group_size;
    let mut m = 0usize;
    loop {
        let start = m * g;
        let have_products = start <= prod_top;
        let have_target = start <= target_top;
        let have_pending = !pending.is_empty();
        if !have_products && !have_target && !have_pending {
            break;
        }

        let mut terms: Vec<(BigInt, VarId)> = Vec::new();
        let mut sup = BigUint::zero();
        let mut rhs_const = BigInt::zero();
        for local in 0..g {
            let pos = start + local;
            let weight = BigUint::one() << local;
            if pos <= prod_top {
                for &(v, mult) in &at_position[pos] {
                    let w = &weight * BigUint::from(mult);
                    terms.push((BigInt::from(w.clone()), v));
                    sup += w;
                }
            }
            if let Some(bits) = pending.remove(&pos) {
                for v in bits {
                    terms.push((BigInt::from(weight.clone()), v));
                    sup += &weight;
                }
            }
            match (&const_bits, &var_bits) {
                (Some(nb), _) => {
                    if pos < nb.len() && nb[pos] {
                        rhs_const += BigInt::from(weight.clone());
                    }
                }
                (_, Some(cv)) => {
                    if pos < cv.len() {
                        terms.push((-BigInt::from(weight.clone()), cv[pos]));
                    }
                }
                _ => unreachable!(),
            }
        }

        // Carry-out window sized by the exact all-ones bound of the lhs.
        if sup.bits() as usize > g {
            let top_local = (sup.bits() - 1) as usize;
            for local in g..=top_local {
                let r = model.add_var(format!("{prefix}r{m}_{local}"), FAMILY_REMAINDERS);
                terms.push((-(BigInt::one() << local), r));
                r_vars.insert((m, local), r);
                pending.entry(start + local).or_default().push(r);
            }
        }
        sup_lhs.push(sup);

        if !terms.is_empty() || !rhs_const.is_zero() {
            for (tag, sense) in [("le", Sense::Le), ("ge", Sense::Ge)] {
                model
                    .add_constraint(constraint(
                        format!("{prefix}g{m}{tag}"),
                        FAMILY_SOAG,
                        terms.clone(),
                        sense,
                        rhs_const.clone(),
                    ))
                    .expect("group equality");
            }
        }
        m += 1;
    }

    ProductBlock {
        a_vars: a_bits.to_vec(),
        b_vars: b_bits.to_vec(),
        s_vars,
        r_vars,
        group_count: m,
        sup_lhs,
        square,
        group_size: g,
    }
}

fn biguint_bits(n: &BigUint) -> Vec<bool> {
    let len = n.bits() as usize;
    (0..len.max(1)).map(|i| n.bit(i as u64)).collect()
}

/// Reads an integer out of a little-endian bit-variable group.
pub fn decode_bits(vars: &[VarId], a: &Assignment) -> BigUint {
    let mut v = BigUint::zero();
    for (i, var) in vars.iter().enumerate() {
        if a.get(*var) {
            v.set_bit(i as u64, true);
        }
    }
    v
}

#[derive(Debug, Clone)]
pub struct DirectOptions {
    pub group_size: usize,
    /// Pin the first and last bit of p and q to 1 (benchmark biprimes are
    /// generated that way, and it excludes the trivial 1*n factorization).
    pub pin_ends: bool,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions {
            group_size: 2,
            pin_ends: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectLayout {
    pub n: BigUint,
    pub n_bits: usize,
    pub np: usize,
    pub nq: usize,
    pub group_size: usize,
    pub p_vars: Vec<VarId>,
    pub q_vars: Vec<VarId>,
    pub block: ProductBlock,
    pub pinned: bool,
    pub pin_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DirectError {
    BitBudgetTooSmall { np: usize, nq: usize, n_bits: usize },
    NTooSmall,
}

impl std::fmt::Display for DirectError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DirectError::BitBudgetTooSmall { np, nq, n_bits } => write!(
                f,
                "factor bit budget {np}+{nq} cannot represent a product of {n_bits} bits"
            ),
            DirectError::NTooSmall => write!(f, "n must be at least 4"),
        }
    }
}

impl std::error::Error for DirectError {}

/// Compiles `p*q = n` over `np`- and `nq`-bit factors.
pub fn compile_direct(
    n: &BigUint,
    np: usize,
    nq: usize,
    opts: &DirectOptions,
) -> Result<(IlpModel, DirectLayout), DirectError> {
    let n_bits = n.bits() as usize;
    if n < &BigUint::from(4u32) {
        return Err(DirectError::NTooSmall);
    }
    if np == 0 || nq == 0 || np + nq < n_bits {
        return Err(DirectError::BitBudgetTooSmall { np, nq, n_bits });
    }

    let mut model = IlpModel::new(format!("direct_{n}"));
    let p_vars: Vec<VarId> = (0..np)
        .map(|j| model.add_var(format!("p{j}"), FAMILY_X_BITS))
        .collect();
    let q_vars: Vec<VarId> = (0..nq)
        .map(|k| model.add_var(format!("q{k}"), FAMILY_X_BITS))
        .collect();

    let mut pin_count = 0usize;
    if opts.pin_ends {
        let mut pins = vec![("pin_p0", p_vars[0]), ("pin_q0", q_vars[0])];
        if np > 1 {
            pins.push(("pin_ptop", p_vars[np - 1]));
        }
        if nq > 1 {
            pins.push(("pin_qtop", q_vars[nq - 1]));
        }
        for (name, v) in pins {
            model
                .add_constraint(constraint(
                    name,
                    FAMILY_SOAG,
                    vec![(BigInt::one(), v)],
                    Sense::Ge,
                    1,
                ))
                .expect("pin constraint");
            pin_count += 1;
        }
    }

    let block = product_block(
        &mut model,
        &p_vars,
        &q_vars,
        ProductTarget::Const(n),
        opts.group_size,
        "",
        false,
    );

    let layout = DirectLayout {
        n: n.clone(),
        n_bits,
        np,
        nq,
        group_size: opts.group_size,
        p_vars,
        q_vars,
        block,
        pinned: opts.pin_ends,
        pin_count,
    };
    Ok((model, layout))
}

#[derive(Debug, Clone)]
pub enum DecodeError {
    Unsatisfied(Vec<Violation>),
    ProductMismatch { p: BigUint, q: BigUint, n: BigUint },
}

impl std::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodeError::Unsatisfied(v) => {
                write!(f, "assignment violates {} constraints", v.len())
            }
            DecodeError::ProductMismatch { p, q, n } => {
                write!(f, "decoded {p} * {q} != {n}")
            }
        }
    }
}

impl std::error::Error for DecodeError {}

/// Reads factors out of a satisfying assignment. Refuses assignments that
/// do not satisfy the model, returning the violation list.
pub fn decode_direct(
    model: &IlpModel,
    layout: &DirectLayout,
    a: &Assignment,
) -> Result<(BigUint, BigUint), DecodeError> {
    match model.evaluate(a).expect("assignment length") {
        EvalResult::Satisfied => {}
        EvalResult::Violated(v) => return Err(DecodeError::Unsatisfied(v)),
    }
    let p = decode_bits(&layout.p_vars, a);
    let q = decode_bits(&layout.q_vars, a);
    if &p * &q != layout.n {
        return Err(DecodeError::ProductMismatch {
            p,
            q,
            n: layout.n.clone(),
        });
    }
    Ok((p, q))
}
