//! Smooth-congruence search compiled to binary ILPs.
//!
//! A subproblem fixes a multiplier `x̄` and asks the circuit for integers
//! `x`, `k` and a factored right-hand side with `x̄x + kn = y`, where `y` is
//! represented as a product of short "splits". Splits of at most `h` bits
//! are `2^h`-smooth for free; oversized splits trade solution abundance for
//! a Dickman-sized acceptance probability at decode time.
//!
//! Three encodings of the product structure are provided: a grouped product
//! chain `z_{i+1} = z_i * y_{i+1}`, a multi-equation form `x̄x + kn =
//! w_i * y_i` (one equation per split, duplicates discarded after decode),
//! and a basic single-block form for small instances.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::ilp::{constraint, Assignment, IlpModel, Sense, VarId};
use crate::model_direct::{decode_bits, product_block, ProductBlock, ProductTarget, FAMILY_SOAG};
use crate::numtheory::{smooth_factorize, FactorBase, SmoothFactorization, SmoothOutcome};

pub const FAMILY_CONG_X: &str = "x";
pub const FAMILY_CONG_K: &str = "k";
pub const FAMILY_Y_SPLITS: &str = "y-splits";
pub const FAMILY_W: &str = "w";
pub const FAMILY_Z: &str = "products";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    GroupedProduct,
    MultiEquation,
    Basic,
}

/// Parameters of one congruence subproblem.
#[derive(Debug, Clone)]
pub struct CongruenceParams {
    pub n: BigUint,
    /// Smoothness bound is `b = 2^h`.
    pub h: usize,
    pub k_bits: usize,
    /// Total split length as a percentage of H = ceil(log2 sup(kn)).
    pub length_budget_pct: u32,
    /// `log2 sup(w) + log2 sup(y) <= H + headroom` in the multi-equation
    /// variant.
    pub w_y_headroom: usize,
    /// The fixed multiplier. Pick one with [`choose_xbar`].
    pub xbar: Option<BigUint>,
    pub variant: Variant,
    pub group_size: usize,
    /// (split index, bit length) overrides; lengths default to `h`.
    pub oversize_splits: Vec<(usize, usize)>,
}

impl CongruenceParams {
    pub fn new(n: BigUint, h: usize, k_bits: usize, variant: Variant) -> Self {
        CongruenceParams {
            n,
            h,
            k_bits,
            length_budget_pct: match variant {
                Variant::MultiEquation => 130,
                _ => 120,
            },
            w_y_headroom: 2,
            xbar: None,
            variant,
            group_size: 2,
            oversize_splits: Vec::new(),
        }
    }

    pub fn smoothness_bound(&self) -> u64 {
        1u64 << self.h
    }

    pub fn k_max(&self) -> BigUint {
        (BigUint::one() << self.k_bits) - 1u32
    }

    /// H: bit length of sup(kn).
    pub fn cap_h(&self) -> usize {
        (self.k_max() * &self.n).bits() as usize
    }

    pub fn budget_bits(&self) -> usize {
        let h = self.cap_h();
        (h * self.length_budget_pct as usize).div_ceil(100)
    }

    /// Split bit lengths: `ceil(budget/h)` splits of `h` bits, then the
    /// configured oversize overrides.
    pub fn split_lengths(&self) -> Vec<usize> {
        let count = self.budget_bits().div_ceil(self.h).max(1);
        let mut lens = vec![self.h; count];
        for &(idx, bits) in &self.oversize_splits {
            if idx < lens.len() {
                lens[idx] = bits;
            }
        }
        lens
    }

    /// Window for x̄ such that `x` needs `h + r` bits: with
    /// `2^(H-h-r) <= x̄ <= 2^(H-h-r+1)`, `x̄ x` stays within `2^(H+1)`.
    pub fn xbar_window(&self, x_extra_bits: usize) -> (BigUint, BigUint) {
        let h_cap = self.cap_h();
        let exp = h_cap.saturating_sub(self.h + x_extra_bits);
        (BigUint::one() << exp, BigUint::one() << (exp + 1))
    }

    /// Bit length of x given the chosen x̄: `x̄ x` may reach `2^(H+1)`.
    pub fn x_bits(&self) -> usize {
        let xbar = self.xbar.as_ref().expect("xbar must be chosen");
        let h_cap = self.cap_h();
        (h_cap + 1).saturating_sub(xbar.bits() as usize).max(1)
    }

    /// Exact upper bound of `y = x̄x + kn` under the bit budgets.
    pub fn y_sup(&self) -> BigUint {
        let xbar = self.xbar.as_ref().expect("xbar must be chosen");
        let x_max = (BigUint::one() << self.x_bits()) - 1u32;
        xbar * x_max + self.k_max() * &self.n
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CongruenceError {
    BudgetBelowCap { budget_pct: u32 },
    MissingXbar,
    BadParams(String),
}

impl std::fmt::Display for CongruenceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CongruenceError::BudgetBelowCap { budget_pct } => write!(
                f,
                "length budget {budget_pct}% is below 100% of H; no solutions representable"
            ),
            CongruenceError::MissingXbar => write!(f, "no x̄ chosen for the subproblem"),
            CongruenceError::BadParams(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CongruenceError {}

#[derive(Debug, Clone)]
pub struct CongruenceLayout {
    pub n: BigUint,
    pub xbar: BigUint,
    pub h: usize,
    pub variant: Variant,
    pub x_vars: Vec<VarId>,
    pub k_vars: Vec<VarId>,
    pub y_splits: Vec<Vec<VarId>>,
    /// Grouped-product: z_1..z_K (z_0 is y_splits[0]).
    /// Multi-equation: the per-equation product value t_i.
    /// Basic: empty.
    pub chain_vars: Vec<Vec<VarId>>,
    pub blocks: Vec<ProductBlock>,
    pub cap_h: usize,
}

/// Compiles one congruence subproblem.
pub fn compile_congruence(
    params: &CongruenceParams,
) -> Result<(IlpModel, CongruenceLayout), CongruenceError> {
    let xbar = params.xbar.clone().ok_or(CongruenceError::MissingXbar)?;
    if params.length_budget_pct < 100 {
        return Err(CongruenceError::BudgetBelowCap {
            budget_pct: params.length_budget_pct,
        });
    }
    if params.h == 0 || params.k_bits == 0 {
        return Err(CongruenceError::BadParams("h and k_bits must be >= 1".into()));
    }
    if xbar.is_zero() {
        return Err(CongruenceError::BadParams("x̄ must be >= 1".into()));
    }

    let mut model = IlpModel::new(format!("congruence_{}_xbar{}", params.n, xbar));
    let x_bits = params.x_bits();
    let x_vars: Vec<VarId> = (0..x_bits)
        .map(|j| model.add_var(format!("x{j}"), FAMILY_CONG_X))
        .collect();
    let k_vars: Vec<VarId> = (0..params.k_bits)
        .map(|j| model.add_var(format!("k{j}"), FAMILY_CONG_K))
        .collect();

    // x = 0 would reduce the relation to kn = y, which never helps; k = 0
    // would make it x̄x = y and say nothing modulo n.
    for (name, vars) in [("x_nonzero", &x_vars), ("k_nonzero", &k_vars)] {
        model
            .add_constraint(constraint(
                name,
                FAMILY_SOAG,
                vars.iter().map(|&v| (BigInt::one(), v)).collect(),
                Sense::Ge,
                1,
            ))
            .expect("nonzero constraint");
    }

    let y_sup = params.y_sup();
    let y_sup_bits = y_sup.bits() as usize;
    let split_lens = match params.variant {
        Variant::Basic => vec![y_sup_bits],
        _ => params.split_lengths(),
    };

    let mut y_splits: Vec<Vec<VarId>> = Vec::new();
    for (i, &len) in split_lens.iter().enumerate() {
        y_splits.push(
            (0..len)
                .map(|j| model.add_var(format!("y{i}_{j}"), FAMILY_Y_SPLITS))
                .collect(),
        );
    }

    let mut blocks = Vec::new();
    let mut chain_vars: Vec<Vec<VarId>> = Vec::new();

    // The variable group the top-level equality x̄x + kn = <top> ties into,
    // per equation.
    let mut tops: Vec<Vec<VarId>> = Vec::new();
    match params.variant {
        Variant::Basic => {
            tops.push(y_splits[0].clone());
        }
        Variant::GroupedProduct => {
            let mut z_prev = y_splits[0].clone();
            let mut len_sum = split_lens[0];
            for i in 1..split_lens.len() {
                len_sum += split_lens[i];
                let z_len = len_sum.min(y_sup_bits);
                let z: Vec<VarId> = (0..z_len)
                    .map(|j| model.add_var(format!("z{i}_{j}"), FAMILY_Z))
                    .collect();
                blocks.push(product_block(
                    &mut model,
                    &z_prev,
                    &y_splits[i],
                    ProductTarget::Vars(&z),
                    params.group_size,
                    &format!("m{i}"),
                    false,
                ));
                chain_vars.push(z.clone());
                z_prev = z;
            }
            tops.push(z_prev);
        }
        Variant::MultiEquation => {
            let w_bits = (params.cap_h() + params.w_y_headroom)
                .saturating_sub(params.h)
                .max(1);
            for (i, split) in y_splits.iter().enumerate() {
                let w: Vec<VarId> = (0..w_bits)
                    .map(|j| model.add_var(format!("w{i}_{j}"), FAMILY_W))
                    .collect();
                let t_len = (w_bits + split.len()).min(y_sup_bits);
                let t: Vec<VarId> = (0..t_len)
                    .map(|j| model.add_var(format!("t{i}_{j}"), FAMILY_Z))
                    .collect();
                blocks.push(product_block(
                    &mut model,
                    &w,
                    split,
                    ProductTarget::Vars(&t),
                    params.group_size,
                    &format!("m{i}"),
                    false,
                ));
                chain_vars.push(t.clone());
                tops.push(t);
            }
        }
    }

    // x̄ Σ 2^j x_j + n Σ 2^i k_i − Σ 2^g top_g = 0, one equality per equation.
    for (eq, top) in tops.iter().enumerate() {
        let mut terms: Vec<(BigInt, VarId)> = Vec::new();
        for (j, &v) in x_vars.iter().enumerate() {
            terms.push((BigInt::from(&xbar << j), v));
        }
        for (i, &v) in k_vars.iter().enumerate() {
            terms.push((BigInt::from(&params.n << i), v));
        }
        for (g, &v) in top.iter().enumerate() {
            terms.push((-(BigInt::one() << g), v));
        }
        for (tag, sense) in [("le", Sense::Le), ("ge", Sense::Ge)] {
            model
                .add_constraint(constraint(
                    format!("top{eq}{tag}"),
                    FAMILY_SOAG,
                    terms.clone(),
                    sense,
                    0,
                ))
                .expect("top equality");
        }
    }

    let layout = CongruenceLayout {
        n: params.n.clone(),
        xbar,
        h: params.h,
        variant: params.variant,
        x_vars,
        k_vars,
        y_splits,
        chain_vars,
        blocks,
        cap_h: params.cap_h(),
    };
    Ok((model, layout))
}

/// A validated smooth identity `x̄x + kn = y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CongruenceRelation {
    pub n: BigUint,
    pub xbar: BigUint,
    pub x: BigUint,
    pub k: BigUint,
    pub y: BigUint,
    pub y_splits: Vec<BigUint>,
    pub smooth_x: SmoothFactorization,
    pub smooth_y: SmoothFactorization,
}

impl CongruenceRelation {
    /// Exact arithmetic identity check plus certificate reconstruction.
    pub fn verify(&self) -> bool {
        &self.xbar * &self.x + &self.k * &self.n == self.y
            && self.smooth_x.reconstruct() == self.x
            && self.smooth_y.reconstruct() == self.y
    }

    pub fn large_primes(&self) -> Vec<u64> {
        self.smooth_x
            .large_prime
            .into_iter()
            .chain(self.smooth_y.large_prime)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeReject {
    /// The reconstructed numbers do not satisfy `x̄x + kn = y`; the
    /// assignment did not actually satisfy the model.
    IdentityViolation { x: BigUint, k: BigUint, y: BigUint },
    /// Multi-equation solutions must have pairwise distinct splits; the
    /// caller should resample with a different seed.
    DuplicateSplits,
    /// x or y kept a factor outside the base and cutoff.
    NotSmooth { side: &'static str, cofactor: BigUint },
    /// More than one large prime across x and y.
    TooManyLargePrimes,
    DegenerateZero,
}

impl std::fmt::Display for DecodeReject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodeReject::IdentityViolation { x, k, y } => {
                write!(f, "x̄x + kn != y for x={x}, k={k}, y={y}")
            }
            DecodeReject::DuplicateSplits => write!(f, "duplicate y splits; resample"),
            DecodeReject::NotSmooth { side, cofactor } => {
                write!(f, "{side} is not smooth (cofactor {cofactor})")
            }
            DecodeReject::TooManyLargePrimes => write!(f, "more than one large prime"),
            DecodeReject::DegenerateZero => write!(f, "x or k decoded to zero"),
        }
    }
}

/// Reconstructs and validates a relation from a satisfying assignment:
/// exact identity, split consistency/dedup, smoothness of both sides with
/// at most one large prime within the cutoff.
pub fn decode_congruence(
    layout: &CongruenceLayout,
    a: &Assignment,
    fb: &FactorBase,
    large_prime_cutoff: u64,
) -> Result<CongruenceRelation, DecodeReject> {
    let x = decode_bits(&layout.x_vars, a);
    let k = decode_bits(&layout.k_vars, a);
    if x.is_zero() || k.is_zero() {
        return Err(DecodeReject::DegenerateZero);
    }
    let y_splits: Vec<BigUint> = layout
        .y_splits
        .iter()
        .map(|vars| decode_bits(vars, a))
        .collect();

    let y = match layout.variant {
        Variant::Basic => y_splits[0].clone(),
        Variant::GroupedProduct => {
            let product = y_splits.iter().fold(BigUint::one(), |acc, s| acc * s);
            if let Some(top) = layout.chain_vars.last() {
                let z_top = decode_bits(top, a);
                if z_top != product {
                    return Err(DecodeReject::IdentityViolation {
                        x,
                        k,
                        y: product,
                    });
                }
            }
            product
        }
        Variant::MultiEquation => {
            let mut seen = BTreeSet::new();
            for s in &y_splits {
                if !seen.insert(s.clone()) {
                    return Err(DecodeReject::DuplicateSplits);
                }
            }
            decode_bits(&layout.chain_vars[0], a)
        }
    };

    if &layout.xbar * &x + &k * &layout.n != y {
        return Err(DecodeReject::IdentityViolation { x, k, y });
    }

    let smooth_x = match smooth_factorize(&x, fb, large_prime_cutoff) {
        SmoothOutcome::Smooth(s) => s,
        SmoothOutcome::Rejected { cofactor } => {
            return Err(DecodeReject::NotSmooth {
                side: "x",
                cofactor,
            })
        }
    };
    let smooth_y = match smooth_factorize(&y, fb, large_prime_cutoff) {
        SmoothOutcome::Smooth(s) => s,
        SmoothOutcome::Rejected { cofactor } => {
            return Err(DecodeReject::NotSmooth {
                side: "y",
                cofactor,
            })
        }
    };
    if smooth_x.large_prime.is_some() && smooth_y.large_prime.is_some() {
        return Err(DecodeReject::TooManyLargePrimes);
    }

    Ok(CongruenceRelation {
        n: layout.n.clone(),
        xbar: layout.xbar.clone(),
        x,
        k,
        y,
        y_splits,
        smooth_x,
        smooth_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XbarStrategy {
    /// A preset b-smooth number in the window.
    SmoothPreset,
    /// A square of a smooth odd integer in the window.
    Square,
    /// A pending large prime times a power of two; pairs deliberately with
    /// the stored partial relation carrying that prime.
    LargePrimeRecycle,
}

#[derive(Debug, Clone)]
pub struct XbarContext<'a> {
    pub fb: &'a FactorBase,
    pub window_lo: BigUint,
    pub window_hi: BigUint,
    pub pending_large_primes: &'a [u64],
    /// Diversifies consecutive picks of the same strategy.
    pub counter: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XbarError {
    EmptyPartialPool,
    NoSquareInWindow,
    LargePrimeAboveWindow(u64),
}

impl std::fmt::Display for XbarError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            XbarError::EmptyPartialPool => write!(f, "no pending partial relations to recycle"),
            XbarError::NoSquareInWindow => write!(f, "no smooth square inside the x̄ window"),
            XbarError::LargePrimeAboveWindow(p) => {
                write!(f, "pending large prime {p} exceeds the x̄ window")
            }
        }
    }
}

impl std::error::Error for XbarError {}

fn doubled_into_window(mut v: BigUint, lo: &BigUint, hi: &BigUint) -> Option<BigUint> {
    if &v > hi {
        return None;
    }
    while &v < lo {
        v <<= 1;
    }
    (&v <= hi).then_some(v)
}

fn is_smooth_u64(mut v: u64, fb: &FactorBase) -> bool {
    for &p in &fb.primes {
        while v % p == 0 {
            v /= p;
        }
        if v == 1 {
            return true;
        }
    }
    v == 1
}

/// Picks a fixed multiplier x̄ inside `[window_lo, window_hi]`.
pub fn choose_xbar(strategy: XbarStrategy, ctx: &XbarContext<'_>) -> Result<BigUint, XbarError> {
    match strategy {
        XbarStrategy::SmoothPreset => {
            // Seed with a rotating odd base prime, then scale by powers of
            // two into the window; a window of ratio 2 is always hit.
            let odd: Vec<u64> = ctx.fb.primes.iter().copied().filter(|&p| p != 2).collect();
            if !odd.is_empty() {
                // Try one- and two-prime seeds for variety.
                let a = odd[(ctx.counter as usize) % odd.len()];
                let b = odd[(ctx.counter as usize / odd.len()) % odd.len()];
                for seed in [BigUint::from(a) * BigUint::from(b), BigUint::from(a)] {
                    if let Some(v) = doubled_into_window(seed, &ctx.window_lo, &ctx.window_hi) {
                        return Ok(v);
                    }
                }
            }
            Ok(doubled_into_window(BigUint::one(), &ctx.window_lo, &ctx.window_hi)
                .expect("powers of two always land in a ratio-2 window"))
        }
        XbarStrategy::Square => {
            let lo_root = ctx.window_lo.sqrt();
            let hi_root = ctx.window_hi.sqrt();
            let mut candidates = Vec::new();
            let mut m = lo_root.clone();
            while &m <= &hi_root {
                if &m * &m >= ctx.window_lo && &m * &m <= ctx.window_hi {
                    if let Some(m64) = num_traits::ToPrimitive::to_u64(&m) {
                        if m64 % 2 == 1 && is_smooth_u64(m64, ctx.fb) {
                            candidates.push(m.clone());
                        }
                    }
                }
                m += 1u32;
                if candidates.len() > 64 {
                    break;
                }
            }
            if candidates.is_empty() {
                return Err(XbarError::NoSquareInWindow);
            }
            let pick = &candidates[(ctx.counter as usize) % candidates.len()];
            Ok(pick * pick)
        }
        XbarStrategy::LargePrimeRecycle => {
            if ctx.pending_large_primes.is_empty() {
                return Err(XbarError::EmptyPartialPool);
            }
            let p =
                ctx.pending_large_primes[(ctx.counter as usize) % ctx.pending_large_primes.len()];
            doubled_into_window(BigUint::from(p), &ctx.window_lo, &ctx.window_hi)
                .ok_or(XbarError::LargePrimeAboveWindow(p))
        }
    }
}

/// Bit budgets for the quadratic reference `(x + floor(sqrt n))^2 = y z`.
#[derive(Debug, Clone)]
pub struct QuadraticBudgets {
    pub x_bits: usize,
    pub y_bits: usize,
    pub z_bits: usize,
    pub group_size: usize,
}

#[derive(Debug, Clone)]
pub struct QuadraticLayout {
    pub n: BigUint,
    pub sqrt_floor: BigUint,
    pub x_vars: Vec<VarId>,
    pub t_vars: Vec<VarId>,
    pub u_vars: Vec<VarId>,
    pub y_vars: Vec<VarId>,
    pub z_vars: Vec<VarId>,
    pub square_block: ProductBlock,
    pub yz_block: ProductBlock,
}

/// Compiles the quadratic layout reference: one squaring region and one
/// product region sharing the same target bit lines.
pub fn compile_quadratic_reference(
    n: &BigUint,
    budgets: &QuadraticBudgets,
) -> Result<(IlpModel, QuadraticLayout), CongruenceError> {
    if budgets.x_bits == 0 || budgets.y_bits == 0 || budgets.z_bits == 0 {
        return Err(CongruenceError::BadParams("bit budgets must be >= 1".into()));
    }
    let s0 = n.sqrt();
    let y_max = (BigUint::one() << budgets.y_bits) - 1u32;
    let z_max = (BigUint::one() << budgets.z_bits) - 1u32;
    if &y_max * &z_max < &s0 * &s0 {
        return Err(CongruenceError::BadParams(
            "y/z budgets cannot represent the squared offset".into(),
        ));
    }

    let mut model = IlpModel::new(format!("quadratic_{n}"));
    let x_vars: Vec<VarId> = (0..budgets.x_bits)
        .map(|j| model.add_var(format!("x{j}"), FAMILY_CONG_X))
        .collect();
    let t_max = &s0 + (BigUint::one() << budgets.x_bits) - 1u32;
    let t_bits = t_max.bits() as usize;
    let t_vars: Vec<VarId> = (0..t_bits)
        .map(|j| model.add_var(format!("t{j}"), "squares"))
        .collect();

    // t = x + floor(sqrt n)
    let mut terms: Vec<(BigInt, VarId)> = t_vars
        .iter()
        .enumerate()
        .map(|(j, &v)| (BigInt::one() << j, v))
        .collect();
    for (j, &v) in x_vars.iter().enumerate() {
        terms.push((-(BigInt::one() << j), v));
    }
    for (tag, sense) in [("le", Sense::Le), ("ge", Sense::Ge)] {
        model
            .add_constraint(constraint(
                format!("offset{tag}"),
                FAMILY_SOAG,
                terms.clone(),
                sense,
                BigInt::from(s0.clone()),
            ))
            .expect("offset equality");
    }

    let u_bits = (&t_max * &t_max).bits() as usize;
    let u_vars: Vec<VarId> = (0..u_bits)
        .map(|j| model.add_var(format!("u{j}"), "squares"))
        .collect();
    let y_vars: Vec<VarId> = (0..budgets.y_bits)
        .map(|j| model.add_var(format!("yq{j}"), "yz"))
        .collect();
    let z_vars: Vec<VarId> = (0..budgets.z_bits)
        .map(|j| model.add_var(format!("zq{j}"), "yz"))
        .collect();

    let square_block = product_block(
        &mut model,
        &t_vars,
        &t_vars,
        ProductTarget::Vars(&u_vars),
        budgets.group_size,
        "sq",
        true,
    );
    let yz_block = product_block(
        &mut model,
        &y_vars,
        &z_vars,
        ProductTarget::Vars(&u_vars),
        budgets.group_size,
        "yz",
        false,
    );

    Ok((
        model,
        QuadraticLayout {
            n: n.clone(),
            sqrt_floor: s0,
            x_vars,
            t_vars,
            u_vars,
            y_vars,
            z_vars,
            square_block,
            yz_block,
        },
    ))
}

/// Decoded quadratic solution; always satisfies `(x + s0)^2 = y*z` exactly
/// when the assignment satisfies the model.
pub fn decode_quadratic(
    layout: &QuadraticLayout,
    a: &Assignment,
) -> (BigUint, BigUint, BigUint, BigUint) {
    let x = decode_bits(&layout.x_vars, a);
    let t = decode_bits(&layout.t_vars, a);
    let y = decode_bits(&layout.y_vars, a);
    let z = decode_bits(&layout.z_vars, a);
    debug_assert_eq!(t, &x + &layout.sqrt_floor);
    (x, t, y, z)
}
