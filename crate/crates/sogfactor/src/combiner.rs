//! Turns validated congruences into factors: normalize to quadratic form,
//! pair partial relations on their shared large prime, find GF(2)
//! dependencies among exponent vectors, multiply the selected congruences
//! into a Fermat relation `Y² − X² = Kn`, and extract `gcd(Y − X, n)`.
//!
//! Every identity in this module is maintained with exact integer
//! arithmetic; the store refuses relations that fail verification.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::model_congruence::CongruenceRelation;
use crate::numtheory::{smooth_factorize, FactorBase, SmoothOutcome};

/// A congruence multiplied into quadratic form:
/// `x'² + k'n = y'` with the exponent vector of `y'` attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedRelation {
    /// The multiplier `s` (product of the odd-exponent primes of the
    /// x side).
    pub multiplier: BigUint,
    pub x_prime: BigUint,
    pub k_prime: BigUint,
    pub y_prime: BigUint,
    /// Exponents of `y_prime`: factor-base primes plus any paired large
    /// prime (whose exponent is always even).
    pub exponents: BTreeMap<u64, u32>,
    /// Raw-relation ids this row was built from (one, or two for a
    /// large-prime pair).
    pub sources: Vec<usize>,
}

impl NormalizedRelation {
    pub fn verify(&self, n: &BigUint) -> bool {
        let lhs = &self.x_prime * &self.x_prime + &self.k_prime * n;
        if lhs != self.y_prime {
            return false;
        }
        let mut acc = BigUint::one();
        for (&p, &e) in &self.exponents {
            acc *= BigUint::from(p).pow(e);
        }
        acc == self.y_prime
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    /// The relation still carries a large prime; combine it first.
    OutstandingLargePrime(u64),
    /// x̄ did not factor over the base (strategies only construct smooth
    /// multipliers, so this indicates a foreign relation).
    RoughMultiplier { cofactor: BigUint },
}

impl fmt::Display for NormalizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizeError::OutstandingLargePrime(p) => {
                write!(f, "relation has unpaired large prime {p}")
            }
            NormalizeError::RoughMultiplier { cofactor } => {
                write!(f, "x̄ has non-smooth cofactor {cofactor}")
            }
        }
    }
}

impl std::error::Error for NormalizeError {}

fn add_exponents(into: &mut BTreeMap<u64, u32>, from: &BTreeMap<u64, u32>) {
    for (&p, &e) in from {
        *into.entry(p).or_insert(0) += e;
    }
}

/// Exponent map of `x̄ * x` for a relation, large primes included as
/// ordinary keys.
fn x_side_exponents(
    rel: &CongruenceRelation,
    fb: &FactorBase,
    cutoff: u64,
) -> Result<BTreeMap<u64, u32>, NormalizeError> {
    let mut exps = rel.smooth_x.exponents.clone();
    if let Some(p) = rel.smooth_x.large_prime {
        *exps.entry(p).or_insert(0) += 1;
    }
    match smooth_factorize(&rel.xbar, fb, cutoff) {
        SmoothOutcome::Smooth(s) => {
            add_exponents(&mut exps, &s.exponents);
            if let Some(p) = s.large_prime {
                *exps.entry(p).or_insert(0) += 1;
            }
        }
        SmoothOutcome::Rejected { cofactor } => {
            return Err(NormalizeError::RoughMultiplier { cofactor })
        }
    }
    Ok(exps)
}

fn y_side_exponents(rel: &CongruenceRelation) -> BTreeMap<u64, u32> {
    let mut exps = rel.smooth_y.exponents.clone();
    if let Some(p) = rel.smooth_y.large_prime {
        *exps.entry(p).or_insert(0) += 1;
    }
    exps
}

/// Core of the normalization: given the x-side exponents alpha, the k and y
/// values and the y-side exponents beta of an exact identity `X + kn = y`
/// (with `X = prod p^alpha`), multiply by `s = prod p^(alpha mod 2)`.
fn normalize_parts(
    alpha: &BTreeMap<u64, u32>,
    k: &BigUint,
    y: &BigUint,
    beta: &BTreeMap<u64, u32>,
    sources: Vec<usize>,
) -> NormalizedRelation {
    let mut s = BigUint::one();
    let mut x_prime = BigUint::one();
    for (&p, &e) in alpha {
        let parity = e % 2;
        if parity == 1 {
            s *= BigUint::from(p);
        }
        x_prime *= BigUint::from(p).pow((e + parity) / 2);
    }
    let mut v = beta.clone();
    for (&p, &e) in alpha {
        if e % 2 == 1 {
            *v.entry(p).or_insert(0) += 1;
        }
    }
    NormalizedRelation {
        multiplier: s.clone(),
        x_prime,
        k_prime: &s * k,
        y_prime: &s * y,
        exponents: v,
        sources,
    }
}

/// Normalizes a fully smooth relation by the odd-exponent multiplier.
pub fn normalize(
    rel: &CongruenceRelation,
    fb: &FactorBase,
) -> Result<NormalizedRelation, NormalizeError> {
    if let Some(p) = rel.smooth_x.large_prime.or(rel.smooth_y.large_prime) {
        return Err(NormalizeError::OutstandingLargePrime(p));
    }
    // Cutoff equal to the bound forbids large primes in x̄ here.
    let alpha = x_side_exponents(rel, fb, fb.bound)?;
    let beta = y_side_exponents(rel);
    let out = normalize_parts(&alpha, &rel.k, &rel.y, &beta, Vec::new());
    debug_assert!(out.verify(&rel.n));
    Ok(out)
}

/// Multiplies two relations sharing a large prime side by side:
/// `(Xa + ka n)(Xb + kb n) = ya yb` gives `Xa Xb + Kc n = ya yb` with
/// `Kc = Xa kb + Xb ka + ka kb n`; the shared prime ends up squared.
fn combine_pair(
    a: &CongruenceRelation,
    b: &CongruenceRelation,
    fb: &FactorBase,
    cutoff: u64,
    sources: Vec<usize>,
) -> Result<NormalizedRelation, NormalizeError> {
    let xa = &a.xbar * &a.x;
    let xb = &b.xbar * &b.x;
    let mut alpha = x_side_exponents(a, fb, cutoff)?;
    add_exponents(&mut alpha, &x_side_exponents(b, fb, cutoff)?);
    let mut beta = y_side_exponents(a);
    add_exponents(&mut beta, &y_side_exponents(b));
    let k_c = &xa * &b.k + &xb * &a.k + &a.k * &b.k * &a.n;
    let y_c = &a.y * &b.y;
    let out = normalize_parts(&alpha, &k_c, &y_c, &beta, sources);
    debug_assert!(out.verify(&a.n));
    Ok(out)
}

/// Incremental GF(2) elimination over bit-packed rows with combination
/// tracking; reports a dependency the moment rank stops growing.
struct Gf2Basis {
    words: usize,
    /// (reduced row, pivot column, combination over inserted row ids)
    rows: Vec<(Vec<u64>, usize, BTreeSet<usize>)>,
}

impl Gf2Basis {
    fn new(n_cols: usize) -> Self {
        Gf2Basis {
            words: n_cols.div_ceil(64).max(1),
            rows: Vec::new(),
        }
    }

    fn pack(&self, cols: impl Iterator<Item = usize>) -> Vec<u64> {
        let mut row = vec![0u64; self.words];
        for c in cols {
            row[c / 64] ^= 1 << (c % 64);
        }
        row
    }

    fn xor(into: &mut [u64], from: &[u64]) {
        for (a, b) in into.iter_mut().zip(from) {
            *a ^= b;
        }
    }

    fn leading(row: &[u64]) -> Option<usize> {
        for (w, &word) in row.iter().enumerate() {
            if word != 0 {
                return Some(w * 64 + word.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Inserts row `id`; returns the dependency (ids XOR-ing to zero,
    /// including `id` itself) if the row is linearly dependent.
    fn add(&mut self, id: usize, cols: impl Iterator<Item = usize>) -> Option<BTreeSet<usize>> {
        let mut row = self.pack(cols);
        let mut combo = BTreeSet::from([id]);
        loop {
            let Some(pivot) = Self::leading(&row) else {
                return Some(combo);
            };
            match self.rows.iter().find(|(_, p, _)| *p == pivot) {
                Some((basis_row, _, basis_combo)) => {
                    let basis_row = basis_row.clone();
                    let basis_combo = basis_combo.clone();
                    Self::xor(&mut row, &basis_row);
                    combo = &combo ^ &basis_combo;
                }
                None => {
                    self.rows.push((row, pivot, combo));
                    return None;
                }
            }
        }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreError {
    WrongModulus,
    InvalidRelation,
    OddRoughPrime(u64),
    Parse { line: usize, message: String },
}

impl fmt::Display for StoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreError::WrongModulus => write!(f, "relation belongs to a different n"),
            StoreError::InvalidRelation => write!(f, "relation failed exact verification"),
            StoreError::OddRoughPrime(p) => {
                write!(f, "prime {p} outside the factor base has odd exponent")
            }
            StoreError::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl std::error::Error for StoreError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AddOutcome {
    /// Became a normalized row (and possibly completed a large-prime pair).
    Full {
        new_rows: usize,
        dependency_ready: bool,
    },
    /// Parked until a partner with the same large prime arrives.
    Partial { large_prime: u64 },
    /// Same (x̄, x, k) seen before.
    Duplicate,
}

/// The coordinator's relation state: raw relations, the large-prime pool,
/// normalized rows and the GF(2) elimination over their exponent vectors.
pub struct RelationStore {
    pub n: BigUint,
    pub fb: FactorBase,
    pub cutoff: u64,
    raws: Vec<CongruenceRelation>,
    fulls: Vec<NormalizedRelation>,
    partials: BTreeMap<u64, Vec<usize>>,
    basis: Gf2Basis,
    dependencies: VecDeque<Vec<usize>>,
    seen: BTreeSet<(BigUint, BigUint, BigUint)>,
}

impl RelationStore {
    pub fn new(n: BigUint, fb: FactorBase, cutoff: u64) -> Self {
        let cols = fb.size();
        RelationStore {
            n,
            fb,
            cutoff,
            raws: Vec::new(),
            fulls: Vec::new(),
            partials: BTreeMap::new(),
            basis: Gf2Basis::new(cols),
            dependencies: VecDeque::new(),
            seen: BTreeSet::new(),
        }
    }

    pub fn full_count(&self) -> usize {
        self.fulls.len()
    }

    pub fn partial_count(&self) -> usize {
        self.partials.values().map(Vec::len).sum()
    }

    pub fn raw_count(&self) -> usize {
        self.raws.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn fulls(&self) -> &[NormalizedRelation] {
        &self.fulls
    }

    pub fn raws(&self) -> &[CongruenceRelation] {
        &self.raws
    }

    /// Large primes waiting for a partner; the recycle strategy aims x̄ at
    /// these.
    pub fn pending_large_primes(&self) -> Vec<u64> {
        self.partials
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&p, _)| p)
            .collect()
    }

    /// Validates and files a relation. Fully smooth relations become rows
    /// immediately; single-large-prime relations wait in the pool and are
    /// combined in chain pairs as partners arrive.
    pub fn add_relation(&mut self, rel: CongruenceRelation) -> Result<AddOutcome, StoreError> {
        if rel.n != self.n {
            return Err(StoreError::WrongModulus);
        }
        if !rel.verify() {
            return Err(StoreError::InvalidRelation);
        }
        let key = (rel.xbar.clone(), rel.x.clone(), rel.k.clone());
        if !self.seen.insert(key) {
            return Ok(AddOutcome::Duplicate);
        }
        let raw_id = self.raws.len();
        let large: Vec<u64> = rel.large_primes();
        self.raws.push(rel);
        match large.as_slice() {
            [] => {
                let mut row = normalize(&self.raws[raw_id], &self.fb)
                    .map_err(|_| StoreError::InvalidRelation)?;
                row.sources = vec![raw_id];
                let dependency_ready = self.push_row(row)?;
                Ok(AddOutcome::Full {
                    new_rows: 1,
                    dependency_ready,
                })
            }
            [p] => {
                let p = *p;
                let waiting = self.partials.entry(p).or_default();
                waiting.push(raw_id);
                if waiting.len() >= 2 {
                    // Chain pairing: combine the two oldest.
                    let a = waiting.remove(0);
                    let b = waiting[0];
                    let row = combine_pair(
                        &self.raws[a],
                        &self.raws[b],
                        &self.fb,
                        self.cutoff,
                        vec![a, b],
                    )
                    .map_err(|_| StoreError::InvalidRelation)?;
                    let dependency_ready = self.push_row(row)?;
                    Ok(AddOutcome::Full {
                        new_rows: 1,
                        dependency_ready,
                    })
                } else {
                    Ok(AddOutcome::Partial { large_prime: p })
                }
            }
            more => Err(StoreError::OddRoughPrime(more[0])),
        }
    }

    fn push_row(&mut self, row: NormalizedRelation) -> Result<bool, StoreError> {
        // Columns: factor-base primes with odd exponent. Any odd exponent
        // outside the base would make the row unusable.
        let mut cols = Vec::new();
        for (&p, &e) in &row.exponents {
            if e % 2 == 1 {
                match self.fb.index_of(p) {
                    Some(i) => cols.push(i),
                    None => return Err(StoreError::OddRoughPrime(p)),
                }
            }
        }
        let id = self.fulls.len();
        self.fulls.push(row);
        if let Some(combo) = self.basis.add(id, cols.into_iter()) {
            self.dependencies.push_back(combo.into_iter().collect());
            return Ok(true);
        }
        Ok(false)
    }

    /// Next unused dependency, if the elimination has found one.
    pub fn find_dependency(&mut self) -> Option<Vec<usize>> {
        self.dependencies.pop_front()
    }

    /// Enough rows to guarantee a dependency regardless of luck.
    pub fn saturated(&self) -> bool {
        self.fulls.len() > self.fb.size()
    }

    /// Line-oriented text for resumable runs: `x̄ x k y p:e,p:e,...`.
    pub fn serialize(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# n {} b {} cutoff {}",
            self.n, self.fb.bound, self.cutoff
        );
        for rel in &self.raws {
            let mut exps: Vec<String> = rel
                .smooth_y
                .exponents
                .iter()
                .map(|(p, e)| format!("{p}:{e}"))
                .collect();
            if let Some(p) = rel.smooth_y.large_prime {
                exps.push(format!("{p}:1"));
            }
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                rel.xbar,
                rel.x,
                rel.k,
                rel.y,
                exps.join(",")
            );
        }
        s
    }

    /// Rebuilds a store from [`RelationStore::serialize`] output; every
    /// relation is revalidated and refiled (smoothness recomputed).
    pub fn deserialize(text: &str, fb: FactorBase) -> Result<RelationStore, StoreError> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => break (i, l),
                None => {
                    return Err(StoreError::Parse {
                        line: 0,
                        message: "empty store file".into(),
                    })
                }
            }
        };
        let fields: Vec<&str> = header.1.split_whitespace().collect();
        if fields.len() < 7 || fields[0] != "#" || fields[1] != "n" {
            return Err(StoreError::Parse {
                line: header.0 + 1,
                message: "expected `# n <n> b <b> cutoff <c>` header".into(),
            });
        }
        let n: BigUint = fields[2].parse().map_err(|_| StoreError::Parse {
            line: header.0 + 1,
            message: "bad n".into(),
        })?;
        let cutoff: u64 = fields[6].parse().map_err(|_| StoreError::Parse {
            line: header.0 + 1,
            message: "bad cutoff".into(),
        })?;
        let mut store = RelationStore::new(n.clone(), fb, cutoff);
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 4 {
                return Err(StoreError::Parse {
                    line: i + 1,
                    message: "expected `x̄ x k y [exponents]`".into(),
                });
            }
            let parse = |s: &str, what: &str| -> Result<BigUint, StoreError> {
                s.parse().map_err(|_| StoreError::Parse {
                    line: i + 1,
                    message: format!("bad {what}"),
                })
            };
            let xbar = parse(f[0], "x̄")?;
            let x = parse(f[1], "x")?;
            let k = parse(f[2], "k")?;
            let y = parse(f[3], "y")?;
            let smooth_x = match smooth_factorize(&x, &store.fb, store.cutoff) {
                SmoothOutcome::Smooth(s) => s,
                SmoothOutcome::Rejected { .. } => {
                    return Err(StoreError::Parse {
                        line: i + 1,
                        message: "x not smooth under this base".into(),
                    })
                }
            };
            let smooth_y = match smooth_factorize(&y, &store.fb, store.cutoff) {
                SmoothOutcome::Smooth(s) => s,
                SmoothOutcome::Rejected { .. } => {
                    return Err(StoreError::Parse {
                        line: i + 1,
                        message: "y not smooth under this base".into(),
                    })
                }
            };
            let rel = CongruenceRelation {
                n: n.clone(),
                xbar,
                x,
                k,
                y: y.clone(),
                y_splits: vec![y],
                smooth_x,
                smooth_y,
            };
            store.add_relation(rel).map_err(|e| StoreError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(store)
    }
}

/// `Y² − X² = K·n` with bookkeeping of the rows that built it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FermatRelation {
    pub x: BigUint,
    pub y: BigUint,
    pub k: BigInt,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FermatError {
    /// The selected y' product was not a perfect square; the store's
    /// elimination state is corrupt.
    NonSquareProduct,
    EmptySelection,
    BadIndex(usize),
}

impl fmt::Display for FermatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FermatError::NonSquareProduct => {
                write!(f, "selected product is not a perfect square")
            }
            FermatError::EmptySelection => write!(f, "empty dependency selection"),
            FermatError::BadIndex(i) => write!(f, "selection references missing row {i}"),
        }
    }
}

impl std::error::Error for FermatError {}

/// Multiplies the selected congruences side by side: `Y = sqrt(prod y')`
/// (exact by the even-exponent guarantee), `X = prod x' mod n`.
pub fn build_fermat(
    selection: &[usize],
    store: &RelationStore,
    n: &BigUint,
) -> Result<FermatRelation, FermatError> {
    if selection.is_empty() {
        return Err(FermatError::EmptySelection);
    }
    let mut y_product = BigUint::one();
    let mut x_acc = BigUint::one();
    for &i in selection {
        let row = store.fulls.get(i).ok_or(FermatError::BadIndex(i))?;
        y_product *= &row.y_prime;
        x_acc = (x_acc * &row.x_prime) % n;
    }
    let y = y_product.sqrt();
    if &y * &y != y_product {
        return Err(FermatError::NonSquareProduct);
    }
    let y_sq = BigInt::from(y_product);
    let x_sq = BigInt::from(&x_acc * &x_acc);
    let (k, rem) = (y_sq - x_sq).div_rem(&BigInt::from(n.clone()));
    debug_assert!(rem.is_zero(), "Y² − X² must be an exact multiple of n");
    if !rem.is_zero() {
        return Err(FermatError::NonSquareProduct);
    }
    Ok(FermatRelation {
        x: x_acc,
        y,
        k,
        selected: selection.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extraction {
    Factor(BigUint),
    /// gcd came out 1 or n; ask for another dependency.
    Trivial,
}

/// `gcd(Y − X, n)`; nontrivial with probability about 1/2 per independent
/// dependency.
pub fn extract_factor(n: &BigUint, fr: &FermatRelation) -> Extraction {
    let diff = (BigInt::from(fr.y.clone()) - BigInt::from(fr.x.clone()))
        .magnitude()
        .clone();
    let g = diff.gcd(n);
    if g > BigUint::one() && &g < n {
        Extraction::Factor(g)
    } else {
        Extraction::Trivial
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::build_factor_base;

    fn relation(
        n: u64,
        xbar: u64,
        x: u64,
        k: u64,
        fb: &FactorBase,
        cutoff: u64,
    ) -> CongruenceRelation {
        let y = xbar * x + k * n;
        let smooth_x = smooth_factorize(&BigUint::from(x), fb, cutoff)
            .into_smooth()
            .expect("x smooth");
        let smooth_y = smooth_factorize(&BigUint::from(y), fb, cutoff)
            .into_smooth()
            .expect("y smooth");
        CongruenceRelation {
            n: BigUint::from(n),
            xbar: BigUint::from(xbar),
            x: BigUint::from(x),
            k: BigUint::from(k),
            y: BigUint::from(y),
            y_splits: vec![BigUint::from(y)],
            smooth_x,
            smooth_y,
        }
    }

    #[test]
    fn normalize_worked_example_77() {
        // 4 + 77 = 81: alpha = {2:2} even, s = 1, x' = 2, y' = 81.
        let fb = build_factor_base(8);
        let rel = relation(77, 1, 4, 1, &fb, 8);
        let norm = normalize(&rel, &fb).unwrap();
        assert_eq!(norm.multiplier, BigUint::one());
        assert_eq!(norm.x_prime, BigUint::from(2u32));
        assert_eq!(norm.y_prime, BigUint::from(81u32));
        assert_eq!(norm.exponents, BTreeMap::from([(3, 4)]));
        assert!(norm.verify(&rel.n));
        assert!(norm.exponents.values().all(|e| e % 2 == 0));
    }

    #[test]
    fn normalize_odd_exponent_squares_the_x_side() {
        // 2 + 7 = 9: alpha = {2:1} odd -> s = 2, x' = 2, y' = 18.
        let fb = build_factor_base(8);
        let rel = relation(7, 1, 2, 1, &fb, 8);
        let norm = normalize(&rel, &fb).unwrap();
        assert_eq!(norm.multiplier, BigUint::from(2u32));
        assert_eq!(norm.x_prime, BigUint::from(2u32));
        assert_eq!(norm.y_prime, BigUint::from(18u32));
        assert_eq!(norm.k_prime, BigUint::from(2u32));
        assert!(norm.verify(&rel.n));
        // x = 1: s = 1, x' = 1.
        let rel = relation(7, 1, 1, 1, &fb, 8);
        let norm = normalize(&rel, &fb).unwrap();
        assert_eq!(norm.multiplier, BigUint::one());
        assert_eq!(norm.x_prime, BigUint::one());
    }

    #[test]
    fn normalize_refuses_large_prime() {
        let fb = build_factor_base(8);
        // 9 + 13 = 22 = 2 * 11 with 11 beyond the base but within cutoff.
        let rel = relation(13, 1, 9, 1, &fb, 32);
        assert!(rel.smooth_y.large_prime.is_some());
        assert!(matches!(
            normalize(&rel, &fb),
            Err(NormalizeError::OutstandingLargePrime(11))
        ));
    }

    #[test]
    fn combine_partials_on_shared_prime() {
        // n = 13: 9 + 13 = 22 = 2*11 and 20 + 13 = 33 = 3*11 share P = 11.
        let fb = build_factor_base(8);
        let mut store = RelationStore::new(BigUint::from(13u32), fb.clone(), 32);
        let out = store.add_relation(relation(13, 1, 9, 1, &fb, 32)).unwrap();
        assert_eq!(out, AddOutcome::Partial { large_prime: 11 });
        assert_eq!(store.pending_large_primes(), vec![11]);
        let out = store.add_relation(relation(13, 1, 20, 1, &fb, 32)).unwrap();
        assert!(matches!(out, AddOutcome::Full { new_rows: 1, .. }));
        let row = &store.fulls()[0];
        // Hand-derived: X = 180, Kc = 42 -> s = 5, x' = 30, y' = 3630.
        assert_eq!(row.multiplier, BigUint::from(5u32));
        assert_eq!(row.x_prime, BigUint::from(30u32));
        assert_eq!(row.y_prime, BigUint::from(3630u32));
        assert_eq!(row.exponents.get(&11), Some(&2));
        assert!(row.verify(&store.n));
    }

    #[test]
    fn three_partials_combine_as_chain_pairs() {
        // n = 13, P = 11: y values 22, 33, 55, 88.
        let fb = build_factor_base(8);
        let mut store = RelationStore::new(BigUint::from(13u32), fb.clone(), 32);
        store.add_relation(relation(13, 1, 9, 1, &fb, 32)).unwrap();
        store.add_relation(relation(13, 1, 20, 1, &fb, 32)).unwrap();
        store.add_relation(relation(13, 1, 42, 1, &fb, 32)).unwrap();
        // Chain pairs (1,2) and (2,3); the newest partial stays available.
        assert_eq!(store.full_count(), 2);
        assert_eq!(store.partial_count(), 1);
        assert_eq!(store.fulls()[0].sources, vec![0, 1]);
        assert_eq!(store.fulls()[1].sources, vec![1, 2]);
        store.add_relation(relation(13, 1, 75, 1, &fb, 32)).unwrap();
        assert_eq!(store.full_count(), 3);
        for row in store.fulls() {
            assert!(row.verify(&store.n));
        }
    }

    #[test]
    fn dependency_xor_of_three_rows() {
        let mut basis = Gf2Basis::new(2);
        assert!(basis.add(0, [0usize].into_iter()).is_none());
        assert!(basis.add(1, [1usize].into_iter()).is_none());
        let combo = basis.add(2, [0usize, 1].into_iter()).unwrap();
        assert_eq!(combo, BTreeSet::from([0, 1, 2]));
        // Two independent rows only: no dependency.
        let mut basis = Gf2Basis::new(2);
        assert!(basis.add(0, [0usize].into_iter()).is_none());
        assert!(basis.add(1, [1usize].into_iter()).is_none());
        assert_eq!(basis.rank(), 2);
    }

    #[test]
    fn all_even_row_is_instant_dependency() {
        let fb = build_factor_base(8);
        let mut store = RelationStore::new(BigUint::from(77u32), fb.clone(), 8);
        let out = store.add_relation(relation(77, 1, 4, 1, &fb, 8)).unwrap();
        assert_eq!(
            out,
            AddOutcome::Full {
                new_rows: 1,
                dependency_ready: true
            }
        );
        let dep = store.find_dependency().unwrap();
        assert_eq!(dep, vec![0]);
        assert!(store.find_dependency().is_none());
    }

    #[test]
    fn fermat_and_extraction_worked_examples() {
        let n77 = BigUint::from(77u32);
        let fb = build_factor_base(8);
        let mut store = RelationStore::new(n77.clone(), fb.clone(), 8);
        store.add_relation(relation(77, 1, 4, 1, &fb, 8)).unwrap();
        let dep = store.find_dependency().unwrap();
        let fr = build_fermat(&dep, &store, &n77).unwrap();
        assert_eq!(fr.x, BigUint::from(2u32));
        assert_eq!(fr.y, BigUint::from(9u32));
        assert_eq!(fr.k, BigInt::one());
        match extract_factor(&n77, &fr) {
            Extraction::Factor(f) => assert_eq!(f, BigUint::from(7u32)),
            Extraction::Trivial => panic!("gcd(9-2, 77) = 7"),
        }

        // n = 15 with 1 + 15 = 16: X = 1, Y = 4, gcd(3, 15) = 3.
        let n15 = BigUint::from(15u32);
        let mut store = RelationStore::new(n15.clone(), fb.clone(), 8);
        store.add_relation(relation(15, 1, 1, 1, &fb, 8)).unwrap();
        let dep = store.find_dependency().unwrap();
        let fr = build_fermat(&dep, &store, &n15).unwrap();
        assert_eq!(
            (fr.x.clone(), fr.y.clone()),
            (BigUint::one(), BigUint::from(4u32))
        );
        match extract_factor(&n15, &fr) {
            Extraction::Factor(f) => assert_eq!(f, BigUint::from(3u32)),
            Extraction::Trivial => panic!("gcd(3, 15) = 3"),
        }

        // n = 21 with X = 1, Y = 22: gcd(21, 21) = 21 -> trivial.
        let fr = FermatRelation {
            x: BigUint::one(),
            y: BigUint::from(22u32),
            k: BigInt::from(23),
            selected: vec![],
        };
        assert_eq!(
            extract_factor(&BigUint::from(21u32), &fr),
            Extraction::Trivial
        );
    }

    #[test]
    fn gcd_invariant_under_mod_n_reduction() {
        // gcd(Y - X, n) does not change when X is reduced modulo n.
        let n = BigUint::from(77u32);
        let x_big = BigUint::from(2u32 + 77 * 3);
        let x_red = BigUint::from(2u32);
        let y = BigUint::from(9u32);
        let g1 = (BigInt::from(y.clone()) - BigInt::from(x_big))
            .magnitude()
            .gcd(&n);
        let g2 = (BigInt::from(y) - BigInt::from(x_red)).magnitude().gcd(&n);
        assert_eq!(g1, g2);
    }

    #[test]
    fn store_serialization_round_trip() {
        let fb = build_factor_base(8);
        let mut store = RelationStore::new(BigUint::from(13u32), fb.clone(), 32);
        store.add_relation(relation(13, 1, 9, 1, &fb, 32)).unwrap();
        store.add_relation(relation(13, 1, 20, 1, &fb, 32)).unwrap();
        store.add_relation(relation(13, 1, 14, 1, &fb, 32)).unwrap(); // 27 = 3^3
        let text = store.serialize();
        let back = RelationStore::deserialize(&text, fb).unwrap();
        assert_eq!(back.raw_count(), store.raw_count());
        assert_eq!(back.full_count(), store.full_count());
        assert_eq!(back.partial_count(), store.partial_count());
        assert_eq!(back.n, store.n);
        for (a, b) in store.raws().iter().zip(back.raws()) {
            assert_eq!((&a.xbar, &a.x, &a.k, &a.y), (&b.xbar, &b.x, &b.k, &b.y));
        }
    }

    #[test]
    fn duplicates_are_ignored() {
        let fb = build_factor_base(8);
        let mut store = RelationStore::new(BigUint::from(77u32), fb.clone(), 8);
        store.add_relation(relation(77, 1, 4, 1, &fb, 8)).unwrap();
        let out = store.add_relation(relation(77, 1, 4, 1, &fb, 8)).unwrap();
        assert_eq!(out, AddOutcome::Duplicate);
        assert_eq!(store.full_count(), 1);
    }
}
