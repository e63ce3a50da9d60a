//! Conflict-avoiding in-place routing of explicit permutations, hypercube
//! bit-fixing machinery, randomized-routing congestion experiments, and the
//! cycle-hiding game.
//!
//! The routing algorithm turns `x` into `f(x)` on the main tape one
//! coordinate of the basis view `Qx` at a time, keeping only the short hash
//! `H f(x)` on the side. A pair `(Q, H)` works for `x` when no other input
//! collides with `x`'s hash and mixed prefix/suffix view at any step; such
//! pairs are found here by rejection sampling with exhaustive verification,
//! and the step oracle ("what is the next view bit?") is answered by
//! exhaustive preimage search. Both stand in for nondeterministic oracles at
//! desk scale.
//!
//! The cycle-hiding game runs on a scaled-down hypercube-times-capacity
//! graph: the hider pre-routes every start vertex to a random head and from a
//! random tail, re-routes whenever a query lands near an active endpoint, and
//! finishes by closing every head-tail pair through a random midpoint.

use crate::tape::SpaceLedger;
use serde::Serialize;
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("sequence entry {index} = {value} outside [0, {bound})")]
    OutOfRange {
        index: usize,
        value: u64,
        bound: u64,
    },
    #[error("no universally conflict-avoiding advice found within {trials} samples")]
    AdviceNotFound { trials: usize },
    #[error("step {step}: two consistent preimages disagree on the next view bit")]
    OracleAmbiguous { step: usize },
    #[error("table is not a permutation")]
    NotAPermutation,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Dense GF(2) matrix, each row a bit mask over at most 32 columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMat {
    pub rows: usize,
    pub cols: usize,
    pub row_masks: Vec<u32>,
}

impl BitMat {
    pub fn zero(rows: usize, cols: usize) -> BitMat {
        assert!(cols <= 32);
        BitMat {
            rows,
            cols,
            row_masks: vec![0; rows],
        }
    }

    pub fn identity(n: usize) -> BitMat {
        let mut m = BitMat::zero(n, n);
        for i in 0..n {
            m.row_masks[i] = 1 << i;
        }
        m
    }

    pub fn random<R: rand::Rng>(rows: usize, cols: usize, rng: &mut R) -> BitMat {
        let mask = if cols == 32 {
            u32::MAX
        } else {
            (1u32 << cols) - 1
        };
        BitMat {
            rows,
            cols,
            row_masks: (0..rows).map(|_| rng.random::<u32>() & mask).collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.row_masks[r] >> c & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        if v {
            self.row_masks[r] |= 1 << c;
        } else {
            self.row_masks[r] &= !(1 << c);
        }
    }

    /// `y = M x` over GF(2); bit `i` of the result is the parity of row `i`
    /// masked by `x`.
    pub fn mul_vec(&self, x: u32) -> u32 {
        let mut y = 0u32;
        for (i, &row) in self.row_masks.iter().enumerate() {
            y |= ((row & x).count_ones() & 1) << i;
        }
        y
    }

    pub fn col_mask(&self, c: usize) -> u32 {
        let mut m = 0u32;
        for (r, &row) in self.row_masks.iter().enumerate() {
            m |= (row >> c & 1) << r;
        }
        m
    }

    pub fn from_cols(rows: usize, cols: &[u32]) -> BitMat {
        let mut m = BitMat::zero(rows, cols.len());
        for (c, &mask) in cols.iter().enumerate() {
            for r in 0..rows {
                if mask >> r & 1 == 1 {
                    m.row_masks[r] |= 1 << c;
                }
            }
        }
        m
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.row_masks.clone();
        let mut rank = 0;
        for c in 0..self.cols {
            let Some(p) = (rank..rows.len()).find(|&r| rows[r] >> c & 1 == 1) else {
                continue;
            };
            rows.swap(rank, p);
            for r in 0..rows.len() {
                if r != rank && rows[r] >> c & 1 == 1 {
                    rows[r] ^= rows[rank];
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    pub fn inverse(&self) -> Option<BitMat> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut a = self.row_masks.clone();
        let mut inv: Vec<u32> = (0..n).map(|i| 1u32 << i).collect();
        for c in 0..n {
            let p = (c..n).find(|&r| a[r] >> c & 1 == 1)?;
            a.swap(c, p);
            inv.swap(c, p);
            for r in 0..n {
                if r != c && a[r] >> c & 1 == 1 {
                    a[r] ^= a[c];
                    inv[r] ^= inv[c];
                }
            }
        }
        Some(BitMat {
            rows: n,
            cols: n,
            row_masks: inv,
        })
    }
}

/// An explicit permutation table on `{0,1}^n`, `n <= 16`.
#[derive(Clone, Debug)]
pub struct PermTable {
    pub n: usize,
    table: Vec<u16>,
}

impl PermTable {
    pub fn new(n: usize, table: Vec<u16>) -> Result<PermTable, RouteError> {
        assert!(n <= 16);
        if table.len() != 1 << n {
            return Err(RouteError::NotAPermutation);
        }
        let mut seen = vec![false; 1 << n];
        for &y in &table {
            if (y as usize) >= 1 << n || std::mem::replace(&mut seen[y as usize], true) {
                return Err(RouteError::NotAPermutation);
            }
        }
        Ok(PermTable { n, table })
    }

    pub fn identity(n: usize) -> PermTable {
        PermTable {
            n,
            table: (0..1u32 << n).map(|x| x as u16).collect(),
        }
    }

    /// Reverses the bit order of the input.
    pub fn bit_reversal(n: usize) -> PermTable {
        let table = (0..1u32 << n)
            .map(|x| {
                let mut y = 0u16;
                for i in 0..n {
                    y |= ((x >> i & 1) as u16) << (n - 1 - i);
                }
                y
            })
            .collect();
        PermTable { n, table }
    }

    pub fn random<R: rand::Rng>(n: usize, rng: &mut R) -> PermTable {
        let mut table: Vec<u16> = (0..1u32 << n).map(|x| x as u16).collect();
        for i in (1..table.len()).rev() {
            table.swap(i, rng.random_range(0..=i));
        }
        PermTable { n, table }
    }

    pub fn apply(&self, x: u32) -> u32 {
        self.table[x as usize] as u32
    }
}

/// A change-of-basis / hash pair used by the router. `Q` is `n x n` and
/// invertible; `H` has `ceil(2 log2 n)` rows.
#[derive(Clone, Debug)]
pub struct RoutePair {
    pub q: BitMat,
    pub h: BitMat,
}

pub fn hash_rows(n: usize) -> usize {
    (2.0 * (n as f64).log2()).ceil() as usize
}

/// The conflict predicate: `x` and `x2` conflict under `(Q, H)` when their
/// images differ, their hashes agree, and at some cut `i` in `1..=n` the
/// first `i` coordinates of `Q f(.)` and the last `n - i` coordinates of
/// `Q .` both agree, so the router could not tell them apart mid-flight.
pub fn is_conflict(f: &PermTable, x: u32, x2: u32, pair: &RoutePair) -> bool {
    let n = f.n;
    let (fx, fx2) = (f.apply(x), f.apply(x2));
    if fx == fx2 {
        return false;
    }
    if pair.h.mul_vec(fx) != pair.h.mul_vec(fx2) {
        return false;
    }
    let (qfx, qfx2) = (pair.q.mul_vec(fx), pair.q.mul_vec(fx2));
    let (qx, qx2) = (pair.q.mul_vec(x), pair.q.mul_vec(x2));
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    for i in 1..=n {
        let prefix = if i == 32 { u32::MAX } else { (1u32 << i) - 1 };
        let suffix = full & !prefix;
        if (qfx ^ qfx2) & prefix == 0 && (qx ^ qx2) & suffix == 0 {
            return true;
        }
    }
    false
}

/// Exhaustive scan standing in for the coNP check: `(Q, H)` is
/// conflict-avoiding for `f` on `x` iff `Q` is invertible and no `x2`
/// conflicts with `x`.
pub fn is_conflict_avoiding(f: &PermTable, x: u32, pair: &RoutePair) -> bool {
    if !pair.q.is_invertible() {
        return false;
    }
    (0..1u32 << f.n).all(|x2| !is_conflict(f, x, x2, pair))
}

/// Rejection sampling with exhaustive verification: returns a list of pairs
/// such that every input has a conflict-avoiding pair in it. Never returns
/// an unverified list.
pub fn find_advice<R: rand::Rng>(
    f: &PermTable,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<RoutePair>, RouteError> {
    let n = f.n;
    let hm = hash_rows(n);
    let mut advice: Vec<RoutePair> = Vec::new();
    let mut uncovered: Vec<u32> = (0..1u32 << n).collect();
    for _ in 0..trials {
        if uncovered.is_empty() {
            break;
        }
        let seq = random_invertible_seq(n, rng);
        let q = encode_invertible(&seq, n).expect("in-range by construction");
        let h = BitMat::random(hm, n, rng);
        let pair = RoutePair { q, h };
        let before = uncovered.len();
        uncovered.retain(|&x| !is_conflict_avoiding(f, x, &pair));
        if uncovered.len() < before {
            advice.push(pair);
        }
    }
    if !uncovered.is_empty() {
        return Err(RouteError::AdviceNotFound { trials });
    }
    // final exhaustive verification of the whole list
    for x in 0..1u32 << n {
        if !advice.iter().any(|p| is_conflict_avoiding(f, x, p)) {
            return Err(RouteError::AdviceNotFound { trials });
        }
    }
    Ok(advice)
}

pub fn random_invertible_seq<R: rand::Rng>(n: usize, rng: &mut R) -> Vec<u64> {
    (0..n)
        .map(|i| rng.random_range(0..(1u64 << n) - (1u64 << i)))
        .collect()
}

/// The bijection between bounded integer sequences and invertible GF(2)
/// matrices, built one column at a time: entry `i` (in `[0, 2^n - 2^i)`)
/// picks the next column from outside the span of the previous ones, via a
/// deterministic basis completion `Q` and the offset coefficient vector
/// `a_i + 2^i` (whose high part is never zero).
pub fn encode_invertible(seq: &[u64], n: usize) -> Result<BitMat, RouteError> {
    assert!(n <= 16);
    if seq.len() != n {
        return Err(RouteError::Dimension(format!(
            "sequence {} != n {}",
            seq.len(),
            n
        )));
    }
    let mut cols: Vec<u32> = Vec::with_capacity(n);
    for (i, &a) in seq.iter().enumerate() {
        let bound = (1u64 << n) - (1u64 << i);
        if a >= bound {
            return Err(RouteError::OutOfRange {
                index: i,
                value: a,
                bound,
            });
        }
        let completion = complete_basis(&cols, n);
        let b = (a + (1u64 << i)) as u32;
        // column = sum of completion columns selected by the bits of b
        let mut col = 0u32;
        for (j, &coef_col) in completion.iter().enumerate() {
            if b >> j & 1 == 1 {
                col ^= coef_col;
            }
        }
        cols.push(col);
    }
    Ok(BitMat::from_cols(n, &cols))
}

/// Inverse of [`encode_invertible`].
pub fn decode_invertible(m: &BitMat) -> Result<Vec<u64>, RouteError> {
    let n = m.rows;
    if !m.is_invertible() {
        return Err(RouteError::NotAPermutation);
    }
    let mut cols: Vec<u32> = Vec::with_capacity(n);
    let mut seq = Vec::with_capacity(n);
    for i in 0..n {
        let completion = complete_basis(&cols, n);
        let q = BitMat::from_cols(n, &completion);
        let q_inv = q.inverse().expect("basis completion is invertible");
        let b = q_inv.mul_vec(m.col_mask(i));
        let a = (b as u64)
            .checked_sub(1u64 << i)
            .ok_or(RouteError::OutOfRange {
                index: i,
                value: b as u64,
                bound: 1 << i,
            })?;
        seq.push(a);
        cols.push(m.col_mask(i));
    }
    Ok(seq)
}

/// Extends the given independent columns to a basis by greedily appending
/// the first standard basis vector outside the current span.
fn complete_basis(cols: &[u32], n: usize) -> Vec<u32> {
    let mut basis = cols.to_vec();
    let mut echelon: Vec<u32> = Vec::new();
    let insert = |mut v: u32, echelon: &mut Vec<u32>| -> bool {
        for &r in echelon.iter() {
            let lead = r.trailing_zeros();
            if v >> lead & 1 == 1 {
                v ^= r;
            }
        }
        if v != 0 {
            echelon.push(v);
            echelon.sort_by_key(|r| r.trailing_zeros());
            true
        } else {
            false
        }
    };
    for &c in cols {
        insert(c, &mut echelon);
    }
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        if insert(1 << k, &mut echelon) {
            basis.push(1 << k);
        }
    }
    basis
}

/// Routes `x` to `f(x)` in-place on the main word, one basis coordinate at a
/// time, returning the trace of tape values `v_0 = x, ..., v_n = f(x)`.
///
/// The auxiliary state is the hash `H f(x)` plus loop counters. Each step
/// recovers the next view bit by exhaustive search over preimages consistent
/// with the tape and the hash; verified advice guarantees a unique answer.
pub fn route_inplace_traced(
    f: &PermTable,
    x: &mut u32,
    advice: &[RoutePair],
    ledger: &SpaceLedger,
) -> Result<Vec<u32>, RouteError> {
    let n = f.n;
    let pair = advice
        .iter()
        .find(|p| is_conflict_avoiding(f, *x, p))
        .ok_or(RouteError::AdviceNotFound {
            trials: advice.len(),
        })?;
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let q_inv = pair.q.inverse().expect("advice Q invertible");

    let hash = ledger.hold(pair.h.mul_vec(f.apply(*x)));
    let mut trace = Vec::with_capacity(n + 1);
    trace.push(*x);
    for i in 0..n {
        ledger.count_step();
        let qt = pair.q.mul_vec(*x);
        let y = qt >> i & 1;
        // oracle: over preimages consistent with (tape view, hash), what is
        // bit i of Q f(.)?
        let prefix = if i == 0 { 0 } else { (1u32 << i) - 1 };
        let suffix = full & !prefix;
        let mut candidates = [false, false];
        for x2 in 0..=full {
            ledger.count_oracle();
            let fx2 = f.apply(x2);
            if pair.h.mul_vec(fx2) != *hash {
                continue;
            }
            let qfx2 = pair.q.mul_vec(fx2);
            let qx2 = pair.q.mul_vec(x2);
            if (qfx2 ^ qt) & prefix == 0 && (qx2 ^ qt) & suffix == 0 {
                candidates[(qfx2 >> i & 1) as usize] = true;
            }
        }
        let z = match (candidates[0], candidates[1]) {
            (true, false) => 0,
            (false, true) => 1,
            _ => return Err(RouteError::OracleAmbiguous { step: i }),
        };
        if z != y {
            *x ^= q_inv.col_mask(i);
        }
        trace.push(*x);
    }
    debug_assert_eq!(*x, f.apply(trace[0]));
    Ok(trace)
}

pub fn route_inplace(
    f: &PermTable,
    x: &mut u32,
    advice: &[RoutePair],
    ledger: &SpaceLedger,
) -> Result<(), RouteError> {
    route_inplace_traced(f, x, advice, ledger).map(|_| ())
}

/// [`route_inplace`] on an explicit bit tape (coordinate `i+1` at bit `i`).
pub fn route_inplace_bits(
    f: &PermTable,
    tape: &mut crate::bits::Bits,
    advice: &[RoutePair],
    ledger: &SpaceLedger,
) -> Result<(), RouteError> {
    if tape.len() != f.n {
        return Err(RouteError::Dimension(format!(
            "tape {} != n {}",
            tape.len(),
            f.n
        )));
    }
    let mut x = tape.to_u64() as u32;
    route_inplace(f, &mut x, advice, ledger)?;
    *tape = crate::bits::Bits::from_u64(x as u64, f.n);
    Ok(())
}

/// The expected tape value after `i` routing steps, recomputed directly
/// from `(Q, x, f(x))`: the first `i` view coordinates come from `Q f(x)`,
/// the rest from `Q x`.
pub fn expected_view(pair: &RoutePair, x: u32, fx: u32, i: usize, n: usize) -> u32 {
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let prefix = if i == 0 { 0 } else { (1u32 << i) - 1 };
    let combined = (pair.q.mul_vec(fx) & prefix) | (pair.q.mul_vec(x) & full & !prefix);
    pair.q.inverse().expect("invertible").mul_vec(combined)
}

/// The bit-fixing path from `a` to `b`: flip disagreeing coordinates in
/// index order. Endpoints included; length is the Hamming distance plus one.
pub fn bit_fixing_path(a: u128, b: u128, d: usize) -> Vec<u128> {
    let mut path = Vec::with_capacity(((a ^ b).count_ones() + 1) as usize);
    let mut cur = a;
    path.push(cur);
    for i in 0..d {
        let bit = 1u128 << i;
        if (cur ^ b) & bit != 0 {
            cur ^= bit;
            path.push(cur);
        }
    }
    debug_assert_eq!(cur, b);
    path
}

/// One trial of randomized two-phase routing: each vertex `v` routes
/// `v -> r(v) -> f(v)` along bit-fixing paths for a fresh random `r`, and
/// the trial reports the maximum multiset multiplicity over all vertices.
pub fn valiant_congestion<R: rand::Rng>(f: &PermTable, trials: usize, rng: &mut R) -> Vec<u32> {
    let d = f.n;
    let size = 1usize << d;
    let mut maxima = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut mult = vec![0u32; size];
        for v in 0..size as u32 {
            let r: u32 = rng.random_range(0..size as u32);
            for &p in &bit_fixing_path(v as u128, r as u128, d) {
                mult[p as usize] += 1;
            }
            for &p in &bit_fixing_path(r as u128, f.apply(v) as u128, d) {
                mult[p as usize] += 1;
            }
        }
        maxima.push(mult.iter().copied().max().unwrap_or(0));
    }
    maxima
}

/// Scaled parameters for the cycle-hiding game. The cube has `d + pad`
/// dimensions with `2^d` start vertices; per-vertex capacity is
/// `d^capacity_exponent`, a query within `distance_threshold` of an active
/// head or tail triggers a re-route, and re-route paths must keep
/// `low_capacity` slots free at every vertex.
#[derive(Clone, Debug, Serialize)]
pub struct GameParams {
    pub d: usize,
    pub pad: usize,
    pub capacity_exponent: u32,
    pub query_budget: usize,
    pub distance_threshold: usize,
    pub low_capacity: u64,
}

impl GameParams {
    pub fn scaled(d: usize, capacity_exponent: u32, query_budget: usize) -> GameParams {
        let pad = 9 * d;
        GameParams {
            d,
            pad,
            capacity_exponent,
            query_budget,
            distance_threshold: (d + pad).div_ceil(10),
            low_capacity: (d as u64).pow(capacity_exponent / 2 + 1),
        }
    }

    pub fn dim(&self) -> usize {
        self.d + self.pad
    }

    pub fn capacity(&self) -> u64 {
        (self.d as u64).pow(self.capacity_exponent)
    }
}

pub type Config = (u128, u32);

/// What the hunter sees: the announced and revealed successor chains and the
/// designated start configurations.
pub struct GameView<'a> {
    pub dim: usize,
    pub successor: &'a HashMap<Config, Config>,
    pub starts: &'a [u128],
}

/// An adversary choosing the next (previously unqueried) configuration.
pub trait Hunter {
    fn next_query(&mut self, view: &GameView<'_>, rng: &mut rand_chacha::ChaCha12Rng) -> Config;
}

/// Queries uniformly random configurations.
pub struct RandomHunter;

impl Hunter for RandomHunter {
    fn next_query(&mut self, view: &GameView<'_>, rng: &mut rand_chacha::ChaCha12Rng) -> Config {
        use rand::Rng;
        let mask = (1u128 << view.dim) - 1;
        ((rng.random::<u128>()) & mask, rng.random_range(0..4u32))
    }
}

/// Walks along revealed successor chains, probing just past what it has
/// seen; this chases active heads and forces re-routes.
pub struct StalkerHunter {
    cursor: Option<Config>,
    start_idx: usize,
}

impl StalkerHunter {
    pub fn new() -> StalkerHunter {
        StalkerHunter {
            cursor: None,
            start_idx: 0,
        }
    }
}

impl Default for StalkerHunter {
    fn default() -> Self {
        Self::new()
    }
}

impl Hunter for StalkerHunter {
    fn next_query(&mut self, view: &GameView<'_>, _rng: &mut rand_chacha::ChaCha12Rng) -> Config {
        // follow the current chain to its revealed end, then query that end
        let mut cur = self.cursor.unwrap_or_else(|| {
            let s = view.starts[self.start_idx % view.starts.len()];
            self.start_idx += 1;
            (s, 0)
        });
        let mut steps = 0;
        while let Some(&next) = view.successor.get(&cur) {
            cur = next;
            steps += 1;
            if steps > 1 << 20 {
                break;
            }
        }
        self.cursor = None;
        cur
    }
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct GameReport {
    pub forfeited: bool,
    pub forfeit_reason: Option<String>,
    pub revealed_cycle_found: bool,
    pub queries_answered: usize,
    pub vertices_ruined: usize,
    pub reroutes: usize,
    pub completion_failures: usize,
    pub cycles_verified: usize,
    pub cycles_missing_unqueried_vertex: usize,
    pub peak_capacity_used: u64,
}

impl GameReport {
    /// The hider's win condition at desk scale: never forfeited, no cycle
    /// revealed during live play, and every start vertex completed onto its
    /// own cycle holding an unqueried vertex.
    pub fn hider_won(&self, starts: usize) -> bool {
        !self.forfeited
            && !self.revealed_cycle_found
            && self.completion_failures == 0
            && self.cycles_verified == starts
            && self.cycles_missing_unqueried_vertex == 0
    }
}

struct StartState {
    start: u128,
    /// Chain end: the config whose successor is not yet defined.
    head: Config,
    /// Chain origin of the tail path: the config with no predecessor.
    tail: Config,
    completed: bool,
}

struct GameState {
    params: GameParams,
    slots_used: HashMap<u128, u64>,
    peak_used: u64,
    successor: HashMap<Config, Config>,
    has_pred: HashSet<Config>,
    ruined: HashSet<u128>,
    queried_vertices: HashSet<u128>,
    starts: Vec<StartState>,
    report: GameReport,
}

impl GameState {
    fn remaining(&self, v: u128) -> u64 {
        if self.ruined.contains(&v) {
            return 0;
        }
        self.params.capacity() - self.used(v)
    }

    fn used(&self, v: u128) -> u64 {
        // slot 0 of every vertex is reserved for its start configuration
        *self.slots_used.get(&v).unwrap_or(&1)
    }

    fn take_slot(&mut self, v: u128) -> u32 {
        let used = self.used(v);
        self.slots_used.insert(v, used + 1);
        self.peak_used = self.peak_used.max(used + 1);
        used as u32
    }

    /// Reveals a successor chain along `path`, starting at the existing
    /// config `from` and ending at `to` if given (otherwise at a fresh slot
    /// of the path's last vertex). Returns the final config.
    fn reveal_chain(&mut self, from: Config, path: &[u128], to: Option<Config>) -> Config {
        debug_assert_eq!(from.0, path[0]);
        let mut cur = from;
        for (idx, &v) in path.iter().enumerate().skip(1) {
            let target = if idx == path.len() - 1 {
                match to {
                    Some(t) => {
                        debug_assert_eq!(t.0, v);
                        t
                    }
                    None => (v, self.take_slot(v)),
                }
            } else {
                (v, self.take_slot(v))
            };
            let prev = self.successor.insert(cur, target);
            debug_assert!(prev.is_none(), "successor already defined");
            let fresh = self.has_pred.insert(target);
            debug_assert!(fresh, "two configurations share a successor");
            cur = target;
        }
        if path.len() == 1 {
            if let Some(t) = to {
                let prev = self.successor.insert(cur, t);
                debug_assert!(prev.is_none());
                let fresh = self.has_pred.insert(t);
                debug_assert!(fresh);
                return t;
            }
        }
        cur
    }

    fn path_capacity_ok(&self, path: &[u128]) -> bool {
        // interior and endpoint vertices need headroom; the origin already
        // holds its config
        path.iter()
            .skip(1)
            .all(|&v| self.remaining(v) > self.params.low_capacity)
    }

    fn forfeit(&mut self, reason: String) {
        self.report.forfeited = true;
        self.report.forfeit_reason = Some(reason);
    }
}

/// Runs one seeded cycle-hiding game: initialization (heads and tails
/// announced), `query_budget` adversary rounds, endgame completion, and
/// verification of every start cycle.
pub fn cycle_hiding_game(
    params: GameParams,
    hunter: &mut dyn Hunter,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> GameReport {
    use rand::Rng;
    let dim = params.dim();
    assert!(dim <= 120, "hypercube dimension limited to 120");
    let mask = (1u128 << dim) - 1;
    let n_starts = 1usize << params.d;
    let mut st = GameState {
        params: params.clone(),
        slots_used: HashMap::new(),
        peak_used: 1,
        successor: HashMap::new(),
        has_pred: HashSet::new(),
        ruined: HashSet::new(),
        queried_vertices: HashSet::new(),
        starts: Vec::with_capacity(n_starts),
        report: GameReport::default(),
    };

    // initialization: forward path to a random head, backward path from a
    // random tail, all announced to the hunter
    for s in 0..n_starts as u128 {
        let h: u128 = rng.random::<u128>() & mask;
        let head = st.reveal_chain((s, 0), &bit_fixing_path(s, h, dim), None);
        let t: u128 = rng.random::<u128>() & mask;
        let tail_path = bit_fixing_path(t, s, dim);
        let tail = if tail_path.len() == 1 {
            // tail == start: the tail chain is empty and starts at the start
            (s, 0)
        } else {
            let tail_cfg = (t, st.take_slot(t));
            st.reveal_chain(tail_cfg, &tail_path, Some((s, 0)));
            tail_cfg
        };
        st.starts.push(StartState {
            start: s,
            head,
            tail,
            completed: false,
        });
    }

    // adversary rounds
    for _ in 0..params.query_budget {
        if st.report.forfeited {
            break;
        }
        let q = {
            let view = GameView {
                dim,
                successor: &st.successor,
                starts: &(0..n_starts as u128).collect::<Vec<_>>(),
            };
            hunter.next_query(&view, rng)
        };
        let qv = q.0 & mask;
        st.queried_vertices.insert(qv);
        st.report.queries_answered += 1;

        // active heads and tails near the query
        let near: Vec<(usize, bool)> = (0..st.starts.len())
            .flat_map(|i| {
                let mut hits = Vec::new();
                if (st.starts[i].head.0 ^ qv).count_ones() as usize <= params.distance_threshold {
                    hits.push((i, true));
                }
                if (st.starts[i].tail.0 ^ qv).count_ones() as usize <= params.distance_threshold {
                    hits.push((i, false));
                }
                hits
            })
            .collect();
        if near.len() >= 2 {
            st.forfeit(format!(
                "{} active endpoints within distance of a query",
                near.len()
            ));
            break;
        }
        if let Some(&(idx, is_head)) = near.first() {
            st.report.reroutes += 1;
            let fresh: u128 = rng.random::<u128>() & mask;
            if is_head {
                let old = st.starts[idx].head;
                let path = bit_fixing_path(old.0, fresh, dim);
                if !st.path_capacity_ok(&path) {
                    st.forfeit("re-route path through exhausted vertex".into());
                    break;
                }
                let new_head = st.reveal_chain(old, &path, None);
                st.starts[idx].head = new_head;
            } else {
                let old = st.starts[idx].tail;
                let path = bit_fixing_path(fresh, old.0, dim);
                // the new tail vertex and the interior vertices all take a
                // fresh slot; the old tail config already has its own
                let needs_slot = &path[..path.len() - 1];
                if needs_slot
                    .iter()
                    .any(|&v| st.remaining(v) <= params.low_capacity)
                {
                    st.forfeit("re-route path through exhausted vertex".into());
                    break;
                }
                if path.len() > 1 {
                    let new_tail = (fresh, st.take_slot(fresh));
                    st.reveal_chain(new_tail, &path, Some(old));
                    st.starts[idx].tail = new_tail;
                }
            }
        }

        // answer: a revealed successor if the exact config lies on a chain,
        // otherwise "no successor" and the vertex is ruined for future paths
        if !st.successor.contains_key(&q) {
            st.ruined.insert(qv);
            st.report.vertices_ruined += 1;
        }
    }

    // live-phase safety: the revealed relation must be acyclic
    st.report.revealed_cycle_found = has_cycle(&st.successor);

    if !st.report.forfeited {
        // endgame: close head -> random midpoint -> tail per start, retrying
        // unpaired starts with fresh midpoints
        for _round in 0..params.d.max(1) {
            for idx in 0..st.starts.len() {
                if st.starts[idx].completed {
                    continue;
                }
                let head = st.starts[idx].head;
                let tail = st.starts[idx].tail;
                let r: u128 = rng.random::<u128>() & mask;
                let p1 = bit_fixing_path(head.0, r, dim);
                let p2 = bit_fixing_path(r, tail.0, dim);
                let ruined_hit = p1.iter().chain(p2.iter()).any(|v| st.ruined.contains(v));
                if ruined_hit
                    || !st.path_capacity_ok(&p1)
                    || !st.path_capacity_ok(&p2[..p2.len().saturating_sub(1)])
                {
                    continue;
                }
                if head == tail {
                    // degenerate single-config cycle: close it directly
                    if p1.len() == 1 && p2.len() == 1 {
                        st.successor.insert(head, tail);
                        st.has_pred.insert(tail);
                        st.starts[idx].completed = true;
                        continue;
                    }
                }
                let mid = st.reveal_chain(head, &p1, None);
                st.reveal_chain(mid, &p2, Some(tail));
                st.starts[idx].completed = true;
            }
        }
        st.report.completion_failures = st.starts.iter().filter(|s| !s.completed).count();

        // verification: every start lies on its own cycle avoiding other
        // start configs and containing at least one unqueried vertex
        let start_set: HashSet<u128> = (0..n_starts as u128).collect();
        for idx in 0..st.starts.len() {
            if !st.starts[idx].completed {
                continue;
            }
            let origin = (st.starts[idx].start, 0u32);
            let mut cur = origin;
            let mut saw_unqueried = !st.queried_vertices.contains(&origin.0);
            let mut ok = true;
            let mut hops = 0usize;
            loop {
                let Some(&next) = st.successor.get(&cur) else {
                    ok = false;
                    break;
                };
                cur = next;
                hops += 1;
                if cur == origin {
                    break;
                }
                if cur.1 == 0 && start_set.contains(&cur.0) {
                    ok = false; // trespassing on another start's config
                    break;
                }
                if !st.queried_vertices.contains(&cur.0) {
                    saw_unqueried = true;
                }
                if hops > st.successor.len() + 1 {
                    ok = false;
                    break;
                }
            }
            if ok {
                st.report.cycles_verified += 1;
                if !saw_unqueried {
                    st.report.cycles_missing_unqueried_vertex += 1;
                }
            }
        }
    }
    st.report.peak_capacity_used = st.peak_used;
    st.report
}

fn has_cycle(successor: &HashMap<Config, Config>) -> bool {
    // colors: 0 unvisited, 1 on stack, 2 done
    let mut color: HashMap<Config, u8> = HashMap::new();
    for &start in successor.keys() {
        if color.get(&start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut path = vec![start];
        color.insert(start, 1);
        let mut cur = start;
        loop {
            match successor.get(&cur) {
                None => break,
                Some(&next) => match color.get(&next).copied().unwrap_or(0) {
                    1 => return true,
                    2 => break,
                    _ => {
                        color.insert(next, 1);
                        path.push(next);
                        cur = next;
                    }
                },
            }
        }
        for p in path {
            color.insert(p, 2);
        }
    }
    false
}
