//! In-place linear algebra on field-cell tapes.
//!
//! The core primitive replaces a vector `x` held on `n` tape cells with `Ux`
//! for an almost upper-triangular `U`, walking the coordinates top to bottom
//! and keeping exactly two field elements (`previous` and `current`) on the
//! side. A general square `A` is handled by simulating that walk on the
//! virtual matrix `U = Q^-1 A Q`, where `Q` is the Krylov-style basis from
//! [`compute_q`]: every read of `U` or of the virtual vector, and every
//! virtual write, is answered through the matrix oracles in [`crate::linalg`]
//! and turned into updates `w += (a - b) * Q_col(i)` of the real tape.
//!
//! Matrix-matrix product, transpose, and inversion are derived on top, the
//! last one borrowing an invertible matrix from a catalytic tape via
//! [`crate::mcomp::ensure_invertible`].
//!
//! Field-cell tapes store square matrices row-major.

use crate::gf::{FieldElem, FieldSpec};
use crate::linalg::{LinalgError, Mat};
use crate::mcomp::{self, McompError};
use crate::tape::SpaceLedger;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IplaError {
    #[error("entry ({row},{col}) violates the almost upper-triangular shape")]
    ShapeViolation { row: usize, col: usize },
    #[error("index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mcomp(#[from] McompError),
}

/// Which side of the tape matrix a read-only operand multiplies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Tape `B` becomes `A * B`.
    Left,
    /// Tape `B` becomes `B * A`.
    Right,
}

/// A square matrix checked to satisfy: every nonzero entry sits on or above
/// the diagonal, or on the first subdiagonal (`row <= col + 1`).
pub struct AlmostUpperTriangular(Mat);

impl AlmostUpperTriangular {
    pub fn new(m: Mat) -> Result<Self, IplaError> {
        if m.rows() != m.cols() {
            return Err(IplaError::Dimension(format!("{}x{}", m.rows(), m.cols())));
        }
        for row in 0..m.rows() {
            for col in 0..m.cols() {
                if row > col + 1 && !m.get(row, col).is_zero() {
                    return Err(IplaError::ShapeViolation { row, col });
                }
            }
        }
        Ok(AlmostUpperTriangular(m))
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }
}

/// The shared coordinate walk: row `i` of the product only needs `x_i` (saved
/// in `current`), `x_{i-1}` (saved in `previous`), and the untouched cells
/// `x_j` for `j > i`, so each cell can be overwritten in order.
///
/// `read_u(i, j)` is only ever invoked with `j + 1 >= i`.
fn almost_upper_walk(
    n: usize,
    spec: &FieldSpec,
    ledger: &SpaceLedger,
    read_u: &mut dyn FnMut(usize, usize) -> FieldElem,
    read_v: &mut dyn FnMut(usize) -> FieldElem,
    write_v: &mut dyn FnMut(usize, FieldElem),
    mut on_outer: Option<&mut dyn FnMut(usize)>,
) {
    let mut previous = ledger.hold(spec.zero());
    let mut current = ledger.hold(spec.zero());
    for i in 0..n {
        if let Some(cb) = on_outer.as_deref_mut() {
            cb(i);
        }
        ledger.count_step();
        *current = read_v(i);
        // v_i <- U[i,i] * x_i, then the strictly-upper terms, then the
        // subdiagonal term from the previous (already overwritten) cell.
        let mut acc = spec.mul(&read_u(i, i), &current);
        for j in i + 1..n {
            acc = spec.add(&acc, &spec.mul(&read_u(i, j), &read_v(j)));
        }
        if i > 0 {
            acc = spec.add(&acc, &spec.mul(&read_u(i, i - 1), &previous));
        }
        write_v(i, acc);
        *previous = current.clone();
    }
}

/// Replaces the `n` tape cells with `U * v` in-place.
pub fn mul_almost_upper_inplace(
    u: &AlmostUpperTriangular,
    v: &mut [FieldElem],
    ledger: &SpaceLedger,
) -> Result<(), IplaError> {
    let m = u.as_mat();
    let n = m.rows();
    if v.len() != n {
        return Err(IplaError::Dimension(format!("tape {} != n {}", v.len(), n)));
    }
    let spec = m.spec().clone();

    #[cfg(debug_assertions)]
    let (x0, ux) = {
        let x0 = v.to_vec();
        let ux = m.matvec(&x0).expect("square");
        (x0, ux)
    };

    let cells = std::cell::RefCell::new(v);
    almost_upper_walk(
        n,
        &spec,
        ledger,
        &mut |i, j| m.get(i, j).clone(),
        &mut |i| cells.borrow()[i].clone(),
        &mut |i, val| cells.borrow_mut()[i] = val,
        Some(&mut |i| {
            #[cfg(debug_assertions)]
            {
                let v = cells.borrow();
                debug_assert!(
                    v[..i].iter().eq(ux[..i].iter()),
                    "prefix is not (Ux)[..{i}]"
                );
                debug_assert!(v[i..].iter().eq(x0[i..].iter()), "suffix is not x[{i}..]");
            }
            #[cfg(not(debug_assertions))]
            let _ = i;
        }),
    );
    Ok(())
}

/// The change-of-basis `Q` whose columns are `A^j e_i`, appended greedily
/// while independent: for each standard basis vector in turn, keep applying
/// `A` until the next power falls into the span of what was collected.
/// `Q^-1 A Q` is almost upper-triangular by construction.
pub fn compute_q(a: &Mat) -> Mat {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let spec = a.spec();
    let mut cols: Vec<Vec<FieldElem>> = Vec::with_capacity(n);
    // Row-echelon copies of the collected columns, for the span test.
    let mut echelon: Vec<Vec<FieldElem>> = Vec::new();
    for i in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v: Vec<FieldElem> = (0..n)
            .map(|r| if r == i { spec.one() } else { spec.zero() })
            .collect();
        while !reduce_to_zero(spec, &echelon, &v) {
            cols.push(v.clone());
            add_to_echelon(spec, &mut echelon, v.clone());
            v = a.matvec(&v).expect("square");
        }
    }
    debug_assert_eq!(cols.len(), n, "the greedy process always completes a basis");
    Mat::from_cols(spec, &cols)
}

/// True when `v` lies in the span of the echelon rows.
fn reduce_to_zero(spec: &FieldSpec, echelon: &[Vec<FieldElem>], v: &[FieldElem]) -> bool {
    let mut v = v.to_vec();
    for row in echelon {
        let lead = row
            .iter()
            .position(|e| !e.is_zero())
            .expect("echelon rows nonzero");
        if !v[lead].is_zero() {
            let factor = spec.mul(&v[lead], &spec.inv(&row[lead]).expect("lead nonzero"));
            for (x, r) in v.iter_mut().zip(row) {
                *x = spec.sub(x, &spec.mul(&factor, r));
            }
        }
    }
    v.iter().all(|e| e.is_zero())
}

fn add_to_echelon(spec: &FieldSpec, echelon: &mut Vec<Vec<FieldElem>>, mut v: Vec<FieldElem>) {
    for row in echelon.iter() {
        let lead = row
            .iter()
            .position(|e| !e.is_zero())
            .expect("echelon rows nonzero");
        if !v[lead].is_zero() {
            let factor = spec.mul(&v[lead], &spec.inv(&row[lead]).expect("lead nonzero"));
            for (x, r) in v.iter_mut().zip(row) {
                *x = spec.sub(x, &spec.mul(&factor, r));
            }
        }
    }
    debug_assert!(v.iter().any(|e| !e.is_zero()));
    echelon.push(v);
}

/// Column `k` (0-indexed) of [`compute_q`]'s output, recovered from rank
/// queries alone: with `r_i` the rank of the Krylov block whose columns are
/// `A^j e_{i'}` for `i' <= i`, the column appended `k+1`-th came from the
/// largest `i` with `r_{i-1} <= k`, at power `k - r_{i-1}`.
pub fn column_of_q(a: &Mat, k: usize) -> Result<Vec<FieldElem>, IplaError> {
    let n = a.rows();
    if k >= n {
        return Err(IplaError::IndexOutOfRange { index: k, n });
    }
    let spec = a.spec();
    // r[i] for i = 0..=n, r[0] = 0.
    let mut ranks = vec![0usize; n + 1];
    for i in 1..=n {
        let mut cols: Vec<Vec<FieldElem>> = Vec::with_capacity(i * n);
        for i2 in 0..i {
            let mut v: Vec<FieldElem> = (0..n)
                .map(|r| if r == i2 { spec.one() } else { spec.zero() })
                .collect();
            for _ in 0..n {
                cols.push(v.clone());
                v = a.matvec(&v).expect("square");
            }
        }
        ranks[i] = Mat::from_cols(spec, &cols).rank();
    }
    // largest i (1-indexed basis vector) with r_{i-1} <= k
    let i = (1..=n)
        .rev()
        .find(|&i| ranks[i - 1] <= k)
        .expect("r_0 = 0 <= k");
    let power = k - ranks[i - 1];
    let mut v: Vec<FieldElem> = (0..n)
        .map(|r| if r == i - 1 { spec.one() } else { spec.zero() })
        .collect();
    for _ in 0..power {
        v = a.matvec(&v).expect("square");
    }
    Ok(v)
}

/// Oracle state for the basis-change simulation. `Q` and its inverse are
/// computed once per call; in strict mode every `U` entry read recomputes the
/// needed column of `Q` from rank queries instead of using the cache.
struct BasisOracle<'a> {
    a: &'a Mat,
    q: Mat,
    q_inv: Mat,
    u_cache: Option<Mat>,
    strict: bool,
}

impl<'a> BasisOracle<'a> {
    fn new(a: &'a Mat, strict: bool) -> Result<Self, IplaError> {
        let q = compute_q(a);
        let q_inv = q.inverse()?;
        let u_cache = if strict {
            None
        } else {
            Some(q_inv.mul(a)?.mul(&q)?)
        };
        Ok(BasisOracle {
            a,
            q,
            q_inv,
            u_cache,
            strict,
        })
    }

    fn u_entry(&self, i: usize, j: usize, ledger: &SpaceLedger) -> FieldElem {
        ledger.count_oracle();
        if let Some(u) = &self.u_cache {
            return u.get(i, j).clone();
        }
        debug_assert!(self.strict);
        let spec = self.a.spec();
        let col = column_of_q(self.a, j).expect("j < n");
        let acol = self.a.matvec(&col).expect("square");
        let mut acc = spec.zero();
        for (t, e) in acol.iter().enumerate() {
            acc = spec.add(&acc, &spec.mul(self.q_inv.get(i, t), e));
        }
        acc
    }

    fn v_read(&self, w: &dyn Fn(usize) -> FieldElem, i: usize, ledger: &SpaceLedger) -> FieldElem {
        ledger.count_oracle();
        let spec = self.a.spec();
        let n = self.a.rows();
        let mut acc = spec.zero();
        for t in 0..n {
            acc = spec.add(&acc, &spec.mul(self.q_inv.get(i, t), &w(t)));
        }
        acc
    }
}

/// Replaces the `n`-cell tape `x` with `A x` in-place through the basis
/// oracle. Auxiliary space stays at a handful of field cells regardless of
/// `n`; the real tape is only changed by rank-one updates along columns of
/// `Q`.
pub fn matvec_inplace(
    a: &Mat,
    x: &mut [FieldElem],
    strict: bool,
    ledger: &SpaceLedger,
) -> Result<(), IplaError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(IplaError::Dimension(format!("{}x{}", a.rows(), a.cols())));
    }
    if x.len() != n {
        return Err(IplaError::Dimension(format!("tape {} != n {}", x.len(), n)));
    }
    let idx: Vec<usize> = (0..n).collect();
    matvec_inplace_on(a, x, &idx, strict, ledger)
}

/// As [`matvec_inplace`] but on a strided view: logical cell `i` of the
/// vector lives at `cells[idx[i]]`.
fn matvec_inplace_on(
    a: &Mat,
    cells: &mut [FieldElem],
    idx: &[usize],
    strict: bool,
    ledger: &SpaceLedger,
) -> Result<(), IplaError> {
    let n = a.rows();
    debug_assert_eq!(idx.len(), n);
    let spec = a.spec().clone();
    let oracle = BasisOracle::new(a, strict)?;

    #[cfg(debug_assertions)]
    let (v0, uv) = {
        let x0: Vec<FieldElem> = idx.iter().map(|&p| cells[p].clone()).collect();
        let v0 = oracle.q_inv.matvec(&x0).expect("square");
        let u = oracle.q_inv.mul(a).expect("sq").mul(&oracle.q).expect("sq");
        let uv = u.matvec(&v0).expect("square");
        (v0, uv)
    };

    let cells = std::cell::RefCell::new(cells);
    let read_w = |t: usize| cells.borrow()[idx[t]].clone();
    almost_upper_walk(
        n,
        &spec,
        ledger,
        &mut |i, j| oracle.u_entry(i, j, ledger),
        &mut |i| oracle.v_read(&read_w, i, ledger),
        &mut |i, val| {
            // Writing `val` into virtual cell i means adding
            // (val - current_i) * Q_col(i) to the real tape.
            let before = ledger.hold(oracle.v_read(&read_w, i, ledger));
            let delta = ledger.hold(spec.sub(&val, &before));
            let mut w = cells.borrow_mut();
            for t in 0..n {
                let add = spec.mul(&delta, oracle.q.get(t, i));
                w[idx[t]] = spec.add(&w[idx[t]], &add);
            }
        },
        Some(&mut |i| {
            #[cfg(debug_assertions)]
            {
                let w: Vec<FieldElem> = idx.iter().map(|&p| cells.borrow()[p].clone()).collect();
                let v = oracle.q_inv.matvec(&w).expect("square");
                debug_assert!(
                    v[..i].iter().eq(uv[..i].iter()),
                    "virtual prefix mismatch at {i}"
                );
                debug_assert!(
                    v[i..].iter().eq(v0[i..].iter()),
                    "virtual suffix mismatch at {i}"
                );
            }
            #[cfg(not(debug_assertions))]
            let _ = i;
        }),
    );
    Ok(())
}

/// Transposes the `n*n` row-major tape by swapping symmetric cell pairs with
/// the three-pass add/subtract exchange (no temporary cell).
pub fn transpose_inplace(
    cells: &mut [FieldElem],
    n: usize,
    spec: &FieldSpec,
    ledger: &SpaceLedger,
) {
    assert_eq!(cells.len(), n * n);
    for i in 0..n {
        for j in i + 1..n {
            ledger.count_step();
            swap_cells(cells, i * n + j, j * n + i, spec);
        }
    }
}

/// Exchange two cells in three add/subtract passes, the field version of the
/// XOR swap: a <- a+b; b <- a-b; a <- a-b.
fn swap_cells(cells: &mut [FieldElem], a: usize, b: usize, spec: &FieldSpec) {
    cells[a] = spec.add(&cells[a], &cells[b]);
    cells[b] = spec.sub(&cells[a], &cells[b]);
    cells[a] = spec.sub(&cells[a], &cells[b]);
}

/// Exchange two equal-length disjoint cell ranges with three add/subtract
/// passes.
pub fn swap_cell_ranges(cells: &mut [FieldElem], a: usize, b: usize, len: usize, spec: &FieldSpec) {
    assert!(a + len <= b || b + len <= a, "ranges overlap");
    for i in 0..len {
        swap_cells(cells, a + i, b + i, spec);
    }
}

/// Replaces the `n*n` row-major tape `B` with `A*B` (left) or `B*A` (right).
///
/// Left multiplication runs the in-place matvec down each column of `B`;
/// right multiplication transposes in-place, left-multiplies by `A^T`, and
/// transposes back.
pub fn matmat_inplace(
    a: &Mat,
    b_cells: &mut [FieldElem],
    side: Side,
    strict: bool,
    ledger: &SpaceLedger,
) -> Result<(), IplaError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(IplaError::Dimension(format!("{}x{}", a.rows(), a.cols())));
    }
    if b_cells.len() != n * n {
        return Err(IplaError::Dimension(format!(
            "tape {} != n^2 {}",
            b_cells.len(),
            n * n
        )));
    }
    match side {
        Side::Left => {
            for col in 0..n {
                let idx: Vec<usize> = (0..n).map(|r| r * n + col).collect();
                matvec_inplace_on(a, b_cells, &idx, strict, ledger)?;
            }
            Ok(())
        }
        Side::Right => {
            let spec = a.spec().clone();
            transpose_inplace(b_cells, n, &spec, ledger);
            let at = a.transpose();
            matmat_inplace(&at, b_cells, Side::Left, strict, ledger)?;
            transpose_inplace(b_cells, n, &spec, ledger);
            Ok(())
        }
    }
}

pub fn mat_from_cells(spec: &FieldSpec, n: usize, cells: &[FieldElem]) -> Mat {
    Mat::from_entries(spec, n, n, cells[..n * n].to_vec())
}

/// Replaces the `n*n` tape holding an invertible `A` with `A^-1`.
///
/// The catalytic tape provides an invertible companion `B` through
/// [`mcomp::ensure_invertible`]; the pipeline is then
/// `<A,B> -> <AB,B> -> <AB,A^-1> -> <B,A^-1> -> <A^-1,B>`, after which the
/// catalytic tape is restored exactly from the key. Singularity is detected
/// through the rank oracle before any cell is mutated.
pub fn invert_inplace(
    a_cells: &mut [FieldElem],
    catalytic: &mut [FieldElem],
    n: usize,
    spec: &FieldSpec,
    strict: bool,
    ledger: &SpaceLedger,
) -> Result<(), IplaError> {
    if a_cells.len() != n * n {
        return Err(IplaError::Dimension(format!(
            "tape {} != n^2 {}",
            a_cells.len(),
            n * n
        )));
    }
    let needed = mcomp::ensure_invertible_cells(n, spec);
    if catalytic.len() != needed {
        return Err(IplaError::Dimension(format!(
            "catalytic tape {} != required {needed}",
            catalytic.len()
        )));
    }
    ledger.count_oracle();
    if !mat_from_cells(spec, n, a_cells).is_invertible() {
        return Err(IplaError::Linalg(LinalgError::Singular));
    }

    let key = mcomp::ensure_invertible(catalytic, n, spec)?;
    // The block layout is column-major inside mcomp; transpose it into the
    // row-major convention used by the matmat tape ops.
    transpose_inplace(&mut catalytic[..n * n], n, spec, ledger);

    let b = mat_from_cells(spec, n, catalytic);
    matmat_inplace(&b, a_cells, Side::Right, strict, ledger)?; // A -> AB

    ledger.count_oracle();
    let ab_inv = mat_from_cells(spec, n, a_cells).inverse()?;
    matmat_inplace(
        &ab_inv,
        &mut catalytic[..n * n],
        Side::Right,
        strict,
        ledger,
    )?; // B -> A^-1

    let a_inv = mat_from_cells(spec, n, catalytic);
    matmat_inplace(&a_inv, a_cells, Side::Left, strict, ledger)?; // AB -> B

    // swap <B, A^-1> into <A^-1, B>
    for i in 0..n * n {
        swap_cells_across(a_cells, catalytic, i, spec);
    }

    transpose_inplace(&mut catalytic[..n * n], n, spec, ledger);
    mcomp::restore(catalytic, &key, n, spec)?;
    Ok(())
}

fn swap_cells_across(a: &mut [FieldElem], b: &mut [FieldElem], i: usize, spec: &FieldSpec) {
    a[i] = spec.add(&a[i], &b[i]);
    b[i] = spec.sub(&a[i], &b[i]);
    a[i] = spec.sub(&a[i], &b[i]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn gf(q: u64) -> FieldSpec {
        FieldSpec::from_order(q).unwrap()
    }

    #[test]
    fn worked_example_gf37() {
        let f = gf(37);
        let u = Mat::from_indices(&f, 3, 3, &[2, 1, 5, 0, 4, 2, 0, 0, 3]);
        let u = AlmostUpperTriangular::new(u).unwrap();
        let mut v = vec![
            f.elem_from_index(1),
            f.elem_from_index(4),
            f.elem_from_index(5),
        ];
        let ledger = SpaceLedger::new();
        mul_almost_upper_inplace(&u, &mut v, &ledger).unwrap();
        let got: Vec<u64> = v.iter().map(|e| f.index_of(e)).collect();
        assert_eq!(got, vec![31, 26, 15]);
        assert_eq!(ledger.peak_aux_cells(), 2);
    }

    #[test]
    fn almost_upper_identity() {
        let f = gf(5);
        let u = AlmostUpperTriangular::new(Mat::identity(&f, 4)).unwrap();
        let mut v: Vec<FieldElem> = (1..5).map(|i| f.elem_from_index(i)).collect();
        let expect = v.clone();
        let ledger = SpaceLedger::new();
        mul_almost_upper_inplace(&u, &mut v, &ledger).unwrap();
        assert_eq!(v, expect);
    }

    #[test]
    fn shape_violation_detected() {
        let f = gf(5);
        let mut m = Mat::zero(&f, 3, 3);
        m.set(2, 0, f.one());
        assert_eq!(
            AlmostUpperTriangular::new(m).err(),
            Some(IplaError::ShapeViolation { row: 2, col: 0 })
        );
    }

    fn random_almost_upper<R: rand::Rng>(f: &FieldSpec, n: usize, rng: &mut R) -> Mat {
        let mut m = Mat::zero(f, n, n);
        for i in 0..n {
            for j in 0..n {
                if i <= j + 1 {
                    m.set(i, j, f.random_elem(rng));
                }
            }
        }
        m
    }

    #[test]
    fn almost_upper_matches_oracle() {
        let f = gf(8);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..200 {
            let m = random_almost_upper(&f, 8, &mut rng);
            let x: Vec<FieldElem> = (0..8).map(|_| f.random_elem(&mut rng)).collect();
            let expect = m.matvec(&x).unwrap();
            let u = AlmostUpperTriangular::new(m).unwrap();
            let mut v = x.clone();
            let ledger = SpaceLedger::new();
            mul_almost_upper_inplace(&u, &mut v, &ledger).unwrap();
            assert_eq!(v, expect);
            assert_eq!(ledger.peak_aux_cells(), 2);
        }
    }

    #[test]
    fn compute_q_zero_matrix_is_identity() {
        let f = gf(5);
        let a = Mat::zero(&f, 4, 4);
        assert_eq!(compute_q(&a), Mat::identity(&f, 4));
    }

    #[test]
    fn compute_q_shift_matrix_hand_run() {
        // A e1 = e2, A e2 = e3, A e3 = 0 over GF(2): the greedy collection is
        // (e1, A e1, A^2 e1) = identity columns in that order.
        let f = gf(2);
        let a = Mat::from_indices(&f, 3, 3, &[0, 0, 0, 1, 0, 0, 0, 1, 0]);
        let q = compute_q(&a);
        assert_eq!(q, Mat::identity(&f, 3));
        // and the k=1 column from rank queries is A e1 = e2
        assert_eq!(
            column_of_q(&a, 1).unwrap(),
            vec![f.zero(), f.one(), f.zero()]
        );
    }

    #[test]
    fn compute_q_conjugation_is_almost_upper() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(37);
        for q in [5u64, 4, 2] {
            let f = gf(q);
            for _ in 0..1000 {
                let n = rand::Rng::random_range(&mut rng, 2..=6);
                let a = Mat::random(&f, n, n, &mut rng);
                let qm = compute_q(&a);
                assert!(qm.is_invertible());
                let u = qm.inverse().unwrap().mul(&a).unwrap().mul(&qm).unwrap();
                assert!(AlmostUpperTriangular::new(u).is_ok());
            }
        }
    }

    #[test]
    fn column_of_q_matches_compute_q() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(41);
        for q in [2u64, 4, 5] {
            let f = gf(q);
            for _ in 0..35 {
                let n = 5;
                let a = Mat::random(&f, n, n, &mut rng);
                let qm = compute_q(&a);
                for k in 0..n {
                    assert_eq!(column_of_q(&a, k).unwrap(), qm.col(k), "column {k}");
                }
            }
        }
        let f = gf(3);
        assert!(matches!(
            column_of_q(&Mat::zero(&f, 3, 3), 3),
            Err(IplaError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn matvec_identity_leaves_tape() {
        let f = gf(4);
        let a = Mat::identity(&f, 5);
        let mut x: Vec<FieldElem> = (0..5).map(|i| f.elem_from_index(i % 4)).collect();
        let expect = x.clone();
        let ledger = SpaceLedger::new();
        matvec_inplace(&a, &mut x, false, &ledger).unwrap();
        assert_eq!(x, expect);
    }

    #[test]
    fn matvec_matches_oracle_gf37() {
        let f = gf(37);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(43);
        for _ in 0..50 {
            let a = Mat::random(&f, 3, 3, &mut rng);
            let x = vec![
                f.elem_from_index(1),
                f.elem_from_index(4),
                f.elem_from_index(5),
            ];
            let expect = a.matvec(&x).unwrap();
            let mut tape = x.clone();
            let ledger = SpaceLedger::new();
            matvec_inplace(&a, &mut tape, false, &ledger).unwrap();
            assert_eq!(tape, expect);
        }
    }

    #[test]
    fn matvec_on_conjugated_worked_matrix() {
        // conjugate the worked 3x3 instance by random invertible matrices,
        // so the input is no longer triangular and the basis change earns
        // its keep; output must equal the naive product on x = (1, 4, 5)
        let f = gf(37);
        let u = Mat::from_indices(&f, 3, 3, &[2, 1, 5, 0, 4, 2, 0, 0, 3]);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(44);
        for _ in 0..50 {
            let p = Mat::random_invertible(&f, 3, &mut rng);
            let a = p.mul(&u).unwrap().mul(&p.inverse().unwrap()).unwrap();
            let x = vec![
                f.elem_from_index(1),
                f.elem_from_index(4),
                f.elem_from_index(5),
            ];
            let expect = a.matvec(&x).unwrap();
            let mut tape = x.clone();
            let ledger = SpaceLedger::new();
            matvec_inplace(&a, &mut tape, false, &ledger).unwrap();
            assert_eq!(tape, expect);
        }
    }

    #[test]
    fn matvec_strict_oracle_agrees() {
        let f = gf(4);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(47);
        for _ in 0..10 {
            let a = Mat::random(&f, 4, 4, &mut rng);
            let x: Vec<FieldElem> = (0..4).map(|_| f.random_elem(&mut rng)).collect();
            let expect = a.matvec(&x).unwrap();
            let mut tape = x.clone();
            let ledger = SpaceLedger::new();
            matvec_inplace(&a, &mut tape, true, &ledger).unwrap();
            assert_eq!(tape, expect);
        }
    }

    #[test]
    fn matvec_aux_cells_constant_in_n() {
        let f = gf(5);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(53);
        let mut peaks = Vec::new();
        for n in [2usize, 4, 6, 8] {
            let a = Mat::random(&f, n, n, &mut rng);
            let mut x: Vec<FieldElem> = (0..n).map(|_| f.random_elem(&mut rng)).collect();
            let ledger = SpaceLedger::new();
            matvec_inplace(&a, &mut x, false, &ledger).unwrap();
            peaks.push(ledger.peak_aux_cells());
        }
        assert!(
            peaks.windows(2).all(|w| w[0] == w[1]),
            "peaks vary with n: {peaks:?}"
        );
        assert!(peaks[0] <= 4);
    }

    #[test]
    fn matmat_both_sides_match_oracle() {
        let f = gf(9);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(59);
        for _ in 0..20 {
            let n = 5;
            let a = Mat::random(&f, n, n, &mut rng);
            let b = Mat::random(&f, n, n, &mut rng);
            let ledger = SpaceLedger::new();

            let mut cells = b.entries().to_vec();
            matmat_inplace(&a, &mut cells, Side::Left, false, &ledger).unwrap();
            assert_eq!(mat_from_cells(&f, n, &cells), a.mul(&b).unwrap());

            let mut cells = b.entries().to_vec();
            matmat_inplace(&a, &mut cells, Side::Right, false, &ledger).unwrap();
            assert_eq!(mat_from_cells(&f, n, &cells), b.mul(&a).unwrap());
        }
    }

    #[test]
    fn matmat_identity_cases() {
        let f = gf(4);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(61);
        let n = 4;
        let a = Mat::random(&f, n, n, &mut rng);
        let ledger = SpaceLedger::new();

        let b = Mat::random(&f, n, n, &mut rng);
        let mut cells = b.entries().to_vec();
        matmat_inplace(
            &Mat::identity(&f, n),
            &mut cells,
            Side::Left,
            false,
            &ledger,
        )
        .unwrap();
        assert_eq!(mat_from_cells(&f, n, &cells), b);

        let mut cells = Mat::identity(&f, n).entries().to_vec();
        matmat_inplace(&a, &mut cells, Side::Left, false, &ledger).unwrap();
        assert_eq!(mat_from_cells(&f, n, &cells), a);
    }

    #[test]
    fn transpose_inplace_props() {
        let f = gf(5);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(67);
        let ledger = SpaceLedger::new();
        for n in [1usize, 3, 6] {
            let m = Mat::random(&f, n, n, &mut rng);
            let mut cells = m.entries().to_vec();
            transpose_inplace(&mut cells, n, &f, &ledger);
            assert_eq!(mat_from_cells(&f, n, &cells), m.transpose());
            transpose_inplace(&mut cells, n, &f, &ledger);
            assert_eq!(mat_from_cells(&f, n, &cells), m);
        }
        // symmetric matrix unchanged
        let mut m = Mat::zero(&f, 3, 3);
        m.set(0, 1, f.elem_from_index(2));
        m.set(1, 0, f.elem_from_index(2));
        m.set(2, 2, f.elem_from_index(4));
        let mut cells = m.entries().to_vec();
        transpose_inplace(&mut cells, 3, &f, &ledger);
        assert_eq!(mat_from_cells(&f, 3, &cells), m);
    }

    #[test]
    fn invert_inplace_identity_and_diagonal() {
        let f = gf(5);
        let ledger = SpaceLedger::new();
        let n = 2;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(71);

        let mut a_cells = Mat::identity(&f, n).entries().to_vec();
        let mut cat: Vec<FieldElem> = (0..mcomp::ensure_invertible_cells(n, &f))
            .map(|_| f.random_elem(&mut rng))
            .collect();
        let cat0 = cat.clone();
        invert_inplace(&mut a_cells, &mut cat, n, &f, false, &ledger).unwrap();
        assert_eq!(mat_from_cells(&f, n, &a_cells), Mat::identity(&f, n));
        assert_eq!(cat, cat0);

        let d = Mat::from_indices(&f, 2, 2, &[2, 0, 0, 3]);
        let mut a_cells = d.entries().to_vec();
        let mut cat: Vec<FieldElem> = (0..mcomp::ensure_invertible_cells(n, &f))
            .map(|_| f.random_elem(&mut rng))
            .collect();
        let cat0 = cat.clone();
        invert_inplace(&mut a_cells, &mut cat, n, &f, false, &ledger).unwrap();
        assert_eq!(
            mat_from_cells(&f, n, &a_cells),
            Mat::from_indices(&f, 2, 2, &[3, 0, 0, 2])
        );
        assert_eq!(cat, cat0);
    }

    #[test]
    fn invert_inplace_random_gf4() {
        let f = gf(4);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(73);
        let n = 4;
        let ledger = SpaceLedger::new();
        for _ in 0..25 {
            let a = Mat::random_invertible(&f, n, &mut rng);
            let mut a_cells = a.entries().to_vec();
            let mut cat: Vec<FieldElem> = (0..mcomp::ensure_invertible_cells(n, &f))
                .map(|_| f.random_elem(&mut rng))
                .collect();
            let cat0 = cat.clone();
            invert_inplace(&mut a_cells, &mut cat, n, &f, false, &ledger).unwrap();
            let got = mat_from_cells(&f, n, &a_cells);
            assert_eq!(a.mul(&got).unwrap(), Mat::identity(&f, n));
            assert_eq!(cat, cat0, "catalytic tape not restored");
        }
    }

    #[test]
    fn invert_inplace_rejects_singular_before_mutation() {
        let f = gf(4);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(79);
        let n = 3;
        let a = Mat::random_singular(&f, n, &mut rng);
        let mut a_cells = a.entries().to_vec();
        let before = a_cells.clone();
        let mut cat: Vec<FieldElem> = (0..mcomp::ensure_invertible_cells(n, &f))
            .map(|_| f.random_elem(&mut rng))
            .collect();
        let cat_before = cat.clone();
        let ledger = SpaceLedger::new();
        let err = invert_inplace(&mut a_cells, &mut cat, n, &f, false, &ledger);
        assert!(matches!(err, Err(IplaError::Linalg(LinalgError::Singular))));
        assert_eq!(a_cells, before);
        assert_eq!(cat, cat_before);
    }
}
