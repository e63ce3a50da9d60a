//! In-place compression of non-invertible matrices, and the total
//! ensure-invertible routine on a catalytic field tape.
//!
//! A non-invertible matrix has a first column that depends linearly on its
//! predecessors; writing `i` for `n` minus the length of the longest
//! independent column prefix, the entries of that dependent column at `i`
//! well-chosen rows are redundant: they can be erased and later recomputed by
//! expressing the partial column in the basis formed by the surviving
//! independent columns extended with standard basis vectors. The three
//! compressors here differ in how they pay for storing `i`:
//!
//! - [`comp_exact`]: one matrix, bit-level, fields exactly representable in
//!   `b > 1` bits; `i` is stored in unary inside the freed `b*i` bits and one
//!   whole bit is saved.
//! - [`comp_seq`]: a sequence of matrices, cell-level, any field; the most
//!   frequent index `i*` is stored once and each matrix whose index equals
//!   `i*` drops its unary terminator, saving one cell overall.
//! - [`comp_or_fix`]: one matrix, cell-level; indices above a constant
//!   threshold compress, small ones are instead repaired into an invertible
//!   matrix by patching at most that constant many entries.
//!
//! Matrix blocks on mcomp tapes are stored column-major, so that the
//! always-independent column prefix occupies a contiguous cell run and can be
//! decoded before the erased positions are known.

use crate::bits::Bits;
use crate::gf::{FieldElem, FieldSpec};
use crate::linalg::Mat;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum McompError {
    #[error("matrix is invertible, nothing to compress")]
    NotCompressible,
    #[error("matrix {index} of the sequence is invertible")]
    PreconditionViolated { index: usize },
    #[error("sequence of {have} matrices is too short, need at least {need}")]
    SequenceTooShort { have: usize, need: usize },
    #[error("field is not exactly representable in more than one bit")]
    UnsupportedField,
    #[error("tape size {have} is not {need}")]
    BadTapeSize { have: usize, need: usize },
    #[error("corrupt compressed stream: {0}")]
    Corrupt(String),
}

/// A patched entry recorded by the fix path: position and original value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixPatch {
    pub row: usize,
    pub col: usize,
    pub original: FieldElem,
}

/// Reversal data for the compressors. Only `Total` is needed to undo
/// [`ensure_invertible`]; the other variants report what a compressing call
/// did (the tapes themselves are self-delimiting).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompressKey {
    Exact {
        i: usize,
    },
    Sequence {
        i_star: usize,
    },
    Fix {
        patches: Vec<FixPatch>,
    },
    Total {
        freed: usize,
        swapped: Option<usize>,
    },
}

impl CompressKey {
    /// Length of the canonical bit serialization of a `Total` key on a tape
    /// of `t` blocks of `n*n` cells: the freed count, a presence flag, and
    /// the swapped block index.
    pub fn total_serialized_bits(t: usize, n: usize) -> usize {
        let ceil_log2 =
            |v: usize| (usize::BITS - v.next_power_of_two().leading_zeros() - 1) as usize;
        ceil_log2((n * n + 1).next_power_of_two()) + 1 + ceil_log2(t.next_power_of_two())
    }
}

/// Outcome of [`comp_or_fix`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrFix {
    /// The tape now holds the compressed stream; its last `k_threshold`
    /// cells are zero.
    Compressed { i: usize },
    /// The tape now holds an invertible matrix differing from the input in
    /// the patched entries.
    Fixed { patches: Vec<FixPatch> },
}

/// Smallest base-`|K|` digit count `m` with `|K|^m >= n`.
fn ceil_log_field(spec: &FieldSpec, n: usize) -> usize {
    let base = spec.order();
    let mut m = 0;
    let mut pow: u64 = 1;
    while (pow as usize) < n {
        pow = pow.saturating_mul(base);
        m += 1;
    }
    m
}

/// Minimum sequence length for [`comp_seq`]: the averaging argument needs at
/// least `ceil(log_|K| n) + 1` matrices sharing the same dependent-column
/// index, so by pigeonhole over `n` possible indices the sequence must hold
/// more than `n * ceil(log_|K| n)` matrices.
pub fn min_seq_len(n: usize, spec: &FieldSpec) -> usize {
    n * ceil_log_field(spec, n) + 1
}

/// Reads the column-major block starting at `cells[0]` as a matrix.
pub fn read_block(cells: &[FieldElem], n: usize, spec: &FieldSpec) -> Mat {
    let mut m = Mat::zero(spec, n, n);
    for c in 0..n {
        for r in 0..n {
            m.set(r, c, cells[c * n + r].clone());
        }
    }
    m
}

pub fn write_block(cells: &mut [FieldElem], m: &Mat) {
    let n = m.rows();
    for c in 0..n {
        for r in 0..n {
            cells[c * n + r] = m.get(r, c).clone();
        }
    }
}

/// The dependent-column index `i`: `n` minus the length of the longest
/// independent column prefix, found by prefix rank queries. `None` when the
/// matrix is invertible. Column `n - i` (0-based) is the first column that
/// depends on its predecessors.
pub fn dependent_index(m: &Mat) -> Option<usize> {
    let n = m.rows();
    for t in 1..=n {
        let cols: Vec<Vec<FieldElem>> = (0..t).map(|c| m.col(c)).collect();
        if Mat::from_cols(m.spec(), &cols).rank() < t {
            return Some(n - t + 1);
        }
    }
    None
}

/// The extension rows `j_1..j_i`: each `j_k` is the smallest row index whose
/// standard basis vector is independent from the surviving columns plus the
/// previously chosen basis vectors.
fn extension_rows(
    prefix_cols: &[Vec<FieldElem>],
    i: usize,
    n: usize,
    spec: &FieldSpec,
) -> Vec<usize> {
    let mut basis: Vec<Vec<FieldElem>> = prefix_cols.to_vec();
    let mut rows = Vec::with_capacity(i);
    for _ in 0..i {
        let j = (0..n)
            .find(|&j| {
                let e: Vec<FieldElem> = (0..n)
                    .map(|r| if r == j { spec.one() } else { spec.zero() })
                    .collect();
                let mut cand = basis.clone();
                cand.push(e);
                Mat::from_cols(spec, &cand).rank() == cand.len()
            })
            .expect("standard basis always completes an independent set");
        let e: Vec<FieldElem> = (0..n)
            .map(|r| if r == j { spec.one() } else { spec.zero() })
            .collect();
        basis.push(e);
        rows.push(j);
    }
    rows
}

/// Recomputes the erased entries of the dependent column. `partial` holds
/// the column with zeros at the erased rows; resolving it in the extended
/// basis and cancelling the nonzero standard-vector coefficients one at a
/// time converges to the original column in at most `i` rounds.
fn reconstruct_column(
    partial: &mut [FieldElem],
    prefix_cols: &[Vec<FieldElem>],
    rows: &[usize],
    spec: &FieldSpec,
) {
    let n = partial.len();
    let mut basis_cols: Vec<Vec<FieldElem>> = prefix_cols.to_vec();
    for &j in rows {
        basis_cols.push(
            (0..n)
                .map(|r| if r == j { spec.one() } else { spec.zero() })
                .collect(),
        );
    }
    let basis = Mat::from_cols(spec, &basis_cols);
    let basis_inv = basis.inverse().expect("extended basis is invertible");
    loop {
        let coeffs = basis_inv.matvec(partial).expect("square");
        let ext = &coeffs[prefix_cols.len()..];
        match ext.iter().position(|b| !b.is_zero()) {
            None => return,
            Some(k) => {
                let bk = ext[k].clone();
                let j = rows[k];
                partial[j] = spec.sub(&partial[j], &bk);
            }
        }
    }
}

fn col_cells(m: &Mat, c: usize) -> Vec<FieldElem> {
    m.col(c)
}

/// Per-matrix cell encoding shared by the sequence and or-fix compressors:
/// the first `n - i` columns, then the remaining columns with the dependent
/// column's entries at the extension rows omitted. The caller supplies the
/// marker cells that delimit `i`.
fn encode_body(m: &Mat, i: usize, rows: &[usize]) -> Vec<FieldElem> {
    let n = m.rows();
    let dep = n - i;
    let mut out = Vec::with_capacity(n * n - i);
    for c in 0..n {
        for (r, v) in col_cells(m, c).into_iter().enumerate() {
            if c == dep && rows.contains(&r) {
                continue;
            }
            out.push(v);
        }
    }
    out
}

/// Inverse of [`encode_body`] given `i`: consumes `n*n - i` cells from
/// `stream` and returns the matrix.
fn decode_body(stream: &[FieldElem], n: usize, i: usize, spec: &FieldSpec) -> (Mat, usize) {
    let dep = n - i;
    let mut m = Mat::zero(spec, n, n);
    // Columns before the dependent one arrive intact, so the extension rows
    // can be recomputed before the omitted entries are reached.
    let mut pos = 0;
    for c in 0..dep {
        for r in 0..n {
            m.set(r, c, stream[pos].clone());
            pos += 1;
        }
    }
    let prefix: Vec<Vec<FieldElem>> = (0..dep).map(|c| m.col(c)).collect();
    let rows = extension_rows(&prefix, i, n, spec);
    let mut partial = vec![spec.zero(); n];
    for r in 0..n {
        if !rows.contains(&r) {
            partial[r] = stream[pos].clone();
            pos += 1;
        }
    }
    reconstruct_column(&mut partial, &prefix, &rows, spec);
    for (r, v) in partial.into_iter().enumerate() {
        m.set(r, dep, v);
    }
    for c in dep + 1..n {
        for r in 0..n {
            m.set(r, c, stream[pos].clone());
            pos += 1;
        }
    }
    (m, pos)
}

/// Compresses one non-invertible matrix over a field exactly representable
/// in `b > 1` bits, from `n*n*b` tape bits to `n*n*b - 1`.
///
/// Layout of the output: the unary prefix `1^(i-1) 0`, zero padding up to
/// bit `b*i - 1`, then the surviving cells. Prepending the always-zero freed
/// bit reproduces an `n*n*b`-bit image whose first `b*i` bits are the prefix
/// code, so decompression can locate everything from the unary count alone.
pub fn comp_exact(
    tape: &Bits,
    n: usize,
    spec: &FieldSpec,
) -> Result<(Bits, CompressKey), McompError> {
    let b = spec.bits_per_element();
    if !spec.exactly_representable() || b < 2 {
        return Err(McompError::UnsupportedField);
    }
    if tape.len() != n * n * b {
        return Err(McompError::BadTapeSize {
            have: tape.len(),
            need: n * n * b,
        });
    }
    let cells: Vec<FieldElem> = (0..n * n)
        .map(|idx| {
            spec.elem_from_bits(&tape.slice(idx * b, b))
                .expect("exact field")
        })
        .collect();
    let m = read_block(&cells, n, spec);
    let Some(i) = dependent_index(&m) else {
        return Err(McompError::NotCompressible);
    };
    let dep = n - i;
    let prefix: Vec<Vec<FieldElem>> = (0..dep).map(|c| m.col(c)).collect();
    let rows = extension_rows(&prefix, i, n, spec);
    let body = encode_body(&m, i, &rows);

    let mut out = Bits::zeros(n * n * b - 1);
    for t in 0..i - 1 {
        out.set(t, true);
    }
    // bits [i-1, b*i-1) stay zero: the unary terminator plus padding
    let mut pos = b * i - 1;
    for e in &body {
        out.splice(pos, &spec.elem_to_bits(e));
        pos += b;
    }
    debug_assert_eq!(pos, out.len());
    Ok((out, CompressKey::Exact { i }))
}

/// Inverse of [`comp_exact`].
pub fn decomp_exact(tape: &Bits, n: usize, spec: &FieldSpec) -> Result<Bits, McompError> {
    let b = spec.bits_per_element();
    if !spec.exactly_representable() || b < 2 {
        return Err(McompError::UnsupportedField);
    }
    if tape.len() != n * n * b - 1 {
        return Err(McompError::BadTapeSize {
            have: tape.len(),
            need: n * n * b - 1,
        });
    }
    let ones = (0..tape.len()).take_while(|&t| tape.get(t)).count();
    let i = ones + 1;
    if i > n {
        return Err(McompError::Corrupt(format!(
            "unary index {i} exceeds n {n}"
        )));
    }
    let mut pos = b * i - 1;
    let body_cells = n * n - i;
    let mut stream = Vec::with_capacity(body_cells);
    for _ in 0..body_cells {
        stream.push(
            spec.elem_from_bits(&tape.slice(pos, b))
                .expect("exact field"),
        );
        pos += b;
    }
    let (m, consumed) = decode_body(&stream, n, i, spec);
    debug_assert_eq!(consumed, body_cells);
    let mut cells = vec![spec.zero(); n * n];
    write_block(&mut cells, &m);
    let mut out = Bits::zeros(n * n * b);
    for (idx, e) in cells.iter().enumerate() {
        out.splice(idx * b, &spec.elem_to_bits(e));
    }
    Ok(out)
}

/// Marker cells delimiting `i` inside a sequence encoding: `i-1` ones and a
/// terminating zero, with the terminator dropped when `i` equals `i_star`.
/// The decoder scans at most `i_star - 1` cells for the first zero, so the
/// two cases never collide.
fn marker_cells(i: usize, i_star: usize, spec: &FieldSpec) -> Vec<FieldElem> {
    let mut out = vec![spec.one(); i - 1];
    if i < i_star {
        out.push(spec.zero());
    }
    out
}

/// Compresses `s >= min_seq_len` non-invertible matrices in-place so that
/// the last tape cell is zero. The dominant dependent-column index `i*` is
/// stored up front in `ceil(log_|K| n)` digit cells; every matrix sharing it
/// saves one cell.
pub fn comp_seq(
    cells: &mut [FieldElem],
    n: usize,
    spec: &FieldSpec,
) -> Result<CompressKey, McompError> {
    assert_eq!(cells.len() % (n * n), 0, "tape must hold whole blocks");
    let s = cells.len() / (n * n);
    let need = min_seq_len(n, spec);
    if s < need {
        return Err(McompError::SequenceTooShort { have: s, need });
    }
    let mats: Vec<Mat> = (0..s)
        .map(|t| read_block(&cells[t * n * n..], n, spec))
        .collect();
    let mut indices = Vec::with_capacity(s);
    for (t, m) in mats.iter().enumerate() {
        match dependent_index(m) {
            Some(i) => indices.push(i),
            None => return Err(McompError::PreconditionViolated { index: t }),
        }
    }
    // smallest most-frequent index
    let mut counts = vec![0usize; n + 1];
    for &i in &indices {
        counts[i] += 1;
    }
    let i_star = (1..=n)
        .max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))
        .expect("n >= 1");
    debug_assert!(counts[i_star] > ceil_log_field(spec, n));

    let digits = ceil_log_field(spec, n);
    let mut stream: Vec<FieldElem> = Vec::with_capacity(cells.len());
    // i* - 1 in base-|K| digits, least significant first
    let mut v = (i_star - 1) as u64;
    for _ in 0..digits {
        stream.push(spec.elem_from_index(v % spec.order()));
        v /= spec.order();
    }
    for (m, &i) in mats.iter().zip(&indices) {
        if i > i_star {
            let mut block = vec![spec.zero(); n * n];
            write_block(&mut block, m);
            stream.extend(block);
        } else {
            let dep = n - i;
            let prefix: Vec<Vec<FieldElem>> = (0..dep).map(|c| m.col(c)).collect();
            let rows = extension_rows(&prefix, i, n, spec);
            let body = encode_body(m, i, &rows);
            // first n - i* columns, marker, then the rest of the body
            stream.extend(body[..(n - i_star) * n].iter().cloned());
            stream.extend(marker_cells(i, i_star, spec));
            stream.extend(body[(n - i_star) * n..].iter().cloned());
        }
    }
    if stream.len() >= cells.len() {
        return Err(McompError::Corrupt(format!(
            "encoding of {} cells does not fit {}",
            stream.len(),
            cells.len()
        )));
    }
    // surplus freed cells become ones; exactly one zero cell remains at the
    // very end
    stream.resize(cells.len() - 1, spec.one());
    stream.push(spec.zero());
    cells.clone_from_slice(&stream);
    Ok(CompressKey::Sequence { i_star })
}

/// Inverse of [`comp_seq`].
pub fn decomp_seq(cells: &mut [FieldElem], n: usize, spec: &FieldSpec) -> Result<(), McompError> {
    assert_eq!(cells.len() % (n * n), 0);
    let s = cells.len() / (n * n);
    let digits = ceil_log_field(spec, n);
    let mut pos = 0;
    let mut i_star = 0u64;
    for d in 0..digits {
        i_star += spec.index_of(&cells[pos]) * spec.order().pow(d as u32);
        pos += 1;
    }
    let i_star = i_star as usize + 1;
    if i_star > n {
        return Err(McompError::Corrupt(format!("i* {i_star} exceeds n {n}")));
    }
    let mut mats = Vec::with_capacity(s);
    for _ in 0..s {
        // the first n - i* columns decide whether this matrix was stored raw
        let head = &cells[pos..pos + (n - i_star) * n];
        let head_cols: Vec<Vec<FieldElem>> = (0..n - i_star)
            .map(|c| head[c * n..(c + 1) * n].to_vec())
            .collect();
        let head_independent =
            head_cols.is_empty() || Mat::from_cols(spec, &head_cols).rank() == head_cols.len();
        if !head_independent {
            // index above i*: the matrix is stored as itself
            let m = read_block(&cells[pos..], n, spec);
            pos += n * n;
            mats.push(m);
        } else {
            let mut scan = pos + (n - i_star) * n;
            let mut i = i_star;
            for step in 0..i_star.saturating_sub(1) {
                if cells[scan].is_zero() {
                    i = step + 1;
                    scan += 1;
                    break;
                }
                if !cells[scan].eq(&spec.one()) {
                    return Err(McompError::Corrupt(
                        "marker cell is neither one nor zero".into(),
                    ));
                }
                scan += 1;
            }
            // stream for decode_body: head columns ++ remaining cells
            let body_cells = n * n - i;
            let mut stream = Vec::with_capacity(body_cells);
            stream.extend(cells[pos..pos + (n - i_star) * n].iter().cloned());
            let rest = body_cells - (n - i_star) * n;
            stream.extend(cells[scan..scan + rest].iter().cloned());
            let (m, consumed) = decode_body(&stream, n, i, spec);
            debug_assert_eq!(consumed, body_cells);
            pos = scan + rest;
            mats.push(m);
        }
    }
    // the freed tail is ones with a single terminating zero
    if pos >= cells.len()
        || !cells[cells.len() - 1].is_zero()
        || cells[pos..cells.len() - 1].iter().any(|c| c != &spec.one())
    {
        return Err(McompError::Corrupt(
            "freed tail is not ones followed by one zero".into(),
        ));
    }
    for (t, m) in mats.iter().enumerate() {
        write_block(&mut cells[t * n * n..(t + 1) * n * n], m);
    }
    Ok(())
}

/// Compress-or-fix on a single `n*n` block: indices above `k_threshold`
/// compress (freeing `k_threshold` cells, the index stored as `i - k` in
/// unary), smaller ones are repaired in place by patching at most
/// `k_threshold` entries; the patches carry the original values.
pub fn comp_or_fix(
    cells: &mut [FieldElem],
    n: usize,
    spec: &FieldSpec,
    k_threshold: usize,
) -> Result<OrFix, McompError> {
    assert!(k_threshold >= 2);
    assert_eq!(cells.len(), n * n);
    let m = read_block(cells, n, spec);
    let Some(i) = dependent_index(&m) else {
        return Err(McompError::NotCompressible);
    };
    if i > k_threshold {
        let dep = n - i;
        let prefix: Vec<Vec<FieldElem>> = (0..dep).map(|c| m.col(c)).collect();
        let rows = extension_rows(&prefix, i, n, spec);
        let body = encode_body(&m, i, &rows);
        let mut stream: Vec<FieldElem> = Vec::with_capacity(n * n);
        stream.extend(vec![spec.one(); i - k_threshold - 1]);
        stream.push(spec.zero());
        stream.extend(body);
        debug_assert_eq!(stream.len(), n * n - k_threshold);
        stream.resize(n * n, spec.zero());
        cells.clone_from_slice(&stream);
        Ok(OrFix::Compressed { i })
    } else {
        // repair the trailing i columns so each is independent of its
        // predecessors, changing at most one entry per column
        let mut fixed = m.clone();
        let mut patches = Vec::new();
        for c in n - i..n {
            let prefix: Vec<Vec<FieldElem>> = (0..c).map(|cc| fixed.col(cc)).collect();
            let is_indep = |col: &Vec<FieldElem>| {
                let mut cand = prefix.clone();
                cand.push(col.clone());
                Mat::from_cols(spec, &cand).rank() == cand.len()
            };
            if is_indep(&fixed.col(c)) {
                continue;
            }
            let mut done = false;
            'search: for r in 0..n {
                for vi in 0..spec.order() {
                    let v = spec.elem_from_index(vi);
                    if &v == fixed.get(r, c) {
                        continue;
                    }
                    let mut cand = fixed.col(c);
                    cand[r] = v.clone();
                    if is_indep(&cand) {
                        patches.push(FixPatch {
                            row: r,
                            col: c,
                            original: fixed.get(r, c).clone(),
                        });
                        fixed.set(r, c, v);
                        done = true;
                        break 'search;
                    }
                }
            }
            debug_assert!(done, "a single-entry change always exists");
        }
        debug_assert!(fixed.is_invertible());
        debug_assert!(patches.len() <= k_threshold);
        write_block(cells, &fixed);
        Ok(OrFix::Fixed { patches })
    }
}

/// Undoes the compressed branch of [`comp_or_fix`].
pub fn decomp_or_fix(
    cells: &mut [FieldElem],
    n: usize,
    spec: &FieldSpec,
    k_threshold: usize,
) -> Result<(), McompError> {
    assert_eq!(cells.len(), n * n);
    let mut pos = 0;
    while pos < cells.len() && cells[pos] == spec.one() {
        pos += 1;
    }
    if pos >= cells.len() || !cells[pos].is_zero() {
        return Err(McompError::Corrupt("missing unary terminator".into()));
    }
    let i = pos + 1 + k_threshold;
    if i > n {
        return Err(McompError::Corrupt(format!(
            "decoded index {i} exceeds n {n}"
        )));
    }
    pos += 1;
    let body_cells = n * n - i;
    let stream: Vec<FieldElem> = cells[pos..pos + body_cells].to_vec();
    let (m, consumed) = decode_body(&stream, n, i, spec);
    debug_assert_eq!(consumed, body_cells);
    write_block(cells, &m);
    Ok(())
}

/// Undoes the fixed branch of [`comp_or_fix`].
pub fn unfix(cells: &mut [FieldElem], n: usize, patches: &[FixPatch]) {
    for p in patches {
        cells[p.col * n + p.row] = p.original.clone();
    }
}

/// Number of field cells [`ensure_invertible`] needs for block size `n`:
/// one target block plus `n*n` groups, each a shortest compressible
/// sequence. The worst case (no block invertible anywhere) frees one cell
/// per group to zero the whole target block.
pub fn ensure_invertible_cells(n: usize, spec: &FieldSpec) -> usize {
    (n * n * min_seq_len(n, spec) + 1) * n * n
}

/// Makes the first `n*n` cells hold an invertible matrix, returning a key
/// from which [`restore`] reconstructs the exact initial tape.
///
/// If any block already holds an invertible matrix it is swapped into front.
/// Otherwise every group of blocks is compressed, its freed zero cell is
/// swapped into the target block, and once the target block is all zeros the
/// identity matrix is written there.
pub fn ensure_invertible(
    cells: &mut [FieldElem],
    n: usize,
    spec: &FieldSpec,
) -> Result<CompressKey, McompError> {
    let nn = n * n;
    let need = ensure_invertible_cells(n, spec);
    if cells.len() != need {
        return Err(McompError::BadTapeSize {
            have: cells.len(),
            need,
        });
    }
    let blocks = cells.len() / nn;
    for j in 0..blocks {
        if read_block(&cells[j * nn..], n, spec).is_invertible() {
            if j != 0 {
                crate::ipla::swap_cell_ranges(cells, 0, j * nn, nn, spec);
            }
            return Ok(CompressKey::Total {
                freed: 0,
                swapped: Some(j),
            });
        }
    }
    let s0 = min_seq_len(n, spec);
    let group_cells = s0 * nn;
    for g in 0..nn {
        let start = nn + g * group_cells;
        comp_seq(&mut cells[start..start + group_cells], n, spec)?;
        // move the freed zero into target cell g, parking that cell's
        // original content in the group's tail
        crate::ipla::swap_cell_ranges(cells, g, start + group_cells - 1, 1, spec);
    }
    debug_assert!(cells[..nn].iter().all(|c| c.is_zero()));
    write_block(&mut cells[..nn], &Mat::identity(spec, n));
    Ok(CompressKey::Total {
        freed: nn,
        swapped: None,
    })
}

/// Exact inverse of [`ensure_invertible`].
pub fn restore(
    cells: &mut [FieldElem],
    key: &CompressKey,
    n: usize,
    spec: &FieldSpec,
) -> Result<(), McompError> {
    let nn = n * n;
    match key {
        CompressKey::Total {
            freed: 0,
            swapped: Some(j),
        } => {
            if *j != 0 {
                crate::ipla::swap_cell_ranges(cells, 0, j * nn, nn, spec);
            }
            Ok(())
        }
        CompressKey::Total {
            freed,
            swapped: None,
        } => {
            for c in cells[..nn].iter_mut() {
                *c = spec.zero();
            }
            let s0 = min_seq_len(n, spec);
            let group_cells = s0 * nn;
            for g in (0..*freed).rev() {
                let start = nn + g * group_cells;
                crate::ipla::swap_cell_ranges(cells, g, start + group_cells - 1, 1, spec);
                decomp_seq(&mut cells[start..start + group_cells], n, spec)?;
            }
            Ok(())
        }
        other => Err(McompError::Corrupt(format!("not a total key: {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn gf(q: u64) -> FieldSpec {
        FieldSpec::from_order(q).unwrap()
    }

    fn mat_to_bit_tape(m: &Mat) -> Bits {
        let spec = m.spec();
        let n = m.rows();
        let b = spec.bits_per_element();
        let mut cells = vec![spec.zero(); n * n];
        write_block(&mut cells, m);
        let mut out = Bits::zeros(n * n * b);
        for (i, e) in cells.iter().enumerate() {
            out.splice(i * b, &spec.elem_to_bits(e));
        }
        out
    }

    #[test]
    fn exact_zero_matrix_round_trip() {
        let f = gf(4);
        let m = Mat::zero(&f, 2, 2);
        let tape = mat_to_bit_tape(&m);
        let (packed, key) = comp_exact(&tape, 2, &f).unwrap();
        assert_eq!(packed.len(), tape.len() - 1);
        assert_eq!(key, CompressKey::Exact { i: 2 });
        assert_eq!(decomp_exact(&packed, 2, &f).unwrap(), tape);
    }

    #[test]
    fn exact_all_singular_2x2_gf4() {
        let f = gf(4);
        let mut singular = 0;
        for v in 0..256u64 {
            let vals = [v & 3, v >> 2 & 3, v >> 4 & 3, v >> 6 & 3];
            let m = Mat::from_indices(&f, 2, 2, &vals);
            if m.is_invertible() {
                assert_eq!(
                    comp_exact(&mat_to_bit_tape(&m), 2, &f),
                    Err(McompError::NotCompressible)
                );
                continue;
            }
            singular += 1;
            let tape = mat_to_bit_tape(&m);
            let (packed, _) = comp_exact(&tape, 2, &f).unwrap();
            assert_eq!(packed.len(), 2 * 2 * 2 - 1);
            assert_eq!(decomp_exact(&packed, 2, &f).unwrap(), tape, "matrix {v}");
        }
        assert_eq!(singular, 256 - 180);
    }

    #[test]
    fn exact_random_singular_5x5_gf8() {
        let f = gf(8);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(101);
        for _ in 0..1000 {
            let m = Mat::random_singular(&f, 5, &mut rng);
            let tape = mat_to_bit_tape(&m);
            let (packed, _) = comp_exact(&tape, 5, &f).unwrap();
            assert_eq!(packed.len(), 5 * 5 * 3 - 1);
            assert_eq!(decomp_exact(&packed, 5, &f).unwrap(), tape);
        }
    }

    #[test]
    fn exact_rejects_gf2_and_odd_fields() {
        let f2 = gf(2);
        let m = Mat::zero(&f2, 2, 2);
        assert_eq!(
            comp_exact(&mat_to_bit_tape(&m), 2, &f2),
            Err(McompError::UnsupportedField)
        );
        let f3 = gf(3);
        assert_eq!(
            comp_exact(&Bits::zeros(8), 2, &f3),
            Err(McompError::UnsupportedField)
        );
    }

    fn random_singular_cells<R: rand::Rng>(
        f: &FieldSpec,
        n: usize,
        s: usize,
        rng: &mut R,
    ) -> Vec<FieldElem> {
        let mut cells = vec![f.zero(); s * n * n];
        for t in 0..s {
            let m = Mat::random_singular(f, n, rng);
            write_block(&mut cells[t * n * n..(t + 1) * n * n], &m);
        }
        cells
    }

    #[test]
    fn seq_all_zero_round_trip() {
        let f = gf(3);
        let n = 4;
        let s = min_seq_len(n, &f);
        let mut cells = vec![f.zero(); s * n * n];
        let orig = cells.clone();
        let key = comp_seq(&mut cells, n, &f).unwrap();
        assert_eq!(key, CompressKey::Sequence { i_star: 4 });
        assert!(cells.last().unwrap().is_zero());
        decomp_seq(&mut cells, n, &f).unwrap();
        assert_eq!(cells, orig);
    }

    #[test]
    fn seq_random_round_trips() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(103);
        for q in [3u64, 4, 5] {
            let f = gf(q);
            let n = 4;
            let s = min_seq_len(n, &f);
            for _ in 0..100 {
                let mut cells = random_singular_cells(&f, n, s, &mut rng);
                let orig = cells.clone();
                comp_seq(&mut cells, n, &f).unwrap();
                assert!(cells.last().unwrap().is_zero(), "last cell must be zero");
                decomp_seq(&mut cells, n, &f).unwrap();
                assert_eq!(cells, orig);
            }
        }
    }

    #[test]
    fn seq_spread_indices_round_trip() {
        // Force several distinct dependent-column indices in one sequence.
        let f = gf(3);
        let n = 4;
        let s = min_seq_len(n, &f);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(107);
        let mut cells = vec![f.zero(); s * n * n];
        for t in 0..s {
            // rank-t%4-deficient style: zero out trailing columns
            let mut m = Mat::random_singular(&f, n, &mut rng);
            for c in n - 1 - (t % (n - 1))..n {
                for r in 0..n {
                    m.set(r, c, f.zero());
                }
            }
            write_block(&mut cells[t * n * n..(t + 1) * n * n], &m);
        }
        let orig = cells.clone();
        comp_seq(&mut cells, n, &f).unwrap();
        assert!(cells.last().unwrap().is_zero());
        decomp_seq(&mut cells, n, &f).unwrap();
        assert_eq!(cells, orig);
    }

    #[test]
    fn seq_detects_invertible_matrix() {
        let f = gf(4);
        let n = 4;
        let s = min_seq_len(n, &f);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(109);
        let mut cells = random_singular_cells(&f, n, s, &mut rng);
        let m = Mat::random_invertible(&f, n, &mut rng);
        write_block(&mut cells[2 * n * n..3 * n * n], &m);
        assert_eq!(
            comp_seq(&mut cells, n, &f),
            Err(McompError::PreconditionViolated { index: 2 })
        );
    }

    #[test]
    fn seq_too_short_rejected() {
        let f = gf(3);
        let n = 4;
        let mut cells = vec![f.zero(); 3 * n * n];
        assert_eq!(
            comp_seq(&mut cells, n, &f),
            Err(McompError::SequenceTooShort {
                have: 3,
                need: min_seq_len(n, &f)
            })
        );
    }

    #[test]
    fn or_fix_zero_matrix_compresses() {
        let f = gf(5);
        let n = 4;
        let mut cells = vec![f.zero(); n * n];
        let orig = cells.clone();
        match comp_or_fix(&mut cells, n, &f, 2).unwrap() {
            OrFix::Compressed { i } => assert_eq!(i, n),
            other => panic!("expected compression, got {other:?}"),
        }
        assert!(cells[n * n - 2..].iter().all(|c| c.is_zero()));
        decomp_or_fix(&mut cells, n, &f, 2).unwrap();
        assert_eq!(cells, orig);
    }

    #[test]
    fn or_fix_near_identity_gets_patched() {
        // identity with the last column zeroed: index 1 <= 2, so Fixed
        let f = gf(5);
        let n = 4;
        let mut m = Mat::identity(&f, n);
        for r in 0..n {
            m.set(r, n - 1, f.zero());
        }
        let mut cells = vec![f.zero(); n * n];
        write_block(&mut cells, &m);
        match comp_or_fix(&mut cells, n, &f, 2).unwrap() {
            OrFix::Fixed { patches } => {
                assert_eq!(patches.len(), 1);
                assert!(read_block(&cells, n, &f).is_invertible());
                unfix(&mut cells, n, &patches);
                assert_eq!(read_block(&cells, n, &f), m);
            }
            other => panic!("expected fix, got {other:?}"),
        }
    }

    #[test]
    fn or_fix_random_outcomes_verified() {
        let f = gf(5);
        let n = 6;
        let k = 2;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(113);
        let (mut compressed, mut fixed) = (0, 0);
        for _ in 0..1000 {
            let m = Mat::random_singular(&f, n, &mut rng);
            let mut cells = vec![f.zero(); n * n];
            write_block(&mut cells, &m);
            let orig = cells.clone();
            match comp_or_fix(&mut cells, n, &f, k).unwrap() {
                OrFix::Compressed { .. } => {
                    compressed += 1;
                    assert!(cells[n * n - k..].iter().all(|c| c.is_zero()));
                    decomp_or_fix(&mut cells, n, &f, k).unwrap();
                    assert_eq!(cells, orig);
                }
                OrFix::Fixed { patches } => {
                    fixed += 1;
                    assert!(patches.len() <= k);
                    assert!(read_block(&cells, n, &f).is_invertible());
                    unfix(&mut cells, n, &patches);
                    assert_eq!(cells, orig);
                }
            }
        }
        assert!(
            fixed > 0,
            "random singular matrices should usually have small index"
        );
        // both branches exercised across the run
        assert!(compressed + fixed == 1000);
    }

    #[test]
    fn or_fix_compress_branch_roundtrip() {
        // rank-1 matrices have a large dependent index
        let f = gf(4);
        let n = 5;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(127);
        for _ in 0..100 {
            let a = Mat::random(&f, n, 1, &mut rng);
            let b = Mat::random(&f, 1, n, &mut rng);
            let m = a.mul(&b).unwrap();
            let Some(i) = dependent_index(&m) else {
                continue;
            };
            if i <= 2 {
                continue;
            }
            let mut cells = vec![f.zero(); n * n];
            write_block(&mut cells, &m);
            let orig = cells.clone();
            assert!(matches!(
                comp_or_fix(&mut cells, n, &f, 2).unwrap(),
                OrFix::Compressed { .. }
            ));
            decomp_or_fix(&mut cells, n, &f, 2).unwrap();
            assert_eq!(cells, orig);
        }
    }

    #[test]
    fn ensure_invertible_swap_path() {
        let f = gf(4);
        let n = 3;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(131);
        let mut cells: Vec<FieldElem> = (0..ensure_invertible_cells(n, &f))
            .map(|_| f.random_elem(&mut rng))
            .collect();
        let orig = cells.clone();
        let key = ensure_invertible(&mut cells, n, &f).unwrap();
        assert!(read_block(&cells, n, &f).is_invertible());
        match &key {
            CompressKey::Total {
                freed: 0,
                swapped: Some(_),
            } => {}
            other => panic!("random tape should contain an invertible block, got {other:?}"),
        }
        restore(&mut cells, &key, n, &f).unwrap();
        assert_eq!(cells, orig);
    }

    #[test]
    fn ensure_invertible_all_zero_forced_path() {
        let f = gf(4);
        let n = 2;
        let mut cells = vec![f.zero(); ensure_invertible_cells(n, &f)];
        let orig = cells.clone();
        let key = ensure_invertible(&mut cells, n, &f).unwrap();
        assert_eq!(
            key,
            CompressKey::Total {
                freed: 4,
                swapped: None
            }
        );
        assert_eq!(read_block(&cells, n, &f), Mat::identity(&f, n));
        restore(&mut cells, &key, n, &f).unwrap();
        assert_eq!(cells, orig);
    }

    #[test]
    fn ensure_invertible_random_many() {
        let f = gf(4);
        let n = 4;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(137);
        for _ in 0..50 {
            let mut cells: Vec<FieldElem> = (0..ensure_invertible_cells(n, &f))
                .map(|_| f.random_elem(&mut rng))
                .collect();
            let orig = cells.clone();
            let key = ensure_invertible(&mut cells, n, &f).unwrap();
            assert!(read_block(&cells, n, &f).is_invertible());
            restore(&mut cells, &key, n, &f).unwrap();
            assert_eq!(cells, orig);
        }
    }

    #[test]
    fn ensure_invertible_all_singular_blocks_forced_path() {
        // every block singular but nonzero: exercises compression + restore
        let f = gf(3);
        let n = 2;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(139);
        let blocks = ensure_invertible_cells(n, &f) / (n * n);
        let mut cells = Vec::new();
        for _ in 0..blocks {
            let m = Mat::random_singular(&f, n, &mut rng);
            let mut block = vec![f.zero(); n * n];
            write_block(&mut block, &m);
            cells.extend(block);
        }
        let orig = cells.clone();
        let key = ensure_invertible(&mut cells, n, &f).unwrap();
        assert_eq!(
            key,
            CompressKey::Total {
                freed: 4,
                swapped: None
            }
        );
        assert_eq!(read_block(&cells, n, &f), Mat::identity(&f, n));
        restore(&mut cells, &key, n, &f).unwrap();
        assert_eq!(cells, orig);
    }

    mod roundtrip_props {
        use super::*;
        use proptest::prelude::*;
        use rand::SeedableRng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            /// Bit-level compression is the identity after decompression for
            /// every singular matrix the generator produces.
            #[test]
            fn exact_round_trip(seed in any::<u64>(), n in 2usize..=5) {
                let f = gf(4);
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
                let m = Mat::random_singular(&f, n, &mut rng);
                let tape = mat_to_bit_tape(&m);
                let (packed, _) = comp_exact(&tape, n, &f).unwrap();
                prop_assert_eq!(packed.len(), tape.len() - 1);
                prop_assert_eq!(decomp_exact(&packed, n, &f).unwrap(), tape);
            }

            /// Sequence compression frees the final cell and restores the
            /// tape exactly, over random fields and singular sequences.
            #[test]
            fn seq_round_trip(seed in any::<u64>(), q in prop::sample::select(vec![2u64, 3, 4, 5])) {
                let f = gf(q);
                let n = 3;
                let s = min_seq_len(n, &f);
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
                let mut cells = Vec::new();
                for _ in 0..s {
                    let m = Mat::random_singular(&f, n, &mut rng);
                    let mut block = vec![f.zero(); n * n];
                    write_block(&mut block, &m);
                    cells.extend(block);
                }
                let orig = cells.clone();
                comp_seq(&mut cells, n, &f).unwrap();
                prop_assert!(cells.last().unwrap().is_zero());
                decomp_seq(&mut cells, n, &f).unwrap();
                prop_assert_eq!(cells, orig);
            }
        }
    }

    #[test]
    fn corrupt_streams_rejected() {
        let f = gf(4);
        // unary index exceeding n
        let bad = Bits::ones(2 * 2 * 2 - 1);
        assert!(matches!(
            decomp_exact(&bad, 2, &f),
            Err(McompError::Corrupt(_))
        ));
        // sequence whose freed tail is not ones-then-zero
        let n = 2;
        let s = min_seq_len(n, &f);
        let mut cells = vec![f.zero(); s * n * n];
        comp_seq(&mut cells, n, &f).unwrap();
        let last = cells.len() - 1;
        cells[last] = f.one();
        assert!(matches!(
            decomp_seq(&mut cells, n, &f),
            Err(McompError::Corrupt(_))
        ));
        // restoring with a key from the wrong variant
        let mut cells = vec![f.zero(); ensure_invertible_cells(n, &f)];
        let key = CompressKey::Exact { i: 1 };
        assert!(matches!(
            restore(&mut cells, &key, n, &f),
            Err(McompError::Corrupt(_))
        ));
        // wrong tape size for the total routine
        let mut small = vec![f.zero(); n * n];
        assert!(matches!(
            ensure_invertible(&mut small, n, &f),
            Err(McompError::BadTapeSize { .. })
        ));
    }

    #[test]
    fn total_key_bit_bound() {
        let f = gf(4);
        for n in [2usize, 4, 6] {
            let t = ensure_invertible_cells(n, &f) / (n * n);
            let bound = 2 * ((t * n * n) as f64).log2().ceil() as usize + 8;
            assert!(
                CompressKey::total_serialized_bits(t, n) <= bound,
                "key bits exceed 2*ceil(log2(t*n^2)) + O(1)"
            );
        }
    }
}
