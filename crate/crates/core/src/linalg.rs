//! Dense matrices over a finite field, with rank, inverse, and chain-product
//! routines implemented by Gaussian elimination in ordinary memory.
//!
//! Everything here is used by the in-place algorithms strictly as a black-box
//! oracle: callers read answers but never hand these routines their tapes.
//! They intentionally use O(n^2) free memory.

use crate::gf::{FieldElem, FieldSpec};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Row-major dense matrix over a shared [`FieldSpec`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Mat {
    spec: FieldSpec,
    rows: usize,
    cols: usize,
    entries: Vec<FieldElem>,
}

impl Mat {
    pub fn zero(spec: &FieldSpec, rows: usize, cols: usize) -> Mat {
        Mat {
            spec: spec.clone(),
            rows,
            cols,
            entries: vec![spec.zero(); rows * cols],
        }
    }

    pub fn identity(spec: &FieldSpec, n: usize) -> Mat {
        let mut m = Mat::zero(spec, n, n);
        for i in 0..n {
            m.set(i, i, spec.one());
        }
        m
    }

    pub fn from_entries(
        spec: &FieldSpec,
        rows: usize,
        cols: usize,
        entries: Vec<FieldElem>,
    ) -> Mat {
        assert_eq!(entries.len(), rows * cols);
        Mat {
            spec: spec.clone(),
            rows,
            cols,
            entries,
        }
    }

    /// Builds a matrix from integer indices into the field's canonical
    /// element enumeration; handy in tests.
    pub fn from_indices(spec: &FieldSpec, rows: usize, cols: usize, vals: &[u64]) -> Mat {
        assert_eq!(vals.len(), rows * cols);
        let entries = vals.iter().map(|&v| spec.elem_from_index(v)).collect();
        Mat {
            spec: spec.clone(),
            rows,
            cols,
            entries,
        }
    }

    pub fn random<R: rand::Rng>(spec: &FieldSpec, rows: usize, cols: usize, rng: &mut R) -> Mat {
        let entries = (0..rows * cols).map(|_| spec.random_elem(rng)).collect();
        Mat {
            spec: spec.clone(),
            rows,
            cols,
            entries,
        }
    }

    /// Rejection-samples an invertible square matrix.
    pub fn random_invertible<R: rand::Rng>(spec: &FieldSpec, n: usize, rng: &mut R) -> Mat {
        loop {
            let m = Mat::random(spec, n, n, rng);
            if m.is_invertible() {
                return m;
            }
        }
    }

    /// A random singular matrix built as a rank-deficient product.
    pub fn random_singular<R: rand::Rng>(spec: &FieldSpec, n: usize, rng: &mut R) -> Mat {
        assert!(n >= 1);
        loop {
            let a = Mat::random(spec, n, n - 1, rng);
            let b = Mat::random(spec, n - 1, n, rng);
            let m = a.mul(&b).unwrap();
            if m.rank() < n {
                return m;
            }
        }
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &FieldElem {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElem) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn entries(&self) -> &[FieldElem] {
        &self.entries
    }

    pub fn col(&self, c: usize) -> Vec<FieldElem> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn row(&self, r: usize) -> &[FieldElem] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn from_cols(spec: &FieldSpec, cols: &[Vec<FieldElem>]) -> Mat {
        let n = cols[0].len();
        let mut m = Mat::zero(spec, n, cols.len());
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), n);
            for (r, v) in col.iter().enumerate() {
                m.set(r, c, v.clone());
            }
        }
        m
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zero(&self.spec, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Result<Mat, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &self.spec;
        let mut out = Mat::zero(f, self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = f.zero();
                for t in 0..self.cols {
                    acc = f.add(&acc, &f.mul(self.get(r, t), other.get(t, c)));
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[FieldElem]) -> Result<Vec<FieldElem>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} * vec{}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let f = &self.spec;
        Ok((0..self.rows)
            .map(|r| {
                let mut acc = f.zero();
                for c in 0..self.cols {
                    acc = f.add(&acc, &f.mul(self.get(r, c), &v[c]));
                }
                acc
            })
            .collect())
    }

    /// Row rank by Gaussian elimination with first-nonzero pivoting.
    pub fn rank(&self) -> usize {
        let f = &self.spec;
        let mut work = self.entries.clone();
        let (m, n) = (self.rows, self.cols);
        let at = |w: &Vec<FieldElem>, r: usize, c: usize| w[r * n + c].clone();
        let mut rank = 0;
        for col in 0..n {
            if rank == m {
                break;
            }
            // first nonzero pivot at or below `rank`
            let Some(pivot) = (rank..m).find(|&r| !at(&work, r, col).is_zero()) else {
                continue;
            };
            for c in 0..n {
                work.swap(pivot * n + c, rank * n + c);
            }
            let inv = f.inv(&at(&work, rank, col)).expect("pivot nonzero");
            for r in 0..m {
                if r == rank {
                    continue;
                }
                let factor = f.mul(&at(&work, r, col), &inv);
                if factor.is_zero() {
                    continue;
                }
                for c in col..n {
                    let sub = f.mul(&factor, &at(&work, rank, c));
                    work[r * n + c] = f.sub(&at(&work, r, c), &sub);
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    /// Gauss-Jordan inverse.
    pub fn inverse(&self) -> Result<Mat, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "inverse of {}x{}",
                self.rows, self.cols
            )));
        }
        let f = &self.spec;
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(f, n);
        for col in 0..n {
            let Some(pivot) = (col..n).find(|&r| !a.get(r, col).is_zero()) else {
                return Err(LinalgError::Singular);
            };
            if pivot != col {
                for c in 0..n {
                    let tmp = a.get(pivot, c).clone();
                    a.set(pivot, c, a.get(col, c).clone());
                    a.set(col, c, tmp);
                    let tmp = inv.get(pivot, c).clone();
                    inv.set(pivot, c, inv.get(col, c).clone());
                    inv.set(col, c, tmp);
                }
            }
            let pivot_inv = f.inv(a.get(col, col)).expect("pivot nonzero");
            for c in 0..n {
                a.set(col, c, f.mul(a.get(col, c), &pivot_inv));
                inv.set(col, c, f.mul(inv.get(col, c), &pivot_inv));
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col).clone();
                if factor.is_zero() {
                    continue;
                }
                for c in 0..n {
                    let s = f.mul(&factor, a.get(col, c));
                    a.set(r, c, f.sub(a.get(r, c), &s));
                    let s = f.mul(&factor, inv.get(col, c));
                    inv.set(r, c, f.sub(inv.get(r, c), &s));
                }
            }
        }
        Ok(inv)
    }

    /// Determinant via elimination; zero for singular inputs.
    pub fn det(&self) -> Result<FieldElem, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "det of {}x{}",
                self.rows, self.cols
            )));
        }
        let f = &self.spec;
        let n = self.rows;
        let mut a = self.clone();
        let mut det = f.one();
        for col in 0..n {
            let Some(pivot) = (col..n).find(|&r| !a.get(r, col).is_zero()) else {
                return Ok(f.zero());
            };
            if pivot != col {
                for c in 0..n {
                    let tmp = a.get(pivot, c).clone();
                    a.set(pivot, c, a.get(col, c).clone());
                    a.set(col, c, tmp);
                }
                det = f.neg(&det);
            }
            det = f.mul(&det, a.get(col, col));
            let pivot_inv = f.inv(a.get(col, col)).expect("pivot nonzero");
            for r in col + 1..n {
                let factor = f.mul(a.get(r, col), &pivot_inv);
                if factor.is_zero() {
                    continue;
                }
                for c in col..n {
                    let s = f.mul(&factor, a.get(col, c));
                    a.set(r, c, f.sub(a.get(r, c), &s));
                }
            }
        }
        Ok(det)
    }

    /// Serialize in the matrix file format: field header, `m n`, then `m`
    /// lines of `n` elements (each element its `k` coefficients).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.spec.header_line());
        out.push('\n');
        out.push_str(&format!("{} {}\n", self.rows, self.cols));
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|e| e.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Mat, LinalgError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or(LinalgError::Parse {
            line: 0,
            msg: "empty file".into(),
        })?;
        let spec = FieldSpec::parse_header(header).map_err(|e| LinalgError::Parse {
            line: ln + 1,
            msg: e.to_string(),
        })?;
        let (ln, dims) = lines.next().ok_or(LinalgError::Parse {
            line: 0,
            msg: "missing dimensions".into(),
        })?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| LinalgError::Parse {
                line: ln + 1,
                msg: e.to_string(),
            })?;
        if dims.len() != 2 {
            return Err(LinalgError::Parse {
                line: ln + 1,
                msg: "expected `rows cols`".into(),
            });
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut entries = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) = lines.next().ok_or(LinalgError::Parse {
                line: 0,
                msg: "missing row".into(),
            })?;
            let nums: Vec<u16> = row
                .split_whitespace()
                .map(|t| t.parse::<u16>())
                .collect::<Result<_, _>>()
                .map_err(|e| LinalgError::Parse {
                    line: ln + 1,
                    msg: e.to_string(),
                })?;
            if nums.len() != cols * spec.k() {
                return Err(LinalgError::Parse {
                    line: ln + 1,
                    msg: format!(
                        "expected {} coefficients, got {}",
                        cols * spec.k(),
                        nums.len()
                    ),
                });
            }
            for chunk in nums.chunks(spec.k()) {
                let e = spec.from_coeffs(chunk).map_err(|e| LinalgError::Parse {
                    line: ln + 1,
                    msg: e.to_string(),
                })?;
                entries.push(e);
            }
        }
        Ok(Mat {
            spec,
            rows,
            cols,
            entries,
        })
    }
}

/// Left-to-right product of a conformable chain; the identity for an empty
/// chain is not defined, so the chain must be nonempty.
pub fn product_chain(mats: &[Mat]) -> Result<Mat, LinalgError> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| LinalgError::DimensionMismatch("empty chain".into()))?;
    let mut acc = first.clone();
    for m in rest {
        acc = acc.mul(m)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rank_basics() {
        let f = FieldSpec::new(2, 1);
        assert_eq!(Mat::zero(&f, 3, 3).rank(), 0);
        assert_eq!(Mat::identity(&f, 4).rank(), 4);
        let m = Mat::from_indices(&f, 2, 2, &[1, 1, 1, 1]);
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn inverse_basics() {
        let f = FieldSpec::new(5, 1);
        let id = Mat::identity(&f, 3);
        assert_eq!(id.inverse().unwrap(), id);
        let d = Mat::from_indices(&f, 2, 2, &[2, 0, 0, 3]);
        let d_inv = Mat::from_indices(&f, 2, 2, &[3, 0, 0, 2]);
        assert_eq!(d.inverse().unwrap(), d_inv);
        assert_eq!(Mat::zero(&f, 2, 2).inverse(), Err(LinalgError::Singular));
    }

    #[test]
    fn inverse_self_check_gf4() {
        let f = FieldSpec::new(2, 2);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        for _ in 0..50 {
            let m = Mat::random_invertible(&f, 6, &mut rng);
            let inv = m.inverse().unwrap();
            assert_eq!(m.mul(&inv).unwrap(), Mat::identity(&f, 6));
            assert_eq!(inv.inverse().unwrap(), m);
        }
    }

    #[test]
    fn invertible_2x2_gf2_count_is_six() {
        let f = FieldSpec::new(2, 1);
        let count = (0..16u64)
            .filter(|&v| {
                Mat::from_indices(&f, 2, 2, &[v & 1, v >> 1 & 1, v >> 2 & 1, v >> 3 & 1])
                    .is_invertible()
            })
            .count();
        assert_eq!(count, 6);
    }

    #[test]
    fn product_chain_props() {
        let f = FieldSpec::new(3, 1);
        let id = Mat::identity(&f, 4);
        assert_eq!(
            product_chain(&[id.clone(), id.clone(), id.clone()]).unwrap(),
            id
        );
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let a = Mat::random(&f, 4, 4, &mut rng);
        assert_eq!(product_chain(std::slice::from_ref(&a)).unwrap(), a);
        let b = Mat::random(&f, 4, 4, &mut rng);
        let c = Mat::random(&f, 4, 4, &mut rng);
        let left = a.mul(&b).unwrap().mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        assert_eq!(product_chain(&[a, b, c]).unwrap(), left);
        assert_eq!(left, right);
    }

    #[test]
    fn rank_equals_transpose_rank() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for q in [2u64, 4, 5] {
            let f = FieldSpec::from_order(q).unwrap();
            for _ in 0..100 {
                let m = Mat::random(&f, 5, 7, &mut rng);
                assert_eq!(m.rank(), m.transpose().rank());
            }
        }
    }

    #[test]
    fn det_props() {
        let f = FieldSpec::new(5, 1);
        assert_eq!(Mat::identity(&f, 4).det().unwrap(), f.one());
        assert!(Mat::zero(&f, 3, 3).det().unwrap().is_zero());
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(6);
        for _ in 0..100 {
            let a = Mat::random(&f, 4, 4, &mut rng);
            let b = Mat::random(&f, 4, 4, &mut rng);
            let lhs = a.mul(&b).unwrap().det().unwrap();
            let rhs = f.mul(&a.det().unwrap(), &b.det().unwrap());
            assert_eq!(lhs, rhs);
            assert_eq!(a.det().unwrap().is_zero(), !a.is_invertible());
        }
    }

    #[test]
    fn text_round_trip() {
        let f = FieldSpec::new(2, 2);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        let m = Mat::random(&f, 3, 5, &mut rng);
        assert_eq!(Mat::parse_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn parse_rejects_out_of_range_entries() {
        let text = "GF 5 1\n2 2\n1 2\n3 7\n";
        assert!(matches!(
            Mat::parse_text(text),
            Err(LinalgError::Parse { line: 4, .. })
        ));
    }
}
