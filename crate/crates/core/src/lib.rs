//! Space-metered laboratory for in-place and catalytic computation.
//!
//! The crate is organized around a tape harness that enforces two contracts:
//! an *in-place* program must replace its input with its output on the same
//! cells using only a logarithmic number of metered work cells, and a
//! *catalytic* program may additionally scribble on a large auxiliary tape as
//! long as every bit of it is restored by the time the program halts.
//!
//! On top of the harness sit the algorithm suites:
//!
//! - [`gf`] — finite fields `GF(p^k)` with canonical modulus selection, and
//!   the machinery for running field-valued algorithms on a bit tape that may
//!   contain invalid element encodings.
//! - [`linalg`] — ordinary-memory rank / inverse / product oracles used as
//!   black boxes by the in-place algorithms.
//! - [`ipla`] — in-place linear algebra: multiplication by almost
//!   upper-triangular matrices, change-of-basis simulation, in-place matvec,
//!   matmat, transpose and inversion.
//! - [`mcomp`] — in-place compression of non-invertible matrices and the
//!   ensure-invertible routine on a catalytic field tape.
//! - [`circ`] — dependency-graph-scheduled in-place evaluation of fan-in-2
//!   circuit layers, small-width circuit evaluation, and the lossy-code
//!   witness solver.
//! - [`route`] — conflict-avoiding in-place permutation routing, hypercube
//!   bit-fixing paths, randomized-routing congestion experiments, and the
//!   cycle-hiding game.
//!
//! ```
//! use inplace_core::{ipla, FieldSpec, Mat, SpaceLedger};
//!
//! // Replace x with U*x on the tape cells, keeping two side cells.
//! let f = FieldSpec::from_order(37).unwrap();
//! let u = Mat::from_indices(&f, 3, 3, &[2, 1, 5, 0, 4, 2, 0, 0, 3]);
//! let u = ipla::AlmostUpperTriangular::new(u).unwrap();
//! let mut tape: Vec<_> = [1, 4, 5].iter().map(|&v| f.elem_from_index(v)).collect();
//! let ledger = SpaceLedger::new();
//! ipla::mul_almost_upper_inplace(&u, &mut tape, &ledger).unwrap();
//! let out: Vec<u64> = tape.iter().map(|e| f.index_of(e)).collect();
//! assert_eq!(out, [31, 26, 15]);
//! assert_eq!(ledger.peak_aux_cells(), 2);
//! ```

pub mod bits;
pub mod circ;
pub mod gf;
pub mod ipla;
pub mod linalg;
pub mod mcomp;
pub mod route;
pub mod tape;

pub use bits::Bits;
pub use gf::{FieldElem, FieldSpec};
pub use linalg::Mat;
pub use tape::{Configuration, RunLedger, SpaceLedger, StepProgram, TapeImage};

/// Per-trial RNG forked from a single run seed by trial counter, so a run is
/// reproducible regardless of trial execution order.
pub fn trial_rng(seed: u64, trial: u64) -> rand_chacha::ChaCha12Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
