//! The space-metered tape harness.
//!
//! A program is an abstract stepper over explicit [`Configuration`] values:
//! it starts with all-zero control, halts with all-one control, and may touch
//! its main section, its control cells, and (for catalytic programs) a
//! catalytic section that must be bit-identical at halt. [`run`] drives the
//! stepper under a step budget and fills a [`RunLedger`].
//!
//! The module also provides the three-pass XOR block swap and average-case
//! permutation inversion by backward search over the configuration graph.

use crate::bits::Bits;
use serde::Serialize;
use std::cell::Cell;
use std::collections::VecDeque;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TapeError {
    #[error("step budget of {budget} exhausted")]
    BudgetExceeded { budget: usize },
    #[error("in-place contract violated: {0}")]
    ContractViolation(String),
    #[error("block ranges overlap")]
    OverlappingRanges,
    #[error("block ranges differ in length")]
    LengthMismatch,
    #[error("image sections do not match program widths: {0}")]
    WidthMismatch(String),
}

/// Full memory state of an in-place or catalytic run.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TapeImage {
    /// The n-cell read-write section that starts as `x` and must end as `f(x)`.
    pub main: Bits,
    /// Metered auxiliary cells; all-zero at start, all-one at halt.
    pub work: Bits,
    /// When present, must compare bit-identical between run start and end.
    pub catalytic: Option<Bits>,
    /// Logical cell width: 1 for bit tapes, `b` for field tapes.
    pub alphabet_bits: usize,
}

impl TapeImage {
    pub fn bit_tape(main: Bits, work_cells: usize) -> TapeImage {
        TapeImage {
            main,
            work: Bits::zeros(work_cells),
            catalytic: None,
            alphabet_bits: 1,
        }
    }

    pub fn with_catalytic(mut self, catalytic: Bits) -> TapeImage {
        self.catalytic = Some(catalytic);
        self
    }

    /// Line-oriented text form: `MAIN <hex>`, `WORK <hex>`, `CAT <hex>`.
    pub fn to_text(&self) -> String {
        let mut out = format!("MAIN {}\nWORK {}\n", self.main.to_hex(), self.work.to_hex());
        if let Some(cat) = &self.catalytic {
            out.push_str(&format!("CAT {}\n", cat.to_hex()));
        }
        out
    }
}

/// Space and behavior accounting for one run.
#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct RunLedger {
    pub peak_work_cells: usize,
    pub steps: usize,
    pub oracle_calls: usize,
    pub catalytic_restored: bool,
}

/// A machine configuration: main tape, control cells (finite control, head
/// positions, and work cells, bounded by the program's declared width), and
/// the optional catalytic section.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Configuration {
    pub main: Bits,
    pub control: Bits,
    pub catalytic: Option<Bits>,
}

/// A deterministic stepper. The successor function must be total on non-halt
/// configurations; a configuration halts exactly when its control is all-one.
pub trait StepProgram {
    fn main_width(&self) -> usize;
    fn control_width(&self) -> usize;
    fn catalytic_width(&self) -> Option<usize> {
        None
    }
    fn step(&self, config: &Configuration) -> Configuration;
}

fn check_widths(program: &dyn StepProgram, image: &TapeImage) -> Result<(), TapeError> {
    if image.main.len() != program.main_width() {
        return Err(TapeError::WidthMismatch(format!(
            "main {} != {}",
            image.main.len(),
            program.main_width()
        )));
    }
    if image.work.len() != program.control_width() {
        return Err(TapeError::WidthMismatch(format!(
            "work {} != {}",
            image.work.len(),
            program.control_width()
        )));
    }
    match (&image.catalytic, program.catalytic_width()) {
        (None, None) => Ok(()),
        (Some(c), Some(w)) if c.len() == w => Ok(()),
        _ => Err(TapeError::WidthMismatch("catalytic section".into())),
    }
}

/// Iterate the stepper from `(main, 0..0 [, cat])` until halt control or
/// budget exhaustion. Work-cell metering counts control cells that ever
/// changed during the run.
pub fn run(
    program: &dyn StepProgram,
    image: TapeImage,
    step_budget: usize,
) -> Result<(TapeImage, RunLedger), TapeError> {
    check_widths(program, &image)?;
    if !image.work.all_zero() {
        return Err(TapeError::ContractViolation(
            "work section must start all-zero".into(),
        ));
    }
    let alphabet_bits = image.alphabet_bits;
    let initial_cat = image.catalytic.clone();
    let mut config = Configuration {
        main: image.main,
        control: image.work,
        catalytic: image.catalytic,
    };
    let mut touched = vec![false; program.control_width()];
    let mut steps = 0usize;
    while !config.control.all_one() {
        if steps >= step_budget {
            return Err(TapeError::BudgetExceeded {
                budget: step_budget,
            });
        }
        let next = program.step(&config);
        if next.main.len() != config.main.len() {
            return Err(TapeError::ContractViolation(format!(
                "main length changed from {} to {}",
                config.main.len(),
                next.main.len()
            )));
        }
        for (i, t) in touched.iter_mut().enumerate() {
            *t |= next.control.get(i) != config.control.get(i);
        }
        config = next;
        steps += 1;
    }
    let catalytic_restored = match (&initial_cat, &config.catalytic) {
        (Some(a), Some(b)) => a == b,
        (None, None) => true,
        _ => false,
    };
    let ledger = RunLedger {
        peak_work_cells: touched.iter().filter(|&&t| t).count(),
        steps,
        oracle_calls: 0,
        catalytic_restored,
    };
    let image = TapeImage {
        main: config.main,
        work: config.control,
        catalytic: config.catalytic,
        alphabet_bits,
    };
    Ok((image, ledger))
}

/// Exchange two equal-length disjoint ranges with three XOR passes and no
/// cell storage beyond the loop counter.
pub fn swap_blocks(
    tape: &mut Bits,
    range_a: Range<usize>,
    range_b: Range<usize>,
) -> Result<(), TapeError> {
    if range_a.len() != range_b.len() {
        return Err(TapeError::LengthMismatch);
    }
    if range_a.start < range_b.end && range_b.start < range_a.end && !range_a.is_empty() {
        return Err(TapeError::OverlappingRanges);
    }
    let len = range_a.len();
    for pass in 0..3 {
        // passes alternate a ^= b, b ^= a, a ^= b
        let (dst, src) = if pass % 2 == 0 {
            (range_a.start, range_b.start)
        } else {
            (range_b.start, range_a.start)
        };
        for i in 0..len {
            let v = tape.get(dst + i) ^ tape.get(src + i);
            tape.set(dst + i, v);
        }
    }
    Ok(())
}

/// Outcome of a failed backward-search inversion: the predecessor component
/// of the halt configuration grew past the node budget (or contained no
/// start configuration).
#[derive(Debug, PartialEq, Eq)]
pub struct InvertFail {
    pub nodes_explored: usize,
}

/// Inverts `program` on output `y` by backward search from the halt
/// configuration `(y, 1..1 [, w])` over the full configuration graph.
///
/// The graph is built by forward-simulating one step from every configuration
/// of the declared widths, so the total configuration-space size must stay
/// desk-scale (at most 24 bits). Exploration stops with `Err` once
/// `node_budget` configurations have been expanded, mirroring an inverter
/// that gives up on oversized components.
pub fn invert_by_configuration_graph(
    program: &dyn StepProgram,
    y: &Bits,
    catalytic_sample: Option<&Bits>,
    node_budget: usize,
) -> Result<Bits, InvertFail> {
    let n = program.main_width();
    let c = program.control_width();
    let cat_w = program.catalytic_width().unwrap_or(0);
    assert_eq!(y.len(), n);
    assert_eq!(catalytic_sample.map(|w| w.len()).unwrap_or(0), cat_w);
    let total_bits = n + c + cat_w;
    assert!(
        total_bits <= 24,
        "configuration space too large for exhaustive search"
    );
    let size = 1usize << total_bits;

    let unpack = |idx: usize| -> Configuration {
        let main = Bits::from_u64(idx as u64 & ((1 << n) - 1), n);
        let control = Bits::from_u64((idx >> n) as u64 & ((1 << c) - 1), c);
        let catalytic = (cat_w > 0).then(|| Bits::from_u64((idx >> (n + c)) as u64, cat_w));
        Configuration {
            main,
            control,
            catalytic,
        }
    };
    let pack = |cfg: &Configuration| -> usize {
        let mut idx = cfg.main.to_u64() as usize;
        idx |= (cfg.control.to_u64() as usize) << n;
        if let Some(cat) = &cfg.catalytic {
            idx |= (cat.to_u64() as usize) << (n + c);
        }
        idx
    };

    // Forward-simulate every non-halt configuration once to obtain the
    // predecessor relation.
    let halt_marker = usize::MAX;
    let mut succ = vec![halt_marker; size];
    for idx in 0..size {
        let cfg = unpack(idx);
        if cfg.control.all_one() {
            continue;
        }
        succ[idx] = pack(&program.step(&cfg));
    }
    let mut pred_head = vec![usize::MAX; size];
    let mut pred_next = vec![usize::MAX; size];
    for idx in 0..size {
        let s = succ[idx];
        if s != halt_marker {
            pred_next[idx] = pred_head[s];
            pred_head[s] = idx;
        }
    }

    let halt_cfg = Configuration {
        main: y.clone(),
        control: Bits::ones(c),
        catalytic: catalytic_sample.cloned(),
    };
    let halt_idx = pack(&halt_cfg);
    let mut seen = vec![false; size];
    let mut queue = VecDeque::new();
    seen[halt_idx] = true;
    queue.push_back(halt_idx);
    let mut explored = 0usize;
    while let Some(idx) = queue.pop_front() {
        explored += 1;
        if explored > node_budget {
            return Err(InvertFail {
                nodes_explored: explored,
            });
        }
        let cfg = unpack(idx);
        if cfg.control.all_zero() && cfg.catalytic.as_ref() == catalytic_sample {
            return Ok(cfg.main);
        }
        let mut p = pred_head[idx];
        while p != usize::MAX {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
            p = pred_next[p];
        }
    }
    Err(InvertFail {
        nodes_explored: explored,
    })
}

/// Auxiliary-cell meter shared by the in-place algorithms. Algorithms wrap
/// each named side value in a [`hold`](SpaceLedger::hold) guard so that the
/// ledger can certify constant-cell bounds, and count oracle queries as they
/// make them.
#[derive(Debug, Default)]
pub struct SpaceLedger {
    aux_in_use: Cell<usize>,
    peak_aux_cells: Cell<usize>,
    oracle_calls: Cell<usize>,
    steps: Cell<usize>,
}

impl SpaceLedger {
    pub fn new() -> SpaceLedger {
        SpaceLedger::default()
    }

    pub fn hold<T>(&self, value: T) -> AuxCell<'_, T> {
        let in_use = self.aux_in_use.get() + 1;
        self.aux_in_use.set(in_use);
        if in_use > self.peak_aux_cells.get() {
            self.peak_aux_cells.set(in_use);
        }
        AuxCell {
            ledger: self,
            value,
        }
    }

    pub fn count_oracle(&self) {
        self.oracle_calls.set(self.oracle_calls.get() + 1);
    }

    pub fn count_step(&self) {
        self.steps.set(self.steps.get() + 1);
    }

    pub fn peak_aux_cells(&self) -> usize {
        self.peak_aux_cells.get()
    }

    pub fn oracle_calls(&self) -> usize {
        self.oracle_calls.get()
    }

    pub fn to_run_ledger(&self, catalytic_restored: bool) -> RunLedger {
        RunLedger {
            peak_work_cells: self.peak_aux_cells.get(),
            steps: self.steps.get(),
            oracle_calls: self.oracle_calls.get(),
            catalytic_restored,
        }
    }
}

/// An RAII guard for one metered auxiliary cell.
pub struct AuxCell<'a, T> {
    ledger: &'a SpaceLedger,
    value: T,
}

impl<T> std::ops::Deref for AuxCell<'_, T> {
    type Target = T;
    fn deref(&self) -> &T {
        &self.value
    }
}

impl<T> std::ops::DerefMut for AuxCell<'_, T> {
    fn deref_mut(&mut self) -> &mut T {
        &mut self.value
    }
}

impl<T> Drop for AuxCell<'_, T> {
    fn drop(&mut self) {
        self.ledger.aux_in_use.set(self.ledger.aux_in_use.get() - 1);
    }
}

pub mod programs {
    //! Small stepper programs used by tests and the configuration-graph
    //! inversion experiments.

    use super::*;

    /// Halts immediately without touching main.
    pub struct IdentityProgram {
        pub main: usize,
        pub control: usize,
    }

    impl StepProgram for IdentityProgram {
        fn main_width(&self) -> usize {
            self.main
        }
        fn control_width(&self) -> usize {
            self.control
        }
        fn step(&self, config: &Configuration) -> Configuration {
            let mut next = config.clone();
            next.control = Bits::ones(self.control);
            next
        }
    }

    /// Flips one main bit per step, counter in control.
    pub struct NotProgram {
        pub main: usize,
    }

    impl NotProgram {
        fn counter_bits(n: usize) -> usize {
            (usize::BITS - n.leading_zeros()) as usize + 1
        }
    }

    impl StepProgram for NotProgram {
        fn main_width(&self) -> usize {
            self.main
        }
        fn control_width(&self) -> usize {
            Self::counter_bits(self.main)
        }
        fn step(&self, config: &Configuration) -> Configuration {
            let mut next = config.clone();
            let ctr = config.control.to_u64() as usize;
            if ctr < self.main {
                next.main.flip(ctr);
                next.control = Bits::from_u64(ctr as u64 + 1, self.control_width());
                if ctr + 1 == self.main {
                    next.control = Bits::ones(self.control_width());
                }
            } else {
                next.control = Bits::ones(self.control_width());
            }
            next
        }
    }

    /// Rotates main left by one position (cell 0 moves to the end), one cell
    /// move per step, with a carry bit and a counter in control.
    pub struct RotateLeftProgram {
        pub main: usize,
    }

    impl RotateLeftProgram {
        fn counter_bits(n: usize) -> usize {
            (usize::BITS - (n + 1).leading_zeros()) as usize
        }
    }

    impl StepProgram for RotateLeftProgram {
        fn main_width(&self) -> usize {
            self.main
        }
        fn control_width(&self) -> usize {
            Self::counter_bits(self.main) + 1
        }
        fn step(&self, config: &Configuration) -> Configuration {
            let n = self.main;
            let cb = Self::counter_bits(n);
            let mut next = config.clone();
            let ctr = config.control.slice(0, cb).to_u64() as usize;
            let carry = config.control.get(cb);
            if ctr == 0 {
                // save cell 0
                let c = config.main.get(0);
                next.control = Bits::from_u64(1, cb).concat(&Bits::from_bools(vec![c]));
            } else if ctr < n {
                // main[ctr-1] <- main[ctr]
                let v = config.main.get(ctr);
                next.main.set(ctr - 1, v);
                next.control =
                    Bits::from_u64(ctr as u64 + 1, cb).concat(&Bits::from_bools(vec![carry]));
            } else {
                next.main.set(n - 1, carry);
                next.control = Bits::ones(self.control_width());
            }
            next
        }
    }

    /// Swaps the two halves of main with three XOR passes, one cell per step.
    pub struct SwapHalvesProgram {
        pub half: usize,
    }

    impl StepProgram for SwapHalvesProgram {
        fn main_width(&self) -> usize {
            2 * self.half
        }
        fn control_width(&self) -> usize {
            (usize::BITS - (3 * self.half + 1).leading_zeros()) as usize
        }
        fn step(&self, config: &Configuration) -> Configuration {
            let h = self.half;
            let mut next = config.clone();
            let t = config.control.to_u64() as usize;
            if t < 3 * h {
                let (pass, i) = (t / h, t % h);
                let (dst, src) = if pass % 2 == 0 {
                    (i, h + i)
                } else {
                    (h + i, i)
                };
                let v = config.main.get(dst) ^ config.main.get(src);
                next.main.set(dst, v);
            }
            next.control = if t + 1 == 3 * h {
                Bits::ones(self.control_width())
            } else {
                Bits::from_u64(t as u64 + 1, self.control_width())
            };
            next
        }
    }

    /// Catalytic one-time-pad: XORs the catalytic section into main once
    /// (one cell per step) and halts. For each fixed catalyst this is a
    /// permutation of the main section, and the catalyst is never written.
    pub struct CatMaskProgram {
        pub main: usize,
    }

    impl StepProgram for CatMaskProgram {
        fn main_width(&self) -> usize {
            self.main
        }
        fn control_width(&self) -> usize {
            (usize::BITS - (self.main + 1).leading_zeros()) as usize
        }
        fn catalytic_width(&self) -> Option<usize> {
            Some(self.main)
        }
        fn step(&self, config: &Configuration) -> Configuration {
            let mut next = config.clone();
            let t = config.control.to_u64() as usize;
            if t < self.main {
                let cat = config.catalytic.as_ref().expect("catalytic program");
                let v = next.main.get(t) ^ cat.get(t);
                next.main.set(t, v);
            }
            next.control = if t + 1 >= self.main {
                Bits::ones(self.control_width())
            } else {
                Bits::from_u64(t as u64 + 1, self.control_width())
            };
            next
        }
    }

    /// Catalytic toy: XORs the catalytic section into main, does one
    /// controlled sweep, then XORs it back out, restoring the catalyst.
    /// When `sabotage` is set the restore pass is skipped.
    pub struct CatXorProgram {
        pub main: usize,
        pub sabotage: bool,
    }

    impl StepProgram for CatXorProgram {
        fn main_width(&self) -> usize {
            self.main
        }
        fn control_width(&self) -> usize {
            (usize::BITS - (2 * self.main + 1).leading_zeros()) as usize
        }
        fn catalytic_width(&self) -> Option<usize> {
            Some(self.main)
        }
        fn step(&self, config: &Configuration) -> Configuration {
            let n = self.main;
            let mut next = config.clone();
            let t = config.control.to_u64() as usize;
            let cat = config.catalytic.as_ref().expect("catalytic program");
            if t < n {
                let v = next.main.get(t) ^ cat.get(t);
                next.main.set(t, v);
            } else if t < 2 * n {
                if self.sabotage {
                    next.catalytic.as_mut().unwrap().set(t - n, false);
                } else {
                    let v = next.main.get(t - n) ^ cat.get(t - n);
                    next.main.set(t - n, v);
                }
            }
            next.control = if t + 1 == 2 * n {
                Bits::ones(self.control_width())
            } else {
                Bits::from_u64(t as u64 + 1, self.control_width())
            };
            next
        }
    }

    /// Walks its control counter through `2^width - 1` values before halting;
    /// the predecessor component of any halt configuration is a long chain,
    /// so small node budgets must fail.
    pub struct LongChainProgram {
        pub main: usize,
        pub control: usize,
    }

    impl StepProgram for LongChainProgram {
        fn main_width(&self) -> usize {
            self.main
        }
        fn control_width(&self) -> usize {
            self.control
        }
        fn step(&self, config: &Configuration) -> Configuration {
            let mut next = config.clone();
            let t = config.control.to_u64();
            next.control = Bits::from_u64(t + 1, self.control);
            next
        }
    }
}

#[cfg(test)]
mod tests {
    use super::programs::*;
    use super::*;

    #[test]
    fn run_identity() {
        let p = IdentityProgram {
            main: 4,
            control: 3,
        };
        let image = TapeImage::bit_tape(Bits::from_binary("1011").unwrap(), 3);
        let (out, ledger) = run(&p, image, 10).unwrap();
        assert_eq!(out.main, Bits::from_binary("1011").unwrap());
        assert_eq!(ledger.steps, 1);
        assert!(ledger.catalytic_restored);
    }

    #[test]
    fn run_swap_halves() {
        let p = SwapHalvesProgram { half: 2 };
        let image = TapeImage::bit_tape(Bits::from_binary("0011").unwrap(), p.control_width());
        let (out, ledger) = run(&p, image, 100).unwrap();
        assert_eq!(out.main, Bits::from_binary("1100").unwrap());
        assert!(out.work.all_one());
        assert!(ledger.peak_work_cells <= p.control_width());
    }

    #[test]
    fn run_budget_exceeded() {
        let p = SwapHalvesProgram { half: 4 };
        let image = TapeImage::bit_tape(Bits::zeros(8), p.control_width());
        assert_eq!(
            run(&p, image, 3),
            Err(TapeError::BudgetExceeded { budget: 3 })
        );
    }

    #[test]
    fn catalytic_restored_flag() {
        let good = CatXorProgram {
            main: 4,
            sabotage: false,
        };
        let image = TapeImage::bit_tape(Bits::from_binary("1010").unwrap(), good.control_width())
            .with_catalytic(Bits::from_binary("0110").unwrap());
        let (out, ledger) = run(&good, image, 100).unwrap();
        assert!(ledger.catalytic_restored);
        assert_eq!(out.main, Bits::from_binary("1010").unwrap());

        let bad = CatXorProgram {
            main: 4,
            sabotage: true,
        };
        let image = TapeImage::bit_tape(Bits::from_binary("1010").unwrap(), bad.control_width())
            .with_catalytic(Bits::from_binary("0110").unwrap());
        let (_, ledger) = run(&bad, image, 100).unwrap();
        assert!(!ledger.catalytic_restored);
    }

    #[test]
    fn catalytic_random_inits_always_restored() {
        use rand::{Rng, SeedableRng};
        let p = CatXorProgram {
            main: 6,
            sabotage: false,
        };
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        for _ in 0..200 {
            let main: Bits = (0..6).map(|_| rng.random_bool(0.5)).collect();
            let cat: Bits = (0..6).map(|_| rng.random_bool(0.5)).collect();
            let image = TapeImage::bit_tape(main, p.control_width()).with_catalytic(cat);
            let (_, ledger) = run(&p, image, 100).unwrap();
            assert!(ledger.catalytic_restored);
        }
    }

    #[test]
    fn swap_blocks_examples() {
        let mut t = Bits::from_binary("10100001").unwrap();
        swap_blocks(&mut t, 0..4, 4..8).unwrap();
        assert_eq!(t, Bits::from_binary("00011010").unwrap());

        let mut t = Bits::from_binary("11111111").unwrap();
        swap_blocks(&mut t, 0..4, 4..8).unwrap();
        assert_eq!(t, Bits::from_binary("11111111").unwrap());
    }

    #[test]
    fn swap_blocks_errors() {
        let mut t = Bits::zeros(8);
        assert_eq!(
            swap_blocks(&mut t, 0..4, 3..7),
            Err(TapeError::OverlappingRanges)
        );
        assert_eq!(
            swap_blocks(&mut t, 0..3, 4..8),
            Err(TapeError::LengthMismatch)
        );
    }

    #[test]
    fn swap_blocks_matches_direct_exchange() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        for _ in 0..100 {
            let mut t: Bits = (0..128).map(|_| rng.random_bool(0.5)).collect();
            let mut oracle = t.clone();
            swap_blocks(&mut t, 0..64, 64..128).unwrap();
            // direct copy-exchange
            let a = oracle.slice(0, 64);
            let b = oracle.slice(64, 64);
            oracle.splice(0, &b);
            oracle.splice(64, &a);
            assert_eq!(t, oracle);
        }
    }

    #[test]
    fn swap_blocks_involution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        for _ in 0..100 {
            let orig: Bits = (0..40).map(|_| rng.random_bool(0.5)).collect();
            let mut t = orig.clone();
            swap_blocks(&mut t, 2..12, 20..30).unwrap();
            swap_blocks(&mut t, 2..12, 20..30).unwrap();
            assert_eq!(t, orig);
        }
    }

    #[test]
    fn invert_not_program() {
        let p = NotProgram { main: 4 };
        let y = Bits::from_binary("0110").unwrap();
        let x = invert_by_configuration_graph(&p, &y, None, 1 << 16).unwrap();
        assert_eq!(x, Bits::from_binary("1001").unwrap());
    }

    #[test]
    fn invert_rotate_matches_ground_truth() {
        let p = RotateLeftProgram { main: 4 };
        // ground truth by forward simulation of all 16 inputs
        for v in 0..16u64 {
            let x = Bits::from_u64(v, 4);
            let image = TapeImage::bit_tape(x.clone(), p.control_width());
            let (out, _) = run(&p, image, 100).unwrap();
            let got = invert_by_configuration_graph(&p, &out.main, None, 1 << 16).unwrap();
            assert_eq!(got, x, "inversion of rotate({v:04b})");
        }
        // the specific instance: rotate-left(1001) = 0011
        let y = Bits::from_binary("0011").unwrap();
        let x = invert_by_configuration_graph(&p, &y, None, 1 << 16).unwrap();
        assert_eq!(x, Bits::from_binary("1001").unwrap());
    }

    #[test]
    fn invert_catalytic_program_with_sampled_tape() {
        use rand::{Rng, SeedableRng};
        let p = CatMaskProgram { main: 4 };
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(37);
        for _ in 0..50 {
            let x: Bits = (0..4).map(|_| rng.random_bool(0.5)).collect();
            let w: Bits = (0..4).map(|_| rng.random_bool(0.5)).collect();
            let image = TapeImage::bit_tape(x.clone(), p.control_width()).with_catalytic(w.clone());
            let (out, ledger) = run(&p, image, 100).unwrap();
            assert!(ledger.catalytic_restored);
            // backward search from (y, 1.., w) recovers x
            let got = invert_by_configuration_graph(&p, &out.main, Some(&w), 1 << 14).unwrap();
            assert_eq!(got, x);
        }
    }

    #[test]
    fn invert_budget_fails_on_long_chain() {
        let p = LongChainProgram {
            main: 2,
            control: 10,
        };
        let y = Bits::from_binary("00").unwrap();
        let res = invert_by_configuration_graph(&p, &y, None, 10);
        match res {
            Err(InvertFail { nodes_explored }) => assert!(nodes_explored > 10),
            Ok(_) => panic!("expected budget failure"),
        }
    }

    #[test]
    fn ledger_guards_track_peak() {
        let ledger = SpaceLedger::new();
        {
            let _a = ledger.hold(1u32);
            {
                let _b = ledger.hold(2u32);
                assert_eq!(ledger.peak_aux_cells(), 2);
            }
            let _c = ledger.hold(3u32);
            assert_eq!(ledger.peak_aux_cells(), 2);
        }
        assert_eq!(ledger.peak_aux_cells(), 2);
    }

    #[test]
    fn registered_programs_respect_the_harness_contract() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(29);
        let programs: Vec<(Box<dyn StepProgram>, &str)> = vec![
            (
                Box::new(IdentityProgram {
                    main: 6,
                    control: 3,
                }),
                "identity",
            ),
            (Box::new(NotProgram { main: 6 }), "not"),
            (Box::new(RotateLeftProgram { main: 6 }), "rotate"),
            (Box::new(SwapHalvesProgram { half: 3 }), "swap-halves"),
        ];
        for (p, name) in &programs {
            for _ in 0..50 {
                let main: Bits = (0..p.main_width()).map(|_| rng.random_bool(0.5)).collect();
                let image = TapeImage::bit_tape(main.clone(), p.control_width());
                let (out, ledger) = run(p.as_ref(), image, 10_000).unwrap();
                assert_eq!(out.main.len(), main.len(), "{name}: main length changed");
                assert!(
                    ledger.peak_work_cells <= p.control_width(),
                    "{name}: work cells exceed the declared width"
                );
                assert!(ledger.catalytic_restored);
            }
        }
    }

    #[test]
    fn image_text_form() {
        let image = TapeImage::bit_tape(Bits::from_binary("1011").unwrap(), 4)
            .with_catalytic(Bits::from_binary("0001").unwrap());
        assert_eq!(image.to_text(), "MAIN b\nWORK 0\nCAT 1\n");
    }
}
