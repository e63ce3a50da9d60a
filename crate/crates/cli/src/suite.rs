//! The property battery behind `inplace-lab suite`: one check per headline
//! guarantee, at full or reduced trial counts.

use crate::runner::run_trials;
use inplace_core::circ::{self, SmallWidthCircuit};
use inplace_core::gf::FieldSpec;
use inplace_core::linalg::Mat;
use inplace_core::route::{self, GameParams, PermTable, RandomHunter};
use inplace_core::tape::{self, programs::RotateLeftProgram, SpaceLedger, StepProgram};
use inplace_core::{ipla, mcomp, trial_rng, Bits};
use rand::Rng;
use serde::Serialize;

#[derive(Serialize, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        pass,
        detail,
    }
}

pub fn run_suite(seed: u64, quick: bool) -> Vec<CheckResult> {
    let scale = |full: usize, q: usize| if quick { q } else { full };
    let mut out = Vec::new();

    // worked 3x3 instance over GF(37)
    {
        let f = FieldSpec::from_order(37).unwrap();
        let u = Mat::from_indices(&f, 3, 3, &[2, 1, 5, 0, 4, 2, 0, 0, 3]);
        let u = ipla::AlmostUpperTriangular::new(u).unwrap();
        let mut v = vec![
            f.elem_from_index(1),
            f.elem_from_index(4),
            f.elem_from_index(5),
        ];
        let ledger = SpaceLedger::new();
        ipla::mul_almost_upper_inplace(&u, &mut v, &ledger).unwrap();
        let got: Vec<u64> = v.iter().map(|e| f.index_of(e)).collect();
        out.push(check(
            "almost-upper worked example",
            got == vec![31, 26, 15] && ledger.peak_aux_cells() == 2,
            format!("{got:?}, aux {}", ledger.peak_aux_cells()),
        ));
    }

    // in-place matvec vs naive product
    {
        let trials = scale(1000, 50);
        let mut failures = 0usize;
        for (qi, q) in [2u64, 4, 8, 5].into_iter().enumerate() {
            let f = FieldSpec::from_order(q).unwrap();
            let bad = run_trials(trials, |t| {
                let mut rng = trial_rng(seed ^ 0x11, (qi * trials + t) as u64);
                let n = rng.random_range(2..=8);
                let a = Mat::random(&f, n, n, &mut rng);
                let mut x: Vec<_> = (0..n).map(|_| f.random_elem(&mut rng)).collect();
                let expect = a.matvec(&x).unwrap();
                let ledger = SpaceLedger::new();
                ipla::matvec_inplace(&a, &mut x, false, &ledger).unwrap();
                (x != expect) as usize
            })
            .into_iter()
            .sum::<usize>();
            failures += bad;
        }
        out.push(check(
            "matvec oracle equivalence",
            failures == 0,
            format!("{failures} mismatches over 4 fields x {trials} trials"),
        ));
    }

    // in-place inversion with catalytic restore
    {
        let trials = scale(200, 10);
        let n = if quick { 4 } else { 6 };
        let f = FieldSpec::from_order(4).unwrap();
        let failures: usize = run_trials(trials, |t| {
            let mut rng = trial_rng(seed ^ 0x22, t as u64);
            let a = Mat::random_invertible(&f, n, &mut rng);
            let mut cells = a.entries().to_vec();
            let mut cat: Vec<_> = (0..mcomp::ensure_invertible_cells(n, &f))
                .map(|_| f.random_elem(&mut rng))
                .collect();
            let cat0 = cat.clone();
            let ledger = SpaceLedger::new();
            ipla::invert_inplace(&mut cells, &mut cat, n, &f, false, &ledger).unwrap();
            let got = ipla::mat_from_cells(&f, n, &cells);
            (a.mul(&got).unwrap() != Mat::identity(&f, n) || cat != cat0) as usize
        })
        .into_iter()
        .sum();
        out.push(check(
            "in-place inversion + catalytic restore",
            failures == 0,
            format!("{failures} failures over {trials} trials at n = {n}"),
        ));
    }

    // compression round trips
    {
        let trials = scale(1000, 60);
        let f4 = FieldSpec::from_order(4).unwrap();
        // every singular 2x2 over GF(4), bit-level
        let mut exact_bad = 0;
        for v in 0..256u64 {
            let m = Mat::from_indices(&f4, 2, 2, &[v & 3, v >> 2 & 3, v >> 4 & 3, v >> 6 & 3]);
            if m.is_invertible() {
                continue;
            }
            let mut cells = vec![f4.zero(); 4];
            mcomp::write_block(&mut cells, &m);
            let mut tape = Bits::zeros(8);
            for (i, e) in cells.iter().enumerate() {
                tape.splice(i * 2, &f4.elem_to_bits(e));
            }
            let (packed, _) = mcomp::comp_exact(&tape, 2, &f4).unwrap();
            if packed.len() != 7 || mcomp::decomp_exact(&packed, 2, &f4).unwrap() != tape {
                exact_bad += 1;
            }
        }
        let f3 = FieldSpec::from_order(3).unwrap();
        let n = 4;
        let s = mcomp::min_seq_len(n, &f3);
        let seq_bad: usize = run_trials(trials, |t| {
            let mut rng = trial_rng(seed ^ 0x33, t as u64);
            let mut cells = Vec::new();
            for _ in 0..s {
                let m = Mat::random_singular(&f3, n, &mut rng);
                let mut block = vec![f3.zero(); n * n];
                mcomp::write_block(&mut block, &m);
                cells.extend(block);
            }
            let orig = cells.clone();
            mcomp::comp_seq(&mut cells, n, &f3).unwrap();
            let zero_ok = cells.last().unwrap().is_zero();
            mcomp::decomp_seq(&mut cells, n, &f3).unwrap();
            (!zero_ok || cells != orig) as usize
        })
        .into_iter()
        .sum();
        let ensure_trials = scale(500, 25);
        let ensure_bad: usize = run_trials(ensure_trials, |t| {
            let mut rng = trial_rng(seed ^ 0x44, t as u64);
            let n = 4;
            let mut cells: Vec<_> = (0..mcomp::ensure_invertible_cells(n, &f4))
                .map(|_| f4.random_elem(&mut rng))
                .collect();
            let orig = cells.clone();
            let key = mcomp::ensure_invertible(&mut cells, n, &f4).unwrap();
            let inv_ok = mcomp::read_block(&cells, n, &f4).is_invertible();
            mcomp::restore(&mut cells, &key, n, &f4).unwrap();
            (!inv_ok || cells != orig) as usize
        })
        .into_iter()
        .sum();
        out.push(check(
            "compression round trips",
            exact_bad == 0 && seq_bad == 0 && ensure_bad == 0,
            format!(
                "exact {exact_bad}, seq {seq_bad}/{trials}, ensure {ensure_bad}/{ensure_trials}"
            ),
        ));
    }

    // schedule validity and in-place circuit evaluation
    {
        let trials = scale(1000, 80);
        let sched_bad: usize = run_trials(trials, |t| {
            let mut rng = trial_rng(seed ^ 0x55, t as u64);
            let w = rng.random_range(1..=16);
            let gates = (0..w)
                .map(|_| circ::Gate {
                    tt: rng.random_range(0..16) as u8,
                    a: rng.random_range(0..w),
                    b: rng.random_range(0..w),
                })
                .collect();
            let layer = circ::Layer::new(w, gates);
            let g = circ::build_dep_graph(&layer);
            match circ::deletion_orders(&g) {
                Ok((pi1, pi2)) => circ::validate_schedule(&g, &pi1, &pi2).is_err() as usize,
                Err(_) => 1,
            }
        })
        .into_iter()
        .sum();
        let eval_bad: usize = run_trials(trials, |t| {
            let mut rng = trial_rng(seed ^ 0x66, t as u64);
            let n = rng.random_range(1..=16usize);
            let width = n + rng.random_range(0..=4usize.min(n));
            let depth = rng.random_range(0..=8);
            let layers = (0..depth)
                .map(|_| {
                    circ::Layer::new(
                        width,
                        (0..width)
                            .map(|_| circ::Gate {
                                tt: rng.random_range(0..16) as u8,
                                a: rng.random_range(0..width),
                                b: rng.random_range(0..width),
                            })
                            .collect(),
                    )
                })
                .collect();
            let c = SmallWidthCircuit::new(n, width, layers).unwrap();
            let x: Bits = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let ledger = SpaceLedger::new();
            let got = circ::eval_circuit_inplace(&c, &x, &ledger).unwrap();
            (got != c.eval_direct(&x, n) || ledger.peak_aux_cells() > 2) as usize
        })
        .into_iter()
        .sum();
        out.push(check(
            "schedule validity + circuit evaluation",
            sched_bad == 0 && eval_bad == 0,
            format!("schedules {sched_bad}/{trials}, evals {eval_bad}/{trials}"),
        ));
    }

    // lossy-code witnesses with tape restoration
    {
        let trials = scale(1000, 40);
        let n = 8;
        let bad: usize = run_trials(trials, |t| {
            let mut rng = trial_rng(seed ^ 0x77, t as u64);
            let (c, d) = crate::random_lossy_pair(n, 3, &mut rng);
            let mut tape: Bits = (0..n * n).map(|_| rng.random_bool(0.5)).collect();
            let orig = tape.clone();
            let ledger = SpaceLedger::new();
            let x = circ::lossy_code_solve(&c, &d, &mut tape, &ledger).unwrap();
            let ok = d.eval_direct(&c.eval_direct(&x, n - 1), n) != x && tape == orig;
            (!ok) as usize
        })
        .into_iter()
        .sum();
        out.push(check(
            "lossy-code witness + restore",
            bad == 0,
            format!("{bad}/{trials} failures"),
        ));
    }

    // invertible-matrix encoding bijection
    {
        let counts: Vec<(usize, u64)> = (1..=4)
            .map(|n| {
                let mut bounds = Vec::new();
                for i in 0..n {
                    bounds.push((1u64 << n) - (1u64 << i));
                }
                (n, bounds.iter().product())
            })
            .collect();
        let pass = counts == vec![(1, 1), (2, 6), (3, 168), (4, 20160)] && {
            // exhaustive bijection at n = 3
            let n = 3;
            let mut seen = std::collections::HashSet::new();
            let mut ok = true;
            for a0 in 0..7u64 {
                for a1 in 0..6u64 {
                    for a2 in 0..4u64 {
                        let seq = vec![a0, a1, a2];
                        let m = route::encode_invertible(&seq, n).unwrap();
                        ok &= m.is_invertible();
                        ok &= seen.insert(m.row_masks.clone());
                        ok &= route::decode_invertible(&m).unwrap() == seq;
                    }
                }
            }
            ok && seen.len() == 168
        };
        out.push(check(
            "invertible-matrix encoding bijection",
            pass,
            format!("{counts:?}"),
        ));
    }

    // permutation routing with verified advice
    {
        let perms = scale(20, 3);
        let n = if quick { 6 } else { 8 };
        let bad: usize = run_trials(perms, |t| {
            let mut rng = trial_rng(seed ^ 0x88, t as u64);
            let f = PermTable::random(n, &mut rng);
            let advice = match route::find_advice(&f, 20_000, &mut rng) {
                Ok(a) => a,
                Err(_) => return 1,
            };
            let ledger = SpaceLedger::new();
            for x0 in 0..1u32 << n {
                let Some(pair) = advice
                    .iter()
                    .find(|p| route::is_conflict_avoiding(&f, x0, p))
                else {
                    return 1;
                };
                let mut x = x0;
                let Ok(trace) = route::route_inplace_traced(&f, &mut x, &advice, &ledger) else {
                    return 1;
                };
                if x != f.apply(x0) {
                    return 1;
                }
                for (i, &v) in trace.iter().enumerate() {
                    if v != route::expected_view(pair, x0, f.apply(x0), i, n) {
                        return 1;
                    }
                }
            }
            0
        })
        .into_iter()
        .sum();
        out.push(check(
            "in-place permutation routing",
            bad == 0,
            format!("{bad}/{perms} permutations failed at n = {n}"),
        ));
    }

    // randomized routing congestion
    {
        let trials = scale(100, 20);
        let d = 10;
        let f = PermTable::bit_reversal(d);
        let mut rng = trial_rng(seed ^ 0x99, 0);
        let maxima = route::valiant_congestion(&f, trials, &mut rng);
        let bound = (4 * d * d) as u32;
        let good = maxima.iter().filter(|&&m| m <= bound).count();
        let need = trials * 95 / 100;
        out.push(check(
            "two-phase routing congestion",
            good >= need,
            format!("{good}/{trials} trials under {bound}"),
        ));
    }

    // cycle-hiding game
    {
        let seeds = scale(50, 6);
        let d = if quick { 6 } else { 10 };
        let params = GameParams::scaled(d, 3, 64);
        let results = run_trials(seeds, |t| {
            let mut rng = trial_rng(seed ^ 0xaa, t as u64);
            let report = route::cycle_hiding_game(params.clone(), &mut RandomHunter, &mut rng);
            (report.hider_won(1 << d), report.revealed_cycle_found)
        });
        let wins = results.iter().filter(|r| r.0).count();
        let cycles = results.iter().filter(|r| r.1).count();
        let need = seeds * 9 / 10;
        out.push(check(
            "cycle-hiding game",
            cycles == 0 && wins >= need,
            format!("{wins}/{seeds} hider wins, {cycles} revealed cycles"),
        ));
    }

    // configuration-graph inversion
    {
        let program = RotateLeftProgram { main: 8 };
        let budget = (1usize << 12) * 16;
        let mut success = 0;
        let mut sound = true;
        for y in 0..256u64 {
            let yb = Bits::from_u64(y, 8);
            if let Ok(x) = tape::invert_by_configuration_graph(&program, &yb, None, budget) {
                success += 1;
                let image = tape::TapeImage::bit_tape(x, program.control_width());
                let (out_img, _) = tape::run(&program, image, 1000).unwrap();
                sound &= out_img.main == yb;
            }
        }
        out.push(check(
            "configuration-graph inversion",
            sound && success * 10 >= 256 * 9,
            format!("{success}/256 inverted, soundness {sound}"),
        ));
    }

    out
}
