//! Self-check suite run by `qstore verify`.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::codec::{coupling_circuit_equivalence, decode, encode, generator_count, Instruction};
use crate::generators::{
    generator_matrix, phase_shift_equivalence_check, u_of_theta, Angle, Generator,
};
use crate::linalg::{
    apply, fidelity_up_to_phase, is_self_inverse, SquareMatrix, StateVector, MATRIX_TOL,
};
use crate::retrieval::{
    gb_branch_amplitudes, make_angle_state, retrieve_with_correction, weighted_decomposition_holds,
    Retrieval,
};
use crate::rng::{ForcedOutcomes, RandomStream};

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// Largest data register exercised by the randomized and exhaustive checks.
    pub num_qubits: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            num_qubits: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: u64,
    pub detail: String,
}

/// Builds `U_B(θ)`; swapped out by mutation tests.
pub type UnitaryBuilder<'a> = &'a dyn Fn(&Generator, Angle) -> SquareMatrix;

pub fn run_checks(cfg: &VerifyConfig) -> Vec<CheckResult> {
    run_checks_with(cfg, &u_of_theta)
}

pub fn run_checks_with(cfg: &VerifyConfig, unitary: UnitaryBuilder<'_>) -> Vec<CheckResult> {
    let n = cfg.num_qubits.clamp(1, 10);
    vec![
        exact_probability(n, cfg.seed, unitary),
        correction_algebra(n, cfg.seed, unitary),
        coupling_equivalence(n.min(6)),
        phase_shift(cfg.seed),
        codec_roundtrip(n.max(8)),
        generator_counting(n.max(8)),
        weighted_decomposition(n, cfg.seed, unitary),
    ]
}

/// A random generator on at most `max_qubits` data qubits: a σ_z subset,
/// the phase-shift generator, or a dense Householder reflection `I − 2|v⟩⟨v|`.
pub fn random_generator<R: Rng + ?Sized>(max_qubits: usize, rng: &mut R) -> Generator {
    let n = rng.gen_range(1..=max_qubits);
    match rng.gen_range(0..3) {
        0 => {
            let mask = rng.gen_range(1usize..1 << n);
            Generator::pauli_z_subset(n, (1..=n).filter(|q| mask >> (n - q) & 1 == 1))
                .expect("nonempty subset")
        }
        1 => Generator::phase_shift(n).expect("valid width"),
        _ => {
            let v = StateVector::random(n, rng).expect("valid width");
            let dim = v.dim();
            let mut entries = Vec::with_capacity(dim * dim);
            for r in 0..dim {
                for c in 0..dim {
                    let delta = if r == c { 1.0 } else { 0.0 };
                    entries
                        .push(Complex64::new(delta, 0.0) - 2.0 * v.amps()[r] * v.amps()[c].conj());
                }
            }
            Generator::dense(SquareMatrix::from_row_major(dim, entries).expect("square"))
                .expect("reflections are self-inverse")
        }
    }
}

fn random_angle<R: Rng + ?Sized>(rng: &mut R) -> Angle {
    Angle::new(rng.gen_range(-2.0 * PI..2.0 * PI)).expect("finite")
}

fn result(name: &'static str, cases: u64, failures: Vec<String>) -> CheckResult {
    CheckResult {
        name,
        passed: failures.is_empty(),
        cases,
        detail: if failures.is_empty() {
            "ok".into()
        } else {
            failures.into_iter().take(3).collect::<Vec<_>>().join("; ")
        },
    }
}

fn exact_probability(n: usize, seed: u64, unitary: UnitaryBuilder<'_>) -> CheckResult {
    let mut rng = RandomStream::substream(seed, 1);
    let mut failures = Vec::new();
    let cases = 100;
    for case in 0..cases {
        let g = random_generator(n, &mut rng);
        let theta = random_angle(&mut rng);
        let d = StateVector::random(g.num_data_qubits(), &mut rng).expect("valid width");
        let b = gb_branch_amplitudes(&make_angle_state(theta), &g, &d).expect("matching widths");
        if (b.success_weight - 0.5).abs() > 1e-12 || (b.failure_weight - 0.5).abs() > 1e-12 {
            failures.push(format!(
                "case {case} ({g}, θ={theta}): weights {} / {}",
                b.success_weight, b.failure_weight
            ));
            continue;
        }
        let want_ok = apply(&unitary(&g, theta), &d);
        let want_bad = apply(&unitary(&g, -theta), &d);
        let fid = |got: &Option<StateVector>, want: crate::Result<StateVector>| match (got, want) {
            (Some(got), Ok(want)) => fidelity_up_to_phase(got, &want).unwrap_or(0.0),
            _ => 0.0,
        };
        let (f_ok, f_bad) = (fid(&b.success, want_ok), fid(&b.failure, want_bad));
        if f_ok < 1.0 - 1e-10 || f_bad < 1.0 - 1e-10 {
            failures.push(format!(
                "case {case} ({g}, θ={theta}): branch fidelities {f_ok} / {f_bad}"
            ));
        }
    }
    result("exact_probability", cases, failures)
}

fn correction_algebra(n: usize, seed: u64, unitary: UnitaryBuilder<'_>) -> CheckResult {
    let mut rng = RandomStream::substream(seed, 2);
    let mut failures = Vec::new();
    let mut cases = 0;
    for k in 0..=10u32 {
        for _ in 0..5 {
            cases += 1;
            let g = random_generator(n, &mut rng);
            let theta = random_angle(&mut rng);
            let d = StateVector::random(g.num_data_qubits(), &mut rng).expect("valid width");
            let mut forced = ForcedOutcomes::always(1);
            let residual = if k == 0 {
                d.clone()
            } else {
                match retrieve_with_correction(theta, &g, &d, &mut forced, k) {
                    Ok(Retrieval::Exhausted { residual, .. }) => residual,
                    other => {
                        failures.push(format!("k={k}: unexpected {other:?}"));
                        continue;
                    }
                }
            };
            let factor = -((1u64 << k) as f64 - 1.0);
            let want = Angle::new(factor * theta.radians())
                .map_err(|e| e.to_string())
                .and_then(|a| apply(&unitary(&g, a), &d).map_err(|e| e.to_string()));
            let f =
                want.and_then(|w| fidelity_up_to_phase(&residual, &w).map_err(|e| e.to_string()));
            match f {
                Ok(f) if f >= 1.0 - 1e-9 => {}
                other => failures.push(format!("k={k} ({g}, θ={theta}): {other:?}")),
            }
        }
    }
    result("correction_algebra", cases, failures)
}

fn coupling_equivalence(n_max: usize) -> CheckResult {
    let mut failures = Vec::new();
    let mut cases = 0;
    for n in 1..=n_max {
        for mask in 1usize..(1 << n) {
            cases += 1;
            let subset: BTreeSet<usize> = (1..=n).filter(|q| mask >> (n - q) & 1 == 1).collect();
            if !coupling_circuit_equivalence(n, &subset) {
                failures.push(format!("n={n} S={subset:?}"));
            }
        }
    }
    result("coupling_equivalence", cases, failures)
}

fn phase_shift(seed: u64) -> CheckResult {
    let mut rng = RandomStream::substream(seed, 3);
    let mut failures = Vec::new();
    let mut cases = 0;
    for n in 1..=4 {
        let g = Generator::phase_shift(n).expect("valid width");
        if !is_self_inverse(&generator_matrix(&g), MATRIX_TOL) {
            failures.push(format!("n={n}: generator not self-inverse"));
        }
        for _ in 0..20 {
            cases += 1;
            let theta = random_angle(&mut rng);
            if !phase_shift_equivalence_check(n, theta) {
                failures.push(format!("n={n} θ={theta}"));
            }
        }
    }
    result("phase_shift", cases, failures)
}

fn subsets(n: usize) -> impl Iterator<Item = BTreeSet<usize>> {
    (1usize..(1 << n)).map(move |mask| (1..=n).filter(|q| mask >> (n - q) & 1 == 1).collect())
}

fn codec_roundtrip(n_max: usize) -> CheckResult {
    let mut failures = Vec::new();
    let mut cases = 0;
    for n in 1..=n_max {
        for subset in subsets(n) {
            for instr in [
                Instruction::Coupling {
                    subset: subset.clone(),
                    theta: Angle::zero(),
                },
                Instruction::NotGates {
                    subset: subset.clone(),
                },
            ] {
                cases += 1;
                match encode(&instr, n).and_then(|(w, _)| decode(&w)) {
                    Ok(skel) if skel == instr.skeleton() => {}
                    other => failures.push(format!("n={n} {instr}: {other:?}")),
                }
            }
        }
    }
    result("codec_roundtrip", cases, failures)
}

fn generator_counting(n_max: usize) -> CheckResult {
    let mut failures = Vec::new();
    for n in 1..=n_max {
        let words: HashSet<String> = subsets(n)
            .filter_map(|s| {
                encode(
                    &Instruction::Coupling {
                        subset: s,
                        theta: Angle::zero(),
                    },
                    n,
                )
                .ok()
            })
            .map(|(w, _)| w.to_string())
            .collect();
        let expected = generator_count(n as u32);
        if words.len() as u64 != expected {
            failures.push(format!(
                "n={n}: {} distinct words, expected {expected}",
                words.len()
            ));
        }
    }
    result("generator_count", n_max as u64, failures)
}

fn weighted_decomposition(n: usize, seed: u64, unitary: UnitaryBuilder<'_>) -> CheckResult {
    let mut rng = RandomStream::substream(seed, 4);
    let mut failures = Vec::new();
    let cases = 50;
    for case in 0..cases {
        let g = random_generator(n, &mut rng);
        let theta = random_angle(&mut rng);
        if !weighted_decomposition_holds(&unitary(&g, theta), &g, theta) {
            failures.push(format!("case {case} ({g}, θ={theta})"));
        }
    }
    result("weighted_decomposition", cases, failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let results = run_checks(&VerifyConfig::default());
        assert_eq!(results.len(), 7);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        let coupling = results
            .iter()
            .find(|r| r.name == "coupling_equivalence")
            .unwrap();
        // 1 + 3 + 7 + 15 + 31 subsets for n ≤ 5
        assert_eq!(coupling.cases, 57);
        let codec = results
            .iter()
            .find(|r| r.name == "codec_roundtrip")
            .unwrap();
        assert_eq!(
            codec.cases,
            (1..=8).map(|n| 2 * ((1u64 << n) - 1)).sum::<u64>()
        );
    }

    #[test]
    fn sign_flip_breaks_decomposition_check() {
        let flipped = |g: &Generator, t: Angle| u_of_theta(g, -t);
        let results = run_checks_with(&VerifyConfig::default(), &flipped);
        let check = results
            .iter()
            .find(|r| r.name == "weighted_decomposition")
            .unwrap();
        assert!(!check.passed);
    }

    #[test]
    fn random_generators_are_valid() {
        let mut rng = RandomStream::new(12);
        for _ in 0..30 {
            let g = random_generator(4, &mut rng);
            assert!(is_self_inverse(&generator_matrix(&g), MATRIX_TOL), "{g}");
            assert!((1..=4).contains(&g.num_data_qubits()));
        }
    }
}
