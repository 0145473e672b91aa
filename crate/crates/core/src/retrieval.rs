//! Angle states and the probabilistic gate array `G_B`.
//!
//! `G_B` applies controlled-B (angle qubit as control), a Hadamard on the
//! angle qubit, and measures it. Outcome 0 leaves `U_B(θ)|d⟩`, outcome 1
//! leaves `U_B(−θ)|d⟩`, each with probability 1/2. After `k` failures the
//! data holds `U_B(−(2^k − 1)θ)|d⟩`, and retrying with `|2^k θ⟩` either
//! finishes the job or fails again with the same odds.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{generator_matrix, u_of_theta, Angle, Generator};
use crate::linalg::{norm_sqr, Amplitude, SquareMatrix, StateVector};
use crate::rng::{OutcomeSampler, RandomStream};

/// Retry cap for the correction loop.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 64;

/// Single-qubit carrier `cos(θ/2)|0⟩ − i·sin(θ/2)|1⟩`.
///
/// Not `Clone`: measuring it inside [`gb_step`] consumes it. States received
/// over the wire carry no `θ`.
#[derive(Debug, PartialEq)]
pub struct AngleState {
    theta: Option<Angle>,
    state: StateVector,
}

impl AngleState {
    /// Accepts arbitrary amplitudes normalized within [`crate::linalg::INPUT_NORM_TOL`].
    pub fn from_amplitudes(amp0: Amplitude, amp1: Amplitude) -> Result<Self> {
        Ok(Self {
            theta: None,
            state: StateVector::new(vec![amp0, amp1])?,
        })
    }

    /// The encoded angle, known only on the preparing side.
    pub fn theta(&self) -> Option<Angle> {
        self.theta
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn amplitudes(&self) -> (Amplitude, Amplitude) {
        (self.state.amps()[0], self.state.amps()[1])
    }
}

pub fn make_angle_state(theta: Angle) -> AngleState {
    let half = theta.radians() / 2.0;
    let amps = vec![
        Complex64::new(half.cos(), 0.0),
        Complex64::new(0.0, -half.sin()),
    ];
    AngleState {
        theta: Some(theta),
        state: StateVector::new(amps).expect("cos² + sin² = 1"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalOutcome {
    pub success: bool,
    pub measured_bit: u8,
    pub post_data: StateVector,
    pub attempt_angle: Option<Angle>,
}

/// Data-register states conditioned on each angle-qubit outcome, with the
/// outcome probabilities. A branch of zero weight has no state.
#[derive(Debug, Clone)]
pub struct GbBranches {
    pub success: Option<StateVector>,
    pub failure: Option<StateVector>,
    pub success_weight: f64,
    pub failure_weight: f64,
}

fn check_data(g: &Generator, data: &StateVector) -> Result<()> {
    if data.num_qubits() != g.num_data_qubits() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            actual: data.dim(),
        });
    }
    Ok(())
}

/// Evolves `|angle⟩ ⊗ |data⟩` through controlled-B and the Hadamard, then
/// splits on the angle qubit.
pub fn gb_branch_amplitudes(
    angle: &AngleState,
    g: &Generator,
    data: &StateVector,
) -> Result<GbBranches> {
    check_data(g, data)?;
    let joint = angle.state.tensor(data)?;
    let d = data.dim();
    let (upper, lower) = joint.amps().split_at(d);

    // controlled-B: B acts on the block where the angle qubit is |1⟩
    let lower = g.apply_to(lower);

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero_block: Vec<Amplitude> = upper.iter().zip(&lower).map(|(a, b)| (a + b) * h).collect();
    let one_block: Vec<Amplitude> = upper.iter().zip(&lower).map(|(a, b)| (a - b) * h).collect();

    let success_weight = norm_sqr(&zero_block);
    let failure_weight = norm_sqr(&one_block);
    let collapse =
        |block: Vec<Amplitude>, w: f64| (w > 0.0).then(|| StateVector::from_unnormalized(block, w));
    Ok(GbBranches {
        success: collapse(zero_block, success_weight),
        failure: collapse(one_block, failure_weight),
        success_weight,
        failure_weight,
    })
}

/// One run of `G_B`: consumes the angle state, samples the angle-qubit
/// measurement and returns the collapsed data register.
pub fn gb_step<S: OutcomeSampler + ?Sized>(
    angle: AngleState,
    g: &Generator,
    data: &StateVector,
    rng: &mut S,
) -> Result<RetrievalOutcome> {
    let branches = gb_branch_amplitudes(&angle, g, data)?;
    let total = branches.success_weight + branches.failure_weight;
    let bit = rng.sample(branches.success_weight / total);
    let post_data = match bit {
        0 => branches.success,
        _ => branches.failure,
    }
    .ok_or(Error::ImpossibleOutcome(bit))?;
    Ok(RetrievalOutcome {
        success: bit == 0,
        measured_bit: bit,
        post_data,
        attempt_angle: angle.theta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Retrieval {
    /// `state` equals `U_B(θ)|d⟩` up to global phase.
    Success { state: StateVector, attempts: u32 },
    /// Every attempt failed; `residual` equals `U_B(−(2^k − 1)θ)|d⟩`.
    Exhausted {
        residual: StateVector,
        failures: u32,
    },
}

impl Retrieval {
    pub fn attempts(&self) -> u32 {
        match self {
            Retrieval::Success { attempts, .. } => *attempts,
            Retrieval::Exhausted { failures, .. } => *failures,
        }
    }

    pub fn state(&self) -> &StateVector {
        match self {
            Retrieval::Success { state, .. } => state,
            Retrieval::Exhausted { residual, .. } => residual,
        }
    }
}

/// Repeat-until-success: attempt `m` (1-based) uses the angle state for
/// `2^{m−1}·θ` on the data left by the previous failure.
pub fn retrieve_with_correction<S: OutcomeSampler + ?Sized>(
    theta: Angle,
    g: &Generator,
    data: &StateVector,
    rng: &mut S,
    max_attempts: u32,
) -> Result<Retrieval> {
    if max_attempts == 0 {
        return Err(Error::RetryLimit(0));
    }
    check_data(g, data)?;
    let mut current = data.clone();
    let mut angle = theta;
    for attempt in 1..=max_attempts {
        let outcome = gb_step(make_angle_state(angle), g, &current, rng)?;
        if outcome.success {
            return Ok(Retrieval::Success {
                state: outcome.post_data,
                attempts: attempt,
            });
        }
        current = outcome.post_data;
        angle = angle.doubled();
    }
    Ok(Retrieval::Exhausted {
        residual: current,
        failures: max_attempts,
    })
}

/// Data states on which the weighted decomposition is probed: the first basis
/// states and a fixed superposition with distinct phases.
fn probe_states(g: &Generator) -> Vec<StateVector> {
    let n = g.num_data_qubits();
    let dim = g.dim();
    let mut probes: Vec<StateVector> = (0..dim.min(8))
        .map(|i| StateVector::basis(n, i).expect("index in range"))
        .collect();
    let spread: Vec<Amplitude> = (0..dim)
        .map(|k| Complex64::from_polar(1.0 + k as f64 / dim as f64, 0.7 * k as f64))
        .collect();
    let w = norm_sqr(&spread);
    probes.push(StateVector::from_unnormalized(spread, w));
    probes
}

/// Smallest success weight seen across the probe states, and the largest.
fn success_weight_range(g: &Generator, theta: Angle) -> (f64, f64) {
    probe_states(g)
        .iter()
        .map(|d| {
            gb_branch_amplitudes(&make_angle_state(theta), g, d)
                .expect("probe matches generator")
                .success_weight
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
            (lo.min(w), hi.max(w))
        })
}

/// Checks `√p_θ·U(θ) = α(θ)√p_0·E + β(θ)√p_1·B` for a candidate `U(θ)`,
/// where `α, β` are the angle-state amplitudes and `p_θ, p_0, p_1` are the
/// success weights of this gate array at `θ`, `0` and `π`. Also requires
/// every weight to be exactly 1/2 and independent of the data state.
pub fn weighted_decomposition_holds(u: &SquareMatrix, g: &Generator, theta: Angle) -> bool {
    const TOL: f64 = 1e-12;
    let mut weights = Vec::with_capacity(3);
    for t in [
        theta,
        Angle::zero(),
        Angle::new(std::f64::consts::PI).expect("finite"),
    ] {
        let (lo, hi) = success_weight_range(g, t);
        if (lo - 0.5).abs() > TOL || (hi - 0.5).abs() > TOL {
            return false;
        }
        weights.push(lo);
    }
    let (p_theta, p_0, p_1) = (weights[0], weights[1], weights[2]);
    let (alpha, beta) = make_angle_state(theta).amplitudes();

    let lhs = u.scale(Complex64::new(p_theta.sqrt(), 0.0));
    let rhs = SquareMatrix::identity(g.dim())
        .scale(alpha * p_0.sqrt())
        .add(&generator_matrix(g).scale(beta * p_1.sqrt()));
    match rhs {
        Ok(rhs) if rhs.dim() == u.dim() => lhs.approx_eq(&rhs, TOL),
        _ => false,
    }
}

/// [`weighted_decomposition_holds`] for this crate's `U_B(θ)`.
pub fn verify_weighted_decomposition(g: &Generator, theta: Angle) -> bool {
    weighted_decomposition_holds(&u_of_theta(g, theta), g, theta)
}

/// Outcome counts of a Monte Carlo campaign over the correction loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    #[serde(rename = "seed")]
    pub rng_seed: u64,
    pub trials: u64,
    /// Trials that succeeded on the first attempt.
    pub successes: u64,
    pub mean_attempts: f64,
    /// attempts-to-success → number of trials.
    pub histogram: BTreeMap<u32, u64>,
    #[serde(skip_serializing_if = "is_zero")]
    pub exhausted: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl TrialStats {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// Fraction of trials that needed exactly `m` attempts.
    pub fn bucket_fraction(&self, m: u32) -> f64 {
        self.histogram.get(&m).copied().unwrap_or(0) as f64 / self.trials as f64
    }
}

/// Runs `trials` independent correction loops in parallel; trial `i` draws
/// from substream `i` of `seed`, so the result depends only on the inputs.
pub fn monte_carlo(
    g: &Generator,
    theta: Angle,
    data: &StateVector,
    trials: u64,
    seed: u64,
) -> Result<TrialStats> {
    monte_carlo_capped(g, theta, data, trials, seed, DEFAULT_MAX_ATTEMPTS)
}

pub fn monte_carlo_capped(
    g: &Generator,
    theta: Angle,
    data: &StateVector,
    trials: u64,
    seed: u64,
    max_attempts: u32,
) -> Result<TrialStats> {
    if trials == 0 {
        return Err(Error::InvalidCommand("trials must be at least 1".into()));
    }
    check_data(g, data)?;
    let results: Vec<Retrieval> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::substream(seed, i);
            retrieve_with_correction(theta, g, data, &mut rng, max_attempts)
        })
        .collect::<Result<_>>()?;

    let mut histogram = BTreeMap::new();
    let mut exhausted = 0;
    let mut total_attempts = 0u64;
    for r in &results {
        total_attempts += u64::from(r.attempts());
        match r {
            Retrieval::Success { attempts, .. } => *histogram.entry(*attempts).or_insert(0) += 1,
            Retrieval::Exhausted { .. } => exhausted += 1,
        }
    }
    Ok(TrialStats {
        rng_seed: seed,
        trials,
        successes: histogram.get(&1).copied().unwrap_or(0),
        mean_attempts: total_attempts as f64 / trials as f64,
        histogram,
        exhausted,
    })
}
