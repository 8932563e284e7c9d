//! Exact dense statevector simulation.
//!
//! A [`State`] holds all `2^n` complex amplitudes of an `n`-qubit register.
//! Qubit `q` corresponds to bit `q` of the basis-state index (LSB-first), so
//! basis state `|x_{n-1} … x_1 x_0⟩` lives at index `Σ x_q · 2^q`. Gates are
//! applied in place over strided amplitude pairs; no gate matrix is ever
//! materialized. Large registers split the amplitude array into disjoint
//! blocks that are processed in parallel.

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default cap on register width: 24 qubits is 256 MiB of amplitudes.
pub const DEFAULT_QUBIT_LIMIT: usize = 24;

/// Amplitude count above which gate application parallelizes across blocks.
const PARALLEL_THRESHOLD: usize = 1 << 16;

/// Angle period of the RX gate; rotations are stored normalized into `[0, 4π)`.
const RX_PERIOD: f64 = 4.0 * std::f64::consts::PI;

/// Supported gate kinds.
///
/// `Rx`/`Crx` carry a rotation angle; `Mcz` flips the sign of basis states in
/// which the target and every control read 1 (with no controls it degenerates
/// to a plain `Z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Rx,
    Crx,
    H,
    X,
    Z,
    Mcz,
}

/// One gate: kind, target qubit, optional controls, optional angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    kind: GateKind,
    target: usize,
    controls: Vec<usize>,
    theta: f64,
}

impl Gate {
    /// X-axis rotation by `theta` radians on `target`.
    pub fn rx(target: usize, theta: f64) -> Gate {
        Gate {
            kind: GateKind::Rx,
            target,
            controls: Vec::new(),
            theta: normalize_angle(theta),
        }
    }

    /// Controlled X-axis rotation: rotates `target` by `theta` only in the
    /// `control = 1` subspace.
    pub fn crx(control: usize, target: usize, theta: f64) -> Result<Gate> {
        if control == target {
            return Err(Error::contract(format!(
                "CRX control and target must differ, both are {target}"
            )));
        }
        Ok(Gate {
            kind: GateKind::Crx,
            target,
            controls: vec![control],
            theta: normalize_angle(theta),
        })
    }

    pub fn h(target: usize) -> Gate {
        Gate {
            kind: GateKind::H,
            target,
            controls: Vec::new(),
            theta: 0.0,
        }
    }

    pub fn x(target: usize) -> Gate {
        Gate {
            kind: GateKind::X,
            target,
            controls: Vec::new(),
            theta: 0.0,
        }
    }

    pub fn z(target: usize) -> Gate {
        Gate {
            kind: GateKind::Z,
            target,
            controls: Vec::new(),
            theta: 0.0,
        }
    }

    /// Multi-controlled Z: sign flip on basis states where the target and all
    /// controls are 1. An empty control list gives a plain Z.
    pub fn mcz(controls: Vec<usize>, target: usize) -> Result<Gate> {
        if controls.contains(&target) {
            return Err(Error::contract(format!(
                "MCZ target {target} also appears in its control list"
            )));
        }
        let mut seen = controls.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != controls.len() {
            return Err(Error::contract("MCZ control list contains duplicates"));
        }
        Ok(Gate {
            kind: GateKind::Mcz,
            target,
            controls,
            theta: 0.0,
        })
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn controls(&self) -> &[usize] {
        &self.controls
    }

    /// Rotation angle, normalized into `[0, 4π)`. Zero for non-rotation gates.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Inverse gate: rotations negate their angle, everything else is
    /// self-inverse.
    pub fn adjoint(&self) -> Gate {
        match self.kind {
            GateKind::Rx | GateKind::Crx => Gate {
                kind: self.kind,
                target: self.target,
                controls: self.controls.clone(),
                theta: normalize_angle(-self.theta),
            },
            _ => self.clone(),
        }
    }

    /// Largest qubit index this gate touches.
    fn max_index(&self) -> usize {
        self.controls
            .iter()
            .copied()
            .fold(self.target, usize::max)
    }
}

fn normalize_angle(theta: f64) -> f64 {
    if !theta.is_finite() {
        // Invariant guarded upstream; keep the stored value well-defined.
        return 0.0;
    }
    theta.rem_euclid(RX_PERIOD)
}

/// An ordered gate list over a fixed-width register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Circuit {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Append a gate after checking it fits this register.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if gate.max_index() >= self.n_qubits {
            return Err(Error::contract(format!(
                "gate touches qubit {} but the circuit has {} qubits",
                gate.max_index(),
                self.n_qubits
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Append all gates of `other`, which must be at most as wide.
    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        for g in &other.gates {
            self.push(g.clone())?;
        }
        Ok(())
    }

    /// The inverse circuit: gates reversed, rotation angles negated.
    pub fn adjoint(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::adjoint).collect(),
        }
    }
}

/// Dense complex amplitude vector over `n_qubits`.
///
/// Norm is preserved to `1e-10` by every gate; the state is exclusively owned
/// during mutation and freely shareable once immutable.
#[derive(Debug, Clone)]
pub struct State {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl State {
    /// `|0…0⟩` over `n_qubits`, bounded by [`DEFAULT_QUBIT_LIMIT`].
    pub fn new(n_qubits: usize) -> Result<State> {
        State::with_limit(n_qubits, DEFAULT_QUBIT_LIMIT)
    }

    /// `|0…0⟩` with an explicit qubit cap.
    pub fn with_limit(n_qubits: usize, limit: usize) -> Result<State> {
        if n_qubits == 0 || n_qubits > limit {
            return Err(Error::QubitLimit {
                requested: n_qubits,
                limit,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(State { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `Σ |amp|²`; equals 1 up to numerical error for any reachable state.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability of observing the given basis-state index.
    pub fn probability(&self, basis_state: usize) -> f64 {
        self.amps[basis_state].norm_sqr()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::contract(format!(
                "qubit index {q} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Apply one gate in place.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        self.check_qubit(gate.target)?;
        for &c in &gate.controls {
            self.check_qubit(c)?;
        }
        match gate.kind {
            GateKind::Rx => {
                let half = gate.theta / 2.0;
                let c = Complex64::new(half.cos(), 0.0);
                let s = Complex64::new(0.0, -half.sin());
                self.mix_pairs(gate.target, 0, c, s);
            }
            GateKind::Crx => {
                let half = gate.theta / 2.0;
                let c = Complex64::new(half.cos(), 0.0);
                let s = Complex64::new(0.0, -half.sin());
                self.mix_pairs(gate.target, 1usize << gate.controls[0], c, s);
            }
            GateKind::H => {
                let f = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                self.for_each_pair(gate.target, 0, |a, b| (f * (a + b), f * (a - b)));
            }
            GateKind::X => {
                self.for_each_pair(gate.target, 0, |a, b| (b, a));
            }
            GateKind::Z => {
                let mask = 1usize << gate.target;
                self.phase_flip(mask);
            }
            GateKind::Mcz => {
                let mut mask = 1usize << gate.target;
                for &c in &gate.controls {
                    mask |= 1usize << c;
                }
                self.phase_flip(mask);
            }
        }
        Ok(())
    }

    /// Apply every gate of `circuit` in order. The register widths must match.
    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::contract(format!(
                "circuit is over {} qubits but the state has {}",
                circuit.n_qubits, self.n_qubits
            )));
        }
        for gate in &circuit.gates {
            self.apply_gate(gate)?;
        }
        Ok(())
    }

    /// RX-type pair mixing on `target`, restricted to indices where all bits
    /// of `control_mask` are set: `(a, b) ← (c·a + s·b, s·a + c·b)`.
    fn mix_pairs(&mut self, target: usize, control_mask: usize, c: Complex64, s: Complex64) {
        let step = 1usize << target;
        let block = 2 * step;
        let apply_block = |(bi, chunk): (usize, &mut [Complex64])| {
            let base = bi * block;
            let (lo, hi) = chunk.split_at_mut(step);
            for k in 0..step {
                if control_mask != 0 && (base + k) & control_mask != control_mask {
                    continue;
                }
                let a = lo[k];
                let b = hi[k];
                lo[k] = c * a + s * b;
                hi[k] = s * a + c * b;
            }
        };
        if self.amps.len() >= PARALLEL_THRESHOLD {
            self.amps
                .par_chunks_mut(block)
                .enumerate()
                .for_each(apply_block);
        } else {
            self.amps.chunks_mut(block).enumerate().for_each(apply_block);
        }
    }

    /// Generic pair update for uncontrolled single-qubit gates.
    fn for_each_pair<F>(&mut self, target: usize, control_mask: usize, f: F)
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64) + Sync,
    {
        let step = 1usize << target;
        let block = 2 * step;
        let apply_block = |(bi, chunk): (usize, &mut [Complex64])| {
            let base = bi * block;
            let (lo, hi) = chunk.split_at_mut(step);
            for k in 0..step {
                if control_mask != 0 && (base + k) & control_mask != control_mask {
                    continue;
                }
                let (a, b) = f(lo[k], hi[k]);
                lo[k] = a;
                hi[k] = b;
            }
        };
        if self.amps.len() >= PARALLEL_THRESHOLD {
            self.amps
                .par_chunks_mut(block)
                .enumerate()
                .for_each(apply_block);
        } else {
            self.amps.chunks_mut(block).enumerate().for_each(apply_block);
        }
    }

    /// Negate amplitudes of basis states where every bit of `mask` is set.
    fn phase_flip(&mut self, mask: usize) {
        let flip = |(i, a): (usize, &mut Complex64)| {
            if i & mask == mask {
                *a = -*a;
            }
        };
        if self.amps.len() >= PARALLEL_THRESHOLD {
            self.amps.par_iter_mut().enumerate().for_each(flip);
        } else {
            self.amps.iter_mut().enumerate().for_each(flip);
        }
    }

    /// Marginal probability table over the listed qubits.
    ///
    /// Entry `y` accumulates `|amp|²` over all basis states whose bit at
    /// `qubits[j]` equals bit `j` of `y`. Indices must be distinct.
    pub fn marginal_distribution(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        let mut sorted = qubits.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != qubits.len() {
            return Err(Error::contract("duplicate qubit index in marginal"));
        }
        let mut table = vec![0.0f64; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut y = 0usize;
            for (j, &q) in qubits.iter().enumerate() {
                y |= ((i >> q) & 1) << j;
            }
            table[y] += p;
        }
        Ok(table)
    }

    /// Per-qubit probabilities of reading 1, in one pass over the amplitudes.
    pub fn one_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        let mut probs = vec![0.0f64; qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (j, &q) in qubits.iter().enumerate() {
                if (i >> q) & 1 == 1 {
                    probs[j] += p;
                }
            }
        }
        Ok(probs)
    }

    /// Draw `shots` outcomes of the listed qubits, i.i.d. from the marginal
    /// distribution. Returns counts per outcome; deterministic given the rng
    /// seed (sampling is single-streamed).
    pub fn sample<R: Rng>(&self, qubits: &[usize], shots: usize, rng: &mut R) -> Result<Vec<u64>> {
        if shots == 0 {
            return Err(Error::contract("shots must be at least 1"));
        }
        let marginal = self.marginal_distribution(qubits)?;
        let dist = WeightedIndex::new(&marginal)
            .map_err(|e| Error::contract(format!("degenerate marginal distribution: {e}")))?;
        let mut counts = vec![0u64; marginal.len()];
        for _ in 0..shots {
            counts[dist.sample(rng)] += 1;
        }
        Ok(counts)
    }
}

/// Render outcome `y` over `k` qubits as a bitstring, leftmost character
/// first-listed qubit. With LSB-first indexing, pattern `"01"` means qubit 0
/// reads 0 and qubit 1 reads 1.
pub fn outcome_bitstring(y: usize, k: usize) -> String {
    (0..k).map(|j| if (y >> j) & 1 == 1 { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn assert_close(a: Complex64, b: Complex64, tol: f64) {
        assert!(
            (a - b).norm() < tol,
            "amplitudes differ: {a} vs {b} (tol {tol})"
        );
    }

    #[test]
    fn init_state_is_all_zeros_ket() {
        let s = State::new(1).unwrap();
        assert_close(s.amps[0], Complex64::new(1.0, 0.0), 1e-15);
        assert_close(s.amps[1], Complex64::new(0.0, 0.0), 1e-15);

        let s = State::new(3).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert_close(s.amps[0], Complex64::new(1.0, 0.0), 1e-15);
    }

    #[test]
    fn init_state_past_limit_is_resource_error() {
        let err = State::with_limit(25, 24).unwrap_err();
        match err {
            Error::QubitLimit { requested, limit } => {
                assert_eq!((requested, limit), (25, 24));
            }
            other => panic!("expected QubitLimit, got {other:?}"),
        }
    }

    #[test]
    fn rx_pi_flips_to_one_with_phase() {
        let mut s = State::new(1).unwrap();
        s.apply_gate(&Gate::rx(0, PI)).unwrap();
        assert_close(s.amps[0], Complex64::new(0.0, 0.0), 1e-12);
        assert_close(s.amps[1], Complex64::new(0.0, -1.0), 1e-12);
        assert!((s.probability(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crx_does_nothing_when_control_is_zero() {
        let mut s = State::new(2).unwrap();
        let before = s.amps.clone();
        s.apply_gate(&Gate::crx(1, 0, PI).unwrap()).unwrap();
        for (a, b) in s.amps.iter().zip(before.iter()) {
            assert_close(*a, *b, 1e-15);
        }
    }

    #[test]
    fn crx_rotates_when_control_is_one() {
        let mut s = State::new(2).unwrap();
        s.apply_gate(&Gate::x(1)).unwrap();
        s.apply_gate(&Gate::crx(1, 0, PI).unwrap()).unwrap();
        // |10> -> -i |11> (qubit 1 is the control, target qubit 0 flipped)
        assert!((s.probability(0b11) - 1.0).abs() < 1e-12);
        assert_close(s.amps[0b11], Complex64::new(0.0, -1.0), 1e-12);
    }

    #[test]
    fn h_twice_is_identity() {
        let mut s = State::new(1).unwrap();
        s.apply_gate(&Gate::h(0)).unwrap();
        s.apply_gate(&Gate::h(0)).unwrap();
        assert_close(s.amps[0], Complex64::new(1.0, 0.0), 1e-12);
        assert_close(s.amps[1], Complex64::new(0.0, 0.0), 1e-12);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let mut s = State::new(2).unwrap();
        s.apply_gate(&Gate::h(0)).unwrap();
        let before = s.amps.clone();
        s.apply_circuit(&Circuit::new(2)).unwrap();
        assert_eq!(s.amps.len(), before.len());
        for (a, b) in s.amps.iter().zip(before.iter()) {
            assert_close(*a, *b, 1e-15);
        }
    }

    #[test]
    fn rx_additivity() {
        let mut a = State::new(1).unwrap();
        a.apply_gate(&Gate::rx(0, PI / 2.0)).unwrap();
        a.apply_gate(&Gate::rx(0, PI / 2.0)).unwrap();
        let mut b = State::new(1).unwrap();
        b.apply_gate(&Gate::rx(0, PI)).unwrap();
        for (x, y) in a.amps.iter().zip(b.amps.iter()) {
            assert_close(*x, *y, 1e-12);
        }
    }

    #[test]
    fn circuit_width_mismatch_rejected() {
        let mut s = State::new(2).unwrap();
        let c = Circuit::new(3);
        assert!(matches!(s.apply_circuit(&c), Err(Error::Contract(_))));
    }

    #[test]
    fn push_rejects_out_of_range_gate() {
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::x(2)).is_err());
        assert!(c.push(Gate::crx(0, 1, 0.3).unwrap()).is_ok());
    }

    #[test]
    fn adjoint_negates_rotation_angles() {
        let mut c = Circuit::new(1);
        c.push(Gate::rx(0, 0.7)).unwrap();
        let adj = c.adjoint();
        assert!((adj.gates[0].theta() - (RX_PERIOD - 0.7)).abs() < 1e-12);
    }

    #[test]
    fn adjoint_is_involutive_up_to_normalization() {
        let c = random_circuit(4, 30, &mut ChaCha8Rng::seed_from_u64(7));
        let back = c.adjoint().adjoint();
        assert_eq!(c.len(), back.len());
        for (g, h) in c.gates().iter().zip(back.gates()) {
            assert_eq!(g.kind(), h.kind());
            assert_eq!(g.target(), h.target());
            assert_eq!(g.controls(), h.controls());
            assert!((g.theta() - h.theta()).abs() < 1e-12);
        }
    }

    #[test]
    fn mcz_flips_only_all_ones_subspace() {
        let mut s = State::new(3).unwrap();
        for q in 0..3 {
            s.apply_gate(&Gate::h(q)).unwrap();
        }
        let before = s.amps.clone();
        s.apply_gate(&Gate::mcz(vec![0, 1], 2).unwrap()).unwrap();
        for (i, (a, b)) in s.amps.iter().zip(before.iter()).enumerate() {
            let expected = if i == 0b111 { -*b } else { *b };
            assert_close(*a, expected, 1e-12);
        }
    }

    #[test]
    fn gate_constructors_reject_bad_wiring() {
        assert!(Gate::crx(1, 1, 0.2).is_err());
        assert!(Gate::mcz(vec![0, 2], 2).is_err());
        assert!(Gate::mcz(vec![0, 0], 1).is_err());
    }

    #[test]
    fn marginal_of_zero_state() {
        let s = State::new(1).unwrap();
        let m = s.marginal_distribution(&[0]).unwrap();
        assert_eq!(m, vec![1.0, 0.0]);
    }

    #[test]
    fn marginal_of_uniform_two_qubits() {
        let mut s = State::new(2).unwrap();
        s.apply_gate(&Gate::h(0)).unwrap();
        s.apply_gate(&Gate::h(1)).unwrap();
        let m = s.marginal_distribution(&[0, 1]).unwrap();
        for p in m {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_rejects_duplicate_index() {
        let s = State::new(2).unwrap();
        assert!(matches!(
            s.marginal_distribution(&[0, 0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn sample_deterministic_state_lands_in_one_bin() {
        let mut s = State::new(2).unwrap();
        s.apply_gate(&Gate::x(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let counts = s.sample(&[0, 1], 1000, &mut rng).unwrap();
        assert_eq!(counts[0b10], 1000);
        assert_eq!(counts.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn sample_uniform_within_four_sigma() {
        let mut s = State::new(2).unwrap();
        s.apply_gate(&Gate::h(0)).unwrap();
        s.apply_gate(&Gate::h(1)).unwrap();
        let shots = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let counts = s.sample(&[0, 1], shots, &mut rng).unwrap();
        let sigma = (shots as f64 * 0.25 * 0.75).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - 25_000.0).abs() < 4.0 * sigma,
                "bin count {c} outside 4 sigma of 25000"
            );
        }
    }

    #[test]
    fn sample_is_deterministic_given_seed() {
        let mut s = State::new(3).unwrap();
        for q in 0..3 {
            s.apply_gate(&Gate::h(q)).unwrap();
        }
        let a = s
            .sample(&[0, 1, 2], 5000, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = s
            .sample(&[0, 1, 2], 5000, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outcome_bitstring_is_lsb_first() {
        assert_eq!(outcome_bitstring(0b10, 2), "01");
        assert_eq!(outcome_bitstring(0b01, 2), "10");
        assert_eq!(outcome_bitstring(5, 4), "1010");
    }

    fn random_circuit<R: Rng>(n: usize, len: usize, rng: &mut R) -> Circuit {
        let mut c = Circuit::new(n);
        for _ in 0..len {
            let target = rng.gen_range(0..n);
            let gate = match rng.gen_range(0..6) {
                0 => Gate::rx(target, rng.gen_range(0.0..RX_PERIOD)),
                1 if n >= 2 => {
                    let mut control = rng.gen_range(0..n);
                    while control == target {
                        control = rng.gen_range(0..n);
                    }
                    Gate::crx(control, target, rng.gen_range(0.0..RX_PERIOD)).unwrap()
                }
                1 => Gate::rx(target, rng.gen_range(0.0..RX_PERIOD)),
                2 => Gate::h(target),
                3 => Gate::x(target),
                4 => Gate::z(target),
                _ => {
                    let controls: Vec<usize> = (0..n).filter(|&q| q != target).collect();
                    let take = rng.gen_range(0..=controls.len().min(3));
                    Gate::mcz(controls[..take].to_vec(), target).unwrap()
                }
            };
            c.push(gate).unwrap();
        }
        c
    }

    fn random_state<R: Rng>(n: usize, rng: &mut R) -> State {
        let mut s = State::new(n).unwrap();
        let warmup = random_circuit(n, 3 * n, rng);
        s.apply_circuit(&warmup).unwrap();
        s
    }

    #[test]
    fn norm_preserved_by_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=8);
            let mut s = random_state(n, &mut rng);
            let c = random_circuit(n, 50, &mut rng);
            s.apply_circuit(&c).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn circuit_then_adjoint_restores_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.gen_range(1..=10);
            let mut s = random_state(n, &mut rng);
            let before = s.amps.clone();
            let c = random_circuit(n, 50, &mut rng);
            s.apply_circuit(&c).unwrap();
            s.apply_circuit(&c.adjoint()).unwrap();
            let max_err = s
                .amps
                .iter()
                .zip(before.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(max_err < 1e-10, "unitarity violated: max error {max_err}");
        }
    }

    #[test]
    fn crx_gates_with_disjoint_targets_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.gen_range(3..=7);
            // Layer-style wiring: targets distinct and not used as controls.
            let t1 = rng.gen_range(0..n);
            let mut t2 = rng.gen_range(0..n);
            while t2 == t1 {
                t2 = rng.gen_range(0..n);
            }
            let free: Vec<usize> = (0..n).filter(|q| *q != t1 && *q != t2).collect();
            if free.is_empty() {
                continue;
            }
            let c1 = free[rng.gen_range(0..free.len())];
            let c2 = free[rng.gen_range(0..free.len())];
            let g1 = Gate::crx(c1, t1, rng.gen_range(0.0..RX_PERIOD)).unwrap();
            let g2 = Gate::crx(c2, t2, rng.gen_range(0.0..RX_PERIOD)).unwrap();

            let base = random_state(n, &mut rng);
            let mut ab = base.clone();
            ab.apply_gate(&g1).unwrap();
            ab.apply_gate(&g2).unwrap();
            let mut ba = base.clone();
            ba.apply_gate(&g2).unwrap();
            ba.apply_gate(&g1).unwrap();
            for (x, y) in ab.amps.iter().zip(ba.amps.iter()) {
                assert_close(*x, *y, 1e-12);
            }
        }
    }

    #[test]
    fn sampling_converges_to_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..3 {
            let n = rng.gen_range(2..=4);
            let s = random_state(n, &mut rng);
            let qubits: Vec<usize> = (0..n).collect();
            let marginal = s.marginal_distribution(&qubits).unwrap();
            let shots = 1_000_000usize;
            let counts = s.sample(&qubits, shots, &mut rng).unwrap();
            let tv: f64 = counts
                .iter()
                .zip(marginal.iter())
                .map(|(&c, &p)| (c as f64 / shots as f64 - p).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.01, "total variation {tv} too large");
        }
    }
}
