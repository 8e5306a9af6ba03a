//! W registers in block form.
//!
//! A fusion round touches only one atom of each input W state. The rest of
//! each input (a *spectator group*) is always either all ground or holds a
//! single excitation spread symmetrically over the group, so a state is fully
//! described by one amplitude per combination of
//!
//! * spectator class per group: `0` for `|g…g⟩`, `1` for `|W_k⟩`, and
//! * a bitstring over the individually tracked *slots* (the extracted atoms
//!   and the ancilla).
//!
//! Amplitudes multiply *normalized* group kets. The unnormalized ket
//! `|(k-1)_g, e⟩ = √k |W_k⟩` used in hand calculations therefore shows up
//! here with its `√k` folded into the amplitude, and
//! [`CompactFusionState::expand_to_full`] divides it back out when the
//! excitation is placed on each of the `k` atoms.
//!
//! Basis index layout: spectator classes occupy the high bits (group 0 most
//! significant), slots the low bits (slot 0 most significant).

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{SquareOperator, StateVector, C64, ONE, ZERO};

/// Largest register [`CompactFusionState::expand_to_full`] will build.
pub const MAX_EXPANSION_QUBITS: usize = 14;

/// Probability below which a measurement outcome is treated as impossible.
pub const PROBABILITY_FLOOR: f64 = 1e-24;

/// Shape of a compact state: spectator group sizes and labelled slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GroupSpec {
    sizes: Vec<usize>,
    slots: Vec<usize>,
}

impl GroupSpec {
    /// `slots` are atom labels (1, 2, 3 in the protocols); they must be distinct.
    pub fn new(sizes: Vec<usize>, slots: Vec<usize>) -> Result<Self> {
        for (i, s) in slots.iter().enumerate() {
            if slots[..i].contains(s) {
                return Err(Error::InvalidParameter(format!("slot label {s} used twice")));
            }
        }
        if sizes.len() + slots.len() > 16 {
            return Err(Error::InvalidParameter("too many groups and slots".into()));
        }
        Ok(GroupSpec { sizes, slots })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Physical atoms covered: every group member plus every slot.
    pub fn total_atoms(&self) -> usize {
        self.sizes.iter().sum::<usize>() + self.slots.len()
    }

    fn len(&self) -> usize {
        1 << (self.sizes.len() + self.slots.len())
    }

    fn group_bit(&self, i: usize) -> usize {
        1 << (self.sizes.len() - 1 - i)
    }

    fn slot_bit(&self, s: usize) -> usize {
        1 << (self.slots.len() - 1 - s)
    }

    fn index(&self, mask: usize, bits: usize) -> usize {
        (mask << self.slots.len()) | bits
    }

    fn split(&self, index: usize) -> (usize, usize) {
        (index >> self.slots.len(), index & ((1 << self.slots.len()) - 1))
    }

    /// True if `mask` puts an excitation in a group with no atoms.
    fn forbidden(&self, mask: usize) -> bool {
        (0..self.sizes.len()).any(|i| self.sizes[i] == 0 && mask & self.group_bit(i) != 0)
    }
}

/// Detector readout, one entry per measured atom: `true` for excited.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring(Vec<bool>);

impl Bitstring {
    pub fn new(bits: Vec<bool>) -> Self {
        Bitstring(bits)
    }

    /// All `2^n` readouts of `n` atoms, `g…g` first.
    pub fn all(n: usize) -> impl Iterator<Item = Bitstring> {
        (0..1usize << n).map(move |x| Bitstring((0..n).map(|i| x & (1 << (n - 1 - i)) != 0).collect()))
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn excitations(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "e" } else { "g" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'g' | 'G' | '0' => Ok(false),
                'e' | 'E' | '1' => Ok(true),
                other => Err(Error::MalformedOutcome(format!("unexpected character {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Bitstring)
    }
}

impl Serialize for Bitstring {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Pure state of spectator groups plus slots, in block form.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactFusionState {
    spec: GroupSpec,
    amps: Vec<C64>,
}

impl CompactFusionState {
    /// All-zero (unnormalized) state of the given shape.
    pub fn zero(spec: GroupSpec) -> Self {
        let amps = vec![ZERO; spec.len()];
        CompactFusionState { spec, amps }
    }

    /// Builds a state from `(classes, slot bits, amplitude)` triples.
    /// Repeated terms add up.
    pub fn from_terms<I>(spec: GroupSpec, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<bool>, Vec<bool>, C64)>,
    {
        let mut state = Self::zero(spec);
        for (classes, bits, amp) in terms {
            if classes.len() != state.spec.group_count() {
                return Err(Error::DimensionMismatch { expected: state.spec.group_count(), found: classes.len() });
            }
            if bits.len() != state.spec.slot_count() {
                return Err(Error::DimensionMismatch { expected: state.spec.slot_count(), found: bits.len() });
            }
            let mask = pack(&classes);
            if state.spec.forbidden(mask) {
                return Err(Error::InvalidParameter("excitation in an empty spectator group".into()));
            }
            let idx = state.spec.index(mask, pack(&bits));
            state.amps[idx] += amp;
        }
        Ok(state)
    }

    /// `|W_n⟩` split as one slot (labelled atom 1) plus a spectator group of
    /// `n - 1` atoms. `n = 1` gives the single excited atom `|e⟩`.
    pub fn standard_w(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("a W state needs at least one atom".into()));
        }
        let spec = GroupSpec::new(vec![n - 1], vec![1])?;
        let mut state = Self::zero(spec);
        let norm = (n as f64).sqrt();
        state.amps[state.spec.index(0, 1)] = C64::from(1.0 / norm);
        if n > 1 {
            state.amps[state.spec.index(1, 0)] = C64::from(((n - 1) as f64).sqrt() / norm);
        }
        Ok(state)
    }

    /// The standard W state spread over every atom of `spec`.
    pub fn uniform_w(spec: GroupSpec) -> Result<Self> {
        let total = spec.total_atoms();
        if total == 0 {
            return Err(Error::InvalidParameter("a W state needs at least one atom".into()));
        }
        let norm = (total as f64).sqrt();
        let mut state = Self::zero(spec);
        for i in 0..state.spec.group_count() {
            let k = state.spec.sizes[i];
            if k > 0 {
                let idx = state.spec.index(state.spec.group_bit(i), 0);
                state.amps[idx] = C64::from((k as f64).sqrt() / norm);
            }
        }
        for s in 0..state.spec.slot_count() {
            let idx = state.spec.index(0, state.spec.slot_bit(s));
            state.amps[idx] = C64::from(1.0 / norm);
        }
        Ok(state)
    }

    /// Product of one W state per spectator group, all slots in `|g⟩`.
    pub fn w_product(spec: GroupSpec) -> Result<Self> {
        if spec.sizes.contains(&0) {
            return Err(Error::InvalidParameter("every group of a W product needs an atom".into()));
        }
        let mut state = Self::zero(spec);
        let idx = state.spec.index((1 << state.spec.group_count()) - 1, 0);
        state.amps[idx] = ONE;
        Ok(state)
    }

    /// A single slot in `|g⟩`, labelled `label`.
    pub fn ground_slot(label: usize) -> Self {
        let spec = GroupSpec { sizes: vec![], slots: vec![label] };
        let mut state = Self::zero(spec);
        state.amps[0] = ONE;
        state
    }

    /// Replaces the slot labels.
    pub fn relabel_slots(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.spec.slot_count() {
            return Err(Error::DimensionMismatch { expected: self.spec.slot_count(), found: labels.len() });
        }
        self.spec = GroupSpec::new(self.spec.sizes, labels)?;
        Ok(self)
    }

    /// `self ⊗ other`; groups and slots of `self` come first.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut sizes = self.spec.sizes.clone();
        sizes.extend_from_slice(&other.spec.sizes);
        let mut slots = self.spec.slots.clone();
        slots.extend_from_slice(&other.spec.slots);
        let spec = GroupSpec::new(sizes, slots)?;
        let mut out = Self::zero(spec);
        let (og, os) = (other.spec.group_count(), other.spec.slot_count());
        for (i, &a) in self.amps.iter().enumerate().filter(|(_, a)| **a != ZERO) {
            let (m1, b1) = self.spec.split(i);
            for (j, &b) in other.amps.iter().enumerate().filter(|(_, b)| **b != ZERO) {
                let (m2, b2) = other.spec.split(j);
                let idx = out.spec.index((m1 << og) | m2, (b1 << os) | b2);
                out.amps[idx] = a * b;
            }
        }
        Ok(out)
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    /// Amplitude of the given spectator classes and slot bits.
    pub fn amplitude(&self, classes: &[bool], bits: &[bool]) -> C64 {
        self.amps[self.spec.index(pack(classes), pack(bits))]
    }

    /// Nonzero terms as `(classes, slot bits, amplitude)`.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<bool>, Vec<bool>, C64)> + '_ {
        let (g, s) = (self.spec.group_count(), self.spec.slot_count());
        self.amps.iter().enumerate().filter(|(_, a)| **a != ZERO).map(move |(i, &a)| {
            let (mask, bits) = self.spec.split(i);
            (unpack(mask, g), unpack(bits, s), a)
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        CompactFusionState { spec: self.spec.clone(), amps: self.amps.iter().map(|a| a / n).collect() }
    }

    /// Largest amplitude difference to a state of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.spec.sizes != other.spec.sizes || self.spec.slot_count() != other.spec.slot_count() {
            return Err(Error::InvalidParameter(format!(
                "shape mismatch: groups {:?} / {} slots vs groups {:?} / {} slots",
                self.spec.sizes,
                self.spec.slot_count(),
                other.spec.sizes,
                other.spec.slot_count()
            )));
        }
        Ok(())
    }

    /// `|⟨reference|self⟩|²`. Global phases drop out.
    pub fn fidelity(&self, reference: &Self) -> Result<f64> {
        self.check_same_shape(reference)?;
        let overlap: C64 = reference.amps.iter().zip(&self.amps).map(|(r, s)| r.conj() * s).sum();
        Ok(overlap.norm_sqr())
    }

    /// Applies an 8×8 operator to the three slots of every term.
    pub fn apply_extracted_propagator(&self, u: &SquareOperator) -> Result<Self> {
        let slots = self.spec.slot_count();
        if u.dim() != 1 << slots {
            return Err(Error::DimensionMismatch { expected: 1 << slots, found: u.dim() });
        }
        let block = 1 << slots;
        let mut out = Self::zero(self.spec.clone());
        for mask in 0..(1 << self.spec.group_count()) {
            let base = mask * block;
            let input = &self.amps[base..base + block];
            if input.iter().all(|a| *a == ZERO) {
                continue;
            }
            for row in 0..block {
                out.amps[base + row] = (0..block).map(|col| u.entry(row, col) * input[col]).sum();
            }
        }
        Ok(out)
    }

    /// Projects slots `positions` (indices into the slot list) onto `outcome`.
    ///
    /// Returns the outcome probability and, when it exceeds
    /// [`PROBABILITY_FLOOR`], the normalized state of the unmeasured part.
    pub fn project(&self, positions: &[usize], outcome: &Bitstring) -> Result<(f64, Option<Self>)> {
        let slots = self.spec.slot_count();
        validate_positions(positions, slots)?;
        if outcome.len() != positions.len() {
            return Err(Error::MalformedOutcome(format!(
                "{} bits for {} measured atoms",
                outcome.len(),
                positions.len()
            )));
        }
        let keep: Vec<usize> = (0..slots).filter(|s| !positions.contains(s)).collect();
        let spec =
            GroupSpec { sizes: self.spec.sizes.clone(), slots: keep.iter().map(|&s| self.spec.slots[s]).collect() };
        let mut residual = Self::zero(spec);
        for (i, &a) in self.amps.iter().enumerate() {
            let (mask, bits) = self.spec.split(i);
            let matches =
                positions.iter().zip(outcome.bits()).all(|(&p, &want)| (bits & self.spec.slot_bit(p) != 0) == want);
            if !matches {
                continue;
            }
            let kept = keep.iter().fold(0, |acc, &s| (acc << 1) | usize::from(bits & self.spec.slot_bit(s) != 0));
            let idx = residual.spec.index(mask, kept);
            residual.amps[idx] = a;
        }
        let probability = residual.norm_sqr();
        if probability > PROBABILITY_FLOOR {
            Ok((probability, Some(residual.normalized())))
        } else {
            Ok((probability, None))
        }
    }

    /// Projective measurement of the given slots; one entry per outcome with
    /// nonzero probability, `g…g` first.
    pub fn measure(&self, positions: &[usize]) -> Result<Vec<MeasurementOutcome>> {
        if positions.is_empty() {
            return Err(Error::UnsupportedMeasurement("no atoms selected".into()));
        }
        validate_positions(positions, self.spec.slot_count())?;
        let measured: Vec<usize> = positions.iter().map(|&p| self.spec.slots[p]).collect();
        let mut outcomes = Vec::new();
        for bits in Bitstring::all(positions.len()) {
            if let (probability, Some(residual)) = self.project(positions, &bits)? {
                outcomes.push(MeasurementOutcome { measured_atoms: measured.clone(), bits, probability, residual });
            }
        }
        Ok(outcomes)
    }

    /// Number of excitations carried by a basis term.
    fn excitations(&self, index: usize) -> u32 {
        let (mask, bits) = self.spec.split(index);
        mask.count_ones() + bits.count_ones()
    }

    /// True if every nonzero term carries exactly one excitation.
    pub fn is_single_excitation(&self, tol: f64) -> bool {
        self.amps.iter().enumerate().all(|(i, a)| a.norm() <= tol || self.excitations(i) == 1)
    }

    /// Removes the relative phases of a single-excitation state with local
    /// diagonal gates, one phase per spectator group or slot (every atom of a
    /// group gets the same `|e⟩` phase). The result has real non-negative
    /// amplitudes, so the global phase is fixed as well.
    ///
    /// Magnitudes are left alone; the result is the standard W state only if
    /// the input already had W-like weights.
    pub fn phase_corrected(&self) -> Result<Self> {
        let scale = self.norm_sqr().sqrt();
        if scale == 0.0 || !self.is_single_excitation(1e-12 * scale) {
            return Err(Error::NotSuccessBranch("state is not a single-excitation superposition".into()));
        }
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if self.excitations(i) == 1 { C64::from(a.norm()) } else { ZERO })
            .collect();
        Ok(CompactFusionState { spec: self.spec.clone(), amps })
    }

    /// Explicit `2^n` state vector, groups first (in order) and then slots.
    pub fn expand_to_full(&self) -> Result<FullRegisterState> {
        let qubits = self.spec.total_atoms();
        if qubits > MAX_EXPANSION_QUBITS {
            return Err(Error::TooManyQubits { qubits, limit: MAX_EXPANSION_QUBITS });
        }
        let mut layout = Vec::with_capacity(qubits);
        let mut offsets = Vec::with_capacity(self.spec.group_count());
        for (g, &k) in self.spec.sizes.iter().enumerate() {
            offsets.push(layout.len());
            layout.extend((0..k).map(|member| QubitRole::Group { group: g, member }));
        }
        let slot_offset = layout.len();
        layout.extend(self.spec.slots.iter().map(|&atom| QubitRole::Slot(atom)));

        let bit = |q: usize| 1usize << (qubits - 1 - q);
        let mut amps = vec![ZERO; 1 << qubits];
        for (i, &a) in self.amps.iter().enumerate().filter(|(_, a)| **a != ZERO) {
            let (mask, bits) = self.spec.split(i);
            let mut base = 0;
            for s in 0..self.spec.slot_count() {
                if bits & self.spec.slot_bit(s) != 0 {
                    base |= bit(slot_offset + s);
                }
            }
            // Every choice of excited member in each excited group.
            let mut partial = vec![(base, a)];
            for g in (0..self.spec.group_count()).filter(|&g| mask & self.spec.group_bit(g) != 0) {
                let k = self.spec.sizes[g];
                let w = 1.0 / (k as f64).sqrt();
                let offset = offsets[g];
                partial = partial
                    .into_iter()
                    .flat_map(|(idx, amp)| (0..k).map(move |m| (idx | bit(offset + m), amp * w)))
                    .collect();
            }
            for (idx, amp) in partial {
                amps[idx] += amp;
            }
        }
        Ok(FullRegisterState { state: StateVector::from_vec(amps), layout })
    }
}

impl Serialize for CompactFusionState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Term {
            pattern: String,
            re: f64,
            im: f64,
        }
        let terms: Vec<Term> = self
            .terms()
            .filter(|(_, _, a)| a.norm() > 1e-15)
            .map(|(classes, bits, a)| {
                let mut pattern: String = classes.iter().map(|&c| if c { '1' } else { '0' }).collect();
                pattern.push('|');
                pattern.push_str(&Bitstring(bits).to_string());
                Term { pattern, re: a.re, im: a.im }
            })
            .collect();
        let mut s = serializer.serialize_struct("CompactFusionState", 3)?;
        s.serialize_field("groups", &self.spec.sizes)?;
        s.serialize_field("slots", &self.spec.slots)?;
        s.serialize_field("terms", &terms)?;
        s.end()
    }
}

fn validate_positions(positions: &[usize], slots: usize) -> Result<()> {
    for (i, &p) in positions.iter().enumerate() {
        if p >= slots {
            return Err(Error::UnsupportedMeasurement(format!(
                "slot {p} does not exist (state has {slots} slots); spectator groups cannot be measured"
            )));
        }
        if positions[..i].contains(&p) {
            return Err(Error::UnsupportedMeasurement(format!("slot {p} listed twice")));
        }
    }
    Ok(())
}

fn pack(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

fn unpack(x: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| x & (1 << (n - 1 - i)) != 0).collect()
}

/// Two-fusion input `|W_N⟩ ⊗ |W_M⟩ ⊗ |g⟩`: groups `[N-1, M-1]`, slots
/// `[1, 2, 3]` where atom 3 is the ancilla.
pub fn initial_two_fusion_state(n: usize, m: usize) -> Result<CompactFusionState> {
    check_input_sizes(&[n, m])?;
    let a = CompactFusionState::standard_w(n)?;
    let b = CompactFusionState::standard_w(m)?.relabel_slots(vec![2])?;
    a.tensor(&b)?.tensor(&CompactFusionState::ground_slot(3))
}

/// Three-fusion input `|W_N⟩ ⊗ |W_M⟩ ⊗ |W_T⟩`: groups `[N-1, M-1, T-1]`,
/// slots `[1, 2, 3]`.
pub fn initial_three_fusion_state(n: usize, m: usize, t: usize) -> Result<CompactFusionState> {
    check_input_sizes(&[n, m, t])?;
    let a = CompactFusionState::standard_w(n)?;
    let b = CompactFusionState::standard_w(m)?.relabel_slots(vec![2])?;
    let c = CompactFusionState::standard_w(t)?.relabel_slots(vec![3])?;
    a.tensor(&b)?.tensor(&c)
}

fn check_input_sizes(sizes: &[usize]) -> Result<()> {
    if let Some(&bad) = sizes.iter().find(|&&s| s < 2) {
        return Err(Error::InvalidParameter(format!("fusion inputs need at least 2 atoms, got {bad}")));
    }
    Ok(())
}

/// One outcome of [`CompactFusionState::measure`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementOutcome {
    pub measured_atoms: Vec<usize>,
    pub bits: Bitstring,
    pub probability: f64,
    pub residual: CompactFusionState,
}

/// What a physical qubit of an expanded register stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum QubitRole {
    Group { group: usize, member: usize },
    Slot(usize),
}

/// Explicit state vector over every physical atom.
#[derive(Debug, Clone, PartialEq)]
pub struct FullRegisterState {
    state: StateVector,
    layout: Vec<QubitRole>,
}

impl FullRegisterState {
    pub fn new(state: StateVector, layout: Vec<QubitRole>) -> Result<Self> {
        if state.dim() != 1 << layout.len() {
            return Err(Error::DimensionMismatch { expected: 1 << layout.len(), found: state.dim() });
        }
        Ok(FullRegisterState { state, layout })
    }

    pub fn qubit_count(&self) -> usize {
        self.layout.len()
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn layout(&self) -> &[QubitRole] {
        &self.layout
    }

    /// Qubits holding the given slot labels, in the order asked for.
    pub fn slot_positions(&self, labels: &[usize]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|&l| {
                self.layout
                    .iter()
                    .position(|r| *r == QubitRole::Slot(l))
                    .ok_or_else(|| Error::InvalidPositions(format!("no slot labelled {l}")))
            })
            .collect()
    }

    pub fn apply(&self, u: &SquareOperator) -> Result<Self> {
        Ok(FullRegisterState { state: u.apply(&self.state)?, layout: self.layout.clone() })
    }

    /// Projects qubits `positions` onto `outcome` and removes them.
    pub fn project(&self, positions: &[usize], outcome: &Bitstring) -> Result<(f64, Option<Self>)> {
        let n = self.qubit_count();
        for (i, &p) in positions.iter().enumerate() {
            if p >= n || positions[..i].contains(&p) {
                return Err(Error::InvalidPositions(format!("bad measured qubit {p}")));
            }
        }
        if outcome.len() != positions.len() {
            return Err(Error::MalformedOutcome(format!("{} bits for {} qubits", outcome.len(), positions.len())));
        }
        let bit = |q: usize| 1usize << (n - 1 - q);
        let keep: Vec<usize> = (0..n).filter(|q| !positions.contains(q)).collect();
        let mut amps = vec![ZERO; 1 << keep.len()];
        for (x, &a) in self.state.amplitudes().iter().enumerate() {
            let matches = positions.iter().zip(outcome.bits()).all(|(&p, &b)| (x & bit(p) != 0) == b);
            if matches {
                let y = keep.iter().fold(0, |acc, &q| (acc << 1) | usize::from(x & bit(q) != 0));
                amps[y] = a;
            }
        }
        let residual = StateVector::from_vec(amps);
        let probability = residual.norm_sqr();
        let layout = keep.iter().map(|&q| self.layout[q]).collect();
        if probability > PROBABILITY_FLOOR {
            Ok((probability, Some(FullRegisterState { state: residual.normalized(), layout })))
        } else {
            Ok((probability, None))
        }
    }

    /// `|⟨reference|self⟩|²`.
    pub fn fidelity(&self, reference: &Self) -> Result<f64> {
        if self.state.dim() != reference.state.dim() {
            return Err(Error::DimensionMismatch { expected: reference.state.dim(), found: self.state.dim() });
        }
        Ok(reference.state.inner(&self.state).norm_sqr())
    }
}

/// `(|ge⟩ + |eg⟩)/√2` as two slots labelled 1 and 2.
pub fn bell_pair() -> CompactFusionState {
    let spec = GroupSpec { sizes: vec![], slots: vec![1, 2] };
    let mut s = CompactFusionState::zero(spec);
    s.amps[0b01] = C64::from(FRAC_1_SQRT_2);
    s.amps[0b10] = C64::from(FRAC_1_SQRT_2);
    s
}
