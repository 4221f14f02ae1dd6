//! Exact statevector simulation of QAOA and multi-angle QAOA for diagonal
//! Ising cost Hamiltonians.
//!
//! Basis index bit `b` is qubit/variable `b`; a set bit means `x_b = 1`, i.e.
//! spin `s_b = +1`. Cost layers multiply each basis amplitude by
//! `exp(-i * gamma * E_cost(z))` with
//! `E_cost(z) = -sum I_ij s_i s_j - sum h_i s_i`; the constant `-d` is a global
//! phase and is left out. Mixer layers apply `exp(i * beta * X)` to every qubit,
//! i.e. `[[cos b, i sin b], [i sin b, cos b]]`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::ising::{pair_count, IsingModel};

pub const MAX_QUBITS: usize = 16;
pub const DEFAULT_SHOTS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    nqubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|+>^n`: every amplitude `2^(-n/2)`.
    pub fn uniform_superposition(nqubits: usize) -> Result<Self> {
        check_qubits(nqubits)?;
        let dim = 1usize << nqubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(Self {
            nqubits,
            amps: vec![a; dim],
        })
    }

    /// Computational basis state `|index>`.
    pub fn basis(nqubits: usize, index: usize) -> Result<Self> {
        check_qubits(nqubits)?;
        let dim = 1usize << nqubits;
        if index >= dim {
            return Err(Error::invalid(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { nqubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::invalid(
                "amplitude count must be a power of two >= 2",
            ));
        }
        let nqubits = dim.trailing_zeros() as usize;
        check_qubits(nqubits)?;
        Ok(Self { nqubits, amps })
    }

    pub fn nqubits(&self) -> usize {
        self.nqubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    fn check_spins(&self, ising: &IsingModel) -> Result<()> {
        if ising.nspins() != self.nqubits {
            return Err(Error::invalid(format!(
                "state has {} qubits, model has {} spins",
                self.nqubits,
                ising.nspins()
            )));
        }
        Ok(())
    }

    /// Multiplies amplitude `z` by `exp(-i * phases[z])`.
    pub fn apply_phases(&mut self, phases: &[f64]) {
        debug_assert_eq!(phases.len(), self.amps.len());
        for (a, &ph) in self.amps.iter_mut().zip(phases) {
            let (s, c) = ph.sin_cos();
            *a *= Complex64::new(c, -s);
        }
    }

    fn apply_scaled_phases(&mut self, energies: &[f64], gamma: f64) {
        for (a, &e) in self.amps.iter_mut().zip(energies) {
            let (s, c) = (gamma * e).sin_cos();
            *a *= Complex64::new(c, -s);
        }
    }

    pub fn apply_cost_layer(&mut self, ising: &IsingModel, gamma: f64) -> Result<()> {
        self.check_spins(ising)?;
        let energies = cost_energies(ising);
        self.apply_scaled_phases(&energies, gamma);
        Ok(())
    }

    /// Multi-angle cost layer: one angle per unordered pair (in
    /// [`crate::ising::pair_index`] order) and one per field term.
    pub fn apply_ma_cost_layer(
        &mut self,
        ising: &IsingModel,
        pair_gammas: &[f64],
        field_gammas: &[f64],
    ) -> Result<()> {
        self.check_spins(ising)?;
        let terms = MaCostTerms::new(ising);
        let phases = terms.phases(pair_gammas, field_gammas)?;
        self.apply_phases(&phases);
        Ok(())
    }

    fn rotate_x(&mut self, qubit: usize, beta: f64) {
        let (s, c) = beta.sin_cos();
        let is = Complex64::new(0.0, s);
        let stride = 1usize << qubit;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for k in base..base + stride {
                let a0 = self.amps[k];
                let a1 = self.amps[k + stride];
                self.amps[k] = a0 * c + a1 * is;
                self.amps[k + stride] = a0 * is + a1 * c;
            }
            base += 2 * stride;
        }
    }

    pub fn apply_mixer_layer(&mut self, beta: f64) {
        for q in 0..self.nqubits {
            self.rotate_x(q, beta);
        }
    }

    pub fn apply_ma_mixer_layer(&mut self, betas: &[f64]) -> Result<()> {
        if betas.len() != self.nqubits {
            return Err(Error::invalid(format!(
                "expected {} mixer angles, got {}",
                self.nqubits,
                betas.len()
            )));
        }
        for (q, &b) in betas.iter().enumerate() {
            self.rotate_x(q, b);
        }
        Ok(())
    }

    /// Probability-weighted diagonal energy plus the model offset.
    pub fn expectation_energy(&self, ising: &IsingModel) -> Result<f64> {
        self.check_spins(ising)?;
        let diag = ising_energies(ising);
        Ok(self.expectation_of_diagonal(&diag))
    }

    pub fn expectation_of_diagonal(&self, diag: &[f64]) -> f64 {
        self.amps
            .iter()
            .zip(diag)
            .map(|(a, e)| a.norm_sqr() * e)
            .sum()
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::invalid(format!(
            "qubit count {n} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[inline]
fn spin(basis: usize, b: usize) -> f64 {
    if (basis >> b) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `E_cost(z)` for every basis state (no constant term).
pub fn cost_energies(ising: &IsingModel) -> Vec<f64> {
    let n = ising.nspins();
    let pairs: Vec<(usize, usize, f64)> = ising.pairs().filter(|t| t.2 != 0.0).collect();
    (0..1usize << n)
        .map(|z| {
            let mut e = 0.0;
            for &(i, j, c) in &pairs {
                e -= c * spin(z, i) * spin(z, j);
            }
            for (b, h) in ising.fields().iter().enumerate() {
                e -= h * spin(z, b);
            }
            e
        })
        .collect()
}

/// Ising energy (offset included) for every basis state.
pub fn ising_energies(ising: &IsingModel) -> Vec<f64> {
    (0..1usize << ising.nspins())
        .map(|z| ising.basis_energy_without_offset(z) + ising.offset())
        .collect()
}

/// Per-term coefficients of the multi-angle cost layer; terms with a zero
/// coefficient are skipped since their gates are identities.
#[derive(Debug, Clone)]
pub struct MaCostTerms {
    nqubits: usize,
    pairs: Vec<(usize, usize, usize, f64)>,
    fields: Vec<(usize, f64)>,
}

impl MaCostTerms {
    pub fn new(ising: &IsingModel) -> Self {
        let pairs = ising
            .pairs()
            .enumerate()
            .filter(|(_, t)| t.2 != 0.0)
            .map(|(k, (i, j, c))| (k, i, j, -c))
            .collect();
        let fields = ising
            .fields()
            .iter()
            .enumerate()
            .filter(|(_, h)| **h != 0.0)
            .map(|(i, h)| (i, -h))
            .collect();
        Self {
            nqubits: ising.nspins(),
            pairs,
            fields,
        }
    }

    /// Phase angle per basis state for the given layer angles.
    pub fn phases(&self, pair_gammas: &[f64], field_gammas: &[f64]) -> Result<Vec<f64>> {
        let n = self.nqubits;
        if pair_gammas.len() != pair_count(n) || field_gammas.len() != n {
            return Err(Error::invalid(format!(
                "multi-angle cost layer needs {} pair and {n} field angles, got {} and {}",
                pair_count(n),
                pair_gammas.len(),
                field_gammas.len()
            )));
        }
        let pair_terms: Vec<(usize, usize, f64)> = self
            .pairs
            .iter()
            .map(|&(k, i, j, c)| (i, j, c * pair_gammas[k]))
            .collect();
        let field_terms: Vec<(usize, f64)> = self
            .fields
            .iter()
            .map(|&(i, c)| (i, c * field_gammas[i]))
            .collect();
        Ok((0..1usize << n)
            .map(|z| {
                let mut ph = 0.0;
                for &(i, j, w) in &pair_terms {
                    // s_i s_j = +1 when the bits agree
                    if ((z >> i) ^ (z >> j)) & 1 == 0 {
                        ph += w;
                    } else {
                        ph -= w;
                    }
                }
                for &(i, w) in &field_terms {
                    ph += w * spin(z, i);
                }
                ph
            })
            .collect())
    }
}

/// Standard QAOA angles, one `(gamma, beta)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl StandardParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.len() != betas.len() {
            return Err(Error::invalid("gamma and beta counts differ"));
        }
        Ok(Self { gammas, betas })
    }

    pub fn layers(&self) -> usize {
        self.gammas.len()
    }

    /// Flat layout `[gamma_1..gamma_p, beta_1..beta_p]`.
    pub fn from_flat(theta: &[f64], layers: usize) -> Result<Self> {
        if theta.len() != 2 * layers {
            return Err(Error::invalid(format!(
                "expected {} parameters for {layers} layers, got {}",
                2 * layers,
                theta.len()
            )));
        }
        Self::new(theta[..layers].to_vec(), theta[layers..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAngleLayer {
    pub pair_gammas: Vec<f64>,
    pub field_gammas: Vec<f64>,
    pub mixer_betas: Vec<f64>,
}

/// Multi-angle QAOA angles: `C(n,2) + 2n` per layer (90 for 12 qubits).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAngleParams {
    nqubits: usize,
    pub layers: Vec<MultiAngleLayer>,
}

impl MultiAngleParams {
    pub fn per_layer(nqubits: usize) -> usize {
        pair_count(nqubits) + 2 * nqubits
    }

    pub fn count(nqubits: usize, layers: usize) -> usize {
        Self::per_layer(nqubits) * layers
    }

    /// Flat layout per layer: pair angles, field angles, mixer angles.
    pub fn from_flat(theta: &[f64], nqubits: usize, layers: usize) -> Result<Self> {
        let per = Self::per_layer(nqubits);
        if theta.len() != per * layers {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                per * layers,
                theta.len()
            )));
        }
        let np = pair_count(nqubits);
        let layers = theta
            .chunks(per)
            .map(|c| MultiAngleLayer {
                pair_gammas: c[..np].to_vec(),
                field_gammas: c[np..np + nqubits].to_vec(),
                mixer_betas: c[np + nqubits..].to_vec(),
            })
            .collect();
        Ok(Self { nqubits, layers })
    }

    /// Every cost angle equal to the layer's gamma, every mixer angle to its beta.
    pub fn tied(nqubits: usize, standard: &StandardParams) -> Self {
        let layers = standard
            .gammas
            .iter()
            .zip(&standard.betas)
            .map(|(&g, &b)| MultiAngleLayer {
                pair_gammas: vec![g; pair_count(nqubits)],
                field_gammas: vec![g; nqubits],
                mixer_betas: vec![b; nqubits],
            })
            .collect();
        Self { nqubits, layers }
    }

    pub fn nqubits(&self) -> usize {
        self.nqubits
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| {
                l.pair_gammas
                    .iter()
                    .chain(&l.field_gammas)
                    .chain(&l.mixer_betas)
                    .copied()
            })
            .collect()
    }
}

pub fn run_standard_qaoa(ising: &IsingModel, params: &StandardParams) -> Result<StateVector> {
    StandardQaoa::new(ising, ising)?.state(params)
}

pub fn run_ma_qaoa(ising: &IsingModel, params: &MultiAngleParams) -> Result<StateVector> {
    MultiAngleQaoa::new(ising, ising)?.state(params)
}

pub fn expectation_energy(state: &StateVector, ising: &IsingModel) -> Result<f64> {
    state.expectation_energy(ising)
}

/// Standard QAOA with cached diagonals. The circuit model drives the phase
/// layers; the measured model defines the reported expectation. They differ
/// only when the circuit Hamiltonian is rescaled.
#[derive(Debug, Clone)]
pub struct StandardQaoa {
    nqubits: usize,
    cost: Vec<f64>,
    measured: Vec<f64>,
}

impl StandardQaoa {
    pub fn new(circuit: &IsingModel, measured: &IsingModel) -> Result<Self> {
        if circuit.nspins() != measured.nspins() {
            return Err(Error::invalid("circuit and measured models differ in size"));
        }
        check_qubits(circuit.nspins())?;
        Ok(Self {
            nqubits: circuit.nspins(),
            cost: cost_energies(circuit),
            measured: ising_energies(measured),
        })
    }

    pub fn state(&self, params: &StandardParams) -> Result<StateVector> {
        let mut psi = StateVector::uniform_superposition(self.nqubits)?;
        for (&g, &b) in params.gammas.iter().zip(&params.betas) {
            psi.apply_scaled_phases(&self.cost, g);
            psi.apply_mixer_layer(b);
        }
        Ok(psi)
    }

    pub fn expectation(&self, params: &StandardParams) -> Result<f64> {
        Ok(self.state(params)?.expectation_of_diagonal(&self.measured))
    }
}

#[derive(Debug, Clone)]
pub struct MultiAngleQaoa {
    nqubits: usize,
    terms: MaCostTerms,
    measured: Vec<f64>,
}

impl MultiAngleQaoa {
    pub fn new(circuit: &IsingModel, measured: &IsingModel) -> Result<Self> {
        if circuit.nspins() != measured.nspins() {
            return Err(Error::invalid("circuit and measured models differ in size"));
        }
        check_qubits(circuit.nspins())?;
        Ok(Self {
            nqubits: circuit.nspins(),
            terms: MaCostTerms::new(circuit),
            measured: ising_energies(measured),
        })
    }

    pub fn state(&self, params: &MultiAngleParams) -> Result<StateVector> {
        if params.nqubits() != self.nqubits {
            return Err(Error::invalid(
                "parameter set built for a different qubit count",
            ));
        }
        let mut psi = StateVector::uniform_superposition(self.nqubits)?;
        for layer in &params.layers {
            let phases = self.terms.phases(&layer.pair_gammas, &layer.field_gammas)?;
            psi.apply_phases(&phases);
            psi.apply_ma_mixer_layer(&layer.mixer_betas)?;
        }
        Ok(psi)
    }

    pub fn expectation(&self, params: &MultiAngleParams) -> Result<f64> {
        Ok(self.state(params)?.expectation_of_diagonal(&self.measured))
    }
}

/// `shots` independent draws from the `|amplitude|^2` distribution.
pub fn sample_bitstrings(state: &StateVector, shots: usize, seed: u64) -> Vec<Bitstring> {
    let mut cdf = Vec::with_capacity(state.amps.len());
    let mut acc = 0.0;
    for a in &state.amps {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..shots)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let z = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            Bitstring::new(z as u64, state.nqubits).expect("basis index fits")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn one_field(h: f64) -> IsingModel {
        IsingModel::new(1, vec![], vec![h], 0.0).unwrap()
    }

    fn close(a: &StateVector, b: &StateVector, tol: f64) -> bool {
        a.amps
            .iter()
            .zip(&b.amps)
            .all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn uniform_amplitudes() {
        let s = StateVector::uniform_superposition(1).unwrap();
        for a in s.amplitudes() {
            assert_abs_diff_eq!(a.re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-9);
            assert_eq!(a.im, 0.0);
        }
        let s = StateVector::uniform_superposition(12).unwrap();
        assert_eq!(s.amplitudes().len(), 4096);
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
        assert!(StateVector::uniform_superposition(0).is_err());
        assert!(StateVector::uniform_superposition(17).is_err());
    }

    #[test]
    fn cost_layer_single_qubit_phases() {
        let mut s = StateVector::uniform_superposition(1).unwrap();
        s.apply_cost_layer(&one_field(1.0), FRAC_PI_2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // |0>: s = -1, E = +1 -> e^{-i pi/2}
        assert_abs_diff_eq!(s.amps[0].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amps[0].im, -r, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amps[1].im, r, epsilon = 1e-12);
    }

    #[test]
    fn cost_layer_zero_gamma_and_dimension_check() {
        let ising = IsingModel::new(2, vec![0.7], vec![0.3, -1.1], 2.0).unwrap();
        let mut s = StateVector::uniform_superposition(2).unwrap();
        s.apply_mixer_layer(0.3);
        let before = s.clone();
        s.apply_cost_layer(&ising, 0.0).unwrap();
        assert_eq!(s, before);
        let mut t = StateVector::uniform_superposition(3).unwrap();
        assert!(t.apply_cost_layer(&ising, 0.1).is_err());
    }

    #[test]
    fn mixer_examples() {
        let mut s = StateVector::basis(1, 0).unwrap();
        s.apply_mixer_layer(FRAC_PI_4);
        assert_abs_diff_eq!(s.amps[0].re, FRAC_PI_4.cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(s.amps[1].im, FRAC_PI_4.sin(), epsilon = 1e-9);

        let mut s = StateVector::basis(3, 0).unwrap();
        s.apply_mixer_layer(FRAC_PI_2);
        assert_abs_diff_eq!(s.amps[7].norm(), 1.0, epsilon = 1e-12);

        let mut s = StateVector::basis(3, 0).unwrap();
        s.apply_ma_mixer_layer(&[FRAC_PI_2, 0.0, 0.0]).unwrap();
        // leftmost variable set: "100" is basis index 1
        assert_abs_diff_eq!(s.amps[1].norm(), 1.0, epsilon = 1e-12);
        assert!(s.apply_ma_mixer_layer(&[0.0]).is_err());

        let mut s = StateVector::uniform_superposition(2).unwrap();
        let before = s.clone();
        s.apply_mixer_layer(0.0);
        s.apply_ma_mixer_layer(&[0.0, 0.0]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn ma_layer_size_checks() {
        let ising = IsingModel::new(2, vec![0.7], vec![0.3, -1.1], 0.0).unwrap();
        let mut s = StateVector::uniform_superposition(2).unwrap();
        assert!(s
            .apply_ma_cost_layer(&ising, &[0.1, 0.2], &[0.0, 0.0])
            .is_err());
        assert!(s.apply_ma_cost_layer(&ising, &[0.1], &[0.0]).is_err());
    }

    #[test]
    fn ma_inert_pair_angles() {
        let ising = IsingModel::new(3, vec![0.5, 0.0, -0.25], vec![0.1, 0.2, 0.3], 0.0).unwrap();
        let mut a = StateVector::uniform_superposition(3).unwrap();
        let mut b = a.clone();
        a.apply_ma_cost_layer(&ising, &[0.3, 0.0, 0.2], &[0.1, 0.1, 0.1])
            .unwrap();
        b.apply_ma_cost_layer(&ising, &[0.3, 9.0, 0.2], &[0.1, 0.1, 0.1])
            .unwrap();
        assert!(close(&a, &b, 1e-15));
    }

    #[test]
    fn qaoa_zero_layers_and_zero_angles() {
        let ising = IsingModel::new(2, vec![0.7], vec![0.3, -1.1], 0.0).unwrap();
        let plus = StateVector::uniform_superposition(2).unwrap();
        let p0 = StandardParams::new(vec![], vec![]).unwrap();
        assert_eq!(run_standard_qaoa(&ising, &p0).unwrap(), plus);
        let p1 = StandardParams::new(vec![0.0], vec![0.0]).unwrap();
        assert!(close(
            &run_standard_qaoa(&ising, &p1).unwrap(),
            &plus,
            1e-15
        ));
        let ma = MultiAngleParams::from_flat(&[0.0; 5], 2, 1).unwrap();
        assert!(close(&run_ma_qaoa(&ising, &ma).unwrap(), &plus, 1e-15));
    }

    #[test]
    fn offset_only_expectation() {
        let ising = IsingModel::new(2, vec![0.0], vec![0.0, 0.0], 5.0).unwrap();
        let mut s = StateVector::uniform_superposition(2).unwrap();
        s.apply_ma_mixer_layer(&[0.4, -1.3]).unwrap();
        assert_abs_diff_eq!(s.expectation_energy(&ising).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_basis_state_and_determinism() {
        let s = StateVector::basis(4, 9).unwrap();
        let shots = sample_bitstrings(&s, 100, 1);
        assert!(shots.iter().all(|b| b.value() == 9));
        let u = StateVector::uniform_superposition(5).unwrap();
        assert_eq!(
            sample_bitstrings(&u, 500, 42),
            sample_bitstrings(&u, 500, 42)
        );
    }

    #[test]
    fn sampling_frequencies() {
        let u = StateVector::uniform_superposition(2).unwrap();
        let shots = sample_bitstrings(&u, 40_000, 7);
        let mut counts = [0usize; 4];
        for b in shots {
            counts[b.value() as usize] += 1;
        }
        for c in counts {
            assert_abs_diff_eq!(c as f64 / 40_000.0, 0.25, epsilon = 0.01);
        }
    }

    #[test]
    fn flat_param_layouts() {
        assert_eq!(MultiAngleParams::per_layer(12), 90);
        let theta: Vec<f64> = (0..180).map(f64::from).collect();
        let p = MultiAngleParams::from_flat(&theta, 12, 2).unwrap();
        assert_eq!(p.layers[1].pair_gammas[0], 90.0);
        assert_eq!(p.layers[0].field_gammas[0], 66.0);
        assert_eq!(p.layers[0].mixer_betas[0], 78.0);
        assert_eq!(p.to_flat(), theta);
        assert!(MultiAngleParams::from_flat(&theta, 12, 1).is_err());
        let sp = StandardParams::from_flat(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(sp.gammas, vec![1.0, 2.0]);
        assert_eq!(sp.to_flat(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    type Mat = Vec<Vec<Complex64>>;

    fn kron(a: &Mat, b: &Mat) -> Mat {
        let (n, m) = (a.len(), b.len());
        let mut out = vec![vec![Complex64::new(0.0, 0.0); n * m]; n * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..m {
                    for l in 0..m {
                        out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }

    fn matvec(a: &Mat, v: &[Complex64]) -> Vec<Complex64> {
        a.iter()
            .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn rx(beta: f64) -> Mat {
        let c = Complex64::new(beta.cos(), 0.0);
        let s = Complex64::new(0.0, beta.sin());
        vec![vec![c, s], vec![s, c]]
    }

    /// Mixer on qubit b as a full matrix; qubit n-1 is the leftmost factor.
    fn dense_mixer(n: usize, betas: &[f64]) -> Mat {
        let mut m = rx(betas[n - 1]);
        for b in (0..n - 1).rev() {
            m = kron(&m, &rx(betas[b]));
        }
        m
    }

    fn oracle_cost(z: usize, pairs: &[(usize, usize, f64)], fields: &[f64]) -> f64 {
        let s = |b: usize| 2.0 * ((z >> b) & 1) as f64 - 1.0;
        let mut e = 0.0;
        for &(i, j, c) in pairs {
            e -= c * s(i) * s(j);
        }
        for (b, h) in fields.iter().enumerate() {
            e -= h * s(b);
        }
        e
    }

    fn dense_qaoa(
        n: usize,
        pairs: &[(usize, usize, f64)],
        fields: &[f64],
        gammas: &[f64],
        betas: &[f64],
    ) -> Vec<Complex64> {
        let dim = 1 << n;
        let mut v = vec![Complex64::new((dim as f64).sqrt().recip(), 0.0); dim];
        for (&g, &b) in gammas.iter().zip(betas) {
            for (z, a) in v.iter_mut().enumerate() {
                *a *= Complex64::from_polar(1.0, -g * oracle_cost(z, pairs, fields));
            }
            v = matvec(&dense_mixer(n, &vec![b; n]), &v);
        }
        v
    }

    #[test]
    fn matches_dense_unitary_oracle() {
        for n in 1..=3usize {
            let pairs: Vec<(usize, usize, f64)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j, 0.3 * (i + 2 * j) as f64 - 0.4)))
                .collect();
            let fields: Vec<f64> = (0..n).map(|i| 0.7 - 0.5 * i as f64).collect();
            let ising =
                IsingModel::new(n, pairs.iter().map(|t| t.2).collect(), fields.clone(), 1.5)
                    .unwrap();
            let gammas = [0.37, -0.81];
            let betas = [1.1, 0.23];
            let got = run_standard_qaoa(
                &ising,
                &StandardParams::new(gammas.to_vec(), betas.to_vec()).unwrap(),
            )
            .unwrap();
            let want = dense_qaoa(n, &pairs, &fields, &gammas, &betas);
            for (a, b) in got.amplitudes().iter().zip(&want) {
                assert!((a - b).norm() <= 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn two_spin_expectation_matches_dense() {
        let ising = IsingModel::new(2, vec![0.9], vec![-0.4, 0.25], -0.6).unwrap();
        let (g, b) = (0.7, 0.45);
        let psi = dense_qaoa(2, &[(0, 1, 0.9)], &[-0.4, 0.25], &[g], &[b]);
        let want: f64 = psi
            .iter()
            .enumerate()
            .map(|(z, a)| {
                let s = |k: usize| 2.0 * ((z >> k) & 1) as f64 - 1.0;
                a.norm_sqr() * (-0.9 * s(0) * s(1) - 0.4 * s(0) + 0.25 * s(1) - 0.6)
            })
            .sum();
        let state =
            run_standard_qaoa(&ising, &StandardParams::new(vec![g], vec![b]).unwrap()).unwrap();
        assert_abs_diff_eq!(
            expectation_energy(&state, &ising).unwrap(),
            want,
            epsilon = 1e-9
        );
    }

    #[test]
    fn tied_multi_angle_reduces_to_standard() {
        let n = 4;
        let couplings: Vec<f64> = (0..pair_count(n)).map(|k| 0.2 * k as f64 - 0.5).collect();
        let ising = IsingModel::new(n, couplings, vec![0.3, -0.7, 0.0, 1.2], 0.4).unwrap();
        let sp = StandardParams::new(vec![0.4, -0.2, 0.9], vec![0.1, 0.6, -0.3]).unwrap();
        let a = run_standard_qaoa(&ising, &sp).unwrap();
        let b = run_ma_qaoa(&ising, &MultiAngleParams::tied(n, &sp)).unwrap();
        assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn uniform_expectation_is_mean_energy() {
        let ising = IsingModel::new(3, vec![0.5, -1.0, 0.25], vec![0.1, 0.2, -0.3], 2.0).unwrap();
        let s = StateVector::uniform_superposition(3).unwrap();
        let mean = ising_energies(&ising).iter().sum::<f64>() / 8.0;
        assert_abs_diff_eq!(s.expectation_energy(&ising).unwrap(), mean, epsilon = 1e-12);
        assert_abs_diff_eq!(mean, 2.0, epsilon = 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn circuits_preserve_norm(angles in proptest::collection::vec(-3.2f64..3.2, 10), c in proptest::collection::vec(-2.0f64..2.0, 10)) {
            let ising = IsingModel::new(4, c[..6].to_vec(), c[6..].to_vec(), 0.0).unwrap();
            let sp = StandardParams::from_flat(&angles[..6], 3).unwrap();
            let s = run_standard_qaoa(&ising, &sp).unwrap();
            proptest::prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-9);
            let flat: Vec<f64> = (0..MultiAngleParams::per_layer(4)).map(|k| angles[k % 10]).collect();
            let ma = MultiAngleParams::from_flat(&flat, 4, 1).unwrap();
            let s = run_ma_qaoa(&ising, &ma).unwrap();
            proptest::prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-9);
        }
    }
}
