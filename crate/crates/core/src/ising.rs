//! Spin form of a QUBO via `x = (s + 1) / 2`:
//!
//! `H(s) = -sum_{i<j} I_ij s_i s_j + sum_i h_i s_i + d`
//!
//! with `I_ij = -Q_ij / 4`, `h_i = g_i / 2 + sum_j (Q_ij + Q_ji) / 4` and
//! `d = c + sum_i g_i / 2 + sum_{ij} Q_ij / 4`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::qubo::QuboModel;

/// Index of the unordered pair `(i, j)`, `i < j`, in lexicographic order.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    nspins: usize,
    /// Dense over all pairs in [`pair_index`] order.
    couplings: Vec<f64>,
    fields: Vec<f64>,
    offset: f64,
}

impl IsingModel {
    pub fn new(nspins: usize, couplings: Vec<f64>, fields: Vec<f64>, offset: f64) -> Result<Self> {
        if couplings.len() != pair_count(nspins) || fields.len() != nspins {
            return Err(Error::invalid(format!(
                "ising model with {nspins} spins needs {} couplings and {nspins} fields",
                pair_count(nspins)
            )));
        }
        Ok(Self {
            nspins,
            couplings,
            fields,
            offset,
        })
    }

    pub fn nspins(&self) -> usize {
        self.nspins
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.couplings[pair_index(self.nspins, a, b)]
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `(i, j, I_ij)` for every pair in [`pair_index`] order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.nspins;
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j, self.coupling(i, j))))
    }

    /// Largest absolute coupling or field.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.couplings
            .iter()
            .chain(&self.fields)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Every coefficient (offset included) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> IsingModel {
        IsingModel {
            nspins: self.nspins,
            couplings: self.couplings.iter().map(|c| c * factor).collect(),
            fields: self.fields.iter().map(|h| h * factor).collect(),
            offset: self.offset * factor,
        }
    }

    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.nspins {
            return Err(Error::invalid(format!(
                "expected {} spins, got {}",
                self.nspins,
                spins.len()
            )));
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("spin value {bad} is not +1 or -1")));
        }
        let s: Vec<f64> = spins.iter().map(|&v| f64::from(v)).collect();
        let mut e = self.offset;
        for (i, j, c) in self.pairs() {
            e -= c * s[i] * s[j];
        }
        for (h, si) in self.fields.iter().zip(&s) {
            e += h * si;
        }
        Ok(e)
    }

    /// Energy without the offset for the basis state whose bit `b` is spin `b`
    /// (bit 1 -> s = +1).
    pub fn basis_energy_without_offset(&self, basis: usize) -> f64 {
        let spin = |b: usize| if (basis >> b) & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for (i, j, c) in self.pairs() {
            if c != 0.0 {
                e -= c * spin(i) * spin(j);
            }
        }
        for (b, h) in self.fields.iter().enumerate() {
            e += h * spin(b);
        }
        e
    }

    /// Componentwise sum of two models with equal spin counts.
    pub fn sum(&self, other: &IsingModel) -> Result<IsingModel> {
        if self.nspins != other.nspins {
            return Err(Error::invalid("cannot add ising models of different size"));
        }
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Ok(IsingModel {
            nspins: self.nspins,
            couplings: add(&self.couplings, &other.couplings),
            fields: add(&self.fields, &other.fields),
            offset: self.offset + other.offset,
        })
    }

    /// `I i j v`, `h i v` and `d v` lines, mirroring [`QuboModel::dump`].
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, j, c) in self.pairs().filter(|t| t.2 != 0.0) {
            let _ = writeln!(out, "I {i} {j} {c:.12}");
        }
        for (i, &h) in self.fields.iter().enumerate() {
            if h != 0.0 {
                let _ = writeln!(out, "h {i} {h:.12}");
            }
        }
        let _ = writeln!(out, "d {:.12}", self.offset);
        out
    }
}

pub fn qubo_to_ising(model: &QuboModel) -> IsingModel {
    let n = model.nvars();
    let mut couplings = vec![0.0; pair_count(n)];
    let mut fields: Vec<f64> = model.linear().iter().map(|g| g / 2.0).collect();
    let mut offset = model.constant() + model.linear().iter().sum::<f64>() / 2.0;
    for (i, j, q) in model.quadratic_terms() {
        couplings[pair_index(n, i, j)] = -q / 4.0;
        fields[i] += q / 4.0;
        fields[j] += q / 4.0;
        offset += q / 4.0;
    }
    IsingModel {
        nspins: n,
        couplings,
        fields,
        offset,
    }
}

/// Spins for a binary assignment: `s = 2x - 1`.
pub fn spins_of(bits: crate::bitstring::Bitstring) -> Vec<i8> {
    bits.bits().map(|b| if b { 1 } else { -1 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstring::Bitstring;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_variable() {
        let m = QuboModel::from_dense(&[vec![0.0]], &[1.0], 0.0).unwrap();
        let ising = qubo_to_ising(&m);
        assert_eq!(ising.fields(), &[0.5]);
        assert_eq!(ising.offset(), 0.5);
        assert_eq!(ising.energy(&[1]).unwrap(), 1.0);
        assert_eq!(ising.energy(&[-1]).unwrap(), 0.0);
    }

    #[test]
    fn single_coupling() {
        let m = QuboModel::from_dense(&[vec![0.0, 4.0], vec![0.0, 0.0]], &[0.0, 0.0], 0.0).unwrap();
        let ising = qubo_to_ising(&m);
        assert_eq!(ising.coupling(0, 1), -1.0);
        assert_eq!(ising.fields(), &[1.0, 1.0]);
        assert_eq!(ising.offset(), 1.0);
        assert_eq!(ising.energy(&[1, 1]).unwrap(), 4.0);
    }

    #[test]
    fn offset_only() {
        let ising = IsingModel::new(3, vec![0.0; 3], vec![0.0; 3], 3.0).unwrap();
        assert_eq!(ising.energy(&[1, -1, 1]).unwrap(), 3.0);
    }

    #[test]
    fn rejects_bad_spins() {
        let ising = IsingModel::new(2, vec![0.0], vec![0.0; 2], 0.0).unwrap();
        assert!(ising.energy(&[1, 0]).is_err());
        assert!(ising.energy(&[1]).is_err());
    }

    #[test]
    fn pair_index_is_dense() {
        let n = 12;
        let mut seen = vec![false; pair_count(n)];
        for i in 0..n {
            for j in (i + 1)..n {
                let k = pair_index(n, i, j);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(pair_count(12), 66);
    }

    fn random_model(values: &[f64], n: usize) -> QuboModel {
        let mut m = QuboModel::new(n);
        let mut it = values.iter().cycle();
        for i in 0..n {
            for j in 0..n {
                m.add_quadratic(i, j, *it.next().unwrap());
            }
            m.add_linear(i, *it.next().unwrap());
        }
        m.add_constant(*it.next().unwrap());
        m
    }

    proptest! {
        #[test]
        fn equivalence_on_random_models(values in prop::collection::vec(-10.0f64..10.0, 40), x in 0u64..64) {
            let m = random_model(&values, 6);
            let ising = qubo_to_ising(&m);
            let bits = Bitstring::new(x, 6).unwrap();
            let q = m.energy(bits).unwrap();
            let s = ising.energy(&spins_of(bits)).unwrap();
            prop_assert!((q - s).abs() <= 1e-9);
        }

        #[test]
        fn transform_is_linear(a in prop::collection::vec(-5.0f64..5.0, 30), b in prop::collection::vec(-5.0f64..5.0, 30)) {
            let (ma, mb) = (random_model(&a, 5), random_model(&b, 5));
            let lhs = qubo_to_ising(&ma.sum(&mb).unwrap());
            let rhs = qubo_to_ising(&ma).sum(&qubo_to_ising(&mb)).unwrap();
            for (x, y) in lhs.couplings().iter().zip(rhs.couplings()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in lhs.fields().iter().zip(rhs.fields()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            assert_abs_diff_eq!(lhs.offset(), rhs.offset(), epsilon = 1e-12);
        }
    }
}
