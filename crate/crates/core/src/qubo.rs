//! QUBO construction for the two routing shapes: the open-loop TSP inside a
//! cluster and the two-vehicle VRP between cluster representatives.
//!
//! Both use one binary variable per ordered location pair `(i, j)`, laid out by
//! [`EdgeVarIndex`]. Constraints enter as quadratic penalties weighted by `A`:
//!
//! * OTSP: out-degree 1 for every node but `final`, in-degree 1 for every node
//!   but `initial`, linear penalties on edges leaving `final` or entering
//!   `initial`, and `A * x_ij * x_ji` on every opposite pair.
//! * VRP: each customer entered and left once, depot out/in-degree equal to the
//!   vehicle count, and `A * x_ij * x_ji` on customer-customer pairs only
//!   (depot -> c -> depot is a legitimate single-stop route).

use std::fmt::Write as _;

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;

pub const DEFAULT_OTSP_PENALTY: f64 = 50.0;
pub const DEFAULT_VRP_PENALTY: f64 = 100.0;

/// Bijection between ordered pairs `(i, j)`, `i != j`, and variable indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeVarIndex {
    n: usize,
}

impl EdgeVarIndex {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("edge index needs at least 2 locations"));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nvars(&self) -> usize {
        self.n * (self.n - 1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < self.n && j < self.n);
        i * (self.n - 1) + if j < i { j } else { j - 1 }
    }

    #[inline]
    pub fn unindex(&self, v: usize) -> (usize, usize) {
        let i = v / (self.n - 1);
        let r = v % (self.n - 1);
        let j = if r < i { r } else { r + 1 };
        (i, j)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nvars()).map(move |v| self.unindex(v))
    }
}

/// `energy(x) = x^T Q x + g^T x + c` with `Q` strictly upper-triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    nvars: usize,
    quadratic: Vec<f64>,
    linear: Vec<f64>,
    constant: f64,
    /// Route-length part of `linear`; everything else is penalty.
    objective: Vec<f64>,
    index: Option<EdgeVarIndex>,
    penalty: Option<f64>,
}

impl QuboModel {
    pub fn new(nvars: usize) -> Self {
        Self {
            nvars,
            quadratic: vec![0.0; nvars * nvars],
            linear: vec![0.0; nvars],
            constant: 0.0,
            objective: vec![0.0; nvars],
            index: None,
            penalty: None,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Coefficient of `x_i x_j` for `i < j`.
    #[inline]
    pub fn quadratic(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.quadratic[a * self.nvars + b]
    }

    pub fn index(&self) -> Option<EdgeVarIndex> {
        self.index
    }

    pub fn penalty(&self) -> Option<f64> {
        self.penalty
    }

    /// Nonzero quadratic terms `(i, j, Q_ij)` with `i < j`.
    pub fn quadratic_terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nvars).flat_map(move |i| {
            ((i + 1)..self.nvars).filter_map(move |j| {
                let q = self.quadratic[i * self.nvars + j];
                (q != 0.0).then_some((i, j, q))
            })
        })
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn add_linear(&mut self, i: usize, g: f64) {
        self.linear[i] += g;
    }

    /// Adds `q * x_i * x_j`. Symmetric contributions fold into one upper
    /// entry; `i == j` folds into the linear term since `x^2 = x`.
    pub fn add_quadratic(&mut self, i: usize, j: usize, q: f64) {
        if i == j {
            self.linear[i] += q;
            return;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.quadratic[a * self.nvars + b] += q;
    }

    /// Builds a model from a full (not necessarily symmetric) matrix.
    pub fn from_dense(q: &[Vec<f64>], g: &[f64], c: f64) -> Result<Self> {
        let n = g.len();
        if q.len() != n || q.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("Q must be nvars x nvars"));
        }
        let mut m = Self::new(n);
        for (i, row) in q.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.add_quadratic(i, j, v);
            }
        }
        for (i, &v) in g.iter().enumerate() {
            m.add_linear(i, v);
        }
        m.add_constant(c);
        Ok(m)
    }

    /// Adds `weight * (target - sum_v x_v)^2`.
    fn add_squared_deviation(&mut self, vars: &[usize], target: f64, weight: f64) {
        self.constant += weight * target * target;
        for (a, &u) in vars.iter().enumerate() {
            self.linear[u] += weight * (1.0 - 2.0 * target);
            for &v in &vars[a + 1..] {
                self.add_quadratic(u, v, 2.0 * weight);
            }
        }
    }

    fn add_objective(&mut self, i: usize, w: f64) {
        self.linear[i] += w;
        self.objective[i] += w;
    }

    pub fn energy(&self, bits: Bitstring) -> Result<f64> {
        if bits.len() != self.nvars {
            return Err(Error::invalid(format!(
                "bitstring has {} bits, model has {}",
                bits.len(),
                self.nvars
            )));
        }
        Ok(self.energy_unchecked(bits.value()))
    }

    /// Energy of the assignment whose bit `b` is variable `b`.
    pub fn energy_unchecked(&self, value: u64) -> f64 {
        let mut e = self.constant;
        for i in 0..self.nvars {
            if (value >> i) & 1 == 0 {
                continue;
            }
            e += self.linear[i];
            let row = &self.quadratic[i * self.nvars..(i + 1) * self.nvars];
            for (j, &q) in row.iter().enumerate().skip(i + 1) {
                if (value >> j) & 1 == 1 {
                    e += q;
                }
            }
        }
        e
    }

    /// Route-length part of the energy (sum of selected edge weights).
    pub fn objective_energy(&self, bits: Bitstring) -> f64 {
        bits.bits()
            .zip(&self.objective)
            .filter(|(b, _)| *b)
            .map(|(_, w)| w)
            .sum()
    }

    /// Energy minus route length: zero exactly when every penalty vanishes.
    pub fn penalty_energy(&self, bits: Bitstring) -> Result<f64> {
        Ok(self.energy(bits)? - self.objective_energy(bits))
    }

    /// Pointwise sum of two models of equal size.
    pub fn sum(&self, other: &QuboModel) -> Result<QuboModel> {
        if self.nvars != other.nvars {
            return Err(Error::invalid("cannot add models of different size"));
        }
        let mut out = self.clone();
        out.index = None;
        out.penalty = None;
        for (a, b) in out.quadratic.iter_mut().zip(&other.quadratic) {
            *a += b;
        }
        for (a, b) in out.linear.iter_mut().zip(&other.linear) {
            *a += b;
        }
        for (a, b) in out.objective.iter_mut().zip(&other.objective) {
            *a += b;
        }
        out.constant += other.constant;
        Ok(out)
    }

    /// One term per line: `Q i j v`, `g i v`, `c v`, then `x v i j` for the
    /// edge map when present.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, j, q) in self.quadratic_terms() {
            let _ = writeln!(out, "Q {i} {j} {q:.12}");
        }
        for (i, &g) in self.linear.iter().enumerate() {
            if g != 0.0 {
                let _ = writeln!(out, "g {i} {g:.12}");
            }
        }
        let _ = writeln!(out, "c {:.12}", self.constant);
        if let Some(idx) = self.index {
            for v in 0..idx.nvars() {
                let (i, j) = idx.unindex(v);
                let _ = writeln!(out, "x {v} {i} {j}");
            }
        }
        out
    }
}

/// Open-loop TSP over one cluster, in local indices.
#[derive(Debug, Clone, PartialEq)]
pub struct OtspSpec {
    pub weights: DistanceMatrix,
    pub initial: usize,
    pub final_: usize,
}

/// Inter-cluster VRP; location 0 is the depot.
#[derive(Debug, Clone, PartialEq)]
pub struct VrpSpec {
    pub weights: DistanceMatrix,
    pub vehicles: usize,
}

fn check_penalty(penalty: f64, weights: &DistanceMatrix) -> Result<()> {
    if !(penalty.is_finite() && penalty > weights.max_weight()) {
        return Err(Error::invalid(format!(
            "penalty {penalty} must exceed the largest weight {:.3}",
            weights.max_weight()
        )));
    }
    Ok(())
}

pub fn build_otsp_qubo(spec: &OtspSpec, penalty: f64) -> Result<QuboModel> {
    let n = spec.weights.n();
    if n != 4 {
        return Err(Error::Unsupported(format!(
            "open-loop TSP builder expects 4 nodes, got {n}"
        )));
    }
    if spec.initial >= n || spec.final_ >= n {
        return Err(Error::invalid("terminal index out of range"));
    }
    if spec.initial == spec.final_ {
        return Err(Error::invalid("initial and final node must differ"));
    }
    check_penalty(penalty, &spec.weights)?;

    let idx = EdgeVarIndex::new(n)?;
    let mut m = QuboModel::new(idx.nvars());
    for (v, (i, j)) in idx.pairs().enumerate() {
        m.add_objective(v, spec.weights.get(i, j));
    }
    for i in (0..n).filter(|&i| i != spec.final_) {
        let out: Vec<usize> = (0..n)
            .filter(|&j| j != i)
            .map(|j| idx.index(i, j))
            .collect();
        m.add_squared_deviation(&out, 1.0, penalty);
    }
    for j in (0..n).filter(|&j| j != spec.initial) {
        let inc: Vec<usize> = (0..n)
            .filter(|&i| i != j)
            .map(|i| idx.index(i, j))
            .collect();
        m.add_squared_deviation(&inc, 1.0, penalty);
    }
    for j in (0..n).filter(|&j| j != spec.final_) {
        m.add_linear(idx.index(spec.final_, j), penalty);
    }
    for j in (0..n).filter(|&j| j != spec.initial) {
        m.add_linear(idx.index(j, spec.initial), penalty);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            m.add_quadratic(idx.index(i, j), idx.index(j, i), penalty);
        }
    }
    m.index = Some(idx);
    m.penalty = Some(penalty);
    Ok(m)
}

pub fn build_vrp_qubo(spec: &VrpSpec, penalty: f64) -> Result<QuboModel> {
    if spec.vehicles != 2 {
        return Err(Error::Unsupported(format!(
            "only 2 vehicles are supported, got {}",
            spec.vehicles
        )));
    }
    let n = spec.weights.n();
    if n != 4 {
        return Err(Error::Unsupported(format!(
            "inter-cluster VRP builder expects depot + 3 customers, got {n} locations"
        )));
    }
    check_penalty(penalty, &spec.weights)?;

    let idx = EdgeVarIndex::new(n)?;
    let mut m = QuboModel::new(idx.nvars());
    for (v, (i, j)) in idx.pairs().enumerate() {
        m.add_objective(v, spec.weights.get(i, j));
    }
    for c in 1..n {
        let inc: Vec<usize> = (0..n)
            .filter(|&i| i != c)
            .map(|i| idx.index(i, c))
            .collect();
        m.add_squared_deviation(&inc, 1.0, penalty);
        let out: Vec<usize> = (0..n)
            .filter(|&j| j != c)
            .map(|j| idx.index(c, j))
            .collect();
        m.add_squared_deviation(&out, 1.0, penalty);
    }
    let vehicles = spec.vehicles as f64;
    let depot_out: Vec<usize> = (1..n).map(|j| idx.index(0, j)).collect();
    let depot_in: Vec<usize> = (1..n).map(|i| idx.index(i, 0)).collect();
    m.add_squared_deviation(&depot_out, vehicles, penalty);
    m.add_squared_deviation(&depot_in, vehicles, penalty);
    for i in 1..n {
        for j in (i + 1)..n {
            m.add_quadratic(idx.index(i, j), idx.index(j, i), penalty);
        }
    }
    m.index = Some(idx);
    m.penalty = Some(penalty);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_distance_matrix, Point};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn square(n: usize) -> DistanceMatrix {
        let pts: Vec<Point> = (0..n)
            .map(|i| Point::new(i as f64, (i * i) as f64 * 0.5))
            .collect();
        build_distance_matrix(&pts).unwrap()
    }

    #[test]
    fn constant_only_model() {
        let mut m = QuboModel::new(5);
        m.add_constant(7.5);
        for v in [0u64, 3, 31] {
            assert_eq!(m.energy(Bitstring::new(v, 5).unwrap()).unwrap(), 7.5);
        }
    }

    #[test]
    fn energy_rejects_wrong_length() {
        let m = QuboModel::new(4);
        assert!(m.energy(Bitstring::zeros(3)).is_err());
    }

    #[test]
    fn otsp_rejects_equal_terminals() {
        let spec = OtspSpec {
            weights: square(4),
            initial: 2,
            final_: 2,
        };
        assert!(build_otsp_qubo(&spec, 50.0).is_err());
    }

    #[test]
    fn otsp_rejects_small_penalty() {
        let spec = OtspSpec {
            weights: square(4),
            initial: 0,
            final_: 1,
        };
        assert!(build_otsp_qubo(&spec, 1.0).is_err());
    }

    #[test]
    fn vrp_rejects_other_fleet_sizes() {
        let spec = VrpSpec {
            weights: square(4),
            vehicles: 3,
        };
        assert!(matches!(
            build_vrp_qubo(&spec, 100.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn all_zero_energies() {
        let otsp = build_otsp_qubo(
            &OtspSpec {
                weights: square(4),
                initial: 2,
                final_: 3,
            },
            50.0,
        )
        .unwrap();
        assert_abs_diff_eq!(
            otsp.energy(Bitstring::zeros(12)).unwrap(),
            300.0,
            epsilon = 1e-9
        );
        let vrp = build_vrp_qubo(
            &VrpSpec {
                weights: square(4),
                vehicles: 2,
            },
            100.0,
        )
        .unwrap();
        assert_abs_diff_eq!(
            vrp.energy(Bitstring::zeros(12)).unwrap(),
            1400.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn leaving_final_is_penalised() {
        let spec = OtspSpec {
            weights: square(4),
            initial: 0,
            final_: 3,
        };
        let m = build_otsp_qubo(&spec, 50.0).unwrap();
        let idx = m.index().unwrap();
        let best_feasible = [[0, 1, 2, 3], [0, 2, 1, 3]]
            .iter()
            .map(|p| {
                p.windows(2)
                    .map(|w| spec.weights.get(w[0], w[1]))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        for value in 0..4096u64 {
            let x = Bitstring::new(value, 12).unwrap();
            if (0..3).any(|j| x.get(idx.index(3, j))) {
                let e = m.energy(x).unwrap();
                assert!(e >= best_feasible + 50.0 - spec.weights.max_weight() - 1e-9);
                assert!(m.penalty_energy(x).unwrap() >= 50.0 - 1e-9);
            }
        }
    }

    #[test]
    fn symmetric_input_folds() {
        let q = vec![vec![0.0, 1.5], vec![2.5, 3.0]];
        let m = QuboModel::from_dense(&q, &[1.0, 0.0], 0.5).unwrap();
        assert_eq!(m.quadratic(0, 1), 4.0);
        assert_eq!(m.linear(), &[1.0, 3.0]);
        assert_eq!(
            m.energy("11".parse().unwrap()).unwrap(),
            0.5 + 1.0 + 3.0 + 4.0
        );
    }

    #[test]
    fn dump_lists_terms() {
        let m = build_vrp_qubo(
            &VrpSpec {
                weights: square(4),
                vehicles: 2,
            },
            100.0,
        )
        .unwrap();
        let text = m.dump();
        assert!(text.lines().any(|l| l.starts_with("c ")));
        assert_eq!(text.lines().filter(|l| l.starts_with("x ")).count(), 12);
        assert_eq!(
            text.lines().filter(|l| l.starts_with("Q ")).count(),
            m.quadratic_terms().count()
        );
    }

    proptest! {
        #[test]
        fn edge_index_round_trip(n in 2usize..9, a in 0usize..64, b in 0usize..64) {
            let idx = EdgeVarIndex::new(n).unwrap();
            let (i, j) = (a % n, b % n);
            prop_assume!(i != j);
            let v = idx.index(i, j);
            prop_assert!(v < idx.nvars());
            prop_assert_eq!(idx.unindex(v), (i, j));
        }
    }
}
