//! Three-stage hierarchical solve: balanced clustering, an open-loop TSP per
//! cluster with standard QAOA, and a two-vehicle VRP over the cluster
//! centroids with multi-angle QAOA. Also repeated-run statistics.

mod dataset;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dataset::{generate_dataset, GeneratorSpec};
pub use report::{emit_report, run_table, RUNS_FILE, SUMMARY_FILE, TRACES_FILE};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::exact::brute_force_qubo_min;
use crate::geometry::{
    balanced_kmeans, inter_cluster_matrix, select_terminals, Cluster, Dataset, DistanceMatrix,
    Point,
};
use crate::ising::{qubo_to_ising, IsingModel};
use crate::optim::{init_params, InitConfig, OptimizationTrace, Optimizer, Spsa, SpsaConfig};
use crate::postprocess::{extract_best_feasible, RouteSolution, RoutingProblem};
use crate::qsim::{
    sample_bitstrings, MultiAngleParams, MultiAngleQaoa, StandardParams, StandardQaoa,
    DEFAULT_SHOTS,
};
use crate::qubo::{
    build_otsp_qubo, build_vrp_qubo, OtspSpec, QuboModel, VrpSpec, DEFAULT_OTSP_PENALTY,
    DEFAULT_VRP_PENALTY,
};

/// Distances within this of the oracle count as optimal.
const ORACLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k: usize,
    pub capacity: usize,
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            k: 3,
            capacity: 4,
            seed: 0,
        }
    }
}

/// Circuit, penalty and optimiser settings for one quantum stage. The seeds
/// inside `spsa` and `init` are offsets mixed into the per-run seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub layers: usize,
    pub penalty: f64,
    pub shots: usize,
    pub spsa: SpsaConfig,
    pub init: InitConfig,
}

impl StageConfig {
    fn otsp() -> Self {
        Self {
            layers: 3,
            penalty: DEFAULT_OTSP_PENALTY,
            shots: DEFAULT_SHOTS,
            spsa: SpsaConfig::default(),
            init: InitConfig::default(),
        }
    }

    fn vrp() -> Self {
        Self {
            layers: 1,
            penalty: DEFAULT_VRP_PENALTY,
            ..Self::otsp()
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.layers == 0 || self.shots == 0 {
            return Err(Error::invalid(format!(
                "{name}: layers and shots must be positive"
            )));
        }
        if self.init.low > self.init.high {
            return Err(Error::invalid(format!("{name}: empty initial-angle range")));
        }
        self.spsa
            .validate()
            .map_err(|e| Error::invalid(format!("{name}: {e}")))
    }
}

impl Default for StageConfig {
    fn default() -> Self {
        Self::otsp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub runs: usize,
    /// Master seed; every run and stage seed is derived from it.
    pub seed: u64,
    /// Divide the circuit Hamiltonian and the optimised expectation by the
    /// largest absolute Ising coefficient.
    pub normalize_cost: bool,
    /// Execute independent runs on the rayon pool.
    pub parallel: bool,
    pub output_dir: PathBuf,
    pub clustering: ClusteringConfig,
    pub otsp: StageConfig,
    pub vrp: StageConfig,
    pub generator: GeneratorSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            seed: 2024,
            normalize_cost: true,
            parallel: true,
            output_dir: PathBuf::from("results"),
            clustering: ClusteringConfig::default(),
            otsp: StageConfig::otsp(),
            vrp: StageConfig::vrp(),
            generator: GeneratorSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        self.otsp.validate("otsp")?;
        self.vrp.validate("vrp")
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}

/// SplitMix64 finaliser over `base ^ tag`, used for every derived seed.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` under master seed `master`.
pub fn run_seed(master: u64, run: usize) -> u64 {
    derive_seed(master, run as u64)
}

/// Everything about one cluster that does not depend on the run seed.
#[derive(Debug, Clone)]
pub struct ClusterInstance {
    pub cluster: Cluster,
    /// Customer ids.
    pub initial: u32,
    pub final_: u32,
    pub weights: DistanceMatrix,
    pub qubo: QuboModel,
    pub ising: IsingModel,
    pub problem: RoutingProblem,
    pub oracle: RouteSolution,
}

#[derive(Debug, Clone)]
pub struct InterInstance {
    /// Cluster labels in matrix order (location `i + 1` is `order[i]`).
    pub order: Vec<usize>,
    pub weights: DistanceMatrix,
    pub qubo: QuboModel,
    pub ising: IsingModel,
    pub problem: RoutingProblem,
    pub oracle: RouteSolution,
}

/// Deterministic preprocessing shared by every run on a dataset.
#[derive(Debug, Clone)]
pub struct Instances {
    pub clusters: Vec<ClusterInstance>,
    pub inter: InterInstance,
}

impl Instances {
    pub fn intra_oracle_total(&self) -> f64 {
        self.clusters.iter().map(|c| c.oracle.distance).sum()
    }
}

pub fn prepare_instances(dataset: &Dataset, cfg: &PipelineConfig) -> Result<Instances> {
    cfg.validate()?;
    let cl = &cfg.clustering;
    let clusters = balanced_kmeans(dataset, cl.k, cl.capacity, cl.seed)
        .map_err(|e| e.in_stage("clustering"))?;
    if clusters.len() != 3 {
        return Err(Error::Unsupported(format!(
            "the inter-cluster stage routes exactly 3 clusters, got {}",
            clusters.len()
        ))
        .in_stage("clustering"));
    }

    let mut cluster_instances = Vec::with_capacity(clusters.len());
    for c in &clusters {
        let stage = format!("cluster {}", c.label);
        let inst = prepare_cluster(c, &clusters, dataset.depot, cfg.otsp.penalty)
            .map_err(|e| e.in_stage(stage))?;
        cluster_instances.push(inst);
    }

    let inter = prepare_inter(&clusters, dataset.depot, cfg.vrp.penalty)
        .map_err(|e| e.in_stage("inter-cluster"))?;
    Ok(Instances {
        clusters: cluster_instances,
        inter,
    })
}

fn prepare_cluster(
    c: &Cluster,
    all: &[Cluster],
    depot: Point,
    penalty: f64,
) -> Result<ClusterInstance> {
    let others: Vec<Point> = all
        .iter()
        .filter(|o| o.label != c.label)
        .map(|o| o.centroid)
        .collect();
    let t = select_terminals(c, depot, &others)?;
    let initial = c.local_index(t.initial).expect("terminal is a member");
    let final_ = c.local_index(t.final_).expect("terminal is a member");
    let weights = c.distance_matrix()?;
    let spec = OtspSpec {
        weights: weights.clone(),
        initial,
        final_,
    };
    let qubo = build_otsp_qubo(&spec, penalty)?;
    let ising = qubo_to_ising(&qubo);
    let problem = RoutingProblem::Otsp { initial, final_ };
    let oracle = problem.oracle(&weights)?;
    Ok(ClusterInstance {
        cluster: c.clone(),
        initial: t.initial,
        final_: t.final_,
        weights,
        qubo,
        ising,
        problem,
        oracle,
    })
}

fn prepare_inter(clusters: &[Cluster], depot: Point, penalty: f64) -> Result<InterInstance> {
    let order: Vec<usize> = clusters.iter().map(|c| c.label).collect();
    let centroids: Vec<Point> = clusters.iter().map(|c| c.centroid).collect();
    let weights = inter_cluster_matrix(depot, &centroids)?;
    let qubo = build_vrp_qubo(
        &VrpSpec {
            weights: weights.clone(),
            vehicles: 2,
        },
        penalty,
    )?;
    let ising = qubo_to_ising(&qubo);
    let problem = RoutingProblem::Vrp { vehicles: 2 };
    let oracle = problem.oracle(&weights)?;
    Ok(InterInstance {
        order,
        weights,
        qubo,
        ising,
        problem,
        oracle,
    })
}

/// Circuit model and the factor mapping its energies back to QUBO units.
fn circuit_model(ising: &IsingModel, normalize: bool) -> (IsingModel, f64) {
    let m = ising.max_abs_coefficient();
    if normalize && m > 0.0 {
        (ising.scaled(1.0 / m), m)
    } else {
        (ising.clone(), 1.0)
    }
}

fn stage_spsa(stage: &StageConfig, seed: u64) -> Result<Spsa> {
    Spsa::new(SpsaConfig {
        seed: derive_seed(seed, stage.spsa.seed),
        ..stage.spsa.clone()
    })
}

fn stage_init(stage: &StageConfig, dim: usize, seed: u64) -> Result<Vec<f64>> {
    init_params(
        dim,
        &InitConfig {
            seed: derive_seed(seed, stage.init.seed),
            ..stage.init.clone()
        },
    )
}

/// Result of one variational stage: samples plus the optimiser trace in
/// QUBO energy units.
struct StageRun {
    samples: Vec<Bitstring>,
    trace: OptimizationTrace,
}

fn rescale_trace(mut trace: OptimizationTrace, unit: f64) -> OptimizationTrace {
    for v in &mut trace.values {
        *v *= unit;
    }
    trace.best_value *= unit;
    trace
}

fn run_standard_stage(
    ising: &IsingModel,
    stage: &StageConfig,
    normalize: bool,
    seed: u64,
) -> Result<StageRun> {
    let (circuit, unit) = circuit_model(ising, normalize);
    let sim = StandardQaoa::new(&circuit, &circuit)?;
    let p = stage.layers;
    let init = stage_init(stage, 2 * p, derive_seed(seed, 1))?;
    let spsa = stage_spsa(stage, derive_seed(seed, 2))?;
    let mut objective = |theta: &[f64]| {
        StandardParams::from_flat(theta, p)
            .and_then(|params| sim.expectation(&params))
            .unwrap_or(f64::NAN)
    };
    let trace = spsa.minimize(&mut objective, &init)?;
    let state = sim.state(&StandardParams::from_flat(&trace.best_params, p)?)?;
    let samples = sample_bitstrings(&state, stage.shots, derive_seed(seed, 3));
    Ok(StageRun {
        samples,
        trace: rescale_trace(trace, unit),
    })
}

fn run_multi_angle_stage(
    ising: &IsingModel,
    stage: &StageConfig,
    normalize: bool,
    seed: u64,
) -> Result<StageRun> {
    let (circuit, unit) = circuit_model(ising, normalize);
    let sim = MultiAngleQaoa::new(&circuit, &circuit)?;
    let n = ising.nspins();
    let p = stage.layers;
    let init = stage_init(stage, MultiAngleParams::count(n, p), derive_seed(seed, 1))?;
    let spsa = stage_spsa(stage, derive_seed(seed, 2))?;
    let mut objective = |theta: &[f64]| {
        MultiAngleParams::from_flat(theta, n, p)
            .and_then(|params| sim.expectation(&params))
            .unwrap_or(f64::NAN)
    };
    let trace = spsa.minimize(&mut objective, &init)?;
    let state = sim.state(&MultiAngleParams::from_flat(&trace.best_params, n, p)?)?;
    let samples = sample_bitstrings(&state, stage.shots, derive_seed(seed, 3));
    Ok(StageRun {
        samples,
        trace: rescale_trace(trace, unit),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    pub label: usize,
    pub members: Vec<u32>,
    pub initial: u32,
    pub final_: u32,
    pub bitstring: String,
    /// Customer ids in visiting order.
    pub route: Vec<u32>,
    pub distance: f64,
    pub oracle_bitstring: String,
    pub oracle_distance: f64,
    pub matches_oracle: bool,
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterResult {
    /// Cluster labels behind locations 1, 2, 3.
    pub order: Vec<usize>,
    pub bitstring: String,
    /// Routes as cluster labels, 0 for the depot.
    pub routes: Vec<Vec<usize>>,
    pub distance: f64,
    pub oracle_bitstring: String,
    pub oracle_distance: f64,
    pub feasible: bool,
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTrace {
    pub stage: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub clusters: Vec<ClusterResult>,
    pub inter: InterResult,
    pub intra_total: f64,
    pub intra_oracle_total: f64,
    /// Oracle over quantum inter-cluster distance.
    pub approximation_ratio: f64,
    pub total: f64,
    #[serde(skip)]
    pub traces: Vec<StageTrace>,
}

fn cluster_result(inst: &ClusterInstance, sol: &RouteSolution) -> ClusterResult {
    let ids = inst.cluster.member_ids();
    ClusterResult {
        label: inst.cluster.label,
        members: ids.clone(),
        initial: inst.initial,
        final_: inst.final_,
        bitstring: sol.bitstring.to_string(),
        route: sol.routes[0].iter().map(|&v| ids[v]).collect(),
        distance: sol.distance,
        oracle_bitstring: inst.oracle.bitstring.to_string(),
        oracle_distance: inst.oracle.distance,
        matches_oracle: sol.distance <= inst.oracle.distance + ORACLE_TOLERANCE,
        repaired: sol.repaired,
    }
}

/// One run of the quantum stages on prepared instances.
pub fn solve_prepared(
    instances: &Instances,
    cfg: &PipelineConfig,
    run: usize,
    seed: u64,
) -> Result<RunReport> {
    let mut clusters = Vec::with_capacity(instances.clusters.len());
    let mut traces = Vec::new();
    for inst in &instances.clusters {
        let label = inst.cluster.label;
        let stage = format!("cluster {label}");
        let result = run_standard_stage(
            &inst.ising,
            &cfg.otsp,
            cfg.normalize_cost,
            derive_seed(seed, label as u64),
        )
        .and_then(|r| {
            let sol = extract_best_feasible(&r.samples, &inst.weights, &inst.problem)?;
            Ok((r.trace, sol))
        })
        .map_err(|e| e.in_stage(stage.clone()))?;
        traces.push(StageTrace {
            stage,
            values: result.0.values,
        });
        clusters.push(cluster_result(inst, &result.1));
    }

    let inter = &instances.inter;
    let (trace, sol) = run_multi_angle_stage(
        &inter.ising,
        &cfg.vrp,
        cfg.normalize_cost,
        derive_seed(seed, 0),
    )
    .and_then(|r| {
        let sol = extract_best_feasible(&r.samples, &inter.weights, &inter.problem)?;
        Ok((r.trace, sol))
    })
    .map_err(|e| e.in_stage("inter-cluster"))?;
    traces.push(StageTrace {
        stage: "inter-cluster".to_string(),
        values: trace.values,
    });
    let label_of = |v: usize| if v == 0 { 0 } else { inter.order[v - 1] };
    let inter_result = InterResult {
        order: inter.order.clone(),
        bitstring: sol.bitstring.to_string(),
        routes: sol
            .routes
            .iter()
            .map(|r| r.iter().map(|&v| label_of(v)).collect())
            .collect(),
        distance: sol.distance,
        oracle_bitstring: inter.oracle.bitstring.to_string(),
        oracle_distance: inter.oracle.distance,
        feasible: sol.feasible,
        repaired: sol.repaired,
    };

    let intra_total: f64 = clusters.iter().map(|c| c.distance).sum();
    Ok(RunReport {
        run,
        seed,
        intra_oracle_total: instances.intra_oracle_total(),
        approximation_ratio: inter_result.oracle_distance / inter_result.distance,
        total: intra_total + inter_result.distance,
        intra_total,
        clusters,
        inter: inter_result,
        traces,
    })
}

pub fn solve_hierarchical(dataset: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<RunReport> {
    let instances = prepare_instances(dataset, cfg)?;
    solve_prepared(&instances, cfg, 0, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Population statistics of a non-empty sample.
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Summary {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateStats {
    pub runs: usize,
    pub inter_distance: Summary,
    pub inter_oracle_distance: f64,
    pub approximation_ratio: Summary,
    /// Most frequent inter-cluster bitstring (ties to the smallest value).
    pub modal_bitstring: String,
    pub modal_count: usize,
    pub modal_distance: f64,
    pub repair_rate: f64,
    pub intra_total: Summary,
    pub intra_oracle_total: f64,
    /// Per cluster, fraction of runs whose route matched the oracle.
    pub intra_hit_rates: Vec<f64>,
    pub intra_repair_rates: Vec<f64>,
    pub total: Summary,
}

pub fn aggregate(reports: &[RunReport]) -> Result<AggregateStats> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("no runs to aggregate"))?;
    let n = reports.len() as f64;
    let collect = |f: &dyn Fn(&RunReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let rate = |f: &dyn Fn(&RunReport) -> bool| reports.iter().filter(|r| f(r)).count() as f64 / n;

    let mut counts: BTreeMap<Bitstring, (usize, f64)> = BTreeMap::new();
    for r in reports {
        let b: Bitstring = r.inter.bitstring.parse()?;
        counts.entry(b).or_insert((0, r.inter.distance)).0 += 1;
    }
    let (modal, (modal_count, modal_distance)) = counts
        .iter()
        .fold(
            None,
            |best: Option<(&Bitstring, &(usize, f64))>, (b, c)| match best {
                Some((_, bc)) if bc.0 >= c.0 => best,
                _ => Some((b, c)),
            },
        )
        .expect("non-empty");

    let k = first.clusters.len();
    Ok(AggregateStats {
        runs: reports.len(),
        inter_distance: Summary::of(&collect(&|r| r.inter.distance)),
        inter_oracle_distance: first.inter.oracle_distance,
        approximation_ratio: Summary::of(&collect(&|r| r.approximation_ratio)),
        modal_bitstring: modal.to_string(),
        modal_count: *modal_count,
        modal_distance: *modal_distance,
        repair_rate: rate(&|r| r.inter.repaired),
        intra_total: Summary::of(&collect(&|r| r.intra_total)),
        intra_oracle_total: first.intra_oracle_total,
        intra_hit_rates: (0..k)
            .map(|i| rate(&|r| r.clusters[i].matches_oracle))
            .collect(),
        intra_repair_rates: (0..k).map(|i| rate(&|r| r.clusters[i].repaired)).collect(),
        total: Summary::of(&collect(&|r| r.total)),
    })
}

/// All runs of a benchmark and their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub reports: Vec<RunReport>,
    pub stats: AggregateStats,
}

pub fn run_benchmark(dataset: &Dataset, cfg: &PipelineConfig) -> Result<Benchmark> {
    let instances = prepare_instances(dataset, cfg)?;
    let one = |run: usize| {
        solve_prepared(&instances, cfg, run, run_seed(cfg.seed, run))
            .map_err(|e| e.in_stage(format!("run {run}")))
    };
    let reports: Vec<RunReport> = if cfg.parallel {
        (0..cfg.runs)
            .into_par_iter()
            .map(one)
            .collect::<Result<_>>()?
    } else {
        (0..cfg.runs).map(one).collect::<Result<_>>()?
    };
    let stats = aggregate(&reports)?;
    Ok(Benchmark { reports, stats })
}

pub fn run_statistics(dataset: &Dataset, cfg: &PipelineConfig) -> Result<AggregateStats> {
    Ok(run_benchmark(dataset, cfg)?.stats)
}

/// Exhaustive optima for every stage, with the QUBO-scan cross-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactReport {
    pub clusters: Vec<ClusterResult>,
    pub inter: InterResult,
    pub intra_total: f64,
    pub total: f64,
    /// Largest gap between a QUBO minimum and the enumerated route length.
    pub max_oracle_gap: f64,
}

pub fn exact_report(dataset: &Dataset, cfg: &PipelineConfig) -> Result<ExactReport> {
    let inst = prepare_instances(dataset, cfg)?;
    let mut gap: f64 = 0.0;
    let mut clusters = Vec::new();
    for c in &inst.clusters {
        let scan = brute_force_qubo_min(&c.qubo)?;
        gap = gap.max((scan.energy - c.oracle.distance).abs());
        clusters.push(cluster_result(c, &c.oracle));
    }
    let scan = brute_force_qubo_min(&inst.inter.qubo)?;
    gap = gap.max((scan.energy - inst.inter.oracle.distance).abs());
    let o = &inst.inter.oracle;
    let label_of = |v: usize| if v == 0 { 0 } else { inst.inter.order[v - 1] };
    let inter = InterResult {
        order: inst.inter.order.clone(),
        bitstring: o.bitstring.to_string(),
        routes: o
            .routes
            .iter()
            .map(|r| r.iter().map(|&v| label_of(v)).collect())
            .collect(),
        distance: o.distance,
        oracle_bitstring: o.bitstring.to_string(),
        oracle_distance: o.distance,
        feasible: true,
        repaired: false,
    };
    let intra_total = inst.intra_oracle_total();
    Ok(ExactReport {
        total: intra_total + inter.distance,
        intra_total,
        clusters,
        inter,
        max_oracle_gap: gap,
    })
}
