//! End-to-end driver: source text to lowered kernel, system design,
//! artifacts, timing report and oracle checks.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{self, FrontendError, Params};
use crate::lowering::{
    emit_c, execute_kernel, liveness, lower, CompatibilityGraph, Endpoint, ExecError, ExecOptions, LowerError, LoweredKernel,
};
use crate::memory_planner::{plan_banks, unshared, BankAssignment};
use crate::perf_model::{estimate_resources, max_replication, metrics, simulate, CostTable, PerfError, ResourceEstimate, SimReport};
use crate::rewriter::{factorize_traced, RewriteTrace};
use crate::scheduler::{atomize, collapse, collapse_to, GroupBudget, GroupSchedule};
use crate::system_builder::{build_cu, host_plan, plan_batch, BatchPlan, BoardSpec, BuildError, BuildOptions, CuDesign, HostPlan};
use crate::tensor_ir::eval::eval_nodes;
use crate::tensor_ir::{eval_reference, from_ast, FlopCount, ScalarFormat, Tensor, TensorGraph, TensorMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dataflow {
    /// Collapse under the default budget.
    Auto,
    /// Collapse down to at most this many groups.
    Groups(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Replication {
    Fixed(usize),
    /// Largest count under the utilization cap.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub name: String,
    pub format: ScalarFormat,
    pub dataflow: Dataflow,
    pub double_buffering: bool,
    pub bus_parallel: bool,
    pub mem_sharing: bool,
    pub n_eq: u64,
    pub replication: Replication,
    pub cap: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            name: "kernel".into(),
            format: ScalarFormat::Float64,
            dataflow: Dataflow::Groups(1),
            double_buffering: false,
            bus_parallel: false,
            mem_sharing: false,
            n_eq: 2_000_000,
            replication: Replication::Fixed(1),
            cap: crate::perf_model::DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Perf(#[from] PerfError),
    #[error("no compute unit fits the board under a {0:.0}% utilization cap")]
    NoFit(f64),
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub options: CompileOptions,
    /// Graph as written, before factorization.
    pub source_graph: TensorGraph,
    pub rewrite: RewriteTrace,
    pub schedule: GroupSchedule,
    pub kernel: LoweredKernel,
    pub compat: CompatibilityGraph,
    pub banks: BankAssignment,
    pub design: CuDesign,
    pub batch: BatchPlan,
    pub host: HostPlan,
    pub estimate: ResourceEstimate,
    pub frequency_mhz: f64,
    pub flops: FlopCount,
    pub warnings: Vec<String>,
}

pub fn schedule_for(graph: &TensorGraph, dataflow: Dataflow) -> GroupSchedule {
    let atoms = atomize(graph);
    match dataflow {
        Dataflow::Auto => collapse(&atoms, &GroupBudget::default_for(graph)),
        Dataflow::Groups(n) => collapse_to(&atoms, n),
    }
}

pub fn compile(src: &str, params: &Params, opts: &CompileOptions, board: &BoardSpec, table: &CostTable) -> Result<Compiled, PipelineError> {
    let program = frontend::load(src, params)?;
    let source_graph = from_ast(&program);
    let rewrite = factorize_traced(&source_graph);
    let schedule = schedule_for(&rewrite.graph, opts.dataflow);
    let kernel = lower(&schedule, &opts.name, opts.format)?;
    let compat = liveness(&kernel.groups);
    let mut warnings = Vec::new();
    if opts.mem_sharing && schedule.groups.len() > 1 {
        warnings.push(format!(
            "memory sharing is ineffective with {} compute groups; buffers of different groups never share",
            schedule.groups.len()
        ));
    }
    let banks = if opts.mem_sharing { plan_banks(&compat) } else { unshared(&compat) };
    let build = BuildOptions {
        double_buffering: opts.double_buffering,
        bus_parallel: opts.bus_parallel,
        dataflow: schedule.groups.len() > 1,
        fixed_point: opts.format.is_fixed(),
    };
    let mut design = build_cu(&kernel, board, build)?;
    let single = estimate_resources(&design, &banks, table, board);
    let n_cu = match opts.replication {
        Replication::Fixed(n) => n,
        Replication::Auto => match max_replication(&single, board, opts.cap, opts.double_buffering) {
            0 => return Err(PipelineError::NoFit(opts.cap * 100.0)),
            n => n,
        },
    };
    design.replicate(board, n_cu)?;
    let estimate = estimate_resources(&design, &banks, table, board);
    if !estimate.feasible {
        warnings.push(format!("design exceeds the board: peak utilization {:.1}%", estimate.max_utilization() * 100.0));
    }
    let frequency_mhz = table.frequency.achieved(board.target_frequency_mhz, estimate.max_utilization());
    let batch = plan_batch(board, &rewrite.graph, opts.format, opts.n_eq, design.kernels, n_cu as u64)?;
    let host = host_plan(&batch, &design);
    let flops = crate::lowering::count_flops(&kernel);
    Ok(Compiled {
        options: opts.clone(),
        source_graph,
        rewrite,
        schedule,
        kernel,
        compat,
        banks,
        design,
        batch,
        host,
        estimate,
        frequency_mhz,
        flops,
        warnings,
    })
}

/// Summary written next to the other artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub options: CompileOptions,
    pub groups: Vec<String>,
    pub frequency_mhz: f64,
    pub flops: FlopCount,
    pub design: CuDesign,
    pub batch: BatchPlan,
    pub estimate: ResourceEstimate,
    pub artifacts: Vec<String>,
}

impl Compiled {
    pub fn manifest(&self) -> Manifest {
        Manifest {
            options: self.options.clone(),
            groups: self.schedule.names_in_stage_order(),
            frequency_mhz: self.frequency_mhz,
            flops: self.flops,
            design: self.design.clone(),
            batch: self.batch,
            estimate: self.estimate.clone(),
            artifacts: self.artifact_names(),
        }
    }

    fn artifact_names(&self) -> Vec<String> {
        let n = &self.options.name;
        vec![
            format!("{n}.c"),
            format!("{n}_compat.json"),
            format!("{n}_banks.json"),
            "system.cfg".into(),
            "host_plan.json".into(),
            "batch_plan.json".into(),
            "design.json".into(),
        ]
    }

    /// (file name, contents) of every artifact, in a fixed order.
    pub fn artifacts(&self) -> Vec<(String, String)> {
        let manifest = serde_json::to_string_pretty(&self.manifest()).expect("serializable");
        let contents = vec![
            emit_c(&self.kernel),
            self.compat.to_json(),
            self.banks.to_json(),
            self.design.system_cfg(),
            self.host.to_json(),
            self.batch.to_json(),
            manifest,
        ];
        self.artifact_names().into_iter().zip(contents).collect()
    }

    pub fn simulate(&self, board: &BoardSpec, power_w: Option<f64>) -> Result<SimReport, PerfError> {
        simulate_manifest(&self.manifest(), board, power_w)
    }
}

/// Timing report from a manifest alone, so a compiled directory can be
/// simulated without the source.
pub fn simulate_manifest(m: &Manifest, board: &BoardSpec, power_w: Option<f64>) -> Result<SimReport, PerfError> {
    let report = simulate(&m.design, &m.batch, board, m.frequency_mhz);
    metrics(report, m.flops, m.batch.n_eq, m.design.total_operators(), m.frequency_mhz, power_w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    /// Against the unfactorized graph evaluated in Float64.
    pub max_rel_error: f64,
    pub mse: f64,
    /// Every trial matched the reference in the kernel's own format.
    pub exact: bool,
    pub passed: bool,
    /// First group, in stage order, whose streams disagree with the reference.
    pub failing_group: Option<String>,
}

pub fn random_inputs<R: Rng>(graph: &TensorGraph, rng: &mut R) -> TensorMap {
    graph.inputs().map(|n| (n.display_name(), Tensor::random_uniform(&n.shape, -1.0, 1.0, rng))).collect()
}

/// Run the lowered kernel on random inputs and compare against the
/// reference interpreter. `perturb_group` injects a fault for testing.
pub fn verify<R: Rng>(
    c: &Compiled,
    trials: usize,
    tolerance: f64,
    perturb_group: Option<usize>,
    rng: &mut R,
) -> Result<VerifyReport, PipelineError> {
    let fmt = c.options.format;
    let graph = &c.rewrite.graph;
    let (mut max_rel, mut sq, mut count, mut exact) = (0.0f64, 0.0f64, 0usize, true);
    let mut failing_group = None;
    for _ in 0..trials {
        let inputs = random_inputs(graph, rng);
        let opts = ExecOptions { perturb_group, record_streams: true, ..Default::default() };
        let run = execute_kernel(&c.kernel, &inputs, &opts)?;
        let same_fmt = eval_reference(graph, &inputs, fmt).map_err(ExecError::from)?;
        let truth = eval_reference(&c.source_graph, &inputs, ScalarFormat::Float64).map_err(ExecError::from)?;
        for (name, want) in &same_fmt {
            let got = &run.outputs[name];
            let close = if fmt.is_fixed() { got == want } else { got.max_rel_error(want) <= tolerance };
            exact &= close;
            max_rel = max_rel.max(got.max_rel_error(&truth[name]));
            sq += got.data.iter().zip(&truth[name].data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            count += got.data.len();
        }
        if !exact && failing_group.is_none() {
            failing_group = locate_fault(c, &inputs, &run.trace.stream_values, tolerance)?;
        }
    }
    let passed = exact && (fmt != ScalarFormat::Float64 || max_rel <= tolerance);
    Ok(VerifyReport { trials, max_rel_error: max_rel, mse: sq / count.max(1) as f64, exact, passed, failing_group })
}

fn locate_fault(c: &Compiled, inputs: &TensorMap, streams: &[Vec<f64>], tolerance: f64) -> Result<Option<String>, PipelineError> {
    let values = eval_nodes(&c.rewrite.graph, inputs, c.options.format).map_err(ExecError::from)?;
    let k = &c.kernel;
    for &g in &k.schedule.stage_order {
        for s in k.streams.iter().filter(|s| s.src == Endpoint::Group(g)) {
            let want = values[s.tensor].as_ref().expect("streamed tensors are materialized");
            let got = Tensor::new(vec![want.len()], streams[s.id].clone());
            let want = Tensor::new(vec![want.len()], want.clone());
            if got.max_rel_error(&want) > tolerance || (c.options.format.is_fixed() && got != want) {
                return Ok(Some(k.groups[g].name.clone()));
            }
        }
    }
    Ok(None)
}
