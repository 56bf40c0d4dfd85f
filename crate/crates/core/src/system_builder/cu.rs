//! Compute-unit design: kernel instances per CU, Read/Write modules and
//! HBM channel assignment.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{BoardSpec, BuildError};
use crate::lowering::{tensor_name, LoweredKernel};
use crate::tensor_ir::ScalarFormat;

/// System-level CU replications never exceed this with double buffering.
pub const MAX_DOUBLE_BUFFERED_CUS: usize = 16;
/// Below this many CUs input and output get separate channels.
pub const SPLIT_BELOW_CUS: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub double_buffering: bool,
    pub bus_parallel: bool,
    pub dataflow: bool,
    pub fixed_point: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelRole {
    InEven,
    InOdd,
    OutEven,
    OutOdd,
    Even,
    Odd,
    InOut,
}

impl ChannelRole {
    pub fn port(&self) -> &'static str {
        match self {
            ChannelRole::InEven => "in_even",
            ChannelRole::InOdd => "in_odd",
            ChannelRole::OutEven => "out_even",
            ChannelRole::OutOdd => "out_odd",
            ChannelRole::Even => "even",
            ChannelRole::Odd => "odd",
            ChannelRole::InOut => "gmem",
        }
    }

    /// Roles of one CU for a given replication.
    pub fn per_cu(double_buffering: bool, n_cu: usize) -> Vec<ChannelRole> {
        use ChannelRole::*;
        match (double_buffering, n_cu < SPLIT_BELOW_CUS) {
            (false, _) => vec![InOut],
            (true, true) => vec![InEven, InOdd, OutEven, OutOdd],
            (true, false) => vec![Even, Odd],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleDesc {
    /// (tensor, words per element) in transfer order.
    pub tensors: Vec<(String, u64)>,
    pub words_per_element: u64,
    /// Cycles per element of the module.
    pub interval: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortAssignment {
    pub cu: usize,
    pub role: ChannelRole,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuDesign {
    pub kernel: String,
    pub format: ScalarFormat,
    /// Words per bus beat.
    pub lanes: u64,
    /// Kernel instances per CU.
    pub kernels: u64,
    pub options: BuildOptions,
    pub read: ModuleDesc,
    pub write: ModuleDesc,
    /// Group names and intervals in stage order.
    pub groups: Vec<(String, u64)>,
    /// (multipliers, adders) of one kernel instance.
    pub operators: (u64, u64),
    pub n_cu: usize,
    pub ports: Vec<PortAssignment>,
}

impl CuDesign {
    pub fn roles(&self) -> Vec<ChannelRole> {
        ChannelRole::per_cu(self.options.double_buffering, self.n_cu)
    }

    /// Cycles per element of the slowest stage, Read and Write included.
    pub fn max_interval(&self) -> u64 {
        self.groups.iter().map(|g| g.1).chain([self.read.interval, self.write.interval]).max().unwrap_or(1)
    }

    /// Cycles for one element to pass through every stage.
    pub fn fill_cycles(&self) -> u64 {
        self.read.interval + self.groups.iter().map(|g| g.1).sum::<u64>() + self.write.interval
    }

    /// Operators instantiated over the whole system.
    pub fn total_operators(&self) -> u64 {
        (self.operators.0 + self.operators.1) * self.kernels * self.n_cu as u64
    }

    /// Replicate into `n_cu` CUs and assign channels.
    pub fn replicate(&mut self, board: &BoardSpec, n_cu: usize) -> Result<(), BuildError> {
        self.ports = assign_channels(self, board, n_cu)?;
        self.n_cu = n_cu;
        Ok(())
    }

    /// One `sp=` line per port.
    pub fn system_cfg(&self) -> String {
        let mut s = String::new();
        for p in &self.ports {
            let _ = writeln!(s, "sp=cu_{}.m_axi_{}:HBM[{}]", p.cu, p.role.port(), p.channel);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

pub fn build_cu(kernel: &LoweredKernel, board: &BoardSpec, opts: BuildOptions) -> Result<CuDesign, BuildError> {
    let fmt = kernel.format;
    let width = fmt.width_bits();
    let divisible = board.bus_width_bits.is_multiple_of(width);
    let lanes = if divisible { (board.bus_width_bits / width) as u64 } else { 1 };
    if opts.bus_parallel && (!divisible || lanes < 2) {
        return Err(BuildError::Inconsistent(format!(
            "bus parallelism needs a scalar width dividing the {}-bit bus into several lanes, got {width} bits",
            board.bus_width_bits
        )));
    }
    if opts.fixed_point != fmt.is_fixed() {
        return Err(BuildError::Inconsistent(format!("fixed-point option does not match format {fmt}")));
    }
    let groups = kernel.schedule.groups.len();
    if !opts.dataflow && groups > 1 {
        return Err(BuildError::Inconsistent(format!("{groups} groups scheduled but dataflow is disabled")));
    }
    if opts.double_buffering && board.hbm_channels < 2 {
        return Err(BuildError::Inconsistent("double buffering needs at least two HBM channels".into()));
    }
    let s = &kernel.schedule;
    let words = |ids: Vec<(String, u64)>| {
        let total = ids.iter().map(|t| t.1).sum();
        (ids, total)
    };
    let (tensors, words_in) = words(s.graph.inputs().map(|n| (tensor_name(s, n.id), n.size() as u64)).collect());
    let read = ModuleDesc { tensors, words_per_element: words_in, interval: s.read_interval() };
    let (tensors, words_out) = words(s.graph.outputs().map(|n| (n.display_name(), n.size() as u64)).collect());
    let write = ModuleDesc { tensors, words_per_element: words_out, interval: s.write_interval() };
    let mut design = CuDesign {
        kernel: kernel.name.clone(),
        format: fmt,
        lanes,
        kernels: if opts.bus_parallel { lanes } else { 1 },
        options: opts,
        read,
        write,
        groups: s.stage_order.iter().map(|&g| (s.groups[g].name.clone(), s.groups[g].interval)).collect(),
        operators: s.operators(),
        n_cu: 1,
        ports: Vec::new(),
    };
    design.replicate(board, 1)?;
    Ok(design)
}

/// Contiguous channels per CU: CU `k` owns `[k*c, (k+1)*c)`.
pub fn assign_channels(design: &CuDesign, board: &BoardSpec, n_cu: usize) -> Result<Vec<PortAssignment>, BuildError> {
    if n_cu == 0 {
        return Err(BuildError::Inconsistent("at least one CU is required".into()));
    }
    let db = design.options.double_buffering;
    let roles = ChannelRole::per_cu(db, n_cu);
    let needed = roles.len() * n_cu;
    if needed > board.hbm_channels {
        return Err(BuildError::ChannelExhausted { n_cu, needed, available: board.hbm_channels });
    }
    if db && n_cu > MAX_DOUBLE_BUFFERED_CUS {
        return Err(BuildError::TooManyCus { n_cu, cap: MAX_DOUBLE_BUFFERED_CUS });
    }
    Ok((0..n_cu)
        .flat_map(|cu| roles.iter().enumerate().map(move |(r, &role)| (cu, r, role)))
        .map(|(cu, r, role)| PortAssignment { cu, role, channel: cu * roles.len() + r })
        .collect())
}
