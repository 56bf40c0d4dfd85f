//! Resource estimation from operator counts and bank sizes.

use serde::{Deserialize, Serialize};

use super::FrequencyModel;
use crate::memory_planner::BankAssignment;
use crate::system_builder::{BoardSpec, ChannelRole, CuDesign, Resources, MAX_DOUBLE_BUFFERED_CUS};
use crate::tensor_ir::ScalarFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatCost {
    pub dsp_per_multiplier: u64,
    pub lut_per_multiplier: u64,
    pub ff_per_multiplier: u64,
    pub dsp_per_adder: u64,
    pub lut_per_adder: u64,
    pub ff_per_adder: u64,
}

/// Calibration constants. The defaults are rough estimates, not measured
/// values; override them from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub float64: FormatCost,
    pub float32: FormatCost,
    /// Fixed formats wider than 32 bits.
    pub fixed_wide: FormatCost,
    pub fixed_narrow: FormatCost,
    pub bram_bits_per_tile: u64,
    pub uram_bits_per_block: u64,
    /// Banks larger than this go to URAM.
    pub uram_threshold_bits: u64,
    pub port_factor: u64,
    /// Cost of one Read or Write module.
    pub module: Resources,
    pub shell: Resources,
    #[serde(default)]
    pub frequency: FrequencyModel,
}

impl Default for CostTable {
    fn default() -> Self {
        let fc = |dm, lm, fm, da, la, fa| FormatCost {
            dsp_per_multiplier: dm,
            lut_per_multiplier: lm,
            ff_per_multiplier: fm,
            dsp_per_adder: da,
            lut_per_adder: la,
            ff_per_adder: fa,
        };
        CostTable {
            float64: fc(11, 350, 650, 3, 750, 1150),
            float32: fc(3, 120, 180, 2, 400, 550),
            fixed_wide: fc(3, 160, 260, 0, 64, 64),
            fixed_narrow: fc(1, 60, 100, 0, 32, 32),
            bram_bits_per_tile: 36_864,
            uram_bits_per_block: 294_912,
            uram_threshold_bits: 294_912,
            port_factor: 2,
            module: Resources { lut: 2_000, ff: 3_000, bram: 2, uram: 0, dsp: 0 },
            shell: Resources { lut: 120_000, ff: 200_000, bram: 180, uram: 0, dsp: 4 },
            frequency: FrequencyModel::default(),
        }
    }
}

impl CostTable {
    pub fn format(&self, fmt: ScalarFormat) -> &FormatCost {
        match fmt {
            ScalarFormat::Float64 => &self.float64,
            ScalarFormat::Float32 => &self.float32,
            ScalarFormat::Fixed { width_bits, .. } if width_bits > 32 => &self.fixed_wide,
            ScalarFormat::Fixed { .. } => &self.fixed_narrow,
            ScalarFormat::CustomFloat { .. } if fmt.width_bits() > 32 => &self.float64,
            ScalarFormat::CustomFloat { .. } => &self.float32,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("serializable")
    }

    pub fn from_toml(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    /// (BRAM tiles, URAM blocks) for one bank.
    pub fn bank_blocks(&self, bits: u64) -> (u64, u64) {
        if bits > self.uram_threshold_bits {
            (0, bits.div_ceil(self.uram_bits_per_block))
        } else {
            (bits.div_ceil(self.bram_bits_per_tile) * self.port_factor, 0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub per_cu: Resources,
    pub shell: Resources,
    pub n_cu: usize,
    pub total: Resources,
    /// Fractions of the board totals in `Resources::CLASSES` order.
    pub utilization: [f64; 5],
    pub feasible: bool,
}

impl ResourceEstimate {
    pub fn new(per_cu: Resources, shell: Resources, n_cu: usize, board: &BoardSpec) -> Self {
        let total = shell + per_cu.scale(n_cu as u64);
        let cap = board.totals();
        let utilization = Resources::CLASSES.map(|c| total.get(c) as f64 / cap.get(c) as f64);
        ResourceEstimate { per_cu, shell, n_cu, total, utilization, feasible: utilization.iter().all(|&u| u <= 1.0) }
    }

    pub fn max_utilization(&self) -> f64 {
        self.utilization.iter().copied().fold(0.0, f64::max)
    }
}

pub fn estimate_resources(design: &CuDesign, banks: &BankAssignment, table: &CostTable, board: &BoardSpec) -> ResourceEstimate {
    let c = table.format(design.format);
    let (m, a) = design.operators;
    let mut kernel = Resources {
        lut: m * c.lut_per_multiplier + a * c.lut_per_adder,
        ff: m * c.ff_per_multiplier + a * c.ff_per_adder,
        bram: 0,
        uram: 0,
        dsp: m * c.dsp_per_multiplier + a * c.dsp_per_adder,
    };
    for bank in &banks.banks {
        let (bram, uram) = table.bank_blocks(bank.bits);
        kernel.bram += bram;
        kernel.uram += uram;
    }
    let per_cu = kernel.scale(design.kernels) + table.module.scale(2);
    ResourceEstimate::new(per_cu, table.shell, design.n_cu, board)
}

/// Largest CU count whose utilization stays within `cap` on every class
/// and whose channels fit the board; 0 if not even one fits.
pub fn max_replication(estimate: &ResourceEstimate, board: &BoardSpec, cap: f64, double_buffering: bool) -> usize {
    let totals = board.totals();
    let fits = |n: usize| {
        let used = estimate.shell + estimate.per_cu.scale(n as u64);
        let channels = ChannelRole::per_cu(double_buffering, n).len() * n;
        Resources::CLASSES.iter().all(|c| used.get(c) as f64 <= cap * totals.get(c) as f64 + 1e-9)
            && channels <= board.hbm_channels
            && (!double_buffering || n <= MAX_DOUBLE_BUFFERED_CUS)
    };
    let mut n = 0;
    while n < board.hbm_channels && fits(n + 1) {
        n += 1;
    }
    n
}
