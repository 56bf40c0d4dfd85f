//! Batch-level timing model and derived throughput metrics.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system_builder::{BatchPlan, BoardSpec, CuDesign};
use crate::tensor_ir::FlopCount;

/// Achieved clock as a piecewise-linear function of the highest resource
/// utilization. Empty means the target clock is always met.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyModel {
    /// (utilization, MHz) points.
    pub points: Vec<(f64, f64)>,
}

impl FrequencyModel {
    pub fn achieved(&self, target_mhz: f64, utilization: f64) -> f64 {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let f = match (pts.first(), pts.last()) {
            (None, _) | (_, None) => return target_mhz,
            (Some(&(u0, f0)), _) if utilization <= u0 => f0,
            (_, Some(&(u1, f1))) if utilization >= u1 => f1,
            _ => {
                let k = pts.windows(2).position(|w| utilization <= w[1].0).expect("inside the table");
                let ((ua, fa), (ub, fb)) = (pts[k], pts[k + 1]);
                fa + (fb - fa) * (utilization - ua) / (ub - ua)
            }
        };
        f.min(target_mhz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTimes {
    pub transfer_in: f64,
    pub compute: f64,
    pub transfer_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub frequency_mhz: f64,
    pub compute_cycles_per_batch: u64,
    pub iterations: Vec<IterationTimes>,
    pub serial_makespan: f64,
    pub double_buffered_makespan: f64,
    /// The makespan of the configured design.
    pub makespan: f64,
    pub total_compute: f64,
    pub total_in: f64,
    pub total_out: f64,
    pub num_operators: u64,
    pub flops_per_element: u64,
    pub n_eq: u64,
    pub cu_gflops: f64,
    pub system_gflops: f64,
    pub ideal_gflops: f64,
    pub efficiency: f64,
    pub gflops_per_watt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PerfError {
    #[error("elapsed time is zero; throughput is undefined")]
    ZeroElapsed,
}

/// Cycles for one CU to process a batch: the first element crosses every
/// stage, the rest follow at the slowest stage interval.
pub fn compute_cycles(design: &CuDesign, elements: u64) -> u64 {
    let per_kernel = elements.div_ceil(design.kernels);
    if per_kernel == 0 {
        return 0;
    }
    design.fill_cycles() + (per_kernel - 1) * design.max_interval()
}

pub fn serial_makespan(it: &[IterationTimes]) -> f64 {
    it.iter().map(|t| t.transfer_in + t.compute + t.transfer_out).sum()
}

/// Ping/pong overlap: while iteration b computes, b+1 is sent and b-1
/// returned.
pub fn double_buffered_makespan(it: &[IterationTimes]) -> f64 {
    let Some(first) = it.first() else { return 0.0 };
    let mut t = first.transfer_in;
    for b in 0..it.len() {
        let next_in = it.get(b + 1).map_or(0.0, |x| x.transfer_in);
        let prev_out = if b > 0 { it[b - 1].transfer_out } else { 0.0 };
        t += it[b].compute.max(next_in + prev_out);
    }
    t + it.last().map_or(0.0, |x| x.transfer_out)
}

pub fn simulate(design: &CuDesign, batch: &BatchPlan, board: &BoardSpec, freq_mhz: f64) -> SimReport {
    let cycles = compute_cycles(design, batch.elements);
    let compute = cycles as f64 / (freq_mhz * 1e6);
    let bw = board.pcie_bandwidth_gbps * 1e9;
    let iterations: Vec<IterationTimes> = (0..batch.iterations)
        .map(|i| {
            let batches = batch.n_cu.min(batch.batches - i * batch.n_cu) as f64;
            let elements = batches * batch.elements as f64;
            IterationTimes {
                transfer_in: elements * batch.element_in_bytes as f64 / bw,
                compute,
                transfer_out: elements * batch.element_out_bytes as f64 / bw,
            }
        })
        .collect();
    let serial = serial_makespan(&iterations);
    let db = double_buffered_makespan(&iterations);
    SimReport {
        frequency_mhz: freq_mhz,
        compute_cycles_per_batch: cycles,
        total_compute: iterations.iter().map(|t| t.compute).sum(),
        total_in: iterations.iter().map(|t| t.transfer_in).sum(),
        total_out: iterations.iter().map(|t| t.transfer_out).sum(),
        makespan: if design.options.double_buffering { db } else { serial },
        serial_makespan: serial,
        double_buffered_makespan: db,
        iterations,
        num_operators: design.total_operators(),
        flops_per_element: 0,
        n_eq: batch.n_eq,
        cu_gflops: 0.0,
        system_gflops: 0.0,
        ideal_gflops: 0.0,
        efficiency: 0.0,
        gflops_per_watt: None,
    }
}

/// GFLOPS from operations per second with the clock in MHz.
pub fn ideal_gflops(num_operators: u64, freq_mhz: f64) -> f64 {
    num_operators as f64 * freq_mhz / 1000.0
}

pub fn metrics(
    mut report: SimReport,
    flops: FlopCount,
    n_eq: u64,
    num_operators: u64,
    freq_mhz: f64,
    avg_power_w: Option<f64>,
) -> Result<SimReport, PerfError> {
    if report.makespan.is_nan() || report.makespan <= 0.0 || report.total_compute.is_nan() || report.total_compute <= 0.0 {
        return Err(PerfError::ZeroElapsed);
    }
    let work = n_eq as f64 * flops.total as f64;
    report.flops_per_element = flops.total;
    report.n_eq = n_eq;
    report.num_operators = num_operators;
    report.cu_gflops = work / report.total_compute / 1e9;
    report.system_gflops = work / report.makespan / 1e9;
    report.ideal_gflops = ideal_gflops(num_operators, freq_mhz);
    report.efficiency = report.system_gflops / report.ideal_gflops;
    report.gflops_per_watt = avg_power_w.filter(|&p| p > 0.0).map(|p| report.system_gflops / p);
    Ok(report)
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6} {:>9} {:>12} {:>11} {:>15} {:>10}",
            "#Ops", "f [MHz]", "Ideal GFLOPS", "CU GFLOPS", "System GFLOPS", "Efficiency"
        );
        let _ = writeln!(
            s,
            "{:>6} {:>9.1} {:>12.3} {:>11.3} {:>15.3} {:>10.3}",
            self.num_operators, self.frequency_mhz, self.ideal_gflops, self.cu_gflops, self.system_gflops, self.efficiency
        );
        let _ = writeln!(
            s,
            "makespan {:.6} s (serial {:.6} s, double-buffered {:.6} s)",
            self.makespan, self.serial_makespan, self.double_buffered_makespan
        );
        if let Some(w) = self.gflops_per_watt {
            let _ = writeln!(s, "GFLOPS/W {w:.4}");
        }
        s
    }
}
