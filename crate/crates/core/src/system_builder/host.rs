//! Host-side step plan with ping/pong channel sets.

use serde::{Deserialize, Serialize};

use super::{BatchPlan, CuDesign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Allocate,
    ConvertIn,
    Interleave,
    TransferIn,
    Run,
    TransferOut,
    Deinterleave,
    ConvertOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSet {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostStep {
    /// Steps sharing a phase run concurrently.
    pub phase: usize,
    pub action: Action,
    /// Iteration index; every CU handles one batch per iteration.
    pub iteration: Option<u64>,
    pub batches: Vec<u64>,
    pub set: Option<ChannelSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostPlan {
    pub double_buffering: bool,
    pub iterations: u64,
    pub steps: Vec<HostStep>,
}

impl HostPlan {
    pub fn phases(&self) -> usize {
        self.steps.iter().map(|s| s.phase + 1).max().unwrap_or(0)
    }

    pub fn count(&self, action: Action) -> usize {
        self.steps.iter().filter(|s| s.action == action).count()
    }

    /// Phases in which at least one transfer happens.
    pub fn transfer_phases(&self) -> usize {
        let mut p: Vec<usize> =
            self.steps.iter().filter(|s| matches!(s.action, Action::TransferIn | Action::TransferOut)).map(|s| s.phase).collect();
        p.dedup();
        p.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Run steps carry one batch per CU; prepare and finish steps are folded
/// into the phase of the transfer they belong to.
pub fn host_plan(batch: &BatchPlan, design: &CuDesign) -> HostPlan {
    let db = design.options.double_buffering;
    let fixed = design.format.is_fixed();
    let n = batch.iterations;
    let batches = |i: u64| -> Vec<u64> { (i * batch.n_cu..((i + 1) * batch.n_cu).min(batch.batches)).collect() };
    let set = |i: u64| db.then_some(if i.is_multiple_of(2) { ChannelSet::Even } else { ChannelSet::Odd });
    let mut steps = Vec::new();
    let mut add = |phase: usize, action: Action, it: Option<u64>| {
        let b = it.map(batches).unwrap_or_default();
        steps.push(HostStep { phase, action, iteration: it, batches: b, set: it.and_then(set) });
    };
    add(0, Action::Allocate, None);
    let prepare = |add: &mut dyn FnMut(usize, Action, Option<u64>), phase, i| {
        if fixed {
            add(phase, Action::ConvertIn, Some(i));
        }
        add(phase, Action::Interleave, Some(i));
        add(phase, Action::TransferIn, Some(i));
    };
    let finish = |add: &mut dyn FnMut(usize, Action, Option<u64>), phase, i| {
        add(phase, Action::TransferOut, Some(i));
        add(phase, Action::Deinterleave, Some(i));
        if fixed {
            add(phase, Action::ConvertOut, Some(i));
        }
    };
    if n == 0 {
    } else if db {
        // Phase 1 fills the even set; phase k+2 runs iteration k while the
        // other set receives k+1 and returns k-1.
        prepare(&mut add, 1, 0);
        for k in 0..n {
            let phase = k as usize + 2;
            add(phase, Action::Run, Some(k));
            if k + 1 < n {
                prepare(&mut add, phase, k + 1);
            }
            if k >= 1 {
                finish(&mut add, phase, k - 1);
            }
        }
        finish(&mut add, n as usize + 2, n - 1);
    } else {
        for i in 0..n {
            let base = 1 + 3 * i as usize;
            prepare(&mut add, base, i);
            add(base + 1, Action::Run, Some(i));
            finish(&mut add, base + 2, i);
        }
    }
    HostPlan { double_buffering: db, iterations: n, steps }
}
