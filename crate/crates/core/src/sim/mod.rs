//! Cycle-level model of the sparsity-aware accelerator.
//!
//! The machine streams the sparsity map of one 32-channel input group
//! while the value FIFO delivers sign bits for the non-zero elements in
//! the same order. For convolution the three kernel rows run on three
//! column processors in lockstep: every 1x3 map window (96 bit positions)
//! is cut into `2 * pe_per_pcl` equal slices, each processing element
//! takes two slices, and a window costs as many MAC cycles as the busiest
//! element takes to chew through its set bits. An optional reorder stage
//! pairs heavy slices with light ones at one extra cycle per window.
//!
//! Partial sums live in the TMP scratch memory as one 32-lane word per
//! output position and are read-modified-written once per contributing
//! kernel row. Weight words are fetched lazily on the first use of a
//! (kernel column, input channel) pair within an output-group pass.
//!
//! Disabling `zero_skip_enabled` models the binary-weight baseline: the
//! value stream turns dense (one bit per element) and every element,
//! zero or not, occupies a MAC slot; zeros contribute nothing to the
//! accumulated sums. Disabling `reorder_enabled` removes the pairing
//! stage and its per-window cycle.
//!
//! Simulated layers compute their outputs through this streaming path,
//! element by element, so agreement with the reference operators checks
//! the dataflow (window geometry, weight addressing, value pairing), not
//! just the bookkeeping.

mod balance;
mod conv;
mod fc;
mod network;
mod pe;

pub use balance::{balance_workload, WorkloadAssignment};
pub use conv::simulate_conv;
pub use fc::simulate_fc;
pub use network::{simulate_network, simulate_network_logged, LayerSim, NetworkSim};
pub use pe::pe_run;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::CHANNEL_GROUP;

/// Accelerator shape and per-access cycle costs.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AccelConfig {
    /// Column processors; convolution maps one kernel row to each.
    pub pcl_count: usize,
    /// Processing elements per column processor.
    pub pe_per_pcl: usize,
    /// Parallel XOR lanes per element, one output channel each.
    pub xor_lanes_per_pe: usize,
    pub clock_hz: u64,
    pub fetch_cycles_per_map_word: u64,
    pub fetch_cycles_per_value_bit: u64,
    pub fetch_cycles_per_weight_word: u64,
    pub tmp_rw_cycles_per_word: u64,
    /// When false, zeros occupy MAC slots and the value stream is dense.
    pub zero_skip_enabled: bool,
    /// When false, slices pair up in storage order with no sort cycle.
    pub reorder_enabled: bool,
}

impl Default for AccelConfig {
    fn default() -> Self {
        AccelConfig {
            pcl_count: 3,
            pe_per_pcl: 6,
            xor_lanes_per_pe: 32,
            clock_hz: 10_000_000,
            fetch_cycles_per_map_word: 1,
            fetch_cycles_per_value_bit: 1,
            fetch_cycles_per_weight_word: 1,
            tmp_rw_cycles_per_word: 1,
            zero_skip_enabled: true,
            reorder_enabled: true,
        }
    }
}

impl AccelConfig {
    /// The dense baseline: same fabric, no zero skipping, no reordering.
    pub fn bnn_baseline() -> Self {
        AccelConfig {
            zero_skip_enabled: false,
            reorder_enabled: false,
            ..AccelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pcl_count == 0 || self.pe_per_pcl == 0 {
            return Err(Error::config("need at least one column processor and element"));
        }
        if self.xor_lanes_per_pe != CHANNEL_GROUP {
            return Err(Error::config(format!(
                "XOR lane count {} must match the {CHANNEL_GROUP}-channel group width",
                self.xor_lanes_per_pe
            )));
        }
        if self.clock_hz == 0 {
            return Err(Error::config("clock must be positive"));
        }
        Ok(())
    }

    pub fn pe_count(&self) -> usize {
        self.pcl_count * self.pe_per_pcl
    }
}

/// Cycle and work counters for one layer or a whole run.
///
/// The five cycle categories are disjoint; their sum is the runtime.
/// `executed_macs + skipped_macs` always equals the dense multiply count
/// of the layer, whatever the configuration.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct CycleTrace {
    pub fetch_cycles: u64,
    pub mac_cycles: u64,
    pub sort_cycles: u64,
    pub tmp_cycles: u64,
    pub qnt_cycles: u64,
    pub executed_macs: u64,
    pub skipped_macs: u64,
    /// Work cycles per processing element, indexed `pcl * pe_per_pcl + pe`.
    pub pe_busy_cycles: Vec<u64>,
}

impl CycleTrace {
    pub fn new(pe_count: usize) -> Self {
        CycleTrace { pe_busy_cycles: vec![0; pe_count], ..CycleTrace::default() }
    }

    pub fn total_cycles(&self) -> u64 {
        self.fetch_cycles + self.mac_cycles + self.sort_cycles + self.tmp_cycles + self.qnt_cycles
    }

    pub fn merge(&mut self, other: &CycleTrace) {
        self.fetch_cycles += other.fetch_cycles;
        self.mac_cycles += other.mac_cycles;
        self.sort_cycles += other.sort_cycles;
        self.tmp_cycles += other.tmp_cycles;
        self.qnt_cycles += other.qnt_cycles;
        self.executed_macs += other.executed_macs;
        self.skipped_macs += other.skipped_macs;
        if self.pe_busy_cycles.len() < other.pe_busy_cycles.len() {
            self.pe_busy_cycles.resize(other.pe_busy_cycles.len(), 0);
        }
        for (a, b) in self.pe_busy_cycles.iter_mut().zip(&other.pe_busy_cycles) {
            *a += b;
        }
    }

    /// Fraction of MAC-phase element slots that performed work.
    pub fn pe_utilization(&self) -> f64 {
        if self.mac_cycles == 0 || self.pe_busy_cycles.is_empty() {
            return 0.0;
        }
        let busy: u64 = self.pe_busy_cycles.iter().sum();
        busy as f64 / (self.mac_cycles * self.pe_busy_cycles.len() as u64) as f64
    }
}

/// Cuts `bits` positions into `slices` contiguous slices of near-equal
/// width, returned as `(start, end)` pairs; trailing slices may be empty.
pub(crate) fn slice_bounds(bits: usize, slices: usize) -> Vec<(usize, usize)> {
    let width = bits.div_ceil(slices);
    (0..slices)
        .map(|s| {
            let start = (s * width).min(bits);
            (start, ((s + 1) * width).min(bits))
        })
        .collect()
}
