//! Whole-network simulation.
//!
//! MAC layers run through the streaming simulators; pooling, batch norm,
//! and quantization run in the post-processing pipeline, which prices
//! one cycle per produced 32-lane word (two for quantization: compare
//! plus map write). The partial-sum plane a MAC layer leaves in TMP is
//! read back out by whichever stage consumes it, charged per word.

use std::io::Write;

use crate::error::{Error, Result};
use crate::golden::{self, PartialSumTensor};
use crate::network::{Inference, LayerKind, LayerParams, Network};
use crate::sim::{simulate_conv, simulate_fc, AccelConfig, CycleTrace};
use crate::tensor::TernaryTensor;

/// Per-layer simulation record.
#[derive(Clone, Debug)]
pub struct LayerSim {
    pub layer_index: usize,
    pub name: String,
    pub kind: LayerKind,
    pub trace: CycleTrace,
    /// Elements and non-zeros of the layer input; zero for non-MAC layers,
    /// whose input is a partial-sum plane rather than a ternary stream.
    pub input_elems: usize,
    pub input_nonzero: usize,
}

/// Result of simulating one inference.
#[derive(Clone, Debug)]
pub struct NetworkSim {
    pub config: AccelConfig,
    pub inference: Inference,
    pub layers: Vec<LayerSim>,
    pub totals: CycleTrace,
}

impl NetworkSim {
    pub fn total_cycles(&self) -> u64 {
        self.totals.total_cycles()
    }

    pub fn wall_seconds(&self) -> f64 {
        self.total_cycles() as f64 / self.config.clock_hz as f64
    }

    /// Flat `key value` lines, one per metric, stable across runs.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push(' ');
            out.push_str(&v);
            out.push('\n');
        };
        kv("config.pcl_count", self.config.pcl_count.to_string());
        kv("config.pe_per_pcl", self.config.pe_per_pcl.to_string());
        kv("config.clock_hz", self.config.clock_hz.to_string());
        kv("config.zero_skip_enabled", self.config.zero_skip_enabled.to_string());
        kv("config.reorder_enabled", self.config.reorder_enabled.to_string());
        kv("layers", self.layers.len().to_string());
        for (i, l) in self.layers.iter().enumerate() {
            let p = |field: &str| format!("layer.{i}.{field}");
            kv(&p("name"), l.name.clone());
            kv(&p("kind"), l.kind.name().to_string());
            kv(&p("cycles.fetch"), l.trace.fetch_cycles.to_string());
            kv(&p("cycles.mac"), l.trace.mac_cycles.to_string());
            kv(&p("cycles.sort"), l.trace.sort_cycles.to_string());
            kv(&p("cycles.tmp"), l.trace.tmp_cycles.to_string());
            kv(&p("cycles.qnt"), l.trace.qnt_cycles.to_string());
            kv(&p("cycles.total"), l.trace.total_cycles().to_string());
            kv(&p("macs.executed"), l.trace.executed_macs.to_string());
            kv(&p("macs.skipped"), l.trace.skipped_macs.to_string());
            if l.kind.is_mac() {
                kv(&p("input.elems"), l.input_elems.to_string());
                kv(&p("input.nonzero"), l.input_nonzero.to_string());
            }
        }
        kv("total.cycles.fetch", self.totals.fetch_cycles.to_string());
        kv("total.cycles.mac", self.totals.mac_cycles.to_string());
        kv("total.cycles.sort", self.totals.sort_cycles.to_string());
        kv("total.cycles.tmp", self.totals.tmp_cycles.to_string());
        kv("total.cycles.qnt", self.totals.qnt_cycles.to_string());
        kv("total.cycles", self.total_cycles().to_string());
        kv("total.macs.executed", self.totals.executed_macs.to_string());
        kv("total.macs.skipped", self.totals.skipped_macs.to_string());
        kv("total.pe_utilization", format!("{:.4}", self.totals.pe_utilization()));
        kv("wall_seconds", format!("{:.6}", self.wall_seconds()));
        kv("label", self.inference.label.to_string());
        out
    }
}

pub fn simulate_network(
    net: &Network,
    input: &TernaryTensor,
    cfg: &AccelConfig,
) -> Result<NetworkSim> {
    simulate_network_logged(net, input, cfg, None)
}

/// Like [`simulate_network`], with a coarse per-layer event log.
pub fn simulate_network_logged(
    net: &Network,
    input: &TernaryTensor,
    cfg: &AccelConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<NetworkSim> {
    cfg.validate()?;
    let config = net.config();
    if input.shape() != config.input_shape() {
        return Err(Error::shape(format!(
            "network expects input {}, got {}",
            config.input_shape(),
            input.shape()
        )));
    }

    enum Act {
        Ternary(TernaryTensor),
        Partial(PartialSumTensor),
    }

    let mut act = Act::Ternary(input.clone());
    let mut layers: Vec<LayerSim> = Vec::with_capacity(config.layers.len());
    let mut bn_saturations = 0u64;
    // Output plane a MAC layer left behind in TMP: (groups, positions).
    let mut plane_in_tmp: Option<(usize, usize)> = None;

    for (i, spec) in config.layers.iter().enumerate() {
        let mut trace = CycleTrace::new(cfg.pe_count());
        let mut input_elems = 0;
        let mut input_nonzero = 0;
        act = match (&act, net.params(i)) {
            (Act::Ternary(x), LayerParams::Weights(w)) => {
                input_elems = x.shape().elems();
                input_nonzero = x.count_nonzero();
                let (y, t) = match spec.kind {
                    LayerKind::Conv3x3 => simulate_conv(x, w, cfg),
                    _ => simulate_fc(x, w, cfg),
                }
                .map_err(|e| e.context(&spec.name))?;
                trace = t;
                plane_in_tmp = Some((y.shape().channel_groups(), y.shape().positions()));
                Act::Partial(y)
            }
            (Act::Partial(x), p) => {
                // The first post stage after a MAC layer drains the
                // partial-sum plane out of TMP.
                if let Some((groups, positions)) = plane_in_tmp.take() {
                    trace.tmp_cycles +=
                        (groups * positions) as u64 * cfg.tmp_rw_cycles_per_word;
                }
                let out_words =
                    (spec.out_shape.channel_groups() * spec.out_shape.positions()) as u64;
                let y = match p {
                    LayerParams::None => {
                        trace.qnt_cycles += out_words;
                        Act::Partial(golden::pool_relu(x).map_err(|e| e.context(&spec.name))?)
                    }
                    LayerParams::BnFactors(f) => {
                        trace.qnt_cycles += out_words;
                        let (y, sat) =
                            golden::batch_norm(x, f).map_err(|e| e.context(&spec.name))?;
                        bn_saturations += sat;
                        Act::Partial(y)
                    }
                    LayerParams::Thresholds(t) => {
                        trace.qnt_cycles += 2 * out_words;
                        Act::Ternary(
                            golden::quantize_ternary(x, t)
                                .map_err(|e| e.context(&spec.name))?,
                        )
                    }
                    LayerParams::Weights(_) => {
                        return Err(Error::config(format!(
                            "{}: MAC layer fed partial sums",
                            spec.name
                        )));
                    }
                };
                y
            }
            (Act::Ternary(_), _) => {
                return Err(Error::config(format!(
                    "{}: post-processing layer fed ternary values",
                    spec.name
                )));
            }
        };
        if let Some(w) = log.as_deref_mut() {
            writeln!(
                w,
                "layer {i} {name} {kind}: fetch={f} mac={m} sort={s} tmp={t} qnt={q}",
                name = spec.name,
                kind = spec.kind.name(),
                f = trace.fetch_cycles,
                m = trace.mac_cycles,
                s = trace.sort_cycles,
                t = trace.tmp_cycles,
                q = trace.qnt_cycles,
            )?;
        }
        layers.push(LayerSim {
            layer_index: i,
            name: spec.name.clone(),
            kind: spec.kind,
            trace,
            input_elems,
            input_nonzero,
        });
    }

    // The classifier's logits still sit in TMP; reading them out closes
    // the run.
    if let Some((groups, positions)) = plane_in_tmp.take() {
        layers.last_mut().unwrap().trace.tmp_cycles +=
            (groups * positions) as u64 * cfg.tmp_rw_cycles_per_word;
    }

    let Act::Partial(out) = act else {
        unreachable!("validated networks end on a fully connected layer");
    };
    let logits: Vec<i32> = out.values().iter().map(|&v| v as i32).collect();
    let label = golden::argmax(&logits);
    let inference = Inference { logits, label, bn_saturations };

    let mut totals = CycleTrace::new(cfg.pe_count());
    for l in &layers {
        totals.merge(&l.trace);
    }
    Ok(NetworkSim { config: *cfg, inference, layers, totals })
}
