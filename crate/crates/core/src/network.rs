//! Network topology description, parameter files, threshold calibration,
//! and end-to-end inference over the reference operators.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::golden::{self, PartialSumTensor};
use crate::tensor::{BinaryWeightTensor, Shape, TernaryTensor, CHANNEL_GROUP};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv3x3,
    FullyConnected,
    PoolRelu,
    BatchNorm,
    Quantize,
}

impl LayerKind {
    /// Layers that multiply activations against weights.
    pub fn is_mac(&self) -> bool {
        matches!(self, LayerKind::Conv3x3 | LayerKind::FullyConnected)
    }

    /// The identifier used in configs and reports.
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv3x3 => "conv3x3",
            LayerKind::FullyConnected => "fully_connected",
            LayerKind::PoolRelu => "pool_relu",
            LayerKind::BatchNorm => "batch_norm",
            LayerKind::Quantize => "quantize",
        }
    }

    fn takes_ternary(&self) -> bool {
        self.is_mac()
    }

    fn emits_ternary(&self) -> bool {
        matches!(self, LayerKind::Quantize)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_shape: Shape,
    pub out_shape: Shape,
}

/// Topology plus class count; serializes to and from TOML.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub class_count: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: NetworkConfig =
            toml::from_str(s).map_err(|e| Error::config(format!("network config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(format!("network config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Checks shape chaining, per-kind shape rules, and that the ternary /
    /// partial-sum domains alternate legally from input to logits.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("network has no layers"));
        }
        if self.class_count == 0 {
            return Err(Error::config("class count must be positive"));
        }
        let mut names = std::collections::HashSet::new();
        // The network input arrives ternary.
        let mut ternary = true;
        for (i, l) in self.layers.iter().enumerate() {
            let ctx = format!("layer {i} ({})", l.name);
            if l.name.is_empty() {
                return Err(Error::config(format!("layer {i} has an empty name")));
            }
            if !names.insert(l.name.as_str()) {
                return Err(Error::config(format!("duplicate layer name {}", l.name)));
            }
            for s in [l.in_shape, l.out_shape] {
                if s.h == 0 || s.w == 0 || s.c == 0 {
                    return Err(Error::config(format!("{ctx}: degenerate shape {s}")));
                }
            }
            if i > 0 && self.layers[i - 1].out_shape != l.in_shape {
                return Err(Error::config(format!(
                    "{ctx}: input {} does not match previous output {}",
                    l.in_shape,
                    self.layers[i - 1].out_shape
                )));
            }
            if l.kind.takes_ternary() != ternary {
                let (wants, has) = if ternary {
                    ("partial sums", "ternary values")
                } else {
                    ("ternary values", "partial sums")
                };
                return Err(Error::config(format!("{ctx}: expects {wants} but gets {has}")));
            }
            ternary = l.kind.emits_ternary();
            let (is, os) = (l.in_shape, l.out_shape);
            let ok = match l.kind {
                LayerKind::Conv3x3 => os.h == is.h && os.w == is.w,
                LayerKind::FullyConnected => os.h == 1 && os.w == 1,
                LayerKind::PoolRelu => {
                    is.h % 2 == 0
                        && is.w % 2 == 0
                        && os == Shape::new(is.h / 2, is.w / 2, is.c)
                }
                LayerKind::BatchNorm | LayerKind::Quantize => os == is,
            };
            if !ok {
                return Err(Error::config(format!("{ctx}: {is} -> {os} is not valid")));
            }
        }
        let last = self.layers.last().unwrap();
        if last.kind != LayerKind::FullyConnected || last.out_shape.c != self.class_count {
            return Err(Error::config(format!(
                "network must end in a fully connected layer with {} outputs",
                self.class_count
            )));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> Shape {
        self.layers[0].in_shape
    }

    /// Storage accounting for the whole network; see [`MemoryBudget`].
    pub fn memory_budget(&self) -> MemoryBudget {
        let mut weight_bits = 0usize;
        let mut tmp_bits = 0usize;
        let mut peak_activation_bits = 0usize;
        for (i, l) in self.layers.iter().enumerate() {
            match l.kind {
                LayerKind::Conv3x3 => {
                    weight_bits += 9 * l.in_shape.c * l.out_shape.c;
                    tmp_bits = tmp_bits.max(l.out_shape.positions() * CHANNEL_GROUP * 16);
                }
                LayerKind::FullyConnected => {
                    weight_bits += l.in_shape.elems() * l.out_shape.c;
                    tmp_bits =
                        tmp_bits.max(l.out_shape.channel_groups() * CHANNEL_GROUP * 16);
                }
                _ => {}
            }
            if l.kind.is_mac() {
                // Two bits per element bound the sparse encoding of the
                // buffered ternary tensors: the layer input, plus the next
                // ternary tensor being produced downstream (or the logits).
                let in_bits = 2 * l.in_shape.elems();
                let out_bits = self.layers[i..]
                    .iter()
                    .find(|d| d.kind == LayerKind::Quantize)
                    .map(|d| 2 * d.out_shape.elems())
                    .unwrap_or(16 * l.out_shape.c);
                peak_activation_bits = peak_activation_bits.max(in_bits + out_bits);
            }
        }
        MemoryBudget { weight_bits, peak_activation_bits, tmp_bits }
    }
}

/// On-chip storage demand in bits: packed weights, the worst-case pair of
/// live activation buffers, and the widest partial-sum scratch plane (one
/// 32-channel output group held as 16-bit words).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    pub weight_bits: usize,
    pub peak_activation_bits: usize,
    pub tmp_bits: usize,
}

impl MemoryBudget {
    pub fn total_bits(&self) -> usize {
        self.weight_bits + self.peak_activation_bits + self.tmp_bits
    }

    pub fn total_bytes(&self) -> usize {
        self.total_bits().div_ceil(8)
    }
}

/// The stock image-classification topology: six 3x3 convolutions in three
/// width tiers (64, 128, 256), each tier closed by pooling, batch norm,
/// and requantization, then a 256-wide hidden fully connected layer and
/// the classifier. Every MAC layer is fed ternary data by a preceding
/// quantize stage.
pub fn default_topology() -> NetworkConfig {
    let mut layers = Vec::new();
    let mut add = |name: &str, kind: LayerKind, i: [usize; 3], o: [usize; 3]| {
        layers.push(LayerSpec {
            name: name.to_string(),
            kind,
            in_shape: i.into(),
            out_shape: o.into(),
        });
    };
    use LayerKind::*;
    add("cv1", Conv3x3, [32, 32, 2], [32, 32, 64]);
    add("qnt_a", Quantize, [32, 32, 64], [32, 32, 64]);
    add("cv2", Conv3x3, [32, 32, 64], [32, 32, 64]);
    add("pl1", PoolRelu, [32, 32, 64], [16, 16, 64]);
    add("bn1", BatchNorm, [16, 16, 64], [16, 16, 64]);
    add("qnt1", Quantize, [16, 16, 64], [16, 16, 64]);
    add("cv3", Conv3x3, [16, 16, 64], [16, 16, 128]);
    add("qnt_b", Quantize, [16, 16, 128], [16, 16, 128]);
    add("cv4", Conv3x3, [16, 16, 128], [16, 16, 128]);
    add("pl2", PoolRelu, [16, 16, 128], [8, 8, 128]);
    add("bn2", BatchNorm, [8, 8, 128], [8, 8, 128]);
    add("qnt2", Quantize, [8, 8, 128], [8, 8, 128]);
    add("cv5", Conv3x3, [8, 8, 128], [8, 8, 256]);
    add("qnt_c", Quantize, [8, 8, 256], [8, 8, 256]);
    add("cv6", Conv3x3, [8, 8, 256], [8, 8, 256]);
    add("pl3", PoolRelu, [8, 8, 256], [4, 4, 256]);
    add("bn3", BatchNorm, [4, 4, 256], [4, 4, 256]);
    add("qnt3", Quantize, [4, 4, 256], [4, 4, 256]);
    add("fc1", FullyConnected, [4, 4, 256], [1, 1, 256]);
    add("qnt4", Quantize, [1, 1, 256], [1, 1, 256]);
    add("fc2", FullyConnected, [1, 1, 256], [1, 1, 10]);
    NetworkConfig { class_count: 10, layers }
}

/// Parameters attached to one layer.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams {
    None,
    Weights(BinaryWeightTensor),
    BnFactors(Vec<i16>),
    Thresholds(Vec<(i16, i16)>),
}

/// A validated topology with all parameters resolved.
#[derive(Debug)]
pub struct Network {
    config: NetworkConfig,
    params: Vec<LayerParams>,
}

enum Activation {
    Ternary(TernaryTensor),
    Partial(PartialSumTensor),
}

impl Activation {
    fn shape(&self) -> Shape {
        match self {
            Activation::Ternary(t) => t.shape(),
            Activation::Partial(p) => p.shape(),
        }
    }
}

/// Result of one inference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inference {
    pub logits: Vec<i32>,
    pub label: usize,
    pub bn_saturations: u64,
}

/// Ternary input actually seen by one MAC layer during an inference, in
/// layer order; this is what the accelerator streams from memory.
pub struct LayerTrace {
    pub layer_index: usize,
    pub input: TernaryTensor,
}

impl Network {
    pub fn new(config: NetworkConfig, params: Vec<LayerParams>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.layers.len() {
            return Err(Error::config(format!(
                "{} parameter records for {} layers",
                params.len(),
                config.layers.len()
            )));
        }
        for (l, p) in config.layers.iter().zip(&params) {
            let ctx = &l.name;
            match (l.kind, p) {
                (LayerKind::Conv3x3, LayerParams::Weights(w)) => {
                    if (w.kernel_h, w.kernel_w, w.in_channels, w.out_channels)
                        != (3, 3, l.in_shape.c, l.out_shape.c)
                    {
                        return Err(Error::config(format!(
                            "{ctx}: weight tensor {}x{}x{}x{} does not fit {} -> {}",
                            w.kernel_h,
                            w.kernel_w,
                            w.in_channels,
                            w.out_channels,
                            l.in_shape,
                            l.out_shape
                        )));
                    }
                }
                (LayerKind::FullyConnected, LayerParams::Weights(w)) => {
                    if (w.kernel_h, w.kernel_w, w.in_channels, w.out_channels)
                        != (1, 1, l.in_shape.elems(), l.out_shape.c)
                    {
                        return Err(Error::config(format!(
                            "{ctx}: weight matrix {}x{} does not fit {} -> {}",
                            w.in_channels, w.out_channels, l.in_shape, l.out_shape
                        )));
                    }
                }
                (LayerKind::BatchNorm, LayerParams::BnFactors(f)) if f.len() == l.in_shape.c => {}
                (LayerKind::Quantize, LayerParams::Thresholds(t)) if t.len() == l.in_shape.c => {}
                (LayerKind::PoolRelu, LayerParams::None) => {}
                _ => {
                    return Err(Error::config(format!(
                        "{ctx}: parameter record does not match a {:?} layer",
                        l.kind
                    )));
                }
            }
        }
        Ok(Network { config, params })
    }

    /// Reads per-layer parameter files from `dir`, named `<layer>.tbnw`
    /// for weights and `<layer>.tbnp` for factors and thresholds.
    pub fn load(config: NetworkConfig, dir: &Path) -> Result<Self> {
        let mut params = Vec::with_capacity(config.layers.len());
        for l in &config.layers {
            let open = |ext: &str| -> Result<BufReader<File>> {
                let path = dir.join(format!("{}.{ext}", l.name));
                Ok(BufReader::new(File::open(&path).map_err(|e| {
                    Error::format(format!("{}: {e}", path.display()))
                })?))
            };
            let p = match l.kind {
                LayerKind::Conv3x3 | LayerKind::FullyConnected => {
                    LayerParams::Weights(format::read_weights(&mut open("tbnw")?)?)
                }
                LayerKind::BatchNorm => {
                    LayerParams::BnFactors(format::read_bn_factors(&mut open("tbnp")?)?)
                }
                LayerKind::Quantize => {
                    LayerParams::Thresholds(format::read_thresholds(&mut open("tbnp")?)?)
                }
                LayerKind::PoolRelu => LayerParams::None,
            };
            params.push(p);
        }
        Network::new(config, params)
    }

    /// Writes the parameter files [`Network::load`] expects.
    pub fn save_params(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::format(format!("{}: {e}", dir.display())))?;
        for (l, p) in self.config.layers.iter().zip(&self.params) {
            let create = |ext: &str| -> Result<BufWriter<File>> {
                let path = dir.join(format!("{}.{ext}", l.name));
                Ok(BufWriter::new(File::create(&path).map_err(|e| {
                    Error::format(format!("{}: {e}", path.display()))
                })?))
            };
            match p {
                LayerParams::Weights(w) => format::write_weights(&mut create("tbnw")?, w)?,
                LayerParams::BnFactors(f) => format::write_bn_factors(&mut create("tbnp")?, f)?,
                LayerParams::Thresholds(t) => format::write_thresholds(&mut create("tbnp")?, t)?,
                LayerParams::None => {}
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self, i: usize) -> &LayerParams {
        &self.params[i]
    }

    pub fn layer_weights(&self, i: usize) -> Option<&BinaryWeightTensor> {
        match &self.params[i] {
            LayerParams::Weights(w) => Some(w),
            _ => None,
        }
    }

    pub fn infer(&self, input: &TernaryTensor) -> Result<Inference> {
        self.run(input, None)
    }

    /// Like [`Network::infer`] but also captures the ternary input of every
    /// MAC layer, which is exactly the data the accelerator streams.
    pub fn infer_traced(&self, input: &TernaryTensor) -> Result<(Inference, Vec<LayerTrace>)> {
        let mut traces = Vec::new();
        let inference = self.run(input, Some(&mut traces))?;
        Ok((inference, traces))
    }

    fn run(
        &self,
        input: &TernaryTensor,
        mut traces: Option<&mut Vec<LayerTrace>>,
    ) -> Result<Inference> {
        if input.shape() != self.config.input_shape() {
            return Err(Error::shape(format!(
                "network expects input {}, got {}",
                self.config.input_shape(),
                input.shape()
            )));
        }
        let mut act = Activation::Ternary(input.clone());
        let mut bn_saturations = 0u64;
        for (i, (l, p)) in self.config.layers.iter().zip(&self.params).enumerate() {
            if let (Some(t), Activation::Ternary(x)) = (traces.as_deref_mut(), &act) {
                if l.kind.is_mac() {
                    t.push(LayerTrace { layer_index: i, input: x.clone() });
                }
            }
            act = apply_layer(l, p, act, &mut bn_saturations)
                .map_err(|e| e.context(&l.name))?;
            debug_assert_eq!(act.shape(), l.out_shape);
        }
        let Activation::Partial(out) = act else {
            unreachable!("validated networks end on a fully connected layer");
        };
        let logits: Vec<i32> = out.values().iter().map(|&v| v as i32).collect();
        let label = golden::argmax(&logits);
        Ok(Inference { logits, label, bn_saturations })
    }
}

fn apply_layer(
    l: &LayerSpec,
    p: &LayerParams,
    act: Activation,
    bn_saturations: &mut u64,
) -> Result<Activation> {
    Ok(match (&act, p) {
        (Activation::Ternary(x), LayerParams::Weights(w)) => match l.kind {
            LayerKind::Conv3x3 => Activation::Partial(golden::ternary_conv3x3(x, w)?),
            _ => Activation::Partial(golden::fully_connected(x, w)?),
        },
        (Activation::Partial(x), LayerParams::None) => Activation::Partial(golden::pool_relu(x)?),
        (Activation::Partial(x), LayerParams::BnFactors(f)) => {
            let (y, sat) = golden::batch_norm(x, f)?;
            *bn_saturations += sat;
            Activation::Partial(y)
        }
        (Activation::Partial(x), LayerParams::Thresholds(t)) => {
            Activation::Ternary(golden::quantize_ternary(x, t)?)
        }
        _ => unreachable!("Network::new checks layer/parameter pairing"),
    })
}

/// Settings for random parameter generation.
#[derive(Clone, Copy, Debug)]
pub struct GenOptions {
    pub seed: u64,
    /// Random probe inputs used to calibrate quantization thresholds.
    pub probe_frames: usize,
    /// Non-zero fraction the calibration aims for after each quantize layer.
    pub target_density: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { seed: 1, probe_frames: 16, target_density: 0.462 }
    }
}

/// Chosen threshold and achieved probe density for one quantize layer.
#[derive(Clone, Debug)]
pub struct LayerCalibration {
    pub layer: String,
    pub threshold: i16,
    pub density: f64,
}

pub struct Generated {
    pub network: Network,
    pub calibration: Vec<LayerCalibration>,
}

/// Generates a full parameter set: random binary weights, unit batch-norm
/// factors, and quantization thresholds calibrated layer by layer so each
/// quantize output lands as close as possible to the target density on a
/// batch of random probe inputs.
///
/// Calibration is sequential because each layer's threshold changes the
/// statistics every later layer sees.
pub fn generate_params(config: &NetworkConfig, opts: &GenOptions) -> Result<Generated> {
    config.validate()?;
    if opts.probe_frames == 0 {
        return Err(Error::config("threshold calibration needs at least one probe frame"));
    }
    if !(opts.target_density > 0.0 && opts.target_density < 1.0) {
        return Err(Error::config(format!(
            "target density {} must lie strictly between 0 and 1",
            opts.target_density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut params: Vec<LayerParams> = config
        .layers
        .iter()
        .map(|l| match l.kind {
            LayerKind::Conv3x3 => LayerParams::Weights(BinaryWeightTensor::random(
                3,
                3,
                l.in_shape.c,
                l.out_shape.c,
                &mut rng,
            )),
            LayerKind::FullyConnected => LayerParams::Weights(BinaryWeightTensor::random(
                1,
                1,
                l.in_shape.elems(),
                l.out_shape.c,
                &mut rng,
            )),
            LayerKind::BatchNorm => LayerParams::BnFactors(vec![256; l.in_shape.c]),
            LayerKind::Quantize => LayerParams::Thresholds(Vec::new()),
            LayerKind::PoolRelu => LayerParams::None,
        })
        .collect();

    let mut probes: Vec<Activation> = (0..opts.probe_frames)
        .map(|_| {
            Activation::Ternary(TernaryTensor::random(
                config.input_shape(),
                opts.target_density,
                &mut rng,
            ))
        })
        .collect();

    let mut calibration = Vec::new();
    let mut sink = 0u64;
    for (i, l) in config.layers.iter().enumerate() {
        if l.kind == LayerKind::Quantize {
            let partials: Vec<&PartialSumTensor> = probes
                .iter()
                .map(|a| match a {
                    Activation::Partial(p) => p,
                    Activation::Ternary(_) => unreachable!("validated domain chain"),
                })
                .collect();
            let (threshold, density) = choose_threshold(&partials, opts.target_density);
            params[i] = LayerParams::Thresholds(vec![(threshold, -threshold); l.in_shape.c]);
            calibration.push(LayerCalibration { layer: l.name.clone(), threshold, density });
        }
        for a in &mut probes {
            let taken = std::mem::replace(a, Activation::Ternary(TernaryTensor::zeros(l.in_shape)));
            *a = apply_layer(l, &params[i], taken, &mut sink)
                .map_err(|e| e.context(&l.name))?;
        }
    }
    let network = Network::new(config.clone(), params)?;
    Ok(Generated { network, calibration })
}

/// Picks the symmetric threshold `t >= 1` whose survivor fraction
/// `|v| > t` over all probe values is closest to `target`. Works on a
/// magnitude histogram so runs of tied values are handled exactly.
fn choose_threshold(partials: &[&PartialSumTensor], target: f64) -> (i16, f64) {
    let mut hist = vec![0u64; 1 << 16];
    let mut total = 0u64;
    for p in partials {
        for &v in p.values() {
            hist[(v as i32).unsigned_abs() as usize] += 1;
            total += 1;
        }
    }
    // survivors(t) = number of values with magnitude strictly above t.
    let mut survivors: u64 = hist.iter().skip(2).sum();
    let mut best = (1i16, survivors as f64 / total as f64);
    for t in 2..=i16::MAX as usize {
        survivors -= hist[t];
        let density = survivors as f64 / total as f64;
        if (density - target).abs() < (best.1 - target).abs() {
            best = (t as i16, density);
        }
        if survivors == 0 {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> NetworkConfig {
        use LayerKind::*;
        NetworkConfig {
            class_count: 3,
            layers: vec![
                LayerSpec {
                    name: "conv".into(),
                    kind: Conv3x3,
                    in_shape: Shape::new(4, 4, 2),
                    out_shape: Shape::new(4, 4, 8),
                },
                LayerSpec {
                    name: "pool".into(),
                    kind: PoolRelu,
                    in_shape: Shape::new(4, 4, 8),
                    out_shape: Shape::new(2, 2, 8),
                },
                LayerSpec {
                    name: "norm".into(),
                    kind: BatchNorm,
                    in_shape: Shape::new(2, 2, 8),
                    out_shape: Shape::new(2, 2, 8),
                },
                LayerSpec {
                    name: "quant".into(),
                    kind: Quantize,
                    in_shape: Shape::new(2, 2, 8),
                    out_shape: Shape::new(2, 2, 8),
                },
                LayerSpec {
                    name: "head".into(),
                    kind: FullyConnected,
                    in_shape: Shape::new(2, 2, 8),
                    out_shape: Shape::new(1, 1, 3),
                },
            ],
        }
    }

    #[test]
    fn default_topology_is_valid() {
        let cfg = default_topology();
        cfg.validate().unwrap();
        assert_eq!(cfg.layers.len(), 21);
        assert_eq!(cfg.input_shape(), Shape::new(32, 32, 2));
        assert_eq!(cfg.layers.last().unwrap().out_shape, Shape::new(1, 1, 10));
    }

    #[test]
    fn default_topology_memory_budget() {
        let b = default_topology().memory_budget();
        assert_eq!(b.weight_bits, 2_195_072);
        // Widest live pair: the 32x32x64 input of cv2 next to the 16x16x64
        // quantized tier output.
        assert_eq!(b.peak_activation_bits, 2 * 65_536 + 2 * 16_384);
        // One 32-channel group of a 32x32 partial-sum plane.
        assert_eq!(b.tmp_bits, 32 * 32 * 32 * 16);
        assert_eq!(b.total_bytes(), 360_400);
    }

    #[test]
    fn validate_rejects_broken_chains() {
        let mut cfg = tiny_config();
        cfg.layers[1].in_shape = Shape::new(4, 4, 9);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let mut cfg = tiny_config();
        cfg.layers[0].kind = LayerKind::BatchNorm; // wants partial sums at the input
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config();
        cfg.class_count = 4; // head emits 3
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config();
        cfg.layers[4].name = "pool".into();
        assert!(cfg.validate().is_err());

        // Two MAC layers back to back: the second gets partial sums.
        let mut cfg = tiny_config();
        cfg.layers.truncate(1);
        cfg.layers.push(LayerSpec {
            name: "head".into(),
            kind: LayerKind::FullyConnected,
            in_shape: Shape::new(4, 4, 8),
            out_shape: Shape::new(1, 1, 3),
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = default_topology();
        let text = cfg.to_toml_string().unwrap();
        let back = NetworkConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(text.contains("kind = \"conv3x3\""));
        assert!(text.contains("in_shape = ["));
    }

    #[test]
    fn generated_network_infers_deterministically() {
        let cfg = tiny_config();
        let opts = GenOptions { seed: 9, ..GenOptions::default() };
        let g1 = generate_params(&cfg, &opts).unwrap();
        let g2 = generate_params(&cfg, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = TernaryTensor::random(cfg.input_shape(), 0.5, &mut rng);
        let a = g1.network.infer(&x).unwrap();
        let b = g2.network.infer(&x).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.logits.len(), 3);
        assert!(a.label < 3);
        assert_eq!(a.label, golden::argmax(&a.logits));
    }

    #[test]
    fn different_seeds_give_different_weights() {
        let cfg = tiny_config();
        let g1 = generate_params(&cfg, &GenOptions { seed: 1, ..Default::default() }).unwrap();
        let g2 = generate_params(&cfg, &GenOptions { seed: 2, ..Default::default() }).unwrap();
        assert_ne!(
            g1.network.layer_weights(0).unwrap().bits().bytes(),
            g2.network.layer_weights(0).unwrap().bits().bytes()
        );
    }

    #[test]
    fn params_round_trip_through_files() {
        let cfg = tiny_config();
        let g = generate_params(&cfg, &GenOptions::default()).unwrap();
        let dir = std::env::temp_dir().join(format!("tbn-params-{}", std::process::id()));
        g.network.save_params(&dir).unwrap();
        let loaded = Network::load(cfg.clone(), &dir).unwrap();
        for i in 0..cfg.layers.len() {
            assert_eq!(loaded.params(i), g.network.params(i), "layer {i}");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn traced_inference_captures_mac_inputs() {
        let cfg = tiny_config();
        let g = generate_params(&cfg, &GenOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = TernaryTensor::random(cfg.input_shape(), 0.5, &mut rng);
        let (inf, traces) = g.network.infer_traced(&x).unwrap();
        let plain = g.network.infer(&x).unwrap();
        assert_eq!(inf.logits, plain.logits);
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].layer_index, 0);
        assert_eq!(traces[0].input.data(), x.data());
        assert_eq!(traces[1].layer_index, 4);
        assert_eq!(traces[1].input.shape(), Shape::new(2, 2, 8));
    }

    #[test]
    fn choose_threshold_handles_tied_magnitudes() {
        // 10 values: four 5s, six 2s. Density above t=1 is 1.0, above 2 is
        // 0.4, above 5 is 0. Target 0.45 picks t=2.
        let p = PartialSumTensor::new(
            Shape::new(1, 10, 1),
            vec![5, -5, 5, 5, 2, -2, 2, 2, -2, 2],
        )
        .unwrap();
        let (t, d) = choose_threshold(&[&p], 0.45);
        assert_eq!(t, 2);
        assert!((d - 0.4).abs() < 1e-12);
        // A target above every achievable density falls back to t=1.
        let (t, d) = choose_threshold(&[&p], 0.99);
        assert_eq!(t, 1);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_reports_each_quantize_layer() {
        let cfg = tiny_config();
        let g = generate_params(&cfg, &GenOptions { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(g.calibration.len(), 1);
        let cal = &g.calibration[0];
        assert_eq!(cal.layer, "quant");
        assert!(cal.threshold >= 1);
        assert!(cal.density > 0.0 && cal.density <= 1.0);
        // The stored thresholds are the symmetric pair the report names.
        match g.network.params(3) {
            LayerParams::Thresholds(t) => {
                assert!(t.iter().all(|&p| p == (cal.threshold, -cal.threshold)));
            }
            other => panic!("expected thresholds, got {other:?}"),
        }
    }

    #[test]
    fn load_reports_missing_files_by_path() {
        let cfg = tiny_config();
        let dir = std::env::temp_dir().join("tbn-definitely-missing");
        let err = Network::load(cfg, &dir).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("conv.tbnw"), "{msg}");
    }
}
