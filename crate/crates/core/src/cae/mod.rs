//! Convolutional autoencoder with hand-rolled reverse-mode gradients.
//!
//! The encoder halves the spatial extent with stride-2 convolutions until it
//! reaches 8x8, then a dense layer maps the flattened activations to the
//! latent vector. The decoder mirrors the encoder with transposed
//! convolutions and ends in a sigmoid, so reconstructions live in [0, 1].

mod gradcheck;
mod layers;
mod loss;
mod tensor;
mod train;

pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{conv2d, conv_transpose2d, Layer, LayerSpec};
pub use loss::rmse_loss;
pub use tensor::Tensor4;
pub use train::{train, Optimizer, TrainConfig};

use crate::numerics::{Matrix, SeededRng};
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MODEL_MAGIC: &[u8; 6] = b"GRCAE1";

/// Spatial size at which the encoder stops halving and flattens.
const BOTTLENECK: usize = 8;

/// First conv block's channel count; deeper blocks double it.
const BASE_CHANNELS: usize = 16;

/// Architecture request: square single-channel images of a power-of-two
/// extent (at least 16) and the latent dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaeArch {
    pub height: usize,
    pub width: usize,
    pub latent: usize,
}

impl CaeArch {
    pub fn new(resolution: usize, latent: usize) -> Result<CaeArch> {
        let arch = CaeArch { height: resolution, width: resolution, latent };
        arch.blocks()?;
        Ok(arch)
    }

    /// Number of stride-2 halvings between the input extent and the 8x8
    /// bottleneck.
    fn blocks(&self) -> Result<usize> {
        if self.height != self.width {
            return Err(Error::InvalidInput(format!(
                "expected a square input, got {}x{}",
                self.height, self.width
            )));
        }
        let r = self.height;
        if r < 2 * BOTTLENECK || !r.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "resolution {r} is not a power of two of at least {}",
                2 * BOTTLENECK
            )));
        }
        if self.latent == 0 {
            return Err(Error::InvalidInput("latent dimension must be positive".to_string()));
        }
        Ok((r / BOTTLENECK).trailing_zeros() as usize)
    }

    /// Full layer list (encoder then decoder) and the encoder's length.
    fn layer_plan(&self) -> Result<(Vec<LayerSpec>, usize)> {
        let blocks = self.blocks()?;
        let ch = |i: usize| BASE_CHANNELS << i;
        let deepest = ch(blocks - 1);
        let flat = deepest * BOTTLENECK * BOTTLENECK;
        let mut specs = Vec::new();
        for i in 0..blocks {
            let in_ch = if i == 0 { 1 } else { ch(i - 1) };
            specs.push(LayerSpec::Conv { in_ch, out_ch: ch(i), kh: 4, kw: 4, stride: 2, padding: 1 });
            specs.push(LayerSpec::Relu);
        }
        specs.push(LayerSpec::Flatten);
        specs.push(LayerSpec::Dense { in_dim: flat, out_dim: self.latent });
        let encoder_len = specs.len();
        specs.push(LayerSpec::Dense { in_dim: self.latent, out_dim: flat });
        specs.push(LayerSpec::Relu);
        specs.push(LayerSpec::Reshape { c: deepest, h: BOTTLENECK, w: BOTTLENECK });
        for i in (1..blocks).rev() {
            specs.push(LayerSpec::ConvTranspose {
                in_ch: ch(i),
                out_ch: ch(i - 1),
                kh: 4,
                kw: 4,
                stride: 2,
                padding: 1,
            });
            specs.push(LayerSpec::Relu);
        }
        specs.push(LayerSpec::ConvTranspose {
            in_ch: BASE_CHANNELS,
            out_ch: 1,
            kh: 4,
            kw: 4,
            stride: 2,
            padding: 1,
        });
        specs.push(LayerSpec::Sigmoid);
        Ok((specs, encoder_len))
    }
}

/// Encoder/decoder stack with parameters.
#[derive(Debug, Clone)]
pub struct CaeModel {
    height: usize,
    width: usize,
    latent: usize,
    layers: Vec<Layer>,
    encoder_len: usize,
}

impl CaeModel {
    /// Builds the architecture with fan-in-scaled uniform weights
    /// (limit sqrt(3 / fan_in), giving variance 1 / fan_in) and zero biases.
    pub fn new(arch: &CaeArch, rng: &mut SeededRng) -> Result<CaeModel> {
        let (specs, encoder_len) = arch.layer_plan()?;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let fan_in = match spec {
                LayerSpec::Conv { in_ch, kh, kw, .. }
                | LayerSpec::ConvTranspose { in_ch, kh, kw, .. } => in_ch * kh * kw,
                LayerSpec::Dense { in_dim, .. } => in_dim,
                _ => 0,
            };
            let mut layer = Layer::new(spec);
            if fan_in > 0 {
                let limit = (3.0 / fan_in as f64).sqrt();
                for w in &mut layer.weights {
                    *w = (2.0 * rng.next_f64() - 1.0) * limit;
                }
            }
            layers.push(layer);
        }
        let model = CaeModel {
            height: arch.height,
            width: arch.width,
            latent: arch.latent,
            layers,
            encoder_len,
        };
        model.validate_shapes()?;
        Ok(model)
    }

    /// Builds a model from an explicit layer stack; the first
    /// `encoder_len` layers form the encoder. The stack must map
    /// (1, height, width) to (latent, 1, 1) and back.
    pub fn from_layers(
        height: usize,
        width: usize,
        latent: usize,
        encoder_len: usize,
        layers: Vec<Layer>,
    ) -> Result<CaeModel> {
        if encoder_len == 0 || encoder_len >= layers.len() {
            return Err(Error::InvalidInput(format!(
                "encoder takes {encoder_len} of {} layers",
                layers.len()
            )));
        }
        let model = CaeModel { height, width, latent, layers, encoder_len };
        model.validate_shapes()?;
        Ok(model)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn latent(&self) -> usize {
        self.latent
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Runs the shape map of every layer and checks the declared geometry.
    fn validate_shapes(&self) -> Result<()> {
        let mut shape = (1, self.height, self.width);
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.spec.output_shape(shape).map_err(|e| {
                Error::Format(format!("layer {i} does not fit the stack: {e}"))
            })?;
            if i + 1 == self.encoder_len && shape != (self.latent, 1, 1) {
                return Err(Error::Format(format!(
                    "encoder produces {shape:?}, expected ({}, 1, 1)",
                    self.latent
                )));
            }
        }
        if shape != (1, self.height, self.width) {
            return Err(Error::Format(format!(
                "decoder produces {shape:?}, expected (1, {}, {})",
                self.height, self.width
            )));
        }
        Ok(())
    }

    fn check_resolution(&self, x: &Tensor4) -> Result<()> {
        let (_, c, h, w) = x.shape();
        if (c, h, w) != (1, self.height, self.width) {
            return Err(Error::InvalidInput(format!(
                "model expects (1, {}, {}) frames, got ({c}, {h}, {w})",
                self.height, self.width
            )));
        }
        Ok(())
    }

    /// Latent vectors for a batch, one row per sample.
    pub fn encode(&self, x: &Tensor4) -> Result<Matrix> {
        self.check_resolution(x)?;
        let mut t = x.clone();
        for layer in &self.layers[..self.encoder_len] {
            t = layer.forward(&t)?;
        }
        Matrix::from_vec(t.batch(), self.latent, t.values().to_vec())
    }

    /// Reconstructions for a batch of latent rows.
    pub fn decode(&self, z: &Matrix) -> Result<Tensor4> {
        if z.cols() != self.latent {
            return Err(Error::InvalidInput(format!(
                "latent width {} does not match model latent {}",
                z.cols(),
                self.latent
            )));
        }
        let mut t = Tensor4::new(z.rows(), self.latent, 1, 1, z.values().to_vec())?;
        for layer in &self.layers[self.encoder_len..] {
            t = layer.forward(&t)?;
        }
        Ok(t)
    }

    /// Full encode/decode pass.
    pub fn reconstruct(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_resolution(x)?;
        let mut t = x.clone();
        for layer in &self.layers {
            t = layer.forward(&t)?;
        }
        Ok(t)
    }

    /// Activations of the full stack: element 0 is the input, element i+1
    /// the output of layer i.
    pub(crate) fn forward_trace(&self, x: &Tensor4) -> Result<Vec<Tensor4>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(acts.last().expect("non-empty"))?;
            acts.push(next);
        }
        Ok(acts)
    }

    /// Architecture as text: a header line, then the encoder and decoder
    /// layer lists.
    fn describe_architecture(&self) -> String {
        let mut text = format!("gridcae {} {} {}\n", self.height, self.width, self.latent);
        text.push_str(&format!("encoder {}\n", self.encoder_len));
        for layer in &self.layers[..self.encoder_len] {
            text.push_str(&layer.spec.describe());
            text.push('\n');
        }
        text.push_str(&format!("decoder {}\n", self.layers.len() - self.encoder_len));
        for layer in &self.layers[self.encoder_len..] {
            text.push_str(&layer.spec.describe());
            text.push('\n');
        }
        text
    }

    fn parse_architecture(text: &str) -> Result<CaeModel> {
        let mut lines = text.lines();
        let bad = |msg: &str| Error::Format(format!("model architecture text: {msg}"));
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let (height, width, latent) = match head.as_slice() {
            ["gridcae", h, w, d] => (
                h.parse().map_err(|_| bad("bad height"))?,
                w.parse().map_err(|_| bad("bad width"))?,
                d.parse().map_err(|_| bad("bad latent"))?,
            ),
            _ => return Err(bad("missing gridcae header")),
        };
        let section = |name: &str, lines: &mut std::str::Lines| -> Result<Vec<Layer>> {
            let head = lines.next().ok_or_else(|| bad("truncated"))?;
            let count: usize = match head.split_whitespace().collect::<Vec<_>>().as_slice() {
                [n, c] if *n == name => c.parse().map_err(|_| bad("bad layer count"))?,
                _ => return Err(bad("missing section header")),
            };
            let mut layers = Vec::with_capacity(count);
            for _ in 0..count {
                let line = lines.next().ok_or_else(|| bad("truncated layer list"))?;
                layers.push(Layer::new(LayerSpec::parse(line)?));
            }
            Ok(layers)
        };
        let mut layers = section("encoder", &mut lines)?;
        let encoder_len = layers.len();
        layers.extend(section("decoder", &mut lines)?);
        let model = CaeModel { height, width, latent, layers, encoder_len };
        model.validate_shapes()?;
        Ok(model)
    }

    /// Writes magic, length-prefixed architecture text, then all parameters
    /// as little-endian doubles in layer order (weights, then bias).
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        out.write_all(MODEL_MAGIC).map_err(io)?;
        let text = self.describe_architecture();
        out.write_all(&(text.len() as u64).to_le_bytes()).map_err(io)?;
        out.write_all(text.as_bytes()).map_err(io)?;
        for layer in &self.layers {
            for v in layer.weights.iter().chain(&layer.bias) {
                out.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<CaeModel> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let mut magic = [0u8; 6];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format(format!(
                "{} is not a model file (bad magic)",
                path.display()
            )));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len).map_err(io)?;
        let text_len = u64::from_le_bytes(len) as usize;
        let mut text = vec![0u8; text_len];
        input.read_exact(&mut text).map_err(io)?;
        let text = String::from_utf8(text)
            .map_err(|_| Error::Format("architecture text is not UTF-8".to_string()))?;
        let mut model = CaeModel::parse_architecture(&text)?;
        let mut buf = [0u8; 8];
        for layer in &mut model.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                input.read_exact(&mut buf).map_err(io)?;
                *v = f64::from_le_bytes(buf);
            }
        }
        if input.read(&mut buf).map_err(io)? != 0 {
            return Err(Error::Format("trailing bytes after model parameters".to_string()));
        }
        Ok(model)
    }
}

/// Packs same-resolution frames scaled to [0, 1] into a training tensor.
pub fn frames_to_tensor(frames: &[Vec<f64>], height: usize, width: usize) -> Result<Tensor4> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("no frames".to_string()));
    }
    let mut values = Vec::with_capacity(frames.len() * height * width);
    for (i, f) in frames.iter().enumerate() {
        if f.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "frame {i} has {} values, expected {}",
                f.len(),
                height * width
            )));
        }
        values.extend_from_slice(f);
    }
    Tensor4::new(frames.len(), 1, height, width, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_model(latent: usize) -> CaeModel {
        let arch = CaeArch::new(16, latent).unwrap();
        let mut rng = SeededRng::new(0xCAE0);
        CaeModel::new(&arch, &mut rng).unwrap()
    }

    #[test]
    fn block_counts_follow_resolution() {
        for (res, blocks) in [(16usize, 1usize), (64, 3), (256, 5), (512, 6)] {
            let arch = CaeArch::new(res, 8).unwrap();
            assert_eq!(arch.blocks().unwrap(), blocks, "resolution {res}");
        }
        assert!(CaeArch::new(48, 8).is_err());
        assert!(CaeArch::new(8, 8).is_err());
        assert!(CaeArch::new(64, 0).is_err());
    }

    #[test]
    fn zero_weights_give_zero_latent() {
        let arch = CaeArch::new(16, 5).unwrap();
        let (specs, encoder_len) = arch.layer_plan().unwrap();
        let model = CaeModel {
            height: 16,
            width: 16,
            latent: 5,
            layers: specs.into_iter().map(Layer::new).collect(),
            encoder_len,
        };
        let x = Tensor4::zeros(2, 1, 16, 16);
        let z = model.encode(&x).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn custom_layer_stacks_are_shape_checked() {
        let good = vec![
            Layer::new(LayerSpec::Flatten),
            Layer::new(LayerSpec::Dense { in_dim: 64, out_dim: 6 }),
            Layer::new(LayerSpec::Dense { in_dim: 6, out_dim: 64 }),
            Layer::new(LayerSpec::Reshape { c: 1, h: 8, w: 8 }),
        ];
        let model = CaeModel::from_layers(8, 8, 6, 2, good).unwrap();
        assert_eq!(model.latent(), 6);

        let bad = vec![
            Layer::new(LayerSpec::Flatten),
            Layer::new(LayerSpec::Dense { in_dim: 64, out_dim: 6 }),
            Layer::new(LayerSpec::Dense { in_dim: 6, out_dim: 32 }),
            Layer::new(LayerSpec::Reshape { c: 1, h: 8, w: 8 }),
        ];
        assert!(CaeModel::from_layers(8, 8, 6, 2, bad).is_err());
        let one = vec![Layer::new(LayerSpec::Flatten)];
        assert!(CaeModel::from_layers(8, 8, 6, 1, one).is_err());
    }

    #[test]
    fn latent_width_spans_the_swept_range() {
        for d in [4usize, 64, 512, 2048] {
            let model = small_model(d);
            let x = Tensor4::zeros(1, 1, 16, 16);
            let z = model.encode(&x).unwrap();
            assert_eq!((z.rows(), z.cols()), (1, d));
        }
    }

    #[test]
    fn encode_is_deterministic_bitwise() {
        let model = small_model(6);
        let mut rng = SeededRng::new(7);
        let vals: Vec<f64> = (0..256).map(|_| rng.next_f64()).collect();
        let x = Tensor4::new(1, 1, 16, 16, vals).unwrap();
        let a = model.encode(&x).unwrap();
        let b = model.encode(&x).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn decode_stays_in_unit_range_and_shape() {
        let model = small_model(6);
        let mut rng = SeededRng::new(8);
        let z = Matrix::from_vec(3, 6, (0..18).map(|_| 4.0 * rng.next_f64() - 2.0).collect()).unwrap();
        let y = model.decode(&z).unwrap();
        assert_eq!(y.shape(), (3, 1, 16, 16));
        assert!(y.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let narrow = Matrix::zeros(1, 5);
        assert!(model.decode(&narrow).is_err());
    }

    #[test]
    fn resolution_mismatch_is_rejected() {
        let model = small_model(6);
        let x = Tensor4::zeros(1, 1, 32, 32);
        assert!(model.encode(&x).is_err());
        assert!(model.reconstruct(&x).is_err());
    }

    #[test]
    fn model_file_round_trips() {
        let model = small_model(9);
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.cae");
        model.save(&path).unwrap();
        let back = CaeModel::load(&path).unwrap();
        assert_eq!(back.latent(), 9);
        assert_eq!(back.encoder_len, model.encoder_len);
        for (a, b) in model.layers.iter().zip(&back.layers) {
            assert_eq!(a.spec, b.spec);
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.bias, b.bias);
        }
        let mut rng = SeededRng::new(9);
        let vals: Vec<f64> = (0..256).map(|_| rng.next_f64()).collect();
        let x = Tensor4::new(1, 1, 16, 16, vals).unwrap();
        assert_eq!(model.encode(&x).unwrap().values(), back.encode(&x).unwrap().values());
    }

    #[test]
    fn truncated_model_file_is_rejected() {
        let model = small_model(4);
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.cae");
        model.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(CaeModel::load(&path).is_err());
        std::fs::write(&path, b"NOTCAE").unwrap();
        assert!(CaeModel::load(&path).is_err());
    }
}
