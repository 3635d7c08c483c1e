use super::tensor::Tensor4;
use crate::{Error, Result};

/// Shape descriptor for one layer.
///
/// Conv kernels are stored (out_ch, in_ch, kh, kw). Transpose kernels are
/// stored (in_ch, out_ch, kh, kw), the orientation of the conv they invert,
/// so a conv and a transpose sharing one weight buffer are exact adjoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { in_ch: usize, out_ch: usize, kh: usize, kw: usize, stride: usize, padding: usize },
    ConvTranspose { in_ch: usize, out_ch: usize, kh: usize, kw: usize, stride: usize, padding: usize },
    Dense { in_dim: usize, out_dim: usize },
    Relu,
    Sigmoid,
    Flatten,
    Reshape { c: usize, h: usize, w: usize },
}

impl LayerSpec {
    pub fn param_sizes(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv { in_ch, out_ch, kh, kw, .. }
            | LayerSpec::ConvTranspose { in_ch, out_ch, kh, kw, .. } => {
                (in_ch * out_ch * kh * kw, out_ch)
            }
            LayerSpec::Dense { in_dim, out_dim } => (in_dim * out_dim, out_dim),
            _ => (0, 0),
        }
    }

    /// Per-sample output shape (c, h, w) for a given input shape.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input;
        match *self {
            LayerSpec::Conv { in_ch, out_ch, kh, kw, stride, padding } => {
                if c != in_ch {
                    return Err(Error::InvalidInput(format!(
                        "conv expects {in_ch} channels, input has {c}"
                    )));
                }
                Ok((out_ch, conv_extent(h, kh, stride, padding)?, conv_extent(w, kw, stride, padding)?))
            }
            LayerSpec::ConvTranspose { in_ch, out_ch, kh, kw, stride, padding } => {
                if c != in_ch {
                    return Err(Error::InvalidInput(format!(
                        "conv_transpose expects {in_ch} channels, input has {c}"
                    )));
                }
                Ok((
                    out_ch,
                    conv_transpose_extent(h, kh, stride, padding)?,
                    conv_transpose_extent(w, kw, stride, padding)?,
                ))
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                if (c, h, w) != (in_dim, 1, 1) {
                    return Err(Error::InvalidInput(format!(
                        "dense expects ({in_dim}, 1, 1) input, got ({c}, {h}, {w})"
                    )));
                }
                Ok((out_dim, 1, 1))
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input),
            LayerSpec::Flatten => Ok((c * h * w, 1, 1)),
            LayerSpec::Reshape { c: rc, h: rh, w: rw } => {
                if rc * rh * rw != c * h * w {
                    return Err(Error::InvalidInput(format!(
                        "reshape to ({rc}, {rh}, {rw}) does not preserve volume {c}x{h}x{w}"
                    )));
                }
                Ok((rc, rh, rw))
            }
        }
    }

    /// One-line text form used by the model file format.
    pub fn describe(&self) -> String {
        match *self {
            LayerSpec::Conv { in_ch, out_ch, kh, kw, stride, padding } => {
                format!("conv {in_ch} {out_ch} {kh} {kw} {stride} {padding}")
            }
            LayerSpec::ConvTranspose { in_ch, out_ch, kh, kw, stride, padding } => {
                format!("conv_transpose {in_ch} {out_ch} {kh} {kw} {stride} {padding}")
            }
            LayerSpec::Dense { in_dim, out_dim } => format!("dense {in_dim} {out_dim}"),
            LayerSpec::Relu => "relu".to_string(),
            LayerSpec::Sigmoid => "sigmoid".to_string(),
            LayerSpec::Flatten => "flatten".to_string(),
            LayerSpec::Reshape { c, h, w } => format!("reshape {c} {h} {w}"),
        }
    }

    pub fn parse(text: &str) -> Result<LayerSpec> {
        let bad = || Error::Format(format!("unrecognized layer descriptor '{text}'"));
        let mut it = text.split_whitespace();
        let kind = it.next().ok_or_else(bad)?;
        let mut nums = Vec::new();
        for tok in it {
            nums.push(tok.parse::<usize>().map_err(|_| bad())?);
        }
        let spec = match (kind, nums.as_slice()) {
            ("conv", &[in_ch, out_ch, kh, kw, stride, padding]) => {
                LayerSpec::Conv { in_ch, out_ch, kh, kw, stride, padding }
            }
            ("conv_transpose", &[in_ch, out_ch, kh, kw, stride, padding]) => {
                LayerSpec::ConvTranspose { in_ch, out_ch, kh, kw, stride, padding }
            }
            ("dense", &[in_dim, out_dim]) => LayerSpec::Dense { in_dim, out_dim },
            ("relu", []) => LayerSpec::Relu,
            ("sigmoid", []) => LayerSpec::Sigmoid,
            ("flatten", []) => LayerSpec::Flatten,
            ("reshape", &[c, h, w]) => LayerSpec::Reshape { c, h, w },
            _ => return Err(bad()),
        };
        if let LayerSpec::Conv { kh, kw, stride, .. } | LayerSpec::ConvTranspose { kh, kw, stride, .. } = spec {
            if kh == 0 || kw == 0 || stride == 0 {
                return Err(bad());
            }
        }
        Ok(spec)
    }
}

/// A layer with its parameters. Parameterless kinds hold empty vectors.
#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(spec: LayerSpec) -> Layer {
        let (nw, nb) = spec.param_sizes();
        Layer { spec, weights: vec![0.0; nw], bias: vec![0.0; nb] }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        match self.spec {
            LayerSpec::Conv { in_ch, out_ch, kh, kw, stride, padding } => {
                conv_forward(x, in_ch, out_ch, kh, kw, stride, padding, &self.weights, &self.bias)
            }
            LayerSpec::ConvTranspose { in_ch, out_ch, kh, kw, stride, padding } => {
                conv_transpose_forward(x, in_ch, out_ch, kh, kw, stride, padding, &self.weights, &self.bias)
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                dense_forward(x, in_dim, out_dim, &self.weights, &self.bias)
            }
            LayerSpec::Relu => {
                let mut y = x.clone();
                for v in y.values_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                Ok(y)
            }
            LayerSpec::Sigmoid => {
                let mut y = x.clone();
                for v in y.values_mut() {
                    *v = sigmoid(*v);
                }
                Ok(y)
            }
            LayerSpec::Flatten => {
                let (_, c, h, w) = x.shape();
                x.reshaped(c * h * w, 1, 1)
            }
            LayerSpec::Reshape { c, h, w } => {
                let (_, xc, xh, xw) = x.shape();
                if c * h * w != xc * xh * xw {
                    return Err(Error::InvalidInput(format!(
                        "reshape to ({c}, {h}, {w}) does not preserve volume {xc}x{xh}x{xw}"
                    )));
                }
                x.reshaped(c, h, w)
            }
        }
    }

    /// Reverse pass. `x` and `y` must be the input/output of a prior
    /// `forward` call on this layer; `dy` must match `y`'s shape.
    /// Returns (dx, dweights, dbias).
    pub fn backward(&self, x: &Tensor4, y: &Tensor4, dy: &Tensor4) -> (Tensor4, Vec<f64>, Vec<f64>) {
        assert_eq!(y.shape(), dy.shape(), "gradient shape must match the forward output");
        match self.spec {
            LayerSpec::Conv { in_ch, out_ch, kh, kw, stride, padding } => {
                conv_backward(x, dy, in_ch, out_ch, kh, kw, stride, padding, &self.weights)
            }
            LayerSpec::ConvTranspose { in_ch, out_ch, kh, kw, stride, padding } => {
                conv_transpose_backward(x, dy, in_ch, out_ch, kh, kw, stride, padding, &self.weights)
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                dense_backward(x, dy, in_dim, out_dim, &self.weights)
            }
            LayerSpec::Relu => {
                let mut dx = dy.clone();
                for (g, &v) in dx.values_mut().iter_mut().zip(x.values()) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
                (dx, Vec::new(), Vec::new())
            }
            LayerSpec::Sigmoid => {
                let mut dx = dy.clone();
                for (g, &s) in dx.values_mut().iter_mut().zip(y.values()) {
                    *g *= s * (1.0 - s);
                }
                (dx, Vec::new(), Vec::new())
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                let (_, c, h, w) = x.shape();
                let dx = dy.reshaped(c, h, w).expect("volume preserved by forward");
                (dx, Vec::new(), Vec::new())
            }
        }
    }
}

/// Cross-correlation with the layer's kernel. Rejects non-conv layers.
pub fn conv2d(x: &Tensor4, layer: &Layer) -> Result<Tensor4> {
    match layer.spec {
        LayerSpec::Conv { .. } => layer.forward(x),
        _ => Err(Error::InvalidInput("conv2d requires a conv layer".to_string())),
    }
}

/// Adjoint of [`conv2d`] with shared weights. Rejects non-transpose layers.
pub fn conv_transpose2d(x: &Tensor4, layer: &Layer) -> Result<Tensor4> {
    match layer.spec {
        LayerSpec::ConvTranspose { .. } => layer.forward(x),
        _ => Err(Error::InvalidInput("conv_transpose2d requires a conv_transpose layer".to_string())),
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn conv_extent(len: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = len + 2 * pad;
    if len == 0 || padded < k {
        return Err(Error::InvalidInput(format!(
            "kernel extent {k} exceeds padded input extent {padded}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

fn conv_transpose_extent(len: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if len == 0 {
        return Err(Error::InvalidInput("empty input extent".to_string()));
    }
    let grown = (len - 1) * stride + k;
    if grown <= 2 * pad {
        return Err(Error::InvalidInput(format!(
            "padding {pad} consumes the whole transposed extent {grown}"
        )));
    }
    Ok(grown - 2 * pad)
}

/// Loop positions o in [0, loop_len) whose partner index o*stride + k - pad
/// lands inside [0, target_len). Half-open.
fn span(loop_len: usize, target_len: usize, stride: usize, pad: usize, k: usize) -> (usize, usize) {
    let s = stride as i64;
    let off = k as i64 - pad as i64;
    let lo = if off >= 0 { 0 } else { (-off + s - 1) / s };
    let hi = (target_len as i64 - 1 - off).div_euclid(s);
    if hi < lo {
        return (0, 0);
    }
    let start = lo as usize;
    let end = (hi as usize + 1).min(loop_len);
    if start >= end {
        (0, 0)
    } else {
        (start, end)
    }
}

// dst[i] += a * src[i*stride]
#[inline]
fn axpy_gather(dst: &mut [f64], src: &[f64], stride: usize, a: f64) {
    for (d, s) in dst.iter_mut().zip(src.iter().step_by(stride)) {
        *d += a * *s;
    }
}

// dst[i*stride] += a * src[i]
#[inline]
fn axpy_scatter(dst: &mut [f64], stride: usize, src: &[f64], a: f64) {
    for (d, s) in dst.iter_mut().step_by(stride).zip(src.iter()) {
        *d += a * *s;
    }
}

// sum_i dense[i] * strided[i*stride]
#[inline]
fn dot_gather(dense: &[f64], strided: &[f64], stride: usize) -> f64 {
    dense.iter().zip(strided.iter().step_by(stride)).map(|(a, b)| a * b).sum()
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    x: &Tensor4,
    in_ch: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    w: &[f64],
    b: &[f64],
) -> Result<Tensor4> {
    let (n, c, h, wd) = x.shape();
    if c != in_ch {
        return Err(Error::InvalidInput(format!("conv expects {in_ch} channels, input has {c}")));
    }
    let oh = conv_extent(h, kh, stride, pad)?;
    let ow = conv_extent(wd, kw, stride, pad)?;
    let mut y = Tensor4::zeros(n, out_ch, oh, ow);
    let yv = y.values_mut();
    let xv = x.values();
    for si in 0..n {
        for oc in 0..out_ch {
            let block = (si * out_ch + oc) * oh * ow;
            yv[block..block + oh * ow].fill(b[oc]);
            for ic in 0..in_ch {
                for ky in 0..kh {
                    let (oy0, oy1) = span(oh, h, stride, pad, ky);
                    for oy in oy0..oy1 {
                        let iy = oy * stride + ky - pad;
                        let xrow = ((si * in_ch + ic) * h + iy) * wd;
                        let yrow = block + oy * ow;
                        for kx in 0..kw {
                            let wv = w[((oc * in_ch + ic) * kh + ky) * kw + kx];
                            let (ox0, ox1) = span(ow, wd, stride, pad, kx);
                            if ox0 == ox1 {
                                continue;
                            }
                            let ix0 = ox0 * stride + kx - pad;
                            axpy_gather(
                                &mut yv[yrow + ox0..yrow + ox1],
                                &xv[xrow + ix0..xrow + wd],
                                stride,
                                wv,
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &Tensor4,
    dy: &Tensor4,
    in_ch: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    w: &[f64],
) -> (Tensor4, Vec<f64>, Vec<f64>) {
    let (n, _, h, wd) = x.shape();
    let (_, _, oh, ow) = dy.shape();
    let mut dx = Tensor4::zeros(n, in_ch, h, wd);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_ch];
    let dxv = dx.values_mut();
    let xv = x.values();
    let dyv = dy.values();
    for si in 0..n {
        for oc in 0..out_ch {
            let block = (si * out_ch + oc) * oh * ow;
            db[oc] += dyv[block..block + oh * ow].iter().sum::<f64>();
            for ic in 0..in_ch {
                for ky in 0..kh {
                    let (oy0, oy1) = span(oh, h, stride, pad, ky);
                    for oy in oy0..oy1 {
                        let iy = oy * stride + ky - pad;
                        let xrow = ((si * in_ch + ic) * h + iy) * wd;
                        let dyrow = block + oy * ow;
                        for kx in 0..kw {
                            let widx = ((oc * in_ch + ic) * kh + ky) * kw + kx;
                            let (ox0, ox1) = span(ow, wd, stride, pad, kx);
                            if ox0 == ox1 {
                                continue;
                            }
                            let ix0 = ox0 * stride + kx - pad;
                            dw[widx] +=
                                dot_gather(&dyv[dyrow + ox0..dyrow + ox1], &xv[xrow + ix0..xrow + wd], stride);
                            axpy_scatter(
                                &mut dxv[xrow + ix0..xrow + wd],
                                stride,
                                &dyv[dyrow + ox0..dyrow + ox1],
                                w[widx],
                            );
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

#[allow(clippy::too_many_arguments)]
fn conv_transpose_forward(
    x: &Tensor4,
    in_ch: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    w: &[f64],
    b: &[f64],
) -> Result<Tensor4> {
    let (n, c, h, wd) = x.shape();
    if c != in_ch {
        return Err(Error::InvalidInput(format!(
            "conv_transpose expects {in_ch} channels, input has {c}"
        )));
    }
    let oh = conv_transpose_extent(h, kh, stride, pad)?;
    let ow = conv_transpose_extent(wd, kw, stride, pad)?;
    let mut y = Tensor4::zeros(n, out_ch, oh, ow);
    let yv = y.values_mut();
    let xv = x.values();
    for si in 0..n {
        for co in 0..out_ch {
            let block = (si * out_ch + co) * oh * ow;
            yv[block..block + oh * ow].fill(b[co]);
        }
        for ci in 0..in_ch {
            for co in 0..out_ch {
                let block = (si * out_ch + co) * oh * ow;
                for ky in 0..kh {
                    let (y0, y1) = span(h, oh, stride, pad, ky);
                    for yi in y0..y1 {
                        let oy = yi * stride + ky - pad;
                        let xrow = ((si * in_ch + ci) * h + yi) * wd;
                        let orow = block + oy * ow;
                        for kx in 0..kw {
                            let wv = w[((ci * out_ch + co) * kh + ky) * kw + kx];
                            let (x0, x1) = span(wd, ow, stride, pad, kx);
                            if x0 == x1 {
                                continue;
                            }
                            let o0 = x0 * stride + kx - pad;
                            axpy_scatter(
                                &mut yv[orow + o0..orow + ow],
                                stride,
                                &xv[xrow + x0..xrow + x1],
                                wv,
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

#[allow(clippy::too_many_arguments)]
fn conv_transpose_backward(
    x: &Tensor4,
    dy: &Tensor4,
    in_ch: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    w: &[f64],
) -> (Tensor4, Vec<f64>, Vec<f64>) {
    let (n, _, h, wd) = x.shape();
    let (_, _, oh, ow) = dy.shape();
    let mut dx = Tensor4::zeros(n, in_ch, h, wd);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_ch];
    let dxv = dx.values_mut();
    let xv = x.values();
    let dyv = dy.values();
    for si in 0..n {
        for co in 0..out_ch {
            let block = (si * out_ch + co) * oh * ow;
            db[co] += dyv[block..block + oh * ow].iter().sum::<f64>();
        }
        for ci in 0..in_ch {
            for co in 0..out_ch {
                let block = (si * out_ch + co) * oh * ow;
                for ky in 0..kh {
                    let (y0, y1) = span(h, oh, stride, pad, ky);
                    for yi in y0..y1 {
                        let oy = yi * stride + ky - pad;
                        let xrow = ((si * in_ch + ci) * h + yi) * wd;
                        let dyrow = block + oy * ow;
                        for kx in 0..kw {
                            let widx = ((ci * out_ch + co) * kh + ky) * kw + kx;
                            let (x0, x1) = span(wd, ow, stride, pad, kx);
                            if x0 == x1 {
                                continue;
                            }
                            let o0 = x0 * stride + kx - pad;
                            dw[widx] +=
                                dot_gather(&xv[xrow + x0..xrow + x1], &dyv[dyrow + o0..dyrow + ow], stride);
                            axpy_gather(
                                &mut dxv[xrow + x0..xrow + x1],
                                &dyv[dyrow + o0..dyrow + ow],
                                stride,
                                w[widx],
                            );
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

fn dense_forward(x: &Tensor4, in_dim: usize, out_dim: usize, w: &[f64], b: &[f64]) -> Result<Tensor4> {
    let (n, c, h, wd) = x.shape();
    if (c, h, wd) != (in_dim, 1, 1) {
        return Err(Error::InvalidInput(format!(
            "dense expects ({in_dim}, 1, 1) input, got ({c}, {h}, {wd})"
        )));
    }
    let mut y = Tensor4::zeros(n, out_dim, 1, 1);
    let yv = y.values_mut();
    let xv = x.values();
    for si in 0..n {
        let xrow = &xv[si * in_dim..(si + 1) * in_dim];
        let yrow = &mut yv[si * out_dim..(si + 1) * out_dim];
        for (o, out) in yrow.iter_mut().enumerate() {
            let wrow = &w[o * in_dim..(o + 1) * in_dim];
            *out = b[o] + wrow.iter().zip(xrow).map(|(a, v)| a * v).sum::<f64>();
        }
    }
    Ok(y)
}

fn dense_backward(
    x: &Tensor4,
    dy: &Tensor4,
    in_dim: usize,
    out_dim: usize,
    w: &[f64],
) -> (Tensor4, Vec<f64>, Vec<f64>) {
    let n = x.batch();
    let mut dx = Tensor4::zeros(n, in_dim, 1, 1);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_dim];
    let dxv = dx.values_mut();
    let xv = x.values();
    let dyv = dy.values();
    for si in 0..n {
        let xrow = &xv[si * in_dim..(si + 1) * in_dim];
        let dxrow = &mut dxv[si * in_dim..(si + 1) * in_dim];
        let dyrow = &dyv[si * out_dim..(si + 1) * out_dim];
        for (o, &g) in dyrow.iter().enumerate() {
            db[o] += g;
            let wrow = &w[o * in_dim..(o + 1) * in_dim];
            let dwrow = &mut dw[o * in_dim..(o + 1) * in_dim];
            for i in 0..in_dim {
                dxrow[i] += g * wrow[i];
                dwrow[i] += g * xrow[i];
            }
        }
    }
    (dx, dw, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn random_values(n: usize, rng: &mut SeededRng) -> Vec<f64> {
        (0..n).map(|_| rng.next_f64() - 0.5).collect()
    }

    fn conv_layer(in_ch: usize, out_ch: usize, k: usize, stride: usize, padding: usize) -> LayerSpec {
        LayerSpec::Conv { in_ch, out_ch, kh: k, kw: k, stride, padding }
    }

    #[test]
    fn unit_kernel_is_identity() {
        let layer = Layer {
            spec: conv_layer(1, 1, 1, 1, 0),
            weights: vec![1.0],
            bias: vec![0.0],
        };
        let x = Tensor4::new(1, 1, 3, 4, (0..12).map(f64::from).collect()).unwrap();
        let y = conv2d(&x, &layer).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_3x3_sums_to_nine() {
        let layer = Layer {
            spec: conv_layer(1, 1, 3, 1, 0),
            weights: vec![1.0; 9],
            bias: vec![0.0],
        };
        let x = Tensor4::new(1, 1, 3, 3, vec![1.0; 9]).unwrap();
        let y = conv2d(&x, &layer).unwrap();
        assert_eq!(y.shape(), (1, 1, 1, 1));
        assert_eq!(y.values()[0], 9.0);
    }

    #[test]
    fn transpose_unit_kernel_is_identity() {
        let layer = Layer {
            spec: LayerSpec::ConvTranspose { in_ch: 1, out_ch: 1, kh: 1, kw: 1, stride: 1, padding: 0 },
            weights: vec![1.0],
            bias: vec![0.0],
        };
        let x = Tensor4::new(1, 1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = conv_transpose2d(&x, &layer).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn stride_two_transpose_doubles_extent() {
        let layer = Layer::new(LayerSpec::ConvTranspose {
            in_ch: 1,
            out_ch: 1,
            kh: 4,
            kw: 4,
            stride: 2,
            padding: 1,
        });
        let x = Tensor4::zeros(1, 1, 4, 4);
        let y = conv_transpose2d(&x, &layer).unwrap();
        assert_eq!(y.shape(), (1, 1, 8, 8));
    }

    #[test]
    fn conv_and_transpose_are_adjoint() {
        // (k, stride, pad) configs whose shape maps invert exactly on 8x8.
        let configs = [(4usize, 2usize, 1usize), (3, 1, 1), (1, 1, 0)];
        let mut rng = SeededRng::new(0xADA0);
        for &(k, stride, padding) in &configs {
            let (a, b) = (2usize, 3usize);
            let weights = random_values(b * a * k * k, &mut rng);
            let conv = Layer {
                spec: LayerSpec::Conv { in_ch: a, out_ch: b, kh: k, kw: k, stride, padding },
                weights: weights.clone(),
                bias: vec![0.0; b],
            };
            let x = Tensor4::new(2, a, 8, 8, random_values(2 * a * 64, &mut rng)).unwrap();
            let cx = conv2d(&x, &conv).unwrap();
            let tr = Layer {
                spec: LayerSpec::ConvTranspose {
                    in_ch: b,
                    out_ch: a,
                    kh: k,
                    kw: k,
                    stride,
                    padding,
                },
                weights,
                bias: vec![0.0; a],
            };
            let y = Tensor4::new(2, b, cx.shape().2, cx.shape().3, random_values(cx.values().len(), &mut rng))
                .unwrap();
            let ty = conv_transpose2d(&y, &tr).unwrap();
            assert_eq!(ty.shape(), x.shape());
            let lhs: f64 = cx.values().iter().zip(y.values()).map(|(p, q)| p * q).sum();
            let rhs: f64 = x.values().iter().zip(ty.values()).map(|(p, q)| p * q).sum();
            assert!(
                (lhs - rhs).abs() <= 1e-10,
                "adjoint mismatch for k={k} s={stride} p={padding}: {lhs} vs {rhs}"
            );
        }
    }

    // Central-difference check of backward() against a random linear objective.
    fn finite_difference_check(layer: &Layer, x: &Tensor4, seed: u64, tol: f64) {
        let mut rng = SeededRng::new(seed);
        let y = layer.forward(x).unwrap();
        let probe = random_values(y.values().len(), &mut rng);
        let objective = |layer: &Layer, x: &Tensor4| -> f64 {
            layer
                .forward(x)
                .unwrap()
                .values()
                .iter()
                .zip(&probe)
                .map(|(v, p)| v * p)
                .sum()
        };
        let (sy0, sy1, sy2, sy3) = y.shape();
        let dy = Tensor4::new(sy0, sy1, sy2, sy3, probe.clone()).unwrap();
        let (dx, dw, db) = layer.backward(x, &y, &dy);

        let mut worst = 0.0f64;
        let mut check = |analytic: f64, v: f64, mut eval: Box<dyn FnMut(f64) -> f64>| {
            let h = 1e-5 * v.abs().max(1.0);
            let numeric = (eval(v + h) - eval(v - h)) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        };
        for i in 0..x.values().len() {
            let v = x.values()[i];
            let mut xp = x.clone();
            check(
                dx.values()[i],
                v,
                Box::new(move |t| {
                    xp.values_mut()[i] = t;
                    objective(layer, &xp)
                }),
            );
        }
        for i in 0..layer.weights.len() {
            let v = layer.weights[i];
            let mut lp = layer.clone();
            let xr = x.clone();
            check(
                dw[i],
                v,
                Box::new(move |t| {
                    lp.weights[i] = t;
                    objective(&lp, &xr)
                }),
            );
        }
        for i in 0..layer.bias.len() {
            let v = layer.bias[i];
            let mut lp = layer.clone();
            let xr = x.clone();
            check(
                db[i],
                v,
                Box::new(move |t| {
                    lp.bias[i] = t;
                    objective(&lp, &xr)
                }),
            );
        }
        assert!(worst < tol, "max relative gradient error {worst} for {:?}", layer.spec);
    }

    fn random_layer(spec: LayerSpec, rng: &mut SeededRng) -> Layer {
        let mut layer = Layer::new(spec);
        for v in &mut layer.weights {
            *v = rng.next_f64() - 0.5;
        }
        for v in &mut layer.bias {
            *v = rng.next_f64() - 0.5;
        }
        layer
    }

    #[test]
    fn conv_input_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(0xFD01);
        let layer = random_layer(conv_layer(1, 1, 3, 1, 0), &mut rng);
        let x = Tensor4::new(1, 1, 5, 5, random_values(25, &mut rng)).unwrap();
        finite_difference_check(&layer, &x, 0x0B5E, 1e-5);
    }

    #[test]
    fn every_layer_kind_passes_finite_differences() {
        let mut rng = SeededRng::new(0xFD02);
        let strided = random_layer(conv_layer(2, 3, 3, 2, 1), &mut rng);
        let x = Tensor4::new(2, 2, 5, 5, random_values(100, &mut rng)).unwrap();
        finite_difference_check(&strided, &x, 1, 1e-4);

        let transpose = random_layer(
            LayerSpec::ConvTranspose { in_ch: 3, out_ch: 2, kh: 4, kw: 4, stride: 2, padding: 1 },
            &mut rng,
        );
        let x = Tensor4::new(1, 3, 3, 3, random_values(27, &mut rng)).unwrap();
        finite_difference_check(&transpose, &x, 2, 1e-4);

        let dense = random_layer(LayerSpec::Dense { in_dim: 6, out_dim: 4 }, &mut rng);
        let x = Tensor4::new(2, 6, 1, 1, random_values(12, &mut rng)).unwrap();
        finite_difference_check(&dense, &x, 3, 1e-4);

        // Keep relu inputs away from the kink so central differences are valid.
        let relu = Layer::new(LayerSpec::Relu);
        let vals: Vec<f64> = (0..18)
            .map(|_| {
                let m = 0.2 + rng.next_f64();
                if rng.next_f64() < 0.5 {
                    -m
                } else {
                    m
                }
            })
            .collect();
        let x = Tensor4::new(1, 2, 3, 3, vals).unwrap();
        finite_difference_check(&relu, &x, 4, 1e-4);

        let sig = Layer::new(LayerSpec::Sigmoid);
        let x = Tensor4::new(1, 1, 3, 4, random_values(12, &mut rng)).unwrap();
        finite_difference_check(&sig, &x, 5, 1e-4);

        let flat = Layer::new(LayerSpec::Flatten);
        let x = Tensor4::new(2, 2, 2, 2, random_values(16, &mut rng)).unwrap();
        finite_difference_check(&flat, &x, 6, 1e-4);

        let reshape = Layer::new(LayerSpec::Reshape { c: 2, h: 2, w: 2 });
        let x = Tensor4::new(1, 8, 1, 1, random_values(8, &mut rng)).unwrap();
        finite_difference_check(&reshape, &x, 7, 1e-4);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let layer = Layer::new(conv_layer(2, 1, 3, 1, 1));
        let x = Tensor4::zeros(1, 3, 4, 4);
        assert!(conv2d(&x, &layer).is_err());
    }

    #[test]
    fn descriptors_round_trip() {
        let specs = [
            conv_layer(1, 16, 4, 2, 1),
            LayerSpec::ConvTranspose { in_ch: 16, out_ch: 1, kh: 4, kw: 4, stride: 2, padding: 1 },
            LayerSpec::Dense { in_dim: 1024, out_dim: 64 },
            LayerSpec::Relu,
            LayerSpec::Sigmoid,
            LayerSpec::Flatten,
            LayerSpec::Reshape { c: 16, h: 8, w: 8 },
        ];
        for spec in specs {
            assert_eq!(LayerSpec::parse(&spec.describe()).unwrap(), spec);
        }
        assert!(LayerSpec::parse("pooling 2 2").is_err());
        assert!(LayerSpec::parse("conv 1 1 0 0 1 0").is_err());
    }
}
