//! Per-view networks: encoder, mirrored decoder, unit-norm projector and
//! softmax classifier head.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::math::{
    l2_normalize_backward, l2_normalize_rows, relu_backward, relu_forward, softmax_backward,
    softmax_rows, Affine, Matrix, Parameter, Parameterized,
};
use crate::rng::{stream_rng_at, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub hidden: usize,
    pub latent: usize,
    pub projection: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: 256,
            latent: 64,
            projection: 64,
        }
    }
}

/// One view's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewModel {
    pub encoder: [Affine; 2],
    pub decoder: [Affine; 2],
    pub projector: Affine,
    pub classifier: Affine,
}

/// Projected embeddings plus what the backward pass needs.
#[derive(Clone, Debug)]
pub struct Projection {
    pub pre: Matrix,
    pub z: Matrix,
    pub norms: Vec<f64>,
    /// Rows whose pre-normalization norm was below 1e-12 (left as zeros).
    pub degenerate: usize,
}

/// Activations cached by [`ViewModel::forward`].
#[derive(Clone, Debug)]
pub struct ViewForward {
    pub x: Matrix,
    pub enc_pre: Matrix,
    pub enc_hidden: Matrix,
    pub e: Matrix,
    pub dec_pre: Matrix,
    pub dec_hidden: Matrix,
    pub x_hat: Matrix,
    pub projection: Projection,
    pub y: Matrix,
}

/// Upstream gradients for the heads of one view; `None` means zero.
#[derive(Clone, Debug, Default)]
pub struct HeadGrads {
    pub x_hat: Option<Matrix>,
    pub z: Option<Matrix>,
    /// Gradient with respect to the classifier's probabilities.
    pub y: Option<Matrix>,
}

impl ViewModel {
    pub fn new(input_dim: usize, num_clusters: usize, arch: Architecture, seed: u64, view: usize) -> Self {
        let mut rng = stream_rng_at(seed, Stream::Init, view as u64);
        Self {
            encoder: [
                Affine::new(input_dim, arch.hidden, &mut rng),
                Affine::new(arch.hidden, arch.latent, &mut rng),
            ],
            decoder: [
                Affine::new(arch.latent, arch.hidden, &mut rng),
                Affine::new(arch.hidden, input_dim, &mut rng),
            ],
            projector: Affine::new(arch.latent, arch.projection, &mut rng),
            classifier: Affine::new(arch.latent, num_clusters, &mut rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder[1].out_dim()
    }

    pub fn num_clusters(&self) -> usize {
        self.classifier.out_dim()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("encode", x.shape(), (x.rows(), self.input_dim())));
        }
        Ok(())
    }

    fn check_latent(&self, e: &Matrix, op: &'static str) -> Result<()> {
        if e.cols() != self.latent_dim() {
            return Err(Error::dim(op, e.shape(), (e.rows(), self.latent_dim())));
        }
        Ok(())
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let h = relu_forward(&self.encoder[0].forward(x)?);
        self.encoder[1].forward(&h)
    }

    pub fn decode(&self, e: &Matrix) -> Result<Matrix> {
        self.check_latent(e, "decode")?;
        let h = relu_forward(&self.decoder[0].forward(e)?);
        self.decoder[1].forward(&h)
    }

    pub fn project(&self, e: &Matrix) -> Result<Projection> {
        self.check_latent(e, "project")?;
        let pre = self.projector.forward(e)?;
        let (z, norms, degenerate) = l2_normalize_rows(&pre);
        Ok(Projection {
            pre,
            z,
            norms,
            degenerate,
        })
    }

    pub fn classify(&self, e: &Matrix) -> Result<Matrix> {
        self.check_latent(e, "classify")?;
        Ok(softmax_rows(&self.classifier.forward(e)?))
    }

    /// Runs all four heads and keeps the activations for [`Self::backward`].
    pub fn forward(&self, x: &Matrix) -> Result<ViewForward> {
        self.check_input(x)?;
        let enc_pre = self.encoder[0].forward(x)?;
        let enc_hidden = relu_forward(&enc_pre);
        let e = self.encoder[1].forward(&enc_hidden)?;
        let dec_pre = self.decoder[0].forward(&e)?;
        let dec_hidden = relu_forward(&dec_pre);
        let x_hat = self.decoder[1].forward(&dec_hidden)?;
        let projection = self.project(&e)?;
        let y = self.classify(&e)?;
        Ok(ViewForward {
            x: x.clone(),
            enc_pre,
            enc_hidden,
            e,
            dec_pre,
            dec_hidden,
            x_hat,
            projection,
            y,
        })
    }

    /// Accumulates parameter gradients for the given head gradients.
    pub fn backward(&mut self, cache: &ViewForward, grads: &HeadGrads) -> Result<()> {
        let mut de = Matrix::zeros(cache.e.rows(), cache.e.cols());
        if let Some(g) = &grads.x_hat {
            let dh = self.decoder[1].backward(g, &cache.dec_hidden)?;
            let dpre = relu_backward(&dh, &cache.dec_pre)?;
            de.add_assign(&self.decoder[0].backward(&dpre, &cache.e)?)?;
        }
        if let Some(g) = &grads.z {
            let p = &cache.projection;
            let dpre = l2_normalize_backward(g, &p.z, &p.norms)?;
            de.add_assign(&self.projector.backward(&dpre, &cache.e)?)?;
        }
        if let Some(g) = &grads.y {
            let dlogits = softmax_backward(g, &cache.y)?;
            de.add_assign(&self.classifier.backward(&dlogits, &cache.e)?)?;
        }
        if grads.x_hat.is_none() && grads.z.is_none() && grads.y.is_none() {
            return Ok(());
        }
        let dh = self.encoder[1].backward(&de, &cache.enc_hidden)?;
        let dpre = relu_backward(&dh, &cache.enc_pre)?;
        self.encoder[0].backward(&dpre, &cache.x)?;
        Ok(())
    }

    fn layers(&self) -> [(&'static str, &Affine); 6] {
        [
            ("encoder.0", &self.encoder[0]),
            ("encoder.1", &self.encoder[1]),
            ("decoder.0", &self.decoder[0]),
            ("decoder.1", &self.decoder[1]),
            ("projector", &self.projector),
            ("classifier", &self.classifier),
        ]
    }
}

impl Parameterized for ViewModel {
    fn parameters(&self) -> Vec<&Parameter> {
        self.layers()
            .into_iter()
            .flat_map(|(_, l)| l.parameters())
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let [e0, e1] = &mut self.encoder;
        let [d0, d1] = &mut self.decoder;
        [e0, e1, d0, d1, &mut self.projector, &mut self.classifier]
            .into_iter()
            .flat_map(|l| l.parameters_mut())
            .collect()
    }
}

/// One [`ViewModel`] per view, in view order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub views: Vec<ViewModel>,
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"RMVCCKPT";
const CHECKPOINT_VERSION: u32 = 1;

impl ModelBundle {
    pub fn new(view_dims: &[usize], num_clusters: usize, arch: Architecture, seed: u64) -> Self {
        Self {
            views: view_dims
                .iter()
                .enumerate()
                .map(|(v, &d)| ViewModel::new(d, num_clusters, arch, seed, v))
                .collect(),
        }
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    /// `(name, value)` for every parameter, e.g. `view2.projector.weight`.
    pub fn named_parameters(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (v, vm) in self.views.iter().enumerate() {
            for (layer, affine) in vm.layers() {
                out.push((format!("view{}.{layer}.weight", v + 1), &affine.weight.value));
                out.push((format!("view{}.{layer}.bias", v + 1), &affine.bias.value));
            }
        }
        out
    }

    /// Serializes all parameters: magic, version, count, then per array a
    /// length-prefixed UTF-8 name, rows, cols and little-endian `f64`s.
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let named = self.named_parameters();
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(named.len() as u32).to_le_bytes());
        for (name, m) in named {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.to_checkpoint_bytes())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let arrays = read_named_arrays(bytes)?;
        let mut views: Vec<ViewModel> = Vec::new();
        let mut it = arrays.into_iter();
        let mut v = 0;
        loop {
            let mut layers = Vec::with_capacity(6);
            for layer in ["encoder.0", "encoder.1", "decoder.0", "decoder.1", "projector", "classifier"] {
                let Some((wname, w)) = it.next() else {
                    if layer == "encoder.0" && v > 0 {
                        return finish(views);
                    }
                    return Err(Error::Checkpoint(format!("truncated at view{} {layer}", v + 1)));
                };
                let (bname, b) = it
                    .next()
                    .ok_or_else(|| Error::Checkpoint(format!("missing bias for {wname}")))?;
                let expect_w = format!("view{}.{layer}.weight", v + 1);
                let expect_b = format!("view{}.{layer}.bias", v + 1);
                if wname != expect_w || bname != expect_b {
                    return Err(Error::Checkpoint(format!(
                        "expected {expect_w}/{expect_b}, found {wname}/{bname}"
                    )));
                }
                if b.shape() != (1, w.cols()) {
                    return Err(Error::Checkpoint(format!("{bname} has shape {:?}", b.shape())));
                }
                layers.push(Affine {
                    weight: Parameter::new(w),
                    bias: Parameter::new(b),
                });
            }
            let mut l = layers.into_iter();
            let mut next = || l.next().expect("six layers");
            views.push(ViewModel {
                encoder: [next(), next()],
                decoder: [next(), next()],
                projector: next(),
                classifier: next(),
            });
            v += 1;
        }

        fn finish(views: Vec<ViewModel>) -> Result<ModelBundle> {
            for (v, vm) in views.iter().enumerate() {
                let chain = [
                    (vm.encoder[0].out_dim(), vm.encoder[1].in_dim()),
                    (vm.encoder[1].out_dim(), vm.decoder[0].in_dim()),
                    (vm.decoder[0].out_dim(), vm.decoder[1].in_dim()),
                    (vm.decoder[1].out_dim(), vm.encoder[0].in_dim()),
                    (vm.encoder[1].out_dim(), vm.projector.in_dim()),
                    (vm.encoder[1].out_dim(), vm.classifier.in_dim()),
                ];
                if chain.iter().any(|(a, b)| a != b) {
                    return Err(Error::Checkpoint(format!("view{} layer widths do not chain", v + 1)));
                }
            }
            Ok(ModelBundle { views })
        }
    }
}

fn read_named_arrays(bytes: &[u8]) -> Result<Vec<(String, Matrix)>> {
    struct Reader<'a> {
        bytes: &'a [u8],
        pos: usize,
    }
    impl Reader<'_> {
        fn take(&mut self, n: usize) -> Result<&[u8]> {
            let end = self
                .pos
                .checked_add(n)
                .filter(|&e| e <= self.bytes.len())
                .ok_or_else(|| Error::Checkpoint(format!("unexpected end of data at byte {}", self.pos)))?;
            let s = &self.bytes[self.pos..end];
            self.pos = end;
            Ok(s)
        }
        fn u32(&mut self) -> Result<u32> {
            Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
        }
        fn u64(&mut self) -> Result<u64> {
            Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
        }
    }

    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflow")))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(out)
}

impl Parameterized for ModelBundle {
    fn parameters(&self) -> Vec<&Parameter> {
        self.views.iter().flat_map(|v| v.parameters()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.views.iter_mut().flat_map(|v| v.parameters_mut()).collect()
    }
}
