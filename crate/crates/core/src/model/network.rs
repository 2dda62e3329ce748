//! The toy HOI transformer: strided conv backbone, 1x1 projection, post-norm
//! encoder with fixed 2-D sinusoidal positions, decoder over learnable pair
//! queries, and four prediction heads shared by every decoder layer.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{ModelConfig, BACKBONE_LAYERS};
use super::params::ParamStore;
use super::tape::{ConvGeom, Tape, Var};
use crate::assignment::Prediction;
use crate::error::{Error, Result};
use crate::io::raster::Image;

const PE_TEMPERATURE: f64 = 10000.0;

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gain: usize,
    bias: usize,
}

#[derive(Debug, Clone, Copy)]
struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    attn: Attention,
    ffn1: Linear,
    ffn2: Linear,
    norm1: Norm,
    norm2: Norm,
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    self_attn: Attention,
    cross_attn: Attention,
    ffn1: Linear,
    ffn2: Linear,
    norm1: Norm,
    norm2: Norm,
    norm3: Norm,
}

#[derive(Debug, Clone)]
struct Layout {
    convs: Vec<Linear>,
    proj: Linear,
    encoder: Vec<EncoderLayer>,
    decoder: Vec<DecoderLayer>,
    queries: usize,
    human_box: [Linear; 3],
    object_box: [Linear; 3],
    object_class: Linear,
    action_class: Linear,
}

struct Init {
    store: ParamStore,
    rng: ChaCha8Rng,
}

impl Init {
    /// Weights `U(-bound, bound)` with `bound = sqrt(gain / fan_in)`; zero bias.
    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize, gain: f64) -> Linear {
        let bound = (gain / fan_in as f64).sqrt();
        let rng = &mut self.rng;
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound));
        Linear {
            w: self.store.push(format!("{name}.weight"), w),
            b: self.store.push(format!("{name}.bias"), Array2::zeros((1, fan_out))),
        }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        Norm {
            gain: self.store.push(format!("{name}.gain"), Array2::ones((1, d))),
            bias: self.store.push(format!("{name}.bias"), Array2::zeros((1, d))),
        }
    }

    fn attention(&mut self, name: &str, d: usize) -> Attention {
        Attention {
            q: self.linear(&format!("{name}.q_proj"), d, d, 3.0),
            k: self.linear(&format!("{name}.k_proj"), d, d, 3.0),
            v: self.linear(&format!("{name}.v_proj"), d, d, 3.0),
            o: self.linear(&format!("{name}.out_proj"), d, d, 3.0),
        }
    }
}

/// Head outputs of one decoder layer, before activations.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub human_box: Var,
    pub object_box: Var,
    pub object_class: Var,
    pub action_class: Var,
}

#[derive(Debug, Clone)]
pub struct HoiModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    layout: Layout,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let e: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Fixed 2-D sinusoidal encoding, `(grid_h * grid_w, d_model)`.
///
/// The first half of the channels encode the row, the second half the
/// column; within each half even channels are sines and odd channels cosines.
pub fn positional_encoding(config: &ModelConfig) -> Result<Array2<f64>> {
    let d = config.d_model;
    if !d.is_multiple_of(4) {
        return Err(Error::Config(format!("d_model {d} must be divisible by 4")));
    }
    let (gh, gw) = (config.grid_h, config.grid_w);
    let half = d / 2;
    let freq: Vec<f64> = (0..half)
        .map(|k| PE_TEMPERATURE.powf((2 * (k / 2)) as f64 / half as f64))
        .collect();
    let embed = |i: usize, n: usize| (i as f64 + 1.0) / (n as f64 + 1e-6) * 2.0 * PI;
    Ok(Array2::from_shape_fn((gh * gw, d), |(p, c)| {
        let (y, x) = (p / gw, p % gw);
        let (pos, k) = if c < half {
            (embed(y, gh), c)
        } else {
            (embed(x, gw), c - half)
        };
        let arg = pos / freq[k];
        if k % 2 == 0 {
            arg.sin()
        } else {
            arg.cos()
        }
    }))
}

impl HoiModel {
    /// Build and initialize a model from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let mut init = Init {
            store: ParamStore::default(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };

        let mut convs = Vec::with_capacity(BACKBONE_LAYERS);
        let mut c_in = 3;
        for i in 0..BACKBONE_LAYERS {
            convs.push(init.linear(&format!("backbone.conv{i}"), 9 * c_in, config.backbone_channels, 6.0));
            c_in = config.backbone_channels;
        }
        let proj = init.linear("input_proj", config.backbone_channels, d, 3.0);
        let encoder = (0..config.n_encoder_layers)
            .map(|l| {
                let n = format!("encoder.layers.{l}");
                EncoderLayer {
                    attn: init.attention(&format!("{n}.self_attn"), d),
                    ffn1: init.linear(&format!("{n}.linear1"), d, config.ffn_hidden_dim, 6.0),
                    ffn2: init.linear(&format!("{n}.linear2"), config.ffn_hidden_dim, d, 3.0),
                    norm1: init.norm(&format!("{n}.norm1"), d),
                    norm2: init.norm(&format!("{n}.norm2"), d),
                }
            })
            .collect();
        let decoder = (0..config.n_decoder_layers)
            .map(|l| {
                let n = format!("decoder.layers.{l}");
                DecoderLayer {
                    self_attn: init.attention(&format!("{n}.self_attn"), d),
                    cross_attn: init.attention(&format!("{n}.cross_attn"), d),
                    ffn1: init.linear(&format!("{n}.linear1"), d, config.ffn_hidden_dim, 6.0),
                    ffn2: init.linear(&format!("{n}.linear2"), config.ffn_hidden_dim, d, 3.0),
                    norm1: init.norm(&format!("{n}.norm1"), d),
                    norm2: init.norm(&format!("{n}.norm2"), d),
                    norm3: init.norm(&format!("{n}.norm3"), d),
                }
            })
            .collect();
        let q = {
            let rng = &mut init.rng;
            Array2::from_shape_fn((config.n_queries, d), |_| StandardNormal.sample(rng))
        };
        let queries = init.store.push("query_embed", q);
        let hh = config.head_hidden_dim;
        let box_ffn = |init: &mut Init, name: &str| {
            [
                init.linear(&format!("{name}.layers.0"), d, hh, 6.0),
                init.linear(&format!("{name}.layers.1"), hh, hh, 6.0),
                init.linear(&format!("{name}.layers.2"), hh, 4, 3.0),
            ]
        };
        let human_box = box_ffn(&mut init, "human_box");
        let object_box = box_ffn(&mut init, "object_box");
        let object_class = init.linear("object_class", d, config.n_obj_classes + 1, 3.0);
        let action_class = init.linear("action_class", d, config.n_act_classes, 3.0);

        Ok(Self {
            config,
            params: init.store,
            layout: Layout {
                convs,
                proj,
                encoder,
                decoder,
                queries,
                human_box,
                object_box,
                object_class,
                action_class,
            },
        })
    }

    /// Replace parameters with `params`, which must match names and shapes.
    pub fn with_params(mut self, params: ParamStore) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::shape(
                format!("{} parameters", self.params.len()),
                format!("{} parameters", params.len()),
            ));
        }
        for i in 0..params.len() {
            if params.name(i) != self.params.name(i) || params.value(i).dim() != self.params.value(i).dim() {
                return Err(Error::shape(
                    format!("{} {:?}", self.params.name(i), self.params.value(i).dim()),
                    format!("{} {:?}", params.name(i), params.value(i).dim()),
                ));
            }
        }
        self.params = params;
        Ok(self)
    }

    pub fn n_parameters(&self) -> usize {
        self.params.n_scalars()
    }

    pub fn query_param_index(&self) -> usize {
        self.layout.queries
    }

    fn linear(&self, t: &mut Tape, x: Var, l: Linear) -> Var {
        let w = t.param(l.w);
        let b = t.param(l.b);
        let y = t.matmul(x, w);
        t.add_row(y, b)
    }

    fn norm(&self, t: &mut Tape, x: Var, n: Norm) -> Var {
        let g = t.param(n.gain);
        let b = t.param(n.bias);
        t.layer_norm(x, g, b, self.config.layer_norm_eps)
    }

    fn attention(&self, t: &mut Tape, a: &Attention, q_in: Var, k_in: Var, v_in: Var) -> Var {
        let q = self.linear(t, q_in, a.q);
        let k = self.linear(t, k_in, a.k);
        let v = self.linear(t, v_in, a.v);
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let heads: Vec<Var> = (0..self.config.n_heads)
            .map(|h| {
                let qh = t.slice_cols(q, h * dh, dh);
                let kh = t.slice_cols(k, h * dh, dh);
                let vh = t.slice_cols(v, h * dh, dh);
                let s = t.matmul_nt(qh, kh);
                let s = t.scale(s, scale);
                let w = t.softmax_rows(s);
                t.matmul(w, vh)
            })
            .collect();
        let cat = if heads.len() == 1 {
            heads[0]
        } else {
            t.concat_cols(&heads)
        };
        self.linear(t, cat, a.o)
    }

    fn ffn(&self, t: &mut Tape, x: Var, l1: Linear, l2: Linear) -> Var {
        let h = self.linear(t, x, l1);
        let h = t.relu(h);
        self.linear(t, h, l2)
    }

    fn check_shape(&self, t: &Tape, v: Var, rows: usize, cols: usize, what: &str) -> Result<()> {
        let dim = t.value(v).dim();
        if dim != (rows, cols) {
            return Err(Error::shape(
                format!("{what} {rows}x{cols}"),
                format!("{}x{}", dim.0, dim.1),
            ));
        }
        Ok(())
    }

    /// Backbone feature map `z_b`, `(grid_h * grid_w, backbone_channels)`.
    pub fn backbone_tape(&self, t: &mut Tape, image: Var) -> Result<Var> {
        let c = &self.config;
        self.check_shape(t, image, c.image_h * c.image_w, 3, "image")?;
        let (mut h, mut w, mut ch) = (c.image_h, c.image_w, 3);
        let mut x = image;
        for conv in &self.layout.convs {
            let g = ConvGeom {
                in_h: h,
                in_w: w,
                channels: ch,
                kernel: 3,
                stride: 2,
                pad: 1,
            };
            let cols = t.im2col(x, g);
            let y = self.linear(t, cols, *conv);
            x = t.relu(y);
            h = g.out_h();
            w = g.out_w();
            ch = c.backbone_channels;
        }
        Ok(x)
    }

    pub fn encoder_tape(&self, t: &mut Tape, z_c: Var, pos: Var) -> Result<Var> {
        let c = &self.config;
        self.check_shape(t, z_c, c.n_tokens(), c.d_model, "projected features")?;
        self.check_shape(t, pos, c.n_tokens(), c.d_model, "positional encoding")?;
        let mut src = z_c;
        for layer in &self.layout.encoder {
            let qk = t.add(src, pos);
            let a = self.attention(t, &layer.attn, qk, qk, src);
            let s = t.add(src, a);
            src = self.norm(t, s, layer.norm1);
            let f = self.ffn(t, src, layer.ffn1, layer.ffn2);
            let s = t.add(src, f);
            src = self.norm(t, s, layer.norm2);
        }
        Ok(src)
    }

    /// Decoder embeddings of every layer, each `(n_queries, d_model)`.
    pub fn decoder_tape(&self, t: &mut Tape, memory: Var, pos: Var, queries: Var) -> Result<Vec<Var>> {
        let c = &self.config;
        self.check_shape(t, memory, c.n_tokens(), c.d_model, "encoder output")?;
        self.check_shape(t, pos, c.n_tokens(), c.d_model, "positional encoding")?;
        self.check_shape(t, queries, c.n_queries, c.d_model, "queries")?;
        let mem_k = t.add(memory, pos);
        let mut tgt = t.constant(Array2::zeros((c.n_queries, c.d_model)));
        let mut outs = Vec::with_capacity(self.layout.decoder.len());
        for layer in &self.layout.decoder {
            let qk = t.add(tgt, queries);
            let a = self.attention(t, &layer.self_attn, qk, qk, tgt);
            let s = t.add(tgt, a);
            tgt = self.norm(t, s, layer.norm1);
            let q = t.add(tgt, queries);
            let a = self.attention(t, &layer.cross_attn, q, mem_k, memory);
            let s = t.add(tgt, a);
            tgt = self.norm(t, s, layer.norm2);
            let f = self.ffn(t, tgt, layer.ffn1, layer.ffn2);
            let s = t.add(tgt, f);
            tgt = self.norm(t, s, layer.norm3);
            outs.push(tgt);
        }
        Ok(outs)
    }

    pub fn heads_tape(&self, t: &mut Tape, emb: Var) -> HeadVars {
        let box_ffn = |t: &mut Tape, layers: &[Linear; 3]| {
            let h = self.linear(t, emb, layers[0]);
            let h = t.relu(h);
            let h = self.linear(t, h, layers[1]);
            let h = t.relu(h);
            self.linear(t, h, layers[2])
        };
        HeadVars {
            human_box: box_ffn(t, &self.layout.human_box),
            object_box: box_ffn(t, &self.layout.object_box),
            object_class: self.linear(t, emb, self.layout.object_class),
            action_class: self.linear(t, emb, self.layout.action_class),
        }
    }

    /// Full forward pass on the tape; head outputs for every decoder layer.
    pub fn forward_tape(&self, t: &mut Tape, image: &Image) -> Result<Vec<HeadVars>> {
        let c = &self.config;
        if (image.channels, image.height, image.width) != (3, c.image_h, c.image_w) {
            return Err(Error::shape(
                format!("3x{}x{} image", c.image_h, c.image_w),
                format!("{}x{}x{}", image.channels, image.height, image.width),
            ));
        }
        let x = t.constant(image.to_tokens());
        let z_b = self.backbone_tape(t, x)?;
        let z_c = self.linear(t, z_b, self.layout.proj);
        let pos = t.constant(positional_encoding(c)?);
        let z_e = self.encoder_tape(t, z_c, pos)?;
        let queries = t.param(self.layout.queries);
        let layers = self.decoder_tape(t, z_e, pos, queries)?;
        Ok(layers.into_iter().map(|emb| self.heads_tape(t, emb)).collect())
    }

    /// Per-decoder-layer predictions; the last layer is the inference output.
    pub fn forward(&self, image: &Image) -> Result<Vec<Vec<Prediction>>> {
        let mut t = Tape::new(&self.params);
        let heads = self.forward_tape(&mut t, image)?;
        Ok(heads.iter().map(|h| predictions_from_heads(&t, h)).collect())
    }

    /// Final-layer predictions.
    pub fn predict(&self, image: &Image) -> Result<Vec<Prediction>> {
        let mut layers = self.forward(image)?;
        Ok(layers.pop().unwrap_or_default())
    }

    /// Backbone output for a token matrix `(image_h * image_w, 3)`.
    pub fn backbone_forward(&self, image_tokens: &Array2<f64>) -> Result<Array2<f64>> {
        let mut t = Tape::new(&self.params);
        let x = t.constant(image_tokens.clone());
        let z = self.backbone_tape(&mut t, x)?;
        Ok(t.value(z).clone())
    }

    pub fn encoder_forward(&self, z_c: &Array2<f64>, pos: &Array2<f64>) -> Result<Array2<f64>> {
        let mut t = Tape::new(&self.params);
        let (z, p) = (t.constant(z_c.clone()), t.constant(pos.clone()));
        let out = self.encoder_tape(&mut t, z, p)?;
        Ok(t.value(out).clone())
    }

    pub fn decoder_forward(
        &self,
        z_e: &Array2<f64>,
        pos: &Array2<f64>,
        queries: &Array2<f64>,
    ) -> Result<Vec<Array2<f64>>> {
        let mut t = Tape::new(&self.params);
        let (z, p, q) = (
            t.constant(z_e.clone()),
            t.constant(pos.clone()),
            t.constant(queries.clone()),
        );
        let outs = self.decoder_tape(&mut t, z, p, q)?;
        Ok(outs.into_iter().map(|v| t.value(v).clone()).collect())
    }

    pub fn heads_forward(&self, embeddings: &Array2<f64>) -> Result<Vec<Prediction>> {
        let c = &self.config;
        if embeddings.ncols() != c.d_model {
            return Err(Error::shape(format!("{} columns", c.d_model), embeddings.ncols()));
        }
        let mut t = Tape::new(&self.params);
        let e = t.constant(embeddings.clone());
        let h = self.heads_tape(&mut t, e);
        Ok(predictions_from_heads(&t, &h))
    }
}

/// Apply the sigmoid/softmax output activations.
pub fn predictions_from_heads(t: &Tape, h: &HeadVars) -> Vec<Prediction> {
    let (hb, ob, oc, ac) = (
        t.value(h.human_box),
        t.value(h.object_box),
        t.value(h.object_class),
        t.value(h.action_class),
    );
    (0..hb.nrows())
        .map(|i| {
            let bx = |m: &Array2<f64>| crate::geometry::NormBox::from_array([0, 1, 2, 3].map(|k| sigmoid(m[[i, k]])));
            Prediction {
                human_box: bx(hb),
                object_box: bx(ob),
                object_probs: softmax(&oc.row(i).to_vec()),
                action_probs: ac.row(i).iter().map(|&z| sigmoid(z)).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(seed: u64, c: &ModelConfig) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = Image::new(3, c.image_h, c.image_w);
        img.data.iter_mut().for_each(|v| *v = rng.random());
        img
    }

    #[test]
    fn positional_encoding_properties() {
        let mut c = ModelConfig::desk();
        c.grid_h = 8;
        c.grid_w = 8;
        let p = positional_encoding(&c).unwrap();
        assert_eq!(p.dim(), (64, 32));
        assert!(p.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(p, positional_encoding(&c).unwrap());
        for a in 0..64 {
            for b in (a + 1)..64 {
                let dist: f64 = p.row(a).iter().zip(p.row(b).iter()).map(|(x, y)| (x - y).powi(2)).sum();
                assert!(dist > 1e-6, "positions {a} and {b} collide");
            }
        }
        c.d_model = 30;
        assert!(positional_encoding(&c).is_err());
    }

    #[test]
    fn backbone_shape_linearity_and_determinism() {
        let c = ModelConfig::tiny();
        let m = HoiModel::new(c.clone()).unwrap();
        let zero = Array2::zeros((c.image_h * c.image_w, 3));
        let z = m.backbone_forward(&zero).unwrap();
        assert_eq!(z.dim(), (c.n_tokens(), c.backbone_channels));
        assert!(z.iter().all(|&v| v == 0.0));
        let img = random_image(1, &c).to_tokens();
        assert_eq!(m.backbone_forward(&img).unwrap(), m.backbone_forward(&img).unwrap());
        assert!(m.backbone_forward(&Array2::zeros((10, 3))).is_err());
    }

    #[test]
    fn encoder_shape_and_identity() {
        let mut c = ModelConfig::tiny();
        let m = HoiModel::new(c.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = Array2::from_shape_fn((c.n_tokens(), c.d_model), |_| rng.random_range(-1.0..1.0));
        let p = positional_encoding(&c).unwrap();
        assert_eq!(m.encoder_forward(&z, &p).unwrap().dim(), z.dim());
        c.n_encoder_layers = 0;
        let m0 = HoiModel::new(c).unwrap();
        assert_eq!(m0.encoder_forward(&z, &p).unwrap(), z);
    }

    #[test]
    fn encoder_is_permutation_equivariant() {
        let mut c = ModelConfig::tiny();
        c.image_h = 16;
        c.image_w = 16;
        c.grid_h = 2;
        c.grid_w = 2;
        let m = HoiModel::new(c.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Array2::from_shape_fn((4, c.d_model), |_| rng.random_range(-1.0..1.0));
        let p = positional_encoding(&c).unwrap();
        let perm = [2usize, 0, 3, 1];
        let permute = |a: &Array2<f64>| Array2::from_shape_fn(a.dim(), |(i, j)| a[[perm[i], j]]);
        let out = m.encoder_forward(&z, &p).unwrap();
        let out_p = m.encoder_forward(&permute(&z), &permute(&p)).unwrap();
        let want = permute(&out);
        assert!(out_p.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn decoder_layers_and_query_equivariance() {
        let mut c = ModelConfig::tiny();
        c.n_decoder_layers = 2;
        let m = HoiModel::new(c.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = Array2::from_shape_fn((c.n_tokens(), c.d_model), |_| rng.random_range(-1.0..1.0));
        let q = Array2::from_shape_fn((c.n_queries, c.d_model), |_| rng.random_range(-1.0..1.0));
        let p = positional_encoding(&c).unwrap();
        let outs = m.decoder_forward(&z, &p, &q).unwrap();
        assert_eq!(outs.len(), 2);
        assert!(outs.iter().all(|o| o.dim() == (c.n_queries, c.d_model)));
        let perm = [3usize, 1, 0, 2];
        let permute = |a: &Array2<f64>| Array2::from_shape_fn(a.dim(), |(i, j)| a[[perm[i], j]]);
        let outs_p = m.decoder_forward(&z, &p, &permute(&q)).unwrap();
        for (o, op) in outs.iter().zip(&outs_p) {
            let want = permute(o);
            assert!(op.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn heads_output_ranges_and_zero_case() {
        let c = ModelConfig::tiny();
        let mut m = HoiModel::new(c.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let e = Array2::from_shape_fn((c.n_queries, c.d_model), |_| rng.random_range(-3.0..3.0));
        for p in m.heads_forward(&e).unwrap() {
            p.validate().unwrap();
            assert!(p
                .human_box
                .to_array()
                .iter()
                .chain(p.object_box.to_array().iter())
                .all(|v| (0.0..=1.0).contains(v)));
        }
        for i in 0..m.params.len() {
            let name = m.params.name(i).to_owned();
            if ["human_box", "object_box", "object_class", "action_class"]
                .iter()
                .any(|h| name.starts_with(h))
            {
                m.params.value_mut(i).fill(0.0);
            }
        }
        let zero = Array2::zeros((c.n_queries, c.d_model));
        for p in m.heads_forward(&zero).unwrap() {
            assert_eq!(p.human_box.to_array(), [0.5; 4]);
            assert_eq!(p.object_box.to_array(), [0.5; 4]);
            assert!(p.object_probs.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
            assert_eq!(p.action_probs, vec![0.5; 3]);
        }
    }

    #[test]
    fn forward_contract() {
        let c = ModelConfig::desk();
        let m = HoiModel::new(c.clone()).unwrap();
        let img = random_image(2, &c);
        let out = m.forward(&img).unwrap();
        assert_eq!(out.len(), c.n_decoder_layers);
        assert!(out.iter().all(|l| l.len() == c.n_queries));
        out.iter().flatten().for_each(|p| p.validate().unwrap());
        assert_eq!(out, m.forward(&img).unwrap());
        assert!(m.forward(&Image::new(3, 8, 8)).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a = HoiModel::new(ModelConfig::tiny()).unwrap();
        let b = HoiModel::new(ModelConfig::tiny()).unwrap();
        assert_eq!(a.params, b.params);
        let mut c = ModelConfig::tiny();
        c.seed = 1;
        assert_ne!(a.params, HoiModel::new(c).unwrap().params);
    }
}
