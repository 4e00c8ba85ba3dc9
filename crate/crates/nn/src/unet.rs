use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::{Act, ConvSpec, Graph, NormSpec, ParamId, Var};
use crate::real::{Precision, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UNetConfig {
    #[serde(default = "d_in")]
    pub in_channels: usize,
    #[serde(default = "d_out")]
    pub out_channels: usize,
    #[serde(default = "d_base")]
    pub base_width: usize,
    #[serde(default = "d_mults")]
    pub channel_mults: Vec<usize>,
    #[serde(default = "d_blocks")]
    pub blocks_per_level: usize,
    #[serde(default = "d_groups")]
    pub groups: usize,
    #[serde(default = "d_temb")]
    pub time_embed_dim: usize,
    #[serde(default = "d_prec")]
    pub precision: Precision,
    /// Self-attention at the bottleneck. Not implemented; must stay off.
    #[serde(default)]
    pub attention: bool,
}

fn d_in() -> usize {
    4
}
fn d_out() -> usize {
    2
}
fn d_base() -> usize {
    16
}
fn d_mults() -> Vec<usize> {
    vec![1, 2, 4]
}
fn d_blocks() -> usize {
    2
}
fn d_groups() -> usize {
    4
}
fn d_temb() -> usize {
    64
}
fn d_prec() -> Precision {
    Precision::F32
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            in_channels: d_in(),
            out_channels: d_out(),
            base_width: d_base(),
            channel_mults: d_mults(),
            blocks_per_level: d_blocks(),
            groups: d_groups(),
            time_embed_dim: d_temb(),
            precision: d_prec(),
            attention: false,
        }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NnError::Shape(m));
        if self.attention {
            return bad("attention blocks are not supported".into());
        }
        if self.in_channels == 0 || self.out_channels == 0 || self.base_width == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.channel_mults.is_empty() || self.channel_mults.contains(&0) {
            return bad("channel_mults must be non-empty and positive".into());
        }
        if self.groups == 0 {
            return bad("groups must be positive".into());
        }
        for &m in &self.channel_mults {
            if !(m * self.base_width).is_multiple_of(self.groups) {
                return bad(format!(
                    "width {} not divisible by {} groups",
                    m * self.base_width,
                    self.groups
                ));
            }
        }
        if self.time_embed_dim < 2 || !self.time_embed_dim.is_multiple_of(2) {
            return bad("time_embed_dim must be even and >= 2".into());
        }
        Ok(())
    }

    /// Side length must be divisible by this.
    pub fn size_multiple(&self) -> usize {
        1 << (self.channel_mults.len() - 1)
    }
}

#[derive(Debug, Clone)]
struct ResBlock {
    norm1: NormSpec,
    conv1: ConvSpec,
    temb: ConvSpec,
    norm2: NormSpec,
    conv2: ConvSpec,
    skip: Option<ConvSpec>,
}

#[derive(Debug, Clone)]
struct Layout {
    temb1: ConvSpec,
    temb2: ConvSpec,
    in_conv: ConvSpec,
    down: Vec<(Vec<ResBlock>, Option<ConvSpec>)>,
    mid: Vec<ResBlock>,
    up: Vec<(Vec<ResBlock>, Option<ConvSpec>)>,
    out_norm: NormSpec,
    out_conv: ConvSpec,
}

/// Parameter shapes recorded while building the layout.
struct Builder {
    names: Vec<String>,
    sizes: Vec<usize>,
    kinds: Vec<Init>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// Uniform in `+-1/sqrt(fan_in)`.
    FanIn(usize),
    Zero,
    One,
}

impl Builder {
    fn param(&mut self, name: String, size: usize, init: Init) -> ParamId {
        self.names.push(name);
        self.sizes.push(size);
        self.kinds.push(init);
        self.names.len() - 1
    }

    fn conv(&mut self, name: &str, ci: usize, co: usize, k: usize, stride: usize) -> ConvSpec {
        let fan = ci * k * k;
        let w = self.param(format!("{name}.w"), co * fan, Init::FanIn(fan));
        let bias = self.param(format!("{name}.b"), co, Init::FanIn(fan));
        ConvSpec {
            w,
            bias,
            ci,
            co,
            k,
            stride,
        }
    }

    fn norm(&mut self, name: &str, ch: usize, groups: usize) -> NormSpec {
        let gamma = self.param(format!("{name}.gamma"), ch, Init::One);
        let beta = self.param(format!("{name}.beta"), ch, Init::Zero);
        NormSpec {
            gamma,
            beta,
            ch,
            groups,
        }
    }

    fn resblock(&mut self, name: &str, ci: usize, co: usize, temb: usize, groups: usize) -> ResBlock {
        ResBlock {
            norm1: self.norm(&format!("{name}.norm1"), ci, groups),
            conv1: self.conv(&format!("{name}.conv1"), ci, co, 3, 1),
            temb: self.conv(&format!("{name}.temb"), temb, co, 1, 1),
            norm2: self.norm(&format!("{name}.norm2"), co, groups),
            conv2: self.conv(&format!("{name}.conv2"), co, co, 3, 1),
            skip: (ci != co).then(|| self.conv(&format!("{name}.skip"), ci, co, 1, 1)),
        }
    }
}

/// Noise-prediction U-Net with circular padding and no attention.
#[derive(Debug, Clone)]
pub struct UNet<F: Real> {
    pub config: UNetConfig,
    pub params: Vec<Vec<F>>,
    names: Vec<String>,
    layout: Layout,
}

fn build_layout(cfg: &UNetConfig) -> (Layout, Builder) {
    let mut b = Builder {
        names: Vec::new(),
        sizes: Vec::new(),
        kinds: Vec::new(),
    };
    let (g, te) = (cfg.groups, cfg.time_embed_dim);
    let temb1 = b.conv("time.lin1", te, te, 1, 1);
    let temb2 = b.conv("time.lin2", te, te, 1, 1);
    let c0 = cfg.base_width;
    let in_conv = b.conv("in_conv", cfg.in_channels, c0, 3, 1);
    let levels = cfg.channel_mults.len();
    let mut skips = vec![c0];
    let mut ch = c0;
    let mut down = Vec::new();
    for (lvl, &m) in cfg.channel_mults.iter().enumerate() {
        let co = m * c0;
        let mut blocks = Vec::new();
        for i in 0..cfg.blocks_per_level {
            blocks.push(b.resblock(&format!("down{lvl}.{i}"), ch, co, te, g));
            ch = co;
            skips.push(ch);
        }
        let ds = (lvl + 1 < levels).then(|| {
            let d = b.conv(&format!("down{lvl}.ds"), ch, ch, 3, 2);
            skips.push(ch);
            d
        });
        down.push((blocks, ds));
    }
    let mid = vec![b.resblock("mid.0", ch, ch, te, g), b.resblock("mid.1", ch, ch, te, g)];
    let mut up = Vec::new();
    for (lvl, &m) in cfg.channel_mults.iter().enumerate().rev() {
        let co = m * c0;
        let mut blocks = Vec::new();
        for i in 0..=cfg.blocks_per_level {
            let sc = skips.pop().expect("skip stack");
            blocks.push(b.resblock(&format!("up{lvl}.{i}"), ch + sc, co, te, g));
            ch = co;
        }
        let us = (lvl > 0).then(|| b.conv(&format!("up{lvl}.us"), ch, ch, 3, 1));
        up.push((blocks, us));
    }
    assert!(skips.is_empty());
    let out_norm = b.norm("out.norm", ch, g);
    let out_conv = b.conv("out.conv", ch, cfg.out_channels, 3, 1);
    let (ow, ob) = (out_conv.w, out_conv.bias);
    b.kinds[ow] = Init::Zero;
    b.kinds[ob] = Init::Zero;
    (
        Layout {
            temb1,
            temb2,
            in_conv,
            down,
            mid,
            up,
            out_norm,
            out_conv,
        },
        b,
    )
}

/// Sinusoidal embedding of (possibly fractional) timesteps, `[D][B][1][1]`.
pub fn timestep_embedding<F: Real>(t: &[f64], dim: usize) -> Act<F> {
    let half = dim / 2;
    let nb = t.len();
    let mut e = Act::zeros(dim, nb, 1, 1);
    for k in 0..half {
        let freq = (-(10000f64).ln() * k as f64 / half as f64).exp();
        for (b, &tb) in t.iter().enumerate() {
            e.data[k * nb + b] = F::of((tb * freq).sin());
            e.data[(half + k) * nb + b] = F::of((tb * freq).cos());
        }
    }
    e
}

impl<F: Real> UNet<F> {
    pub fn new(config: UNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.precision != F::PRECISION {
            return Err(NnError::Shape(format!(
                "config precision {:?} does not match element type {:?}",
                config.precision,
                F::PRECISION
            )));
        }
        let (layout, b) = build_layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = b
            .sizes
            .iter()
            .zip(&b.kinds)
            .map(|(&n, &kind)| match kind {
                Init::Zero => vec![F::zero(); n],
                Init::One => vec![F::one(); n],
                Init::FanIn(fan) => {
                    let bound = 1.0 / (fan as f64).sqrt();
                    (0..n).map(|_| F::of(rng.random_range(-bound..bound))).collect()
                }
            })
            .collect();
        Ok(UNet {
            config,
            params,
            names: b.names,
            layout,
        })
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    /// Replaces every parameter tensor; shapes must match.
    pub fn set_params(&mut self, params: Vec<Vec<F>>) -> Result<()> {
        if params.len() != self.params.len()
            || params.iter().zip(&self.params).any(|(a, b)| a.len() != b.len())
        {
            return Err(NnError::Shape("parameter shapes do not match the network".into()));
        }
        self.params = params;
        Ok(())
    }

    fn check_input(&self, x: &[F], batch: usize, side: usize, t: &[f64]) -> Result<()> {
        let want = batch * self.config.in_channels * side * side;
        if x.len() != want || t.len() != batch {
            return Err(NnError::Shape(format!(
                "input has {} values / {} timesteps, expected {} / {}",
                x.len(),
                t.len(),
                want,
                batch
            )));
        }
        if side == 0 || !side.is_multiple_of(self.config.size_multiple()) {
            return Err(NnError::Shape(format!(
                "side {side} not divisible by {}",
                self.config.size_multiple()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || t.iter().any(|v| !v.is_finite()) {
            return Err(NnError::Numeric("non-finite network input".into()));
        }
        Ok(())
    }

    fn resblock(g: &mut Graph<'_, F>, blk: &ResBlock, x: Var, temb: Var) -> Var {
        let h = g.group_norm(x, blk.norm1);
        let h = g.silu(h);
        let h = g.conv(h, blk.conv1);
        let e = g.conv(temb, blk.temb);
        let h = g.add_broadcast(h, e);
        let h = g.group_norm(h, blk.norm2);
        let h = g.silu(h);
        let h = g.conv(h, blk.conv2);
        let s = match blk.skip {
            Some(sk) => g.conv(x, sk),
            None => x,
        };
        g.add(h, s)
    }

    fn record<'a>(&'a self, x: &[F], batch: usize, side: usize, t: &[f64]) -> (Graph<'a, F>, Var) {
        let l = &self.layout;
        let cin = self.config.in_channels;
        let plane = side * side;
        let mut input = Act::zeros(cin, batch, side, side);
        for b in 0..batch {
            for c in 0..cin {
                input.data[(c * batch + b) * plane..(c * batch + b + 1) * plane]
                    .copy_from_slice(&x[(b * cin + c) * plane..(b * cin + c + 1) * plane]);
            }
        }
        let mut g = Graph::new(&self.params);
        let temb = g.input(timestep_embedding(t, self.config.time_embed_dim));
        let temb = g.conv(temb, l.temb1);
        let temb = g.silu(temb);
        let temb = g.conv(temb, l.temb2);
        let temb = g.silu(temb);

        let xin = g.input(input);
        let mut h = g.conv(xin, l.in_conv);
        let mut skips = vec![h];
        for (blocks, ds) in &l.down {
            for blk in blocks {
                h = Self::resblock(&mut g, blk, h, temb);
                skips.push(h);
            }
            if let Some(d) = ds {
                h = g.conv(h, *d);
                skips.push(h);
            }
        }
        for blk in &l.mid {
            h = Self::resblock(&mut g, blk, h, temb);
        }
        for (blocks, us) in &l.up {
            for blk in blocks {
                let s = skips.pop().expect("skip stack");
                let cat = g.concat(h, s);
                h = Self::resblock(&mut g, blk, cat, temb);
            }
            if let Some(u) = us {
                h = g.upsample(h);
                h = g.conv(h, *u);
            }
        }
        let h = g.group_norm(h, l.out_norm);
        let h = g.silu(h);
        let out = g.conv(h, l.out_conv);
        (g, out)
    }

    fn to_sample_major(act: &Act<F>) -> Vec<F> {
        let plane = act.plane();
        let mut out = vec![F::zero(); act.data.len()];
        for b in 0..act.b {
            for c in 0..act.c {
                out[(b * act.c + c) * plane..(b * act.c + c + 1) * plane]
                    .copy_from_slice(&act.data[(c * act.b + b) * plane..(c * act.b + b + 1) * plane]);
            }
        }
        out
    }

    /// Predicted noise for a sample-major batch `[B][C_in][side][side]`.
    pub fn forward(&self, x: &[F], batch: usize, side: usize, t: &[f64]) -> Result<Vec<F>> {
        self.check_input(x, batch, side, t)?;
        let (g, out) = self.record(x, batch, side, t);
        let y = Self::to_sample_major(g.value(out));
        if y.iter().any(|v| !v.is_finite()) {
            return Err(NnError::Numeric("network produced non-finite output".into()));
        }
        Ok(y)
    }

    /// Mean squared error against `target` (sample-major, `C_out` channels)
    /// and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        x: &[F],
        batch: usize,
        side: usize,
        t: &[f64],
        target: &[F],
    ) -> Result<(f64, Vec<Vec<F>>)> {
        self.check_input(x, batch, side, t)?;
        let cout = self.config.out_channels;
        if target.len() != batch * cout * side * side {
            return Err(NnError::Shape("target shape".into()));
        }
        let (g, out) = self.record(x, batch, side, t);
        let y = g.value(out);
        let plane = y.plane();
        let count = y.data.len() as f64;
        let mut loss = 0.0;
        let mut dy = vec![F::zero(); y.data.len()];
        for c in 0..cout {
            for b in 0..batch {
                let off = (c * batch + b) * plane;
                let toff = (b * cout + c) * plane;
                for p in 0..plane {
                    let r = y.data[off + p].f64() - target[toff + p].f64();
                    loss += r * r;
                    dy[off + p] = F::of(2.0 * r / count);
                }
            }
        }
        let loss = loss / count;
        if !loss.is_finite() {
            return Err(NnError::Numeric("non-finite training loss".into()));
        }
        Ok((loss, g.backward(out, dy)))
    }
}
