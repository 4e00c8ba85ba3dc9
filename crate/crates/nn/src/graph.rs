//! Reverse-mode differentiation over a recorded sequence of layer ops.
//!
//! Activations are stored channel-major as `[C][B][H][W]`, so a convolution
//! over the whole batch is a single `W[Co x K] * cols[K x B*H*W]` product and
//! channel concatenation is plain vector concatenation. All convolutions pad
//! circularly.

use crate::real::Real;

pub type ParamId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Act<F> {
    pub c: usize,
    pub b: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<F>,
}

impl<F: Real> Act<F> {
    pub fn zeros(c: usize, b: usize, h: usize, w: usize) -> Self {
        Act {
            c,
            b,
            h,
            w,
            data: vec![F::zero(); c * b * h * w],
        }
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Columns of the `[C x B*H*W]` matrix view.
    #[inline]
    pub fn cols(&self) -> usize {
        self.b * self.h * self.w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone, Copy)]
pub struct ConvSpec {
    pub w: ParamId,
    pub bias: ParamId,
    pub ci: usize,
    pub co: usize,
    pub k: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct NormSpec {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub ch: usize,
    pub groups: usize,
}

const NORM_EPS: f64 = 1e-5;

enum Op {
    Input,
    Conv { x: usize, spec: ConvSpec },
    Norm { x: usize, spec: NormSpec, stats: Vec<(f64, f64)> },
    Silu { x: usize },
    Add { a: usize, b: usize },
    AddBroadcast { x: usize, e: usize },
    Concat { a: usize, b: usize },
    Upsample { x: usize },
}

struct Node<F> {
    value: Act<F>,
    op: Op,
    needs_grad: bool,
}

/// A forward pass recorded for differentiation.
pub struct Graph<'p, F: Real> {
    params: &'p [Vec<F>],
    nodes: Vec<Node<F>>,
}

fn im2col<F: Real>(x: &Act<F>, k: usize, stride: usize, cols: &mut [F]) {
    let (h, w) = (x.h, x.w);
    let (ho, wo) = (h / stride, w / stride);
    let n = x.b * ho * wo;
    let pad = k / 2;
    for ci in 0..x.c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst_row = &mut cols[row * n..(row + 1) * n];
                let shift = (kx + w - pad) % w;
                for b in 0..x.b {
                    let base = (ci * x.b + b) * h * w;
                    for oy in 0..ho {
                        let iy = (oy * stride + ky + h - pad) % h;
                        let src = &x.data[base + iy * w..base + (iy + 1) * w];
                        let dst = &mut dst_row[(b * ho + oy) * wo..(b * ho + oy + 1) * wo];
                        if stride == 1 {
                            dst[..w - shift].copy_from_slice(&src[shift..]);
                            dst[w - shift..].copy_from_slice(&src[..shift]);
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate() {
                                *d = src[(ox * stride + shift) % w];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn col2im<F: Real>(cols: &[F], k: usize, stride: usize, dx: &mut Act<F>) {
    let (h, w) = (dx.h, dx.w);
    let (ho, wo) = (h / stride, w / stride);
    let n = dx.b * ho * wo;
    let pad = k / 2;
    for ci in 0..dx.c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src_row = &cols[row * n..(row + 1) * n];
                let shift = (kx + w - pad) % w;
                for b in 0..dx.b {
                    let base = (ci * dx.b + b) * h * w;
                    for oy in 0..ho {
                        let iy = (oy * stride + ky + h - pad) % h;
                        let dst = &mut dx.data[base + iy * w..base + (iy + 1) * w];
                        let src = &src_row[(b * ho + oy) * wo..(b * ho + oy + 1) * wo];
                        if stride == 1 {
                            for (d, s) in dst[shift..].iter_mut().zip(&src[..w - shift]) {
                                *d += *s;
                            }
                            for (d, s) in dst[..shift].iter_mut().zip(&src[w - shift..]) {
                                *d += *s;
                            }
                        } else {
                            for (ox, s) in src.iter().enumerate() {
                                dst[(ox * stride + shift) % w] += *s;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<'p, F: Real> Graph<'p, F> {
    pub fn new(params: &'p [Vec<F>]) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Act<F>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Act<F> {
        &self.nodes[v.0].value
    }

    pub fn input(&mut self, value: Act<F>) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn conv(&mut self, x: Var, spec: ConvSpec) -> Var {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.c, spec.ci, "conv input channels");
        let (ho, wo) = (xv.h / spec.stride, xv.w / spec.stride);
        let n = xv.b * ho * wo;
        let kk = spec.ci * spec.k * spec.k;
        let mut out = Act::zeros(spec.co, xv.b, ho, wo);
        let bias = &self.params[spec.bias];
        for (co, row) in out.data.chunks_exact_mut(n).enumerate() {
            row.fill(bias[co]);
        }
        let scratch;
        let cols: &[F] = if spec.k == 1 && spec.stride == 1 {
            &xv.data
        } else {
            let mut buf = vec![F::zero(); kk * n];
            im2col(xv, spec.k, spec.stride, &mut buf);
            scratch = buf;
            &scratch
        };
        F::gemm(
            spec.co,
            kk,
            n,
            F::one(),
            &self.params[spec.w],
            kk as isize,
            1,
            cols,
            n as isize,
            1,
            F::one(),
            &mut out.data,
            n as isize,
            1,
        );
        let needs = true;
        self.push(out, Op::Conv { x: x.0, spec }, needs)
    }

    pub fn group_norm(&mut self, x: Var, spec: NormSpec) -> Var {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.c, spec.ch, "norm channels");
        let (cg, hw, nb) = (spec.ch / spec.groups, xv.plane(), xv.b);
        let gamma = &self.params[spec.gamma];
        let beta = &self.params[spec.beta];
        let mut out = Act::zeros(xv.c, nb, xv.h, xv.w);
        let mut stats = Vec::with_capacity(nb * spec.groups);
        for b in 0..nb {
            for g in 0..spec.groups {
                let chans = g * cg..(g + 1) * cg;
                let m = (cg * hw) as f64;
                let mut sum = 0.0;
                for c in chans.clone() {
                    let o = (c * nb + b) * hw;
                    sum += xv.data[o..o + hw].iter().map(|v| v.f64()).sum::<f64>();
                }
                let mean = sum / m;
                let mut ss = 0.0;
                for c in chans.clone() {
                    let o = (c * nb + b) * hw;
                    ss += xv.data[o..o + hw].iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>();
                }
                let rstd = 1.0 / (ss / m + NORM_EPS).sqrt();
                for c in chans {
                    let o = (c * nb + b) * hw;
                    let scale = F::of(rstd) * gamma[c];
                    let shift = beta[c] - F::of(mean * rstd) * gamma[c];
                    for (y, x) in out.data[o..o + hw].iter_mut().zip(&xv.data[o..o + hw]) {
                        *y = *x * scale + shift;
                    }
                }
                stats.push((mean, rstd));
            }
        }
        self.push(out, Op::Norm { x: x.0, spec, stats }, true)
    }

    pub fn silu(&mut self, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let mut out = xv.clone();
        for v in &mut out.data {
            *v = *v * sigmoid(*v);
        }
        self.push(out, Op::Silu { x: x.0 }, true)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.data.len(), bv.data.len(), "add shapes");
        let mut out = av.clone();
        for (o, v) in out.data.iter_mut().zip(&bv.data) {
            *o += *v;
        }
        self.push(out, Op::Add { a: a.0, b: b.0 }, true)
    }

    /// `x[c][b][:] + e[c][b]` for an embedding `e` of shape `[C][B][1][1]`.
    pub fn add_broadcast(&mut self, x: Var, e: Var) -> Var {
        let (xv, ev) = (&self.nodes[x.0].value, &self.nodes[e.0].value);
        assert_eq!((xv.c, xv.b), (ev.c, ev.b), "broadcast shapes");
        assert_eq!(ev.plane(), 1);
        let hw = xv.plane();
        let mut out = xv.clone();
        for (cb, chunk) in out.data.chunks_exact_mut(hw).enumerate() {
            let add = ev.data[cb];
            for v in chunk {
                *v += add;
            }
        }
        self.push(out, Op::AddBroadcast { x: x.0, e: e.0 }, true)
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!((av.b, av.h, av.w), (bv.b, bv.h, bv.w), "concat shapes");
        let mut data = Vec::with_capacity(av.data.len() + bv.data.len());
        data.extend_from_slice(&av.data);
        data.extend_from_slice(&bv.data);
        let out = Act {
            c: av.c + bv.c,
            b: av.b,
            h: av.h,
            w: av.w,
            data,
        };
        self.push(out, Op::Concat { a: a.0, b: b.0 }, true)
    }

    /// Nearest-neighbour 2x upsampling.
    pub fn upsample(&mut self, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let (h, w) = (xv.h, xv.w);
        let mut out = Act::zeros(xv.c, xv.b, 2 * h, 2 * w);
        for (cb, src) in xv.data.chunks_exact(h * w).enumerate() {
            let dst = &mut out.data[cb * 4 * h * w..(cb + 1) * 4 * h * w];
            for y in 0..2 * h {
                for xx in 0..2 * w {
                    dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
                }
            }
        }
        self.push(out, Op::Upsample { x: x.0 }, true)
    }

    /// Back-propagates `dout` from `out`; returns one gradient buffer per parameter.
    pub fn backward(&self, out: Var, dout: Vec<F>) -> Vec<Vec<F>> {
        assert_eq!(dout.len(), self.nodes[out.0].value.data.len());
        let mut pgrads: Vec<Vec<F>> = self.params.iter().map(|p| vec![F::zero(); p.len()]).collect();
        let mut grads: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(dout);
        for idx in (0..=out.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Conv { x, spec } => self.conv_backward(*x, spec, &dy, &mut grads, &mut pgrads),
                Op::Norm { x, spec, stats } => {
                    self.norm_backward(*x, spec, stats, &dy, &mut grads, &mut pgrads)
                }
                Op::Silu { x } => {
                    if let Some(dx) = self.grad_slot(*x, &mut grads) {
                        let xv = &self.nodes[*x].value.data;
                        for ((d, g), v) in dx.iter_mut().zip(&dy).zip(xv) {
                            let s = sigmoid(*v);
                            *d += *g * s * (F::one() + *v * (F::one() - s));
                        }
                    }
                }
                Op::Add { a, b } => {
                    for src in [*a, *b] {
                        if let Some(dx) = self.grad_slot(src, &mut grads) {
                            for (d, g) in dx.iter_mut().zip(&dy) {
                                *d += *g;
                            }
                        }
                    }
                }
                Op::AddBroadcast { x, e } => {
                    let hw = node.value.plane();
                    if let Some(dx) = self.grad_slot(*x, &mut grads) {
                        for (d, g) in dx.iter_mut().zip(&dy) {
                            *d += *g;
                        }
                    }
                    if let Some(de) = self.grad_slot(*e, &mut grads) {
                        for (cb, chunk) in dy.chunks_exact(hw).enumerate() {
                            de[cb] += chunk.iter().copied().sum::<F>();
                        }
                    }
                }
                Op::Concat { a, b } => {
                    let na = self.nodes[*a].value.data.len();
                    if let Some(da) = self.grad_slot(*a, &mut grads) {
                        for (d, g) in da.iter_mut().zip(&dy[..na]) {
                            *d += *g;
                        }
                    }
                    if let Some(db) = self.grad_slot(*b, &mut grads) {
                        for (d, g) in db.iter_mut().zip(&dy[na..]) {
                            *d += *g;
                        }
                    }
                }
                Op::Upsample { x } => {
                    let (h, w) = (self.nodes[*x].value.h, self.nodes[*x].value.w);
                    if let Some(dx) = self.grad_slot(*x, &mut grads) {
                        for (cb, dst) in dx.chunks_exact_mut(h * w).enumerate() {
                            let src = &dy[cb * 4 * h * w..(cb + 1) * 4 * h * w];
                            for y in 0..2 * h {
                                for xx in 0..2 * w {
                                    dst[(y / 2) * w + xx / 2] += src[y * 2 * w + xx];
                                }
                            }
                        }
                    }
                }
            }
        }
        pgrads
    }

    fn grad_slot<'g>(&self, idx: usize, grads: &'g mut [Option<Vec<F>>]) -> Option<&'g mut Vec<F>> {
        if !self.nodes[idx].needs_grad {
            return None;
        }
        let len = self.nodes[idx].value.data.len();
        Some(grads[idx].get_or_insert_with(|| vec![F::zero(); len]))
    }

    fn conv_backward(
        &self,
        x: usize,
        spec: &ConvSpec,
        dy: &[F],
        grads: &mut [Option<Vec<F>>],
        pgrads: &mut [Vec<F>],
    ) {
        let xv = &self.nodes[x].value;
        let (ho, wo) = (xv.h / spec.stride, xv.w / spec.stride);
        let n = xv.b * ho * wo;
        let kk = spec.ci * spec.k * spec.k;
        let direct = spec.k == 1 && spec.stride == 1;
        let scratch;
        let cols: &[F] = if direct {
            &xv.data
        } else {
            let mut buf = vec![F::zero(); kk * n];
            im2col(xv, spec.k, spec.stride, &mut buf);
            scratch = buf;
            &scratch
        };
        F::gemm(
            spec.co,
            n,
            kk,
            F::one(),
            dy,
            n as isize,
            1,
            cols,
            1,
            n as isize,
            F::one(),
            &mut pgrads[spec.w],
            kk as isize,
            1,
        );
        for (db, row) in pgrads[spec.bias].iter_mut().zip(dy.chunks_exact(n)) {
            *db += row.iter().copied().sum::<F>();
        }
        if !self.nodes[x].needs_grad {
            return;
        }
        let w = &self.params[spec.w];
        if direct {
            let dx = self.grad_slot(x, grads).expect("needs grad");
            F::gemm(kk, spec.co, n, F::one(), w, 1, kk as isize, dy, n as isize, 1, F::one(), dx, n as isize, 1);
        } else {
            let mut dcols = vec![F::zero(); kk * n];
            F::gemm(kk, spec.co, n, F::one(), w, 1, kk as isize, dy, n as isize, 1, F::zero(), &mut dcols, n as isize, 1);
            let mut dx = Act {
                c: xv.c,
                b: xv.b,
                h: xv.h,
                w: xv.w,
                data: grads[x].take().unwrap_or_else(|| vec![F::zero(); xv.data.len()]),
            };
            col2im(&dcols, spec.k, spec.stride, &mut dx);
            grads[x] = Some(dx.data);
        }
    }

    fn norm_backward(
        &self,
        x: usize,
        spec: &NormSpec,
        stats: &[(f64, f64)],
        dy: &[F],
        grads: &mut [Option<Vec<F>>],
        pgrads: &mut [Vec<F>],
    ) {
        let xv = &self.nodes[x].value;
        let (cg, hw, nb) = (spec.ch / spec.groups, xv.plane(), xv.b);
        let gamma = &self.params[spec.gamma];
        let needs = self.nodes[x].needs_grad;
        let mut dx_buf = if needs {
            Some(grads[x].take().unwrap_or_else(|| vec![F::zero(); xv.data.len()]))
        } else {
            None
        };
        for b in 0..nb {
            for g in 0..spec.groups {
                let (mean, rstd) = stats[b * spec.groups + g];
                let m = (cg * hw) as f64;
                let mut sum_dxh = 0.0;
                let mut sum_dxh_xh = 0.0;
                for c in g * cg..(g + 1) * cg {
                    let o = (c * nb + b) * hw;
                    let gc = gamma[c].f64();
                    let mut dgamma = 0.0;
                    let mut dbeta = 0.0;
                    for (yv, xv) in dy[o..o + hw].iter().zip(&xv.data[o..o + hw]) {
                        let xh = (xv.f64() - mean) * rstd;
                        let d = yv.f64();
                        dgamma += d * xh;
                        dbeta += d;
                        sum_dxh += d * gc;
                        sum_dxh_xh += d * gc * xh;
                    }
                    pgrads[spec.gamma][c] += F::of(dgamma);
                    pgrads[spec.beta][c] += F::of(dbeta);
                }
                if let Some(dx) = dx_buf.as_mut() {
                    let a = sum_dxh / m;
                    let bcoef = sum_dxh_xh / m;
                    for c in g * cg..(g + 1) * cg {
                        let o = (c * nb + b) * hw;
                        let gc = gamma[c].f64();
                        for p in o..o + hw {
                            let xh = (xv.data[p].f64() - mean) * rstd;
                            let dxh = dy[p].f64() * gc;
                            dx[p] += F::of(rstd * (dxh - a - xh * bcoef));
                        }
                    }
                }
            }
        }
        if let Some(dx) = dx_buf {
            grads[x] = Some(dx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct circular convolution oracle.
    fn conv_naive(x: &Act<f64>, w: &[f64], bias: &[f64], co: usize, k: usize, stride: usize) -> Act<f64> {
        let (ho, wo) = (x.h / stride, x.w / stride);
        let pad = k / 2;
        let mut out = Act::zeros(co, x.b, ho, wo);
        for o in 0..co {
            for b in 0..x.b {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut s = bias[o];
                        for ci in 0..x.c {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * stride + ky + x.h - pad) % x.h;
                                    let ix = (ox * stride + kx + x.w - pad) % x.w;
                                    s += w[((o * x.c + ci) * k + ky) * k + kx]
                                        * x.data[((ci * x.b + b) * x.h + iy) * x.w + ix];
                                }
                            }
                        }
                        out.data[((o * x.b + b) * ho + oy) * wo + ox] = s;
                    }
                }
            }
        }
        out
    }

    fn pseudo(len: usize, seed: f64) -> Vec<f64> {
        (0..len).map(|i| ((i as f64 + 1.0) * seed).sin()).collect()
    }

    #[test]
    fn conv_matches_direct_summation() {
        for (k, stride) in [(3, 1), (3, 2), (1, 1)] {
            let (ci, co) = (3, 5);
            let x = Act {
                c: ci,
                b: 2,
                h: 6,
                w: 8,
                data: pseudo(ci * 2 * 48, 0.7),
            };
            let params = vec![pseudo(co * ci * k * k, 1.3), pseudo(co, 2.1)];
            let mut g = Graph::new(&params);
            let xi = g.input(x.clone());
            let y = g.conv(
                xi,
                ConvSpec {
                    w: 0,
                    bias: 1,
                    ci,
                    co,
                    k,
                    stride,
                },
            );
            let want = conv_naive(&x, &params[0], &params[1], co, k, stride);
            for (a, b) in g.value(y).data.iter().zip(&want.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn upsample_and_concat_shapes() {
        let params: Vec<Vec<f64>> = vec![];
        let mut g = Graph::new(&params);
        let a = g.input(Act {
            c: 1,
            b: 1,
            h: 2,
            w: 2,
            data: vec![1.0, 2.0, 3.0, 4.0],
        });
        let u = g.upsample(a);
        assert_eq!(
            g.value(u).data,
            vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0]
        );
        let c = g.concat(a, a);
        assert_eq!(g.value(c).c, 2);
    }
}
