use alloc::vec;
use alloc::vec::Vec;

use super::arch::{LayerKind, LayerShape};
use super::encode_into;
use super::params::ParameterSet;
use crate::error::{Error, Result};
use crate::real::{matmul, sigmoid, softplus, MatRef, Real};

/// Outputs of the field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOutput<F> {
    pub sigma: F,
    pub rgb: [F; 3],
    pub logits: Vec<F>,
}

/// Direction-free activations for a batch of `n` points.
#[derive(Debug, Clone)]
pub struct Geometry<F> {
    pub n: usize,
    pub pos_enc: Vec<F>,
    /// Post-ReLU output of each trunk layer, `n x width`.
    pub trunk: Vec<Vec<F>>,
    pub sigma_raw: Vec<F>,
    pub sigma: Vec<F>,
    /// `n x class_count`.
    pub logits: Vec<F>,
    /// `n x width`.
    pub feature: Vec<F>,
}

/// View-dependent activations for a batch of `n` points.
#[derive(Debug, Clone)]
pub struct ColorPass<F> {
    pub n: usize,
    /// `[feature | encoded direction]`, `n x (width + dir_dim)`.
    pub input: Vec<F>,
    /// Post-ReLU, `n x color_width`.
    pub hidden: Vec<F>,
    /// `n x 3`, in `[0, 1]`.
    pub rgb: Vec<F>,
}

impl<F> Default for Geometry<F> {
    fn default() -> Self {
        Self {
            n: 0,
            pos_enc: Vec::new(),
            trunk: Vec::new(),
            sigma_raw: Vec::new(),
            sigma: Vec::new(),
            logits: Vec::new(),
            feature: Vec::new(),
        }
    }
}

impl<F> Default for ColorPass<F> {
    fn default() -> Self {
        Self {
            n: 0,
            input: Vec::new(),
            hidden: Vec::new(),
            rgb: Vec::new(),
        }
    }
}

/// Reusable buffers for [`Field::backward_with`].
#[derive(Debug, Clone)]
pub struct BackwardScratch<F> {
    d_trunk: Vec<F>,
    d_prev: Vec<F>,
    d_pre: Vec<F>,
    d_hidden: Vec<F>,
    d_feature: Vec<F>,
    d_raw: Vec<F>,
}

impl<F> Default for BackwardScratch<F> {
    fn default() -> Self {
        Self {
            d_trunk: Vec::new(),
            d_prev: Vec::new(),
            d_pre: Vec::new(),
            d_hidden: Vec::new(),
            d_feature: Vec::new(),
            d_raw: Vec::new(),
        }
    }
}

fn zeroed<F: Real>(v: &mut Vec<F>, len: usize) {
    v.clear();
    v.resize(len, F::zero());
}

/// Loss gradients with respect to the field outputs of a batch.
#[derive(Debug, Clone, Copy)]
pub struct OutputGrads<'a, F> {
    pub sigma: &'a [F],
    pub logits: &'a [F],
    /// `None` skips the color branch entirely (e.g. semantic-only training).
    pub rgb: Option<&'a [F]>,
}

#[derive(Debug, Clone, Copy)]
pub struct Field<'a, F> {
    params: &'a ParameterSet<F>,
}

fn dense_forward<F: Real>(params: &[F], layer: &LayerShape, x: &[F], n: usize, out: &mut Vec<F>) {
    out.clear();
    let bias = &params[layer.bias_offset()..layer.offset + layer.len()];
    for _ in 0..n {
        out.extend_from_slice(bias);
    }
    let w = &params[layer.offset..layer.bias_offset()];
    matmul(
        MatRef::row_major(x, n, layer.inputs),
        MatRef::transposed(w, layer.inputs, layer.outputs),
        F::one(),
        out,
    );
}

/// Accumulates `dW += dy^T x` and `db += colsum(dy)`.
fn dense_grad_params<F: Real>(grads: &mut [F], layer: &LayerShape, x: &[F], dy: &[F], n: usize) {
    let (dw, rest) =
        grads[layer.offset..layer.offset + layer.len()].split_at_mut(layer.weight_count());
    matmul(
        MatRef::transposed(dy, layer.outputs, n),
        MatRef::row_major(x, n, layer.inputs),
        F::one(),
        dw,
    );
    for row in dy.chunks_exact(layer.outputs) {
        for (b, d) in rest.iter_mut().zip(row) {
            *b += *d;
        }
    }
}

/// `dx (+)= dy * W[:, ..cols]`.
fn dense_grad_input<F: Real>(
    params: &[F],
    layer: &LayerShape,
    dy: &[F],
    n: usize,
    cols: usize,
    beta: F,
    dx: &mut [F],
) {
    let w = MatRef {
        data: &params[layer.offset..layer.bias_offset()],
        rows: layer.outputs,
        cols,
        row_stride: layer.inputs,
        col_stride: 1,
    };
    matmul(MatRef::row_major(dy, n, layer.outputs), w, beta, dx);
}

impl<'a, F: Real> Field<'a, F> {
    pub fn new(params: &'a ParameterSet<F>) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &'a ParameterSet<F> {
        self.params
    }

    pub fn class_count(&self) -> usize {
        self.params.architecture().class_count
    }

    /// Encoded direction rows for `dirs`, one per point.
    pub fn encode_directions(&self, dirs: &[[F; 3]]) -> Vec<F> {
        let arch = self.params.architecture();
        let dd = arch.direction_input_dim();
        let mut out = vec![F::zero(); dirs.len() * dd];
        for (d, row) in dirs.iter().zip(out.chunks_exact_mut(dd)) {
            encode_into(*d, arch.direction_encoding_levels, true, row);
        }
        out
    }

    pub fn geometry(&self, positions: &[[F; 3]]) -> Geometry<F> {
        let mut out = Geometry::default();
        self.geometry_into(positions, &mut out);
        out
    }

    /// [`Field::geometry`] reusing the buffers of `out`.
    pub fn geometry_into(&self, positions: &[[F; 3]], out: &mut Geometry<F>) {
        let arch = self.params.architecture();
        let p = self.params.values();
        let n = positions.len();
        let pd = arch.position_input_dim();
        out.n = n;

        zeroed(&mut out.pos_enc, n * pd);
        for (x, row) in positions.iter().zip(out.pos_enc.chunks_exact_mut(pd)) {
            encode_into(*x, arch.position_encoding_levels, true, row);
        }

        out.trunk.resize_with(arch.trunk_depth, Vec::new);
        for i in 0..arch.trunk_depth {
            let layer = self.params.layer(LayerKind::Trunk(i));
            let (done, rest) = out.trunk.split_at_mut(i);
            let input = if i == 0 { &out.pos_enc } else { &done[i - 1] };
            dense_forward(p, &layer, input, n, &mut rest[0]);
            relu_in_place(&mut rest[0]);
        }
        let last = out.trunk.last().expect("trunk_depth >= 1");

        dense_forward(
            p,
            &self.params.layer(LayerKind::Density),
            last,
            n,
            &mut out.sigma_raw,
        );
        out.sigma.clear();
        out.sigma.extend(out.sigma_raw.iter().map(|r| softplus(*r)));
        dense_forward(
            p,
            &self.params.layer(LayerKind::Semantic),
            last,
            n,
            &mut out.logits,
        );
        dense_forward(
            p,
            &self.params.layer(LayerKind::Feature),
            last,
            n,
            &mut out.feature,
        );
    }

    /// Color branch for `n` points given their features (`n x width`) and
    /// encoded directions (`n x dir_dim`).
    pub fn color(&self, feature: &[F], dir_enc: &[F], n: usize) -> ColorPass<F> {
        let mut out = ColorPass::default();
        self.color_into(feature, dir_enc, n, &mut out);
        out
    }

    /// [`Field::color`] reusing the buffers of `out`.
    pub fn color_into(&self, feature: &[F], dir_enc: &[F], n: usize, out: &mut ColorPass<F>) {
        let arch = self.params.architecture();
        let p = self.params.values();
        let w = arch.trunk_width;
        let dd = arch.direction_input_dim();
        debug_assert_eq!(feature.len(), n * w);
        debug_assert_eq!(dir_enc.len(), n * dd);
        out.n = n;

        out.input.clear();
        for (f, d) in feature.chunks_exact(w).zip(dir_enc.chunks_exact(dd.max(1))) {
            out.input.extend_from_slice(f);
            out.input.extend_from_slice(d);
        }
        dense_forward(
            p,
            &self.params.layer(LayerKind::ColorHidden),
            &out.input,
            n,
            &mut out.hidden,
        );
        relu_in_place(&mut out.hidden);
        dense_forward(
            p,
            &self.params.layer(LayerKind::ColorOut),
            &out.hidden,
            n,
            &mut out.rgb,
        );
        for v in &mut out.rgb {
            *v = sigmoid(*v);
        }
    }

    /// Both passes for points with per-point directions.
    pub fn forward(&self, positions: &[[F; 3]], dirs: &[[F; 3]]) -> (Geometry<F>, ColorPass<F>) {
        assert_eq!(positions.len(), dirs.len());
        let geo = self.geometry(positions);
        let enc = self.encode_directions(dirs);
        let col = self.color(&geo.feature, &enc, geo.n);
        (geo, col)
    }

    /// Single-point evaluation with input validation.
    pub fn eval_point(&self, position: [F; 3], direction: [F; 3]) -> Result<FieldOutput<F>> {
        if position.iter().chain(&direction).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field input"));
        }
        let norm = direction.iter().map(|v| *v * *v).sum::<F>().sqrt();
        if (norm - F::one()).abs() > F::lit(1e-6) {
            return Err(Error::InvalidConfig(alloc::format!(
                "direction must be unit length, got |d| = {}",
                norm.to_f64_lossy()
            )));
        }
        let (geo, col) = self.forward(&[position], &[direction]);
        Ok(FieldOutput {
            sigma: geo.sigma[0],
            rgb: [col.rgb[0], col.rgb[1], col.rgb[2]],
            logits: geo.logits,
        })
    }

    /// Accumulates the parameter gradient for upstream output gradients into
    /// `grads` (flat, aligned with the parameter vector). `col` must come from
    /// the same points as `geo`, in the same order.
    pub fn backward(
        &self,
        geo: &Geometry<F>,
        col: Option<&ColorPass<F>>,
        up: OutputGrads<'_, F>,
        grads: &mut [F],
    ) -> Result<()> {
        self.backward_with(geo, col, up, grads, &mut BackwardScratch::default())
    }

    /// [`Field::backward`] with caller-owned scratch buffers.
    pub fn backward_with(
        &self,
        geo: &Geometry<F>,
        col: Option<&ColorPass<F>>,
        up: OutputGrads<'_, F>,
        grads: &mut [F],
        s: &mut BackwardScratch<F>,
    ) -> Result<()> {
        let arch = self.params.architecture();
        let p = self.params.values();
        let n = geo.n;
        let w = arch.trunk_width;
        let l = arch.class_count;
        check_len("parameter gradient", self.params.len(), grads.len())?;
        check_len("density gradient", n, up.sigma.len())?;
        check_len("logit gradient", n * l, up.logits.len())?;
        if up.sigma.iter().chain(up.logits).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("upstream gradient"));
        }

        let last = geo.trunk.last().expect("trunk_depth >= 1");
        zeroed(&mut s.d_trunk, n * w);

        if let Some(d_rgb) = up.rgb {
            let col = col.ok_or(Error::InvalidConfig(
                "color gradient given without a color pass".into(),
            ))?;
            check_len("color pass", n, col.n)?;
            check_len("color gradient", n * 3, d_rgb.len())?;
            if d_rgb.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("upstream gradient"));
            }
            let out_layer = self.params.layer(LayerKind::ColorOut);
            let hid_layer = self.params.layer(LayerKind::ColorHidden);
            let cw = arch.color_width();

            s.d_pre.clear();
            s.d_pre.extend(
                d_rgb
                    .iter()
                    .zip(&col.rgb)
                    .map(|(g, c)| *g * *c * (F::one() - *c)),
            );
            dense_grad_params(grads, &out_layer, &col.hidden, &s.d_pre, n);
            zeroed(&mut s.d_hidden, n * cw);
            dense_grad_input(p, &out_layer, &s.d_pre, n, cw, F::zero(), &mut s.d_hidden);
            relu_mask(&mut s.d_hidden, &col.hidden);
            dense_grad_params(grads, &hid_layer, &col.input, &s.d_hidden, n);
            // Only the feature columns of the color input carry gradient back.
            zeroed(&mut s.d_feature, n * w);
            dense_grad_input(
                p,
                &hid_layer,
                &s.d_hidden,
                n,
                w,
                F::zero(),
                &mut s.d_feature,
            );

            let feat_layer = self.params.layer(LayerKind::Feature);
            dense_grad_params(grads, &feat_layer, last, &s.d_feature, n);
            dense_grad_input(p, &feat_layer, &s.d_feature, n, w, F::one(), &mut s.d_trunk);
        }

        let sem_layer = self.params.layer(LayerKind::Semantic);
        dense_grad_params(grads, &sem_layer, last, up.logits, n);
        dense_grad_input(p, &sem_layer, up.logits, n, w, F::one(), &mut s.d_trunk);

        let den_layer = self.params.layer(LayerKind::Density);
        s.d_raw.clear();
        s.d_raw.extend(
            up.sigma
                .iter()
                .zip(&geo.sigma_raw)
                .map(|(g, r)| *g * sigmoid(*r)),
        );
        dense_grad_params(grads, &den_layer, last, &s.d_raw, n);
        dense_grad_input(p, &den_layer, &s.d_raw, n, w, F::one(), &mut s.d_trunk);

        for i in (0..arch.trunk_depth).rev() {
            let layer = self.params.layer(LayerKind::Trunk(i));
            relu_mask(&mut s.d_trunk, &geo.trunk[i]);
            let input = if i == 0 {
                &geo.pos_enc
            } else {
                &geo.trunk[i - 1]
            };
            dense_grad_params(grads, &layer, input, &s.d_trunk, n);
            if i > 0 {
                zeroed(&mut s.d_prev, n * w);
                dense_grad_input(p, &layer, &s.d_trunk, n, w, F::zero(), &mut s.d_prev);
                core::mem::swap(&mut s.d_trunk, &mut s.d_prev);
            }
        }
        Ok(())
    }
}

#[inline]
fn relu_in_place<F: Real>(v: &mut [F]) {
    for x in v {
        if *x < F::zero() {
            *x = F::zero();
        }
    }
}

/// Zeroes gradient entries whose activation was clipped by the ReLU.
#[inline]
fn relu_mask<F: Real>(d: &mut [F], act: &[F]) {
    for (g, a) in d.iter_mut().zip(act) {
        if *a <= F::zero() {
            *g = F::zero();
        }
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            found,
        })
    }
}
