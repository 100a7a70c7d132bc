//! Straight-line scalar reference of the field and the training loss, used
//! as an oracle for the batched implementation. Shares nothing with the
//! library beyond the parameter layout.

#![allow(dead_code)]

use std::f64::consts::PI;

use semfield_core::field::{LayerKind, NetworkArchitecture};

pub struct RefRay {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
    pub near: f64,
    pub far: f64,
    pub coarse_t: Vec<f64>,
    pub fine_t: Vec<f64>,
    pub color: [f64; 3],
    /// `None` for unlabeled.
    pub label: Option<usize>,
}

pub struct RefSettings {
    pub lambda: f64,
    pub gamma: f64,
    pub photometric: bool,
    pub white_background: bool,
}

fn encode(v: [f64; 3], levels: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    for k in 0..levels {
        let f = PI * 2f64.powi(k as i32);
        for x in v {
            out.push((f * x).sin());
        }
        for x in v {
            out.push((f * x).cos());
        }
    }
    out
}

fn dense(arch: &NetworkArchitecture, p: &[f64], kind: LayerKind, x: &[f64]) -> Vec<f64> {
    let layer = arch.layers().into_iter().find(|l| l.kind == kind).unwrap();
    assert_eq!(x.len(), layer.inputs);
    (0..layer.outputs)
        .map(|o| {
            let row = &p[layer.offset + o * layer.inputs..layer.offset + (o + 1) * layer.inputs];
            let b = p[layer.offset + layer.inputs * layer.outputs + o];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// `(sigma, rgb, logits)` at one point.
pub fn point(
    arch: &NetworkArchitecture,
    p: &[f64],
    x: [f64; 3],
    d: [f64; 3],
) -> (f64, [f64; 3], Vec<f64>) {
    let mut h = encode(x, arch.position_encoding_levels);
    for i in 0..arch.trunk_depth {
        h = relu(dense(arch, p, LayerKind::Trunk(i), &h));
    }
    let raw = dense(arch, p, LayerKind::Density, &h)[0];
    let sigma = (1.0 + raw.exp()).ln();
    let logits = dense(arch, p, LayerKind::Semantic, &h);
    let mut input = dense(arch, p, LayerKind::Feature, &h);
    input.extend(encode(d, arch.direction_encoding_levels));
    let hidden = relu(dense(arch, p, LayerKind::ColorHidden, &input));
    let out = dense(arch, p, LayerKind::ColorOut, &hidden);
    let rgb = [0, 1, 2].map(|i| 1.0 / (1.0 + (-out[i]).exp()));
    (sigma, rgb, logits)
}

/// `(color, composited logits)` of samples at ascending distances `t`.
fn composite(
    arch: &NetworkArchitecture,
    p: &[f64],
    ray: &RefRay,
    t: &[f64],
    white: bool,
) -> ([f64; 3], Vec<f64>) {
    let mut color = [0.0; 3];
    let mut logits = vec![0.0; arch.class_count];
    let mut optical = 0.0f64;
    let mut opacity = 0.0;
    for k in 0..t.len() {
        let next = if k + 1 < t.len() { t[k + 1] } else { ray.far };
        let delta = next - t[k];
        let x = [0, 1, 2].map(|i| ray.origin[i] + t[k] * ray.dir[i]);
        let (sigma, rgb, s) = point(arch, p, x, ray.dir);
        let w = (-optical).exp() * (1.0 - (-sigma * delta).exp());
        optical += sigma * delta;
        opacity += w;
        for c in 0..3 {
            color[c] += w * rgb[c];
        }
        for (a, v) in logits.iter_mut().zip(&s) {
            *a += w * v;
        }
    }
    if white {
        for c in &mut color {
            *c += 1.0 - opacity;
        }
    }
    (color, logits)
}

fn focal(logits: &[f64], label: usize, gamma: f64) -> f64 {
    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
    let z: f64 = logits.iter().map(|v| (v - m).exp()).sum();
    let p = ((logits[label] - m).exp() / z).clamp(1e-7, 1.0 - 1e-7);
    -(1.0 - p).powf(gamma) * p.ln()
}

/// `(loss_p, loss_s, total)` summed over rays.
pub fn loss(
    arch: &NetworkArchitecture,
    p: &[f64],
    rays: &[RefRay],
    s: &RefSettings,
) -> (f64, f64, f64) {
    let (mut lp, mut ls) = (0.0, 0.0);
    for ray in rays {
        let mut merged: Vec<f64> = ray.coarse_t.iter().chain(&ray.fine_t).copied().collect();
        merged.sort_by(f64::total_cmp);
        for t in [&ray.coarse_t, &merged] {
            let (c, logits) = composite(arch, p, ray, t, s.white_background);
            if s.photometric {
                lp += (0..3).map(|i| (c[i] - ray.color[i]).powi(2)).sum::<f64>();
            }
            if let Some(l) = ray.label {
                ls += focal(&logits, l, s.gamma);
            }
        }
    }
    let total = if s.photometric {
        lp + s.lambda * ls
    } else {
        s.lambda * ls
    };
    (lp, ls, total)
}
