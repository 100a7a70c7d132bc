//! Analytic gradients against central differences of an independent
//! scalar reference, in double precision.

mod support;

use rand::Rng;
use semfield_core::camera::Ray;
use semfield_core::field::{init_params, Field, NetworkArchitecture, OutputGrads, ParameterSet};
use semfield_core::geometry::Vec3;
use semfield_core::seed::{stream, Purpose, Rng as StreamRng};
use semfield_core::train::{
    adam_step, batch_loss_and_grad, AdamHyper, AdamState, LossSettings, RayBatch,
};
use semfield_core::{ClassId, UNLABELED};
use support::reference::{self, RefRay, RefSettings};

const H: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn small_arch() -> NetworkArchitecture {
    NetworkArchitecture {
        trunk_depth: 1,
        trunk_width: 8,
        position_encoding_levels: 2,
        direction_encoding_levels: 1,
        class_count: 3,
    }
}

fn random_params(arch: NetworkArchitecture, seed: u64) -> ParameterSet<f64> {
    let base = init_params::<f64>(arch, seed).unwrap();
    let mut rng = stream(seed, Purpose::Eval, 1);
    // nonzero biases so every term of the backward pass is exercised
    let values = base
        .values()
        .iter()
        .map(|v| v + rng.gen_range(-0.3..0.3))
        .collect();
    ParameterSet::from_values(arch, values).unwrap()
}

fn unit(rng: &mut StreamRng) -> [f64; 3] {
    loop {
        let v = [0; 3].map(|_| rng.gen_range(-1.0f64..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.2 && n < 1.0 {
            return v.map(|x| x / n);
        }
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn random_rays(n: usize, kc: usize, nf: usize, classes: usize, seed: u64) -> Vec<RefRay> {
    let mut rng = stream(seed, Purpose::Eval, 2);
    (0..n)
        .map(|i| {
            let (near, far) = (0.4, 2.6);
            let w = (far - near) / kc as f64;
            RefRay {
                origin: [0; 3].map(|_| rng.gen_range(-0.8..0.8)),
                dir: unit(&mut rng),
                near,
                far,
                coarse_t: (0..kc)
                    .map(|k| near + w * (k as f64 + rng.gen_range(0.05..0.95)))
                    .collect(),
                fine_t: sorted((0..nf).map(|_| rng.gen_range(near..far)).collect()),
                color: [0; 3].map(|_| rng.gen_range(0.0..1.0)),
                label: if i % 4 == 3 {
                    None
                } else {
                    Some(rng.gen_range(0..classes))
                },
            }
        })
        .collect()
}

struct Flat {
    rays: Vec<Ray>,
    coarse_t: Vec<f64>,
    fine_t: Vec<f64>,
    colors: Vec<[f64; 3]>,
    labels: Vec<ClassId>,
}

fn flatten(rays: &[RefRay]) -> Flat {
    Flat {
        rays: rays
            .iter()
            .map(|r| Ray::new(Vec3(r.origin), Vec3(r.dir), r.near, r.far).unwrap())
            .collect(),
        coarse_t: rays.iter().flat_map(|r| r.coarse_t.clone()).collect(),
        fine_t: rays.iter().flat_map(|r| r.fine_t.clone()).collect(),
        colors: rays.iter().map(|r| r.color).collect(),
        labels: rays
            .iter()
            .map(|r| r.label.map_or(UNLABELED, |l| l as ClassId))
            .collect(),
    }
}

fn batch<'a>(f: &'a Flat, kc: usize, nf: usize) -> RayBatch<'a> {
    RayBatch {
        rays: &f.rays,
        coarse_t: &f.coarse_t,
        fine_t: &f.fine_t,
        coarse: kc,
        fine: nf,
        colors: &f.colors,
        labels: &f.labels,
    }
}

/// Largest `|a - n| / max(|a|, |n|, floor)` over all components.
fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let e = (a - n).abs() / a.abs().max(n.abs()).max(floor);
        if e > worst.0 {
            worst = (e, i);
        }
    }
    worst
}

fn check_loss_gradient(settings: LossSettings, seed: u64) {
    let arch = small_arch();
    assert!(
        arch.parameter_count() <= 1000,
        "{} parameters",
        arch.parameter_count()
    );
    let params = random_params(arch, seed);
    let (kc, nf) = (6, 4);
    let rays = random_rays(5, kc, nf, arch.class_count, seed);
    let flat = flatten(&rays);
    let rs = RefSettings {
        lambda: settings.lambda,
        gamma: settings.gamma,
        photometric: settings.photometric,
        white_background: settings.white_background,
    };

    let mut grads = params.zeros_like();
    let got =
        batch_loss_and_grad(&params, &batch(&flat, kc, nf), &settings, Some(&mut grads)).unwrap();
    let (lp, ls, total) = reference::loss(&arch, params.values(), &rays, &rs);
    assert!(
        (got.total - total).abs() <= 1e-10 * total.abs().max(1.0),
        "{} vs {total}",
        got.total
    );
    assert!((got.loss_s - ls).abs() <= 1e-10 * ls.abs().max(1.0));
    if settings.photometric {
        assert!((got.loss_p - lp).abs() <= 1e-10 * lp.abs().max(1.0));
    }

    let mut p = params.values().to_vec();
    let numeric: Vec<f64> = (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + H;
            let up = reference::loss(&arch, &p, &rays, &rs).2;
            p[i] = x - H;
            let down = reference::loss(&arch, &p, &rays, &rs).2;
            p[i] = x;
            (up - down) / (2.0 * H)
        })
        .collect();
    let (err, at) = max_rel_err(&grads, &numeric, 1e-6);
    assert!(
        err <= TOL,
        "relative error {err:.3e} at parameter {at}: {} vs {}",
        grads[at],
        numeric[at]
    );
}

#[test]
fn loss_gradient_full_objective() {
    let s = LossSettings {
        lambda: 0.5,
        gamma: 1.0,
        photometric: true,
        white_background: false,
    };
    check_loss_gradient(s, 11);
}

#[test]
fn loss_gradient_white_background_gamma_two() {
    let s = LossSettings {
        lambda: 0.3,
        gamma: 2.0,
        photometric: true,
        white_background: true,
    };
    check_loss_gradient(s, 12);
}

#[test]
fn loss_gradient_semantic_only_cross_entropy() {
    let s = LossSettings {
        lambda: 1.0,
        gamma: 0.0,
        photometric: false,
        white_background: false,
    };
    check_loss_gradient(s, 13);
}

#[test]
fn field_backward_matches_reference() {
    let arch = small_arch();
    let params = random_params(arch, 21);
    let mut rng = stream(21, Purpose::Eval, 3);
    let n = 7;
    let xs: Vec<[f64; 3]> = (0..n)
        .map(|_| [0; 3].map(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let ds: Vec<[f64; 3]> = (0..n).map(|_| unit(&mut rng)).collect();
    let l = arch.class_count;
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..n * l).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let objective = |p: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let (sigma, rgb, logits) = reference::point(&arch, p, xs[i], ds[i]);
                a[i] * sigma
                    + (0..l).map(|k| b[i * l + k] * logits[k]).sum::<f64>()
                    + (0..3).map(|k| c[i * 3 + k] * rgb[k]).sum::<f64>()
            })
            .sum()
    };

    let field = Field::new(&params);
    let (geo, col) = field.forward(&xs, &ds);
    let mut grads = params.zeros_like();
    field
        .backward(
            &geo,
            Some(&col),
            OutputGrads {
                sigma: &a,
                logits: &b,
                rgb: Some(&c),
            },
            &mut grads,
        )
        .unwrap();

    let mut p = params.values().to_vec();
    let numeric: Vec<f64> = (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + H;
            let up = objective(&p);
            p[i] = x - H;
            let down = objective(&p);
            p[i] = x;
            (up - down) / (2.0 * H)
        })
        .collect();
    let (err, at) = max_rel_err(&grads, &numeric, 1e-6);
    assert!(err <= TOL, "relative error {err:.3e} at parameter {at}");
}

#[test]
fn adam_step_decreases_single_ray_loss() {
    let arch = small_arch();
    let settings = LossSettings {
        lambda: 0.04,
        gamma: 1.0,
        photometric: true,
        white_background: false,
    };
    let mut decreased = 0;
    for trial in 0..100u64 {
        let params = random_params(arch, 1000 + trial);
        let rays = random_rays(1, 8, 4, arch.class_count, 2000 + trial);
        let flat = flatten(&rays);
        let b = batch(&flat, 8, 4);
        let mut grads = params.zeros_like();
        let before = batch_loss_and_grad(&params, &b, &settings, Some(&mut grads))
            .unwrap()
            .total;
        let mut next = params.clone();
        let mut adam = AdamState::new(next.len());
        adam_step(
            next.values_mut(),
            &grads,
            &mut adam,
            &AdamHyper::default(),
            1e-4,
        )
        .unwrap();
        let after = batch_loss_and_grad(&next, &b, &settings, None)
            .unwrap()
            .total;
        decreased += (after < before) as usize;
    }
    assert!(
        decreased >= 99,
        "loss decreased in {decreased} of 100 trials"
    );
}
