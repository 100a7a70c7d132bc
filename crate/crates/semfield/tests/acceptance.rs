//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//!
//! `SEMFIELD_ACCEPTANCE=7,13` runs a subset. With `SEMFIELD_ACCEPTANCE_STRICT=1`
//! any failing criterion makes the process exit nonzero; by default failures
//! are reported but do not stop the rest of `cargo test`. The training
//! criteria take most of the time (about an hour on one core).

#[path = "../../core/tests/support/reference.rs"]
mod reference;

use std::time::Instant;

use rand::Rng;
use semfield::config::RunConfig;
use semfield::dataset::write_dataset;
use semfield::eval::{evaluate, EvalReport, SsimRegion};
use semfield::sweep::{run_sweep, SweepParam};
use semfield_core::camera::Ray;
use semfield_core::field::{
    argmax, init_params, Field, FieldOutput, NetworkArchitecture, ParameterSet,
};
use semfield_core::geometry::Vec3;
use semfield_core::metrics::{mask_iou, psnr, ssim, Image, SsimConfig};
use semfield_core::render::{
    composite_ray, edit_mask, render_image, render_unique_display, weights, EditMode,
    RenderSettings, SamplingConfig,
};
use semfield_core::scene::{default_desk_scene, generate_scene, Orbit, SceneDataset};
use semfield_core::seed::{stream, Purpose};
use semfield_core::selfsup::{correct_semantic_map, SelfSupSchedule};
use semfield_core::train::{
    area_ratio, batch_loss_and_grad, color_difference, find_reset_color, focal_semantic_loss,
    focal_term, FastTrainConfig, LossSettings, RayBatch, TrainConfig, TrainMode, Trainer,
};
use semfield_core::{ClassId, UNLABELED};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn(&mut Shared) -> Outcome);

const EVAL_SAMPLING: SamplingConfig = SamplingConfig {
    coarse: 32,
    fine: 32,
    perturb: false,
};

fn main() {
    let only: Option<Vec<usize>> = std::env::var("SEMFIELD_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let criteria: [Criterion; 13] = [
        ("gradient oracle", gradient_oracle),
        ("rendering oracle", rendering_oracle),
        ("mask algebra", mask_algebra),
        ("loss identities", loss_identities),
        ("metrics", metrics),
        ("color difference", color_differences),
        ("end-to-end training", end_to_end),
        ("fast training", fast_training),
        ("ray-order ablation", ray_order),
        ("semantic-only reconstruction", semantic_only),
        ("sampling-rate sweeps", sweeps),
        ("self-supervision A/B", selfsup_ab),
        ("editing contracts", editing),
    ];
    let mut shared = Shared::default();
    let (mut run, mut failed) = (0, Vec::new());
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let (ok, detail) = match check(&mut shared) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        run += 1;
        if !ok {
            failed.push(id.to_string());
        }
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.0} s]",
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    if failed.is_empty() {
        println!("{run}/{run} criteria passed");
    } else {
        println!(
            "{}/{run} criteria passed; failing: {}",
            run - failed.len(),
            failed.join(", ")
        );
        if std::env::var("SEMFIELD_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}

/// The trained desk model, kept for the editing checks.
#[derive(Default)]
struct Shared {
    desk: Option<(SceneDataset, ParameterSet<f32>)>,
}

fn desk(size: usize, seed: u64) -> SceneDataset {
    let orbit = Orbit {
        width: size,
        height: size,
        ..Orbit::default()
    };
    generate_scene(&default_desk_scene(), 16, &orbit, seed).expect("desk scene")
}

fn train_config(iterations: usize, batch: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        batch_size: batch,
        semantic_only_iterations: 200,
        log_every: 0,
        sampling: SamplingConfig {
            coarse: 32,
            fine: 32,
            perturb: true,
        },
        ..TrainConfig::default()
    }
}

fn arch_for(ds: &SceneDataset) -> NetworkArchitecture {
    NetworkArchitecture {
        class_count: ds.class_count,
        ..NetworkArchitecture::default()
    }
}

/// Trains on the training split; returns the parameters and seconds per step.
fn train(ds: &SceneDataset, cfg: TrainConfig) -> semfield_core::Result<(ParameterSet<f32>, f64)> {
    let mut t = Trainer::<f32>::new(ds.train_split(), arch_for(ds), cfg)?;
    let t0 = Instant::now();
    while t.iteration() < t.config().iterations {
        t.step()?;
    }
    let per_step = t0.elapsed().as_secs_f64() / t.iteration().max(1) as f64;
    Ok((t.into_params(), per_step))
}

fn held_out(
    params: &ParameterSet<f32>,
    ds: &SceneDataset,
    region: &SsimRegion,
) -> semfield::Result<EvalReport> {
    evaluate(params, ds, &ds.test_indices(), &EVAL_SAMPLING, region, 0, 1)
}

// 1 -------------------------------------------------------------------------

fn unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [0; 3].map(|_| rng.gen_range(-1.0f64..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.2 && n < 1.0 {
            return v.map(|x| x / n);
        }
    }
}

fn gradient_oracle(_: &mut Shared) -> Outcome {
    const H: f64 = 1e-6;
    let t0 = Instant::now();
    let arch = NetworkArchitecture {
        trunk_depth: 2,
        trunk_width: 12,
        position_encoding_levels: 2,
        direction_encoding_levels: 1,
        class_count: 3,
    };
    let n_params = arch.parameter_count();
    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        let mut rng = stream(seed, Purpose::Eval, 7);
        let base = init_params::<f64>(arch, seed)?;
        let values: Vec<f64> = base
            .values()
            .iter()
            .map(|v| v + rng.gen_range(-0.3..0.3))
            .collect();
        let params = ParameterSet::from_values(arch, values)?;
        let (kc, nf) = (6, 4);
        let (near, far) = (0.4, 2.6);
        let rays: Vec<reference::RefRay> = (0..4)
            .map(|i| {
                let w = (far - near) / kc as f64;
                let mut fine: Vec<f64> = (0..nf).map(|_| rng.gen_range(near..far)).collect();
                fine.sort_by(f64::total_cmp);
                reference::RefRay {
                    origin: [0; 3].map(|_| rng.gen_range(-0.8..0.8)),
                    dir: unit(&mut rng),
                    near,
                    far,
                    coarse_t: (0..kc)
                        .map(|k| near + w * (k as f64 + rng.gen_range(0.05..0.95)))
                        .collect(),
                    fine_t: fine,
                    color: [0; 3].map(|_| rng.gen_range(0.0..1.0)),
                    label: (i != 3).then(|| rng.gen_range(0..3)),
                }
            })
            .collect();
        let settings = LossSettings {
            lambda: 0.5,
            gamma: 1.0 + seed as f64 * 0.5,
            photometric: true,
            white_background: seed == 1,
        };
        let rs = reference::RefSettings {
            lambda: settings.lambda,
            gamma: settings.gamma,
            photometric: true,
            white_background: settings.white_background,
        };
        let lib_rays: Vec<Ray> = rays
            .iter()
            .map(|r| Ray::new(Vec3(r.origin), Vec3(r.dir), r.near, r.far))
            .collect::<Result<_, _>>()?;
        let coarse_t: Vec<f64> = rays.iter().flat_map(|r| r.coarse_t.clone()).collect();
        let fine_t: Vec<f64> = rays.iter().flat_map(|r| r.fine_t.clone()).collect();
        let colors: Vec<[f64; 3]> = rays.iter().map(|r| r.color).collect();
        let labels: Vec<ClassId> = rays
            .iter()
            .map(|r| r.label.map_or(UNLABELED, |l| l as ClassId))
            .collect();
        let batch = RayBatch {
            rays: &lib_rays,
            coarse_t: &coarse_t,
            fine_t: &fine_t,
            coarse: kc,
            fine: nf,
            colors: &colors,
            labels: &labels,
        };
        let mut grads = params.zeros_like();
        batch_loss_and_grad(&params, &batch, &settings, Some(&mut grads))?;
        let mut p = params.values().to_vec();
        for i in 0..p.len() {
            let x = p[i];
            p[i] = x + H;
            let up = reference::loss(&arch, &p, &rays, &rs).2;
            p[i] = x - H;
            let down = reference::loss(&arch, &p, &rays, &rs).2;
            p[i] = x;
            let numeric = (up - down) / (2.0 * H);
            let a = grads[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-4 && secs < 60.0 && n_params <= 1000,
        format!("max relative error {worst:.2e} over {n_params} parameters in {secs:.1} s"),
    ))
}

// 2 -------------------------------------------------------------------------

fn rendering_oracle(_: &mut Shared) -> Outcome {
    let k = 256;
    let (near, far) = (0.0, 2.0);
    let delta = (far - near) / k as f64;
    let samples: Vec<FieldOutput<f64>> = (0..k)
        .map(|_| FieldOutput {
            sigma: 1.0,
            rgb: [0.5; 3],
            logits: vec![0.0],
        })
        .collect();
    let t: Vec<f64> = (0..k).map(|i| near + (i as f64 + 0.5) * delta).collect();
    let r = composite_ray(&samples, &t, &vec![delta; k], None, false)?;
    let e2 = (-2.0f64).exp();
    let want_color = 0.5 * (1.0 - e2);
    let want_depth = (1.0 - 3.0 * e2) / (1.0 - e2);
    let color_err = r
        .color
        .iter()
        .map(|c| (c - want_color).abs() / want_color)
        .fold(0.0, f64::max);
    let depth_err = (r.depth - want_depth).abs() / want_depth;
    Ok((
        color_err <= 0.01 && depth_err <= 0.01,
        format!(
            "color {:.5} (closed form {want_color:.5}), depth {:.4} (closed form {want_depth:.4})",
            r.color[0], r.depth
        ),
    ))
}

// 3 -------------------------------------------------------------------------

fn mask_algebra(_: &mut Shared) -> Outcome {
    let mut rng = stream(3, Purpose::Eval, 0);
    let (bg, classes) = (0 as ClassId, 5 as ClassId);
    let mut complement = true;
    let mut identical = true;
    for _ in 0..500 {
        let n = rng.gen_range(1..64);
        let labels: Vec<ClassId> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        let ob = rng.gen_range(1..classes);
        let keep = edit_mask(&labels, EditMode::UniqueDisplay { ob }, bg);
        let drop = edit_mask(&labels, EditMode::MaskOut { ob }, bg);
        complement &= labels
            .iter()
            .zip(keep.iter().zip(&drop))
            .all(|(l, (a, b))| *l == bg || a != b);

        let sigma: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen_range(0.0..30.0)
                }
            })
            .collect();
        let delta: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..0.2)).collect();
        let plain = weights(&sigma, &delta, None)?;
        let ones = weights(&sigma, &delta, Some(&vec![true; n]))?;
        identical &= plain
            .iter()
            .zip(&ones)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    }

    // a ray through background with scattered points voting for `ob`
    let (ob, other) = (2 as ClassId, 1 as ClassId);
    let sentinel = [0.25, 0.5, 0.75];
    let mut suppressed = 0;
    let trials = 200;
    for _ in 0..trials {
        let samples: Vec<FieldOutput<f64>> = (0..64)
            .map(|_| {
                let class = match rng.gen_range(0..20) {
                    0 => ob,
                    1..=5 => other,
                    _ => bg,
                };
                let mut logits = vec![0.0; 3];
                logits[class as usize] = rng.gen_range(2.0..4.0);
                FieldOutput {
                    sigma: rng.gen_range(0.5..2.0),
                    rgb: [0.9, 0.1, 0.1],
                    logits,
                }
            })
            .collect();
        let t: Vec<f64> = (0..64).map(|i| 1.0 + i as f64 * 0.05).collect();
        let r = render_unique_display(&samples, &t, &[0.05; 64], ob, bg, false, sentinel)?;
        suppressed += (r.label != ob && r.color == sentinel) as usize;
    }
    Ok((
        complement && identical && suppressed == trials,
        format!(
            "complementary masks {complement}, unmasked weights bitwise equal {identical}, noisy rays suppressed {suppressed}/{trials}"
        ),
    ))
}

// 4 -------------------------------------------------------------------------

fn loss_identities(_: &mut Shared) -> Outcome {
    let mut ce_err: f64 = 0.0;
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        ce_err = ce_err.max((focal_term(p, 0.0) + p.ln()).abs());
    }

    // total loss against lambda on a real batch
    let arch = NetworkArchitecture {
        trunk_depth: 1,
        trunk_width: 8,
        position_encoding_levels: 2,
        direction_encoding_levels: 1,
        class_count: 3,
    };
    let params = init_params::<f64>(arch, 5)?;
    let mut rng = stream(5, Purpose::Eval, 0);
    let rays: Vec<Ray> = (0..6)
        .map(|_| Ray::new(Vec3([0.1, -0.2, 0.3]), Vec3(unit(&mut rng)), 0.5, 2.5))
        .collect::<Result<_, _>>()?;
    let coarse_t: Vec<f64> = (0..6)
        .flat_map(|_| (0..8).map(|k| 0.5 + 0.25 * k as f64 + 0.1))
        .collect();
    let fine_t: Vec<f64> = (0..6)
        .flat_map(|_| (0..4).map(|k| 0.7 + 0.4 * k as f64))
        .collect();
    let colors: Vec<[f64; 3]> = (0..6)
        .map(|_| [0; 3].map(|_| rng.gen_range(0.0..1.0)))
        .collect();
    let labels: Vec<ClassId> = vec![0, 1, 2, UNLABELED, 1, 0];
    let batch = RayBatch {
        rays: &rays,
        coarse_t: &coarse_t,
        fine_t: &fine_t,
        coarse: 8,
        fine: 4,
        colors: &colors,
        labels: &labels,
    };
    let at = |lambda: f64| {
        batch_loss_and_grad(
            &params,
            &batch,
            &LossSettings {
                lambda,
                gamma: 1.0,
                photometric: true,
                white_background: false,
            },
            None,
        )
    };
    let mut affine_err: f64 = 0.0;
    let base = at(0.0)?;
    for lambda in [0.01, 0.04, 0.5, 2.0] {
        let r = at(lambda)?;
        affine_err = affine_err.max((r.total - (base.loss_p + lambda * r.loss_s)).abs());
        affine_err = affine_err.max((r.loss_s - base.loss_s).abs());
    }

    let probs: &[f64] = &[0.9, 0.1];
    let focal = focal_semantic_loss(&[probs], &[probs], &[0], 1.0);
    let focal_err = (focal - 0.021072).abs();
    Ok((
        ce_err <= 1e-12 && affine_err <= 1e-12 && focal_err <= 1e-6,
        format!("cross-entropy gap {ce_err:.1e}, affine gap {affine_err:.1e}, focal(p=0.9, gamma=1) over both passes {focal:.6}"),
    ))
}

// 5 -------------------------------------------------------------------------

fn metrics(_: &mut Shared) -> Outcome {
    let (w, h) = (48, 40);
    let base: Vec<f64> = (0..w * h * 3)
        .map(|i| 40.0 + ((i * 37) % 170) as f64)
        .collect();
    let gt = Image::new(w, h, 3, base.clone())?;
    let cfg = SsimConfig::with_range(255.0);
    let self_ssim = ssim(&gt.luma(), &gt.luma(), &cfg)?;
    let shifted = Image::new(w, h, 3, base.iter().map(|v| v + 10.0).collect())?;
    let p10 = psnr(&gt, &shifted, 255.0)?;
    let mut rng = stream(5, Purpose::Eval, 0);
    let noise: Vec<f64> = (0..base.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut values = Vec::new();
    for amp in [2.0, 4.0, 8.0, 16.0, 32.0] {
        let noisy: Vec<f64> = base.iter().zip(&noise).map(|(v, n)| v + amp * n).collect();
        values.push(psnr(&gt, &Image::new(w, h, 3, noisy)?, 255.0)?);
    }
    let monotone = values.windows(2).all(|p| p[1] < p[0]);
    Ok((
        self_ssim == 1.0 && (p10 - 28.13).abs() <= 0.01 && monotone,
        format!("SSIM(x,x) = {self_ssim}, uniform-10 PSNR {p10:.4} dB, noise PSNRs {values:.2?}"),
    ))
}

// 6 -------------------------------------------------------------------------

fn color_differences(_: &mut Shared) -> Outcome {
    let bw = color_difference([0.0; 3], [255.0; 3])?;
    let rg = color_difference([255.0, 0.0, 0.0], [0.0, 255.0, 0.0])?;
    let same = color_difference([12.0, 200.0, 90.0], [12.0, 200.0, 90.0])?;
    let values_ok = (bw - 764.83).abs() <= 0.01 && (rg - 650.03).abs() <= 0.01 && same == 0.0;

    let mut rng = stream(6, Purpose::Eval, 0);
    let mut dominated = 0;
    let trials = 500;
    for _ in 0..trials {
        let mean = [0; 3].map(|_| rng.gen_range(0.0..=255.0));
        let reset = find_reset_color(mean)?;
        let d = color_difference(mean, reset)?;
        let mut ok = true;
        for corner in 0..8 {
            let c = [0, 1, 2].map(|b| if corner >> b & 1 == 1 { 255.0 } else { 0.0 });
            ok &= d >= color_difference(mean, c)?;
        }
        dominated += ok as usize;
    }
    Ok((
        values_ok && dominated == trials,
        format!("black/white {bw:.2}, red/green {rg:.2}, equal {same}; reset color beats every corner for {dominated}/{trials} means"),
    ))
}

// 7 -------------------------------------------------------------------------

const DESK_ITERATIONS: usize = 5000;

fn trained_desk(
    shared: &mut Shared,
) -> semfield_core::Result<(&SceneDataset, &ParameterSet<f32>, Option<f64>)> {
    let mut secs = None;
    if shared.desk.is_none() {
        let ds = desk(64, 1);
        let t0 = Instant::now();
        let (params, _) = train(&ds, train_config(DESK_ITERATIONS, 512))?;
        secs = Some(t0.elapsed().as_secs_f64());
        shared.desk = Some((ds, params));
    }
    let (ds, params) = shared.desk.as_ref().expect("trained above");
    Ok((ds, params, secs))
}

fn end_to_end(shared: &mut Shared) -> Outcome {
    let (ds, params, secs) = trained_desk(shared)?;
    let secs = secs.unwrap_or(f64::NAN);
    let report = held_out(params, ds, &SsimRegion::Full)?;
    let acc = report.pixel_accuracy.unwrap_or(0.0);
    let psnr = report.mean_psnr.0;
    Ok((
        psnr >= 22.0 && acc >= 0.95 && secs <= 7200.0,
        format!("{DESK_ITERATIONS} iterations in {secs:.0} s: held-out PSNR {psnr:.2} dB, pixel accuracy {acc:.4}"),
    ))
}

// 8 -------------------------------------------------------------------------

const FAST_TARGET: ClassId = 2;
const FAST_SSIM_THRESHOLD: f64 = 0.8;
const FAST_BUDGET: usize = 2000;
const FAST_EVAL_EVERY: usize = 100;

struct Curve {
    ssim: Vec<(usize, f64)>,
    step_seconds: f64,
    supervised_rays: usize,
}

fn ssim_curve(ds: &SceneDataset, mode: TrainMode) -> semfield::Result<Curve> {
    let mut cfg = train_config(FAST_BUDGET, 256);
    cfg.mode = mode;
    cfg.semantic_only_iterations = 100;
    cfg.fast = FastTrainConfig {
        target_classes: vec![FAST_TARGET],
        ..FastTrainConfig::default()
    };
    let mut t = Trainer::<f32>::new(ds.train_split(), arch_for(ds), cfg)?;
    let supervised_rays = t.records().len();
    let region = SsimRegion::Target(vec![FAST_TARGET]);
    let mut ssim = Vec::new();
    let mut stepping = 0.0;
    while t.iteration() < FAST_BUDGET {
        let t0 = Instant::now();
        t.step()?;
        stepping += t0.elapsed().as_secs_f64();
        if t.iteration() % FAST_EVAL_EVERY == 0 {
            ssim.push((
                t.iteration(),
                held_out(t.params(), ds, &region)?.mean_ssim.unwrap_or(0.0),
            ));
        }
    }
    Ok(Curve {
        ssim,
        step_seconds: stepping / FAST_BUDGET as f64,
        supervised_rays,
    })
}

fn fast_training(_: &mut Shared) -> Outcome {
    let ds = desk(64, 1);
    let alpha = area_ratio(&ds.train_split(), &[FAST_TARGET])?;
    let full = ssim_curve(&ds, TrainMode::Full)?;
    let fast = ssim_curve(&ds, TrainMode::Fast)?;
    let reach = |c: &Curve| {
        c.ssim
            .iter()
            .find(|(_, s)| *s >= FAST_SSIM_THRESHOLD)
            .map(|(i, _)| *i)
    };
    let (reach_full, reach_fast) = (reach(&full), reach(&fast));
    // a full run that never gets there took more than the budget
    let speedup_ok = match (reach_fast, reach_full) {
        (Some(f), Some(g)) => 3 * f <= g,
        (Some(f), None) => 3 * f <= FAST_BUDGET,
        _ => false,
    };
    let wins = full
        .ssim
        .iter()
        .zip(&fast.ssim)
        .filter(|(a, b)| b.1 > a.1)
        .count();
    let last_full = full.ssim.last().map_or(0.0, |p| p.1);
    let last_fast = fast.ssim.last().map_or(0.0, |p| p.1);
    let pass_cost = |c: &Curve, batch: f64| c.step_seconds * c.supervised_rays as f64 / batch;
    let (pass_full, pass_fast) = (pass_cost(&full, 256.0), pass_cost(&fast, 256.0));
    let show = |r: Option<usize>| r.map_or(format!(">{FAST_BUDGET}"), |i| i.to_string());
    Ok((
        alpha <= 0.1 && speedup_ok && last_fast > last_full && fast.step_seconds < full.step_seconds,
        format!(
            "area ratio {alpha:.3}; target SSIM {FAST_SSIM_THRESHOLD} reached at {} (fast) vs {} (full); \
             at {FAST_BUDGET} iterations {last_fast:.3} vs {last_full:.3}, fast ahead at {wins}/{} checkpoints; \
             {} vs {} supervised rays, {:.1} vs {:.1} ms per step, {:.1} vs {:.1} s per pass over them",
            show(reach_fast),
            show(reach_full),
            full.ssim.len(),
            fast.supervised_rays,
            full.supervised_rays,
            fast.step_seconds * 1e3,
            full.step_seconds * 1e3,
            pass_fast,
            pass_full,
        ),
    ))
}

// 9 -------------------------------------------------------------------------

fn ray_order(_: &mut Shared) -> Outcome {
    let ds = desk(32, 1);
    let iterations = 1500;
    let mut psnrs = Vec::new();
    for order in [
        semfield_core::sampling::RayOrder::Shuffled,
        semfield_core::sampling::RayOrder::RowMajor,
    ] {
        let cfg = TrainConfig {
            ray_order: order,
            ..train_config(iterations, 256)
        };
        let (params, _) = train(&ds, cfg)?;
        psnrs.push(held_out(&params, &ds, &SsimRegion::Full)?.mean_psnr.0);
    }
    let gap = psnrs[0] - psnrs[1];
    Ok((
        gap >= 2.0,
        format!(
            "{iterations} iterations: shuffled {:.2} dB, row-major {:.2} dB, gap {gap:.2} dB",
            psnrs[0], psnrs[1]
        ),
    ))
}

// 10 ------------------------------------------------------------------------

/// Opacity of the points whose most likely class is not `bg`, from dense
/// uniform marching; a label-only model carries no color to separate
/// background surfaces from empty space, but it must place object density.
fn foreground_opacity(
    params: &ParameterSet<f32>,
    ds: &SceneDataset,
    frame: usize,
    bg: ClassId,
) -> semfield_core::Result<Vec<f64>> {
    const K: usize = 256;
    let field = Field::new(params);
    let view = ds.view(frame);
    let classes = params.architecture().class_count;
    let mut out = Vec::with_capacity(ds.width() * ds.height());
    for r in 0..ds.height() {
        for c in 0..ds.width() {
            let ray = view.ray(r, c)?;
            let delta = (ray.t_far - ray.t_near) / K as f64;
            let pos: Vec<[f32; 3]> = (0..K)
                .map(|k| {
                    ray.at(ray.t_near + (k as f64 + 0.5) * delta)
                        .0
                        .map(|v| v as f32)
                })
                .collect();
            let geo = field.geometry(&pos);
            let keep: Vec<bool> = geo
                .logits
                .chunks(classes)
                .map(|l| argmax(l) as ClassId != bg)
                .collect();
            let sigma: Vec<f64> = geo.sigma.iter().map(|s| *s as f64).collect();
            out.push(weights(&sigma, &vec![delta; K], Some(&keep))?.iter().sum());
        }
    }
    Ok(out)
}

fn semantic_only(_: &mut Shared) -> Outcome {
    let ds = desk(64, 1);
    let iterations = 2000;
    let cfg = TrainConfig {
        mode: TrainMode::SemanticOnly,
        ..train_config(iterations, 256)
    };
    let (params, _) = train(&ds, cfg)?;
    let bg = ds.background_class;
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for f in ds.test_indices() {
        pred.extend(
            foreground_opacity(&params, &ds, f, bg)?
                .iter()
                .map(|o| *o > 0.5),
        );
        truth.extend(ds.frames[f].labels.iter().map(|l| *l != bg));
    }
    let iou = mask_iou(&pred, &truth)?;
    let both = pred.iter().zip(&truth).filter(|(p, t)| **p && **t).count() as f64;
    let (npred, ntrue) = (
        pred.iter().filter(|p| **p).count() as f64,
        truth.iter().filter(|t| **t).count() as f64,
    );
    Ok((
        iou >= 0.7,
        format!(
            "{iterations} label-only iterations: foreground opacity-mask IoU {iou:.3}, precision {:.3}, recall {:.3} \
             (objects cover {:.3} of held-out pixels)",
            both / npred.max(1.0),
            both / ntrue.max(1.0),
            ntrue / truth.len() as f64
        ),
    ))
}

// 11 ------------------------------------------------------------------------

fn sweeps(_: &mut Shared) -> Outcome {
    let dir = tempfile::tempdir()?;
    let ds = desk(32, 1);
    write_dataset(&ds, &dir.path().join("data"))?;
    let mut base = RunConfig::new(dir.path().join("data"), dir.path().join("out"));
    base.architecture.class_count = ds.class_count;
    base.checkpoint_every = 0;
    base.train = train_config(800, 256);
    base.train.semantic_only_iterations = 100;
    base.train.fast.target_classes = vec![FAST_TARGET];

    let mut fast = base.clone();
    fast.train.mode = TrainMode::Fast;
    let rates = [0.05, 0.15, 0.3, 0.6, 1.0];
    let neg = run_sweep(&fast, SweepParam::NegativeSamplingRate, &rates, 1)?;
    let ssim: Vec<f64> = neg
        .rows
        .iter()
        .map(|r| r.mean_ssim.unwrap_or(0.0))
        .collect();
    let best = (0..ssim.len())
        .max_by(|a, b| ssim[*a].total_cmp(&ssim[*b]))
        .unwrap_or(0);
    let interior = best != 0 && best != ssim.len() - 1;
    let shape = ssim[3] < ssim[1];

    let labels = run_sweep(&base, SweepParam::LabelSamplingRate, &[0.25, 1.0], 1)?;
    let l: Vec<f64> = labels
        .rows
        .iter()
        .map(|r| r.mean_ssim.unwrap_or(0.0))
        .collect();
    let drop = l[1] - l[0];
    Ok((
        interior && shape && drop <= 0.1,
        format!(
            "negative rates {rates:?} give target SSIM {ssim:.3?} (maximum at {}); labels at 25% vs 100% give SSIM {:.3} vs {:.3}",
            rates[best], l[0], l[1]
        ),
    ))
}

// 12 ------------------------------------------------------------------------

const OCCLUDED: ClassId = 2;
const OCCLUDER: ClassId = 1;

/// Unlabels pixels of the occluded object within `reach` pixels of its occluder.
fn hide_occlusion(ds: &SceneDataset, reach: usize) -> SceneDataset {
    let mut out = ds.clone();
    let (w, h) = (ds.width(), ds.height());
    for (f, frame) in out.frames.iter_mut().enumerate() {
        let src = &ds.frames[f].labels;
        for r in 0..h {
            for c in 0..w {
                if src[r * w + c] != OCCLUDED {
                    continue;
                }
                let near = (r.saturating_sub(reach)..(r + reach + 1).min(h)).any(|rr| {
                    (c.saturating_sub(reach)..(c + reach + 1).min(w))
                        .any(|cc| src[rr * w + cc] == OCCLUDER)
                });
                if near {
                    frame.labels[r * w + c] = UNLABELED;
                }
            }
        }
    }
    out
}

fn selfsup_ab(_: &mut Shared) -> Outcome {
    let full = desk(64, 1);
    let hidden = hide_occlusion(&full, 3);
    let train_split = hidden.train_split();
    let unlabeled: usize = train_split
        .frames
        .iter()
        .map(|f| f.labels.iter().filter(|l| **l == UNLABELED).count())
        .sum();
    let schedule = SelfSupSchedule {
        targets: vec![OCCLUDED],
        ..SelfSupSchedule::default()
    };
    // corrections after 2000 and 3000 iterations
    let iterations = 3500;
    let mut acc = Vec::new();
    let mut with_loop = None;
    for selfsup in [None, Some(schedule.clone())] {
        let cfg = TrainConfig {
            selfsup: selfsup.clone(),
            ..train_config(iterations, 256)
        };
        let mut t = Trainer::<f32>::new(train_split.clone(), arch_for(&full), cfg)?;
        while t.iteration() < iterations {
            t.step()?;
        }
        let params = t.into_params();
        // held-out views keep every label
        acc.push(
            held_out(&params, &full, &SsimRegion::Full)?
                .pixel_accuracy
                .unwrap_or(0.0),
        );
        if selfsup.is_some() {
            with_loop = Some(params);
        }
    }
    let params = with_loop.expect("second run");

    // speckle left after correcting maps with 1% injected label noise
    let (w, h) = (full.width(), full.height());
    let settings = RenderSettings {
        edit: EditMode::UniqueDisplay { ob: OCCLUDED },
        bg: full.background_class,
        ..Default::default()
    };
    let mut rng = stream(12, Purpose::Eval, 0);
    let (mut flipped, mut wrong, mut total) = (0, 0, 0);
    for f in full.test_indices() {
        let map = render_image(&params, &full.view(f), &settings, &EVAL_SAMPLING, 0)?.labels;
        let clean = correct_semantic_map(
            &map,
            w,
            h,
            OCCLUDED,
            full.background_class,
            &schedule,
            &mut rng,
        )?
        .labels;
        let mut noisy = clean.clone();
        for _ in 0..(w * h) / 100 {
            let i = rng.gen_range(0..w * h);
            noisy[i] = (noisy[i] + rng.gen_range(1..full.class_count as ClassId))
                % full.class_count as ClassId;
        }
        flipped += clean
            .iter()
            .zip(&noisy)
            .filter(|(a, b)| (**a == OCCLUDED) != (**b == OCCLUDED))
            .count();
        let fixed = correct_semantic_map(
            &noisy,
            w,
            h,
            OCCLUDED,
            full.background_class,
            &schedule,
            &mut rng,
        )?
        .labels;
        wrong += clean
            .iter()
            .zip(&fixed)
            .filter(|(a, b)| (**a == OCCLUDED) != (**b == OCCLUDED))
            .count();
        total += w * h;
    }
    let speckle = wrong as f64 / total as f64;
    Ok((
        acc[1] >= acc[0] && speckle < 0.001,
        format!(
            "{unlabeled} occlusion pixels unlabeled; held-out accuracy {:.4} with the loop vs {:.4} without; \
             speckle {:.3}% after injecting noise that flipped {:.3}% of the target mask",
            acc[1],
            acc[0],
            100.0 * speckle,
            100.0 * flipped as f64 / total as f64
        ),
    ))
}

// 13 ------------------------------------------------------------------------

fn editing(shared: &mut Shared) -> Outcome {
    let (ds, params, _) = trained_desk(shared)?;
    let sentinel = [1.0, 0.0, 1.0];
    let base = RenderSettings {
        bg: ds.background_class,
        white_background: ds.white_background,
        sentinel,
        ..Default::default()
    };
    let frames = ds.test_indices();
    let (mut leaked, mut stray) = (0, 0);
    for ob in 1..ds.class_count as ClassId {
        for &f in &frames {
            let masked = render_image(
                params,
                &ds.view(f),
                &RenderSettings {
                    edit: EditMode::MaskOut { ob },
                    ..base
                },
                &EVAL_SAMPLING,
                0,
            )?;
            leaked += masked.labels.iter().filter(|l| **l == ob).count();
            let unique = render_image(
                params,
                &ds.view(f),
                &RenderSettings {
                    edit: EditMode::UniqueDisplay { ob },
                    ..base
                },
                &EVAL_SAMPLING,
                0,
            )?;
            let sentinel32 = sentinel.map(|v| v as f32);
            stray += unique
                .labels
                .iter()
                .zip(&unique.rgb)
                .filter(|(l, c)| **l != ob && **c != sentinel32)
                .count();
        }
    }

    // the smallest object against the whole scene, best of three
    let small = (1..ds.class_count as ClassId)
        .min_by_key(|c| {
            ds.frames
                .iter()
                .map(|f| f.labels.iter().filter(|l| *l == c).count())
                .sum::<usize>()
        })
        .unwrap_or(1);
    let time = |settings: RenderSettings| -> semfield_core::Result<f64> {
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t0 = Instant::now();
            for &f in &frames {
                render_image(params, &ds.view(f), &settings, &EVAL_SAMPLING, 0)?;
            }
            best = best.min(t0.elapsed().as_secs_f64());
        }
        Ok(best)
    };
    let full_time = time(base)?;
    let edit_time = time(RenderSettings {
        edit: EditMode::UniqueDisplay { ob: small },
        ..base
    })?;
    Ok((
        leaked == 0 && stray == 0 && edit_time < full_time,
        format!(
            "target pixels left after masking {leaked}, unique-display pixels outside {{ob, sentinel}} {stray}; \
             rendering class {small} alone {:.0} ms vs full scene {:.0} ms",
            edit_time * 1e3,
            full_time * 1e3
        ),
    ))
}
