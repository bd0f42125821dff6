//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness and exits non-zero when any criterion fails.

mod common;

use std::f64::consts::{E, PI};
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use relulab::arrangement::{self, SparseTopeGraph};
use relulab::barrier::{self, FnObjective};
use relulab::bounds::{self, BoundInputs};
use relulab::harness::experiment::{REPORT_FILE, TRACE_FILE};
use relulab::harness::{run_experiment, RunOutput};
use relulab::kakeya;
use relulab::optim::{self, OptimConfig, OptimState};
use relulab::relunet::{self, Params};
use relulab::trace;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (params, data) = gradient_case(seed, 1e-3);
        let (_, g) = relunet::loss_and_grad(&params, &data).unwrap();
        worst = worst.max(rel_error(g.as_slice(), &fd_gradient(&params, &data, 1e-6)));
    }
    let el = start.elapsed();
    outcome(
        worst < 1e-5 && within(el, 10),
        format!("max relative error {worst:.3e} over 100 pairs in {:.2}s", el.as_secs_f64()),
    )
}

fn adam_identity() -> Outcome {
    let dims = [2, 2, 1];
    let g: Vec<f64> = vec![0.3, -2.0, 1e-4, -7.5, 0.01, -0.02, 4.0, -1e-3, 0.5];
    let grad = Params::from_flat(&dims, g.clone()).unwrap();
    let params = Params::zeros(&dims).unwrap();
    let cfg = OptimConfig {
        epsilon: 0.0,
        ..OptimConfig::default()
    };
    let step = optim::adam_step(&params, &grad, &OptimState::new(g.len()), &cfg).unwrap();
    let a1 = cfg.schedule.alpha(1).unwrap();
    let first = step
        .delta
        .as_slice()
        .iter()
        .zip(&g)
        .map(|(d, gi)| (d + a1 * gi.signum()).abs())
        .fold(0.0, f64::max);

    let mut state = OptimState::new(g.len());
    let mut p = params;
    let mut last = Vec::new();
    for _ in 0..500 {
        let s = optim::adam_step(&p, &grad, &state, &cfg).unwrap();
        last = s.delta.as_slice().iter().map(|d| d / s.alpha).collect();
        p = s.params;
        state = s.state;
    }
    let conv = last
        .iter()
        .zip(&g)
        .map(|(d, gi)| (d + gi.signum()).abs())
        .fold(0.0, f64::max);
    outcome(
        first <= 1e-12 && conv <= 1e-6,
        format!("first-step deviation {first:.1e}, sign deviation at t=500 {conv:.1e}"),
    )
}

fn zaslavsky_oracle() -> Outcome {
    let start = Instant::now();
    let cases: Vec<(usize, usize, u64)> = (1..=8)
        .flat_map(|n| (1..=3).flat_map(move |d| (0..20).map(move |s| (n, d, s))))
        .collect();
    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|&(n, d, s)| {
            let arr = random_arrangement(n, d, 1000 * n as u64 + 100 * d as u64 + s);
            let c = arrangement::verify_zaslavsky(&arr).unwrap();
            (c.exact > c.bound || !c.tight).then(|| format!("N={n} d={d} seed={s}: {} vs {}", c.exact, c.bound))
        })
        .collect();
    let conc = arrangement::verify_zaslavsky(&concurrent_lines()).unwrap();
    let el = start.elapsed();
    outcome(
        failures.is_empty() && conc.exact == 6 && conc.bound == 7 && within(el, 60),
        format!(
            "{} generic instances, {} mismatches; concurrent lines {} < {}; {:.2}s",
            cases.len(),
            failures.len(),
            conc.exact,
            conc.bound,
            el.as_secs_f64()
        ),
    )
}

fn tope_diameter() -> Outcome {
    // The distance between two k-sparse patterns is their Hamming distance,
    // which cannot exceed N; the value 2k is reached only once N >= 2k.
    let mut checked = 0;
    let mut bad = Vec::new();
    for k in 1..=4 {
        for n in 1..=10 {
            let diam = SparseTopeGraph::new(n, k).unwrap().diameter();
            let expected = (2 * k).min(n);
            checked += 1;
            if diam != expected {
                bad.push(format!("N={n} k={k}: {diam}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{checked} (N, k) pairs; diameter 2k whenever N >= 2k, N otherwise; mismatches {bad:?}"),
    )
}

fn mask_freeze(run: &RunOutput, elapsed: Duration) -> Outcome {
    let s = &run.summary;
    let late: u64 = run.records.iter().filter(|r| r.t >= s.t0_emp).map(|r| r.sign_flips).sum();
    let n = run.trajectory[0].hidden_neurons() as u64;
    let bound = bounds::sparse_tope_bound(n, s.t0_emp, s.k_max, s.k_star).unwrap();
    outcome(
        s.t0_emp < 5000 && late == 0 && s.crossings <= bound && within(elapsed, 120),
        format!(
            "T0_emp {}, flips after T0 {late}, crossings {} <= {bound}, loss {:.3e} -> {:.3e}, {:.2}s",
            s.t0_emp,
            s.crossings,
            s.initial_loss,
            s.final_loss,
            elapsed.as_secs_f64()
        ),
    )
}

fn stability(run: &RunOutput) -> Outcome {
    let viol = trace::stability_violations(&run.records);
    let inside = run.records.iter().filter(|r| trace::in_stability_radius(r)).count();
    outcome(
        viol.is_empty(),
        format!("{inside} steps inside the radius, {} violations", viol.len()),
    )
}

fn spectral_floor() -> Outcome {
    let stream = FloorStream::standard();
    let (beta2, delta, lambda) = (0.99, 0.5, 0.25);
    let t1 = bounds::t1_spectral(&BoundInputs {
        b_grad: Some(stream.coord_bound()),
        tau: Some(0.0),
        beta2: Some(beta2),
        delta_floor: Some(delta),
        lambda_se: Some(lambda),
        d_eff: Some(2.0),
        n_neurons: Some(1.0),
        ..Default::default()
    })
    .unwrap();
    let from = t1.ceil() as u64;
    let floor = (1.0 - delta) * lambda;
    let ok = (0..100u64)
        .into_par_iter()
        .filter(|&s| stream.min_vhat_after(s, beta2, from, from + 2000) >= floor)
        .count();
    outcome(ok >= 95, format!("T1 = {from}; {ok}/100 seeds keep min v_hat >= {floor}"))
}

fn deff_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Orthonormal 3-frame in 50 dims by Gram-Schmidt.
    let mut frame: Vec<Vec<f64>> = Vec::new();
    while frame.len() < 3 {
        let mut v: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
        for f in &frame {
            let d: f64 = v.iter().zip(f).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(f).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        frame.push(v.into_iter().map(|x| x / n).collect());
    }
    let grads: Vec<Vec<f64>> = (0..256)
        .map(|_| {
            let z: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            (0..50).map(|i| (0..3).map(|k| z[k] * frame[k][i]).sum()).collect()
        })
        .collect();
    let refs: Vec<&[f64]> = grads.iter().map(|v| v.as_slice()).collect();
    let est = trace::effective_dimension(&refs, 256).unwrap().value;

    let window = 8;
    let basis: Vec<Vec<f64>> = (0..window)
        .map(|i| {
            let mut v = vec![0.0; 50];
            v[i * 3] = 2.5;
            v
        })
        .collect();
    let brefs: Vec<&[f64]> = basis.iter().map(|v| v.as_slice()).collect();
    let eq = trace::effective_dimension(&brefs, window).unwrap().value;
    outcome(
        (2.5..=3.5).contains(&est) && (eq - window as f64).abs() <= 1e-9,
        format!("rank-3 estimate {est:.4}; equal spectrum {eq} for window {window}"),
    )
}

fn barriers(run: &RunOutput) -> Outcome {
    let well = FnObjective {
        loss: |p: &[f64]| (p[0] * p[0] - 1.0).powi(2),
        grad_norm: |p: &[f64]| (4.0 * p[0] * (p[0] * p[0] - 1.0)).abs(),
    };
    let dims = [1, 1];
    let at = |v: Vec<f64>| Params::from_flat(&dims, v).unwrap();
    // Only the first coordinate is used by the objectives.
    let dw = barrier::segment_barrier(&at(vec![-1.0, 0.0]), &at(vec![1.0, 0.0]), &well, 256).unwrap();
    let bowl = FnObjective {
        loss: |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>(),
        grad_norm: |p: &[f64]| 2.0 * p.iter().map(|x| x * x).sum::<f64>().sqrt(),
    };
    let cv = barrier::segment_barrier(&at(vec![-1.0, 0.5]), &at(vec![2.0, -1.0]), &bowl, 256).unwrap();
    let (ulb, ulb_text) = match &run.path {
        Some(p) => (
            p.holds && (p.tolerance - 1e-6 * (1.0 + p.max_loss.abs())).abs() <= 1e-18,
            format!("ULB max {:.4e} <= {:.4e} (holds {})", p.max_loss, p.ulb_bound, p.holds),
        ),
        None => (false, "no path audit".to_string()),
    };
    outcome(
        (dw.excess() - 1.0).abs() <= 1e-3 && cv.excess().abs() <= 1e-12 && ulb,
        format!("double-well excess {:.6}, quadratic excess {:.1e}, {ulb_text}", dw.excess(), cv.excess()),
    )
}

fn box_counting() -> Outcome {
    let start = Instant::now();
    let scales = box_scales();
    let dim = |pts: &[Vec<f64>]| kakeya::box_counting_dimension(pts, &scales).unwrap().dim_estimate;
    let seg = unit_segment_points(5000);
    let sq = square_grid_points(1000);
    let d_seg = dim(&seg);
    let d_sq = dim(&sq);
    let angle = PI / 6.0;
    let d_seg_r = dim(&rotate(&seg, angle, [0.5, 0.5]));
    let d_sq_r = dim(&rotate(&sq, angle, [0.5, 0.5]));
    let el = start.elapsed();
    outcome(
        (0.85..=1.15).contains(&d_seg)
            && (1.85..=2.15).contains(&d_sq)
            && (d_seg - d_seg_r).abs() <= 0.05
            && (d_sq - d_sq_r).abs() <= 0.05
            && within(el, 30),
        format!(
            "segment {d_seg:.4} (rotated {d_seg_r:.4}), square {d_sq:.4} (rotated {d_sq_r:.4}), {:.2}s",
            el.as_secs_f64()
        ),
    )
}

fn formulas() -> Outcome {
    // High-precision value of 24 sqrt((4 + ln 40) / 1000).
    const GEN_GAP: f64 = 2.104470138911366760769979884880088387244;
    let g = bounds::gen_gap(&BoundInputs {
        g_lip: Some(1.0),
        r_data: Some(1.0),
        b_step: Some(1.0),
        d_eff: Some(4.0),
        delta_conf: Some(0.05),
        n_samples: Some(1000.0),
        ..Default::default()
    })
    .unwrap();
    let rho = bounds::rho_rate(&BoundInputs {
        gamma: Some(1.0),
        mu: Some(1.0),
        t0: Some(E),
        kappa: Some(0.0),
        ..Default::default()
    })
    .unwrap()
    .rho;
    let t0 = bounds::t0_cutoff(&BoundInputs {
        c_conv: Some(1.0),
        mu: Some(1.0),
        gamma: Some(1.0),
        c_q: Some(1.0),
        m: Some(2.0),
        kappa: Some(1.0),
        ..Default::default()
    })
    .unwrap();
    let l4 = bounds::sparse_tope_bound(10, 3, 2, 9).unwrap();
    let ok = (g - 2.1045).abs() <= 1e-4
        && (g - GEN_GAP).abs() <= 1e-12
        && (rho - (1.0 - 2.0 / E)).abs() <= 1e-12
        && (t0.t_dist, t0.t_step, t0.t0) == (2.0, 1.0, 2.0)
        && l4 == 35;
    outcome(
        ok,
        format!(
            "gen_gap {g:.10}, rho {rho:.15}, t0 ({}, {}, {}), L4 {l4}",
            t0.t_dist, t0.t_step, t0.t0
        ),
    )
}

fn dudley() -> Outcome {
    let profile = sqrt_cover_profile(200);
    let trap = kakeya::dudley_gap(&profile, 1, 1.0, None).unwrap().value;
    let oracle = dudley_oracle();
    let rel = (trap - oracle).abs() / oracle;
    outcome(
        rel <= 0.01 && (oracle - DUDLEY_EXACT).abs() <= 1e-6,
        format!("trapezoid {trap:.6}, oracle {oracle:.6} (exact {DUDLEY_EXACT:.6}), relative gap {rel:.2e}"),
    )
}

fn run_in(dir: &std::path::Path) -> (RunOutput, Duration) {
    let mut cfg = reference_config();
    cfg.report_dir = Some(dir.to_path_buf());
    let start = Instant::now();
    let run = run_experiment(&cfg).expect("reference run");
    (run, start.elapsed())
}

fn determinism(a: &std::path::Path, b: &std::path::Path) -> Outcome {
    let same = |f: &str| fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap();
    let (t, r) = (same(TRACE_FILE), same(REPORT_FILE));
    outcome(t && r, format!("trace identical {t}, report identical {r}"))
}

fn main() -> ExitCode {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let (run, elapsed) = run_in(dir_a.path());

    let results = vec![
        gradient_check(),
        adam_identity(),
        zaslavsky_oracle(),
        tope_diameter(),
        mask_freeze(&run, elapsed),
        stability(&run),
        spectral_floor(),
        deff_recovery(),
        barriers(&run),
        box_counting(),
        formulas(),
        dudley(),
        {
            run_in(dir_b.path());
            determinism(dir_a.path(), dir_b.path())
        },
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        println!("criterion {}: {} {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += !r.pass as usize;
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
