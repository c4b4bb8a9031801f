//! Acceptance run: one line per criterion, non-zero exit if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use latentsig::config::{Preset, RunConfig};
use latentsig::data;
use latentsig_core::adssm::{batch_elbo, batch_elbo_grad, sequence_noise, AdssmConfig, AdssmParams, Example};
use latentsig_core::ddm::{fit_mle, simulate_ddm, wfpt_density, Choice, DdmParams, FitOptions, Trial};
use latentsig_core::metrics::{pearson, rec_l1, rmse, spectral_entropy, swd};
use latentsig_core::numcore::{normal_vec, stream, Purpose};
use latentsig_core::trainkit::{self, kl_anneal, NoClock, Serial, TrainConfig, TrainState};
use rand_chacha::rand_core::RngCore;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Central differences on 20 random scalars of a perturbed desk model.
///
/// Parameters are jittered so that no ReLU sits exactly on its kink. The
/// denominator is floored at `1e4 * eps * |f| / h`, the smallest gradient the
/// difference quotient resolves to 1e-4 in f64.
fn elbo_rel_error(seed: u64) -> Result<f64, String> {
    let cfg = AdssmConfig::desk();
    let mut params = AdssmParams::init(&cfg, seed).map_err(|e| e.to_string())?;
    let mut jitter = stream(seed, Purpose::Init, 999);
    for t in params.tensors_mut() {
        let n = normal_vec(&mut jitter, t.len());
        for (v, e) in t.data_mut().iter_mut().zip(n) {
            *v += 0.1 * e;
        }
    }
    let run = RunConfig::preset(Preset::Desk);
    let record = seed as usize;
    let rec = data::synth_record(&run, record).map_err(|e| e.to_string())?;
    let pairs = data::pair(&run, &rec, record, false).map_err(|e| e.to_string())?;
    let len = pairs[0].len();
    let seqs: Vec<_> = pairs.iter().filter(|p| p.len() == len).take(2).collect();
    let eps: Vec<Vec<f64>> = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| sequence_noise(3, Purpose::Sampling, i as u64, s.len(), cfg.latent))
        .collect();
    let batch: Vec<Example<'_>> = seqs
        .iter()
        .zip(&eps)
        .map(|(s, e)| Example {
            x: s.x.segments(),
            y: s.y.segments(),
            eps: e,
        })
        .collect();
    let beta = 0.6;
    let (f, grads) = batch_elbo_grad(&params, &batch, beta).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let floor = 1e4 * f64::EPSILON * f.abs() / h;
    let total = params.num_scalars();
    let mut rng = stream(seed, Purpose::Validation, 4242);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (mut ti, mut off) = (0, (rng.next_u64() % total as u64) as usize);
        while off >= params.tensors()[ti].len() {
            off -= params.tensors()[ti].len();
            ti += 1;
        }
        let eval = |d: f64| {
            let mut q = params.clone();
            q.tensors_mut()[ti].data_mut()[off] += d;
            batch_elbo(&q, &batch, beta).unwrap()
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        let analytic = grads[ti].data()[off];
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor));
    }
    Ok(worst)
}

fn criterion_1() -> Outcome {
    let mut worst_prim: f64 = 0.0;
    for case in support::primitive_cases() {
        worst_prim = worst_prim.max(support::max_rel_error(&case, 1e-5, 1e-6));
    }
    let mut worst_comp: f64 = 0.0;
    for seed in 0..50 {
        worst_comp = worst_comp.max(support::max_rel_error(&support::composite_case(seed), 1e-5, 1e-6));
    }

    let mut worst_elbo: f64 = 0.0;
    for seed in 0..5 {
        worst_elbo = worst_elbo.max(elbo_rel_error(seed)?);
    }
    check(
        worst_prim < 1e-5 && worst_comp < 1e-5 && worst_elbo < 1e-4,
        format!("max rel err: primitives {worst_prim:.1e}, 50 composites {worst_comp:.1e}, 5x20 ELBO params {worst_elbo:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let worst = (0..20).map(|s| support::kl_rel_error(s, 8, 1_000_000)).fold(0.0, f64::max);
    check(worst < 0.01, format!("worst relative gap over 20 pairs: {:.3}%", worst * 100.0))
}

/// Simpson's rule in `s = ln t` over `[ln lo, ln hi]`.
fn log_simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / n as f64;
    let g = |s: f64| {
        let t = s.exp();
        f(t) * t
    };
    let mut sum = g(a) + g(b);
    for i in 1..n {
        sum += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn criterion_3() -> Outcome {
    let mut worst_norm: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    for &alpha in &[0.5, 1.5, 3.0] {
        for &delta in &[-4.0, 0.0, 4.0] {
            for &tau in &[0.1, 0.3, 0.5] {
                let p = DdmParams::new(alpha, tau, delta);
                let mass = |c: Choice| {
                    log_simpson(
                        |u| wfpt_density(tau + u, c, &p, 1e-12).unwrap(),
                        1e-3 * alpha * alpha,
                        60.0,
                        6000,
                    )
                };
                let (up, lo) = (mass(Choice::Upper), mass(Choice::Lower));
                worst_norm = worst_norm.max((up + lo - 1.0).abs());
                worst_mass = worst_mass.max((up - 1.0 / (1.0 + (-delta * alpha).exp())).abs());
            }
        }
    }

    let p = DdmParams::new(1.5, 0.3, 1.5);
    let sim = simulate_ddm(&p, 100_000, 1e-4, 2024).map_err(|e| e.to_string())?;
    let ks = ks_statistic(&sim.trials, &p);
    check(
        worst_norm < 1e-3 && worst_mass < 1e-3 && ks < 0.01 && sim.censored.is_empty(),
        format!(
            "normalisation err {worst_norm:.1e}, upper-mass err {worst_mass:.1e}, KS {ks:.4} ({} censored)",
            sim.censored.len()
        ),
    )
}

/// Largest gap between the empirical and quadrature defective CDFs of either choice.
fn ks_statistic(trials: &[Trial], p: &DdmParams) -> f64 {
    let step = 1e-4;
    let horizon = trials.iter().map(|t| t.rt).fold(0.0, f64::max) - p.tau + 0.01;
    let n_grid = (horizon / step).ceil() as usize;
    let mut d: f64 = 0.0;
    for choice in [Choice::Upper, Choice::Lower] {
        let dens: Vec<f64> = (0..=n_grid)
            .map(|i| wfpt_density(p.tau + i as f64 * step, choice, p, 1e-12).unwrap())
            .collect();
        let mut cdf = vec![0.0; n_grid + 1];
        for i in 1..=n_grid {
            cdf[i] = cdf[i - 1] + 0.5 * step * (dens[i - 1] + dens[i]);
        }
        let at = |rt: f64| {
            let x = (rt - p.tau) / step;
            let i = (x.floor() as usize).min(n_grid - 1);
            let w = x - i as f64;
            cdf[i] * (1.0 - w) + cdf[i + 1] * w
        };
        let mut rts: Vec<f64> = trials.iter().filter(|t| t.choice == choice).map(|t| t.rt).collect();
        rts.sort_by(f64::total_cmp);
        let n = trials.len() as f64;
        for (k, &rt) in rts.iter().enumerate() {
            let f = at(rt);
            d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
        }
    }
    d
}

fn criterion_4() -> Outcome {
    let mut worst = [0.0f64; 3];
    let mut ok = true;
    for seed in 0..5u64 {
        let mut rng = stream(seed, Purpose::Simulation, u64::MAX);
        let z = normal_vec(&mut rng, 2);
        let truth = DdmParams::new(1.5, 0.3 + 0.05 * z[1], 1.5 + 0.2 * z[0]);
        let sim = simulate_ddm(&truth, 5000, 1e-4, 100 + seed).map_err(|e| e.to_string())?;
        let init = DdmParams::new(1.0, 0.1, 0.5);
        let fit = fit_mle(&sim.trials, &init, &FitOptions::default()).map_err(|e| e.to_string())?;
        let err = [
            (fit.params.tau - truth.tau).abs(),
            (fit.params.delta - truth.delta).abs(),
            (fit.params.alpha - truth.alpha).abs(),
        ];
        ok &= err[0] < 0.05 && err[1] < 0.1 && err[2] < 0.1;
        for i in 0..3 {
            worst[i] = worst[i].max(err[i]);
        }
    }
    check(
        ok,
        format!("worst |err| over 5 seeds: tau {:.3}, delta {:.3}, alpha {:.3}", worst[0], worst[1], worst[2]),
    )
}

struct DeskRun {
    clean_rho: f64,
    noisy_rho: f64,
    gain: f64,
    chunks: usize,
    test_chunks: usize,
    secs: f64,
}

fn desk_run() -> Result<DeskRun, String> {
    let t0 = Instant::now();
    let cfg = RunConfig::preset(Preset::Desk);
    let (clean, noisy) = data::build_datasets(&cfg).map_err(|e| format!("{e:#}"))?;
    let tc = cfg.train_config();
    let split = data::split(&clean, tc.seed);
    let train = data::seq_pairs(&clean, &split.train);
    let val = data::seq_pairs(&clean, &split.val);
    let state = TrainState::fresh(AdssmParams::init(&cfg.model, tc.seed).map_err(|e| e.to_string())?);
    let mut hook = |s: &TrainState| {
        let r = s.history.records().last().unwrap();
        if r.epoch % 20 == 0 || r.epoch + 1 == tc.epochs {
            eprintln!(
                "  [desk] epoch {:>3} beta {:.2} train {:9.3} val {:9.3} ({:.0}s)",
                r.epoch,
                r.beta,
                r.train_elbo,
                r.val_elbo.unwrap_or(f64::NAN),
                t0.elapsed().as_secs_f64()
            );
        }
        Ok(())
    };
    let state = trainkit::train(&train, &val, &tc, state, &Serial, &NoClock, &mut hook).map_err(|e| e.to_string())?;
    let recs = state.history.records();
    let first = recs[0].val_elbo.ok_or("no validation ELBO")?;
    let last = recs[recs.len() - 1].val_elbo.ok_or("no validation ELBO")?;
    let clean_rho = data::evaluate(&state.params, &clean, &split.test).map_err(|e| format!("{e:#}"))?;
    let noisy_rho = data::evaluate(&state.params, &noisy, &split.test).map_err(|e| format!("{e:#}"))?;
    Ok(DeskRun {
        clean_rho: clean_rho.get("pearson").unwrap().mean,
        noisy_rho: noisy_rho.get("pearson").unwrap().mean,
        gain: last - first,
        chunks: clean.sequences.len(),
        test_chunks: split.test.len(),
        secs: t0.elapsed().as_secs_f64(),
    })
}

fn criterion_5(run: &Result<DeskRun, String>) -> Outcome {
    let r = run.as_ref().map_err(|e| e.clone())?;
    check(
        r.clean_rho > 0.8 && r.gain >= 20.0 && r.secs < 1800.0,
        format!(
            "held-out rho {:.3} on {} of {} chunks, val ELBO gain {:.1} nats, {:.0}s",
            r.clean_rho, r.test_chunks, r.chunks, r.gain, r.secs
        ),
    )
}

fn criterion_6(run: &Result<DeskRun, String>) -> Outcome {
    let r = run.as_ref().map_err(|e| e.clone())?;
    let drop = r.clean_rho - r.noisy_rho;
    check(
        drop < 0.05,
        format!("rho clean {:.3} -> noisy {:.3} (drop {drop:.3})", r.clean_rho, r.noisy_rho),
    )
}

fn criterion_7() -> Outcome {
    let end = TrainConfig::default().anneal_end_epoch;
    let betas: Vec<f64> = (0..=5000).map(|e| kl_anneal(e, end)).collect();
    let monotone = betas.windows(2).all(|w| w[0] <= w[1]);
    let clamped = betas.iter().all(|b| (0.0..=1.0).contains(b));
    check(
        end == 1250 && betas[0] == 0.0 && betas[1250] == 1.0 && betas[5000] == 1.0 && monotone && clamped,
        format!("beta(0) = {}, beta({end}) = {}, monotone {monotone}, clamped {clamped}", betas[0], betas[1250]),
    )
}

fn criterion_8() -> Outcome {
    let x: Vec<f64> = (0..256).map(|i| (0.07 * i as f64).sin() + 0.01 * i as f64).collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let set: Vec<Vec<f64>> = x.chunks(4).map(|c| c.to_vec()).collect();
    let t = 128;
    let sinus: Vec<f64> = (0..t).map(|i| (2.0 * std::f64::consts::PI * 5.0 * i as f64 / t as f64).sin()).collect();
    let mut impulse = vec![0.0; t];
    impulse[0] = 1.0;
    let bins = (t / 2 + 1) as f64;

    let e = |r: Result<f64, latentsig_core::metrics::MetricError>| r.map_err(|e| e.to_string());
    let ids = [
        (e(pearson(&x, &x))? - 1.0).abs(),
        (e(pearson(&x, &neg))? + 1.0).abs(),
        e(rmse(&x, &x))?,
        e(rec_l1(&x, &x))?,
        e(swd(&set, &set, 32, 1))?,
        e(spectral_entropy(&sinus, 125.0))?,
        (e(spectral_entropy(&impulse, 125.0))? - bins.log2()).abs(),
    ];
    let worst_id = ids.iter().copied().fold(0.0, f64::max);

    let shift = 1.0;
    let mut rng = stream(8, Purpose::Sampling, 8);
    let a: Vec<Vec<f64>> = normal_vec(&mut rng, 10_000).into_iter().map(|v| vec![v]).collect();
    let b: Vec<Vec<f64>> = normal_vec(&mut rng, 10_000).into_iter().map(|v| vec![v + shift]).collect();
    let est = e(swd(&a, &b, 16, 3))?;
    let rel = (est - shift).abs() / shift;
    check(
        worst_id < 1e-9 && rel < 0.05,
        format!("worst identity residual {worst_id:.1e}, 1-D SWD {est:.4} for shift {shift} ({:.2}% off)", rel * 100.0),
    )
}

fn snapshot(dir: &Path, prefix: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let rel = prefix.join(path.file_name().unwrap());
        if path.is_dir() {
            snapshot(&path, &rel, out);
        } else {
            out.insert(rel, fs::read(&path).unwrap());
        }
    }
}

fn cli_pipeline(root: &Path) -> Result<(), String> {
    let cfg = root.join("run.cfg");
    fs::write(
        &cfg,
        "preset = desk\nseed = 3\nrecords = 5\nduration_s = 40\nepochs = 3\nanneal_end_epoch = 2\nbatch = 16\ncheckpoint_every = 1\n",
    )
    .map_err(|e| e.to_string())?;
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let r = |p: &str| root.join(p);
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--config".into(), s(&cfg), "--out".into(), s(&r("raw"))],
        vec!["prep".into(), "--in".into(), s(&r("raw")), "--out".into(), s(&r("prep"))],
        vec!["prep".into(), "--in".into(), s(&r("raw")), "--out".into(), s(&r("prep_noisy")), "--noise".into()],
        vec![
            "train".into(),
            "--data".into(),
            s(&r("prep/dataset.json")),
            "--config".into(),
            s(&cfg),
            "--out".into(),
            s(&r("model")),
        ],
        vec![
            "translate".into(),
            "--model".into(),
            s(&r("model/checkpoint.json")),
            "--in".into(),
            s(&r("prep_noisy/dataset.json")),
            "--out".into(),
            s(&r("tr")),
            "--mode".into(),
            "sample".into(),
            "--seed".into(),
            "4".into(),
        ],
        vec![
            "eval".into(),
            "--ref".into(),
            s(&r("prep/dataset.json")),
            "--hyp".into(),
            s(&r("tr/translation.json")),
            "--out".into(),
            s(&r("eval")),
        ],
        vec![
            "ddm-sim".into(),
            "--alpha".into(),
            "1.5".into(),
            "--tau".into(),
            "0.3".into(),
            "--delta".into(),
            "1.5".into(),
            "--n".into(),
            "2000".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            s(&r("ddm")),
        ],
        vec!["ddm-fit".into(), "--trials".into(), s(&r("ddm/trials.csv")), "--out".into(), s(&r("fit"))],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_latentsig"))
            .arg("--threads=1")
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    cli_pipeline(a.path())?;
    cli_pipeline(b.path())?;
    let (mut sa, mut sb) = (BTreeMap::new(), BTreeMap::new());
    snapshot(a.path(), Path::new(""), &mut sa);
    snapshot(b.path(), Path::new(""), &mut sb);
    let differing: Vec<String> = sa
        .iter()
        .filter(|(k, v)| sb.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let covered = ["model/checkpoint.json", "eval/report.json", "fit/fit.json", "tr/translation.json"]
        .iter()
        .all(|f| sa.contains_key(Path::new(f)));
    check(
        differing.is_empty() && sa.len() == sb.len() && covered,
        format!("{} files compared across two runs, {} differ {:?}", sa.len(), differing.len(), differing),
    )
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

const NAMES: [&str; 9] = [
    "gradient correctness",
    "Gaussian KL oracle",
    "WFPT correctness",
    "DDM parameter recovery",
    "desk end-to-end translation",
    "noise robustness",
    "KL annealing endpoints",
    "metric identities",
    "CLI reproducibility",
];

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, secs: f64, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n}: {tag} {} ({detail}; {secs:.1}s)", NAMES[n - 1]);
    };

    let quick: [(usize, fn() -> Outcome); 4] = [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4)];
    for (n, f) in quick {
        let t = Instant::now();
        let o = guarded(f);
        report(n, t.elapsed().as_secs_f64(), o);
    }

    let t = Instant::now();
    let desk = guarded(desk_run);
    let secs = t.elapsed().as_secs_f64();
    report(5, secs, criterion_5(&desk));
    report(6, 0.0, criterion_6(&desk));

    let rest: [(usize, fn() -> Outcome); 3] = [(7, criterion_7), (8, criterion_8), (9, criterion_9)];
    for (n, f) in rest {
        let t = Instant::now();
        let o = guarded(f);
        report(n, t.elapsed().as_secs_f64(), o);
    }

    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
