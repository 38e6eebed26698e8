//! Acceptance criteria DA-1 through DA-8. Each criterion prints one
//! PASS/FAIL line; the test fails if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use mogan_cli::run;
use mogan_core::dataio::{
    default_fault_specs, make_imbalanced_dataset, stratified_split, ImbalanceSpec, LabeledDataset,
};
use mogan_core::metrics::{confusion, confusion_with_fake, imbalance_metrics, macro_g_mean, mcc, roc_auc, FMeasureForm};
use mogan_core::mogan::{
    calibrate_threshold, classify, fault_score, fault_score_from_logits, feature_matching_loss, load_checkpoint,
    mixture_minority_batch, save_checkpoint, train, train_classifier, DiscGradients, DiscriminatorNet, GeneratorNet,
    Label, LatentSource, MixtureConfig, Origin, TrainConfig,
};
use mogan_core::ndcore::{adam_step, grad_check, softmax_cross_entropy, AdamConfig, AdamState, Layer, Network, Tensor};
use mogan_core::resample::{
    adasyn_weights, allocate_largest_remainder, apply_plan, borderline_labels, smote, BorderlineLabel, Method,
    ResamplePlan,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

fn within(what: &str, elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("{what} took {elapsed:.1?}, limit {limit:?}"))
    }
}

// DA-1

fn quadratic(target: Vec<f64>) -> impl Fn(&Tensor) -> (f64, Tensor) {
    move |y: &Tensor| {
        let d: Vec<f64> = y.data().iter().zip(&target).map(|(a, b)| a - b).collect();
        let loss = 0.5 * d.iter().map(|v| v * v).sum::<f64>();
        (loss, Tensor::new(y.shape().to_vec(), d).unwrap())
    }
}

fn layer_trial(kind: usize, r: &mut ChaCha8Rng) -> (Network, Tensor) {
    match kind {
        0 => {
            let (i, o) = (r.random_range(1..7), r.random_range(1..7));
            (Network::new(vec![Layer::dense(i, o, r).unwrap()]), Tensor::from_vec(normal(r, i)))
        }
        1 => {
            let (c, g) = (r.random_range(1..5), r.random_range(1..5));
            let mut l = Layer::prelu(c).unwrap();
            for a in l.params_mut()[0].data_mut() {
                *a = r.random_range(-0.5..0.5);
            }
            let x = (0..c * g)
                .map(|_| r.random_range(0.05..2.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            (Network::new(vec![l]), Tensor::from_vec(x))
        }
        2 => {
            let (c, l) = (r.random_range(1..4), r.random_range(2..9));
            let x = Tensor::new(vec![c, l], normal(r, c * l)).unwrap();
            (Network::new(vec![Layer::instance_norm(1e-5).unwrap()]), x)
        }
        3 => {
            let (ci, co, k, st) = (r.random_range(1..4), r.random_range(1..4), r.random_range(1usize..5), r.random_range(1..4));
            let p = r.random_range(0..k.div_ceil(2));
            let l = r.random_range(1..6);
            let layer = Layer::conv_transpose1d(ci, co, k, st, p, r).unwrap();
            (Network::new(vec![layer]), Tensor::new(vec![ci, l], normal(r, ci * l)).unwrap())
        }
        _ => {
            let k = r.random_range(2..7);
            (Network::new(vec![Layer::softmax_head(k).unwrap()]), Tensor::from_vec(normal(r, k)))
        }
    }
}

fn da1() -> Outcome {
    const TRIALS: u64 = 100;
    const TOL: f64 = 1e-4;
    let start = Instant::now();
    let names = ["dense", "prelu", "instance_norm", "conv_transpose1d", "softmax_head", "cross_entropy", "feature_matching"];
    let mut worst = [0.0f64; 7];
    for t in 0..TRIALS {
        for (kind, w) in worst.iter_mut().enumerate() {
            let mut r = rng(1000 * kind as u64 + t);
            let rep = match kind {
                0..=4 => {
                    let (net, x) = layer_trial(kind, &mut r);
                    let out = net.forward(&x).unwrap().len();
                    grad_check(&net, &x, quadratic(normal(&mut r, out)), 1e-5).unwrap()
                }
                5 => {
                    let k = r.random_range(1..4);
                    let width = r.random_range(2..6);
                    let d = DiscriminatorNet::mlp(width, k, &[5, 3], &mut r).unwrap();
                    let mut layers = d.body().layers().to_vec();
                    layers.extend(d.head().layers().iter().cloned());
                    let target = r.random_range(0..=k);
                    let x = Tensor::from_vec(normal(&mut r, width));
                    grad_check(&Network::new(layers), &x, |y| softmax_cross_entropy(y, target).unwrap(), 1e-5).unwrap()
                }
                _ => {
                    let g = GeneratorNet::mlp(2, 3, 4, &[5], &mut r).unwrap();
                    let d = DiscriminatorNet::mlp(4, 3, &[6, 3], &mut r).unwrap();
                    let reals: Vec<Vec<f64>> = (0..4).map(|_| normal(&mut r, 4)).collect();
                    let refs: Vec<&[f64]> = reals.iter().map(Vec::as_slice).collect();
                    let z = normal(&mut r, 2);
                    let x = g.input(&z, r.random_range(0..3)).unwrap();
                    let loss = |y: &Tensor| {
                        let fm = feature_matching_loss(&d, &refs, &[y.data()]).unwrap();
                        (fm.loss, Tensor::new(y.shape().to_vec(), fm.fake_input_grads[0].clone()).unwrap())
                    };
                    grad_check(g.network(), &x, loss, 1e-5).unwrap()
                }
            };
            if let Some(f) = rep.failure {
                return Err(format!("{} trial {t}: {f}", names[kind]));
            }
            *w = w.max(rep.max_rel_error);
        }
    }
    within("gradient suite", start.elapsed(), Duration::from_secs(60))?;
    let max = worst.iter().copied().fold(0.0, f64::max);
    let detail = format!("{TRIALS} trials x {} checks, max relative error {max:.2e} (limit {TOL:.0e})", names.len());
    if max <= TOL {
        Ok(detail)
    } else {
        let bad: Vec<_> = names.iter().zip(&worst).filter(|(_, w)| **w > TOL).collect();
        Err(format!("{detail}; over limit: {bad:?}"))
    }
}

// DA-2

fn da2() -> Outcome {
    let start = Instant::now();
    let p_r = [0.4, 0.3, 0.2, 0.1];
    let p_g = [0.1, 0.2, 0.3, 0.4];
    let mut r = rng(9);
    let body = Network::new(vec![Layer::dense(4, 4, &mut r).unwrap()]);
    let head = Network::new(vec![Layer::dense(4, 2, &mut r).unwrap()]);
    let mut d = DiscriminatorNet::from_parts(body, head, 1, 4).unwrap();
    let cfg = AdamConfig {
        lr: 0.02,
        ..AdamConfig::default()
    };
    let mut sb = AdamState::new(d.body(), cfg).unwrap();
    let mut sh = AdamState::new(d.head(), cfg).unwrap();
    let one_hot = |i: usize| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    // every batch holds exactly 40/30/20/10 real and 10/20/30/40 generated points
    for _ in 0..3000 {
        let mut g = DiscGradients::zeros_like(&d);
        for x in 0..4 {
            for (target, n) in [(0, p_r[x] * 100.0), (d.fake_index(), p_g[x] * 100.0)] {
                let mut gx = DiscGradients::zeros_like(&d);
                d.cross_entropy_grad(&one_hot(x), target, &mut gx).unwrap();
                gx.scale(n / 200.0);
                g.add_assign(&gx);
            }
        }
        d.set_gradients(&g);
        adam_step(d.body_mut(), &mut sb).unwrap();
        adam_step(d.head_mut(), &mut sh).unwrap();
    }
    let (mut d_err, mut s_err) = (0.0f64, 0.0f64);
    for x in 0..4 {
        let out = d.discriminate(&one_hot(x)).unwrap();
        d_err = d_err.max((out.realness - p_r[x] / (p_r[x] + p_g[x])).abs());
        let ratio = p_g[x] / p_r[x];
        let s = fault_score_from_logits(&out.class_logits, out.fake_logit).value;
        s_err = s_err.max((s - ratio).abs() / ratio);
    }
    within("oracle", start.elapsed(), Duration::from_secs(30))?;
    let detail = format!("max |d - p_r/(p_r+p_g)| = {d_err:.4} (limit 0.05), max score rel error {s_err:.4} (limit 0.10)");
    if d_err <= 0.05 && s_err <= 0.10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// DA-3

fn blobs(seed: u64, counts: &[usize]) -> LabeledDataset {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            rows.push((0..3).map(|j| c as f64 * if j == 0 { 1.5 } else { 0.0 } + r.random_range(-1.0..1.0)).collect());
            labels.push(c);
        }
    }
    let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
    LabeledDataset::from_rows(&rows, labels, names).unwrap()
}

fn da3() -> Outcome {
    let ds = blobs(3, &[200, 40, 25]);
    // SMOTE convexity
    let synth = smote(&ds, 1, 1000, 5, 17).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for s in &synth {
        let (a, b) = (ds.row(s.seed), ds.row(s.neighbor));
        if ds.label(s.seed) != 1 || ds.label(s.neighbor) != 1 || !(0.0..=1.0).contains(&s.lambda) {
            return Err("synthetic sample with a bad seed, neighbor or lambda".into());
        }
        for j in 0..a.len() {
            worst = worst.max((s.features[j] - (a[j] + s.lambda * (b[j] - a[j]))).abs());
        }
    }
    if synth.len() != 1000 || worst > 1e-9 {
        return Err(format!("{} synthetics, convexity error {worst:e}", synth.len()));
    }
    // Borderline partition against brute-force neighbourhoods
    let k = 5;
    for c in 1..3 {
        let labels = borderline_labels(&ds, c, k).map_err(|e| e.to_string())?;
        if labels.len() != ds.class_counts()[c] {
            return Err("borderline labels do not cover the class".into());
        }
        for (i, lab) in labels {
            let mut all: Vec<(f64, usize)> = (0..ds.n_samples())
                .filter(|&j| j != i)
                .map(|j| (ds.row(i).iter().zip(ds.row(j)).map(|(a, b)| (a - b) * (a - b)).sum(), j))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let other = all[..k].iter().filter(|(_, j)| ds.label(*j) != c).count();
            let want = if other == k {
                BorderlineLabel::Noise
            } else if 2 * other >= k {
                BorderlineLabel::Danger
            } else {
                BorderlineLabel::Safe
            };
            if lab != want {
                return Err(format!("row {i}: {lab:?}, brute force says {want:?}"));
            }
        }
    }
    // ADASYN allocation
    let w = adasyn_weights(&ds, 2, 5).map_err(|e| e.to_string())?;
    for total in [0, 1, 7, 160, 999] {
        let got: usize = allocate_largest_remainder(&w.weights, total).iter().sum();
        if got != total {
            return Err(format!("ADASYN allocated {got} of {total}"));
        }
    }
    // apply_plan
    let plan = ResamplePlan::to_majority(&ds);
    for m in [Method::Random, Method::Smote, Method::BorderlineSmote, Method::Adasyn] {
        let out = apply_plan(&ds, &plan, m, 5, 23).map_err(|e| e.to_string())?.dataset;
        if m != Method::BorderlineSmote && out.class_counts().iter().any(|&n| n != 200) {
            return Err(format!("{}: counts {:?}", m.name(), out.class_counts()));
        }
        let same = (0..ds.n_samples()).all(|i| {
            out.label(i) == ds.label(i) && out.row(i).iter().zip(ds.row(i)).all(|(a, b)| a.to_bits() == b.to_bits())
        });
        if !same {
            return Err(format!("{}: original rows changed", m.name()));
        }
    }
    Ok(format!("convexity error {worst:.1e} on 1000 synthetics; borderline, allocation and plan checks exact"))
}

// DA-4

fn da4() -> Outcome {
    let mut counts_ds = blobs(4, &[50, 10]);
    counts_ds = LabeledDataset::from_rows(
        &counts_ds.rows().map(<[f64]>::to_vec).collect::<Vec<_>>(),
        counts_ds.labels().to_vec(),
        vec!["normal".into(), "fault".into()],
    )
    .unwrap();
    let ds = counts_ds;
    let gen = GeneratorNet::mlp(3, 2, 3, &[8], &mut rng(1)).unwrap();
    let latent = LatentSource::StandardNormal { dim: 3 };
    let n = 10_000;
    let batch = |pi: f64, seed: u64| {
        mixture_minority_batch(&ds, &gen, &latent, &MixtureConfig { pi, deltas: vec![] }, 1, n, seed).unwrap()
    };
    let g1 = batch(1.0, 1).count(Origin::Generated);
    let r0 = batch(0.0, 2).count(Origin::RealMajority);
    if g1 != 0 || r0 != 0 {
        return Err(format!("endpoints: {g1} generated at pi=1, {r0} real at pi=0"));
    }
    let real = batch(0.5, 3).count(Origin::RealMajority) as f64;
    let sigma = (n as f64 * 0.25).sqrt();
    let z = (real - n as f64 * 0.5) / sigma;
    if z.abs() > 4.0 {
        return Err(format!("pi=0.5: {real} real of {n}, z = {z:.2}"));
    }
    Ok(format!("endpoints exact; pi=0.5 gives {real} real of {n} (z = {z:.2}, limit 4)"))
}

// DA-5

fn da5() -> Outcome {
    let start = Instant::now();
    let mut specs = default_fault_specs(1.0);
    for s in specs.iter_mut().skip(1) {
        s.impulse_amplitude = 1.2;
    }
    let ds = make_imbalanced_dataset(
        &specs,
        &ImbalanceSpec {
            samples_per_class: vec![2000, 100, 100, 100],
            window_len: 256,
            seed: 7,
        },
    )
    .map_err(|e| e.to_string())?;
    let (tr, te) = stratified_split(&ds, 0.7, 11).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 80,
        batch_size: 32,
        adam: AdamConfig {
            lr: 1e-4,
            ..AdamConfig::default()
        },
        seed: 3,
        ..TrainConfig::default()
    };
    let model = train(&tr, &cfg).map_err(|e| e.to_string())?;
    let pred: Vec<Option<usize>> = te
        .rows()
        .map(|x| classify(&model.detector, x).map(Label::class))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let cm = confusion_with_fake(te.labels(), &pred, 4).map_err(|e| e.to_string())?;
    let rec = cm.recalls();
    let normal_tpr = rec[0];
    let fault_tpr = rec[1..].iter().sum::<f64>() / 3.0;
    let g = macro_g_mean(&cm);

    let (clf, _) = train_classifier(&tr, &cfg).map_err(|e| e.to_string())?;
    let base: Vec<usize> = te.rows().map(|x| clf.predict(x)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let g_base = macro_g_mean(&confusion(te.labels(), &base, 4).map_err(|e| e.to_string())?);
    let elapsed = start.elapsed();
    within("end-to-end run", elapsed, Duration::from_secs(600))?;
    let detail = format!(
        "normal TPR {normal_tpr:.3} (>= 0.95), mean fault TPR {fault_tpr:.3} (>= 0.85), G-mean {g:.3} vs baseline {g_base:.3} (+0.05 needed), {:.0?}",
        elapsed
    );
    if normal_tpr >= 0.95 && fault_tpr >= 0.85 && g >= g_base + 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// DA-6

fn da6() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for inst in 0..1000 {
        let n = r.random_range(2..=500);
        let levels = r.random_range(2..20);
        let mut pos: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
        pos[0] = true;
        pos[1] = false;
        let s: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64).collect();
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if pos[i] && !pos[j] {
                    pairs += 1.0;
                    wins += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        let auc = roc_auc(&s, &pos).map_err(|e| format!("instance {inst}: {e}"))?.auc;
        worst = worst.max((auc - wins / pairs).abs());
    }
    if worst > 1e-9 {
        return Err(format!("AUC differs from pair count by {worst:e}"));
    }
    let rate = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    for tp in 0..=5 {
        for fn_ in 0..=5 {
            for tn in 0..=5 {
                for fp in 0..=5 {
                    let (se, sp) = (rate(tp, fn_), rate(tn, fp));
                    let m = imbalance_metrics(se, sp, 1.0, FMeasureForm::Printed).unwrap();
                    let f = if se + sp == 0.0 { 0.0 } else { 2.0 * se * sp / (se + sp) };
                    let (tpf, fnf, tnf, fpf) = (tp as f64, fn_ as f64, tn as f64, fp as f64);
                    let den = ((tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf)).sqrt();
                    let mcc_want = if den == 0.0 { 0.0 } else { (tpf * tnf - fpf * fnf) / den };
                    let ok = (m.bac - (se + sp) / 2.0).abs() < 1e-15
                        && (m.g_mean - (se * sp).sqrt()).abs() < 1e-15
                        && (m.f_measure - f).abs() < 1e-15
                        && (mcc(tp, fn_, tn, fp).0 - mcc_want).abs() < 1e-12;
                    if !ok {
                        return Err(format!("formula mismatch at tp={tp} fn={fn_} tn={tn} fp={fp}"));
                    }
                }
            }
        }
    }
    for _ in 0..100_000 {
        let (a, b) = (r.random::<f64>(), r.random::<f64>());
        let m = imbalance_metrics(a, b, 1.0, FMeasureForm::Printed).unwrap();
        if m.g_mean > m.bac + 1e-15 {
            return Err(format!("G-mean {} > BAC {} at ({a}, {b})", m.g_mean, m.bac));
        }
    }
    Ok(format!("AUC vs pair count max error {worst:.1e} on 1000 instances; 1296 matrices exact; G <= BAC on 1e5 pairs"))
}

// DA-7

const SMALL: &str = "\
seed = 12
dataset.counts = 80,15,15,15
dataset.window = 64
train.epochs = 3
train.batch_size = 16
train.latent_dim = 8
train.generator_hidden = 32,32
train.discriminator_hidden = 32,16
train.pretrain_epochs = 1
train.audit_samples = 16
";

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("mogan").chain(args.iter().copied()))
}

fn cli_run(dir: &Path, cfg: &Path, name: &str) -> Result<(Vec<u8>, Vec<u8>), String> {
    let tr = dir.join(format!("{name}-train"));
    // the eval directory name is the run label inside metrics.csv
    let ev = dir.join(name).join("run");
    let (cfg, tr_s, ev_s) = (cfg.to_str().unwrap(), tr.to_str().unwrap(), ev.to_str().unwrap());
    if cli(&["train", "--config", cfg, "--out", tr_s]) != 0 {
        return Err("train failed".into());
    }
    let ckpt = tr.join("checkpoint.txt");
    if cli(&["eval", "--config", cfg, "--out", ev_s, "--checkpoint", ckpt.to_str().unwrap()]) != 0 {
        return Err("eval failed".into());
    }
    let read = |p: &Path| fs::read(p).map_err(|e| e.to_string());
    Ok((read(&tr.join("history.csv"))?, read(&ev.join("metrics.csv"))?))
}

fn da7() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, SMALL).map_err(|e| e.to_string())?;
    let a = cli_run(dir.path(), &cfg, "a")?;
    let b = cli_run(dir.path(), &cfg, "b")?;
    if a.0 != b.0 || a.1 != b.1 {
        return Err("history or metrics CSV differs between identical runs".into());
    }

    let specs = default_fault_specs(0.5);
    let ds = make_imbalanced_dataset(
        &specs,
        &ImbalanceSpec {
            samples_per_class: vec![80, 15, 15, 15],
            window_len: 64,
            seed: 2,
        },
    )
    .map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        latent_dim: 8,
        generator_hidden: vec![32],
        discriminator_hidden: vec![32, 16],
        seed: 4,
        ..TrainConfig::default()
    };
    let model = train(&ds, &cfg).map_err(|e| e.to_string())?;
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model, &path).map_err(|e| e.to_string())?;
    let back = load_checkpoint(&path).map_err(|e| e.to_string())?;
    let mut r = rng(70);
    for i in 0..100 {
        let x: Vec<f64> = (0..64).map(|_| r.random_range(-4.0..4.0)).collect();
        let same_label = classify(&model.detector, &x).unwrap() == classify(&back.detector, &x).unwrap();
        let (s1, s2) = (fault_score(&model.detector, &x).unwrap(), fault_score(&back.detector, &x).unwrap());
        if !same_label || s1.value.to_bits() != s2.value.to_bits() {
            return Err(format!("reloaded checkpoint differs on input {i}"));
        }
    }
    Ok("two CLI runs byte-identical (history.csv, metrics.csv); reload bit-exact on 100 inputs".into())
}

// DA-8

fn da8() -> Outcome {
    let mut r = rng(8);
    let dist = LogNormal::new(0.0, 1.0).unwrap();
    let cal: Vec<f64> = (0..2000).map(|_| dist.sample(&mut r)).collect();
    let c = calibrate_threshold(&cal, 0.05).map_err(|e| e.to_string())?;
    let fresh: Vec<f64> = (0..2000).map(|_| dist.sample(&mut r)).collect();
    let fresh_fpr = fresh.iter().filter(|&&s| s >= c.tau).count() as f64 / fresh.len() as f64;
    let limit = 0.05 + 1.0 / 2000.0;
    let detail = format!(
        "achieved FPR {:.4} (limit {limit:.4}), fresh draw {fresh_fpr:.4} (limit 0.08)",
        c.achieved_fpr
    );
    if c.achieved_fpr <= limit && fresh_fpr <= 0.08 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("DA-1 gradient suite", da1),
        ("DA-2 discrete optimum oracle", da2),
        ("DA-3 resampler properties", da3),
        ("DA-4 mixture statistics", da4),
        ("DA-5 end-to-end diagnosis", da5),
        ("DA-6 metrics oracle", da6),
        ("DA-7 determinism and persistence", da7),
        ("DA-8 calibration contract", da8),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        match f() {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                println!("FAIL {name}: {d}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
