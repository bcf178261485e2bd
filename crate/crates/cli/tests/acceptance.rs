//! Acceptance suite: one pass/fail line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ser_core::audio::{parse_manifest, Emotion};
use ser_core::eval::{
    ablate_features, context_sweep, evaluate, gen_synth_corpus, split_corpus, AblationMode,
    DescriptorGroup, SplitSpec, SynthSpec,
};
use ser_core::features::{extract_corpus, FeatureConfig};
use ser_core::lld::{pitch, LldConfig, LldMatrix, MfccExtractor};
use ser_core::models::{train_baseline, train_hierarchical, train_joint_emotion, Dataset, Model};
use ser_core::pool::{delta, functionals, pool_global, PoolConfig};
use ser_core::svm::{
    joint_loss, solve_dual, train_binary, train_joint, KernelKind, TrainConfig, N_TUPLES,
};

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn feature_shape() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = PoolConfig::default();
    let mut cases = 0;
    for k in [4usize, 15, 16] {
        for _ in 0..100 {
            let t = rng.random_range(1..80);
            let values: Vec<f64> = (0..k * t).map(|_| rng.random_range(-100.0..100.0)).collect();
            let names = (0..k).map(|i| format!("d{i}")).collect();
            let g = pool_global(&LldMatrix::new(values, names).unwrap(), &cfg, "u").map_err(|e| e.to_string())?;
            check(g.dim() == 24 * k, format!("k={k} T={t} gave d={}", g.dim()))?;
            cases += 1;
        }
    }
    let k = LldConfig::default().k();
    check(24 * k == 360, format!("default k={k}"))?;
    Ok(format!("{cases} random matrices, default d=360"))
}

fn dsp_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for case in 0..200 {
        let len = rng.random_range(1..=300);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let track: Vec<f64> = (0..len).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let got = functionals(&track);
        let want = oracles::brute_force(&track).values;
        for i in 0..12 {
            check(
                (got[i] - want[i]).abs() <= 1e-9 * want[i].abs().max(1.0),
                format!("functional {i} on track {case}: {} vs {}", got[i], want[i]),
            )?;
        }
    }
    for slope in -10i32..=10 {
        for icpt in [-7i32, 0, 12] {
            let track: Vec<f64> = (0..40).map(|t| f64::from(icpt + slope * t)).collect();
            let d = delta(&track, 2).unwrap();
            check(
                d[2..38].iter().all(|&v| v == f64::from(slope)),
                format!("delta of ramp with slope {slope} is not exact"),
            )?;
        }
    }
    let lcfg = LldConfig::default();
    let mut worst_f0 = 0.0f64;
    for freq in (80..=400).step_by(20) {
        let freq = f64::from(freq);
        let t = oracles::tone(freq, 400, 16000.0, 0.7);
        let p = pitch(&t, 16000, &lcfg);
        check(p.f0 > 0.0, format!("{freq} Hz tone unvoiced"))?;
        worst_f0 = worst_f0.max((p.f0 - freq).abs());
    }
    check(worst_f0 <= 2.0, format!("F0 error {worst_f0:.3} Hz"))?;
    let mut worst_mfcc = 0.0f64;
    let ex = MfccExtractor::new(400, 16000, &lcfg).unwrap();
    for _ in 0..100 {
        let frame: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = ex.compute(&frame).unwrap();
        let want = oracles::reference_mfcc(&frame, 16000.0, 26, 12);
        for (g, w) in got.iter().zip(&want) {
            worst_mfcc = worst_mfcc.max((g - w).abs());
        }
    }
    check(worst_mfcc <= 1e-9, format!("MFCC deviation {worst_mfcc:e}"))?;
    Ok(format!("200 tracks, exact ramps, max F0 error {worst_f0:.3} Hz, max MFCC deviation {worst_mfcc:.1e}"))
}

fn solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..20 {
        let n = rng.random_range(8..=50);
        let dim = rng.random_range(2..=6);
        let (x, y) = oracles::random_problem(&mut rng, n, dim);
        let cfg = TrainConfig {
            kernel: if case % 2 == 0 { KernelKind::Linear } else { KernelKind::Rbf },
            c: [0.1, 1.0, 10.0][case % 3],
            ..TrainConfig::default()
        };
        let sol = solve_dual(&x, &y, &cfg).map_err(|e| e.to_string())?;
        for (i, &a) in sol.alpha.iter().enumerate() {
            let yf = f64::from(y[i]) * sol.model.margin(&x[i]).unwrap();
            let ok = if a <= 0.0 {
                yf >= 1.0 - 1e-3
            } else if a >= cfg.c {
                yf <= 1.0 + 1e-3
            } else {
                (yf - 1.0).abs() <= 1e-3
            };
            check(ok, format!("KKT violated: dataset {case} point {i}, alpha {a}, y f {yf}"))?;
        }
    }
    let lin = TrainConfig {
        kernel: KernelKind::Linear,
        c: 10.0,
        ..TrainConfig::default()
    };
    let m = train_binary(&[vec![-1.0], vec![1.0]], &[-1, 1], &lin).unwrap();
    let boundary = -m.bias / m.dual_coef.iter().zip(&m.support_vectors).map(|(c, s)| c * s[0]).sum::<f64>();
    check(boundary.abs() <= 1e-6, format!("2-point boundary at {boundary}"))?;
    check(m.predict(&[0.5]).unwrap().0 == 1, "x = 0.5 not +1".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..16 {
        let (x, y) = oracles::random_problem(&mut rng, 6, 6);
        for (kernel, c) in [(KernelKind::Linear, 1.0), (KernelKind::Rbf, 2.0), (KernelKind::Linear, 0.3)] {
            let cfg = TrainConfig {
                kernel,
                c,
                gamma: Some(0.25),
                tolerance: 1e-6,
                ..TrainConfig::default()
            };
            let sol = solve_dual(&x, &y, &cfg).unwrap();
            let want = oracles::enumerated_optimum(&x, &y, cfg.kernel_for(6), c);
            worst = worst.max((sol.objective - want).abs() / want.abs().max(1e-12));
        }
    }
    check(worst <= 1e-3, format!("dual objective off by {worst:e} relative"))?;

    let xor = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let labels = [-1, -1, 1, 1];
    let rbf = TrainConfig {
        kernel: KernelKind::Rbf,
        gamma: Some(1.0),
        c: 10.0,
        ..TrainConfig::default()
    };
    let m = train_binary(&xor, &labels, &rbf).unwrap();
    let hits = xor.iter().zip(&labels).filter(|(x, &y)| m.predict(x).unwrap().0 == y).count();
    check(hits == 4, format!("XOR {hits}/4"))?;
    Ok(format!("20 KKT audits, boundary {boundary:.1e}, 48 enumerations (worst {worst:.1e}), XOR 4/4"))
}

fn joint_objective() -> Outcome {
    let cfg = |seed| TrainConfig {
        c: 10.0,
        kernel: KernelKind::Linear,
        max_passes: 200,
        seed,
        ..TrainConfig::default()
    };
    for seed in 0..5u64 {
        let (x, t) = oracles::tuple_data(100 + seed);
        let m = train_joint(&x, &t, &cfg(seed)).map_err(|e| e.to_string())?;
        let mut best = f64::INFINITY;
        let mut best_so_far = Vec::new();
        for &l in &m.loss_history {
            best = best.min(l);
            best_so_far.push(best);
        }
        check(best_so_far.windows(2).all(|w| w[1] <= w[0]), "best-so-far loss increased".into())?;
        let zero = vec![vec![0.0; x[0].len()]; N_TUPLES];
        let lw = joint_loss(&m.weights, &x, &t, m.c).unwrap();
        let l0 = joint_loss(&zero, &x, &t, m.c).unwrap();
        check(lw < l0, format!("seed {seed}: loss(W) {lw} >= loss(0) {l0}"))?;
        check(lw == best, format!("seed {seed}: returned weights are not the best iterate"))?;
        let hits = x.iter().zip(&t).filter(|(xi, ti)| m.predict(xi).unwrap() == **ti).count();
        check(hits == x.len(), format!("seed {seed}: tuple accuracy {hits}/{}", x.len()))?;
        let again = train_joint(&x, &t, &cfg(seed)).unwrap();
        let bits = |w: &Vec<Vec<f64>>| w.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        check(bits(&m.weights) == bits(&again.weights), format!("seed {seed}: weights differ across runs"))?;
    }
    Ok("5 separable 8-tuple datasets: 100% tuple accuracy, loss(W) < loss(0), bit-identical reruns".into())
}

struct Prepared {
    train: Dataset,
    test: Dataset,
    test_truth: Vec<ser_core::audio::Utterance>,
}

fn prepare(spec: &SynthSpec) -> Result<Prepared, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let synth = gen_synth_corpus(spec, dir.path()).map_err(|e| e.to_string())?;
    let table = extract_corpus(&synth.corpus, &FeatureConfig::default()).map_err(|e| e.to_string())?;
    let split = SplitSpec::BySessionHoldout { session_id: "S5".into() };
    let (train, test) = split_corpus(&synth.corpus, &split).map_err(|e| e.to_string())?;
    Ok(Prepared {
        train: Dataset::from_corpus(&train, &table).map_err(|e| e.to_string())?,
        test: Dataset::from_corpus(&test, &table).map_err(|e| e.to_string())?,
        test_truth: test.utterances().to_vec(),
    })
}

fn hierarchy_advantage(p: &Prepared) -> Outcome {
    check(
        p.train.len() == 200 && p.test.len() == 50,
        format!("split {}/{}", p.train.len(), p.test.len()),
    )?;
    let cfg = TrainConfig::default();
    let accuracy = |m: Model| -> Result<f64, String> {
        let preds: Vec<Emotion> = m
            .predict_dataset(&p.test)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|x| x.emotion)
            .collect();
        Ok(evaluate(&preds, &p.test_truth).map_err(|e| e.to_string())?.overall_accuracy)
    };
    let err = |e: ser_core::Error| e.to_string();
    let base = accuracy(Model::Baseline(train_baseline(&p.train, &cfg).map_err(err)?))?;
    let hier = accuracy(Model::Hierarchical(train_hierarchical(&p.train, &cfg, 10).map_err(err)?))?;
    let joint = accuracy(Model::Joint(train_joint_emotion(&p.train, &cfg).map_err(err)?))?;
    let line = format!("baseline {base:.3}, hierarchical {hier:.3}, joint {joint:.3}");
    check(hier - base >= 0.05 - 1e-9, format!("hierarchy gap too small: {line}"))?;
    check(joint - base >= -1e-9, format!("joint below baseline: {line}"))?;
    Ok(line)
}

fn context_trend(p: &Prepared) -> Outcome {
    let rows = context_sweep(&p.train, &p.test, &[1, 2, 4, 6, 8, 10], &TrainConfig::default())
        .map_err(|e| e.to_string())?;
    let acc = |ell: usize| rows.iter().find(|r| r.ell == ell).unwrap().accuracy;
    let best = rows.iter().map(|r| r.accuracy).fold(f64::NEG_INFINITY, f64::max);
    let first_best = rows.iter().find(|r| r.accuracy == best).unwrap().ell;
    let line = rows
        .iter()
        .map(|r| format!("{}:{:.2}", r.ell, r.accuracy))
        .collect::<Vec<_>>()
        .join(" ");
    check(acc(10) >= acc(1), format!("ell=10 below ell=1: {line}"))?;
    check(first_best >= 4, format!("best accuracy first reached at ell={first_best}: {line}"))?;
    Ok(format!("noise_sigma 0.8 sweep {line}"))
}

fn ablation(p: &Prepared) -> Outcome {
    use DescriptorGroup::*;
    let sets = vec![vec![], vec![Mfcc], vec![Zcr], vec![VoiceProb], vec![F0]];
    let modes = [AblationMode::DropBaseAndDelta, AblationMode::DropBaseKeepDelta];
    let names = LldConfig::default().descriptor_names();
    let rows = ablate_features(&p.train, &p.test, &names, &sets, &modes, 1, &TrainConfig::default())
        .map_err(|e| e.to_string())?;
    let acc = |set: &[DescriptorGroup], mode| {
        rows.iter().find(|r| r.excluded == set && r.mode == mode).unwrap().accuracy
    };
    let full = acc(&[], AblationMode::DropBaseAndDelta);
    let mfcc_drop = full - acc(&[Mfcc], AblationMode::DropBaseAndDelta);
    for g in [Zcr, VoiceProb, F0] {
        let drop = full - acc(&[g], AblationMode::DropBaseAndDelta);
        check(mfcc_drop > drop, format!("mfcc drop {mfcc_drop:.3} not above {g} drop {drop:.3}"))?;
    }
    for set in &sets {
        let both = acc(set, AblationMode::DropBaseAndDelta);
        let keep = acc(set, AblationMode::DropBaseKeepDelta);
        check(keep >= both, format!("keep-delta {keep:.3} below drop-both {both:.3} for {set:?}"))?;
    }
    let summary = rows
        .iter()
        .map(|r| format!("{}/{}:{:.2}", r.excluded_label(), if r.mode == AblationMode::DropBaseAndDelta { "both" } else { "keep" }, r.accuracy))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(summary)
}

fn ser(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ser"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("ser {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

/// Every file below `dir`, as (relative path, bytes), sorted by path.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let manifest = p("corpus/manifest.csv");
    ser(&["synth", "--seed", "2018", "--out", &p("corpus")])?;
    ser(&["extract", "--seed", "2018", "--manifest", &manifest, "--out", &p("features.csv")])?;
    for kind in ["baseline", "hierarchical", "joint"] {
        let model = p(&format!("{kind}.bin"));
        ser(&["train", "--seed", "2018", "--manifest", &manifest, "--features", &p("features.csv"), "--kind", kind, "--part", "train", "--out", &model])?;
        ser(&["predict", "--seed", "2018", "--manifest", &manifest, "--features", &p("features.csv"), "--model", &model, "--part", "test", "--out", &p(&format!("{kind}.csv"))])?;
    }
    Ok(())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    check(sa.len() == sb.len(), "runs produced different file sets".into())?;
    for ((na, ba), (nb, bb)) in sa.iter().zip(&sb) {
        check(na == nb && ba == bb, format!("{na} differs between runs"))?;
    }

    let corpus = parse_manifest(a.path().join("corpus/manifest.csv")).map_err(|e| e.to_string())?;
    let file = std::fs::File::open(a.path().join("features.csv")).unwrap();
    let table = ser_core::pool::FeatureTable::read_csv(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
    let split = SplitSpec::BySessionHoldout { session_id: "S5".into() };
    let (_, test) = split_corpus(&corpus, &split).unwrap();
    let data = Dataset::from_corpus(&test, &table).unwrap();
    let probes = Dataset::from_corpus(&corpus, &table).unwrap();
    for kind in ["baseline", "hierarchical", "joint"] {
        let bytes = std::fs::read(a.path().join(format!("{kind}.bin"))).unwrap();
        let model = Model::from_bytes(&bytes).map_err(|e| e.to_string())?;
        check(model.to_bytes() == bytes, format!("{kind}: re-serialized bytes differ"))?;
        let resaved = tempfile::NamedTempFile::new().unwrap();
        model.save(resaved.path()).unwrap();
        let reloaded = Model::load(resaved.path()).unwrap();
        check(
            reloaded.predict_dataset(&probes).unwrap() == model.predict_dataset(&probes).unwrap(),
            format!("{kind}: predictions changed after save/load"),
        )?;
        let csv = std::fs::read_to_string(a.path().join(format!("{kind}.csv"))).unwrap();
        let preds = model.predict_dataset(&data).unwrap();
        let lines: Vec<&str> = csv.lines().skip(1).collect();
        check(lines.len() == preds.len(), format!("{kind}: prediction count"))?;
        for ((line, p), id) in lines.iter().zip(&preds).zip(&data.ids) {
            let s = p.spontaneity.map(|s| s.index().to_string()).unwrap_or_default();
            check(*line == format!("{id},{},{s}", p.emotion.index()), format!("{kind}: {line}"))?;
        }
    }
    Ok(format!("{} files byte-identical across two runs; 3 models round-trip exactly", sa.len()))
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "feature-shape law", feature_shape()));
    results.push((2, "DSP oracles", dsp_oracles()));
    results.push((3, "solver correctness", solver()));
    results.push((4, "joint objective", joint_objective()));
    match prepare(&SynthSpec::default()) {
        Ok(p) => {
            results.push((5, "hierarchy advantage", hierarchy_advantage(&p)));
            results.push((7, "ablation harness", ablation(&p)));
        }
        Err(e) => {
            results.push((5, "hierarchy advantage", Err(e.clone())));
            results.push((7, "ablation harness", Err(e)));
        }
    }
    let noisy = SynthSpec {
        noise_sigma: 0.8,
        ..SynthSpec::default()
    };
    results.push((6, "context trend", prepare(&noisy).and_then(|p| context_trend(&p))));
    results.push((8, "determinism and persistence", determinism()));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1?}", results.len() - failed, start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
