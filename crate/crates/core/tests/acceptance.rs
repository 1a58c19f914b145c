//! Acceptance checks. Each test prints one `PASS` or `FAIL` line naming the
//! criterion and the measured value before asserting.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;

use candst::candidates::{build_slate, update_candidate_set, Distribution, ScoredCandidateSet, SlateEntry};
use candst::corpus::{
    compute_oov_rate, convert_dstc2, convert_simdialogue, generate_synthetic, movie_schema, render_corpus,
    restaurant_schema, Corpus, DomainSchema, GenConfig,
};
use candst::dialogue::{Dialogue, DialogueAct, DialogueState, SlotSpan, StateValue, Turn};
use candst::evaluation::{evaluate, evaluate_baseline};
use candst::neural::{GradCheckOptions, ParameterStore};
use candst::rng::rng_for;
use candst::tracker::{score_slate, ScorerParams, SharingMode, TrackerModel};
use candst::training::{
    check_model_gradients, grid_search, tracker_config_for, train, transfer_eval, GridSpec, SlateMissPolicy,
    TrainConfig, TransferMode,
};

// Written to the stdout handle directly: libtest captures println! output of
// passing tests, and these lines should show in a plain `cargo test` run.
fn say(line: String) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn report(name: &str, ok: bool, detail: String) {
    say(format!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" }));
}

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(String::from).collect()
}

fn span(tokens: &[String], slot: &str, value: &str) -> SlotSpan {
    let v = words(value);
    let start = tokens
        .windows(v.len())
        .position(|w| w == v.as_slice())
        .expect("value occurs in utterance");
    SlotSpan {
        slot: slot.into(),
        value: value.into(),
        start,
        end: start + v.len(),
    }
}

fn state(pairs: &[(&str, StateValue)]) -> DialogueState {
    let mut s = DialogueState::new();
    for (k, v) in pairs {
        s.set(k, v.clone());
    }
    s
}

fn toy_schema() -> DomainSchema {
    DomainSchema::new(
        "toy",
        &["time", "restaurant", "area"],
        &["inform", "negate", "affirm", "dontcare", "request"],
        &["greeting", "offer", "inform", "request", "confirm"],
    )
}

/// Two turns touching every feature family: user and system mentions, a
/// negation, an offer and more mentions than K=3 can hold.
fn two_turn_dialogue() -> Dialogue {
    let u1 = words("table for cascal or olive garden or lupa or nopa at 6 pm");
    let t1 = Turn {
        system_tokens: words("hello , how can i help ?"),
        system_acts: vec![DialogueAct::bare("greeting")],
        user_acts: vec![
            DialogueAct::with_value("inform", "restaurant", "cascal"),
            DialogueAct::with_value("inform", "time", "6 pm"),
        ],
        user_spans: vec![
            span(&u1, "restaurant", "cascal"),
            span(&u1, "restaurant", "olive garden"),
            span(&u1, "restaurant", "lupa"),
            span(&u1, "restaurant", "nopa"),
            span(&u1, "time", "6 pm"),
        ],
        user_tokens: u1,
        gold_state: state(&[
            ("restaurant", StateValue::value("cascal")),
            ("time", StateValue::value("6 pm")),
        ]),
        system_spans: vec![],
    };
    let s2 = words("6 pm is full . how about 7 pm ?");
    let u2 = words("no , 6 pm is not ok . any area");
    let t2 = Turn {
        system_acts: vec![
            DialogueAct::with_value("inform", "time", "6 pm"),
            DialogueAct::with_value("offer", "time", "7 pm"),
        ],
        system_spans: vec![span(&s2, "time", "6 pm"), span(&s2, "time", "7 pm")],
        system_tokens: s2,
        user_acts: vec![
            DialogueAct::with_value("negate", "time", "6 pm"),
            DialogueAct::with_slot("dontcare", "area"),
        ],
        user_spans: vec![span(&u2, "time", "6 pm")],
        user_tokens: u2,
        gold_state: state(&[
            ("restaurant", StateValue::value("cascal")),
            ("time", StateValue::value("7 pm")),
            ("area", StateValue::DontCare),
        ]),
    };
    Dialogue {
        id: "two-turn".into(),
        domain: "toy".into(),
        turns: vec![t1, t2],
    }
}

fn toy_corpus(dialogues: Vec<Dialogue>) -> Corpus {
    let mut c = Corpus::empty(toy_schema());
    c.train = dialogues.clone();
    c.dev = dialogues;
    c
}

#[test]
fn criterion_1_full_loss_gradient_check() {
    let start = Instant::now();
    let d = two_turn_dialogue();
    let corpus = toy_corpus(vec![d.clone()]);
    let cfg = TrainConfig {
        embedding_dim: 8,
        gru_hidden_dim: 8,
        scorer_hidden_dim: 8,
        capacity: 3,
        sharing_mode: SharingMode::Shared,
        ..TrainConfig::default()
    };
    let model: TrackerModel<f64> = TrackerModel::new(tracker_config_for(&[&corpus], &cfg).unwrap(), 3).unwrap();
    let opts = GradCheckOptions {
        epsilon: 1e-5,
        ..GradCheckOptions::default()
    };
    let r = check_model_gradients(&model, &[d], SlateMissPolicy::Skip, &opts).unwrap();
    let elapsed = start.elapsed();
    let ok = r.max_relative_error < 1e-5 && elapsed < Duration::from_secs(60);
    report(
        "criterion 1 (full-loss gradient check, d=8, K=3, f64)",
        ok,
        format!(
            "max relative error {:.3e} over {} elements (worst {:?}), {:.1?}",
            r.max_relative_error, r.checked, r.worst, elapsed
        ),
    );
    assert!(ok);
}


fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn criterion_2_scorer_forward_exactness() {
    // hidden width 1, g = [g0], r_cand = [r]
    let mut store: ParameterStore<f64> = ParameterStore::new();
    let p = ScorerParams::register(&mut store, "shared", 1, 2, 1, 0).unwrap();
    let (w1a, w1b, b1, w2, b2, w3, b3, w4, b4, l_null) = (0.7, -1.3, 0.2, 2.5, -0.4, -0.9, 0.35, 1.7, 0.05, 0.6);
    let set = |store: &mut ParameterStore<f64>, id, v: &[f64]| store.values_mut(id).copy_from_slice(v);
    set(&mut store, p.w1, &[w1a, w1b]);
    set(&mut store, p.b1, &[b1]);
    set(&mut store, p.w2, &[w2]);
    set(&mut store, p.b2, &[b2]);
    set(&mut store, p.w3, &[w3]);
    set(&mut store, p.b3, &[b3]);
    set(&mut store, p.w4, &[w4]);
    set(&mut store, p.b4, &[b4]);
    set(&mut store, p.l_null, &[l_null]);

    let cs = ScoredCandidateSet::from_entries("time", 3, vec![("6 pm".into(), 0.0), ("7 pm".into(), 0.0)]).unwrap();
    let slate = build_slate(&cs);
    let g0 = 0.8;
    let r = [1.5, -0.25];
    let d = score_slate(&store, &p, &slate, &[g0], &[vec![r[0]], vec![r[1]]]).unwrap();

    let l6 = w2 * sigmoid(w1a * g0 + w1b * r[0] + b1) + b2;
    let l7 = w2 * sigmoid(w1a * g0 + w1b * r[1] + b1) + b2;
    let ldc = w4 * sigmoid(w3 * g0 + b3) + b4;
    let z = l6.exp() + l7.exp() + ldc.exp() + l_null.exp();
    let expected = [l6.exp() / z, l7.exp() / z, 0.0, ldc.exp() / z, l_null.exp() / z];
    let hand_err = d.probs.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    // all-zero parameters: uniform over the non-PAD entries
    let mut zero = store.clone();
    for id in p.ids() {
        zero.values_mut(id).iter_mut().for_each(|v| *v = 0.0);
    }
    let dz = score_slate(&zero, &p, &slate, &[g0], &[vec![r[0]], vec![r[1]]]).unwrap();
    let uniform = dz.probs == vec![0.25, 0.25, 0.0, 0.25, 0.25];

    // random slates with random parameters, at both precisions
    let mut rng = rng_for(2, "random-slates");
    let (mut worst_sum, mut pad_ok) = (0.0f64, true);
    for i in 0..1000 {
        let k = rng.gen_range(1..=8);
        let n = rng.gen_range(0..=k);
        let (g_dim, c_dim, hidden) = (rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=5));
        let cs = ScoredCandidateSet::from_entries(
            "s",
            k,
            (0..n).map(|j| (format!("v{j}"), 0.0)).collect(),
        )
        .unwrap();
        let slate = build_slate(&cs);
        let mut gen = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect() };
        let g = gen(g_dim);
        let cands: Vec<Vec<f64>> = (0..n).map(|_| gen(c_dim)).collect();
        let seed = i as u64;
        let probs: Vec<f64> = if i % 2 == 0 {
            let mut st: ParameterStore<f64> = ParameterStore::new();
            let sp = ScorerParams::register(&mut st, "shared", g_dim, g_dim + c_dim, hidden, seed).unwrap();
            score_slate(&st, &sp, &slate, &g, &cands).unwrap().probs
        } else {
            let mut st: ParameterStore<f32> = ParameterStore::new();
            let sp = ScorerParams::register(&mut st, "shared", g_dim, g_dim + c_dim, hidden, seed).unwrap();
            let g32: Vec<f32> = g.iter().map(|x| *x as f32).collect();
            let c32: Vec<Vec<f32>> = cands.iter().map(|c| c.iter().map(|x| *x as f32).collect()).collect();
            score_slate(&st, &sp, &slate, &g32, &c32).unwrap().probs
        };
        worst_sum = worst_sum.max((probs.iter().sum::<f64>() - 1.0).abs());
        for (e, p) in slate.entries().iter().zip(&probs) {
            if *e == SlateEntry::Pad && *p != 0.0 {
                pad_ok = false;
            }
        }
    }
    let ok = hand_err < 1e-12 && uniform && worst_sum < 1e-6 && pad_ok;
    report(
        "criterion 2 (scorer forward exactness)",
        ok,
        format!(
            "hand-evaluated max error {hand_err:.2e}, zero-parameter uniform {uniform}, \
             1000 random slates max |sum-1| {worst_sum:.2e}, PAD exactly zero {pad_ok}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_candidate_set_properties() {
    let start = Instant::now();
    let pool: Vec<String> = (0..12).map(|i| format!("value {i}")).collect();
    let mut failures: Vec<String> = Vec::new();
    let mut truncations = 0usize;
    let run = |seq: u64, failures: &mut Vec<String>, truncations: &mut usize| -> Vec<ScoredCandidateSet> {
        let mut rng = rng_for(seq, "candidate-sequence");
        let k = rng.gen_range(1..=7);
        let mut set = ScoredCandidateSet::new("s", k);
        let mut trace = Vec::new();
        for turn in 0..rng.gen_range(1..=10) {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<&str> {
                (0..n).map(|_| pool[rng.gen_range(0..pool.len())].as_str()).collect()
            };
            let nu = rng.gen_range(0..=5);
            let ns = rng.gen_range(0..=3);
            let user = pick(&mut rng, nu);
            let system = pick(&mut rng, ns);
            let distinct: Vec<&str> = {
                let mut seen = BTreeSet::new();
                user.iter().chain(&system).copied().filter(|v| seen.insert(*v)).collect()
            };
            let up = update_candidate_set(&set, user.iter().copied(), system.iter().copied(), [], k);
            let next = &up.set;
            let tag = format!("sequence {seq} turn {turn} (K={k})");
            if next.values().count() > k {
                failures.push(format!("{tag}: {} > K", next.values().count()));
            }
            if distinct.len() <= k {
                if let Some(m) = distinct.iter().find(|v| !next.contains(v)) {
                    failures.push(format!("{tag}: mention {m} missing"));
                }
                if up.truncated != 0 {
                    failures.push(format!("{tag}: spurious truncation"));
                }
            } else {
                *truncations += 1;
                if up.truncated != distinct.len() - k {
                    failures.push(format!("{tag}: truncated {} of {}", up.truncated, distinct.len()));
                }
                if let Some(m) = distinct[..k].iter().find(|v| !next.contains(v)) {
                    failures.push(format!("{tag}: early mention {m} missing"));
                }
            }
            for v in next.values() {
                let expected = set.score(v).unwrap_or(0.0);
                if next.score(v) != Some(expected) {
                    failures.push(format!("{tag}: {v} scored {:?}, previous {expected}", next.score(v)));
                }
            }
            // rescore with a random distribution over the slate
            let slate = build_slate(next);
            let mut probs: Vec<f64> = slate
                .entries()
                .iter()
                .map(|e| if *e == SlateEntry::Pad { 0.0 } else { rng.gen::<f64>() })
                .collect();
            let z: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= z);
            set = up.set;
            set.rescore(&Distribution { slate, probs });
            trace.push(set.clone());
        }
        trace
    };
    let mut traces = Vec::with_capacity(10_000);
    for seq in 0..10_000u64 {
        traces.push(run(seq, &mut failures, &mut truncations));
    }
    let (mut f2, mut t2) = (Vec::new(), 0);
    let deterministic = (0..10_000u64).all(|seq| run(seq, &mut f2, &mut t2) == traces[seq as usize]);
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && deterministic && truncations > 0 && elapsed < Duration::from_secs(30);
    report(
        "criterion 3 (candidate-set properties, 10,000 sequences)",
        ok,
        format!(
            "{} violations (first: {:?}), {truncations} truncating turns, deterministic {deterministic}, {elapsed:.1?}",
            failures.len(),
            failures.first()
        ),
    );
    assert!(ok);
}

/// Dimensions used by the training criteria; see the README for the sizing.
fn desk_config(seed: u64, mode: SharingMode) -> TrainConfig {
    TrainConfig {
        embedding_dim: 24,
        gru_hidden_dim: 24,
        scorer_hidden_dim: 24,
        learning_rate: 0.01,
        batch_size: 8,
        max_epochs: 30,
        patience: 5,
        seed,
        sharing_mode: mode,
        ..TrainConfig::default()
    }
}

#[test]
fn criterion_4_overfit_sanity() {
    let start = Instant::now();
    let gen = GenConfig {
        n_train: 20,
        n_dev: 1,
        n_test: 1,
        oov_target: 0.0,
        ..GenConfig::default()
    };
    let mut corpus = generate_synthetic(&[restaurant_schema()], &gen, 4).unwrap().remove(0);
    corpus.dev = corpus.train.clone();
    let cfg = TrainConfig {
        max_epochs: 500,
        patience: 50,
        ..desk_config(1, SharingMode::Shared)
    };
    let (model, history) = train(&corpus, &cfg).unwrap();
    let jga = evaluate(&model, &corpus.train, model.config.threshold).unwrap().joint_goal_accuracy;
    let elapsed = start.elapsed();
    let ok = jga >= 0.95 && history.epochs.len() <= 500 && elapsed < Duration::from_secs(300);
    report(
        "criterion 4 (overfit 20 dialogues, shared)",
        ok,
        format!(
            "train JGA {jga:.4} after {} epochs (chosen {}), {elapsed:.1?}",
            history.epochs.len(),
            history.chosen_epoch
        ),
    );
    assert!(ok);
}

const SEEDS: [u64; 3] = [1, 2, 3];

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn criteria_5_and_6_oov_generalization_and_sharing() {
    let start = Instant::now();
    let corpus = generate_synthetic(&[restaurant_schema()], &GenConfig::default(), 5).unwrap().remove(0);
    let sizes = (corpus.train.len(), corpus.dev.len(), corpus.test.len());
    let oov = compute_oov_rate(&corpus.train, &corpus.test).unwrap();
    let baseline = evaluate_baseline(&corpus.test, &corpus.schema.slots).unwrap().joint_goal_accuracy;
    let test_jga = |mode: SharingMode, seed: u64| {
        let (model, _) = train(&corpus, &desk_config(seed, mode)).unwrap();
        evaluate(&model, &corpus.test, model.config.threshold).unwrap().joint_goal_accuracy
    };
    let shared: Vec<f64> = SEEDS.iter().map(|s| test_jga(SharingMode::Shared, *s)).collect();
    let shared_time = start.elapsed();
    let shared_mean = mean(&shared);
    let ok5 = sizes == (500, 100, 200)
        && (oov - 0.40).abs() <= 0.05
        && shared_mean >= baseline + 0.05
        && shared_time < Duration::from_secs(15 * 60);
    report(
        "criterion 5 (OOV generalization vs rule baseline)",
        ok5,
        format!(
            "sizes {sizes:?}, test OOV {oov:.3}, shared JGA {shared:.4?} mean {shared_mean:.4}, \
             baseline {baseline:.4}, margin {:.4}, {shared_time:.1?}",
            shared_mean - baseline
        ),
    );

    let per_slot: Vec<f64> = SEEDS.iter().map(|s| test_jga(SharingMode::PerSlot, *s)).collect();
    let per_slot_mean = mean(&per_slot);
    let ok6 = shared_mean >= per_slot_mean - 0.02;
    report(
        "criterion 6 (shared vs per-slot)",
        ok6,
        format!(
            "shared mean {shared_mean:.4}, per-slot JGA {per_slot:.4?} mean {per_slot_mean:.4}, {:.1?} total",
            start.elapsed()
        ),
    );
    assert!(ok5 && ok6);
}

#[test]
fn criterion_7_transfer() {
    let start = Instant::now();
    let gen = GenConfig {
        n_train: 300,
        n_dev: 60,
        n_test: 120,
        ..GenConfig::default()
    };
    let corpora = generate_synthetic(&[restaurant_schema(), movie_schema()], &gen, 7).unwrap();
    let (a, b) = (&corpora[0], &corpora[1]);
    let (mut zero_shot, mut b_only, mut joint) = (Vec::new(), Vec::new(), Vec::new());
    let mut null_jga = 0.0;
    for seed in SEEDS {
        let cfg = desk_config(seed, SharingMode::Shared);
        let z = transfer_eval(std::slice::from_ref(a), b, &cfg, TransferMode::ZeroShot).unwrap();
        null_jga = z.null_jga;
        zero_shot.push(z.report.joint_goal_accuracy);
        b_only.push(transfer_eval(&[], b, &cfg, TransferMode::Joint).unwrap().report.joint_goal_accuracy);
        joint.push(
            transfer_eval(std::slice::from_ref(a), b, &cfg, TransferMode::Joint)
                .unwrap()
                .report
                .joint_goal_accuracy,
        );
    }
    let elapsed = start.elapsed();
    let (zm, bm, jm) = (mean(&zero_shot), mean(&b_only), mean(&joint));
    let ok = zm > null_jga && jm >= bm - 0.01 && elapsed < Duration::from_secs(25 * 60);
    report(
        "criterion 7 (transfer)",
        ok,
        format!(
            "zero-shot A->B {zero_shot:.4?} mean {zm:.4} vs all-null {null_jga:.4}; \
             A+B on B mean {jm:.4} vs B-only mean {bm:.4}; {elapsed:.1?}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_determinism() {
    let run = || {
        let gen = GenConfig {
            n_train: 12,
            n_dev: 4,
            n_test: 4,
            oov_target: 0.0,
            ..GenConfig::default()
        };
        let corpus = generate_synthetic(&[restaurant_schema()], &gen, 8).unwrap().remove(0);
        let cfg = TrainConfig {
            embedding_dim: 8,
            gru_hidden_dim: 8,
            scorer_hidden_dim: 8,
            max_epochs: 3,
            ..desk_config(9, SharingMode::Shared)
        };
        let (model, history) = train(&corpus, &cfg).unwrap();
        let r = evaluate(&model, &corpus.test, model.config.threshold).unwrap();
        (
            render_corpus(&corpus),
            model.to_json(),
            format!("{}{}{}", history.to_lines(), r.to_key_values(), r.to_tsv()),
        )
    };
    let (a, b) = (run(), run());
    let same = [a.0 == b.0, a.1 == b.1, a.2 == b.2];
    let ok = same.iter().all(|x| *x);
    report(
        "criterion 8 (determinism)",
        ok,
        format!("corpus bytes equal {}, model bytes equal {}, reports equal {}", same[0], same[1], same[2]),
    );
    assert!(ok);
}

fn dataset_dir(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from).filter(|p| p.exists())
}

/// Runs only when the external datasets are supplied through
/// `CANDST_DSTC2_DIR`, `CANDST_SIM_R_DIR` and `CANDST_SIM_M_DIR`.
#[test]
fn criterion_9_external_datasets() {
    let targets: [(&str, &str, f64, f64); 3] = [
        ("CANDST_DSTC2_DIR", "dstc2", 0.703, 0.03),
        ("CANDST_SIM_R_DIR", "restaurant", 0.937, 0.03),
        ("CANDST_SIM_M_DIR", "movie", 0.945, 0.04),
    ];
    for (var, name, target, tol) in targets {
        let Some(dir) = dataset_dir(var) else {
            say(format!("SKIP criterion 9 ({name}): {var} not set; external dataset not supplied"));
            continue;
        };
        let corpus = if name == "dstc2" {
            convert_dstc2(&dir)
        } else {
            convert_simdialogue(&dir, name)
        }
        .unwrap();
        let base = TrainConfig {
            sharing_mode: SharingMode::Shared,
            ..TrainConfig::default()
        };
        let grid = grid_search(&corpus, &base, &GridSpec::default()).unwrap();
        let m = &grid.best_model;
        let jga = evaluate(m, &corpus.test, m.config.threshold).unwrap().joint_goal_accuracy;
        let ok = (jga - target).abs() <= tol;
        report(
            &format!("criterion 9 ({name})"),
            ok,
            format!("test JGA {jga:.4}, reference {target} ± {tol}, best config {:?}", grid.best),
        );
        assert!(ok);
    }
}
