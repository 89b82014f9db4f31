//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Run with `cargo test --test acceptance`
//! (add `--release` for representative timings).
// Hand-written ARPA text uses rounded log10 constants such as -0.30103.
#![allow(clippy::approx_constant)]

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tagctc::ctc::{brute_force_best_labeling, total_labeling_mass};
use tagctc::evalkit::Prf;
use tagctc::ngram_lm::{parse_arpa, tokenize, DEFAULT_DISCOUNT};
use tagctc::posteriorgram::{synth_generate_with, utterance_seed};
use tagctc::semlm::vocabulary;
use tagctc::*;

// Tolerances and budgets, fixed.
const C1_MASS_TOL: f64 = 1e-8;
const C1_SCORE_TOL: f64 = 1e-9;
const C1_BUDGET: Duration = Duration::from_secs(30);
const C2_FD_STEP: f64 = 1e-5;
const C2_GRAD_TOL: f64 = 1e-5;
const C2_BUDGET: Duration = Duration::from_secs(5);
const C3_TOL: f64 = 1e-6;
const C5_MIN_F1_GAIN: f64 = 0.10;
const C5_BUDGET: Duration = Duration::from_secs(300);

// Criterion-5 workload.
const CORPUS_SIZE: usize = 500;
const EVAL_SIZE: usize = 200;
const NOISE: f64 = 0.25;
const DUR_MAX: usize = 3;
const CONFUSION: f64 = 0.25;
const LM_ORDER: usize = 4;
const SEED: u64 = 2024;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < budget, format!("took {took:.2?}, budget {budget:?}"))?;
    Ok(took)
}

// ---------------------------------------------------------------------------
// Toy tagged corpus

const PEOPLE: &[&str] = &[
    "RAHUL",
    "PRIYA SHARMA",
    "ANITA",
    "VIKRAM SINGH",
    "MEERA",
    "ARJUN",
    "KAVYA NAIR",
    "ROHAN",
    "SNEHA",
    "AMIT KUMAR",
    "DEEPA",
    "KARAN MEHTA",
    "NEHA",
    "SURESH",
    "LATA",
    "RAVI",
    "POOJA",
    "SANJAY GUPTA",
    "ASHA",
    "MANOJ",
    "GAURAV YADAV",
    "ISHA",
    "NIKHIL",
    "SUNITA RAO",
    "TARUN",
    "JOHN SMITH",
    "MARIA",
    "DAVID",
    "FATIMA",
    "KIRAN",
];
const PLACES: &[&str] = &[
    "DELHI",
    "MUMBAI",
    "PUNE",
    "CHENNAI",
    "KOLKATA",
    "BANGALORE",
    "HYDERABAD",
    "JAIPUR",
    "NEW YORK",
    "LONDON",
    "GOA",
    "AGRA",
    "SURAT",
    "INDORE",
    "PATNA",
    "NAGPUR",
    "LUCKNOW",
    "KOCHI",
    "SHIMLA",
    "PARIS",
];
const ORGS: &[&str] = &[
    "INFOSYS",
    "WIPRO",
    "TATA MOTORS",
    "RELIANCE",
    "ISRO",
    "ACME",
    "BHARAT BANK",
    "CITY HOSPITAL",
    "STATE BANK",
    "GREEN FOODS",
    "SUN PHARMA",
    "METRO RAIL",
];
const TIMES: &[&str] =
    &["TODAY", "TOMORROW", "YESTERDAY", "NEXT WEEK", "THIS MORNING", "LAST NIGHT", "ON MONDAY", "AT NOON"];
const ADJS: &[&str] = &["BUSY", "QUIET", "CROWDED", "OPEN", "CLOSED", "WARM", "COLD", "NEW", "FAMOUS"];
const TEMPLATES: &[&str] = &[
    "MY NAME IS P",
    "P WORKS AT O IN L",
    "P FLEW TO L T",
    "THE O OFFICE IN L IS A",
    "PLEASE CALL P AT THE O DESK",
    "P AND P MET IN L T",
    "I WILL VISIT L WITH P T",
    "O OPENED A NEW BRANCH IN L",
    "WE ARE GOING TO L T",
    "THE WEATHER IN L IS A T",
    "P JOINED O T",
    "HAVE YOU SEEN THE A STATION IN L",
];

fn toy_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng, list: &[&str]| list[rng.gen_range(0..list.len())].to_string();
    (0..n)
        .map(|_| {
            let template = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
            template
                .split(' ')
                .map(|slot| match slot {
                    "P" => format!("|{}]", pick(&mut rng, PEOPLE)),
                    "L" => format!("${}]", pick(&mut rng, PLACES)),
                    "O" => format!("{{{}]", pick(&mut rng, ORGS)),
                    "T" => pick(&mut rng, TIMES),
                    "A" => pick(&mut rng, ADJS),
                    word => word.to_string(),
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn synth_all(refs: &[String], alphabet: &Alphabet, noise: f64, confusion: f64) -> Vec<Posteriorgram> {
    refs.iter()
        .enumerate()
        .map(|(i, r)| {
            let opts = SynthOptions { noise, dur_max: DUR_MAX, seed: utterance_seed(SEED, i), confusion };
            synth_generate_with(r, alphabet, &opts).expect("corpus is encodable")
        })
        .collect()
}

fn texts(decoded: &[Decoded]) -> Vec<String> {
    decoded.iter().map(|d| d.text.clone()).collect()
}

// ---------------------------------------------------------------------------
// 1. CTC oracle equivalence

fn small_alphabet(n_chars: usize) -> Alphabet {
    Alphabet::from_chars(('A'..='Z').take(n_chars), TagScheme::default()).unwrap()
}

/// Path-enumeration oracle: sums every frame-level path that collapses to `label`.
fn path_sum(pg: &Posteriorgram, label: &[usize], blank: usize) -> f64 {
    let (t, v) = (pg.num_frames(), pg.num_symbols());
    let mut total = 0.0;
    let mut path = vec![0usize; t];
    for code in 0..v.pow(t as u32) {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % v;
            c /= v;
        }
        let mut collapsed = Vec::new();
        let mut prev = None;
        for &s in &path {
            if Some(s) != prev && s != blank {
                collapsed.push(s);
            }
            prev = Some(s);
        }
        if collapsed == label {
            total += path.iter().enumerate().map(|(i, &s)| pg.get(i, s)).sum::<f64>().exp();
        }
    }
    total
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_mass = 0.0f64;
    let mut worst_path = 0.0f64;
    for case in 0..50 {
        let t = rng.gen_range(1..=6);
        let v = rng.gen_range(2..=4);
        let alphabet = small_alphabet(v - 1);
        let scores = (0..t * v).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let pg = Posteriorgram::from_scores(scores, v, alphabet.checksum()).unwrap();
        let blank = alphabet.blank_index();

        let mass = total_labeling_mass(&pg, blank).unwrap();
        worst_mass = worst_mass.max((mass - 1.0).abs());
        check((mass - 1.0).abs() <= C1_MASS_TOL, format!("case {case}: labeling mass {mass}"))?;

        let (best, best_lp) = brute_force_best_labeling(&pg, &alphabet, t).unwrap();
        let label = LabelSequence::from_text(&best, &alphabet).unwrap();
        let by_paths = path_sum(&pg, label.indices(), blank).ln();
        worst_path = worst_path.max((by_paths - best_lp).abs());
        check(
            (by_paths - best_lp).abs() <= C1_SCORE_TOL,
            format!("case {case}: forward {best_lp} vs paths {by_paths}"),
        )?;

        let exhaustive =
            DecodeConfig { alpha: 0.0, beta: 0.0, beam_width: (v - 1).pow(t as u32) * 2 + 2, ..Default::default() };
        let d = prefix_beam_search(&pg, &alphabet, &exhaustive).unwrap();
        check(d.text == best, format!("case {case}: beam {:?} vs brute force {best:?}", d.text))?;
        check((d.score - best_lp).abs() <= C1_SCORE_TOL, format!("case {case}: beam score {} vs {best_lp}", d.score))?;
    }
    let took = within_budget(start, C1_BUDGET)?;
    Ok(format!("50 instances; max |mass-1| {worst_mass:.1e}, max |forward-paths| {worst_path:.1e}; {took:.2?}"))
}

// ---------------------------------------------------------------------------
// 2. CTC gradient

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alphabet = small_alphabet(2);
    let (t, v) = (4, 3);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let scores = (0..t * v).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let pg = Posteriorgram::from_scores(scores, v, 0).unwrap();
        let len = rng.gen_range(1..=2);
        let label = LabelSequence::new((0..len).map(|_| rng.gen_range(1..v)).collect(), &alphabet).unwrap();
        let (_, grad) = ctc_loss_and_grad(&pg, &label, 0).unwrap();
        for i in 0..t * v {
            // Loss is a function of the raw log-probability inputs; no renormalization.
            let loss_at = |delta: f64| {
                let mut frames = pg.as_slice().to_vec();
                frames[i] += delta;
                let shifted = Posteriorgram::new(frames, v, 0).unwrap();
                ctc_loss_and_grad(&shifted, &label, 0).unwrap().0
            };
            let fd = (loss_at(C2_FD_STEP) - loss_at(-C2_FD_STEP)) / (2.0 * C2_FD_STEP);
            worst = worst.max((fd - grad[i]).abs());
            check(
                (fd - grad[i]).abs() <= C2_GRAD_TOL,
                format!("case {case} entry {i}: analytic {} vs fd {fd}", grad[i]),
            )?;
        }
    }
    let took = within_budget(start, C2_BUDGET)?;
    Ok(format!("20 instances of 4x3; max |analytic-fd| {worst:.1e}; {took:.2?}"))
}

// ---------------------------------------------------------------------------
// 3. ARPA fidelity

const HAND_ARPA: &str = "\\data\\
ngram 1=5
ngram 2=3

\\1-grams:
-99\t<s>\t-0.30103
-0.69897\t</s>
-0.52288\tA\t-0.39794
-0.69897\tB\t-0.22185
-1.0\t<unk>

\\2-grams:
-0.30103\t<s> A
-0.22185\tA B
-0.39794\tB </s>

\\end\\
";

/// Independent reading of an ARPA file: (tokens, log10 prob, log10 backoff).
fn arpa_entries(text: &str) -> Vec<(Vec<String>, f64, f64)> {
    let mut order = 0;
    let mut out = Vec::new();
    for line in text.lines().map(str::trim) {
        if let Some(rest) = line.strip_prefix('\\').and_then(|l| l.strip_suffix("-grams:")) {
            order = rest.parse().unwrap();
            continue;
        }
        if order == 0 || line.is_empty() || line.starts_with('\\') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let prob = fields[0].parse().unwrap();
        let tokens = fields[1..=order].iter().map(|s| s.to_string()).collect();
        let backoff = fields.get(order + 1).map_or(0.0, |b| b.parse().unwrap());
        out.push((tokens, prob, backoff));
    }
    out
}

fn criterion_3() -> Outcome {
    let ln10 = std::f64::consts::LN_10;
    let m = parse_arpa(HAND_ARPA).map_err(|e| e.to_string())?;
    // (context, word, expected log10 by hand)
    let cases: &[(&[&str], &str, f64)] = &[
        (&["A"], "B", -0.22185),
        (&["<s>"], "A", -0.30103),
        (&["B"], "A", -0.22185 + -0.52288),
        (&["A"], "</s>", -0.39794 + -0.69897),
        (&["<s>"], "B", -0.30103 + -0.69897),
        (&["A"], "ZZZ", -0.39794 + -1.0),
        (&[], "B", -0.69897),
    ];
    let mut worst = 0.0f64;
    for (ctx, w, log10) in cases {
        let got = m.score_word(ctx, w);
        worst = worst.max((got - log10 * ln10).abs());
        check((got - log10 * ln10).abs() <= C3_TOL, format!("p({w}|{ctx:?}) = {got}, hand {}", log10 * ln10))?;
    }
    let sentence = m.score_sequence(&["A", "B"]);
    let hand = (-0.30103 - 0.22185 - 0.39794) * ln10;
    check((sentence - hand).abs() <= C3_TOL, format!("sentence {sentence} vs {hand}"))?;

    // build -> write -> load
    let corpus = toy_corpus(CORPUS_SIZE, SEED);
    let sents: Vec<Vec<String>> = corpus.iter().map(|l| tokenize(l)).collect();
    let built = build_from_corpus(&sents, 3, DEFAULT_DISCOUNT).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.arpa");
    write_arpa(&built, &path).map_err(|e| e.to_string())?;
    let loaded = load_arpa(&path).map_err(|e| e.to_string())?;
    check(built.counts() == loaded.counts(), "n-gram counts differ after round trip")?;
    let written = std::fs::read_to_string(&path).unwrap();
    let entries = arpa_entries(&written);
    check(entries.len() == built.counts().iter().sum::<usize>(), "ARPA text entry count")?;
    let mut round_trip = 0.0f64;
    for (tokens, _, _) in &entries {
        let key: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let (a, b) = (built.entry(&key).unwrap(), loaded.entry(&key).unwrap());
        let lp = if a.log_prob.is_finite() { (a.log_prob - b.log_prob).abs() } else { 0.0 };
        let dev = lp.max((a.backoff - b.backoff).abs());
        round_trip = round_trip.max(dev);
        check(dev <= C3_TOL, format!("entry {key:?}: {a:?} vs {b:?}"))?;
    }

    // normalization over random contexts
    let vocab: Vec<String> = built.vocab().map(String::from).collect();
    let predictable: Vec<&str> = vocab.iter().map(String::as_str).filter(|w| *w != "<s>").collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_norm = 0.0f64;
    for _ in 0..100 {
        let len = rng.gen_range(0..built.order());
        let ctx: Vec<&str> = (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();
        let total: f64 = predictable.iter().map(|w| built.score_word(&ctx, w).exp()).sum();
        worst_norm = worst_norm.max((total - 1.0).abs());
        check((total - 1.0).abs() <= C3_TOL, format!("context {ctx:?} sums to {total}"))?;
    }
    Ok(format!(
        "hand 2-gram max err {worst:.1e}; round trip {} entries max err {round_trip:.1e}; 100 contexts max |sum-1| {worst_norm:.1e}",
        entries.len()
    ))
}

// ---------------------------------------------------------------------------
// 4. Evaluation rules

fn criterion_4() -> Outcome {
    let s = TagScheme::default();
    let sentence = "{T.C.S.] CEO |Rajesh Gopinathan] heads a meeting in their $Banglore] office.";
    let half = "{T.C.S.] CEO |Rajesh Gopinathan heads a meeting in their $Banglore] office.";
    let same = evaluate_ner(&[sentence], &[sentence], &s).unwrap();
    check(same.micro.f1 == 1.0 && same.macro_avg.f1 == 1.0, format!("self F1 {:?}", same.micro))?;

    let (spans, dropped) = parse_tagged(half, &s, ParseMode::Lenient).unwrap();
    let kept: Vec<(Category, &str)> = spans.iter().map(|e| (e.category, e.surface.as_str())).collect();
    check(
        kept == [(Category::Organization, "T.C.S."), (Category::Location, "Banglore")] && dropped == 1,
        format!("half-label parse {kept:?}, dropped {dropped}"),
    )?;
    let r = evaluate_ner(&[sentence], &[half], &s).unwrap();
    let per = r.per_category[&Category::Person];
    check((per.tp, per.fp, per.fn_) == (0, 0, 1), format!("PER counts {per:?}"))?;
    for c in [Category::Location, Category::Organization] {
        check(r.per_category[&c].f1 == 1.0, format!("{c:?} changed"))?;
    }

    let dup = evaluate_ner(&["|A] and |A]"], &["|A]"], &s).unwrap();
    let per = dup.per_category[&Category::Person];
    check((per.tp, per.fp, per.fn_) == (1, 0, 0), format!("duplicate counts {per:?}"))?;
    Ok("self F1 1.0; half-labeled PER dropped (tp 0, fp 0, fn 1); duplicates collapse to one".into())
}

// ---------------------------------------------------------------------------
// 5. LM effect on synthetic data, and 8. determinism

struct LmRun {
    refs: Vec<String>,
    pgs: Vec<Posteriorgram>,
    lm: NGramModel,
}

fn lm_run() -> LmRun {
    let corpus = toy_corpus(CORPUS_SIZE, SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let refs: Vec<String> = corpus.choose_multiple(&mut rng, EVAL_SIZE).cloned().collect();
    let alphabet = Alphabet::default();
    let pgs = synth_all(&refs, &alphabet, NOISE, CONFUSION);
    let sents: Vec<Vec<String>> = corpus.iter().map(|l| tokenize(l)).collect();
    let lm = build_from_corpus(&sents, LM_ORDER, DEFAULT_DISCOUNT).unwrap();
    LmRun { refs, pgs, lm }
}

fn with_lm_config(lm: &NGramModel) -> DecodeConfig<'_> {
    DecodeConfig::default().with_lm(lm)
}

fn without_lm_config() -> DecodeConfig<'static> {
    // No LM means nothing for the word bonus to balance, so it is zero too.
    DecodeConfig { alpha: 0.0, beta: 0.0, ..DecodeConfig::default() }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn criterion_5(run: &LmRun, fused_out: &mut Option<String>) -> Outcome {
    let start = Instant::now();
    let alphabet = Alphabet::default();
    let s = TagScheme::default();
    let plain = pool(8).install(|| decode_batch(&run.pgs, &alphabet, &without_lm_config())).unwrap();
    let fused = pool(8).install(|| decode_batch(&run.pgs, &alphabet, &with_lm_config(&run.lm))).unwrap();
    *fused_out = Some(render(&fused));
    let f1 = |d: &[Decoded]| evaluate_ner(&run.refs, &texts(d), &s).unwrap().micro;
    let (f_plain, f_fused): (Prf, Prf) = (f1(&plain), f1(&fused));
    let w_plain = wer_corpus(&run.refs, &texts(&plain), &s).unwrap();
    let w_fused = wer_corpus(&run.refs, &texts(&fused), &s).unwrap();
    let summary = format!(
        "micro F1 {:.3} -> {:.3} (gain {:+.3}, need >= {C5_MIN_F1_GAIN}); WER {:.4} -> {:.4}",
        f_plain.f1,
        f_fused.f1,
        f_fused.f1 - f_plain.f1,
        w_plain,
        w_fused
    );
    check(f_fused.f1 - f_plain.f1 >= C5_MIN_F1_GAIN, summary.clone())?;
    check(w_fused < w_plain, summary.clone())?;
    let took = within_budget(start, C5_BUDGET).map_err(|e| format!("{summary}; {e}"))?;
    Ok(format!("{summary}; {took:.2?}"))
}

fn render(decoded: &[Decoded]) -> String {
    decoded
        .iter()
        .enumerate()
        .map(|(i, d)| format!("utt{i:05}\t{}\t{:.6}\t{:016x}\n", d.text, d.score, d.score.to_bits()))
        .collect()
}

/// Compares a single-threaded decode against criterion 5's 8-thread output.
fn criterion_8(run: &LmRun, eight: Option<String>) -> Outcome {
    let alphabet = Alphabet::default();
    let config = with_lm_config(&run.lm);
    let eight =
        eight.unwrap_or_else(|| render(&pool(8).install(|| decode_batch(&run.pgs, &alphabet, &config)).unwrap()));
    let one = render(&pool(1).install(|| decode_batch(&run.pgs, &alphabet, &config)).unwrap());
    check(one == eight, "outputs differ between 1 and 8 threads")?;
    Ok(format!("{} utterances, {} bytes identical across 1 and 8 threads", run.pgs.len(), one.len()))
}

// ---------------------------------------------------------------------------
// 6. Noiseless pipeline identity

fn criterion_6() -> Outcome {
    let alphabet = Alphabet::default();
    let s = TagScheme::default();
    let mut corpus = toy_corpus(CORPUS_SIZE, SEED + 6);
    // Plus some odd shapes: empty line, adjacent entities, repeated letters.
    corpus.extend(["", "|A]$B]{C]", "|AA  BB] LL", "ZZZ"].map(String::from));
    let pgs = synth_all(&corpus, &alphabet, 0.0, 0.0);
    let decoded = decode_batch(&pgs, &alphabet, &without_lm_config()).unwrap();
    let hyps = texts(&decoded);
    let w = wer_corpus(&corpus, &hyps, &s).unwrap();
    let f = evaluate_ner(&corpus, &hyps, &s).unwrap().micro.f1;
    check(w == 0.0 && f == 1.0, format!("WER {w}, micro F1 {f}"))?;
    // "|AA  BB]" keeps its double space; evaluation normalizes it.
    Ok(format!("{} utterances: WER {w}, micro F1 {f}", corpus.len()))
}

// ---------------------------------------------------------------------------
// 7. Class mapping removes entity OOVs

fn criterion_7() -> Outcome {
    let s = TagScheme::default();
    let corpus = toy_corpus(CORPUS_SIZE, SEED + 7);
    // Hold out sentences naming people absent from training.
    let held_names: BTreeSet<&str> = PEOPLE[PEOPLE.len() - 6..].iter().copied().collect();
    let (eval, train): (Vec<String>, Vec<String>) =
        corpus.into_iter().partition(|l| held_names.iter().any(|n| l.contains(&format!("|{n}]"))));
    let mut eval = eval;
    eval.push("THE A STATION IN $ZANZIBAR] WAS SHUT".into()); // unseen non-entity word too

    let before = oov_stats(&vocabulary(&train, &s), &eval, &s);
    check(before.oov_entity_words > 0, format!("held-out set has no entity OOVs to begin with: {before:?}"))?;

    let classes = ClassMap::all();
    let mut vocab = vocabulary(&transform_corpus(&train, &s, &classes).lines, &s);
    vocab.extend(classes.literals().map(String::from));
    let mapped = transform_corpus(&eval, &s, &classes).lines;
    let after = oov_stats(&vocab, &mapped, &s);
    check(after.entity_share_of_oov == 0.0 && after.oov_entity_words == 0, format!("after mapping {after:?}"))?;
    Ok(format!(
        "{} held-out lines; entity share of OOV {:.3} ({}/{}) -> {} ({}/{})",
        eval.len(),
        before.entity_share_of_oov,
        before.oov_entity_words,
        before.oov_words,
        after.entity_share_of_oov,
        after.oov_entity_words,
        after.oov_words
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut failed = 0;
    let mut report = |id: &str, name: &str, outcome: std::thread::Result<Outcome>| {
        let outcome = outcome.unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {id} {name}: {detail}");
            }
        }
    };
    report("C1", "CTC oracle equivalence", catch_unwind(criterion_1));
    report("C2", "CTC gradient", catch_unwind(criterion_2));
    report("C3", "ARPA fidelity", catch_unwind(criterion_3));
    report("C4", "evaluation rules", catch_unwind(criterion_4));
    let run = lm_run();
    let mut fused = None;
    report("C5", "LM improves entities and WER", catch_unwind(AssertUnwindSafe(|| criterion_5(&run, &mut fused))));
    report("C6", "noiseless pipeline identity", catch_unwind(criterion_6));
    report("C7", "class mapping removes entity OOVs", catch_unwind(criterion_7));
    report("C8", "determinism across thread counts", catch_unwind(AssertUnwindSafe(|| criterion_8(&run, fused))));
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
