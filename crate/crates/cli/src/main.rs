//! `tagctc`: batch front end for entity-aware CTC decoding.
//!
//! Exit codes: 0 success, 2 bad flags or unusable input, 3 I/O failure,
//! 4 posteriorgram/alphabet checksum mismatch.

mod error;
mod manifest;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use tagctc::decoder::{beam_search_with, NGramScorer, DEFAULT_ALPHA, DEFAULT_BEAM_WIDTH, DEFAULT_BETA};
use tagctc::evalkit::corpus_edit_stats;
use tagctc::ngram_lm::{tokenize, DEFAULT_DISCOUNT, DEFAULT_OOV_FLOOR};
use tagctc::posteriorgram::{synth_generate_with, utterance_seed};
use tagctc::semlm::{vocabulary, ClassLmScorer, DEFAULT_GAMMA};
use tagctc::{
    evaluate_ner, read_posteriorgram, strip_tags, tag_map, tag_unmap, transform_corpus, write_posteriorgram, Alphabet,
    Category, ClassMap, DecodeConfig, Decoded, NGramModel, NameDict, SynthOptions, TagScheme,
};

use error::{usage, CliError, Result};
use manifest::Record;

#[derive(Parser)]
#[command(name = "tagctc", version, about = "Entity-aware CTC decoding from posteriorgrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode every utterance of a manifest: "<id>\t<transcript>\t<score>" per line.
    Decode(DecodeArgs),
    /// Decode with a class-token LM and a name dictionary bonus.
    DecodeClass(DecodeClassArgs),
    /// Entity precision/recall/F1 of hypotheses against references.
    EvalNer(EvalArgs),
    /// Corpus word error rate, tags stripped.
    EvalWer(EvalArgs),
    /// Generate synthetic posteriorgrams and a manifest from tagged references.
    Synth(SynthArgs),
    /// Estimate an n-gram LM from a corpus and write it as ARPA.
    LmBuild(LmBuildArgs),
    /// Natural-log sentence score of every input line.
    LmScore(LmScoreArgs),
    /// Order and n-gram counts of an ARPA model.
    LmInfo(LmInfoArgs),
    /// "[PER x]" bracket notation to tag symbols.
    TagMap(LineArgs),
    /// Tag symbols to "[PER x]" bracket notation.
    TagUnmap(LineArgs),
    /// Remove tag symbols.
    Strip(LineArgs),
    /// Replace entity spans with class tokens.
    SemlmTransform(TransformArgs),
    /// Out-of-vocabulary statistics of an evaluation corpus.
    OovStats(OovArgs),
    /// Write the default alphabet as JSON.
    Alphabet(AlphabetArgs),
}

#[derive(Args)]
struct SearchArgs {
    /// TSV manifest: id, posteriorgram path, optional reference.
    #[arg(long)]
    manifest: PathBuf,
    /// Alphabet JSON; the built-in alphabet when omitted.
    #[arg(long)]
    alphabet: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    beam_width: usize,
    /// Natural-log score for words the LM cannot score.
    #[arg(long, default_value_t = DEFAULT_OOV_FLOOR, allow_negative_numbers = true)]
    oov_floor: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write bare transcripts, one per line.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    search: SearchArgs,
    /// ARPA language model.
    #[arg(long)]
    lm: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeClassArgs {
    #[command(flatten)]
    search: SearchArgs,
    /// ARPA model trained on class-mapped text.
    #[arg(long)]
    lm: PathBuf,
    /// JSON map of category code to known names.
    #[arg(long)]
    names: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[command(flatten)]
    classes: ClassArgs,
}

#[derive(Args)]
struct ClassArgs {
    /// Categories mapped to class tokens, e.g. PER,LOC.
    #[arg(long, value_delimiter = ',', default_value = "PER")]
    classes: Vec<Category>,
}

impl ClassArgs {
    fn class_map(&self) -> Result<ClassMap> {
        ClassMap::for_categories(&self.classes).map_err(|e| usage(e.to_string()))
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    hyps: PathBuf,
    #[arg(long)]
    alphabet: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Tagged references, one utterance per line.
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    alphabet: Option<PathBuf>,
    /// Probability mass spread over non-target symbols, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 3)]
    dur_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Chance that a letter peaks on a wrong letter, in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    confusion: f64,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct LmBuildArgs {
    /// Training text, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
    discount: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LmScoreArgs {
    #[arg(long)]
    lm: PathBuf,
    /// Sentences to score; stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LmInfoArgs {
    #[arg(long)]
    lm: PathBuf,
}

#[derive(Args)]
struct LineArgs {
    /// Input text; stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    alphabet: Option<PathBuf>,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    io: LineArgs,
    #[command(flatten)]
    classes: ClassArgs,
}

#[derive(Args)]
struct OovArgs {
    /// Training corpus whose tokens form the vocabulary.
    #[arg(long)]
    train: PathBuf,
    /// Tagged evaluation corpus.
    #[arg(long)]
    eval: PathBuf,
    #[arg(long)]
    alphabet: Option<PathBuf>,
    /// Class-map the training corpus first (and add the class tokens).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<Category>>,
    /// Class-map the evaluation corpus as well.
    #[arg(long, requires = "classes")]
    map_eval: bool,
}

#[derive(Args)]
struct AlphabetArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("tagctc: {e}");
        std::process::exit(e.code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Decode(a) => cmd_decode(a),
        Command::DecodeClass(a) => cmd_decode_class(a),
        Command::EvalNer(a) => cmd_eval_ner(a),
        Command::EvalWer(a) => cmd_eval_wer(a),
        Command::Synth(a) => cmd_synth(a),
        Command::LmBuild(a) => cmd_lm_build(a),
        Command::LmScore(a) => cmd_lm_score(a),
        Command::LmInfo(a) => cmd_lm_info(a),
        Command::TagMap(a) => map_lines(a, |l, s| tag_map(l, s).map_err(|e| e.to_string())),
        Command::TagUnmap(a) => map_lines(a, |l, s| tag_unmap(l, s).map_err(|e| e.to_string())),
        Command::Strip(a) => map_lines(a, |l, s| Ok(strip_tags(l, s))),
        Command::SemlmTransform(a) => cmd_semlm_transform(a),
        Command::OovStats(a) => cmd_oov_stats(a),
        Command::Alphabet(a) => emit(a.out.as_deref(), &(Alphabet::default().to_json_pretty() + "\n")),
    }
}

// ---- shared plumbing ----

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => read_text(p),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io(format!("stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn lines(text: &str) -> Vec<&str> {
    text.lines().collect()
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn load_alphabet(path: Option<&Path>) -> Result<Alphabet> {
    match path {
        Some(p) => Alphabet::load(p).map_err(|e| match e {
            tagctc::AlphabetError::Io(e) => CliError::io(p, e),
            e => usage(format!("{}: {e}", p.display())),
        }),
        None => Ok(Alphabet::default()),
    }
}

fn load_lm(path: &Path) -> Result<NGramModel> {
    tagctc::load_arpa(path).map_err(|e| match e {
        tagctc::LmError::Io(e) => CliError::io(path, e),
        e => usage(format!("{}: {e}", path.display())),
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| usage(format!("--jobs {jobs}: {e}")))
}

// ---- decoding ----

fn load_pg(record: &Record, alphabet: &Alphabet) -> Result<tagctc::Posteriorgram> {
    // A truncated or foreign file is as unreadable as a missing one: exit 3 either way.
    let pg = read_posteriorgram(&record.path)
        .map_err(|e| CliError::Io(format!("utterance {}: {}: {e}", record.id, record.path.display())))?;
    if pg.alphabet_hash() != alphabet.checksum() {
        return Err(CliError::Checksum(format!(
            "utterance {}: posteriorgram alphabet checksum {:016x} does not match alphabet {:016x}",
            record.id,
            pg.alphabet_hash(),
            alphabet.checksum()
        )));
    }
    Ok(pg)
}

fn run_manifest<F>(search: &SearchArgs, alphabet: &Alphabet, decode: F) -> Result<()>
where
    F: Fn(&tagctc::Posteriorgram) -> std::result::Result<Decoded, tagctc::DecodeError> + Sync,
{
    let records = manifest::load(&search.manifest)?;
    let pool = thread_pool(search.jobs)?;
    let results: Vec<Result<Decoded>> = pool.install(|| {
        records
            .par_iter()
            .map(|r| {
                let pg = load_pg(r, alphabet)?;
                decode(&pg).map_err(|e| usage(format!("utterance {}: {e}", r.id)))
            })
            .collect()
    });
    let mut out = String::new();
    let mut transcripts = String::new();
    for (r, d) in records.iter().zip(results) {
        let d = d?;
        out.push_str(&format!("{}\t{}\t{:.6}\n", r.id, d.text, d.score));
        transcripts.push_str(&d.text);
        transcripts.push('\n');
    }
    emit(search.out.as_deref(), &out)?;
    if let Some(p) = &search.transcripts {
        emit(Some(p), &transcripts)?;
    }
    Ok(())
}

fn search_config<'a>(s: &SearchArgs, lm: Option<&'a NGramModel>) -> DecodeConfig<'a> {
    DecodeConfig { alpha: s.alpha, beta: s.beta, beam_width: s.beam_width, lm, oov_floor: s.oov_floor }
}

fn cmd_decode(a: DecodeArgs) -> Result<()> {
    let alphabet = load_alphabet(a.search.alphabet.as_deref())?;
    let lm = a.lm.as_deref().map(load_lm).transpose()?;
    let config = search_config(&a.search, lm.as_ref());
    let params = config.search_params();
    let scorer = NGramScorer::new(config.lm, config.oov_floor);
    run_manifest(&a.search, &alphabet, |pg| beam_search_with(pg, &alphabet, &params, &scorer))
}

fn cmd_decode_class(a: DecodeClassArgs) -> Result<()> {
    let alphabet = load_alphabet(a.search.alphabet.as_deref())?;
    let lm = load_lm(&a.lm)?;
    let classes = a.classes.class_map()?;
    let names = match &a.names {
        Some(p) => NameDict::load(p).map_err(|e| match e {
            tagctc::semlm::SemLmError::Io(e) => CliError::io(p, e),
            e => usage(format!("{}: {e}", p.display())),
        })?,
        None => NameDict::default(),
    };
    if !(a.gamma >= 0.0 && a.gamma.is_finite()) {
        return Err(usage(format!("--gamma must be finite and non-negative, got {}", a.gamma)));
    }
    let config = search_config(&a.search, Some(&lm));
    let params = config.search_params();
    let scorer = ClassLmScorer::new(&lm, config.oov_floor, *alphabet.tags(), &classes, &names, a.gamma);
    run_manifest(&a.search, &alphabet, |pg| beam_search_with(pg, &alphabet, &params, &scorer))
}

// ---- evaluation ----

fn read_pair(a: &EvalArgs) -> Result<(String, String, TagScheme)> {
    let refs = read_text(&a.refs)?;
    let hyps = read_text(&a.hyps)?;
    let scheme = *load_alphabet(a.alphabet.as_deref())?.tags();
    Ok((refs, hyps, scheme))
}

fn cmd_eval_ner(a: EvalArgs) -> Result<()> {
    let (refs, hyps, scheme) = read_pair(&a)?;
    let report = evaluate_ner(&lines(&refs), &lines(&hyps), &scheme).map_err(|e| usage(e.to_string()))?;
    let json = report.to_json() + "\n";
    if let Some(p) = &a.json_out {
        emit(Some(p), &json)?;
    }
    emit(None, &format!("{json}\n{}", report.to_table()))
}

fn cmd_eval_wer(a: EvalArgs) -> Result<()> {
    let (refs, hyps, scheme) = read_pair(&a)?;
    let (refs, hyps) = (lines(&refs), lines(&hyps));
    let stats = corpus_edit_stats(&refs, &hyps, &scheme).map_err(|e| usage(e.to_string()))?;
    let empty =
        refs.iter().zip(&hyps).filter(|(r, h)| tagctc::evalkit::edit_stats(r, h, &scheme).empty_reference()).count();
    if empty > 0 {
        eprintln!("tagctc: {empty} utterance(s) with an empty reference and a non-empty hypothesis");
    }
    let json = serde_json::json!({
        "wer": stats.rate(),
        "distance": stats.distance,
        "ref_words": stats.ref_words,
        "hyp_words": stats.hyp_words,
        "utterances": refs.len(),
        "empty_reference_utterances": empty,
    });
    let text = serde_json::to_string_pretty(&json).expect("json serializes") + "\n";
    if let Some(p) = &a.json_out {
        emit(Some(p), &text)?;
    }
    emit(None, &text)
}

// ---- synthesis ----

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.noise) {
        return Err(usage(format!("--noise must be in [0, 1), got {}", a.noise)));
    }
    if !(0.0..=1.0).contains(&a.confusion) {
        return Err(usage(format!("--confusion must be in [0, 1], got {}", a.confusion)));
    }
    if a.dur_max == 0 {
        return Err(usage("--dur-max must be at least 1"));
    }
    let alphabet = load_alphabet(a.alphabet.as_deref())?;
    let refs = read_text(&a.refs)?;
    let refs = lines(&refs);
    // Reject unencodable input before touching the output directory.
    for (n, line) in refs.iter().enumerate() {
        alphabet.encode(line).map_err(|e| usage(format!("{} line {}: {e}", a.refs.display(), n + 1)))?;
    }
    std::fs::create_dir_all(&a.outdir).map_err(|e| CliError::io(&a.outdir, e))?;
    let width = refs.len().max(1).to_string().len().max(5);
    let records: Vec<Record> = refs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let id = format!("utt{i:0width$}");
            Record { path: a.outdir.join(format!("{id}.lpg")), id, reference: Some(r.to_string()) }
        })
        .collect();
    let pool = thread_pool(a.jobs)?;
    let written: Vec<Result<()>> = pool.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let opts = SynthOptions {
                    noise: a.noise,
                    dur_max: a.dur_max,
                    seed: utterance_seed(a.seed, i),
                    confusion: a.confusion,
                };
                let reference = r.reference.as_deref().unwrap_or_default();
                let pg = synth_generate_with(reference, &alphabet, &opts)
                    .map_err(|e| usage(format!("utterance {}: {e}", r.id)))?;
                write_posteriorgram(&pg, &r.path).map_err(|e| CliError::io(&r.path, e))
            })
            .collect()
    });
    written.into_iter().collect::<Result<()>>()?;
    let manifest_path = a.outdir.join("manifest.tsv");
    emit(Some(&manifest_path), &manifest::render(&records, &a.outdir))?;
    eprintln!("tagctc: wrote {} posteriorgrams and {}", records.len(), manifest_path.display());
    Ok(())
}

// ---- language models ----

fn cmd_lm_build(a: LmBuildArgs) -> Result<()> {
    let text = read_text(&a.corpus)?;
    let sentences: Vec<Vec<String>> = text.lines().map(tokenize).filter(|t| !t.is_empty()).collect();
    let model = tagctc::build_from_corpus(&sentences, a.order, a.discount).map_err(|e| usage(e.to_string()))?;
    emit(a.out.as_deref(), &model.to_arpa())
}

fn cmd_lm_score(a: LmScoreArgs) -> Result<()> {
    let lm = load_lm(&a.lm)?;
    let text = read_input(a.input.as_deref())?;
    let mut out = String::new();
    for line in text.lines() {
        let tokens = tokenize(line);
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        out.push_str(&format!("{:.6}\t{line}\n", lm.score_sequence(&refs)));
    }
    emit(a.out.as_deref(), &out)
}

fn cmd_lm_info(a: LmInfoArgs) -> Result<()> {
    let lm = load_lm(&a.lm)?;
    let mut out = format!("order\t{}\nvocab\t{}\n", lm.order(), lm.vocab().count());
    for (n, c) in lm.counts().iter().enumerate() {
        out.push_str(&format!("ngram {}\t{c}\n", n + 1));
    }
    emit(None, &out)
}

// ---- text utilities ----

fn map_lines(a: LineArgs, f: impl Fn(&str, &TagScheme) -> std::result::Result<String, String>) -> Result<()> {
    let scheme = *load_alphabet(a.alphabet.as_deref())?.tags();
    let text = read_input(a.input.as_deref())?;
    let mut out = String::new();
    for (n, line) in text.lines().enumerate() {
        let mapped = f(line, &scheme).map_err(|e| usage(format!("line {}: {e}", n + 1)))?;
        out.push_str(&mapped);
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)
}

fn cmd_semlm_transform(a: TransformArgs) -> Result<()> {
    let scheme = *load_alphabet(a.io.alphabet.as_deref())?.tags();
    let classes = a.classes.class_map()?;
    let text = read_input(a.io.input.as_deref())?;
    let t = transform_corpus(&lines(&text), &scheme, &classes);
    for (line, pos) in &t.half_labeled {
        eprintln!("tagctc: line {}: half-labeled tag at char {pos} left in place", line + 1);
    }
    let mut out = t.lines.join("\n");
    if !t.lines.is_empty() {
        out.push('\n');
    }
    emit(a.io.out.as_deref(), &out)
}

fn cmd_oov_stats(a: OovArgs) -> Result<()> {
    let scheme = *load_alphabet(a.alphabet.as_deref())?.tags();
    let train = read_text(&a.train)?;
    let eval = read_text(&a.eval)?;
    let (train, mut eval): (Vec<String>, Vec<String>) =
        (lines(&train).into_iter().map(String::from).collect(), lines(&eval).into_iter().map(String::from).collect());
    let mut vocab;
    match &a.classes {
        Some(c) => {
            let classes = ClassMap::for_categories(c).map_err(|e| usage(e.to_string()))?;
            vocab = vocabulary(&transform_corpus(&train, &scheme, &classes).lines, &scheme);
            vocab.extend(classes.literals().map(String::from));
            if a.map_eval {
                eval = transform_corpus(&eval, &scheme, &classes).lines;
            }
        }
        None => vocab = vocabulary(&train, &scheme),
    }
    let stats = tagctc::oov_stats(&vocab, &eval, &scheme);
    emit(None, &(serde_json::to_string_pretty(&stats).expect("json serializes") + "\n"))
}
