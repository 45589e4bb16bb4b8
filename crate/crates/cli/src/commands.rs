use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use polystream::composer::{compose, export_midi, SamplerConfig, SeedSource};
use polystream::corpus::prepare_corpus;
use polystream::midi_io::{parse_midi, KeyEstimate, Mode};
use polystream::multistream::{
    count_multistream_exact, decode, log10_big, log_count_multistream_approx, log_count_piano_roll, parse_sequence,
    polyphony_profile, write_sequence, DurationVocab, MultiStreamSequence, Pitch, RepresentationConfig,
};
use polystream::plansearch::{run_search, write_best_states, write_iteration_csv, CompositionEnvironment, SearchHyperparams};
use polystream::reward::{calibrate, evaluate, ReferenceCorpus, RewardConfig};
use polystream::seqmodel::{make_training_set, train, write_loss_trace, Checkpoint, ModelHyperparams, ModelParams, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::manifest::{corpus_dir, load_corpus, Manifest, SkippedEntry, SongEntry};
use crate::{
    CalibrateArgs, Cli, Command, ComposeArgs, EvaluateArgs, IngestArgs, InputError, PipelineConfig, SearchArgs, SparsityArgs,
    TrainArgs,
};

/// Version of this tool, recorded in every run sidecar.
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct RunMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    args: &'a Command,
    config: &'a PipelineConfig,
}

/// Loads the configuration, applies the global overrides and runs the
/// subcommand.
pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Command::Ingest(IngestArgs { corpus: Some(dir) }) = &cli.command {
        cfg.corpus_dir = dir.clone();
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;

    match &cli.command {
        Command::Ingest(_) => ingest(&cfg)?,
        Command::Stats => stats(&cfg)?,
        Command::Train(a) => train_cmd(&cfg, a)?,
        Command::Compose(a) => compose_cmd(&cfg, a)?,
        Command::Evaluate(a) => evaluate_cmd(&cfg, a)?,
        Command::Search(a) => search_cmd(&cfg, a)?,
        Command::Sparsity(a) => sparsity(&cfg, a)?,
        Command::CalibrateRewards(a) => calibrate_cmd(&cfg, a)?,
    }

    let runs = cfg.out_dir.join("runs");
    fs::create_dir_all(&runs)?;
    let meta = RunMetadata { tool: "polystream", version: VERSION, seed: cfg.seed, args: &cli.command, config: &cfg };
    write_text(&runs.join(format!("{}.json", cli.command.name())), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn key_name(key: &KeyEstimate) -> String {
    const NAMES: [&str; 12] = ["C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"];
    let mode = match key.mode {
        Mode::Major => "major",
        Mode::Minor => "minor",
    };
    format!("{} {mode}", NAMES[key.tonic as usize])
}

fn midi_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| InputError::new(format!("cannot read corpus directory {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for e in entries {
        let p = e?.path();
        let ext = p.extension().and_then(|x| x.to_str()).map(str::to_ascii_lowercase);
        if p.is_file() && matches!(ext.as_deref(), Some("mid") | Some("midi")) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn ingest(cfg: &PipelineConfig) -> Result<()> {
    let files = midi_files(&cfg.corpus_dir)?;
    if files.is_empty() {
        return Err(InputError::new(format!("no MIDI files in {}", cfg.corpus_dir.display())).into());
    }
    let mut tracks = Vec::new();
    let mut sources = BTreeMap::new();
    let mut skipped = Vec::new();
    for path in &files {
        let source = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if sources.contains_key(&id) {
            warn!("skipping {source}: song id {id} already taken");
            skipped.push(SkippedEntry { source, reason: format!("duplicate song id {id}") });
            continue;
        }
        match fs::read(path).map_err(anyhow::Error::from).and_then(|b| Ok(parse_midi(&b, &id)?)) {
            Ok(t) => {
                sources.insert(id, source);
                tracks.push(t);
            }
            Err(e) => {
                warn!("skipping {source}: {e}");
                skipped.push(SkippedEntry { source, reason: e.to_string() });
            }
        }
    }
    if tracks.is_empty() {
        return Err(InputError::new("no readable MIDI files in the corpus").into());
    }
    let prepared = prepare_corpus(&tracks, &cfg.representation).map_err(|e| InputError::new(format!("cannot prepare corpus: {e}")))?;
    if prepared.songs.is_empty() {
        return Err(InputError::new("no song in the corpus could be transcribed").into());
    }
    for (id, reason) in &prepared.skipped {
        skipped.push(SkippedEntry { source: sources.get(id).cloned().unwrap_or_else(|| id.clone()), reason: reason.clone() });
    }

    let dir = corpus_dir(&cfg.out_dir);
    let songs_dir = dir.join("songs");
    if songs_dir.exists() {
        fs::remove_dir_all(&songs_dir)?;
    }
    fs::create_dir_all(&songs_dir)?;
    let mut entries = Vec::new();
    for song in &prepared.songs {
        let file = format!("songs/{}.msq", song.id);
        write_text(&dir.join(&file), &write_sequence(&song.sequence))?;
        entries.push(SongEntry {
            id: song.id.clone(),
            source: sources[&song.id].clone(),
            file,
            key: key_name(&song.key),
            key_offset: song.key_offset,
            notes: song.track.len(),
            note_sets: song.sequence.len(),
            duplicates_removed: song.duplicates_removed,
            polyphony_dropped: song.polyphony_dropped,
        });
    }
    let vocab = prepared.config.vocab.as_slice().to_vec();
    let vocab_text: String = vocab.iter().map(|d| format!("{d}\n")).collect();
    write_text(&dir.join("vocab.txt"), &vocab_text)?;
    let manifest = Manifest { n_streams: prepared.config.n_streams, vocab, songs: entries, skipped };
    write_text(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    println!("ingested {} songs ({} skipped), {} durations", manifest.songs.len(), manifest.skipped.len(), manifest.vocab.len());
    for s in &manifest.songs {
        println!("  {:<24} {:<9} offset {:+} {} notes {} note-sets", s.id, s.key, s.key_offset, s.notes, s.note_sets);
    }
    Ok(())
}

#[derive(Debug, Default, Serialize)]
struct SongStats {
    id: String,
    notes: usize,
    onsets: usize,
    max_polyphony: usize,
    mean_polyphony: f64,
    /// MIDI pitch → note count.
    pitch_histogram: BTreeMap<u8, usize>,
    /// Duration in whole notes → note count, in vocabulary order.
    duration_histogram: Vec<(f64, usize)>,
}

#[derive(Debug, Serialize)]
struct CorpusStats {
    songs: Vec<SongStats>,
    aggregate: SongStats,
}

fn song_stats(id: &str, seq: &MultiStreamSequence) -> Result<SongStats> {
    let track = decode(seq)?;
    let profile = polyphony_profile(&track);
    let mut pitch_histogram = BTreeMap::new();
    let vocab = seq.config.vocab.as_slice();
    let mut durations = vec![0usize; vocab.len()];
    for n in &track.notes {
        *pitch_histogram.entry(n.pitch).or_default() += 1;
        durations[seq.config.vocab.nearest_index(n.duration)] += 1;
    }
    Ok(SongStats {
        id: id.to_string(),
        notes: track.len(),
        onsets: profile.onsets,
        max_polyphony: profile.max,
        mean_polyphony: profile.mean,
        pitch_histogram,
        duration_histogram: vocab.iter().copied().zip(durations).collect(),
    })
}

fn stats(cfg: &PipelineConfig) -> Result<()> {
    let (manifest, songs) = load_corpus(&cfg.out_dir)?;
    let mut per_song = Vec::new();
    let mut agg = SongStats { id: "all".into(), ..SongStats::default() };
    let mut weighted = 0.0;
    for (entry, seq) in manifest.songs.iter().zip(&songs) {
        let s = song_stats(&entry.id, seq)?;
        agg.notes += s.notes;
        agg.onsets += s.onsets;
        agg.max_polyphony = agg.max_polyphony.max(s.max_polyphony);
        weighted += s.mean_polyphony * s.onsets as f64;
        for (&p, &c) in &s.pitch_histogram {
            *agg.pitch_histogram.entry(p).or_default() += c;
        }
        if agg.duration_histogram.is_empty() {
            agg.duration_histogram = s.duration_histogram.iter().map(|&(d, _)| (d, 0)).collect();
        }
        for (a, b) in agg.duration_histogram.iter_mut().zip(&s.duration_histogram) {
            a.1 += b.1;
        }
        per_song.push(s);
    }
    agg.mean_polyphony = if agg.onsets > 0 { weighted / agg.onsets as f64 } else { 0.0 };
    println!("{:<24} {:>6} {:>6} {:>8}", "song", "notes", "max P", "mean P");
    for s in per_song.iter().chain(std::iter::once(&agg)) {
        println!("{:<24} {:>6} {:>6} {:>8.3}", s.id, s.notes, s.max_polyphony, s.mean_polyphony);
    }
    println!("durations:");
    for (d, c) in &agg.duration_histogram {
        println!("  {d:<8} {c}");
    }
    let report = CorpusStats { songs: per_song, aggregate: agg };
    write_text(&cfg.out_dir.join("stats.json"), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn train_cmd(cfg: &PipelineConfig, args: &TrainArgs) -> Result<()> {
    let (manifest, songs) = load_corpus(&cfg.out_dir)?;
    let hyper = cfg.model;
    let examples = make_training_set(&songs, hyper.context_len);
    if examples.is_empty() {
        return Err(InputError::new("the corpus yields no training examples").into());
    }
    let repr = &songs[0].config;
    let dims = hyper.dims(repr.n_streams, repr.n_durations(), songs.len());
    let mut params = ModelParams::init(dims, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let tc = TrainConfig {
        epochs: args.epochs.unwrap_or(cfg.training.epochs),
        seed: cfg.seed,
        holdout_fraction: cfg.training.holdout_fraction,
    };
    let model_dir = cfg.out_dir.join("model");
    if model_dir.exists() {
        fs::remove_dir_all(&model_dir)?;
    }
    fs::create_dir_all(&model_dir)?;
    let per_epoch = cfg.training.epoch_checkpoints.then_some(model_dir.as_path());
    let report = train(&mut params, &hyper, &examples, &tc, per_epoch)?;
    let final_path = model_dir.join("final.json");
    Checkpoint::new(&params, &hyper).with_vocab(repr.vocab.clone()).write(&final_path)?;
    let mut trace = Vec::new();
    write_loss_trace(&mut trace, &report.epochs)?;
    fs::write(model_dir.join("loss_trace.csv"), trace)?;
    println!(
        "trained {} parameters on {} examples from {} songs ({} held out)",
        params.len(),
        report.train_examples,
        manifest.songs.len(),
        report.holdout_examples
    );
    println!("initial loss {:.4}", report.initial_loss);
    for e in &report.epochs {
        match e.holdout_loss {
            Some(h) => println!("epoch {:>3}  loss {:.4}  holdout {:.4}", e.epoch, e.mean_loss, h),
            None => println!("epoch {:>3}  loss {:.4}", e.epoch, e.mean_loss),
        }
    }
    println!("checkpoint {}", final_path.display());
    Ok(())
}

struct LoadedModel {
    params: ModelParams,
    hyper: ModelHyperparams,
    repr: RepresentationConfig,
}

fn load_model(cfg: &PipelineConfig, path: Option<&PathBuf>, corpus: &[MultiStreamSequence]) -> Result<LoadedModel> {
    let path = path.cloned().unwrap_or_else(|| cfg.out_dir.join("model").join("final.json"));
    if !path.exists() {
        return Err(InputError::new(format!("checkpoint {} not found; run `train` first", path.display())).into());
    }
    let ck = Checkpoint::read(&path).map_err(|e| InputError::new(format!("{}: {e}", path.display())))?;
    let params = ck.params()?;
    let vocab = ck.vocab.clone().ok_or_else(|| InputError::new(format!("{} has no duration vocabulary", path.display())))?;
    let repr = RepresentationConfig::new(params.dims().n_streams, vocab);
    if corpus[0].config != repr {
        return Err(InputError::new("checkpoint and ingested corpus use different representations").into());
    }
    if params.dims().plan_width != corpus.len() {
        return Err(InputError::new(format!(
            "checkpoint plan has {} bits but the corpus has {} songs",
            params.dims().plan_width,
            corpus.len()
        ))
        .into());
    }
    Ok(LoadedModel { params, hyper: ck.hyperparams, repr })
}

fn parse_plan(spec: Option<&str>, manifest: &Manifest) -> Result<Vec<f64>> {
    let n = manifest.songs.len();
    let mut plan = vec![0.0; n];
    let Some(spec) = spec else {
        plan[0] = 1.0;
        return Ok(plan);
    };
    if spec.len() == n && spec.chars().all(|c| c == '0' || c == '1') {
        for (i, c) in spec.chars().enumerate() {
            plan[i] = if c == '1' { 1.0 } else { 0.0 };
        }
        return Ok(plan);
    }
    for id in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let i = manifest
            .songs
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| InputError::new(format!("--plan: no song {id:?} and not a {n}-digit bit string")))?;
        plan[i] = 1.0;
    }
    Ok(plan)
}

fn compose_cmd(cfg: &PipelineConfig, args: &ComposeArgs) -> Result<()> {
    let (manifest, songs) = load_corpus(&cfg.out_dir)?;
    let model = load_model(cfg, args.checkpoint.as_ref(), &songs)?;
    let sampler = SamplerConfig {
        plan: parse_plan(args.plan.as_deref(), &manifest)?,
        t_pitch: args.t_pitch.unwrap_or(cfg.sampler.t_pitch),
        t_dur: args.t_dur.unwrap_or(cfg.sampler.t_dur),
        length: args.length.unwrap_or(cfg.sampler.length),
        seed_source: SeedSource::FromPlan,
        rng_seed: cfg.seed,
    };
    let c = compose(&model.params, model.hyper.context_len, &model.repr, &songs, &sampler).map_err(|e| match e {
        polystream::composer::ComposeError::Temperature(_) | polystream::composer::ComposeError::EmptyLength => {
            anyhow::Error::new(InputError::new(e.to_string()))
        }
        other => other.into(),
    })?;
    let dir = cfg.out_dir.join("compositions");
    fs::create_dir_all(&dir)?;
    let paths = export_midi(&c, &dir.join(&args.name))?;
    println!("composed {} note-sets", c.sequence.len());
    println!("{}", paths.midi.display());
    println!("{}", paths.msq.display());
    println!("{}", paths.meta.display());
    Ok(())
}

fn excerpt(seq: &MultiStreamSequence, start: usize, len: Option<usize>) -> Result<MultiStreamSequence> {
    if start >= seq.len() {
        return Err(InputError::new(format!("--start {start} is past the end ({} note-sets)", seq.len())).into());
    }
    let end = len.map_or(seq.len(), |l| (start + l).min(seq.len()));
    let held = |k: usize| seq.note_sets[k].symbols.iter().any(|s| s.pitch == Pitch::Sustain);
    if held(start) {
        let before = (0..start).rev().find(|&k| !held(k));
        let after = (start..seq.len()).find(|&k| !held(k));
        return Err(InputError::new(format!(
            "note-set {start} continues held notes; nearest clean starts are {before:?} and {after:?}"
        ))
        .into());
    }
    let mut out = MultiStreamSequence::new(seq.config.clone());
    out.note_sets = seq.note_sets[start..end].to_vec();
    Ok(out)
}

fn evaluate_cmd(cfg: &PipelineConfig, args: &EvaluateArgs) -> Result<()> {
    let (manifest, songs) = load_corpus(&cfg.out_dir)?;
    let reference = ReferenceCorpus::new(&songs);
    let (name, seq) = match (&args.msq, &args.song) {
        (Some(p), None) => {
            let text = fs::read_to_string(p).map_err(|e| InputError::new(format!("cannot read {}: {e}", p.display())))?;
            let seq = parse_sequence(&text).map_err(|e| InputError::new(format!("{}: {e}", p.display())))?;
            (p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), seq)
        }
        (None, Some(id)) => {
            let i = manifest.songs.iter().position(|s| &s.id == id).ok_or_else(|| InputError::new(format!("no song {id:?}")))?;
            (format!("{id}@{}", args.start), excerpt(&songs[i], args.start, args.len)?)
        }
        _ => return Err(InputError::new("give either --msq FILE or --song ID").into()),
    };
    let b = evaluate(&seq, &reference, &cfg.reward).map_err(|e| InputError::new(format!("{name}: {e}")))?;
    let dir = cfg.out_dir.join("evaluations");
    fs::create_dir_all(&dir)?;
    let text = b.to_string();
    write_text(&dir.join(format!("{name}.reward.txt")), &text)?;
    print!("{text}");
    Ok(())
}

fn search_cmd(cfg: &PipelineConfig, args: &SearchArgs) -> Result<()> {
    let (manifest, songs) = load_corpus(&cfg.out_dir)?;
    let model = load_model(cfg, args.checkpoint.as_ref(), &songs)?;
    let reference = ReferenceCorpus::new(&songs);
    let hyper = SearchHyperparams { iterations: args.iterations.unwrap_or(cfg.search.iterations), ..cfg.search };
    let env = CompositionEnvironment {
        params: &model.params,
        context_len: model.hyper.context_len,
        repr: &model.repr,
        corpus: &songs,
        reference: &reference,
        reward: &cfg.reward,
        length: hyper.composition_length,
    };
    info!("searching for {} iterations", hyper.iterations);
    let report = run_search(&env, &hyper, cfg.seed)?;
    let dir = cfg.out_dir.join("search");
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    let mut csv = Vec::new();
    write_iteration_csv(&mut csv, &report.rl)?;
    let mut random_rows = Vec::new();
    write_iteration_csv(&mut random_rows, &report.random)?;
    // one header for both arms
    let header_end = random_rows.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1);
    csv.extend_from_slice(&random_rows[header_end..]);
    fs::write(dir.join("iterations.csv"), csv)?;
    let mut best = Vec::new();
    write_best_states(&mut best, &report.best, &manifest.ids())?;
    fs::write(dir.join("best_states.txt"), &best)?;

    let good = |logs: &[polystream::plansearch::IterationLog]| logs.iter().filter(|l| l.is_good).count();
    let last = |logs: &[polystream::plansearch::IterationLog]| logs.last().map_or(0, |l| l.window_count);
    println!("rl:     {} good of {}, final window {}", good(&report.rl), report.rl.len(), last(&report.rl));
    println!("random: {} good of {}, final window {}", good(&report.random), report.random.len(), last(&report.random));
    if let Some((state, reward)) = report.best.first() {
        let c = compose(&model.params, model.hyper.context_len, &model.repr, &songs, &env.sampler(state, cfg.seed))?;
        export_midi(&c, &dir.join("best"))?;
        println!("best reward {reward:.4}, plan {}, t_pitch {}, t_dur {}", state.plan_hex(), state.t_pitch(), state.t_dur());
    }
    std::io::stdout().write_all(&best)?;
    Ok(())
}

#[derive(Serialize)]
struct SparsityReport {
    length: f64,
    sample_step: f64,
    shortest: f64,
    n_streams: usize,
    n_pitches: usize,
    piano_roll_log10: f64,
    multistream_log10: f64,
    ratio_log10: f64,
    exact_log10: Option<f64>,
}

fn sparsity(cfg: &PipelineConfig, args: &SparsityArgs) -> Result<()> {
    let grid = cfg.representation.grid;
    let s = args.sample_step.unwrap_or(grid);
    let d0 = args.d0.unwrap_or(grid);
    let ns = args.ns.unwrap_or(cfg.representation.n_streams);
    if !(args.length >= 0.0 && s > 0.0 && d0 > 0.0) {
        return Err(InputError::new("--T must be non-negative, --S and --d0 positive").into());
    }
    let pr = log_count_piano_roll(args.length, s, args.np);
    let ms = log_count_multistream_approx(args.length, d0, ns, args.np);
    let exact = match &args.vocab {
        Some(v) => {
            let vocab = DurationVocab::new(v.clone()).map_err(|e| InputError::new(format!("--vocab: {e}")))?;
            let n = count_multistream_exact(args.length, &vocab, ns, args.np).map_err(|e| InputError::new(format!("--vocab: {e}")))?;
            Some(log10_big(&n))
        }
        None => None,
    };
    println!("piano_roll_log10 = {pr:.2}");
    println!("multistream_log10 = {ms:.2}");
    if let Some(e) = exact {
        println!("exact_multistream_log10 = {e:.2}");
    }
    println!("R = {:.2}", pr - ms);
    let report = SparsityReport {
        length: args.length,
        sample_step: s,
        shortest: d0,
        n_streams: ns,
        n_pitches: args.np,
        piano_roll_log10: pr,
        multistream_log10: ms,
        ratio_log10: pr - ms,
        exact_log10: exact,
    };
    write_text(&cfg.out_dir.join("sparsity.json"), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn calibrate_cmd(cfg: &PipelineConfig, args: &CalibrateArgs) -> Result<()> {
    let list = fs::read_to_string(&args.manifest)
        .map_err(|e| InputError::new(format!("cannot read {}: {e}", args.manifest.display())))?;
    let base = args.manifest.parent().unwrap_or(Path::new(""));
    let mut pleasant = Vec::new();
    for line in list.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let p = base.join(line);
        let text = fs::read_to_string(&p).map_err(|e| InputError::new(format!("cannot read {}: {e}", p.display())))?;
        pleasant.push(parse_sequence(&text).map_err(|e| InputError::new(format!("{}: {e}", p.display())))?);
    }
    if pleasant.is_empty() {
        return Err(InputError::new(format!("{} lists no compositions", args.manifest.display())).into());
    }
    let reference = match load_corpus(&cfg.out_dir) {
        Ok((_, songs)) => ReferenceCorpus::new(&songs),
        Err(e) => {
            warn!("no reference corpus ({e}); cross-correlation scores will all be 1");
            ReferenceCorpus::default()
        }
    };
    let mean_total = |rc: &RewardConfig| -> Result<f64> {
        let mut sum = 0.0;
        for seq in &pleasant {
            sum += evaluate(seq, &reference, rc).map_err(|e| InputError::new(e.to_string()))?.total;
        }
        Ok(sum / pleasant.len() as f64)
    };
    let before = mean_total(&cfg.reward)?;
    let fitted = calibrate(&pleasant, &reference, &cfg.reward).map_err(|e| InputError::new(e.to_string()))?;
    let after = mean_total(&fitted)?;
    if after + 1e-12 < before {
        bail!("calibration lowered the mean reward from {before} to {after}");
    }

    #[derive(Serialize)]
    struct Section<'a> {
        reward: &'a RewardConfig,
    }
    let toml_text = toml::to_string(&Section { reward: &fitted })?;
    let dir = cfg.out_dir.join("calibration");
    fs::create_dir_all(&dir)?;
    write_text(&dir.join("reward.toml"), &toml_text)?;
    println!("mean reward over {} compositions: {before:.4} -> {after:.4}", pleasant.len());
    print!("{toml_text}");
    Ok(())
}
