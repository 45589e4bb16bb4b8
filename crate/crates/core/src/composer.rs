//! Note-set-by-note-set composition from a trained model.
//!
//! Each step runs the model on the last `l_c` frames, reshapes the output
//! distributions with a Boltzmann temperature and samples one pitch and one
//! duration per free stream. Streams still holding a note take SUSTAIN
//! without sampling, so every composition is a valid sequence.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::midi_io::write_midi;
use crate::multistream::{
    decode, write_sequence, CodecError, MultiStreamSequence, NoteSet, Pitch, RepresentationConfig, StreamSymbol, Timeline,
    SUSTAIN_CLASS,
};
use crate::seqmodel::{checkpoint_id, hot_u32, padding_frame, ModelParams};

/// Temperatures at or below this sample greedily.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("distribution has no positive mass")]
    ZeroDistribution,
    #[error("composition length must be at least 1")]
    EmptyLength,
    #[error("plan has {found} bits, model expects {expected}")]
    PlanWidth { expected: usize, found: usize },
    #[error("representation does not match the model: {0}")]
    Representation(String),
    #[error("seed song {0} is not in the corpus")]
    SeedSong(usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// `p_i^(1/T)` renormalized, evaluated in log space. Zero entries stay zero.
/// At or below [`GREEDY_TEMPERATURE`] the result is one-hot at the first
/// maximum.
pub fn boltzmann(dist: &[f64], t: f64) -> Result<Vec<f64>, ComposeError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(ComposeError::Temperature(t));
    }
    if t <= GREEDY_TEMPERATURE {
        if dist.iter().all(|&p| p <= 0.0) {
            return Err(ComposeError::ZeroDistribution);
        }
        let mut out = vec![0.0; dist.len()];
        out[argmax(dist)] = 1.0;
        return Ok(out);
    }
    let logits: Vec<Option<f64>> = dist.iter().map(|&p| (p > 0.0).then(|| p.ln() / t)).collect();
    let max = logits.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(ComposeError::ZeroDistribution);
    }
    let mut out: Vec<f64> = logits.iter().map(|l| l.map_or(0.0, |l| (l - max).exp())).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Lowest index of the maximum.
fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

fn draw<R: Rng>(dist: &[f64], t: f64, rng: &mut R) -> Result<usize, ComposeError> {
    if dist.iter().all(|&p| p <= 0.0) {
        return Err(ComposeError::ZeroDistribution);
    }
    if t <= GREEDY_TEMPERATURE {
        if !(t > 0.0) {
            return Err(ComposeError::Temperature(t));
        }
        return Ok(argmax(dist));
    }
    let p = boltzmann(dist, t)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &q) in p.iter().enumerate() {
        if q > 0.0 {
            acc += q;
            last = i;
            if u < acc {
                return Ok(i);
            }
        }
    }
    Ok(last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SeedSource {
    /// `l_c` note-sets of a corpus song starting at `offset`.
    Song { index: usize, offset: usize },
    AllRest,
    /// The start of the song with the largest plan weight (the lowest index
    /// among equals), or all REST for an empty plan.
    FromPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub plan: Vec<f64>,
    pub t_pitch: f64,
    pub t_dur: f64,
    /// Note-sets to compose after the seed.
    pub length: usize,
    pub seed_source: SeedSource,
    pub rng_seed: u64,
}

impl SamplerConfig {
    pub fn new(plan: Vec<f64>, length: usize, rng_seed: u64) -> Self {
        SamplerConfig { plan, t_pitch: 1.0, t_dur: 1.0, length, seed_source: SeedSource::FromPlan, rng_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sampler: SamplerConfig,
    pub checkpoint_id: String,
    pub context_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    /// The composed note-sets only; the seed is not included.
    pub sequence: MultiStreamSequence,
    pub provenance: Provenance,
}

/// Samples the next note-set at the timeline's current onset.
pub fn sample_noteset<R: Rng>(
    params: &ModelParams,
    context: &[Vec<u32>],
    cfg: &SamplerConfig,
    timeline: &Timeline,
    vocab: &crate::multistream::DurationVocab,
    rng: &mut R,
) -> Result<NoteSet, ComposeError> {
    let n = timeline.n_streams();
    let held = timeline.held();
    let mut symbols = Vec::with_capacity(n);
    let inputs: Vec<_> = context.iter().map(|hot| params.sparse_step(hot, &cfg.plan)).collect();
    let pred = params.forward_sparse(&inputs);
    for s in 0..n {
        if held[s] {
            symbols.push(StreamSymbol::new(Pitch::Sustain, timeline.sustain_duration_index(s, vocab)));
            continue;
        }
        let mut pitch = pred.pitch[s].clone();
        pitch[SUSTAIN_CLASS] = 0.0;
        let class = draw(&pitch, cfg.t_pitch, rng)?;
        let duration = draw(&pred.duration[s], cfg.t_dur, rng)?;
        let p = Pitch::from_class_index(class).expect("class index within range");
        symbols.push(StreamSymbol::new(p, duration));
    }
    Ok(NoteSet { onset: timeline.onset(), symbols })
}

fn seed_context(
    cfg: &SamplerConfig,
    corpus: &[MultiStreamSequence],
    repr: &RepresentationConfig,
    context_len: usize,
) -> Result<Vec<Vec<u32>>, ComposeError> {
    let pad = padding_frame(repr.n_streams, repr.n_durations());
    let song = match cfg.seed_source {
        SeedSource::AllRest => None,
        SeedSource::Song { index, offset } => Some((index, offset)),
        SeedSource::FromPlan => cfg
            .plan
            .iter()
            .enumerate()
            .filter(|&(i, &w)| w > 0.0 && i < corpus.len())
            .fold(None, |best: Option<(usize, f64)>, (i, &w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((i, w)),
            })
            .map(|(i, _)| (i, 0)),
    };
    let mut frames: Vec<Vec<u32>> = match song {
        None => Vec::new(),
        Some((index, offset)) => {
            let seq = corpus.get(index).ok_or(ComposeError::SeedSong(index))?;
            if seq.config.n_streams != repr.n_streams || seq.config.vocab != repr.vocab {
                return Err(ComposeError::Representation(format!("seed song {index} uses another representation")));
            }
            seq.note_sets.iter().skip(offset).take(context_len).map(|s| hot_u32(s, repr.n_durations())).collect()
        }
    };
    while frames.len() < context_len {
        frames.insert(0, pad.clone());
    }
    Ok(frames)
}

/// Composes `cfg.length` note-sets. The result is a pure function of the
/// arguments.
pub fn compose(
    params: &ModelParams,
    context_len: usize,
    repr: &RepresentationConfig,
    corpus: &[MultiStreamSequence],
    cfg: &SamplerConfig,
) -> Result<Composition, ComposeError> {
    let dims = params.dims();
    if cfg.length == 0 {
        return Err(ComposeError::EmptyLength);
    }
    for t in [cfg.t_pitch, cfg.t_dur] {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ComposeError::Temperature(t));
        }
    }
    if cfg.plan.len() != dims.plan_width {
        return Err(ComposeError::PlanWidth { expected: dims.plan_width, found: cfg.plan.len() });
    }
    if repr.n_streams != dims.n_streams || repr.n_durations() != dims.n_durations {
        return Err(ComposeError::Representation(format!(
            "{} streams and {} durations, model has {} and {}",
            repr.n_streams,
            repr.n_durations(),
            dims.n_streams,
            dims.n_durations
        )));
    }
    let mut context = seed_context(cfg, corpus, repr, context_len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut timeline = Timeline::new(repr.n_streams, 0.0);
    let mut seq = MultiStreamSequence::new(repr.clone());
    for k in 0..cfg.length {
        let set = sample_noteset(params, &context, cfg, &timeline, &repr.vocab, &mut rng)?;
        timeline.advance(k, &set, &repr.vocab)?;
        if context_len > 0 {
            context.remove(0);
            context.push(hot_u32(&set, repr.n_durations()));
        }
        seq.note_sets.push(set);
    }
    Ok(Composition {
        sequence: seq,
        provenance: Provenance { sampler: cfg.clone(), checkpoint_id: checkpoint_id(params), context_len },
    })
}

/// Paths written by [`export_midi`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportPaths {
    pub midi: PathBuf,
    pub msq: PathBuf,
    pub meta: PathBuf,
}

/// Writes `<stem>.mid`, `<stem>.msq` and `<stem>.meta.json`.
pub fn export_midi(composition: &Composition, stem: &Path) -> Result<ExportPaths, ComposeError> {
    let with_ext = |ext: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let paths = ExportPaths { midi: with_ext(".mid"), msq: with_ext(".msq"), meta: with_ext(".meta.json") };
    let track = decode(&composition.sequence)?;
    std::fs::write(&paths.midi, write_midi(&track))?;
    std::fs::write(&paths.msq, write_sequence(&composition.sequence))?;
    let meta = serde_json::to_string_pretty(&composition.provenance).expect("provenance serializes");
    std::fs::write(&paths.meta, meta + "\n")?;
    Ok(paths)
}
