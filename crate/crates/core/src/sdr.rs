//! Speech as sparse distributed representations.
//!
//! Each letter of the alphabet owns a fixed random set of `cardinality_k`
//! indices in a `dimension`-wide binary space. An utterance becomes a stream
//! of frames: every letter is held for `frames_per_symbol` frames and every
//! space becomes `gap_frames` silent frames.

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SessionRng;

pub const DEFAULT_DIMENSION: usize = 512;
pub const DEFAULT_CARDINALITY: usize = 10;
pub const DEFAULT_FRAMES_PER_SYMBOL: usize = 3;
pub const DEFAULT_GAP_FRAMES: usize = 2;
/// Minimum best overlap for a frame to count as speech.
pub const DEFAULT_MIN_OVERLAP: usize = 4;

pub const ALPHABET: [char; 26] = [
    'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P', 'Q', 'R', 'S',
    'T', 'U', 'V', 'W', 'X', 'Y', 'Z',
];

/// A sparse binary frame: the sorted, distinct indices of its active bits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SdrFrame {
    active: Vec<u32>,
}

impl SdrFrame {
    pub fn silence() -> Self {
        Self::default()
    }

    /// Builds a frame from arbitrary indices; duplicates are merged.
    pub fn from_indices<I: IntoIterator<Item = u32>>(indices: I) -> Self {
        let mut active: Vec<u32> = indices.into_iter().collect();
        active.sort_unstable();
        active.dedup();
        Self { active }
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_silence(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, index: u32) -> bool {
        self.active.binary_search(&index).is_ok()
    }

    /// Every index is below `dimension` and the list is strictly increasing.
    pub fn is_valid_for(&self, dimension: usize) -> bool {
        self.active.windows(2).all(|w| w[0] < w[1])
            && self
                .active
                .last()
                .map_or(true, |&i| (i as usize) < dimension)
    }
}

/// Size of the index intersection of two frames.
pub fn overlap(a: &SdrFrame, b: &SdrFrame) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    let (x, y) = (&a.active, &b.active);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Toggles `flips` distinct positions chosen uniformly from `[0, dimension)`.
pub fn apply_noise(
    frame: &SdrFrame,
    flips: usize,
    dimension: usize,
    rng: &mut SessionRng,
) -> SdrFrame {
    assert!(
        flips <= dimension,
        "flips {flips} exceed dimension {dimension}"
    );
    if flips == 0 {
        return frame.clone();
    }
    let mut positions: Vec<u32> = rng
        .sample_distinct(dimension, flips)
        .into_iter()
        .map(|p| p as u32)
        .collect();
    positions.sort_unstable();
    // symmetric difference of two sorted sets
    let mut out = Vec::with_capacity(frame.active.len() + flips);
    let (mut i, mut j) = (0, 0);
    let a = &frame.active;
    while i < a.len() || j < positions.len() {
        if j == positions.len() || (i < a.len() && a[i] < positions[j]) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || positions[j] < a[i] {
            out.push(positions[j]);
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    SdrFrame { active: out }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdrCodebook {
    dimension: usize,
    cardinality_k: usize,
    seed: u64,
    alphabet: Vec<char>,
    table: Vec<SdrFrame>,
}

impl SdrCodebook {
    /// Builds a codebook from a fresh session stream seeded with `seed`.
    pub fn build(seed: u64, dimension: usize, cardinality_k: usize) -> Result<Self> {
        let mut rng = SessionRng::seed_from_u64(seed);
        Self::build_from(&mut rng, seed, dimension, cardinality_k)
    }

    /// Builds a codebook by drawing from `rng`, symbols in alphabet order.
    /// The session calls this first so the codebook heads the draw order.
    pub fn build_from(
        rng: &mut SessionRng,
        seed: u64,
        dimension: usize,
        cardinality_k: usize,
    ) -> Result<Self> {
        if cardinality_k == 0 || dimension == 0 {
            return Err(Error::InvalidParameter(format!(
                "dimension ({dimension}) and cardinality ({cardinality_k}) must be positive"
            )));
        }
        if cardinality_k > dimension {
            return Err(Error::InvalidParameter(format!(
                "cardinality {cardinality_k} exceeds dimension {dimension}"
            )));
        }
        if dimension > u32::MAX as usize {
            return Err(Error::InvalidParameter("dimension too large".into()));
        }
        let table: Vec<SdrFrame> = ALPHABET
            .iter()
            .map(|_| {
                SdrFrame::from_indices(
                    rng.sample_distinct(dimension, cardinality_k)
                        .into_iter()
                        .map(|i| i as u32),
                )
            })
            .collect();
        for (i, a) in table.iter().enumerate() {
            if let Some(j) = table[i + 1..].iter().position(|b| b == a) {
                return Err(Error::CodebookCollision {
                    first: ALPHABET[i],
                    second: ALPHABET[i + 1 + j],
                });
            }
        }
        Ok(Self {
            dimension,
            cardinality_k,
            seed,
            alphabet: ALPHABET.to_vec(),
            table,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality_k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn symbol(&self, ch: char) -> Option<&SdrFrame> {
        self.alphabet
            .iter()
            .position(|&c| c == ch)
            .map(|i| &self.table[i])
    }

    pub fn entries(&self) -> impl Iterator<Item = (char, &SdrFrame)> {
        self.alphabet.iter().copied().zip(self.table.iter())
    }

    pub fn encode_utterance(
        &self,
        text: &str,
        frames_per_symbol: usize,
        gap_frames: usize,
    ) -> Result<SdrStream> {
        let mut frames = Vec::new();
        for (position, ch) in text.chars().enumerate() {
            if ch == ' ' {
                frames.extend(std::iter::repeat(SdrFrame::silence()).take(gap_frames));
                continue;
            }
            let entry = self
                .symbol(ch)
                .ok_or(Error::InvalidSymbol { ch, position })?;
            frames.extend(std::iter::repeat(entry.clone()).take(frames_per_symbol));
        }
        Ok(SdrStream {
            frames,
            frames_per_symbol,
            gap_frames,
        })
    }

    /// Best-overlap symbol for a frame; silence when the frame is empty or the
    /// best overlap is below `min_overlap`.
    pub fn decode_frame(&self, frame: &SdrFrame, min_overlap: usize) -> FrameDecode {
        if frame.is_silence() {
            return FrameDecode::Silence;
        }
        let mut best: Option<(usize, usize)> = None;
        let mut tied = false;
        for (i, entry) in self.table.iter().enumerate() {
            let score = overlap(frame, entry);
            match best {
                Some((_, s)) if score < s => {}
                Some((_, s)) if score == s => tied = true,
                _ => {
                    best = Some((i, score));
                    tied = false;
                }
            }
        }
        match best {
            Some((i, score)) if score >= min_overlap => FrameDecode::Symbol {
                symbol: self.alphabet[i],
                score,
                ambiguous: tied,
            },
            _ => FrameDecode::Silence,
        }
    }

    /// Decodes a frame stream back to text. Silent frames split the stream into
    /// runs; each run is cut into chunks of `frames_per_symbol` frames and each
    /// chunk is decided by strict majority over its per-frame symbols.
    pub fn decode_stream(&self, stream: &SdrStream, min_overlap: usize) -> StreamDecode {
        let fps = stream.frames_per_symbol.max(1);
        let decoded: Vec<FrameDecode> = stream
            .frames
            .iter()
            .map(|f| self.decode_frame(f, min_overlap))
            .collect();

        let mut out = StreamDecode::default();
        let mut start = 0;
        while start < decoded.len() {
            if decoded[start] == FrameDecode::Silence {
                start += 1;
                continue;
            }
            let mut end = start;
            while end < decoded.len() && decoded[end] != FrameDecode::Silence {
                end += 1;
            }
            let mut chunk_start = start;
            while chunk_start < end {
                let chunk_end = (chunk_start + fps).min(end);
                let chunk = &decoded[chunk_start..chunk_end];
                match majority(chunk) {
                    Some((symbol, mean_overlap)) => out.chunks.push(DecodedChunk {
                        symbol,
                        start: chunk_start,
                        mean_overlap,
                    }),
                    None => out.dropped.push(chunk_start),
                }
                chunk_start = chunk_end;
            }
            // word boundary: a silence separated this run from the next
            if end < decoded.len() {
                out.word_breaks.push(out.chunks.len());
            }
            start = end;
        }
        out
    }
}

fn majority(chunk: &[FrameDecode]) -> Option<(char, f64)> {
    let mut votes: Vec<(char, usize, usize)> = Vec::new();
    for d in chunk {
        if let FrameDecode::Symbol { symbol, score, .. } = *d {
            match votes.iter_mut().find(|v| v.0 == symbol) {
                Some(v) => {
                    v.1 += 1;
                    v.2 += score;
                }
                None => votes.push((symbol, 1, score)),
            }
        }
    }
    votes
        .into_iter()
        .find(|&(_, n, _)| 2 * n > chunk.len())
        .map(|(s, n, total)| (s, total as f64 / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameDecode {
    Silence,
    Symbol {
        symbol: char,
        score: usize,
        /// Another symbol reached the same score; `symbol` is the
        /// alphabetically first of the tied ones.
        ambiguous: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedChunk {
    pub symbol: char,
    pub start: usize,
    /// Mean best overlap of the frames that voted for `symbol`.
    pub mean_overlap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamDecode {
    pub chunks: Vec<DecodedChunk>,
    /// Start frame of every chunk without a strict majority.
    pub dropped: Vec<usize>,
    word_breaks: Vec<usize>,
}

impl StreamDecode {
    /// Decoded letters, without word breaks.
    pub fn text(&self) -> String {
        self.chunks.iter().map(|c| c.symbol).collect()
    }

    /// Decoded words, split where silence separated runs.
    pub fn words(&self) -> Vec<String> {
        let mut words = Vec::new();
        let mut from = 0;
        for &b in self
            .word_breaks
            .iter()
            .chain(std::iter::once(&self.chunks.len()))
        {
            if b > from {
                words.push(self.chunks[from..b].iter().map(|c| c.symbol).collect());
            }
            from = b;
        }
        words
    }

    /// Each decoded word with the mean overlap of its chunks.
    pub fn word_overlaps(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        let mut from = 0;
        for &b in self
            .word_breaks
            .iter()
            .chain(std::iter::once(&self.chunks.len()))
        {
            if b > from {
                let chunks = &self.chunks[from..b];
                let word = chunks.iter().map(|c| c.symbol).collect();
                let mean = chunks.iter().map(|c| c.mean_overlap).sum::<f64>() / chunks.len() as f64;
                out.push((word, mean));
            }
            from = b;
        }
        out
    }

    /// Mean of the per-chunk mean overlaps; 0 when nothing decoded.
    pub fn mean_overlap(&self) -> f64 {
        if self.chunks.is_empty() {
            return 0.0;
        }
        self.chunks.iter().map(|c| c.mean_overlap).sum::<f64>() / self.chunks.len() as f64
    }
}

/// Codec settings carried in the session config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CodecParams {
    pub dimension: usize,
    pub cardinality: usize,
    pub frames_per_symbol: usize,
    pub gap_frames: usize,
    pub min_overlap: usize,
}

impl Default for CodecParams {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            cardinality: DEFAULT_CARDINALITY,
            frames_per_symbol: DEFAULT_FRAMES_PER_SYMBOL,
            gap_frames: DEFAULT_GAP_FRAMES,
            min_overlap: DEFAULT_MIN_OVERLAP,
        }
    }
}

impl CodecParams {
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.cardinality == 0 {
            return Err(("cardinality", "must be positive".into()));
        }
        if self.dimension < self.cardinality * ALPHABET.len() / 4 || self.dimension > 1 << 20 {
            return Err(("dimension", "too small for the alphabet or above 2^20".into()));
        }
        if self.frames_per_symbol == 0 {
            return Err(("frames_per_symbol", "must be positive".into()));
        }
        if self.gap_frames == 0 {
            return Err(("gap_frames", "must be positive".into()));
        }
        if self.min_overlap == 0 || self.min_overlap > self.cardinality {
            return Err(("min_overlap", "must lie in 1..=cardinality".into()));
        }
        Ok(())
    }

    pub fn codebook(&self, seed: u64) -> Result<SdrCodebook> {
        SdrCodebook::build(seed, self.dimension, self.cardinality)
    }

    pub fn encode(&self, codebook: &SdrCodebook, text: &str) -> Result<SdrStream> {
        codebook.encode_utterance(text, self.frames_per_symbol, self.gap_frames)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdrStream {
    pub frames: Vec<SdrFrame>,
    pub frames_per_symbol: usize,
    pub gap_frames: usize,
}

impl SdrStream {
    pub fn from_frames(frames: Vec<SdrFrame>, frames_per_symbol: usize) -> Self {
        Self {
            frames,
            frames_per_symbol,
            gap_frames: DEFAULT_GAP_FRAMES,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// JSON array of index arrays.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.frames).expect("frames serialize")
    }

    pub fn from_json(text: &str, frames_per_symbol: usize) -> Result<Self> {
        let frames: Vec<Vec<u32>> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("stream json: {e}")))?;
        Ok(Self::from_frames(
            frames.into_iter().map(SdrFrame::from_indices).collect(),
            frames_per_symbol,
        ))
    }
}

impl fmt::Display for SdrFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.active)
    }
}

/// One row of a noise sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub flips: usize,
    pub trials: usize,
    pub correct: usize,
    /// Mean overlap between each noisy frame and its clean symbol.
    pub mean_overlap: f64,
}

impl SweepRow {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.trials as f64
    }
}

/// Encodes every symbol `trials` times per flip count, toggles `flips`
/// bits in each frame and counts exact stream round trips. One rng seeded
/// with `seed` drives the whole sweep.
pub fn noise_sweep(
    codebook: &SdrCodebook,
    params: &CodecParams,
    flips: impl IntoIterator<Item = usize>,
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rng = SessionRng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for n in flips {
        if n > codebook.dimension() {
            return Err(Error::InvalidParameter(format!("flips {n} exceed dimension")));
        }
        let mut row = SweepRow { flips: n, trials: 0, correct: 0, mean_overlap: 0.0 };
        let mut overlap_sum = 0usize;
        let mut frames = 0usize;
        for &ch in codebook.alphabet() {
            let text = ch.to_string();
            let clean = params.encode(codebook, &text)?;
            for _ in 0..trials {
                let noisy: Vec<SdrFrame> = clean
                    .frames
                    .iter()
                    .map(|f| apply_noise(f, n, codebook.dimension(), &mut rng))
                    .collect();
                for (a, b) in noisy.iter().zip(&clean.frames) {
                    overlap_sum += overlap(a, b);
                    frames += 1;
                }
                let stream = SdrStream { frames: noisy, ..clean.clone() };
                row.trials += 1;
                if codebook.decode_stream(&stream, params.min_overlap).text() == text {
                    row.correct += 1;
                }
            }
        }
        row.mean_overlap = overlap_sum as f64 / frames.max(1) as f64;
        rows.push(row);
    }
    Ok(rows)
}
