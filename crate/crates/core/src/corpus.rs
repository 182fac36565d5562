//! Document loading, tokenization and segmentation.
//!
//! A [`SegmentedDocument`] is the sequence that alignment runs over. Segment
//! offsets (`char_span`) count Unicode scalar values, not bytes, so they can
//! be compared directly with character-offset gold annotations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const ABBREVIATIONS: &[&str] = &["mr", "mrs", "dr", "st", "etc", "vs", "e.g", "i.e"];
const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '(', '['];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyDocument(id));
        }
        Ok(RawDocument {
            id,
            text,
            metadata: BTreeMap::new(),
        })
    }
}

/// Reads a UTF-8 text file. A leading byte-order mark is dropped and CRLF
/// line endings become LF.
pub fn load_document(path: impl AsRef<Path>, id: &str) -> Result<RawDocument> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let text = text.replace("\r\n", "\n");

    let mut doc = RawDocument::new(id, text)?;
    doc.metadata
        .insert("source".into(), path.display().to_string());
    if let Some(stem) = path.file_stem() {
        doc.metadata
            .insert("title".into(), stem.to_string_lossy().into_owned());
    }
    Ok(doc)
}

/// Lowercased maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    // Lowercase first: a few capitals lowercase to a letter plus a
    // combining mark, which must split the same way on re-tokenization.
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "unit", rename_all = "snake_case")]
pub enum SegmentUnit {
    Sentence,
    Paragraph,
    FixedChunk { words_per_chunk: usize },
    EqualChunks { count: usize },
}

impl SegmentUnit {
    /// Default `min_words` for this unit: paragraphs shorter than five words
    /// are usually headings or ornaments.
    pub fn default_min_words(self) -> usize {
        match self {
            SegmentUnit::Paragraph => 5,
            _ => 0,
        }
    }
}

impl fmt::Display for SegmentUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentUnit::Sentence => f.write_str("sentence"),
            SegmentUnit::Paragraph => f.write_str("paragraph"),
            SegmentUnit::FixedChunk { words_per_chunk } => write!(f, "chunk:{words_per_chunk}"),
            SegmentUnit::EqualChunks { count } => write!(f, "equal:{count}"),
        }
    }
}

impl FromStr for SegmentUnit {
    type Err = Error;

    /// Accepts `sentence`, `paragraph`, `chunk:N` and `equal:M`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown segmentation unit `{s}`"));
        match s {
            "sentence" => return Ok(SegmentUnit::Sentence),
            "paragraph" => return Ok(SegmentUnit::Paragraph),
            _ => {}
        }
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        match kind {
            "chunk" => Ok(SegmentUnit::FixedChunk { words_per_chunk: n }),
            "equal" => Ok(SegmentUnit::EqualChunks { count: n }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationPolicy {
    #[serde(flatten)]
    pub unit: SegmentUnit,
    pub min_words: usize,
}

impl SegmentationPolicy {
    pub fn new(unit: SegmentUnit) -> Self {
        SegmentationPolicy {
            unit,
            min_words: unit.default_min_words(),
        }
    }

    pub fn sentence() -> Self {
        Self::new(SegmentUnit::Sentence)
    }

    pub fn paragraph() -> Self {
        Self::new(SegmentUnit::Paragraph)
    }

    pub fn fixed_chunk(words_per_chunk: usize) -> Self {
        Self::new(SegmentUnit::FixedChunk { words_per_chunk })
    }

    pub fn equal_chunks(count: usize) -> Self {
        Self::new(SegmentUnit::EqualChunks { count })
    }

    pub fn with_min_words(mut self, min_words: usize) -> Self {
        self.min_words = min_words;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.unit {
            SegmentUnit::FixedChunk { words_per_chunk: 0 } => Err(Error::InvalidArgument(
                "words_per_chunk must be at least 1".into(),
            )),
            SegmentUnit::EqualChunks { count: 0 } => Err(Error::InvalidArgument(
                "equal_chunks count must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SegmentRepr")]
pub struct Segment {
    pub index: usize,
    pub text: String,
    #[serde(skip)]
    pub tokens: Vec<String>,
    pub char_span: (usize, usize),
}

#[derive(Deserialize)]
struct SegmentRepr {
    index: usize,
    text: String,
    char_span: (usize, usize),
}

impl From<SegmentRepr> for Segment {
    fn from(r: SegmentRepr) -> Self {
        Segment::new(r.index, r.text, r.char_span)
    }
}

impl Segment {
    pub fn new(index: usize, text: impl Into<String>, char_span: (usize, usize)) -> Self {
        let text = text.into();
        Segment {
            index,
            tokens: tokenize(&text),
            text,
            char_span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedDocument {
    pub doc_id: String,
    pub policy: SegmentationPolicy,
    pub segments: Vec<Segment>,
}

impl SegmentedDocument {
    /// Builds a document whose segments are exactly `texts`, laid out as
    /// paragraphs separated by a blank line.
    pub fn from_texts<S: AsRef<str>>(doc_id: impl Into<String>, texts: &[S]) -> Self {
        let mut offset = 0;
        let segments = texts
            .iter()
            .enumerate()
            .map(|(index, t)| {
                let t = t.as_ref();
                let len = t.chars().count();
                let seg = Segment::new(index, t, (offset, offset + len));
                offset += len + 2;
                seg
            })
            .collect();
        SegmentedDocument {
            doc_id: doc_id.into(),
            policy: SegmentationPolicy::paragraph().with_min_words(0),
            segments,
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Splits `doc` into segments according to `policy`.
pub fn segment(doc: &RawDocument, policy: &SegmentationPolicy) -> Result<SegmentedDocument> {
    policy.validate()?;
    let text = doc.text.as_str();
    if text.trim().is_empty() {
        return Err(Error::EmptyDocument(doc.id.clone()));
    }

    let mut spans = match policy.unit {
        SegmentUnit::Paragraph => paragraph_spans(text),
        SegmentUnit::Sentence => sentence_spans(text),
        SegmentUnit::FixedChunk { words_per_chunk } => {
            let words = word_spans(text);
            words
                .chunks(words_per_chunk)
                .map(|c| (c[0].0, c[c.len() - 1].1))
                .collect()
        }
        SegmentUnit::EqualChunks { count } => {
            let words = word_spans(text);
            if count > words.len() {
                return Err(Error::InsufficientText {
                    doc_id: doc.id.clone(),
                    words: words.len(),
                    chunks: count,
                });
            }
            equal_partition(&words, count)
        }
    };

    // Merging would change the chunk count, which equal_chunks fixes.
    if policy.min_words > 0 && !matches!(policy.unit, SegmentUnit::EqualChunks { .. }) {
        spans = merge_short(text, spans, policy.min_words);
    }

    let mut to_char = CharOffsets::new(text);
    let segments = spans
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| {
            let span = (to_char.at(start), to_char.at(end));
            Segment::new(index, &text[start..end], span)
        })
        .collect();

    Ok(SegmentedDocument {
        doc_id: doc.id.clone(),
        policy: *policy,
        segments,
    })
}

type ByteSpan = (usize, usize);

fn trimmed(text: &str, start: usize, end: usize) -> Option<ByteSpan> {
    let piece = &text[start..end];
    let lead = piece.len() - piece.trim_start().len();
    let trail = piece.len() - piece.trim_end().len();
    (lead + trail < piece.len()).then(|| (start + lead, end - trail))
}

fn paragraph_spans(text: &str) -> Vec<ByteSpan> {
    let mut spans = Vec::new();
    let mut para_start: Option<usize> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let blank = line.trim().is_empty();
        match (blank, para_start) {
            (true, Some(start)) => {
                spans.extend(trimmed(text, start, offset));
                para_start = None;
            }
            (false, None) => para_start = Some(offset),
            _ => {}
        }
        offset += line.len();
    }
    if let Some(start) = para_start {
        spans.extend(trimmed(text, start, text.len()));
    }
    spans
}

fn is_abbreviation(text: &str, dot: usize) -> bool {
    let before = &text[..dot];
    let word_start = before
        .rfind(char::is_whitespace)
        .map(|i| i + before[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    let word = before[word_start..]
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Where a terminal punctuation run ending at `end` closes a sentence.
fn closes_sentence(text: &str, end: usize) -> bool {
    let rest = &text[end..];
    let after_ws = rest.trim_start();
    if after_ws.is_empty() {
        return true;
    }
    if after_ws.len() == rest.len() {
        return false;
    }
    after_ws
        .trim_start_matches(OPENERS)
        .chars()
        .next()
        .is_some_and(char::is_uppercase)
}

fn sentence_spans(text: &str) -> Vec<ByteSpan> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, d)) = chars.peek() {
            if matches!(d, '.' | '!' | '?') || CLOSERS.contains(&d) {
                end = j + d.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        if c == '.' && is_abbreviation(text, i) {
            continue;
        }
        if closes_sentence(text, end) {
            spans.extend(trimmed(text, start, end));
            start = end;
        }
    }
    spans.extend(trimmed(text, start, text.len()));
    spans
}

fn word_spans(text: &str) -> Vec<ByteSpan> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// `count` chunks whose word counts differ by at most one, larger ones first.
fn equal_partition(words: &[ByteSpan], count: usize) -> Vec<ByteSpan> {
    let base = words.len() / count;
    let extra = words.len() % count;
    let mut spans = Vec::with_capacity(count);
    let mut next = 0;
    for k in 0..count {
        let size = base + usize::from(k < extra);
        spans.push((words[next].0, words[next + size - 1].1));
        next += size;
    }
    spans
}

fn merge_short(text: &str, spans: Vec<ByteSpan>, min_words: usize) -> Vec<ByteSpan> {
    let words = |s: ByteSpan| tokenize(&text[s.0..s.1]).len();
    let mut out: Vec<ByteSpan> = Vec::with_capacity(spans.len());
    let mut pending: Option<usize> = None;
    for (start, end) in spans {
        let span = (pending.take().unwrap_or(start), end);
        if words(span) < min_words {
            pending = Some(span.0);
        } else {
            out.push(span);
        }
    }
    if let Some(start) = pending {
        let end = text.trim_end().len();
        match out.last_mut() {
            Some(last) => last.1 = end,
            None => out.push((start, end)),
        }
    }
    out
}

/// Incremental byte → char offset conversion for increasing byte offsets.
struct CharOffsets<'a> {
    text: &'a str,
    byte: usize,
    chars: usize,
}

impl<'a> CharOffsets<'a> {
    fn new(text: &'a str) -> Self {
        CharOffsets {
            text,
            byte: 0,
            chars: 0,
        }
    }

    fn at(&mut self, byte: usize) -> usize {
        if byte < self.byte {
            self.byte = 0;
            self.chars = 0;
        }
        self.chars += self.text[self.byte..byte].chars().count();
        self.byte = byte;
        self.chars
    }
}
