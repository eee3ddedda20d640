//! Joint word segmentation and part-of-speech tagging for unsegmented Khmer
//! text with a first-order (tag bigram) lattice Viterbi decoder.
//!
//! A path scores `Σ emission + Σ transition`, including the BOS → first and
//! last → EOS transitions. Scores are accumulated in fixed point so that the
//! decoder and the exhaustive reference search see bit-identical totals and
//! break ties the same way: higher score, then fewer tokens, then
//! leftmost-longest boundaries, then lexicographically smaller tag sequence.

use std::cmp::{Ordering, Reverse};

use crate::error::{Error, Result};
use crate::ingest::Lexicon;
use crate::textmodel::{PosTag, Span, Token};

/// Longest input accepted by [`segment_tag_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 16;

const FIXED_SHIFT: i32 = 48;

/// A log probability in fixed point (2^-48 resolution). Addition is exact
/// and associative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LogScore(i128);

impl LogScore {
    pub fn from_f64(x: f64) -> Self {
        LogScore((x * 2f64.powi(FIXED_SHIFT)).round() as i128)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2f64.powi(FIXED_SHIFT)
    }
}

impl std::ops::Add for LogScore {
    type Output = LogScore;
    fn add(self, rhs: LogScore) -> LogScore {
        LogScore(self.0 + rhs.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Exclusive end position, in characters.
    pub end: usize,
    pub tag: usize,
    pub emission: f64,
    pub oov: bool,
}

/// Outgoing edges per character position.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub edges: Vec<Vec<Edge>>,
}

impl Lattice {
    /// Every lexicon match starting at each position; positions with no
    /// match get a single-character OOV edge tagged `o`.
    pub fn build(chars: &[char], lex: &Lexicon) -> Lattice {
        let n = chars.len();
        let mut edges = Vec::with_capacity(n);
        let mut buf = String::new();
        for start in 0..n {
            let mut out = Vec::new();
            let max_end = n.min(start + lex.max_surface_chars());
            buf.clear();
            for end in start + 1..=max_end {
                buf.push(chars[end - 1]);
                for &(tag, lp) in lex.lookup(&buf) {
                    out.push(Edge {
                        end,
                        tag,
                        emission: lp,
                        oov: false,
                    });
                }
            }
            if out.is_empty() {
                out.push(Edge {
                    end: start + 1,
                    tag: lex.oov_tag(),
                    emission: lex.oov_penalty(),
                    oov: true,
                });
            }
            edges.push(out);
        }
        Lattice { edges }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub tokens: Vec<Token>,
    /// Path log probability.
    pub score: f64,
    /// Number of tokens produced by the OOV fallback.
    pub oov_tokens: usize,
    /// Set when the text contains characters outside the lexicon's script.
    pub out_of_script: bool,
}

#[derive(Clone, Copy)]
struct Cell {
    score: LogScore,
    ntok: u32,
    /// (start position, previous tag or None for BOS)
    back: (usize, Option<usize>),
    edge_oov: bool,
}

/// Decodes and returns only the tokens.
pub fn segment_tag(text: &str, lex: &Lexicon) -> Vec<Token> {
    decode(text, lex).tokens
}

pub fn decode(text: &str, lex: &Lexicon) -> Decoded {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let out_of_script = chars.iter().any(|&c| !lex.in_script(c));
    if n == 0 {
        return Decoded {
            tokens: Vec::new(),
            score: 0.0,
            oov_tokens: 0,
            out_of_script,
        };
    }
    let lattice = Lattice::build(&chars, lex);
    let ntags = lex.tags().len();
    // table[pos * ntags + tag]: best path ending at `pos` with last tag `tag`.
    let mut table: Vec<Option<Cell>> = vec![None; (n + 1) * ntags];

    for start in 0..n {
        let sources: Vec<(Option<usize>, LogScore, u32)> = if start == 0 {
            vec![(None, LogScore::default(), 0)]
        } else {
            (0..ntags)
                .filter_map(|t| table[start * ntags + t].map(|c| (Some(t), c.score, c.ntok)))
                .collect()
        };
        for &(prev, score, ntok) in &sources {
            for edge in &lattice.edges[start] {
                let cand = Cell {
                    score: score
                        + LogScore::from_f64(lex.transition(prev, Some(edge.tag)))
                        + LogScore::from_f64(edge.emission),
                    ntok: ntok + 1,
                    back: (start, prev),
                    edge_oov: edge.oov,
                };
                let slot = edge.end * ntags + edge.tag;
                let replace = match table[slot] {
                    None => true,
                    Some(cur) => {
                        compare_cells(&table, ntags, &cand, edge.end, edge.tag, &cur) == Ordering::Less
                    }
                };
                if replace {
                    table[slot] = Some(cand);
                }
            }
        }
    }

    // Close with the EOS transition and pick the best final state.
    let mut best: Option<(usize, Cell, LogScore)> = None;
    for t in 0..ntags {
        let Some(cell) = table[n * ntags + t] else { continue };
        let total = cell.score + LogScore::from_f64(lex.transition(Some(t), None));
        let better = match &best {
            None => true,
            Some((bt, bcell, btotal)) => match total.cmp(btotal).reverse().then(cell.ntok.cmp(&bcell.ntok)) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => {
                    let a = trace(&table, ntags, n, t);
                    let b = trace(&table, ntags, n, *bt);
                    compare_paths(&a, &b) == Ordering::Less
                }
            },
        };
        if better {
            best = Some((t, cell, total));
        }
    }
    let (last_tag, _, total) = best.expect("lattice always reaches the end");
    let path = trace(&table, ntags, n, last_tag);

    let mut tokens = Vec::with_capacity(path.len());
    let mut oov_tokens = 0;
    for step in &path {
        let surface: String = chars[step.start..step.end].iter().collect();
        let tag = PosTag::khmer(&lex.tags()[step.tag], lex.tagset()).expect("lexicon tags are in its tagset");
        if step.oov {
            oov_tokens += 1;
        }
        tokens.push(Token::new(surface, tag, Span::new(step.start, step.end)));
    }
    Decoded {
        tokens,
        score: total.to_f64(),
        oov_tokens,
        out_of_script,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Step {
    start: usize,
    end: usize,
    tag: usize,
    oov: bool,
}

fn trace(table: &[Option<Cell>], ntags: usize, mut pos: usize, mut tag: usize) -> Vec<Step> {
    let mut steps = Vec::new();
    loop {
        let cell = table[pos * ntags + tag].expect("back pointer to a filled cell");
        steps.push(Step {
            start: cell.back.0,
            end: pos,
            tag,
            oov: cell.edge_oov,
        });
        match cell.back.1 {
            None => break,
            Some(prev) => {
                pos = cell.back.0;
                tag = prev;
            }
        }
    }
    steps.reverse();
    steps
}

/// Orders two candidates for the same state; `Less` means `a` wins.
fn compare_cells(
    table: &[Option<Cell>],
    ntags: usize,
    cand: &Cell,
    end: usize,
    tag: usize,
    cur: &Cell,
) -> Ordering {
    match cand.score.cmp(&cur.score).reverse().then(cand.ntok.cmp(&cur.ntok)) {
        Ordering::Equal => {}
        other => return other,
    }
    let mut a = match cand.back.1 {
        None => Vec::new(),
        Some(prev) => trace(table, ntags, cand.back.0, prev),
    };
    a.push(Step {
        start: cand.back.0,
        end,
        tag,
        oov: cand.edge_oov,
    });
    let b = trace(table, ntags, end, tag);
    compare_paths(&a, &b)
}

/// Tie-break between equal-score, equal-length paths.
fn compare_paths(a: &[Step], b: &[Step]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.end.cmp(&x.end) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    for (x, y) in a.iter().zip(b) {
        match x.tag.cmp(&y.tag) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Scores an explicit tagged segmentation; `None` if a token is neither a
/// lexicon entry with that tag nor a valid OOV fallback.
pub fn path_score(text: &str, tokens: &[(String, String)], lex: &Lexicon) -> Option<f64> {
    let chars: Vec<char> = text.chars().collect();
    let lattice = Lattice::build(&chars, lex);
    let mut pos = 0;
    let mut prev = None;
    let mut score = LogScore::default();
    for (surface, label) in tokens {
        let tag = lex.tag_index(label)?;
        let end = pos + surface.chars().count();
        if end > chars.len() || chars[pos..end].iter().collect::<String>() != *surface {
            return None;
        }
        let edge = lattice.edges[pos].iter().find(|e| e.end == end && e.tag == tag)?;
        score = score + LogScore::from_f64(lex.transition(prev, Some(tag))) + LogScore::from_f64(edge.emission);
        prev = Some(tag);
        pos = end;
    }
    if pos != chars.len() {
        return None;
    }
    if !tokens.is_empty() {
        score = score + LogScore::from_f64(lex.transition(prev, None));
    }
    Some(score.to_f64())
}

/// Exhaustive reference decoder: enumerates every segmentation and tagging
/// and returns the best under the same scoring and tie rule.
pub fn segment_tag_bruteforce(text: &str, lex: &Lexicon) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() > BRUTEFORCE_LIMIT {
        return Err(Error::TooLong {
            len: chars.len(),
            limit: BRUTEFORCE_LIMIT,
        });
    }
    if chars.is_empty() {
        return Ok(Vec::new());
    }
    type Key = (Reverse<LogScore>, usize, Reverse<Vec<usize>>, Vec<usize>);
    let mut best: Option<(Key, Vec<(usize, usize, usize)>)> = None;
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();

    fn options(chars: &[char], start: usize, lex: &Lexicon) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for end in start + 1..=chars.len() {
            let s: String = chars[start..end].iter().collect();
            for &(tag, lp) in lex.lookup(&s) {
                out.push((end, tag, lp));
            }
        }
        if out.is_empty() {
            out.push((start + 1, lex.oov_tag(), lex.oov_penalty()));
        }
        out
    }

    fn walk(
        chars: &[char],
        lex: &Lexicon,
        pos: usize,
        score: LogScore,
        stack: &mut Vec<(usize, usize, usize)>,
        best: &mut Option<(Key, Vec<(usize, usize, usize)>)>,
    ) {
        if pos == chars.len() {
            let last = stack.last().map(|s| s.2);
            let total = score + LogScore::from_f64(lex.transition(last, None));
            let key: Key = (
                Reverse(total),
                stack.len(),
                Reverse(stack.iter().map(|s| s.1).collect()),
                stack.iter().map(|s| s.2).collect(),
            );
            if best.as_ref().map_or(true, |(k, _)| key < *k) {
                *best = Some((key, stack.clone()));
            }
            return;
        }
        let prev = stack.last().map(|s| s.2);
        for (end, tag, lp) in options(chars, pos, lex) {
            let next = score + LogScore::from_f64(lex.transition(prev, Some(tag))) + LogScore::from_f64(lp);
            stack.push((pos, end, tag));
            walk(chars, lex, end, next, stack, best);
            stack.pop();
        }
    }

    walk(&chars, lex, 0, LogScore::default(), &mut stack, &mut best);
    let (_, path) = best.expect("at least one path exists");
    Ok(path
        .into_iter()
        .map(|(s, e, t)| {
            let tag = PosTag::khmer(&lex.tags()[t], lex.tagset()).expect("lexicon tags are in its tagset");
            Token::new(chars[s..e].iter().collect::<String>(), tag, Span::new(s, e))
        })
        .collect())
}
