//! Segmentation lexicon: per-surface tag emissions and tag-bigram transitions,
//! all as natural-log probabilities.
//!
//! File format (UTF-8, tab separated, `#` starts a comment line):
//!
//! ```text
//! @tagset            n v a 1 o det part     (whitespace or tab separated)
//! @oov_penalty       -12.0
//! @transition_floor  -10.0
//! @script            1780-17FF 19E0-19FF
//! @trans   BOS   n   -0.7
//! @trans   n     EOS -1.2
//! ក្រសួង   n   -3.2
//! ```
//!
//! Directives may appear in any order but the tagset, when given, governs
//! every entry and transition row in the file.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::textmodel::{KhmerTagset, KHMER_OTHER};

pub const DEFAULT_OOV_PENALTY: f64 = -12.0;
pub const DEFAULT_TRANSITION_FLOOR: f64 = -10.0;

/// Boundary pseudo-tags for transitions.
pub const BOS: &str = "BOS";
pub const EOS: &str = "EOS";

/// Khmer and Khmer Symbols blocks.
pub const KHMER_SCRIPT: [RangeInclusive<u32>; 2] = [0x1780..=0x17FF, 0x19E0..=0x19FF];

#[derive(Debug, Clone)]
pub struct Lexicon {
    /// Sorted lexicographically; tag indices follow this order.
    tags: Vec<String>,
    tagset: KhmerTagset,
    /// Per surface, (tag index, log prob) sorted by tag index.
    entries: HashMap<String, Vec<(usize, f64)>>,
    /// Row = previous tag index or BOS (= tags.len()); column = next tag
    /// index or EOS (= tags.len()).
    transitions: Vec<f64>,
    oov_penalty: f64,
    transition_floor: f64,
    max_surface_chars: usize,
    oov_tag: usize,
    script: Vec<RangeInclusive<u32>>,
}

#[derive(Debug, Clone)]
pub struct LexiconBuilder {
    functional: Vec<String>,
    entries: Vec<(String, String, f64)>,
    transitions: Vec<(String, String, f64)>,
    oov_penalty: f64,
    transition_floor: f64,
    script: Vec<RangeInclusive<u32>>,
}

impl Default for LexiconBuilder {
    fn default() -> Self {
        LexiconBuilder {
            functional: vec!["det".into(), "part".into()],
            entries: Vec::new(),
            transitions: Vec::new(),
            oov_penalty: DEFAULT_OOV_PENALTY,
            transition_floor: DEFAULT_TRANSITION_FLOOR,
            script: KHMER_SCRIPT.to_vec(),
        }
    }
}

impl LexiconBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the functional labels of the tagset (content labels and `o`
    /// are always present).
    pub fn functional_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.functional = tags.into_iter().map(Into::into).collect();
        self
    }

    pub fn entry(mut self, surface: &str, tag: &str, log_prob: f64) -> Self {
        self.entries.push((surface.to_string(), tag.to_string(), log_prob));
        self
    }

    pub fn transition(mut self, from: &str, to: &str, log_prob: f64) -> Self {
        self.transitions.push((from.to_string(), to.to_string(), log_prob));
        self
    }

    pub fn oov_penalty(mut self, penalty: f64) -> Self {
        self.oov_penalty = penalty;
        self
    }

    pub fn transition_floor(mut self, floor: f64) -> Self {
        self.transition_floor = floor;
        self
    }

    pub fn script(mut self, ranges: Vec<RangeInclusive<u32>>) -> Self {
        self.script = ranges;
        self
    }

    pub fn build(self) -> Result<Lexicon> {
        if !(self.oov_penalty < 0.0) || !self.oov_penalty.is_finite() {
            return Err(Error::Lexicon(format!(
                "oov penalty must be a finite negative log probability, got {}",
                self.oov_penalty
            )));
        }
        check_log_prob(self.transition_floor, "transition floor")?;
        let tagset = KhmerTagset::with_functional(self.functional);
        let tags: Vec<String> = tagset.labels().map(str::to_string).collect();
        let index: HashMap<&str, usize> = tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let boundary = tags.len();
        let width = tags.len() + 1;

        let mut entries: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        let mut max_surface_chars = 0;
        for (surface, tag, lp) in self.entries {
            check_log_prob(lp, &format!("entry `{surface}`"))?;
            let surface: String = surface.nfc().collect();
            if surface.is_empty() {
                return Err(Error::Lexicon("empty surface".into()));
            }
            let &ti = index
                .get(tag.as_str())
                .ok_or_else(|| Error::Lexicon(format!("tag `{tag}` of `{surface}` is not in the tagset")))?;
            max_surface_chars = max_surface_chars.max(surface.chars().count());
            let list = entries.entry(surface).or_default();
            match list.iter_mut().find(|(t, _)| *t == ti) {
                Some(existing) => existing.1 = existing.1.max(lp),
                None => list.push((ti, lp)),
            }
        }
        for list in entries.values_mut() {
            list.sort_by_key(|(t, _)| *t);
        }

        let mut transitions = vec![self.transition_floor; width * width];
        for (from, to, lp) in self.transitions {
            check_log_prob(lp, &format!("transition {from} → {to}"))?;
            let row = if from == BOS {
                boundary
            } else {
                *index
                    .get(from.as_str())
                    .ok_or_else(|| Error::Lexicon(format!("transition source `{from}` is not in the tagset")))?
            };
            let col = if to == EOS {
                boundary
            } else {
                *index
                    .get(to.as_str())
                    .ok_or_else(|| Error::Lexicon(format!("transition target `{to}` is not in the tagset")))?
            };
            transitions[row * width + col] = lp;
        }

        Ok(Lexicon {
            oov_tag: index[KHMER_OTHER],
            tags,
            tagset,
            entries,
            transitions,
            oov_penalty: self.oov_penalty,
            transition_floor: self.transition_floor,
            max_surface_chars,
            script: self.script,
        })
    }
}

fn check_log_prob(lp: f64, what: &str) -> Result<()> {
    if lp.is_nan() || lp > 0.0 {
        return Err(Error::Lexicon(format!("{what}: log probability {lp} is positive")));
    }
    Ok(())
}

impl Lexicon {
    pub fn builder() -> LexiconBuilder {
        LexiconBuilder::new()
    }

    /// Parses the TSV lexicon format described in the module docs.
    pub fn parse(input: &str) -> Result<Lexicon> {
        let mut b = LexiconBuilder::new();
        let mut line_err = |line: usize, msg: String| Error::Lexicon(format!("line {line}: {msg}"));
        for (idx, raw) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            if let Some(directive) = line.strip_prefix('@') {
                let mut parts = directive.split_whitespace();
                let name = parts.next().unwrap_or_default();
                let args: Vec<&str> = parts.collect();
                match name {
                    "tagset" => {
                        b.functional = args
                            .iter()
                            .filter(|t| !crate::textmodel::KHMER_CONTENT.contains(t) && **t != KHMER_OTHER)
                            .map(|t| t.to_string())
                            .collect();
                    }
                    "oov_penalty" => b.oov_penalty = parse_real(&args, line_no, &mut line_err)?,
                    "transition_floor" => b.transition_floor = parse_real(&args, line_no, &mut line_err)?,
                    "script" => {
                        b.script = args
                            .iter()
                            .map(|r| parse_range(r).ok_or_else(|| line_err(line_no, format!("bad range `{r}`"))))
                            .collect::<Result<_>>()?;
                    }
                    "trans" => {
                        if args.len() != 3 {
                            return Err(line_err(line_no, "@trans expects: from to log_prob".into()));
                        }
                        let lp = args[2]
                            .parse::<f64>()
                            .map_err(|_| line_err(line_no, format!("bad number `{}`", args[2])))?;
                        b.transitions.push((args[0].to_string(), args[1].to_string(), lp));
                    }
                    other => return Err(line_err(line_no, format!("unknown directive `@{other}`"))),
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(line_err(line_no, format!("expected surface<TAB>tag<TAB>log_prob, found {} columns", cols.len())));
            }
            let lp = cols[2]
                .trim()
                .parse::<f64>()
                .map_err(|_| line_err(line_no, format!("bad number `{}`", cols[2])))?;
            b.entries.push((cols[0].to_string(), cols[1].trim().to_string(), lp));
        }
        b.build()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn tagset(&self) -> &KhmerTagset {
        &self.tagset
    }

    pub fn tag_index(&self, label: &str) -> Option<usize> {
        self.tags.binary_search_by(|t| t.as_str().cmp(label)).ok()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, surface: &str) -> &[(usize, f64)] {
        self.entries.get(surface).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Transition log probability; `None` stands for BOS as source or EOS as target.
    pub fn transition(&self, from: Option<usize>, to: Option<usize>) -> f64 {
        let width = self.tags.len() + 1;
        let row = from.unwrap_or(self.tags.len());
        let col = to.unwrap_or(self.tags.len());
        self.transitions[row * width + col]
    }

    pub fn oov_penalty(&self) -> f64 {
        self.oov_penalty
    }

    pub fn oov_tag(&self) -> usize {
        self.oov_tag
    }

    pub fn transition_floor(&self) -> f64 {
        self.transition_floor
    }

    pub fn max_surface_chars(&self) -> usize {
        self.max_surface_chars
    }

    pub fn in_script(&self, c: char) -> bool {
        let cp = c as u32;
        self.script.iter().any(|r| r.contains(&cp))
    }
}

fn parse_real(args: &[&str], line: usize, err: &mut impl FnMut(usize, String) -> Error) -> Result<f64> {
    match args {
        [v] => v.parse::<f64>().map_err(|_| err(line, format!("bad number `{v}`"))),
        _ => Err(err(line, "expected a single number".into())),
    }
}

fn parse_range(s: &str) -> Option<RangeInclusive<u32>> {
    let (a, b) = s.split_once('-')?;
    let a = u32::from_str_radix(a.trim_start_matches("U+"), 16).ok()?;
    let b = u32::from_str_radix(b.trim_start_matches("U+"), 16).ok()?;
    (a <= b).then_some(a..=b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let lex = Lexicon::parse("ab\tn\t-0.5\na\tv\t-1.0\nb\to\t-1.0\n").unwrap();
        assert_eq!(lex.len(), 3);
        assert_eq!(lex.max_surface_chars(), 2);
    }

    #[test]
    fn duplicate_rows_keep_the_maximum() {
        let lex = Lexicon::parse("x\tn\t-2.0\nx\tn\t-1.0\n").unwrap();
        let n = lex.tag_index("n").unwrap();
        assert_eq!(lex.lookup("x"), &[(n, -1.0)]);
    }

    #[test]
    fn empty_entry_section_is_valid() {
        let lex = Lexicon::parse("# nothing here\n@oov_penalty\t-5\n").unwrap();
        assert!(lex.is_empty());
        assert_eq!(lex.oov_penalty(), -5.0);
    }

    #[test]
    fn positive_log_prob_is_rejected() {
        assert!(Lexicon::parse("x\tn\t0.5\n").is_err());
        assert!(Lexicon::parse("@trans\tBOS\tn\t0.1\n").is_err());
    }

    #[test]
    fn tag_outside_tagset_is_rejected() {
        assert!(Lexicon::parse("x\tNOUN\t-1\n").is_err());
        assert!(Lexicon::parse("@tagset n v a 1 o\nx\tdet\t-1\n").is_err());
        assert!(Lexicon::parse("@tagset n v a 1 o art\nx\tart\t-1\n").is_ok());
    }

    #[test]
    fn transitions_fall_back_to_the_floor() {
        let lex = Lexicon::parse("@transition_floor -3\n@trans BOS n -0.25\n").unwrap();
        let n = lex.tag_index("n");
        assert_eq!(lex.transition(None, n), -0.25);
        assert_eq!(lex.transition(n, None), -3.0);
        assert_eq!(lex.transition(n, n), -3.0);
    }

    #[test]
    fn tags_sorted_lexicographically() {
        let lex = Lexicon::builder().build().unwrap();
        let mut sorted = lex.tags().to_vec();
        sorted.sort();
        assert_eq!(lex.tags(), &sorted[..]);
        assert_eq!(lex.tags()[lex.oov_tag()], "o");
    }

    #[test]
    fn script_ranges() {
        let lex = Lexicon::builder().build().unwrap();
        assert!(lex.in_script('ក'));
        assert!(!lex.in_script('a'));
        let lex = Lexicon::parse("@script 61-7A\n").unwrap();
        assert!(lex.in_script('a'));
    }
}
