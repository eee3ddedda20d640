//! Domain types shared by every stage: tokens, tags, syntactic roles and
//! documents, plus the tag → role classification rules.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Khmer labels that carry semantic meaning and receive the styling variable.
pub const KHMER_CONTENT: [&str; 4] = ["n", "v", "a", "1"];

/// The Khmer tag used for functional words and for out-of-vocabulary fallback.
pub const KHMER_OTHER: &str = "o";

/// The 17 Universal Dependencies part-of-speech labels.
pub const UPOS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

/// Half-open interval of character (Unicode scalar) indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagScheme {
    Khmer,
    Ud,
}

impl TagScheme {
    pub fn name(self) -> &'static str {
        match self {
            TagScheme::Khmer => "khmer",
            TagScheme::Ud => "ud",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Khmer,
    Japanese,
}

impl Language {
    pub fn tag_scheme(self) -> TagScheme {
        match self {
            Language::Khmer => TagScheme::Khmer,
            Language::Japanese => TagScheme::Ud,
        }
    }
}

/// The closed Khmer tagset. Content labels are fixed; the functional labels
/// come from configuration (the lexicon header), `o` is always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KhmerTagset {
    labels: BTreeSet<String>,
}

impl Default for KhmerTagset {
    fn default() -> Self {
        KhmerTagset::with_functional(["det", "part"])
    }
}

impl KhmerTagset {
    /// Builds the tagset from the configured functional labels.
    pub fn with_functional<I, S>(functional: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: BTreeSet<String> = KHMER_CONTENT.iter().map(|s| s.to_string()).collect();
        labels.insert(KHMER_OTHER.to_string());
        labels.extend(functional.into_iter().map(Into::into));
        KhmerTagset { labels }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }
}

/// A part-of-speech label tied to its scheme.
///
/// Khmer tags can only be built against a [`KhmerTagset`], so every value of
/// this type is scheme-valid and [`classify_role`] never fails.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PosTag {
    scheme: TagScheme,
    label: String,
}

impl PosTag {
    pub fn khmer(label: &str, tagset: &KhmerTagset) -> Result<Self> {
        if !tagset.contains(label) {
            return Err(Error::UnknownTag {
                scheme: "khmer",
                label: label.to_string(),
            });
        }
        Ok(PosTag {
            scheme: TagScheme::Khmer,
            label: label.to_string(),
        })
    }

    /// Any UD label is accepted; labels absent from the colour mapping are
    /// reported by [`PosTag::is_unmapped`].
    pub fn ud(label: &str) -> Self {
        PosTag {
            scheme: TagScheme::Ud,
            label: label.to_string(),
        }
    }

    pub fn parse(scheme: TagScheme, label: &str, tagset: &KhmerTagset) -> Result<Self> {
        match scheme {
            TagScheme::Khmer => PosTag::khmer(label, tagset),
            TagScheme::Ud => Ok(PosTag::ud(label)),
        }
    }

    pub fn scheme(&self) -> TagScheme {
        self.scheme
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True for UD labels that fall through to [`UdRole::Default`].
    pub fn is_unmapped(&self) -> bool {
        self.scheme == TagScheme::Ud && ud_role(&self.label) == UdRole::Default
    }

    /// True for UD labels outside the 17 standard UPOS values.
    pub fn is_nonstandard(&self) -> bool {
        self.scheme == TagScheme::Ud && !UPOS.contains(&self.label.as_str())
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KhmerRole {
    Content,
    Functional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UdRole {
    Entity,
    Predicate,
    Modifier,
    Connector,
    Punctuation,
    Default,
}

impl KhmerRole {
    pub const ALL: [KhmerRole; 2] = [KhmerRole::Content, KhmerRole::Functional];
}

impl UdRole {
    pub const ALL: [UdRole; 6] = [
        UdRole::Entity,
        UdRole::Predicate,
        UdRole::Modifier,
        UdRole::Connector,
        UdRole::Punctuation,
        UdRole::Default,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyntacticRole {
    Khmer(KhmerRole),
    Ud(UdRole),
}

impl SyntacticRole {
    pub fn scheme(self) -> TagScheme {
        match self {
            SyntacticRole::Khmer(_) => TagScheme::Khmer,
            SyntacticRole::Ud(_) => TagScheme::Ud,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SyntacticRole::Khmer(KhmerRole::Content) => "content",
            SyntacticRole::Khmer(KhmerRole::Functional) => "functional",
            SyntacticRole::Ud(UdRole::Entity) => "entity",
            SyntacticRole::Ud(UdRole::Predicate) => "predicate",
            SyntacticRole::Ud(UdRole::Modifier) => "modifier",
            SyntacticRole::Ud(UdRole::Connector) => "connector",
            SyntacticRole::Ud(UdRole::Punctuation) => "punctuation",
            SyntacticRole::Ud(UdRole::Default) => "default",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "content" => SyntacticRole::Khmer(KhmerRole::Content),
            "functional" => SyntacticRole::Khmer(KhmerRole::Functional),
            "entity" => SyntacticRole::Ud(UdRole::Entity),
            "predicate" => SyntacticRole::Ud(UdRole::Predicate),
            "modifier" => SyntacticRole::Ud(UdRole::Modifier),
            "connector" => SyntacticRole::Ud(UdRole::Connector),
            "punctuation" => SyntacticRole::Ud(UdRole::Punctuation),
            "default" => SyntacticRole::Ud(UdRole::Default),
            _ => return None,
        })
    }

    /// Every role of the given scheme, in declaration order.
    pub fn all(scheme: TagScheme) -> Vec<SyntacticRole> {
        match scheme {
            TagScheme::Khmer => KhmerRole::ALL.iter().map(|r| SyntacticRole::Khmer(*r)).collect(),
            TagScheme::Ud => UdRole::ALL.iter().map(|r| SyntacticRole::Ud(*r)).collect(),
        }
    }
}

impl fmt::Display for SyntacticRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn ud_role(label: &str) -> UdRole {
    match label {
        "NOUN" | "PROPN" | "PRON" => UdRole::Entity,
        "VERB" | "AUX" => UdRole::Predicate,
        "ADJ" => UdRole::Modifier,
        "PART" | "ADP" | "SCONJ" => UdRole::Connector,
        "PUNCT" | "SYM" => UdRole::Punctuation,
        _ => UdRole::Default,
    }
}

/// Maps a tag onto its syntactic role.
pub fn classify_role(tag: &PosTag) -> SyntacticRole {
    match tag.scheme {
        TagScheme::Khmer if KHMER_CONTENT.contains(&tag.label.as_str()) => {
            SyntacticRole::Khmer(KhmerRole::Content)
        }
        TagScheme::Khmer => SyntacticRole::Khmer(KhmerRole::Functional),
        TagScheme::Ud => SyntacticRole::Ud(ud_role(&tag.label)),
    }
}

/// Validates a raw label against its scheme and classifies it in one step.
/// Unknown Khmer labels are an error; unknown UD labels resolve to the
/// default role (check [`PosTag::is_unmapped`] for the flag).
pub fn classify_label(scheme: TagScheme, label: &str, tagset: &KhmerTagset) -> Result<SyntacticRole> {
    PosTag::parse(scheme, label, tagset).map(|tag| classify_role(&tag))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub tag: PosTag,
    pub span: Span,
    /// CoNLL-U columns this crate does not interpret, kept for round-tripping.
    pub extra: Option<Box<ExtraColumns>>,
}

impl Token {
    pub fn new(surface: impl Into<String>, tag: PosTag, span: Span) -> Self {
        Token {
            surface: surface.into(),
            tag,
            span,
            extra: None,
        }
    }
}

/// CoNLL-U columns 3 and 5–10 (LEMMA, XPOS, FEATS, HEAD, DEPREL, DEPS, MISC).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtraColumns {
    pub lemma: String,
    pub xpos: String,
    pub feats: String,
    pub head: String,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub language: Language,
    pub source_text: String,
    pub tokens: Vec<Token>,
    /// Token index ranges of the sentences, in order. Always non-empty
    /// when there are tokens.
    pub sentences: Vec<Range<usize>>,
}

impl Document {
    /// Builds a single-sentence document, checking that the tokens tile the
    /// text and carry tags of the language's scheme.
    pub fn new(
        id: impl Into<String>,
        language: Language,
        source_text: impl Into<String>,
        tokens: Vec<Token>,
    ) -> Result<Self> {
        let sentences = if tokens.is_empty() {
            Vec::new()
        } else {
            vec![0..tokens.len()]
        };
        Document::with_sentences(id, language, source_text, tokens, sentences)
    }

    pub fn with_sentences(
        id: impl Into<String>,
        language: Language,
        source_text: impl Into<String>,
        tokens: Vec<Token>,
        sentences: Vec<Range<usize>>,
    ) -> Result<Self> {
        let doc = Document {
            id: id.into(),
            language,
            source_text: source_text.into(),
            tokens,
            sentences,
        };
        doc.validate()?;
        Ok(doc)
    }

    /// Builds a document from (surface, tag) pairs; the text is their
    /// concatenation.
    pub fn from_tagged<I>(id: impl Into<String>, language: Language, tagged: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, PosTag)>,
    {
        let mut text = String::new();
        let mut tokens = Vec::new();
        let mut pos = 0;
        for (surface, tag) in tagged {
            let len = surface.chars().count();
            text.push_str(&surface);
            tokens.push(Token::new(surface, tag, Span::new(pos, pos + len)));
            pos += len;
        }
        Document::new(id, language, text, tokens)
    }

    pub fn char_len(&self) -> usize {
        self.source_text.chars().count()
    }

    pub fn validate(&self) -> Result<()> {
        let scheme = self.language.tag_scheme();
        let chars: Vec<char> = self.source_text.chars().collect();
        let mut cursor = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.surface.is_empty() {
                return Err(Error::InvalidDocument(format!("token {i} is empty")));
            }
            if tok.tag.scheme() != scheme {
                return Err(Error::InvalidDocument(format!(
                    "token {i} carries a {} tag in a {} document",
                    tok.tag.scheme().name(),
                    scheme.name()
                )));
            }
            if tok.span.start != cursor || tok.span.end > chars.len() || tok.span.is_empty() {
                return Err(Error::InvalidDocument(format!(
                    "token {i} span {}..{} does not continue at {cursor}",
                    tok.span.start, tok.span.end
                )));
            }
            let slice: String = chars[tok.span.start..tok.span.end].iter().collect();
            if slice != tok.surface {
                return Err(Error::InvalidDocument(format!(
                    "token {i} surface `{}` differs from text `{slice}`",
                    tok.surface
                )));
            }
            cursor = tok.span.end;
        }
        if cursor != chars.len() {
            return Err(Error::InvalidDocument(format!(
                "tokens cover {cursor} of {} characters",
                chars.len()
            )));
        }
        let mut next = 0;
        for range in &self.sentences {
            if range.start != next || range.end <= range.start || range.end > self.tokens.len() {
                return Err(Error::InvalidDocument("sentence ranges do not tile the tokens".into()));
            }
            next = range.end;
        }
        if next != self.tokens.len() {
            return Err(Error::InvalidDocument("sentence ranges do not tile the tokens".into()));
        }
        Ok(())
    }

    pub fn roles(&self) -> impl Iterator<Item = SyntacticRole> + '_ {
        self.tokens.iter().map(|t| classify_role(&t.tag))
    }
}
