//! Reader and writer for the subset of CoNLL-U this crate consumes.
//!
//! Only ID, FORM and UPOS are interpreted. The remaining columns are kept
//! verbatim on each token so a parse/write cycle is lossless. Sentences are
//! concatenated without separators because both target scripts are written
//! without inter-word spacing.

use std::fmt::Write as _;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::textmodel::{Document, ExtraColumns, KhmerTagset, Language, PosTag, Span, Token};

#[derive(Debug, Clone)]
pub struct ConlluOptions {
    /// Language assumed when a document carries no `# language = …` comment.
    pub language: Language,
    /// Id given to tokens that precede any `# newdoc id` comment.
    pub default_id: String,
    pub tagset: KhmerTagset,
}

impl Default for ConlluOptions {
    fn default() -> Self {
        ConlluOptions {
            language: Language::Japanese,
            default_id: "doc".to_string(),
            tagset: KhmerTagset::default(),
        }
    }
}

struct RawToken {
    line: usize,
    form: String,
    upos: String,
    extra: ExtraColumns,
}

#[derive(Default)]
struct SentenceBuf {
    text: Option<String>,
    tokens: Vec<RawToken>,
}

struct DocBuf {
    id: String,
    language: Language,
    text: String,
    chars: usize,
    tokens: Vec<Token>,
    sentences: Vec<std::ops::Range<usize>>,
}

impl DocBuf {
    fn new(id: String, language: Language) -> Self {
        DocBuf {
            id,
            language,
            text: String::new(),
            chars: 0,
            tokens: Vec::new(),
            sentences: Vec::new(),
        }
    }
}

/// Parses CoNLL-U with default options (UD tags, Japanese).
pub fn parse_conllu(input: &str) -> Result<Vec<Document>> {
    parse_conllu_with(input, &ConlluOptions::default())
}

pub fn parse_conllu_with(input: &str, opts: &ConlluOptions) -> Result<Vec<Document>> {
    let input: String = input.nfc().collect();
    let mut docs = Vec::new();
    let mut doc: Option<DocBuf> = None;
    let mut sent = SentenceBuf::default();
    let mut last_line = 0;

    for (idx, raw_line) in input.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() {
            flush_sentence(&mut doc, &mut sent, opts, line_no)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(id) = comment_value(comment, "newdoc id") {
                flush_sentence(&mut doc, &mut sent, opts, line_no)?;
                if let Some(done) = doc.take() {
                    docs.push(finish_doc(done)?);
                }
                doc = Some(DocBuf::new(id.to_string(), opts.language));
            } else if let Some(lang) = comment_value(comment, "language") {
                let language = match lang {
                    "khmer" | "km" => Language::Khmer,
                    "japanese" | "ja" => Language::Japanese,
                    other => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("unknown language `{other}`"),
                        })
                    }
                };
                let d = doc.get_or_insert_with(|| DocBuf::new(opts.default_id.clone(), language));
                if !d.tokens.is_empty() || !sent.tokens.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "language comment after the first sentence".into(),
                    });
                }
                d.language = language;
            } else if let Some(text) = comment_value(comment, "text") {
                sent.text = Some(text.to_string());
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') {
            return Err(Error::Parse {
                line: line_no,
                message: format!("multiword token range `{id}` is not supported; supply composite tokens directly"),
            });
        }
        if id.contains('.') {
            // Empty nodes have no surface form.
            continue;
        }
        if id.parse::<u32>().map_or(true, |n| n == 0) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("invalid token id `{id}`"),
            });
        }
        if cols[1].is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty FORM".into(),
            });
        }
        sent.tokens.push(RawToken {
            line: line_no,
            form: cols[1].to_string(),
            upos: cols[3].to_string(),
            extra: ExtraColumns {
                lemma: cols[2].to_string(),
                xpos: cols[4].to_string(),
                feats: cols[5].to_string(),
                head: cols[6].to_string(),
                deprel: cols[7].to_string(),
                deps: cols[8].to_string(),
                misc: cols[9].to_string(),
            },
        });
    }
    flush_sentence(&mut doc, &mut sent, opts, last_line + 1)?;
    if let Some(done) = doc.take() {
        docs.push(finish_doc(done)?);
    }
    Ok(docs)
}

fn comment_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let rest = comment.strip_prefix(key)?;
    let rest = rest.trim_start();
    let value = rest.strip_prefix('=')?;
    Some(value.trim())
}

fn flush_sentence(
    doc: &mut Option<DocBuf>,
    sent: &mut SentenceBuf,
    opts: &ConlluOptions,
    line_no: usize,
) -> Result<()> {
    let taken = std::mem::take(sent);
    if taken.tokens.is_empty() {
        return Ok(());
    }
    let d = doc.get_or_insert_with(|| DocBuf::new(opts.default_id.clone(), opts.language));
    let scheme = d.language.tag_scheme();
    let text = taken
        .text
        .unwrap_or_else(|| taken.tokens.iter().map(|t| t.form.as_str()).collect());
    let chars: Vec<char> = text.chars().collect();
    let mut cursor = 0;
    let first = d.tokens.len();
    for raw in taken.tokens {
        let form: Vec<char> = raw.form.chars().collect();
        if cursor < chars.len() && chars[cursor].is_whitespace() {
            return Err(Error::Parse {
                line: raw.line,
                message: "sentence text has whitespace between tokens; inter-token spacing is not supported"
                    .into(),
            });
        }
        let end = cursor + form.len();
        if end > chars.len() || chars[cursor..end] != form[..] {
            return Err(Error::SpanReconstruction {
                line: raw.line,
                surface: raw.form,
            });
        }
        let tag = PosTag::parse(scheme, &raw.upos, &opts.tagset).map_err(|e| Error::Parse {
            line: raw.line,
            message: e.to_string(),
        })?;
        d.tokens.push(Token {
            surface: raw.form,
            tag,
            span: Span::new(d.chars + cursor, d.chars + end),
            extra: Some(Box::new(raw.extra)),
        });
        cursor = end;
    }
    if cursor != chars.len() {
        return Err(Error::Parse {
            line: line_no,
            message: format!(
                "sentence text has {} characters not covered by tokens",
                chars.len() - cursor
            ),
        });
    }
    d.text.push_str(&text);
    d.chars += chars.len();
    d.sentences.push(first..d.tokens.len());
    Ok(())
}

fn finish_doc(d: DocBuf) -> Result<Document> {
    Document::with_sentences(d.id, d.language, d.text, d.tokens, d.sentences)
}

/// Serializes documents back to CoNLL-U. Tokens without preserved columns
/// are written with `_` placeholders and `SpaceAfter=No`.
pub fn write_conllu(docs: &[Document]) -> String {
    let mut out = String::new();
    let chars_of = |doc: &Document| doc.source_text.chars().collect::<Vec<char>>();
    for doc in docs {
        let chars = chars_of(doc);
        let _ = writeln!(out, "# newdoc id = {}", doc.id);
        let lang = match doc.language {
            Language::Khmer => "khmer",
            Language::Japanese => "japanese",
        };
        let _ = writeln!(out, "# language = {lang}");
        for range in &doc.sentences {
            let toks = &doc.tokens[range.clone()];
            let (start, end) = match (toks.first(), toks.last()) {
                (Some(f), Some(l)) => (f.span.start, l.span.end),
                _ => continue,
            };
            let text: String = chars[start..end].iter().collect();
            let _ = writeln!(out, "# text = {text}");
            for (i, tok) in toks.iter().enumerate() {
                let default_extra = ExtraColumns {
                    lemma: "_".into(),
                    xpos: "_".into(),
                    feats: "_".into(),
                    head: "_".into(),
                    deprel: "_".into(),
                    deps: "_".into(),
                    misc: "SpaceAfter=No".into(),
                };
                let extra = tok.extra.as_deref().unwrap_or(&default_extra);
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    i + 1,
                    tok.surface,
                    extra.lemma,
                    tok.tag.label(),
                    extra.xpos,
                    extra.feats,
                    extra.head,
                    extra.deprel,
                    extra.deps,
                    extra.misc
                );
            }
            out.push('\n');
        }
    }
    out
}
