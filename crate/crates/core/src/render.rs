//! Serialization of style runs: HTML fragments, ANSI terminal text and the
//! span-list JSON exchanged with the reading client.
//!
//! Every renderer checks that the runs tile the document and never inserts
//! characters between runs, so stripping markup gives back the source text.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::styler::{Rgb, StyleRun, StyleSpec, Weight};
use crate::textmodel::Document;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HtmlOptions {
    /// Emit `class="…"` attributes instead of inline styles.
    pub css_classes: bool,
}

fn check_tiling(doc: &Document, runs: &[StyleRun]) -> Result<Vec<char>> {
    let chars: Vec<char> = doc.source_text.chars().collect();
    let mut cursor = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.span.start != cursor || run.span.end <= run.span.start {
            return Err(Error::NonTiling(format!(
                "run {i} spans {}..{} but the previous run ended at {cursor}",
                run.span.start, run.span.end
            )));
        }
        cursor = run.span.end;
    }
    if cursor != chars.len() {
        return Err(Error::NonTiling(format!(
            "runs cover {cursor} of {} characters",
            chars.len()
        )));
    }
    Ok(chars)
}

pub fn escape_html(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
}

fn css_class(style: &StyleSpec) -> String {
    let mut classes = Vec::new();
    if style.weight == Weight::Bold {
        classes.push("sl-bold".to_string());
    }
    if style.color != Rgb::BLACK {
        classes.push(format!("sl-c-{}", &style.color.to_string()[1..]));
    }
    classes.join(" ")
}

fn inline_style(style: &StyleSpec) -> String {
    let mut decls = Vec::new();
    if style.weight == Weight::Bold {
        decls.push("font-weight:bold".to_string());
    }
    if style.color != Rgb::BLACK {
        decls.push(format!("color:{}", style.color));
    }
    decls.join(";")
}

/// HTML fragment with one `<span>` per styled run; plain runs are bare text.
pub fn render_html(doc: &Document, runs: &[StyleRun], opts: HtmlOptions) -> Result<String> {
    let chars = check_tiling(doc, runs)?;
    let mut out = String::new();
    for run in runs {
        let text: String = chars[run.span.start..run.span.end].iter().collect();
        if run.style.is_plain() {
            escape_html(&text, &mut out);
            continue;
        }
        if opts.css_classes {
            let _ = write!(out, "<span class=\"{}\">", css_class(&run.style));
        } else {
            let _ = write!(out, "<span style=\"{}\">", inline_style(&run.style));
        }
        escape_html(&text, &mut out);
        out.push_str("</span>");
    }
    Ok(out)
}

/// Stylesheet matching the classes emitted with `css_classes`.
pub fn css_for_runs(runs: &[StyleRun]) -> String {
    let mut colors: Vec<Rgb> = runs.iter().map(|r| r.style.color).filter(|c| *c != Rgb::BLACK).collect();
    colors.sort();
    colors.dedup();
    let mut out = String::from(".sl-bold{font-weight:bold}\n");
    for c in colors {
        let _ = writeln!(out, ".sl-c-{}{{color:{c}}}", &c.to_string()[1..]);
    }
    out
}

/// Text with SGR escapes: `1` for bold, `38;2;R;G;B` for colour, reset after
/// each styled run.
pub fn render_ansi(doc: &Document, runs: &[StyleRun]) -> Result<String> {
    let chars = check_tiling(doc, runs)?;
    let mut out = String::new();
    for run in runs {
        let text: String = chars[run.span.start..run.span.end].iter().collect();
        if run.style.is_plain() {
            out.push_str(&text);
            continue;
        }
        let mut params = Vec::new();
        if run.style.weight == Weight::Bold {
            params.push("1".to_string());
        }
        if run.style.color != Rgb::BLACK {
            let c = run.style.color;
            params.push(format!("38;2;{};{};{}", c.r(), c.g(), c.b()));
        }
        let _ = write!(out, "\x1b[{}m{text}\x1b[0m", params.join(";"));
    }
    Ok(out)
}

/// One record of the span-list exchange format. Offsets are Unicode scalar
/// indices into the document text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub start: usize,
    pub end: usize,
    pub weight: Weight,
    pub color: Rgb,
}

pub fn span_records(doc: &Document, runs: &[StyleRun]) -> Result<Vec<SpanRecord>> {
    check_tiling(doc, runs)?;
    Ok(runs
        .iter()
        .map(|r| SpanRecord {
            start: r.span.start,
            end: r.span.end,
            weight: r.style.weight,
            color: r.style.color,
        })
        .collect())
}

/// Compact JSON array of `{start, end, weight, color}`.
pub fn render_spans(doc: &Document, runs: &[StyleRun]) -> Result<String> {
    Ok(serde_json::to_string(&span_records(doc, runs)?)?)
}

/// Removes tags and undoes [`escape_html`].
pub fn strip_html(html: &str) -> String {
    let mut text = String::new();
    let mut in_tag = false;
    for c in html.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            c if !in_tag => text.push(c),
            _ => {}
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text.as_str();
    'scan: while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        for (entity, c) in [("&amp;", '&'), ("&lt;", '<'), ("&gt;", '>'), ("&quot;", '"'), ("&#39;", '\'')] {
            if let Some(after) = rest.strip_prefix(entity) {
                out.push(c);
                rest = after;
                continue 'scan;
            }
        }
        out.push('&');
        rest = &rest[1..];
    }
    out.push_str(rest);
    out
}

/// Removes CSI escape sequences.
pub fn strip_ansi(s: &str) -> String {
    let mut out = String::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\x1b' && chars.peek() == Some(&'[') {
            chars.next();
            for d in chars.by_ref() {
                if ('@'..='~').contains(&d) {
                    break;
                }
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Reassembles text from span records and the source characters.
pub fn text_from_spans(source: &str, records: &[SpanRecord]) -> String {
    let chars: Vec<char> = source.chars().collect();
    records
        .iter()
        .flat_map(|r| chars[r.start.min(chars.len())..r.end.min(chars.len())].iter())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::styler::{apply_scheme, StyleScheme};
    use crate::textmodel::{KhmerTagset, Language, PosTag, Span};

    fn khmer(tagged: &[(&str, &str)]) -> Document {
        let ts = KhmerTagset::default();
        Document::from_tagged(
            "k",
            Language::Khmer,
            tagged.iter().map(|(s, t)| (s.to_string(), PosTag::khmer(t, &ts).unwrap())),
        )
        .unwrap()
    }

    fn ud(tagged: &[(&str, &str)]) -> Document {
        Document::from_tagged("j", Language::Japanese, tagged.iter().map(|(s, t)| (s.to_string(), PosTag::ud(t))))
            .unwrap()
    }

    fn run(start: usize, end: usize, weight: Weight, color: Rgb) -> StyleRun {
        StyleRun {
            span: Span::new(start, end),
            style: StyleSpec::new(weight, color),
        }
    }

    #[test]
    fn bold_run_html() {
        let doc = khmer(&[("X", "n")]);
        let html = render_html(&doc, &[run(0, 1, Weight::Bold, Rgb::BLACK)], HtmlOptions::default()).unwrap();
        assert_eq!(html, r#"<span style="font-weight:bold">X</span>"#);
    }

    #[test]
    fn plain_run_is_escaped_without_span() {
        let doc = khmer(&[("a<b", "o")]);
        let html = render_html(&doc, &[run(0, 3, Weight::Regular, Rgb::BLACK)], HtmlOptions::default()).unwrap();
        assert_eq!(html, "a&lt;b");
    }

    #[test]
    fn ja_noun_html() {
        let doc = ud(&[("猫", "NOUN")]);
        let runs = apply_scheme(&doc, &StyleScheme::ja_color()).unwrap();
        assert_eq!(
            render_html(&doc, &runs, HtmlOptions::default()).unwrap(),
            r#"<span style="color:#1976D2">猫</span>"#
        );
        assert_eq!(
            render_html(&doc, &runs, HtmlOptions { css_classes: true }).unwrap(),
            r#"<span class="sl-c-1976D2">猫</span>"#
        );
        assert!(css_for_runs(&runs).contains(".sl-c-1976D2{color:#1976D2}"));
    }

    #[test]
    fn bold_and_color_combine() {
        let doc = khmer(&[("X", "n")]);
        let r = [run(0, 1, Weight::Bold, Rgb([1, 2, 3]))];
        assert_eq!(
            render_html(&doc, &r, HtmlOptions::default()).unwrap(),
            r#"<span style="font-weight:bold;color:#010203">X</span>"#
        );
        assert_eq!(render_ansi(&doc, &r).unwrap(), "\x1b[1;38;2;1;2;3mX\x1b[0m");
    }

    #[test]
    fn ansi_examples() {
        let doc = khmer(&[("X", "n")]);
        assert_eq!(
            render_ansi(&doc, &[run(0, 1, Weight::Bold, Rgb::BLACK)]).unwrap(),
            "\x1b[1mX\x1b[0m"
        );
        assert_eq!(render_ansi(&doc, &[run(0, 1, Weight::Regular, Rgb::BLACK)]).unwrap(), "X");
        let red = Rgb::parse("#D32F2F").unwrap();
        assert_eq!(
            render_ansi(&doc, &[run(0, 1, Weight::Regular, red)]).unwrap(),
            "\x1b[38;2;211;47;47mX\x1b[0m"
        );
    }

    #[test]
    fn span_json_examples() {
        let doc = khmer(&[("abcde", "o")]);
        assert_eq!(
            render_spans(&doc, &[run(0, 5, Weight::Regular, Rgb::BLACK)]).unwrap(),
            r##"[{"start":0,"end":5,"weight":"regular","color":"#000000"}]"##
        );

        let doc = khmer(&[("ab", "o"), ("c", "n")]);
        let recs = span_records(
            &doc,
            &[run(0, 2, Weight::Regular, Rgb::BLACK), run(2, 3, Weight::Bold, Rgb::BLACK)],
        )
        .unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].end, recs[1].start);
    }

    #[test]
    fn alternating_khmer_roles_give_three_records() {
        let doc = khmer(&[("ក", "o"), ("ខ", "n"), ("គ", "part")]);
        let runs = apply_scheme(&doc, &StyleScheme::khmer_bold()).unwrap();
        let json = render_spans(&doc, &runs).unwrap();
        assert_eq!(
            json,
            r##"[{"start":0,"end":1,"weight":"regular","color":"#000000"},{"start":1,"end":2,"weight":"bold","color":"#000000"},{"start":2,"end":3,"weight":"regular","color":"#000000"}]"##
        );
    }

    #[test]
    fn non_tiling_runs_are_rejected() {
        let doc = khmer(&[("abc", "o")]);
        for runs in [
            vec![run(0, 2, Weight::Regular, Rgb::BLACK)],
            vec![run(1, 3, Weight::Regular, Rgb::BLACK)],
            vec![run(0, 2, Weight::Bold, Rgb::BLACK), run(1, 3, Weight::Regular, Rgb::BLACK)],
        ] {
            assert!(matches!(render_html(&doc, &runs, HtmlOptions::default()), Err(Error::NonTiling(_))));
            assert!(render_ansi(&doc, &runs).is_err());
            assert!(render_spans(&doc, &runs).is_err());
        }
    }

    #[test]
    fn stripping_recovers_text() {
        let doc = ud(&[("\"猫\"", "NOUN"), ("&", "SYM"), ("'<>'", "X")]);
        let runs = apply_scheme(&doc, &StyleScheme::ja_color()).unwrap();
        let html = render_html(&doc, &runs, HtmlOptions::default()).unwrap();
        assert_eq!(strip_html(&html), doc.source_text);
        let ansi = render_ansi(&doc, &runs).unwrap();
        assert_eq!(strip_ansi(&ansi), doc.source_text);
        let recs = span_records(&doc, &runs).unwrap();
        assert_eq!(text_from_spans(&doc.source_text, &recs), doc.source_text);
    }
}
