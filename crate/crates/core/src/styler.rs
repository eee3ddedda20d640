//! Role-conditioned style schemes, run merging and WCAG 2.1 contrast checks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmodel::{classify_role, Document, KhmerRole, Span, SyntacticRole, TagScheme, UdRole};

/// WCAG 2.1 AA threshold for body text.
pub const AA_NORMAL_TEXT: f64 = 4.5;

/// An sRGB colour, written `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0, 0, 0]);
    pub const WHITE: Rgb = Rgb([0xFF, 0xFF, 0xFF]);

    pub fn parse(s: &str) -> Result<Rgb> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::InvalidColor(s.to_string()));
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).expect("validated hex");
        Ok(Rgb([byte(0), byte(2), byte(4)]))
    }

    pub fn r(self) -> u8 {
        self.0[0]
    }
    pub fn g(self) -> u8 {
        self.0[1]
    }
    pub fn b(self) -> u8 {
        self.0[2]
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02X}{:02X}{:02X}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for Rgb {
    type Err = Error;
    fn from_str(s: &str) -> Result<Rgb> {
        Rgb::parse(s)
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Rgb, D::Error> {
        let s = String::deserialize(d)?;
        Rgb::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn linearize(channel: u8) -> f64 {
    let c = channel as f64 / 255.0;
    if c <= 0.03928 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// WCAG 2.1 relative luminance in [0, 1].
pub fn relative_luminance(color: Rgb) -> f64 {
    0.2126 * linearize(color.r()) + 0.7152 * linearize(color.g()) + 0.0722 * linearize(color.b())
}

/// WCAG contrast ratio, symmetric in its arguments, in [1, 21].
pub fn contrast_ratio(fg: Rgb, bg: Rgb) -> f64 {
    let (a, b) = (relative_luminance(fg), relative_luminance(bg));
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    (hi + 0.05) / (lo + 0.05)
}

/// Hex-string variants of the two functions above.
pub fn relative_luminance_hex(color: &str) -> Result<f64> {
    Ok(relative_luminance(Rgb::parse(color)?))
}

pub fn contrast_ratio_hex(fg: &str, bg: &str) -> Result<f64> {
    Ok(contrast_ratio(Rgb::parse(fg)?, Rgb::parse(bg)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    #[default]
    Regular,
    Bold,
}

impl Weight {
    pub fn name(self) -> &'static str {
        match self {
            Weight::Regular => "regular",
            Weight::Bold => "bold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StyleSpec {
    pub weight: Weight,
    pub color: Rgb,
    pub background: Rgb,
}

impl Default for StyleSpec {
    fn default() -> Self {
        StyleSpec {
            weight: Weight::Regular,
            color: Rgb::BLACK,
            background: Rgb::WHITE,
        }
    }
}

impl StyleSpec {
    pub fn new(weight: Weight, color: Rgb) -> Self {
        StyleSpec {
            weight,
            color,
            ..StyleSpec::default()
        }
    }

    /// Regular black text, rendered without markup.
    pub fn is_plain(&self) -> bool {
        self.weight == Weight::Regular && self.color == Rgb::BLACK
    }
}

/// A total mapping from the roles of one tag scheme to styles.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleScheme {
    pub name: String,
    pub tag_scheme: TagScheme,
    pub background: Rgb,
    mapping: BTreeMap<SyntacticRole, StyleSpec>,
    /// Style of unstyled (control) text.
    pub default: StyleSpec,
}

impl StyleScheme {
    /// Builds a scheme; roles missing from `rules` take the default style.
    pub fn new(
        name: impl Into<String>,
        tag_scheme: TagScheme,
        background: Rgb,
        rules: impl IntoIterator<Item = (SyntacticRole, Weight, Rgb)>,
        default: (Weight, Rgb),
    ) -> Result<Self> {
        let name = name.into();
        let default = StyleSpec {
            weight: default.0,
            color: default.1,
            background,
        };
        let mut mapping = BTreeMap::new();
        for (role, weight, color) in rules {
            if role.scheme() != tag_scheme {
                return Err(Error::Scheme(format!(
                    "role `{role}` does not belong to the {} tag scheme",
                    tag_scheme.name()
                )));
            }
            mapping.insert(role, StyleSpec { weight, color, background });
        }
        for role in SyntacticRole::all(tag_scheme) {
            mapping.entry(role).or_insert(default);
        }
        Ok(StyleScheme {
            name,
            tag_scheme,
            background,
            mapping,
            default,
        })
    }

    /// Content words bold, functional words regular, all black on white.
    pub fn khmer_bold() -> Self {
        StyleScheme::new(
            "khmer-bold",
            TagScheme::Khmer,
            Rgb::WHITE,
            [
                (SyntacticRole::Khmer(KhmerRole::Content), Weight::Bold, Rgb::BLACK),
                (SyntacticRole::Khmer(KhmerRole::Functional), Weight::Regular, Rgb::BLACK),
            ],
            (Weight::Regular, Rgb::BLACK),
        )
        .expect("built-in scheme is valid")
    }

    /// Syntactic colour coding for UD-tagged Japanese.
    pub fn ja_color() -> Self {
        let c = |r, g, b| Rgb([r, g, b]);
        StyleScheme::new(
            "ja-color",
            TagScheme::Ud,
            Rgb::WHITE,
            [
                (SyntacticRole::Ud(UdRole::Entity), Weight::Regular, c(0x19, 0x76, 0xD2)),
                (SyntacticRole::Ud(UdRole::Predicate), Weight::Regular, c(0xD3, 0x2F, 0x2F)),
                (SyntacticRole::Ud(UdRole::Modifier), Weight::Regular, c(0xE6, 0x51, 0x00)),
                (SyntacticRole::Ud(UdRole::Connector), Weight::Regular, c(0x21, 0x21, 0x21)),
                (SyntacticRole::Ud(UdRole::Punctuation), Weight::Regular, c(0xAA, 0xAA, 0xAA)),
                (SyntacticRole::Ud(UdRole::Default), Weight::Regular, Rgb::BLACK),
            ],
            (Weight::Regular, Rgb::BLACK),
        )
        .expect("built-in scheme is valid")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "khmer-bold" => Some(StyleScheme::khmer_bold()),
            "ja-color" => Some(StyleScheme::ja_color()),
            _ => None,
        }
    }

    pub fn style_for(&self, role: SyntacticRole) -> StyleSpec {
        self.mapping.get(&role).copied().unwrap_or(self.default)
    }

    pub fn rules(&self) -> impl Iterator<Item = (SyntacticRole, StyleSpec)> + '_ {
        self.mapping.iter().map(|(r, s)| (*r, *s))
    }

    /// Parses the JSON scheme format:
    /// `{name, background, rules: {role: {weight, color}}, default: {weight, color}}`.
    pub fn from_json(input: &str) -> Result<Self> {
        let file: SchemeFile = serde_json::from_str(input)?;
        let mut scheme = None;
        let mut rules = Vec::new();
        for (name, rule) in &file.rules {
            let role = SyntacticRole::from_name(name)
                .ok_or_else(|| Error::Scheme(format!("unknown role `{name}`")))?;
            match scheme {
                None => scheme = Some(role.scheme()),
                Some(s) if s != role.scheme() => {
                    return Err(Error::Scheme("rules mix khmer and ud roles".into()));
                }
                _ => {}
            }
            rules.push((role, rule.weight, rule.color));
        }
        let tag_scheme = scheme.ok_or_else(|| Error::Scheme("scheme has no rules".into()))?;
        let background = file.background.unwrap_or(Rgb::WHITE);
        let default = file.default.unwrap_or(RuleFile {
            weight: Weight::Regular,
            color: Rgb::BLACK,
        });
        StyleScheme::new(file.name, tag_scheme, background, rules, (default.weight, default.color))
    }

    pub fn to_json(&self) -> String {
        let file = SchemeFile {
            name: self.name.clone(),
            background: Some(self.background),
            rules: self
                .mapping
                .iter()
                .map(|(r, s)| (r.name().to_string(), RuleFile { weight: s.weight, color: s.color }))
                .collect(),
            default: Some(RuleFile {
                weight: self.default.weight,
                color: self.default.color,
            }),
        };
        serde_json::to_string_pretty(&file).expect("scheme serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct RuleFile {
    #[serde(default)]
    weight: Weight,
    color: Rgb,
}

#[derive(Serialize, Deserialize)]
struct SchemeFile {
    name: String,
    #[serde(default)]
    background: Option<Rgb>,
    rules: BTreeMap<String, RuleFile>,
    #[serde(default)]
    default: Option<RuleFile>,
}

/// Maximal span of characters sharing one resolved style.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StyleRun {
    pub span: Span,
    pub style: StyleSpec,
}

/// Resolves each token's role through the scheme and merges equal neighbours.
pub fn apply_scheme(doc: &Document, scheme: &StyleScheme) -> Result<Vec<StyleRun>> {
    let found = doc.language.tag_scheme();
    if found != scheme.tag_scheme {
        return Err(Error::SchemeMismatch {
            scheme: scheme.name.clone(),
            expected: scheme.tag_scheme.name(),
            found: found.name(),
        });
    }
    Ok(merge_runs(
        doc.tokens
            .iter()
            .map(|t| (t.span, scheme.style_for(classify_role(&t.tag)))),
    ))
}

/// The control rendering: the whole document in the scheme's default style.
pub fn plain_runs(doc: &Document, scheme: &StyleScheme) -> Vec<StyleRun> {
    merge_runs(doc.tokens.iter().map(|t| (t.span, scheme.default)))
}

fn merge_runs(items: impl Iterator<Item = (Span, StyleSpec)>) -> Vec<StyleRun> {
    let mut runs: Vec<StyleRun> = Vec::new();
    for (span, style) in items {
        match runs.last_mut() {
            Some(last) if last.style == style && last.span.end == span.start => last.span.end = span.end,
            _ => runs.push(StyleRun { span, style }),
        }
    }
    runs
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastRow {
    pub role: String,
    pub color: Rgb,
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeValidation {
    pub scheme: String,
    pub background: Rgb,
    pub threshold: f64,
    pub rows: Vec<ContrastRow>,
    pub all_pass: bool,
}

/// Checks every role's text colour against the scheme background.
pub fn validate_scheme(scheme: &StyleScheme, threshold: f64) -> SchemeValidation {
    let rows: Vec<ContrastRow> = SyntacticRole::all(scheme.tag_scheme)
        .into_iter()
        .map(|role| {
            let style = scheme.style_for(role);
            let ratio = contrast_ratio(style.color, scheme.background);
            ContrastRow {
                role: role.name().to_string(),
                color: style.color,
                ratio,
                pass: ratio >= threshold,
            }
        })
        .collect();
    SchemeValidation {
        scheme: scheme.name.clone(),
        background: scheme.background,
        threshold,
        all_pass: rows.iter().all(|r| r.pass),
        rows,
    }
}
