//! C ABI over the seglit toolkit.
//!
//! Every fallible call returns a [`SeglitStatus`]; on failure the message is
//! available from [`seglit_last_error`] on the same thread. Strings handed
//! out by the library must be released with [`seglit_string_free`], handles
//! with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use seglit::ingest::{parse_conllu_with, write_conllu, ConlluOptions, Lexicon};
use seglit::render::{render_ansi, render_html, render_spans, HtmlOptions};
use seglit::segtag::segment_tag;
use seglit::stats::{bh_fdr, chi2_yates, paired_t, ContingencyTable2x2, Flag, TestResult};
use seglit::styler::{apply_scheme, contrast_ratio, Rgb, StyleScheme};
use seglit::textmodel::{Document, KhmerTagset, Language, TagScheme};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeglitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Input rejected by the library; see the last error.
    InvalidInput = 3,
    /// A Rust panic was caught at the boundary.
    Internal = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeglitFormat {
    Html = 0,
    /// HTML with class attributes instead of inline styles.
    HtmlClasses = 1,
    Ansi = 2,
    /// JSON array of `{start, end, weight, color}`.
    Spans = 3,
}

/// Set in [`SeglitTestResult::flags`] when a logistic fit separates.
pub const SEGLIT_FLAG_SEPARATION: u32 = 1;
/// Set when an expected cell count is below 5.
pub const SEGLIT_FLAG_SMALL_EXPECTED: u32 = 2;

/// Result of a classical test. `p` is NaN when it is undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeglitTestResult {
    pub statistic: f64,
    pub df: f64,
    pub p: f64,
    pub effect: f64,
    pub flags: u32,
}

impl From<TestResult> for SeglitTestResult {
    fn from(r: TestResult) -> Self {
        let mut flags = 0;
        if r.has(Flag::Separation) {
            flags |= SEGLIT_FLAG_SEPARATION;
        }
        if r.has(Flag::SmallExpectedCount) {
            flags |= SEGLIT_FLAG_SMALL_EXPECTED;
        }
        SeglitTestResult {
            statistic: r.statistic,
            df: r.df,
            p: r.p.unwrap_or(f64::NAN),
            effect: r.effect,
            flags,
        }
    }
}

/// Opaque segmentation lexicon.
pub struct SeglitLexicon {
    inner: Lexicon,
}

/// Opaque style scheme.
pub struct SeglitScheme {
    inner: StyleScheme,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SeglitStatus, String);

impl From<seglit::Error> for Failure {
    fn from(e: seglit::Error) -> Self {
        Failure(SeglitStatus::InvalidInput, e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SeglitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SeglitStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal error: panic in seglit".into());
            SeglitStatus::Internal
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(SeglitStatus::NullPointer, format!("`{name}` is null"))
}

/// # Safety
/// `s` must be null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(SeglitStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    write_out(out, ptr::null_mut(), "out")?;
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SeglitStatus::InvalidInput, "output contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn seglit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn seglit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn seglit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a lexicon in the tab-separated format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn seglit_lexicon_parse(text: *const c_char, out: *mut *mut SeglitLexicon) -> SeglitStatus {
    guard(|| {
        let lexicon = Lexicon::parse(read_str(text, "text")?)?;
        write_handle(out, SeglitLexicon { inner: lexicon })
    })
}

/// # Safety
/// `lexicon` must be null or a live handle from [`seglit_lexicon_parse`].
#[no_mangle]
pub unsafe extern "C" fn seglit_lexicon_free(lexicon: *mut SeglitLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Segments and tags `text` into a one-document CoNLL-U string.
///
/// # Safety
/// `lexicon` must be a live handle, `text` and `id` NUL-terminated strings,
/// `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn seglit_segtag(
    lexicon: *const SeglitLexicon,
    id: *const c_char,
    text: *const c_char,
    out: *mut *mut c_char,
) -> SeglitStatus {
    guard(|| {
        let lex = &lexicon.as_ref().ok_or_else(|| null("lexicon"))?.inner;
        let text = read_str(text, "text")?;
        let doc = Document::new(read_str(id, "id")?, Language::Khmer, text, segment_tag(text, lex))?;
        write_out(out, into_c_string(write_conllu(&[doc]))?, "out")
    })
}

/// Looks up a built-in scheme (`khmer-bold`, `ja-color`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn seglit_scheme_builtin(name: *const c_char, out: *mut *mut SeglitScheme) -> SeglitStatus {
    guard(|| {
        let name = read_str(name, "name")?;
        let scheme = StyleScheme::builtin(name)
            .ok_or_else(|| Failure(SeglitStatus::InvalidInput, format!("unknown scheme `{name}`")))?;
        write_handle(out, SeglitScheme { inner: scheme })
    })
}

/// Parses a scheme from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn seglit_scheme_from_json(json: *const c_char, out: *mut *mut SeglitScheme) -> SeglitStatus {
    guard(|| {
        let scheme = StyleScheme::from_json(read_str(json, "json")?)?;
        write_handle(out, SeglitScheme { inner: scheme })
    })
}

/// # Safety
/// `scheme` must be null or a live scheme handle.
#[no_mangle]
pub unsafe extern "C" fn seglit_scheme_free(scheme: *mut SeglitScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Styles every document of `conllu` and renders them, one per line.
/// `lexicon` may be null; when given its tagset applies to Khmer input.
///
/// # Safety
/// `scheme` must be a live handle, `lexicon` null or live, `conllu` a
/// NUL-terminated string, `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn seglit_render(
    scheme: *const SeglitScheme,
    lexicon: *const SeglitLexicon,
    conllu: *const c_char,
    format: SeglitFormat,
    out: *mut *mut c_char,
) -> SeglitStatus {
    guard(|| {
        let scheme = &scheme.as_ref().ok_or_else(|| null("scheme"))?.inner;
        let opts = ConlluOptions {
            language: match scheme.tag_scheme {
                TagScheme::Khmer => Language::Khmer,
                TagScheme::Ud => Language::Japanese,
            },
            tagset: lexicon.as_ref().map_or_else(KhmerTagset::default, |l| l.inner.tagset().clone()),
            ..ConlluOptions::default()
        };
        let mut rendered = Vec::new();
        for doc in parse_conllu_with(read_str(conllu, "conllu")?, &opts)? {
            let runs = apply_scheme(&doc, scheme)?;
            rendered.push(match format {
                SeglitFormat::Html => render_html(&doc, &runs, HtmlOptions::default())?,
                SeglitFormat::HtmlClasses => render_html(&doc, &runs, HtmlOptions { css_classes: true })?,
                SeglitFormat::Ansi => render_ansi(&doc, &runs)?,
                SeglitFormat::Spans => render_spans(&doc, &runs)?,
            });
        }
        write_out(out, into_c_string(rendered.join("\n"))?, "out")
    })
}

/// WCAG contrast ratio of two `#RRGGBB` colours.
///
/// # Safety
/// `foreground` and `background` must be NUL-terminated strings; `out`
/// must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn seglit_contrast_ratio(
    foreground: *const c_char,
    background: *const c_char,
    out: *mut f64,
) -> SeglitStatus {
    guard(|| {
        let fg = Rgb::parse(read_str(foreground, "foreground")?)?;
        let bg = Rgb::parse(read_str(background, "background")?)?;
        write_out(out, contrast_ratio(fg, bg), "out")
    })
}

/// Yates-corrected χ² on the 2×2 table `[[a, b], [c, d]]`, rows being
/// conditions and columns correct/incorrect.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn seglit_chi2_yates(a: u64, b: u64, c: u64, d: u64, out: *mut SeglitTestResult) -> SeglitStatus {
    guard(|| {
        let result = chi2_yates(&ContingencyTable2x2::new(a, b, c, d))?;
        write_out(out, result.into(), "out")
    })
}

/// Benjamini–Hochberg q-values for `len` p-values, written to `q_out` in
/// input order.
///
/// # Safety
/// `p_values` must be readable and `q_out` writable for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn seglit_bh_fdr(p_values: *const f64, len: usize, q_out: *mut f64) -> SeglitStatus {
    guard(|| {
        if len == 0 {
            return Ok(());
        }
        if p_values.is_null() {
            return Err(null("p_values"));
        }
        if q_out.is_null() {
            return Err(null("q_out"));
        }
        let q = bh_fdr(std::slice::from_raw_parts(p_values, len))?;
        std::slice::from_raw_parts_mut(q_out, len).copy_from_slice(&q);
        Ok(())
    })
}

/// Paired t test on `len` within-participant differences.
///
/// # Safety
/// `differences` must be readable for `len` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn seglit_paired_t(differences: *const f64, len: usize, out: *mut SeglitTestResult) -> SeglitStatus {
    guard(|| {
        let diffs = if len == 0 {
            &[][..]
        } else if differences.is_null() {
            return Err(null("differences"));
        } else {
            std::slice::from_raw_parts(differences, len)
        };
        write_out(out, paired_t(diffs)?.into(), "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        let p = seglit_last_error();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
    }

    unsafe fn take(s: *mut c_char) -> String {
        let out = CStr::from_ptr(s).to_str().unwrap().to_string();
        seglit_string_free(s);
        out
    }

    #[test]
    fn version_matches_crate() {
        let v = unsafe { CStr::from_ptr(seglit_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn errors_are_reported_per_call() {
        let mut ratio = 0.0;
        let status = unsafe { seglit_contrast_ratio(c("#12").as_ptr(), c("#FFFFFF").as_ptr(), &mut ratio) };
        assert_eq!(status, SeglitStatus::InvalidInput);
        assert!(last_error().contains("#12"));
        let status = unsafe { seglit_contrast_ratio(c("#000000").as_ptr(), c("#FFFFFF").as_ptr(), &mut ratio) };
        assert_eq!(status, SeglitStatus::Ok);
        assert_eq!(ratio, 21.0);
        assert!(seglit_last_error().is_null());
        let status = unsafe { seglit_contrast_ratio(ptr::null(), c("#FFFFFF").as_ptr(), &mut ratio) };
        assert_eq!(status, SeglitStatus::NullPointer);
    }

    #[test]
    fn invalid_utf8_is_rejected() {
        let bad = [0xffu8, 0xfe, 0];
        let mut ratio = 0.0;
        let status = unsafe { seglit_contrast_ratio(bad.as_ptr().cast(), c("#FFFFFF").as_ptr(), &mut ratio) };
        assert_eq!(status, SeglitStatus::InvalidUtf8);
    }

    #[test]
    fn segtag_then_render() {
        unsafe {
            let mut lex = ptr::null_mut();
            let text = c("@tagset n v a 1 o part\nab\tn\t-1\nc\tpart\t-1\n@script 61-7A\n");
            assert_eq!(seglit_lexicon_parse(text.as_ptr(), &mut lex), SeglitStatus::Ok);
            let mut conllu = ptr::null_mut();
            assert_eq!(seglit_segtag(lex, c("d1").as_ptr(), c("abc").as_ptr(), &mut conllu), SeglitStatus::Ok);
            let conllu = take(conllu);
            assert!(conllu.contains("1\tab\t_\tn"));
            assert!(conllu.contains("2\tc\t_\tpart"));

            let mut scheme = ptr::null_mut();
            assert_eq!(seglit_scheme_builtin(c("khmer-bold").as_ptr(), &mut scheme), SeglitStatus::Ok);
            let mut html = ptr::null_mut();
            let status = seglit_render(scheme, lex, c(&conllu).as_ptr(), SeglitFormat::Html, &mut html);
            assert_eq!(status, SeglitStatus::Ok, "{}", last_error());
            assert_eq!(take(html), r#"<span style="font-weight:bold">ab</span>c"#);
            let mut spans = ptr::null_mut();
            assert_eq!(seglit_render(scheme, lex, c(&conllu).as_ptr(), SeglitFormat::Spans, &mut spans), SeglitStatus::Ok);
            assert!(take(spans).starts_with(r#"[{"start":0,"end":2,"weight":"bold""#));

            // Khmer tags do not fit a UD scheme.
            let mut ja = ptr::null_mut();
            assert_eq!(seglit_scheme_builtin(c("ja-color").as_ptr(), &mut ja), SeglitStatus::Ok);
            let mut out = ptr::null_mut();
            let status = seglit_render(ja, ptr::null(), c(&conllu).as_ptr(), SeglitFormat::Ansi, &mut out);
            assert_eq!(status, SeglitStatus::InvalidInput);
            assert!(!last_error().is_empty());

            seglit_scheme_free(ja);
            seglit_scheme_free(scheme);
            seglit_lexicon_free(lex);
        }
    }

    #[test]
    fn unknown_scheme_and_bad_json() {
        let mut scheme = ptr::null_mut();
        unsafe {
            assert_eq!(seglit_scheme_builtin(c("nope").as_ptr(), &mut scheme), SeglitStatus::InvalidInput);
            assert!(scheme.is_null());
            assert_eq!(seglit_scheme_from_json(c("{").as_ptr(), &mut scheme), SeglitStatus::InvalidInput);
            let json = c(r##"{"name": "x", "rules": {"entity": {"color": "#1976D2"}}}"##);
            assert_eq!(seglit_scheme_from_json(json.as_ptr(), &mut scheme), SeglitStatus::Ok);
            seglit_scheme_free(scheme);
        }
    }

    #[test]
    fn statistics() {
        let mut r = SeglitTestResult {
            statistic: 0.0,
            df: 0.0,
            p: 0.0,
            effect: 0.0,
            flags: 0,
        };
        unsafe {
            assert_eq!(seglit_chi2_yates(170, 45, 152, 63, &mut r), SeglitStatus::Ok);
        }
        assert!((r.statistic - 3.57).abs() < 0.01);
        assert!((r.p - 0.059).abs() < 0.001);
        assert_eq!(r.df, 1.0);

        let p = [0.03, 0.01, 0.01];
        let mut q = [0.0; 3];
        unsafe {
            assert_eq!(seglit_bh_fdr(p.as_ptr(), 3, q.as_mut_ptr()), SeglitStatus::Ok);
        }
        assert!((q[0] - 0.03).abs() < 1e-12 && (q[1] - 0.015).abs() < 1e-12);
        let bad = [1.5];
        unsafe {
            assert_eq!(seglit_bh_fdr(bad.as_ptr(), 1, q.as_mut_ptr()), SeglitStatus::InvalidInput);
        }

        let diffs = [1.0, 2.0, 3.0, 4.0];
        unsafe {
            assert_eq!(seglit_paired_t(diffs.as_ptr(), 4, &mut r), SeglitStatus::Ok);
            assert_eq!(r.df, 3.0);
            assert!((r.effect - 2.5).abs() < 1e-12);
            assert_eq!(seglit_paired_t(diffs.as_ptr(), 1, &mut r), SeglitStatus::InvalidInput);
        }
    }
}
