//! Best-effort repair of almost-JSON.
//!
//! Six rules run in a fixed order, each to a fixpoint: strip-wrapper,
//! single-quotes, bare-keys, trailing-commas, balance-brackets,
//! drop-truncated. Input that already parses as JSON is returned
//! byte-identical with an empty log, and repairing a repaired string
//! changes nothing, so the pass is safe to apply blindly. The last two
//! rules keep their edit only when the result parses as a valid
//! report, which lets truncation recovery prefer the cut that saves
//! the most data: close the open containers if possible, otherwise
//! drop the partial trailing element, otherwise drop enclosing
//! elements until something parses.

use std::fmt;

use serde_json::Value;

use super::parse_strict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepairRule {
    StripWrapper,
    SingleQuotes,
    BareKeys,
    TrailingCommas,
    BalanceBrackets,
    DropTruncated,
}

impl RepairRule {
    pub fn as_str(self) -> &'static str {
        match self {
            RepairRule::StripWrapper => "strip-wrapper",
            RepairRule::SingleQuotes => "single-quotes",
            RepairRule::BareKeys => "bare-keys",
            RepairRule::TrailingCommas => "trailing-commas",
            RepairRule::BalanceBrackets => "balance-brackets",
            RepairRule::DropTruncated => "drop-truncated",
        }
    }
}

impl fmt::Display for RepairRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which rules changed the text, in application order, plus the byte
/// lengths before and after.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RepairLog {
    pub applied: Vec<RepairRule>,
    pub original_length: usize,
    pub repaired_length: usize,
}

impl RepairLog {
    pub fn is_clean(&self) -> bool {
        self.applied.is_empty()
    }
}

/// Repairs `input` toward parseable report JSON. Valid JSON passes
/// through untouched. The result is not guaranteed to parse — some
/// inputs are beyond saving — but repairing it again is a no-op.
pub fn repair(input: &str) -> (String, RepairLog) {
    let mut log = RepairLog {
        applied: Vec::new(),
        original_length: input.len(),
        repaired_length: input.len(),
    };
    if serde_json::from_str::<Value>(input).is_ok() {
        return (input.to_string(), log);
    }

    const RULES: [(RepairRule, fn(&str) -> Option<String>); 6] = [
        (RepairRule::StripWrapper, strip_wrapper),
        (RepairRule::SingleQuotes, single_quotes),
        (RepairRule::BareKeys, bare_keys),
        (RepairRule::TrailingCommas, trailing_commas),
        (RepairRule::BalanceBrackets, balance_brackets),
        (RepairRule::DropTruncated, drop_truncated),
    ];

    let mut text = input.to_string();
    for (rule, apply) in RULES {
        let mut changed = false;
        // Every rule converges in one or two passes; the bound is a
        // belt against a rule that oscillates on some unforeseen input.
        for _ in 0..64 {
            match apply(&text) {
                Some(next) if next != text => {
                    text = next;
                    changed = true;
                }
                _ => break,
            }
        }
        if changed {
            log.applied.push(rule);
        }
    }
    log.repaired_length = text.len();
    (text, log)
}

/// Rule 1: peel off markdown fences and surrounding prose, keeping the
/// outermost `{...}` span (or everything from the first `{` when the
/// closing brace was truncated away).
fn strip_wrapper(s: &str) -> Option<String> {
    let trimmed = s.trim_start();
    if trimmed.starts_with("```") {
        let mut body = &trimmed[3..];
        match body.find('\n') {
            Some(p) => body = &body[p + 1..],
            None => body = body.trim_start_matches(|c: char| c.is_ascii_alphabetic()),
        }
        if let Some(p) = body.rfind("```") {
            body = &body[..p];
        }
        return Some(body.trim().to_string());
    }
    let start = s.find('{')?;
    let mut end = s.len();
    if let Some(close) = s.rfind('}') {
        // Cut a suffix only when it reads as prose; structural
        // characters after the last brace mean the document itself
        // runs past it (for example a truncated list), and cutting
        // there would amputate real content.
        let tail = &s[close + 1..];
        if close >= start && !tail.contains(['{', '}', '[', ']', '"', ':', ',']) {
            end = close + 1;
        }
    }
    let slice = &s[start..end];
    (slice.len() != s.len()).then(|| slice.to_string())
}

/// Byte offset just past the closing quote of the double-quoted string
/// starting at `s[0]`, or `s.len()` when the string never closes.
fn double_string_end(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'"' => return i + 1,
            _ => i += 1,
        }
    }
    s.len()
}

/// Rule 2: convert single-quoted strings to double-quoted ones,
/// honoring `\'` escapes and escaping any embedded `"`. Content inside
/// double-quoted strings (apostrophes included) is left alone.
fn single_quotes(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    let mut changed = false;
    loop {
        let Some(pos) = rest.find(['"', '\'']) else {
            out.push_str(rest);
            break;
        };
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        if rest.starts_with('"') {
            let end = double_string_end(rest);
            out.push_str(&rest[..end]);
            rest = &rest[end..];
            continue;
        }
        let bytes = rest.as_bytes();
        let mut close = None;
        let mut i = 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'\'' => {
                    close = Some(i);
                    break;
                }
                _ => i += 1,
            }
        }
        let Some(close) = close else {
            // Unterminated; leave the tail for the truncation rules.
            out.push_str(rest);
            break;
        };
        changed = true;
        out.push('"');
        out.push_str(&rest[1..close].replace("\\'", "'").replace('"', "\\\""));
        out.push('"');
        rest = &rest[close + 1..];
    }
    changed.then_some(out)
}

/// Rule 3: double-quote bare identifiers used as object keys
/// (`{positives: []}`). An identifier counts as a key when the next
/// non-space character is a colon.
fn bare_keys(s: &str) -> Option<String> {
    let b = s.as_bytes();
    let mut out = String::with_capacity(s.len() + 16);
    let mut i = 0;
    let mut changed = false;
    while i < b.len() {
        match b[i] {
            b'"' => {
                let end = i + double_string_end(&s[i..]);
                out.push_str(&s[i..end]);
                i = end;
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < b.len() && (b[j] == b'_' || b[j].is_ascii_alphanumeric()) {
                    j += 1;
                }
                let mut k = j;
                while k < b.len() && b[k].is_ascii_whitespace() {
                    k += 1;
                }
                if k < b.len() && b[k] == b':' {
                    changed = true;
                    out.push('"');
                    out.push_str(&s[i..j]);
                    out.push('"');
                } else {
                    out.push_str(&s[i..j]);
                }
                i = j;
            }
            _ => {
                let mut j = i + 1;
                while j < b.len()
                    && b[j] != b'"'
                    && b[j] != b'_'
                    && !b[j].is_ascii_alphabetic()
                {
                    j += 1;
                }
                out.push_str(&s[i..j]);
                i = j;
            }
        }
    }
    changed.then_some(out)
}

/// Rule 4: drop commas that directly precede a closing bracket or
/// brace.
fn trailing_commas(s: &str) -> Option<String> {
    let b = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    let mut changed = false;
    while i < b.len() {
        match b[i] {
            b'"' => {
                let end = i + double_string_end(&s[i..]);
                out.push_str(&s[i..end]);
                i = end;
            }
            b',' => {
                let mut k = i + 1;
                while k < b.len() && b[k].is_ascii_whitespace() {
                    k += 1;
                }
                if k < b.len() && (b[k] == b'}' || b[k] == b']') {
                    changed = true;
                } else {
                    out.push(',');
                }
                i += 1;
            }
            _ => {
                let mut j = i + 1;
                while j < b.len() && b[j] != b'"' && b[j] != b',' {
                    j += 1;
                }
                out.push_str(&s[i..j]);
                i = j;
            }
        }
    }
    changed.then_some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    WantKeyOrEnd,
    WantKey,
    WantColon,
    WantValue,
    AfterPair,
    WantElemOrEnd,
    WantElem,
    AfterElem,
}

impl Phase {
    /// A frame in a boundary phase can be closed right here without
    /// losing a partial element.
    fn at_boundary(self) -> bool {
        matches!(
            self,
            Phase::WantKeyOrEnd | Phase::AfterPair | Phase::WantElemOrEnd | Phase::AfterElem
        )
    }
}

struct Frame {
    object: bool,
    phase: Phase,
    /// Offset just past the opener or the last completed element; the
    /// safe place to cut this container.
    last_good: usize,
}

enum ScanEnd {
    /// Root value complete; nothing but whitespace follows.
    Complete,
    /// Root value complete at byte `end`, then junk.
    Trailing { end: usize },
    /// EOF inside open containers. `mid_scalar` flags an unquoted
    /// literal touching EOF (possibly cut short, possibly whole).
    Truncated { mid_scalar: bool },
    /// A bare scalar or string at root touches EOF, or the text is
    /// empty.
    RootPartial,
    /// Grammar violation mid-document; repair by truncation cannot
    /// help.
    Abort,
}

struct Scan {
    stack: Vec<Frame>,
    end: ScanEnd,
}

/// Index just past the closing quote of the string opening at
/// `b[start]`, or `None` when it never closes (escapes honored).
fn string_end(b: &[u8], start: usize) -> Option<usize> {
    let mut i = start + 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'"' => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

fn complete_value(stack: &mut [Frame], root_done: &mut Option<usize>, pos: usize) -> bool {
    match stack.last_mut() {
        None => {
            *root_done = Some(pos);
            true
        }
        Some(frame) => match frame.phase {
            Phase::WantValue => {
                frame.phase = Phase::AfterPair;
                frame.last_good = pos;
                true
            }
            Phase::WantElem | Phase::WantElemOrEnd => {
                frame.phase = Phase::AfterElem;
                frame.last_good = pos;
                true
            }
            _ => false,
        },
    }
}

/// One forward pass of a tolerant JSON reader, tracking enough state
/// to know where the document stands at EOF.
fn scan(s: &str) -> Scan {
    let b = s.as_bytes();
    let mut stack: Vec<Frame> = Vec::new();
    let mut root_done: Option<usize> = None;
    let abort = |stack: Vec<Frame>| Scan { stack, end: ScanEnd::Abort };

    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if let Some(end) = root_done {
            return Scan { stack, end: ScanEnd::Trailing { end } };
        }
        match c {
            b'{' | b'[' => {
                let placed = match stack.last() {
                    None => true,
                    Some(f) => matches!(
                        f.phase,
                        Phase::WantValue | Phase::WantElem | Phase::WantElemOrEnd
                    ),
                };
                if !placed {
                    return abort(stack);
                }
                stack.push(Frame {
                    object: c == b'{',
                    phase: if c == b'{' { Phase::WantKeyOrEnd } else { Phase::WantElemOrEnd },
                    last_good: i + 1,
                });
                i += 1;
            }
            b'}' | b']' => {
                let closes_object = c == b'}';
                let ok = stack.last().is_some_and(|f| {
                    f.object == closes_object && f.phase.at_boundary()
                });
                if !ok {
                    return abort(stack);
                }
                stack.pop();
                if !complete_value(&mut stack, &mut root_done, i + 1) {
                    return abort(stack);
                }
                i += 1;
            }
            b'"' => {
                let Some(end) = string_end(b, i) else {
                    let end_kind = if stack.is_empty() {
                        ScanEnd::RootPartial
                    } else {
                        ScanEnd::Truncated { mid_scalar: false }
                    };
                    return Scan { stack, end: end_kind };
                };
                match stack.last_mut() {
                    Some(f)
                        if f.object
                            && matches!(f.phase, Phase::WantKeyOrEnd | Phase::WantKey) =>
                    {
                        f.phase = Phase::WantColon;
                    }
                    _ => {
                        if !complete_value(&mut stack, &mut root_done, end) {
                            return abort(stack);
                        }
                    }
                }
                i = end;
            }
            b':' => match stack.last_mut() {
                Some(f) if f.phase == Phase::WantColon => {
                    f.phase = Phase::WantValue;
                    i += 1;
                }
                _ => return abort(stack),
            },
            b',' => match stack.last_mut() {
                Some(f) if f.phase == Phase::AfterPair => {
                    f.phase = Phase::WantKey;
                    i += 1;
                }
                Some(f) if f.phase == Phase::AfterElem => {
                    f.phase = Phase::WantElem;
                    i += 1;
                }
                _ => return abort(stack),
            },
            c if c.is_ascii_alphanumeric() || matches!(c, b'-' | b'+' | b'.') => {
                let mut j = i;
                while j < b.len()
                    && (b[j].is_ascii_alphanumeric() || matches!(b[j], b'-' | b'+' | b'.'))
                {
                    j += 1;
                }
                if j == b.len() {
                    let end_kind = if stack.is_empty() {
                        ScanEnd::RootPartial
                    } else {
                        ScanEnd::Truncated { mid_scalar: true }
                    };
                    return Scan { stack, end: end_kind };
                }
                if !complete_value(&mut stack, &mut root_done, j) {
                    return abort(stack);
                }
                i = j;
            }
            _ => return abort(stack),
        }
    }

    let end = match root_done {
        Some(_) => ScanEnd::Complete,
        None if stack.is_empty() => ScanEnd::RootPartial,
        None => ScanEnd::Truncated { mid_scalar: false },
    };
    Scan { stack, end }
}

/// Text cut at `cut` with closers appended for the outermost `depth`
/// frames.
fn close_at(s: &str, cut: usize, stack: &[Frame], depth: usize) -> String {
    let mut out = s[..cut].trim_end().to_string();
    for frame in stack[..depth].iter().rev() {
        out.push(if frame.object { '}' } else { ']' });
    }
    out
}

/// Rule 5: when the document stops at an element boundary with
/// containers still open, append the missing closers. Kept only when
/// the closed document parses as a valid report.
fn balance_brackets(s: &str) -> Option<String> {
    if serde_json::from_str::<Value>(s).is_ok() {
        return None;
    }
    let scan = scan(s);
    if scan.stack.is_empty()
        || !matches!(scan.end, ScanEnd::Truncated { mid_scalar: false })
        || !scan.stack.last().is_some_and(|f| f.phase.at_boundary())
    {
        return None;
    }
    let out = close_at(s, s.len(), &scan.stack, scan.stack.len());
    parse_strict(&out).is_ok().then_some(out)
}

/// Rule 6: recover from truncation by cutting the text back to a spot
/// where the document can be closed into a valid report. Candidate
/// cuts, most data preserved first: treat a literal touching EOF as
/// complete; drop the partial trailing element of the innermost
/// container; drop that container's partial enclosing element; and so
/// on outward. Junk after a complete root value is cut off. The first
/// candidate that parses as a valid report wins; if none does the text
/// stays as it was.
fn drop_truncated(s: &str) -> Option<String> {
    if serde_json::from_str::<Value>(s).is_ok() {
        return None;
    }
    let scan = scan(s);
    let mut candidates: Vec<String> = Vec::new();
    match scan.end {
        ScanEnd::Trailing { end } => candidates.push(s[..end].to_string()),
        ScanEnd::Truncated { mid_scalar } => {
            if mid_scalar {
                candidates.push(close_at(s, s.len(), &scan.stack, scan.stack.len()));
            }
            for depth in (1..=scan.stack.len()).rev() {
                candidates.push(close_at(s, scan.stack[depth - 1].last_good, &scan.stack, depth));
            }
        }
        _ => return None,
    }
    candidates.into_iter().find(|c| parse_strict(c).is_ok())
}
