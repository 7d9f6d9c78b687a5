//! Repair templates: rules that turn a buggy line into a masked input with
//! exactly one `<SPAN>`, and the inverse splice that rebuilds the patched
//! line(s) from a generated fill.
//!
//! Three families:
//! - complete: replace the whole line, or insert a new line before/after it
//! - partial: keep a token prefix or suffix, mask the rest
//! - template: mask a method call name, a call's arguments, or a boolean
//!   expression/operator

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Token, TokenKind};
use crate::{Error, Result};

pub const SPAN_MARKER: &str = "<SPAN>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateFamily {
    Complete,
    Partial,
    Template,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoolMode {
    /// Mask the whole boolean expression (an `if`/`while` condition or the
    /// operand before `?`).
    Expr,
    /// Mask just the comparison/logical operator token.
    Op,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateVariant {
    ReplaceLine,
    InsertBefore,
    InsertAfter,
    /// Keep the first `n` code tokens, mask the rest.
    KeepPrefix(usize),
    /// Keep the last `n` code tokens, mask the rest.
    KeepSuffix(usize),
    /// Mask the callee name of the k-th call site (left to right).
    MethodName(usize),
    /// Mask everything between the k-th call's outermost parentheses.
    MethodArgs(usize),
    /// Mask a boolean expression or operator; ordinal is per sub-mode.
    BoolExprOrOp(BoolMode, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RepairTemplate {
    pub family: TemplateFamily,
    pub variant: TemplateVariant,
    /// Stable id, e.g. `template/method_name#0`; appears verbatim in dataset
    /// records and patch reports.
    pub id: String,
}

impl RepairTemplate {
    pub(crate) fn new(family: TemplateFamily, variant: TemplateVariant) -> Self {
        let id = match variant {
            TemplateVariant::ReplaceLine => "complete/replace_line".to_string(),
            TemplateVariant::InsertBefore => "complete/insert_before".to_string(),
            TemplateVariant::InsertAfter => "complete/insert_after".to_string(),
            TemplateVariant::KeepPrefix(p) => format!("partial/keep_prefix#{p}"),
            TemplateVariant::KeepSuffix(s) => format!("partial/keep_suffix#{s}"),
            TemplateVariant::MethodName(k) => format!("template/method_name#{k}"),
            TemplateVariant::MethodArgs(k) => format!("template/method_args#{k}"),
            TemplateVariant::BoolExprOrOp(BoolMode::Expr, k) => {
                format!("template/bool_expr_or_op#expr{k}")
            }
            TemplateVariant::BoolExprOrOp(BoolMode::Op, k) => {
                format!("template/bool_expr_or_op#op{k}")
            }
        };
        RepairTemplate { family, variant, id }
    }

    /// Insert templates add a line instead of masking part of one, so they
    /// have no training target.
    pub fn is_insert(&self) -> bool {
        matches!(
            self.variant,
            TemplateVariant::InsertBefore | TemplateVariant::InsertAfter
        )
    }
}

/// One analyzed source line: raw text plus its code tokens with line-relative
/// byte columns.
#[derive(Debug, Clone)]
pub struct LineShape {
    pub line_no: u32,
    pub text: String,
    pub leading_ws: String,
    pub trailing_ws: String,
    /// Code tokens only (no whitespace/comments); `col` is the byte offset
    /// in `text`.
    pub code: Vec<Token>,
}

impl LineShape {
    pub fn from_text(line_no: u32, text: &str) -> Self {
        let code: Vec<Token> = tokenize(text).into_iter().filter(Token::is_code).collect();
        let (leading_ws, trailing_ws) = if code.is_empty() {
            (text.to_string(), String::new())
        } else {
            let first = code.first().unwrap().col as usize;
            let last = code.last().unwrap();
            let end = last.col as usize + last.text.len();
            (text[..first].to_string(), text[end..].to_string())
        };
        LineShape {
            line_no,
            text: text.to_string(),
            leading_ws,
            trailing_ws,
            code,
        }
    }

    /// Byte range in `text` covered by code tokens `range` (empty ranges
    /// collapse to the insertion point).
    fn byte_range(&self, range: &Range<usize>) -> Range<usize> {
        if range.is_empty() {
            let at = if range.start < self.code.len() {
                self.code[range.start].col as usize
            } else {
                self.code
                    .last()
                    .map(|t| t.col as usize + t.text.len())
                    .unwrap_or(0)
            };
            return at..at;
        }
        let first = self.code[range.start].col as usize;
        let last = &self.code[range.end - 1];
        first..(last.col as usize + last.text.len())
    }

    fn code_texts(&self) -> Vec<String> {
        self.code.iter().map(|t| t.text.clone()).collect()
    }
}

/// A call site on a line: callee token index and its paren token indices.
#[derive(Debug, Clone, Copy)]
struct CallSite {
    callee: usize,
    open: usize,
    close: usize,
}

fn call_sites(line: &LineShape) -> Vec<CallSite> {
    let mut sites = Vec::new();
    for (i, tok) in line.code.iter().enumerate() {
        if !(tok.kind == TokenKind::Identifier && tok.call_candidate) {
            continue;
        }
        let open = i + 1;
        if open >= line.code.len() || line.code[open].text != "(" {
            continue;
        }
        let mut depth = 0i32;
        let mut close = None;
        for (j, t) in line.code.iter().enumerate().skip(open) {
            match t.text.as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(j);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(close) = close {
            sites.push(CallSite { callee: i, open, close });
        }
    }
    sites
}

const BOOL_OPERATORS: &[&str] = &["==", "!=", "<", ">", "<=", ">=", "&&", "||", "!"];

fn bool_operator_indices(line: &LineShape) -> Vec<usize> {
    line.code
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == TokenKind::Operator && BOOL_OPERATORS.contains(&t.text.as_str()))
        .map(|(i, _)| i)
        .collect()
}

/// Condition expression ranges: the inside of `if (...)` / `while (...)`
/// parens, and the operand before a top-level ternary `?`.
fn condition_ranges(line: &LineShape) -> Vec<Range<usize>> {
    let mut ranges = Vec::new();
    for (i, tok) in line.code.iter().enumerate() {
        if tok.kind == TokenKind::Keyword && (tok.text == "if" || tok.text == "while") {
            let open = i + 1;
            if open < line.code.len() && line.code[open].text == "(" {
                let mut depth = 0i32;
                for (j, t) in line.code.iter().enumerate().skip(open) {
                    match t.text.as_str() {
                        "(" => depth += 1,
                        ")" => {
                            depth -= 1;
                            if depth == 0 {
                                if j > open + 1 {
                                    ranges.push(open + 1..j);
                                }
                                break;
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    // Ternary: walk back from a depth-0 `?` to the start of its operand.
    let mut depth = 0i32;
    for (i, tok) in line.code.iter().enumerate() {
        match tok.text.as_str() {
            "(" | "[" => depth += 1,
            ")" | "]" => depth -= 1,
            "?" if depth == 0 && tok.kind == TokenKind::Operator => {
                let mut start = i;
                while start > 0 {
                    let prev = &line.code[start - 1];
                    let boundary = matches!(prev.text.as_str(), "=" | "(" | "," | ";" | "{")
                        || (prev.kind == TokenKind::Keyword && prev.text == "return");
                    if boundary {
                        break;
                    }
                    start -= 1;
                }
                if start < i {
                    ranges.push(start..i);
                }
            }
            _ => {}
        }
    }
    ranges.sort_by_key(|r| (r.start, r.end));
    ranges.dedup();
    ranges
}

/// Cap for partial-mask cut points, per side, nearest the line ends.
const PARTIAL_CUTS_PER_SIDE: usize = 10;

/// All templates applicable to `line`. The complete family is always
/// applicable; the others depend on the line's token shape.
pub fn enumerate_applicable(line: &LineShape) -> Vec<RepairTemplate> {
    let mut out = Vec::new();
    if line.code.is_empty() {
        return out;
    }
    out.push(RepairTemplate::new(TemplateFamily::Complete, TemplateVariant::ReplaceLine));
    out.push(RepairTemplate::new(TemplateFamily::Complete, TemplateVariant::InsertBefore));
    out.push(RepairTemplate::new(TemplateFamily::Complete, TemplateVariant::InsertAfter));

    let len = line.code.len();
    if len >= 2 {
        let cuts = PARTIAL_CUTS_PER_SIDE.min(len - 1);
        for p in 1..=cuts {
            out.push(RepairTemplate::new(TemplateFamily::Partial, TemplateVariant::KeepPrefix(p)));
        }
        for s in 1..=cuts {
            out.push(RepairTemplate::new(TemplateFamily::Partial, TemplateVariant::KeepSuffix(s)));
        }
    }

    for (k, _) in call_sites(line).iter().enumerate() {
        out.push(RepairTemplate::new(TemplateFamily::Template, TemplateVariant::MethodName(k)));
        out.push(RepairTemplate::new(TemplateFamily::Template, TemplateVariant::MethodArgs(k)));
    }

    for (k, _) in condition_ranges(line).iter().enumerate() {
        out.push(RepairTemplate::new(
            TemplateFamily::Template,
            TemplateVariant::BoolExprOrOp(BoolMode::Expr, k),
        ));
    }
    for (k, _) in bool_operator_indices(line).iter().enumerate() {
        out.push(RepairTemplate::new(
            TemplateFamily::Template,
            TemplateVariant::BoolExprOrOp(BoolMode::Op, k),
        ));
    }
    out
}

/// Code-token index range masked by `template` on `line`; `None` for insert
/// templates (they mask nothing).
pub fn masked_code_range(template: &RepairTemplate, line: &LineShape) -> Result<Option<Range<usize>>> {
    let len = line.code.len();
    let inapplicable = |reason: &str| Error::Template {
        variant: template.id.clone(),
        reason: reason.to_string(),
    };
    let range = match template.variant {
        TemplateVariant::ReplaceLine => {
            if len == 0 {
                return Err(inapplicable("empty line"));
            }
            0..len
        }
        TemplateVariant::InsertBefore | TemplateVariant::InsertAfter => return Ok(None),
        TemplateVariant::KeepPrefix(p) => {
            if p == 0 || p >= len {
                return Err(inapplicable("cut point outside the line"));
            }
            p..len
        }
        TemplateVariant::KeepSuffix(s) => {
            if s == 0 || s >= len {
                return Err(inapplicable("cut point outside the line"));
            }
            0..len - s
        }
        TemplateVariant::MethodName(k) => {
            let sites = call_sites(line);
            let site = sites.get(k).ok_or_else(|| inapplicable("no such call site"))?;
            site.callee..site.callee + 1
        }
        TemplateVariant::MethodArgs(k) => {
            let sites = call_sites(line);
            let site = sites.get(k).ok_or_else(|| inapplicable("no such call site"))?;
            site.open + 1..site.close
        }
        TemplateVariant::BoolExprOrOp(BoolMode::Expr, k) => condition_ranges(line)
            .get(k)
            .cloned()
            .ok_or_else(|| inapplicable("no such condition"))?,
        TemplateVariant::BoolExprOrOp(BoolMode::Op, k) => {
            let ops = bool_operator_indices(line);
            let op = *ops.get(k).ok_or_else(|| inapplicable("no such operator"))?;
            op..op + 1
        }
    };
    Ok(Some(range))
}

/// One model input: window-limited context around a line holding exactly one
/// `<SPAN>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedRepairInput {
    pub template_id: String,
    pub context_before: Vec<String>,
    pub context_after: Vec<String>,
    pub masked_line: Vec<String>,
    pub buggy_line_no: u32,
}

impl MaskedRepairInput {
    pub fn total_tokens(&self) -> usize {
        self.context_before.len() + self.masked_line.len() + self.context_after.len()
    }

    /// Display form of the masked line.
    pub fn masked_line_text(&self) -> String {
        render_tokens(&self.masked_line)
    }
}

/// Build the masked input for `template` over `line`, with symmetric context
/// truncation to `context_limit` total tokens.
///
/// `before` and `after` are the code-token texts of the file surrounding the
/// line: `before` ends at the token just above the line, `after` starts just
/// below it.
pub fn apply(
    template: &RepairTemplate,
    line: &LineShape,
    before: &[String],
    after: &[String],
    context_limit: usize,
) -> Result<MaskedRepairInput> {
    let range = masked_code_range(template, line)?;
    let code = line.code_texts();
    let (masked_line, line_before, line_after): (Vec<String>, Vec<String>, Vec<String>) =
        match (&template.variant, range) {
            (TemplateVariant::InsertBefore, _) => {
                (vec![SPAN_MARKER.to_string()], Vec::new(), code)
            }
            (TemplateVariant::InsertAfter, _) => {
                (vec![SPAN_MARKER.to_string()], code, Vec::new())
            }
            (_, Some(range)) => {
                let mut masked: Vec<String> = Vec::with_capacity(code.len() + 1);
                masked.extend_from_slice(&code[..range.start]);
                masked.push(SPAN_MARKER.to_string());
                masked.extend_from_slice(&code[range.end..]);
                (masked, Vec::new(), Vec::new())
            }
            (_, None) => unreachable!("only insert templates lack a masked range"),
        };

    if masked_line.len() > context_limit {
        return Err(Error::ContextOverflow {
            limit: context_limit,
            actual: masked_line.len(),
        });
    }

    // Symmetric window: grow one token at a time on alternating sides.
    let budget = context_limit - masked_line.len();
    let mut before_all: Vec<&String> = before.iter().collect();
    before_all.extend(line_before.iter());
    let mut after_all: Vec<&String> = line_after.iter().collect();
    after_all.extend(after.iter());
    let mut take_before = 0usize;
    let mut take_after = 0usize;
    let mut side_before = true;
    while take_before + take_after < budget {
        let can_before = take_before < before_all.len();
        let can_after = take_after < after_all.len();
        match (side_before, can_before, can_after) {
            (true, true, _) => take_before += 1,
            (false, _, true) => take_after += 1,
            (true, false, true) => take_after += 1,
            (false, true, false) => take_before += 1,
            _ => break,
        }
        side_before = !side_before;
    }
    let context_before: Vec<String> = before_all[before_all.len() - take_before..]
        .iter()
        .map(|s| (*s).clone())
        .collect();
    let context_after: Vec<String> = after_all[..take_after].iter().map(|s| (*s).clone()).collect();

    Ok(MaskedRepairInput {
        template_id: template.id.clone(),
        context_before,
        context_after,
        masked_line,
        buggy_line_no: line.line_no,
    })
}

/// The training-side target for `template` on `line`: the original bytes of
/// the masked region. `None` for insert templates and empty regions.
pub fn training_target(template: &RepairTemplate, line: &LineShape) -> Result<Option<String>> {
    match masked_code_range(template, line)? {
        None => Ok(None),
        Some(range) if range.is_empty() => Ok(None),
        Some(range) => {
            let bytes = line.byte_range(&range);
            Ok(Some(line.text[bytes].to_string()))
        }
    }
}

/// Rebuild the patched line(s) from a span fill. Inverse of `apply`:
/// splicing the training target reproduces the original line byte-exactly.
/// Insert templates return two lines (the new line takes the buggy line's
/// indentation).
pub fn splice(template: &RepairTemplate, line: &LineShape, fill: &str) -> Result<Vec<String>> {
    match template.variant {
        TemplateVariant::InsertBefore => Ok(vec![
            format!("{}{}", line.leading_ws, fill),
            line.text.clone(),
        ]),
        TemplateVariant::InsertAfter => Ok(vec![
            line.text.clone(),
            format!("{}{}", line.leading_ws, fill),
        ]),
        _ => {
            let range = masked_code_range(template, line)?
                .expect("non-insert templates always mask a range");
            let bytes = line.byte_range(&range);
            let mut out = String::with_capacity(line.text.len() + fill.len());
            out.push_str(&line.text[..bytes.start]);
            out.push_str(fill);
            out.push_str(&line.text[bytes.end..]);
            Ok(vec![out])
        }
    }
}

/// Join code tokens into display text with conventional spacing (no space
/// before `;,)]`, none around `.`, call-style parens, space after `,`).
pub fn render_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for tok in tokens {
        let t = tok.as_ref();
        if let Some(p) = prev {
            if needs_space(p, t) {
                out.push(' ');
            }
        }
        out.push_str(t);
        prev = Some(t);
    }
    out
}

fn needs_space(prev: &str, next: &str) -> bool {
    const NO_SPACE_AFTER: &[&str] = &["(", "[", ".", "!", "~", "@", "#", "::"];
    const NO_SPACE_BEFORE: &[&str] = &[")", "]", ";", ",", ".", "++", "--", "::"];
    if NO_SPACE_AFTER.contains(&prev) || NO_SPACE_BEFORE.contains(&next) {
        return false;
    }
    // Call-style parens and array indexing: identifier-like token directly
    // followed by `(` or `[`.
    if next == "(" || next == "[" {
        let keyword_like = crate::corpus::lexer::is_keyword(prev);
        let ident_like = prev
            .chars()
            .next()
            .map(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$' || c == '<')
            .unwrap_or(false);
        if (ident_like && !keyword_like) || prev == ")" || prev == "]" {
            return false;
        }
    }
    true
}
