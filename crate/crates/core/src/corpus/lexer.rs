//! Lightweight lexer for C-family / Java-like source.
//!
//! The lexer is whitespace- and comment-preserving: concatenating the `text`
//! fields of the output reproduces the input byte-for-byte. Comments and
//! string/char literals are single tokens, so downstream brace matching and
//! masking never have to worry about braces inside literals.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punctuation,
    Comment,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// 1-based line of the token's first character.
    pub line: u32,
    /// 0-based byte offset within that line.
    pub col: u32,
    /// Identifier immediately followed by `(`, ignoring whitespace.
    pub call_candidate: bool,
}

impl Token {
    /// Non-whitespace, non-comment tokens are "code" for masking and
    /// similarity purposes.
    pub fn is_code(&self) -> bool {
        !matches!(self.kind, TokenKind::Whitespace | TokenKind::Comment)
    }
}

/// Reserved words of Java plus the C subset the lexer also serves.
/// Sorted for binary search.
const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "auto",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "extern",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "inline",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "strictfp",
    "struct",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
];

/// `true`, `false` and `null` lex as literals, not keywords.
const WORD_LITERALS: &[&str] = &["NULL", "false", "null", "true"];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

const MULTI_CHAR_OPERATORS: &[&str] = &[
    ">>>=", ">>=", "<<=", ">>>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "->", "::", "<<", ">>",
];

fn is_single_operator(c: char) -> bool {
    matches!(
        c,
        '+' | '-' | '*' | '/' | '%' | '=' | '<' | '>' | '!' | '&' | '|' | '^' | '~' | '?' | ':'
    )
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

#[derive(Debug, Clone)]
pub struct LexOutput {
    pub tokens: Vec<Token>,
    /// Set when a string, char, or block comment ran off the end of the
    /// input; the remainder was emitted as a single token.
    pub unterminated: bool,
}

/// Tokenize, discarding the unterminated flag.
pub fn tokenize(source: &str) -> Vec<Token> {
    lex(source).tokens
}

pub fn lex(source: &str) -> LexOutput {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut unterminated = false;
    let mut pos = 0usize;
    let mut line: u32 = 1;
    let mut col: u32 = 0;

    let push = |tokens: &mut Vec<Token>, text: &str, kind: TokenKind, line: u32, col: u32| {
        tokens.push(Token {
            text: text.to_string(),
            kind,
            line,
            col,
            call_candidate: false,
        });
    };

    while pos < bytes.len() {
        let start = pos;
        let (start_line, start_col) = (line, col);
        let c = source[pos..].chars().next().unwrap();

        if c == '\n' {
            pos += 1;
            push(&mut tokens, "\n", TokenKind::Whitespace, start_line, start_col);
            line += 1;
            col = 0;
            continue;
        }

        if c.is_whitespace() {
            while pos < bytes.len() {
                let ch = source[pos..].chars().next().unwrap();
                if ch == '\n' || !ch.is_whitespace() {
                    break;
                }
                pos += ch.len_utf8();
            }
            col += (pos - start) as u32;
            push(&mut tokens, &source[start..pos], TokenKind::Whitespace, start_line, start_col);
            continue;
        }

        if source[pos..].starts_with("//") {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            col += (pos - start) as u32;
            push(&mut tokens, &source[start..pos], TokenKind::Comment, start_line, start_col);
            continue;
        }

        if source[pos..].starts_with("/*") {
            let close = source[pos + 2..].find("*/");
            match close {
                Some(rel) => pos = pos + 2 + rel + 2,
                None => {
                    pos = bytes.len();
                    unterminated = true;
                }
            }
            let text = &source[start..pos];
            let newlines = text.matches('\n').count() as u32;
            push(&mut tokens, text, TokenKind::Comment, start_line, start_col);
            if newlines > 0 {
                line += newlines;
                col = (text.len() - text.rfind('\n').unwrap() - 1) as u32;
            } else {
                col += text.len() as u32;
            }
            continue;
        }

        if c == '"' || c == '\'' {
            let quote = c;
            pos += 1;
            let mut closed = false;
            while pos < bytes.len() {
                let ch = source[pos..].chars().next().unwrap();
                pos += ch.len_utf8();
                if ch == '\\' && pos < bytes.len() {
                    pos += source[pos..].chars().next().unwrap().len_utf8();
                } else if ch == quote {
                    closed = true;
                    break;
                }
            }
            if !closed {
                unterminated = true;
            }
            let text = &source[start..pos];
            let newlines = text.matches('\n').count() as u32;
            push(&mut tokens, text, TokenKind::Literal, start_line, start_col);
            if newlines > 0 {
                line += newlines;
                col = (text.len() - text.rfind('\n').unwrap() - 1) as u32;
            } else {
                col += text.len() as u32;
            }
            continue;
        }

        if c.is_ascii_digit() {
            let mut prev = c;
            pos += 1;
            while pos < bytes.len() {
                let ch = source[pos..].chars().next().unwrap();
                let exponent_sign =
                    (ch == '+' || ch == '-') && matches!(prev, 'e' | 'E' | 'p' | 'P');
                if ch.is_ascii_alphanumeric() || ch == '.' || ch == '_' || exponent_sign {
                    prev = ch;
                    pos += ch.len_utf8();
                } else {
                    break;
                }
            }
            col += (pos - start) as u32;
            push(&mut tokens, &source[start..pos], TokenKind::Literal, start_line, start_col);
            continue;
        }

        if is_ident_start(c) {
            pos += c.len_utf8();
            while pos < bytes.len() {
                let ch = source[pos..].chars().next().unwrap();
                if is_ident_continue(ch) {
                    pos += ch.len_utf8();
                } else {
                    break;
                }
            }
            let text = &source[start..pos];
            let kind = if WORD_LITERALS.contains(&text) {
                TokenKind::Literal
            } else if is_keyword(text) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            col += (pos - start) as u32;
            push(&mut tokens, text, kind, start_line, start_col);
            continue;
        }

        if let Some(op) = MULTI_CHAR_OPERATORS
            .iter()
            .find(|op| source[pos..].starts_with(**op))
        {
            pos += op.len();
            col += op.len() as u32;
            push(&mut tokens, op, TokenKind::Operator, start_line, start_col);
            continue;
        }

        if is_single_operator(c) {
            pos += 1;
            col += 1;
            push(&mut tokens, &source[start..pos], TokenKind::Operator, start_line, start_col);
            continue;
        }

        // Anything left (punctuation like `(){}[];,.@#` or a stray byte)
        // becomes a one-char punctuation token so the stream stays total
        // and roundtrips.
        pos += c.len_utf8();
        col += c.len_utf8() as u32;
        push(&mut tokens, &source[start..pos], TokenKind::Punctuation, start_line, start_col);
    }

    mark_call_candidates(&mut tokens);
    LexOutput {
        tokens,
        unterminated,
    }
}

fn mark_call_candidates(tokens: &mut [Token]) {
    for i in 0..tokens.len() {
        if tokens[i].kind != TokenKind::Identifier {
            continue;
        }
        let mut j = i + 1;
        while j < tokens.len() && tokens[j].kind == TokenKind::Whitespace {
            j += 1;
        }
        if j < tokens.len() && tokens[j].text == "(" {
            tokens[i].call_candidate = true;
        }
    }
}

/// Shift token line numbers by `offset` lines (for tokens lexed from a slice
/// of a larger file).
pub(crate) fn offset_lines(tokens: &mut [Token], offset: u32) {
    for tok in tokens {
        tok.line += offset;
    }
}
