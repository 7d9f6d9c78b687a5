//! Function extraction by signature matching plus brace matching.
//!
//! This is deliberately not a grammar: a declaration is recognized as
//! `name ( params ) [throws ...] {`, where the token before the name looks
//! like the tail of a return type or modifier list. Brace matching runs over
//! tokens, so braces inside literals and comments are invisible to it.

use serde::{Deserialize, Serialize};

use super::lexer::{self, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionUnit {
    /// Relative path of the containing file.
    pub file: String,
    /// 1-based inclusive line range. Re-lexing exactly these lines yields
    /// `tokens`.
    pub start_line: u32,
    pub end_line: u32,
    pub tokens: Vec<Token>,
    pub signature_text: String,
    pub name: String,
    /// Line holding the `{` that opens the body.
    pub body_open_line: u32,
}

impl FunctionUnit {
    /// Token texts concatenated; equals the source slice by construction.
    pub fn source_text(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    pub fn contains_line(&self, line: u32) -> bool {
        line >= self.start_line && line <= self.end_line
    }

    pub fn code_tokens(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_code())
    }
}

/// Keywords that may appear in the modifier/return-type prefix of a
/// declaration (covers Java modifiers plus C storage classes and primitives).
const PREFIX_KEYWORDS: &[&str] = &[
    "abstract", "auto", "boolean", "byte", "char", "const", "default", "double", "extern",
    "final", "float", "inline", "int", "long", "native", "private", "protected", "public",
    "register", "restrict", "short", "signed", "static", "strictfp", "struct", "synchronized",
    "transient", "union", "unsigned", "void", "volatile",
];

fn is_prefix_keyword(text: &str) -> bool {
    PREFIX_KEYWORDS.contains(&text)
}

/// Can `tok` directly precede a method name in a declaration?
fn acceptable_before_name(tok: Option<&Token>) -> bool {
    match tok {
        None => true,
        Some(t) => match t.kind {
            TokenKind::Identifier => true,
            TokenKind::Keyword => is_prefix_keyword(&t.text),
            TokenKind::Operator => matches!(t.text.as_str(), ">" | "*" | "&"),
            TokenKind::Punctuation => matches!(t.text.as_str(), "]" | ";" | "}" | "{"),
            _ => false,
        },
    }
}

/// May `tok` belong to the modifier/type prefix while walking back from the
/// method name to the start of the declaration?
fn belongs_to_prefix(tok: &Token) -> bool {
    match tok.kind {
        TokenKind::Identifier => true,
        TokenKind::Keyword => is_prefix_keyword(&tok.text),
        TokenKind::Operator => matches!(tok.text.as_str(), "<" | ">" | "*" | "&" | "?"),
        TokenKind::Punctuation => matches!(tok.text.as_str(), "[" | "]" | "." | "," | "@"),
        _ => false,
    }
}

fn prev_code(tokens: &[Token], from: usize) -> Option<usize> {
    (0..from).rev().find(|&i| tokens[i].is_code())
}

fn next_code(tokens: &[Token], from: usize) -> Option<usize> {
    (from + 1..tokens.len()).find(|&i| tokens[i].is_code())
}

/// Extract all top-level function-like units from `content`.
///
/// Nested constructs (anonymous classes, local lambdas with blocks) stay
/// inside their enclosing unit; scanning resumes after each matched body.
pub fn extract_functions(path: &str, content: &str) -> Vec<FunctionUnit> {
    let tokens = lexer::tokenize(content);
    let lines: Vec<&str> = content.split('\n').collect();
    let mut line_starts = Vec::with_capacity(lines.len());
    let mut acc = 0usize;
    for l in &lines {
        line_starts.push(acc);
        acc += l.len() + 1;
    }
    let abs_offset = |line: u32, col: u32| line_starts[(line - 1) as usize] + col as usize;

    let mut units = Vec::new();
    let mut i = 0usize;
    while i < tokens.len() {
        let tok = &tokens[i];
        if tok.kind != TokenKind::Identifier || !tok.call_candidate {
            i += 1;
            continue;
        }
        let prev = prev_code(&tokens, i);
        if !acceptable_before_name(prev.map(|p| &tokens[p])) {
            i += 1;
            continue;
        }
        // Find the parameter list's closing paren.
        let open_paren = match next_code(&tokens, i) {
            Some(p) if tokens[p].text == "(" => p,
            _ => {
                i += 1;
                continue;
            }
        };
        let close_paren = match match_delim(&tokens, open_paren, "(", ")") {
            Some(c) => c,
            None => {
                i += 1;
                continue;
            }
        };
        // Optional `throws A, B` clause, then the body brace.
        let mut j = close_paren;
        let mut after = next_code(&tokens, j);
        if let Some(a) = after {
            if tokens[a].kind == TokenKind::Keyword && tokens[a].text == "throws" {
                j = a;
                loop {
                    match next_code(&tokens, j) {
                        Some(n)
                            if tokens[n].kind == TokenKind::Identifier
                                || tokens[n].text == "."
                                || tokens[n].text == "," =>
                        {
                            j = n;
                        }
                        other => {
                            after = other;
                            break;
                        }
                    }
                }
            }
        }
        let open_brace = match after {
            Some(b) if tokens[b].text == "{" => b,
            _ => {
                i += 1;
                continue;
            }
        };
        let close_brace = match match_delim(&tokens, open_brace, "{", "}") {
            Some(c) => c,
            None => {
                i += 1;
                continue;
            }
        };

        // Walk back across the modifier/type prefix to the declaration start.
        let mut decl = i;
        let mut back = prev;
        while let Some(p) = back {
            if belongs_to_prefix(&tokens[p]) {
                decl = p;
                back = prev_code(&tokens, p);
            } else {
                break;
            }
        }

        let start_line = tokens[decl].line;
        let end_line = tokens[close_brace].line;
        let sig_start = abs_offset(tokens[decl].line, tokens[decl].col);
        let sig_end =
            abs_offset(tokens[close_paren].line, tokens[close_paren].col) + tokens[close_paren].text.len();
        let signature_text = content[sig_start..sig_end].to_string();

        let slice = lines[(start_line - 1) as usize..=(end_line - 1) as usize].join("\n");
        let mut unit_tokens = lexer::tokenize(&slice);
        lexer::offset_lines(&mut unit_tokens, start_line - 1);

        units.push(FunctionUnit {
            file: path.to_string(),
            start_line,
            end_line,
            tokens: unit_tokens,
            signature_text,
            name: tok.text.clone(),
            body_open_line: tokens[open_brace].line,
        });

        i = close_brace + 1;
    }
    units
}

/// Token index of the delimiter matching `tokens[open]`, or None.
fn match_delim(tokens: &[Token], open: usize, open_text: &str, close_text: &str) -> Option<usize> {
    let mut depth = 0i32;
    for (k, tok) in tokens.iter().enumerate().skip(open) {
        if tok.kind == TokenKind::Punctuation {
            if tok.text == open_text {
                depth += 1;
            } else if tok.text == close_text {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_METHODS: &str = "\
class Calc {
    private int total;

    public int add(int a, int b) {
        return a + b;
    }

    public int sub(int a, int b) {
        return a - b;
    }
}
";

    #[test]
    fn extracts_two_methods() {
        let units = extract_functions("Calc.java", TWO_METHODS);
        assert_eq!(units.len(), 2);
        assert_eq!(units[0].name, "add");
        assert_eq!(units[0].start_line, 4);
        assert_eq!(units[0].end_line, 6);
        assert_eq!(units[1].name, "sub");
        assert_eq!(units[1].signature_text, "public int sub(int a, int b)");
    }

    #[test]
    fn roundtrip_to_source_slice() {
        let units = extract_functions("Calc.java", TWO_METHODS);
        let lines: Vec<&str> = TWO_METHODS.split('\n').collect();
        for u in &units {
            let slice = lines[(u.start_line - 1) as usize..=(u.end_line - 1) as usize].join("\n");
            assert_eq!(u.source_text(), slice);
        }
    }

    #[test]
    fn nested_anonymous_class_stays_inside_outer_method() {
        // Hand trace: `run` opens a body at depth 2 inside `spawn`; the brace
        // matcher closes `spawn` only at the final `}` on line 8, so one unit
        // spans lines 2-8 and the inner `run` is never a separate unit.
        let src = "\
class Jobs {
    public void spawn() {
        worker = new Runnable() {
            public void run() {
                tick();
            }
        };
    }
}
";
        let units = extract_functions("Jobs.java", src);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].name, "spawn");
        assert_eq!(units[0].start_line, 2);
        assert_eq!(units[0].end_line, 8);
    }

    #[test]
    fn calls_and_control_flow_are_not_declarations() {
        let src = "\
class A {
    void go() {
        if (ready(x)) {
            launch(x);
        }
        while (spin()) {
            step();
        }
    }
}
";
        let units = extract_functions("A.java", src);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].name, "go");
    }

    #[test]
    fn prototypes_are_skipped() {
        let src = "int add(int a, int b);\nint add(int a, int b) {\n    return a + b;\n}\n";
        let units = extract_functions("add.c", src);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].start_line, 2);
    }

    #[test]
    fn c_pointer_return_types() {
        let src = "static struct Ctx *ctx_new(struct Arena *a) {\n    return alloc(a);\n}\n";
        let units = extract_functions("ctx.c", src);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].name, "ctx_new");
        assert_eq!(
            units[0].signature_text,
            "static struct Ctx *ctx_new(struct Arena *a)"
        );
    }

    #[test]
    fn throws_clause() {
        let src = "class A {\n    public void load() throws IOException, FooError {\n        read();\n    }\n}\n";
        let units = extract_functions("A.java", src);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].name, "load");
        assert_eq!(units[0].body_open_line, 2);
    }

    #[test]
    fn constructor_extracted() {
        let src = "class Plot {\n    Plot(int w) {\n        width = w;\n    }\n}\n";
        let units = extract_functions("Plot.java", src);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].name, "Plot");
    }

    #[test]
    fn annotations_on_own_line_join_the_declaration() {
        let src = "class A {\n    @Override\n    public int size() {\n        return n;\n    }\n}\n";
        let units = extract_functions("A.java", src);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].start_line, 2);
        assert!(units[0].signature_text.starts_with("@Override"));
    }
}
