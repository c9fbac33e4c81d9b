//! Parser for the dagitty-style graph source:
//!
//! ```text
//! dag {
//!   # comment
//!   Chemotherapy [exposure]
//!   VTE [outcome]
//!   Age -> Chemotherapy
//!   Chemotherapy -> PlateletCount -> VTE
//! }
//! ```
//!
//! Statements are whitespace separated. A bare name declares a node, and
//! edge statements may be chained.

use super::{Annotation, Dag, DagError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Arrow,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> DagError {
    DagError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (line, column) = (lineno + 1, i + 1);
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, column });
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '{' => {
                    push(&mut out, Tok::LBrace);
                    i += 1;
                }
                '}' => {
                    push(&mut out, Tok::RBrace);
                    i += 1;
                }
                '[' => {
                    push(&mut out, Tok::LBracket);
                    i += 1;
                }
                ']' => {
                    push(&mut out, Tok::RBracket);
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    push(&mut out, Tok::Arrow);
                    i += 2;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
                }
                other => return Err(syntax(line, column, format!("unexpected character '{other}'"))),
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, expected: &str) -> Result<Token> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(syntax(self.end.0, self.end.1, format!("unexpected end of input, expected {expected}"))),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Token> {
        let t = self.next(expected)?;
        if t.tok == tok {
            Ok(t)
        } else {
            Err(syntax(t.line, t.column, format!("expected {expected}")))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Token)> {
        let t = self.next(expected)?;
        match &t.tok {
            Tok::Ident(name) => Ok((name.clone(), t.clone())),
            _ => Err(syntax(t.line, t.column, format!("expected {expected}"))),
        }
    }
}

/// Parses graph source text into a [`Dag`]. Nodes are ordered by first
/// appearance.
pub fn parse_dag(text: &str) -> Result<Dag> {
    let tokens = tokenize(text)?;
    let end = text
        .lines()
        .enumerate()
        .last()
        .map(|(i, l)| (i + 1, l.chars().count() + 1))
        .unwrap_or((1, 1));
    let mut p = Parser { tokens, pos: 0, end };

    let (kw, kw_tok) = p.ident("'dag'")?;
    if kw != "dag" {
        return Err(syntax(kw_tok.line, kw_tok.column, "expected 'dag'"));
    }
    p.expect(Tok::LBrace, "'{'")?;

    let mut nodes: Vec<String> = Vec::new();
    let declare = |nodes: &mut Vec<String>, name: &str| {
        if !nodes.iter().any(|n| n == name) {
            nodes.push(name.to_string());
        }
    };
    let mut edges = Vec::new();
    let mut annotations = Vec::new();

    loop {
        let Some(t) = p.peek() else {
            return Err(syntax(end.0, end.1, "unexpected end of input, expected '}'"));
        };
        if t.tok == Tok::RBrace {
            p.pos += 1;
            break;
        }
        let (name, _) = p.ident("node name or '}'")?;
        declare(&mut nodes, &name);
        match p.peek().map(|t| &t.tok) {
            Some(Tok::Arrow) => {
                let mut from = name;
                while matches!(p.peek().map(|t| &t.tok), Some(Tok::Arrow)) {
                    p.pos += 1;
                    let (to, _) = p.ident("node name after '->'")?;
                    declare(&mut nodes, &to);
                    edges.push((from, to.clone()));
                    from = to;
                }
            }
            Some(Tok::LBracket) => {
                p.pos += 1;
                let (attr, at) = p.ident("'exposure' or 'outcome'")?;
                let annotation = match attr.as_str() {
                    "exposure" => Annotation::Exposure,
                    "outcome" => Annotation::Outcome,
                    other => {
                        return Err(syntax(at.line, at.column, format!("unknown annotation '{other}'")))
                    }
                };
                p.expect(Tok::RBracket, "']'")?;
                annotations.push((name, annotation));
            }
            _ => {}
        }
    }
    if let Some(t) = p.peek() {
        return Err(syntax(t.line, t.column, "trailing input after closing '}'"));
    }

    Dag::new(nodes, edges, annotations)
}
