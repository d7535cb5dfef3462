use std::fmt;

use super::SyntaxError;
use crate::span::Span;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Real(v) => write!(f, "`{v:?}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
    /// Byte offset in the source.
    pub start: usize,
}

// Longest symbols first so that maximal munch falls out of the scan order.
const SYMBOLS: &[&str] = &[
    ":=", "==", "->", "<>", "<=", ">=", "<-", "[]", "+", "-", "*", "/", "=", "<", ">", "(", ")",
    ",", ":", "[", "]", "&", ";", "{", "}", "|",
];

/// Tokenizes Base-L family sources. `--` starts a line comment.
pub(crate) fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut line_start = 0usize;

    while i < bytes.len() {
        let c = bytes[i];
        let col = (src[line_start..i].chars().count() + 1) as u32;
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_real = false;
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                is_real = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    is_real = true;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let span = Span::new(line, col, (i - start) as u32);
            if is_real {
                Tok::Real(text.parse().map_err(|_| SyntaxError::new(span, "malformed real literal"))?)
            } else {
                Tok::Int(
                    text.parse()
                        .map_err(|_| SyntaxError::new(span, "integer literal out of range"))?,
                )
            }
        } else {
            match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
                Some(sym) => {
                    i += sym.len();
                    Tok::Sym(sym)
                }
                None => {
                    let ch = src[i..].chars().next().unwrap();
                    return Err(SyntaxError::new(
                        Span::new(line, col, 1),
                        format!("unexpected character `{ch}`"),
                    ));
                }
            }
        };
        out.push(Token {
            tok,
            span: Span::new(line, col, src[start..i].chars().count() as u32),
            start,
        });
    }
    let col = (src[line_start..].chars().count() + 1) as u32;
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col, 0),
        start: src.len(),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn symbols_and_numbers() {
        assert_eq!(
            toks("x := 1.5e2 <> 3 -- note\n[] a->b"),
            vec![
                Tok::Ident("x".into()),
                Tok::Sym(":="),
                Tok::Real(150.0),
                Tok::Sym("<>"),
                Tok::Int(3),
                Tok::Sym("[]"),
                Tok::Ident("a".into()),
                Tok::Sym("->"),
                Tok::Ident("b".into()),
                Tok::Eof,
            ]
        );
        assert_eq!(toks("1e-7")[0], Tok::Real(1e-7));
        assert!(lex("2.").is_err());
    }

    #[test]
    fn positions_and_errors() {
        let t = lex("a\n  bb").unwrap();
        assert_eq!(t[1].span, Span::new(2, 3, 2));
        assert!(lex("a $").is_err());
        assert!(lex("99999999999999999999").is_err());
    }
}
