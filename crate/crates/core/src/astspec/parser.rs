use std::collections::HashMap;

use super::{
    AlternativeDecl, CategoryDecl, FieldDecl, FieldKind, NodeRef, ScalarKind, SpecAst, SpecError,
};
use crate::span::Pos;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Eq,
    Bar,
    LParen,
    RParen,
    Comma,
    Colon,
    PathSep,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Eq => "`=`".into(),
            Tok::Bar => "`|`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::PathSep => "`::`".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, SpecError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos::new(line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
                continue;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        word.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(word), pos));
                continue;
            }
            ':' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&':') {
                    chars.next();
                    col += 1;
                    out.push((Tok::PathSep, pos));
                } else {
                    out.push((Tok::Colon, pos));
                }
                continue;
            }
            _ => {}
        }
        let tok = match c {
            '=' => Tok::Eq,
            '|' => Tok::Bar,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(SpecError::Syntax {
                    pos,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        chars.next();
        col += 1;
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos::new(line, col)));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, SpecError> {
        Err(SpecError::Syntax {
            pos: self.pos(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, SpecError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            self.error(&tok.describe())
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), SpecError> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                (Tok::Ident(s), pos) => Ok((s, pos)),
                _ => unreachable!(),
            },
            _ => self.error(what),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<Pos, SpecError> {
        match self.peek() {
            Tok::Ident(s) if s == word => Ok(self.bump().1),
            _ => self.error(&format!("`{word}`")),
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn spec(&mut self) -> Result<SpecAst, SpecError> {
        let pos = self.keyword("tree")?;
        let (tree_id, _) = self.ident("tree identifier")?;
        let extends = if self.at_keyword("extends") {
            self.bump();
            Some(self.ident("base tree identifier")?.0)
        } else {
            None
        };

        let mut categories = Vec::new();
        let mut seen: HashMap<String, Pos> = HashMap::new();
        while *self.peek() != Tok::Eof {
            let cat = self.category()?;
            if let Some(first) = seen.get(&cat.name) {
                return Err(SpecError::DuplicateName {
                    what: "category",
                    name: cat.name,
                    first: *first,
                    second: cat.pos,
                });
            }
            seen.insert(cat.name.clone(), cat.pos);
            categories.push(cat);
        }
        Ok(SpecAst {
            tree_id,
            extends,
            pos,
            categories,
        })
    }

    fn category(&mut self) -> Result<CategoryDecl, SpecError> {
        self.keyword("node")?;
        let (name, pos) = self.ident("category name")?;
        self.expect(Tok::Eq)?;
        let mut alternatives = Vec::new();
        let mut seen: HashMap<String, Pos> = HashMap::new();
        while *self.peek() == Tok::Bar {
            self.bump();
            let alt = self.alternative()?;
            if let Some(first) = seen.get(&alt.name) {
                return Err(SpecError::DuplicateName {
                    what: "alternative",
                    name: alt.name,
                    first: *first,
                    second: alt.pos,
                });
            }
            seen.insert(alt.name.clone(), alt.pos);
            alternatives.push(alt);
        }
        if !matches!(self.peek(), Tok::Eof) && !self.at_keyword("node") {
            return self.error("`|` or `node`");
        }
        Ok(CategoryDecl {
            name,
            pos,
            alternatives,
        })
    }

    fn alternative(&mut self) -> Result<AlternativeDecl, SpecError> {
        let (name, pos) = self.ident("alternative name")?;
        self.expect(Tok::LParen)?;
        let mut fields: Vec<FieldDecl> = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let field = self.field()?;
                if let Some(first) = fields.iter().find(|f| f.name == field.name) {
                    return Err(SpecError::DuplicateName {
                        what: "field",
                        name: field.name,
                        first: first.pos,
                        second: field.pos,
                    });
                }
                fields.push(field);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(AlternativeDecl { name, pos, fields })
    }

    fn field(&mut self) -> Result<FieldDecl, SpecError> {
        let (name, pos) = self.ident("field name")?;
        self.expect(Tok::Colon)?;
        let kind_pos = self.pos();
        let kind = if self.at_keyword("list") {
            self.bump();
            FieldKind::List(self.node_ref()?)
        } else if self.at_keyword("opt") {
            self.bump();
            FieldKind::Opt(self.node_ref()?)
        } else {
            match self.peek() {
                Tok::Ident(word) => match ScalarKind::from_keyword(word) {
                    Some(s) => {
                        self.bump();
                        FieldKind::Scalar(s)
                    }
                    None => FieldKind::Node(self.node_ref()?),
                },
                _ => return self.error("field kind"),
            }
        };
        Ok(FieldDecl {
            name,
            pos,
            kind,
            kind_pos,
        })
    }

    fn node_ref(&mut self) -> Result<NodeRef, SpecError> {
        let (first, _) = self.ident("category name")?;
        if *self.peek() == Tok::PathSep {
            self.bump();
            let (category, _) = self.ident("category name")?;
            Ok(NodeRef {
                category,
                tree: Some(first),
            })
        } else {
            Ok(NodeRef {
                category: first,
                tree: None,
            })
        }
    }
}

/// Parses a tree specification file.
pub fn parse_spec(text: &str) -> Result<SpecAst, SpecError> {
    let mut parser = Parser {
        toks: lex(text)?,
        at: 0,
    };
    parser.spec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec() {
        let ast = parse_spec("tree T\nnode X = | A()").unwrap();
        assert_eq!(ast.tree_id, "T");
        assert_eq!(ast.extends, None);
        assert_eq!(ast.categories.len(), 1);
        assert_eq!(ast.categories[0].name, "X");
        assert_eq!(ast.categories[0].alternatives.len(), 1);
        assert_eq!(ast.categories[0].alternatives[0].name, "A");
        assert!(ast.categories[0].alternatives[0].fields.is_empty());
    }

    #[test]
    fn duplicate_alternative_reports_both_positions() {
        let err = parse_spec("tree T\nnode X = | A() | A()").unwrap_err();
        assert_eq!(
            err,
            SpecError::DuplicateName {
                what: "alternative",
                name: "A".into(),
                first: Pos::new(2, 12),
                second: Pos::new(2, 18),
            }
        );
    }

    #[test]
    fn duplicate_field_and_category() {
        let err = parse_spec("tree T\nnode X = | A(a: int, a: bool)").unwrap_err();
        assert!(matches!(err, SpecError::DuplicateName { what: "field", .. }));
        let err = parse_spec("tree T\nnode X = | A()\nnode X = | B()").unwrap_err();
        assert!(matches!(err, SpecError::DuplicateName { what: "category", .. }));
    }

    #[test]
    fn field_kinds_and_qualifiers() {
        let ast = parse_spec(
            "tree E extends B # trailing comment\n\
             node P =\n\
             | G(cond: base::Exp, body: P, xs: list P, o: opt base::Exp, n: ident, s: string)",
        )
        .unwrap();
        assert_eq!(ast.extends.as_deref(), Some("B"));
        let kinds: Vec<String> = ast.categories[0].alternatives[0]
            .fields
            .iter()
            .map(|f| f.kind.to_string())
            .collect();
        assert_eq!(
            kinds,
            ["base::Exp", "P", "list P", "opt base::Exp", "ident", "string"]
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_spec("tree T\nnode X = | A(a int)").unwrap_err();
        assert_eq!(
            err,
            SpecError::Syntax {
                pos: Pos::new(2, 16),
                message: "expected `:`, found `int`".into()
            }
        );
        assert!(matches!(parse_spec("node X = | A()"), Err(SpecError::Syntax { .. })));
        assert!(matches!(parse_spec("tree T\nnode X = | A() B"), Err(SpecError::Syntax { .. })));
        assert!(matches!(parse_spec("tree T\nnode X = | A() $"), Err(SpecError::Syntax { .. })));
    }
}
