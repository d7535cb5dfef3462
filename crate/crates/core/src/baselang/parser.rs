//! Recursive descent parser for Base-L.
//!
//! The parser is shared with the languages that embed Base-L: they register
//! extra section keywords and receive control whenever one is reached.

use super::lexer::{lex, Tok, Token};
use super::{schema, BaseModule, SyntaxError, Type};
use crate::span::Span;
use crate::treekit::{make_node, FieldValue, Node};

pub(crate) const BASE_SECTIONS: &[&str] = &["values", "state", "functions", "operations", "traces"];

const RESERVED: &[&str] = &[
    "module", "values", "state", "functions", "operations", "traces", "processes", "process",
    "plant", "cosim", "shared", "pre", "post", "if", "then", "else", "let", "in", "and", "or",
    "not", "div", "mod", "true", "false", "return", "skip",
];

pub(crate) type PResult<T> = Result<T, SyntaxError>;

pub(crate) struct Parser<'s> {
    src: &'s str,
    toks: Vec<Token>,
    at: usize,
    foreign: Vec<&'static str>,
}

impl<'s> Parser<'s> {
    pub(crate) fn new(src: &'s str, foreign: &[&'static str]) -> PResult<Self> {
        Ok(Parser {
            src,
            toks: lex(src)?,
            at: 0,
            foreign: foreign.to_vec(),
        })
    }

    // ----- token helpers -------------------------------------------------

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub(crate) fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.at + n).min(self.toks.len() - 1)].tok
    }

    pub(crate) fn span(&self) -> Span {
        self.toks[self.at].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.at.saturating_sub(1)].span
    }

    pub(crate) fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    pub(crate) fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn eat_sym(&mut self, sym: &str) -> bool {
        if self.at_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(SyntaxError::new(
            self.span(),
            format!("expected {expected}, found {}", self.peek()),
        ))
    }

    pub(crate) fn expect_sym(&mut self, sym: &str) -> PResult<Span> {
        if self.at_sym(sym) {
            Ok(self.bump().span)
        } else {
            self.error(&format!("`{sym}`"))
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.at_kw(kw) {
            Ok(self.bump().span)
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    /// A non-reserved identifier.
    pub(crate) fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let t = self.bump();
                match t.tok {
                    Tok::Ident(s) => Ok((s, t.span)),
                    _ => unreachable!(),
                }
            }
            _ => self.error("identifier"),
        }
    }

    /// A numeric literal with an optional leading minus, as a real.
    pub(crate) fn real_literal(&mut self) -> PResult<f64> {
        let negative = self.eat_sym("-");
        let v = match self.peek() {
            Tok::Int(v) => *v as f64,
            Tok::Real(v) => *v,
            _ => return self.error("numeric literal"),
        };
        self.bump();
        Ok(if negative { -v } else { v })
    }

    pub(crate) fn at_section_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                BASE_SECTIONS.contains(&s.as_str()) || self.foreign.contains(&s.as_str())
            }
            _ => false,
        }
    }

    pub(crate) fn at_entry_end(&self) -> bool {
        self.at_eof() || self.at_section_start()
    }

    /// Source text from the current token to the end of its line; consumes
    /// every token on that stretch.
    pub(crate) fn rest_of_line(&mut self) -> (String, Span) {
        let start_tok = &self.toks[self.at];
        let start = start_tok.start;
        let span = start_tok.span;
        let end = self.src[start..]
            .find('\n')
            .map_or(self.src.len(), |i| start + i);
        while !self.at_eof() && self.toks[self.at].start < end {
            self.bump();
        }
        let text = self.src[start..end].trim();
        let text = match text.find("--") {
            Some(i) => text[..i].trim_end(),
            None => text,
        };
        (text.to_string(), span)
    }

    pub(crate) fn node(
        &self,
        category: &str,
        alternative: &str,
        fields: Vec<(&str, FieldValue)>,
        span: Span,
    ) -> Node {
        make_node(schema(), category, alternative, fields)
            .expect("parser builds well-formed Base-L nodes")
            .with_span(span)
    }

    fn ty(&mut self) -> PResult<Type> {
        match self.peek() {
            Tok::Ident(s) => match Type::from_name(s) {
                Some(t) => {
                    self.bump();
                    Ok(t)
                }
                None => self.error("type (`int`, `real` or `bool`)"),
            },
            _ => self.error("type"),
        }
    }

    // ----- expressions ---------------------------------------------------

    pub(crate) fn exp(&mut self) -> PResult<Node> {
        let start = self.span();
        if self.eat_kw("if") {
            let cond = self.exp()?;
            self.expect_kw("then")?;
            let then = self.exp()?;
            self.expect_kw("else")?;
            let els = self.exp()?;
            let span = start.to(self.prev_span());
            return Ok(self.node(
                "Exp",
                "If",
                vec![("cond", cond.into()), ("then", then.into()), ("else", els.into())],
                span,
            ));
        }
        if self.eat_kw("let") {
            let (name, _) = self.ident()?;
            self.expect_sym("=")?;
            let bound = self.exp()?;
            self.expect_kw("in")?;
            let body = self.exp()?;
            let span = start.to(self.prev_span());
            return Ok(self.node(
                "Exp",
                "Let",
                vec![
                    ("name", FieldValue::ident(name)),
                    ("bound", bound.into()),
                    ("body", body.into()),
                ],
                span,
            ));
        }
        self.or_exp()
    }

    fn binary(&self, op: &str, left: Node, right: Node) -> Node {
        let span = match (left.span(), right.span()) {
            (Some(l), Some(r)) => l.to(r),
            (Some(l), None) => l,
            _ => Span::default(),
        };
        self.node(
            "Exp",
            "Binary",
            vec![
                ("op", FieldValue::ident(op)),
                ("left", left.into()),
                ("right", right.into()),
            ],
            span,
        )
    }

    fn or_exp(&mut self) -> PResult<Node> {
        let mut left = self.and_exp()?;
        while self.eat_kw("or") {
            let right = self.and_exp()?;
            left = self.binary("or", left, right);
        }
        Ok(left)
    }

    fn and_exp(&mut self) -> PResult<Node> {
        let mut left = self.not_exp()?;
        while self.eat_kw("and") {
            let right = self.not_exp()?;
            left = self.binary("and", left, right);
        }
        Ok(left)
    }

    fn not_exp(&mut self) -> PResult<Node> {
        let start = self.span();
        if self.eat_kw("not") {
            let operand = self.not_exp()?;
            let span = start.to(self.prev_span());
            return Ok(self.node(
                "Exp",
                "Unary",
                vec![("op", FieldValue::ident("not")), ("operand", operand.into())],
                span,
            ));
        }
        self.cmp_exp()
    }

    fn cmp_exp(&mut self) -> PResult<Node> {
        let left = self.add_exp()?;
        for op in ["=", "<>", "<=", ">=", "<", ">"] {
            if self.eat_sym(op) {
                let right = self.add_exp()?;
                return Ok(self.binary(op, left, right));
            }
        }
        Ok(left)
    }

    fn add_exp(&mut self) -> PResult<Node> {
        let mut left = self.mul_exp()?;
        loop {
            let op = if self.eat_sym("+") {
                "+"
            } else if self.eat_sym("-") {
                "-"
            } else {
                break;
            };
            let right = self.mul_exp()?;
            left = self.binary(op, left, right);
        }
        Ok(left)
    }

    fn mul_exp(&mut self) -> PResult<Node> {
        let mut left = self.neg_exp()?;
        loop {
            let op = if self.eat_sym("*") {
                "*"
            } else if self.eat_sym("/") {
                "/"
            } else if self.eat_kw("div") {
                "div"
            } else if self.eat_kw("mod") {
                "mod"
            } else {
                break;
            };
            let right = self.neg_exp()?;
            left = self.binary(op, left, right);
        }
        Ok(left)
    }

    fn neg_exp(&mut self) -> PResult<Node> {
        let start = self.span();
        if self.eat_sym("-") {
            let operand = self.neg_exp()?;
            let span = start.to(self.prev_span());
            return Ok(self.node(
                "Exp",
                "Unary",
                vec![("op", FieldValue::ident("-")), ("operand", operand.into())],
                span,
            ));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Node> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(self.node("Exp", "IntLit", vec![("value", FieldValue::int(v))], start))
            }
            Tok::Real(v) => {
                self.bump();
                Ok(self.node("Exp", "RealLit", vec![("value", FieldValue::real(v))], start))
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(self.node(
                    "Exp",
                    "BoolLit",
                    vec![("value", FieldValue::bool(w == "true"))],
                    start,
                ))
            }
            Tok::Sym("(") => {
                self.bump();
                let inner = self.exp()?;
                self.expect_sym(")")?;
                Ok(inner)
            }
            Tok::Ident(w) if w == "if" || w == "let" => self.exp(),
            Tok::Ident(_) => {
                let (name, span) = self.ident()?;
                if self.eat_sym("(") {
                    let mut args = Vec::new();
                    if !self.at_sym(")") {
                        loop {
                            args.push(self.exp()?);
                            if !self.eat_sym(",") {
                                break;
                            }
                        }
                    }
                    self.expect_sym(")")?;
                    let span = span.to(self.prev_span());
                    Ok(self.node(
                        "Exp",
                        "Apply",
                        vec![("name", FieldValue::ident(name)), ("args", args.into())],
                        span,
                    ))
                } else {
                    Ok(self.node("Exp", "Var", vec![("name", FieldValue::ident(name))], span))
                }
            }
            _ => self.error("expression"),
        }
    }

    // ----- statements ----------------------------------------------------

    pub(crate) fn stmt(&mut self) -> PResult<Node> {
        let first = self.simple_stmt()?;
        if self.eat_sym(";") {
            let second = self.stmt()?;
            let span = first.span().unwrap_or_default();
            return Ok(self.node(
                "Stmt",
                "Seq",
                vec![("first", first.into()), ("second", second.into())],
                span,
            ));
        }
        Ok(first)
    }

    fn simple_stmt(&mut self) -> PResult<Node> {
        let start = self.span();
        if self.eat_kw("skip") {
            return Ok(self.node("Stmt", "Skip", vec![], start));
        }
        if self.eat_kw("return") {
            let value = self.exp()?;
            let span = start.to(self.prev_span());
            return Ok(self.node("Stmt", "Return", vec![("value", value.into())], span));
        }
        if self.eat_kw("if") {
            let cond = self.exp()?;
            self.expect_kw("then")?;
            let then = self.simple_stmt()?;
            self.expect_kw("else")?;
            let els = self.simple_stmt()?;
            let span = start.to(self.prev_span());
            return Ok(self.node(
                "Stmt",
                "If",
                vec![("cond", cond.into()), ("then", then.into()), ("else", els.into())],
                span,
            ));
        }
        if self.eat_sym("(") {
            let inner = self.stmt()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        let (target, span) = self.ident()?;
        self.expect_sym(":=")?;
        let value = self.exp()?;
        let span = span.to(self.prev_span());
        Ok(self.node(
            "Stmt",
            "Assign",
            vec![("target", FieldValue::ident(target)), ("value", value.into())],
            span,
        ))
    }

    // ----- definitions ---------------------------------------------------

    fn param_node(&self, name: String, ty: Type, span: Span) -> Node {
        self.node(
            "Def",
            "Param",
            vec![
                ("name", FieldValue::ident(name)),
                ("type", FieldValue::ident(ty.name())),
            ],
            span,
        )
    }

    /// `(a: T, b: U)`
    fn typed_params(&mut self) -> PResult<Vec<Node>> {
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.at_sym(")") {
            loop {
                let (name, span) = self.ident()?;
                self.expect_sym(":")?;
                let ty = self.ty()?;
                params.push(self.param_node(name, ty, span));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(params)
    }

    fn opt_clause(&mut self, kw: &str) -> PResult<FieldValue> {
        Ok(if self.eat_kw(kw) {
            FieldValue::Node(self.exp()?)
        } else {
            FieldValue::Absent
        })
    }

    fn value_def(&mut self) -> PResult<Node> {
        let (name, span) = self.ident()?;
        self.expect_sym("=")?;
        let value = self.exp()?;
        Ok(self.node(
            "Def",
            "ValueDef",
            vec![("name", FieldValue::ident(name)), ("value", value.into())],
            span,
        ))
    }

    fn state_def(&mut self) -> PResult<Node> {
        let shared = self.eat_kw("shared");
        let (name, span) = self.ident()?;
        self.expect_sym(":")?;
        let ty = self.ty()?;
        self.expect_sym(":=")?;
        let init = self.exp()?;
        Ok(self.node(
            "Def",
            "StateDef",
            vec![
                ("name", FieldValue::ident(name)),
                ("type", FieldValue::ident(ty.name())),
                ("init", init.into()),
                ("shared", FieldValue::bool(shared)),
            ],
            span,
        ))
    }

    fn function_def(&mut self) -> PResult<Node> {
        let (name, span) = self.ident()?;
        if self.eat_sym(":") {
            // explicit: signature line, then the defining equation
            let mut param_types = Vec::new();
            if self.eat_sym("(") {
                self.expect_sym(")")?;
            } else {
                param_types.push(self.ty()?);
                while self.eat_sym("*") {
                    param_types.push(self.ty()?);
                }
            }
            self.expect_sym("->")?;
            let result = self.ty()?;

            let (def_name, def_span) = self.ident()?;
            if def_name != name {
                return Err(SyntaxError::new(
                    def_span,
                    format!("expected the definition of `{name}`, found `{def_name}`"),
                ));
            }
            self.expect_sym("(")?;
            let mut params = Vec::new();
            if !self.at_sym(")") {
                loop {
                    let (p, pspan) = self.ident()?;
                    params.push((p, pspan));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(")")?;
            if params.len() != param_types.len() {
                return Err(SyntaxError::new(
                    def_span,
                    format!(
                        "`{name}` is declared with {} parameter(s) but defined with {}",
                        param_types.len(),
                        params.len()
                    ),
                ));
            }
            let params: Vec<Node> = params
                .into_iter()
                .zip(param_types)
                .map(|((p, pspan), ty)| self.param_node(p, ty, pspan))
                .collect();
            self.expect_sym("==")?;
            let body = self.exp()?;
            let pre = self.opt_clause("pre")?;
            let post = self.opt_clause("post")?;
            Ok(self.node(
                "Def",
                "ExplicitFn",
                vec![
                    ("name", FieldValue::ident(name)),
                    ("params", params.into()),
                    ("result", FieldValue::ident(result.name())),
                    ("body", body.into()),
                    ("pre", pre),
                    ("post", post),
                ],
                span,
            ))
        } else {
            let params = self.typed_params()?;
            let (result_name, _) = self.ident()?;
            self.expect_sym(":")?;
            let result = self.ty()?;
            let pre = self.opt_clause("pre")?;
            self.expect_kw("post")?;
            let post = self.exp()?;
            Ok(self.node(
                "Def",
                "ImplicitFn",
                vec![
                    ("name", FieldValue::ident(name)),
                    ("params", params.into()),
                    ("resultName", FieldValue::ident(result_name)),
                    ("result", FieldValue::ident(result.name())),
                    ("pre", pre),
                    ("post", post.into()),
                ],
                span,
            ))
        }
    }

    fn operation_def(&mut self) -> PResult<Node> {
        let (name, span) = self.ident()?;
        let params = self.typed_params()?;
        self.expect_sym("==")?;
        let body = self.stmt()?;
        let pre = self.opt_clause("pre")?;
        let post = self.opt_clause("post")?;
        Ok(self.node(
            "Def",
            "OpDef",
            vec![
                ("name", FieldValue::ident(name)),
                ("params", params.into()),
                ("body", body.into()),
                ("pre", pre),
                ("post", post),
            ],
            span,
        ))
    }

    fn trace_def(&mut self) -> PResult<Node> {
        let (name, span) = self.ident()?;
        self.expect_sym(":")?;
        if self.at_eof() {
            return self.error("trace expression");
        }
        let (text, _) = self.rest_of_line();
        if text.is_empty() {
            return Err(SyntaxError::new(span, "empty trace expression"));
        }
        Ok(self.node(
            "Def",
            "TraceDef",
            vec![("name", FieldValue::ident(name)), ("expr", FieldValue::str(text))],
            span,
        ))
    }

    fn base_section(&mut self, keyword: &str, defs: &mut Vec<Node>) -> PResult<()> {
        while !self.at_entry_end() {
            let def = match keyword {
                "values" => self.value_def()?,
                "state" => self.state_def()?,
                "functions" => self.function_def()?,
                "operations" => self.operation_def()?,
                "traces" => self.trace_def()?,
                _ => unreachable!("not a base section"),
            };
            defs.push(def);
        }
        Ok(())
    }
}

/// Parses a document made of an optional `module <Name>` header followed by
/// sections. Sections named in `foreign` are handed to `on_foreign` together
/// with the parser positioned on the section keyword.
pub(crate) fn parse_document<F>(
    src: &str,
    foreign: &[&'static str],
    mut on_foreign: F,
) -> PResult<BaseModule>
where
    F: FnMut(&str, &mut Parser<'_>) -> PResult<()>,
{
    let mut p = Parser::new(src, foreign)?;
    let name = if p.eat_kw("module") {
        p.ident()?.0
    } else {
        "Main".to_string()
    };
    let mut defs = Vec::new();
    while !p.at_eof() {
        let keyword = match p.peek() {
            Tok::Ident(k) if p.at_section_start() => k.clone(),
            _ => return p.error("section keyword"),
        };
        if BASE_SECTIONS.contains(&keyword.as_str()) {
            p.bump();
            p.base_section(&keyword, &mut defs)?;
        } else {
            on_foreign(&keyword, &mut p)?;
        }
    }
    Ok(BaseModule::from_defs(name, defs))
}

/// Parses a Base-L module.
pub fn parse_module(src: &str) -> Result<BaseModule, SyntaxError> {
    parse_document(src, &[], |_, _| unreachable!())
}

/// Parses a single Base-L expression.
pub fn parse_exp(src: &str) -> Result<Node, SyntaxError> {
    let mut p = Parser::new(src, &[])?;
    let exp = p.exp()?;
    if !p.at_eof() {
        return p.error("end of expression");
    }
    Ok(exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treekit::validate_tree;

    #[test]
    fn explicit_function() {
        let m = parse_module("module M\nfunctions\n f: int -> int\n f(x) == x + 1").unwrap();
        assert_eq!(m.name, "M");
        assert_eq!(m.functions.len(), 1);
        let f = &m.functions[0];
        assert!(!f.is_implicit());
        assert_eq!(f.params[0].name, "x");
        assert_eq!(
            f.body.as_ref().unwrap().to_string(),
            "Binary(op: +, left: Var(name: x), right: IntLit(value: 1))"
        );
        for def in &m.defs {
            assert!(validate_tree(schema(), def).is_empty());
        }
    }

    #[test]
    fn implicit_function() {
        let m = parse_module(
            "module M\nfunctions\nisqrt(x: int) r: int pre x >= 0 post r*r <= x and (r+1)*(r+1) > x",
        )
        .unwrap();
        let f = &m.functions[0];
        assert!(f.is_implicit());
        assert_eq!(f.result_name, "r");
        assert!(f.pre.is_some());
        assert_eq!(f.post.as_ref().unwrap().text("op"), "and");
    }

    #[test]
    fn incomplete_definition_is_a_syntax_error() {
        let err = parse_module("module M\nfunctions\n f: int -> int\n f(x) ==").unwrap_err();
        assert_eq!(err.span.line, 4);
        assert!(parse_module("module M\nfunctions\n f: int -> int\n g(x) == 1").is_err());
        assert!(parse_module("module M\nbogus").is_err());
    }

    #[test]
    fn all_sections() {
        let m = parse_module(
            "module S\n\
             values\n  k = 10\n\
             state\n  x : int := 0\n  shared level : real := 2.5\n\
             operations\n  inc() == x := x + 1\n  dec() == x := x - 1 pre x > 0\n\
               set(v: int) == (x := v; return x)\n\
             traces\n  t1: inc(){1,3} ; dec() -- comment\n  t2: set(4)\n",
        )
        .unwrap();
        assert_eq!(m.values.len(), 1);
        assert_eq!(m.state.len(), 2);
        assert!(m.state[1].shared);
        assert_eq!(m.operations.len(), 3);
        assert!(m.operations[1].pre.is_some());
        assert_eq!(m.operations[2].body.alternative(), "Seq");
        assert_eq!(m.traces[0].text, "inc(){1,3} ; dec()");
        assert_eq!(m.traces[1].text, "set(4)");
    }

    #[test]
    fn precedence() {
        let e = parse_exp("1 + 2 * 3 = 7 and not false or x").unwrap();
        assert_eq!(e.text("op"), "or");
        let and = e.child("left");
        assert_eq!(and.text("op"), "and");
        assert_eq!(and.child("left").text("op"), "=");
        assert_eq!(and.child("left").child("left").child("right").text("op"), "*");
        let e = parse_exp("if a then 1 else let y = 2 in y - -1").unwrap();
        assert_eq!(e.alternative(), "If");
        assert!(parse_exp("1 +").is_err());
        assert!(parse_exp("1 2").is_err());
    }
}
