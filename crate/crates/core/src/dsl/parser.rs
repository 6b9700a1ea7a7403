//! Recursive-descent parser.
//!
//! Grammar (newlines are insignificant; every statement starts with a
//! keyword or with `name =`):
//!
//! ```text
//! script   := stmt*
//! stmt     := 'param' IDENT '=' dist
//!           | 'behavior' IDENT '(' [IDENT {',' IDENT}] ')' '=' call ['when' trigger]
//!           | IDENT '=' 'new' CLASS spatial {'with' property}
//!           | 'require' ( 'collision' ['of' IDENT] | 'ego' 'speed' 'above' NUMBER 'at' 'collision' )
//!           | 'terminate' 'when' trigger
//! dist     := NUMBER | 'Range' '(' NUMBER ',' NUMBER ')' | 'Choice' '[' NUMBER {',' NUMBER} ']'
//! expr     := dist | IDENT
//! spatial  := 'at' '(' expr ',' expr [',' expr] ')'
//!           | 'ahead' 'of' IDENT 'by' expr  | 'behind' IDENT 'by' expr
//!           | 'left' 'of' IDENT 'by' expr   | 'right' 'of' IDENT 'by' expr
//!           | 'on' 'lane' IDENT 'at' expr
//! property := 'behavior' call ['when' trigger] | 'size' '(' expr ',' expr ')'
//!           | 'heading' expr | 'speed' expr
//! call     := IDENT '(' [arg {',' arg}] ')'
//! arg      := 'left' | 'right' | expr
//! trigger  := 'distance' ['from' IDENT] 'to' 'ego' '<' expr | 'time' '>' expr
//! CLASS    := 'Car' | 'Truck' | 'Pedestrian' | 'Bicycle'
//! ```
//!
//! Headings in the source are degrees. On a syntax error the parser records
//! one diagnostic and resynchronizes at the next line that starts a
//! statement, so a single pass reports independent errors.

use super::ast::*;
use super::diagnostics::{Code, Diagnostic, Span};
use super::lexer::{Keyword, Token, TokenKind, TokenStream};
use std::collections::HashSet;

/// Parse a token stream. Lexical diagnostics carried by the stream are
/// included in the error list.
pub fn parse(stream: &TokenStream) -> Result<ScenarioAst, Vec<Diagnostic>> {
    let mut p = Parser {
        tokens: &stream.tokens,
        pos: 0,
        eof: stream.eof,
        diags: stream.diagnostics.clone(),
    };
    let ast = p.script();
    let mut diags = p.diags;
    check_invariants(&ast, &mut diags);
    if diags.iter().any(Diagnostic::is_error) {
        diags.sort_by_key(|d| (d.span.start, d.span.end));
        Err(diags)
    } else {
        Ok(ast)
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    eof: Span,
    diags: Vec<Diagnostic>,
}

/// Marker for an already-reported syntax error.
struct Abort;

type PResult<T> = Result<T, Abort>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&'a TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn peek_nth_kind(&self, n: usize) -> Option<&'a TokenKind> {
        self.tokens.get(self.pos + n).map(|t| &t.kind)
    }

    fn here(&self) -> Span {
        self.peek().map(|t| t.span).unwrap_or(self.eof)
    }

    fn prev_span(&self) -> Span {
        if self.pos == 0 {
            self.here()
        } else {
            self.tokens[self.pos - 1].span
        }
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&mut self, expected: &[&str]) -> PResult<T> {
        let found = match self.peek() {
            Some(t) => t.kind.to_string(),
            None => "end of input".to_string(),
        };
        let msg = match expected {
            [one] => format!("expected {one}, found {found}"),
            many => format!("expected one of {}, found {found}", many.join(", ")),
        };
        self.diags.push(Diagnostic::new(Code::Syntax, self.here(), msg));
        Err(Abort)
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        if self.peek_kind() == Some(&TokenKind::Keyword(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<Span> {
        if self.eat_kw(kw) {
            Ok(self.prev_span())
        } else {
            self.error(&[&format!("`{}`", kw.as_str())])
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Span> {
        if self.peek_kind() == Some(&kind) {
            self.pos += 1;
            Ok(self.prev_span())
        } else {
            self.error(&[&kind.to_string()])
        }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek_kind(), Some(TokenKind::Ident(s)) if s == word)
    }

    fn expect_word(&mut self, word: &str) -> PResult<Span> {
        if self.is_word(word) {
            self.pos += 1;
            Ok(self.prev_span())
        } else {
            self.error(&[&format!("`{word}`")])
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Ident> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(s), span }) => {
                self.pos += 1;
                Ok(Spanned::new(s.clone(), *span))
            }
            _ => self.error(&[what]),
        }
    }

    fn number(&mut self) -> PResult<Spanned<f64>> {
        match self.peek() {
            Some(Token { kind: TokenKind::Number(v), span }) => {
                self.pos += 1;
                Ok(Spanned::new(*v, *span))
            }
            _ => self.error(&["a number"]),
        }
    }

    fn at_statement_start(&self) -> bool {
        match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::Param | Keyword::Behavior | Keyword::Require | Keyword::Terminate)) => true,
            Some(TokenKind::Ident(_)) => self.peek_nth_kind(1) == Some(&TokenKind::Eq),
            _ => false,
        }
    }

    fn at_line_start(&self) -> bool {
        match (self.pos.checked_sub(1).and_then(|i| self.tokens.get(i)), self.peek()) {
            (None, _) => true,
            (Some(prev), Some(cur)) => cur.span.line > prev.span.end_line,
            (Some(_), None) => true,
        }
    }

    fn recover(&mut self, stmt_start: usize) {
        while self.pos < self.tokens.len() {
            if self.pos > stmt_start && self.at_line_start() && self.at_statement_start() {
                return;
            }
            self.pos += 1;
        }
    }

    fn script(&mut self) -> ScenarioAst {
        let mut ast = ScenarioAst::default();
        while self.pos < self.tokens.len() {
            let start = self.pos;
            if self.statement(&mut ast).is_err() {
                self.recover(start);
            }
        }
        ast
    }

    fn statement(&mut self, ast: &mut ScenarioAst) -> PResult<()> {
        match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::Param)) => {
                self.bump();
                let name = self.ident("a parameter name")?;
                self.expect(TokenKind::Eq)?;
                let value = self.distribution()?;
                ast.params.push(ParamDecl { name, value });
            }
            Some(TokenKind::Keyword(Keyword::Behavior)) => {
                self.bump();
                let def = self.behavior_def()?;
                ast.behaviors.push(def);
            }
            Some(TokenKind::Keyword(Keyword::Require)) => {
                let start = self.here();
                self.bump();
                let req = self.require_body()?;
                ast.requirements.push(Spanned::new(req, start.to(self.prev_span())));
            }
            Some(TokenKind::Keyword(Keyword::Terminate)) => {
                let start = self.here();
                self.bump();
                self.expect_kw(Keyword::When)?;
                let trigger = self.trigger()?;
                if ast.termination.is_some() {
                    let span = start.to(self.prev_span());
                    self.diags.push(Diagnostic::new(
                        Code::DuplicateName,
                        span,
                        "only one `terminate when` statement is allowed",
                    ));
                } else {
                    ast.termination = Some(TerminateStmt { trigger });
                }
            }
            Some(TokenKind::Ident(_)) => {
                let obj = self.object_decl()?;
                ast.objects.push(obj);
            }
            _ => {
                return self.error(&[
                    "`param`",
                    "`behavior`",
                    "`require`",
                    "`terminate`",
                    "an object declaration `name = new Class ...`",
                ])
            }
        }
        Ok(())
    }

    fn behavior_def(&mut self) -> PResult<BehaviorDef> {
        let name = self.ident("a behavior name")?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if self.peek_kind() != Some(&TokenKind::RParen) {
            loop {
                params.push(self.ident("a parameter name")?);
                if self.peek_kind() == Some(&TokenKind::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::Eq)?;
        let body = self.call()?;
        let trigger = if self.eat_kw(Keyword::When) { Some(self.trigger()?) } else { None };
        Ok(BehaviorDef { name, params, body, trigger })
    }

    fn object_decl(&mut self) -> PResult<ObjectDecl> {
        let name = self.ident("an object name")?;
        self.expect(TokenKind::Eq)?;
        self.expect_kw(Keyword::New)?;
        let class = match self.peek() {
            Some(Token { kind: TokenKind::Ident(s), span }) if AgentClass::from_name(s).is_some() => {
                self.pos += 1;
                Spanned::new(AgentClass::from_name(s).unwrap(), *span)
            }
            _ => return self.error(&["`Car`", "`Truck`", "`Pedestrian`", "`Bicycle`"]),
        };
        let spatial = self.spatial()?;
        let mut obj = ObjectDecl {
            name,
            class,
            spatial,
            size: None,
            heading: None,
            speed: None,
            behavior: None,
        };
        while self.eat_kw(Keyword::With) {
            let prop_span = self.here();
            if self.eat_kw(Keyword::Behavior) {
                let call = self.call()?;
                let trigger = if self.eat_kw(Keyword::When) { Some(self.trigger()?) } else { None };
                self.duplicate_property(obj.behavior.is_some(), prop_span, &obj.name.node, "behavior");
                obj.behavior = Some(BehaviorUse { call, trigger });
            } else if self.is_word("size") {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let l = self.expr()?;
                self.expect(TokenKind::Comma)?;
                let w = self.expr()?;
                self.expect(TokenKind::RParen)?;
                self.duplicate_property(obj.size.is_some(), prop_span, &obj.name.node, "size");
                obj.size = Some((l, w));
            } else if self.is_word("heading") {
                self.bump();
                let e = self.expr()?;
                self.duplicate_property(obj.heading.is_some(), prop_span, &obj.name.node, "heading");
                obj.heading = Some(e);
            } else if self.is_word("speed") {
                self.bump();
                let e = self.expr()?;
                self.duplicate_property(obj.speed.is_some(), prop_span, &obj.name.node, "speed");
                obj.speed = Some(e);
            } else {
                return self.error(&["`behavior`", "`size`", "`heading`", "`speed`"]);
            }
        }
        Ok(obj)
    }

    fn duplicate_property(&mut self, present: bool, span: Span, object: &str, what: &str) {
        if present {
            self.diags.push(Diagnostic::new(
                Code::DuplicateProperty,
                span,
                format!("property `{what}` given more than once for `{object}`"),
            ));
        }
    }

    fn spatial(&mut self) -> PResult<Spanned<SpatialSpec>> {
        let start = self.here();
        let spec = match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::At)) => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let x = self.expr()?;
                self.expect(TokenKind::Comma)?;
                let y = self.expr()?;
                let heading = if self.peek_kind() == Some(&TokenKind::Comma) {
                    self.bump();
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(TokenKind::RParen)?;
                SpatialSpec::Absolute { x, y, heading }
            }
            Some(TokenKind::Keyword(Keyword::Ahead)) => {
                self.bump();
                self.expect_kw(Keyword::Of)?;
                let target = self.ident("an object name")?;
                self.expect_kw(Keyword::By)?;
                SpatialSpec::AheadOf { target, distance: self.expr()? }
            }
            Some(TokenKind::Keyword(Keyword::Behind)) => {
                self.bump();
                let target = self.ident("an object name")?;
                self.expect_kw(Keyword::By)?;
                SpatialSpec::Behind { target, distance: self.expr()? }
            }
            Some(TokenKind::Keyword(Keyword::Left)) => {
                self.bump();
                self.expect_kw(Keyword::Of)?;
                let target = self.ident("an object name")?;
                self.expect_kw(Keyword::By)?;
                SpatialSpec::LeftOf { target, offset: self.expr()? }
            }
            Some(TokenKind::Keyword(Keyword::Right)) => {
                self.bump();
                self.expect_kw(Keyword::Of)?;
                let target = self.ident("an object name")?;
                self.expect_kw(Keyword::By)?;
                SpatialSpec::RightOf { target, offset: self.expr()? }
            }
            Some(TokenKind::Keyword(Keyword::On)) => {
                self.bump();
                self.expect_kw(Keyword::Lane)?;
                let lane = self.ident("a lane id")?;
                self.expect_kw(Keyword::At)?;
                SpatialSpec::OnLane { lane, s: self.expr()? }
            }
            _ => {
                return self.error(&["`at`", "`ahead of`", "`behind`", "`left of`", "`right of`", "`on lane`"])
            }
        };
        Ok(Spanned::new(spec, start.to(self.prev_span())))
    }

    fn call(&mut self) -> PResult<BehaviorCall> {
        let name = self.ident("a behavior name")?;
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if self.peek_kind() != Some(&TokenKind::RParen) {
            loop {
                let span = self.here();
                let arg = if self.eat_kw(Keyword::Left) {
                    Spanned::new(Arg::Side(Side::Left), span)
                } else if self.eat_kw(Keyword::Right) {
                    Spanned::new(Arg::Side(Side::Right), span)
                } else {
                    let e = self.expr()?;
                    Spanned::new(Arg::Scalar(e.node), e.span)
                };
                args.push(arg);
                if self.peek_kind() == Some(&TokenKind::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(BehaviorCall { name, args })
    }

    fn trigger(&mut self) -> PResult<Spanned<Trigger>> {
        let start = self.here();
        let t = if self.is_word("distance") {
            self.bump();
            let subject = if self.is_word("from") {
                self.bump();
                Some(self.ident("an object name")?)
            } else {
                None
            };
            self.expect_word("to")?;
            self.expect_word(EGO)?;
            self.expect(TokenKind::Lt)?;
            Trigger::DistanceToEgoBelow { subject, meters: self.expr()? }
        } else if self.is_word("time") {
            self.bump();
            self.expect(TokenKind::Gt)?;
            Trigger::TimeElapsed { seconds: self.expr()? }
        } else {
            return self.error(&["`distance`", "`time`"]);
        };
        Ok(Spanned::new(t, start.to(self.prev_span())))
    }

    fn require_body(&mut self) -> PResult<RequireStmt> {
        if self.is_word("collision") {
            self.bump();
            if self.eat_kw(Keyword::Of) {
                return Ok(RequireStmt::CollisionOf(self.ident("a collision kind")?));
            }
            Ok(RequireStmt::Collision)
        } else if self.is_word(EGO) {
            self.bump();
            self.expect_word("speed")?;
            self.expect_word("above")?;
            let v = self.number()?;
            self.expect_kw(Keyword::At)?;
            self.expect_word("collision")?;
            Ok(RequireStmt::EgoSpeedAbove(v))
        } else {
            self.error(&["`collision`", "`ego`"])
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(s), span })
                if !(s == "Range" && self.peek_nth_kind(1) == Some(&TokenKind::LParen))
                    && !(s == "Choice" && self.peek_nth_kind(1) == Some(&TokenKind::LBracket)) =>
            {
                self.pos += 1;
                Ok(Spanned::new(Scalar::Ref(s.clone()), *span))
            }
            _ => {
                let d = self.distribution()?;
                Ok(Spanned::new(Scalar::Lit(d.node), d.span))
            }
        }
    }

    fn distribution(&mut self) -> PResult<Spanned<Distribution>> {
        let start = self.here();
        if self.is_word("Range") {
            self.bump();
            self.expect(TokenKind::LParen)?;
            let lo = self.number()?;
            self.expect(TokenKind::Comma)?;
            let hi = self.number()?;
            self.expect(TokenKind::RParen)?;
            let span = start.to(self.prev_span());
            if lo.node >= hi.node {
                self.diags.push(Diagnostic::new(
                    Code::EmptyRange,
                    span,
                    format!("Range({:?}, {:?}) is empty; the lower bound must be below the upper bound", lo.node, hi.node),
                ));
            }
            Ok(Spanned::new(Distribution::Range(lo.node, hi.node), span))
        } else if self.is_word("Choice") {
            self.bump();
            self.expect(TokenKind::LBracket)?;
            let mut values = Vec::new();
            if self.peek_kind() != Some(&TokenKind::RBracket) {
                loop {
                    values.push(self.number()?.node);
                    if self.peek_kind() == Some(&TokenKind::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(TokenKind::RBracket)?;
            let span = start.to(self.prev_span());
            if values.is_empty() {
                self.diags.push(Diagnostic::new(Code::EmptyChoice, span, "Choice[] needs at least one value"));
            }
            Ok(Spanned::new(Distribution::Choice(values), span))
        } else if let Some(TokenKind::Number(_)) = self.peek_kind() {
            let n = self.number()?;
            Ok(Spanned::new(Distribution::Constant(n.node), n.span))
        } else {
            self.error(&["a number", "`Range(lo, hi)`", "`Choice[...]`", "a parameter name"])
        }
    }
}

/// Structural invariants that do not need name resolution.
fn check_invariants(ast: &ScenarioAst, diags: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for o in &ast.objects {
        if !seen.insert(o.name.node.as_str()) {
            diags.push(Diagnostic::new(
                Code::DuplicateName,
                o.name.span,
                format!("object `{}` is declared more than once", o.name.node),
            ));
        }
    }
    let mut seen = HashSet::new();
    for p in &ast.params {
        if !seen.insert(p.name.node.as_str()) {
            diags.push(Diagnostic::new(
                Code::DuplicateName,
                p.name.span,
                format!("parameter `{}` is declared more than once", p.name.node),
            ));
        }
    }
    let mut seen = HashSet::new();
    for b in &ast.behaviors {
        if !seen.insert(b.name.node.as_str()) {
            diags.push(Diagnostic::new(
                Code::DuplicateName,
                b.name.span,
                format!("behavior `{}` is defined more than once", b.name.node),
            ));
        }
        let mut formals = HashSet::new();
        for f in &b.params {
            if !formals.insert(f.node.as_str()) {
                diags.push(Diagnostic::new(
                    Code::DuplicateName,
                    f.span,
                    format!("behavior `{}` repeats parameter `{}`", b.name.node, f.node),
                ));
            }
        }
    }

    match ast.objects.iter().find(|o| o.is_ego()) {
        None => {
            // A failed `ego = ...` statement already has its own syntax error.
            if !diags.iter().any(|d| d.code == Code::Syntax || d.code == Code::LexChar)
                || !ast.objects.is_empty()
            {
                diags.push(Diagnostic::new(
                    Code::NoEgo,
                    Span { start: 0, end: 0, line: 1, col: 1, end_line: 1, end_col: 1 },
                    "the script declares no object named `ego`; add e.g. `ego = new Car at (0.0, 0.0)`",
                ));
            }
        }
        Some(ego) if !ego.class.node.is_vehicle() => {
            diags.push(Diagnostic::new(
                Code::EgoClass,
                ego.class.span,
                format!("ego must be a Car or Truck, not {}", ego.class.node),
            ));
        }
        Some(_) => {}
    }

    for o in &ast.objects {
        if let Some((l, w)) = &o.size {
            for e in [l, w] {
                if let Scalar::Lit(d) = &e.node {
                    if d.bounds().is_some_and(|(lo, _)| lo <= 0.0) {
                        diags.push(Diagnostic::new(
                            Code::NonPositiveDims,
                            e.span,
                            format!("size of `{}` must be strictly positive", o.name.node),
                        ));
                    }
                }
            }
        }
    }
}
