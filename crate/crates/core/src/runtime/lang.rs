//! Lexer and recursive-descent parser for the expression language.
//!
//! ```text
//! expr    := lambda | sum
//! lambda  := "fn" "(" params? ")" "->" expr
//! sum     := prod (("+" | "-") prod)*
//! prod    := unary (("*" | "/") unary)*
//! unary   := "-" unary | postfix
//! postfix := atom ("(" args? ")")*
//! atom    := literal | path | "[" exprlist? "]" | "(" expr ")"
//! args    := expr ("," expr)* (";" name "=" expr ("," name "=" expr)*)?
//! ```

use alloc::boxed::Box;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Deepest expression nesting the parser accepts.
pub const MAX_PARSE_DEPTH: usize = 200;

/// 1-based line and column of a source character.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Lit {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Null,
    Missing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, PartialEq)]
pub enum Expr {
    Literal(Lit, Pos),
    Path(Vec<String>, Pos),
    Call { target: Box<Expr>, positional: Vec<Expr>, named: Vec<(String, Expr)>, pos: Pos },
    Lambda { params: Vec<String>, body: Rc<Expr>, pos: Pos },
    BinOp { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, pos: Pos },
    Neg(Box<Expr>, Pos),
    ArrayLit(Vec<Expr>, Pos),
}

impl Expr {
    pub fn pos(&self) -> Pos {
        match self {
            Expr::Literal(_, p) | Expr::Path(_, p) | Expr::Neg(_, p) | Expr::ArrayLit(_, p) => *p,
            Expr::Call { pos, .. } | Expr::Lambda { pos, .. } | Expr::BinOp { pos, .. } => *pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}: {}", self.pos, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Float(f64),
    Str(String),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Eq,
    Arrow,
    Dot,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(i) => format!("integer {i}"),
            Tok::Float(x) => format!("number {x}"),
            Tok::Str(_) => "string".to_string(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBracket => "`[`".to_string(),
            Tok::RBracket => "`]`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Semi => "`;`".to_string(),
            Tok::Eq => "`=`".to_string(),
            Tok::Arrow => "`->`".to_string(),
            Tok::Dot => "`.`".to_string(),
            Tok::Plus => "`+`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::Slash => "`/`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c == '_' || c == '!' || c.is_alphanumeric()
}

struct Lexer<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    pos: Pos,
}

impl Lexer<'_> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn err<T>(&self, pos: Pos, message: String) -> Result<T, ParseError> {
        Err(ParseError { pos, message })
    }

    fn next(&mut self) -> Result<(Tok, Pos), ParseError> {
        while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
            self.bump();
        }
        let start = self.pos;
        let Some(c) = self.bump() else { return Ok((Tok::Eof, start)) };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            '.' => Tok::Dot,
            '+' => Tok::Plus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '-' => {
                if self.chars.peek() == Some(&'>') {
                    self.bump();
                    Tok::Arrow
                } else {
                    Tok::Minus
                }
            }
            '"' => self.string(start)?,
            c if c.is_ascii_digit() => self.number(c, start)?,
            c if is_ident_start(c) => {
                let mut s = String::from(c);
                while let Some(&c) = self.chars.peek() {
                    if !is_ident_char(c) {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Tok::Ident(s)
            }
            c => return self.err(start, format!("unexpected character {c:?}")),
        };
        Ok((tok, start))
    }

    fn string(&mut self, start: Pos) -> Result<Tok, ParseError> {
        let mut s = String::new();
        loop {
            let here = self.pos;
            match self.bump() {
                None => return self.err(start, "unterminated string".to_string()),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c) => return self.err(here, format!("unknown escape \\{c}")),
                    None => return self.err(start, "unterminated string".to_string()),
                },
                Some(c) => s.push(c),
            }
        }
    }

    fn number(&mut self, first: char, start: Pos) -> Result<Tok, ParseError> {
        let mut s = String::from(first);
        let mut float = false;
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() || c == '_' {
                if c != '_' {
                    s.push(c);
                }
                self.bump();
            } else if c == '.' && !float && !s.contains('e') {
                // `1.x` is not a float; only consume the dot before a digit.
                let mut ahead = self.chars.clone();
                ahead.next();
                if !ahead.peek().is_some_and(|d| d.is_ascii_digit()) {
                    break;
                }
                float = true;
                s.push(c);
                self.bump();
            } else if (c == 'e' || c == 'E') && !s.contains('e') {
                float = true;
                s.push('e');
                self.bump();
                if let Some(&sign) = self.chars.peek() {
                    if sign == '+' || sign == '-' {
                        s.push(sign);
                        self.bump();
                    }
                }
                if !self.chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    return self.err(start, format!("malformed number `{s}`"));
                }
            } else {
                break;
            }
        }
        if float {
            s.parse::<f64>().map(Tok::Float).or_else(|_| self.err(start, format!("malformed number `{s}`")))
        } else {
            s.parse::<i64>().map(Tok::Int).or_else(|_| self.err(start, format!("integer `{s}` does not fit Int64")))
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    pos: Pos,
    depth: usize,
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut lexer = Lexer { chars: src.chars().peekable(), pos: Pos { line: 1, col: 1 } };
    let (tok, pos) = lexer.next()?;
    let mut p = Parser { lexer, tok, pos, depth: 0 };
    let e = p.expr()?;
    if p.tok != Tok::Eof {
        return p.unexpected("end of input");
    }
    Ok(e)
}

impl Parser<'_> {
    fn advance(&mut self) -> Result<(Tok, Pos), ParseError> {
        let (tok, pos) = self.lexer.next()?;
        let prev = core::mem::replace(&mut self.tok, tok);
        let prev_pos = core::mem::replace(&mut self.pos, pos);
        Ok((prev, prev_pos))
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos, message: format!("expected {wanted}, found {}", self.tok.describe()) })
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Pos, ParseError> {
        if self.tok == tok {
            Ok(self.advance()?.1)
        } else {
            self.unexpected(wanted)
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<String, ParseError> {
        match &self.tok {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.advance()?;
                Ok(s)
            }
            _ => self.unexpected(wanted),
        }
    }

    fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, ParseError>) -> Result<T, ParseError> {
        if self.depth >= MAX_PARSE_DEPTH {
            return Err(ParseError { pos: self.pos, message: "expression nested too deeply".to_string() });
        }
        self.depth += 1;
        let out = f(self);
        self.depth -= 1;
        out
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.nested(|p| if p.tok == Tok::Ident("fn".to_string()) { p.lambda() } else { p.sum() })
    }

    fn lambda(&mut self) -> Result<Expr, ParseError> {
        let (_, pos) = self.advance()?;
        self.expect(Tok::LParen, "`(` after `fn`")?;
        let mut params: Vec<String> = Vec::new();
        if self.tok != Tok::RParen {
            loop {
                let ppos = self.pos;
                let name = self.ident("parameter name")?;
                if params.contains(&name) {
                    return Err(ParseError { pos: ppos, message: format!("duplicate parameter `{name}`") });
                }
                params.push(name);
                if self.tok != Tok::Comma {
                    break;
                }
                self.advance()?;
            }
        }
        self.expect(Tok::RParen, "`)` or `,` in parameter list")?;
        self.expect(Tok::Arrow, "`->`")?;
        let body = self.expr()?;
        Ok(Expr::Lambda { params, body: Rc::new(body), pos })
    }

    /// Each link of a left-associative chain adds a tree level, so chains
    /// count against the depth limit too.
    fn chain(
        &mut self,
        operand: fn(&mut Self) -> Result<Expr, ParseError>,
        op_of: fn(&Tok) -> Option<BinOp>,
    ) -> Result<Expr, ParseError> {
        let base = self.depth;
        let out = (|| {
            let mut lhs = operand(self)?;
            while let Some(op) = op_of(&self.tok) {
                if self.depth >= MAX_PARSE_DEPTH {
                    return Err(ParseError { pos: self.pos, message: "expression nested too deeply".to_string() });
                }
                self.depth += 1;
                let (_, pos) = self.advance()?;
                let rhs = operand(self)?;
                lhs = Expr::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), pos };
            }
            Ok(lhs)
        })();
        self.depth = base;
        out
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        self.chain(Self::prod, |t| match t {
            Tok::Plus => Some(BinOp::Add),
            Tok::Minus => Some(BinOp::Sub),
            _ => None,
        })
    }

    fn prod(&mut self) -> Result<Expr, ParseError> {
        self.chain(Self::unary, |t| match t {
            Tok::Star => Some(BinOp::Mul),
            Tok::Slash => Some(BinOp::Div),
            _ => None,
        })
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Minus {
            let (_, pos) = self.advance()?;
            let inner = self.nested(|p| p.unary())?;
            return Ok(Expr::Neg(Box::new(inner), pos));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let base = self.depth;
        let mut e = self.atom()?;
        while self.tok == Tok::LParen {
            if self.depth >= MAX_PARSE_DEPTH {
                self.depth = base;
                return Err(ParseError { pos: self.pos, message: "expression nested too deeply".to_string() });
            }
            self.depth += 1;
            let (_, pos) = self.advance()?;
            let args = self.args().and_then(|a| self.expect(Tok::RParen, "`)` or `,` in argument list").map(|_| a));
            let (positional, named) = match args {
                Ok(a) => a,
                Err(e) => {
                    self.depth = base;
                    return Err(e);
                }
            };
            e = Expr::Call { target: Box::new(e), positional, named, pos };
        }
        self.depth = base;
        Ok(e)
    }

    fn args(&mut self) -> Result<(Vec<Expr>, Vec<(String, Expr)>), ParseError> {
        let mut positional = Vec::new();
        let mut named: Vec<(String, Expr)> = Vec::new();
        if self.tok != Tok::RParen && self.tok != Tok::Semi {
            loop {
                positional.push(self.expr()?);
                if self.tok != Tok::Comma {
                    break;
                }
                self.advance()?;
            }
        }
        if self.tok == Tok::Semi {
            self.advance()?;
            loop {
                let npos = self.pos;
                let name = self.ident("argument name")?;
                if named.iter().any(|(n, _)| *n == name) {
                    return Err(ParseError { pos: npos, message: format!("duplicate named argument `{name}`") });
                }
                self.expect(Tok::Eq, "`=` after argument name")?;
                named.push((name, self.expr()?));
                if self.tok != Tok::Comma {
                    break;
                }
                self.advance()?;
            }
        }
        Ok((positional, named))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos;
        match self.tok.clone() {
            Tok::Int(i) => {
                self.advance()?;
                Ok(Expr::Literal(Lit::Int(i), pos))
            }
            Tok::Float(x) => {
                self.advance()?;
                Ok(Expr::Literal(Lit::Float(x), pos))
            }
            Tok::Str(s) => {
                self.advance()?;
                Ok(Expr::Literal(Lit::Str(s), pos))
            }
            Tok::Ident(s) => {
                let lit = match s.as_str() {
                    "true" => Some(Lit::Bool(true)),
                    "false" => Some(Lit::Bool(false)),
                    "null" => Some(Lit::Null),
                    "missing" => Some(Lit::Missing),
                    "NaN" => Some(Lit::Float(f64::NAN)),
                    "Inf" => Some(Lit::Float(f64::INFINITY)),
                    "fn" => return self.unexpected("expression (lambdas need parentheses here)"),
                    _ => None,
                };
                if let Some(lit) = lit {
                    self.advance()?;
                    return Ok(Expr::Literal(lit, pos));
                }
                let mut segments = alloc::vec![self.ident("identifier")?];
                while self.tok == Tok::Dot {
                    self.advance()?;
                    segments.push(self.ident("name after `.`")?);
                }
                Ok(Expr::Path(segments, pos))
            }
            Tok::LBracket => {
                self.advance()?;
                let mut items = Vec::new();
                if self.tok != Tok::RBracket {
                    loop {
                        items.push(self.expr()?);
                        if self.tok != Tok::Comma {
                            break;
                        }
                        self.advance()?;
                    }
                }
                self.expect(Tok::RBracket, "`]` or `,` in array literal")?;
                Ok(Expr::ArrayLit(items, pos))
            }
            Tok::LParen => {
                self.advance()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.unexpected("expression"),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "fn" | "true" | "false" | "null" | "missing" | "NaN" | "Inf")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn path(segs: &[&str], line: u32, col: u32) -> Expr {
        Expr::Path(segs.iter().map(|s| s.to_string()).collect(), Pos { line, col })
    }

    #[test]
    fn precedence() {
        let e = parse("1 + 2 * 3").unwrap();
        let Expr::BinOp { op: BinOp::Add, rhs, .. } = e else { panic!("{e:?}") };
        assert!(matches!(*rhs, Expr::BinOp { op: BinOp::Mul, .. }));
    }

    #[test]
    fn qualified_call_with_named_args() {
        let e = parse("Base.maketable(; x = [1.0, 2.0], y = [\"a\", \"b\"])").unwrap();
        let Expr::Call { target, positional, named, .. } = e else { panic!() };
        assert_eq!(*target, path(&["Base", "maketable"], 1, 1));
        assert!(positional.is_empty());
        assert_eq!(named.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(), vec!["x", "y"]);
    }

    #[test]
    fn lambda_and_immediate_call() {
        let e = parse("(fn(x) -> x * x)(2)").unwrap();
        let Expr::Call { target, positional, .. } = e else { panic!() };
        assert!(matches!(*target, Expr::Lambda { ref params, .. } if params == &["x".to_string()]));
        assert_eq!(positional, vec![Expr::Literal(Lit::Int(2), Pos { line: 1, col: 18 })]);
    }

    #[test]
    fn literals() {
        assert_eq!(parse("2.5e3").unwrap(), Expr::Literal(Lit::Float(2500.0), Pos { line: 1, col: 1 }));
        assert_eq!(parse("missing").unwrap(), Expr::Literal(Lit::Missing, Pos { line: 1, col: 1 }));
        assert_eq!(parse("Inf").unwrap(), Expr::Literal(Lit::Float(f64::INFINITY), Pos { line: 1, col: 1 }));
        assert!(matches!(parse("NaN").unwrap(), Expr::Literal(Lit::Float(x), _) if x.is_nan()));
        assert_eq!(parse(r#""a\"b\\""#).unwrap(), Expr::Literal(Lit::Str("a\"b\\".into()), Pos { line: 1, col: 1 }));
    }

    #[test]
    fn unicode_identifiers() {
        assert_eq!(parse("Nn.logσ").unwrap(), path(&["Nn", "logσ"], 1, 1));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("sqrt(4.0").unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 9 });
        let e = parse("1 +\n  * 2").unwrap_err();
        assert_eq!(e.pos, Pos { line: 2, col: 3 });
        assert!(parse("fn(x, x) -> x").is_err());
        assert!(parse("99999999999999999999").is_err());
    }

    #[test]
    fn depth_is_bounded() {
        let deep = "(".repeat(10_000) + "1" + &")".repeat(10_000);
        assert!(parse(&deep).unwrap_err().message.contains("deeply"));
        let negs = "-".repeat(10_000) + "1";
        assert!(parse(&negs).is_err());
        let chain = "1".to_string() + &" + 1".repeat(10_000);
        assert!(parse(&chain).is_err());
        let calls = "f".to_string() + &"()".repeat(10_000);
        assert!(parse(&calls).is_err());
        let ok = "1".to_string() + &" + 1".repeat(100);
        assert!(parse(&ok).is_ok());
    }
}
