//! Infix model exchange format.
//!
//! Grammar (Python/sympy precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('**' unary)?
//! atom    := number | variable | name '(' sum ')' | '(' sum ')'
//! ```
//!
//! A minus sign directly followed by a numeric literal (and not by `**`) is
//! read as a negative constant, so `print_infix` can emit negative constants
//! bare and `Neg(Const(c))` as `-(c)`.

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    StarStar,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                if self.src.get(self.pos + 1) == Some(&b'*') {
                    self.pos += 2;
                    Tok::StarStar
                } else {
                    self.pos += 1;
                    Tok::Star
                }
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => self.number()?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Tok::Ident(s.to_string())
            }
            _ => {
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character `{}`", c as char),
                })
            }
        };
        Ok((start, tok))
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let digits = |l: &mut Self| {
            while l.pos < l.src.len() && l.src[l.pos].is_ascii_digit() {
                l.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Tok::Num)
            .ok_or_else(|| ParseError {
                offset: start,
                message: format!("invalid number `{text}`"),
            })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer {
            src: text.as_bytes(),
            pos: 0,
        };
        let (at, tok) = lexer.next()?;
        Ok(Parser { lexer, tok, at })
    }

    fn bump(&mut self) -> Result<Tok, ParseError> {
        let (at, tok) = self.lexer.next()?;
        self.at = at;
        Ok(std::mem::replace(&mut self.tok, tok))
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.at,
            message: message.into(),
        })
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.product()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok != Tok::Minus {
            return self.power();
        }
        self.bump()?;
        if let Tok::Num(v) = self.tok {
            // `-2` is a literal, `-2**x` is -(2**x)
            let save_lexer_pos = self.lexer.pos;
            let save_at = self.at;
            let (_, peek) = self.lexer.next()?;
            self.lexer.pos = save_lexer_pos;
            self.at = save_at;
            if peek != Tok::StarStar {
                self.bump()?;
                return Ok(Expr::Const(-v));
            }
        }
        Ok(Expr::unary(UnaryOp::Neg, self.unary()?))
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.tok == Tok::StarStar {
            self.bump()?;
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(index) = variable_index(&name) {
                    self.bump()?;
                    return Ok(Expr::Var(index));
                }
                let Some(op) = UnaryOp::from_name(&name) else {
                    return self.error(format!("unknown identifier `{name}`"));
                };
                self.bump()?;
                if self.tok != Tok::LParen {
                    return self.error(format!("expected `(` after `{name}`"));
                }
                self.bump()?;
                let arg = self.sum()?;
                self.expect_rparen()?;
                Ok(Expr::unary(op, arg))
            }
            Tok::End => self.error("unexpected end of input"),
            other => self.error(format!("unexpected token {other:?}")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::RParen {
            return self.error("expected `)`");
        }
        self.bump()?;
        Ok(())
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('x')?;
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Parses the infix model exchange format.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.sum()?;
    if p.tok != Tok::End {
        return p.error("trailing input");
    }
    Ok(e)
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if c.is_sign_negative() => PREC_UNARY,
        Expr::Const(_) | Expr::Var(_) => PREC_ATOM,
        Expr::Unary(UnaryOp::Neg, _) => PREC_UNARY,
        Expr::Unary(..) => PREC_ATOM,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_SUM,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_PRODUCT,
        Expr::Binary(BinaryOp::Pow, ..) => PREC_POWER,
    }
}

fn format_number(v: f64) -> String {
    // Debug gives the shortest round-tripping form and switches to
    // exponent notation for very large/small magnitudes.
    format!("{v:?}")
}

fn write_child(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Const(c) => out.push_str(&format_number(*c)),
        Expr::Var(i) => {
            out.push('x');
            out.push_str(&i.to_string());
        }
        Expr::Unary(UnaryOp::Neg, c) => {
            out.push('-');
            // -(2.0) keeps Neg(Const) distinct from the literal -2.0
            let parens = precedence(c) < PREC_UNARY || matches!(**c, Expr::Const(_));
            write_child(out, c, parens);
        }
        Expr::Unary(op, c) => {
            out.push_str(op.name());
            out.push('(');
            write_expr(out, c);
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            let (lp, rp) = match op {
                BinaryOp::Add | BinaryOp::Sub => (precedence(l) < PREC_SUM, precedence(r) <= PREC_SUM),
                BinaryOp::Mul | BinaryOp::Div => (precedence(l) < PREC_PRODUCT, precedence(r) <= PREC_PRODUCT),
                BinaryOp::Pow => (precedence(l) <= PREC_POWER, precedence(r) < PREC_UNARY),
            };
            write_child(out, l, lp);
            match op {
                BinaryOp::Pow => out.push_str("**"),
                _ => {
                    out.push(' ');
                    out.push_str(op.symbol());
                    out.push(' ');
                }
            }
            write_child(out, r, rp);
        }
    }
}

/// Prints `expr` in the infix exchange format with minimal parentheses.
pub fn print_infix(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::var(i)
    }

    #[test]
    fn parses_simple_sum() {
        assert_eq!(
            parse("x0 + 1").unwrap(),
            Expr::binary(BinaryOp::Add, x(0), Expr::constant(1.0))
        );
    }

    #[test]
    fn unterminated_call_reports_offset() {
        let err = parse("sin(").unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("x0 - x1 - x2").unwrap(), (x(0) - x(1)) - x(2));
        assert_eq!(parse("x0 / x1 * x2").unwrap(), (x(0) / x(1)) * x(2));
        assert_eq!(parse("x0**x1**x2").unwrap(), x(0).pow(x(1).pow(x(2))));
        assert_eq!(parse("-x0**2").unwrap(), -(x(0).powi(2)));
        assert_eq!(parse("-2**x0").unwrap(), -(Expr::constant(2.0).pow(x(0))));
        assert_eq!(parse("-2 * x0").unwrap(), -2.0 * x(0));
        assert_eq!(parse("x0**-1").unwrap(), x(0).pow(Expr::constant(-1.0)));
        assert_eq!(parse("x_3").unwrap(), x(3));
        assert_eq!(parse("1.5e-3").unwrap(), Expr::constant(1.5e-3));
    }

    #[test]
    fn errors() {
        assert!(parse("").is_err());
        assert!(parse("x0 +").is_err());
        assert!(parse("foo(x0)").is_err());
        assert!(parse("sin x0").is_err());
        assert!(parse("x0 $ 1").is_err());
        assert!(parse("(x0").is_err());
        assert!(parse("x0)").is_err());
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(print_infix(&(x(0) + x(1) * x(2))), "x0 + x1*x2".replace('*', " * "));
        assert_eq!(print_infix(&((x(0) + x(1)) * x(2))), "(x0 + x1) * x2");
        assert_eq!(print_infix(&(x(0) - (x(1) - x(2)))), "x0 - (x1 - x2)");
        assert_eq!(print_infix(&x(0).powi(2)), "x0**2.0");
        assert_eq!(print_infix(&-Expr::constant(2.0)), "-(2.0)");
        assert_eq!(print_infix(&Expr::constant(-2.0)), "-2.0");
        assert_eq!(print_infix(&Expr::constant(-2.0).pow(x(0))), "(-2.0)**x0");
    }

    #[test]
    fn round_trip_tricky_shapes() {
        let cases = vec![
            -Expr::constant(2.0),
            -(-Expr::constant(2.0)),
            -Expr::constant(-2.0),
            Expr::constant(-2.0).pow(x(0)),
            -(Expr::constant(2.0).pow(x(0))),
            x(0).pow(x(1)).pow(x(2)),
            x(0) * (x(1) * x(2)),
            x(0) / (x(1) / x(2)),
            x(0) - -x(1),
            x(0).pow(-x(1)),
            x(0).pow(Expr::constant(-0.5)),
            (-x(0)).pow(Expr::constant(2.0)),
            Expr::constant(1e-300) + Expr::constant(6.02e23),
            (x(0) + x(1)).sin().erf().abs(),
        ];
        for e in cases {
            let s = print_infix(&e);
            assert_eq!(parse(&s).unwrap(), e, "{s}");
        }
    }
}
