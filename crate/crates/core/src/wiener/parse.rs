//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | factor
//! factor := base ("^" INT)?
//! base   := NUMBER | "w" INT | FUNC "(" args ")" | "(" expr ")"
//! FUNC   := "exp" | "tanh" | "hermite"      (hermite takes the integer order first)
//! ```
//!
//! Division is accepted only by constant subexpressions, which keeps every
//! parsed expression smooth on all of R^n.

use super::expr::Expression;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Coord(usize),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line: tl, column: tc });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            let mut integral = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(tl, tc, format!("malformed number '{s}'")))?;
            col += i - start;
            out.push(Token {
                tok: Tok::Num(v, integral),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match s.strip_prefix('w') {
                Some(digits) if !digits.is_empty() && digits.chars().all(|d| d.is_ascii_digit()) => {
                    Tok::Coord(
                        digits
                            .parse()
                            .map_err(|_| syntax(tl, tc, format!("coordinate index too large in '{s}'")))?,
                    )
                }
                _ => Tok::Ident(s),
            };
            out.push(Token { tok, line: tl, column: tc });
            continue;
        }
        return Err(syntax(tl, tc, format!("unexpected character '{c}'")));
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            Err(syntax(t.line, t.column, format!("expected {what}, found {}", describe(&t.tok))))
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    lhs = lhs + self.term()?;
                }
                Tok::Minus => {
                    self.next();
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.next();
                    lhs = lhs * self.unary()?;
                }
                Tok::Slash => {
                    let at = self.next();
                    let rhs = self.unary()?;
                    if !rhs.coordinates().is_empty() {
                        return Err(syntax(
                            at.line,
                            at.column,
                            "division is only supported by constant expressions",
                        ));
                    }
                    let d = rhs.eval(&[]);
                    if d == 0.0 || !d.is_finite() {
                        return Err(syntax(at.line, at.column, "division by zero"));
                    }
                    lhs = lhs * Expression::Constant(1.0 / d);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expression> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(-self.unary()?);
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expression> {
        let base = self.base()?;
        if self.peek().tok == Tok::Caret {
            self.next();
            let k = self.integer("an integer exponent")?;
            if k == 0 {
                let t = &self.toks[self.pos - 1];
                return Err(syntax(t.line, t.column, "exponent must be at least 1"));
            }
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn integer(&mut self, what: &str) -> Result<u32> {
        let t = self.next();
        match t.tok {
            Tok::Num(v, true) if v <= u32::MAX as f64 => Ok(v as u32),
            other => Err(syntax(t.line, t.column, format!("expected {what}, found {}", describe(&other)))),
        }
    }

    fn base(&mut self) -> Result<Expression> {
        let t = self.next();
        match t.tok {
            Tok::Num(v, _) => Ok(Expression::Constant(v)),
            Tok::Coord(i) => {
                if i >= self.dim {
                    Err(Error::CoordinateOutOfRange { index: i, dim: self.dim })
                } else {
                    Ok(Expression::Coordinate(i))
                }
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.expect(Tok::LParen, "'(' after function name")?;
                let e = match name.as_str() {
                    "exp" => self.expr()?.exp(),
                    "tanh" => self.expr()?.tanh(),
                    "hermite" => {
                        let q = self.integer("an integer Hermite order")?;
                        self.expect(Tok::Comma, "','")?;
                        self.expr()?.hermite(q)
                    }
                    _ => {
                        return Err(syntax(t.line, t.column, format!("unknown function '{name}'")));
                    }
                };
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            other => Err(syntax(t.line, t.column, format!("unexpected {}", describe(&other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v, _) => format!("number {v}"),
        Tok::Coord(i) => format!("coordinate w{i}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::End => "end of input".into(),
        other => format!("'{}'", match other {
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            Tok::LParen => "(",
            Tok::RParen => ")",
            _ => ",",
        }),
    }
}

/// Parses `text` into an expression over coordinates `w0 .. w{dim-1}`.
pub fn parse_expression(text: &str, dim: usize) -> Result<Expression> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        dim,
    };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return Err(syntax(t.line, t.column, format!("unexpected {}", describe(&t.tok))));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_matches_hermite() {
        let e = parse_expression("w0^2 - 1", 1).unwrap();
        assert_eq!(e.eval(&[2.0]), 3.0);
    }

    #[test]
    fn function_calls() {
        let e = parse_expression("tanh(w0 + 0.5*w1)", 2).unwrap();
        assert!((e.eval(&[0.2, 0.4]) - 0.4f64.tanh()).abs() < 1e-15);
        let h = parse_expression("hermite(3, w1) * exp(-w0)", 2).unwrap();
        assert!((h.eval(&[1.0, 1.0]) - (-2.0 * (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn index_out_of_range() {
        assert_eq!(
            parse_expression("w5", 3),
            Err(Error::CoordinateOutOfRange { index: 5, dim: 3 })
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_expression("w0 +\n  * w1", 2) {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expression("foo(w0)", 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("w0 / w1", 2), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("w0^0", 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("(w0", 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("w0 w1", 2), Err(Error::Syntax { .. })));
    }

    #[test]
    fn precedence_and_division() {
        let e = parse_expression("-w0^2 + 6 / 3 * w1", 2).unwrap();
        assert_eq!(e.eval(&[3.0, 1.5]), -9.0 + 3.0);
        let e = parse_expression("1.5e-1 * w0", 1).unwrap();
        assert!((e.eval(&[2.0]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn whitespace_is_insignificant() {
        let a = parse_expression("exp( w0 )*w1", 2).unwrap();
        let b = parse_expression("exp(w0) * w1", 2).unwrap();
        assert_eq!(a, b);
    }
}
