//! Infix expression parser. The grammar is documented in `docs/grammar.md`.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use super::expr::{self, Expr};
use super::number::Number;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown function `{name}` at {pos}")]
    UnknownFunction { pos: usize, name: String },
}

/// Names of undefined functions the parser should accept, e.g. `Omega`.
#[derive(Debug, Clone, Default)]
pub struct ParseContext {
    pub functions: BTreeSet<String>,
}

impl ParseContext {
    pub fn with_functions<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ParseContext {
            functions: names.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_with(text, &ParseContext::default())
}

pub fn parse_with(text: &str, ctx: &ParseContext) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        ctx,
        end: text.len(),
    };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(ParseError::Syntax {
            pos: t.pos,
            msg: format!("unexpected `{}`", t.kind.describe()),
        });
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(String),
    Ident(String),
    Op(char),
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Num(s) | Kind::Ident(s) => s.clone(),
            Kind::Op(c) => c.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = k;
            let mut seen_dot = false;
            while k < chars.len() && (chars[k].1.is_ascii_digit() || (chars[k].1 == '.' && !seen_dot)) {
                seen_dot |= chars[k].1 == '.';
                k += 1;
            }
            let s: String = chars[start..k].iter().map(|x| x.1).collect();
            if s == "." {
                return Err(ParseError::Syntax {
                    pos,
                    msg: "stray `.`".into(),
                });
            }
            out.push(Token {
                kind: Kind::Num(s),
                pos,
            });
        } else if c.is_alphabetic() || c == '_' {
            let start = k;
            while k < chars.len() && (chars[k].1.is_alphanumeric() || chars[k].1 == '_') {
                k += 1;
            }
            while k < chars.len() && chars[k].1 == '\'' {
                k += 1;
            }
            let s: String = chars[start..k].iter().map(|x| x.1).collect();
            out.push(Token {
                kind: Kind::Ident(s),
                pos,
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Token {
                kind: Kind::Op(c),
                pos,
            });
            k += 1;
        } else {
            return Err(ParseError::Syntax {
                pos,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    ctx: &'a ParseContext,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: Kind::Op(o), .. }) if *o == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_op(c) {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                pos: self.here(),
                msg: format!("expected `{c}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = vec![self.term()?];
        loop {
            if self.eat_op('+') {
                acc.push(self.term()?);
            } else if self.eat_op('-') {
                acc.push(expr::neg(&self.term()?));
            } else {
                return Ok(expr::add(acc));
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_op('*') {
                acc = expr::mul2(&acc, &self.unary()?);
            } else if self.eat_op('/') {
                acc = expr::mul2(&acc, &self.reciprocal()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op('-') {
            return Ok(expr::neg(&self.unary()?));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let (base, r) = self.power_parts()?;
        Ok(match r {
            Some(r) => expr::pow(&base, &r),
            None => base,
        })
    }

    /// Divisor of `/`. `a/b^n` is read as `a*b^(-n)` so integer powers of
    /// sums stay unexpanded, as the kernel keeps them.
    fn reciprocal(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op('-') {
            return Ok(expr::neg(&self.reciprocal()?));
        }
        if self.eat_op('+') {
            return self.reciprocal();
        }
        let (base, r) = self.power_parts()?;
        Ok(expr::pow(&base, &-r.unwrap_or_else(BigRational::one)))
    }

    fn power_parts(&mut self) -> Result<(Expr, Option<BigRational>), ParseError> {
        let base = self.primary()?;
        if self.eat_op('^') {
            let at = self.here();
            let e = self.unary()?;
            let r = rational_exponent(&e).ok_or_else(|| ParseError::Syntax {
                pos: at,
                msg: format!("exponent `{e}` is not a rational constant"),
            })?;
            return Ok((base, Some(r)));
        }
        Ok((base, None))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(ParseError::Syntax {
                pos: self.end,
                msg: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            Kind::Num(s) => Number::from_decimal(&s)
                .map(Expr::num)
                .ok_or(ParseError::Syntax {
                    pos: tok.pos,
                    msg: format!("bad number `{s}`"),
                }),
            Kind::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Kind::Ident(name) => {
                if self.eat_op('(') {
                    self.call(&name, tok.pos)
                } else if name == "i" {
                    Ok(Expr::i())
                } else {
                    Ok(Expr::sym(&name))
                }
            }
            Kind::Op(c) => Err(ParseError::Syntax {
                pos: tok.pos,
                msg: format!("unexpected `{c}`"),
            }),
        }
    }

    fn call(&mut self, name: &str, pos: usize) -> Result<Expr, ParseError> {
        let mut args = vec![self.expr()?];
        while self.eat_op(',') {
            args.push(self.expr()?);
        }
        self.expect_op(')')?;
        let want = |n: usize| -> Result<(), ParseError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(ParseError::Syntax {
                    pos,
                    msg: format!("`{name}` takes {n} argument(s), got {}", args.len()),
                })
            }
        };
        match name {
            "sin" | "cos" | "exp" | "ln" | "sqrt" => {
                want(1)?;
                let a = &args[0];
                Ok(match name {
                    "sin" => expr::sin(a),
                    "cos" => expr::cos(a),
                    "exp" => expr::exp(a),
                    "ln" => expr::ln(a),
                    _ => expr::sqrt(a),
                })
            }
            "int" => {
                want(2)?;
                let var = args[1].as_symbol().cloned().ok_or(ParseError::Syntax {
                    pos,
                    msg: "second argument of `int` must be a symbol".into(),
                })?;
                Ok(expr::integral(&args[0], var))
            }
            _ => {
                let base = name.trim_end_matches('\'');
                let order = (name.len() - base.len()) as u32;
                if self.ctx.functions.contains(base) {
                    want(1)?;
                    Ok(expr::apply_undefined(Arc::from(base), &args[0], order))
                } else {
                    Err(ParseError::UnknownFunction {
                        pos,
                        name: name.to_string(),
                    })
                }
            }
        }
    }
}

fn rational_exponent(e: &Expr) -> Option<BigRational> {
    let n = e.as_number()?;
    if n.is_real() {
        Some(n.re.clone())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::expr::{add, cos, scale};

    #[test]
    fn fourier_literal() {
        let e = parse("3/8 - 1/2*cos(2*(t+th)) + 1/8*cos(4*(t+th))").unwrap();
        let p = parse("t + th").unwrap();
        let expect = add(vec![
            Expr::rational(3, 8),
            scale(&cos(&scale(&p, &Number::int(2))), &Number::ratio(-1, 2)),
            scale(&cos(&scale(&p, &Number::int(4))), &Number::ratio(1, 8)),
        ]);
        assert_eq!(e, expect);
    }

    #[test]
    fn zero_literal() {
        assert!(parse("0").unwrap().is_zero());
    }

    #[test]
    fn ln_of_sum() {
        let e = parse("ln(y+z)").unwrap();
        assert_eq!(e, expr::ln(&expr::add2(&Expr::sym("y"), &Expr::sym("z"))));
    }

    #[test]
    fn errors_carry_position() {
        match parse("x + * y") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        match parse("foo(x)") {
            Err(ParseError::UnknownFunction { name, .. }) => assert_eq!(name, "foo"),
            other => panic!("{other:?}"),
        }
        assert!(parse("x^y").is_err());
        assert!(parse("(x").is_err());
    }

    #[test]
    fn declared_functions_and_primes() {
        let ctx = ParseContext::with_functions(["Omega"]);
        let e = parse_with("Omega'(x) + y'", &ctx).unwrap();
        assert_eq!(e.to_string(), "y' + Omega'(x)");
    }

    #[test]
    fn decimals_and_unit() {
        assert_eq!(parse("0.25").unwrap(), Expr::rational(1, 4));
        assert_eq!(parse("i*i").unwrap(), Expr::int(-1));
    }

    #[test]
    fn divided_powers_of_sums_stay_factored() {
        let s = parse("1 + x").unwrap();
        let e = parse("y/(1 + x)^2").unwrap();
        assert_eq!(e, expr::mul2(&Expr::sym("y"), &expr::powi(&s, -2)));
        assert_ne!(e, parse("y/((1 + x)^2)").unwrap());
        let q = parse("x/(1 + x)/(2 + x^2)").unwrap();
        assert_eq!(parse(&q.to_string()).unwrap(), q);
    }
}
