use std::f64::consts;

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected one of {}", .expected.join(", "))]
    Syntax { offset: usize, expected: Vec<&'static str> },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} depends on x; only constant exponents are supported")]
    NonConstantExponent { offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Returns the next token and the byte offset where it starts.
    fn next(&mut self) -> Result<(Token, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(ch) = rest.chars().next() else {
            return Ok((Token::End, start));
        };
        let single = match ch {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '/' => Some(Token::Slash),
            '^' => Some(Token::Caret),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((tok, start));
        }
        if ch.is_ascii_digit() || ch == '.' {
            let len = number_len(rest.as_bytes());
            return match rest[..len].parse::<f64>() {
                Ok(v) if len > 0 => {
                    self.pos += len;
                    Ok((Token::Number(v), start))
                }
                _ => Err(ParseError::Syntax {
                    offset: start,
                    expected: vec!["number"],
                }),
            };
        }
        if ch.is_alphabetic() || ch == '_' {
            let len = rest
                .char_indices()
                .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
                .map_or(rest.len(), |(i, _)| i);
            self.pos += len;
            return Ok((Token::Ident(rest[..len].to_string()), start));
        }
        Err(ParseError::Syntax {
            offset: start,
            expected: vec!["number", "identifier", "operator", "("],
        })
    }
}

// Length of the longest prefix matching digits [. digits] [(e|E) [+-] digits].
fn number_len(bytes: &[u8]) -> usize {
    let digits = |from: usize| bytes[from..].iter().take_while(|b| b.is_ascii_digit()).count();
    let mut i = digits(0);
    if bytes.get(i) == Some(&b'.') {
        i += 1 + digits(i + 1);
    }
    if matches!(bytes.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(bytes.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        let exp_digits = digits(j);
        if exp_digits > 0 {
            i = j + exp_digits;
        }
    }
    i
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Token,
    offset: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.lexer.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn syntax(&self, expected: &[&'static str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset,
            expected: expected.to_vec(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.tok {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            lhs = Expr::binary(op, lhs, self.factor()?);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Token::Minus {
            self.bump()?;
            return Ok(Expr::unary(UnaryOp::Neg, self.power()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.tok != Token::Caret {
            return Ok(base);
        }
        self.bump()?;
        let exponent_offset = self.offset;
        let exponent = self.power()?;
        if !exponent.is_constant() {
            return Err(ParseError::NonConstantExponent {
                offset: exponent_offset,
            });
        }
        Ok(Expr::binary(BinaryOp::Pow, base, exponent))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match std::mem::replace(&mut self.tok, Token::End) {
            Token::Number(v) => {
                self.bump()?;
                Ok(Expr::Const(v))
            }
            Token::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let offset = self.offset;
                match name.as_str() {
                    "x" => {
                        self.bump()?;
                        Ok(Expr::Var)
                    }
                    "pi" => {
                        self.bump()?;
                        Ok(Expr::Const(consts::PI))
                    }
                    "e" => {
                        self.bump()?;
                        Ok(Expr::Const(consts::E))
                    }
                    _ => {
                        let Some(func) = UnaryOp::from_name(&name) else {
                            return Err(ParseError::UnknownIdentifier { name, offset });
                        };
                        self.bump()?;
                        if self.tok != Token::LParen {
                            return Err(self.syntax(&["("]));
                        }
                        self.bump()?;
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        Ok(Expr::unary(func, arg))
                    }
                }
            }
            other => {
                self.tok = other;
                Err(self.syntax(&["number", "x", "pi", "e", "function", "("]))
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Token::RParen {
            return Err(self.syntax(&[")", "+", "-", "*", "/", "^"]));
        }
        self.bump()
    }
}

/// Parses a coefficient expression in the variable `x`.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        lexer: Lexer { src: source, pos: 0 },
        tok: Token::End,
        offset: 0,
    };
    parser.bump()?;
    let expr = parser.expr()?;
    if parser.tok != Token::End {
        return Err(parser.syntax(&["+", "-", "*", "/", "^", "end of input"]));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    #[test]
    fn builds_expected_trees() {
        assert_eq!(parse("1-x").unwrap(), Expr::binary(BinaryOp::Sub, c(1.0), Expr::Var));
        assert_eq!(
            parse("2+sin(x)").unwrap(),
            Expr::binary(BinaryOp::Add, c(2.0), Expr::unary(UnaryOp::Sin, Expr::Var))
        );
        assert_eq!(
            parse("-x/(1+x^2)").unwrap(),
            Expr::binary(
                BinaryOp::Div,
                Expr::unary(UnaryOp::Neg, Expr::Var),
                Expr::binary(BinaryOp::Add, c(1.0), Expr::binary(BinaryOp::Pow, Expr::Var, c(2.0)))
            )
        );
    }

    #[test]
    fn precedence_and_associativity() {
        // unary minus binds looser than ^
        assert_eq!(parse("-x^2").unwrap().evaluate(3.0).unwrap(), -9.0);
        // ^ is right-associative
        assert_eq!(parse("2^3^2").unwrap().evaluate(0.0).unwrap(), 512.0);
        // - and / are left-associative
        assert_eq!(parse("8-4-2").unwrap().evaluate(0.0).unwrap(), 2.0);
        assert_eq!(parse("8/4/2").unwrap().evaluate(0.0).unwrap(), 1.0);
        assert_eq!(parse(" 1 +\t2 * x ").unwrap(), parse("1+2*x").unwrap());
    }

    #[test]
    fn numbers_and_constants() {
        assert_eq!(parse("1.5e-3").unwrap(), c(1.5e-3));
        assert_eq!(parse(".25").unwrap(), c(0.25));
        assert_eq!(parse("2E+2").unwrap(), c(200.0));
        assert_eq!(parse("pi").unwrap(), c(consts::PI));
        assert_eq!(parse("e").unwrap(), c(consts::E));
        // `e` after a number without exponent digits is an identifier
        assert!(matches!(parse("2e"), Err(ParseError::Syntax { offset: 1, .. })));
    }

    #[test]
    fn unknown_identifier() {
        assert_eq!(
            parse("y+1"),
            Err(ParseError::UnknownIdentifier {
                name: "y".into(),
                offset: 0
            })
        );
        assert!(matches!(parse("log(x)"), Err(ParseError::UnknownIdentifier { .. })));
    }

    #[test]
    fn syntax_errors_report_offset() {
        match parse("1+*x") {
            Err(ParseError::Syntax { offset, expected }) => {
                assert_eq!(offset, 2);
                assert!(expected.contains(&"("));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("sin x"), Err(ParseError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("(1+x"), Err(ParseError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("1 2"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse(""), Err(ParseError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("1 $"), Err(ParseError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn exponent_must_be_constant() {
        assert_eq!(parse("2^x"), Err(ParseError::NonConstantExponent { offset: 2 }));
        assert!(parse("x^(1/2)").is_ok());
    }
}
