use alloc::string::{String, ToString};
use core::fmt;

use super::{BinaryOp, FunctionWhitelist, Node, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    Empty,
    /// `position` is a byte offset into the input.
    Syntax {
        position: usize,
        message: String,
    },
    UnknownFunction {
        name: String,
        position: usize,
    },
    IndexOutOfRange {
        index: usize,
        dimension: usize,
        position: usize,
    },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Empty => f.write_str("empty expression"),
            ParseError::Syntax { position, message } => {
                write!(f, "syntax error at position {position}: {message}")
            }
            ParseError::UnknownFunction { name, position } => {
                write!(f, "unknown function \"{name}\" at position {position}")
            }
            ParseError::IndexOutOfRange {
                index,
                dimension,
                position,
            } => write!(
                f,
                "variable index x[{index}] out of range for dimension {dimension} at position {position}"
            ),
        }
    }
}

impl core::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    StarStar,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
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

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&c) = bytes.get(start) else {
            return Ok((Tok::End, start));
        };
        let single = |tok| (tok, start);
        let tok = match c {
            b'+' => {
                self.pos += 1;
                single(Tok::Plus)
            }
            b'-' => {
                self.pos += 1;
                single(Tok::Minus)
            }
            b'*' => {
                if bytes.get(start + 1) == Some(&b'*') {
                    self.pos += 2;
                    single(Tok::StarStar)
                } else {
                    self.pos += 1;
                    single(Tok::Star)
                }
            }
            b'/' => {
                self.pos += 1;
                single(Tok::Slash)
            }
            b'(' => {
                self.pos += 1;
                single(Tok::LParen)
            }
            b')' => {
                self.pos += 1;
                single(Tok::RParen)
            }
            b'[' => {
                self.pos += 1;
                single(Tok::LBracket)
            }
            b']' => {
                self.pos += 1;
                single(Tok::RBracket)
            }
            b'0'..=b'9' | b'.' => (self.number()?, start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                self.pos = end;
                (Tok::Ident(self.src[start..end].to_string()), start)
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    position: start,
                    message: alloc::format!("unexpected character '{ch}'"),
                });
            }
        };
        Ok(tok)
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut end = start;
        let digits = |end: &mut usize| {
            let s = *end;
            while *end < bytes.len() && bytes[*end].is_ascii_digit() {
                *end += 1;
            }
            *end - s
        };
        let mut n = digits(&mut end);
        if end < bytes.len() && bytes[end] == b'.' {
            end += 1;
            n += digits(&mut end);
        }
        if n == 0 {
            return Err(ParseError::Syntax {
                position: start,
                message: "malformed number".into(),
            });
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut exp_end = end + 1;
            if exp_end < bytes.len() && (bytes[exp_end] == b'+' || bytes[exp_end] == b'-') {
                exp_end += 1;
            }
            if digits(&mut exp_end) > 0 {
                end = exp_end;
            }
        }
        let text = &self.src[start..end];
        self.pos = end;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Tok::Num(v)),
            _ => Err(ParseError::Syntax {
                position: start,
                message: alloc::format!("invalid numeric literal \"{text}\""),
            }),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
    dimension: usize,
    whitelist: &'a FunctionWhitelist,
}

pub(super) fn parse(text: &str, dimension: usize, whitelist: &FunctionWhitelist) -> Result<Node, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut parser = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        tok_pos: 0,
        dimension,
        whitelist,
    };
    parser.advance()?;
    let node = parser.sum()?;
    if parser.tok != Tok::End {
        return Err(parser.unexpected("end of input"));
    }
    Ok(node)
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, pos) = self.lexer.next()?;
        self.tok = tok;
        self.tok_pos = pos;
        Ok(())
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let found = match &self.tok {
            Tok::End => "end of input".to_string(),
            Tok::Num(v) => alloc::format!("number {v}"),
            Tok::Ident(s) => alloc::format!("\"{s}\""),
            other => alloc::format!("{other:?}"),
        };
        ParseError::Syntax {
            position: self.tok_pos,
            message: alloc::format!("expected {expected}, found {found}"),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.tok == tok {
            self.advance()
        } else {
            Err(self.unexpected(what))
        }
    }

    // sum := product (('+' | '-') product)*
    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut left = self.product()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.advance()?;
            let right = self.product()?;
            left = Node::binary(op, left, right);
        }
    }

    // product := unary (('*' | '/') unary)*
    fn product(&mut self) -> Result<Node, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.advance()?;
            let right = self.unary()?;
            left = Node::binary(op, left, right);
        }
    }

    // unary := ('-' | '+') unary | power
    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.tok {
            Tok::Minus => {
                let pos = self.tok_pos;
                if !self.whitelist.allows(UnaryOp::Neg) {
                    return Err(ParseError::UnknownFunction {
                        name: "neg".into(),
                        position: pos,
                    });
                }
                self.advance()?;
                Ok(Node::unary(UnaryOp::Neg, self.unary()?))
            }
            Tok::Plus => {
                self.advance()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // power := atom ('**' unary)?   (right-associative, binds tighter than a
    // leading minus: -a**b == -(a**b))
    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.tok == Tok::StarStar {
            self.advance()?;
            let exponent = self.unary()?;
            return Ok(Node::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Node::Constant(v))
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.sum()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let pos = self.tok_pos;
                self.advance()?;
                if name == "x" {
                    return self.variable(pos);
                }
                let op = UnaryOp::from_call_name(&name)
                    .filter(|op| self.whitelist.allows(*op))
                    .ok_or(ParseError::UnknownFunction { name, position: pos })?;
                self.expect(Tok::LParen, "'(' after function name")?;
                let arg = self.sum()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Node::unary(op, arg))
            }
            _ => Err(self.unexpected("a number, variable, function call or '('")),
        }
    }

    fn variable(&mut self, pos: usize) -> Result<Node, ParseError> {
        self.expect(Tok::LBracket, "'[' after x")?;
        let index = match self.tok {
            Tok::Num(v) if libm::trunc(v) == v && (0.0..1e15).contains(&v) => v as usize,
            _ => return Err(self.unexpected("a nonnegative integer index")),
        };
        self.advance()?;
        self.expect(Tok::RBracket, "']'")?;
        if index >= self.dimension {
            return Err(ParseError::IndexOutOfRange {
                index,
                dimension: self.dimension,
                position: pos,
            });
        }
        Ok(Node::Variable(index))
    }
}
