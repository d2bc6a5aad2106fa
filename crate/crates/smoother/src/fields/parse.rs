//! A small infix syntax for fields, handy in tests, scenarios and the guide.
//!
//! Grammar (usual precedence, `^` binds tightest and takes an integer):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' '-'? integer)?
//! atom   := number | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use std::sync::Arc;

use super::{konst, Expr, Node, Piece};
use crate::error::{Error, Result};

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

pub(crate) fn parse_expr(dim: usize, src: &str) -> Result<Expr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, dim };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

fn neg(e: Expr) -> Expr {
    Arc::new(Node::Product(vec![konst(-1.0), e]))
}

fn sub(a: Expr, b: Expr) -> Expr {
    Arc::new(Node::Sum(vec![a, neg(b)]))
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(neg(self.term()?));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Arc::new(Node::Sum(terms)) })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                let r = self.unary()?;
                acc = Arc::new(Node::Product(vec![acc, r]));
            } else if self.eat(b'/') {
                let r = self.unary()?;
                acc = Arc::new(Node::Quotient(acc, r));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(neg(self.unary()?))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let negative = self.eat(b'-');
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let txt = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let n: i32 = txt.parse().map_err(|_| self.error("expected integer exponent"))?;
            return Ok(Arc::new(Node::Pow(base, if negative { -n } else { n })));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.error("expected an operand")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign = (c == b'-' || c == b'+')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let txt = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        txt.parse::<f64>().map(konst).map_err(|_| self.error("malformed number"))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        let var = match name.as_str() {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()),
        };
        if let Some(i) = var {
            if i >= self.dim {
                return Err(self.error(&format!("variable {name} exceeds dimension {}", self.dim)));
            }
            return Ok(Arc::new(Node::Coord(i)));
        }
        if !self.eat(b'(') {
            return Err(self.error(&format!("unknown identifier {name}")));
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return Err(self.error("expected ')'"));
        }
        let arity = |n: usize, args: &Vec<Expr>| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("{name} takes {n} argument(s)")))
            }
        };
        match name.as_str() {
            "sqrt" => {
                arity(1, &args)?;
                Ok(Arc::new(Node::Sqrt(args[0].clone())))
            }
            "abs" => {
                arity(1, &args)?;
                let a = args[0].clone();
                Ok(Arc::new(Node::Piecewise(vec![
                    Piece { conds: vec![a.clone()], value: a.clone() },
                    Piece { conds: vec![], value: neg(a) },
                ])))
            }
            "max" | "min" => {
                arity(2, &args)?;
                let (a, b) = (args[0].clone(), args[1].clone());
                let cond = if name == "max" { sub(a.clone(), b.clone()) } else { sub(b.clone(), a.clone()) };
                Ok(Arc::new(Node::Piecewise(vec![
                    Piece { conds: vec![cond], value: a },
                    Piece { conds: vec![], value: b },
                ])))
            }
            _ => Err(Error::Parse(format!("unknown function {name}"))),
        }
    }
}
