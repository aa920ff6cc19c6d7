use super::{BinOp, Expr, ExprError, Func, Var};

/// Parses a data expression. Errors carry the byte offset of the problem.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let exp_start = self.pos;
        let exponent = self.unary()?;
        let value = fold_constant(&exponent).ok_or(ExprError::Syntax {
            offset: exp_start,
            message: "exponent must be a constant integer".into(),
        })?;
        if value.fract() != 0.0 || value.abs() > i32::MAX as f64 {
            return Err(ExprError::Syntax {
                offset: exp_start,
                message: format!("exponent {value} is not an integer"),
            });
        }
        Ok(Expr::Pow(Box::new(base), value as i32))
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of input"));
        };
        if c == '(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while matches!(self.peek_raw(), Some(ch) if ch.is_ascii_alphanumeric() || ch == '_') {
                self.pos += 1;
            }
            let name = &self.src[start..self.pos];
            return match name {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "pi" => Ok(Expr::Pi),
                _ => {
                    let func = Func::from_name(name).ok_or(ExprError::Syntax {
                        offset: start,
                        message: format!("unknown identifier `{name}`"),
                    })?;
                    if !self.eat('(') {
                        return Err(self.error(format!("expected `(` after `{name}`")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected `)`"));
                    }
                    Ok(Expr::Call(func, Box::new(arg)))
                }
            };
        }
        Err(self.error(format!("unexpected `{c}`")))
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        self.src[start..i]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{}`", &self.src[start..i]),
            })
    }
}

fn fold_constant(e: &Expr) -> Option<f64> {
    Some(match e {
        Expr::Num(v) => *v,
        Expr::Pi => std::f64::consts::PI,
        Expr::Var(_) => return None,
        Expr::Neg(a) => -fold_constant(a)?,
        Expr::Binary(op, a, b) => {
            let (a, b) = (fold_constant(a)?, fold_constant(b)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            }
        }
        Expr::Pow(a, n) => fold_constant(a)?.powi(*n),
        Expr::Call(..) => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offset_of(s: &str) -> usize {
        match parse(s) {
            Err(ExprError::Syntax { offset, .. }) => offset,
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(offset_of("2*^x"), 2);
        assert_eq!(offset_of("sin x"), 4);
        assert_eq!(offset_of("(x + 1"), 6);
        assert_eq!(offset_of("x ^ y"), 4);
        assert_eq!(offset_of("x^1.5"), 2);
        assert_eq!(offset_of("foo(1)"), 0);
        assert_eq!(offset_of("x y"), 2);
        assert_eq!(offset_of(""), 0);
    }

    #[test]
    fn precedence_and_associativity() {
        use Expr::*;
        let x = || Box::new(Var(super::Var::X));
        assert_eq!(parse("-x^2").unwrap(), Neg(Box::new(Pow(x(), 2))));
        assert_eq!(
            parse("x - x - x").unwrap(),
            Binary(BinOp::Sub, Box::new(Binary(BinOp::Sub, x(), x())), x())
        );
        assert_eq!(parse("x^2^2").unwrap(), Pow(x(), 4));
        assert_eq!(parse("1.5e-3").unwrap(), Num(1.5e-3));
    }
}
