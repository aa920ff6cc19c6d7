//! Analytic data expressions over the plane coordinates `x` and `y`.
//!
//! Expressions appear in run configurations for body forces, boundary data,
//! exact solutions and permeabilities. The grammar is deliberately small:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?        exponent must fold to an integer
//! primary := number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp' | 'sqrt'
//! ```
//!
//! Derivatives are exact and symbolic, so manufactured right-hand sides can be
//! derived from an exact solution without finite differencing.

mod diff;
mod parse;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Abstract syntax tree of a data expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Pi,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("square root of negative value in `{0}`")]
    NegativeSqrt(String),
    #[error("zero raised to a negative power in `{0}`")]
    ZeroNegativePower(String),
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    /// Evaluates at `(x, y)`. Domain errors name the offending subexpression.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Pi => std::f64::consts::PI,
            Expr::Neg(a) => -a.eval(x, y)?,
            Expr::Binary(op, a, b) => {
                let (a_val, b_val) = (a.eval(x, y)?, b.eval(x, y)?);
                match op {
                    BinOp::Add => a_val + b_val,
                    BinOp::Sub => a_val - b_val,
                    BinOp::Mul => a_val * b_val,
                    BinOp::Div => {
                        if b_val == 0.0 {
                            return Err(ExprError::DivisionByZero(self.to_string()));
                        }
                        a_val / b_val
                    }
                }
            }
            Expr::Pow(a, n) => {
                let base = a.eval(x, y)?;
                if base == 0.0 && *n < 0 {
                    return Err(ExprError::ZeroNegativePower(self.to_string()));
                }
                base.powi(*n)
            }
            Expr::Call(f, a) => {
                let v = a.eval(x, y)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(ExprError::NegativeSqrt(self.to_string()));
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }

    /// Exact partial derivative with respect to `var`.
    pub fn differentiate(&self, var: Var) -> Expr {
        diff::derivative(self, var)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Pi => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Pi | Expr::Call(..) => 5,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Pi => f.write_str("pi"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_operand(f, a, 3)
            }
            Expr::Binary(op, a, b) => {
                let (prec, sym) = match op {
                    BinOp::Add => (1, " + "),
                    BinOp::Sub => (1, " - "),
                    BinOp::Mul => (2, "*"),
                    BinOp::Div => (2, "/"),
                };
                write_operand(f, a, prec)?;
                f.write_str(sym)?;
                // left associative: an equal-precedence right operand needs parentheses
                write_operand(f, b, prec + 1)
            }
            Expr::Pow(a, n) => {
                // the base binds tighter than unary minus
                write_operand(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Shareable scalar field `(x, y) -> value`.
pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Wraps a parsed expression as an infallible field. Evaluation errors yield
/// NaN, which the solver reports through its residual check.
pub fn to_field(expr: Expr) -> ScalarFn {
    let expr = Arc::new(expr);
    Arc::new(move |x, y| expr.eval(x, y).unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        parse(s).unwrap().eval(x, y).unwrap()
    }

    #[test]
    fn evaluates_basic_forms() {
        assert_eq!(ev("sin(x-y)", 0.0, 0.0), 0.0);
        assert_eq!(ev("x^2+y^2", 3.0, 4.0), 25.0);
        assert_eq!(ev("exp(0)", 0.3, 0.2), 1.0);
        assert_eq!(ev("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("8/4/2", 0.0, 0.0), 1.0);
        assert_eq!(ev("1-2-3", 0.0, 0.0), -4.0);
        assert!((ev("cos(pi)", 0.0, 0.0) + 1.0).abs() < 1e-15);
        assert_eq!(ev("x^(-1)", 4.0, 0.0), 0.25);
        assert_eq!(ev("sqrt(x)", 9.0, 0.0), 3.0);
    }

    #[test]
    fn stream_function_vanishes_at_center() {
        let phi = "-256*x^2*(x-1)^2*y*(y-1)*(2*y-1)";
        assert_eq!(ev(phi, 0.5, 0.5), 0.0);
        // direct arithmetic at another point
        let (x, y) = (0.3, 0.7);
        let direct = -256.0 * x * x * (x - 1.0) * (x - 1.0) * y * (y - 1.0) * (2.0 * y - 1.0);
        assert!((ev(phi, x, y) - direct).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let e = parse("1/(x-x)").unwrap();
        assert!(matches!(e.eval(0.7, 0.1), Err(ExprError::DivisionByZero(_))));
        let e = parse("sqrt(x - 2)").unwrap();
        match e.eval(1.0, 0.0) {
            Err(ExprError::NegativeSqrt(sub)) => assert_eq!(sub, "sqrt(x - 2)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn derivatives() {
        let e = parse("sin(x-y)").unwrap();
        let d = e.differentiate(Var::X);
        assert_eq!(d.eval(0.0, 0.0).unwrap(), 1.0);
        assert!((d.eval(0.4, 0.1).unwrap() - 0.3f64.cos()).abs() < 1e-15);
        let e = parse("x^3").unwrap();
        assert_eq!(e.differentiate(Var::X).eval(2.0, 0.0).unwrap(), 12.0);
    }

    #[test]
    fn stream_function_velocity_is_solenoidal() {
        let phi = parse("-256*x^2*(x-1)^2*y*(y-1)*(2*y-1)").unwrap();
        let u1 = phi.differentiate(Var::Y);
        let u2 = Expr::Neg(Box::new(phi.differentiate(Var::X)));
        let div = Expr::Binary(
            BinOp::Add,
            Box::new(u1.differentiate(Var::X)),
            Box::new(u2.differentiate(Var::Y)),
        );
        let mut state = 0x2545F4914F6CDD1Du64;
        for _ in 0..100 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let x = (state >> 11) as f64 / (1u64 << 53) as f64;
            let y = ((state.rotate_left(29)) >> 11) as f64 / (1u64 << 53) as f64;
            assert!(div.eval(x, y).unwrap().abs() < 1e-10);
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Expr::Num),
            (0u32..20).prop_map(|n| Expr::Num(n as f64)),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::Y)),
            Just(Expr::Pi),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone(), 0usize..4).prop_map(|(a, b, op)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][op];
                    Expr::Binary(op, Box::new(a), Box::new(b))
                }),
                (inner.clone(), -3i32..6).prop_map(|(a, n)| Expr::Pow(Box::new(a), n)),
                (inner, 0usize..4).prop_map(|(a, f)| {
                    let f = [Func::Sin, Func::Cos, Func::Exp, Func::Sqrt][f];
                    Expr::Call(f, Box::new(a))
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_structurally_identical(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(reparsed, e);
        }

        #[test]
        fn polynomial_derivative_matches_central_differences(
            c in proptest::collection::vec(-2.0f64..2.0, 6),
            x in -1.0f64..1.0,
            y in -1.0f64..1.0,
        ) {
            let src = format!(
                "{}*x^3*y + {}*x*y^2 - {}*y^4 + {}*x^2 + {}*(x - y)^3 + {}",
                c[0], c[1], c[2], c[3], c[4], c[5]
            );
            let e = parse(&src).unwrap();
            let step = 1e-6;
            for var in [Var::X, Var::Y] {
                let d = e.differentiate(var).eval(x, y).unwrap();
                let (xp, yp, xm, ym) = match var {
                    Var::X => (x + step, y, x - step, y),
                    Var::Y => (x, y + step, x, y - step),
                };
                let fd = (e.eval(xp, yp).unwrap() - e.eval(xm, ym).unwrap()) / (2.0 * step);
                prop_assert!((d - fd).abs() <= 1e-6 * d.abs().max(1.0), "{} vs {}", d, fd);
            }
        }

        #[test]
        fn mixed_partials_commute(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let e = parse("sin(x*y^2) + exp(x - 2*y)*x^3 + sqrt(2 + x^2)/(3 + y^2)").unwrap();
            let xy = e.differentiate(Var::X).differentiate(Var::Y).eval(x, y).unwrap();
            let yx = e.differentiate(Var::Y).differentiate(Var::X).eval(x, y).unwrap();
            prop_assert!((xy - yx).abs() < 1e-10);
        }
    }
}
