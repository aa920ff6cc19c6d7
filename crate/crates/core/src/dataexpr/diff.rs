use super::{BinOp, Expr, Func, Var};

// Constructors fold the trivial 0/1 identities so repeated differentiation of
// products does not grow the tree with dead branches.

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(n) if *n == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        return b;
    }
    if is_num(&b, 0.0) {
        return a;
    }
    Expr::Binary(BinOp::Add, Box::new(a), Box::new(b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        return a;
    }
    if is_num(&a, 0.0) {
        return neg(b);
    }
    Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        return Expr::Num(0.0);
    }
    if is_num(&a, 1.0) {
        return b;
    }
    if is_num(&b, 1.0) {
        return a;
    }
    Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        return Expr::Num(0.0);
    }
    if is_num(&b, 1.0) {
        return a;
    }
    Expr::Binary(BinOp::Div, Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(0.0) => Expr::Num(0.0),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow(a: Expr, n: i32) -> Expr {
    match n {
        0 => Expr::Num(1.0),
        1 => a,
        _ => Expr::Pow(Box::new(a), n),
    }
}

pub(super) fn derivative(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Num(_) | Expr::Pi => Expr::Num(0.0),
        Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(derivative(a, var)),
        Expr::Binary(op, a, b) => {
            let (da, db) = (derivative(a, var), derivative(b, var));
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, (**b).clone()), mul((**a).clone(), db)),
                BinOp::Div => {
                    // (a'b - ab') / b^2
                    let numer = sub(mul(da, (**b).clone()), mul((**a).clone(), db));
                    div(numer, pow((**b).clone(), 2))
                }
            }
        }
        Expr::Pow(a, n) => {
            let da = derivative(a, var);
            mul(mul(Expr::Num(*n as f64), pow((**a).clone(), n - 1)), da)
        }
        Expr::Call(f, a) => {
            let da = derivative(a, var);
            let inner = (**a).clone();
            let outer = match f {
                Func::Sin => Expr::Call(Func::Cos, Box::new(inner)),
                Func::Cos => neg(Expr::Call(Func::Sin, Box::new(inner))),
                Func::Exp => Expr::Call(Func::Exp, Box::new(inner)),
                Func::Sqrt => div(Expr::Num(0.5), Expr::Call(Func::Sqrt, Box::new(inner))),
            };
            mul(outer, da)
        }
    }
}
