use super::{BinaryOp, Expr, UnaryOp};

use BinaryOp::{Add, Div, Mul, Pow, Sub};
use Expr::{Binary, Const, Unary, Var};

fn add(l: Expr, r: Expr) -> Expr {
    Expr::binary(Add, l, r)
}
fn sub(l: Expr, r: Expr) -> Expr {
    Expr::binary(Sub, l, r)
}
fn mul(l: Expr, r: Expr) -> Expr {
    Expr::binary(Mul, l, r)
}
fn div(l: Expr, r: Expr) -> Expr {
    Expr::binary(Div, l, r)
}
fn neg(e: Expr) -> Expr {
    Expr::unary(UnaryOp::Neg, e)
}
fn func(op: UnaryOp, e: Expr) -> Expr {
    Expr::unary(op, e)
}
fn square(e: Expr) -> Expr {
    Expr::binary(Pow, e, Const(2.0))
}

/// Unsimplified d/dx by the usual rules. `|u|' = u/|u| * u'`.
pub(super) fn derivative(e: &Expr) -> Expr {
    match e {
        Const(_) => Const(0.0),
        Var => Const(1.0),
        Unary(op, u) => {
            let du = derivative(u);
            let u = (**u).clone();
            let outer = match op {
                UnaryOp::Neg => return neg(du),
                UnaryOp::Sin => func(UnaryOp::Cos, u),
                UnaryOp::Cos => neg(func(UnaryOp::Sin, u)),
                UnaryOp::Tan => div(Const(1.0), square(func(UnaryOp::Cos, u))),
                UnaryOp::Atan => div(Const(1.0), add(Const(1.0), square(u))),
                UnaryOp::Exp => func(UnaryOp::Exp, u),
                UnaryOp::Ln => div(Const(1.0), u),
                UnaryOp::Sqrt => div(Const(0.5), func(UnaryOp::Sqrt, u)),
                UnaryOp::Abs => div(u.clone(), func(UnaryOp::Abs, u)),
                UnaryOp::Tanh => sub(Const(1.0), square(func(UnaryOp::Tanh, u))),
            };
            mul(outer, du)
        }
        Binary(op, l, r) => {
            let (dl, dr) = (derivative(l), derivative(r));
            let (l, r) = ((**l).clone(), (**r).clone());
            match op {
                Add => add(dl, dr),
                Sub => sub(dl, dr),
                Mul => add(mul(dl, r.clone()), mul(l, dr)),
                Div => div(sub(mul(dl, r.clone()), mul(l, dr)), square(r)),
                // exponent is constant by construction
                Pow => mul(mul(r.clone(), Expr::binary(Pow, l, sub(r, Const(1.0)))), dl),
            }
        }
    }
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Const(c) if *c == v)
}

/// Bottom-up constant folding with the identities 0·u, 1·u, u±0, u/1, u^1,
/// u^0 and double negation. Folding is skipped when the folded value would
/// not be finite, so `1/0` stays an expression and still fails at evaluation.
pub(super) fn simplify(e: Expr) -> Expr {
    match e {
        Const(_) | Var => e,
        Unary(op, u) => {
            let u = simplify(*u);
            if let Const(c) = u {
                if let Some(v) = op.apply(c) {
                    return Const(v);
                }
            }
            match (op, u) {
                (UnaryOp::Neg, Unary(UnaryOp::Neg, inner)) => *inner,
                (op, u) => Expr::unary(op, u),
            }
        }
        Binary(op, l, r) => {
            let (l, r) = (simplify(*l), simplify(*r));
            if let (Const(a), Const(b)) = (&l, &r) {
                if let Some(v) = op.apply(*a, *b) {
                    return Const(v);
                }
            }
            match op {
                Add if is_const(&l, 0.0) => r,
                Add | Sub if is_const(&r, 0.0) => l,
                Sub if is_const(&l, 0.0) => simplify(neg(r)),
                Mul if is_const(&l, 0.0) || is_const(&r, 0.0) => Const(0.0),
                Mul if is_const(&l, 1.0) => r,
                Mul if is_const(&r, 1.0) => l,
                Mul if is_const(&l, -1.0) => simplify(neg(r)),
                Mul if is_const(&r, -1.0) => simplify(neg(l)),
                Div if is_const(&r, 1.0) => l,
                Pow if is_const(&r, 1.0) => l,
                Pow if is_const(&r, 0.0) => Const(1.0),
                _ => Expr::binary(op, l, r),
            }
        }
    }
}
