//! Integer evaluation of constant expressions (parameter values, range bounds).

use super::ast::*;

/// Evaluate `e` with `lookup` supplying parameter values. Returns `None` for
/// non-constant expressions, x/z literals, and arithmetic faults.
pub fn eval(e: &Expr, lookup: &dyn Fn(&str) -> Option<i128>) -> Option<i128> {
    match &e.kind {
        ExprKind::Number(n) => n.value_u128().and_then(|v| i128::try_from(v).ok()),
        ExprKind::Ident(name) => lookup(name),
        ExprKind::Paren(inner) => eval(inner, lookup),
        ExprKind::Unary { op, operand } => {
            let v = eval(operand, lookup)?;
            Some(match op {
                UnaryOp::Plus => v,
                UnaryOp::Minus => v.checked_neg()?,
                UnaryOp::LogicalNot => (v == 0) as i128,
                UnaryOp::BitNot => !v,
                _ => return None,
            })
        }
        ExprKind::Binary { op, lhs, rhs, .. } => {
            let a = eval(lhs, lookup)?;
            let b = eval(rhs, lookup)?;
            Some(match op {
                BinaryOp::Add => a.checked_add(b)?,
                BinaryOp::Sub => a.checked_sub(b)?,
                BinaryOp::Mul => a.checked_mul(b)?,
                BinaryOp::Div => a.checked_div(b)?,
                BinaryOp::Mod => a.checked_rem(b)?,
                BinaryOp::Pow => a.checked_pow(u32::try_from(b).ok()?)?,
                BinaryOp::Shl | BinaryOp::AShl => a.checked_shl(u32::try_from(b).ok()?)?,
                BinaryOp::Shr | BinaryOp::AShr => a.checked_shr(u32::try_from(b).ok()?)?,
                BinaryOp::Lt => (a < b) as i128,
                BinaryOp::Le => (a <= b) as i128,
                BinaryOp::Gt => (a > b) as i128,
                BinaryOp::Ge => (a >= b) as i128,
                BinaryOp::Eq | BinaryOp::CaseEq => (a == b) as i128,
                BinaryOp::Ne | BinaryOp::CaseNe => (a != b) as i128,
                BinaryOp::BitAnd => a & b,
                BinaryOp::BitOr => a | b,
                BinaryOp::BitXor => a ^ b,
                BinaryOp::BitXnor => !(a ^ b),
                BinaryOp::LogAnd => (a != 0 && b != 0) as i128,
                BinaryOp::LogOr => (a != 0 || b != 0) as i128,
            })
        }
        ExprKind::Ternary {
            cond,
            then_expr,
            else_expr,
        } => {
            if eval(cond, lookup)? != 0 {
                eval(then_expr, lookup)
            } else {
                eval(else_expr, lookup)
            }
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_expr;

    #[test]
    fn evaluates_with_params() {
        let e = parse_expr("(W * 2) - 1").unwrap();
        let v = eval(&e, &|n| (n == "W").then_some(8));
        assert_eq!(v, Some(15));
        assert_eq!(eval(&parse_expr("N").unwrap(), &|_| None), None);
        assert_eq!(eval(&parse_expr("1 << 4").unwrap(), &|_| None), Some(16));
    }
}
