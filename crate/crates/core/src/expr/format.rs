use super::{BinOp, Expr};

// Binding strength; higher binds tighter.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const ATOM: u8 = 4;

fn strength(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => SUM,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => PRODUCT,
        Expr::Neg(_) => UNARY,
        // A negative literal prints with a leading minus.
        Expr::Num(v) if v.is_sign_negative() => UNARY,
        Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => ATOM,
    }
}

/// Formats with the minimum parentheses needed for a left-associative
/// reparse to give back the same tree.
pub fn format_expr(e: &Expr) -> String {
    let mut out = String::new();
    write(e, &mut out);
    out
}

fn write_wrapped(e: &Expr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write(e, out);
        out.push(')');
    } else {
        write(e, out);
    }
}

fn write(e: &Expr, out: &mut String) {
    match e {
        Expr::Num(v) => out.push_str(&format_number(*v)),
        Expr::Var(name) => out.push_str(name),
        Expr::Neg(inner) => {
            out.push('-');
            write_wrapped(inner, strength(inner) < UNARY, out);
        }
        Expr::Binary(op, lhs, rhs) => {
            let own = strength(e);
            write_wrapped(lhs, strength(lhs) < own, out);
            out.push(' ');
            out.push(op.symbol());
            out.push(' ');
            write_wrapped(rhs, strength(rhs) <= own, out);
        }
        Expr::Call(func, args) => {
            out.push_str(func.name());
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write(arg, out);
            }
            out.push(')');
        }
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub(crate) fn format_number(v: f64) -> String {
    // Display never uses exponent notation and round-trips exactly.
    let s = format!("{v}");
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}
