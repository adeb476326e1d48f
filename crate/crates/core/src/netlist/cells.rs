use super::NetlistError;
use crate::verilog::{parse_expr, BinaryOp, Expr, ExprKind, UnaryOp};
use serde::Deserialize;
use std::collections::BTreeMap;

const DEFAULT_LIBRARY: &str = include_str!("cells.toml");

#[derive(Deserialize)]
struct RawCell {
    names: Vec<String>,
    output: String,
    function: Option<String>,
    next: Option<String>,
}

#[derive(Deserialize)]
struct RawLibrary {
    cell: Vec<RawCell>,
}

#[derive(Clone, Debug)]
pub enum CellFunction {
    /// Combinational output.
    Comb(Expr),
    /// Storage element; the expression gives the next state.
    State(Expr),
}

#[derive(Clone, Debug)]
pub struct CellKind {
    pub output: String,
    pub function: CellFunction,
}

/// Cell types understood by the tracer, keyed by type name.
#[derive(Clone, Debug)]
pub struct CellLibrary {
    cells: BTreeMap<String, CellKind>,
}

impl Default for CellLibrary {
    fn default() -> CellLibrary {
        CellLibrary::from_toml(DEFAULT_LIBRARY).expect("bundled cell library parses")
    }
}

impl CellLibrary {
    pub fn from_toml(text: &str) -> Result<CellLibrary, NetlistError> {
        let raw: RawLibrary = toml::from_str(text).map_err(|e| NetlistError::Library(e.to_string()))?;
        let mut cells = BTreeMap::new();
        for c in raw.cell {
            let (src, state) = match (&c.function, &c.next) {
                (Some(f), None) => (f, false),
                (None, Some(n)) => (n, true),
                _ => return Err(NetlistError::Library(format!("{:?}: exactly one of function/next", c.names))),
            };
            let e = parse_expr(src).map_err(|e| NetlistError::Library(format!("{:?}: {e}", c.names)))?;
            let function = if state { CellFunction::State(e) } else { CellFunction::Comb(e) };
            for n in c.names {
                cells.insert(
                    n,
                    CellKind {
                        output: c.output.clone(),
                        function: function.clone(),
                    },
                );
            }
        }
        Ok(CellLibrary { cells })
    }

    /// Type names are matched without the escape backslash.
    pub fn get(&self, ty: &str) -> Option<&CellKind> {
        self.cells.get(ty.strip_prefix('\\').unwrap_or(ty))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Three-valued evaluation of a cell function; `None` is unknown.
pub fn eval3(e: &Expr, pin: &dyn Fn(&str) -> Option<bool>) -> Option<bool> {
    match &e.kind {
        ExprKind::Ident(n) => pin(n),
        ExprKind::Number(n) => match n.to_bits() {
            Some((_, v, x)) if x & 1 == 0 => Some(v & 1 == 1),
            _ => None,
        },
        ExprKind::Paren(inner) => eval3(inner, pin),
        ExprKind::Unary {
            op: UnaryOp::BitNot | UnaryOp::LogicalNot,
            operand,
        } => eval3(operand, pin).map(|v| !v),
        ExprKind::Binary { op, lhs, rhs, .. } => {
            let a = eval3(lhs, pin);
            let b = eval3(rhs, pin);
            match op {
                BinaryOp::BitAnd | BinaryOp::LogAnd => match (a, b) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                },
                BinaryOp::BitOr | BinaryOp::LogOr => match (a, b) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                },
                BinaryOp::BitXor => Some(a? ^ b?),
                BinaryOp::BitXnor => Some(!(a? ^ b?)),
                _ => None,
            }
        }
        ExprKind::Ternary {
            cond,
            then_expr,
            else_expr,
        } => match eval3(cond, pin) {
            Some(true) => eval3(then_expr, pin),
            Some(false) => eval3(else_expr, pin),
            None => {
                let (t, f) = (eval3(then_expr, pin), eval3(else_expr, pin));
                if t == f {
                    t
                } else {
                    None
                }
            }
        },
        _ => None,
    }
}

/// Pin names a function reads.
pub fn inputs(e: &Expr) -> Vec<&str> {
    let mut v = e.identifiers();
    v.sort();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_library_covers_yosys_gates() {
        let lib = CellLibrary::default();
        for ty in ["$_AND_", "\\$_MUX_", "$_SDFF_PP0_", "$_SDFFE_PN1P_", "$_DFFSR_PPP_", "$_DLATCH_P_"] {
            assert!(lib.get(ty).is_some(), "{ty}");
        }
        assert!(lib.get("$_UNKNOWN_").is_none());
    }

    #[test]
    fn three_valued_semantics() {
        let lib = CellLibrary::default();
        let CellFunction::Comb(mux) = &lib.get("$_MUX_").unwrap().function else { panic!() };
        let pins = |a, b, s| move |n: &str| match n {
            "A" => a,
            "B" => b,
            _ => s,
        };
        assert_eq!(eval3(mux, &pins(Some(true), Some(true), None)), Some(true));
        assert_eq!(eval3(mux, &pins(Some(false), Some(true), None)), None);
        assert_eq!(eval3(mux, &pins(None, Some(true), Some(true))), Some(true));
        let CellFunction::State(sdff) = &lib.get("$_SDFF_PN1_").unwrap().function else { panic!() };
        assert_eq!(eval3(sdff, &|n| (n == "R").then_some(false)), Some(true));
        assert_eq!(inputs(sdff), vec!["D", "R"]);
    }
}
