//! Stable addresses for statements and expressions inside a module.
//!
//! A path survives edits elsewhere in the file as long as the item and
//! statement structure leading to the node is unchanged, which is what the
//! transformation rules re-validate before applying a site.

use super::ast::*;
use serde::{Deserialize, Serialize};

/// `stmt == None` addresses the item itself; `Some(v)` walks `Stmt::children`
/// indices starting from the body of an `always` item.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodePath {
    pub item: usize,
    pub stmt: Option<Vec<usize>>,
}

/// `slot` indexes `Stmt::own_exprs` (statement paths) or `Item::exprs`
/// (item paths); `chain` then walks `Expr::children`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExprPath {
    pub node: NodePath,
    pub slot: usize,
    pub chain: Vec<usize>,
}

impl NodePath {
    pub fn item(item: usize) -> NodePath {
        NodePath { item, stmt: None }
    }

    pub fn stmt(item: usize, path: Vec<usize>) -> NodePath {
        NodePath {
            item,
            stmt: Some(path),
        }
    }
}

pub fn stmt_at<'a>(m: &'a Module, p: &NodePath) -> Option<&'a Stmt> {
    let item = m.items.get(p.item)?;
    let ItemKind::Always(a) = &item.kind else {
        return None;
    };
    let mut s = &a.body;
    for &i in p.stmt.as_ref()? {
        s = s.children().into_iter().nth(i)?;
    }
    Some(s)
}

pub fn expr_at<'a>(m: &'a Module, p: &ExprPath) -> Option<&'a Expr> {
    let root = match &p.node.stmt {
        Some(_) => stmt_at(m, &p.node)?.own_exprs().into_iter().nth(p.slot)?,
        None => m.items.get(p.node.item)?.exprs().into_iter().nth(p.slot)?,
    };
    let mut e = root;
    for &i in &p.chain {
        e = e.children().into_iter().nth(i)?;
    }
    Some(e)
}

/// Every statement of every `always` item, preorder.
pub fn all_stmts(m: &Module) -> Vec<(NodePath, &Stmt)> {
    fn rec<'a>(s: &'a Stmt, item: usize, path: &mut Vec<usize>, out: &mut Vec<(NodePath, &'a Stmt)>) {
        out.push((NodePath::stmt(item, path.clone()), s));
        for (i, c) in s.children().into_iter().enumerate() {
            path.push(i);
            rec(c, item, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    for (i, item) in m.items.iter().enumerate() {
        if let ItemKind::Always(a) = &item.kind {
            rec(&a.body, i, &mut Vec::new(), &mut out);
        }
    }
    out
}

/// Every expression node in the module body, preorder. Expressions inside
/// `always` items are addressed through their statements.
pub fn all_exprs(m: &Module) -> Vec<(ExprPath, &Expr)> {
    fn rec<'a>(e: &'a Expr, base: &ExprPath, chain: &mut Vec<usize>, out: &mut Vec<(ExprPath, &'a Expr)>) {
        out.push((
            ExprPath {
                node: base.node.clone(),
                slot: base.slot,
                chain: chain.clone(),
            },
            e,
        ));
        for (i, c) in e.children().into_iter().enumerate() {
            chain.push(i);
            rec(c, base, chain, out);
            chain.pop();
        }
    }
    let mut out = Vec::new();
    for (i, item) in m.items.iter().enumerate() {
        if matches!(item.kind, ItemKind::Always(_)) {
            continue;
        }
        for (slot, e) in item.exprs().into_iter().enumerate() {
            let base = ExprPath {
                node: NodePath::item(i),
                slot,
                chain: vec![],
            };
            rec(e, &base, &mut Vec::new(), &mut out);
        }
    }
    for (np, s) in all_stmts(m) {
        for (slot, e) in s.own_exprs().into_iter().enumerate() {
            let base = ExprPath {
                node: np.clone(),
                slot,
                chain: vec![],
            };
            rec(e, &base, &mut Vec::new(), &mut out);
        }
    }
    out
}
