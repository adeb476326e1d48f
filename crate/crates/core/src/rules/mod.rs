//! The fifteen semantics-preserving Verilog transformations.
//!
//! Every rule is an (applicability, apply, signature) triple. Applying a site
//! computes text edits against the current source and reparses, so bytes
//! outside the edited spans are preserved exactly.

mod fsm;
mod t01_state_encoding;
mod t02_param_width;
mod t03_base_conversion;
mod t04_sensitivity;
mod t05_bit_separation;
mod t06_rename;
mod t07_bit_order;
mod t08_state_path;
mod t09_de_morgan;
mod t10_comb_assign;
mod t11_ternary;
mod t12_init_order;
mod t13_comments;
mod t14_cond_order;
mod t15_redundant_logic;
pub(crate) mod util;

pub use fsm::{find_fsms, Fsm};
pub use t15_redundant_logic::{carrier_bytes, carrier_width, TRIGGER_PORT};
pub use util::Edit;

use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::path::{ExprPath, NodePath};
use crate::verilog::{self, Ast, Module, ParseError, SymbolTable};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    T10,
    T11,
    T12,
    T13,
    T14,
    T15,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Token,
    Statement,
}

impl RuleId {
    pub const ALL: [RuleId; 15] = [
        RuleId::T1,
        RuleId::T2,
        RuleId::T3,
        RuleId::T4,
        RuleId::T5,
        RuleId::T6,
        RuleId::T7,
        RuleId::T8,
        RuleId::T9,
        RuleId::T10,
        RuleId::T11,
        RuleId::T12,
        RuleId::T13,
        RuleId::T14,
        RuleId::T15,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        ["T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8", "T9", "T10", "T11", "T12", "T13", "T14", "T15"][self.index()]
    }

    pub fn parse(s: &str) -> Option<RuleId> {
        RuleId::ALL.iter().copied().find(|r| r.code().eq_ignore_ascii_case(s))
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleId::T1 => "State Variables Encoding",
            RuleId::T2 => "Parameterized Module",
            RuleId::T3 => "Base Conversion",
            RuleId::T4 => "Sensitivity List Format",
            RuleId::T5 => "Bit Separation",
            RuleId::T6 => "Variable Renaming",
            RuleId::T7 => "Bit Order",
            RuleId::T8 => "State Transition Path",
            RuleId::T9 => "Combinational Logic Operation",
            RuleId::T10 => "Combinational Logic Assignment",
            RuleId::T11 => "Ternary Operator",
            RuleId::T12 => "Initialization Order",
            RuleId::T13 => "Add Comments",
            RuleId::T14 => "Condition Order",
            RuleId::T15 => "Add Redundant Logic",
        }
    }

    pub fn granularity(self) -> Granularity {
        if self.index() < 7 {
            Granularity::Token
        } else {
            Granularity::Statement
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            RuleId::T1 => "binary state constants become one-hot; the key picks the bit assigned to each state",
            RuleId::T2 => "a literal range bound shared by two or more declarations becomes a keyed localparam",
            RuleId::T3 => "a sized literal is respelled in the key-preferred base with the same width and value",
            RuleId::T4 => "`or`-separated sensitivity lists become comma-separated",
            RuleId::T5 => "binary literal digits are grouped with `_` at a key-derived group size",
            RuleId::T6 => "an internal signal gains a key-derived suffix at its declaration and every use",
            RuleId::T7 => "an internal [N:0] vector becomes [0:N] with every constant select mirrored",
            RuleId::T8 => "an FSM gains an unreachable keyed state whose only transition re-enters the original path",
            RuleId::T9 => "AND/OR expressions are rewritten through De Morgan's laws",
            RuleId::T10 => "a continuous assignment becomes an equivalent always @* block",
            RuleId::T11 => "a two-armed if/else assigning one target becomes a ternary assignment",
            RuleId::T12 => "independent adjacent assignments are reordered by a keyed permutation",
            RuleId::T13 => "a signal declaration gains a key-derived comment",
            RuleId::T14 => "operands of a conjunction in a condition are ordered by a key bit",
            RuleId::T15 => "a trigger-gated assignment drives the encrypted payload into a register",
        }
    }

    pub fn applicability(self) -> &'static str {
        match self {
            RuleId::T1 | RuleId::T8 => "FSM: a localparam-labelled case over an internal state register",
            RuleId::T2 => "two or more internal declarations share a literal range bound",
            RuleId::T3 => "sized literal without x/z digits",
            RuleId::T4 => "edge or level list using the `or` keyword",
            RuleId::T5 => "binary literal longer than the key's group size",
            RuleId::T6 | RuleId::T13 => "internal wire or reg",
            RuleId::T7 => "internal descending vector whose selects are all constant",
            RuleId::T9 => "binary AND/OR in an expression",
            RuleId::T10 => "single continuous assignment to a whole net with a non-constant right side",
            RuleId::T11 => "if/else whose branches each assign the same target",
            RuleId::T12 => "two or more adjacent independent assignments",
            RuleId::T14 => "conjunction in an if or ternary condition",
            RuleId::T15 => "top module with a register of 8 bits or more",
        }
    }

    /// Signature survives only while identifiers keep their names.
    pub fn is_name_dependent(self) -> bool {
        matches!(self, RuleId::T6 | RuleId::T13)
    }

    /// Key-free stylistic rules.
    pub fn is_style(self) -> bool {
        matches!(
            self,
            RuleId::T4 | RuleId::T7 | RuleId::T9 | RuleId::T10 | RuleId::T11 | RuleId::T14
        )
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// What a site points at inside its module.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteTarget {
    Module,
    Signal(String),
    Expr(ExprPath),
    Stmt(NodePath),
    Item(usize),
    Run { block: NodePath, start: usize, len: usize },
    Bound(i64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSite {
    pub rule: RuleId,
    pub module: String,
    pub target: SiteTarget,
    /// Source span of the target when the site was computed; orders application.
    pub start: usize,
    pub end: usize,
    pub detail: String,
    /// Key entropy the resulting signature verifies.
    pub key_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformationRecord {
    pub site: TransformSite,
    pub before: String,
    pub after: String,
    /// Hex of the key-derived parameters used by this application.
    pub key_params: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignatureEvidence {
    pub rule: RuleId,
    pub present: bool,
    pub strength: usize,
    pub name_dependent: bool,
    pub key_bits: f64,
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("site is stale: {0}")]
    SiteStale(String),
    #[error("module `{0}` not found")]
    UnknownModule(String),
    #[error("transformed text failed to reparse: {0}")]
    Reparse(ParseError),
    #[error("overlapping edits for rule {0}")]
    OverlappingEdits(RuleId),
}

/// Everything a rule needs to look at one module.
pub struct Ctx<'a> {
    pub ast: &'a Ast,
    pub src: &'a str,
    pub module: &'a Module,
    pub symbols: SymbolTable,
    pub is_top: bool,
}

impl<'a> Ctx<'a> {
    pub fn new(ast: &'a Ast, src: &'a str, module: &'a Module) -> Ctx<'a> {
        let instantiated = ast.modules.iter().any(|m| {
            m.items.iter().any(|i| match &i.kind {
                verilog::ItemKind::Instance(inst) => inst.module.name == module.name.name,
                _ => false,
            })
        });
        Ctx {
            ast,
            src,
            module,
            symbols: verilog::resolve(module, Some(ast)),
            is_top: !instantiated,
        }
    }

    pub fn text(&self, span: verilog::Span) -> &'a str {
        &self.src[span.start..span.end]
    }

    pub fn name(&self) -> &str {
        &self.module.name.name
    }

    pub fn params(&self, key: &WatermarkKey, rule: RuleId) -> crate::key::KeyedParams {
        key.params(self.name(), rule.code())
    }

    pub fn site(&self, rule: RuleId, target: SiteTarget, span: verilog::Span, detail: String, key_bits: f64) -> TransformSite {
        TransformSite {
            rule,
            module: self.name().to_string(),
            target,
            start: span.start,
            end: span.end,
            detail,
            key_bits,
        }
    }

    /// Signals that can take part in keyed rules: declared at module level
    /// and never shadowed.
    pub fn is_plain_signal(&self, name: &str) -> bool {
        self.symbols
            .get(name)
            .is_some_and(|s| s.scope.is_none() && !self.symbols.shadowed.iter().any(|n| n == name))
    }
}

pub(crate) trait Rule: Sync {
    fn id(&self) -> RuleId;
    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite>;
    /// Edits for `site` against the current text, re-validating applicability.
    /// Also returns the key-derived parameters used, for the record.
    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, payload: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError>;
    /// (matching site count, verified key bits) for one module.
    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64);
}

fn rule_impl(id: RuleId) -> &'static dyn Rule {
    match id {
        RuleId::T1 => &t01_state_encoding::StateEncoding,
        RuleId::T2 => &t02_param_width::ParamWidth,
        RuleId::T3 => &t03_base_conversion::BaseConversion,
        RuleId::T4 => &t04_sensitivity::SensitivityFormat,
        RuleId::T5 => &t05_bit_separation::BitSeparation,
        RuleId::T6 => &t06_rename::VarRename,
        RuleId::T7 => &t07_bit_order::BitOrder,
        RuleId::T8 => &t08_state_path::StateTransitionPath,
        RuleId::T9 => &t09_de_morgan::DeMorgan,
        RuleId::T10 => &t10_comb_assign::CombAssign,
        RuleId::T11 => &t11_ternary::Ternary,
        RuleId::T12 => &t12_init_order::InitOrder,
        RuleId::T13 => &t13_comments::AddComments,
        RuleId::T14 => &t14_cond_order::CondOrder,
        RuleId::T15 => &t15_redundant_logic::RedundantLogic,
    }
}

/// Ast with attached source text; trees built in memory are printed first.
fn with_source(ast: &Ast) -> Result<std::borrow::Cow<'_, Ast>, TransformError> {
    if ast.source.is_some() {
        return Ok(std::borrow::Cow::Borrowed(ast));
    }
    let text = verilog::print(ast);
    let parsed = verilog::parse(&verilog::SourceText::new(text, ast.origin.clone())).map_err(TransformError::Reparse)?;
    Ok(std::borrow::Cow::Owned(parsed))
}

pub fn applicable_sites(ast: &Ast, rule: RuleId, key: &WatermarkKey) -> Vec<TransformSite> {
    let Ok(ast) = with_source(ast) else {
        return Vec::new();
    };
    let src = ast.source.as_deref().unwrap_or_default();
    let imp = rule_impl(rule);
    ast.modules
        .iter()
        .flat_map(|m| imp.sites(&Ctx::new(&ast, src, m), key))
        .collect()
}

pub fn apply(ast: &Ast, site: &TransformSite, key: &WatermarkKey, payload: &Payload) -> Result<(Ast, TransformationRecord), TransformError> {
    let ast = with_source(ast)?;
    let src = ast.source.as_deref().unwrap_or_default();
    let module = ast
        .module(&site.module)
        .ok_or_else(|| TransformError::UnknownModule(site.module.clone()))?;
    let cx = Ctx::new(&ast, src, module);
    let imp = rule_impl(site.rule);
    debug_assert_eq!(imp.id(), site.rule);
    let (edits, key_params) = imp.edits(&cx, site, key, payload)?;
    if edits.is_empty() {
        return Err(TransformError::SiteStale(format!("{} produced no change", site.rule)));
    }
    let (text, before, after) = util::splice(src, edits).ok_or(TransformError::OverlappingEdits(site.rule))?;
    let new_ast = verilog::parse(&verilog::SourceText::new(text, ast.origin.clone())).map_err(TransformError::Reparse)?;
    Ok((
        new_ast,
        TransformationRecord {
            site: site.clone(),
            before,
            after,
            key_params: hex::encode(key_params),
        },
    ))
}

pub fn signature_present(ast: &Ast, rule: RuleId, key: &WatermarkKey) -> SignatureEvidence {
    let mut strength = 0;
    let mut bits: f64 = 0.0;
    if let Ok(ast) = with_source(ast) {
        let src = ast.source.as_deref().unwrap_or_default();
        let imp = rule_impl(rule);
        for m in &ast.modules {
            let (s, b) = imp.evidence(&Ctx::new(&ast, src, m), key);
            if s > 0 {
                strength += s;
                bits = bits.max(b);
            }
        }
    }
    SignatureEvidence {
        rule,
        present: strength > 0,
        strength,
        name_dependent: rule.is_name_dependent(),
        key_bits: bits,
    }
}

pub fn all_evidence(ast: &Ast, key: &WatermarkKey) -> Vec<SignatureEvidence> {
    RuleId::ALL.iter().map(|&r| signature_present(ast, r, key)).collect()
}

/// Order in which a set of sites is applied: everything except renames by
/// descending source position (inner sites before their containers), then
/// renames.
pub fn application_order(sites: &[TransformSite]) -> Vec<TransformSite> {
    let mut v = sites.to_vec();
    v.sort_by(|a, b| {
        (a.rule == RuleId::T6)
            .cmp(&(b.rule == RuleId::T6))
            .then(b.start.cmp(&a.start))
            .then(a.end.cmp(&b.end))
            .then(a.rule.cmp(&b.rule))
    });
    v
}
