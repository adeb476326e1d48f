//! Gate-level netlists: parsing structural Verilog, tracing trigger-gated
//! payload constants, and driving an external synthesis tool.

mod cells;
mod parse;
mod synth;
mod trace;

pub use cells::{eval3, CellFunction, CellKind, CellLibrary};
pub use parse::parse_netlist;
pub use synth::{synthesize, SynthConfig, SynthError, DEFAULT_SYNTH_COMMAND};
pub use trace::{trace_watermark, DEFAULT_CARRIER_BITS};

use crate::key::WatermarkKey;
use crate::verilog::{Direction, ParseError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("cell library: {0}")]
    Library(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Net {
    /// Escaped identifiers keep their leading backslash.
    pub name: String,
    pub msb: i64,
    pub lsb: i64,
    pub dir: Option<Direction>,
}

impl Net {
    pub fn width(&self) -> u32 {
        (self.msb - self.lsb).unsigned_abs() as u32 + 1
    }

    /// Offset from the LSB of a declared index.
    pub fn offset(&self, index: i64) -> Option<u32> {
        let off = if self.msb >= self.lsb { index - self.lsb } else { self.lsb - index };
        (0..self.width() as i64).contains(&off).then_some(off as u32)
    }

    pub fn index(&self, offset: u32) -> i64 {
        if self.msb >= self.lsb {
            self.lsb + offset as i64
        } else {
            self.lsb - offset as i64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BitRef {
    Net { net: usize, offset: u32 },
    /// `None` for x or z.
    Const(Option<bool>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub ty: String,
    pub name: String,
    pub params: Vec<(String, String)>,
    /// Pin connections, LSB first.
    pub conns: BTreeMap<String, Vec<BitRef>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NetlistGraph {
    pub module: String,
    pub nets: Vec<Net>,
    pub cells: Vec<Cell>,
    /// Bitwise continuous assignments, `(lhs, rhs)`.
    pub assigns: Vec<(BitRef, BitRef)>,
    pub ports: Vec<String>,
    /// Identifiers used without a declaration.
    pub unresolved: Vec<String>,
}

impl NetlistGraph {
    pub fn net(&self, name: &str) -> Option<usize> {
        self.nets.iter().position(|n| n.name == name)
    }

    pub fn bit_name(&self, b: BitRef) -> String {
        match b {
            BitRef::Net { net, offset } => {
                let n = &self.nets[net];
                if n.width() == 1 && n.msb == 0 {
                    n.name.clone()
                } else {
                    format!("{}[{}]", n.name, n.index(offset))
                }
            }
            BitRef::Const(Some(v)) => format!("1'b{}", v as u8),
            BitRef::Const(None) => "1'bx".to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistEvidence {
    pub found: bool,
    pub payload_bytes: Vec<u8>,
    pub trigger_net: Option<String>,
    pub carrier_net: Option<String>,
    /// Cells on the path from the trigger to the carrier.
    pub trace: Vec<String>,
    pub width: u32,
    /// `(model, developer)` when the whole payload fits in the carrier.
    pub decoded: Option<(String, String)>,
    pub diagnostics: Vec<String>,
}

/// Parse a netlist and trace it with the bundled cell library.
pub fn detect_netlist(text: &str, origin: &str, key: &WatermarkKey, expected_width: Option<u32>) -> Result<NetlistEvidence, NetlistError> {
    let graph = parse_netlist(text, origin)?;
    Ok(trace_watermark(&graph, &CellLibrary::default(), key, expected_width))
}
