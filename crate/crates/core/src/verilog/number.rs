//! Verilog numeric literals with full spelling fidelity.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Base {
    Binary,
    Octal,
    Decimal,
    Hexadecimal,
}

impl Base {
    pub fn radix(self) -> u32 {
        match self {
            Base::Binary => 2,
            Base::Octal => 8,
            Base::Decimal => 10,
            Base::Hexadecimal => 16,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Base::Binary => 'b',
            Base::Octal => 'o',
            Base::Decimal => 'd',
            Base::Hexadecimal => 'h',
        }
    }

    pub fn from_letter(c: char) -> Option<Base> {
        match c.to_ascii_lowercase() {
            'b' => Some(Base::Binary),
            'o' => Some(Base::Octal),
            'd' => Some(Base::Decimal),
            'h' => Some(Base::Hexadecimal),
            _ => None,
        }
    }

    /// Bits encoded by one digit, for power-of-two bases.
    pub fn bits_per_digit(self) -> Option<u32> {
        match self {
            Base::Binary => Some(1),
            Base::Octal => Some(3),
            Base::Hexadecimal => Some(4),
            Base::Decimal => None,
        }
    }

    pub const ALL: [Base; 4] = [Base::Binary, Base::Octal, Base::Decimal, Base::Hexadecimal];
}

/// A numeric literal as written in source.
///
/// `base == None` denotes a plain decimal integer such as `10`. `digits`
/// holds the digit characters without separators, in their original case;
/// `separators` lists the digit indices that are preceded by an underscore.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NumberLiteral {
    pub width: Option<u32>,
    pub base: Option<Base>,
    pub signed: bool,
    pub base_upper: bool,
    pub digits: String,
    pub separators: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralError(pub String);

impl NumberLiteral {
    /// Parse the spelling of a single literal token, e.g. `8'hA5`, `'b1_0`, `42`.
    pub fn parse(text: &str) -> Result<NumberLiteral, LiteralError> {
        let (width, rest) = match text.find('\'') {
            Some(0) => (None, &text[1..]),
            Some(idx) => {
                let size: String = text[..idx].chars().filter(|c| *c != '_').collect();
                let width: u32 = size
                    .trim()
                    .parse()
                    .map_err(|_| LiteralError(format!("bad literal size in `{text}`")))?;
                if width == 0 {
                    return Err(LiteralError(format!("zero-width literal `{text}`")));
                }
                (Some(width), &text[idx + 1..])
            }
            None => {
                let (digits, separators) = split_separators(text)?;
                if !digits.chars().all(|c| c.is_ascii_digit()) {
                    return Err(LiteralError(format!("bad decimal literal `{text}`")));
                }
                return Ok(NumberLiteral {
                    width: None,
                    base: None,
                    signed: false,
                    base_upper: false,
                    digits,
                    separators,
                });
            }
        };
        let mut chars = rest.chars();
        let mut signed = false;
        let mut c = chars
            .next()
            .ok_or_else(|| LiteralError(format!("missing base in `{text}`")))?;
        if c == 's' || c == 'S' {
            signed = true;
            c = chars
                .next()
                .ok_or_else(|| LiteralError(format!("missing base in `{text}`")))?;
        }
        let base = Base::from_letter(c)
            .ok_or_else(|| LiteralError(format!("unknown base `{c}` in `{text}`")))?;
        let base_upper = c.is_ascii_uppercase();
        let body = chars.as_str().trim_start();
        let (digits, separators) = split_separators(body)?;
        for ch in digits.chars() {
            let ok = match ch {
                'x' | 'X' | 'z' | 'Z' | '?' => base != Base::Decimal || digits.len() == 1,
                _ => ch.is_digit(base.radix()),
            };
            if !ok {
                return Err(LiteralError(format!("digit `{ch}` invalid for base in `{text}`")));
            }
        }
        let lit = NumberLiteral {
            width,
            base: Some(base),
            signed,
            base_upper,
            digits,
            separators,
        };
        if let (Some(w), Some(v)) = (lit.width, lit.value()) {
            if v.bits() > u64::from(w) {
                return Err(LiteralError(format!("value of `{text}` does not fit in {w} bits")));
            }
        }
        Ok(lit)
    }

    /// Construct a sized literal with canonical digits.
    pub fn sized(width: u32, base: Base, value: &BigUint) -> NumberLiteral {
        let digits = match base.bits_per_digit() {
            Some(bpd) => {
                let ndig = width.div_ceil(bpd) as usize;
                let raw = value.to_str_radix(base.radix()).to_ascii_uppercase();
                format!("{raw:0>ndig$}")
            }
            None => value.to_str_radix(10),
        };
        NumberLiteral {
            width: Some(width),
            base: Some(base),
            signed: false,
            base_upper: false,
            digits,
            separators: Vec::new(),
        }
    }

    pub fn unsized_decimal(value: u64) -> NumberLiteral {
        NumberLiteral {
            width: None,
            base: None,
            signed: false,
            base_upper: false,
            digits: value.to_string(),
            separators: Vec::new(),
        }
    }

    pub fn has_xz(&self) -> bool {
        self.digits
            .chars()
            .any(|c| matches!(c, 'x' | 'X' | 'z' | 'Z' | '?'))
    }

    /// Numeric value, or `None` when any digit is x/z.
    pub fn value(&self) -> Option<BigUint> {
        if self.has_xz() {
            return None;
        }
        let radix = self.base.map_or(10, Base::radix);
        BigUint::parse_bytes(self.digits.as_bytes(), radix)
    }

    pub fn value_u128(&self) -> Option<u128> {
        self.value().and_then(|v| v.to_u128())
    }

    /// Width in bits as Verilog sizes it (unsized literals are 32 bits).
    pub fn effective_width(&self) -> u32 {
        self.width.unwrap_or(32)
    }

    /// Plain decimals are signed in Verilog; based literals only with `s`.
    pub fn is_signed(&self) -> bool {
        self.base.is_none() || self.signed
    }

    /// Four-state bit vector (value, x-mask) limited to 128 bits.
    pub fn to_bits(&self) -> Option<(u32, u128, u128)> {
        let width = self.effective_width();
        if width > 128 {
            return None;
        }
        let mask = if width == 128 { u128::MAX } else { (1u128 << width) - 1 };
        if !self.has_xz() {
            let v = self.value()?.to_u128()?;
            return Some((width, v & mask, 0));
        }
        let base = self.base?;
        let bpd = base.bits_per_digit()?;
        let mut val: u128 = 0;
        let mut xm: u128 = 0;
        for ch in self.digits.chars() {
            val = val.checked_shl(bpd).unwrap_or(0);
            xm = xm.checked_shl(bpd).unwrap_or(0);
            let dmask = (1u128 << bpd) - 1;
            match ch {
                'x' | 'X' | 'z' | 'Z' | '?' => xm |= dmask,
                _ => val |= u128::from(ch.to_digit(base.radix())?),
            }
        }
        // A leading x/z digit extends to fill the width.
        let first = self.digits.chars().next()?;
        let used = bpd * self.digits.len() as u32;
        if matches!(first, 'x' | 'X' | 'z' | 'Z' | '?') && used < width {
            let fill = mask & !((1u128 << used.min(127)) - 1);
            xm |= fill;
        }
        Some((width, val & mask & !xm, xm & mask))
    }

    /// Digit string with separators re-inserted.
    pub fn spelled_digits(&self) -> String {
        let mut out = String::with_capacity(self.digits.len() + self.separators.len());
        for (i, ch) in self.digits.chars().enumerate() {
            if self.separators.contains(&i) {
                out.push('_');
            }
            out.push(ch);
        }
        out
    }

    /// Separators placed every `group` digits counting from the least-significant end.
    pub fn grouped_separators(ndigits: usize, group: usize) -> Vec<usize> {
        if group == 0 {
            return Vec::new();
        }
        let mut seps = Vec::new();
        let mut pos = ndigits as isize - group as isize;
        while pos > 0 {
            seps.push(pos as usize);
            pos -= group as isize;
        }
        seps.sort_unstable();
        seps
    }

    /// The value rendered in another base, preserving width and signedness.
    pub fn rebased(&self, base: Base) -> Option<NumberLiteral> {
        let width = self.width?;
        let value = self.value()?;
        let mut lit = NumberLiteral::sized(width, base, &value);
        lit.signed = self.signed;
        Some(lit)
    }

    pub fn is_zero(&self) -> bool {
        self.value().is_some_and(|v| v.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.value().is_some_and(|v| v.is_one())
    }
}

fn split_separators(body: &str) -> Result<(String, Vec<usize>), LiteralError> {
    let mut digits = String::with_capacity(body.len());
    let mut seps = Vec::new();
    for ch in body.chars() {
        if ch == '_' {
            if digits.is_empty() {
                return Err(LiteralError(format!("literal `{body}` starts with a separator")));
            }
            if !seps.contains(&digits.len()) {
                seps.push(digits.len());
            }
        } else {
            digits.push(ch);
        }
    }
    if digits.is_empty() {
        return Err(LiteralError(format!("literal `{body}` has no digits")));
    }
    seps.retain(|&p| p < digits.len());
    Ok((digits, seps))
}

impl fmt::Display for NumberLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(w) = self.width {
            write!(f, "{w}")?;
        }
        if let Some(base) = self.base {
            f.write_str("'")?;
            if self.signed {
                f.write_str("s")?;
            }
            let letter = base.letter();
            if self.base_upper {
                write!(f, "{}", letter.to_ascii_uppercase())?;
            } else {
                write!(f, "{letter}")?;
            }
        }
        f.write_str(&self.spelled_digits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sized_hex() {
        let lit = NumberLiteral::parse("8'hA5").unwrap();
        assert_eq!(lit.width, Some(8));
        assert_eq!(lit.base, Some(Base::Hexadecimal));
        assert_eq!(lit.value_u128(), Some(0xA5));
        assert_eq!(lit.to_string(), "8'hA5");
    }

    #[test]
    fn prints_binary_with_separator() {
        let mut lit = NumberLiteral::sized(8, Base::Binary, &BigUint::from(0xA5u32));
        lit.separators = vec![4];
        assert_eq!(lit.to_string(), "8'b1010_0101");
        // 0xA5 == 0b10100101 by direct conversion
        assert_eq!(u32::from_str_radix("10100101", 2).unwrap(), 0xA5);
        let reparsed = NumberLiteral::parse("8'b1010_0101").unwrap();
        assert_eq!(reparsed, lit);
    }

    #[test]
    fn plain_decimal_is_unsized() {
        let lit = NumberLiteral::parse("42").unwrap();
        assert_eq!(lit.width, None);
        assert!(lit.is_signed());
        assert_eq!(lit.effective_width(), 32);
    }

    #[test]
    fn rejects_overflow() {
        assert!(NumberLiteral::parse("2'b111").is_err());
        assert!(NumberLiteral::parse("4'hG").is_err());
    }

    #[test]
    fn xz_bits() {
        let lit = NumberLiteral::parse("4'b1x0z").unwrap();
        let (w, v, x) = lit.to_bits().unwrap();
        assert_eq!(w, 4);
        assert_eq!(x, 0b0101);
        assert_eq!(v, 0b1000);
        let fill = NumberLiteral::parse("8'bx").unwrap().to_bits().unwrap();
        assert_eq!(fill.2, 0xFF);
    }

    #[test]
    fn grouped_separators_from_lsb() {
        assert_eq!(NumberLiteral::grouped_separators(8, 4), vec![4]);
        assert_eq!(NumberLiteral::grouped_separators(8, 3), vec![2, 5]);
        assert_eq!(NumberLiteral::grouped_separators(3, 4), Vec::<usize>::new());
    }

    #[test]
    fn rebase_preserves_value() {
        let lit = NumberLiteral::parse("8'd165").unwrap();
        let hex = lit.rebased(Base::Hexadecimal).unwrap();
        assert_eq!(hex.to_string(), "8'hA5");
        let bin = lit.rebased(Base::Binary).unwrap();
        assert_eq!(bin.to_string(), "8'b10100101");
        let oct = lit.rebased(Base::Octal).unwrap();
        assert_eq!(oct.value(), lit.value());
        assert_eq!(oct.to_string(), "8'o245");
    }
}
