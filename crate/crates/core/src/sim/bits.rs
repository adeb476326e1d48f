//! Four-state bit vectors of up to 128 bits. `z` is folded into `x`.

use std::fmt;

pub const MAX_WIDTH: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bits {
    pub width: u32,
    /// Known bit values; zero where `xmask` is set.
    pub val: u128,
    pub xmask: u128,
}

pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

impl Bits {
    pub fn new(width: u32, val: u128, xmask: u128) -> Bits {
        let m = mask(width);
        let xmask = xmask & m;
        Bits {
            width,
            val: val & m & !xmask,
            xmask,
        }
    }

    pub fn known(width: u32, val: u128) -> Bits {
        Bits::new(width, val, 0)
    }

    pub fn x(width: u32) -> Bits {
        Bits::new(width, 0, u128::MAX)
    }

    pub fn bit(b: Option<bool>) -> Bits {
        match b {
            Some(v) => Bits::known(1, v as u128),
            None => Bits::x(1),
        }
    }

    pub fn is_known(&self) -> bool {
        self.xmask == 0
    }

    fn msb(&self) -> (bool, bool) {
        let top = 1u128 << (self.width - 1);
        (self.val & top != 0, self.xmask & top != 0)
    }

    /// Resize to `width`, sign-extending when `signed`.
    pub fn resize(&self, width: u32, signed: bool) -> Bits {
        if width <= self.width {
            return Bits::new(width, self.val, self.xmask);
        }
        let fill = mask(width) & !mask(self.width);
        let (one, x) = self.msb();
        match (signed, x, one) {
            (true, true, _) => Bits::new(width, self.val, self.xmask | fill),
            (true, false, true) => Bits::new(width, self.val | fill, self.xmask),
            _ => Bits::new(width, self.val, self.xmask),
        }
    }

    /// Some(true) when any bit is a known 1, Some(false) when all bits are known 0.
    pub fn truth(&self) -> Option<bool> {
        if self.val != 0 {
            Some(true)
        } else if self.xmask == 0 {
            Some(false)
        } else {
            None
        }
    }

    pub fn as_i128(&self) -> i128 {
        let v = self.resize(128, true).val;
        v as i128
    }

    pub fn not(&self) -> Bits {
        Bits::new(self.width, !self.val, self.xmask)
    }

    pub fn and(&self, o: &Bits) -> Bits {
        let zero_a = !self.val & !self.xmask;
        let zero_b = !o.val & !o.xmask;
        let known0 = zero_a | zero_b;
        let x = (self.xmask | o.xmask) & !known0;
        Bits::new(self.width, self.val & o.val, x)
    }

    pub fn or(&self, o: &Bits) -> Bits {
        let known1 = self.val | o.val;
        let x = (self.xmask | o.xmask) & !known1;
        Bits::new(self.width, known1, x)
    }

    pub fn xor(&self, o: &Bits) -> Bits {
        Bits::new(self.width, self.val ^ o.val, self.xmask | o.xmask)
    }

    pub fn reduce_and(&self) -> Bits {
        let m = mask(self.width);
        if (!self.val & !self.xmask & m) != 0 {
            Bits::bit(Some(false))
        } else if self.xmask != 0 {
            Bits::x(1)
        } else {
            Bits::bit(Some(true))
        }
    }

    pub fn reduce_or(&self) -> Bits {
        Bits::bit(self.truth())
    }

    pub fn reduce_xor(&self) -> Bits {
        if self.xmask != 0 {
            Bits::x(1)
        } else {
            Bits::bit(Some(self.val.count_ones() % 2 == 1))
        }
    }

    /// Bitwise merge used when a ternary condition is unknown.
    pub fn merge(&self, o: &Bits) -> Bits {
        let differ = (self.val ^ o.val) | self.xmask | o.xmask;
        Bits::new(self.width, self.val, differ)
    }

    /// Known bits of `self` and `o` that disagree.
    pub fn conflicts(&self, o: &Bits) -> u128 {
        let w = self.width.max(o.width);
        let a = self.resize(w, false);
        let b = o.resize(w, false);
        (a.val ^ b.val) & !a.xmask & !b.xmask
    }

    pub fn slice(&self, lo: u32, width: u32) -> Bits {
        if lo >= 128 {
            return Bits::x(width);
        }
        let outside = if lo + width > self.width {
            mask(lo + width) & !mask(self.width)
        } else {
            0
        };
        Bits::new(width, self.val >> lo, (self.xmask | outside) >> lo)
    }

    /// Replace `width` bits at `lo` with the low bits of `v`.
    pub fn with_slice(&self, lo: u32, width: u32, v: &Bits) -> Bits {
        if lo >= self.width {
            return *self;
        }
        let m = mask(width).checked_shl(lo).unwrap_or(0) & mask(self.width);
        let v = v.resize(width, false);
        Bits::new(
            self.width,
            (self.val & !m) | ((v.val << lo) & m),
            (self.xmask & !m) | ((v.xmask << lo) & m),
        )
    }

    pub fn concat(parts: &[Bits]) -> Bits {
        let mut out = Bits::known(0, 0);
        for p in parts {
            let w = out.width + p.width;
            let shift = |v: u128| v.checked_shl(p.width).unwrap_or(0);
            out = Bits::new(w, shift(out.val) | p.val, shift(out.xmask) | p.xmask);
        }
        out
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b", self.width)?;
        for i in (0..self.width).rev() {
            let b = 1u128 << i;
            let c = if self.xmask & b != 0 {
                'x'
            } else if self.val & b != 0 {
                '1'
            } else {
                '0'
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_state_and_or() {
        let x = Bits::x(1);
        let z = Bits::known(1, 0);
        let o = Bits::known(1, 1);
        assert_eq!(x.and(&z), z);
        assert_eq!(x.and(&o), x);
        assert_eq!(x.or(&o), o);
        assert_eq!(x.or(&z), x);
        assert_eq!(x.xor(&o), x);
    }

    #[test]
    fn sign_extension() {
        let v = Bits::known(4, 0b1010);
        assert_eq!(v.resize(8, true), Bits::known(8, 0xfa));
        assert_eq!(v.resize(8, false), Bits::known(8, 0x0a));
        assert_eq!(Bits::new(2, 0, 0b10).resize(4, true).xmask, 0b1110);
    }

    #[test]
    fn slices_and_concat() {
        let v = Bits::known(8, 0xa5);
        assert_eq!(v.slice(4, 4), Bits::known(4, 0xa));
        assert_eq!(v.slice(6, 4).xmask, 0b1100);
        let c = Bits::concat(&[Bits::known(4, 0x3), Bits::known(4, 0xc)]);
        assert_eq!(c, Bits::known(8, 0x3c));
        assert_eq!(v.with_slice(0, 4, &Bits::known(4, 0)), Bits::known(8, 0xa0));
        assert_eq!(v.to_string(), "8'b10100101");
    }

    proptest! {
        #[test]
        fn known_ops_match_integers(a in any::<u64>(), b in any::<u64>(), w in 1u32..=64) {
            let m = mask(w);
            let (x, y) = (Bits::known(w, a as u128), Bits::known(w, b as u128));
            prop_assert_eq!(x.and(&y).val, (a as u128 & b as u128) & m);
            prop_assert_eq!(x.or(&y).val, (a as u128 | b as u128) & m);
            prop_assert_eq!(x.xor(&y).val, (a as u128 ^ b as u128) & m);
            prop_assert_eq!(x.not().val, !(a as u128) & m);
            prop_assert_eq!(x.merge(&x), x);
        }

        #[test]
        fn x_bits_never_conflict(v in any::<u128>(), xm in any::<u128>(), o in any::<u128>()) {
            let a = Bits::new(128, v, xm);
            let b = Bits::new(128, o, 0);
            prop_assert_eq!(a.conflicts(&b) & xm, 0);
        }
    }
}
