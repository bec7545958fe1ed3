//! Outward-rounded interval arithmetic.
//!
//! Every operation returns an interval guaranteed to contain the exact image
//! of its inputs.  Arithmetic (IEEE correctly rounded, true error ≤ 0.5 ulp)
//! is inflated by 1 ulp per endpoint; elementary functions from libm (documented
//! max error ≤ 2 ulp on this platform) are inflated by 2 ulp per endpoint.
//! Half-infinite endpoints are permitted where a quantity genuinely diverges
//! (e.g. a positive quantity divided by an interval pinched against zero).

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Closed interval `[lo, hi]`, endpoints possibly `±inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

fn down2(x: f64) -> f64 {
    down(down(x))
}

fn up2(x: f64) -> f64 {
    up(up(x))
}

/// Endpoint product with the 0·∞ = 0 convention (correct for enclosures:
/// the zero factor is an exact endpoint).
fn mul_pt(x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        0.0
    } else {
        x * y
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(!lo.is_nan() && !hi.is_nan(), "NaN endpoint");
        assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval::new(x, x)
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(self) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        if m.is_finite() {
            m
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_iv(self, o: Interval) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }

    pub fn is_finite(self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn hull(self, o: Interval) -> Self {
        Interval::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    /// Intersection with a known mathematical domain; panics if disjoint.
    /// Used to trim pure-rounding spill outside a proven range.
    pub fn clamp_to(self, dom: Interval) -> Self {
        let lo = self.lo.max(dom.lo);
        let hi = self.hi.min(dom.hi);
        assert!(lo <= hi, "clamp_to: disjoint [{},{}] vs [{},{}]", self.lo, self.hi, dom.lo, dom.hi);
        Interval { lo, hi }
    }

    pub fn neg(self) -> Self {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(self, o: Interval) -> Self {
        Interval::new(down(self.lo + o.lo), up(self.hi + o.hi))
    }

    pub fn sub(self, o: Interval) -> Self {
        self.add(o.neg())
    }

    pub fn mul(self, o: Interval) -> Self {
        // products with an exact-zero factor are exact and skip inflation;
        // nonzero products that underflow to ±0 still get pushed outward
        let lo_of = |x: f64, y: f64| {
            if x == 0.0 || y == 0.0 {
                0.0
            } else {
                down(x * y)
            }
        };
        let hi_of = |x: f64, y: f64| {
            if x == 0.0 || y == 0.0 {
                0.0
            } else {
                up(x * y)
            }
        };
        let pairs = [
            (self.lo, o.lo),
            (self.lo, o.hi),
            (self.hi, o.lo),
            (self.hi, o.hi),
        ];
        let lo = pairs.iter().map(|&(x, y)| lo_of(x, y)).fold(f64::INFINITY, f64::min);
        let hi = pairs
            .iter()
            .map(|&(x, y)| hi_of(x, y))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    /// Division; the divisor must not contain 0.
    pub fn div(self, o: Interval) -> Self {
        assert!(
            o.lo > 0.0 || o.hi < 0.0,
            "division by interval containing 0: [{}, {}]",
            o.lo,
            o.hi
        );
        let lo_of = |x: f64, y: f64| if x == 0.0 { 0.0 } else { down(x / y) };
        let hi_of = |x: f64, y: f64| if x == 0.0 { 0.0 } else { up(x / y) };
        let pairs = [
            (self.lo, o.lo),
            (self.lo, o.hi),
            (self.hi, o.lo),
            (self.hi, o.hi),
        ];
        let lo = pairs.iter().map(|&(x, y)| lo_of(x, y)).fold(f64::INFINITY, f64::min);
        let hi = pairs
            .iter()
            .map(|&(x, y)| hi_of(x, y))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    /// Dependent square: exact range of x² over the interval.
    pub fn sqr(self) -> Self {
        let (alo, ahi) = (self.lo.abs(), self.hi.abs());
        let big = alo.max(ahi);
        let small = if self.lo <= 0.0 && 0.0 <= self.hi {
            0.0
        } else {
            alo.min(ahi)
        };
        Interval::new(down(mul_pt(small, small)).max(0.0), up(mul_pt(big, big)))
    }

    /// Multiplication by an exact scalar.
    pub fn scale(self, c: f64) -> Self {
        self.mul(Interval::point(c))
    }

    /// Reciprocal of a divisor that is mathematically positive but whose
    /// computed lower endpoint may have rounded to ≤ 0.  Returns a
    /// half-infinite enclosure `[1/hi, +inf]`.
    pub fn recip_pos(self) -> Self {
        assert!(self.hi > 0.0, "recip_pos needs a positive upper endpoint");
        if self.lo > 0.0 {
            return Interval::point(1.0).div(self);
        }
        Interval::new(down(1.0 / self.hi), f64::INFINITY)
    }

    /// Natural log; requires `lo > 0`.
    pub fn log(self) -> Self {
        assert!(self.lo > 0.0, "log of interval with lo = {} <= 0", self.lo);
        Interval::new(down2(self.lo.ln()), up2(self.hi.ln()))
    }

    /// `log(1+x)`; requires `lo > -1`.
    pub fn log1p(self) -> Self {
        assert!(self.lo > -1.0, "log1p of interval with lo = {} <= -1", self.lo);
        Interval::new(down2(self.lo.ln_1p()), up2(self.hi.ln_1p()))
    }

    /// `-log(x)` on an interval that is mathematically in `(0, hi]` but whose
    /// computed `lo` may be 0.  Returns `[-log(hi), +inf]`.
    pub fn neglog_allow_zero(self) -> Self {
        assert!(self.hi > 0.0 && self.lo >= 0.0);
        Interval::new(down2(-self.hi.ln()), f64::INFINITY)
    }

    pub fn exp(self) -> Self {
        let lo = if self.lo == f64::NEG_INFINITY {
            0.0
        } else {
            down2(self.lo.exp()).max(0.0)
        };
        Interval::new(lo, up2(self.hi.exp()))
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        fn endpoint<S: SerializeSeq>(seq: &mut S, x: f64) -> Result<(), S::Error> {
            if x == f64::INFINITY {
                seq.serialize_element("inf")
            } else if x == f64::NEG_INFINITY {
                seq.serialize_element("-inf")
            } else {
                seq.serialize_element(&x)
            }
        }
        let mut seq = s.serialize_seq(Some(2))?;
        endpoint(&mut seq, self.lo)?;
        endpoint(&mut seq, self.hi)?;
        seq.end()
    }
}

struct IvVisitor;

impl<'de> Visitor<'de> for IvVisitor {
    type Value = Interval;

    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        write!(f, "a two-element [lo, hi] sequence (numbers or \"inf\"/\"-inf\")")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Interval, A::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Ep {
            Num(f64),
            Str(String),
        }
        fn to_f64<E: de::Error>(e: Ep) -> Result<f64, E> {
            match e {
                Ep::Num(x) => Ok(x),
                Ep::Str(s) if s == "inf" => Ok(f64::INFINITY),
                Ep::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
                Ep::Str(s) => Err(E::custom(format!("bad endpoint {s:?}"))),
            }
        }
        let lo: Ep = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
        let hi: Ep = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
        Ok(Interval::new(to_f64(lo)?, to_f64(hi)?))
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Interval, D::Error> {
        d.deserialize_seq(IvVisitor)
    }
}
