//! Scalar values stored in tuples and compared by predicates.

use std::fmt;
use std::str::FromStr;

/// Fixed-point decimal with up to four fractional digits, stored as a scaled
/// integer. Equality, ordering, and hashing are exact, so evaluation results
/// never depend on floating-point rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal(i64);

impl Decimal {
    /// Scaled units per integral 1 (four fractional digits).
    pub const SCALE: i64 = 10_000;

    /// Builds a decimal from raw scaled units (`from_scaled(15000)` is 1.5).
    pub fn from_scaled(units: i64) -> Self {
        Decimal(units)
    }

    pub fn from_int(n: i64) -> Self {
        Decimal(n * Self::SCALE)
    }

    pub fn scaled(self) -> i64 {
        self.0
    }
}

impl From<i64> for Decimal {
    fn from(n: i64) -> Self {
        Decimal::from_int(n)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let units = abs / Decimal::SCALE as u64;
        let mut frac = abs % Decimal::SCALE as u64;
        if frac == 0 {
            return write!(f, "{sign}{units}");
        }
        let mut digits = 4;
        while frac.is_multiple_of(10) {
            frac /= 10;
            digits -= 1;
        }
        write!(f, "{sign}{units}.{frac:0width$}", width = digits)
    }
}

/// Error produced when a decimal literal cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDecimalError(pub String);

impl fmt::Display for ParseDecimalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed decimal literal `{}`", self.0)
    }
}

impl std::error::Error for ParseDecimalError {}

impl FromStr for Decimal {
    type Err = ParseDecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDecimalError(s.to_string());
        let (sign, body) = match s.strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1i64, s.strip_prefix('+').unwrap_or(s)),
        };
        let (units_str, frac_str) = match body.split_once('.') {
            Some((u, fr)) if !fr.is_empty() => (u, fr),
            Some(_) => return Err(err()),
            None => (body, ""),
        };
        if units_str.is_empty() || frac_str.len() > 4 {
            return Err(err());
        }
        if !units_str.bytes().all(|b| b.is_ascii_digit())
            || !frac_str.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let units: i64 = units_str.parse().map_err(|_| err())?;
        let mut frac: i64 = if frac_str.is_empty() {
            0
        } else {
            frac_str.parse().map_err(|_| err())?
        };
        for _ in frac_str.len()..4 {
            frac *= 10;
        }
        let scaled = units
            .checked_mul(Decimal::SCALE)
            .and_then(|u| u.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Decimal(sign * scaled))
    }
}

/// A single attribute value. Variants correspond to the three attribute
/// domains; ordering and hashing are total and exact, which is what gives
/// relation instances and view extents their set semantics.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Dec(Decimal),
    Text(String),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    /// Human-readable name of the value's domain, for error messages.
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Dec(_) => "decimal",
            Value::Text(_) => "text",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Dec(d) => write!(f, "{d}"),
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}
