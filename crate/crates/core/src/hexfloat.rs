//! Lossless hexadecimal floating-point text (`0x1.8p+1`), C99 `%a` style.

use crate::error::{Error, Result};

pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if biased == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 { (0, -1022) } else { (1, biased - 1023) };
    let digits = format!("{mantissa:013x}");
    let digits = digits.trim_end_matches('0');
    let exp_sign = if exp >= 0 { "+" } else { "-" };
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp_sign}{}", exp.abs())
    } else {
        format!("{sign}0x{lead}.{digits}p{exp_sign}{}", exp.abs())
    }
}

pub fn parse_hex(s: &str) -> Result<f64> {
    let bad = || Error::domain(format!("malformed hex float `{s}`"));
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let value = match body {
        "inf" => f64::INFINITY,
        "nan" => f64::NAN,
        _ => {
            let body = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")).ok_or_else(bad)?;
            let (mant, exp) = body.split_once(['p', 'P']).ok_or_else(bad)?;
            let exp: i64 = exp.parse().map_err(|_| bad())?;
            let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
            if int_part.is_empty() || int_part.len() + frac_part.len() > 15 {
                return Err(bad());
            }
            let all = format!("{int_part}{frac_part}");
            let m = u64::from_str_radix(&all, 16).map_err(|_| bad())?;
            if m >= 1u64 << 53 {
                return Err(bad());
            }
            ldexp(m as f64, exp - 4 * frac_part.len() as i64)
        }
    };
    Ok(if negative { -value } else { value })
}

// m * 2^e in steps that stay in the normal range until the last multiply.
fn ldexp(mut m: f64, mut e: i64) -> f64 {
    while e > 1000 {
        m *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        m *= 2f64.powi(-1000);
        e += 1000;
    }
    m * 2f64.powi(e as i32)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(format_hex(1.0), "0x1p+0");
        assert_eq!(format_hex(3.0), "0x1.8p+1");
        assert_eq!(format_hex(-0.5), "-0x1p-1");
        assert_eq!(format_hex(0.0), "0x0p+0");
        assert_eq!(format_hex(-0.0), "-0x0p+0");
        assert_eq!(format_hex(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_hex(f64::from_bits(1)), "0x0.0000000000001p-1022");
        assert_eq!(parse_hex("0x1.8p+1").unwrap(), 3.0);
        assert_eq!(parse_hex("0x0.0000000000001p-1022").unwrap(), f64::from_bits(1));
        assert_eq!(parse_hex(&format_hex(f64::MAX)).unwrap(), f64::MAX);
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "1.5", "0x", "0x1.8", "0xzp+1", "0x1.8p", "0x1.00000000000000000p+0"] {
            assert!(parse_hex(s).is_err(), "{s}");
        }
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back = parse_hex(&format_hex(x)).unwrap();
            prop_assert_eq!(back.to_bits(), bits);
        }
    }
}
