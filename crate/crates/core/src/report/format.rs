//! Number formatting with half-away-from-zero rounding applied to the
//! shortest round-trip decimal representation of a value.

/// Decimal digits of |x| with the position of the leading digit:
/// |x| = 0.d₀d₁… × 10^(exp + 1).
fn decompose(x: f64) -> (bool, Vec<u8>, i32) {
    let s = format!("{:e}", x.abs());
    let (mantissa, exp) = s.split_once('e').expect("LowerExp has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits = mantissa
        .bytes()
        .filter(u8::is_ascii_digit)
        .map(|b| b - b'0')
        .collect();
    (x.is_sign_negative() && x != 0.0, digits, exp)
}

/// Digits of round(|x| · 10^decimals), most significant first.
fn scaled_digits(x: f64, decimals: i32) -> (bool, Vec<u8>) {
    let (neg, digits, exp) = decompose(x);
    // digit i has place value 10^(exp - i)
    let keep = exp + decimals + 1;
    if keep < 0 {
        return (neg, vec![0]);
    }
    let keep = keep as usize;
    let mut out: Vec<u8> = (0..keep)
        .map(|i| digits.get(i).copied().unwrap_or(0))
        .collect();
    let round_up = digits.get(keep).is_some_and(|&d| d >= 5);
    if round_up {
        let mut i = out.len();
        loop {
            if i == 0 {
                out.insert(0, 1);
                break;
            }
            i -= 1;
            if out[i] == 9 {
                out[i] = 0;
            } else {
                out[i] += 1;
                break;
            }
        }
    }
    if out.is_empty() {
        out.push(0);
    }
    (neg, out)
}

/// Fixed-point with `decimals` places; a value that rounds to zero prints
/// without a sign.
pub fn fixed(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return non_finite(x);
    }
    let d = decimals as i32;
    let (neg, mut digits) = scaled_digits(x, d);
    while digits.len() <= decimals {
        digits.insert(0, 0);
    }
    let split = digits.len() - decimals;
    let int: String = digits[..split].iter().map(|d| (b'0' + d) as char).collect();
    let int = int.trim_start_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let frac: String = digits[split..].iter().map(|d| (b'0' + d) as char).collect();
    let zero = digits.iter().all(|&d| d == 0);
    let sign = if neg && !zero { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// `sig` significant digits, trailing fractional zeros removed.
pub fn significant(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return non_finite(x);
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let (_, _, exp) = decompose(x);
    let decimals = sig as i32 - 1 - exp;
    let s = if decimals >= 0 {
        fixed(x, decimals as usize)
    } else {
        let (neg, digits) = scaled_digits(x, decimals);
        let mut s: String = digits.iter().map(|d| (b'0' + d) as char).collect();
        s.push_str(&"0".repeat((-decimals) as usize));
        if neg {
            s.insert(0, '-');
        }
        s
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Percentage with `decimals` places: 0.6977 → `69.77%`.
pub fn percent(x: f64, decimals: usize) -> String {
    format!("{}%", fixed(x * 100.0, decimals))
}

fn non_finite(x: f64) -> String {
    if x.is_nan() {
        ".".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// `***`, `**`, `*` or nothing for two-sided p below 1%, 5% and 10%.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}
