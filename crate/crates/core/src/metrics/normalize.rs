use serde::{Deserialize, Serialize};

/// Text normalization applied before comparison. Punctuation is kept by
/// default so operators in SQL and logical forms survive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Normalization {
    pub lowercase: bool,
    pub strip_punct: bool,
    pub collapse_ws: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            lowercase: true,
            strip_punct: false,
            collapse_ws: true,
        }
    }
}

impl Normalization {
    pub const NONE: Normalization = Normalization {
        lowercase: false,
        strip_punct: false,
        collapse_ws: false,
    };
}

/// Lowercase, then drop punctuation and symbols, then collapse whitespace.
/// Idempotent for every flag combination.
pub fn normalize(text: &str, norm: &Normalization) -> String {
    let mut s = if norm.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    if norm.strip_punct {
        s.retain(|c| c.is_alphanumeric() || c.is_whitespace());
    }
    if norm.collapse_ws {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    s
}

/// Canonical spelling of a plain decimal number (`"1.0"` and `"1"` agree);
/// other strings are returned unchanged.
pub fn canonical_number(text: &str) -> String {
    let t = text.trim();
    if !looks_numeric(t) {
        return text.to_string();
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => {
            let v = if v == 0.0 { 0.0 } else { v };
            format!("{v}")
        }
        _ => text.to_string(),
    }
}

fn looks_numeric(t: &str) -> bool {
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let (int, frac) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    let mantissa_ok = digits(int) && digits(frac) && !(int.is_empty() && frac.is_empty());
    let exponent_ok = exponent.is_none_or(|e| {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        !e.is_empty() && digits(e)
    });
    mantissa_ok && exponent_ok
}
