//! Checksum and format validators for structured identifiers.

/// IBAN check: 15 to 34 alphanumerics, country letters, check digits, and
/// mod-97 of the rearranged number equal to 1. Spaces are ignored.
pub fn iban_mod97(iban: &str) -> bool {
    let s: Vec<char> = iban.chars().filter(|c| !c.is_whitespace()).collect();
    if s.len() < 15 || s.len() > 34 {
        return false;
    }
    if !(s[0].is_ascii_uppercase() && s[1].is_ascii_uppercase() && s[2].is_ascii_digit() && s[3].is_ascii_digit()) {
        return false;
    }
    let mut rem: u32 = 0;
    for c in s[4..].iter().chain(&s[..4]) {
        let v = match c {
            '0'..='9' => *c as u32 - '0' as u32,
            'A'..='Z' => *c as u32 - 'A' as u32 + 10,
            _ => return false,
        };
        rem = if v < 10 { (rem * 10 + v) % 97 } else { (rem * 100 + v) % 97 };
    }
    rem == 1
}

/// Czech company identification number: 8 digits, weights 8..2 on the first
/// seven, check digit `(11 - sum mod 11) mod 10`.
pub fn ico_mod11(ico: &str) -> bool {
    let digits: Vec<u32> = ico.chars().filter_map(|c| c.to_digit(10)).collect();
    if digits.len() != 8 || ico.chars().count() != 8 {
        return false;
    }
    let sum: u32 = digits[..7].iter().zip((2..=8).rev()).map(|(d, w)| d * w).sum();
    (11 - sum % 11) % 10 == digits[7]
}

/// Country codes accepted in SWIFT codes.
const SWIFT_COUNTRIES: &[&str] = &[
    "AT", "AU", "BE", "BG", "CA", "CH", "CN", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GB", "GR",
    "HK", "HR", "HU", "IE", "IS", "IT", "JP", "LT", "LU", "LV", "MT", "NL", "NO", "NZ", "PL", "PT", "RO",
    "SE", "SG", "SI", "SK", "US",
];

/// SWIFT/BIC: 8 or 11 chars, alphabetic bank and country codes, alphanumeric rest.
pub fn swift_valid(code: &str) -> bool {
    let s: Vec<char> = code.chars().collect();
    (s.len() == 8 || s.len() == 11)
        && s[..6].iter().all(char::is_ascii_uppercase)
        && s[6..].iter().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
        && SWIFT_COUNTRIES.contains(&code[4..6].to_string().as_str())
}

/// VAT prefixes and the allowed length of the national part.
const VAT_COUNTRIES: &[(&str, usize, usize, bool)] = &[
    // (prefix, min len, max len, digits only)
    ("AT", 9, 9, false),
    ("BE", 10, 10, true),
    ("BG", 9, 10, true),
    ("CY", 9, 9, false),
    ("CZ", 8, 10, true),
    ("DE", 9, 9, true),
    ("DK", 8, 8, true),
    ("EE", 9, 9, true),
    ("EL", 9, 9, true),
    ("ES", 9, 9, false),
    ("FI", 8, 8, true),
    ("FR", 11, 11, false),
    ("GB", 9, 12, false),
    ("HR", 11, 11, true),
    ("HU", 8, 8, true),
    ("IE", 8, 9, false),
    ("IT", 11, 11, true),
    ("LT", 9, 12, true),
    ("LU", 8, 8, true),
    ("LV", 11, 11, true),
    ("MT", 8, 8, true),
    ("NL", 12, 12, false),
    ("PL", 10, 10, true),
    ("PT", 9, 9, true),
    ("RO", 2, 10, true),
    ("SE", 12, 12, true),
    ("SI", 8, 8, true),
    ("SK", 10, 10, true),
];

/// Whether the national part of a VAT number for `prefix` must be all digits.
pub(crate) fn vat_digits_only(prefix: &str) -> Option<bool> {
    VAT_COUNTRIES.iter().find(|v| v.0 == prefix).map(|v| v.3)
}

/// EU VAT number shape: known country prefix and a national part of the allowed length.
pub fn vat_valid(vat: &str) -> bool {
    let s: String = vat.chars().filter(|c| !c.is_whitespace()).collect();
    if s.len() < 4 || !s.is_ascii() {
        return false;
    }
    let (prefix, rest) = s.split_at(2);
    let Some(&(_, min, max, digits)) = VAT_COUNTRIES.iter().find(|v| v.0 == prefix) else {
        return false;
    };
    (min..=max).contains(&rest.len())
        && rest.chars().all(|c| c.is_ascii_digit() || (!digits && c.is_ascii_uppercase()))
        && rest.chars().filter(char::is_ascii_digit).count() >= 2
}

const MONTHS: &[&str] = &[
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

fn month_from_name(name: &str) -> Option<u32> {
    let n = name.trim_end_matches('.').to_ascii_lowercase();
    if n.len() < 3 {
        return None;
    }
    MONTHS.iter().position(|m| n.starts_with(m)).map(|i| i as u32 + 1)
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        _ => 0,
    }
}

/// Parses the supported date shapes into (year, month, day).
pub fn parse_date(text: &str) -> Option<(i32, u32, u32)> {
    let tokens: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == ',' || c == '.' || c == '/' || c == '-')
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.len() != 3 {
        return None;
    }
    let num = |t: &str| -> Option<u32> {
        let t = t.trim_end_matches(|c: char| c.is_ascii_alphabetic());
        if t.is_empty() || !t.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        t.parse().ok()
    };
    let (y, m, d) = if text.contains('-') && tokens[0].len() == 4 {
        (num(tokens[0])?, num(tokens[1])?, num(tokens[2])?)
    } else if let Some(m) = month_from_name(tokens[1]) {
        (num(tokens[2])?, m, num(tokens[0])?)
    } else if let Some(m) = month_from_name(tokens[0]) {
        (num(tokens[2])?, m, num(tokens[1])?)
    } else {
        (num(tokens[2])?, num(tokens[1])?, num(tokens[0])?)
    };
    let year = y as i32;
    if !(1900..=2199).contains(&year) || !(1..=12).contains(&m) || d == 0 || d > days_in_month(year, m) {
        return None;
    }
    Some((year, m, d))
}

/// `N/M`, `N of M` or `N z M` with `1 <= N <= M <= 99`.
pub fn page_number_valid(text: &str) -> bool {
    let nums: Vec<u32> = text
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse().ok())
        .collect();
    matches!(nums.as_slice(), [a, b] if *a >= 1 && a <= b && *b <= 99)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iban_examples() {
        assert!(iban_mod97("GB82WEST12345698765432"));
        assert!(iban_mod97("GB82 WEST 1234 5698 7654 32"));
        assert!(!iban_mod97("GB82WEST12345698765433"));
        assert!(!iban_mod97("gb82west12345698765432"));
    }

    #[test]
    fn ico_examples() {
        assert!(ico_mod11("25596641"));
        assert!(ico_mod11("00176150"));
        assert!(!ico_mod11("25596642"));
        assert!(!ico_mod11("2559664"));
    }

    #[test]
    fn dates() {
        assert_eq!(parse_date("31.03.2021"), Some((2021, 3, 31)));
        assert_eq!(parse_date("1. 3. 2021"), Some((2021, 3, 1)));
        assert_eq!(parse_date("2021-03-31"), Some((2021, 3, 31)));
        assert_eq!(parse_date("31 March 2021"), Some((2021, 3, 31)));
        assert_eq!(parse_date("March 31, 2021"), Some((2021, 3, 31)));
        assert_eq!(parse_date("31.02.2021"), None);
        assert_eq!(parse_date("29.02.2024"), Some((2024, 2, 29)));
    }

    #[test]
    fn vat_and_swift() {
        assert!(vat_valid("CZ00176150"));
        assert!(vat_valid("GB123456789"));
        assert!(!vat_valid("C200176150"));
        assert!(!vat_valid("XX12345678"));
        assert!(swift_valid("GIBACZPX"));
        assert!(swift_valid("KOMBCZPPXXX"));
        assert!(!swift_valid("SUBTOTAL"));
        assert!(!swift_valid("GIBA1ZPX"));
    }

    #[test]
    fn page_numbers() {
        assert!(page_number_valid("1/2"));
        assert!(page_number_valid("2 of 2"));
        assert!(!page_number_valid("9/181"));
        assert!(!page_number_valid("3/2"));
    }
}
