use super::MixtureError;

/// Parses a token budget such as `150`, `20K`, `1.5B` or `2T`.
/// The value must be a whole number of tokens after scaling.
pub fn parse_budget(input: &str) -> Result<u64, MixtureError> {
    let bad = || MixtureError::InvalidBudget(input.to_owned());
    let s = input.trim().replace('_', "");
    let (number, scale): (&str, u32) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 3),
        Some('M' | 'm') => (&s[..s.len() - 1], 6),
        Some('B' | 'b' | 'G' | 'g') => (&s[..s.len() - 1], 9),
        Some('T' | 't') => (&s[..s.len() - 1], 12),
        _ => (&s[..], 0),
    };
    let (whole, frac) = number.split_once('.').unwrap_or((number, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let frac = frac.trim_end_matches('0');
    let frac_len = u32::try_from(frac.len()).map_err(|_| bad())?;
    if frac_len > scale {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let mantissa: u128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let value = mantissa
        .checked_mul(10u128.pow(scale - frac_len))
        .ok_or_else(bad)?;
    let value = u64::try_from(value).map_err(|_| bad())?;
    if value == 0 {
        return Err(MixtureError::ZeroBudget);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_budget("150"), Ok(150));
        assert_eq!(parse_budget("20K"), Ok(20_000));
        assert_eq!(parse_budget("1.5B"), Ok(1_500_000_000));
        assert_eq!(parse_budget("0.25M"), Ok(250_000));
        assert_eq!(parse_budget("2T"), Ok(2_000_000_000_000));
        assert_eq!(parse_budget("1.500k"), Ok(1_500));
        assert_eq!(parse_budget("1_000"), Ok(1_000));
    }

    #[test]
    fn rejects() {
        for s in ["", "K", "1.5", "1.2345K", "-5", "abc", "1e9", "99999999999T"] {
            assert!(parse_budget(s).is_err(), "{s}");
        }
        assert_eq!(parse_budget("0"), Err(MixtureError::ZeroBudget));
    }
}
