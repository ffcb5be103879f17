//! Minimal CSV emission shared by the output types.
//!
//! Numbers are written in their shortest exactly-round-tripping decimal
//! form, so parsing a value back yields the identical `f64`.

use std::fmt::Write as _;

/// Formats `x` so that `x.to_string().parse::<f64>() == x`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Header line followed by one line per row, LF terminated.
pub fn table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let row = row.as_ref();
        for (i, &v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

/// `t,value` series.
pub fn series(value_name: &str, points: &[(f64, f64)]) -> String {
    let mut out = format!("t,{value_name}\n");
    for &(t, v) in points {
        let _ = writeln!(out, "{},{}", fmt_f64(t), fmt_f64(v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn readable_for_ordinary_magnitudes() {
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1e-30), "1e-30");
        assert_eq!(table(&["a", "b"], [[1.0, 2.5]]), "a,b\n1,2.5\n");
    }

    proptest! {
        #[test]
        fn round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = fmt_f64(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
