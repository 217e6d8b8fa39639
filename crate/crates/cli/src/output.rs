use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use crate::error::CliError;

/// `%.12g`: twelve significant digits, trailing zeros trimmed, exponent form
/// outside `[1e-4, 1e12)`.
pub fn g12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Stdout or the `--output` file.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One or more curves sharing an x axis, as polylines inside a framed plot.
pub fn write_svg(path: &Path, x_label: &str, y_label: &str, curves: &[(&str, Vec<(f64, f64)>)]) -> Result<(), CliError> {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 50.0;
    let finite = curves.iter().flat_map(|c| c.1.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / y1 * (H - 2.0 * PAD);

    let mut s = String::new();
    s.push_str(&format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n"));
    s.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = H - PAD,
        r = W - PAD
    ));
    s.push_str(&format!("<text x=\"{PAD}\" y=\"{}\">{}</text>\n", H - 15.0, g12(x0)));
    s.push_str(&format!("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", W - PAD, H - 15.0, g12(x1)));
    s.push_str(&format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n", W / 2.0, H - 15.0));
    s.push_str(&format!("<text x=\"5\" y=\"{}\">{}</text>\n", PAD, g12(y1)));
    s.push_str(&format!("<text x=\"5\" y=\"{}\">0</text>\n", H - PAD));
    s.push_str(&format!("<text x=\"5\" y=\"{}\">{y_label}</text>\n", H / 2.0));
    let colors = ["blue", "red", "green"];
    for (i, (name, pts)) in curves.iter().enumerate() {
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let color = colors[i % colors.len()];
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"><title>{name}</title></polyline>\n",
            coords.join(" ")
        ));
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::g12;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.228944), "0.228944");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(2.0 / 3.0), "0.666666666667");
        assert_eq!(g12(123456.0), "123456");
        assert_eq!(g12(1e-5), "1e-05");
        assert_eq!(g12(0.0001234), "0.0001234");
        assert_eq!(g12(1.5e12), "1.5e+12");
        assert_eq!(g12(-0.25), "-0.25");
        assert_eq!(g12(999999999999.9), "1e+12");
        assert_eq!(g12(f64::INFINITY), "inf");
        assert_eq!(g12(f64::NAN), "nan");
    }
}
