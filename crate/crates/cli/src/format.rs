//! Number formatting for CSV output.

/// How many digits to print.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Precision {
    /// 17 significant digits; parsing the text gives back the same `f64`.
    #[default]
    Full,
    /// Five decimals, the way the reference tables are printed.
    Table,
}

impl Precision {
    pub fn show(self, x: f64) -> String {
        match self {
            Precision::Full => full(x),
            Precision::Table => format!("{x:.5}"),
        }
    }

    pub fn show_opt(self, x: Option<f64>) -> String {
        x.map(|v| self.show(v)).unwrap_or_default()
    }
}

/// Plain decimal notation with 17 significant digits.
pub fn full(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&exp) {
        return format!("{x:.16e}");
    }
    let decimals = (16 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}
