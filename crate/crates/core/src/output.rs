//! Byte-stable text output.

/// 17 significant digits in scientific notation, so identical values always
/// print identically and round-trip exactly.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Minimal CSV builder: fixed header, rows appended in order.
#[derive(Clone, Debug)]
pub struct Csv {
    columns: usize,
    text: String,
}

pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            columns: header.len(),
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns, "row width does not match header");
        let line: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::Int(i) => i.to_string(),
                Cell::Float(x) => fmt_float(x),
                Cell::Text(t) => t,
            })
            .collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        let x = 0.1 + 0.2;
        let s = fmt_float(x);
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(vec![1usize.into(), 0.5.into()]);
        assert_eq!(c.as_str(), "a,b\n1,5.0000000000000000e-1\n");
    }
}
