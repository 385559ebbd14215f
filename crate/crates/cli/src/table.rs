use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Column separator for tabular output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    #[default]
    Tsv,
    Csv,
}

impl TableFormat {
    fn separator(self) -> &'static str {
        match self {
            TableFormat::Tsv => "\t",
            TableFormat::Csv => ",",
        }
    }
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tsv" => Ok(TableFormat::Tsv),
            "csv" => Ok(TableFormat::Csv),
            other => Err(format!("unknown table format '{other}'")),
        }
    }
}

/// Header plus rows of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Trailing `# key<sep>value` lines.
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn note(&mut self, key: &str, value: impl fmt::Display) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self, format: TableFormat) -> String {
        let sep = format.separator();
        let mut out = format!("#{}\n", self.header.join(sep));
        for row in &self.rows {
            out.push_str(&row.join(sep));
            out.push('\n');
        }
        for (k, v) in &self.notes {
            out.push_str(&format!("# {k}{sep}{v}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path, format: TableFormat) -> std::io::Result<()> {
        std::fs::write(path, self.render(format))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_prefixed_and_separators_follow_format() {
        let mut t = Table::new(["a", "b"]);
        t.push([1, 2]);
        t.note("slope", 1.5);
        assert_eq!(t.render(TableFormat::Tsv), "#a\tb\n1\t2\n# slope\t1.5\n");
        assert_eq!(t.render(TableFormat::Csv), "#a,b\n1,2\n# slope,1.5\n");
    }
}
