//! Report encodings. Every report carries the digest of the config that
//! produced it: a `config_digest` field per JSON line, a leading comment
//! line in flat tables.

use serde::Serialize;

use crate::error::Result;

#[derive(Serialize)]
struct Stamped<'a, T> {
    config_digest: &'a str,
    #[serde(flatten)]
    record: &'a T,
}

pub fn jsonl_report<T: Serialize>(config_digest: &str, records: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(
            &mut out,
            &Stamped {
                config_digest,
                record,
            },
        )?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Tab-separated table with a header row.
#[derive(Clone, Debug, Default)]
pub struct Tsv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Tsv {
    pub fn new(header: &[&str]) -> Self {
        Tsv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_bytes(&self, config_digest: &str) -> Vec<u8> {
        let mut out = format!(
            "# config_digest={config_digest}\n{}\n",
            self.header.join("\t")
        );
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out.into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamps_every_record() {
        #[derive(Serialize)]
        struct R {
            x: u32,
        }
        let out = jsonl_report("abc", &[R { x: 1 }, R { x: 2 }]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"config_digest\":\"abc\",\"x\":1}\n{\"config_digest\":\"abc\",\"x\":2}\n"
        );
        let mut t = Tsv::new(&["a", "b"]);
        t.row(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_bytes("abc"), b"# config_digest=abc\na\tb\n1\t2\n");
    }
}
