use std::io::BufRead;
use std::marker::PhantomData;

use super::{split_row, Instance, Schema};
use crate::error::Result;
use crate::num::Scalar;

/// Lazy iterator over header-less CSV rows. Columns follow the schema's attribute order,
/// which puts the class last for every ARFF-derived schema.
pub struct CsvRecords<S, R> {
    reader: R,
    schema: Schema,
    row: usize,
    buf: String,
    _scalar: PhantomData<S>,
}

pub fn parse_csv<S: Scalar, R: BufRead>(reader: R, schema: Schema) -> CsvRecords<S, R> {
    CsvRecords {
        reader,
        schema,
        row: 0,
        buf: String::new(),
        _scalar: PhantomData,
    }
}

impl<S: Scalar, R: BufRead> Iterator for CsvRecords<S, R> {
    type Item = Result<Instance<S>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            self.row += 1;
            return Some(self.schema.parse_tokens(&split_row(line), self.row));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AttributeSpec;
    use crate::error::Error;

    fn schema() -> Schema {
        Schema::new(
            "r",
            vec![
                AttributeSpec::numeric("a"),
                AttributeSpec::numeric("b"),
                AttributeSpec::nominal("class", ["0", "1"]).unwrap(),
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn direct_mapping() {
        let rows: Vec<Instance<f64>> = parse_csv("1.0,0.0,1\n".as_bytes(), schema())
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(rows[0].values, vec![1.0, 0.0]);
        assert_eq!(rows[0].class_index, 1);
    }

    #[test]
    fn arity_mismatch_reports_row() {
        let mut it = parse_csv::<f64, _>("1.0,1\n".as_bytes(), schema());
        match it.next() {
            Some(Err(Error::Arity { row, expected, found })) => {
                assert_eq!((row, expected, found), (1, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn order_and_count_preserved() {
        let mut text = String::new();
        for i in 0..10_000 {
            text.push_str(&format!("{},{},{}\n", i, -(i as f64) / 8.0, i % 2));
        }
        let rows: Vec<Instance<f64>> =
            parse_csv(text.as_bytes(), schema()).collect::<Result<_>>().unwrap();
        assert_eq!(rows.len(), 10_000);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.values[0], i as f64);
            assert_eq!(r.values[1], -(i as f64) / 8.0);
            assert_eq!(r.class_index, i % 2);
        }
    }
}
