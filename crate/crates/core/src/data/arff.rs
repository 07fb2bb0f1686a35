use std::io::BufRead;
use std::marker::PhantomData;

use super::{split_row, AttributeSpec, Instance, Schema};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Lazy iterator over the `@data` section of an ARFF source.
pub struct ArffRecords<S, R> {
    reader: R,
    schema: Schema,
    line: usize,
    buf: String,
    _scalar: PhantomData<S>,
}

/// Reads the header eagerly and returns the schema together with a lazy record iterator.
/// The last declared attribute is the class.
pub fn parse_arff<S: Scalar, R: BufRead>(mut reader: R) -> Result<(Schema, ArffRecords<S, R>)> {
    let mut relation = None;
    let mut attributes = Vec::new();
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            return Err(schema_error(line_no + 1, "missing @data section"));
        }
        line_no += 1;
        let line = buf.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let (keyword, rest) = split_keyword(line);
        match keyword.to_ascii_lowercase().as_str() {
            "@relation" => relation = Some(unquote_name(rest).0.to_string()),
            "@attribute" => attributes.push(parse_attribute(rest, line_no)?),
            "@data" => break,
            _ => return Err(schema_error(line_no, &format!("unexpected header line `{line}`"))),
        }
    }
    let relation = relation.ok_or_else(|| schema_error(line_no, "missing @relation"))?;
    if attributes.is_empty() {
        return Err(schema_error(line_no, "no attributes declared"));
    }
    let class_index = attributes.len() - 1;
    let schema = Schema::new(relation, attributes, class_index).map_err(|e| match e {
        Error::Config(message) => Error::Schema {
            line: line_no,
            message,
        },
        other => other,
    })?;
    let records = ArffRecords {
        reader,
        schema: schema.clone(),
        line: line_no,
        buf,
        _scalar: PhantomData,
    };
    Ok((schema, records))
}

impl<S: Scalar, R: BufRead> Iterator for ArffRecords<S, R> {
    type Item = Result<Instance<S>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            let line = self.buf.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            if line.starts_with('{') {
                return Some(Err(Error::Record {
                    line: self.line,
                    attribute: String::new(),
                    message: "sparse instances are not supported".into(),
                }));
            }
            return Some(self.schema.parse_tokens(&split_row(line), self.line));
        }
    }
}

fn schema_error(line: usize, message: &str) -> Error {
    Error::Schema {
        line,
        message: message.to_string(),
    }
}

fn split_keyword(line: &str) -> (&str, &str) {
    match line.find(char::is_whitespace) {
        Some(i) => (&line[..i], line[i..].trim_start()),
        None => (line, ""),
    }
}

/// Splits a possibly quoted leading name from the remainder of the line.
fn unquote_name(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    if let Some(q) = s.chars().next().filter(|c| *c == '\'' || *c == '"') {
        if let Some(end) = s[1..].find(q) {
            return (&s[1..1 + end], s[end + 2..].trim_start());
        }
    }
    split_keyword(s)
}

fn parse_attribute(rest: &str, line: usize) -> Result<AttributeSpec> {
    let (name, kind) = unquote_name(rest);
    if name.is_empty() {
        return Err(schema_error(line, "attribute without a name"));
    }
    if let Some(inner) = kind.strip_prefix('{') {
        let inner = inner
            .trim_end()
            .strip_suffix('}')
            .ok_or_else(|| schema_error(line, "unterminated nominal value list"))?;
        let values = split_row(inner);
        if values.iter().any(|v| v.is_empty()) {
            return Err(schema_error(line, "empty nominal value"));
        }
        return AttributeSpec::nominal(name, values).map_err(|e| schema_error(line, &e.to_string()));
    }
    match kind.to_ascii_lowercase().as_str() {
        "numeric" | "real" | "integer" => Ok(AttributeSpec::numeric(name)),
        other => Err(schema_error(
            line,
            &format!("unsupported attribute type `{other}` for `{name}`"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AttributeKind;

    const WEATHER: &str = "% comment\n@relation weather\n\n@attribute outlook {sunny,rain}\n@attribute temp numeric\n@attribute class {up,down}\n@data\nsunny,1.5,up\n% skipped\nrain,-2,down\n";

    #[test]
    fn parses_header_and_rows() {
        let (schema, rows) = parse_arff::<f64, _>(WEATHER.as_bytes()).unwrap();
        assert_eq!(schema.relation(), "weather");
        assert_eq!(schema.num_features(), 2);
        assert_eq!(schema.num_classes(), 2);
        let rows: Vec<_> = rows.collect::<Result<_>>().unwrap();
        assert_eq!(rows[0].values, vec![0.0, 1.5]);
        assert_eq!(rows[0].class_index, 0);
        assert_eq!(rows[1].values, vec![1.0, -2.0]);
        assert_eq!(rows[1].class_index, 1);
    }

    #[test]
    fn empty_data_section_is_ok() {
        let src = "@relation r\n@attribute x numeric\n@attribute c {a,b}\n@data\n";
        let (schema, rows) = parse_arff::<f64, _>(src.as_bytes()).unwrap();
        assert_eq!(schema.num_features(), 1);
        assert_eq!(rows.count(), 0);
    }

    #[test]
    fn quoted_names_and_values() {
        let src = "@relation 'my rel'\n@attribute 'the x' {'a b',c}\n@attribute class {'yes, really',no}\n@data\n'a b','yes, really'\n";
        let (schema, rows) = parse_arff::<f64, _>(src.as_bytes()).unwrap();
        assert_eq!(schema.relation(), "my rel");
        assert_eq!(schema.attributes()[0].name, "the x");
        assert_eq!(
            schema.attributes()[0].kind,
            AttributeKind::Nominal(vec!["a b".into(), "c".into()])
        );
        let rows: Vec<_> = rows.collect::<Result<_>>().unwrap();
        assert_eq!(rows[0].values, vec![0.0]);
        assert_eq!(rows[0].class_index, 0);
    }

    #[test]
    fn malformed_header_reports_line() {
        let src = "@relation r\n@attribute x string\n@attribute c {a}\n@data\n";
        match parse_arff::<f64, _>(src.as_bytes()) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {:?}", other.err()),
        }
        assert!(matches!(
            parse_arff::<f64, _>("@relation r\n@attribute x numeric\n".as_bytes()),
            Err(Error::Schema { .. })
        ));
        assert!(matches!(
            parse_arff::<f64, _>("@relation r\n@attribute c numeric\n@data\n".as_bytes()),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn unknown_nominal_token_names_attribute() {
        let src = "@relation r\n@attribute o {sunny,rain}\n@attribute c {a,b}\n@data\nsnow,a\n";
        let (_, mut rows) = parse_arff::<f64, _>(src.as_bytes()).unwrap();
        match rows.next().unwrap() {
            Err(Error::Record { line, attribute, .. }) => {
                assert_eq!(line, 5);
                assert_eq!(attribute, "o");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_values_rejected() {
        let src = "@relation r\n@attribute x numeric\n@attribute c {a,b}\n@data\n?,a\n";
        let (_, mut rows) = parse_arff::<f64, _>(src.as_bytes()).unwrap();
        assert!(matches!(rows.next(), Some(Err(Error::Record { .. }))));
    }
}
