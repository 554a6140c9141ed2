//! Structured CSV output: `LineId,Content,EventTemplate,ParameterList`.

use std::io::Write;

use crate::parser::ParsedMessage;

pub const HEADER: [&str; 4] = ["LineId", "Content", "EventTemplate", "ParameterList"];

/// Writes one row per parsed message; the header row is written up front.
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
    flush_each: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(sink: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(HEADER)?;
        Ok(Self { inner, flush_each: false })
    }

    /// Flush after every row, for incremental consumers.
    pub fn flushing(mut self) -> Self {
        self.flush_each = true;
        self
    }

    pub fn write(&mut self, msg: &ParsedMessage) -> csv::Result<()> {
        let params: Vec<&str> = msg.variables.iter().map(|(_, v)| v.as_str()).collect();
        let params = serde_json::to_string(&params).expect("string list serializes");
        self.inner.write_record([
            msg.line_id.to_string().as_str(),
            &msg.content,
            &msg.template,
            &params,
        ])?;
        if self.flush_each {
            self.inner.flush()?;
        }
        Ok(())
    }

    pub fn write_all<'a>(&mut self, msgs: impl IntoIterator<Item = &'a ParsedMessage>) -> csv::Result<()> {
        msgs.into_iter().try_for_each(|m| self.write(m))
    }

    pub fn finish(mut self) -> csv::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::TokenLabel;

    #[test]
    fn rows_and_quoting() {
        let msg = ParsedMessage {
            line_id: 3,
            content: "Found block rdd_42_20 locally, \"quoted\"".into(),
            template: "Found block $1 locally,".into(),
            variables: vec![(1, "rdd_42_20".into())],
            labels: vec![TokenLabel::Static],
        };
        let mut sink = CsvSink::new(Vec::new()).unwrap();
        sink.write(&msg).unwrap();
        let text = String::from_utf8(sink.finish().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("LineId,Content,EventTemplate,ParameterList"));
        assert_eq!(
            lines.next(),
            Some(r#"3,"Found block rdd_42_20 locally, ""quoted""","Found block $1 locally,","[""rdd_42_20""]""#)
        );

        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let row = rdr.records().next().unwrap().unwrap();
        let params: Vec<String> = serde_json::from_str(&row[3]).unwrap();
        assert_eq!(params, ["rdd_42_20"]);
    }
}
