//! Property checks driven by the cargo-fuzz targets and by the corpus seed
//! test. Each takes arbitrary bytes and panics only on a real bug.

use crate::amendments::AmendmentLog;
use crate::path::Path;
use crate::pipeline::parse_revisions;
use crate::schema::{parse_dataclass, parse_schema};
use crate::tokenizer::{BuiltinTokenizer, Tokenizer};

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

/// Parsed paths format back to a string that parses to the same path.
pub fn path_parse(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(p) = Path::parse(s) {
        let again = Path::parse(&p.to_string()).expect("formatted path parses");
        assert_eq!(again, p);
    }
}

/// Parsed descriptors survive a descriptor and a dataclass round trip.
pub fn schema_descriptor(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(schema) = parse_schema(s) {
        let again = parse_schema(&schema.to_descriptor_string()).expect("descriptor round trip");
        assert_eq!(again, schema);
        let rendered = parse_dataclass(&schema.render()).expect("rendered schema parses");
        assert_eq!(rendered, schema);
    }
}

/// Parsed dataclass text renders to text that parses to the same schema.
pub fn dataclass_schema(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(schema) = parse_dataclass(s) {
        let again = parse_dataclass(&schema.render()).expect("rendered schema parses");
        assert_eq!(again, schema);
    }
}

/// Revision extraction never panics and well-formed items round trip.
pub fn revisions(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(items) = parse_revisions(s) {
        for item in items {
            if let Ok(rev) = item.revision {
                let again =
                    parse_revisions(&format!("[{}]", rev.to_canonical_json())).expect("reparse");
                assert_eq!(again[0].revision.as_ref().ok(), Some(&rev));
            }
        }
    }
}

/// A parsed log reserializes to the same bytes and resolves consistently.
pub fn amendment_log(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(log) = AmendmentLog::parse(s) {
        let again = AmendmentLog::parse(log.serialize()).expect("serialized log parses");
        assert_eq!(again.serialize(), log.serialize());
        assert_eq!(again.resolve(), log.resolve());
        assert_eq!(log.compact().resolve(), log.resolve());
    }
}

/// Tokenization is lossless.
pub fn tokenize(data: &[u8]) {
    let s = String::from_utf8_lossy(data);
    let seq = BuiltinTokenizer.tokenize(&s);
    assert_eq!(seq.detokenize(), s);
}
