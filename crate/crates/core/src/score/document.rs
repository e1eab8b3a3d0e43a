//! JSON form of a score.
//!
//! Output is canonical: compact, keys in a fixed order, events sorted by
//! `(start, track, id)`, extra properties sorted by key at every depth. Two
//! scores are equal exactly when their serialized bytes are.
//!
//! ```text
//! {"version":1,"tracks":[..],"duration":ms,"events":[
//!   {"id":"<32hex>","track":n,"start":ms,"duration":ms,
//!    "props":{"karma":"..","nuance":"..",..extras}}]}
//! ```

use serde::ser::{SerializeMap, SerializeSeq, SerializeStruct};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{BlockId, InvariantViolation, Karma, Millis, Nuance, Score, ScoreBlock, FORMAT_VERSION};

#[derive(Debug, Error, PartialEq)]
pub enum DocumentError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("schema violation at {path}: {detail}")]
    Schema { path: String, detail: String },
    #[error("invariant violation: {0}")]
    Invariant(#[from] InvariantViolation),
}

fn schema(path: impl Into<String>, detail: impl Into<String>) -> DocumentError {
    DocumentError::Schema { path: path.into(), detail: detail.into() }
}

/// Parses and checks a score document.
pub fn parse_score(text: &str) -> Result<Score, DocumentError> {
    let score = parse_document(text)?;
    score.check()?;
    Ok(score)
}

/// Parses a score document without checking the score invariants.
///
/// Used where a broken file must still be inspected, e.g. by the validator.
pub fn parse_document(text: &str) -> Result<Score, DocumentError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| DocumentError::Malformed(e.to_string()))?;
    decode_score(&value)
}

pub fn serialize_score(score: &Score) -> String {
    serde_json::to_string(score).expect("score serialization is infallible")
}

pub(crate) fn decode_score(value: &Value) -> Result<Score, DocumentError> {
    let obj = value.as_object().ok_or_else(|| schema("$", "expected an object"))?;
    reject_unknown(obj, "$", &["version", "tracks", "duration", "events"])?;

    let version = uint(field(obj, "$", "version")?, "$.version")?;
    if version != FORMAT_VERSION as u64 {
        return Err(schema("$.version", format!("unsupported format version {version}")));
    }

    let tracks = field(obj, "$", "tracks")?
        .as_array()
        .ok_or_else(|| schema("$.tracks", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, t)| match t.as_str() {
            Some(name) if !name.is_empty() => Ok(name.to_string()),
            _ => Err(schema(format!("$.tracks[{i}]"), "expected a non-empty string")),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let duration = uint(field(obj, "$", "duration")?, "$.duration")?;

    let events = field(obj, "$", "events")?
        .as_array()
        .ok_or_else(|| schema("$.events", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, e)| decode_block(e, &format!("$.events[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;

    let mut score = Score { version: FORMAT_VERSION, tracks, duration, events };
    score.normalize();
    Ok(score)
}

pub(crate) fn decode_block(value: &Value, path: &str) -> Result<ScoreBlock, DocumentError> {
    let obj = value.as_object().ok_or_else(|| schema(path, "expected an object"))?;
    reject_unknown(obj, path, &["id", "track", "start", "duration", "props"])?;

    let id_path = format!("{path}.id");
    let id: BlockId = field(obj, path, "id")?
        .as_str()
        .ok_or_else(|| schema(&id_path, "expected a string"))?
        .parse()
        .map_err(|e: super::InvalidBlockId| schema(&id_path, e.to_string()))?;
    // Errors below name the block as well as the path.
    let at = format!("{path} (block {id})");

    let track = uint(field(obj, &at, "track")?, &format!("{at}.track"))?;
    let track = usize::try_from(track).map_err(|_| schema(format!("{at}.track"), "too large"))?;
    let start = uint(field(obj, &at, "start")?, &format!("{at}.start"))?;
    let duration = uint(field(obj, &at, "duration")?, &format!("{at}.duration"))?;

    let props_path = format!("{at}.props");
    let props = field(obj, &at, "props")?
        .as_object()
        .ok_or_else(|| schema(&props_path, "expected an object"))?;
    let karma_path = format!("{props_path}.karma");
    let karma = Karma::new(
        field(props, &props_path, "karma")?
            .as_str()
            .ok_or_else(|| schema(&karma_path, "expected a string"))?,
    )
    .map_err(|e| schema(&karma_path, e.to_string()))?;
    let nuance_path = format!("{props_path}.nuance");
    let nuance: Nuance = field(props, &props_path, "nuance")?
        .as_str()
        .ok_or_else(|| schema(&nuance_path, "expected a string"))?
        .parse()
        .map_err(|e: super::UnknownNuance| schema(&nuance_path, e.to_string()))?;

    let extras: Map<String, Value> = props
        .iter()
        .filter(|(k, _)| k.as_str() != "karma" && k.as_str() != "nuance")
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    Ok(ScoreBlock { id, track, start, duration, karma, nuance, extras })
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, DocumentError> {
    obj.get(key).ok_or_else(|| schema(format!("{path}.{key}"), "missing field"))
}

fn uint(value: &Value, path: &str) -> Result<Millis, DocumentError> {
    value.as_u64().ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn reject_unknown(obj: &Map<String, Value>, path: &str, known: &[&str]) -> Result<(), DocumentError> {
    match obj.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(schema(format!("{path}.{k}"), "unknown field")),
        None => Ok(()),
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut sorted: Vec<&ScoreBlock> = self.events.iter().collect();
        sorted.sort_by_key(|b| b.sort_key());
        let mut st = serializer.serialize_struct("Score", 4)?;
        st.serialize_field("version", &self.version)?;
        st.serialize_field("tracks", &self.tracks)?;
        st.serialize_field("duration", &self.duration)?;
        st.serialize_field("events", &Events(&sorted))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        let score = decode_score(&value).map_err(serde::de::Error::custom)?;
        score.check().map_err(serde::de::Error::custom)?;
        Ok(score)
    }
}

impl Serialize for ScoreBlock {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ScoreBlock", 5)?;
        st.serialize_field("id", &self.id)?;
        st.serialize_field("track", &self.track)?;
        st.serialize_field("start", &self.start)?;
        st.serialize_field("duration", &self.duration)?;
        st.serialize_field("props", &Props(self))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ScoreBlock {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        decode_block(&value, "$").map_err(serde::de::Error::custom)
    }
}

struct Events<'a>(&'a [&'a ScoreBlock]);

impl Serialize for Events<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for block in self.0 {
            seq.serialize_element(block)?;
        }
        seq.end()
    }
}

struct Props<'a>(&'a ScoreBlock);

impl Serialize for Props<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let block = self.0;
        let mut map = serializer.serialize_map(Some(2 + block.extras.len()))?;
        map.serialize_entry("karma", &block.karma)?;
        map.serialize_entry("nuance", &block.nuance)?;
        let mut keys: Vec<&String> = block.extras.keys().collect();
        keys.sort();
        for key in keys {
            map.serialize_entry(key, &Canonical(&block.extras[key]))?;
        }
        map.end()
    }
}

/// JSON value with object keys emitted in sorted order at every depth.
struct Canonical<'a>(&'a Value);

impl Serialize for Canonical<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Value::Array(items) => {
                let mut seq = serializer.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(&Canonical(item))?;
                }
                seq.end()
            }
            Value::Object(obj) => {
                let mut keys: Vec<&String> = obj.keys().collect();
                keys.sort();
                let mut map = serializer.serialize_map(Some(keys.len()))?;
                for key in keys {
                    map.serialize_entry(key, &Canonical(&obj[key]))?;
                }
                map.end()
            }
            other => other.serialize(serializer),
        }
    }
}
