use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::{Checkpoint, DType, Tensor, Violation};

const METADATA_KEY: &str = "__metadata__";

pub(super) struct Decoded {
    pub tensors: BTreeMap<String, Tensor>,
    pub metadata: BTreeMap<String, String>,
    pub violations: Vec<Violation>,
}

/// Serializes tensors in name order, packed back to back. The header is
/// padded with spaces to an 8-byte boundary so the data section stays aligned.
pub fn encode_container(ckpt: &Checkpoint) -> Vec<u8> {
    let mut header = Map::new();
    if !ckpt.metadata.is_empty() {
        header.insert(METADATA_KEY.into(), json!(ckpt.metadata));
    }
    let mut offset = 0usize;
    for (name, t) in &ckpt.tensors {
        let end = offset + t.data.len();
        header.insert(
            name.clone(),
            json!({ "dtype": t.dtype.as_str(), "shape": t.shape, "data_offsets": [offset, end] }),
        );
        offset = end;
    }
    let mut header = serde_json::to_vec(&Value::Object(header)).expect("header serializes");
    while !header.len().is_multiple_of(8) {
        header.push(b' ');
    }

    let mut out = Vec::with_capacity(8 + header.len() + offset);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in ckpt.tensors.values() {
        out.extend_from_slice(&t.data);
    }
    out
}

/// Parses a container, collecting every violation instead of stopping at the
/// first. Entries that parse cleanly are returned even when others fail.
pub(super) fn decode_container(bytes: &[u8]) -> Decoded {
    let mut out = Decoded {
        tensors: BTreeMap::new(),
        metadata: BTreeMap::new(),
        violations: Vec::new(),
    };
    if bytes.len() < 8 {
        out.violations.push(Violation::MalformedHeaderLength {
            declared: 8,
            available: bytes.len() as u64,
        });
        return out;
    }
    let declared = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let available = (bytes.len() - 8) as u64;
    if declared > available {
        out.violations.push(Violation::MalformedHeaderLength { declared, available });
        return out;
    }
    let header_end = 8 + declared as usize;
    let header: Map<String, Value> = match std::str::from_utf8(&bytes[8..header_end])
        .map_err(|e| e.to_string())
        .and_then(|s| serde_json::from_str(s).map_err(|e| e.to_string()))
    {
        Ok(map) => map,
        Err(reason) => {
            out.violations.push(Violation::MalformedHeader(reason));
            return out;
        }
    };
    let data = &bytes[header_end..];
    let data_len = data.len() as u64;

    let mut extents: Vec<(u64, u64, String)> = Vec::new();
    for (name, entry) in header {
        if name == METADATA_KEY {
            match serde_json::from_value::<BTreeMap<String, String>>(entry) {
                Ok(m) => out.metadata = m,
                Err(e) => out.violations.push(Violation::MalformedHeader(format!(
                    "{METADATA_KEY} must map strings to strings: {e}"
                ))),
            }
            continue;
        }
        let entry = match parse_entry(&entry) {
            Ok(e) => e,
            Err(EntryError::DType(dtype)) => {
                out.violations.push(Violation::UnsupportedDType { tensor: name, dtype });
                continue;
            }
            Err(EntryError::Shape(reason)) => {
                out.violations.push(Violation::MalformedEntry { tensor: name, reason });
                continue;
            }
        };
        let (begin, end) = entry.offsets;
        if begin > end || end > data_len {
            out.violations.push(Violation::OutOfBoundsExtent { tensor: name, begin, end, data_len });
            continue;
        }
        let numel = entry.shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let expected = numel.and_then(|n| n.checked_mul(entry.dtype.size()));
        let actual = (end - begin) as usize;
        if expected != Some(actual) {
            out.violations.push(Violation::ByteLength {
                tensor: name,
                expected: expected.unwrap_or(usize::MAX),
                actual,
            });
            continue;
        }
        extents.push((begin, end, name.clone()));
        out.tensors.insert(
            name,
            Tensor {
                dtype: entry.dtype,
                shape: entry.shape,
                data: data[begin as usize..end as usize].to_vec(),
            },
        );
    }

    extents.sort();
    for pair in extents.windows(2) {
        let (_, prev_end, ref prev) = pair[0];
        let (begin, _, ref name) = pair[1];
        if begin < prev_end {
            out.violations.push(Violation::OverlappingExtent {
                first: prev.clone(),
                second: name.clone(),
            });
        }
    }
    out
}

struct Entry {
    dtype: DType,
    shape: Vec<usize>,
    offsets: (u64, u64),
}

enum EntryError {
    DType(String),
    Shape(String),
}

fn parse_entry(v: &Value) -> Result<Entry, EntryError> {
    let obj = v
        .as_object()
        .ok_or_else(|| EntryError::Shape("entry is not an object".into()))?;
    let dtype_str = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| EntryError::Shape("missing dtype".into()))?;
    let dtype = dtype_str
        .parse::<DType>()
        .map_err(|_| EntryError::DType(dtype_str.to_owned()))?;
    let shape = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| EntryError::Shape("missing shape".into()))?
        .iter()
        .map(|d| d.as_u64().map(|d| d as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| EntryError::Shape("shape must be a list of non-negative integers".into()))?;
    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .and_then(|a| match a.as_slice() {
            [b, e] => Some((b.as_u64()?, e.as_u64()?)),
            _ => None,
        })
        .ok_or_else(|| EntryError::Shape("data_offsets must be [begin, end]".into()))?;
    Ok(Entry { dtype, shape, offsets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(header: &str, data: &[u8]) -> Vec<u8> {
        let mut out = (header.len() as u64).to_le_bytes().to_vec();
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn header_length_past_eof() {
        let mut bytes = raw("{}", &[]);
        bytes[..8].copy_from_slice(&1000u64.to_le_bytes());
        let d = decode_container(&bytes);
        assert!(matches!(d.violations[..], [Violation::MalformedHeaderLength { declared: 1000, .. }]));
        assert!(d.violations[0].to_string().contains("malformed header length"));
    }

    #[test]
    fn short_file() {
        let d = decode_container(&[1, 2, 3]);
        assert_eq!(d.violations.len(), 1);
    }

    #[test]
    fn overlap_and_bounds_both_reported() {
        let header = r#"{"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},
            "b":{"dtype":"F32","shape":[2],"data_offsets":[4,12]},
            "c":{"dtype":"F32","shape":[4],"data_offsets":[12,28]}}"#;
        let d = decode_container(&raw(header, &[0u8; 12]));
        let text: Vec<String> = d.violations.iter().map(ToString::to_string).collect();
        assert_eq!(text.len(), 2, "{text:?}");
        assert!(text.iter().any(|t| t.contains("out-of-bounds extent")));
        assert!(text.iter().any(|t| t.contains("overlapping extents: a and b")));
    }

    #[test]
    fn quantized_entry_rejected_by_name() {
        let header = r#"{"q":{"dtype":"I8","shape":[4],"data_offsets":[0,4]}}"#;
        let d = decode_container(&raw(header, &[0u8; 4]));
        assert_eq!(
            d.violations,
            vec![Violation::UnsupportedDType { tensor: "q".into(), dtype: "I8".into() }]
        );
    }

    #[test]
    fn byte_length_mismatch() {
        let header = r#"{"a":{"dtype":"BF16","shape":[3],"data_offsets":[0,4]}}"#;
        let d = decode_container(&raw(header, &[0u8; 4]));
        assert!(matches!(d.violations[..], [Violation::ByteLength { expected: 6, actual: 4, .. }]));
    }
}
