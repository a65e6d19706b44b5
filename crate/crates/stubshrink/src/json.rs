//! JSON report files: pretty-printed with keys sorted.

use serde::Serialize;

/// Serializes through `serde_json::Value`, whose maps are ordered by key.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
    s.push('\n');
    s
}

/// One compact JSON object per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        let value = serde_json::to_value(it).expect("report types serialize");
        out.push_str(&value.to_string());
        out.push('\n');
    }
    out
}
