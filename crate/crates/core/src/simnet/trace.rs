use serde::{Deserialize, Serialize};

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_ms: u64,
    #[serde(rename = "type")]
    pub kind: String,
    pub actor: String,
    pub message_id: String,
    pub detail: String,
}

impl TraceRecord {
    /// Line-delimited JSON, one record per line, trailing newline included.
    pub fn to_ndjson(records: &[TraceRecord]) -> String {
        let mut out = String::new();
        for r in records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}
