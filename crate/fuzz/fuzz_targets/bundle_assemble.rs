#![no_main]

//! First line: metadata JSON. Remaining lines: JSONL records.

use attitude_manifolds::bundle::{assemble, parse_jsonl_records, BundleMeta};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (head, body) = text.split_once('\n').unwrap_or((text, ""));
    let Ok(meta) = BundleMeta::parse(head) else { return };
    let Ok(records) = parse_jsonl_records(body.as_bytes()) else { return };
    let _ = assemble(&meta, &records);
});
