//! Byte-budgeted text helpers shared by prompts and tool payloads.

/// Marker prepended when the head of a log or payload was dropped.
pub const TRUNCATION_MARKER: &str = "[log truncated]\n";

/// Keeps at most the last `budget` bytes of `text`.
///
/// When the cut falls inside a multi-byte character the start is moved
/// forward to the next character boundary, so the result may be up to three
/// bytes shorter than `budget`. ASCII input is always cut exactly.
pub fn tail_bytes(text: &str, budget: usize) -> (&str, bool) {
    if text.len() <= budget {
        return (text, false);
    }
    let mut start = text.len() - budget;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    (&text[start..], true)
}

/// Tail-truncates `text` to `budget` bytes and prepends [`TRUNCATION_MARKER`]
/// when anything was dropped.
pub fn truncate_tail(text: &str, budget: usize) -> String {
    match tail_bytes(text, budget) {
        (tail, true) => format!("{TRUNCATION_MARKER}{tail}"),
        (all, false) => all.to_string(),
    }
}

/// Lossy UTF-8 decoding for captured process output.
pub fn decode_output(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}
