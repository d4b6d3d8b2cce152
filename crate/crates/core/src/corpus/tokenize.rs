/// Rule tokenizer: lowercase, split on whitespace, and peel leading and
/// trailing ASCII punctuation off each chunk as tokens of their own.
///
/// Interior punctuation stays attached ("48-year-old" is one token), so
/// re-tokenizing the space-joined output is a no-op.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        let mut tail = Vec::new();
        while start < end && chars[start].is_ascii_punctuation() {
            tokens.push(chars[start].to_string());
            start += 1;
        }
        while end > start && chars[end - 1].is_ascii_punctuation() {
            tail.push(chars[end - 1].to_string());
            end -= 1;
        }
        if start < end {
            tokens.push(chars[start..end].iter().collect());
        }
        tail.reverse();
        tokens.extend(tail);
    }
    tokens
}
