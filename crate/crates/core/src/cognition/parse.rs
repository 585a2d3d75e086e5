use thiserror::Error;

use super::Answer;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no `ANSWER:` line in response")]
    MissingAnswer,
    #[error("unrecognised answer `{0}`")]
    UnknownAnswer(String),
    #[error("explanation required but `REASON:` is missing or empty")]
    MissingReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub answer: Answer,
    /// Text after `REASON:`, trimmed; empty when absent.
    pub reason: String,
}

fn answer_token(rest: &str) -> Result<Answer, ParseError> {
    let word: String = rest
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '<' | '"' | '\'' | '`'))
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "accept" | "accepted" | "accepts" | "yes" | "take" => Ok(Answer::Accept),
        "reject" | "rejected" | "rejects" | "no" | "decline" => Ok(Answer::Reject),
        _ => Err(ParseError::UnknownAnswer(rest.trim().chars().take(40).collect())),
    }
}

/// Byte offset just past `marker` at the start of some line, matched
/// case-insensitively and ignoring leading markdown emphasis.
fn find_marker(text: &str, marker: &str) -> Option<usize> {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let stripped = line.trim_start_matches(|c: char| c.is_whitespace() || c == '*' || c == '#');
        if stripped.len() >= marker.len()
            && stripped.is_char_boundary(marker.len())
            && stripped[..marker.len()].eq_ignore_ascii_case(marker)
        {
            let after = &stripped[marker.len()..];
            let after = after.trim_start_matches('*');
            return Some(offset + line.len() - after.len());
        }
        offset += line.len();
    }
    None
}

/// Extracts the answer and reason from a model reply.
///
/// The first line starting with `ANSWER:` decides; everything after the
/// first `REASON:` line is the reason. When `require_reason` is set, an
/// absent or blank reason is a failure.
pub fn parse_response(text: &str, require_reason: bool) -> Result<ParsedResponse, ParseError> {
    let at = find_marker(text, "answer:").ok_or(ParseError::MissingAnswer)?;
    let line_end = text[at..].find('\n').map_or(text.len(), |i| at + i);
    let answer = answer_token(&text[at..line_end])?;
    let reason = find_marker(text, "reason:")
        .map(|r| text[r..].trim().to_string())
        .unwrap_or_default();
    if require_reason && reason.is_empty() {
        return Err(ParseError::MissingReason);
    }
    Ok(ParsedResponse { answer, reason })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_canonical_form() {
        let r = parse_response("ANSWER: Accept\nREASON: good pay, short trip", true).unwrap();
        assert_eq!(r.answer, Answer::Accept);
        assert_eq!(r.reason, "good pay, short trip");
    }

    #[test]
    fn case_and_synonyms() {
        assert_eq!(parse_response("answer: yes", false).unwrap().answer, Answer::Accept);
        assert_eq!(parse_response("Answer: DECLINE", false).unwrap().answer, Answer::Reject);
        assert_eq!(parse_response("ANSWER: <Reject>", false).unwrap().answer, Answer::Reject);
        assert_eq!(parse_response("**Answer:** Take it", false).unwrap().answer, Answer::Accept);
    }

    #[test]
    fn reasoning_before_answer_is_fine() {
        let text = "The pay is low and I'm tired.\nSo I'd rather not.\nANSWER: No\nREASON: tired\nand underpaid";
        let r = parse_response(text, true).unwrap();
        assert_eq!(r.answer, Answer::Reject);
        assert_eq!(r.reason, "tired\nand underpaid");
    }

    #[test]
    fn missing_answer_is_an_error() {
        assert_eq!(parse_response("I will accept.", false), Err(ParseError::MissingAnswer));
        assert_eq!(parse_response("", false), Err(ParseError::MissingAnswer));
    }

    #[test]
    fn unknown_answer_is_an_error() {
        assert!(matches!(parse_response("ANSWER: maybe", false), Err(ParseError::UnknownAnswer(_))));
    }

    #[test]
    fn reason_required_when_explaining() {
        assert_eq!(parse_response("ANSWER: Accept", true), Err(ParseError::MissingReason));
        assert_eq!(parse_response("ANSWER: Accept\nREASON:   ", true), Err(ParseError::MissingReason));
        assert!(parse_response("ANSWER: Accept", false).is_ok());
    }

    proptest! {
        #[test]
        fn never_panics(s in ".{0,200}", req in any::<bool>()) {
            let _ = parse_response(&s, req);
        }

        #[test]
        fn canonical_round_trip(accept in any::<bool>(), reason in "[a-zA-Z][a-zA-Z ,.]{0,60}") {
            let a = if accept { Answer::Accept } else { Answer::Reject };
            let r = parse_response(&format!("ANSWER: {a}\nREASON: {reason}"), true).unwrap();
            prop_assert_eq!(r.answer, a);
            prop_assert_eq!(r.reason, reason.trim());
        }
    }
}
