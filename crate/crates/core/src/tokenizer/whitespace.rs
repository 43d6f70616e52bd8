use super::Tokenizer;

/// One token per maximal run of non-whitespace characters.
#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn id(&self) -> String {
        "whitespace".to_string()
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn prefix_fitting<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        // Cut right before the first character of token `max_tokens + 1`,
        // keeping any whitespace that trails token `max_tokens`.
        let mut seen = 0;
        let mut in_token = false;
        for (i, c) in text.char_indices() {
            if c.is_whitespace() {
                in_token = false;
            } else if !in_token {
                if seen == max_tokens {
                    return &text[..i];
                }
                seen += 1;
                in_token = true;
            }
        }
        text
    }
}
