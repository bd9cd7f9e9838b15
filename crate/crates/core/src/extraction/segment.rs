//! Rule-based sentence segmentation.
//!
//! A sentence ends at a run of `.`, `!` or `?` (plus any closing quotes or
//! brackets) that is followed by whitespace and then an uppercase letter or an
//! opening quote/bracket. A period that closes one of [`ABBREVIATIONS`] never
//! ends a sentence.

/// Tokens (without their final period) that never terminate a sentence.
///
/// Matching is case-sensitive and applies to the whole whitespace-delimited
/// token, after stripping leading opening punctuation. Single capital letters
/// are deliberately absent: `"A. B."` splits into two sentences.
pub const ABBREVIATIONS: &[&str] = &[
    "Mr", "Mrs", "Ms", "Dr", "Prof", "Sr", "Jr", "St", "Mt", "Rev", "Hon", "Sen", "Rep", "Gov",
    "Gen", "Col", "Lt", "Sgt", "Capt", "Cmdr", "Adm", "Pres", "Fr", "No", "vs", "e.g", "i.e",
    "cf", "approx", "U.S", "U.K", "U.N", "E.U", "D.C", "Jan", "Feb", "Aug", "Sept", "Oct",
    "Nov", "Dec", "Ph.D",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201D}', '\u{2019}', '\u{00BB}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '{', '\u{201C}', '\u{2018}', '\u{00AB}'];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || OPENERS.contains(&c)
}

/// True when the token ending right before `period_at` is a known abbreviation.
fn is_abbreviation(text: &str, period_at: usize) -> bool {
    let head = &text[..period_at];
    let token_start = head
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let token = head[token_start..].trim_start_matches(OPENERS);
    ABBREVIATIONS.contains(&token)
}

/// Split `text` into sentences. Whitespace between sentences is dropped; every
/// other character is kept in order.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let single_period = c == '.' && chars.get(i + 1).map_or(true, |&(_, n)| !is_terminator(n));
        let abbreviated = single_period && is_abbreviation(text, pos);

        // Consume the whole terminator run and any closing punctuation.
        let mut j = i;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);

        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > j && k < chars.len() && starts_sentence(chars[k].1);

        if boundary && !abbreviated {
            push_trimmed(&mut sentences, &text[start..end]);
            start = chars[k].0;
            i = k;
        } else {
            i = j.max(i + 1);
        }
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}
