//! Rule-based sentence splitting and word tokenization.

/// Lowercased words that end in `.` without ending a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc", "ltd", "co", "corp",
    "gen", "gov", "sen", "rep", "rev", "hon", "capt", "col", "lt", "sgt", "mt", "no", "fig",
    "approx", "dept", "est", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
    "oct", "nov", "dec", "u.s", "u.k", "e.g", "i.e", "a.m", "p.m",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits `text` into sentences at runs of `.`, `!` or `?` followed by
/// whitespace (or end of input). A lone `.` after a known abbreviation does
/// not split. Never returns empty strings.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if !is_terminator(chars[i].1) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < chars.len() && is_terminator(chars[i].1) {
            i += 1;
        }
        let end_byte = chars.get(i).map_or(text.len(), |&(b, _)| b);
        let at_boundary = i == chars.len() || chars[i].1.is_whitespace();
        if !at_boundary {
            continue;
        }
        let lone_period = i - run_start == 1 && chars[run_start].1 == '.';
        if lone_period && follows_abbreviation(text, start, chars[run_start].0) {
            continue;
        }
        push_trimmed(&mut sentences, &text[start..end_byte]);
        start = end_byte;
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn follows_abbreviation(text: &str, sentence_start: usize, period_byte: usize) -> bool {
    let before = &text[sentence_start..period_byte];
    let word = before
        .rsplit(|c: char| c.is_whitespace())
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric());
    !word.is_empty() && ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

/// Lowercases and splits a sentence into tokens.
///
/// - dotted abbreviations of single letters (`u.s.`) stay whole,
/// - numbers keep internal `.`/`,` separators (`3.5`, `1,000`),
/// - other alphanumeric runs become words,
/// - each run of remaining non-space characters becomes one token.
pub fn tokenize_words(sentence: &str) -> Vec<String> {
    let lower = sentence.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let end = if let Some(end) = dotted_abbreviation(&chars, i) {
            end
        } else if c.is_alphanumeric() {
            alnum_run(&chars, i)
        } else {
            let mut j = i;
            while j < chars.len() && !chars[j].is_whitespace() && !chars[j].is_alphanumeric() {
                j += 1;
            }
            j
        };
        tokens.push(chars[i..end].iter().collect());
        i = end;
    }
    tokens
}

/// Matches `([letter] '.'){2,}` at `i` where the pattern is not glued to a
/// following alphanumeric.
fn dotted_abbreviation(chars: &[char], i: usize) -> Option<usize> {
    let mut j = i;
    let mut pairs = 0;
    while j + 1 < chars.len() && chars[j].is_alphabetic() && chars[j + 1] == '.' {
        if j + 2 < chars.len() && chars[j + 2].is_alphanumeric() && !chars.get(j + 3).is_some_and(|&c| c == '.') {
            break;
        }
        pairs += 1;
        j += 2;
    }
    (pairs >= 2).then_some(j)
}

fn alnum_run(chars: &[char], i: usize) -> usize {
    let mut j = i;
    while j < chars.len() {
        let c = chars[j];
        if c.is_alphanumeric() {
            j += 1;
        } else if (c == '.' || c == ',')
            && chars[j - 1].is_ascii_digit()
            && chars.get(j + 1).is_some_and(|n| n.is_ascii_digit())
        {
            j += 1;
        } else {
            break;
        }
    }
    j
}
