use serde::Serialize;

use super::FrontendError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TokenKind {
    Ident,
    Keyword,
    IntLit,
    StringLit,
    Operator,
    Punct,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, counted in characters.
    pub col: usize,
    /// Byte offset of the first character.
    pub offset: usize,
}

/// Every reserved word the lexer recognizes. Some of them (`try`, `class`
/// inheritance, `import`, ...) are only lexed so the parser can reject them
/// with a precise diagnostic.
pub const KEYWORDS: &[&str] = &[
    "boolean", "break", "byte", "case", "catch", "char", "class", "continue", "default", "do",
    "double", "else", "extends", "false", "final", "finally", "float", "for", "if", "implements",
    "import", "int", "interface", "long", "new", "null", "package", "private", "protected",
    "public", "return", "short", "static", "switch", "this", "throw", "throws", "true", "try",
    "void", "while",
];

// Longest first so maximal munch works with a simple prefix scan.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "->", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "=", "<", ">", "+", "-", "*", "/", "%", "!",
    "~", "&", "|", "^", "?",
];

const PUNCT: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', '.', ':'];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.binary_search(&s).is_ok()
}

struct Cursor<'s> {
    src: &'s str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'s> Cursor<'s> {
    fn rest(&self) -> &'s str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek2(&self) -> Option<char> {
        self.rest().chars().nth(1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn bump_n(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }
}

/// Splits source text into tokens. Whitespace and comments are skipped;
/// every token's text is the exact source slice at `offset`.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut cur = Cursor {
        src: source,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    while let Some(c) = cur.peek() {
        let (line, col, start) = (cur.line, cur.col, cur.pos);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek2() == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c == '/' && cur.peek2() == Some('*') {
            cur.bump_n(2);
            loop {
                match cur.peek() {
                    None => {
                        return Err(FrontendError::Lex {
                            line,
                            col,
                            message: "unterminated block comment".into(),
                        })
                    }
                    Some('*') if cur.peek2() == Some('/') => {
                        cur.bump_n(2);
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            continue;
        }

        let kind = if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '$') {
                cur.bump();
            }
            if is_keyword(&source[start..cur.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            }
        } else if c.is_ascii_digit() {
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
            if matches!(cur.peek(), Some('L' | 'l')) {
                cur.bump();
            }
            TokenKind::IntLit
        } else if c == '"' || c == '\'' {
            cur.bump();
            loop {
                match cur.bump() {
                    None | Some('\n') => {
                        return Err(FrontendError::Lex {
                            line,
                            col,
                            message: "unterminated literal".into(),
                        })
                    }
                    Some('\\') => {
                        cur.bump();
                    }
                    Some(q) if q == c => break,
                    Some(_) => {}
                }
            }
            TokenKind::StringLit
        } else if PUNCT.contains(&c) {
            cur.bump();
            TokenKind::Punct
        } else if let Some(op) = OPERATORS.iter().find(|op| cur.rest().starts_with(*op)) {
            cur.bump_n(op.chars().count());
            TokenKind::Operator
        } else {
            return Err(FrontendError::Lex {
                line,
                col,
                message: format!("unexpected character `{c}`"),
            });
        };
        tokens.push(Token {
            kind,
            text: source[start..cur.pos].to_string(),
            line,
            col,
            offset: start,
        });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn keyword_table_is_sorted() {
        let mut sorted = KEYWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, KEYWORDS);
    }

    #[test]
    fn empty_input_has_no_tokens() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn simple_declaration() {
        use TokenKind::*;
        assert_eq!(
            kinds("int x = 1;"),
            vec![
                (Keyword, "int".into()),
                (Ident, "x".into()),
                (Operator, "=".into()),
                (IntLit, "1".into()),
                (Punct, ";".into()),
            ]
        );
    }

    #[test]
    fn unknown_character_reports_position() {
        match tokenize("int @ x;") {
            Err(FrontendError::Lex { line, col, .. }) => assert_eq!((line, col), (1, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comments_produce_no_tokens_and_positions_track_lines() {
        let toks = tokenize("a // c\n/* b\n */ b+=\"s\\\"\" 'c'").unwrap();
        let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["a", "b", "+=", "\"s\\\"\"", "'c'"]);
        assert_eq!((toks[1].line, toks[1].col), (3, 5));
    }

    #[test]
    fn maximal_munch_on_operators() {
        let texts: Vec<String> = kinds("i++<=j->k").into_iter().map(|(_, t)| t).collect();
        assert_eq!(texts, vec!["i", "++", "<=", "j", "->", "k"]);
    }

    #[test]
    fn unterminated_literal_is_an_error() {
        assert!(tokenize("\"abc").is_err());
        assert!(tokenize("/* open").is_err());
    }

    proptest! {
        // Gaps between tokens contain only whitespace and comments, and
        // every token text sits at its recorded offset.
        #[test]
        fn tokens_reconstruct_source(src in "[a-z0-9 +*=;(){}<>!\n]{0,60}") {
            let toks = tokenize(&src).unwrap();
            let mut pos = 0;
            for t in &toks {
                prop_assert_eq!(&src[t.offset..t.offset + t.text.len()], t.text.as_str());
                prop_assert!(src[pos..t.offset].chars().all(char::is_whitespace));
                pos = t.offset + t.text.len();
            }
            prop_assert!(src[pos..].chars().all(char::is_whitespace));
        }
    }
}
