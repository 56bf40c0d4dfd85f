use super::ast::Span;
use super::error::{FrontendError, FrontendErrorKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Var,
    Input,
    Output,
    Ident(String),
    Nat(usize),
    Colon,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Assign,
    Hash,
    Dot,
    Star,
    Plus,
    Eof,
}

impl Token {
    pub fn describe(&self) -> String {
        match self {
            Token::Var => "'var'".into(),
            Token::Input => "'input'".into(),
            Token::Output => "'output'".into(),
            Token::Ident(n) => format!("identifier '{n}'"),
            Token::Nat(v) => format!("integer {v}"),
            Token::Colon => "':'".into(),
            Token::LBracket => "'['".into(),
            Token::RBracket => "']'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::Assign => "'='".into(),
            Token::Hash => "'#'".into(),
            Token::Dot => "'.'".into(),
            Token::Star => "'*'".into(),
            Token::Plus => "'+'".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned {
    pub token: Token,
    pub span: Span,
}

/// Splits source text into tokens. `//` starts a comment running to end of line.
pub fn tokenize(src: &str) -> Result<Vec<Spanned>, FrontendError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1u32, 1u32);

    while let Some(&c) = chars.peek() {
        let span = Span::new(line, col);
        let bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>, col: &mut u32| {
            chars.next();
            *col += 1;
        };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => bump(&mut chars, &mut col),
            '/' => {
                bump(&mut chars, &mut col);
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump(&mut chars, &mut col);
                    }
                } else {
                    return Err(FrontendError::new(span, FrontendErrorKind::UnexpectedChar('/')));
                }
            }
            c if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    text.push(d);
                    bump(&mut chars, &mut col);
                }
                let value = text.parse::<usize>().map_err(|_| FrontendError::new(span, FrontendErrorKind::BadInteger(text.clone())))?;
                out.push(Spanned { token: Token::Nat(value), span });
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if !(d.is_alphanumeric() || d == '_') {
                        break;
                    }
                    text.push(d);
                    bump(&mut chars, &mut col);
                }
                let token = match text.as_str() {
                    "var" => Token::Var,
                    "input" => Token::Input,
                    "output" => Token::Output,
                    _ => Token::Ident(text),
                };
                out.push(Spanned { token, span });
            }
            _ => {
                let token = match c {
                    ':' => Token::Colon,
                    '[' => Token::LBracket,
                    ']' => Token::RBracket,
                    '(' => Token::LParen,
                    ')' => Token::RParen,
                    '=' => Token::Assign,
                    '#' => Token::Hash,
                    '.' => Token::Dot,
                    '*' => Token::Star,
                    '+' => Token::Plus,
                    other => return Err(FrontendError::new(span, FrontendErrorKind::UnexpectedChar(other))),
                };
                bump(&mut chars, &mut col);
                out.push(Spanned { token, span });
            }
        }
    }
    out.push(Spanned { token: Token::Eof, span: Span::new(line, col) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_positions() {
        let toks = tokenize("var input S : [3 3] // matrix\nv = S").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.token.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Token::Var,
                Token::Input,
                Token::Ident("S".into()),
                Token::Colon,
                Token::LBracket,
                Token::Nat(3),
                Token::Nat(3),
                Token::RBracket,
                Token::Ident("v".into()),
                Token::Assign,
                Token::Ident("S".into()),
                Token::Eof
            ]
        );
        assert_eq!(toks[8].span, Span::new(2, 1));
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("v = u $ w").unwrap_err();
        assert_eq!(err.span, Span::new(1, 7));
        assert_eq!(err.kind, FrontendErrorKind::UnexpectedChar('$'));
        assert!(tokenize("v = u / w").is_err());
    }
}
