use super::FolError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Pred,
    Case,
    Entry,
    Exists,
    Forall,
    In,
    And,
    Or,
    Not,
    True,
    False,
    Underscore,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    Comma,
    Semi,
    Colon,
    Arrow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, FolError> {
    let mut out = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! push {
        ($tok:expr, $line:expr, $col:expr) => {
            out.push(Token {
                tok: $tok,
                line: $line,
                col: $col,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
            }
            '#' => {
                // line comment
                while let Some(&c) = chars.peek() {
                    bump(&mut chars);
                    if c == '\n' {
                        break;
                    }
                }
            }
            '0'..='9' => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        text.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                let value = text.parse::<i64>().map_err(|_| FolError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("integer literal `{text}` out of range"),
                })?;
                push!(Tok::Int(value), tl, tc);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        text.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                let tok = match text.as_str() {
                    "pred" => Tok::Pred,
                    "case" => Tok::Case,
                    "entry" => Tok::Entry,
                    "exists" => Tok::Exists,
                    "forall" => Tok::Forall,
                    "in" => Tok::In,
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "_" => Tok::Underscore,
                    _ => Tok::Ident(text),
                };
                push!(tok, tl, tc);
            }
            _ => {
                let c = bump(&mut chars);
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    ':' => Tok::Colon,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '-' => {
                        if chars.peek() == Some(&'>') {
                            bump(&mut chars);
                            Tok::Arrow
                        } else {
                            Tok::Minus
                        }
                    }
                    '=' => Tok::Eq,
                    '!' => {
                        if chars.peek() == Some(&'=') {
                            bump(&mut chars);
                            Tok::Ne
                        } else {
                            return Err(FolError::Syntax {
                                line: tl,
                                col: tc,
                                msg: "expected `=` after `!`".to_string(),
                            });
                        }
                    }
                    '<' => {
                        if chars.peek() == Some(&'=') {
                            bump(&mut chars);
                            Tok::Le
                        } else {
                            Tok::Lt
                        }
                    }
                    '>' => {
                        if chars.peek() == Some(&'=') {
                            bump(&mut chars);
                            Tok::Ge
                        } else {
                            Tok::Gt
                        }
                    }
                    other => {
                        return Err(FolError::Syntax {
                            line: tl,
                            col: tc,
                            msg: format!("unexpected character `{other}`"),
                        })
                    }
                };
                push!(tok, tl, tc);
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
