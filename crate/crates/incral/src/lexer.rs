//! Tokenizer for the core language. Tracks line/column for diagnostics.

use std::fmt;

use num_bigint::BigInt;

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    // keywords
    Set,
    Var,
    Inv,
    Def,
    Update,
    On,
    Aux,
    Index,
    If,
    Then,
    Else,
    True,
    False,
    Nil,
    Cons,
    Head,
    Tail,
    Empty,
    Union,
    Inter,
    Diff,
    In,
    Sum,
    Count,
    Add,
    Del,
    Incr,
    For,
    MapInc,
    MapDec,
    Not,
    And,
    Or,
    // punctuation
    Semi,
    Comma,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Colon,
    ColonDash,
    ColonEq,
    Pipe,
    Eq,
    EqEq,
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

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Eof => write!(f, "end of input"),
            other => {
                let s = match other {
                    Tok::Set => "set",
                    Tok::Var => "var",
                    Tok::Inv => "inv",
                    Tok::Def => "def",
                    Tok::Update => "update",
                    Tok::On => "on",
                    Tok::Aux => "aux",
                    Tok::Index => "index",
                    Tok::If => "if",
                    Tok::Then => "then",
                    Tok::Else => "else",
                    Tok::True => "true",
                    Tok::False => "false",
                    Tok::Nil => "nil",
                    Tok::Cons => "cons",
                    Tok::Head => "head",
                    Tok::Tail => "tail",
                    Tok::Empty => "empty",
                    Tok::Union => "union",
                    Tok::Inter => "inter",
                    Tok::Diff => "diff",
                    Tok::In => "in",
                    Tok::Sum => "sum",
                    Tok::Count => "count",
                    Tok::Add => "add",
                    Tok::Del => "del",
                    Tok::Incr => "incr",
                    Tok::For => "for",
                    Tok::MapInc => "mapinc",
                    Tok::MapDec => "mapdec",
                    Tok::Not => "not",
                    Tok::And => "and",
                    Tok::Or => "or",
                    Tok::Semi => ";",
                    Tok::Comma => ",",
                    Tok::Dot => ".",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::Colon => ":",
                    Tok::ColonDash => ":-",
                    Tok::ColonEq => ":=",
                    Tok::Pipe => "|",
                    Tok::Eq => "=",
                    Tok::EqEq => "==",
                    Tok::Ne => "!=",
                    Tok::Lt => "<",
                    Tok::Le => "<=",
                    Tok::Gt => ">",
                    Tok::Ge => ">=",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Star => "*",
                    Tok::Slash => "/",
                    Tok::Ident(_) | Tok::Int(_) | Tok::Eof => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

/// Reserved words that cannot be used as identifiers.
pub const KEYWORDS: &[&str] = &[
    "set", "var", "inv", "def", "update", "on", "aux", "index", "if", "then", "else", "true",
    "false", "nil", "cons", "head", "tail", "empty", "union", "inter", "diff", "in", "sum",
    "count", "add", "del", "incr", "for", "mapinc", "mapdec", "not", "and", "or",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn keyword_token(s: &str) -> Option<Tok> {
    Some(match s {
        "set" => Tok::Set,
        "var" => Tok::Var,
        "inv" => Tok::Inv,
        "def" => Tok::Def,
        "update" => Tok::Update,
        "on" => Tok::On,
        "aux" => Tok::Aux,
        "index" => Tok::Index,
        "if" => Tok::If,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "true" => Tok::True,
        "false" => Tok::False,
        "nil" => Tok::Nil,
        "cons" => Tok::Cons,
        "head" => Tok::Head,
        "tail" => Tok::Tail,
        "empty" => Tok::Empty,
        "union" => Tok::Union,
        "inter" => Tok::Inter,
        "diff" => Tok::Diff,
        "in" => Tok::In,
        "sum" => Tok::Sum,
        "count" => Tok::Count,
        "add" => Tok::Add,
        "del" => Tok::Del,
        "incr" => Tok::Incr,
        "for" => Tok::For,
        "mapinc" => Tok::MapInc,
        "mapdec" => Tok::MapDec,
        "not" => Tok::Not,
        "and" => Tok::And,
        "or" => Tok::Or,
        _ => return None,
    })
}

/// A token with its source position (1-based line and column).
#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();

    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            out.push(Spanned {
                tok: $tok,
                line: $l,
                col: $c,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let n: BigInt = s.parse().expect("digits");
                push!(Tok::Int(n), tl, tc);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                match keyword_token(&s) {
                    Some(t) => push!(t, tl, tc),
                    None => push!(Tok::Ident(s), tl, tc),
                }
            }
            _ => {
                chars.next();
                col += 1;
                let two = |chars: &mut std::iter::Peekable<std::str::Chars>, col: &mut usize, want: char| {
                    if chars.peek() == Some(&want) {
                        chars.next();
                        *col += 1;
                        true
                    } else {
                        false
                    }
                };
                let tok = match c {
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '|' => Tok::Pipe,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    ':' => {
                        if two(&mut chars, &mut col, '-') {
                            Tok::ColonDash
                        } else if two(&mut chars, &mut col, '=') {
                            Tok::ColonEq
                        } else {
                            Tok::Colon
                        }
                    }
                    '=' => {
                        if two(&mut chars, &mut col, '=') {
                            Tok::EqEq
                        } else {
                            Tok::Eq
                        }
                    }
                    '!' => {
                        if two(&mut chars, &mut col, '=') {
                            Tok::Ne
                        } else {
                            return Err(ParseError::new(tl, tc, "unexpected character `!`"));
                        }
                    }
                    '<' => {
                        if two(&mut chars, &mut col, '=') {
                            Tok::Le
                        } else {
                            Tok::Lt
                        }
                    }
                    '>' => {
                        if two(&mut chars, &mut col, '=') {
                            Tok::Ge
                        } else {
                            Tok::Gt
                        }
                    }
                    other => {
                        return Err(ParseError::new(
                            tl,
                            tc,
                            format!("unexpected character `{other}`"),
                        ))
                    }
                };
                push!(tok, tl, tc);
            }
        }
    }
    push!(Tok::Eof, line, col);
    Ok(out)
}
