use std::fmt;

use thiserror::Error;

use super::{Arg, EvalProgram, ModuleCall, ModuleName, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyProgram,
    UnknownModule(String),
    Arity {
        module: ModuleName,
        expected: usize,
        got: usize,
    },
    FirstArgNotImg,
    ImgNotFirst,
    UnterminatedString,
    Unexpected {
        expected: &'static str,
        found: String,
    },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyProgram => f.write_str("empty program"),
            ParseErrorKind::UnknownModule(m) => write!(f, "unknown module {m:?}"),
            ParseErrorKind::Arity {
                module,
                expected,
                got,
            } => {
                write!(f, "{module} takes {expected} arguments, got {got}")
            }
            ParseErrorKind::FirstArgNotImg => f.write_str("first argument must be img"),
            ParseErrorKind::ImgNotFirst => f.write_str("img is only allowed as the first argument"),
            ParseErrorKind::UnterminatedString => f.write_str("unterminated string"),
            ParseErrorKind::Unexpected { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
        }
    }
}

/// Parse failure with a 1-based line/column position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Sep,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Sep => "statement separator".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    depth: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, kind: ParseErrorKind, offset: usize) -> ParseError {
        position(self.src, kind, offset)
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while let Some(c) = self.peek_char() {
            if c == '\n' && self.depth == 0 {
                break;
            }
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Ok((Tok::Eof, start));
        };
        self.pos += c.len_utf8();
        let tok = match c {
            '\n' | ';' => Tok::Sep,
            '(' => {
                self.depth += 1;
                Tok::LParen
            }
            ')' => {
                self.depth = self.depth.saturating_sub(1);
                Tok::RParen
            }
            ',' => Tok::Comma,
            '\'' => {
                let mut s = String::new();
                loop {
                    match self.peek_char() {
                        None => return Err(self.err(ParseErrorKind::UnterminatedString, start)),
                        Some('\'') => {
                            self.pos += 1;
                            if self.peek_char() == Some('\'') {
                                self.pos += 1;
                                s.push('\'');
                            } else {
                                break;
                            }
                        }
                        Some(ch) => {
                            self.pos += ch.len_utf8();
                            s.push(ch);
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while let Some(ch) = self.peek_char() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            }
            other => {
                return Err(self.err(
                    ParseErrorKind::Unexpected {
                        expected: "a statement, argument or separator",
                        found: format!("{other:?}"),
                    },
                    start,
                ))
            }
        };
        Ok((tok, start))
    }
}

fn position(src: &str, kind: ParseErrorKind, offset: usize) -> ParseError {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let column = before[line_start..].chars().count() + 1;
    ParseError {
        kind,
        line,
        column,
        offset,
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer {
            src,
            pos: 0,
            depth: 0,
        };
        let (tok, at) = lexer.next()?;
        Ok(Parser { lexer, tok, at })
    }

    fn bump(&mut self) -> Result<(Tok, usize), ParseError> {
        let (next, at) = self.lexer.next()?;
        let prev = std::mem::replace(&mut self.tok, next);
        let prev_at = std::mem::replace(&mut self.at, at);
        Ok((prev, prev_at))
    }

    fn err(&self, kind: ParseErrorKind, offset: usize) -> ParseError {
        position(self.lexer.src, kind, offset)
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        self.err(
            ParseErrorKind::Unexpected {
                expected,
                found: self.tok.describe(),
            },
            self.at,
        )
    }

    fn expect(&mut self, want: Tok, expected: &'static str) -> Result<usize, ParseError> {
        if self.tok == want {
            Ok(self.bump()?.1)
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn skip_separators(&mut self) -> Result<bool, ParseError> {
        let mut any = false;
        while self.tok == Tok::Sep {
            self.bump()?;
            any = true;
        }
        Ok(any)
    }

    fn program(&mut self) -> Result<Vec<ModuleCall>, ParseError> {
        let mut calls = Vec::new();
        self.skip_separators()?;
        while self.tok != Tok::Eof {
            calls.push(self.statement()?);
            if !self.skip_separators()? && self.tok != Tok::Eof {
                return Err(self.unexpected("';' or newline between statements"));
            }
        }
        Ok(calls)
    }

    fn statement(&mut self) -> Result<ModuleCall, ParseError> {
        let start = self.at;
        let name = match &self.tok {
            Tok::Ident(name) => name.clone(),
            _ => return Err(self.unexpected("module name")),
        };
        let module: ModuleName = name
            .parse()
            .map_err(|_| self.err(ParseErrorKind::UnknownModule(name.clone()), start))?;
        self.bump()?;
        self.expect(Tok::LParen, "'('")?;

        let mut args = Vec::new();
        loop {
            let at = self.at;
            let arg = match self.bump()? {
                (Tok::Ident(id), _) if id == "img" => Arg::Img,
                (Tok::Str(s), _) => Arg::Str(s),
                (tok, _) => {
                    return Err(self.err(
                        ParseErrorKind::Unexpected {
                            expected: "img or a string",
                            found: tok.describe(),
                        },
                        at,
                    ))
                }
            };
            match (&arg, args.is_empty()) {
                (Arg::Img, false) => return Err(self.err(ParseErrorKind::ImgNotFirst, at)),
                (Arg::Str(_), true) => return Err(self.err(ParseErrorKind::FirstArgNotImg, at)),
                _ => {}
            }
            args.push(arg);
            match self.tok {
                Tok::Comma => {
                    self.bump()?;
                }
                Tok::RParen => break,
                _ => return Err(self.unexpected("',' or ')'")),
            }
        }
        let close = self.expect(Tok::RParen, "')'")?;
        if args.len() != module.arity() {
            return Err(self.err(
                ParseErrorKind::Arity {
                    module,
                    expected: module.arity(),
                    got: args.len(),
                },
                start,
            ));
        }
        Ok(ModuleCall {
            module,
            args,
            span: Span {
                start,
                end: close + 1,
            },
        })
    }
}

/// Parse program text.
///
/// ```
/// let p = vprog::dsl::parse_program("countEval(img, 'dog', '==3')").unwrap();
/// assert_eq!(p.calls.len(), 1);
/// assert_eq!(p.calls[0].strings(), ["dog", "==3"]);
/// ```
pub fn parse_program(src: &str) -> Result<EvalProgram, ParseError> {
    let mut parser = Parser::new(src)?;
    let calls = parser.program()?;
    if calls.is_empty() {
        return Err(position(src, ParseErrorKind::EmptyProgram, src.len()));
    }
    Ok(EvalProgram {
        calls,
        source: src.to_string(),
    })
}
