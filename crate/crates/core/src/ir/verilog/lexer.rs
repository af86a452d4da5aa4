// SPDX-License-Identifier: Apache-2.0
use crate::ir::{IrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Literal value bits (LSB first) and declared width for sized literals.
    Number { bits: Vec<bool>, width: Option<u32> },
    Attr(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const SYMBOLS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "~&", "~|", "~^", "^~", "**", "+:", "-:",
    "(", ")", "[", "]", "{", "}", ",", ";", ":", ".", "#", "@", "=", "?", "+", "-", "*", "/", "%", "!", "~",
    "&", "|", "^", "<", ">",
];

pub fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, 2);
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i >= chars.len() {
                return Err(IrError::Syntax { line: pos.line, col: pos.col, msg: "unterminated comment".into() });
            }
            advance(&mut i, &mut line, &mut col, 2);
            continue;
        }
        if c == '`' {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let directive: String = chars[start..i].iter().collect();
            if directive.starts_with("`timescale") {
                continue;
            }
            return Err(IrError::Unsupported {
                line: pos.line,
                col: pos.col,
                what: format!("compiler directive `{}`", directive.split_whitespace().next().unwrap_or("")),
            });
        }
        if c == '(' && chars.get(i + 1) == Some(&'*') && chars.get(i + 2) != Some(&')') {
            advance(&mut i, &mut line, &mut col, 2);
            let start = i;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&')')) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i >= chars.len() {
                return Err(IrError::Syntax { line: pos.line, col: pos.col, msg: "unterminated attribute".into() });
            }
            let text: String = chars[start..i].iter().collect();
            advance(&mut i, &mut line, &mut col, 2);
            toks.push(Token { tok: Tok::Attr(text.trim().to_string()), pos });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '\\' {
            if c == '\\' {
                return Err(IrError::Unsupported { line, col, what: "escaped identifier".into() });
            }
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            toks.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        if c == '$' {
            return Err(IrError::Unsupported { line, col, what: "system task or function".into() });
        }
        if c.is_ascii_digit() || c == '\'' {
            let start = i;
            let mut size_text = String::new();
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                size_text.push(chars[i]);
                advance(&mut i, &mut line, &mut col, 1);
            }
            // look past blanks for a base specifier
            let mut j = i;
            while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t') {
                j += 1;
            }
            if j < chars.len() && chars[j] == '\'' {
                let skip = j - i + 1;
                advance(&mut i, &mut line, &mut col, skip);
                let mut base = chars.get(i).copied().unwrap_or(' ').to_ascii_lowercase();
                if base == 's' {
                    return Err(IrError::Unsupported { line: pos.line, col: pos.col, what: "signed literal".into() });
                }
                if !matches!(base, 'b' | 'o' | 'd' | 'h') {
                    return Err(IrError::Syntax { line: pos.line, col: pos.col, msg: "bad number base".into() });
                }
                advance(&mut i, &mut line, &mut col, 1);
                while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                    advance(&mut i, &mut line, &mut col, 1);
                }
                let mut digits = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    if chars[i] != '_' {
                        digits.push(chars[i].to_ascii_lowercase());
                    }
                    advance(&mut i, &mut line, &mut col, 1);
                }
                if digits.chars().any(|d| matches!(d, 'x' | 'z' | '?')) {
                    return Err(IrError::Unsupported { line: pos.line, col: pos.col, what: "x/z literal".into() });
                }
                let radix = match base {
                    'b' => 2,
                    'o' => 8,
                    'd' => 10,
                    _ => {
                        base = 'h';
                        16
                    }
                };
                let _ = base;
                let mut bits = digits_to_bits(&digits, radix).ok_or_else(|| IrError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("malformed literal `{}`", chars[start..i].iter().collect::<String>()),
                })?;
                let width = if size_text.is_empty() {
                    None
                } else {
                    let w: u32 = size_text.replace('_', "").parse().map_err(|_| IrError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: "bad literal size".into(),
                    })?;
                    if w == 0 {
                        return Err(IrError::Syntax { line: pos.line, col: pos.col, msg: "zero-width literal".into() });
                    }
                    bits.resize(w as usize, false);
                    Some(w)
                };
                toks.push(Token { tok: Tok::Number { bits, width }, pos });
            } else {
                let bits = digits_to_bits(&size_text.replace('_', ""), 10).ok_or_else(|| IrError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: "malformed number".into(),
                })?;
                toks.push(Token { tok: Tok::Number { bits, width: None }, pos });
            }
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                advance(&mut i, &mut line, &mut col, sym.len());
                toks.push(Token { tok: Tok::Sym(sym), pos });
            }
            None => {
                return Err(IrError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
            }
        }
    }
    toks.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(toks)
}

/// Little-endian bit vector of a literal; at least one bit.
fn digits_to_bits(digits: &str, radix: u32) -> Option<Vec<bool>> {
    if digits.is_empty() {
        return None;
    }
    let mut bits = Vec::new();
    if radix == 10 {
        // decimal: repeated division on a digit vector
        let mut num: Vec<u32> = digits.chars().map(|c| c.to_digit(10)).collect::<Option<_>>()?;
        while num.iter().any(|&d| d != 0) {
            let mut rem = 0;
            for d in num.iter_mut() {
                let cur = rem * 10 + *d;
                *d = cur / 2;
                rem = cur % 2;
            }
            bits.push(rem == 1);
        }
    } else {
        let per = match radix {
            2 => 1,
            8 => 3,
            _ => 4,
        };
        for c in digits.chars().rev() {
            let v = c.to_digit(radix)?;
            for b in 0..per {
                bits.push(v >> b & 1 == 1);
            }
        }
        while bits.len() > 1 && !bits[bits.len() - 1] {
            bits.pop();
        }
    }
    if bits.is_empty() {
        bits.push(false);
    }
    Some(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(t: &Tok) -> u64 {
        match t {
            Tok::Number { bits, .. } => bits.iter().enumerate().map(|(i, b)| (*b as u64) << i).sum(),
            _ => panic!("not a number"),
        }
    }

    #[test]
    fn literals() {
        let toks = lex("4'b1010 8'hff 'd12 300 6 'o17 3").unwrap();
        let vals: Vec<u64> = toks[..6].iter().map(|t| value(&t.tok)).collect();
        assert_eq!(vals, vec![10, 255, 12, 300, 15, 3]);
        assert!(matches!(toks[0].tok, Tok::Number { width: Some(4), .. }));
        // a size may be separated from its base by blanks
        assert!(matches!(toks[4].tok, Tok::Number { width: Some(6), .. }));
    }

    #[test]
    fn attributes_and_star_sensitivity() {
        let toks = lex("(* blackbox *) @(*)").unwrap();
        assert_eq!(toks[0].tok, Tok::Attr("blackbox".into()));
        assert_eq!(toks[2].tok, Tok::Sym("("));
        assert_eq!(toks[3].tok, Tok::Sym("*"));
    }

    #[test]
    fn positions_reported() {
        let err = lex("module m;\n  £").unwrap_err();
        assert!(matches!(err, IrError::Syntax { line: 2, col: 3, .. }));
    }
}
