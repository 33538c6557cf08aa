use super::{ErrorKind, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub text: String,
    pub line: usize,
    pub column: usize,
}

const SYMS: [&str; 19] = ["<=", ">=", "==", "!=", "(", ")", "[", "]", "{", "}", ",", "+", "-", "*", "/", "^", "<", ">", "="];

/// Tokens of one line; `#` starts a comment.
pub fn lex_line(src: &str, line: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = vec![];
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| ParseError::new(ErrorKind::Syntax, line, column, &text, "malformed number"))?;
            out.push(Token { tok: Tok::Num(v), text, line, column });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(text.clone()), text, line, column });
            continue;
        }
        if c == '|' {
            out.push(Token { tok: Tok::Sym("|"), text: "|".into(), line, column });
            i += 1;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push(Token { tok: Tok::Sym(s), text: s.to_string(), line, column });
                i += s.len();
            }
            None => return Err(ParseError::new(ErrorKind::Syntax, line, column, &c.to_string(), "unexpected character")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_with_positions() {
        let t = lex_line("f1 = 1.5e-3*x <= 2 # note", 4).unwrap();
        let texts: Vec<&str> = t.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["f1", "=", "1.5e-3", "*", "x", "<=", "2"]);
        assert_eq!((t[2].line, t[2].column), (4, 6));
        let e = lex_line("a = 3 $ 4", 2).unwrap_err();
        assert_eq!((e.line, e.column, e.token.as_str()), (2, 7, "$"));
    }
}
