//! A small arithmetic expression evaluator for control-grid drift and cost
//! formulas supplied in JSON files.
//!
//! Expressions are compiled once into a postfix instruction list and then
//! evaluated with a fixed-size value stack, so a compiled [`Expr`] is cheap to
//! evaluate inside quadrature loops and is `Send + Sync` (plain data, no
//! interpreter state).
//!
//! Grammar: `+ - * / ^` with usual precedence (`^` right-associative, unary
//! minus binding looser than `^`), parentheses, numeric literals, named
//! variables fixed at parse time, the constants `pi` and `e`, one-argument
//! functions `sin cos tan exp ln sqrt abs tanh`, and two-argument `min max`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character {0:?} in expression")]
    BadChar(char),
    #[error("malformed number {0:?}")]
    BadNumber(String),
    #[error("unknown identifier {0:?}")]
    UnknownIdent(String),
    #[error("function {0} expects {1} argument(s)")]
    Arity(String, usize),
    #[error("unbalanced parentheses")]
    Parens,
    #[error("empty or incomplete expression")]
    Incomplete,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func1 {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func2 {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Instr {
    Push(f64),
    Load(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Call1(Func1),
    Call2(Func2),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Fn1(Func1),
    Fn2(Func2),
    Op(u8),
    Neg,
    LParen,
    RParen,
    Comma,
}

/// A compiled arithmetic expression over a fixed list of variables.
#[derive(Debug, Clone)]
pub struct Expr {
    code: Vec<Instr>,
    src: String,
    nvars: usize,
}

const STACK: usize = 32;

fn lex(src: &str, vars: &[&str]) -> Result<Vec<Tok>, ExprError> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push(Tok::Op(b'+'));
                i += 1;
            }
            '-' => {
                // unary when at the start or right after an operator or '(' or ','
                let unary = matches!(
                    toks.last(),
                    None | Some(Tok::Op(_)) | Some(Tok::Neg) | Some(Tok::LParen) | Some(Tok::Comma)
                );
                toks.push(if unary { Tok::Neg } else { Tok::Op(b'-') });
                i += 1;
            }
            '*' | '/' | '^' => {
                toks.push(Tok::Op(bytes[i]));
                i += 1;
            }
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                toks.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent suffix like 1e-3
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| ExprError::BadNumber(text.to_string()))?;
                toks.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                let name = &src[start..i];
                let next_is_paren = bytes.get(i).copied() == Some(b'(');
                if next_is_paren {
                    let f1 = match name {
                        "sin" => Some(Func1::Sin),
                        "cos" => Some(Func1::Cos),
                        "tan" => Some(Func1::Tan),
                        "exp" => Some(Func1::Exp),
                        "ln" | "log" => Some(Func1::Ln),
                        "sqrt" => Some(Func1::Sqrt),
                        "abs" => Some(Func1::Abs),
                        "tanh" => Some(Func1::Tanh),
                        _ => None,
                    };
                    if let Some(f) = f1 {
                        toks.push(Tok::Fn1(f));
                        continue;
                    }
                    let f2 = match name {
                        "min" => Some(Func2::Min),
                        "max" => Some(Func2::Max),
                        _ => None,
                    };
                    if let Some(f) = f2 {
                        toks.push(Tok::Fn2(f));
                        continue;
                    }
                    return Err(ExprError::UnknownIdent(name.to_string()));
                }
                if let Some(k) = vars.iter().position(|v| *v == name) {
                    toks.push(Tok::Var(k));
                } else if name == "pi" {
                    toks.push(Tok::Num(std::f64::consts::PI));
                } else if name == "e" {
                    toks.push(Tok::Num(std::f64::consts::E));
                } else {
                    return Err(ExprError::UnknownIdent(name.to_string()));
                }
            }
            other => return Err(ExprError::BadChar(other)),
        }
    }
    Ok(toks)
}

fn prec(op: u8) -> u8 {
    match op {
        b'+' | b'-' => 1,
        b'*' | b'/' => 2,
        b'^' => 4,
        _ => 0,
    }
}

impl Expr {
    /// Compile `src` with the given variable names; `eval` later takes the
    /// variable values in the same order.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Self, ExprError> {
        let toks = lex(src, vars)?;
        // shunting-yard: operators and function markers wait on `ops`
        #[derive(PartialEq)]
        enum OpTok {
            Op(u8),
            Neg,
            Fn1(Func1),
            Fn2(Func2),
            LParen,
        }
        let mut code = Vec::new();
        let mut ops: Vec<OpTok> = Vec::new();
        let pop_to_code = |code: &mut Vec<Instr>, t: OpTok| match t {
            OpTok::Op(b'+') => code.push(Instr::Add),
            OpTok::Op(b'-') => code.push(Instr::Sub),
            OpTok::Op(b'*') => code.push(Instr::Mul),
            OpTok::Op(b'/') => code.push(Instr::Div),
            OpTok::Op(_) => code.push(Instr::Pow),
            OpTok::Neg => code.push(Instr::Neg),
            OpTok::Fn1(f) => code.push(Instr::Call1(f)),
            OpTok::Fn2(f) => code.push(Instr::Call2(f)),
            OpTok::LParen => unreachable!(),
        };
        for t in toks {
            match t {
                Tok::Num(v) => code.push(Instr::Push(v)),
                Tok::Var(k) => code.push(Instr::Load(k)),
                Tok::Fn1(f) => ops.push(OpTok::Fn1(f)),
                Tok::Fn2(f) => ops.push(OpTok::Fn2(f)),
                Tok::Neg => ops.push(OpTok::Neg),
                Tok::Op(o) => {
                    loop {
                        let pop = match ops.last() {
                            Some(OpTok::Op(top)) => {
                                // '^' is right-associative, the rest left
                                prec(*top) > prec(o) || (prec(*top) == prec(o) && o != b'^')
                            }
                            Some(OpTok::Neg) => prec(o) != 4,
                            _ => false,
                        };
                        if !pop {
                            break;
                        }
                        let top = ops.pop().unwrap();
                        pop_to_code(&mut code, top);
                    }
                    ops.push(OpTok::Op(o));
                }
                Tok::LParen => ops.push(OpTok::LParen),
                Tok::Comma => {
                    while let Some(top) = ops.last() {
                        if *top == OpTok::LParen {
                            break;
                        }
                        let top = ops.pop().unwrap();
                        pop_to_code(&mut code, top);
                    }
                    if ops.last() != Some(&OpTok::LParen) {
                        return Err(ExprError::Parens);
                    }
                }
                Tok::RParen => {
                    loop {
                        match ops.pop() {
                            Some(OpTok::LParen) => break,
                            Some(top) => pop_to_code(&mut code, top),
                            None => return Err(ExprError::Parens),
                        }
                    }
                    // a function directly before '(' applies to the group
                    if matches!(ops.last(), Some(OpTok::Fn1(_)) | Some(OpTok::Fn2(_))) {
                        let top = ops.pop().unwrap();
                        pop_to_code(&mut code, top);
                    }
                }
            }
        }
        while let Some(top) = ops.pop() {
            if top == OpTok::LParen {
                return Err(ExprError::Parens);
            }
            pop_to_code(&mut code, top);
        }
        // validate stack discipline and measure peak depth
        let mut depth: isize = 0;
        let mut peak: isize = 0;
        for ins in &code {
            let (take, give) = match ins {
                Instr::Push(_) | Instr::Load(_) => (0, 1),
                Instr::Neg | Instr::Call1(_) => (1, 1),
                Instr::Call2(_) => (2, 1),
                _ => (2, 1),
            };
            depth -= take;
            if depth < 0 {
                return Err(ExprError::Incomplete);
            }
            depth += give;
            peak = peak.max(depth);
        }
        if depth != 1 {
            return Err(ExprError::Incomplete);
        }
        if peak as usize > STACK {
            return Err(ExprError::Incomplete);
        }
        Ok(Expr {
            code,
            src: src.to_string(),
            nvars: vars.len(),
        })
    }

    /// Evaluate with variable values in parse order.
    pub fn eval(&self, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.nvars);
        let mut stack = [0.0f64; STACK];
        let mut top = 0usize;
        for ins in &self.code {
            match *ins {
                Instr::Push(v) => {
                    stack[top] = v;
                    top += 1;
                }
                Instr::Load(k) => {
                    stack[top] = args[k];
                    top += 1;
                }
                Instr::Neg => stack[top - 1] = -stack[top - 1],
                Instr::Add => {
                    stack[top - 2] += stack[top - 1];
                    top -= 1;
                }
                Instr::Sub => {
                    stack[top - 2] -= stack[top - 1];
                    top -= 1;
                }
                Instr::Mul => {
                    stack[top - 2] *= stack[top - 1];
                    top -= 1;
                }
                Instr::Div => {
                    stack[top - 2] /= stack[top - 1];
                    top -= 1;
                }
                Instr::Pow => {
                    stack[top - 2] = stack[top - 2].powf(stack[top - 1]);
                    top -= 1;
                }
                Instr::Call1(f) => {
                    let x = stack[top - 1];
                    stack[top - 1] = match f {
                        Func1::Sin => x.sin(),
                        Func1::Cos => x.cos(),
                        Func1::Tan => x.tan(),
                        Func1::Exp => x.exp(),
                        Func1::Ln => x.ln(),
                        Func1::Sqrt => x.sqrt(),
                        Func1::Abs => x.abs(),
                        Func1::Tanh => x.tanh(),
                    };
                }
                Instr::Call2(f) => {
                    let b = stack[top - 1];
                    let a = stack[top - 2];
                    stack[top - 2] = match f {
                        Func2::Min => a.min(b),
                        Func2::Max => a.max(b),
                    };
                    top -= 1;
                }
            }
        }
        stack[0]
    }

    /// Original source text, kept for error messages.
    pub fn source(&self) -> &str {
        &self.src
    }
}
