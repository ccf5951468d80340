//! Lexer and recursive-descent parser for rule files.
//!
//! ```text
//! ruleset := rule+
//! rule    := "RULE" name ":" "WHEN" expr "THEN" action ("," action)*
//! expr    := and ("OR" and)*
//! and     := unary ("AND" unary)*
//! unary   := "NOT" unary | "(" expr ")" | atom
//! atom    := name "." name cmp literal | name cmp literal
//!          | "Duration" ">=" duration | "Time" "in" "[" clock clock "]"
//!          | "True" | "False"
//! action  := "EMIT" target | "SET" target | "ALERT" string
//! target  := name ("." name)? ("=" literal)?
//! ```
//!
//! A bare `name cmp literal` refers to the `Activity` entity. `#` starts a
//! comment that runs to the end of the line.

use std::collections::HashMap;

use crate::error::{Result, WitsError};
use crate::events::Value;

use super::ast::{Action, Clock, Comparator, Rule, RuleSet, TriggerExpr};

const KEYWORDS: [&str; 9] = ["RULE", "WHEN", "THEN", "AND", "OR", "NOT", "EMIT", "SET", "ALERT"];

pub(crate) fn is_reserved(s: &str) -> bool {
    KEYWORDS.contains(&s) || matches!(s.to_ascii_lowercase().as_str(), "true" | "false")
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Digit-led run such as `30min`, `8:00pm` or `2.5`.
    Word(String),
    Str(String),
    Dot,
    Colon,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Minus,
    Assign,
    Cmp(Comparator),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> WitsError {
    WitsError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                advance(1, &mut i, &mut col);
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            _ => {}
        }
        let peek = chars.get(i + 1).copied();
        let tok = match c {
            '.' => {
                advance(1, &mut i, &mut col);
                Tok::Dot
            }
            ':' => {
                advance(1, &mut i, &mut col);
                Tok::Colon
            }
            ',' => {
                advance(1, &mut i, &mut col);
                Tok::Comma
            }
            '(' => {
                advance(1, &mut i, &mut col);
                Tok::LParen
            }
            ')' => {
                advance(1, &mut i, &mut col);
                Tok::RParen
            }
            '[' => {
                advance(1, &mut i, &mut col);
                Tok::LBracket
            }
            ']' => {
                advance(1, &mut i, &mut col);
                Tok::RBracket
            }
            '-' => {
                advance(1, &mut i, &mut col);
                Tok::Minus
            }
            '=' if peek == Some('=') => {
                advance(2, &mut i, &mut col);
                Tok::Cmp(Comparator::Eq)
            }
            '=' => {
                advance(1, &mut i, &mut col);
                Tok::Assign
            }
            '!' if peek == Some('=') => {
                advance(2, &mut i, &mut col);
                Tok::Cmp(Comparator::Ne)
            }
            '>' | '<' => {
                let eq = peek == Some('=');
                advance(if eq { 2 } else { 1 }, &mut i, &mut col);
                Tok::Cmp(match (c, eq) {
                    ('>', true) => Comparator::Ge,
                    ('>', false) => Comparator::Gt,
                    ('<', true) => Comparator::Le,
                    _ => Comparator::Lt,
                })
            }
            // Unicode comparison signs are accepted too.
            '≥' => {
                advance(1, &mut i, &mut col);
                Tok::Cmp(Comparator::Ge)
            }
            '≤' => {
                advance(1, &mut i, &mut col);
                Tok::Cmp(Comparator::Le)
            }
            '"' => {
                let mut s = String::new();
                advance(1, &mut i, &mut col);
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(syntax(tl, tc, "unterminated string")),
                        Some('"') => {
                            advance(1, &mut i, &mut col);
                            break;
                        }
                        Some('\\') => {
                            let esc = match chars.get(i + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                _ => return Err(syntax(line, col, "invalid escape")),
                            };
                            s.push(esc);
                            advance(2, &mut i, &mut col);
                        }
                        Some(&ch) => {
                            s.push(ch);
                            advance(1, &mut i, &mut col);
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    advance(1, &mut i, &mut col);
                }
                Tok::Ident(chars[start..i].iter().collect())
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() {
                    let ch = chars[i];
                    let exp_sign = (ch == '-' || ch == '+')
                        && matches!(chars[i - 1], 'e' | 'E')
                        && chars[start..i - 1].iter().all(|d| d.is_ascii_digit() || *d == '.');
                    if ch.is_ascii_alphanumeric() || ch == ':' || ch == '.' || exp_sign {
                        advance(1, &mut i, &mut col);
                    } else {
                        break;
                    }
                }
                Tok::Word(chars[start..i].iter().collect())
            }
            other => return Err(syntax(tl, tc, format!("unexpected character {other:?}"))),
        };
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

fn parse_number(word: &str) -> Option<f64> {
    // Rust's float parser accepts "inf" and "nan"; words always start with a
    // digit so those cannot occur.
    word.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_duration(word: &str) -> Option<i64> {
    let split = word
        .char_indices()
        .find(|(_, c)| c.is_ascii_alphabetic() && *c != 'e' && *c != 'E')
        .map(|(i, _)| i)?;
    let (num, unit) = word.split_at(split);
    let scale = match unit {
        "ms" => 1.0,
        "s" | "sec" | "secs" => 1_000.0,
        "min" | "mins" | "m" => 60_000.0,
        "h" | "hr" | "hrs" => 3_600_000.0,
        _ => return None,
    };
    let value = parse_number(num)?;
    let ms = (value * scale).round();
    (ms >= 0.0 && ms < 9.0e15).then_some(ms as i64)
}

fn parse_clock(word: &str) -> Option<Clock> {
    let lower = word.to_ascii_lowercase();
    let (body, meridiem) = if let Some(b) = lower.strip_suffix("am") {
        (b, Some(false))
    } else if let Some(b) = lower.strip_suffix("pm") {
        (b, Some(true))
    } else {
        (lower.as_str(), None)
    };
    let (h, m) = match body.split_once(':') {
        Some((h, m)) if m.len() == 2 => (h, m),
        Some(_) => return None,
        None if meridiem.is_some() => (body, "00"),
        None => return None,
    };
    if h.is_empty() || h.len() > 2 || !h.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let hour: u16 = h.parse().ok()?;
    let minute: u16 = m.parse().ok()?;
    let hour = match meridiem {
        Some(pm) => {
            if !(1..=12).contains(&hour) {
                return None;
            }
            (hour % 12) + if pm { 12 } else { 0 }
        }
        None => hour,
    };
    Clock::new(hour, minute)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> WitsError {
        let t = self.peek();
        syntax(t.line, t.col, message)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.is_keyword(kw) {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}, found {}", describe(&self.peek().tok))))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token> {
        if self.peek().tok == tok {
            Ok(self.next())
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(&self.peek().tok))))
        }
    }

    /// An identifier that is not a keyword, or a quoted string.
    fn name(&mut self, what: &str) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            Tok::Str(s) if !s.is_empty() => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn literal(&mut self) -> Result<Value> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) if s.eq_ignore_ascii_case("true") => {
                self.next();
                Ok(Value::Bool(true))
            }
            Tok::Ident(s) if s.eq_ignore_ascii_case("false") => {
                self.next();
                Ok(Value::Bool(false))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Value::Text(s))
            }
            Tok::Word(w) => {
                self.next();
                parse_number(&w)
                    .map(Value::Number)
                    .ok_or_else(|| syntax(t.line, t.col, format!("invalid number {w:?}")))
            }
            Tok::Minus => {
                self.next();
                let t2 = self.peek().clone();
                match t2.tok {
                    Tok::Word(w) => {
                        self.next();
                        parse_number(&w)
                            .map(|v| Value::Number(-v))
                            .ok_or_else(|| syntax(t2.line, t2.col, format!("invalid number {w:?}")))
                    }
                    other => Err(syntax(t2.line, t2.col, format!("expected number, found {}", describe(&other)))),
                }
            }
            other => Err(syntax(t.line, t.col, format!("expected literal, found {}", describe(&other)))),
        }
    }

    fn ruleset(&mut self) -> Result<RuleSet> {
        let mut rules = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        if self.peek().tok == Tok::Eof {
            return Err(self.error("rule file contains no rules"));
        }
        while self.peek().tok != Tok::Eof {
            let start = self.peek().clone();
            self.expect_keyword("RULE")?;
            let name_tok = self.peek().clone();
            let name = self.name("rule name")?;
            if let Some(prev) = seen.insert(name.clone(), start.line) {
                return Err(syntax(
                    name_tok.line,
                    name_tok.col,
                    format!("duplicate rule name {name:?} (first defined on line {prev})"),
                ));
            }
            self.expect(Tok::Colon, "':'")?;
            self.expect_keyword("WHEN")?;
            let trigger = self.expr()?;
            self.expect_keyword("THEN")?;
            let mut actions = vec![self.action()?];
            while self.peek().tok == Tok::Comma {
                self.next();
                actions.push(self.action()?);
            }
            rules.push(Rule {
                name,
                trigger,
                actions,
            });
        }
        Ok(RuleSet { rules })
    }

    fn expr(&mut self) -> Result<TriggerExpr> {
        let mut items = vec![self.and_expr()?];
        while self.is_keyword("OR") {
            self.next();
            items.push(self.and_expr()?);
        }
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            TriggerExpr::Or(items)
        })
    }

    fn and_expr(&mut self) -> Result<TriggerExpr> {
        let first = self.peek().clone();
        let mut items = vec![self.unary()?];
        while self.is_keyword("AND") {
            self.next();
            items.push(self.unary()?);
        }
        let has_duration = items.iter().any(|x| matches!(x, TriggerExpr::DurationAtLeast(_)));
        let has_predicate = items.iter().any(|x| matches!(x, TriggerExpr::Predicate { .. }));
        if has_duration && (items.len() == 1 || !has_predicate) {
            return Err(syntax(
                first.line,
                first.col,
                "Duration must appear in an AND group with at least one predicate",
            ));
        }
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            TriggerExpr::And(items)
        })
    }

    fn unary(&mut self) -> Result<TriggerExpr> {
        if self.is_keyword("NOT") {
            self.next();
            let inner_tok = self.peek().clone();
            let inner = self.unary()?;
            if matches!(inner, TriggerExpr::DurationAtLeast(_)) {
                return Err(syntax(
                    inner_tok.line,
                    inner_tok.col,
                    "Duration must appear in an AND group with at least one predicate",
                ));
            }
            return Ok(TriggerExpr::Not(Box::new(inner)));
        }
        if self.peek().tok == Tok::LParen {
            self.next();
            let e = self.expr()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(e);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<TriggerExpr> {
        let t = self.peek().clone();
        let word = match &t.tok {
            Tok::Ident(s) => s.clone(),
            Tok::Str(_) => String::new(),
            other => return Err(self.error(format!("expected condition, found {}", describe(other)))),
        };
        if word == "Duration" && matches!(self.peek_at(1), Tok::Cmp(_)) {
            self.next();
            let op = self.next();
            if op.tok != Tok::Cmp(Comparator::Ge) {
                return Err(syntax(op.line, op.col, "Duration only supports >="));
            }
            let d = self.next();
            return match d.tok {
                Tok::Word(w) => parse_duration(&w)
                    .map(TriggerExpr::DurationAtLeast)
                    .ok_or_else(|| syntax(d.line, d.col, format!("invalid duration {w:?}"))),
                other => Err(syntax(d.line, d.col, format!("expected duration, found {}", describe(&other)))),
            };
        }
        if word == "Time" && matches!(self.peek_at(1), Tok::Ident(s) if s == "in") {
            self.next();
            self.next();
            self.expect(Tok::LBracket, "'['")?;
            let start = self.clock()?;
            let end = self.clock()?;
            self.expect(Tok::RBracket, "']'")?;
            return Ok(TriggerExpr::TimeWindow { start, end });
        }
        if word.eq_ignore_ascii_case("true") || word.eq_ignore_ascii_case("false") {
            self.next();
            return Ok(TriggerExpr::Const(word.eq_ignore_ascii_case("true")));
        }
        let first = self.name("entity or activity name")?;
        let (entity, attribute) = if self.peek().tok == Tok::Dot {
            self.next();
            (first, self.name("attribute name")?)
        } else {
            ("Activity".to_string(), first)
        };
        let cmp = match self.peek().tok {
            Tok::Cmp(c) => {
                self.next();
                c
            }
            _ => return Err(self.error(format!("expected comparison, found {}", describe(&self.peek().tok)))),
        };
        let value = self.literal()?;
        Ok(TriggerExpr::Predicate {
            entity,
            attribute,
            cmp,
            value,
        })
    }

    /// A clock is a single word (`20:00`, `8:00pm`, `8pm`) or a word followed
    /// by a separate meridiem (`8:00 pm`).
    fn clock(&mut self) -> Result<Clock> {
        let t = self.next();
        let mut text = match t.tok {
            Tok::Word(w) => w,
            other => return Err(syntax(t.line, t.col, format!("expected clock time, found {}", describe(&other)))),
        };
        if let Tok::Ident(m) = self.peek_at(0) {
            if m.eq_ignore_ascii_case("am") || m.eq_ignore_ascii_case("pm") {
                text.push_str(m);
                self.next();
            }
        }
        parse_clock(&text).ok_or_else(|| syntax(t.line, t.col, format!("invalid clock time {text:?}")))
    }

    fn action(&mut self) -> Result<Action> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(k) if k == "ALERT" => {
                self.next();
                let m = self.next();
                match m.tok {
                    Tok::Str(s) => Ok(Action::Alert(s)),
                    other => Err(syntax(m.line, m.col, format!("expected alert message string, found {}", describe(&other)))),
                }
            }
            Tok::Ident(k) if k == "EMIT" || k == "SET" => {
                let emit = k == "EMIT";
                self.next();
                let first = self.name("entity or activity name")?;
                let (entity, attribute) = if self.peek().tok == Tok::Dot {
                    self.next();
                    (first, self.name("attribute name")?)
                } else if emit {
                    ("Activity".to_string(), first)
                } else {
                    return Err(self.error("SET needs Entity.Attribute"));
                };
                let value = if self.peek().tok == Tok::Assign {
                    self.next();
                    self.literal()?
                } else if emit {
                    Value::Bool(true)
                } else {
                    return Err(self.error("SET needs '= value'"));
                };
                Ok(if emit {
                    Action::Emit {
                        entity,
                        attribute,
                        value,
                    }
                } else {
                    Action::Set {
                        entity,
                        attribute,
                        value,
                    }
                })
            }
            other => Err(syntax(t.line, t.col, format!("expected EMIT, SET or ALERT, found {}", describe(other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Word(s) => format!("'{s}'"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Dot => "'.'".into(),
        Tok::Colon => "':'".into(),
        Tok::Comma => "','".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Assign => "'='".into(),
        Tok::Cmp(c) => format!("'{}'", c.symbol()),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a rule file.
pub fn parse_rules(text: &str) -> Result<RuleSet> {
    let tokens = lex(text)?;
    Parser { tokens, pos: 0 }.ruleset()
}

/// Parses a single trigger expression.
pub fn parse_trigger(text: &str) -> Result<TriggerExpr> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.error(format!("unexpected {}", describe(&p.peek().tok))));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn toilet_rule() {
        let rs = parse_rules(
            "# bathroom safety\nRULE LongToilet:\n  WHEN Toilet.Occupied == True AND Duration >= 30mins\n  THEN ALERT \"Sending an alarm to caregiver\"\n",
        )
        .unwrap();
        let r = &rs.rules[0];
        assert_eq!(
            r.trigger,
            TriggerExpr::And(vec![
                TriggerExpr::predicate("Toilet", "Occupied", Comparator::Eq, true),
                TriggerExpr::DurationAtLeast(30 * 60_000),
            ])
        );
        assert_eq!(r.actions, vec![Action::Alert("Sending an alarm to caregiver".into())]);
    }

    #[test]
    fn bare_predicate_is_activity() {
        assert_eq!(
            parse_trigger("Sleeping == True").unwrap(),
            TriggerExpr::predicate("Activity", "Sleeping", Comparator::Eq, true)
        );
    }

    #[test]
    fn precedence() {
        let e = parse_trigger("NOT a == 1 AND b == 2 OR c == 3").unwrap();
        let a = TriggerExpr::predicate("Activity", "a", Comparator::Eq, 1.0);
        let b = TriggerExpr::predicate("Activity", "b", Comparator::Eq, 2.0);
        let c = TriggerExpr::predicate("Activity", "c", Comparator::Eq, 3.0);
        assert_eq!(
            e,
            TriggerExpr::Or(vec![TriggerExpr::And(vec![TriggerExpr::Not(Box::new(a)), b]), c])
        );
    }

    #[test]
    fn clocks() {
        for (text, minutes) in [
            ("8:00pm", 1200),
            ("8pm", 1200),
            ("20:00", 1200),
            ("12am", 0),
            ("12:30pm", 750),
            ("00:00", 0),
            ("23:59", 1439),
        ] {
            assert_eq!(parse_clock(text), Some(Clock(minutes)), "{text}");
        }
        for bad in ["24:00", "13pm", "0am", "8:0", "8", "12:60"] {
            assert_eq!(parse_clock(bad), None, "{bad}");
        }
        let e = parse_trigger("Porch.Presence == true AND Time in [8:00 pm 8:00am]").unwrap();
        assert!(matches!(&e, TriggerExpr::And(xs) if xs[1] == TriggerExpr::TimeWindow { start: Clock(1200), end: Clock(480) }));
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration("30min"), Some(1_800_000));
        assert_eq!(parse_duration("2h"), Some(7_200_000));
        assert_eq!(parse_duration("1.5s"), Some(1_500));
        assert_eq!(parse_duration("10"), None);
        assert_eq!(parse_duration("5days"), None);
    }

    #[test]
    fn errors_carry_positions() {
        match parse_rules("RULE a:\n  WHEN x == \n  THEN ALERT \"m\"") {
            Err(WitsError::Syntax { line, column, .. }) => assert_eq!((line, column), (3, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_rules("RULE a: WHEN x == 1 THEN ALERT \"m\"\nRULE a: WHEN y == 1 THEN ALERT \"n\""),
            Err(WitsError::Syntax { line: 2, column: 6, .. })
        ));
        for bad in [
            "RULE a: WHEN Duration >= 5min THEN ALERT \"m\"",
            "RULE a: WHEN x == 1 OR Duration >= 5min THEN ALERT \"m\"",
            "RULE a: WHEN x == 1 AND NOT Duration >= 5min THEN ALERT \"m\"",
            "RULE a: WHEN x == 1 AND (Duration >= 5min) THEN ALERT \"m\"",
            "RULE a: WHEN x == 1 THEN",
            "RULE a: WHEN x == 1 THEN SET L = true",
            "RULE a: WHEN Time in [24:00 8:00] AND x == 1 THEN ALERT \"m\"",
            "",
        ] {
            assert!(matches!(parse_rules(bad), Err(WitsError::Syntax { .. })), "{bad:?}");
        }
    }

    #[test]
    fn constant_trigger() {
        let rs = parse_rules("RULE always: WHEN True THEN ALERT \"x\"").unwrap();
        assert_eq!(rs.rules[0].trigger, TriggerExpr::Const(true));
    }

    fn name() -> impl Strategy<Value = String> {
        prop_oneof![
            "[A-Z][a-zA-Z0-9_]{0,6}",
            Just("Activity".to_string()),
            Just("Duration".to_string()),
            Just("Time".to_string()),
            Just("AND".to_string()),
            Just("my entity".to_string()),
        ]
    }

    fn literal() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<bool>().prop_map(Value::Bool),
            (-1e6f64..1e6).prop_map(Value::Number),
            any::<i32>().prop_map(|i| Value::Number(f64::from(i))),
            "[a-z \"\\\\]{0,8}".prop_map(Value::Text),
        ]
    }

    fn comparator() -> impl Strategy<Value = Comparator> {
        prop_oneof![
            Just(Comparator::Eq),
            Just(Comparator::Ne),
            Just(Comparator::Ge),
            Just(Comparator::Le),
            Just(Comparator::Gt),
            Just(Comparator::Lt),
        ]
    }

    fn predicate() -> impl Strategy<Value = TriggerExpr> {
        (name(), name(), comparator(), literal()).prop_map(|(entity, attribute, cmp, value)| {
            TriggerExpr::Predicate {
                entity,
                attribute,
                cmp,
                value,
            }
        })
    }

    fn leaf() -> impl Strategy<Value = TriggerExpr> {
        prop_oneof![
            4 => predicate(),
            1 => any::<bool>().prop_map(TriggerExpr::Const),
            1 => (0u16..1440, 0u16..1440).prop_map(|(s, e)| TriggerExpr::TimeWindow { start: Clock(s), end: Clock(e) }),
        ]
    }

    fn expr() -> impl Strategy<Value = TriggerExpr> {
        leaf().prop_recursive(4, 24, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(|x| TriggerExpr::Not(Box::new(x))),
                (prop::collection::vec(inner.clone(), 1..4), predicate(), prop::option::of(1i64..100_000_000))
                    .prop_map(|(mut xs, p, d)| {
                        xs.push(p);
                        if let Some(ms) = d {
                            xs.push(TriggerExpr::DurationAtLeast(ms));
                        }
                        TriggerExpr::And(xs)
                    }),
                prop::collection::vec(inner, 2..4).prop_map(TriggerExpr::Or),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(trigger in expr(), name in name(), msg in "[ -~]{0,12}") {
            let rs = RuleSet {
                rules: vec![Rule {
                    name,
                    trigger,
                    actions: vec![
                        Action::Alert(msg),
                        Action::Set { entity: "L".into(), attribute: "on".into(), value: Value::Number(-2.5) },
                    ],
                }],
            };
            let printed = rs.to_string();
            let back = parse_rules(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
            prop_assert_eq!(&back, &rs);
            prop_assert_eq!(back.to_string(), printed);
        }
    }
}
