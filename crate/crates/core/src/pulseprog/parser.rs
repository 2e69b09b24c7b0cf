use super::diagnostics::{Diagnostics, ParseDiagnostic, Span};
use super::{Degrees, Event, Millis, PulseProgram, PulseTarget, Stmt};
use crate::noise::DecouplingMode;

/// Deepest allowed `repeat` nesting.
pub const MAX_NESTING: usize = 8;

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Open,
    Close,
    Newline,
    Eof,
}

#[derive(Debug, Clone)]
struct Token<'a> {
    tok: Tok<'a>,
    start: usize,
    end: usize,
}

fn tokenize(src: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'\n' => {
                out.push(Token { tok: Tok::Newline, start: i, end: i + 1 });
                i += 1;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'{' => {
                out.push(Token { tok: Tok::Open, start: i, end: i + 1 });
                i += 1;
            }
            b'}' => {
                out.push(Token { tok: Tok::Close, start: i, end: i + 1 });
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'{' | b'}' | b'#') {
                    i += 1;
                }
                // skip whole UTF-8 sequences so slicing stays on char boundaries
                while !src.is_char_boundary(i) {
                    i += 1;
                }
                out.push(Token { tok: Tok::Word(&src[start..i]), start, end: i });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, start: src.len(), end: src.len() });
    out
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token<'a>>,
    pos: usize,
    diags: Diagnostics,
    /// An `acquire` keyword was seen, even if its statement failed.
    saw_acquire: bool,
}

/// Marker for a statement that failed; the diagnostic is already recorded.
struct Failed;

impl<'a> Parser<'a> {
    fn span(&self, start: usize, end: usize) -> Span {
        Span::locate(self.src, start, end)
    }

    fn peek(&self) -> &Token<'a> {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token<'a> {
        let t = self.toks[self.pos].clone();
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn error(&mut self, msg: impl Into<String>, start: usize, end: usize) -> Failed {
        let span = self.span(start, end);
        self.diags.push(ParseDiagnostic::error(msg, span));
        Failed
    }

    /// Skips to the end of the current line, leaving a `}` in place for the
    /// enclosing block.
    fn recover(&mut self) {
        while !matches!(self.peek().tok, Tok::Newline | Tok::Close | Tok::Eof) {
            self.bump();
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek().tok, Tok::Newline) {
            self.bump();
        }
    }

    /// Statements until `}` (when `depth > 0`) or end of input.
    fn block(&mut self, depth: usize) -> Vec<Stmt> {
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            let t = self.peek().clone();
            match t.tok {
                Tok::Eof => return out,
                Tok::Close if depth > 0 => return out,
                Tok::Close => {
                    self.error("unmatched `}`", t.start, t.end);
                    self.bump();
                }
                Tok::Open => {
                    self.error("unexpected `{`", t.start, t.end);
                    self.bump();
                }
                Tok::Word(_) => match self.statement(depth) {
                    Ok(s) => {
                        out.push(s);
                        self.end_of_statement();
                    }
                    Err(Failed) => self.recover(),
                },
                Tok::Newline => unreachable!(),
            }
        }
    }

    /// After a statement only a newline, a closing brace or EOF may follow.
    fn end_of_statement(&mut self) {
        let t = self.peek().clone();
        if !matches!(t.tok, Tok::Newline | Tok::Close | Tok::Eof) {
            let mut end = t.end;
            while !matches!(self.peek().tok, Tok::Newline | Tok::Close | Tok::Eof) {
                end = self.bump().end;
            }
            self.error("unexpected trailing tokens", t.start, end);
        }
    }

    fn word(&mut self, what: &str, after: &Token<'a>) -> Result<(&'a str, usize, usize), Failed> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Word(w) => {
                self.bump();
                Ok((w, t.start, t.end))
            }
            _ => Err(self.error(format!("expected {what}"), after.start, t.start.max(after.end))),
        }
    }

    fn number(&mut self, what: &str, after: &Token<'a>) -> Result<(f64, usize, usize), Failed> {
        let (w, s, e) = self.word(what, after)?;
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((v, s, e)),
            Ok(_) => Err(self.error(format!("{what} must be finite, got `{w}`"), s, e)),
            Err(_) => Err(self.error(format!("malformed number `{w}` for {what}"), s, e)),
        }
    }

    fn integer(&mut self, what: &str, after: &Token<'a>) -> Result<(i64, usize, usize), Failed> {
        let (w, s, e) = self.word(what, after)?;
        w.parse::<i64>().map(|v| (v, s, e)).map_err(|_| self.error(format!("malformed integer `{w}` for {what}"), s, e))
    }

    fn target(&mut self, after: &Token<'a>) -> Result<PulseTarget, Failed> {
        let (w, s, e) = self.word("a target (CC, CS or ALL)", after)?;
        PulseTarget::parse(w).ok_or_else(|| self.error(format!("unknown target `{w}` (expected CC, CS or ALL)"), s, e))
    }

    fn statement(&mut self, depth: usize) -> Result<Stmt, Failed> {
        let kw = self.bump();
        let Tok::Word(name) = kw.tok else { unreachable!() };
        self.saw_acquire |= name == "acquire";
        let event = match name {
            "pulse" => {
                let target = self.target(&kw)?;
                let (phi, ..) = self.number("pulse phase", &kw)?;
                let (theta, ..) = self.number("pulse angle", &kw)?;
                Event::Pulse { target, phi: Degrees(phi), theta: Degrees(theta) }
            }
            "zrot" => {
                let target = self.target(&kw)?;
                let (theta, ..) = self.number("rotation angle", &kw)?;
                Event::VirtualZ { target, theta: Degrees(theta) }
            }
            "delay" => {
                let (ms, s, e) = self.number("delay", &kw)?;
                if ms < 0.0 {
                    return Err(self.error(format!("delay must be >= 0 ms, got {ms}"), s, e));
                }
                Event::Delay(Millis(ms))
            }
            "decouple" => {
                let (w, s, e) = self.word("a decoupling mode", &kw)?;
                match w.parse::<DecouplingMode>() {
                    Ok(m) => Event::Decouple(m),
                    Err(_) => {
                        return Err(self.error(
                            format!("unknown decoupling mode `{w}` (expected none, selective or full)"),
                            s,
                            e,
                        ))
                    }
                }
            }
            "acquire" => {
                let (points, ps, pe) = self.integer("point count", &kw)?;
                let (dwell, ds, de) = self.number("dwell time", &kw)?;
                if points < 2 {
                    return Err(self.error(format!("acquire needs at least 2 points, got {points}"), ps, pe));
                }
                if dwell <= 0.0 {
                    return Err(self.error(format!("dwell time must be > 0 ms, got {dwell}"), ds, de));
                }
                Event::Acquire { points: points as usize, dwell: Millis(dwell) }
            }
            "repeat" => return self.repeat(&kw, depth),
            other => return Err(self.error(format!("unknown keyword `{other}`"), kw.start, kw.end)),
        };
        let end = self.toks[self.pos - 1].end;
        Ok(Stmt { event, span: self.span(kw.start, end) })
    }

    fn repeat(&mut self, kw: &Token<'a>, depth: usize) -> Result<Stmt, Failed> {
        let (count, cs, ce) = self.integer("repeat count", kw)?;
        let open = self.peek().clone();
        if !matches!(open.tok, Tok::Open) {
            return Err(self.error("expected `{` after repeat count", open.start, open.end));
        }
        self.bump();
        let mut failed = false;
        if count < 1 || count > u32::MAX as i64 {
            self.error(format!("repeat count must be >= 1, got {count}"), cs, ce);
            failed = true;
        }
        if depth + 1 > MAX_NESTING {
            self.error(format!("repeat nesting deeper than {MAX_NESTING}"), kw.start, open.end);
            failed = true;
        }
        let body = self.block(depth + 1);
        let close = self.peek().clone();
        if !matches!(close.tok, Tok::Close) {
            self.error(
                format!("unclosed `{{` opened at line {}", self.span(open.start, open.end).line),
                close.start,
                close.end,
            );
            return Err(Failed);
        }
        self.bump();
        if failed {
            return Err(Failed);
        }
        Ok(Stmt { event: Event::Repeat { count: count as u32, body }, span: self.span(kw.start, close.end) })
    }
}

/// Acquisition placement: exactly one, top level, last.
fn check_acquire(src: &str, stmts: &[Stmt], saw_acquire: bool, diags: &mut Diagnostics) {
    fn nested(stmts: &[Stmt], diags: &mut Diagnostics) {
        for s in stmts {
            match &s.event {
                Event::Acquire { .. } => diags.push(ParseDiagnostic::error("acquire is not allowed inside repeat", s.span)),
                Event::Repeat { body, .. } => nested(body, diags),
                _ => {}
            }
        }
    }
    let mut seen = None;
    for (i, s) in stmts.iter().enumerate() {
        match &s.event {
            Event::Acquire { .. } => {
                if seen.is_some() {
                    diags.push(ParseDiagnostic::error("duplicate acquire", s.span));
                } else if i + 1 != stmts.len() {
                    diags.push(ParseDiagnostic::error("acquire must be the last statement", s.span));
                }
                seen.get_or_insert(i);
            }
            Event::Repeat { body, .. } => nested(body, diags),
            _ => {}
        }
    }
    let has_nested = diags.iter().any(|d| d.message.starts_with("acquire is not allowed"));
    if seen.is_none() && !has_nested && !saw_acquire {
        diags.push(ParseDiagnostic::error("missing acquire", Span::locate(src, src.len(), src.len())));
    }
}

/// Parses a program. All problems found are reported together.
pub fn parse(src: &str) -> Result<PulseProgram, Diagnostics> {
    let mut p = Parser { src, toks: tokenize(src), pos: 0, diags: Diagnostics::default(), saw_acquire: false };
    let stmts = p.block(0);
    let mut diags = p.diags;
    check_acquire(src, &stmts, p.saw_acquire, &mut diags);
    if diags.has_errors() {
        diags.0.sort_by_key(|d| (d.span.start, d.span.end));
        Err(diags)
    } else {
        Ok(PulseProgram { stmts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(src: &str) -> Vec<String> {
        parse(src).unwrap_err().iter().map(|d| d.message.clone()).collect()
    }

    #[test]
    fn echo_program() {
        let p = parse("delay 1.72\npulse CS 0 180\ndelay 1.72\nacquire 4096 0.25").unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.stmts[1].event, Event::Pulse { target: PulseTarget::Cs, phi: Degrees(0.0), theta: Degrees(180.0) });
        assert_eq!(p.acquisition(), Some((4096, Millis(0.25))));
        assert_eq!(p.stmts[1].span.line, 2);
    }

    #[test]
    fn empty_input_needs_acquire() {
        assert_eq!(errors(""), ["missing acquire"]);
        assert_eq!(errors("# only a comment\n"), ["missing acquire"]);
    }

    #[test]
    fn unclosed_brace_reported_at_eof() {
        let src = "repeat 2 { delay 1";
        let d = parse(src).unwrap_err();
        assert!(d.iter().any(|d| d.message.starts_with("unclosed") && d.span.start == src.len()));
    }

    #[test]
    fn inline_and_block_repeat() {
        let a = parse("repeat 2 { delay 1 }\nacquire 8 1").unwrap();
        let b = parse("repeat 2 {\n  delay 1\n}\nacquire 8 1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_delay_s(), 2e-3);
    }

    #[test]
    fn several_errors_reported() {
        let e = errors("pulse XX 0 90\ndelay abc\nfrobnicate\nacquire 1 1\n");
        assert_eq!(e.len(), 4, "{e:?}");
        assert!(e[0].contains("unknown target"));
        assert!(e[1].contains("malformed number"));
        assert!(e[2].contains("unknown keyword"));
        assert!(e[3].contains("at least 2 points"));
    }

    #[test]
    fn acquire_placement() {
        assert!(errors("acquire 8 1\ndelay 1\n")[0].contains("last"));
        assert!(errors("acquire 8 1\nacquire 8 1\n").iter().any(|m| m == "duplicate acquire"));
        assert!(errors("repeat 2 { acquire 8 1 }\n")[0].contains("inside repeat"));
    }

    #[test]
    fn numeric_limits() {
        assert!(errors("delay -1\nacquire 8 1")[0].contains(">= 0"));
        assert!(errors("delay inf\nacquire 8 1")[0].contains("finite"));
        assert!(errors("repeat 0 { delay 1 }\nacquire 8 1")[0].contains(">= 1"));
        assert!(errors("acquire 8 0")[0].contains("> 0"));
        assert!(errors("pulse CC 0\nacquire 8 1")[0].contains("expected pulse angle"));
    }

    #[test]
    fn nesting_limit() {
        let deep = |n: usize| format!("{}delay 1{}\nacquire 8 1", "repeat 1 { ".repeat(n), " }".repeat(n));
        assert!(parse(&deep(MAX_NESTING)).is_ok());
        assert!(errors(&deep(MAX_NESTING + 1))[0].contains("nesting"));
    }

    #[test]
    fn stray_braces_and_trailing_tokens() {
        assert!(errors("}\nacquire 8 1")[0].contains("unmatched"));
        assert!(errors("delay 1 2\nacquire 8 1")[0].contains("trailing"));
    }

    #[test]
    fn spans_stay_inside_source() {
        for src in ["", "pulse", "repeat 2 {", "x\u{e9}y 1\n", "delay 1 }"] {
            if let Err(d) = parse(src) {
                for diag in d.iter() {
                    assert!(diag.span.end <= src.len());
                    assert!(diag.span.start <= diag.span.end);
                }
            }
        }
    }
}
