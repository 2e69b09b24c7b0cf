use std::fmt;

/// Byte range in the source plus the 1-based line and column of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl Span {
    /// Span of `start..end` in `source`; line and column are computed.
    pub fn locate(source: &str, start: usize, end: usize) -> Self {
        let start = start.min(source.len());
        let end = end.clamp(start, source.len());
        let before = &source[..start];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let col = source[line_start..start].chars().count() + 1;
        Span { start, end, line, col }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
}

impl ParseDiagnostic {
    pub fn error(message: impl Into<String>, span: Span) -> Self {
        ParseDiagnostic { severity: Severity::Error, message: message.into(), span }
    }
}

/// Diagnostics collected while parsing one source text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Diagnostics(pub Vec<ParseDiagnostic>);

impl Diagnostics {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ParseDiagnostic> {
        self.0.iter()
    }

    pub fn has_errors(&self) -> bool {
        self.0.iter().any(|d| d.severity == Severity::Error)
    }

    pub(crate) fn push(&mut self, d: ParseDiagnostic) {
        self.0.push(d);
    }

    /// Compiler-style rendering: `file:line:col: error: message`, the
    /// offending line, and a caret underline.
    pub fn render(&self, source: &str, filename: &str) -> String {
        let mut out = String::new();
        for d in &self.0 {
            out.push_str(&format!(
                "{filename}:{}:{}: {}: {}\n",
                d.span.line, d.span.col, d.severity, d.message
            ));
            let line_text = source.lines().nth(d.span.line - 1).unwrap_or("");
            let width = source[d.span.start..d.span.end].chars().take_while(|&c| c != '\n').count().max(1);
            out.push_str(&format!("  {line_text}\n"));
            out.push_str(&format!("  {}{}\n", " ".repeat(d.span.col - 1), "^".repeat(width)));
        }
        out
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            writeln!(f, "{}:{}: {}: {}", d.span.line, d.span.col, d.severity, d.message)?;
        }
        Ok(())
    }
}
