//! Critical diff check: five static criteria comparing a candidate with the
//! reference at the core API call.

use serde::{Deserialize, Serialize};

use super::normalize::normalize;
use super::{EvalError, EvalRecord};
use crate::syntax::{parse_module, tokenize_lenient, walk_exprs, Arg, ArgKind, Expr, ExprKind, Module, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    TokenPresence,
    CodeValidity,
    ParameterCount,
    ParameterValue,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 4] =
        [ErrorClass::TokenPresence, ErrorClass::CodeValidity, ErrorClass::ParameterCount, ErrorClass::ParameterValue];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::TokenPresence => "token_presence",
            ErrorClass::CodeValidity => "code_validity",
            ErrorClass::ParameterCount => "parameter_count",
            ErrorClass::ParameterValue => "parameter_value",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdcReport {
    pub c1_token_present: bool,
    pub c2_syntax_valid: bool,
    pub c3_arg_count_match: bool,
    pub c4_context_preserved: bool,
    pub c5_kwargs_match: bool,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_class: Option<ErrorClass>,
}

impl CdcReport {
    pub fn from_criteria(c: [bool; 5]) -> Self {
        let mut r = CdcReport {
            c1_token_present: c[0],
            c2_syntax_valid: c[1],
            c3_arg_count_match: c[2],
            c4_context_preserved: c[3],
            c5_kwargs_match: c[4],
            pass: c.iter().all(|&x| x),
            error_class: None,
        };
        r.error_class = classify_error(&r).ok();
        r
    }

    pub fn criteria(&self) -> [bool; 5] {
        [self.c1_token_present, self.c2_syntax_valid, self.c3_arg_count_match, self.c4_context_preserved, self.c5_kwargs_match]
    }
}

/// Class of the first failing criterion. A lost `with` context counts as a
/// validity error.
pub fn classify_error(report: &CdcReport) -> Result<ErrorClass, EvalError> {
    const CLASSES: [ErrorClass; 5] = [
        ErrorClass::TokenPresence,
        ErrorClass::CodeValidity,
        ErrorClass::ParameterCount,
        ErrorClass::CodeValidity,
        ErrorClass::ParameterValue,
    ];
    report.criteria().iter().position(|&ok| !ok).map(|i| CLASSES[i]).ok_or(EvalError::ReportPassed)
}

/// Whether `token` (possibly dotted) occurs as a run of identifier tokens.
pub fn contains_identifier(text: &str, token: &str) -> bool {
    let parts: Vec<&str> = token.split('.').collect();
    let toks: Vec<&str> = tokenize_lenient(text)
        .into_iter()
        .filter(|t| matches!(t.kind, TokenKind::Name | TokenKind::Op))
        .map(|t| t.text(text))
        .collect();
    let want: Vec<&str> = dotted_tokens(&parts);
    toks.windows(want.len()).any(|w| w == want.as_slice())
}

fn dotted_tokens<'a>(parts: &[&'a str]) -> Vec<&'a str> {
    let mut v = Vec::with_capacity(parts.len() * 2);
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            v.push(".");
        }
        v.push(p);
    }
    v
}

/// What the check looks at around the core call.
#[derive(Debug, Clone, PartialEq, Eq)]
struct CallFacts {
    arg_count: usize,
    contexts: Vec<String>,
    keywords: Vec<(String, String)>,
}

fn callee_matches(func: &Expr, token: &str) -> bool {
    let last = token.rsplit('.').next().unwrap_or(token);
    if func.terminal_name() != Some(last) {
        return false;
    }
    if !token.contains('.') {
        return true;
    }
    let want: Vec<&str> = token.split('.').collect();
    func.dotted_path().is_some_and(|p| p.ends_with(&want))
}

fn context_key(src: &str, e: &Expr) -> String {
    let target = match &e.kind {
        ExprKind::Call { func, .. } => func,
        _ => e,
    };
    normalize(target.span.text(src)).trim_end().to_string()
}

fn call_facts(src: &str, module: &Module, token: &str) -> Option<CallFacts> {
    let mut found = None;
    walk_exprs(&module.body, &mut |e, contexts| {
        if found.is_some() {
            return;
        }
        if let ExprKind::Call { func, args, .. } = &e.kind {
            if callee_matches(func, token) {
                let mut ctx: Vec<String> = contexts.iter().map(|c| context_key(src, c)).collect();
                ctx.sort();
                found = Some(CallFacts { arg_count: args.len(), contexts: ctx, keywords: keywords(src, args) });
            }
        }
    });
    found
}

fn keywords(src: &str, args: &[Arg]) -> Vec<(String, String)> {
    let mut kw: Vec<(String, String)> = args
        .iter()
        .filter(|a| a.kind == ArgKind::Keyword)
        .filter_map(|a| Some((a.keyword.as_ref()?.name.clone(), normalize(a.value.span.text(src)).trim_end().to_string())))
        .collect();
    kw.sort();
    kw.dedup();
    kw
}

/// Runs the five criteria. A candidate that does not parse fails c2 and
/// everything after it.
pub fn cdc_check(candidate: &str, record: &EvalRecord) -> Result<CdcReport, EvalError> {
    let token = record.core_token()?;
    let reference = parse_module(&record.reference_code)
        .map_err(|e| EvalError::InvalidRecord(format!("reference does not parse: {e}")))?;
    let c1 = contains_identifier(candidate, &token);
    let Ok(cand) = parse_module(candidate) else {
        return Ok(CdcReport::from_criteria([c1, false, false, false, false]));
    };
    let want = call_facts(&record.reference_code, &reference, &token);
    let got = call_facts(candidate, &cand, &token);
    let (c3, c4, c5) = match (&want, &got) {
        (Some(w), Some(g)) => (w.arg_count == g.arg_count, w.contexts == g.contexts, w.keywords == g.keywords),
        (None, None) => (true, true, true),
        _ => (false, false, false),
    };
    Ok(CdcReport::from_criteria([c1, true, c3, c4, c5]))
}

/// Final attribute of the reference's primary call: the first call whose
/// callee text does not occur as a callee in the old code, else the first
/// call.
pub fn derive_core_token(old_code: &str, reference: &str) -> Option<String> {
    let callees = |src: &str| -> Vec<(String, String)> {
        let Ok(m) = parse_module(src) else { return Vec::new() };
        let mut out = Vec::new();
        walk_exprs(&m.body, &mut |e, _| {
            if let ExprKind::Call { func, .. } = &e.kind {
                if let Some(name) = func.terminal_name() {
                    out.push((normalize(func.span.text(src)), name.to_string()));
                }
            }
        });
        out
    };
    let old: Vec<String> = callees(old_code).into_iter().map(|(t, _)| t).collect();
    let new = callees(reference);
    new.iter().find(|(t, _)| !old.contains(t)).or(new.first()).map(|(_, n)| n.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::MigrationType;

    fn record(reference: &str, token: &str) -> EvalRecord {
        EvalRecord {
            old_code: String::new(),
            old_version: "1.0".into(),
            new_version: "2.0".into(),
            description: String::new(),
            reference_code: reference.into(),
            core_api_token: Some(token.into()),
            migration_type: MigrationType::MajorToMajor,
        }
    }

    fn check(candidate: &str, reference: &str, token: &str) -> CdcReport {
        cdc_check(candidate, &record(reference, token)).unwrap()
    }

    const REF: &str = "import acme\nwith acme.session() as s:\n    y = acme.fit(x, 3, verbose=False)\n";

    #[test]
    fn identical_passes() {
        let r = check(REF, REF, "fit");
        assert!(r.pass);
        assert_eq!(r.error_class, None);
    }

    #[test]
    fn each_class() {
        let r = check("import acme\nwith acme.session() as s:\n    y = acme.train(x, 3, verbose=False)\n", REF, "fit");
        assert_eq!((r.c1_token_present, r.error_class), (false, Some(ErrorClass::TokenPresence)));
        let r = check("import acme\nwith acme.session() as s:\ny = acme.fit(x, 3, verbose=False)\n", REF, "fit");
        assert_eq!((r.c2_syntax_valid, r.error_class), (false, Some(ErrorClass::CodeValidity)));
        let r = check("import acme\nwith acme.session() as s:\n    y = acme.fit(x, 3, 4, verbose=False)\n", REF, "fit");
        assert_eq!(r.error_class, Some(ErrorClass::ParameterCount));
        let r = check("import acme\nwith acme.session() as s:\n    y = acme.fit(x, 3, verbose=True)\n", REF, "fit");
        assert_eq!(r.criteria(), [true, true, true, true, false]);
        assert_eq!(r.error_class, Some(ErrorClass::ParameterValue));
        let r = check("import acme\ny = acme.fit(x, 3, verbose=False)\n", REF, "fit");
        assert_eq!(r.criteria(), [true, true, true, false, true]);
        assert_eq!(r.error_class, Some(ErrorClass::CodeValidity));
    }

    #[test]
    fn token_is_not_a_substring_match() {
        assert!(!contains_identifier("acme.fitter(x)", "fit"));
        assert!(!contains_identifier("s = 'fit'", "fit"));
        assert!(contains_identifier("acme . fit(x)", "acme.fit"));
        assert!(!contains_identifier("acme.io.fit(x)", "acme.fit"));
    }

    #[test]
    fn keyword_values_compare_normalized_text() {
        let r = check("acme.fit(x, mode = 'a')\n", "acme.fit(x, mode=\"a\")\n", "fit");
        assert!(r.pass);
        let r = check("acme.fit(x, tol=0.000001)\n", "acme.fit(x, tol=1e-6)\n", "fit");
        assert!(!r.c5_kwargs_match);
    }

    #[test]
    fn classification_order() {
        let r = CdcReport::from_criteria([true, false, false, true, true]);
        assert_eq!(classify_error(&r).unwrap(), ErrorClass::CodeValidity);
        assert!(matches!(classify_error(&CdcReport::from_criteria([true; 5])), Err(EvalError::ReportPassed)));
    }

    #[test]
    fn core_token_derivation() {
        assert_eq!(derive_core_token("acme.norm(x)\nprint(1)\n", "acme.normalize(x)\nprint(1)\n").as_deref(), Some("normalize"));
        assert_eq!(derive_core_token("acme.load(p)\n", "acme.load(p)\n").as_deref(), Some("load"));
        assert_eq!(derive_core_token("x = 1\n", "y = 2\n"), None);
    }
}
