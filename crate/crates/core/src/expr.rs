//! Thread-safe wrapper around `meval` expressions in the variables `t`, `x`, `y`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

thread_local! {
    static BUILTINS: meval::Context<'static> = meval::Context::new();
}

/// A parsed scalar expression `f(t, x, y)` (`pi`, `e`, `sin`, `exp`, `ln`, ...).
#[derive(Clone)]
pub struct ScalarExpr {
    source: String,
    expr: meval::Expr,
}

impl ScalarExpr {
    pub fn parse(source: &str) -> Result<Self> {
        let expr = meval::Expr::from_str(source)
            .map_err(|e| Error::Parameter(format!("cannot parse expression `{source}`: {e}")))?;
        let parsed = ScalarExpr {
            source: source.to_string(),
            expr,
        };
        parsed.try_eval(0.25, &[0.25, 0.25]).map_err(|e| {
            Error::Parameter(format!("cannot evaluate expression `{source}`: {e}"))
        })?;
        Ok(parsed)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn try_eval(&self, t: f64, x: &[f64]) -> std::result::Result<f64, meval::Error> {
        let vars = [
            ("t", t),
            ("x", x.first().copied().unwrap_or(0.0)),
            ("y", x.get(1).copied().unwrap_or(0.0)),
        ];
        BUILTINS.with(|builtins| self.expr.eval_with_context((vars, builtins)))
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.try_eval(t, x).unwrap_or(f64::NAN)
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarExpr({:?})", self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_builtins_and_variables() {
        let e = ScalarExpr::parse("2 + 0.5*sin(pi*x)*sin(pi*t)").unwrap();
        let v = e.eval(0.5, &[0.5]);
        assert!((v - 2.5).abs() < 1e-15);
        let e = ScalarExpr::parse("x*y + t").unwrap();
        assert!((e.eval(1.0, &[2.0, 3.0]) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_variables() {
        assert!(ScalarExpr::parse("z + 1").is_err());
        assert!(ScalarExpr::parse("2 +").is_err());
    }

    #[test]
    fn usable_across_threads() {
        let e = ScalarExpr::parse("exp(t)").unwrap();
        let h = std::thread::spawn(move || e.eval(0.0, &[0.0]));
        assert_eq!(h.join().unwrap(), 1.0);
    }
}
