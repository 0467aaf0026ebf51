//! Exit codes: 0 success, 2 precondition violation, 3 numeric failure, 4 budget exceeded.

use cuspidal::bgbasis::BgError;
use cuspidal::modcurve::ModError;
use cuspidal::petersson::PeterssonError;

pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("method not applicable: {0}")]
    NotApplicable(String),
    #[error("self-test failed: {0}")]
    SelfTest(String),
    #[error(transparent)]
    Bg(#[from] BgError),
    #[error(transparent)]
    Petersson(#[from] PeterssonError),
}

fn bg_code(e: &BgError) -> i32 {
    match e {
        BgError::Residual { .. } | BgError::Anomalous(_) | BgError::QExp(_) => EXIT_NUMERIC,
        _ => EXIT_PRECONDITION,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::NotApplicable(_) => EXIT_PRECONDITION,
            CliError::SelfTest(_) => EXIT_NUMERIC,
            CliError::Bg(e) => bg_code(e),
            CliError::Petersson(e) => match e {
                PeterssonError::Budget { .. } => EXIT_BUDGET,
                PeterssonError::Anomalous(_) | PeterssonError::Spec(_) => EXIT_NUMERIC,
                PeterssonError::Bg(b) => bg_code(b),
                PeterssonError::Mod(ModError::Ambiguous { .. } | ModError::NotTStable(_)) => EXIT_NUMERIC,
                _ => EXIT_PRECONDITION,
            },
        }
    }
}

/// Exit code for any error reaching `main`.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    if let Some(c) = e.downcast_ref::<CliError>() {
        return c.exit_code();
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_PRECONDITION;
    }
    EXIT_NUMERIC
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::Petersson(PeterssonError::Budget { err: 1.0, tol: 0.1 }).exit_code(), 4);
        assert_eq!(CliError::Petersson(PeterssonError::Divergent("oo".into())).exit_code(), 2);
        assert_eq!(CliError::Bg(BgError::Residual { residual: 1.0, oos: 1.0, tol: 0.0 }).exit_code(), 3);
        assert_eq!(CliError::Petersson(PeterssonError::Mod(ModError::NotTStable(0))).exit_code(), 3);
        assert_eq!(exit_code(&anyhow::Error::from(CliError::NotApplicable("k".into()))), 2);
    }
}
