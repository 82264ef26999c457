use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, bad flags, IO failures.
    #[error("{0}")]
    Input(String),
    #[error("invalid model: {0}")]
    Validation(patchdyn_core::Error),
    #[error("solver failure: {0}")]
    Solver(patchdyn_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl From<patchdyn_core::Error> for CliError {
    fn from(e: patchdyn_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e)
        } else {
            CliError::Solver(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use patchdyn_core::Error;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::from(Error::Reducible {
                unreachable: vec![3]
            })
            .exit_code(),
            3
        );
        assert_eq!(
            CliError::from(Error::NTooSmall {
                given: 1.0,
                minimal: 2.0
            })
            .exit_code(),
            3
        );
        let solver = Error::ConvergenceFailure {
            beta: 1.0,
            reason: "stalled".into(),
        };
        assert_eq!(CliError::from(solver).exit_code(), 4);
    }
}
