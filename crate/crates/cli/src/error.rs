use std::fmt;

use elastic_register::Error;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Tags a library error with the pipeline stage that raised it.
pub fn at(stage: &'static str) -> impl Fn(Error) -> Failure {
    move |e| {
        let msg = format!("{stage}: {e}");
        if e.is_numerical() {
            Failure::Numerical(msg)
        } else {
            Failure::Input(msg)
        }
    }
}
