use crashrisk::ErrorKind;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(crashrisk::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage",
            3 => "data",
            _ => "numeric",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }

    /// One line of JSON for stderr.
    pub fn to_line(&self) -> String {
        json!({ "error": self.kind(), "message": self.message() }).to_string()
    }
}

impl From<crashrisk::Error> for CliError {
    fn from(e: crashrisk::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}
