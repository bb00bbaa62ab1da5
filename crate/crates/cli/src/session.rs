use std::fs;
use std::path::{Path, PathBuf};

use neuromamba::dataio::{load_cohort, zscore_scores, Cohort};
use neuromamba::{Error, ErrorClass};
use serde::de::DeserializeOwned;

use crate::{GlobalArgs, Precision};

#[derive(Debug)]
pub struct CliError {
    class: ErrorClass,
    kind: String,
    message: String,
}

impl CliError {
    pub fn usage(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Usage,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn numeric(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Numeric,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
        }
    }

    pub fn to_json(&self) -> String {
        let class = match self.class {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Numeric => "numeric",
        };
        serde_json::json!({
            "error": self.kind,
            "class": class,
            "exit_code": self.exit_code(),
            "message": self.message,
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            class: e.class(),
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub struct Session {
    pub seed: Option<u64>,
    pub precision: Precision,
    pub out_dir: PathBuf,
    pub dump_intermediate: bool,
    pub zscore: bool,
    pool: rayon::ThreadPool,
}

impl Session {
    pub fn new(args: &GlobalArgs) -> CliResult<Self> {
        if args.threads == Some(0) {
            return Err(CliError::usage("usage", "--threads must be at least 1"));
        }
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = args.threads {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::usage("usage", format!("cannot start thread pool: {e}")))?;
        Ok(Session {
            seed: args.seed,
            precision: args.precision,
            out_dir: args.out_dir.clone(),
            dump_intermediate: args.dump_intermediate,
            zscore: !args.no_zscore,
            pool,
        })
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        self.pool.install(f)
    }

    pub fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }

    pub fn output(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }

    pub fn write(&self, path: &Path, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.output(path);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Cohort with scores z-scored against its normative subjects unless
    /// disabled.
    pub fn cohort(&self, path: &Path) -> CliResult<Cohort> {
        let cohort = load_cohort(path)?;
        if !self.zscore {
            return Ok(cohort);
        }
        let z = zscore_scores(&cohort.manifest)?;
        Ok(cohort.with_manifest(z)?)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
        .into()
    })
}
