use std::path::PathBuf;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_TOKEN_TTL_HOURS: u64 = 72;
pub const DEFAULT_MAX_FILE_MB: u64 = 2048;

/// Argon2id cost parameters for password digests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PasswordCost {
    pub memory_kib: u32,
    pub iterations: u32,
    pub parallelism: u32,
}

impl Default for PasswordCost {
    /// The argon2 crate's recommended parameters (19 MiB, 2 passes).
    fn default() -> Self {
        PasswordCost {
            memory_kib: argon2::Params::DEFAULT_M_COST,
            iterations: argon2::Params::DEFAULT_T_COST,
            parallelism: argon2::Params::DEFAULT_P_COST,
        }
    }
}

impl PasswordCost {
    /// Minimum cost argon2 accepts. Only for tests and benchmarks.
    pub fn insecure_fast() -> Self {
        PasswordCost {
            memory_kib: argon2::Params::MIN_M_COST,
            iterations: 1,
            parallelism: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HubConfig {
    pub data_dir: PathBuf,
    pub token_ttl_hours: u64,
    pub max_file_bytes: u64,
    /// Serve Public datasets to requests without a token.
    pub allow_anon_read: bool,
    pub password_cost: PasswordCost,
}

impl HubConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        HubConfig {
            data_dir: data_dir.into(),
            token_ttl_hours: DEFAULT_TOKEN_TTL_HOURS,
            max_file_bytes: DEFAULT_MAX_FILE_MB * 1024 * 1024,
            allow_anon_read: false,
            password_cost: PasswordCost::default(),
        }
    }

    pub fn token_ttl_secs(&self) -> i64 {
        (self.token_ttl_hours * 3600) as i64
    }

    pub fn db_path(&self) -> PathBuf {
        self.data_dir.join("db")
    }
}
