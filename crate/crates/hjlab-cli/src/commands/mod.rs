//! One module per subcommand. Each `run` returns `Ok(true)` when every
//! tolerance check passed, `Ok(false)` for a clean run with failing checks
//! (exit 2), and `Err` for configuration or solver failures.

pub mod corrector;
pub mod effective;
pub mod ensemble;
pub mod rate;
pub mod simulate;
pub mod verify;
