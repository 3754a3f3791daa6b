//! Structured JSON-lines logger on standard error.

use std::io::Write;

use log::{Level, LevelFilter, Log, Metadata, Record};
use serde_json::json;

struct JsonLogger {
    level: LevelFilter,
}

impl Log for JsonLogger {
    fn enabled(&self, metadata: &Metadata<'_>) -> bool {
        metadata.level() <= self.level
    }

    fn log(&self, record: &Record<'_>) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let line = json!({
            "level": level_name(record.level()),
            "target": record.target(),
            "message": record.args().to_string(),
        });
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "{line}");
    }

    fn flush(&self) {
        let _ = std::io::stderr().flush();
    }
}

fn level_name(l: Level) -> &'static str {
    match l {
        Level::Error => "error",
        Level::Warn => "warn",
        Level::Info => "info",
        Level::Debug => "debug",
        Level::Trace => "trace",
    }
}

/// Install the logger once; later calls only adjust the level.
pub fn init(level: LevelFilter) {
    static LOGGER: std::sync::OnceLock<JsonLogger> = std::sync::OnceLock::new();
    let logger = LOGGER.get_or_init(|| JsonLogger { level: LevelFilter::Trace });
    let _ = log::set_logger(logger);
    log::set_max_level(level);
}
