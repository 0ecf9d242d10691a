//! Argument handling and output formatting for the `bisim` binary.
//!
//! [`run`] is the whole program minus process plumbing, so it can be driven
//! from tests with in-memory writers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use tabisim::checker::DEFAULT_MAX_VISITED;
use tabisim::{check_bisimilar_with, parse, CheckError, CheckOptions, TimedAutomaton};

/// Exit code for bisimilar automata.
pub const EXIT_BISIMILAR: i32 = 0;
/// Exit code for non-bisimilar automata.
pub const EXIT_NOT_BISIMILAR: i32 = 1;
/// Exit code for usage, parse, validation and resource errors.
pub const EXIT_ERROR: i32 = 2;

/// Decide timed bisimilarity of two timed automata.
#[derive(Debug, Parser)]
#[command(name = "bisim", version)]
pub struct Args {
    /// First automaton.
    pub file_a: PathBuf,
    /// Second automaton.
    pub file_b: PathBuf,
    /// Run the bounded check of this order instead of the full check.
    #[arg(long, value_name = "N")]
    pub order: Option<usize>,
    /// Report visited pairs, recursion depth and running time.
    #[arg(long)]
    pub stats: bool,
    /// Print the verdict as JSON.
    #[arg(long)]
    pub json: bool,
    /// Give up once more than this many pairs have been visited.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_MAX_VISITED)]
    pub max_visited: u64,
}

fn load(path: &Path) -> Result<TimedAutomaton, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}:{e}", path.display()))
}

/// Run the program on `argv` (including the program name), writing the
/// verdict to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_BISIMILAR };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let (a, b) = match (load(&args.file_a), load(&args.file_b)) {
        (Ok(a), Ok(b)) => (a, b),
        (ra, rb) => {
            for e in [ra.err(), rb.err()].into_iter().flatten() {
                let _ = writeln!(err, "error: {e}");
            }
            return EXIT_ERROR;
        }
    };
    let options = CheckOptions {
        order: args.order,
        max_visited: args.max_visited,
        ..CheckOptions::default()
    };
    let verdict = match check_bisimilar_with(&a, &b, &options) {
        Ok(v) => v,
        Err(e) => {
            let which = match &e {
                CheckError::Invalid { which: 'A', .. } => format!("{}: ", args.file_a.display()),
                CheckError::Invalid { .. } => format!("{}: ", args.file_b.display()),
                _ => String::new(),
            };
            let _ = writeln!(err, "error: {which}{e}");
            return EXIT_ERROR;
        }
    };
    let written = if args.json {
        let mut v = verdict.to_json(args.stats);
        if args.stats {
            v["max_depth"] = serde_json::json!(verdict.max_depth);
        }
        writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json value"))
    } else {
        let mut text = String::from(if verdict.bisimilar {
            "bisimilar\n"
        } else {
            "not bisimilar\n"
        });
        for c in &verdict.contradictions {
            text.push_str(&format!("  {c}\n"));
        }
        if args.stats {
            text.push_str(&format!(
                "pairs visited: {}\nmax depth: {}\ntime: {:.3} ms\n",
                verdict.pairs_visited, verdict.max_depth, verdict.millis
            ));
        }
        write!(out, "{text}")
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_ERROR;
    }
    if verdict.bisimilar {
        EXIT_BISIMILAR
    } else {
        EXIT_NOT_BISIMILAR
    }
}
