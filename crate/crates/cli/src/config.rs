use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};

/// Removes `--config FILE` from `argv` and splices the file's entries in
/// right after the subcommand, so that later command-line flags override them.
pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            rest.push(a);
            rest.extend(it.by_ref());
            break;
        }
        if s == "--config" {
            path = Some(it.next().context("--config needs a file path")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let injected = parse_config(&text)?;
    // The first non-flag argument after the program name is the subcommand.
    let at =
        rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 2).unwrap_or(rest.len());
    rest.splice(at..at, injected);
    Ok(rest)
}

/// Turns `key = value` lines into flags. `true` gives a bare flag, `false`
/// drops the key, and whitespace separates multiple values.
pub fn parse_config(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got {raw:?}", no + 1);
        };
        let key = key.trim().trim_start_matches('-').replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", no + 1);
        }
        match value.trim() {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.extend(v.split_whitespace().map(OsString::from));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_lines_become_flags() {
        let got = parse_config(
            "# comment\niters = 5\nreference_iters=7 # trailing\nclean = true\nascii = false\nsynthetic = 8 9 1\n",
        )
        .unwrap();
        assert_eq!(got, os(&["--iters", "5", "--reference-iters", "7", "--clean", "--synthetic", "8", "9", "1"]));
    }

    #[test]
    fn bad_lines_are_rejected() {
        assert!(parse_config("iters 5").is_err());
        assert!(parse_config(" = 5").is_err());
    }

    #[test]
    fn file_entries_precede_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "iters = 5\n").unwrap();
        let argv = os(&["gpdps", "--config", path.to_str().unwrap(), "nash", "--iters", "3"]);
        assert_eq!(expand_args(argv).unwrap(), os(&["gpdps", "nash", "--iters", "5", "--iters", "3"]));
        let argv = os(&["gpdps", "nash", &format!("--config={}", path.display())]);
        assert_eq!(expand_args(argv).unwrap(), os(&["gpdps", "nash", "--iters", "5"]));
    }

    #[test]
    fn without_config_args_pass_through() {
        let argv = os(&["gpdps", "steps", "linear", "--rk", "1"]);
        assert_eq!(expand_args(argv.clone()).unwrap(), argv);
    }
}
