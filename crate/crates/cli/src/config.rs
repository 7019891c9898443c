//! `key = value` files whose keys are long flag names.

use std::fs;

use clap::Command;

/// Expands `--config FILE` into flags placed right after the subcommand, so that
/// flags given on the command line override the file (later occurrences win).
pub fn expand(args: Vec<String>, cmd: &Command) -> Result<Vec<String>, String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config: missing file name")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("--config: cannot read `{path}`: {e}"))?;
    let Some((pos, sub)) = rest
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| cmd.find_subcommand(a).map(|s| (i, s)))
    else {
        return Ok(rest);
    };
    let injected = parse(&text, sub, cmd)?;
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

/// Keys unknown to `sub` but valid for another subcommand are skipped, so one
/// file can serve several commands.
fn parse(text: &str, sub: &Command, root: &Command) -> Result<Vec<String>, String> {
    let takes = |c: &Command, key: &str| {
        c.get_arguments()
            .find(|a| a.get_long() == Some(key))
            .map(|a| a.get_action().takes_values())
    };
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("--config line {}: expected `key = value`", n + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match takes(sub, key) {
            Some(true) => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
            Some(false) => match value {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                _ => return Err(format!("--config line {}: `{key}` expects true or false", n + 1)),
            },
            None if root.get_subcommands().any(|c| takes(c, key).is_some()) => {}
            None => return Err(format!("--config line {}: unknown key `{key}`", n + 1)),
        }
    }
    Ok(out)
}
