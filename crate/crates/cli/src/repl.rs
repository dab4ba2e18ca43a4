//! Terminal session: candidate table in, command grammar lines out.

use std::io::{self, BufRead, Write};
use std::path::Path;

use mergeloop::io::{format_command_log, write_atomic};
use mergeloop::{write_step_artifacts, Command, MergeCandidate, Session};

pub const TABLE_LIMIT: usize = 20;
const HISTORY_TAIL: usize = 12;
pub const COMMAND_LOG: &str = "session.cmds";

pub fn print_table<W: Write>(out: &mut W, list: &[MergeCandidate], limit: usize) -> io::Result<()> {
    if list.is_empty() {
        return writeln!(out, "no candidates left");
    }
    writeln!(
        out,
        "{:>6} {:>7} {:>7} {:>8}",
        "rank", "red", "blue", "score"
    )?;
    for c in list.iter().take(limit) {
        writeln!(
            out,
            "{:>6} {:>7} {:>7} {:>8}",
            c.rank, c.red, c.blue, c.score
        )?;
    }
    if list.len() > limit {
        writeln!(
            out,
            "+{} more (LIST ALL shows every candidate)",
            list.len() - limit
        )?;
    }
    Ok(())
}

fn print_status<W: Write>(out: &mut W, session: &Session, out_dir: &Path) -> io::Result<()> {
    let log = session.trace_log();
    let tokens: Vec<&str> = log.split_whitespace().collect();
    let tail = tokens.len().saturating_sub(HISTORY_TAIL);
    let ellipsis = if tail > 0 { "... " } else { "" };
    writeln!(
        out,
        "step {}: {ellipsis}{}",
        session.step(),
        tokens[tail..].join(" ")
    )?;
    print_table(out, session.candidates(), TABLE_LIMIT)?;
    writeln!(out, "current: {}", out_dir.join("current.dot").display())?;
    if session.step() > 0 {
        writeln!(out, "previous: {}", out_dir.join("previous.dot").display())?;
    }
    Ok(())
}

/// Returns false when the session should end.
fn handle_line<W: Write, E: Write>(
    session: &mut Session,
    out_dir: &Path,
    text: &str,
    out: &mut W,
    err: &mut E,
) -> io::Result<bool> {
    let upper = text.to_ascii_uppercase();
    if text.is_empty() || text.starts_with('#') {
        return Ok(true);
    }
    if upper == "QUIT" || upper == "EXIT" {
        return Ok(false);
    }
    if upper == "LIST ALL" {
        print_table(out, session.candidates(), usize::MAX)?;
        return Ok(true);
    }
    match text.parse::<Command>() {
        Err(e) => writeln!(err, "error: {e}")?,
        Ok(command) => match session.apply(&command) {
            Err(e) => writeln!(err, "error: {}: {e}", e.kind())?,
            Ok(_) => {
                write_step_artifacts(session, out_dir)?;
                print_status(out, session, out_dir)?;
            }
        },
    }
    Ok(true)
}

/// Reads commands until end of input or `QUIT`. Artifacts are rewritten after
/// every accepted command; accepted commands are saved to `session.cmds`.
pub fn run<R: BufRead, W: Write, E: Write>(
    session: &mut Session,
    out_dir: &Path,
    input: R,
    out: &mut W,
    err: &mut E,
) -> io::Result<()> {
    write_step_artifacts(session, out_dir)?;
    print_status(out, session, out_dir)?;
    write!(out, "> ")?;
    out.flush()?;
    for line in input.lines() {
        if !handle_line(session, out_dir, line?.trim(), out, err)? {
            break;
        }
        write!(out, "> ")?;
        out.flush()?;
    }
    writeln!(out)?;
    write_atomic(
        &out_dir.join(COMMAND_LOG),
        format_command_log(session.commands()).as_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use mergeloop::{parse_traces, Heuristic, Mode};

    #[test]
    fn table_truncates() {
        let list: Vec<MergeCandidate> = (1..=25)
            .map(|rank| MergeCandidate {
                rank,
                red: 0,
                blue: rank,
                score: 100 - rank as u64,
            })
            .collect();
        let mut buf = Vec::new();
        print_table(&mut buf, &list, TABLE_LIMIT).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 20 + 1);
        assert!(text.ends_with("+5 more (LIST ALL shows every candidate)\n"));
    }

    #[test]
    fn scripted_session() {
        let dir = tempfile::tempdir().unwrap();
        let sample = parse_traces("2 1\n0 2 a/x a/x\n0 1 a/x\n", Mode::Mealy).unwrap();
        let mut s = Session::new(sample, Default::default(), Heuristic::Mealy).unwrap();
        let script = "LIST ALL\nMERGE 7\nbogus\nMERGE 1\n# done\nQUIT\nUNDO\n";
        let (mut out, mut err) = (Vec::new(), Vec::new());
        run(&mut s, dir.path(), script.as_bytes(), &mut out, &mut err).unwrap();
        let err = String::from_utf8(err).unwrap();
        assert_eq!(err.lines().count(), 2);
        assert!(err.contains("UnknownRank"));
        assert_eq!(s.trace_log(), "m1");
        let log = std::fs::read_to_string(dir.path().join(COMMAND_LOG)).unwrap();
        assert_eq!(log, "MERGE 1\n");
        assert!(String::from_utf8(out).unwrap().contains("previous: "));
    }
}
