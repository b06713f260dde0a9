//! Generates a standalone matplotlib script for a finished run. The script
//! is written, never executed.

use std::path::{Path, PathBuf};

use crate::config::Kind;
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

pub const PLOT_FILE: &str = "plot.py";

struct Panel {
    title: &'static str,
    x: &'static str,
    y: &'static str,
    log_y: bool,
    /// Plot only the second half of the rows.
    zoom: bool,
}

const fn panel(title: &'static str, x: &'static str, y: &'static str, log_y: bool) -> Panel {
    Panel {
        title,
        x,
        y,
        log_y,
        zoom: false,
    }
}

fn panels(kind: Kind) -> Vec<Panel> {
    match kind {
        Kind::NqmSweep => vec![
            panel("loss", "t", "loss", true),
            panel("angular velocity (deg)", "t", "omega", false),
        ],
        Kind::NqmAutodrop => vec![
            panel("loss", "t", "loss", true),
            panel("angular velocity (deg)", "t", "omega", false),
            panel("learning rate", "t", "alpha", true),
        ],
        Kind::OracleCheck => vec![panel("relative error", "dim", "i_rel_err", false)],
        Kind::ScheduleValidate => vec![panel("learning rate", "start", "alpha", true)],
        Kind::Alg2Plan => vec![
            panel("learning rate", "start", "alpha", true),
            panel("drop gap", "phase", "gap", false),
        ],
        Kind::Train => vec![
            panel("learning rate", "epoch", "learning_rate", true),
            panel("train loss", "epoch", "train_loss", true),
            panel("test error", "epoch", "eval_error", false),
            Panel {
                zoom: true,
                ..panel("test error (zoomed)", "epoch", "eval_error", false)
            },
        ],
    }
}

pub fn panel_count(kind: Kind) -> usize {
    panels(kind).len()
}

fn py_str(s: &str) -> String {
    format!("{s:?}")
}

/// Script body for a manifest whose CSVs are `files`.
pub fn render_script(kind: Kind, files: &[String]) -> String {
    let panels = panels(kind);
    let files_py: Vec<String> = files.iter().map(|f| py_str(f)).collect();
    let mut spec = String::new();
    for p in &panels {
        spec.push_str(&format!(
            "    ({}, {}, {}, {}, {}),\n",
            py_str(p.title),
            py_str(p.x),
            py_str(p.y),
            if p.log_y { "True" } else { "False" },
            if p.zoom { "True" } else { "False" },
        ));
    }
    format!(
        r#"#!/usr/bin/env python3
"""Plots for a `{kind}` run. Generated by autodrop-lab; run from any directory."""
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = [{files}]
PANELS = [
{spec}]


def load(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        return list(csv.DictReader(fh))


def column(rows, key):
    return [float(r[key]) if r.get(key, "") != "" else float("nan") for r in rows]


def main():
    fig, axes = plt.subplots(1, len(PANELS), figsize=(5 * len(PANELS), 4), squeeze=False)
    for ax, (title, x, y, log_y, zoom) in zip(axes[0], PANELS):
        for name in FILES:
            rows = load(name)
            if not rows or x not in rows[0] or y not in rows[0]:
                continue
            if zoom:
                rows = rows[len(rows) // 2:]
            ax.plot(column(rows, x), column(rows, y), label=name[:-4])
        ax.set_title(title)
        ax.set_xlabel(x)
        if log_y:
            ax.set_yscale("log")
        ax.legend(fontsize="small")
    fig.tight_layout()
    out = os.path.join(HERE, "{kind}.png")
    fig.savefig(out, dpi=120)
    print(out)


if __name__ == "__main__":
    main()
"#,
        files = files_py.join(", "),
    )
}

/// Writes `plot.py` next to the manifest and returns its path.
pub fn emit_plot_script(manifest_path: &Path) -> CliResult<PathBuf> {
    let manifest = Manifest::read(manifest_path)?;
    let kind: Kind = manifest.kind.parse()?;
    if manifest.files.is_empty() {
        return Err(CliError::Config(format!(
            "{} lists no CSV files",
            manifest_path.display()
        )));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    if let Some(missing) = manifest.files.iter().find(|f| !dir.join(f).is_file()) {
        return Err(CliError::Config(format!(
            "{} refers to missing CSV {missing}",
            manifest_path.display()
        )));
    }
    let path = dir.join(PLOT_FILE);
    std::fs::write(&path, render_script(kind, &manifest.files)).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_layouts() {
        assert_eq!(panel_count(Kind::NqmSweep), 2);
        assert_eq!(panel_count(Kind::Train), 4);
        assert_eq!(panel_count(Kind::NqmAutodrop), 3);
    }

    #[test]
    fn script_embeds_files_and_panels() {
        let script = render_script(Kind::Train, &["train.csv".into()]);
        assert!(script.contains(r#"FILES = ["train.csv"]"#));
        assert_eq!(script.matches("\"epoch\", ").count(), 4);
        assert!(script.contains("test error (zoomed)"));
    }
}
