use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use sawmatch_core::{extract_io, parse_document};

use crate::{usage, CliResult, Format};

fn join(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(" ")
}

pub fn run(file: &Path, format: Format) -> CliResult {
    let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let id = file.file_name().unwrap_or_default().to_string_lossy();
    let desc = parse_document(&id, &bytes).map_err(|e| usage(anyhow::anyhow!("{}: {e}", file.display())))?;
    for w in &desc.warnings {
        log::warn!("{id}: {w}");
    }

    let mut out = std::io::stdout().lock();
    match format {
        Format::Tsv => {
            writeln!(
                out,
                "interface\toperation\tinput_annotations\toutput_annotations\tinput_names\toutput_names"
            )?;
            for (iface, op) in desc.operations() {
                let io = extract_io(op);
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    iface.name,
                    op.name,
                    join(&io.input_annotations),
                    join(&io.output_annotations),
                    join(&io.input_names),
                    join(&io.output_names)
                )?;
            }
        }
        Format::Text => {
            writeln!(out, "service {}", desc.service_name)?;
            for iface in &desc.interfaces {
                writeln!(out, "  interface {}", iface.name)?;
                for op in &iface.operations {
                    let io = extract_io(op);
                    writeln!(out, "    operation {}", op.name)?;
                    for (label, set) in [
                        ("input annotations", &io.input_annotations),
                        ("input names", &io.input_names),
                        ("output annotations", &io.output_annotations),
                        ("output names", &io.output_names),
                    ] {
                        writeln!(out, "      {label}: {}", join(set))?;
                    }
                }
            }
            for w in &desc.warnings {
                writeln!(out, "  warning: {w}")?;
            }
        }
    }
    Ok(())
}
