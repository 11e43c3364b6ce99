//! File formats: observables CSV, counters JSON and XYZ snapshots.

use std::io::Write;

use crate::error::Result;
use crate::model::PhaseSpace;
use crate::pgas::CounterSnapshot;
use crate::sim::StepObservables;

/// Header `step,kinetic,potential,total,temperature`, one row per record.
pub fn write_observables<W: Write>(out: W, observables: &[StepObservables]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for o in observables {
        writer.serialize(o)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_observables<R: std::io::Read>(input: R) -> Result<Vec<StepObservables>> {
    let mut reader = csv::Reader::from_reader(input);
    let rows = reader.deserialize().collect::<std::result::Result<_, _>>()?;
    Ok(rows)
}

pub fn write_counters<W: Write>(out: W, counters: &CounterSnapshot) -> Result<()> {
    serde_json::to_writer_pretty(out, counters)?;
    Ok(())
}

/// Plain XYZ frame, every molecule tagged `Ar`.
pub fn write_xyz<W: Write>(mut out: W, phasespace: &PhaseSpace, comment: &str) -> Result<()> {
    writeln!(out, "{}", phasespace.len())?;
    writeln!(out, "{}", comment.replace('\n', " "))?;
    for m in &phasespace.molecules {
        let p = m.position;
        writeln!(out, "Ar {} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}
