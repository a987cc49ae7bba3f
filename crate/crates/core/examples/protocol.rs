//! Print the command sequence of a named experiment.
//!
//! cargo run --release --example protocol -- henon-table1 [desk]

use std::path::Path;

use dyntok::protocols::{plan, PlanOptions, Protocol};

fn main() -> dyntok::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "henon-table1".into());
    let protocol: Protocol = name.parse()?;
    let opts = PlanOptions {
        desk: args.next().as_deref() == Some("desk"),
        ..PlanOptions::default()
    };
    let plan = plan(protocol, Path::new("runs"), &opts);
    println!("# {} commands, {} config files", plan.commands.len(), plan.files.len());
    print!("{}", plan.to_script());
    Ok(())
}
