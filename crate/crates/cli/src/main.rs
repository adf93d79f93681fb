// SPDX-License-Identifier: Apache-2.0

use clap::Parser;

use etconsensus_cli::{execute, Cli};

fn main() {
    std::process::exit(execute(&Cli::parse()));
}
