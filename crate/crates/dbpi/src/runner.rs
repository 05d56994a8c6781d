//! Parallel replicate runner for the linear simulation study.

use crate::Result;
use dbpi_core::popframe::SimulationConfig;
use dbpi_core::srb::{Table1Plan, Table1Row};
use rayon::prelude::*;

/// Same rows as the sequential runner, bit for bit: every replicate owns its
/// seed and results are summarized in replicate order.
pub fn run_table1_parallel(cfg: &SimulationConfig) -> Result<Vec<Table1Row>> {
    let plan = Table1Plan::new(cfg)?;
    (0..plan.rows())
        .map(|row| {
            let outcomes = (0..cfg.replicates)
                .into_par_iter()
                .map(|rep| plan.replicate(row, rep))
                .collect::<dbpi_core::Result<Vec<_>>>()?;
            Ok(plan.summarize(row, &outcomes))
        })
        .collect()
}
