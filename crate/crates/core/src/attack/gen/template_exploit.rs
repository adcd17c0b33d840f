//! Template-driven replay shared by every recorded-exchange attack.

use crate::attack::plan::complementary_rate_plan;
use crate::attack::template::{load_template, rewrite_template};
use crate::attack::{AttackError, AttackParams, GeneratedAttack};
use crate::stats::StatsDb;

use super::assemble;

pub fn generate(params: &AttackParams, db: &StatsDb) -> Result<GeneratedAttack, AttackError> {
    let tpl = load_template(params.path("template"))?;
    let plan = complementary_rate_plan(
        db,
        params.start_time,
        tpl.packets.len(),
        params.intensity,
        params.seed,
    );
    let packets = rewrite_template(&tpl, params, db, &plan.timestamps)?;
    Ok(assemble(params, packets))
}
