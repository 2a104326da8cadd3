//! Narrowband placement against the legacy RBG grid.
//!
//! Any RBG that a narrowband touches is lost to the legacy scheduler, so the
//! waste of a placement is the total size of the RBGs it intersects.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{BandwidthProfile, NARROWBAND_PRBS};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrowbandPlan {
    pub nb_index: usize,
    pub prb_range: Range<u16>,
    pub blocked_rbgs: Vec<usize>,
    pub wasted_prbs: u16,
}

/// Every narrowband position of `profile` with its RBG waste.
pub fn enumerate_narrowbands(profile: &BandwidthProfile) -> Result<Vec<NarrowbandPlan>> {
    profile.validate()?;
    let rbgs = profile.rbg_layout();
    Ok(profile
        .narrowband_starts
        .iter()
        .enumerate()
        .map(|(nb_index, &start)| {
            let prb_range = start..start + NARROWBAND_PRBS;
            let blocked_rbgs: Vec<usize> = rbgs
                .iter()
                .enumerate()
                .filter(|(_, r)| r.start < prb_range.end && prb_range.start < r.end)
                .map(|(i, _)| i)
                .collect();
            let wasted_prbs = blocked_rbgs.iter().map(|&i| rbgs[i].end - rbgs[i].start).sum();
            NarrowbandPlan { nb_index, prb_range, blocked_rbgs, wasted_prbs }
        })
        .collect())
}

/// The narrowband wasting the fewest legacy PRBs; ties go to the highest index.
pub fn choose_narrowband(profile: &BandwidthProfile) -> Result<NarrowbandPlan> {
    let plans = enumerate_narrowbands(profile)?;
    Ok(plans
        .into_iter()
        .min_by(|a, b| a.wasted_prbs.cmp(&b.wasted_prbs).then(b.nb_index.cmp(&a.nb_index)))
        .expect("validated profile has at least one narrowband"))
}
