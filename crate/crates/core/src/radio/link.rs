use serde::{Deserialize, Serialize};

/// Geometry-derived state of one UE–cell link for one drop.
///
/// `shadow_db` is drawn once per link per drop. `sinr_db` and
/// `interference_dbm` are refreshed every TTI by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub distance_m: f64,
    pub path_loss_db: f64,
    pub shadow_db: f64,
    pub body_loss_db: f64,
    pub antenna_gain_db: f64,
    pub ue_antenna_gain_db: f64,
    pub coupling_loss_db: f64,
    pub sinr_db: f64,
    pub interference_dbm: f64,
}

impl LinkState {
    pub fn new(
        distance_m: f64,
        path_loss_db: f64,
        shadow_db: f64,
        body_loss_db: f64,
        antenna_gain_db: f64,
        ue_antenna_gain_db: f64,
    ) -> Self {
        let coupling_loss_db =
            composed_coupling_loss(path_loss_db, shadow_db, body_loss_db, antenna_gain_db, ue_antenna_gain_db);
        Self {
            distance_m,
            path_loss_db,
            shadow_db,
            body_loss_db,
            antenna_gain_db,
            ue_antenna_gain_db,
            coupling_loss_db,
            sinr_db: f64::NAN,
            interference_dbm: f64::NEG_INFINITY,
        }
    }

    /// A link pinned to a given coupling loss, for single-link studies.
    /// All of the loss is booked as path loss so the composition still holds.
    pub fn with_coupling_loss(coupling_loss_db: f64) -> Self {
        Self::new(f64::NAN, coupling_loss_db, 0.0, 0.0, 0.0, 0.0)
    }

    /// True when the stored coupling loss equals the composition of its parts.
    pub fn composition_holds(&self) -> bool {
        self.coupling_loss_db
            == composed_coupling_loss(
                self.path_loss_db,
                self.shadow_db,
                self.body_loss_db,
                self.antenna_gain_db,
                self.ue_antenna_gain_db,
            )
    }
}

fn composed_coupling_loss(pl: f64, shadow: f64, body: f64, gain: f64, ue_gain: f64) -> f64 {
    pl + shadow + body - gain - ue_gain
}
