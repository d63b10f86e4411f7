//! Link budget: blockage-dependent log-distance pathloss, ideal sectored
//! antennas, beam alignment overhead, SINR and slot rate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Pathloss exponent and intercept for one blocker count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossEntry {
    pub exponent: f64,
    pub intercept_db: f64,
}

/// Blocker-indexed pathloss table; counts beyond the last entry saturate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams {
    pub table: Vec<PathlossEntry>,
    pub building_penalty_db: f64,
}

impl PathlossParams {
    /// LOS entry plus `max_blockers` entries, each adding the given steps.
    pub fn stepped(
        los_exponent: f64,
        los_intercept_db: f64,
        exponent_step: f64,
        intercept_step_db: f64,
        max_blockers: usize,
        building_penalty_db: f64,
    ) -> Self {
        let table = (0..=max_blockers)
            .map(|n| PathlossEntry {
                exponent: los_exponent + exponent_step * n as f64,
                intercept_db: los_intercept_db + intercept_step_db * n as f64,
            })
            .collect();
        PathlossParams {
            table,
            building_penalty_db,
        }
    }

    pub fn entry(&self, blockers: usize) -> PathlossEntry {
        self.table[blockers.min(self.table.len() - 1)]
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.table.is_empty() {
            return Err("pathloss table is empty".into());
        }
        if self
            .table
            .windows(2)
            .any(|w| w[1].exponent < w[0].exponent || w[1].intercept_db < w[0].intercept_db)
        {
            return Err("pathloss exponent and intercept must be non-decreasing in blocker count".into());
        }
        if !(self.building_penalty_db >= 0.0) {
            return Err("building penalty must be >= 0 dB".into());
        }
        Ok(())
    }
}

impl Default for PathlossParams {
    fn default() -> Self {
        PathlossParams::stepped(2.66, 68.6, 0.35, 4.0, 2, 400.0)
    }
}

/// Beamwidths, sector widths (radians), sidelobe gain and pilot duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    pub beamwidth_tx: f64,
    pub beamwidth_rx: f64,
    pub sidelobe_gain: f64,
    pub sector_tx: f64,
    pub sector_rx: f64,
    pub pilot_duration: f64,
}

impl AntennaConfig {
    /// Same beamwidth on both ends with the default 45° sectors and 20 µs pilots.
    pub fn symmetric(beamwidth: f64) -> Self {
        AntennaConfig {
            beamwidth_tx: beamwidth,
            beamwidth_rx: beamwidth,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, phi, psi) in [
            ("tx", self.beamwidth_tx, self.sector_tx),
            ("rx", self.beamwidth_rx, self.sector_rx),
        ] {
            if !(phi > 0.0 && phi <= psi && psi <= 2.0 * PI) {
                return Err(format!("{name}: need 0 < beamwidth <= sector <= 2π (got {phi}, {psi})"));
            }
        }
        if !(0.0..1.0).contains(&self.sidelobe_gain) {
            return Err(format!("sidelobe gain must be in [0, 1), got {}", self.sidelobe_gain));
        }
        if !(self.pilot_duration >= 0.0) {
            return Err("pilot duration must be >= 0".into());
        }
        Ok(())
    }
}

impl Default for AntennaConfig {
    fn default() -> Self {
        let deg45 = PI / 4.0;
        AntennaConfig {
            beamwidth_tx: deg45,
            beamwidth_rx: deg45,
            sidelobe_gain: 0.01,
            sector_tx: deg45,
            sector_rx: deg45,
            pilot_duration: 20e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub tx_power_dbm: f64,
    /// Transmission slot duration, seconds.
    pub slot: f64,
}

impl RadioConfig {
    /// Noise power N0·B in milliwatts.
    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm_per_hz) * self.bandwidth_hz
    }

    pub fn tx_power_mw(&self) -> f64 {
        dbm_to_mw(self.tx_power_dbm)
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            bandwidth_hz: 2.16e9,
            noise_dbm_per_hz: -174.0,
            tx_power_dbm: 15.0,
            slot: 2e-3,
        }
    }
}

/// Geometric state of an ordered (vTx, vRx) link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub distance: f64,
    pub blockers: usize,
    pub building_blocked: bool,
    pub align_error_tx: f64,
    pub align_error_rx: f64,
}

/// One contribution to received power: transmit power and the three gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain {
    pub tx_power_mw: f64,
    pub antenna_tx: f64,
    pub channel: f64,
    pub antenna_rx: f64,
}

impl PathGain {
    pub fn received_mw(&self) -> f64 {
        self.tx_power_mw * self.antenna_tx * self.channel * self.antenna_rx
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Pathloss in dB including the 15 dB/km oxygen absorption term.
pub fn pathloss_db(geom: &LinkGeometry, params: &PathlossParams) -> f64 {
    let e = params.entry(geom.blockers);
    let s = geom.distance;
    let mut pl = 10.0 * e.exponent * s.log10() + e.intercept_db + 15.0 * s / 1000.0;
    if geom.building_blocked {
        pl += params.building_penalty_db;
    }
    pl
}

/// Linear channel attenuation `10^(-PL/10)`.
pub fn channel_gain(geom: &LinkGeometry, params: &PathlossParams) -> f64 {
    db_to_linear(-pathloss_db(geom, params))
}

/// Mainlobe gain of an ideal sectored pattern of width `beamwidth`.
pub fn mainlobe_gain(beamwidth: f64, sidelobe: f64) -> f64 {
    (2.0 * PI - (2.0 * PI - beamwidth) * sidelobe) / beamwidth
}

/// Gain of an ideal sectored antenna at alignment error `align_error`.
pub fn antenna_gain(beamwidth: f64, sidelobe: f64, align_error: f64) -> f64 {
    if align_error.abs() <= 0.5 * beamwidth {
        mainlobe_gain(beamwidth, sidelobe)
    } else {
        sidelobe
    }
}

/// Two-stage beam search duration `ψtx·ψrx·Tp / (φtx·φrx)`.
pub fn alignment_delay(cfg: &AntennaConfig) -> f64 {
    cfg.sector_tx * cfg.sector_rx * cfg.pilot_duration / (cfg.beamwidth_tx * cfg.beamwidth_rx)
}

/// Full path gain of a link from its geometry.
pub fn path_gain(
    geom: &LinkGeometry,
    antenna: &AntennaConfig,
    pathloss: &PathlossParams,
    tx_power_mw: f64,
) -> PathGain {
    PathGain {
        tx_power_mw,
        antenna_tx: antenna_gain(antenna.beamwidth_tx, antenna.sidelobe_gain, geom.align_error_tx),
        channel: channel_gain(geom, pathloss),
        antenna_rx: antenna_gain(antenna.beamwidth_rx, antenna.sidelobe_gain, geom.align_error_rx),
    }
}

/// Signal-to-interference-plus-noise ratio (linear).
pub fn sinr<'a, I>(target: &PathGain, interferers: I, radio: &RadioConfig) -> f64
where
    I: IntoIterator<Item = &'a PathGain>,
{
    let interference: f64 = interferers.into_iter().map(PathGain::received_mw).sum();
    target.received_mw() / (interference + radio.noise_mw())
}

/// Achievable rate over one slot in bits/s. When `charge_alignment` is set
/// the alignment time `tau` is removed from the slot.
pub fn slot_rate(sinr: f64, tau: f64, radio: &RadioConfig, charge_alignment: bool) -> f64 {
    let shannon = radio.bandwidth_hz * (1.0 + sinr).log2();
    if charge_alignment {
        (1.0 - tau / radio.slot).max(0.0) * shannon
    } else {
        shannon
    }
}

/// Rate of a perfectly aligned link with no interference.
pub fn ideal_rate(
    distance: f64,
    blockers: usize,
    building_blocked: bool,
    antenna: &AntennaConfig,
    pathloss: &PathlossParams,
    radio: &RadioConfig,
) -> f64 {
    let geom = LinkGeometry {
        distance,
        blockers,
        building_blocked,
        align_error_tx: 0.0,
        align_error_rx: 0.0,
    };
    let target = path_gain(&geom, antenna, pathloss, radio.tx_power_mw());
    slot_rate(sinr(&target, [], radio), 0.0, radio, false)
}
