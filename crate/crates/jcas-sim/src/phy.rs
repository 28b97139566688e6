//! OFDM radar and communication link budgets.
//!
//! A single waveform is shared between monostatic sensing and data transfer.
//! The pilot fraction `rho` of the time-frequency grid raises sensing quality;
//! the remaining comm load `1 - rho` carries data. All functions here are pure
//! and closed-form; the environment owns all randomness.

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Physical-layer constants. Defaults reproduce the reference configuration:
/// 5.8 GHz carrier, 100 MHz bandwidth, 20 dBm transmit power, 2 dBi antenna
/// gains, 0 dBsm target cross-section, -90 dBm noise floor, 8 dB processing
/// gain, 1 dB sensing penalty per unit comm load, logistic slope 0.25, pilot
/// density in [0.01, 0.30], path-loss exponent 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyParams {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub rcs_dbsm: f64,
    pub noise_floor_dbm: f64,
    pub proc_gain_db: f64,
    pub jcas_penalty_db_per_load: f64,
    pub logistic_slope: f64,
    pub pilot_min: f64,
    pub pilot_max: f64,
    pub pathloss_exponent: f64,
    /// Detection threshold in dB. `None` derives it so that the detection
    /// probability is 0.5 at `detect_ref_range_m` with zero comm load.
    pub detect_threshold_db: Option<f64>,
    pub detect_ref_range_m: f64,
    /// Range-resolution scale for the sensing penalty. `None` derives
    /// c / (2 * bandwidth).
    pub range_resolution_m: Option<f64>,
    pub ref_spectral_eff_bits_per_s_hz: f64,
    pub comm_edge_snr_db: f64,
    /// Distance floor applied to both sensing and comm ranges; guards the
    /// R = 0 singularity when a UAV occupies a hotspot cell.
    pub min_range_m: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        PhyParams {
            carrier_freq_hz: 5.8e9,
            bandwidth_hz: 100e6,
            tx_power_dbm: 20.0,
            tx_gain_dbi: 2.0,
            rx_gain_dbi: 2.0,
            rcs_dbsm: 0.0,
            noise_floor_dbm: -90.0,
            proc_gain_db: 8.0,
            jcas_penalty_db_per_load: 1.0,
            logistic_slope: 0.25,
            pilot_min: 0.01,
            pilot_max: 0.30,
            pathloss_exponent: 2.0,
            detect_threshold_db: None,
            detect_ref_range_m: 150.0,
            range_resolution_m: None,
            ref_spectral_eff_bits_per_s_hz: 6.0,
            comm_edge_snr_db: 10.0,
            min_range_m: 10.0,
        }
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(SimError::Config(msg));
        if !(self.carrier_freq_hz > 0.0) {
            return err(format!("carrier_freq_hz must be positive, got {}", self.carrier_freq_hz));
        }
        if !(self.bandwidth_hz > 0.0) {
            return err(format!("bandwidth_hz must be positive, got {}", self.bandwidth_hz));
        }
        if !(self.logistic_slope > 0.0) {
            return err(format!("logistic_slope must be positive, got {}", self.logistic_slope));
        }
        if !(self.pilot_min > 0.0 && self.pilot_max < 1.0 && self.pilot_min < self.pilot_max) {
            return err(format!(
                "pilot bounds must satisfy 0 < pilot_min < pilot_max < 1, got [{}, {}]",
                self.pilot_min, self.pilot_max
            ));
        }
        if !(self.min_range_m > 0.0) {
            return err(format!("min_range_m must be positive, got {}", self.min_range_m));
        }
        if !(self.detect_ref_range_m > 0.0) {
            return err(format!(
                "detect_ref_range_m must be positive, got {}",
                self.detect_ref_range_m
            ));
        }
        if let Some(r) = self.range_resolution_m {
            if !(r > 0.0) {
                return err(format!("range_resolution_m must be positive, got {r}"));
            }
        }
        if !(self.ref_spectral_eff_bits_per_s_hz > 0.0) {
            return err(format!(
                "ref_spectral_eff_bits_per_s_hz must be positive, got {}",
                self.ref_spectral_eff_bits_per_s_hz
            ));
        }
        Ok(())
    }
}

/// Resolved link-budget calculator: params plus the derived wavelength, range
/// resolution, and detection threshold.
#[derive(Debug, Clone)]
pub struct Phy {
    pub params: PhyParams,
    pub wavelength_m: f64,
    pub range_resolution_m: f64,
    pub detect_threshold_db: f64,
}

impl Phy {
    pub fn new(params: PhyParams) -> Result<Phy> {
        params.validate()?;
        let wavelength_m = SPEED_OF_LIGHT_M_S / params.carrier_freq_hz;
        let range_resolution_m = params
            .range_resolution_m
            .unwrap_or(SPEED_OF_LIGHT_M_S / (2.0 * params.bandwidth_hz));
        let mut phy = Phy { params, wavelength_m, range_resolution_m, detect_threshold_db: 0.0 };
        phy.detect_threshold_db = match phy.params.detect_threshold_db {
            Some(db) => db,
            // Threshold equals the zero-load sensing SNR at the reference
            // range, putting the logistic midpoint there.
            None => phy.sensing_snr_db(phy.params.detect_ref_range_m)?,
        };
        Ok(phy)
    }

    /// Received monostatic echo power: Pt*Gt*Gr*lambda^2*sigma / ((4pi)^3 R^4).
    pub fn echo_power_w(&self, range_m: f64) -> Result<f64> {
        if !(range_m > 0.0) {
            return Err(SimError::Domain(format!("echo range must be positive, got {range_m}")));
        }
        let pt = dbm_to_watts(self.params.tx_power_dbm);
        let gt = db_to_linear(self.params.tx_gain_dbi);
        let gr = db_to_linear(self.params.rx_gain_dbi);
        let sigma = db_to_linear(self.params.rcs_dbsm);
        let lam2 = self.wavelength_m * self.wavelength_m;
        let r4 = range_m * range_m * range_m * range_m;
        Ok(pt * gt * gr * lam2 * sigma / ((4.0 * std::f64::consts::PI).powi(3) * r4))
    }

    /// Range-resolution penalty: 10*log10(1 + R/dR). Zero as R -> 0, grows
    /// logarithmically so distant cells lose a few dB beyond the R^4 law.
    pub fn resolution_penalty_db(&self, range_m: f64) -> f64 {
        10.0 * (1.0 + range_m / self.range_resolution_m).log10()
    }

    /// Sensing SNR: echo over noise floor plus processing gain minus the
    /// resolution penalty.
    pub fn sensing_snr_db(&self, range_m: f64) -> Result<f64> {
        let echo = self.echo_power_w(range_m)?;
        let noise_w = dbm_to_watts(self.params.noise_floor_dbm);
        Ok(linear_to_db(echo / noise_w) + self.params.proc_gain_db
            - self.resolution_penalty_db(range_m))
    }

    /// Comm load steals pilot resources: each unit of load costs
    /// `jcas_penalty_db_per_load` dB of sensing SNR.
    pub fn effective_sensing_snr_db(&self, snr_db: f64, comm_load: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&comm_load) {
            return Err(SimError::Domain(format!("comm_load must be in [0,1], got {comm_load}")));
        }
        Ok(snr_db - self.params.jcas_penalty_db_per_load * comm_load)
    }

    /// Logistic map from detection margin (effective SNR minus threshold) to
    /// detection probability. Strictly increasing, p(0) = 0.5.
    pub fn detection_probability(&self, margin_db: f64) -> f64 {
        1.0 / (1.0 + (-self.params.logistic_slope * margin_db).exp())
    }

    /// Full sensing chain at a given range and comm load.
    pub fn detection_probability_at(&self, range_m: f64, comm_load: f64) -> Result<f64> {
        let r = range_m.max(self.params.min_range_m);
        let snr = self.sensing_snr_db(r)?;
        let eff = self.effective_sensing_snr_db(snr, comm_load)?;
        Ok(self.detection_probability(eff - self.detect_threshold_db))
    }

    /// Free-space path loss at the 1 m reference distance.
    pub fn pathloss_ref_db(&self) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI / self.wavelength_m).log10()
    }

    /// Log-distance path-loss comm SNR with a 1 m free-space anchor.
    pub fn comm_snr_db(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(SimError::Domain(format!(
                "comm distance must be positive, got {distance_m}"
            )));
        }
        let p = &self.params;
        let pl = self.pathloss_ref_db() + 10.0 * p.pathloss_exponent * distance_m.log10();
        Ok(p.tx_power_dbm + p.tx_gain_dbi + p.rx_gain_dbi - pl - p.noise_floor_dbm)
    }

    /// Shannon spectral efficiency scaled by comm load and normalized by the
    /// reference spectral efficiency. Deliberately unclamped: high-SNR links
    /// report values above 1.
    pub fn normalized_throughput(&self, comm_snr_db: f64, comm_load: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&comm_load));
        let snr_lin = db_to_linear(comm_snr_db);
        comm_load * (1.0 + snr_lin).log2() / self.params.ref_spectral_eff_bits_per_s_hz
    }

    /// Link usability test for the communication graph.
    pub fn comm_edge(&self, distance_m: f64) -> Result<bool> {
        let d = distance_m.max(self.params.min_range_m);
        Ok(self.comm_snr_db(d)? >= self.params.comm_edge_snr_db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phy() -> Phy {
        Phy::new(PhyParams::default()).unwrap()
    }

    // Golden values frozen from an independent double-precision evaluation of
    // the closed forms.
    const ECHO_100M_W: f64 = 3.3818615703707195e-15;
    const SENSING_SNR_100M_DB: f64 = -35.01515068183361;
    const DETECT_THRESHOLD_DB: f64 = -43.79828160392352;
    const PATHLOSS_1M_DB: f64 = 47.716343093142122;
    const COMM_SNR_1M_DB: f64 = 66.283656906857885;
    const WAVELENGTH_M: f64 = 0.051688354827586207;
    const RANGE_RES_M: f64 = 1.4989622899999999;

    #[test]
    fn derived_constants_match_oracle() {
        let p = phy();
        assert!((p.wavelength_m - WAVELENGTH_M).abs() < 1e-15);
        assert!((p.range_resolution_m - RANGE_RES_M).abs() < 1e-12);
        assert!((p.detect_threshold_db - DETECT_THRESHOLD_DB).abs() < 1e-9);
    }

    #[test]
    fn echo_power_matches_oracle_at_100m() {
        let got = phy().echo_power_w(100.0).unwrap();
        assert!(
            (got - ECHO_100M_W).abs() / ECHO_100M_W < 1e-12,
            "echo {got:e} vs oracle {ECHO_100M_W:e}"
        );
    }

    #[test]
    fn echo_power_follows_r4_law() {
        let p = phy();
        let near = p.echo_power_w(73.0).unwrap();
        let far = p.echo_power_w(146.0).unwrap();
        assert!((near / far - 16.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cross_section_reflects_nothing() {
        let mut params = PhyParams::default();
        params.rcs_dbsm = f64::NEG_INFINITY;
        let p = Phy::new(params).unwrap();
        assert_eq!(p.echo_power_w(100.0).unwrap(), 0.0);
    }

    #[test]
    fn echo_power_rejects_nonpositive_range() {
        assert!(matches!(phy().echo_power_w(0.0), Err(SimError::Domain(_))));
        assert!(matches!(phy().echo_power_w(-5.0), Err(SimError::Domain(_))));
    }

    #[test]
    fn sensing_snr_matches_oracle_at_100m() {
        let got = phy().sensing_snr_db(100.0).unwrap();
        assert!((got - SENSING_SNR_100M_DB).abs() < 1e-9, "snr {got} vs {SENSING_SNR_100M_DB}");
    }

    #[test]
    fn range_doubling_costs_12db_before_penalty() {
        // The penalty-free component drops by exactly 40*log10(2) per range
        // doubling; add the penalties back to isolate it.
        let p = phy();
        for r in [25.0, 100.0, 400.0] {
            let a = p.sensing_snr_db(r).unwrap() + p.resolution_penalty_db(r);
            let b = p.sensing_snr_db(2.0 * r).unwrap() + p.resolution_penalty_db(2.0 * r);
            assert!((b - a - (-12.041199826559248)).abs() < 1e-9);
        }
    }

    #[test]
    fn resolution_penalty_is_3db_at_resolution_range() {
        let p = phy();
        let got = p.resolution_penalty_db(p.range_resolution_m);
        assert!((got - 3.0102999566398121).abs() < 1e-12);
    }

    #[test]
    fn effective_snr_subtracts_load_penalty() {
        let p = phy();
        assert_eq!(p.effective_sensing_snr_db(20.0, 0.7).unwrap(), 19.3);
        assert_eq!(p.effective_sensing_snr_db(-3.25, 0.0).unwrap(), -3.25);
        assert_eq!(p.effective_sensing_snr_db(5.0, 1.0).unwrap(), 4.0);
        assert!(matches!(p.effective_sensing_snr_db(5.0, 1.5), Err(SimError::Domain(_))));
        assert!(matches!(p.effective_sensing_snr_db(5.0, -0.1), Err(SimError::Domain(_))));
    }

    #[test]
    fn detection_probability_midpoint_is_exact() {
        assert_eq!(phy().detection_probability(0.0), 0.5);
    }

    #[test]
    fn detection_probability_hits_09_at_derived_margin() {
        // margin = ln(9)/slope puts the logistic at 0.9.
        let got = phy().detection_probability(8.7888983093448783);
        assert!((got - 0.9).abs() < 1e-12);
    }

    #[test]
    fn detection_probability_tail_is_tiny() {
        assert!(phy().detection_probability(-60.0) < 1e-6);
    }

    #[test]
    fn comm_snr_matches_oracle_at_reference() {
        let p = phy();
        assert!((p.pathloss_ref_db() - PATHLOSS_1M_DB).abs() < 1e-9);
        assert!((p.comm_snr_db(1.0).unwrap() - COMM_SNR_1M_DB).abs() < 1e-9);
    }

    #[test]
    fn comm_snr_drops_20db_per_decade() {
        let p = phy();
        let d0 = p.comm_snr_db(1.0).unwrap();
        let d1 = p.comm_snr_db(10.0).unwrap();
        assert!((d0 - d1 - 20.0).abs() < 1e-12);
    }

    #[test]
    fn comm_snr_constant_when_exponent_zero() {
        let mut params = PhyParams::default();
        params.pathloss_exponent = 0.0;
        let p = Phy::new(params).unwrap();
        let a = p.comm_snr_db(1.0).unwrap();
        let b = p.comm_snr_db(5000.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn comm_snr_rejects_nonpositive_distance() {
        assert!(matches!(phy().comm_snr_db(0.0), Err(SimError::Domain(_))));
    }

    #[test]
    fn throughput_is_one_at_reference_efficiency() {
        // snr_lin = 63 gives log2(64) = 6 bits/s/Hz, the reference.
        let p = phy();
        let snr_db = 17.993405494535818;
        assert!((p.normalized_throughput(snr_db, 1.0) - 1.0).abs() < 1e-12);
        assert!((p.normalized_throughput(snr_db, 0.7) - 0.7).abs() < 1e-12);
        assert_eq!(p.normalized_throughput(snr_db, 0.0), 0.0);
    }

    #[test]
    fn comm_edge_threshold_distance_matches_oracle() {
        // SNR crosses the 10 dB edge bar at 651.90 m with default params.
        let p = phy();
        assert!(p.comm_edge(651.0).unwrap());
        assert!(!p.comm_edge(652.0).unwrap());
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = PhyParams::default();
        p.pilot_min = 0.5;
        p.pilot_max = 0.3;
        assert!(matches!(Phy::new(p), Err(SimError::Config(_))));
        let mut p = PhyParams::default();
        p.bandwidth_hz = 0.0;
        assert!(matches!(Phy::new(p), Err(SimError::Config(_))));
        let mut p = PhyParams::default();
        p.min_range_m = 0.0;
        assert!(matches!(Phy::new(p), Err(SimError::Config(_))));
    }

    proptest! {
        #[test]
        fn db_linear_round_trip(db in -120.0..120.0f64) {
            let back = linear_to_db(db_to_linear(db));
            prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
        }

        #[test]
        fn echo_power_scales_as_inverse_fourth(r in 10.0..500.0f64, k in 1.1..8.0f64) {
            let p = phy();
            let base = p.echo_power_w(r).unwrap();
            let scaled = p.echo_power_w(k * r).unwrap();
            prop_assert!((scaled * k.powi(4) / base - 1.0).abs() < 1e-9);
        }

        #[test]
        fn echo_power_strictly_decreasing(r in 10.0..1000.0f64, dr in 0.1..100.0f64) {
            let p = phy();
            prop_assert!(p.echo_power_w(r + dr).unwrap() < p.echo_power_w(r).unwrap());
        }

        #[test]
        fn detection_probability_stays_in_unit_interval(m in -5000.0..5000.0f64) {
            let v = phy().detection_probability(m);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn detection_probability_open_in_moderate_band(m in -120.0..120.0f64) {
            // Beyond roughly +-150 dB of margin the logistic saturates to an
            // exact 0 or 1 in f64, so strict openness only holds mid-band.
            let v = phy().detection_probability(m);
            prop_assert!(v > 0.0 && v < 1.0);
        }

        #[test]
        fn detection_probability_symmetric(m in -80.0..80.0f64) {
            let p = phy();
            prop_assert!((p.detection_probability(m) + p.detection_probability(-m) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn detection_probability_monotone(m in -100.0..100.0f64, d in 0.01..50.0f64) {
            let p = phy();
            prop_assert!(p.detection_probability(m + d) > p.detection_probability(m));
        }

        #[test]
        fn effective_snr_never_exceeds_raw(snr in -80.0..80.0f64, load in 0.0..=1.0f64) {
            let p = phy();
            let eff = p.effective_sensing_snr_db(snr, load).unwrap();
            prop_assert!(eff <= snr);
            if load == 0.0 {
                prop_assert_eq!(eff, snr);
            } else {
                prop_assert!(eff < snr);
            }
        }

        #[test]
        fn throughput_linear_in_load(snr in -20.0..60.0f64, load in 0.0..=1.0f64) {
            let p = phy();
            let full = p.normalized_throughput(snr, 1.0);
            let part = p.normalized_throughput(snr, load);
            prop_assert!((part - load * full).abs() <= 1e-12 * full.abs().max(1.0));
        }
    }
}
