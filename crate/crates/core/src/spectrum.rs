//! Channelised power model: raised-cosine emitters, per-channel band powers,
//! SINR at the user's receiver and at the jammer's sensor, and the sensed
//! spectrum frames that make up the user's waterfall state.
//!
//! All powers are handled in watts internally; configuration is in dBm / dB.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Channel;

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("invalid channel plan: {0}")]
    InvalidPlan(String),
    #[error("invalid emitter: {0}")]
    InvalidEmitter(String),
    #[error("channel {channel} out of range 1..={num_channels}")]
    ChannelOutOfRange { channel: usize, num_channels: usize },
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Band layout: `N` equal channels between `f_start` and `f_end`, analysed at
/// resolution `resolution` (which must tile a channel exactly).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    f_start: f64,
    f_end: f64,
    num_channels: usize,
    resolution: f64,
}

impl ChannelPlan {
    pub fn new(
        f_start: f64,
        f_end: f64,
        num_channels: usize,
        resolution: f64,
    ) -> Result<Self, SpectrumError> {
        if !(f_start.is_finite() && f_end.is_finite()) || f_end <= f_start {
            return Err(SpectrumError::InvalidPlan(format!(
                "f_end ({f_end}) must exceed f_start ({f_start})"
            )));
        }
        if num_channels == 0 || num_channels > u16::MAX as usize {
            return Err(SpectrumError::InvalidPlan(format!(
                "channel count {num_channels} out of range"
            )));
        }
        let width = (f_end - f_start) / num_channels as f64;
        if !(resolution > 0.0 && resolution <= width) {
            return Err(SpectrumError::InvalidPlan(format!(
                "resolution {resolution} must be in (0, {width}]"
            )));
        }
        let bins = width / resolution;
        if (bins - bins.round()).abs() > 1e-9 * bins.max(1.0) {
            return Err(SpectrumError::InvalidPlan(format!(
                "resolution {resolution} does not divide channel width {width}"
            )));
        }
        Ok(Self { f_start, f_end, num_channels, resolution })
    }

    pub fn f_start(&self) -> f64 {
        self.f_start
    }

    pub fn f_end(&self) -> f64 {
        self.f_end
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Channel width `b`.
    pub fn width(&self) -> f64 {
        (self.f_end - self.f_start) / self.num_channels as f64
    }

    pub fn bins_per_channel(&self) -> usize {
        (self.width() / self.resolution).round() as usize
    }

    pub fn channel(&self, number: usize) -> Result<Channel, SpectrumError> {
        Channel::new(number, self.num_channels).ok_or(SpectrumError::ChannelOutOfRange {
            channel: number,
            num_channels: self.num_channels,
        })
    }

    pub fn channels(&self) -> impl Iterator<Item = Channel> {
        (0..self.num_channels).map(Channel::from_index)
    }

    pub fn contains(&self, ch: Channel) -> bool {
        ch.number() <= self.num_channels
    }

    /// Lower and upper band edge of a channel.
    pub fn edges(&self, ch: Channel) -> (f64, f64) {
        let b = self.width();
        let lo = self.f_start + ch.index() as f64 * b;
        (lo, lo + b)
    }

    pub fn center(&self, ch: Channel) -> f64 {
        self.f_start + (ch.number() as f64 - 0.5) * self.width()
    }

    fn check(&self, ch: Channel) -> Result<(), SpectrumError> {
        if self.contains(ch) {
            Ok(())
        } else {
            Err(SpectrumError::ChannelOutOfRange {
                channel: ch.number(),
                num_channels: self.num_channels,
            })
        }
    }
}

/// Baseband raised-cosine power spectral density, normalised to unit total
/// power, for symbol bandwidth `bandwidth` and roll-off `rolloff`.
pub fn raised_cosine_psd(f: f64, bandwidth: f64, rolloff: f64) -> f64 {
    let a = f.abs();
    let f1 = (1.0 - rolloff) * bandwidth / 2.0;
    let f2 = (1.0 + rolloff) * bandwidth / 2.0;
    if a <= f1 {
        1.0 / bandwidth
    } else if a < f2 {
        let phase = std::f64::consts::PI / (rolloff * bandwidth) * (a - f1);
        (1.0 + phase.cos()) / (2.0 * bandwidth)
    } else {
        0.0
    }
}

/// Closed-form integral of [`raised_cosine_psd`] from `-inf` to `x`.
pub fn raised_cosine_cdf(x: f64, bandwidth: f64, rolloff: f64) -> f64 {
    let a = x.abs();
    let f1 = (1.0 - rolloff) * bandwidth / 2.0;
    let f2 = (1.0 + rolloff) * bandwidth / 2.0;
    let half = if a <= f1 {
        a / bandwidth
    } else if a < f2 {
        let w = rolloff * bandwidth;
        let u = a - f1;
        let s = (std::f64::consts::PI * u / w).sin();
        f1 / bandwidth + (u + w / std::f64::consts::PI * s) / (2.0 * bandwidth)
    } else {
        0.5
    };
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitterRole {
    User,
    Jammer,
    Environment,
}

/// A raised-cosine emitter: total power, roll-off and symbol bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterSpec {
    pub role: EmitterRole,
    pub power_dbm: f64,
    pub rolloff: f64,
    pub symbol_bandwidth: f64,
}

impl EmitterSpec {
    /// An emitter whose symbol bandwidth equals the plan's channel width.
    pub fn new(
        role: EmitterRole,
        power_dbm: f64,
        rolloff: f64,
        plan: &ChannelPlan,
    ) -> Result<Self, SpectrumError> {
        if !power_dbm.is_finite() {
            return Err(SpectrumError::InvalidEmitter(format!("power {power_dbm} dBm")));
        }
        if !(0.0..=1.0).contains(&rolloff) {
            return Err(SpectrumError::InvalidEmitter(format!(
                "roll-off {rolloff} outside [0, 1]"
            )));
        }
        Ok(Self { role, power_dbm, rolloff, symbol_bandwidth: plan.width() })
    }

    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }

    pub fn occupied_bandwidth(&self) -> f64 {
        (1.0 + self.rolloff) * self.symbol_bandwidth
    }

    /// Fraction of total power landing in a channel `offset` channels away
    /// from the emitter's own, for channel width `width`.
    pub fn offset_fraction(&self, offset: i64, width: f64) -> f64 {
        let center = offset as f64 * width;
        let hi = raised_cosine_cdf(center + width / 2.0, self.symbol_bandwidth, self.rolloff);
        let lo = raised_cosine_cdf(center - width / 2.0, self.symbol_bandwidth, self.rolloff);
        (hi - lo).max(0.0)
    }
}

/// Fraction of an emitter's power (tuned to `emitter_channel`) that falls
/// inside `target_channel`. Power leaking past the band edges is lost.
pub fn channel_power_fraction(
    emitter_channel: Channel,
    target_channel: Channel,
    spec: &EmitterSpec,
    plan: &ChannelPlan,
) -> Result<f64, SpectrumError> {
    plan.check(emitter_channel)?;
    plan.check(target_channel)?;
    Ok(spec.offset_fraction(target_channel.offset_from(emitter_channel), plan.width()))
}

/// Path gains in dB for the five links of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkGains {
    /// transmitter -> receiver
    pub tr_db: f64,
    /// transmitter -> jammer sensor
    pub tj_db: f64,
    /// jammer -> receiver
    pub jr_db: f64,
    /// environment -> jammer sensor
    pub ej_db: f64,
    /// environment -> receiver
    pub er_db: f64,
}

impl Default for LinkGains {
    fn default() -> Self {
        Self { tr_db: -60.0, tj_db: -80.0, jr_db: -70.0, ej_db: -50.0, er_db: -100.0 }
    }
}

impl LinkGains {
    pub fn is_finite(&self) -> bool {
        [self.tr_db, self.tj_db, self.jr_db, self.ej_db, self.er_db]
            .iter()
            .all(|g| g.is_finite())
    }
}

/// Flat thermal noise density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub psd_dbm_per_hz: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { psd_dbm_per_hz: -140.0 }
    }
}

impl NoiseModel {
    /// Noise power integrated over one channel, in watts.
    pub fn channel_power(&self, plan: &ChannelPlan) -> f64 {
        dbm_to_watts(self.psd_dbm_per_hz) * plan.width()
    }
}

/// An emitter tuned to a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub channel: Channel,
    pub emitter: EmitterSpec,
}

impl Transmission {
    pub fn new(channel: Channel, emitter: EmitterSpec) -> Self {
        Self { channel, emitter }
    }

    /// Watts this transmission puts into `target` before path gain.
    fn power_in(&self, target: Channel, width: f64) -> f64 {
        self.emitter.power_watts()
            * self.emitter.offset_fraction(target.offset_from(self.channel), width)
    }
}

/// One sensed spectrum vector: per-channel received power in dBm.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFrame {
    pub samples_dbm: Vec<f64>,
    pub timestamp: u64,
}

impl SpectrumFrame {
    pub fn len(&self) -> usize {
        self.samples_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples_dbm.is_empty()
    }
}

/// The static physical layer of a scenario: band plan, link gains and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioModel {
    pub plan: ChannelPlan,
    pub gains: LinkGains,
    pub noise: NoiseModel,
}

impl RadioModel {
    pub fn new(plan: ChannelPlan, gains: LinkGains, noise: NoiseModel) -> Self {
        Self { plan, gains, noise }
    }

    pub fn noise_per_channel(&self) -> f64 {
        self.noise.channel_power(&self.plan)
    }

    fn check(&self, tx: &Transmission) -> Result<(), SpectrumError> {
        self.plan.check(tx.channel)
    }

    /// Linear SINR at the user's receiver: the full received user power over
    /// noise plus jammer and environment power inside the user's channel.
    pub fn user_sinr(
        &self,
        user: &Transmission,
        jammer: Option<&Transmission>,
        env: &[Transmission],
    ) -> Result<f64, SpectrumError> {
        self.check(user)?;
        let b = self.plan.width();
        let ch = user.channel;
        let mut denom = self.noise_per_channel();
        if let Some(j) = jammer {
            self.check(j)?;
            denom += db_to_linear(self.gains.jr_db) * j.power_in(ch, b);
        }
        for e in env {
            self.check(e)?;
            denom += db_to_linear(self.gains.er_db) * e.power_in(ch, b);
        }
        Ok(db_to_linear(self.gains.tr_db) * user.emitter.power_watts() / denom)
    }

    /// Per-channel linear SINR of the user's signal as seen by the jammer's
    /// sensor. With `self_jamming` the jammer's own emission (through the
    /// jammer->receiver gain) is added to every channel's interference.
    pub fn jammer_sensed_sinr(
        &self,
        user: Option<&Transmission>,
        env: &[Transmission],
        self_jamming: bool,
        jam: Option<&Transmission>,
    ) -> Result<Vec<f64>, SpectrumError> {
        let b = self.plan.width();
        let noise = self.noise_per_channel();
        let g_tj = db_to_linear(self.gains.tj_db);
        let g_ej = db_to_linear(self.gains.ej_db);
        let g_jr = db_to_linear(self.gains.jr_db);
        if let Some(u) = user {
            self.check(u)?;
        }
        for e in env {
            self.check(e)?;
        }
        if let Some(j) = jam {
            self.check(j)?;
        }
        Ok(self
            .plan
            .channels()
            .map(|n| {
                let Some(u) = user else { return 0.0 };
                let mut denom = noise;
                for e in env {
                    denom += g_ej * e.power_in(n, b);
                }
                if self_jamming {
                    if let Some(j) = jam {
                        denom += g_jr * j.power_in(n, b);
                    }
                }
                g_tj * u.power_in(n, b) / denom
            })
            .collect())
    }

    /// Total received power per channel at the user's receiver, in watts.
    pub fn received_power(
        &self,
        user: Option<&Transmission>,
        jammer: Option<&Transmission>,
        env: &[Transmission],
    ) -> Result<Vec<f64>, SpectrumError> {
        let b = self.plan.width();
        let noise = self.noise_per_channel();
        let g_tr = db_to_linear(self.gains.tr_db);
        let g_jr = db_to_linear(self.gains.jr_db);
        let g_er = db_to_linear(self.gains.er_db);
        for tx in user.iter().chain(jammer.iter()).copied().chain(env.iter()) {
            self.check(tx)?;
        }
        Ok(self
            .plan
            .channels()
            .map(|n| {
                let mut p = noise;
                if let Some(u) = user {
                    p += g_tr * u.power_in(n, b);
                }
                if let Some(j) = jammer {
                    p += g_jr * j.power_in(n, b);
                }
                for e in env {
                    p += g_er * e.power_in(n, b);
                }
                p
            })
            .collect())
    }

    /// Per-channel received spectrum in dBm, one sample per channel.
    pub fn receiver_spectrum_frame(
        &self,
        user: Option<&Transmission>,
        jammer: Option<&Transmission>,
        env: &[Transmission],
        timestamp: u64,
    ) -> Result<SpectrumFrame, SpectrumError> {
        let samples_dbm = self
            .received_power(user, jammer, env)?
            .into_iter()
            .map(watts_to_dbm)
            .collect();
        Ok(SpectrumFrame { samples_dbm, timestamp })
    }

    /// Watts the user's own emission contributes to each channel at its
    /// receiver. The user knows this, so it can subtract it from a frame.
    pub fn own_contribution(&self, user: &Transmission) -> Vec<f64> {
        let b = self.plan.width();
        let g_tr = db_to_linear(self.gains.tr_db);
        self.plan.channels().map(|n| g_tr * user.power_in(n, b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> ChannelPlan {
        ChannelPlan::new(2.400e9, 2.410e9, 10, 1e3).unwrap()
    }

    fn emitter(role: EmitterRole, dbm: f64) -> EmitterSpec {
        EmitterSpec::new(role, dbm, 0.5, &plan()).unwrap()
    }

    fn ch(n: usize) -> Channel {
        plan().channel(n).unwrap()
    }

    /// Trapezoid quadrature of the raised-cosine PSD over one channel.
    fn quadrature_fraction(offset: i64, rolloff: f64) -> f64 {
        let p = plan();
        let b = p.width();
        let steps = p.bins_per_channel();
        let h = p.resolution();
        let lo = offset as f64 * b - b / 2.0;
        let mut sum = 0.0;
        for k in 0..=steps {
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            sum += w * raised_cosine_psd(lo + k as f64 * h, b, rolloff);
        }
        sum * h
    }

    #[test]
    fn plan_validation() {
        assert!(ChannelPlan::new(1.0, 1.0, 10, 1.0).is_err());
        assert!(ChannelPlan::new(0.0, 10e6, 0, 1e3).is_err());
        assert!(ChannelPlan::new(0.0, 10e6, 10, 3e3).is_err());
        let p = plan();
        assert_eq!(p.width(), 1e6);
        assert_eq!(p.bins_per_channel(), 1000);
        assert_eq!(p.center(ch(1)), 2.4005e9);
        assert_eq!(p.edges(ch(10)), (2.409e9, 2.410e9));
    }

    #[test]
    fn emitter_validation() {
        assert!(EmitterSpec::new(EmitterRole::User, 30.0, 1.5, &plan()).is_err());
        assert!(EmitterSpec::new(EmitterRole::User, f64::NAN, 0.5, &plan()).is_err());
        let e = emitter(EmitterRole::User, 30.0);
        assert!((e.power_watts() - 1.0).abs() < 1e-12);
        assert!(e.occupied_bandwidth() <= 3.0 * plan().width());
    }

    #[test]
    fn fractions_match_quadrature_oracle() {
        // Frozen oracle values: trapezoid at 1 kHz over the piecewise spectrum.
        let same = quadrature_fraction(0, 0.5);
        let adjacent = quadrature_fraction(1, 0.5);
        assert!((same - 0.909155).abs() < 1e-5, "{same}");
        assert!((adjacent - 0.045423).abs() < 1e-5, "{adjacent}");

        let e = emitter(EmitterRole::User, 30.0);
        let p = plan();
        let f0 = channel_power_fraction(ch(5), ch(5), &e, &p).unwrap();
        let f1 = channel_power_fraction(ch(5), ch(6), &e, &p).unwrap();
        let f2 = channel_power_fraction(ch(5), ch(7), &e, &p).unwrap();
        assert!((f0 - same).abs() < 1e-6);
        assert!((f1 - adjacent).abs() < 1e-6);
        assert_eq!(f2, 0.0);
        assert_eq!(channel_power_fraction(ch(5), ch(1), &e, &p).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_agrees_across_rolloffs() {
        let p = plan();
        // beta = 0 is a brick wall; the trapezoid rule is not an oracle for it.
        // The 1 kHz trapezoid grid is itself only good to a few 1e-6 when the
        // roll-off region is narrow.
        for &beta in &[0.1, 0.25, 0.5, 0.75, 1.0] {
            let e = EmitterSpec::new(EmitterRole::Jammer, 40.0, beta, &p).unwrap();
            for off in -2..=2 {
                let closed = e.offset_fraction(off, p.width());
                let quad = quadrature_fraction(off, beta);
                assert!((closed - quad).abs() < 5e-6, "beta={beta} off={off} {closed} {quad}");
            }
        }
    }

    #[test]
    fn interior_power_is_conserved() {
        let p = plan();
        for &beta in &[0.0, 0.2, 0.35, 0.5] {
            let e = EmitterSpec::new(EmitterRole::User, 30.0, beta, &p).unwrap();
            for i in 2..=9 {
                let total: f64 = [i - 1, i, i + 1]
                    .iter()
                    .map(|&t| channel_power_fraction(ch(i), ch(t), &e, &p).unwrap())
                    .sum();
                assert!((total - 1.0).abs() < 1e-6, "beta={beta} i={i}");
                let left = channel_power_fraction(ch(i), ch(i - 1), &e, &p).unwrap();
                let right = channel_power_fraction(ch(i), ch(i + 1), &e, &p).unwrap();
                assert!((left - right).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brick_wall_stays_in_channel() {
        let p = plan();
        let e = EmitterSpec::new(EmitterRole::User, 30.0, 0.0, &p).unwrap();
        assert!((e.offset_fraction(0, p.width()) - 1.0).abs() < 1e-12);
        assert_eq!(e.offset_fraction(1, p.width()), 0.0);
    }

    #[test]
    fn fraction_rejects_bad_channel() {
        let e = emitter(EmitterRole::User, 30.0);
        let p = plan();
        let outside = Channel::from_index(10);
        assert_eq!(
            channel_power_fraction(outside, ch(1), &e, &p),
            Err(SpectrumError::ChannelOutOfRange { channel: 11, num_channels: 10 })
        );
    }

    #[test]
    fn edge_channel_loses_out_of_band_power() {
        let e = emitter(EmitterRole::User, 30.0);
        let p = plan();
        let total: f64 = p
            .channels()
            .map(|n| channel_power_fraction(ch(1), n, &e, &p).unwrap())
            .sum();
        assert!((total - (1.0 - e.offset_fraction(-1, p.width()))).abs() < 1e-12);
    }

    fn unit_model(noise_dbm_in_channel: f64) -> RadioModel {
        let p = plan();
        let gains = LinkGains { tr_db: 0.0, tj_db: 0.0, jr_db: 0.0, ej_db: 0.0, er_db: 0.0 };
        let noise = NoiseModel { psd_dbm_per_hz: noise_dbm_in_channel - 60.0 };
        RadioModel::new(p, gains, noise)
    }

    #[test]
    fn user_sinr_without_interference() {
        let m = unit_model(0.0);
        let user = Transmission::new(ch(3), emitter(EmitterRole::User, 30.0));
        let sinr = m.user_sinr(&user, None, &[]).unwrap();
        assert!((sinr - 1e3).abs() < 1e-6);
    }

    #[test]
    fn user_sinr_co_channel_jammer() {
        let m = unit_model(-200.0);
        let user = Transmission::new(ch(3), emitter(EmitterRole::User, 30.0));
        let jam = Transmission::new(ch(3), emitter(EmitterRole::Jammer, 40.0));
        let sinr = m.user_sinr(&user, Some(&jam), &[]).unwrap();
        let expected = 1.0 / (10.0 * 0.909155);
        assert!((sinr - expected).abs() < 1e-5, "{sinr}");
        assert!((sinr - 0.11).abs() < 0.001);
    }

    #[test]
    fn distant_jammer_does_not_matter() {
        let m = unit_model(0.0);
        let user = Transmission::new(ch(3), emitter(EmitterRole::User, 30.0));
        let jam = Transmission::new(ch(5), emitter(EmitterRole::Jammer, 40.0));
        assert_eq!(
            m.user_sinr(&user, Some(&jam), &[]).unwrap(),
            m.user_sinr(&user, None, &[]).unwrap()
        );
    }

    #[test]
    fn sensed_sinr_peaks_at_user_channel() {
        let m = unit_model(-60.0);
        let user = Transmission::new(ch(3), emitter(EmitterRole::User, 30.0));
        let v = m.jammer_sensed_sinr(Some(&user), &[], false, None).unwrap();
        assert_eq!(crate::channel::argmax(&v), Some(2));
        assert!(v.iter().all(|&x| x >= 0.0));
        let absent = m.jammer_sensed_sinr(None, &[], false, None).unwrap();
        assert!(absent.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn environment_masks_sensing() {
        // Noise 0 dBm in-channel; environment arriving 30 dB above it.
        let p = plan();
        let gains = LinkGains { tr_db: 0.0, tj_db: 0.0, jr_db: 0.0, ej_db: 30.0, er_db: 0.0 };
        let noise = NoiseModel { psd_dbm_per_hz: -60.0 };
        let m = RadioModel::new(p, gains, noise);
        let user = Transmission::new(ch(4), emitter(EmitterRole::User, 30.0));
        let env = Transmission::new(ch(4), EmitterSpec::new(EmitterRole::Environment, 0.0, 0.5, &p).unwrap());
        let clear = m.jammer_sensed_sinr(Some(&user), &[], false, None).unwrap();
        let masked = m.jammer_sensed_sinr(Some(&user), &[env], false, None).unwrap();
        // Denominator goes from 1 mW to 1 mW + 1 W * 0.909.
        let expected_drop = linear_to_db(1.0 + 1e3 * 0.909155);
        let drop = linear_to_db(clear[3] / masked[3]);
        assert!((drop - expected_drop).abs() < 1e-3, "{drop}");
        assert!((drop - 30.0).abs() < 0.5);
    }

    #[test]
    fn self_jamming_flag_adds_interference() {
        let m = unit_model(-60.0);
        let user = Transmission::new(ch(4), emitter(EmitterRole::User, 30.0));
        let jam = Transmission::new(ch(4), emitter(EmitterRole::Jammer, 40.0));
        let off = m.jammer_sensed_sinr(Some(&user), &[], false, Some(&jam)).unwrap();
        let on = m.jammer_sensed_sinr(Some(&user), &[], true, Some(&jam)).unwrap();
        assert!(on[3] < off[3]);
        assert_eq!(on[0], off[0]);
    }

    #[test]
    fn frame_shapes() {
        let m = unit_model(-90.0);
        let noise_only = m.receiver_spectrum_frame(None, None, &[], 7).unwrap();
        assert_eq!(noise_only.len(), 10);
        assert_eq!(noise_only.timestamp, 7);
        assert!(noise_only.samples_dbm.iter().all(|&s| (s + 90.0).abs() < 1e-9));

        let user = Transmission::new(ch(2), emitter(EmitterRole::User, 30.0));
        let jam = Transmission::new(ch(7), emitter(EmitterRole::Jammer, 20.0));
        let f = m.receiver_spectrum_frame(Some(&user), Some(&jam), &[], 0).unwrap();
        let s = &f.samples_dbm;
        let local_max: Vec<usize> = (0..10)
            .filter(|&i| {
                (i == 0 || s[i] > s[i - 1]) && (i == 9 || s[i] > s[i + 1])
            })
            .map(|i| i + 1)
            .collect();
        assert_eq!(local_max, vec![2, 7]);
    }

    #[test]
    fn doubling_power_adds_three_db() {
        let m = unit_model(-200.0);
        let a = Transmission::new(ch(5), emitter(EmitterRole::User, 30.0));
        let b = Transmission::new(ch(5), emitter(EmitterRole::User, 30.0 + linear_to_db(2.0)));
        let fa = m.receiver_spectrum_frame(Some(&a), None, &[], 0).unwrap();
        let fb = m.receiver_spectrum_frame(Some(&b), None, &[], 0).unwrap();
        for n in 3..6 {
            assert!((fb.samples_dbm[n] - fa.samples_dbm[n] - 3.0103).abs() < 1e-3);
        }
    }
}
