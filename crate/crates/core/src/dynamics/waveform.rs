//! Time-dependent electrode voltage schedules.

use crate::error::{CoreError, CoreResult};
use crate::field::Voltages;
use crate::geometry::ChannelId;
use crate::trap::DriveConfig;

/// RF term: `amplitude * sin(omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfTerm {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampShape {
    /// C1 smoothstep 3u^2 - 2u^3.
    Smoothstep,
    Linear,
}

/// Switch from the static level to `target` starting at `trigger`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub target: f64,
    pub trigger: f64,
    pub ramp: f64,
    pub shape: RampShape,
}

impl SwitchEvent {
    /// Ramp contribution to add on top of the static level at time t.
    fn contribution(&self, static_level: f64, t: f64) -> f64 {
        if t < self.trigger {
            return 0.0;
        }
        let u = if self.ramp > 0.0 {
            ((t - self.trigger) / self.ramp).min(1.0)
        } else {
            1.0
        };
        let s = match self.shape {
            RampShape::Smoothstep => u * u * (3.0 - 2.0 * u),
            RampShape::Linear => u,
        };
        (self.target - static_level) * s
    }
}

/// One electrode channel: static level plus optional RF and switch terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWaveform {
    pub channel: ChannelId,
    pub static_level: f64,
    pub rf: Option<RfTerm>,
    pub switch: Option<SwitchEvent>,
}

impl ChannelWaveform {
    pub fn voltage_at(&self, t: f64) -> f64 {
        let mut v = self.static_level;
        if let Some(rf) = &self.rf {
            v += rf.amplitude * (rf.omega * t + rf.phase).sin();
        }
        if let Some(sw) = &self.switch {
            v += sw.contribution(self.static_level, t);
        }
        v
    }

    /// True when the channel is identically zero for all t.
    pub fn is_identically_zero(&self) -> bool {
        self.static_level == 0.0
            && self.rf.is_none_or(|rf| rf.amplitude == 0.0)
            && self.switch.is_none_or(|sw| sw.target == 0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WaveformSchedule {
    pub channels: Vec<ChannelWaveform>,
}

impl WaveformSchedule {
    pub fn validate(&self) -> CoreResult<()> {
        for ch in &self.channels {
            if let Some(sw) = &ch.switch {
                if sw.ramp < 0.0 {
                    return Err(CoreError::Config(format!(
                        "channel {}: ramp duration must be >= 0",
                        ch.channel
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-channel voltages at time t.
    pub fn voltages_at(&self, t: f64) -> Voltages {
        let mut v = Voltages::new();
        for ch in &self.channels {
            v.insert(ch.channel, ch.voltage_at(t));
        }
        v
    }

    pub fn channel(&self, id: ChannelId) -> Option<&ChannelWaveform> {
        self.channels.iter().find(|c| c.channel == id)
    }

    /// Ramp windows (start, end) of all switch events, for step control.
    pub fn ramp_windows(&self) -> Vec<(f64, f64)> {
        self.channels
            .iter()
            .filter_map(|c| c.switch.as_ref())
            .filter(|s| s.ramp > 0.0)
            .map(|s| (s.trigger, s.trigger + s.ramp))
            .collect()
    }
}

/// First rising zero-crossing of `sin(omega t + phase)` at or after
/// `request`, plus the synchronization delay.
pub fn phase_sync_trigger(request: f64, omega: f64, phase: f64, delay: f64) -> f64 {
    debug_assert!(omega > 0.0);
    let two_pi = 2.0 * core::f64::consts::PI;
    // Rising zeros at omega t + phase = 2 pi k.
    let k = ((omega * request + phase) / two_pi).ceil();
    let t = (two_pi * k - phase) / omega;
    t + delay
}

/// Extraction pulse parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    /// Switched target voltage, V.
    pub target_voltage: f64,
    /// Ramp duration, s.
    pub ramp_duration: f64,
    pub ramp_shape: RampShape,
    /// Asynchronous extraction request time, s.
    pub request_time: f64,
    /// Constant delay of the synchronization circuit, s.
    pub phase_sync_delay: f64,
    /// Channels switched to the target voltage.
    pub switch_channels: Vec<ChannelId>,
    /// Static deflection voltages.
    pub deflection_voltages: Voltages,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            target_voltage: 500.0,
            ramp_duration: 30e-9,
            ramp_shape: RampShape::Smoothstep,
            request_time: 0.0,
            phase_sync_delay: 0.0,
            switch_channels: vec![ChannelId::Dc(4), ChannelId::Dc(5)],
            deflection_voltages: Voltages::new(),
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> CoreResult<()> {
        if !(self.target_voltage.abs() <= 1000.0) {
            return Err(CoreError::Config(
                "extraction voltage exceeds the 1 kV supply bound".into(),
            ));
        }
        if !(0.0..=1e-6).contains(&self.ramp_duration) {
            return Err(CoreError::Config(
                "ramp duration must lie in [0, 1e-6] s".into(),
            ));
        }
        Ok(())
    }

    /// Trigger time implied by the drive phase synchronization.
    pub fn trigger_time(&self, drive: &DriveConfig) -> f64 {
        phase_sync_trigger(
            self.request_time,
            drive.omega(),
            drive.rf_phase,
            self.phase_sync_delay,
        )
    }
}

/// Full schedule for a drive configuration, optionally with the extraction
/// switch armed.
pub fn build_schedule(
    drive: &DriveConfig,
    extraction: Option<&ExtractionConfig>,
) -> CoreResult<WaveformSchedule> {
    drive.validate()?;
    let mut channels = Vec::new();
    channels.push(ChannelWaveform {
        channel: ChannelId::Rf,
        static_level: 0.0,
        rf: Some(RfTerm {
            amplitude: drive.rf_amplitude,
            omega: drive.omega(),
            phase: drive.rf_phase,
        }),
        switch: None,
    });
    let mut static_channels = drive.dc_voltages.clone();
    if let Some(ext) = extraction {
        ext.validate()?;
        for (ch, v) in &ext.deflection_voltages {
            static_channels.insert(*ch, *v);
        }
        let trigger = ext.trigger_time(drive);
        for ch in &ext.switch_channels {
            let static_level = static_channels.remove(ch).unwrap_or(0.0);
            channels.push(ChannelWaveform {
                channel: *ch,
                static_level,
                rf: None,
                switch: Some(SwitchEvent {
                    target: ext.target_voltage,
                    trigger,
                    ramp: ext.ramp_duration,
                    shape: ext.ramp_shape,
                }),
            });
        }
    }
    for (ch, v) in static_channels {
        channels.push(ChannelWaveform {
            channel: ch,
            static_level: v,
            rf: None,
            switch: None,
        });
    }
    let schedule = WaveformSchedule { channels };
    schedule.validate()?;
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

    fn switched_channel() -> ChannelWaveform {
        ChannelWaveform {
            channel: ChannelId::Dc(4),
            static_level: 0.0,
            rf: None,
            switch: Some(SwitchEvent {
                target: 500.0,
                trigger: 1e-6,
                ramp: 30e-9,
                shape: RampShape::Smoothstep,
            }),
        }
    }

    #[test]
    fn before_trigger_static_plus_rf_only() {
        let ch = switched_channel();
        assert_eq!(ch.voltage_at(0.999e-6), 0.0);

        let rf = ChannelWaveform {
            channel: ChannelId::Rf,
            static_level: 2.0,
            rf: Some(RfTerm {
                amplitude: 200.0,
                omega: TWO_PI * 12.155e6,
                phase: 0.0,
            }),
            switch: None,
        };
        // At omega t + phase = pi/2 the RF term is exactly the amplitude.
        let t = (core::f64::consts::FRAC_PI_2) / (TWO_PI * 12.155e6);
        let v = rf.voltage_at(t);
        assert!((v - 202.0).abs() < 1e-9);
    }

    #[test]
    fn after_ramp_exactly_at_target() {
        let ch = switched_channel();
        assert_eq!(ch.voltage_at(1e-6 + 30e-9), 500.0);
        assert_eq!(ch.voltage_at(5e-6), 500.0);
    }

    #[test]
    fn ramp_is_continuous_and_monotone() {
        let ch = switched_channel();
        let mut last = -1.0;
        for i in 0..=300 {
            let t = 1e-6 + 30e-9 * i as f64 / 300.0;
            let v = ch.voltage_at(t);
            assert!(v >= last - 1e-12, "ramp must be monotone");
            last = v;
        }
        // C0 at the boundaries.
        assert!((ch.voltage_at(1e-6) - 0.0).abs() < 1e-12);
        assert!((ch.voltage_at(1e-6 + 30e-9) - 500.0).abs() < 1e-12);
    }

    #[test]
    fn trigger_at_exact_zero_crossing_returns_request() {
        let omega = TWO_PI * 12.155e6;
        // t such that omega t = 2 pi * 7 exactly (in f64).
        let t = TWO_PI * 7.0 / omega;
        let trig = phase_sync_trigger(t, omega, 0.0, 0.0);
        assert!((trig - t).abs() < 1e-18 + 1e-12 * t);
    }

    #[test]
    fn request_just_after_crossing_waits_a_full_period() {
        let omega = TWO_PI * 1e6;
        let period = TWO_PI / omega;
        let t0 = 3.0 * period;
        let trig = phase_sync_trigger(t0 + 1e-12, omega, 0.0, 0.0);
        assert!(((trig - (t0 + period)) / period).abs() < 1e-9);
    }

    #[test]
    fn triggers_are_periodic_in_the_request() {
        let omega = TWO_PI * 12.155e6;
        let period = TWO_PI / omega;
        let r0 = 1.2345e-6;
        let t1 = phase_sync_trigger(r0, omega, 0.3, 7e-9);
        let t2 = phase_sync_trigger(r0 + period, omega, 0.3, 7e-9);
        assert!(((t2 - t1) - period).abs() < 1e-15 + 1e-12 * period);
    }

    #[test]
    fn build_schedule_switches_segments_4_and_5() {
        let drive = DriveConfig::default();
        let ext = ExtractionConfig::default();
        let schedule = build_schedule(&drive, Some(&ext)).unwrap();
        let trigger = ext.trigger_time(&drive);
        let after = trigger + ext.ramp_duration + 1e-9;
        let v = schedule.voltages_at(after);
        assert_eq!(v[&ChannelId::Dc(4)], 500.0);
        assert_eq!(v[&ChannelId::Dc(5)], 500.0);
        // Endcaps stay at their static level.
        assert_eq!(v[&ChannelId::Dc(2)], 35.0);
        assert_eq!(v[&ChannelId::Dc(8)], 35.0);
        // Before the trigger segments 4/5 are at 0.
        let v0 = schedule.voltages_at(trigger - 1e-9);
        assert_eq!(v0[&ChannelId::Dc(4)], 0.0);
    }

    #[test]
    fn extraction_voltage_bound_enforced() {
        let ext = ExtractionConfig {
            target_voltage: 1500.0,
            ..ExtractionConfig::default()
        };
        assert!(ext.validate().is_err());
    }
}
