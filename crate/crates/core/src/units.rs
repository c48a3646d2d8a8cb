//! dB / dBm helpers. Powers are in watts unless stated otherwise.

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}

pub fn w_to_dbm(w: f64) -> f64 {
    lin_to_db(w / 1e-3)
}

/// Amplitude factor for a power change of `db`.
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Optical wavelength span to frequency span around `center_m`.
pub fn wavelength_span_to_hz(span_m: f64, center_m: f64) -> f64 {
    crate::consts::SPEED_OF_LIGHT * span_m / (center_m * center_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        assert!((w_to_dbm(1e-3)).abs() < 1e-12);
        assert!((dbm_to_w(-15.0) - 31.622_776_601_683_79e-6).abs() < 1e-15);
        assert!((w_to_dbm(dbm_to_w(13.0)) - 13.0).abs() < 1e-12);
    }
}
