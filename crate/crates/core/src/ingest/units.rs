//! Supported units and their conversion to the storage system
//! (m, s, m/s, m/s², °C, mm/h, W/m², degrees).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Unit {
    Meter,
    Kilometer,
    Foot,
    Mile,
    Second,
    Millisecond,
    Minute,
    Hour,
    MeterPerSecond,
    KilometerPerHour,
    MilePerHour,
    Knot,
    FootPerSecond,
    MeterPerSecond2,
    FootPerSecond2,
    Celsius,
    Fahrenheit,
    Kelvin,
    MillimeterPerHour,
    InchPerHour,
    WattPerMeter2,
    Degree,
    Radian,
    Dimensionless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Length,
    Time,
    Speed,
    Acceleration,
    Temperature,
    PrecipitationRate,
    Irradiance,
    Angle,
    None,
}

const SYMBOLS: &[(Unit, &[&str])] = &[
    (Unit::Meter, &["m", "meter", "meters", "metre", "metres"]),
    (Unit::Kilometer, &["km", "kilometer", "kilometers"]),
    (Unit::Foot, &["ft", "foot", "feet"]),
    (Unit::Mile, &["mi", "mile", "miles"]),
    (Unit::Second, &["s", "sec", "second", "seconds"]),
    (Unit::Millisecond, &["ms", "millisecond", "milliseconds"]),
    (Unit::Minute, &["min", "minute", "minutes"]),
    (Unit::Hour, &["h", "hr", "hour", "hours"]),
    (Unit::MeterPerSecond, &["m/s", "mps"]),
    (Unit::KilometerPerHour, &["km/h", "kmh", "kph"]),
    (Unit::MilePerHour, &["mph", "mi/h"]),
    (Unit::Knot, &["kn", "kt", "knot", "knots"]),
    (Unit::FootPerSecond, &["ft/s", "fps"]),
    (Unit::MeterPerSecond2, &["m/s²", "m/s^2", "m/s2"]),
    (Unit::FootPerSecond2, &["ft/s²", "ft/s^2", "ft/s2"]),
    (Unit::Celsius, &["°c", "c", "degc", "celsius"]),
    (Unit::Fahrenheit, &["°f", "f", "degf", "fahrenheit"]),
    (Unit::Kelvin, &["k", "kelvin"]),
    (Unit::MillimeterPerHour, &["mm/h", "mm/hr"]),
    (Unit::InchPerHour, &["in/h", "in/hr"]),
    (Unit::WattPerMeter2, &["w/m²", "w/m^2", "w/m2"]),
    (Unit::Degree, &["deg", "°", "degree", "degrees"]),
    (Unit::Radian, &["rad", "radian", "radians"]),
    (Unit::Dimensionless, &["1", "-", "", "none"]),
];

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Meter => "m",
            Unit::Kilometer => "km",
            Unit::Foot => "ft",
            Unit::Mile => "mi",
            Unit::Second => "s",
            Unit::Millisecond => "ms",
            Unit::Minute => "min",
            Unit::Hour => "h",
            Unit::MeterPerSecond => "m/s",
            Unit::KilometerPerHour => "km/h",
            Unit::MilePerHour => "mph",
            Unit::Knot => "kn",
            Unit::FootPerSecond => "ft/s",
            Unit::MeterPerSecond2 => "m/s²",
            Unit::FootPerSecond2 => "ft/s²",
            Unit::Celsius => "°C",
            Unit::Fahrenheit => "°F",
            Unit::Kelvin => "K",
            Unit::MillimeterPerHour => "mm/h",
            Unit::InchPerHour => "in/h",
            Unit::WattPerMeter2 => "W/m²",
            Unit::Degree => "deg",
            Unit::Radian => "rad",
            Unit::Dimensionless => "1",
        }
    }

    pub fn all() -> impl Iterator<Item = Unit> {
        SYMBOLS.iter().map(|(u, _)| *u)
    }

    pub fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            Meter | Kilometer | Foot | Mile => Dimension::Length,
            Second | Millisecond | Minute | Hour => Dimension::Time,
            MeterPerSecond | KilometerPerHour | MilePerHour | Knot | FootPerSecond => Dimension::Speed,
            MeterPerSecond2 | FootPerSecond2 => Dimension::Acceleration,
            Celsius | Fahrenheit | Kelvin => Dimension::Temperature,
            MillimeterPerHour | InchPerHour => Dimension::PrecipitationRate,
            WattPerMeter2 => Dimension::Irradiance,
            Degree | Radian => Dimension::Angle,
            Dimensionless => Dimension::None,
        }
    }

    /// The storage unit for this unit's dimension.
    pub fn standard(self) -> Unit {
        match self.dimension() {
            Dimension::Length => Unit::Meter,
            Dimension::Time => Unit::Second,
            Dimension::Speed => Unit::MeterPerSecond,
            Dimension::Acceleration => Unit::MeterPerSecond2,
            Dimension::Temperature => Unit::Celsius,
            Dimension::PrecipitationRate => Unit::MillimeterPerHour,
            Dimension::Irradiance => Unit::WattPerMeter2,
            Dimension::Angle => Unit::Degree,
            Dimension::None => Unit::Dimensionless,
        }
    }

    pub fn is_standard(self) -> bool {
        self.standard() == self
    }

    /// Convert `v` from this unit to [`Unit::standard`].
    ///
    /// Angles are wrapped into `[0, 360)`.
    pub fn to_standard(self, v: f64) -> f64 {
        use Unit::*;
        match self {
            Meter | Second | MeterPerSecond | MeterPerSecond2 | Celsius | MillimeterPerHour | WattPerMeter2
            | Dimensionless => v,
            Kilometer => v * 1000.0,
            Foot => v * 0.3048,
            Mile => v * 1609.344,
            Millisecond => v / 1000.0,
            Minute => v * 60.0,
            Hour => v * 3600.0,
            KilometerPerHour => v * 1000.0 / 3600.0,
            MilePerHour => v * 1609.344 / 3600.0,
            Knot => v * 1852.0 / 3600.0,
            FootPerSecond | FootPerSecond2 => v * 0.3048,
            Fahrenheit => (v - 32.0) * 5.0 / 9.0,
            Kelvin => v - 273.15,
            InchPerHour => v * 25.4,
            Degree => wrap_degrees(v),
            Radian => wrap_degrees(v.to_degrees()),
        }
    }
}

/// Wrap into `[0, 360)`. `rem_euclid` can return exactly 360 for tiny
/// negative inputs; that case maps to 0.
pub fn wrap_degrees(v: f64) -> f64 {
    let w = v.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown unit {0:?}")]
pub struct UnknownUnit(pub String);

impl FromStr for Unit {
    type Err = UnknownUnit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.trim().to_lowercase();
        SYMBOLS
            .iter()
            .find(|(_, names)| names.contains(&k.as_str()))
            .map(|(u, _)| *u)
            .ok_or_else(|| UnknownUnit(s.to_string()))
    }
}

impl TryFrom<String> for Unit {
    type Error = UnknownUnit;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Unit> for String {
    fn from(u: Unit) -> String {
        u.symbol().to_string()
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
