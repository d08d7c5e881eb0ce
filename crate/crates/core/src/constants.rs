//! Physical and kinetic constants, operating conditions, and the unit
//! conventions shared by every model equation.
//!
//! State variables use mixed units: time in hours, membrane thickness in cm,
//! voltage in V, current density in A/cm², species concentrations in mol/m³.
//! Every unit conversion factor used by the model lives in this module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const M3_PER_CM3: f64 = 1e-6;
pub const UG_PER_G: f64 = 1e6;
pub const G_PER_UG: f64 = 1e-6;

/// Composite factor turning `v_fluor [mol/(m³ s)] * MM_F [g/mol] * t_mem [cm]`
/// into a fluoride release rate in µg/(h cm²).
pub const FRR_UNIT_FACTOR: f64 = SECONDS_PER_HOUR * M3_PER_CM3 * UG_PER_G;

/// Composite factor of the thinning-rate chain, FRR factor times µg→g.
pub const TR_UNIT_FACTOR: f64 = FRR_UNIT_FACTOR * G_PER_UG;

/// Fixed factor between the trainable normalized rate constant and k5.
pub const K5_SCALE: f64 = 1e3;

/// Nafion density quoted alongside the thinning-rate formula (g/cm³). The
/// tabulated 1980 kg/m³ is used instead; this value is kept for reference.
pub const RHO_NAF_TEXT_CGS: f64 = 2.0;

const MMHG_TO_BAR: f64 = 1.333_223_684e-3;

/// Antoine coefficients for liquid water, 1–100 °C, pressure in mmHg and
/// temperature in °C: `log10 p = A - B / (C + T)`.
pub const ANTOINE_WATER: [f64; 3] = [8.07131, 1730.63, 233.426];

/// Which root of the peroxide balance quadratic is taken as physical.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootSelection {
    #[default]
    SmallestPositive,
    LargestPositive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParameters {
    /// Ideal gas constant, J/(mol K).
    #[serde(rename = "R")]
    pub gas_constant: f64,
    /// Faraday constant, C/mol.
    #[serde(rename = "F")]
    pub faraday: f64,
    /// Standard cell potential, V.
    #[serde(rename = "E0")]
    pub e0: f64,
    pub alpha_an: f64,
    pub alpha_cat: f64,
    /// Exchange current densities, A/cm².
    pub i0_an: f64,
    pub i0_cat: f64,
    pub lambda_hydration: f64,
    /// Limiting current density, A/cm². Not used by any implemented equation.
    pub i_limit: f64,
    /// Reference temperature, K. Not used by any implemented equation.
    pub t_ref: f64,
    /// Nafion equivalent weight, kg/mol.
    #[serde(rename = "EW")]
    pub ew: f64,
    /// Nafion dry density, kg/m³ (membrane molar concentration).
    pub rho_naf_si: f64,
    /// Nafion dry density, g/cm³ (thinning-rate formula).
    pub rho_naf_cgs: f64,
    /// Fluoride molar mass, g/mol.
    #[serde(rename = "MM_F")]
    pub mm_f: f64,
    /// Cathode catalyst-layer thickness, m.
    pub e_cl: f64,
    /// Cathode rugosity, m²/m².
    pub gamma_cat: f64,
    /// Base kinetic constant for H2O2 formation, m⁷/(mol² s).
    pub k1_0: f64,
    /// ORR activation energy, J/mol.
    #[serde(rename = "A_H2O2")]
    pub a_h2o2: f64,
    #[serde(rename = "alpha_H2O2")]
    pub alpha_h2o2: f64,
    /// Cathodic overpotential, V.
    pub eta_2e: f64,
    /// H2O2 homolysis, 1/s.
    pub k2: f64,
    /// H2O2 + HO·, m³/(mol s).
    pub k3: f64,
    /// O2 + HO·, m³/(mol s).
    pub k4: f64,
    /// HO· attack on the membrane, m³/(mol s).
    pub k5_true: f64,
    /// H2O2 formation rate, mol/(m³ s).
    pub v1: f64,
    /// Water velocity per unit current density, (m/s)/(A/cm²).
    pub kappa_w: f64,
    /// Oxygen concentration in the cathode catalyst layer, mol/m³.
    #[serde(rename = "c_O2")]
    pub c_o2: f64,
    pub fluorine_mass_fraction: f64,
    pub fluoride_stoich: f64,
    pub peroxide_root: RootSelection,
}

/// Closure values produced by `examples/calibrate_closures.rs`.
pub mod closure {
    /// Oxygen concentration at the cathode catalyst layer, mol/m³.
    pub const C_O2: f64 = 1.0;
    /// (m/s)/(A/cm²)
    pub const KAPPA_W: f64 = 3.9951887065632386e-11;
    /// mol/(m³ s)
    pub const V1: f64 = 2.796538822637674e-4;
}

impl Default for PhysicsParameters {
    fn default() -> Self {
        default_parameters()
    }
}

pub fn default_parameters() -> PhysicsParameters {
    PhysicsParameters {
        gas_constant: 8.314,
        faraday: 96485.0,
        e0: 1.23,
        alpha_an: 0.5,
        alpha_cat: 0.5,
        i0_an: 2.3e-7,
        i0_cat: 1.0e-3,
        lambda_hydration: 20.0,
        i_limit: 6.0,
        t_ref: 298.0,
        ew: 1.100,
        rho_naf_si: 1980.0,
        rho_naf_cgs: 1.98,
        mm_f: 18.998,
        e_cl: 1e-5,
        gamma_cat: 150.0,
        k1_0: 7.068e2,
        a_h2o2: 42450.0,
        alpha_h2o2: 0.5,
        eta_2e: 0.695,
        k2: 1.2e-7,
        k3: 2.7e4,
        k4: 1.2e7,
        k5_true: 1e3,
        v1: closure::V1,
        kappa_w: closure::KAPPA_W,
        c_o2: closure::C_O2,
        fluorine_mass_fraction: 0.82,
        fluoride_stoich: 3.6,
        peroxide_root: RootSelection::SmallestPositive,
    }
}

impl PhysicsParameters {
    pub fn named_values(&self) -> [(&'static str, f64); 29] {
        [
            ("R", self.gas_constant),
            ("F", self.faraday),
            ("E0", self.e0),
            ("alpha_an", self.alpha_an),
            ("alpha_cat", self.alpha_cat),
            ("i0_an", self.i0_an),
            ("i0_cat", self.i0_cat),
            ("lambda_hydration", self.lambda_hydration),
            ("i_limit", self.i_limit),
            ("t_ref", self.t_ref),
            ("EW", self.ew),
            ("rho_naf_si", self.rho_naf_si),
            ("rho_naf_cgs", self.rho_naf_cgs),
            ("MM_F", self.mm_f),
            ("e_cl", self.e_cl),
            ("gamma_cat", self.gamma_cat),
            ("k1_0", self.k1_0),
            ("A_H2O2", self.a_h2o2),
            ("alpha_H2O2", self.alpha_h2o2),
            ("eta_2e", self.eta_2e),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("k5_true", self.k5_true),
            ("v1", self.v1),
            ("kappa_w", self.kappa_w),
            ("c_O2", self.c_o2),
            ("fluorine_mass_fraction", self.fluorine_mass_fraction),
            ("fluoride_stoich", self.fluoride_stoich),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (key, value) in self.named_values() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(key, format!("must be finite and > 0, got {value}")));
            }
        }
        let normalized = self.k5_true / K5_SCALE;
        if !(0.1..=10.0).contains(&normalized) {
            return Err(Error::config(
                "k5_true",
                format!("k5_true / {K5_SCALE} must lie in [0.1, 10], got {normalized}"),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingConditions {
    /// Temperature, K.
    #[serde(rename = "T")]
    pub temperature: f64,
    /// Cathode pressure, bar.
    pub p_cat: f64,
    /// Partial pressures, bar.
    #[serde(rename = "p_H2")]
    pub p_h2: f64,
    #[serde(rename = "p_O2")]
    pub p_o2: f64,
    #[serde(rename = "p_H2O")]
    pub p_h2o: f64,
    /// Electrical power, W.
    #[serde(rename = "P")]
    pub power: f64,
    /// Active area, cm².
    #[serde(rename = "A_cell")]
    pub a_cell: f64,
    /// Initial membrane thickness, cm.
    pub t_mem0: f64,
    /// Simulation horizon, h.
    pub t_max: f64,
}

impl Default for OperatingConditions {
    fn default() -> Self {
        let temperature = 313.15;
        OperatingConditions {
            temperature,
            p_cat: 30.0,
            p_h2: 30.0,
            p_o2: 30.0,
            p_h2o: saturation_pressure(temperature),
            power: 500.0,
            a_cell: 680.0,
            t_mem0: 0.0175,
            t_max: 8e5,
        }
    }
}

impl OperatingConditions {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, f64, bool); 9] = [
            ("T", self.temperature, self.temperature > 273.15),
            ("p_cat", self.p_cat, self.p_cat > 0.0),
            ("p_H2", self.p_h2, self.p_h2 > 0.0),
            ("p_O2", self.p_o2, self.p_o2 > 0.0),
            ("p_H2O", self.p_h2o, self.p_h2o > 0.0),
            ("P", self.power, self.power > 0.0),
            ("A_cell", self.a_cell, self.a_cell > 0.0),
            ("t_mem0", self.t_mem0, self.t_mem0 > 0.0 && self.t_mem0 < 0.1),
            ("t_max", self.t_max, self.t_max > 0.0),
        ];
        for (key, value, ok) in checks {
            if !(value.is_finite() && ok) {
                return Err(Error::config(key, format!("out of range: {value}")));
            }
        }
        Ok(())
    }

    /// Power per unit area, W/cm².
    pub fn power_density(&self) -> f64 {
        self.power / self.a_cell
    }
}

/// Saturation vapor pressure of water (bar) at `temperature` (K).
pub fn saturation_pressure(temperature: f64) -> f64 {
    let [a, b, c] = ANTOINE_WATER;
    let celsius = temperature - 273.15;
    10f64.powf(a - b / (c + celsius)) * MMHG_TO_BAR
}

/// Molar concentration of sulfonic sites in the membrane, mol/m³.
pub fn membrane_molar_concentration(params: &PhysicsParameters) -> Result<f64> {
    if !(params.rho_naf_si > 0.0) {
        return Err(Error::Domain {
            quantity: "rho_naf_si",
            value: params.rho_naf_si,
        });
    }
    if !(params.ew > 0.0) {
        return Err(Error::Domain {
            quantity: "EW",
            value: params.ew,
        });
    }
    Ok(params.rho_naf_si / params.ew)
}

/// ORR rate constant for the two-electron pathway, m⁷/(mol² s).
pub fn peroxide_formation_constant(params: &PhysicsParameters, temperature: f64) -> f64 {
    let rt = params.gas_constant * temperature;
    params.k1_0
        * (-params.a_h2o2 / rt).exp()
        * (-params.alpha_h2o2 * params.faraday * params.eta_2e / rt).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        let p = default_parameters();
        assert_eq!(p.faraday, 96485.0);
        assert_eq!(p.k2, 1.2e-7);
        assert_eq!(p.k4, 1.2e7);
        assert_eq!(p.k3, 2.7e4);
        assert_eq!(p.k5_true, 1e3);
        assert_eq!(p.i0_an, 2.3e-7);
        p.validate().unwrap();
        OperatingConditions::default().validate().unwrap();
    }

    #[test]
    fn membrane_concentration() {
        let p = default_parameters();
        let c = membrane_molar_concentration(&p).unwrap();
        assert!((c - 1800.0).abs() < 1e-9);

        let unit = PhysicsParameters {
            rho_naf_si: 3.5,
            ew: 3.5,
            ..default_parameters()
        };
        assert_eq!(membrane_molar_concentration(&unit).unwrap(), 1.0);

        let zero = PhysicsParameters {
            rho_naf_si: 0.0,
            ..default_parameters()
        };
        assert!(membrane_molar_concentration(&zero).is_err());
    }

    #[test]
    fn k1_reduces_to_base_constant() {
        let p = PhysicsParameters {
            a_h2o2: 0.0,
            eta_2e: 0.0,
            ..default_parameters()
        };
        assert_eq!(peroxide_formation_constant(&p, 313.15), p.k1_0);
    }

    #[test]
    fn k1_golden_value() {
        let p = default_parameters();
        // exp(-42450 / (8.314 * 313.15)) * exp(-0.5 * 96485 * 0.695 / (8.314 * 313.15))
        let rt: f64 = 8.314 * 313.15;
        let first = (-42450.0 / rt).exp();
        let second = (-(0.5 * 96485.0 * 0.695) / rt).exp();
        let oracle = 706.8 * first * second;
        let k1 = peroxide_formation_constant(&p, 313.15);
        assert!((k1 - oracle).abs() <= 1e-14 * oracle);
        // mpmath at 40 digits: 1.4973480078878853e-10
        assert!((k1 - 1.497_348_007_887_885e-10).abs() <= 1e-14 * k1, "{k1:e}");
    }

    #[test]
    fn k1_increases_with_temperature_and_stays_positive() {
        let p = default_parameters();
        assert!(peroxide_formation_constant(&p, 330.0) > peroxide_formation_constant(&p, 310.0));
        let mut t = 280.0;
        while t <= 400.0 {
            assert!(peroxide_formation_constant(&p, t) > 0.0);
            t += 0.5;
        }
    }

    #[test]
    fn saturation_pressure_at_40c() {
        // ~55.3 mmHg at 40 °C
        let p = saturation_pressure(313.15);
        assert!((p - 0.073_584_387_554_115).abs() < 1e-14, "{p}");
        assert!(saturation_pressure(373.15) > 1.0 && saturation_pressure(373.15) < 1.03);
    }

    #[test]
    fn composed_thinning_factor() {
        assert!((TR_UNIT_FACTOR - 3.6e-3).abs() < 1e-18);
    }

    #[test]
    fn k5_normalization_must_be_meaningful() {
        let p = PhysicsParameters {
            k5_true: 1e5,
            ..default_parameters()
        };
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("k5_true"));
    }
}
