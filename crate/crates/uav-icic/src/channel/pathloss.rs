//! Path-loss and line-of-sight probability models.
//!
//! All numeric constants live in a flat key-value parameter table (see
//! `data/pathloss.params`) so they can be audited or swapped without touching
//! code. Two model families are provided: the urban-macro tables used for the
//! full-scale setup (terrestrial links plus the aerial extension), and a
//! simplified single-slope model used as the default in unit-scale studies.

use std::collections::BTreeMap;

use super::ChannelError;

/// Which path-loss family a scenario uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathlossModel {
    /// Urban-macro tables: terrestrial UMa for heights up to 22.5 m and the
    /// aerial UMa extension above, selected by endpoint height.
    Uma,
    /// Single-slope exponent model with a logistic LoS probability.
    Simplified,
}

/// Geometry of one link, as seen from the BS.
#[derive(Debug, Clone, Copy)]
pub struct LinkGeometry {
    pub d2d_m: f64,
    pub ue_height_m: f64,
    pub bs_height_m: f64,
}

impl LinkGeometry {
    pub fn d3d_m(&self) -> f64 {
        (self.d2d_m.powi(2) + (self.ue_height_m - self.bs_height_m).powi(2)).sqrt()
    }

    pub fn elevation_deg(&self) -> f64 {
        (self.ue_height_m - self.bs_height_m)
            .atan2(self.d2d_m)
            .to_degrees()
    }
}

/// Loss and shadowing sigma for one link state.
#[derive(Debug, Clone, Copy)]
pub struct LinkBudget {
    pub pathloss_db: f64,
    pub shadow_sigma_db: f64,
    /// The 2-D distance was below the model floor and got clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct UmaTable {
    pub los_const_db: f64,
    pub los_dist_coeff_db: f64,
    pub los_freq_coeff_db: f64,
    pub los_const2_db: f64,
    pub los_dist2_coeff_db: f64,
    pub los_breakpoint_corr_db: f64,
    pub los_shadow_sigma_db: f64,
    pub nlos_const_db: f64,
    pub nlos_dist_coeff_db: f64,
    pub nlos_freq_coeff_db: f64,
    pub nlos_ue_height_coeff_db: f64,
    pub nlos_shadow_sigma_db: f64,
    pub env_height_m: f64,
    pub min_dist_m: f64,
    pub max_dist_m: f64,
    pub min_ue_height_m: f64,
    pub max_ue_height_m: f64,
    pub los_prob_d1_m: f64,
    pub los_prob_decay_m: f64,
}

#[derive(Debug, Clone)]
pub struct UmaAvTable {
    pub los_const_db: f64,
    pub los_dist_coeff_db: f64,
    pub los_freq_coeff_db: f64,
    pub los_shadow_sigma_coeff_db: f64,
    pub los_shadow_sigma_rate: f64,
    pub nlos_const_db: f64,
    pub nlos_dist_coeff_db: f64,
    pub nlos_dist_height_coeff_db: f64,
    pub nlos_freq_coeff_db: f64,
    pub nlos_shadow_sigma_db: f64,
    pub min_height_m: f64,
    pub max_height_m: f64,
    pub los_certain_height_m: f64,
    pub max_dist_m: f64,
    pub los_prob_d1_coeff: f64,
    pub los_prob_d1_const: f64,
    pub los_prob_d1_min_m: f64,
    pub los_prob_p1_coeff: f64,
    pub los_prob_p1_const: f64,
}

#[derive(Debug, Clone)]
pub struct SimplifiedTable {
    pub ref_loss_db: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    pub nlos_extra_db: f64,
    pub los_shadow_sigma_db: f64,
    pub nlos_shadow_sigma_db: f64,
    pub los_logistic_a: f64,
    pub los_logistic_b: f64,
    pub min_dist_m: f64,
}

/// Every constant needed by the supported path-loss models.
#[derive(Debug, Clone)]
pub struct PathlossTable {
    pub uma: UmaTable,
    pub uma_av: UmaAvTable,
    pub simplified: SimplifiedTable,
}

const BUNDLED_TABLE: &str = include_str!("../../data/pathloss.params");

impl PathlossTable {
    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled path-loss table must parse")
    }

    /// Parse the flat `section.key = value` grammar. Unknown keys and missing
    /// keys are both rejected.
    pub fn parse(text: &str) -> Result<Self, ChannelError> {
        let mut kv: BTreeMap<String, f64> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ChannelError::Table(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value: f64 = value.trim().parse().map_err(|_| {
                ChannelError::Table(format!("line {}: `{}` is not a number", lineno + 1, value.trim()))
            })?;
            if kv.insert(key.clone(), value).is_some() {
                return Err(ChannelError::Table(format!("duplicate key `{key}`")));
            }
        }

        let mut take = |key: &str| {
            kv.remove(key)
                .ok_or_else(|| ChannelError::Table(format!("missing key `{key}`")))
        };

        let table = Self {
            uma: UmaTable {
                los_const_db: take("uma.los.const_db")?,
                los_dist_coeff_db: take("uma.los.dist_coeff_db")?,
                los_freq_coeff_db: take("uma.los.freq_coeff_db")?,
                los_const2_db: take("uma.los.const2_db")?,
                los_dist2_coeff_db: take("uma.los.dist2_coeff_db")?,
                los_breakpoint_corr_db: take("uma.los.breakpoint_corr_db")?,
                los_shadow_sigma_db: take("uma.los.shadow_sigma_db")?,
                nlos_const_db: take("uma.nlos.const_db")?,
                nlos_dist_coeff_db: take("uma.nlos.dist_coeff_db")?,
                nlos_freq_coeff_db: take("uma.nlos.freq_coeff_db")?,
                nlos_ue_height_coeff_db: take("uma.nlos.ue_height_coeff_db")?,
                nlos_shadow_sigma_db: take("uma.nlos.shadow_sigma_db")?,
                env_height_m: take("uma.env_height_m")?,
                min_dist_m: take("uma.min_dist_m")?,
                max_dist_m: take("uma.max_dist_m")?,
                min_ue_height_m: take("uma.min_ue_height_m")?,
                max_ue_height_m: take("uma.max_ue_height_m")?,
                los_prob_d1_m: take("uma.los_prob.d1_m")?,
                los_prob_decay_m: take("uma.los_prob.decay_m")?,
            },
            uma_av: UmaAvTable {
                los_const_db: take("uma_av.los.const_db")?,
                los_dist_coeff_db: take("uma_av.los.dist_coeff_db")?,
                los_freq_coeff_db: take("uma_av.los.freq_coeff_db")?,
                los_shadow_sigma_coeff_db: take("uma_av.los.shadow_sigma_coeff_db")?,
                los_shadow_sigma_rate: take("uma_av.los.shadow_sigma_rate")?,
                nlos_const_db: take("uma_av.nlos.const_db")?,
                nlos_dist_coeff_db: take("uma_av.nlos.dist_coeff_db")?,
                nlos_dist_height_coeff_db: take("uma_av.nlos.dist_height_coeff_db")?,
                nlos_freq_coeff_db: take("uma_av.nlos.freq_coeff_db")?,
                nlos_shadow_sigma_db: take("uma_av.nlos.shadow_sigma_db")?,
                min_height_m: take("uma_av.min_height_m")?,
                max_height_m: take("uma_av.max_height_m")?,
                los_certain_height_m: take("uma_av.los_certain_height_m")?,
                max_dist_m: take("uma_av.max_dist_m")?,
                los_prob_d1_coeff: take("uma_av.los_prob.d1_coeff")?,
                los_prob_d1_const: take("uma_av.los_prob.d1_const")?,
                los_prob_d1_min_m: take("uma_av.los_prob.d1_min_m")?,
                los_prob_p1_coeff: take("uma_av.los_prob.p1_coeff")?,
                los_prob_p1_const: take("uma_av.los_prob.p1_const")?,
            },
            simplified: SimplifiedTable {
                ref_loss_db: take("simplified.ref_loss_db")?,
                los_exponent: take("simplified.los_exponent")?,
                nlos_exponent: take("simplified.nlos_exponent")?,
                nlos_extra_db: take("simplified.nlos_extra_db")?,
                los_shadow_sigma_db: take("simplified.los.shadow_sigma_db")?,
                nlos_shadow_sigma_db: take("simplified.nlos.shadow_sigma_db")?,
                los_logistic_a: take("simplified.los_logistic_a")?,
                los_logistic_b: take("simplified.los_logistic_b")?,
                min_dist_m: take("simplified.min_dist_m")?,
            },
        };

        if let Some(key) = kv.keys().next() {
            return Err(ChannelError::Table(format!("unknown key `{key}`")));
        }
        Ok(table)
    }

    /// LoS probability for a terrestrial link (endpoint at UE height).
    pub fn terrestrial_los_probability(&self, model: PathlossModel, geom: &LinkGeometry) -> f64 {
        match model {
            PathlossModel::Uma => {
                let t = &self.uma;
                let d = geom.d2d_m;
                if d <= t.los_prob_d1_m {
                    1.0
                } else {
                    t.los_prob_d1_m / d
                        + (-d / t.los_prob_decay_m).exp() * (1.0 - t.los_prob_d1_m / d)
                }
            }
            PathlossModel::Simplified => self.simplified_los_probability(geom),
        }
    }

    fn simplified_los_probability(&self, geom: &LinkGeometry) -> f64 {
        let s = &self.simplified;
        let theta = geom.elevation_deg();
        1.0 / (1.0 + s.los_logistic_a * (-s.los_logistic_b * (theta - s.los_logistic_a)).exp())
    }

    /// Path loss and shadowing sigma for a terrestrial link in the given LoS
    /// state. Distances below the model floor are clamped and flagged.
    pub fn terrestrial_pathloss(
        &self,
        model: PathlossModel,
        fc_ghz: f64,
        geom: &LinkGeometry,
        los: bool,
    ) -> LinkBudget {
        match model {
            PathlossModel::Uma => self.uma_pathloss(fc_ghz, geom, los),
            PathlossModel::Simplified => self.simplified_pathloss(geom, los),
        }
    }

    fn uma_pathloss(&self, fc_ghz: f64, geom: &LinkGeometry, los: bool) -> LinkBudget {
        let t = &self.uma;
        let clamped = geom.d2d_m < t.min_dist_m || geom.d2d_m > t.max_dist_m;
        let d2d = geom.d2d_m.clamp(t.min_dist_m, t.max_dist_m);
        let geom = LinkGeometry { d2d_m: d2d, ..*geom };
        let d3d = geom.d3d_m();
        let lg_d = d3d.log10();
        let lg_f = fc_ghz.log10();

        // Breakpoint on the 2-D distance, with effective antenna heights.
        let h_bs_eff = geom.bs_height_m - t.env_height_m;
        let h_ut_eff = geom.ue_height_m - t.env_height_m;
        let d_bp = 4.0 * h_bs_eff * h_ut_eff * fc_ghz * 1e9 / 299_792_458.0;

        let pl_los = if d2d <= d_bp {
            t.los_const_db + t.los_dist_coeff_db * lg_d + t.los_freq_coeff_db * lg_f
        } else {
            t.los_const2_db + t.los_dist2_coeff_db * lg_d + t.los_freq_coeff_db * lg_f
                - t.los_breakpoint_corr_db
                    * (d_bp.powi(2) + (geom.bs_height_m - geom.ue_height_m).powi(2)).log10()
        };

        if los {
            LinkBudget {
                pathloss_db: pl_los,
                shadow_sigma_db: t.los_shadow_sigma_db,
                clamped,
            }
        } else {
            let pl_nlos = t.nlos_const_db
                + t.nlos_dist_coeff_db * lg_d
                + t.nlos_freq_coeff_db * lg_f
                - t.nlos_ue_height_coeff_db * (geom.ue_height_m - 1.5);
            LinkBudget {
                pathloss_db: pl_los.max(pl_nlos),
                shadow_sigma_db: t.nlos_shadow_sigma_db,
                clamped,
            }
        }
    }

    fn simplified_pathloss(&self, geom: &LinkGeometry, los: bool) -> LinkBudget {
        let s = &self.simplified;
        let clamped = geom.d2d_m < s.min_dist_m;
        let d2d = geom.d2d_m.max(s.min_dist_m);
        let d3d = LinkGeometry { d2d_m: d2d, ..*geom }.d3d_m();
        let (exponent, extra, sigma) = if los {
            (s.los_exponent, 0.0, s.los_shadow_sigma_db)
        } else {
            (s.nlos_exponent, s.nlos_extra_db, s.nlos_shadow_sigma_db)
        };
        LinkBudget {
            pathloss_db: s.ref_loss_db + 10.0 * exponent * d3d.log10() + extra,
            shadow_sigma_db: sigma,
            clamped,
        }
    }

    /// LoS probability for an aerial link; `Err` when the altitude falls
    /// outside the table's range.
    pub fn aerial_los_probability(
        &self,
        model: PathlossModel,
        geom: &LinkGeometry,
    ) -> Result<f64, ChannelError> {
        match model {
            PathlossModel::Simplified => Ok(self.simplified_los_probability(geom)),
            PathlossModel::Uma => {
                let a = &self.uma_av;
                let h = geom.ue_height_m;
                if h <= a.min_height_m {
                    // Terrestrial heights fall back to the terrestrial table.
                    self.check_terrestrial_height(h)?;
                    return Ok(self.terrestrial_los_probability(model, geom));
                }
                if h > a.max_height_m {
                    return Err(ChannelError::AltitudeOutOfRange {
                        altitude_m: h,
                        min_m: self.uma.min_ue_height_m,
                        max_m: a.max_height_m,
                    });
                }
                if h > a.los_certain_height_m {
                    return Ok(1.0);
                }
                let d1 = (a.los_prob_d1_coeff * h.log10() + a.los_prob_d1_const)
                    .max(a.los_prob_d1_min_m);
                let p1 = a.los_prob_p1_coeff * h.log10() + a.los_prob_p1_const;
                let d = geom.d2d_m;
                if d <= d1 {
                    Ok(1.0)
                } else {
                    Ok(d1 / d + (-d / p1).exp() * (1.0 - d1 / d))
                }
            }
        }
    }

    fn check_terrestrial_height(&self, h: f64) -> Result<(), ChannelError> {
        if h < self.uma.min_ue_height_m {
            return Err(ChannelError::AltitudeOutOfRange {
                altitude_m: h,
                min_m: self.uma.min_ue_height_m,
                max_m: self.uma_av.max_height_m,
            });
        }
        Ok(())
    }

    /// Whether an aerial endpoint at this height uses the terrestrial table
    /// under the urban-macro model (take-off/landing or ground benchmark).
    pub fn aerial_uses_terrestrial(&self, model: PathlossModel, height_m: f64) -> bool {
        model == PathlossModel::Uma && height_m <= self.uma_av.min_height_m
    }

    /// Path loss and shadowing sigma for an aerial link in the given LoS
    /// state. Heights at or below the aerial floor delegate to the
    /// terrestrial table; heights above the ceiling are an error.
    pub fn aerial_pathloss(
        &self,
        model: PathlossModel,
        fc_ghz: f64,
        geom: &LinkGeometry,
        los: bool,
    ) -> Result<LinkBudget, ChannelError> {
        match model {
            PathlossModel::Simplified => Ok(self.simplified_pathloss(geom, los)),
            PathlossModel::Uma => {
                let a = &self.uma_av;
                let h = geom.ue_height_m;
                if h <= a.min_height_m {
                    self.check_terrestrial_height(h)?;
                    return Ok(self.uma_pathloss(fc_ghz, geom, los));
                }
                if h > a.max_height_m {
                    return Err(ChannelError::AltitudeOutOfRange {
                        altitude_m: h,
                        min_m: self.uma.min_ue_height_m,
                        max_m: a.max_height_m,
                    });
                }
                let clamped = geom.d2d_m > a.max_dist_m;
                let d2d = geom.d2d_m.min(a.max_dist_m);
                let d3d = LinkGeometry { d2d_m: d2d, ..*geom }.d3d_m();
                if los {
                    Ok(LinkBudget {
                        pathloss_db: a.los_const_db
                            + a.los_dist_coeff_db * d3d.log10()
                            + a.los_freq_coeff_db * fc_ghz.log10(),
                        shadow_sigma_db: a.los_shadow_sigma_coeff_db
                            * (-a.los_shadow_sigma_rate * h).exp(),
                        clamped,
                    })
                } else {
                    Ok(LinkBudget {
                        pathloss_db: a.nlos_const_db
                            + (a.nlos_dist_coeff_db - a.nlos_dist_height_coeff_db * h.log10())
                                * d3d.log10()
                            + a.nlos_freq_coeff_db
                                * (40.0 * std::f64::consts::PI * fc_ghz / 3.0).log10(),
                        shadow_sigma_db: a.nlos_shadow_sigma_db,
                        clamped,
                    })
                }
            }
        }
    }
}
