//! Built-in example laws.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::levy::{Family, LevyTriplet};

/// Which class of law an entry realises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Gaussian,
    CompoundPoisson,
    Gamma,
    BilateralGamma,
    Stable,
    TemperedStable,
    Custom,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub tag: Tag,
    pub params: BTreeMap<String, f64>,
    pub triplet: LevyTriplet,
    /// `k_s(0+)`, `None` when infinite.
    pub alpha: Option<f64>,
    /// Whether the k-function regularity assumption is expected to hold.
    pub regular: bool,
}

impl CatalogEntry {
    fn new(name: &str, tag: Tag, triplet: LevyTriplet, alpha: Option<f64>, regular: bool) -> Self {
        let mut params = BTreeMap::new();
        params.insert("sigma2".to_string(), triplet.sigma2);
        params.insert("gamma".to_string(), triplet.gamma);
        for (i, &(x, m)) in triplet.measure.atoms.iter().enumerate() {
            params.insert(format!("atom{i}_x"), x);
            params.insert(format!("atom{i}_mass"), m);
        }
        for p in &triplet.measure.ac {
            params.extend(p.family.params());
        }
        Self { name: name.to_string(), tag, params, triplet, alpha, regular }
    }

    pub fn closed_form_cf(&self, u: f64) -> Option<Complex64> {
        self.triplet.closed_form_exponent(u).map(|p| p.exp())
    }

    pub fn gamma(a: f64, lambda: f64) -> Self {
        let t = LevyTriplet::gamma(a, lambda).expect("valid gamma parameters");
        Self::new(&format!("gamma_{a}_{lambda}"), Tag::Gamma, t, Some(a), true)
    }

    pub fn gaussian(sigma2: f64) -> Self {
        Self::new(&format!("gaussian_{sigma2}"), Tag::Gaussian, LevyTriplet::gaussian(sigma2), Some(0.0), true)
    }

    pub fn cauchy() -> Self {
        let t = LevyTriplet::from_family(Family::Stable { beta: 1.0, c: 1.0 / PI }).expect("valid");
        Self::new("cauchy", Tag::Stable, t, None, true)
    }

    pub fn stable(beta: f64, c: f64) -> Self {
        let t = LevyTriplet::from_family(Family::Stable { beta, c }).expect("valid stable parameters");
        Self::new(&format!("stable_{beta}"), Tag::Stable, t, None, true)
    }

    pub fn compound_poisson(x: f64, rate: f64) -> Self {
        let t = LevyTriplet::compound_poisson(vec![(x, rate)]).expect("valid atom");
        Self::new("compound_poisson", Tag::CompoundPoisson, t, Some(0.0), true)
    }

    pub fn bilateral_gamma(a_plus: f64, lambda_plus: f64, a_minus: f64, lambda_minus: f64) -> Self {
        let t = LevyTriplet::from_family(Family::BilateralGamma { a_plus, lambda_plus, a_minus, lambda_minus }).expect("valid");
        Self::new("bilateral_gamma", Tag::BilateralGamma, t, Some(a_plus + a_minus), true)
    }

    pub fn tempered_stable(beta: f64, c: f64, lambda: f64) -> Self {
        let t = LevyTriplet::from_family(Family::TemperedStable { beta, c, lambda }).expect("valid");
        let alpha = if beta < 0.0 { Some(0.0) } else { None };
        Self::new(&format!("tempered_stable_{beta}"), Tag::TemperedStable, t, alpha, true)
    }

    pub fn k_step(a: f64, h: f64, y0: f64, lambda: f64) -> Self {
        let t = LevyTriplet::from_family(Family::KStep { a, h, y0, lambda }).expect("valid");
        Self::new("k_step", Tag::Custom, t, Some(a), true)
    }

    pub fn k_oscillating(amp: f64, lambda: f64) -> Self {
        let t = LevyTriplet::from_family(Family::KOscillating { amp, lambda }).expect("valid");
        Self::new("k_oscillating", Tag::Custom, t, None, false)
    }
}

/// The twelve-entry sweep used for the classification checks.
pub fn standard() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry::gamma(2.0, 1.0),
        CatalogEntry::gamma(3.5, 1.0),
        CatalogEntry::gamma(0.5, 3.0),
        CatalogEntry::bilateral_gamma(1.0, 2.0, 0.5, 1.0),
        CatalogEntry::tempered_stable(-0.5, 1.0, 1.0),
        CatalogEntry::compound_poisson(2.0, 1.0),
        CatalogEntry::gaussian(1.0),
        CatalogEntry::cauchy(),
        CatalogEntry::stable(0.5, 1.0),
        CatalogEntry::stable(1.5, 1.0),
        CatalogEntry::k_step(1.5, 0.5, 0.3, 1.0),
        CatalogEntry::k_oscillating(1.0, 1.0),
    ]
}

pub fn by_name(name: &str) -> Option<CatalogEntry> {
    standard().into_iter().find(|e| e.name == name)
}
