//! Probability vectors over a taxonomy and the algebra used throughout the
//! pipeline.

use std::sync::Arc;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;

/// Sum deviation accepted as-is.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Sum deviation that is silently renormalized; anything larger is rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Mixture {
    taxonomy: Arc<Taxonomy>,
    weights: Vec<f64>,
}

impl PartialEq for Mixture {
    fn eq(&self, other: &Self) -> bool {
        same_taxonomy(&self.taxonomy, &other.taxonomy) && self.weights == other.weights
    }
}

pub(crate) fn same_taxonomy(a: &Arc<Taxonomy>, b: &Arc<Taxonomy>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidMixture(format!("weight {i} is {w}")));
        }
        sum += w;
    }
    Ok(sum)
}

impl Mixture {
    /// Validates `weights`, renormalizing when the sum is off by less than
    /// [`RENORMALIZE_TOLERANCE`].
    pub fn new(taxonomy: Arc<Taxonomy>, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != taxonomy.arity() {
            return Err(Error::InvalidMixture(format!(
                "{} weights for taxonomy {} of arity {}",
                weights.len(),
                taxonomy,
                taxonomy.arity()
            )));
        }
        let sum = check_weights(&weights)?;
        let dev = (sum - 1.0).abs();
        if dev >= RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidMixture(format!("weights sum to {sum}")));
        }
        // Rounding-level deviations are kept so that serialized weights
        // round-trip bit-exactly.
        if dev > 1e-12 {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(Mixture { taxonomy, weights })
    }

    /// Normalizes arbitrary nonnegative mass (counts, percentages) into a
    /// mixture.
    pub fn from_mass(taxonomy: Arc<Taxonomy>, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != taxonomy.arity() {
            return Err(Error::InvalidMixture(format!(
                "{} weights for taxonomy {} of arity {}",
                mass.len(),
                taxonomy,
                taxonomy.arity()
            )));
        }
        let sum = check_weights(&mass)?;
        if sum <= 0.0 {
            return Err(Error::InvalidMixture("total mass is zero".into()));
        }
        let weights = mass.into_iter().map(|m| m / sum).collect();
        Ok(Mixture { taxonomy, weights })
    }

    pub fn uniform(taxonomy: Arc<Taxonomy>) -> Self {
        let n = taxonomy.arity();
        Mixture {
            taxonomy,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn indicator(taxonomy: Arc<Taxonomy>, id: usize) -> Result<Self> {
        taxonomy.check_id(id)?;
        let mut weights = vec![0.0; taxonomy.arity()];
        weights[id] = 1.0;
        Ok(Mixture { taxonomy, weights })
    }

    /// Trusted constructor for weights already known to lie on the simplex.
    pub(crate) fn from_raw(taxonomy: Arc<Taxonomy>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), taxonomy.arity());
        Mixture { taxonomy, weights }
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    pub fn weight_of(&self, name: &str) -> Result<f64> {
        Ok(self.weights[self.taxonomy.resolve_label(name)?])
    }

    pub fn ensure_same_taxonomy(&self, other: &Mixture) -> Result<()> {
        ensure_taxonomy(&self.taxonomy, &other.taxonomy)
    }

    /// Largest absolute coordinate difference.
    pub fn linf_distance(&self, other: &Mixture) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Interpolates `beta * self + (1 - beta) * other`.
    pub fn lerp(&self, other: &Mixture, beta: f64) -> Result<Mixture> {
        self.ensure_same_taxonomy(other)?;
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| b + beta * (a - b))
            .collect();
        Ok(Mixture::from_raw(self.taxonomy.clone(), weights))
    }

    pub fn to_file(&self) -> MixtureFile {
        MixtureFile {
            taxonomy: self.taxonomy.label().to_string(),
            weights: self
                .taxonomy
                .names()
                .iter()
                .cloned()
                .zip(self.weights.iter().copied())
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("mixture serializes");
        s.push('\n');
        s
    }

    /// Reads the mixture file format. Missing categories read as zero and the
    /// weights go through the usual renormalization rule.
    pub fn from_file(file: &MixtureFile) -> Result<Mixture> {
        let taxonomy = Arc::new(Taxonomy::from_spec(&file.taxonomy)?);
        Self::from_named_weights(taxonomy, file.weights.iter().map(|(k, v)| (k.as_str(), *v)))
    }

    pub fn from_named_weights<'a>(
        taxonomy: Arc<Taxonomy>,
        entries: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Mixture> {
        let mut weights = vec![0.0; taxonomy.arity()];
        for (name, w) in entries {
            weights[taxonomy.resolve_label(name)?] += w;
        }
        Mixture::new(taxonomy, weights)
    }

    pub fn from_json_str(s: &str) -> Result<Mixture> {
        let file: MixtureFile = serde_json::from_str(s)?;
        Self::from_file(&file)
    }
}

pub(crate) fn ensure_taxonomy(a: &Arc<Taxonomy>, b: &Arc<Taxonomy>) -> Result<()> {
    if same_taxonomy(a, b) {
        Ok(())
    } else {
        Err(Error::TaxonomyMismatch {
            expected: a.label().to_string(),
            found: b.label().to_string(),
        })
    }
}

/// On-disk mixture: `{"taxonomy": "...", "weights": {name: weight}}`, with
/// weights written in taxonomy order.
#[derive(Debug, Clone, Deserialize)]
pub struct MixtureFile {
    pub taxonomy: String,
    #[serde(deserialize_with = "ordered_weights")]
    pub weights: Vec<(String, f64)>,
}

impl Serialize for MixtureFile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Weights<'a>(&'a [(String, f64)]);
        impl Serialize for Weights<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.len()))?;
                for (k, v) in self.0 {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("taxonomy", &self.taxonomy)?;
        map.serialize_entry("weights", &Weights(&self.weights))?;
        map.end()
    }
}

fn ordered_weights<'de, D>(d: D) -> std::result::Result<Vec<(String, f64)>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    struct V;
    impl<'de> serde::de::Visitor<'de> for V {
        type Value = Vec<(String, f64)>;
        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a map from category name to weight")
        }
        fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some((k, v)) = map.next_entry::<String, f64>()? {
                out.push((k, v));
            }
            Ok(out)
        }
    }
    d.deserialize_map(V)
}

/// `normalize(p_i^(1/tau))`; `tau > 1` flattens the distribution.
pub fn temper(p: &Mixture, tau: f64) -> Result<Mixture> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidTemperature(tau));
    }
    let exponent = 1.0 / tau;
    let powered: Vec<f64> = p
        .weights
        .iter()
        .map(|&w| if w > 0.0 { w.powf(exponent) } else { 0.0 })
        .collect();
    Mixture::from_mass(p.taxonomy.clone(), powered)
}

/// KL(p || q) in nats over the raw weight slices. Returns `+inf` when `q`
/// lacks support where `p` has mass.
pub fn kl_weights(p: &[f64], q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            kl += pi * (pi / qi).ln();
        }
    }
    kl.max(0.0)
}

pub fn kl_divergence(p: &Mixture, q: &Mixture) -> Result<f64> {
    p.ensure_same_taxonomy(q)?;
    Ok(kl_weights(&p.weights, &q.weights))
}

/// `mix_i / corpus_i`, with `0/0 = 0` and `x/0 = +inf` for `x > 0`.
pub fn upsampling_factors(mix: &Mixture, corpus: &Mixture) -> Result<Vec<f64>> {
    mix.ensure_same_taxonomy(corpus)?;
    Ok(mix
        .weights
        .iter()
        .zip(&corpus.weights)
        .map(|(&m, &c)| {
            if c > 0.0 {
                m / c
            } else if m > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect())
}

/// Independent composition of two mixtures over the product taxonomy.
pub fn product_mixture(a: &Mixture, b: &Mixture) -> Mixture {
    let taxonomy = Arc::new(Taxonomy::product(a.taxonomy.clone(), b.taxonomy.clone()));
    product_mixture_in(taxonomy, a, b).expect("taxonomy built from the inputs")
}

/// Like [`product_mixture`] but reuses an existing product taxonomy.
pub fn product_mixture_in(taxonomy: Arc<Taxonomy>, a: &Mixture, b: &Mixture) -> Result<Mixture> {
    let (ta, tb) = taxonomy.factors().ok_or_else(|| Error::TaxonomyMismatch {
        expected: "product".into(),
        found: taxonomy.label().to_string(),
    })?;
    ensure_taxonomy(ta, &a.taxonomy)?;
    ensure_taxonomy(tb, &b.taxonomy)?;
    let mut weights = Vec::with_capacity(a.arity() * b.arity());
    for &x in &a.weights {
        for &y in &b.weights {
            weights.push(x * y);
        }
    }
    Ok(Mixture::from_raw(taxonomy, weights))
}

/// Marginals of a product mixture over its two factor taxonomies.
pub fn product_marginals(m: &Mixture) -> Result<(Mixture, Mixture)> {
    let (ta, tb) = m.taxonomy.factors().ok_or_else(|| Error::TaxonomyMismatch {
        expected: "product".into(),
        found: m.taxonomy.label().to_string(),
    })?;
    let mut a = vec![0.0; ta.arity()];
    let mut b = vec![0.0; tb.arity()];
    for (id, &w) in m.weights.iter().enumerate() {
        let (x, y) = m.taxonomy.split_cell(id).expect("cell in range");
        a[x] += w;
        b[y] += w;
    }
    Ok((Mixture::from_raw(ta.clone(), a), Mixture::from_raw(tb.clone(), b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(k: usize) -> Arc<Taxonomy> {
        Arc::new(Taxonomy::clusters(k).unwrap())
    }

    fn mix(w: &[f64]) -> Mixture {
        Mixture::new(toy(w.len()), w.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn temper_examples() {
        assert!(close(
            temper(&mix(&[0.5, 0.5]), 2.0).unwrap().weights(),
            &[0.5, 0.5],
            1e-15
        ));
        assert!(close(
            temper(&mix(&[0.8, 0.2]), 1.0).unwrap().weights(),
            &[0.8, 0.2],
            1e-15
        ));
        // sqrt = [0.9, 0.3, 0.3, 0.1], total 1.6
        let t = temper(&mix(&[0.81, 0.09, 0.09, 0.01]), 2.0).unwrap();
        assert!(close(t.weights(), &[0.5625, 0.1875, 0.1875, 0.0625], 1e-12));
    }

    #[test]
    fn temper_rejects_bad_tau() {
        let m = mix(&[0.5, 0.5]);
        for tau in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(temper(&m, tau), Err(Error::InvalidTemperature(_))));
        }
    }

    #[test]
    fn temper_large_tau_flattens_support() {
        let t = temper(&mix(&[0.7, 0.3, 0.0]), 1e6).unwrap();
        assert!(close(t.weights(), &[0.5, 0.5, 0.0], 1e-5));
    }

    #[test]
    fn kl_examples() {
        let p = mix(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let q = mix(&[0.25, 0.75]);
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&p, &q).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.14384).abs() < 1e-5);
        let a = mix(&[1.0, 0.0]);
        let b = mix(&[0.0, 1.0]);
        assert_eq!(kl_divergence(&a, &b).unwrap(), f64::INFINITY);
        assert!(matches!(
            kl_divergence(&p, &mix(&[0.2, 0.3, 0.5])),
            Err(Error::TaxonomyMismatch { .. })
        ));
    }

    #[test]
    fn upsampling_examples() {
        let f = upsampling_factors(&mix(&[0.263, 0.737]), &mix(&[0.041, 0.959])).unwrap();
        assert!((f[0] - 6.4146).abs() < 1e-3);
        let f = upsampling_factors(&mix(&[0.203, 0.797]), &mix(&[0.036, 0.964])).unwrap();
        assert!((f[0] - 5.6389).abs() < 1e-3);
        let m = mix(&[0.2, 0.3, 0.5]);
        assert_eq!(upsampling_factors(&m, &m).unwrap(), vec![1.0; 3]);
        let f = upsampling_factors(&mix(&[0.5, 0.5, 0.0]), &mix(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(f, vec![0.5, f64::INFINITY, 0.0]);
    }

    #[test]
    fn product_examples() {
        let a = mix(&[0.7, 0.3]);
        let b = mix(&[0.6, 0.4]);
        let p = product_mixture(&a, &b);
        assert!(close(p.weights(), &[0.42, 0.28, 0.18, 0.12], 1e-15));
        let (ma, mb) = product_marginals(&p).unwrap();
        assert!(close(ma.weights(), a.weights(), 1e-15));
        assert!(close(mb.weights(), b.weights(), 1e-15));

        let t = Arc::new(Taxonomy::topics());
        let f = Arc::new(Taxonomy::formats());
        let u = product_mixture(&Mixture::uniform(t.clone()), &Mixture::uniform(f.clone()));
        assert_eq!(u.arity(), 576);
        assert!(u.weights().iter().all(|w| (w - 1.0 / 576.0).abs() < 1e-15));
        let point = product_mixture(&Mixture::indicator(t, 3).unwrap(), &Mixture::indicator(f, 5).unwrap());
        assert_eq!(point.weights()[3 * 24 + 5], 1.0);
        assert_eq!(point.weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn constructor_tolerance() {
        let t = toy(2);
        assert!(Mixture::new(t.clone(), vec![0.5, 0.5 + 5e-7]).is_ok());
        assert!(Mixture::new(t.clone(), vec![0.5, 0.51]).is_err());
        assert!(Mixture::new(t.clone(), vec![1.5, -0.5]).is_err());
        assert!(Mixture::new(t, vec![1.0]).is_err());
    }

    #[test]
    fn file_round_trip_and_missing_names() {
        let t = Arc::new(Taxonomy::formats());
        let m = Mixture::from_named_weights(t.clone(), [("Tutorial", 0.75), ("FAQ", 0.25)]).unwrap();
        let back = Mixture::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.weight_of("Academic Writing").unwrap(), 0.0);
    }
}
