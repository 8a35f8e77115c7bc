//! A-priori parameter choice rules: the regularization parameter and the
//! size of the network family as functions of the noise level.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    /// `alpha = C delta`.
    Proportional,
    /// `alpha = C delta^(2 / (2 mu + 1))` for source exponent `mu`.
    Holder { mu: f64 },
}

impl AlphaRule {
    pub fn exponent(&self) -> f64 {
        match *self {
            AlphaRule::Proportional => 1.0,
            AlphaRule::Holder { mu } => 2.0 / (2.0 * mu + 1.0),
        }
    }
}

pub fn alpha_of_delta(delta: f64, rule: AlphaRule, constant: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if !(constant > 0.0) {
        return Err(Error::invalid(format!("rule constant must be positive, got {constant}")));
    }
    if let AlphaRule::Holder { mu } = rule {
        check_mu(mu)?;
    }
    Ok(constant * delta.powf(rule.exponent()))
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&mu) {
        return Err(Error::invalid(format!("source exponent mu must lie in [1/2, 1], got {mu}")));
    }
    Ok(())
}

/// Smoothness and sizing constants for the network family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    /// Source-condition exponent.
    pub mu: f64,
    /// Hoelder smoothness of the target.
    pub beta: f64,
    /// Input dimension.
    pub d: u32,
    /// Exponent in the weight-bound growth.
    pub s: u32,
    /// Constant in `alpha(delta)`.
    pub alpha_constant: f64,
    /// Constant in the neuron count.
    pub neuron_constant: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        Self { mu: 1.0, beta: 1.0, d: 2, s: 1, alpha_constant: 1.0, neuron_constant: 1.0 }
    }
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if self.d == 0 || self.s == 0 {
            return Err(Error::invalid("d and s must be at least 1"));
        }
        if !(self.alpha_constant > 0.0 && self.neuron_constant > 0.0) {
            return Err(Error::invalid("rule constants must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSize {
    /// Number of affine layers, output layer included.
    pub depth: usize,
    pub total_neurons: usize,
    pub weight_bound: f64,
    /// `depth - 1` hidden widths summing to `max(total_neurons, depth - 1)`.
    pub hidden_widths: Vec<usize>,
}

/// `7 + (1 + ceil(log2 beta)) (11 + beta d)`, rounded up.
pub fn depth_for(beta: f64, d: u32) -> usize {
    let log_term = beta.log2().ceil();
    (7.0 + (1.0 + log_term) * (11.0 + beta * d as f64)).ceil() as usize
}

/// Sizes the network family for noise level `delta in (0, 1/2)`.
///
/// The weight bound must be `o(delta^(-2s/3))`; the witness used here is
/// `delta^(-2s/3) / (1 + ln(1/delta))`, which is also nondecreasing as
/// `delta` shrinks over the whole admissible interval.
pub fn network_size_of_delta(delta: f64, rp: &RateParams) -> Result<NetworkSize> {
    rp.validate()?;
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::invalid(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    let depth = depth_for(rp.beta, rp.d);
    let total_neurons = (rp.neuron_constant * delta.powf(-2.0 * rp.d as f64 / (3.0 * rp.beta))).ceil() as usize;
    let weight_bound = delta.powf(-2.0 * rp.s as f64 / 3.0) / (1.0 + (1.0 / delta).ln());

    let n_hidden = depth.saturating_sub(1).max(1);
    let spread = total_neurons.max(n_hidden);
    let (base, extra) = (spread / n_hidden, spread % n_hidden);
    let hidden_widths = (0..n_hidden).map(|i| base + usize::from(i < extra)).collect();
    Ok(NetworkSize { depth, total_neurons, weight_bound, hidden_widths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_rule() {
        assert_eq!(alpha_of_delta(0.1, AlphaRule::Proportional, 1.0).unwrap(), 0.1);
    }

    #[test]
    fn holder_rule_values() {
        let a = alpha_of_delta(1e-3, AlphaRule::Holder { mu: 1.0 }, 1.0).unwrap();
        assert!((a - 1e-2).abs() <= 1e-15);
        let b = alpha_of_delta(1e-4, AlphaRule::Holder { mu: 0.5 }, 2.0).unwrap();
        assert!((b - 2e-4).abs() <= 1e-18);
    }

    #[test]
    fn alpha_rule_errors() {
        assert!(alpha_of_delta(0.0, AlphaRule::Proportional, 1.0).is_err());
        assert!(alpha_of_delta(-1.0, AlphaRule::Proportional, 1.0).is_err());
        assert!(alpha_of_delta(0.1, AlphaRule::Holder { mu: 2.0 }, 1.0).is_err());
        assert!(alpha_of_delta(0.1, AlphaRule::Proportional, 0.0).is_err());
    }

    #[test]
    fn alpha_homogeneous_and_increasing() {
        let rule = AlphaRule::Holder { mu: 0.75 };
        let mut prev = 0.0;
        for k in 1..50 {
            let d = k as f64 * 0.01;
            let a1 = alpha_of_delta(d, rule, 1.0).unwrap();
            assert_eq!(alpha_of_delta(d, rule, 3.5).unwrap(), 3.5 * a1);
            assert!(a1 > prev);
            prev = a1;
        }
    }

    #[test]
    fn depth_formula() {
        let rp = RateParams::default();
        let size = network_size_of_delta(0.1, &rp).unwrap();
        assert_eq!(size.depth, 20);
        assert_eq!(size.total_neurons, 22);
        assert_eq!(size.hidden_widths.len(), 19);
        assert_eq!(size.hidden_widths.iter().sum::<usize>(), 22);
        // ceil(log2 1.5) = 1
        assert_eq!(depth_for(1.5, 2), 7 + 2 * 14);
        assert_eq!(depth_for(0.5, 1), 7);
    }

    #[test]
    fn depth_independent_of_delta() {
        let rp = RateParams { beta: 2.0, d: 3, ..Default::default() };
        let d0 = network_size_of_delta(0.4, &rp).unwrap().depth;
        for delta in [1e-1, 1e-3, 1e-6] {
            assert_eq!(network_size_of_delta(delta, &rp).unwrap().depth, d0);
        }
    }

    #[test]
    fn sizes_grow_as_delta_shrinks() {
        for s in 1..4 {
            let rp = RateParams { s, ..Default::default() };
            let mut prev = network_size_of_delta(0.49, &rp).unwrap();
            let mut delta = 0.49;
            while delta > 1e-8 {
                delta *= 0.8;
                let cur = network_size_of_delta(delta, &rp).unwrap();
                assert!(cur.weight_bound >= prev.weight_bound, "s={s} delta={delta}");
                assert!(cur.total_neurons >= prev.total_neurons);
                prev = cur;
            }
        }
    }

    #[test]
    fn weight_bound_is_little_o() {
        let rp = RateParams::default();
        let mut prev = f64::INFINITY;
        for k in 1..=7 {
            let delta = 10f64.powi(-k);
            let c = network_size_of_delta(delta, &rp).unwrap().weight_bound;
            let ratio = c * delta.powf(2.0 / 3.0);
            assert!(ratio < prev);
            prev = ratio;
        }
        assert!(prev < 0.06);
    }

    #[test]
    fn sizing_errors() {
        let rp = RateParams::default();
        assert!(network_size_of_delta(0.5, &rp).is_err());
        assert!(network_size_of_delta(0.0, &rp).is_err());
        let bad = RateParams { beta: 0.0, ..rp };
        assert!(network_size_of_delta(0.1, &bad).is_err());
    }
}
