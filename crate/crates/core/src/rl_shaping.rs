//! GRPO group advantages plus the two stabilizers used during training:
//! annealed Gaussian noise on reconstructions (hard negatives) and annealed
//! power normalization of group rewards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::renderer::RasterImage;
use crate::sub_seed;

#[derive(Debug, Error, PartialEq)]
pub enum ShapingError {
    #[error("group needs at least 2 rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("reward {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid shaping config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub disable_below: f64,
    pub noisy_count: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_max: 1.0,
            sigma_min: 0.0,
            disable_below: 0.01,
            noisy_count: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerConfig {
    pub p_max: f64,
    pub p_min: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            p_max: 3.0,
            p_min: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapingConfig {
    pub group_size: usize,
    pub noise: NoiseConfig,
    pub power: PowerConfig,
    pub total_steps: u64,
    pub epsilon: f64,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            noise: NoiseConfig::default(),
            power: PowerConfig::default(),
            total_steps: 1000,
            epsilon: 1e-8,
        }
    }
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<(), ShapingError> {
        let fail = |m: &str| Err(ShapingError::Config(m.to_string()));
        let n = &self.noise;
        let p = &self.power;
        if self.group_size < 2 {
            return fail("group_size must be at least 2");
        }
        if !(n.sigma_min >= 0.0 && n.sigma_min <= n.sigma_max && n.sigma_max.is_finite()) {
            return fail("need 0 <= sigma_min <= sigma_max");
        }
        if !(n.disable_below.is_finite() && n.disable_below >= 0.0) {
            return fail("disable_below must be nonnegative");
        }
        if n.noisy_count > self.group_size {
            return fail("noisy_count exceeds group_size");
        }
        if !(p.p_min >= 1.0 && p.p_max >= p.p_min && p.p_max.is_finite()) {
            return fail("need 1 <= p_min <= p_max");
        }
        if self.total_steps == 0 {
            return fail("total_steps must be positive");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        Ok(())
    }

    /// Decay constant, half the training horizon.
    pub fn time_constant(&self) -> f64 {
        self.total_steps as f64 / 2.0
    }

    fn decay(&self, t: u64) -> f64 {
        (-(t as f64) / self.time_constant()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapingMode {
    None,
    Noise,
    #[default]
    Power,
}

impl std::str::FromStr for ShapingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "noise" => Ok(Self::Noise),
            "power" => Ok(Self::Power),
            _ => Err(format!(
                "unknown shaping mode '{s}' (expected none, noise or power)"
            )),
        }
    }
}

fn check_group(rewards: &[f64]) -> Result<(), ShapingError> {
    if rewards.len() < 2 {
        return Err(ShapingError::GroupTooSmall(rewards.len()));
    }
    match rewards.iter().position(|r| !r.is_finite()) {
        Some(index) => Err(ShapingError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Each reward minus the group mean.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, ShapingError> {
    check_group(rewards)?;
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(rewards.iter().map(|r| r - mean).collect())
}

/// Annealed noise level at step `t`, or `None` once it falls below the
/// cutoff.
pub fn sigma_at(t: u64, cfg: &ShapingConfig) -> Option<f64> {
    let n = &cfg.noise;
    let sigma = n.sigma_min + (n.sigma_max - n.sigma_min) * cfg.decay(t);
    (sigma >= n.disable_below).then_some(sigma)
}

/// Annealed power exponent at step `t`.
pub fn alpha_at(t: u64, cfg: &ShapingConfig) -> f64 {
    let p = &cfg.power;
    p.p_min + (p.p_max - p.p_min) * cfg.decay(t)
}

/// Adds clipped i.i.d. Gaussian noise to every channel. Deterministic in
/// `seed`; `sigma == 0` returns the input unchanged.
pub fn inject_noise(img: &RasterImage, sigma: f64, seed: u64) -> RasterImage {
    if !sigma.is_finite() || sigma <= 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0f32, sigma as f32).expect("positive finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    RasterImage::from_rgb(img.width(), img.height(), data).expect("same dimensions")
}

/// Leading `noisy_count` rollouts are noisy, the rest clean.
pub fn assign_rollout_noise(k: usize, noisy_count: usize) -> Vec<bool> {
    (0..k).map(|i| i < noisy_count).collect()
}

/// One reconstruction per rollout for step `t`: the flagged ones get
/// independent noise from per-rollout sub-seeds, computed in parallel.
pub fn rollout_reconstructions(
    img: &RasterImage,
    t: u64,
    cfg: &ShapingConfig,
    seed: u64,
) -> Vec<RasterImage> {
    let sigma = sigma_at(t, cfg);
    assign_rollout_noise(cfg.group_size, cfg.noise.noisy_count)
        .into_par_iter()
        .enumerate()
        .map(|(i, noisy)| match (noisy, sigma) {
            (true, Some(s)) => inject_noise(img, s, sub_seed(seed, i as u64)),
            _ => img.clone(),
        })
        .collect()
}

/// Min-max scales the group and raises it to `alpha`.
pub fn power_normalize_with(
    rewards: &[f64],
    alpha: f64,
    epsilon: f64,
) -> Result<Vec<f64>, ShapingError> {
    check_group(rewards)?;
    let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo + epsilon;
    Ok(rewards
        .iter()
        .map(|r| ((r - lo) / span).powf(alpha))
        .collect())
}

/// Power normalization with the exponent annealed to step `t`.
pub fn power_normalize(
    rewards: &[f64],
    t: u64,
    cfg: &ShapingConfig,
) -> Result<Vec<f64>, ShapingError> {
    power_normalize_with(rewards, alpha_at(t, cfg), cfg.epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapedGroup {
    pub mode: ShapingMode,
    pub step: u64,
    /// Noise level, or `None` when disabled or not in noise mode.
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub noisy: Vec<bool>,
    pub transformed: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Full shaping pass for one group. Power mode normalizes and then
/// mean-centers; noise mode only reports the schedule and rollout flags,
/// since the noise itself lives on the reconstructions.
pub fn shape_group(
    rewards: &[f64],
    t: u64,
    mode: ShapingMode,
    cfg: &ShapingConfig,
) -> Result<ShapedGroup, ShapingError> {
    cfg.validate()?;
    check_group(rewards)?;
    let (sigma, alpha, noisy, transformed) = match mode {
        ShapingMode::None => (None, None, vec![false; rewards.len()], rewards.to_vec()),
        ShapingMode::Noise => {
            let sigma = sigma_at(t, cfg);
            let count = if sigma.is_some() {
                cfg.noise.noisy_count.min(rewards.len())
            } else {
                0
            };
            (
                sigma,
                None,
                assign_rollout_noise(rewards.len(), count),
                rewards.to_vec(),
            )
        }
        ShapingMode::Power => {
            let alpha = alpha_at(t, cfg);
            (
                None,
                Some(alpha),
                vec![false; rewards.len()],
                power_normalize_with(rewards, alpha, cfg.epsilon)?,
            )
        }
    };
    let advantages = group_advantages(&transformed)?;
    Ok(ShapedGroup {
        mode,
        step: t,
        sigma,
        alpha,
        noisy,
        transformed,
        advantages,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn advantages_examples() {
        assert!(close(
            &group_advantages(&[0.9, 0.1]).unwrap(),
            &[0.4, -0.4],
            1e-15
        ));
        assert_eq!(group_advantages(&[0.3; 5]).unwrap(), vec![0.0; 5]);
        assert_eq!(
            group_advantages(&[0.3]),
            Err(ShapingError::GroupTooSmall(1))
        );
        assert_eq!(
            group_advantages(&[0.3, f64::NAN]),
            Err(ShapingError::NonFinite { index: 1 })
        );
    }

    #[test]
    fn schedules_match_closed_form() {
        let cfg = ShapingConfig::default();
        assert_eq!(sigma_at(0, &cfg), Some(1.0));
        assert!((sigma_at(500, &cfg).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(sigma_at(2500, &cfg), None);
        assert!(sigma_at(2302, &cfg).is_some());
        assert_eq!(sigma_at(2303, &cfg), None);
        assert_eq!(alpha_at(0, &cfg), 3.0);
        assert!((alpha_at(500, &cfg) - (1.0 + 2.0 * (-1.0f64).exp())).abs() < 1e-12);
        assert!((alpha_at(2500, &cfg) - (1.0 + 2.0 * (-5.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn schedules_are_monotone() {
        let cfg = ShapingConfig::default();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for t in 0..3000 {
            let s = sigma_at(t, &cfg).unwrap_or(0.0);
            let a = alpha_at(t, &cfg);
            assert!(s <= prev.0 && a <= prev.1);
            prev = (s, a);
        }
    }

    #[test]
    fn rollout_flags() {
        assert_eq!(
            assign_rollout_noise(8, 4),
            [true, true, true, true, false, false, false, false]
        );
        assert!(assign_rollout_noise(8, 0).iter().all(|f| !f));
        assert!(assign_rollout_noise(8, 8).iter().all(|f| *f));
    }

    #[test]
    fn noise_identity_and_determinism() {
        let img = RasterImage::filled(16, 16, 0.5).unwrap();
        assert_eq!(inject_noise(&img, 0.0, 7), img);
        assert_eq!(inject_noise(&img, 0.3, 7), inject_noise(&img, 0.3, 7));
        assert_ne!(inject_noise(&img, 0.3, 7), inject_noise(&img, 0.3, 8));
    }

    /// Standard deviation of clip(0.5 + N(0, 1), 0, 1), by direct Monte Carlo
    /// on scalars rather than through the image path.
    fn clipped_std_oracle() -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let normal = Normal::new(0.0f64, 1.0).unwrap();
        let xs: Vec<f64> = (0..400_000)
            .map(|_| (0.5 + normal.sample(&mut rng)).clamp(0.0, 1.0))
            .collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
    }

    #[test]
    fn full_noise_on_mid_gray_is_clipped() {
        let img = RasterImage::filled(200, 200, 0.5).unwrap();
        let out = inject_noise(&img, 1.0, 1);
        let d = out.data();
        let m = d.iter().map(|&v| v as f64).sum::<f64>() / d.len() as f64;
        let sd = (d.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
        assert!((0.3..=0.5).contains(&sd), "{sd}");
        assert!((sd - clipped_std_oracle()).abs() < 0.005, "{sd}");
        assert!(d.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rollouts_follow_flags() {
        let img = RasterImage::filled(8, 8, 0.5).unwrap();
        let cfg = ShapingConfig::default();
        let early = rollout_reconstructions(&img, 0, &cfg, 3);
        assert_eq!(early.len(), 8);
        assert!(early[..4].iter().all(|r| *r != img));
        assert!(early[4..].iter().all(|r| *r == img));
        assert_ne!(early[0], early[1]);
        assert_eq!(early, rollout_reconstructions(&img, 0, &cfg, 3));
        assert!(rollout_reconstructions(&img, 5000, &cfg, 3)
            .iter()
            .all(|r| *r == img));
    }

    #[test]
    fn power_examples() {
        let r = [0.2, 0.5, 0.8];
        assert!(close(
            &power_normalize_with(&r, 1.0, 1e-8).unwrap(),
            &[0.0, 0.5, 1.0],
            1e-7
        ));
        assert!(close(
            &power_normalize_with(&r, 3.0, 1e-8).unwrap(),
            &[0.0, 0.125, 1.0],
            1e-7
        ));
        assert_eq!(
            power_normalize_with(&[0.4; 4], 3.0, 1e-8).unwrap(),
            vec![0.0; 4]
        );
        let out = power_normalize(&r, 0, &ShapingConfig::default()).unwrap();
        assert!(out.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn shape_group_modes() {
        let cfg = ShapingConfig::default();
        let none = shape_group(&[0.9, 0.1], 0, ShapingMode::None, &cfg).unwrap();
        assert!(close(&none.advantages, &[0.4, -0.4], 1e-15));
        let power = shape_group(&[0.2, 0.5, 0.8], 0, ShapingMode::Power, &cfg).unwrap();
        assert_eq!(power.alpha, Some(3.0));
        let m = (0.0 + 0.125 + 1.0) / 3.0;
        assert!(close(&power.advantages, &[-m, 0.125 - m, 1.0 - m], 1e-7));
        let noise = shape_group(&[0.1; 8], 0, ShapingMode::Noise, &cfg).unwrap();
        assert_eq!(noise.sigma, Some(1.0));
        assert_eq!(noise.noisy.iter().filter(|f| **f).count(), 4);
        let late = shape_group(&[0.1; 8], 5000, ShapingMode::Noise, &cfg).unwrap();
        assert!(late.sigma.is_none() && late.noisy.iter().all(|f| !f));
        assert!(shape_group(&[0.1], 0, ShapingMode::None, &cfg).is_err());
        assert_eq!("power".parse::<ShapingMode>(), Ok(ShapingMode::Power));
        assert!("loud".parse::<ShapingMode>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ShapingConfig::default().validate().is_ok());
        let mut c = ShapingConfig::default();
        c.power.p_min = 0.5;
        assert!(c.validate().is_err());
        let mut c = ShapingConfig::default();
        c.noise.noisy_count = 9;
        assert!(c.validate().is_err());
        let c = ShapingConfig {
            total_steps: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    /// Power normalization followed by centering does not always widen the
    /// largest advantage: a full-range group whose normalized mass sits near
    /// the top shrinks under the power.
    #[test]
    fn max_advantage_can_shrink_on_full_range_groups() {
        let r = [0.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 1.0];
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let plain = max_abs(&group_advantages(&r).unwrap());
        let powered =
            max_abs(&group_advantages(&power_normalize_with(&r, 3.0, 1e-8).unwrap()).unwrap());
        assert!(powered < plain);
    }

    fn group() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..=1.0, 2..12)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn advantages_sum_to_zero_and_shift_invariant(r in group(), c in -5.0f64..5.0) {
            let a = group_advantages(&r).unwrap();
            prop_assert!(a.iter().sum::<f64>().abs() < 1e-12);
            let shifted: Vec<f64> = r.iter().map(|x| x + c).collect();
            prop_assert!(close(&group_advantages(&shifted).unwrap(), &a, 1e-12));
        }

        #[test]
        fn power_is_rank_preserving(r in group(), alpha in 1.0f64..=3.0) {
            let out = power_normalize_with(&r, alpha, 1e-8).unwrap();
            for i in 0..r.len() {
                prop_assert!((0.0..1.0).contains(&out[i]));
                for j in 0..r.len() {
                    if r[i] > r[j] {
                        prop_assert!(out[i] > out[j], "{:?} -> {:?}", r, out);
                    }
                }
            }
        }

        #[test]
        fn power_amplifies_ratios(r in group(), alpha in 1.01f64..=3.0) {
            let lin = power_normalize_with(&r, 1.0, 1e-8).unwrap();
            let out = power_normalize_with(&r, alpha, 1e-8).unwrap();
            for i in 0..r.len() {
                for j in 0..r.len() {
                    if lin[i] > lin[j] && lin[j] > 0.0 {
                        prop_assert!(out[i] / out[j] > lin[i] / lin[j]);
                    }
                }
            }
        }

        #[test]
        fn power_widens_max_advantage_on_narrow_groups(
            base in 0.0f64..0.5,
            spread in 1e-3f64..=0.5,
            k in 2usize..12,
            seed in any::<u64>(),
            alpha in 1.01f64..=3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut r: Vec<f64> = (0..k).map(|_| base + spread * rng.random::<f64>()).collect();
            r[0] = base;
            r[1] = base + spread;
            let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let plain = max_abs(&group_advantages(&r).unwrap());
            let powered = max_abs(&group_advantages(&power_normalize_with(&r, alpha, 1e-8).unwrap()).unwrap());
            prop_assert!(powered > plain);
        }
    }
}
