//! Seeded synthetic signature corpora.
//!
//! Each user is a fixed set of stroke parameters; a signature is the
//! integral of a sum of lognormal-profiled stroke velocities whose direction
//! sweeps from a start to an end angle. Genuine samples jitter the user's
//! parameters a little, skilled forgeries jitter them more, and different
//! users draw entirely different parameters — which is what gives the
//! corpus its intra-user < forgery < inter-user distance ordering.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::signature::{Corpus, Label, Sample, SignatureTrajectory, UserSignatures};

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    pub seed: u64,
    pub n_users: usize,
    pub genuine_per_user: usize,
    pub forgeries_per_user: usize,
    /// Inclusive range of strokes per signature.
    pub strokes_per_signature: (usize, usize),
    /// Signature duration range in seconds.
    pub duration: (f64, f64),
    pub sample_rate: f64,
    /// Relative jitter applied to a user's parameters for genuine repeats.
    pub genuine_noise: f64,
    /// Relative jitter for skilled forgeries; must exceed `genuine_noise`.
    pub forgery_noise: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            seed: 7,
            n_users: 10,
            genuine_per_user: 10,
            forgeries_per_user: 5,
            strokes_per_signature: (3, 6),
            duration: (1.2, 2.2),
            sample_rate: 100.0,
            genuine_noise: 0.04,
            forgery_noise: 0.22,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 1 || self.genuine_per_user < 1 || self.forgeries_per_user < 1 {
            return Err(Error::Config("all corpus counts must be >= 1".into()));
        }
        if self.strokes_per_signature.0 < 1
            || self.strokes_per_signature.1 < self.strokes_per_signature.0
        {
            return Err(Error::Config("bad strokes_per_signature range".into()));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        if !(self.duration.0 > 0.0 && self.duration.1 >= self.duration.0) {
            return Err(Error::Config("degenerate duration range".into()));
        }
        if !(self.genuine_noise >= 0.0 && self.forgery_noise > self.genuine_noise) {
            return Err(Error::Config(
                "forgery_noise must exceed genuine_noise".into(),
            ));
        }
        Ok(())
    }
}

/// One lognormal-profiled stroke: speed peaks once and decays, while the
/// heading sweeps from `angle_start` to `angle_end` following the profile's
/// cumulative distribution.
#[derive(Debug, Clone, Copy)]
struct Stroke {
    onset: f64,
    amplitude: f64,
    log_mean: f64,
    log_sigma: f64,
    angle_start: f64,
    angle_end: f64,
}

#[derive(Debug, Clone)]
struct UserTemplate {
    strokes: Vec<Stroke>,
    duration: f64,
}

fn erf(x: f64) -> f64 {
    // Abramowitz & Stegun 7.1.26, |error| < 1.5e-7.
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

impl Stroke {
    /// Speed at time `t` and the fraction of the stroke already executed.
    fn speed_and_progress(&self, t: f64) -> (f64, f64) {
        let dt = t - self.onset;
        if dt <= 0.0 {
            return (0.0, 0.0);
        }
        let z = (dt.ln() - self.log_mean) / self.log_sigma;
        let speed = self.amplitude / (self.log_sigma * (std::f64::consts::TAU).sqrt() * dt)
            * (-0.5 * z * z).exp();
        (speed, normal_cdf(z))
    }

    fn velocity(&self, t: f64) -> (f64, f64) {
        let (speed, progress) = self.speed_and_progress(t);
        let angle = self.angle_start + (self.angle_end - self.angle_start) * progress;
        (speed * angle.cos(), speed * angle.sin())
    }
}

fn draw_template(rng: &mut Rng, cfg: &SynthesisConfig) -> UserTemplate {
    let n_strokes = rng.range_usize(cfg.strokes_per_signature.0, cfg.strokes_per_signature.1);
    let duration = rng.uniform(cfg.duration.0, cfg.duration.1);
    let slot = duration / n_strokes as f64;
    let mut strokes = Vec::with_capacity(n_strokes);
    let mut heading = rng.uniform(-0.5, 0.5);
    for k in 0..n_strokes {
        let onset = slot * k as f64 + rng.uniform(0.02, 0.3) * slot;
        // Peak roughly mid-slot: for a lognormal profile the mode sits at
        // exp(mu - sigma^2).
        let log_sigma = rng.uniform(0.18, 0.42);
        let rise = slot * rng.uniform(0.25, 0.55);
        let log_mean = rise.ln() + log_sigma * log_sigma;
        let amplitude = rng.uniform(0.5, 1.6);
        // Mostly rightward progress with turns, like latin handwriting.
        let turn = rng.uniform(-2.4, 2.4);
        let stroke = Stroke {
            onset,
            amplitude,
            log_mean,
            log_sigma,
            angle_start: heading,
            angle_end: heading + turn,
        };
        heading = stroke.angle_end * 0.3 + rng.uniform(-0.9, 0.9);
        strokes.push(stroke);
    }
    let mut template = UserTemplate { strokes, duration };
    // Normalize the nominal trajectory to unit extent: signers fill roughly
    // the same writing area regardless of how sweeping their strokes are.
    let nominal = render(&template, cfg, ("", Label::Genuine, 1));
    let xs: Vec<f64> = nominal.samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = nominal.samples.iter().map(|s| s.y).collect();
    let extent = (span(&xs)).max(span(&ys));
    if extent > 1e-9 {
        for s in template.strokes.iter_mut() {
            s.amplitude /= extent;
        }
    }
    template
}

fn span(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn jitter_template(template: &UserTemplate, rng: &mut Rng, noise: f64) -> UserTemplate {
    let mut out = template.clone();
    out.duration = (template.duration * (1.0 + rng.normal(0.0, noise * 0.5))).max(0.3);
    for s in out.strokes.iter_mut() {
        s.onset = (s.onset * (1.0 + rng.normal(0.0, noise * 0.5))).max(0.0);
        s.amplitude *= 1.0 + rng.normal(0.0, noise);
        s.amplitude = s.amplitude.max(0.05);
        s.log_mean += rng.normal(0.0, noise * 0.5);
        s.log_sigma = (s.log_sigma * (1.0 + rng.normal(0.0, noise * 0.5))).clamp(0.08, 0.9);
        s.angle_start += rng.normal(0.0, noise * 1.5);
        s.angle_end += rng.normal(0.0, noise * 1.5);
    }
    out
}

fn render(
    template: &UserTemplate,
    cfg: &SynthesisConfig,
    meta: (&str, Label, u8),
) -> SignatureTrajectory {
    let dt = 1.0 / cfg.sample_rate;
    let n = (template.duration * cfg.sample_rate).floor() as usize + 1;
    let n = n.max(2);
    let mut samples = Vec::with_capacity(n);
    let (mut x, mut y) = (0.0, 0.0);
    let (mut vx_prev, mut vy_prev) = (0.0, 0.0);
    for i in 0..n {
        let t = i as f64 * dt;
        let (mut vx, mut vy) = (0.0, 0.0);
        for s in &template.strokes {
            let (sx, sy) = s.velocity(t);
            vx += sx;
            vy += sy;
        }
        if i > 0 {
            x += 0.5 * (vx + vx_prev) * dt;
            y += 0.5 * (vy + vy_prev) * dt;
        }
        vx_prev = vx;
        vy_prev = vy;
        samples.push(Sample {
            t,
            x,
            y,
            pressure: None,
        });
    }
    // Center the bounding box at the origin, the way a signer centers their
    // signature in the capture box.
    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let cx = (xs.iter().cloned().fold(f64::INFINITY, f64::min)
        + xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        / 2.0;
    let cy = (ys.iter().cloned().fold(f64::INFINITY, f64::min)
        + ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        / 2.0;
    for s in samples.iter_mut() {
        s.x -= cx;
        s.y -= cy;
    }
    SignatureTrajectory {
        samples,
        user_id: meta.0.to_string(),
        label: meta.1,
        session: meta.2,
    }
}

/// Generates the corpus described by `cfg`. Pure in the configuration: the
/// same config yields a byte-identical corpus.
pub fn generate_corpus(cfg: &SynthesisConfig) -> Result<Corpus> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    let mut corpus = Corpus::default();
    for u in 0..cfg.n_users {
        let user_id = format!("u{:03}", u + 1);
        let mut user_rng = root.derive("user-template", u as u64);
        let template = draw_template(&mut user_rng, cfg);
        let mut set = UserSignatures::default();
        for g in 0..cfg.genuine_per_user {
            let mut sig_rng = root.derive(&format!("genuine/{u}"), g as u64);
            let jittered = jitter_template(&template, &mut sig_rng, cfg.genuine_noise);
            // Two acquisition sessions, like typical corpora.
            let session = if g < cfg.genuine_per_user.div_ceil(2) {
                1
            } else {
                2
            };
            set.genuine
                .push(render(&jittered, cfg, (&user_id, Label::Genuine, session)));
        }
        for f in 0..cfg.forgeries_per_user {
            let mut sig_rng = root.derive(&format!("forgery/{u}"), f as u64);
            let jittered = jitter_template(&template, &mut sig_rng, cfg.forgery_noise);
            set.forgeries
                .push(render(&jittered, cfg, (&user_id, Label::SkilledForgery, 1)));
        }
        corpus.users.insert(user_id, set);
    }
    corpus.validate()?;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::write_signature_file;

    #[test]
    fn same_seed_gives_byte_identical_corpora() {
        let cfg = SynthesisConfig {
            n_users: 3,
            genuine_per_user: 3,
            forgeries_per_user: 2,
            ..Default::default()
        };
        let a = generate_corpus(&cfg).unwrap();
        let b = generate_corpus(&cfg).unwrap();
        for (user, set) in &a.users {
            let other = &b.users[user];
            for (s1, s2) in set.genuine.iter().zip(&other.genuine) {
                assert_eq!(
                    write_signature_file(s1).unwrap(),
                    write_signature_file(s2).unwrap()
                );
            }
            for (s1, s2) in set.forgeries.iter().zip(&other.forgeries) {
                assert_eq!(
                    write_signature_file(s1).unwrap(),
                    write_signature_file(s2).unwrap()
                );
            }
        }
    }

    #[test]
    fn counts_match_config() {
        let cfg = SynthesisConfig {
            n_users: 5,
            genuine_per_user: 10,
            forgeries_per_user: 5,
            ..Default::default()
        };
        let corpus = generate_corpus(&cfg).unwrap();
        assert_eq!(corpus.users.len(), 5);
        for set in corpus.users.values() {
            assert_eq!(set.genuine.len(), 10);
            assert_eq!(set.forgeries.len(), 5);
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_corpus(&SynthesisConfig {
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let b = generate_corpus(&SynthesisConfig {
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let sa = &a.users["u001"].genuine[0];
        let sb = &b.users["u001"].genuine[0];
        assert!(sa.samples.len() != sb.samples.len() || sa.samples != sb.samples);
    }

    #[test]
    fn degenerate_duration_is_a_config_error() {
        let cfg = SynthesisConfig {
            duration: (0.0, 0.0),
            ..Default::default()
        };
        assert!(matches!(generate_corpus(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn forgery_noise_must_exceed_genuine_noise() {
        let cfg = SynthesisConfig {
            genuine_noise: 0.3,
            forgery_noise: 0.2,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn trajectories_are_valid_and_move() {
        let corpus = generate_corpus(&SynthesisConfig::default()).unwrap();
        for set in corpus.users.values() {
            for traj in set.genuine.iter().chain(&set.forgeries) {
                traj.validate().unwrap();
                let xs: Vec<f64> = traj.samples.iter().map(|s| s.x).collect();
                let extent = xs.iter().cloned().fold(f64::MIN, f64::max)
                    - xs.iter().cloned().fold(f64::MAX, f64::min);
                assert!(extent > 1e-3, "signature has no horizontal extent");
            }
        }
    }

    // The corpus-level distance ordering (intra-user < forgery < inter-user
    // by mean pairwise DTW) lives in tests/synthesis_properties.rs next to
    // the DTW oracle it depends on.
}
