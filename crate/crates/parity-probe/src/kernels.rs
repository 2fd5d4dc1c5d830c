//! Deterministic numerical primitives: standard normal CDF and quantile,
//! log binomial coefficients, and a seeded substream-capable random source.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};

/// A real number guaranteed to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidProbability(value))
        }
    }

    /// Clamps into `[0, 1]`; for values that are in range up to floating
    /// round-off by construction.
    pub(crate) fn saturating(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Immutable descriptor of a reproducible random stream.
///
/// Identical `(seed, stream)` pairs yield identical sample sequences on every
/// platform; distinct streams are statistically independent. Substreams are
/// derived by index so that parallel consumers need no coordination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives the `index`-th substream. Counter-based, so results do not
    /// depend on the order substreams are consumed in.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        }
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(Probability::saturating(phi(x)))
}

/// Unchecked Φ(x) for internal hot paths; `x` must be finite.
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

pub(crate) fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

// Rational Chebyshev approximation of erfc (Cody, Math. Comp. 23, 1969),
// accurate to full double precision on the ranges used here.
fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 0.46875 {
        return 1.0 - erf_small(x);
    }
    let result = if ax <= 4.0 {
        erfc_mid(ax)
    } else {
        erfc_large(ax)
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

fn erf_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.161_123_743_870_565_6e0,
        1.138_641_541_510_501_5e2,
        3.774_852_376_853_020_3e2,
        3.209_377_589_138_469_4e3,
        1.857_777_061_846_031_5e-1,
    ];
    const B: [f64; 4] = [
        2.360_129_095_234_412_1e1,
        2.440_246_379_344_441_7e2,
        1.282_616_526_077_372_3e3,
        2.844_236_833_439_171e3,
    ];
    let y = x * x;
    let num = (((A[4] * y + A[0]) * y + A[1]) * y + A[2]) * y + A[3];
    let den = (((y + B[0]) * y + B[1]) * y + B[2]) * y + B[3];
    x * num / den
}

fn erfc_mid(ax: f64) -> f64 {
    const C: [f64; 9] = [
        5.641_884_969_886_700_9e-1,
        8.883_149_794_388_376e0,
        6.611_919_063_714_163e1,
        2.986_351_381_974_001_3e2,
        8.819_522_212_417_691e2,
        1.712_047_612_634_070_6e3,
        2.051_078_377_826_071_5e3,
        1.230_339_354_797_997_2e3,
        2.153_115_354_744_038_5e-8,
    ];
    const D: [f64; 8] = [
        1.574_492_611_070_983_5e1,
        1.176_939_508_913_125e2,
        5.371_811_018_620_098_5e2,
        1.621_389_574_566_690_2e3,
        3.290_799_235_733_459_6e3,
        4.362_619_090_143_247e3,
        3.439_367_674_143_721_6e3,
        1.230_339_354_803_749_4e3,
    ];
    let mut num = C[8] * ax;
    let mut den = ax;
    for i in 0..7 {
        num = (num + C[i]) * ax;
        den = (den + D[i]) * ax;
    }
    let ratio = (num + C[7]) / (den + D[7]);
    scaled_exp(ax) * ratio
}

fn erfc_large(ax: f64) -> f64 {
    const P: [f64; 6] = [
        3.053_266_349_612_323_4e-1,
        3.603_448_999_498_044_4e-1,
        1.257_817_261_112_292_5e-1,
        1.608_378_514_874_227_7e-2,
        6.587_491_615_298_378e-4,
        1.631_538_713_730_209_8e-2,
    ];
    const Q: [f64; 5] = [
        2.568_520_192_289_822_4e0,
        1.872_952_849_923_460_5e0,
        5.279_051_029_514_284e-1,
        6.051_834_131_244_132e-2,
        2.335_204_976_268_691_8e-3,
    ];
    const INV_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;
    let y = 1.0 / (ax * ax);
    let mut num = P[5] * y;
    let mut den = y;
    for i in 0..4 {
        num = (num + P[i]) * y;
        den = (den + Q[i]) * y;
    }
    let r = y * (num + P[4]) / (den + Q[4]);
    scaled_exp(ax) * (INV_SQRT_PI - r) / ax
}

// exp(-x^2) split so the squared term is exact in the leading part.
fn scaled_exp(ax: f64) -> f64 {
    let lead = (ax * 16.0).trunc() / 16.0;
    let del = (ax - lead) * (ax + lead);
    (-lead * lead).exp() * (-del).exp()
}

/// Standard normal quantile Φ⁻¹(p). Rejects p outside the open interval (0, 1).
pub fn normal_quantile(p: Probability) -> Result<f64> {
    let p = p.value();
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::QuantileOutOfRange(p));
    }
    Ok(quantile_unchecked(p))
}

// Acklam's rational approximation refined by one Newton step against the
// high-accuracy CDF above. The upper half is folded onto the lower via the
// exact complement (1 - p is exact for p >= 0.5), where the CDF carries full
// relative precision and the Newton correction stays meaningful in the tail.
pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        -quantile_lower(1.0 - p)
    } else {
        quantile_lower(p)
    }
}

// p in (0, 0.5]
fn quantile_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239e0,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838e0,
        -2.549_732_539_343_734e0,
        4.374_664_141_464_968e0,
        2.938_163_982_698_783e0,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996e0,
        3.754_408_661_907_416e0,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        q * (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5])
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let pdf = normal_pdf(x);
    if pdf > 0.0 {
        x - (phi(x) - p) / pdf
    } else {
        x
    }
}

/// Draws one Binomial(n, p) sample from the given source. Pure: the same
/// source always yields the same value.
pub fn binomial_sample(n: u64, p: Probability, source: &RandomSource) -> u64 {
    if n == 0 {
        return 0;
    }
    let dist = rand_distr::Binomial::new(n, p.value()).expect("probability invariant holds");
    dist.sample(&mut source.rng())
}

/// ln C(n, k), computed by compensated summation of term logs.
pub fn log_binomial_coefficient(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::BinomialIndex { n, k });
    }
    let k = k.min(n - k);
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for i in 1..=k {
        let term = (((n - k + i) as f64) / (i as f64)).ln();
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(normal_cdf(0.0).unwrap().value(), 0.5);
    }

    #[test]
    fn cdf_at_upper_critical_value() {
        // Quadrature reference: Phi(1.959964) = 0.9750000009035576
        let got = normal_cdf(1.959964).unwrap().value();
        assert!((got - 0.975_000_000_903_557_6).abs() <= 1e-12);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_median_is_zero() {
        let p = Probability::new(0.5).unwrap();
        assert_eq!(normal_quantile(p).unwrap(), 0.0);
    }

    #[test]
    fn quantile_reference_points() {
        // Bisection against the quadrature CDF gives:
        //   q(0.975) = 1.9599639845400545, q(0.995) = 2.5758293035489008
        let q975 = normal_quantile(Probability::new(0.975).unwrap()).unwrap();
        assert!((q975 - 1.959_963_984_540_054_5).abs() <= 1e-5);
        let q995 = normal_quantile(Probability::new(0.995).unwrap()).unwrap();
        assert!((q995 - 2.575_829_303_548_900_8).abs() <= 1e-5);
    }

    #[test]
    fn quantile_rejects_endpoints() {
        assert!(normal_quantile(Probability::new(0.0).unwrap()).is_err());
        assert!(normal_quantile(Probability::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn quantile_cdf_consistency_extreme_tails() {
        for &p in &[1e-10, 1e-6, 1e-3, 0.2, 0.8, 1.0 - 1e-6, 1.0 - 1e-10] {
            let x = quantile_unchecked(p);
            assert!(
                (phi(x) - p).abs() <= 1e-9,
                "p = {p}: phi(q(p)) = {}",
                phi(x)
            );
        }
    }

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(-0.1).is_err());
        assert!(Probability::new(1.1).is_err());
        assert!(Probability::new(f64::NAN).is_err());
    }

    #[test]
    fn log_binomial_hand_values() {
        assert_eq!(log_binomial_coefficient(7, 0).unwrap(), 0.0);
        let ln10 = log_binomial_coefficient(5, 2).unwrap();
        assert!((ln10 - 10.0f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn log_binomial_against_bigint_oracle() {
        // ln C(1000, 500) from exact big-integer arithmetic.
        let exact = big_ln_choose(1000, 500);
        let got = log_binomial_coefficient(1000, 500).unwrap();
        assert!(((got - exact) / exact).abs() <= 1e-10);
        assert!((exact - 689.467_261_567_851_2).abs() < 1e-9);
    }

    #[test]
    fn log_binomial_rejects_k_above_n() {
        assert!(log_binomial_coefficient(3, 4).is_err());
    }

    fn big_ln_choose(n: u64, k: u64) -> f64 {
        use num_bigint::BigUint;
        let mut c = BigUint::from(1u32);
        for i in 0..k {
            c = c * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        // ln via bit length: c = m * 2^e with m in [0.5, 1)
        let bits = c.bits();
        let shift = bits.saturating_sub(64);
        let top: u64 = (c >> shift).try_into().unwrap();
        (top as f64).ln() + (shift as f64) * std::f64::consts::LN_2
    }

    #[test]
    fn binomial_edge_cases() {
        let src = RandomSource::new(7);
        assert_eq!(binomial_sample(0, Probability::new(0.4).unwrap(), &src), 0);
        assert_eq!(binomial_sample(10, Probability::new(1.0).unwrap(), &src), 10);
        assert_eq!(binomial_sample(10, Probability::new(0.0).unwrap(), &src), 0);
    }

    #[test]
    fn binomial_large_sample_concentrates() {
        let src = RandomSource::new(42);
        let n = 1_000_000u64;
        let p = Probability::new(0.3).unwrap();
        let k = binomial_sample(n, p, &src);
        let rate = k as f64 / n as f64;
        assert!((rate - 0.3).abs() <= 3.0 * (0.3f64 * 0.7 / n as f64).sqrt());
    }

    #[test]
    fn binomial_empirical_means() {
        for &(n, p) in &[(10u64, 0.1), (10, 0.5), (10, 0.9), (1000, 0.1), (1000, 0.5), (1000, 0.9)] {
            let prob = Probability::new(p).unwrap();
            let base = RandomSource::with_stream(3, 99);
            let reps = 100_000u64;
            let total: u64 = (0..reps).map(|i| binomial_sample(n, prob, &base.substream(i))).sum();
            let mean = total as f64 / reps as f64;
            let se = (n as f64 * p * (1.0 - p) / reps as f64).sqrt();
            assert!(
                (mean - n as f64 * p).abs() <= 3.0 * se,
                "n={n} p={p} mean={mean}"
            );
        }
    }

    #[test]
    fn source_determinism() {
        let a = RandomSource::with_stream(11, 4);
        let b = RandomSource::with_stream(11, 4);
        let p = Probability::new(0.37).unwrap();
        let seq_a: Vec<u64> = (0..64).map(|i| binomial_sample(100, p, &a.substream(i))).collect();
        let seq_b: Vec<u64> = (0..64).map(|i| binomial_sample(100, p, &b.substream(i))).collect();
        assert_eq!(seq_a, seq_b);
        let other: Vec<u64> =
            (0..64).map(|i| binomial_sample(100, p, &RandomSource::with_stream(11, 5).substream(i))).collect();
        assert_ne!(seq_a, other);
    }

    proptest! {
        #[test]
        fn cdf_monotone(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            prop_assert!(phi(lo) <= phi(hi));
        }

        #[test]
        fn cdf_reflection(x in -20.0f64..20.0) {
            prop_assert!((phi(x) + phi(-x) - 1.0).abs() <= 1e-15);
        }

        #[test]
        fn quantile_round_trip(x in -6.0f64..6.0) {
            let p = phi(x);
            // Above x ~ 5.2 the rounding of p near 1.0 alone costs more than
            // 1e-9 in x (ulp / pdf); 2e-8 is the attainable bound at x = 6.
            let tol = if x > 5.2 { 2e-8 } else { 1e-9 };
            prop_assert!((quantile_unchecked(p) - x).abs() <= tol);
        }

        #[test]
        fn log_binomial_matches_bigint(n in 1u64..2000, frac in 0.0f64..1.0) {
            let k = ((n as f64) * frac) as u64;
            let exact = big_ln_choose(n, k.min(n - k));
            let got = log_binomial_coefficient(n, k).unwrap();
            if exact == 0.0 {
                prop_assert!(got.abs() <= 1e-12);
            } else {
                prop_assert!(((got - exact) / exact).abs() <= 1e-10);
            }
        }
    }
}
