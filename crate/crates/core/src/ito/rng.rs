//! Deterministic per-path random numbers.
//!
//! Every path draws from its own ChaCha20 stream selected by the path
//! index, so ensembles are bit-identical no matter how paths are split
//! across threads. ChaCha20 is counter-based with a published algorithm,
//! which keeps seeds portable; normals come from an inverse-CDF transform
//! so a given (seed, path) pair always yields the same variates.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Expands a 64-bit user seed to the 256-bit ChaCha key with splitmix64,
/// the standard remedy for low-entropy seeding.
fn expand_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&next().to_le_bytes());
    }
    key
}

/// RNG for one path: shared key from the seed, stream = path index.
pub(crate) fn path_rng(seed: u64, path: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(expand_seed(seed));
    rng.set_stream(path);
    rng
}

/// Uniform on the open interval (0, 1): 53 significant bits, centered so
/// neither endpoint can occur.
pub(crate) fn uniform_open01(rng: &mut ChaCha20Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw via the inverse CDF.
pub(crate) fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    inverse_normal_cdf(uniform_open01(rng))
}

/// Inverse of the standard normal CDF, accurate to about 1e-16 relative
/// (Wichura's rational-minimax scheme: a central branch plus two tail
/// branches in sqrt(-ln p)).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_9e4)
            * r
            + 4.592_195_393_154_987_146e4)
            * r
            + 1.373_169_376_550_946_1e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_608;
        let den = ((((((5.226_495_278_852_545_23e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271_06e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751_1e3)
            * r
            + 6.871_870_074_920_579_083e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_382_4)
            * r
            + 3.647_848_324_763_204_605)
            * r
            + 5.769_497_221_460_691_405)
            * r
            + 4.630_337_846_156_545_296)
            * r
            + 1.423_437_110_749_683_577_3;
        let den = ((((((1.050_750_071_644_416_84e-9 * r + 5.475_938_084_995_344_946e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_746e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_849)
            * r
            + 2.053_191_626_637_758_822)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_9e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_369)
            * r
            + 6.657_904_643_501_103_777;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_68e-5)
            * r
            + 7.868_691_311_456_132_59e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_expansion_is_stable() {
        // splitmix64 reference stream for seed 0.
        let key = expand_seed(0);
        let first = u64::from_le_bytes(key[0..8].try_into().unwrap());
        assert_eq!(first, 0xE220A8397B1DCDAF);
    }

    #[test]
    fn streams_differ_by_path() {
        let mut a = path_rng(42, 0);
        let mut b = path_rng(42, 1);
        let mut same = path_rng(42, 0);
        assert_ne!(a.next_u64(), b.next_u64());
        let mut a2 = path_rng(42, 0);
        assert_eq!(a2.next_u64(), same.next_u64());
    }

    #[test]
    fn uniform_is_strictly_inside() {
        let mut rng = path_rng(7, 3);
        for _ in 0..10_000 {
            let u = uniform_open01(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn inverse_cdf_known_points() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        // Classical two-sided 95% point.
        assert!((inverse_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.025) + 1.959963984540054).abs() < 1e-12);
        // Median absolute deviation point.
        assert!((inverse_normal_cdf(0.75) - 0.6744897501960817).abs() < 1e-12);
        // Deep tail stays finite and monotone.
        let far = inverse_normal_cdf(1e-300);
        assert!(far < -37.0 && far.is_finite());
    }

    #[test]
    fn inverse_cdf_matches_reference_implementation() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut p = 1e-12;
        while p < 1.0 - 1e-9 {
            let ours = inverse_normal_cdf(p);
            let reference = normal.inverse_cdf(p);
            assert!(
                (ours - reference).abs() <= 1e-8 * reference.abs().max(1.0),
                "p={p}: {ours} vs {reference}"
            );
            p += 0.000_37;
        }
    }

    #[test]
    fn normals_have_sane_moments() {
        let mut rng = path_rng(123, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // 3 sigma bands: SE(mean) = 1/sqrt(n), SE(var) ~ sqrt(2/n).
        assert!(mean.abs() < 3.0 / (n as f64).sqrt() + 1e-3);
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt() + 1e-3);
    }
}
