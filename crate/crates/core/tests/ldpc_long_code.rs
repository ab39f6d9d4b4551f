use occ_csk::ldpc::{decode, CodeRate, LdpcCode};
use occ_csk::rng::{stream, StreamDomain};
use rand::Rng;
use rand_distr::StandardNormal;

/// BPSK over AWGN with noise deviation `sigma`; channel LLR = 2 y / sigma^2.
fn noisy_llrs<R: Rng>(word: &[u8], sigma: f64, rng: &mut R) -> Vec<f64> {
    word.iter()
        .map(|&b| {
            let x = if b == 0 { 1.0 } else { -1.0 };
            let n: f64 = rng.sample(StandardNormal);
            2.0 * (x + sigma * n) / (sigma * sigma)
        })
        .collect()
}

#[test]
fn long_code_corrects_moderate_noise() {
    let code = LdpcCode::dvbs2(CodeRate::R1_2).unwrap();
    let mut rng = stream(24, StreamDomain::Auxiliary, 0);
    let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
    let word = code.encode(&info).unwrap();
    // Eb/N0 = 1 / (2 R sigma^2), about 1.9 dB here, above the rate-1/2 threshold.
    let llr = noisy_llrs(&word, 0.8, &mut rng);
    let raw_errors = llr.iter().zip(&word).filter(|(l, &b)| (**l < 0.0) != (b == 1)).count();
    assert!(raw_errors > 1000);
    let out = decode(&code, &llr, 50).unwrap();
    assert!(out.converged);
    assert_eq!(out.info_bits(), &info[..]);
}
