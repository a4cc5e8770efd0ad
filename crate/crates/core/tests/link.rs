//! End-to-end checks of the transmit/receive chain.

use nafdm::channel::{add_noise, propagate, sample_channel, time_channel_matrix, GainModel};
use nafdm::detect::{mmse_time, soft_id};
use nafdm::modem::{add_cp, remove_cp};
use nafdm::sim::{default_suite, run_point, DetectorSpec};
use nafdm::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn afdm_mmse_at_25_db() {
    let mut run = default_suite().runs.remove(0);
    assert_eq!(run.detector, DetectorSpec::mmse());
    run.frames_per_point = 3000;
    run.min_bit_errors = 0;
    let r = run_point(&run, 25.0, 1, 0).unwrap();
    assert!(r.ber() < 1e-2, "BER {}", r.ber());
    assert!(r.bit_errors > 0);
}

#[test]
fn received_frame_matches_matrix_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = WaveformConfig::preset(Preset::Nafdm, 32, Alpha::from_lengths(32, 40).unwrap(), 2.0, 1.0)
        .unwrap()
        .with_cp_len(8);
    let modem = Modem::new(cfg).unwrap();
    let c = modem.constellation().clone();
    for _ in 0..20 {
        let x: Vec<Complex64> = (0..32).map(|_| c.point(rng.random_range(0..4))).collect();
        let ch = sample_channel(4, 3, 2.0, GainModel::Rayleigh, &mut rng).unwrap();
        let s = modem.modulate(&x).unwrap();
        let r = propagate(&add_cp(s.as_slice(), &cfg).unwrap(), &ch, &cfg).unwrap();
        let ht = time_channel_matrix(&ch, 32).unwrap();
        assert!((&r - &ht * &s).norm() < 1e-10);
        // a CP-free transmission of the cyclically extended frame gives the same samples
        let ext: Vec<Complex64> = s.iter().skip(24).chain(s.iter()).copied().collect();
        assert!((remove_cp(&ext, &cfg).unwrap() - &s).norm() < 1e-12);
    }
}

#[test]
fn soft_id_recovers_high_snr_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = WaveformConfig::preset(Preset::Nafdm, 16, Alpha::from_lengths(16, 18).unwrap(), 1.0, 1.0)
        .unwrap()
        .with_cp_len(2);
    let modem = Modem::new(cfg).unwrap();
    let corr = correlation_matrix(&cfg).unwrap();
    let c = modem.constellation().clone();
    let sigma2 = 1e-5;
    let det = DetectorConfig::new(16, sigma2, QamOrder::Qam4);
    let mut exact = 0;
    for _ in 0..200 {
        let idx: Vec<usize> = (0..16).map(|_| rng.random_range(0..4)).collect();
        let x: Vec<Complex64> = idx.iter().map(|&i| c.point(i)).collect();
        let ch = sample_channel(2, 2, 1.0, GainModel::EqualPower, &mut rng).unwrap();
        let s = modem.modulate(&x).unwrap();
        let mut r = propagate(&add_cp(s.as_slice(), &cfg).unwrap(), &ch, &cfg).unwrap();
        add_noise(r.as_mut_slice(), sigma2, &mut rng);
        let ht = time_channel_matrix(&ch, 16).unwrap();
        let xbar = modem.demodulate(mmse_time(&r, &ht, sigma2).unwrap().as_slice()).unwrap();
        let y = modem.demodulate(r.as_slice()).unwrap();
        let h_eff = modem.matrix() * &ht * modem.matrix().adjoint();
        exact += (soft_id(&xbar, &y, &h_eff, &corr, &det).unwrap().decisions == idx) as usize;
    }
    assert!(exact >= 195, "{exact}/200");
}
