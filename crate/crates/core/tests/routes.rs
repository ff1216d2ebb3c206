use rabi_ising::domain_wall::{amplitude_series, partition_series, RngSpec, SeriesOptions};
use rabi_ising::fock::FockOracle;
use rabi_ising::trotter::{
    amplitude_ising_exact, amplitude_ising_transfer, amplitude_recurrence, Mode,
};
use rabi_ising::{CoherentLabel, Parity, RabiParams};

fn lab(re: f64, im: f64) -> CoherentLabel {
    CoherentLabel::from_parts(re, im).unwrap()
}

#[test]
fn ising_truncation_tracks_series_truncation() {
    // same wall budget on both sides; the remaining gap is the O(1/n) splitting error
    let p = RabiParams::new(0.3, 1.0, 0.5, Parity::Plus).unwrap();
    let (a, b) = (lab(-0.2, 0.5), lab(0.1, 0.3));
    let t = 1.5;
    for walls in [1, 3] {
        let opts = SeriesOptions::new(walls, 100_000, RngSpec::new(3, walls as u64));
        let s = amplitude_series(&p, a, b, t, &opts).unwrap();
        let gaps: Vec<f64> = [256, 512]
            .iter()
            .map(|&n| {
                let v = amplitude_ising_transfer(&p, a, b, t, n, Mode::Real, walls, None)
                    .unwrap()
                    .total;
                (v - s.value).norm()
            })
            .collect();
        assert!(
            gaps[1] < 0.6 * gaps[0] + 3.0 * s.stderr,
            "walls {walls}: {gaps:?}"
        );
        assert!(gaps[1] < 0.01 + 3.0 * s.stderr, "walls {walls}: {gaps:?}");
    }
}

#[test]
fn recurrence_and_ising_gap_closes_like_one_over_n() {
    // different operator orderings of the same first-order splitting
    let p = RabiParams::new(0.7, 1.2, 0.9, Parity::Minus).unwrap();
    let (a, b) = (lab(0.4, -0.3), lab(-0.5, 0.2));
    let gap = |n| {
        let r = amplitude_recurrence(&p, a, b, 2.2, n).unwrap();
        let i = amplitude_ising_exact(&p, a, b, 2.2, n, Mode::Real, None).unwrap();
        (r - i).norm()
    };
    let (g8, g16) = (gap(8), gap(16));
    assert!((g16 / g8 - 0.5).abs() < 0.15, "{g8} {g16}");
}

#[test]
fn euclidean_transfer_converges_to_spectral_sum() {
    let p = RabiParams::new(0.3, 1.0, 0.4, Parity::Plus).unwrap();
    let (a, b) = (lab(0.3, 0.1), lab(-0.2, 0.4));
    let exact = FockOracle::new(p, 80)
        .unwrap()
        .imag_time(a, b, 1.0)
        .unwrap();
    let errs: Vec<f64> = [128, 256]
        .iter()
        .map(|&n| {
            let v = amplitude_ising_transfer(&p, a, b, 1.0, n, Mode::Euclidean, 10, None)
                .unwrap()
                .total;
            (v - exact).norm() / exact.norm()
        })
        .collect();
    assert!(errs[1] < 0.6 * errs[0] && errs[1] < 5e-3, "{errs:?}");
}

#[test]
fn series_is_reproducible_per_seed() {
    let p = RabiParams::new(0.3, 1.0, 0.5, Parity::Plus).unwrap();
    let (a, b) = (lab(-0.2, 0.5), lab(0.1, 0.3));
    let opts = SeriesOptions::new(6, 5_000, RngSpec::new(42, 9));
    let x = amplitude_series(&p, a, b, 4.0, &opts).unwrap();
    let y = amplitude_series(&p, a, b, 4.0, &opts).unwrap();
    assert_eq!(x, y);
    let other = SeriesOptions::new(6, 5_000, RngSpec::new(43, 9));
    assert_ne!(
        x.value,
        amplitude_series(&p, a, b, 4.0, &other).unwrap().value
    );
    let z1 = partition_series(&p, 1.0, &opts).unwrap();
    let z2 = partition_series(&p, 1.0, &opts).unwrap();
    assert_eq!(z1.value.re.to_bits(), z2.value.re.to_bits());
}

#[test]
fn parity_sectors_are_related_by_flipping_omega0() {
    let plus = RabiParams::new(0.4, 1.0, 0.6, Parity::Plus).unwrap();
    let minus = RabiParams::new(-0.4, 1.0, 0.6, Parity::Minus).unwrap();
    let (a, b) = (lab(0.1, 0.2), lab(0.3, -0.1));
    let x = FockOracle::new(plus, 60)
        .unwrap()
        .real_time(a, b, 2.5)
        .unwrap();
    let y = FockOracle::new(minus, 60)
        .unwrap()
        .real_time(a, b, 2.5)
        .unwrap();
    assert!((x - y).norm() < 1e-12);
}
