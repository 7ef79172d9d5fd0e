#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vibsim_core::{Complex64, Element, GaussianCircuit};

/// Unitary two-mode circuit: squeezers, two-mode squeezer and splitters.
pub fn unitary_circuit(seed: u64, displaced: bool) -> GaussianCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut elements = Vec::new();
        for _ in 0..rng.random_range(1..5) {
            let elem = match rng.random_range(0..3) {
                0 => Element::Squeeze {
                    mode: rng.random_range(0..2),
                    r: rng.random_range(-0.6..0.6),
                    phase: rng.random_range(0.0..6.3),
                },
                1 => Element::TwoModeSqueeze { i: 0, j: 1, r: rng.random_range(-0.5..0.5) },
                _ => Element::BeamSplitter {
                    i: 0,
                    j: 1,
                    theta: rng.random_range(0.0..3.2),
                    phase: rng.random_range(0.0..6.3),
                },
            };
            elements.push(elem);
        }
        if displaced {
            elements.push(Element::Displace {
                mode: rng.random_range(0..2),
                alpha: Complex64::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)),
            });
        }
        let c = GaussianCircuit::from_elements(2, elements).unwrap();
        if c.replay().unwrap().total_mean_photon() < 2.0 {
            return c;
        }
    }
}

/// Random two-mode circuit that may include loss and thermal noise.
pub fn noisy_circuit(seed: u64) -> GaussianCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let base = unitary_circuit(seed, rng.random_bool(0.5));
    let mut elements = base.elements().to_vec();
    let at = rng.random_range(0..=elements.len());
    let channel = if rng.random_bool(0.5) {
        Element::Loss { mode: rng.random_range(0..2), transmission: rng.random_range(0.2..1.0) }
    } else {
        Element::ThermalMix {
            mode: rng.random_range(0..2),
            reflectivity: rng.random_range(0.0..0.3),
            mean_photons: rng.random_range(0.0..0.5),
        }
    };
    elements.insert(at, channel);
    GaussianCircuit::from_elements(2, elements).unwrap()
}
