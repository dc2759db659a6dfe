#![allow(dead_code)]

use locobs_core::dynamics::DiscretizedSystem;
use locobs_core::linalg::CMat;
use locobs_core::operator::{pauli_x, pauli_y, pauli_z, sigma_plus};
use locobs_core::{build_output_map, Coefficient, LindbladSpec, NeighborhoodStructure, Operator, OutputMap};

/// Parameter layout of the four-qubit chain: α(4) β(4) γ(4) δ(3) ε(3) η(4).
pub const N_PARAMS: usize = 22;
pub const GAMMA4: usize = 11;
pub const ETA: usize = 18;

fn local(m: CMat) -> Operator {
    Operator::new(vec![2], m).unwrap()
}

/// Neighborhood of the chain that contains `site` (and `site + 1` if asked).
fn hood(site: usize) -> usize {
    site.min(3)
}

pub fn chain_spec(noise: bool) -> LindbladSpec {
    let ns = NeighborhoodStructure::chain(4).unwrap();
    let mut spec = LindbladSpec::new(vec![2; 4], ns).unwrap();
    let (x, y, z) = (local(pauli_x()), local(pauli_y()), local(pauli_z()));
    for (block, op, name) in [(0, &x, "X"), (4, &y, "Y"), (8, &z, "Z")] {
        for i in 1..=4 {
            spec.add_hamiltonian(hood(i), &[i], op, Coefficient::param(block + i - 1), &format!("{name}{i}")).unwrap();
        }
    }
    let xx = locobs_core::tensor(&[x.clone(), x.clone()]).unwrap();
    let zz = locobs_core::tensor(&[z.clone(), z.clone()]).unwrap();
    for (block, op, name) in [(12, &xx, "X"), (15, &zz, "Z")] {
        for i in 1..=3 {
            spec.add_hamiltonian(i, &[i, i + 1], op, Coefficient::param(block + i - 1), &format!("{name}{i}*{name}{}", i + 1)).unwrap();
        }
    }
    if noise {
        let sp = local(sigma_plus());
        for i in 1..=4 {
            spec.add_noise(hood(i), &[i], &sp, Coefficient::param(ETA + i - 1), &format!("plus{i}")).unwrap();
        }
    }
    spec.set_n_params(N_PARAMS).unwrap();
    spec
}

pub fn chain_output(neighborhoods: &[usize]) -> OutputMap {
    let ns = NeighborhoodStructure::chain(4).unwrap().select(neighborhoods).unwrap();
    build_output_map(&ns, &[2; 4], neighborhoods.len() < 3).unwrap()
}

pub fn ones() -> Vec<f64> {
    vec![1.0; N_PARAMS]
}

pub fn case1() -> DiscretizedSystem {
    DiscretizedSystem::from_spec(&chain_spec(false), Some(&ones()), chain_output(&[1, 2, 3]), 1.0).unwrap()
}

pub fn case2() -> DiscretizedSystem {
    DiscretizedSystem::from_spec(&chain_spec(true), Some(&ones()), chain_output(&[1, 2, 3]), 1.0).unwrap()
}

/// Ginibre-distributed random density operator of rank `rank`.
pub fn random_density(dims: &[usize], rank: usize, rng: &mut impl rand::Rng) -> Operator {
    use rand_distr::{Distribution, StandardNormal};
    let d: usize = dims.iter().product();
    let g = CMat::from_fn(d, rank, |_, _| {
        locobs_core::linalg::C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let mut m = &g * g.adjoint();
    let tr = locobs_core::linalg::trace(&m);
    m /= tr;
    Operator::new(dims.to_vec(), locobs_core::linalg::hermitian_part(&m)).unwrap()
}

pub fn random_matrix(d: usize, rng: &mut impl rand::Rng) -> CMat {
    use rand_distr::{Distribution, StandardNormal};
    CMat::from_fn(d, d, |_, _| locobs_core::linalg::C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
}

pub fn random_hermitian(d: usize, rng: &mut impl rand::Rng) -> CMat {
    locobs_core::linalg::hermitian_part(&random_matrix(d, rng))
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

pub fn case1_with_output(om: OutputMap) -> DiscretizedSystem {
    DiscretizedSystem::from_spec(&chain_spec(false), Some(&ones()), om, 1.0).unwrap()
}

/// Random generator on an n-qubit chain: every single-site Pauli, XX/YY/ZZ
/// couplings on each bond and one lowering-type noise operator per site.
pub fn random_chain_spec(n: usize, rng: &mut impl rand::Rng) -> LindbladSpec {
    use locobs_core::operator::sigma_minus;
    use rand_distr::{Distribution, StandardNormal};
    let ns = NeighborhoodStructure::chain(n).unwrap();
    let mut spec = LindbladSpec::new(vec![2; n], ns).unwrap();
    let paulis = [local(pauli_x()), local(pauli_y()), local(pauli_z())];
    let g = |rng: &mut dyn rand::RngCore| -> f64 { StandardNormal.sample(rng) };
    for i in 1..=n {
        for (p, name) in paulis.iter().zip(["X", "Y", "Z"]) {
            spec.add_hamiltonian(i.min(n - 1), &[i], p, Coefficient::constant(g(rng)), &format!("{name}{i}")).unwrap();
        }
        let sm = local(sigma_minus());
        spec.add_noise(i.min(n - 1), &[i], &sm, Coefficient::constant(0.5 * g(rng)), &format!("minus{i}")).unwrap();
    }
    for i in 1..n {
        for (p, name) in paulis.iter().zip(["X", "Y", "Z"]) {
            let pp = locobs_core::tensor(&[p.clone(), p.clone()]).unwrap();
            spec.add_hamiltonian(i, &[i, i + 1], &pp, Coefficient::constant(g(rng)), &format!("{name}{i}{name}")).unwrap();
        }
    }
    spec
}

/// Random two-qubit chain observed through single-site Paulis only.
pub fn two_qubit_system(seed: u64) -> DiscretizedSystem {
    let mut rng = rng(seed);
    let spec = random_chain_spec(2, &mut rng);
    let ns = NeighborhoodStructure::new(2, vec![vec![1], vec![2]]).unwrap();
    let om = build_output_map(&ns, &[2, 2], true).unwrap();
    DiscretizedSystem::from_spec(&spec, None, om, 0.5).unwrap()
}
