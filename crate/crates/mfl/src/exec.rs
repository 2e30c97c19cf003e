use mfl_core::sse::Executor;
use mfl_core::Complex64;
use rayon::prelude::*;

/// Trajectories on the rayon pool. Results come back in trajectory order and
/// every draw is keyed by trajectory index, so output matches [`mfl_core::sse::Serial`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map_trajectories<T, F>(&self, states: &mut [Complex64], dim: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &mut [Complex64]) -> T + Sync + Send,
    {
        states.par_chunks_mut(dim).enumerate().map(|(j, z)| f(j, z)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfl_core::hilbert::{SpaceDescriptor, LOWER};
    use mfl_core::lindblad::LaserParams;
    use mfl_core::master::DensityMatrix;
    use mfl_core::rng::NoisePlan;
    use mfl_core::sse::{simulate_meanfield_sse, Serial, SseOptions};
    use mfl_core::states::coherent_state;

    #[test]
    fn parallel_matches_serial_bitwise() {
        let space = SpaceDescriptor::new(5).unwrap();
        let mut atom = [Complex64::new(0.0, 0.0); 2];
        atom[LOWER] = Complex64::new(1.0, 0.0);
        let rho = DensityMatrix::from_pure(&coherent_state(space, Complex64::new(0.5, 0.0), atom).unwrap()).unwrap();
        let plan = NoisePlan::new(3, 64, 1e-2);
        let opts = SseOptions::default();
        let a = simulate_meanfield_sse(LaserParams::desk(), &rho, 0.3, &plan, &opts, &Serial).unwrap();
        let b = simulate_meanfield_sse(LaserParams::desk(), &rho, 0.3, &plan, &opts, &Rayon).unwrap();
        assert_eq!(a.ensemble.as_flat(), b.ensemble.as_flat());
        assert_eq!(a.records, b.records);
    }
}
