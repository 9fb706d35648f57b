"""Track reconstruction in a toy 4-layer pixel tracker by binary triplet
selection, with exact, simulated-annealing and simulated-VQE solvers."""

__version__ = "0.1.0"

from .geometry import (DetectorGeometry, Event, GeometryConfig, Hit,
                       TruthParticle, build_geometry, validate_event)
from .fastsim import (EnergySpectrum, LaserConfig, SimConfig, compute_xi,
                      dipole_deflection, generate_event, scattering_kick,
                      xi_to_multiplicity)
from .preselect import (Doublet, PreselectionWindow, Triplet,
                        build_doublets, build_triplets, calibrate_dx_window,
                        triplet_delta_theta)
from .qubo import (IsingHamiltonian, Qubo, QuboScaling, assemble_qubo,
                   impact, objective, to_ising)
from .solvers import (AnnealSchedule, SolveReport, SubQubo, extract_subqubos,
                      solve_annealing, solve_exact, solve_iterative)
from .vqe import VqeConfig, VqeResult, nft_update, prepare_state, run_vqe
from .trackbuild import (TrackCandidate, TrackFit, estimate_energy, fit_track,
                         match_candidate, resolve_ambiguities,
                         triplets_to_candidates)
from .metrics import (MetricsReport, TrackRecord, binned_curves, build_report,
                      duplication_rate, efficiency, energy_resolution,
                      fake_rate)
from .config import RunConfig
