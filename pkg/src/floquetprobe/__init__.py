"""Weak-probe absorption spectra of strongly driven multi-level media.

The package builds the harmonic (Floquet) decomposition of the probe-RWA
Lindblad master equation, solves the weak-probe steady-state linear system,
and expresses the susceptibility as a sum over decaying dressed states of a
non-Hermitian Floquet Hamiltonian.
"""

from importlib import resources

from . import errors
from .errors import FloquetProbeError
from .liouvillian import (FloquetGenerator, SuperoperatorParts,
                          apply_generator, assemble_generator, build_parts,
                          dense_matrix)
from .model import (CollapseChannel, DephasingSpec, DriveConfig, RunConfig,
                    StateSpec, SystemModel, ValidationReport, apply_overrides,
                    load_config, load_config_file, rabi_from_dipoles,
                    scale_probe, serialize_model, validate_model,
                    with_coupling_off)
from .propagation import (DensityTrajectory, GeneratorEigensystem, Trajectory,
                          detect_steady_state, eigen_evolve,
                          generator_eigensystem, integrate_full_lindblad,
                          integrate_harmonics, integrate_von_neumann_complexH)
from .spectrum import (Marker, SpectrumResult, SusceptibilityResult,
                       TruncationReport, absorption_coefficient,
                       dressed_markers, susceptibility, sweep,
                       truncation_convergence, uniform_grid)
from .stack import HarmonicStack, reconstruct_time_domain
from .weakprobe import (CoherenceVector, DressedStateSet, FloquetHamiltonian,
                        WeakProbeSystem, build_floquet_hamiltonian,
                        build_weak_probe_system, dressed_states,
                        solve_coherences_direct, solve_coherences_spectral,
                        zero_coupling_coherence)

__version__ = "0.1.0"


def bundled_config_path(name: str = "table1.toml"):
    """Path of a configuration file shipped with the package."""
    return resources.files(__name__).joinpath("data", name)
