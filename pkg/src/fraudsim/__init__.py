"""Simulation and verification of the degenerate-noise global minimization diffusion.

``dX = -beta grad U(X) dt + sqrt(2 U(X)) dB`` on the flat torus or on a
confined Euclidean space, together with the spherical integrals that govern
its capture rate near each global minimizer.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .errors import (  # noqa: E402
    BuildError,
    CapabilityError,
    ConfigError,
    DimensionError,
    RegimeError,
    VerdictError,
    VerificationError,
)
from .spectral import (  # noqa: E402
    BetaThresholds,
    Spectrum,
    SphereSample,
    beta_thresholds,
    beta_zero,
    lambda_avg,
    sample_mu,
    sphere_integral_z,
    two_point_lambda_scan,
)
from .landscape import (  # noqa: E402
    Landscape,
    Well,
    build_euclidean_landscape,
    build_torus_landscape,
    load_landscape,
    verify_landscape,
)
from .sde import (  # noqa: E402
    EnsembleRecord,
    PathRecord,
    SimParams,
    SpherePathRecord,
    apply_generator_fd,
    carre_du_champ_fd,
    simulate_ensemble,
    simulate_path,
    simulate_sphere,
)
from .analysis import (  # noqa: E402
    InvariantGrid,
    RateVerdict,
    invariant_comparison,
    invariant_grid,
    lyapunov_rate,
    occupation_fraction,
    selection_stats,
    spherical_inequality_check,
    tv_decay_probe,
)
from .config import ExperimentConfig, parse_config, validate_config  # noqa: E402
from .runner import Report, run_experiment  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
