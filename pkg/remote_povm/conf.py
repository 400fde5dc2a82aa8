"""
Tolerance record resolved from Django settings.
"""
from dataclasses import dataclass, fields

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

TOLERANCE_DEFAULTS = {
    'hermitian': 1e-10,
    'reconstruction': 1e-9,
    'psd_clamp': 1e-12,
    'normalization': 1e-10,
    'completeness': 1e-9,
    'orthogonality': 1e-9,
    'oe_offdiag': 1e-8,
    'alpha_cutoff': 1e-7,
    'unitary': 1e-9,
    'entropy_norm': 1e-9,
    'entropy_floor': 1e-15,
    'schmidt_floor': 1e-14,
    'probability': 1e-10,
    'branch_prune': 1e-15,
    'pair_norm': 1e-10,
}


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by every service."""
    hermitian: float
    reconstruction: float
    psd_clamp: float
    normalization: float
    completeness: float
    orthogonality: float
    oe_offdiag: float
    alpha_cutoff: float
    unitary: float
    entropy_norm: float
    entropy_floor: float
    schmidt_floor: float
    probability: float
    branch_prune: float
    pair_norm: float


def get_tolerances() -> Tolerances:
    """
    Return the active tolerances.

    Falls back to the defaults when Django settings are not configured,
    so the services can be used as a plain library.
    """
    try:
        overrides = getattr(settings, 'POVM_TOLERANCES', {})
    except ImproperlyConfigured:
        overrides = {}

    known = {f.name for f in fields(Tolerances)}
    values = dict(TOLERANCE_DEFAULTS)
    values.update({key: float(value) for key, value in overrides.items() if key in known})
    return Tolerances(**values)


def get_setting(name: str, default):
    """Read an optional project setting, tolerating unconfigured settings."""
    try:
        return getattr(settings, name, default)
    except ImproperlyConfigured:
        return default
