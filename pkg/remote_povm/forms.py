"""
Forms for measurement documents and command-line configuration.
"""
import json
import logging
import math

import numpy as np
from django import forms
from django.conf import settings
from django.core.exceptions import ValidationError

from .conf import get_tolerances
from .models import CommandConfig, SimulationMode

logger = logging.getLogger(__name__)

COMMAND_CHOICES = [
    ('analyze', 'analyze'),
    ('remote_run', 'remote_run'),
    ('fig1', 'fig1'),
    ('capability', 'capability'),
    ('random_suite', 'random_suite'),
]

MODE_CHOICES = [(mode.value, mode.value) for mode in SimulationMode]

MAX_SEED = 2 ** 64 - 1

# Off-norm pairs closer than this are rescaled instead of rejected
PAIR_RENORMALIZE_WINDOW = 1e-3


class MeasurementDocumentForm(forms.Form):
    """
    Form for a POVM or Kraus JSON document:
    {"n_qubits": int, "kind": "povm"|"kraus", "operators": [matrix, ...]}
    with every matrix entry written as [re, im] and an optional "state" list of
    [re, im] amplitudes for the input on Bob's system.
    """

    document = forms.CharField(strip=False)

    def clean_document(self):
        """
        Parse and shape-check the document.

        Returns:
            dict with n_qubits, kind and operators as complex numpy arrays
        """
        text = self.cleaned_data.get('document')

        try:
            payload = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"Invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")

        if not isinstance(payload, dict):
            raise ValidationError("Document must be a JSON object")

        missing = [key for key in ('n_qubits', 'kind', 'operators') if key not in payload]
        if missing:
            raise ValidationError(f"Missing field(s): {', '.join(missing)}")

        n_qubits = payload['n_qubits']
        max_qubits = getattr(settings, 'POVM_MAX_QUBITS', 3)
        if isinstance(n_qubits, bool) or not isinstance(n_qubits, int) or not 1 <= n_qubits <= max_qubits:
            raise ValidationError(f"n_qubits must be an integer in 1..{max_qubits}")

        kind = payload['kind']
        if kind not in ('povm', 'kraus'):
            raise ValidationError("kind must be 'povm' or 'kraus'")

        operators = payload['operators']
        if not isinstance(operators, list) or not operators:
            raise ValidationError("operators must be a non-empty list")

        dim = 2 ** n_qubits
        matrices = [self._parse_matrix(matrix, dim, index) for index, matrix in enumerate(operators)]

        state = None
        if payload.get('state') is not None:
            state = self._parse_state(payload['state'], dim)

        return {'n_qubits': n_qubits, 'kind': kind, 'operators': matrices, 'state': state}

    @staticmethod
    def _parse_entry(entry, where: str) -> complex:
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)
        ):
            raise ValidationError(f"{where} must be a [re, im] pair of numbers")
        if not all(math.isfinite(x) for x in entry):
            raise ValidationError(f"{where} is not finite")
        return complex(entry[0], entry[1])

    @classmethod
    def _parse_state(cls, amplitudes, dim: int) -> np.ndarray:
        if not isinstance(amplitudes, list) or len(amplitudes) != dim:
            raise ValidationError(f"state must list {dim} amplitudes")
        vector = np.array([cls._parse_entry(entry, f"state[{i}]") for i, entry in enumerate(amplitudes)])
        if abs(np.linalg.norm(vector) - 1.0) > get_tolerances().normalization:
            raise ValidationError(f"state has norm {np.linalg.norm(vector):.12f}, expected 1")
        return vector

    @classmethod
    def _parse_matrix(cls, matrix, dim: int, index: int) -> np.ndarray:
        where = f"operators[{index}]"
        if not isinstance(matrix, list) or len(matrix) != dim:
            raise ValidationError(f"{where} must have {dim} rows")

        result = np.zeros((dim, dim), dtype=complex)
        for i, row in enumerate(matrix):
            if not isinstance(row, list) or len(row) != dim:
                raise ValidationError(f"{where}[{i}] must have {dim} entries")
            for j, entry in enumerate(row):
                result[i, j] = cls._parse_entry(entry, f"{where}[{i}][{j}]")
        return result


class CommandConfigForm(forms.Form):
    """
    Form validating the flags of one management command.
    """

    command = forms.ChoiceField(choices=COMMAND_CHOICES)
    mode = forms.ChoiceField(choices=MODE_CHOICES, required=False)
    input = forms.CharField(required=False)
    output = forms.CharField(required=False)
    seed = forms.IntegerField(required=False, min_value=0, max_value=MAX_SEED)
    shots = forms.IntegerField(required=False, min_value=1)
    alpha = forms.FloatField(required=False)
    beta = forms.FloatField(required=False)
    n = forms.IntegerField(required=False, min_value=1, max_value=2)
    count = forms.IntegerField(required=False, min_value=0)

    REQUIRED = {
        'analyze': ('input',),
        'remote_run': ('input',),
        'fig1': ('alpha', 'beta'),
        'capability': ('input',),
        'random_suite': ('n', 'count'),
    }

    def clean(self):
        cleaned_data = super().clean()
        command = cleaned_data.get('command')
        if command is None:
            return cleaned_data

        for name in self.REQUIRED[command]:
            if cleaned_data.get(name) in (None, ''):
                self.add_error(name, f"--{name} is required for {command}")

        if command == 'fig1' and cleaned_data.get('alpha') is not None and cleaned_data.get('beta') is not None:
            self._clean_pair(cleaned_data)

        return cleaned_data

    def _clean_pair(self, cleaned_data):
        alpha, beta = cleaned_data['alpha'], cleaned_data['beta']
        if alpha <= 0 or beta <= 0:
            raise ValidationError("alpha and beta must be positive")

        norm = math.hypot(alpha, beta)
        if abs(norm - 1.0) >= PAIR_RENORMALIZE_WINDOW:
            raise ValidationError(f"alpha^2 + beta^2 = {norm ** 2:.6f}, expected 1")
        if norm != 1.0:
            logger.warning(f"Rescaling (alpha, beta) = ({alpha}, {beta}) to unit norm")
            alpha, beta = alpha / norm, beta / norm

        if alpha > beta:
            raise ValidationError("alpha must not exceed beta: swap the roles of |0> and |1>")

        cleaned_data['alpha'], cleaned_data['beta'] = alpha, beta

    def to_config(self) -> CommandConfig:
        """Validated configuration with settings defaults applied."""
        data = self.cleaned_data
        default_mode = SimulationMode.SAMPLED if data['command'] == 'fig1' else SimulationMode.EXACT
        return CommandConfig(
            command=data['command'],
            mode=SimulationMode(data['mode']) if data.get('mode') else default_mode,
            input=data.get('input') or None,
            output=data.get('output') or None,
            seed=data['seed'] if data.get('seed') is not None else settings.POVM_DEFAULT_SEED,
            shots=data['shots'] if data.get('shots') is not None else settings.POVM_DEFAULT_SHOTS,
            alpha=data.get('alpha'),
            beta=data.get('beta'),
            n=data.get('n'),
            count=data.get('count'),
        )
