"""Truncated multi-mode Fock space and Hamiltonian assembly."""
from __future__ import annotations

import os
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import DomainError, InputError, StructuralError
from ..process_algebra import EffectiveProcess, InteractionVertex, Mode

DEFAULT_MAX_DIM = 10**6
MAX_DIM_ENV = "SYNTHWAVE_MAX_DIM"


def configured_max_dim() -> int:
    raw = os.environ.get(MAX_DIM_ENV)
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"{MAX_DIM_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise InputError(f"{MAX_DIM_ENV} must be positive")
    return value


def _destroy(n_max: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1, format="csr")


class HilbertSpace:
    """Tensor product of truncated Fock spaces, one per mode.

    Mode order fixes the tensor ordering (first mode is the most significant
    index).  ``cutoffs[j]`` is the largest photon number kept for mode ``j``.
    """

    def __init__(self, modes: Sequence[Mode], cutoffs: int | Sequence[int] | Mapping[str, int] = 5,
                 max_dim: int | None = None):
        self.modes = tuple(modes)
        if not self.modes:
            raise StructuralError("Hilbert space needs at least one mode")
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise StructuralError("duplicate mode labels in Hilbert space")
        if isinstance(cutoffs, Mapping):
            cutoffs = [cutoffs[m.label] for m in self.modes]
        elif np.isscalar(cutoffs):
            cutoffs = [int(cutoffs)] * len(self.modes)
        self.cutoffs = tuple(int(c) for c in cutoffs)
        if len(self.cutoffs) != len(self.modes):
            raise StructuralError("one cutoff per mode required")
        if min(self.cutoffs) < 1:
            raise DomainError("cutoffs must be >= 1")
        self.max_dim = configured_max_dim() if max_dim is None else int(max_dim)
        self.dims = tuple(c + 1 for c in self.cutoffs)
        self.dim = int(np.prod(self.dims))
        if self.dim > self.max_dim:
            raise DomainError(f"Hilbert dimension {self.dim} exceeds limit {self.max_dim}")
        self._index = {m.label: i for i, m in enumerate(self.modes)}
        self._ops: dict[str, sp.csr_matrix] = {}

    def __repr__(self):
        body = ", ".join(f"{m.label}:{c}" for m, c in zip(self.modes, self.cutoffs))
        return f"HilbertSpace({body}; dim={self.dim})"

    def index(self, mode: Mode | str) -> int:
        label = mode if isinstance(mode, str) else mode.label
        try:
            return self._index[label]
        except KeyError:
            raise StructuralError(f"mode {label!r} is not part of this Hilbert space") from None

    def mode(self, label: str) -> Mode:
        return self.modes[self.index(label)]

    def destroy(self, mode: Mode | str) -> sp.csr_matrix:
        j = self.index(mode)
        label = self.modes[j].label
        if label not in self._ops:
            left = int(np.prod(self.dims[:j]))
            right = int(np.prod(self.dims[j + 1:]))
            op = sp.kron(sp.identity(left, format="csr"),
                         sp.kron(_destroy(self.cutoffs[j]), sp.identity(right, format="csr")))
            self._ops[label] = sp.csr_matrix(op)
        return self._ops[label]

    def number(self, mode: Mode | str) -> sp.csr_matrix:
        a = self.destroy(mode)
        return sp.csr_matrix(a.T @ a)

    def identity(self) -> sp.csr_matrix:
        return sp.identity(self.dim, dtype=complex, format="csr")

    def basis_index(self, occupation: Mapping[str, int] | Sequence[int]) -> int:
        if isinstance(occupation, Mapping):
            occupation = [occupation.get(m.label, 0) for m in self.modes]
        return int(np.ravel_multi_index(tuple(occupation), self.dims))

    def fock_state(self, occupation) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.basis_index(occupation)] = 1
        return psi

    def with_cutoffs(self, cutoffs) -> "HilbertSpace":
        return HilbertSpace(self.modes, cutoffs, self.max_dim)


def term_operator(space: HilbertSpace, term: InteractionVertex | EffectiveProcess) -> sp.csr_matrix:
    """``g * prod(legs)`` as an ordered operator product (no h.c.)."""
    op = space.identity()
    for leg in term.legs:
        if leg.label not in space._index or space.mode(leg.label) != leg.mode:
            raise StructuralError(f"term leg on mode {leg.label!r} not in Hilbert space")
        a = space.destroy(leg.mode)
        op = op @ (a.T if leg.dagger else a)
    return sp.csr_matrix(op * term.coupling)


def build_hamiltonian(space: HilbertSpace, terms: Sequence[InteractionVertex | EffectiveProcess],
                      include_detuning: bool = True, allow_non_hermitian: bool = False,
                      atol: float = 1e-12) -> sp.csr_matrix:
    """Sparse Hamiltonian ``sum_j delta_j n_j + sum(term [+ h.c.])``.

    Terms flagged ``hermitian_pair`` are added together with their conjugate.
    An unpaired term whose operator is not Hermitian is rejected unless
    ``allow_non_hermitian`` is set.
    """
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    if include_detuning:
        for mode in space.modes:
            if mode.delta:
                H = H + mode.delta * space.number(mode)
    for term in terms:
        op = term_operator(space, term)
        if term.hermitian_pair:
            op = op + op.conj().T
        elif not allow_non_hermitian:
            diff = abs(op - op.conj().T)
            scale = max(abs(op).max() if op.nnz else 0.0, 1.0)
            if diff.nnz and diff.max() > atol * scale:
                raise InputError(f"term {term} is not Hermitian and no h.c. partner is implied")
        H = H + op
    return sp.csr_matrix(H)
