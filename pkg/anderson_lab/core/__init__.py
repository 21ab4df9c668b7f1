"""Lattice geometry, result records, errors and the run ledger."""

from .errors import LabError
from .lattice import Box, Momentum, Site, TorusGrid
from .ledger import RunLedger, RunLedgerStore
from .models import DecayFit, SolverReport

__all__ = ["Box", "DecayFit", "LabError", "Momentum", "RunLedger", "RunLedgerStore", "Site", "SolverReport", "TorusGrid"]
