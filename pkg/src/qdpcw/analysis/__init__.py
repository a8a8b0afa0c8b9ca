"""Physical quantities extracted from fitted data."""

from .beta import extract_beta
from .budget import PhotonBudget, compute_budget
from .g2 import (BunchingEnvelope, G2Result, background_for_purity, extract_g2,
                 g2_from_purity, peak_areas)
from .group_index import GroupIndexCurve, extract_group_index

__all__ = ["extract_beta", "PhotonBudget", "compute_budget", "BunchingEnvelope", "G2Result",
           "extract_g2", "peak_areas", "g2_from_purity", "background_for_purity",
           "GroupIndexCurve", "extract_group_index"]
