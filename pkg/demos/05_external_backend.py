"""
Driving a backend through the file exchange
===========================================

Any role can be served by an external command. Here the reference server
(``python -m cxrval.adapters.external``) stands in for a real model, so the
scores match the in-process phantom backends exactly.
"""

import sys
import tempfile

from cxrval.adapters.base import ROLES, AdapterRegistry
from cxrval.adapters.external import ExternalAdapter
from cxrval.adapters.phantom import phantom_registry
from cxrval.phantom import make_phantom_study
from cxrval.scoring import dual_score

work = tempfile.mkdtemp(prefix="cxrval-demo-")
external = AdapterRegistry()
for role in ROLES:
    external.bind(role, ExternalAdapter(role, [sys.executable, "-m", "cxrval.adapters.external"], f"{work}/{role}",
                                         backend_id=f"reference-{role}"))
print("backends:", external.backend_ids())

study, _ = make_phantom_study({"pathologies": ["Consolidation"], "seed": 8})
a = dual_score(study, external)
b = dual_score(study, phantom_registry())
print(f"external   MS-SSIM {a.aggregate_ms_ssim:.4f}  chi2 {a.aggregate_chi2:.4f}")
print(f"in-process MS-SSIM {b.aggregate_ms_ssim:.4f}  chi2 {b.aggregate_chi2:.4f}")
print("request directories kept under", work)
