"""Multi-server relaxed-privacy information retrieval toolkit."""

from .analysis import (
    CostEstimate,
    PrivacyBound,
    cost_model,
    delta_subset,
    eps_anon_sparse,
    eps_bundled,
    eps_compose,
    eps_direct,
    eps_sparse,
    naive_composition_deltas,
)
from .core import (
    Database,
    ParameterError,
    RngStream,
    SystemParams,
    parity_probability,
    sample_uniform_index,
    xor_records,
)
from .mechanisms import (
    AnonSparse,
    BundledAnon,
    Chor,
    Direct,
    MechanismParams,
    NaiveAnon,
    NaiveDummy,
    QueryPlan,
    SeparatedAnon,
    Sparse,
    Subset,
    execute_plan,
    reconstruct,
)

__all__ = [
    "AnonSparse",
    "BundledAnon",
    "Chor",
    "CostEstimate",
    "Database",
    "Direct",
    "MechanismParams",
    "NaiveAnon",
    "NaiveDummy",
    "ParameterError",
    "PrivacyBound",
    "QueryPlan",
    "RngStream",
    "SeparatedAnon",
    "Sparse",
    "Subset",
    "SystemParams",
    "cost_model",
    "delta_subset",
    "eps_anon_sparse",
    "eps_bundled",
    "eps_compose",
    "eps_direct",
    "eps_sparse",
    "execute_plan",
    "naive_composition_deltas",
    "parity_probability",
    "reconstruct",
    "sample_uniform_index",
    "xor_records",
]

__version__ = "0.1.0"
