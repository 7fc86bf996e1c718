"""Entropy and typicality of stratified measures built from rectifiable pieces.

The package is organised bottom-up:

``gmt_core``
    charts, area and coarea factors, Hausdorff measure of chart images.
``charts``, ``densities``
    the built-in charts and parameter-density families.
``measures``
    rectifiable components, stratified measures, sampling and entropies.
``disintegration``
    product and coarea chain rules.
``typicality``
    weak, strong and double typicality and stratum volumes.
``experiments``
    runners and reports for the desk-scale AEP checks.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ContractError,
    NumericError,
    ScopeError,
    StratentError,
)
from .gmt_core import (  # noqa: E402
    Chart,
    ParamDomain,
    area_factor,
    chart_measure,
    coarea_factor,
    lipschitz_estimate,
    numeric_jacobian,
)
from .measures import (  # noqa: E402
    RectifiableComponent,
    StratifiedMeasure,
    component_entropy,
    density_at,
    expected_dimension,
    marginal_law,
    mc_entropy,
    measure_from_description,
    sample,
    stratified_entropy,
)

__all__ = [
    "Chart",
    "ConfigError",
    "ContractError",
    "NumericError",
    "ParamDomain",
    "RectifiableComponent",
    "ScopeError",
    "StratentError",
    "StratifiedMeasure",
    "area_factor",
    "chart_measure",
    "coarea_factor",
    "component_entropy",
    "density_at",
    "expected_dimension",
    "lipschitz_estimate",
    "marginal_law",
    "mc_entropy",
    "measure_from_description",
    "numeric_jacobian",
    "sample",
    "stratified_entropy",
]
