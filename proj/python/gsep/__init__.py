import json

from ._gsep import (
    CflError,
    DensityField,
    Grid,
    ModelError,
    ModelParams,
    SchemeError,
    __version__,
    bulk_exchange_rate,
    gradient_form_current,
    instantaneous_current,
    rate,
    simulate,
    solve_hydro,
    solve_tilted,
    stationary_profile,
)
from ._gsep import equilibrium_check as _equilibrium_check


def equilibrium_check(params):
    return json.loads(_equilibrium_check(params))
