# Copyright 2026 The nflfed Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Privacy, utility and efficiency trade-offs in federated learning."""

import json

from ._nflfed import (
    NflfedError,
    PaillierKeypair,
    __version__,
    direct_label_inference,
    gaussian_tv,
    gaussian_tv_sandwich,
    js_divergence,
    kl_divergence,
    privacy_leakage,
    run_cli,
    tv_distance,
)
from . import _nflfed


def simulate(scenario):
    """Runs a scenario dict and returns the trace as a dict."""
    return json.loads(_nflfed._simulate(json.dumps(scenario)))


def two_atom_evaluate(mechanism):
    """Exact trade-off report for a mechanism dict on the two-atom scenario."""
    return json.loads(_nflfed._two_atom_evaluate(json.dumps(mechanism)))


def mechanism_bounds(mechanism, c1, xi, delta=None, xi_gamma=None, dims=1, sigma0=()):
    """Closed-form privacy, utility and efficiency lower bounds."""
    return json.loads(
        _nflfed._mechanism_bounds(json.dumps(mechanism), c1, xi, delta, xi_gamma, dims, list(sigma0)))


__all__ = [
    "NflfedError", "PaillierKeypair", "__version__", "direct_label_inference", "gaussian_tv",
    "gaussian_tv_sandwich", "js_divergence", "kl_divergence", "mechanism_bounds", "privacy_leakage",
    "run_cli", "simulate", "tv_distance", "two_atom_evaluate",
]
