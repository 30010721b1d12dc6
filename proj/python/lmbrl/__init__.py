# Copyright 2026 The lmbrl Authors
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
"""Latent-variable model-based reinforcement learning."""

from ._lmbrl import (
    Agent,
    EnvFamily,
    EnvSpec,
    Environment,
    ExperimentConfig,
    bootstrap_ci,
    cem_optimize,
    kl_diag_gaussian,
    pendulum_energy,
    run_test_adaptation,
    run_training,
)

__all__ = [
    "Agent",
    "EnvFamily",
    "EnvSpec",
    "Environment",
    "ExperimentConfig",
    "bootstrap_ci",
    "cem_optimize",
    "kl_diag_gaussian",
    "pendulum_energy",
    "run_test_adaptation",
    "run_training",
]
