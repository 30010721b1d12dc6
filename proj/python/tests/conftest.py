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
"""Imports lmbrl from LMBRL_TEST_PACKAGE_DIR when set (the CMake build tree)."""

import os
import sys

_package_dir = os.environ.get("LMBRL_TEST_PACKAGE_DIR")
if _package_dir:
    sys.meta_path[:] = [
        f for f in sys.meta_path if type(f).__name__ != "ScikitBuildRedirectingFinder"
    ]
    sys.path.insert(0, _package_dir)
