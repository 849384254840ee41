# Copyright 2026 The SPDrought Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Spatiotemporal multi-task drought forecasting on gridded weekly data."""

from ._core import (
    INDEX_NAMES,
    AttributionMap,
    Checkpoint,
    ClassificationReport,
    Dataset,
    EvalReport,
    PreparedData,
    SpDroughtError,
    SplitAssignment,
    SynthConfig,
    TrainConfig,
    TrainResult,
    Window,
    assess,
    block_split,
    classification_metrics,
    completeness_gap,
    enumerate_windows,
    evaluate,
    generate_synthetic,
    integrated_gradients,
    lag_attribution,
    prepare_data,
    spatial_attention,
    train,
    weekly_percentile_threshold,
)

__all__ = [name for name in dir() if not name.startswith("_")]
