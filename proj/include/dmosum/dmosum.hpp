// Copyright 2026 The dmosum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "dmosum/calibration.hpp"
#include "dmosum/core_stats.hpp"
#include "dmosum/csv.hpp"
#include "dmosum/detection.hpp"
#include "dmosum/error.hpp"
#include "dmosum/harness.hpp"
#include "dmosum/matrix.hpp"
#include "dmosum/rng.hpp"
#include "dmosum/run_config.hpp"
#include "dmosum/simgen.hpp"
#include "dmosum/table.hpp"
