// Copyright 2026 The netexp Authors.
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

#include "netexp/common.hpp"
#include "netexp/counter_rng.hpp"
#include "netexp/design.hpp"
#include "netexp/dsl.hpp"
#include "netexp/exposure.hpp"
#include "netexp/graph.hpp"
#include "netexp/hash.hpp"
#include "netexp/inference.hpp"
#include "netexp/io.hpp"
#include "netexp/parallel.hpp"
#include "netexp/randomizer.hpp"
#include "netexp/sim.hpp"
#include "netexp/statistics.hpp"
