// Copyright 2026 The sicnmf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Umbrella header for the sicnmf library.

#pragma once

#include "sicnmf/core_model.hpp"
#include "sicnmf/divergences.hpp"
#include "sicnmf/error.hpp"
#include "sicnmf/io.hpp"
#include "sicnmf/phenotype.hpp"
#include "sicnmf/projections.hpp"
#include "sicnmf/solver.hpp"
#include "sicnmf/synth.hpp"
