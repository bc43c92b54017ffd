// Copyright 2026 The realclock Authors
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

// Umbrella header for the whole library.

#include "realclock/classical_dynamics.hpp"
#include "realclock/clock_models.hpp"
#include "realclock/effective_bath.hpp"
#include "realclock/errors.hpp"
#include "realclock/experiment.hpp"
#include "realclock/master_equation.hpp"
#include "realclock/monte_carlo.hpp"
#include "realclock/numeric.hpp"
#include "realclock/philox.hpp"
#include "realclock/quantum_core.hpp"
