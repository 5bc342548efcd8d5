//
// Copyright 2026 The qfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Umbrella header for the qfl library.

#ifndef QFL_QFL_HPP_
#define QFL_QFL_HPP_

#include "qfl/analysis.hpp"
#include "qfl/circuit.hpp"
#include "qfl/client.hpp"
#include "qfl/config.hpp"
#include "qfl/data.hpp"
#include "qfl/errors.hpp"
#include "qfl/experiment.hpp"
#include "qfl/privacy.hpp"
#include "qfl/qnn.hpp"
#include "qfl/random.hpp"
#include "qfl/server.hpp"
#include "qfl/statevector.hpp"

#endif  // QFL_QFL_HPP_
