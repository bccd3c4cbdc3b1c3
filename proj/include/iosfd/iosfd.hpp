// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
// Umbrella header for the whole library.
#pragma once

#include "iosfd/types.hpp"
#include "iosfd/config.hpp"
#include "iosfd/channel_model.hpp"
#include "iosfd/ios_surface.hpp"
#include "iosfd/conic/embedding.hpp"
#include "iosfd/conic/solution.hpp"
#include "iosfd/conic/qcqp.hpp"
#include "iosfd/conic/sdp.hpp"
#include "iosfd/subproblems.hpp"
#include "iosfd/optimizer.hpp"
#include "iosfd/experiment.hpp"
