// SPDX-License-Identifier: Apache-2.0
//
// qdchan: quasi-deterministic mmWave channel generator
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

#ifndef QDCHAN_HPP
#define QDCHAN_HPP

#include "qdchan/distributions.hpp"
#include "qdchan/error.hpp"
#include "qdchan/geometry.hpp"
#include "qdchan/io.hpp"
#include "qdchan/materials.hpp"
#include "qdchan/metrics.hpp"
#include "qdchan/qd_core.hpp"

#endif // QDCHAN_HPP
