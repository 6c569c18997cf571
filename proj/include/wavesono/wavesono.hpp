/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The wavesono authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "wavesono/errors.hpp"
#include "wavesono/image_grid.hpp"
#include "wavesono/image_io.hpp"
#include "wavesono/metrics.hpp"
#include "wavesono/tissue_model.hpp"
#include "wavesono/parallel.hpp"
#include "wavesono/wave_solver.hpp"
#include "wavesono/filters.hpp"
#include "wavesono/fwi.hpp"
#include "wavesono/rng.hpp"
#include "wavesono/domain_adapt.hpp"
#include "wavesono/recon_losses.hpp"
#include "wavesono/phantom.hpp"
#include "wavesono/record_io.hpp"
#include "wavesono/pipeline.hpp"
