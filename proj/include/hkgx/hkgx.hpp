/*
 * Copyright 2026 The hkgx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "hkgx/config.hpp"
#include "hkgx/core.hpp"
#include "hkgx/decoder.hpp"
#include "hkgx/encoder.hpp"
#include "hkgx/error.hpp"
#include "hkgx/evaluator.hpp"
#include "hkgx/ingest.hpp"
#include "hkgx/model.hpp"
#include "hkgx/numeric.hpp"
#include "hkgx/rng.hpp"
#include "hkgx/trainer.hpp"
#include "hkgx/transform.hpp"
#include "hkgx/version.hpp"
