/*
 * Copyright 2026 The tedpc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "tedpc/analytics.hpp"
#include "tedpc/concepts.hpp"
#include "tedpc/csv.hpp"
#include "tedpc/date.hpp"
#include "tedpc/dod_engine.hpp"
#include "tedpc/episodes.hpp"
#include "tedpc/error.hpp"
#include "tedpc/evaluation.hpp"
#include "tedpc/ga_engine.hpp"
#include "tedpc/ingestion.hpp"
#include "tedpc/pipeline.hpp"
#include "tedpc/synthgen.hpp"
#include "tedpc/truth.hpp"
