//
// Copyright 2026 The treerec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include "treerec/baselines.hpp"
#include "treerec/catalog.hpp"
#include "treerec/cluster.hpp"
#include "treerec/embed.hpp"
#include "treerec/errors.hpp"
#include "treerec/eval.hpp"
#include "treerec/llm.hpp"
#include "treerec/providers.hpp"
#include "treerec/ranking.hpp"
#include "treerec/search.hpp"
#include "treerec/solutions.hpp"
#include "treerec/summarize.hpp"
#include "treerec/tree.hpp"
