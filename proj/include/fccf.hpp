// Copyright 2026 The fccf Authors
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

#pragma once

#include "fccf/ccf.hpp"
#include "fccf/error.hpp"
#include "fccf/funcsample.hpp"
#include "fccf/globaltests.hpp"
#include "fccf/ingest.hpp"
#include "fccf/pipeline.hpp"
#include "fccf/report.hpp"
#include "fccf/simulate.hpp"
