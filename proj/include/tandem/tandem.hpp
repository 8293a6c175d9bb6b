// Copyright 2026 The Tandem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include "tandem/dataset_io.hpp"
#include "tandem/error.hpp"
#include "tandem/evaluation.hpp"
#include "tandem/grpo.hpp"
#include "tandem/http_endpoint.hpp"
#include "tandem/interval.hpp"
#include "tandem/media_chunker.hpp"
#include "tandem/modality.hpp"
#include "tandem/model_client.hpp"
#include "tandem/reward_engine.hpp"
#include "tandem/run_config.hpp"
#include "tandem/structured_output.hpp"
#include "tandem/tandem_scheduler.hpp"
#include "tandem/training_log.hpp"
#include "tandem/util.hpp"
