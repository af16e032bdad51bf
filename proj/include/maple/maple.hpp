#pragma once

// Convenience umbrella: the whole pipeline library in one include.

#include "maple/answers.hpp"
#include "maple/cluster.hpp"
#include "maple/config.hpp"
#include "maple/dataset.hpp"
#include "maple/errors.hpp"
#include "maple/gateway.hpp"
#include "maple/http_provider.hpp"
#include "maple/judge.hpp"
#include "maple/log.hpp"
#include "maple/pipeline.hpp"
#include "maple/prompt.hpp"
#include "maple/report.hpp"
#include "maple/run_store.hpp"
#include "maple/scoring.hpp"
#include "maple/stage1.hpp"
#include "maple/strings.hpp"
#include "maple/taxonomy.hpp"
