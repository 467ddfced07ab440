#pragma once

#include "canqa/error.hpp"
#include "canqa/log.hpp"
#include "canqa/digest.hpp"
#include "canqa/frame.hpp"
#include "canqa/ingest.hpp"
#include "canqa/window.hpp"
#include "canqa/stats.hpp"
#include "canqa/thresholds.hpp"
#include "canqa/baseline.hpp"
#include "canqa/features.hpp"
#include "canqa/templates.hpp"
#include "canqa/generator.hpp"
#include "canqa/dataset.hpp"
#include "canqa/prompt.hpp"
#include "canqa/endpoint.hpp"
#include "canqa/eval.hpp"
#include "canqa/config.hpp"
#include "canqa/simulate.hpp"
#include "canqa/pipeline.hpp"
