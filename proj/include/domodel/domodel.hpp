#pragma once

#include "domodel/error.hpp"
#include "domodel/naming.hpp"
#include "domodel/metamodel.hpp"
#include "domodel/digest.hpp"
#include "domodel/llm.hpp"
#include "domodel/live_provider.hpp"
#include "domodel/prompts.hpp"
#include "domodel/lineparse.hpp"
#include "domodel/refinery.hpp"
#include "domodel/exporters.hpp"
#include "domodel/evaluation.hpp"
#include "domodel/pipeline.hpp"
#include "domodel/experiment.hpp"
#include "domodel/review.hpp"
#include "domodel/review_http.hpp"
