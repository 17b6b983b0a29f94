#pragma once
// Umbrella header.

#include "resolwe/grammar.hpp"
#include "resolwe/logic.hpp"
#include "resolwe/metrics.hpp"
#include "resolwe/mln.hpp"
#include "resolwe/model_io.hpp"
#include "resolwe/pipeline.hpp"
#include "resolwe/selection.hpp"
#include "resolwe/stream.hpp"
#include "resolwe/synth.hpp"
