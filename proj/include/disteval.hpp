#pragma once

#include "disteval/error.hpp"
#include "disteval/exposure.hpp"
#include "disteval/format.hpp"
#include "disteval/io.hpp"
#include "disteval/metrics.hpp"
#include "disteval/model.hpp"
#include "disteval/parallel.hpp"
#include "disteval/repetition.hpp"
#include "disteval/report.hpp"
#include "disteval/rng.hpp"
#include "disteval/special.hpp"
#include "disteval/stats.hpp"
#include "disteval/subgroup.hpp"
#include "disteval/synth.hpp"
#include "disteval/uncertainty.hpp"
