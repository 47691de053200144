#pragma once

#include "survfuse/adam.hpp"
#include "survfuse/autodiff.hpp"
#include "survfuse/checkpoint.hpp"
#include "survfuse/cohort.hpp"
#include "survfuse/error.hpp"
#include "survfuse/harness.hpp"
#include "survfuse/io_csv.hpp"
#include "survfuse/late_fusion.hpp"
#include "survfuse/matrix.hpp"
#include "survfuse/models.hpp"
#include "survfuse/params.hpp"
#include "survfuse/report.hpp"
#include "survfuse/rng.hpp"
#include "survfuse/stats.hpp"
#include "survfuse/survival.hpp"
#include "survfuse/synth.hpp"
