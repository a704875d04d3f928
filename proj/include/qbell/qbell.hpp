#pragma once

#include "qbell/bell_ops.hpp"
#include "qbell/core.hpp"
#include "qbell/counts_io.hpp"
#include "qbell/error.hpp"
#include "qbell/experiment.hpp"
#include "qbell/measure.hpp"
#include "qbell/report.hpp"
#include "qbell/rng.hpp"
#include "qbell/stats.hpp"
